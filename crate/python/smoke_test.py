"""End-to-end smoke test of the dforge Python module."""

import datetime as dt

import dforge

AT = dt.datetime(2024, 3, 1, 9, 0, tzinfo=dt.timezone.utc)
RIS = "Providing Road Information Service (RIS)"


def main():
    catalog = dforge.Catalog.shipped()
    assert len(catalog) == 92
    assert [catalog.phase_count(p) for p in ("prevention", "preparedness", "response", "recovery")] == [21, 25, 25, 21]
    assert dforge.Catalog.load(catalog.to_document()).to_document() == catalog.to_document()

    template = dforge.Template.parse(dforge.FLOOD_TEMPLATE)
    assert dict(template.placeholders()).keys() == {"CouncilName", "SES LN"}
    models, pruned, _ = template.customise()
    assert len(pruned) == 6 and len(models) == 39
    assert dforge.Models.from_xml(models.to_xml()) == models

    binding = dforge.Binding.parse(dforge.WAGGA_BINDING)
    assert binding.plan_id == "wagga-wagga"
    instance, warnings = dforge.instantiate(models, binding)
    assert warnings == []
    assert dforge.check_conformance(instance, models)["findings"] == []
    try:
        dforge.instantiate(models, dforge.Binding({"SES LN": "Wagga Wagga"}, "Wagga Wagga"))
    except ValueError as e:
        assert "CouncilName" in str(e)
    else:
        raise AssertionError("unbound placeholder accepted")

    repo = dforge.Repository()
    proposals = repo.register_plan(instance, models.plan_id)
    assert len(proposals) == 39
    bulk = repo.accept_all_top("planner", at=AT)
    assert bulk["skipped"] == []
    try:
        repo.decide(proposals[0]["id"], "someone", "reject", reason="late")
    except dforge.DecisionConflict:
        pass
    else:
        raise AssertionError("second decision accepted")
    receipt = repo.transfer()
    assert sum(c["count"] for c in receipt["inserted"]) == 39
    assert repo.unit_count == 39

    cube = repo.cube(phase="response", tag="goal")
    assert cube["free"] == ["mof"]
    view = repo.view("wagga-wagga", "Road Information", "response")
    assert view["goals"][0]["label"] == RIS
    assert {r["label"] for r in view["roles"]} == {"Wagga Wagga SESLHQ", "Wagga Wagga City Council", "RTA"}

    doc = repo.export()
    assert dforge.Repository.from_export(doc).export() == doc
    print("smoke test passed")


if __name__ == "__main__":
    main()
