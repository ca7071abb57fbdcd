//! Python bindings: templates, models, bindings, the catalog and the
//! repository store. Structured results come back as plain dicts and lists.

use std::collections::BTreeSet;
use std::fmt::Display;

use chrono::{DateTime, Utc};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyKeyError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use dforge_core::abm::{parse_abm, serialize_abm, AbmSet};
use dforge_core::axes::{MofLevel, PhaseId};
use dforge_core::catalog::DmmCatalog;
use dforge_core::pipeline::{self, Binding, ConfirmError, Decision, ProposalStatus, UnboundPolicy};
use dforge_core::repository::{Axis, AxisValue, RepositoryStore, StoreError, ViewError};
use dforge_core::template::DisplanTemplate;

create_exception!(dforge, DforgeError, PyException);
create_exception!(dforge, DecisionConflict, DforgeError);

fn invalid(e: impl Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn missing(e: impl Display) -> PyErr {
    PyKeyError::new_err(e.to_string())
}

fn confirm_err(e: ConfirmError) -> PyErr {
    match e {
        ConfirmError::UnknownProposal(_) | ConfirmError::UnknownConcept(_) => missing(e),
        ConfirmError::AlreadyDecided { .. } => DecisionConflict::new_err(e.to_string()),
        _ => invalid(e),
    }
}

fn store_err(e: StoreError) -> PyErr {
    match e {
        StoreError::UnknownPlan(_) => missing(e),
        StoreError::PlanConflict(_) => DecisionConflict::new_err(e.to_string()),
        _ => invalid(e),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| DforgeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn parse_phase(raw: &str) -> PyResult<PhaseId> {
    raw.parse().map_err(invalid)
}

/// A parsed disaster plan template.
#[pyclass(frozen, module = "dforge")]
pub struct Template {
    inner: DisplanTemplate,
}

#[pymethods]
impl Template {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Template> {
        DisplanTemplate::parse(text).map(|inner| Template { inner }).map_err(invalid)
    }

    #[getter]
    fn title(&self) -> &str {
        self.inner.title()
    }

    /// Placeholder names and how often each occurs.
    fn placeholders(&self) -> Vec<(String, usize)> {
        self.inner.placeholders().iter().map(|p| (p.name.clone(), p.occurrences.len())).collect()
    }

    fn element_ids(&self) -> Vec<String> {
        self.inner.elements().iter().map(|e| e.id.clone()).collect()
    }

    fn set_mof_level(&self, element_id: &str, level: &str) -> PyResult<Template> {
        let level: MofLevel = level.parse().map_err(invalid)?;
        self.inner.set_mof_level(element_id, level).map(|inner| Template { inner }).map_err(invalid)
    }

    fn to_document(&self) -> String {
        self.inner.to_document()
    }

    /// Turns the template into models; returns `(models, pruned, marks)`.
    fn customise(&self, py: Python<'_>) -> PyResult<(Models, Py<PyAny>, Py<PyAny>)> {
        let c = pipeline::customise(&self.inner).map_err(invalid)?;
        Ok((Models { inner: c.set }, to_py(py, &c.pruned)?, to_py(py, &c.marks)?))
    }

    fn __repr__(&self) -> String {
        format!("Template({:?}, {} elements)", self.inner.title(), self.inner.elements().len())
    }
}

/// A set of agent-based models for one plan.
#[pyclass(frozen, module = "dforge")]
pub struct Models {
    inner: AbmSet,
}

#[pymethods]
impl Models {
    #[staticmethod]
    fn from_xml(doc: &str) -> PyResult<Models> {
        let parsed = parse_abm(doc).map_err(invalid)?;
        if !parsed.report.is_empty() {
            return Err(invalid(parsed.report));
        }
        Ok(Models { inner: parsed.set })
    }

    fn to_xml(&self) -> PyResult<String> {
        serialize_abm(&self.inner).map_err(invalid)
    }

    #[getter]
    fn plan_id(&self) -> &str {
        &self.inner.plan_id
    }

    fn __len__(&self) -> usize {
        self.inner.element_count()
    }

    /// One dict per element: id, kind, phase, mof and label.
    fn elements(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let rows: Vec<serde_json::Value> = self
            .inner
            .elements()
            .map(|e| {
                serde_json::json!({
                    "id": e.id(), "kind": e.kind(), "phase": e.phase(), "mof": e.mof(), "label": e.label(),
                })
            })
            .collect();
        to_py(py, &rows)
    }

    fn placeholder_names(&self) -> PyResult<Vec<String>> {
        Ok(self.inner.placeholder_names().map_err(invalid)?.into_iter().collect())
    }

    /// Consistency violations, empty when the models are consistent.
    fn violations(&self) -> Vec<String> {
        self.inner.validate().violations.iter().map(|v| v.to_string()).collect()
    }

    fn __eq__(&self, other: &Models) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Models({:?}, {} elements)", self.inner.plan_id, self.inner.element_count())
    }
}

/// Placeholder values for one locality.
#[pyclass(name = "Binding", frozen, module = "dforge")]
pub struct PyBinding {
    inner: Binding,
}

#[pymethods]
impl PyBinding {
    #[new]
    #[pyo3(signature = (entries, locality, region = ""))]
    fn new(entries: std::collections::BTreeMap<String, String>, locality: &str, region: &str) -> PyResult<PyBinding> {
        Binding::new(entries, locality, region).map(|inner| PyBinding { inner }).map_err(invalid)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyBinding> {
        Binding::parse(text).map(|inner| PyBinding { inner }).map_err(invalid)
    }

    #[getter]
    fn locality(&self) -> &str {
        self.inner.locality()
    }

    #[getter]
    fn plan_id(&self) -> String {
        self.inner.plan_id()
    }

    fn entries(&self) -> std::collections::BTreeMap<String, String> {
        self.inner.entries().clone()
    }

    fn to_document(&self) -> String {
        self.inner.to_document()
    }
}

/// Instantiates template models; returns `(instance, warnings)`.
#[pyfunction]
#[pyo3(signature = (template, binding, allow_unbound = None))]
fn instantiate(template: &Models, binding: &PyBinding, allow_unbound: Option<Vec<String>>) -> PyResult<(Models, Vec<String>)> {
    let policy = match allow_unbound {
        None => UnboundPolicy::Strict,
        Some(names) => UnboundPolicy::Allow(names.into_iter().collect::<BTreeSet<_>>()),
    };
    let out = pipeline::instantiate(&template.inner, &binding.inner, &policy).map_err(invalid)?;
    Ok((Models { inner: out.set }, out.warnings))
}

/// Compares an instance with its template; returns the report as a dict.
#[pyfunction]
fn check_conformance(py: Python<'_>, instance: &Models, template: &Models) -> PyResult<Py<PyAny>> {
    to_py(py, &pipeline::check_conformance(&instance.inner, &template.inner))
}

/// The concept catalog.
#[pyclass(frozen, module = "dforge")]
pub struct Catalog {
    inner: DmmCatalog,
}

#[pymethods]
impl Catalog {
    /// The shipped catalog with its tag annotations.
    #[staticmethod]
    fn shipped() -> Catalog {
        Catalog { inner: DmmCatalog::shipped_annotated() }
    }

    #[staticmethod]
    fn load(doc: &str) -> PyResult<Catalog> {
        DmmCatalog::load(doc).map(|inner| Catalog { inner }).map_err(invalid)
    }

    fn to_document(&self) -> String {
        self.inner.to_document()
    }

    #[getter]
    fn version(&self) -> &str {
        self.inner.version()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn phase_count(&self, phase: &str) -> PyResult<usize> {
        Ok(self.inner.phase_count(parse_phase(phase)?))
    }

    fn concepts(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.concepts())
    }

    fn concept(&self, py: Python<'_>, id: &str) -> PyResult<Py<PyAny>> {
        let c = self.inner.concept(id).ok_or_else(|| missing(format!("no concept `{id}`")))?;
        to_py(py, c)
    }
}

/// The knowledge repository: plans, proposals, decisions and the cube.
#[pyclass(module = "dforge")]
pub struct Repository {
    inner: RepositoryStore,
}

fn now() -> DateTime<Utc> {
    use chrono::Timelike;
    Utc::now().with_nanosecond(0).expect("zero nanoseconds is valid")
}

#[pymethods]
impl Repository {
    #[new]
    #[pyo3(signature = (catalog = None))]
    fn new(catalog: Option<&Catalog>) -> Repository {
        let inner = match catalog {
            Some(c) => RepositoryStore::new(c.inner.clone()),
            None => RepositoryStore::default(),
        };
        Repository { inner }
    }

    /// Rebuilds a repository from an export document.
    #[staticmethod]
    fn from_export(doc: &str) -> PyResult<Repository> {
        RepositoryStore::import(doc).map(|inner| Repository { inner }).map_err(invalid)
    }

    fn export(&self) -> String {
        self.inner.export()
    }

    fn plan_ids(&self) -> Vec<String> {
        self.inner.plans().map(|p| p.plan_id.clone()).collect()
    }

    fn plan(&self, plan_id: &str) -> PyResult<Models> {
        let p = self.inner.plan(plan_id).ok_or_else(|| missing(format!("no plan `{plan_id}`")))?;
        Ok(Models { inner: p.set.clone() })
    }

    #[getter]
    fn unit_count(&self) -> usize {
        self.inner.unit_count()
    }

    /// Registers an instance and proposes mappings for it.
    fn register_plan(&mut self, py: Python<'_>, instance: &Models, template_id: &str) -> PyResult<Py<PyAny>> {
        let plan_id = self.inner.register_plan(instance.inner.clone(), template_id).map_err(store_err)?.plan_id.clone();
        let proposals = self.inner.propose(&plan_id).map_err(store_err)?;
        to_py(py, &proposals)
    }

    #[pyo3(signature = (status = None, plan = None))]
    fn proposals(&self, py: Python<'_>, status: Option<&str>, plan: Option<&str>) -> PyResult<Py<PyAny>> {
        let status: Option<ProposalStatus> = status.map(str::parse).transpose().map_err(invalid)?;
        let rows: Vec<_> = self
            .inner
            .proposals()
            .filter(|p| status.is_none_or(|s| p.status == s))
            .filter(|p| plan.is_none_or(|id| p.element.plan_id == id))
            .collect();
        to_py(py, &rows)
    }

    /// Decides one proposal. `decision` is "accept-top", "select" (with
    /// `concept`, plus `reason` when overriding) or "reject" (with `reason`).
    #[pyo3(signature = (proposal, actor, decision = "accept-top", concept = None, reason = None, at = None))]
    #[allow(clippy::too_many_arguments)]
    fn decide(
        &mut self,
        py: Python<'_>,
        proposal: &str,
        actor: &str,
        decision: &str,
        concept: Option<String>,
        reason: Option<String>,
        at: Option<DateTime<Utc>>,
    ) -> PyResult<Py<PyAny>> {
        let decision = match decision {
            "accept-top" => Decision::AcceptTop,
            "select" => Decision::Select {
                concept: concept.ok_or_else(|| invalid("select needs a concept"))?,
                reason,
            },
            "reject" => Decision::Reject { reason: reason.unwrap_or_default() },
            other => return Err(invalid(format!("unknown decision `{other}`"))),
        };
        let outcome = self.inner.confirm(proposal, decision, actor, at.unwrap_or_else(now)).map_err(confirm_err)?;
        to_py(py, &outcome)
    }

    #[pyo3(signature = (actor, plan = None, at = None))]
    fn accept_all_top(&mut self, py: Python<'_>, actor: &str, plan: Option<&str>, at: Option<DateTime<Utc>>) -> PyResult<Py<PyAny>> {
        if let Some(p) = plan {
            self.inner.plan(p).ok_or_else(|| missing(format!("no plan `{p}`")))?;
        }
        let bulk = self.inner.accept_all_top(plan, actor, at.unwrap_or_else(now)).map_err(confirm_err)?;
        to_py(py, &bulk)
    }

    /// Moves decided units into the cube; returns the receipt.
    #[pyo3(signature = (plan = None))]
    fn transfer(&mut self, py: Python<'_>, plan: Option<&str>) -> PyResult<Py<PyAny>> {
        if let Some(p) = plan {
            self.inner.plan(p).ok_or_else(|| missing(format!("no plan `{p}`")))?;
        }
        to_py(py, &self.inner.transfer_pending(plan).map_err(invalid)?)
    }

    /// The cube drilled down on the given axis values.
    #[pyo3(signature = (phase = None, mof = None, tag = None))]
    fn cube(&self, py: Python<'_>, phase: Option<&str>, mof: Option<&str>, tag: Option<&str>) -> PyResult<Py<PyAny>> {
        let mut view = self.inner.view();
        for (axis, raw) in [(Axis::Phase, phase), (Axis::Mof, mof), (Axis::Tag, tag)] {
            if let Some(raw) = raw {
                let value: AxisValue = axis.value(raw).map_err(invalid)?;
                view = view.drill_down(value).map_err(invalid)?;
            }
        }
        to_py(py, &view.to_doc())
    }

    fn cell_counts(&self) -> Vec<((String, String, String), usize)> {
        self.inner
            .cell_counts()
            .into_iter()
            .map(|(c, n)| ((c.phase.to_string(), c.mof.to_string(), c.tag.to_string()), n))
            .collect()
    }

    /// The seven-facet view for the goal best matching `goal`.
    fn view(&self, py: Python<'_>, plan: &str, goal: &str, phase: &str) -> PyResult<Py<PyAny>> {
        let v = self.inner.stakeholder_view(plan, goal, parse_phase(phase)?).map_err(|e| match e {
            ViewError::UnknownPlan(_) => missing(e),
            ViewError::NoMatchingGoal { .. } => invalid(e),
        })?;
        to_py(py, &v)
    }
}

#[pymodule]
fn dforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Template>()?;
    m.add_class::<Models>()?;
    m.add_class::<PyBinding>()?;
    m.add_class::<Catalog>()?;
    m.add_class::<Repository>()?;
    m.add_function(wrap_pyfunction!(instantiate, m)?)?;
    m.add_function(wrap_pyfunction!(check_conformance, m)?)?;
    m.add("DforgeError", m.py().get_type::<DforgeError>())?;
    m.add("DecisionConflict", m.py().get_type::<DecisionConflict>())?;
    m.add("FLOOD_TEMPLATE", dforge_core::fixtures::FLOOD_TEMPLATE)?;
    m.add("WAGGA_BINDING", dforge_core::fixtures::WAGGA_BINDING)?;
    Ok(())
}
