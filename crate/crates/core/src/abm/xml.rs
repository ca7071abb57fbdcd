//! XML interchange for [`AbmSet`].
//!
//! The writer is canonical: fixed attribute order, two-space indentation,
//! childless elements self-closed, UTF-8, trailing newline.

use std::fmt::Write as _;
use std::str::FromStr;

use quick_xml::events::Event;
use quick_xml::Reader;

use super::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct AbmParseError {
    pub path: String,
    pub message: String,
}

/// A parsed set with its consistency report. A non-empty report does not
/// prevent parsing; it blocks registration and transfer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedAbm {
    pub set: AbmSet,
    pub report: ConsistencyReport,
}

/// Serializes a consistent set. Inconsistent sets are refused with their report.
pub fn serialize_abm(set: &AbmSet) -> Result<String, ConsistencyReport> {
    let report = set.validate();
    if !report.is_empty() {
        return Err(report);
    }
    Ok(write_document(set))
}

pub(crate) fn write_document(set: &AbmSet) -> String {
    let mut w = XmlWriter::default();
    w.out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let phases: Vec<&str> = set.phases.iter().map(|p| p.keyword()).collect();
    w.open("abm-set", &[("plan-id", &set.plan_id), ("phases", &phases.join(" "))]);

    w.model(AbmKind::GoalModel, set.goals.is_empty(), |w| {
        for g in &set.goals {
            let mut attrs = vec![("id", g.id.as_str()), ("mof", g.mof.keyword()), ("phase", g.phase.keyword())];
            attrs.push(("text", &g.text));
            if let Some(p) = &g.parent {
                attrs.push(("parent", p));
            }
            w.element("goal", &attrs, g.roles.is_empty(), |w| {
                for r in &g.roles {
                    w.empty("role", &[("name", r)]);
                }
            });
        }
    });

    w.model(AbmKind::RoleModel, set.roles.is_empty(), |w| {
        for r in &set.roles {
            let attrs = [("id", r.id.as_str()), ("mof", r.mof.keyword()), ("phase", r.phase.keyword()), ("name", &r.name)];
            let childless = r.responsibilities.is_empty() && r.constraints.is_empty();
            w.element("role-spec", &attrs, childless, |w| {
                for t in &r.responsibilities {
                    w.empty("responsibility", &[("text", t)]);
                }
                for t in &r.constraints {
                    w.empty("constraint", &[("text", t)]);
                }
            });
        }
    });

    w.model(AbmKind::OrganisationModel, set.organisation.is_empty(), |w| {
        for o in &set.organisation {
            w.empty(
                "relation",
                &[
                    ("id", &o.id),
                    ("mof", o.mof.keyword()),
                    ("phase", o.phase.keyword()),
                    ("from", &o.from),
                    ("to", &o.to),
                    ("relation", o.relation.keyword()),
                    ("channel", &o.channel),
                ],
            );
        }
    });

    w.model(AbmKind::InteractionModel, set.interactions.is_empty(), |w| {
        for it in &set.interactions {
            let attrs = [("id", it.id.as_str()), ("mof", it.mof.keyword()), ("phase", it.phase.keyword()), ("name", &it.name)];
            w.element("interaction", &attrs, it.steps.is_empty(), |w| {
                for s in &it.steps {
                    let ord = s.ordinal.to_string();
                    let attrs = [("ordinal", ord.as_str()), ("initiator", &s.initiator), ("purpose", &s.purpose)];
                    w.element("step", &attrs, s.responders.is_empty(), |w| {
                        for r in &s.responders {
                            w.empty("responder", &[("role", r)]);
                        }
                    });
                }
            });
        }
    });

    w.model(AbmKind::EnvironmentModel, set.environment.is_empty(), |w| {
        for e in &set.environment {
            let attrs = [
                ("id", e.id.as_str()),
                ("mof", e.mof.keyword()),
                ("phase", e.phase.keyword()),
                ("name", &e.name),
                ("kind", e.kind.keyword()),
            ];
            w.element("entity", &attrs, e.used_by.is_empty(), |w| {
                for r in &e.used_by {
                    w.empty("used-by", &[("role", r)]);
                }
            });
        }
    });

    w.model(AbmKind::AgentModel, set.agents.is_empty(), |w| {
        for a in &set.agents {
            let attrs = [("id", a.id.as_str()), ("mof", a.mof.keyword()), ("phase", a.phase.keyword()), ("name", &a.name)];
            let childless = a.plays.is_empty() && a.activities.is_empty() && a.triggers.is_empty();
            w.element("agent", &attrs, childless, |w| {
                for r in &a.plays {
                    w.empty("plays", &[("role", r)]);
                }
                for x in &a.activities {
                    w.empty("activity", &[("name", x)]);
                }
                for t in &a.triggers {
                    w.empty("trigger", &[("event", t)]);
                }
            });
        }
    });

    w.model(AbmKind::ScenarioModel, set.scenarios.is_empty(), |w| {
        for s in &set.scenarios {
            let attrs = [
                ("id", s.id.as_str()),
                ("mof", s.mof.keyword()),
                ("phase", s.phase.keyword()),
                ("name", &s.name),
                ("goal", &s.goal),
                ("pre", &s.pre_condition),
                ("post", &s.post_condition),
            ];
            w.element("scenario", &attrs, s.activities.is_empty(), |w| {
                for a in &s.activities {
                    w.empty(
                        "activity",
                        &[("name", &a.name), ("ordering", a.ordering.keyword()), ("performer", &a.performer)],
                    );
                }
            });
        }
    });

    w.close("abm-set");
    w.out
}

#[derive(Default)]
struct XmlWriter {
    out: String,
    depth: usize,
}

impl XmlWriter {
    fn start_tag(&mut self, name: &str, attrs: &[(&str, &str)]) {
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        self.out.push('<');
        self.out.push_str(name);
        for (k, v) in attrs {
            let _ = write!(self.out, " {k}=\"{}\"", escape_attr(v));
        }
    }

    fn open(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.start_tag(name, attrs);
        self.out.push_str(">\n");
        self.depth += 1;
    }

    fn close(&mut self, name: &str) {
        self.depth -= 1;
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
        let _ = writeln!(self.out, "</{name}>");
    }

    fn empty(&mut self, name: &str, attrs: &[(&str, &str)]) {
        self.start_tag(name, attrs);
        self.out.push_str("/>\n");
    }

    fn element(&mut self, name: &str, attrs: &[(&str, &str)], childless: bool, body: impl FnOnce(&mut Self)) {
        if childless {
            self.empty(name, attrs);
        } else {
            self.open(name, attrs);
            body(self);
            self.close(name);
        }
    }

    fn model(&mut self, kind: AbmKind, childless: bool, body: impl FnOnce(&mut Self)) {
        self.element(kind.model_element(), &[], childless, body);
    }
}

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            '\t' => out.push_str("&#9;"),
            c => out.push(c),
        }
    }
    out
}

#[derive(Debug)]
struct Node {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Node>,
    path: String,
}

fn perr(path: &str, message: impl Into<String>) -> AbmParseError {
    AbmParseError { path: path.to_string(), message: message.into() }
}

fn read_tree(doc: &str) -> Result<Node, AbmParseError> {
    let mut reader = Reader::from_str(doc);
    let mut stack: Vec<Node> = Vec::new();
    let mut root: Option<Node> = None;

    loop {
        let pos = reader.buffer_position();
        let ev = reader
            .read_event()
            .map_err(|e| perr(&format!("byte {pos}"), format!("malformed XML: {e}")))?;
        match ev {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                let parent_path = stack.last().map(|n| n.path.clone()).unwrap_or_default();
                let index = stack
                    .last()
                    .map(|n| n.children.iter().filter(|c| c.name == name).count())
                    .unwrap_or(0);
                let path = if parent_path.is_empty() {
                    name.clone()
                } else {
                    format!("{parent_path}/{name}[{}]", index + 1)
                };
                let mut attrs = Vec::new();
                for a in e.attributes() {
                    let a = a.map_err(|err| perr(&path, format!("bad attribute: {err}")))?;
                    let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
                    let value = a
                        .decode_and_unescape_value(reader.decoder())
                        .map_err(|err| perr(&path, format!("bad attribute `{key}`: {err}")))?
                        .into_owned();
                    attrs.push((key, value));
                }
                let node = Node { name, attrs, children: Vec::new(), path };
                if matches!(ev, Event::Empty(_)) {
                    attach(&mut stack, &mut root, node)?;
                } else {
                    stack.push(node);
                }
            }
            Event::End(_) => {
                let node = stack.pop().ok_or_else(|| perr("", "unbalanced end tag"))?;
                attach(&mut stack, &mut root, node)?;
            }
            Event::Text(t) => {
                if !t.iter().all(u8::is_ascii_whitespace) {
                    let path = stack.last().map(|n| n.path.as_str()).unwrap_or("");
                    return Err(perr(path, "unexpected text content"));
                }
            }
            Event::CData(_) => return Err(perr("", "unexpected CDATA")),
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(perr(&stack[stack.len() - 1].path, "element not closed"));
    }
    root.ok_or_else(|| perr("", "empty document"))
}

fn attach(stack: &mut [Node], root: &mut Option<Node>, node: Node) -> Result<(), AbmParseError> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(node),
        None if root.is_none() => *root = Some(node),
        None => return Err(perr(&node.path, "more than one root element")),
    }
    Ok(())
}

impl Node {
    fn expect_attrs(&self, allowed: &[&str]) -> Result<(), AbmParseError> {
        for (k, _) in &self.attrs {
            if !allowed.contains(&k.as_str()) {
                return Err(perr(&self.path, format!("unexpected attribute `{k}`")));
            }
        }
        Ok(())
    }

    fn opt(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn req(&self, key: &str) -> Result<String, AbmParseError> {
        self.opt(key)
            .map(str::to_string)
            .ok_or_else(|| perr(&self.path, format!("missing attribute `{key}`")))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<T, AbmParseError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.req(key)?;
        raw.parse::<T>().map_err(|e| perr(&format!("{}@{key}", self.path), e.to_string()))
    }

    fn children_named<'a>(&'a self, allowed: &'a [&'a str]) -> Result<impl Iterator<Item = &'a Node>, AbmParseError> {
        for c in &self.children {
            if !allowed.contains(&c.name.as_str()) {
                return Err(perr(&c.path, format!("unexpected element `{}`", c.name)));
            }
        }
        Ok(self.children.iter())
    }

    fn leaf(&self, attr: &str) -> Result<String, AbmParseError> {
        self.expect_attrs(&[attr])?;
        if let Some(c) = self.children.first() {
            return Err(perr(&c.path, "unexpected child element"));
        }
        self.req(attr)
    }
}

pub fn parse_abm(doc: &str) -> Result<ParsedAbm, AbmParseError> {
    let root = read_tree(doc)?;
    if root.name != "abm-set" {
        return Err(perr(&root.path, "root element must be `abm-set`"));
    }
    root.expect_attrs(&["plan-id", "phases"])?;
    let mut set = AbmSet { plan_id: root.req("plan-id")?, ..Default::default() };
    for p in root.req("phases")?.split_whitespace() {
        let phase = PhaseId::from_str(p).map_err(|e| perr("abm-set@phases", e.to_string()))?;
        set.phases.insert(phase);
    }

    let mut seen = Vec::new();
    for model in &root.children {
        let kind = AbmKind::ALL
            .iter()
            .copied()
            .find(|k| k.model_element() == model.name)
            .ok_or_else(|| perr(&model.path, format!("unexpected element `{}`", model.name)))?;
        if seen.contains(&kind) {
            return Err(perr(&model.path, "model given twice"));
        }
        seen.push(kind);
        model.expect_attrs(&[])?;
        parse_model(kind, model, &mut set)?;
    }
    if let Some(missing) = AbmKind::ALL.iter().find(|k| !seen.contains(k)) {
        return Err(perr("abm-set", format!("missing `{}`", missing.model_element())));
    }
    if !set.goals.iter().any(|g| g.parent.is_none()) {
        return Err(perr("abm-set/goal-model", "goal model root missing"));
    }
    let report = set.validate();
    Ok(ParsedAbm { set, report })
}

fn header(n: &Node) -> Result<(String, MofLevel, PhaseId), AbmParseError> {
    Ok((n.req("id")?, n.parsed("mof")?, n.parsed("phase")?))
}

fn parse_model(kind: AbmKind, model: &Node, set: &mut AbmSet) -> Result<(), AbmParseError> {
    match kind {
        AbmKind::GoalModel => {
            for n in model.children_named(&["goal"])? {
                n.expect_attrs(&["id", "mof", "phase", "text", "parent"])?;
                let (id, mof, phase) = header(n)?;
                let roles = n.children_named(&["role"])?.map(|c| c.leaf("name")).collect::<Result<_, _>>()?;
                set.goals.push(GoalNode {
                    id,
                    phase,
                    mof,
                    text: n.req("text")?,
                    parent: n.opt("parent").map(str::to_string),
                    roles,
                });
            }
        }
        AbmKind::RoleModel => {
            for n in model.children_named(&["role-spec"])? {
                n.expect_attrs(&["id", "mof", "phase", "name"])?;
                let (id, mof, phase) = header(n)?;
                let mut responsibilities = Vec::new();
                let mut constraints = Vec::new();
                for c in n.children_named(&["responsibility", "constraint"])? {
                    let text = c.leaf("text")?;
                    if c.name == "responsibility" {
                        responsibilities.push(text);
                    } else {
                        constraints.push(text);
                    }
                }
                set.roles.push(RoleSpec { id, phase, mof, name: n.req("name")?, responsibilities, constraints });
            }
        }
        AbmKind::OrganisationModel => {
            for n in model.children_named(&["relation"])? {
                n.expect_attrs(&["id", "mof", "phase", "from", "to", "relation", "channel"])?;
                let _ = n.children_named(&[])?;
                let (id, mof, phase) = header(n)?;
                set.organisation.push(OrgRelation {
                    id,
                    phase,
                    mof,
                    from: n.req("from")?,
                    to: n.req("to")?,
                    relation: n.parsed("relation")?,
                    channel: n.req("channel")?,
                });
            }
        }
        AbmKind::InteractionModel => {
            for n in model.children_named(&["interaction"])? {
                n.expect_attrs(&["id", "mof", "phase", "name"])?;
                let (id, mof, phase) = header(n)?;
                let mut steps = Vec::new();
                for s in n.children_named(&["step"])? {
                    s.expect_attrs(&["ordinal", "initiator", "purpose"])?;
                    let responders =
                        s.children_named(&["responder"])?.map(|c| c.leaf("role")).collect::<Result<_, _>>()?;
                    steps.push(InteractionStep {
                        ordinal: s.parsed("ordinal")?,
                        initiator: s.req("initiator")?,
                        responders,
                        purpose: s.req("purpose")?,
                    });
                }
                set.interactions.push(Interaction { id, phase, mof, name: n.req("name")?, steps });
            }
        }
        AbmKind::EnvironmentModel => {
            for n in model.children_named(&["entity"])? {
                n.expect_attrs(&["id", "mof", "phase", "name", "kind"])?;
                let (id, mof, phase) = header(n)?;
                let used_by = n.children_named(&["used-by"])?.map(|c| c.leaf("role")).collect::<Result<_, _>>()?;
                set.environment.push(EnvironmentEntitySpec {
                    id,
                    phase,
                    mof,
                    name: n.req("name")?,
                    kind: n.parsed("kind")?,
                    used_by,
                });
            }
        }
        AbmKind::AgentModel => {
            for n in model.children_named(&["agent"])? {
                n.expect_attrs(&["id", "mof", "phase", "name"])?;
                let (id, mof, phase) = header(n)?;
                let (mut plays, mut activities, mut triggers) = (Vec::new(), Vec::new(), Vec::new());
                for c in n.children_named(&["plays", "activity", "trigger"])? {
                    match c.name.as_str() {
                        "plays" => plays.push(c.leaf("role")?),
                        "activity" => activities.push(c.leaf("name")?),
                        _ => triggers.push(c.leaf("event")?),
                    }
                }
                set.agents.push(AgentSpec { id, phase, mof, name: n.req("name")?, plays, activities, triggers });
            }
        }
        AbmKind::ScenarioModel => {
            for n in model.children_named(&["scenario"])? {
                n.expect_attrs(&["id", "mof", "phase", "name", "goal", "pre", "post"])?;
                let (id, mof, phase) = header(n)?;
                let mut activities = Vec::new();
                for a in n.children_named(&["activity"])? {
                    a.expect_attrs(&["name", "ordering", "performer"])?;
                    activities.push(ScenarioActivity {
                        name: a.req("name")?,
                        ordering: a.parsed("ordering")?,
                        performer: a.req("performer")?,
                    });
                }
                set.scenarios.push(ScenarioSpec {
                    id,
                    phase,
                    mof,
                    name: n.req("name")?,
                    goal: n.req("goal")?,
                    pre_condition: n.req("pre")?,
                    activities,
                    post_condition: n.req("post")?,
                });
            }
        }
    }
    Ok(())
}
