//! Operations shared by the command line and the HTTP API. Both front ends
//! call these and only translate arguments and errors.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use dforge_core::abm::{parse_abm, serialize_abm, AbmSet, ConsistencyReport};
use dforge_core::axes::{AgentTag, PhaseId};
use dforge_core::pipeline::{
    check_conformance, customise, instantiate, Binding, ConfirmError, ConformanceReport, Decision, InstantiateError,
    MappingProposal, MofMark, Outcome, ProposalStatus, PrunedElement, TransferError, TransferReceipt, UnboundPolicy,
};
use dforge_core::repository::{
    Axis, AxisValue, BulkOutcome, CubeViewDoc, PersistError, RepositoryStore, Slice, StakeholderView, StoreError,
    ViewError,
};
use dforge_core::template::DisplanTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input.
    BadRequest,
    NotFound,
    /// The operation clashes with recorded state.
    Conflict,
    /// Well-formed input that breaks a domain invariant.
    Invalid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceError {
    pub kind: ErrorKind,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

impl ServiceError {
    pub fn new(kind: ErrorKind, code: &'static str, message: impl fmt::Display) -> Self {
        ServiceError { kind, code, message: message.to_string(), detail: Value::Null }
    }

    pub fn with_detail(mut self, detail: impl Serialize) -> Self {
        self.detail = serde_json::to_value(detail).unwrap_or(Value::Null);
        self
    }

    pub fn envelope(&self) -> Value {
        json!({ "code": self.code, "message": self.message, "detail": self.detail })
    }
}

impl fmt::Display for ServiceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for ServiceError {}

pub type Result<T> = std::result::Result<T, ServiceError>;

fn inconsistent(code: &'static str, what: &str, report: &ConsistencyReport) -> ServiceError {
    ServiceError::new(ErrorKind::Invalid, code, format!("{what}: {report}")).with_detail(report)
}

impl From<ConfirmError> for ServiceError {
    fn from(e: ConfirmError) -> Self {
        let (kind, code) = match &e {
            ConfirmError::UnknownProposal(_) => (ErrorKind::NotFound, "unknown-proposal"),
            ConfirmError::AlreadyDecided { .. } => (ErrorKind::Conflict, "already-decided"),
            ConfirmError::EmptyActor => (ErrorKind::BadRequest, "missing-actor"),
            ConfirmError::MissingReason => (ErrorKind::BadRequest, "missing-reason"),
            ConfirmError::NotACandidate(_) => (ErrorKind::Invalid, "not-a-candidate"),
            ConfirmError::UnknownConcept(_) => (ErrorKind::NotFound, "unknown-concept"),
            ConfirmError::IncompatibleConcept { .. } => (ErrorKind::Invalid, "incompatible-concept"),
            ConfirmError::NoCandidates(_) => (ErrorKind::Invalid, "no-candidates"),
        };
        ServiceError::new(kind, code, e)
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match &e {
            StoreError::UnknownPlan(_) => ServiceError::new(ErrorKind::NotFound, "unknown-plan", e),
            StoreError::PlanConflict(_) => ServiceError::new(ErrorKind::Conflict, "plan-conflict", e),
            StoreError::InconsistentPlan(r) => inconsistent("inconsistent-models", "plan models are inconsistent", r),
            StoreError::Propose(_) => ServiceError::new(ErrorKind::Invalid, "cannot-propose", e),
            StoreError::Integrity { .. } => ServiceError::new(ErrorKind::Invalid, "integrity", e),
        }
    }
}

impl From<TransferError> for ServiceError {
    fn from(e: TransferError) -> Self {
        match e {
            TransferError::Integrity(s) => s.into(),
            other => ServiceError::new(ErrorKind::Invalid, "not-confirmed", other),
        }
    }
}

impl From<ViewError> for ServiceError {
    fn from(e: ViewError) -> Self {
        match &e {
            ViewError::UnknownPlan(_) => ServiceError::new(ErrorKind::NotFound, "unknown-plan", e),
            ViewError::NoMatchingGoal { nearest, .. } => {
                ServiceError::new(ErrorKind::NotFound, "no-matching-goal", &e).with_detail(json!({ "nearest": nearest }))
            }
        }
    }
}

impl From<PersistError> for ServiceError {
    fn from(e: PersistError) -> Self {
        let code = match e {
            PersistError::UnsupportedVersion { .. } => "unsupported-version",
            PersistError::Integrity(_) | PersistError::Catalog(_) => "integrity",
            PersistError::Parse { .. } | PersistError::NotARepository(_) => "malformed-repository",
        };
        let kind = if code == "integrity" { ErrorKind::Invalid } else { ErrorKind::BadRequest };
        ServiceError::new(kind, code, e)
    }
}

pub fn parse_template(doc: &str) -> Result<DisplanTemplate> {
    DisplanTemplate::parse(doc).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-template", e))
}

pub fn parse_models(doc: &str) -> Result<AbmSet> {
    let parsed = parse_abm(doc).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-models", e))?;
    if !parsed.report.is_empty() {
        return Err(inconsistent("inconsistent-models", "models are inconsistent", &parsed.report));
    }
    Ok(parsed.set)
}

fn write_models(set: &AbmSet) -> Result<String> {
    serialize_abm(set).map_err(|r| inconsistent("inconsistent-models", "models are inconsistent", &r))
}

#[derive(Debug, Clone, Serialize)]
pub struct CustomiseOutput {
    pub plan_id: String,
    pub document: String,
    pub pruned: Vec<PrunedElement>,
    pub marks: Vec<MofMark>,
}

pub fn customise_template(doc: &str) -> Result<CustomiseOutput> {
    let template = parse_template(doc)?;
    let c = customise(&template).map_err(|e| ServiceError::new(ErrorKind::Invalid, "customise-failed", e))?;
    Ok(CustomiseOutput { plan_id: c.set.plan_id.clone(), document: write_models(&c.set)?, pruned: c.pruned, marks: c.marks })
}

#[derive(Debug, Clone, Serialize)]
pub struct InstantiateOutput {
    pub plan_id: String,
    pub document: String,
    pub warnings: Vec<String>,
}

pub fn instantiate_models(template_doc: &str, binding_doc: &str, allow_unbound: &[String]) -> Result<InstantiateOutput> {
    let template = parse_models(template_doc)?;
    let binding = Binding::parse(binding_doc).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-binding", e))?;
    let policy = if allow_unbound.is_empty() {
        UnboundPolicy::Strict
    } else {
        UnboundPolicy::Allow(allow_unbound.iter().cloned().collect())
    };
    let inst = instantiate(&template, &binding, &policy).map_err(|e| match &e {
        InstantiateError::Unbound(names) => {
            ServiceError::new(ErrorKind::Invalid, "unbound-placeholders", &e).with_detail(names)
        }
        InstantiateError::InvalidTemplate(r) | InstantiateError::InvalidInstance(r) => {
            inconsistent("inconsistent-models", &e.to_string(), r)
        }
        InstantiateError::Markup(_) => ServiceError::new(ErrorKind::BadRequest, "malformed-markup", &e),
    })?;
    Ok(InstantiateOutput { plan_id: inst.set.plan_id.clone(), document: write_models(&inst.set)?, warnings: inst.warnings })
}

pub fn conform(instance_doc: &str, template_doc: &str) -> Result<ConformanceReport> {
    let template = parse_abm(template_doc).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-models", e))?;
    let instance = parse_abm(instance_doc).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "malformed-models", e))?;
    Ok(check_conformance(&instance.set, &template.set))
}

/// Registers an instance document and returns the plan's proposals.
pub fn register_plan(store: &mut RepositoryStore, instance_doc: &str, template_id: &str) -> Result<Vec<MappingProposal>> {
    let set = parse_models(instance_doc)?;
    let plan_id = set.plan_id.clone();
    store.register_plan(set, template_id)?;
    Ok(store.propose(&plan_id)?)
}

pub fn proposals(store: &RepositoryStore, status: Option<ProposalStatus>, plan: Option<&str>) -> Vec<MappingProposal> {
    store
        .proposals()
        .filter(|p| status.is_none_or(|s| p.status == s))
        .filter(|p| plan.is_none_or(|id| p.element.plan_id == id))
        .cloned()
        .collect()
}

/// A decision with its actor, as posted to the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRequest {
    #[serde(flatten)]
    pub decision: Decision,
    pub actor: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<DateTime<Utc>>,
}

pub fn now() -> DateTime<Utc> {
    let t = Utc::now();
    DateTime::from_timestamp(t.timestamp(), 0).unwrap_or(t)
}

pub fn decide(store: &mut RepositoryStore, proposal: &str, req: DecisionRequest) -> Result<Outcome> {
    let at = req.at.unwrap_or_else(now);
    Ok(store.confirm(proposal, req.decision, &req.actor, at)?)
}

pub fn accept_top(store: &mut RepositoryStore, plan: Option<&str>, actor: &str, at: Option<DateTime<Utc>>) -> Result<BulkOutcome> {
    if let Some(p) = plan {
        if store.plan(p).is_none() {
            return Err(StoreError::UnknownPlan(p.to_string()).into());
        }
    }
    Ok(store.accept_all_top(plan, actor, at.unwrap_or_else(now))?)
}

pub fn transfer(store: &mut RepositoryStore, plan: Option<&str>) -> Result<TransferReceipt> {
    if let Some(p) = plan {
        if store.plan(p).is_none() {
            return Err(StoreError::UnknownPlan(p.to_string()).into());
        }
    }
    Ok(store.transfer_pending(plan)?)
}

/// Parses axis values given as text; empty values leave the axis free.
pub fn slice(phase: Option<&str>, mof: Option<&str>, tag: Option<&str>) -> Result<Slice> {
    let mut s = Slice::default();
    for (axis, raw) in [(Axis::Phase, phase), (Axis::Mof, mof), (Axis::Tag, tag)] {
        let Some(raw) = raw.filter(|r| !r.trim().is_empty()) else { continue };
        let v = axis.value(raw).map_err(|e| ServiceError::new(ErrorKind::BadRequest, "bad-axis-value", e))?;
        match v {
            AxisValue::Phase(p) => s.phase = Some(p),
            AxisValue::Mof(m) => s.mof = Some(m),
            AxisValue::Tag(t) => s.tag = Some(t),
        }
    }
    Ok(s)
}

pub fn cube(store: &RepositoryStore, slice: Slice) -> CubeViewDoc {
    let mut view = store.view();
    let values = [
        slice.phase.map(AxisValue::Phase),
        slice.mof.map(AxisValue::Mof),
        slice.tag.map(AxisValue::Tag),
    ];
    for v in values.into_iter().flatten() {
        view = view.drill_down(v).expect("each axis is fixed once");
    }
    view.to_doc()
}

pub fn parse_phase(raw: &str) -> Result<PhaseId> {
    raw.parse().map_err(|e| ServiceError::new(ErrorKind::BadRequest, "bad-phase", e))
}

pub fn stakeholder_view(store: &RepositoryStore, plan: &str, goal: &str, phase: PhaseId) -> Result<StakeholderView> {
    Ok(store.stakeholder_view(plan, goal, phase)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConceptDoc<'a> {
    pub id: &'a str,
    pub name: &'a str,
    pub phase: PhaseId,
    pub tag: Option<AgentTag>,
    pub extended: bool,
    pub description: &'a str,
}

pub fn catalog(store: &RepositoryStore) -> Value {
    let cat = store.catalog();
    let concepts: Vec<ConceptDoc> = cat
        .concepts()
        .iter()
        .map(|c| ConceptDoc {
            id: &c.id,
            name: &c.name,
            phase: c.phase,
            tag: c.tag,
            extended: c.tag.is_some_and(AgentTag::is_extended),
            description: &c.description,
        })
        .collect();
    json!({ "version": cat.version(), "default": cat.is_default(), "concepts": concepts })
}

pub fn import(doc: &str) -> Result<RepositoryStore> {
    Ok(RepositoryStore::import(doc)?)
}
