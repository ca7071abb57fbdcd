//! The knowledge repository: registered plans, their mapping proposals and
//! decisions, and the transferred units indexed by cube cell.
//!
//! The store is a plain value. Callers that share it must serialise writes
//! (one writer, many readers); views are snapshots.

mod cube;
mod persist;
mod view;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::abm::{AbmSet, ConsistencyReport};
use crate::catalog::DmmCatalog;
use crate::pipeline::{
    self, decide, AuditLog, ConfirmError, Decision, KnowledgeUnit, MappingProposal, Outcome, ProposalStatus,
    ProposeError, TransferError, TransferReceipt,
};

pub use cube::{Axis, AxisValue, CubeAddress, CubeError, CubeGroup, CubeGroupDoc, CubeView, CubeViewDoc, Slice};
pub use persist::{PersistError, FORMAT, FORMAT_VERSION};
pub use view::{FacetEntry, StakeholderView, ViewError, FACET_NAMES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub plan_id: String,
    pub template_id: String,
    pub set: AbmSet,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("no plan `{0}`")]
    UnknownPlan(String),
    #[error("plan `{0}` is already registered with different content")]
    PlanConflict(String),
    #[error("plan models are inconsistent: {0}")]
    InconsistentPlan(ConsistencyReport),
    #[error(transparent)]
    Propose(#[from] ProposeError),
    #[error("unit `{unit}`: {message}")]
    Integrity { unit: String, message: String },
}

/// Result of a bulk accept-top pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BulkOutcome {
    pub outcomes: Vec<Outcome>,
    /// Pending proposals left alone because they have no candidates.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepositoryStore {
    catalog: Arc<DmmCatalog>,
    plans: BTreeMap<String, PlanRecord>,
    proposals: BTreeMap<String, MappingProposal>,
    audit: AuditLog,
    /// Outcome per decided proposal, kept in step with `audit`.
    decided: BTreeMap<String, Outcome>,
    units: BTreeMap<String, KnowledgeUnit>,
    cells: BTreeMap<CubeAddress, BTreeSet<String>>,
}

impl Default for RepositoryStore {
    fn default() -> Self {
        RepositoryStore::new(DmmCatalog::shipped_annotated())
    }
}

impl RepositoryStore {
    pub fn new(catalog: DmmCatalog) -> Self {
        RepositoryStore {
            catalog: Arc::new(catalog),
            plans: BTreeMap::new(),
            proposals: BTreeMap::new(),
            audit: AuditLog::new(),
            decided: BTreeMap::new(),
            units: BTreeMap::new(),
            cells: BTreeMap::new(),
        }
    }

    pub fn catalog(&self) -> &Arc<DmmCatalog> {
        &self.catalog
    }

    pub fn plans(&self) -> impl Iterator<Item = &PlanRecord> {
        self.plans.values()
    }

    pub fn plan(&self, plan_id: &str) -> Option<&PlanRecord> {
        self.plans.get(plan_id)
    }

    pub fn proposals(&self) -> impl Iterator<Item = &MappingProposal> {
        self.proposals.values()
    }

    pub fn proposal(&self, id: &str) -> Option<&MappingProposal> {
        self.proposals.get(id)
    }

    pub fn audit(&self) -> &AuditLog {
        &self.audit
    }

    pub fn outcomes(&self) -> &BTreeMap<String, Outcome> {
        &self.decided
    }

    /// Transferred units by id.
    pub fn units(&self) -> impl Iterator<Item = &KnowledgeUnit> {
        self.units.values()
    }

    pub fn unit(&self, id: &str) -> Option<&KnowledgeUnit> {
        self.units.get(id)
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Registers a consistent plan. Registering identical content again is a no-op.
    pub fn register_plan(&mut self, set: AbmSet, template_id: &str) -> Result<&PlanRecord, StoreError> {
        let report = set.validate();
        if !report.is_empty() {
            return Err(StoreError::InconsistentPlan(report));
        }
        let record = PlanRecord { plan_id: set.plan_id.clone(), template_id: template_id.to_string(), set };
        if let Some(existing) = self.plans.get(&record.plan_id) {
            if *existing != record {
                return Err(StoreError::PlanConflict(record.plan_id));
            }
        } else {
            self.plans.insert(record.plan_id.clone(), record.clone());
        }
        Ok(&self.plans[&record.plan_id])
    }

    /// Creates proposals for every element of a plan that has none yet and
    /// returns all of the plan's proposals.
    pub fn propose(&mut self, plan_id: &str) -> Result<Vec<MappingProposal>, StoreError> {
        let plan = self.plans.get(plan_id).ok_or_else(|| StoreError::UnknownPlan(plan_id.to_string()))?;
        for p in pipeline::propose_mappings(&plan.set, &self.catalog)? {
            self.proposals.entry(p.id.clone()).or_insert(p);
        }
        Ok(self.proposals.values().filter(|p| p.element.plan_id == plan_id).cloned().collect())
    }

    pub fn confirm(
        &mut self,
        proposal_id: &str,
        decision: Decision,
        who: &str,
        at: DateTime<Utc>,
    ) -> Result<Outcome, ConfirmError> {
        let proposal =
            self.proposals.get(proposal_id).ok_or_else(|| ConfirmError::UnknownProposal(proposal_id.to_string()))?;
        if proposal.status != ProposalStatus::Pending {
            let by = self.audit.decided_by(proposal_id).map(|r| r.who.clone()).unwrap_or_default();
            return Err(ConfirmError::AlreadyDecided { proposal: proposal_id.to_string(), status: proposal.status, by });
        }
        let (outcome, status) = decide(proposal, &decision, who, at, &self.catalog)?;
        self.audit.append(proposal_id, decision, who, at);
        self.proposals.get_mut(proposal_id).expect("checked above").status = status;
        self.decided.insert(proposal_id.to_string(), outcome.clone());
        Ok(outcome)
    }

    /// Accepts the top candidate of every pending proposal, optionally for
    /// one plan only, in proposal id order.
    pub fn accept_all_top(&mut self, plan_id: Option<&str>, who: &str, at: DateTime<Utc>) -> Result<BulkOutcome, ConfirmError> {
        if who.trim().is_empty() {
            return Err(ConfirmError::EmptyActor);
        }
        let pending: Vec<(String, bool)> = self
            .proposals
            .values()
            .filter(|p| p.status == ProposalStatus::Pending)
            .filter(|p| plan_id.is_none_or(|id| p.element.plan_id == id))
            .map(|p| (p.id.clone(), p.candidates.is_empty()))
            .collect();
        let mut out = BulkOutcome { outcomes: Vec::new(), skipped: Vec::new() };
        for (id, empty) in pending {
            if empty {
                out.skipped.push(id);
            } else {
                out.outcomes.push(self.confirm(&id, Decision::AcceptTop, who, at)?);
            }
        }
        Ok(out)
    }

    /// Confirmed units not yet transferred, by unit id.
    pub fn pending_units(&self, plan_id: Option<&str>) -> Vec<KnowledgeUnit> {
        let mut out: Vec<KnowledgeUnit> = self
            .decided
            .values()
            .filter_map(|o| match o {
                Outcome::Unit(u) => Some(u),
                Outcome::Rejection(_) => None,
            })
            .filter(|u| plan_id.is_none_or(|id| u.element.plan_id == id))
            .filter(|u| !self.units.contains_key(&u.unit_id))
            .cloned()
            .collect();
        out.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
        out
    }

    /// Transfers every pending unit.
    pub fn transfer_pending(&mut self, plan_id: Option<&str>) -> Result<TransferReceipt, TransferError> {
        let units = self.pending_units(plan_id);
        pipeline::transfer(&units, self)
    }

    /// Checks a unit against the catalog and its source element.
    pub fn check_unit(&self, unit: &KnowledgeUnit) -> Result<(), StoreError> {
        let fail = |message: String| StoreError::Integrity { unit: unit.unit_id.clone(), message };
        let concept = self
            .catalog
            .concept(&unit.concept)
            .ok_or_else(|| fail(format!("unknown concept `{}`", unit.concept)))?;
        if concept.tag != Some(unit.cell.tag) {
            return Err(fail(format!(
                "cell tag {} differs from the annotated tag of `{}`",
                unit.cell.tag, unit.concept
            )));
        }
        if concept.phase != unit.cell.phase {
            return Err(fail(format!("cell phase {} differs from the phase of `{}`", unit.cell.phase, unit.concept)));
        }
        let plan = self
            .plans
            .get(&unit.element.plan_id)
            .ok_or_else(|| fail(format!("unknown plan `{}`", unit.element.plan_id)))?;
        let el = plan
            .set
            .element(&unit.element.element)
            .ok_or_else(|| fail(format!("unknown element `{}`", unit.element.element)))?;
        if el.kind() != unit.element.kind {
            return Err(fail(format!("element is a {}, not a {}", el.kind(), unit.element.kind)));
        }
        if el.mof() != unit.cell.mof {
            return Err(fail(format!("cell MOF level {} differs from the element mark {}", unit.cell.mof, el.mof())));
        }
        if el.phase() != unit.cell.phase {
            return Err(fail(format!("cell phase {} differs from the element phase {}", unit.cell.phase, el.phase())));
        }
        Ok(())
    }

    /// Indexes a unit at its cell. Returns `false` when an identical unit is
    /// already present.
    pub fn put_unit(&mut self, unit: KnowledgeUnit) -> Result<bool, StoreError> {
        self.check_unit(&unit)?;
        if let Some(existing) = self.units.get(&unit.unit_id) {
            if *existing == unit {
                return Ok(false);
            }
            return Err(StoreError::Integrity {
                unit: unit.unit_id.clone(),
                message: "a different unit with this id is already stored".to_string(),
            });
        }
        self.cells.entry(unit.cell).or_default().insert(unit.unit_id.clone());
        self.units.insert(unit.unit_id.clone(), unit);
        Ok(true)
    }

    /// Units at one cell, by unit id.
    pub fn cell(&self, addr: CubeAddress) -> Vec<&KnowledgeUnit> {
        self.cells
            .get(&addr)
            .map(|ids| ids.iter().map(|id| &self.units[id]).collect())
            .unwrap_or_default()
    }

    /// Non-empty cells with their unit counts.
    pub fn cell_counts(&self) -> Vec<(CubeAddress, usize)> {
        self.cells.iter().filter(|(_, s)| !s.is_empty()).map(|(a, s)| (*a, s.len())).collect()
    }

    /// Snapshot of the whole cube.
    pub fn view(&self) -> CubeView {
        CubeView::new(self.units.values().cloned().collect())
    }

    /// Rejections recorded so far, by proposal id.
    pub fn rejections(&self) -> Vec<&pipeline::RejectionRecord> {
        self.decided
            .values()
            .filter_map(|o| match o {
                Outcome::Rejection(r) => Some(r),
                Outcome::Unit(_) => None,
            })
            .collect()
    }

    #[allow(clippy::type_complexity)]
    pub(crate) fn parts_mut(
        &mut self,
    ) -> (
        &mut BTreeMap<String, PlanRecord>,
        &mut BTreeMap<String, MappingProposal>,
        &mut AuditLog,
        &mut BTreeMap<String, Outcome>,
    ) {
        (&mut self.plans, &mut self.proposals, &mut self.audit, &mut self.decided)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axes::{AgentTag, MofLevel, PhaseId};

    #[test]
    fn empty_store_cells_are_empty() {
        let s = RepositoryStore::default();
        assert!(CubeAddress::all().into_iter().all(|a| s.cell(a).is_empty()));
        assert_eq!(CubeAddress::all().len(), 64);
        let addr = CubeAddress { phase: PhaseId::Response, mof: MofLevel::M1, tag: AgentTag::Goal };
        assert!(s.cell(addr).is_empty());
    }
}
