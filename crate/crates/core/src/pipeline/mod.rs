//! The three stages: customise models from a template, instantiate a local
//! plan by binding, and transfer confirmed mappings into the repository.

mod binding;
mod conformance;
mod customise;
mod mapping;
mod transfer;

pub use binding::{instance_id, instantiate, Binding, BindingError, InstantiateError, Instantiated, UnboundPolicy};
pub use conformance::{check_conformance, ConformanceReport, Finding, FindingKind};
pub use customise::{customise, record_key, template_plan_id, Customised, CustomiseError, MofMark, PrunedElement};
pub use mapping::{
    decide, proposal_id, propose_mappings, rank_candidates, score, unit_id, AuditError, AuditLog, AuditRecord,
    Candidate, ConfirmError, Decision, ElementKey, KnowledgeUnit, MappingProposal, Outcome, ProposalStatus,
    ProposeError, RejectionRecord,
};
pub use transfer::{transfer, CellCount, TransferError, TransferReceipt};
