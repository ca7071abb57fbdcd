//! Mapping proposals, practitioner decisions and the decision audit log.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::abm::{AbmSet, ConsistencyReport, ElementRef};
use crate::axes::{AbmKind, AgentTag, MofLevel, PhaseId};
use crate::catalog::{Coverage, DmmCatalog};
use crate::markup;
use crate::repository::CubeAddress;
use crate::text::{jaccard, token_set};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalStatus {
    Pending,
    Confirmed,
    Rejected,
    Overridden,
}

impl ProposalStatus {
    pub const ALL: [ProposalStatus; 4] =
        [ProposalStatus::Pending, ProposalStatus::Confirmed, ProposalStatus::Rejected, ProposalStatus::Overridden];

    pub fn keyword(self) -> &'static str {
        match self {
            ProposalStatus::Pending => "pending",
            ProposalStatus::Confirmed => "confirmed",
            ProposalStatus::Rejected => "rejected",
            ProposalStatus::Overridden => "overridden",
        }
    }
}

impl std::str::FromStr for ProposalStatus {
    type Err = crate::axes::UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProposalStatus::ALL
            .into_iter()
            .find(|p| p.keyword() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| crate::axes::UnknownVariant { what: "proposal status", value: s.to_string() })
    }
}

/// Which model element a proposal or unit is about.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ElementKey {
    pub plan_id: String,
    pub kind: AbmKind,
    pub element: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub concept: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingProposal {
    pub id: String,
    pub element: ElementKey,
    pub phase: PhaseId,
    pub mof: MofLevel,
    /// Plain text the candidates were scored against.
    pub text: String,
    pub candidates: Vec<Candidate>,
    pub status: ProposalStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProposeError {
    #[error("catalog is not fully annotated ({0})")]
    CatalogNotAnnotated(Coverage),
    #[error("plan models are inconsistent: {0}")]
    Inconsistent(ConsistencyReport),
}

pub fn proposal_id(element_id: &str) -> String {
    format!("p:{element_id}")
}

pub fn unit_id(element_id: &str) -> String {
    format!("u:{element_id}")
}

/// Similarity of an element text to a concept: the better of the overlap
/// with the concept name alone and with name plus description.
pub fn score(element_text: &str, name: &str, description: &str) -> f64 {
    let e = token_set(element_text);
    let by_name = jaccard(&e, &token_set(name));
    let by_all = jaccard(&e, &token_set(&format!("{name} {description}")));
    by_name.max(by_all)
}

/// Ranks compatible concepts for one element.
pub fn rank_candidates(el: &ElementRef<'_>, catalog: &DmmCatalog) -> Vec<Candidate> {
    let text = markup::to_plain(&el.label());
    let tags = el.kind().compatible_tags();
    let mut out: Vec<Candidate> = catalog
        .concepts()
        .iter()
        .filter(|c| c.phase == el.phase() && c.tag.is_some_and(|t| tags.contains(&t)))
        .map(|c| Candidate { concept: c.id.clone(), score: score(&text, &c.name, &c.description) })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.concept.cmp(&b.concept)));
    out
}

pub fn propose_mappings(instance: &AbmSet, catalog: &DmmCatalog) -> Result<Vec<MappingProposal>, ProposeError> {
    if !catalog.is_fully_annotated() {
        return Err(ProposeError::CatalogNotAnnotated(catalog.coverage()));
    }
    let report = instance.validate();
    if !report.is_empty() {
        return Err(ProposeError::Inconsistent(report));
    }
    Ok(instance
        .elements()
        .map(|el| MappingProposal {
            id: proposal_id(el.id()),
            element: ElementKey { plan_id: instance.plan_id.clone(), kind: el.kind(), element: el.id().to_string() },
            phase: el.phase(),
            mof: el.mof(),
            text: markup::to_plain(&el.label()),
            candidates: rank_candidates(&el, catalog),
            status: ProposalStatus::Pending,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "kebab-case")]
pub enum Decision {
    AcceptTop,
    /// `reason` is required when `concept` is not a candidate.
    Select {
        concept: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reason: Option<String>,
    },
    Reject { reason: String },
}

impl Decision {
    pub fn keyword(&self) -> &'static str {
        match self {
            Decision::AcceptTop => "accept-top",
            Decision::Select { .. } => "select",
            Decision::Reject { .. } => "reject",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeUnit {
    pub unit_id: String,
    pub cell: CubeAddress,
    pub concept: String,
    pub element: ElementKey,
    pub confirmed_by: String,
    pub confirmed_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub proposal: String,
    pub element: ElementKey,
    pub reason: String,
    pub rejected_by: String,
    pub rejected_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Outcome {
    Unit(KnowledgeUnit),
    Rejection(RejectionRecord),
}

/// One line of the decision audit log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub proposal: String,
    #[serde(flatten)]
    pub decision: Decision,
    pub who: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfirmError {
    #[error("no proposal `{0}`")]
    UnknownProposal(String),
    #[error("proposal `{proposal}` is already {} by {by}", status.keyword())]
    AlreadyDecided { proposal: String, status: ProposalStatus, by: String },
    #[error("an actor identity is required")]
    EmptyActor,
    #[error("a rejection needs a reason")]
    MissingReason,
    #[error("`{0}` is not a candidate; selecting it needs an override reason")]
    NotACandidate(String),
    #[error("no concept `{0}` in the catalog")]
    UnknownConcept(String),
    #[error("concept `{concept}` cannot receive this element: {why}")]
    IncompatibleConcept { concept: String, why: String },
    #[error("proposal `{0}` has no candidates to accept")]
    NoCandidates(String),
}

/// Applies a decision to a pending proposal. Returns the outcome and the
/// proposal's new status; the caller records both.
pub fn decide(
    proposal: &MappingProposal,
    decision: &Decision,
    who: &str,
    at: DateTime<Utc>,
    catalog: &DmmCatalog,
) -> Result<(Outcome, ProposalStatus), ConfirmError> {
    if who.trim().is_empty() {
        return Err(ConfirmError::EmptyActor);
    }
    let (concept_id, status) = match decision {
        Decision::Reject { reason } => {
            if reason.trim().is_empty() {
                return Err(ConfirmError::MissingReason);
            }
            let record = RejectionRecord {
                proposal: proposal.id.clone(),
                element: proposal.element.clone(),
                reason: reason.clone(),
                rejected_by: who.to_string(),
                rejected_at: at,
            };
            return Ok((Outcome::Rejection(record), ProposalStatus::Rejected));
        }
        Decision::AcceptTop => match proposal.candidates.first() {
            Some(c) => (c.concept.clone(), ProposalStatus::Confirmed),
            None => return Err(ConfirmError::NoCandidates(proposal.id.clone())),
        },
        Decision::Select { concept, reason } => {
            if proposal.candidates.iter().any(|c| &c.concept == concept) {
                (concept.clone(), ProposalStatus::Confirmed)
            } else if reason.as_deref().is_some_and(|r| !r.trim().is_empty()) {
                (concept.clone(), ProposalStatus::Overridden)
            } else {
                return Err(ConfirmError::NotACandidate(concept.clone()));
            }
        }
    };
    let concept = catalog.concept(&concept_id).ok_or_else(|| ConfirmError::UnknownConcept(concept_id.clone()))?;
    if concept.phase != proposal.phase {
        return Err(ConfirmError::IncompatibleConcept {
            concept: concept_id,
            why: format!("concept phase {} differs from element phase {}", concept.phase, proposal.phase),
        });
    }
    let tag: AgentTag = concept.tag.ok_or_else(|| ConfirmError::IncompatibleConcept {
        concept: concept_id.clone(),
        why: "concept is not annotated".to_string(),
    })?;
    let unit = KnowledgeUnit {
        unit_id: unit_id(&proposal.element.element),
        cell: CubeAddress { phase: proposal.phase, mof: proposal.mof, tag },
        concept: concept_id,
        element: proposal.element.clone(),
        confirmed_by: who.to_string(),
        confirmed_at: at,
    };
    Ok((Outcome::Unit(unit), status))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("audit line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("audit record {seq} is out of sequence")]
    Sequence { seq: u64 },
    #[error("audit record {seq}: {source}")]
    Replay { seq: u64, source: ConfirmError },
}

/// Append-only decision log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn append(&mut self, proposal: &str, decision: Decision, who: &str, at: DateTime<Utc>) -> &AuditRecord {
        let seq = self.records.len() as u64 + 1;
        self.records.push(AuditRecord { seq, proposal: proposal.to_string(), decision, who: who.to_string(), at });
        self.records.last().expect("just pushed")
    }

    /// Rebuilds a log from records, checking the sequence numbers.
    pub fn from_records(records: Vec<AuditRecord>) -> Result<AuditLog, AuditError> {
        for (i, r) in records.iter().enumerate() {
            if r.seq != i as u64 + 1 {
                return Err(AuditError::Sequence { seq: r.seq });
            }
        }
        Ok(AuditLog { records })
    }

    /// Who decided a proposal, if anyone has.
    pub fn decided_by(&self, proposal: &str) -> Option<&AuditRecord> {
        self.records.iter().find(|r| r.proposal == proposal)
    }

    pub fn to_json_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("audit records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_json_lines(doc: &str) -> Result<AuditLog, AuditError> {
        let mut records = Vec::new();
        for (i, line) in doc.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: AuditRecord = serde_json::from_str(line)
                .map_err(|e| AuditError::Parse { line: i + 1, message: e.to_string() })?;
            records.push(r);
        }
        AuditLog::from_records(records)
    }

    /// Re-applies every decision to fresh copies of `proposals` and returns
    /// the resulting outcomes keyed by proposal id.
    pub fn replay(
        &self,
        proposals: &[MappingProposal],
        catalog: &DmmCatalog,
    ) -> Result<BTreeMap<String, Outcome>, AuditError> {
        let mut state: BTreeMap<&str, (MappingProposal, Option<&AuditRecord>)> = proposals
            .iter()
            .map(|p| (p.id.as_str(), (MappingProposal { status: ProposalStatus::Pending, ..p.clone() }, None)))
            .collect();
        let mut out = BTreeMap::new();
        for r in &self.records {
            let replay_err = |source| AuditError::Replay { seq: r.seq, source };
            let (proposal, decided) = state
                .get_mut(r.proposal.as_str())
                .ok_or_else(|| replay_err(ConfirmError::UnknownProposal(r.proposal.clone())))?;
            if let Some(prev) = decided {
                return Err(replay_err(ConfirmError::AlreadyDecided {
                    proposal: r.proposal.clone(),
                    status: proposal.status,
                    by: prev.who.clone(),
                }));
            }
            let (outcome, status) = decide(proposal, &r.decision, &r.who, r.at, catalog).map_err(replay_err)?;
            proposal.status = status;
            *decided = Some(r);
            out.insert(r.proposal.clone(), outcome);
        }
        Ok(out)
    }
}
