//! Canonical repository document: one JSON record per line, manifest first.
//!
//! Record order: manifest, catalog, concepts (catalog order), plans,
//! proposals, decisions (sequence order), units; plans, proposals and units
//! sorted by id. The same store always exports to the same bytes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CubeAddress, PlanRecord, RepositoryStore};
use crate::axes::{AgentTag, PhaseId};
use crate::catalog::{CatalogError, DmmCatalog, DmmConcept};
use crate::pipeline::{AuditLog, AuditRecord, CellCount, KnowledgeUnit, MappingProposal, Outcome, ProposalStatus};

pub const FORMAT: &str = "dforge-repository";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersistError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported repository document version {found} (supported: {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("not a repository document: {0}")]
    NotARepository(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error("integrity: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    catalog_version: String,
    plans: Vec<String>,
    proposals: usize,
    decisions: usize,
    units: usize,
    cells: Vec<CellCount>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ConceptRecord {
    id: String,
    name: String,
    phase: PhaseId,
    tag: Option<AgentTag>,
    extended: bool,
    description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Record {
    Manifest(Manifest),
    Catalog { version: String, default: bool },
    Concept(ConceptRecord),
    Plan(PlanRecord),
    Proposal(MappingProposal),
    Decision(AuditRecord),
    Unit(KnowledgeUnit),
}

fn line(out: &mut String, r: &Record) {
    out.push_str(&serde_json::to_string(r).expect("records serialize"));
    out.push('\n');
}

impl RepositoryStore {
    pub fn export(&self) -> String {
        let mut out = String::new();
        let manifest = Manifest {
            format: FORMAT.to_string(),
            version: FORMAT_VERSION,
            catalog_version: self.catalog.version().to_string(),
            plans: self.plans.keys().cloned().collect(),
            proposals: self.proposals.len(),
            decisions: self.audit.len(),
            units: self.units.len(),
            cells: self.cell_counts().into_iter().map(|(cell, count)| CellCount { cell, count }).collect(),
        };
        line(&mut out, &Record::Manifest(manifest));
        line(&mut out, &Record::Catalog { version: self.catalog.version().to_string(), default: self.catalog.is_default() });
        for c in self.catalog.concepts() {
            line(
                &mut out,
                &Record::Concept(ConceptRecord {
                    id: c.id.clone(),
                    name: c.name.clone(),
                    phase: c.phase,
                    tag: c.tag,
                    extended: c.tag.is_some_and(AgentTag::is_extended),
                    description: c.description.clone(),
                }),
            );
        }
        for p in self.plans.values() {
            line(&mut out, &Record::Plan(p.clone()));
        }
        for p in self.proposals.values() {
            line(&mut out, &Record::Proposal(p.clone()));
        }
        for r in self.audit.records() {
            line(&mut out, &Record::Decision(r.clone()));
        }
        for u in self.units.values() {
            line(&mut out, &Record::Unit(u.clone()));
        }
        out
    }

    pub fn import(doc: &str) -> Result<RepositoryStore, PersistError> {
        let mut records = Vec::new();
        for (i, raw) in doc.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            if i == 0 {
                check_header(raw)?;
            }
            let r: Record =
                serde_json::from_str(raw).map_err(|e| PersistError::Parse { line: i + 1, message: e.to_string() })?;
            records.push((i + 1, r));
        }
        let mut it = records.into_iter().peekable();
        let Some((_, Record::Manifest(manifest))) = it.next() else {
            return Err(PersistError::NotARepository("the first record must be the manifest".into()));
        };
        let Some((_, Record::Catalog { version, default })) = it.next() else {
            return Err(PersistError::NotARepository("the catalog record must follow the manifest".into()));
        };

        let mut concepts = Vec::new();
        let mut plans = Vec::new();
        let mut proposals = Vec::new();
        let mut decisions = Vec::new();
        let mut units = Vec::new();
        let mut stage = 0;
        for (ln, r) in it {
            let order = match &r {
                Record::Concept(_) => 0,
                Record::Plan(_) => 1,
                Record::Proposal(_) => 2,
                Record::Decision(_) => 3,
                Record::Unit(_) => 4,
                Record::Manifest(_) | Record::Catalog { .. } => {
                    return Err(PersistError::Parse { line: ln, message: "header record repeated".into() })
                }
            };
            if order < stage {
                return Err(PersistError::Parse { line: ln, message: "record out of canonical order".into() });
            }
            stage = order;
            match r {
                Record::Concept(c) => {
                    if c.extended != c.tag.is_some_and(AgentTag::is_extended) {
                        return Err(PersistError::Integrity(format!("concept `{}` has a wrong extended flag", c.id)));
                    }
                    concepts.push(DmmConcept {
                        id: c.id,
                        name: c.name,
                        phase: c.phase,
                        tag: c.tag,
                        description: c.description,
                    })
                }
                Record::Plan(p) => plans.push(p),
                Record::Proposal(p) => proposals.push(p),
                Record::Decision(d) => decisions.push(d),
                Record::Unit(u) => units.push(u),
                _ => unreachable!(),
            }
        }

        if manifest.catalog_version != version {
            return Err(PersistError::Integrity("manifest and catalog versions differ".into()));
        }
        let mut store = RepositoryStore::new(DmmCatalog::new(version, default, concepts)?);

        for p in plans {
            if p.set.plan_id != p.plan_id {
                return Err(PersistError::Integrity(format!("plan record `{}` holds plan `{}`", p.plan_id, p.set.plan_id)));
            }
            store.register_plan(p.set, &p.template_id).map_err(|e| PersistError::Integrity(e.to_string()))?;
        }
        if store.plans.keys().cloned().collect::<Vec<_>>() != manifest.plans {
            return Err(PersistError::Integrity("plan registry differs from the manifest".into()));
        }

        let mut seen = BTreeSet::new();
        for p in &proposals {
            if !seen.insert(p.id.clone()) {
                return Err(PersistError::Integrity(format!("proposal `{}` appears twice", p.id)));
            }
            if !store.plans.contains_key(&p.element.plan_id) {
                return Err(PersistError::Integrity(format!("proposal `{}` refers to unknown plan", p.id)));
            }
        }

        let audit = AuditLog::from_records(decisions).map_err(|e| PersistError::Integrity(e.to_string()))?;
        let outcomes = audit.replay(&proposals, &store.catalog).map_err(|e| PersistError::Integrity(e.to_string()))?;
        for p in &proposals {
            let expected = match outcomes.get(&p.id) {
                None => ProposalStatus::Pending,
                Some(Outcome::Rejection(_)) => ProposalStatus::Rejected,
                Some(Outcome::Unit(_)) => match audit.decided_by(&p.id).map(|r| &r.decision) {
                    Some(crate::pipeline::Decision::Select { concept, .. })
                        if !p.candidates.iter().any(|c| &c.concept == concept) =>
                    {
                        ProposalStatus::Overridden
                    }
                    _ => ProposalStatus::Confirmed,
                },
            };
            if p.status != expected {
                return Err(PersistError::Integrity(format!(
                    "proposal `{}` is {} but its decisions make it {}",
                    p.id,
                    p.status.keyword(),
                    expected.keyword()
                )));
            }
        }
        let decided_units: BTreeMap<&str, &KnowledgeUnit> = outcomes
            .values()
            .filter_map(|o| match o {
                Outcome::Unit(u) => Some((u.unit_id.as_str(), u)),
                Outcome::Rejection(_) => None,
            })
            .collect();
        for u in &units {
            if decided_units.get(u.unit_id.as_str()) != Some(&u) {
                return Err(PersistError::Integrity(format!("unit `{}` does not match its recorded decision", u.unit_id)));
            }
        }

        {
            let (_, props, log, decided) = store.parts_mut();
            *props = proposals.into_iter().map(|p| (p.id.clone(), p)).collect();
            *log = audit;
            *decided = outcomes;
        }
        for u in units {
            let id = u.unit_id.clone();
            if !store.put_unit(u).map_err(|e| PersistError::Integrity(e.to_string()))? {
                return Err(PersistError::Integrity(format!("unit `{id}` appears twice")));
            }
        }

        let counts: Vec<(CubeAddress, usize)> = manifest.cells.iter().map(|c| (c.cell, c.count)).collect();
        if counts != store.cell_counts()
            || manifest.units != store.units.len()
            || manifest.proposals != store.proposals.len()
            || manifest.decisions != store.audit.len()
        {
            return Err(PersistError::Integrity("record counts differ from the manifest".into()));
        }
        Ok(store)
    }
}

/// Reads just enough of the first line to report format and version
/// problems before the records are parsed in full.
fn check_header(first: &str) -> Result<(), PersistError> {
    let v: serde_json::Value =
        serde_json::from_str(first).map_err(|e| PersistError::Parse { line: 1, message: e.to_string() })?;
    if v.get("record").and_then(|r| r.as_str()) != Some("manifest")
        || v.get("format").and_then(|f| f.as_str()) != Some(FORMAT)
    {
        return Err(PersistError::NotARepository("missing repository manifest".into()));
    }
    match v.get("version").and_then(|n| n.as_u64()) {
        Some(n) if n == FORMAT_VERSION as u64 => Ok(()),
        Some(n) => Err(PersistError::UnsupportedVersion { found: n as u32 }),
        None => Err(PersistError::NotARepository("manifest has no version".into())),
    }
}
