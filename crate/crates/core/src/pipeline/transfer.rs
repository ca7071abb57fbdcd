use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{proposal_id, KnowledgeUnit, Outcome, ProposalStatus};
use crate::repository::{CubeAddress, RepositoryStore, StoreError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    #[serde(flatten)]
    pub cell: CubeAddress,
    pub count: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferReceipt {
    /// New inserts per cell, in cell order.
    pub inserted: Vec<CellCount>,
    pub already_present: usize,
}

impl TransferReceipt {
    pub fn total_inserted(&self) -> usize {
        self.inserted.iter().map(|c| c.count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransferError {
    #[error("unit `{unit}` has no confirmed proposal")]
    NotConfirmed { unit: String },
    #[error("unit `{unit}` differs from the decision recorded for its proposal")]
    NotAsDecided { unit: String },
    #[error(transparent)]
    Integrity(#[from] StoreError),
}

/// Inserts confirmed units into the store. Every unit is checked before
/// any is inserted; units already stored are counted, not re-inserted.
pub fn transfer(units: &[KnowledgeUnit], store: &mut RepositoryStore) -> Result<TransferReceipt, TransferError> {
    for u in units {
        let pid = proposal_id(&u.element.element);
        let confirmed = store
            .proposal(&pid)
            .is_some_and(|p| matches!(p.status, ProposalStatus::Confirmed | ProposalStatus::Overridden));
        if !confirmed {
            return Err(TransferError::NotConfirmed { unit: u.unit_id.clone() });
        }
        match store.outcomes().get(&pid) {
            Some(Outcome::Unit(decided)) if decided == u => {}
            _ => return Err(TransferError::NotAsDecided { unit: u.unit_id.clone() }),
        }
        store.check_unit(u)?;
    }
    let mut counts: BTreeMap<CubeAddress, usize> = BTreeMap::new();
    let mut already_present = 0;
    for u in units {
        if store.put_unit(u.clone())? {
            *counts.entry(u.cell).or_default() += 1;
        } else {
            already_present += 1;
        }
    }
    Ok(TransferReceipt {
        inserted: counts.into_iter().map(|(cell, count)| CellCount { cell, count }).collect(),
        already_present,
    })
}
