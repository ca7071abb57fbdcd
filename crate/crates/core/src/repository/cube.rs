//! The phase x MOF x tag cube and its navigable views.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::axes::{AgentTag, MofLevel, PhaseId, UnknownVariant};
use crate::pipeline::KnowledgeUnit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CubeAddress {
    pub phase: PhaseId,
    pub mof: MofLevel,
    pub tag: AgentTag,
}

impl CubeAddress {
    /// All 64 cells in axis order.
    pub fn all() -> Vec<CubeAddress> {
        let mut out = Vec::with_capacity(64);
        for &phase in PhaseId::ALL {
            for &mof in MofLevel::ALL {
                for &tag in AgentTag::ALL {
                    out.push(CubeAddress { phase, mof, tag });
                }
            }
        }
        out
    }
}

impl fmt::Display for CubeAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.phase, self.mof, self.tag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Phase,
    Mof,
    Tag,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Phase, Axis::Mof, Axis::Tag];

    pub fn keyword(self) -> &'static str {
        match self {
            Axis::Phase => "phase",
            Axis::Mof => "mof",
            Axis::Tag => "tag",
        }
    }

    pub fn value(self, raw: &str) -> Result<AxisValue, UnknownVariant> {
        Ok(match self {
            Axis::Phase => AxisValue::Phase(raw.parse()?),
            Axis::Mof => AxisValue::Mof(raw.parse()?),
            Axis::Tag => AxisValue::Tag(raw.parse()?),
        })
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for Axis {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Axis::ALL
            .into_iter()
            .find(|a| a.keyword() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| UnknownVariant { what: "axis", value: s.to_string() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxisValue {
    Phase(PhaseId),
    Mof(MofLevel),
    Tag(AgentTag),
}

impl AxisValue {
    pub fn axis(self) -> Axis {
        match self {
            AxisValue::Phase(_) => Axis::Phase,
            AxisValue::Mof(_) => Axis::Mof,
            AxisValue::Tag(_) => Axis::Tag,
        }
    }
}

/// Some coordinates fixed, the others free.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slice {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mof: Option<MofLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<AgentTag>,
}

impl Slice {
    pub fn is_fixed(&self, axis: Axis) -> bool {
        match axis {
            Axis::Phase => self.phase.is_some(),
            Axis::Mof => self.mof.is_some(),
            Axis::Tag => self.tag.is_some(),
        }
    }

    pub fn matches(&self, addr: &CubeAddress) -> bool {
        self.phase.is_none_or(|p| p == addr.phase)
            && self.mof.is_none_or(|m| m == addr.mof)
            && self.tag.is_none_or(|t| t == addr.tag)
    }

    fn set(&mut self, v: AxisValue) {
        match v {
            AxisValue::Phase(p) => self.phase = Some(p),
            AxisValue::Mof(m) => self.mof = Some(m),
            AxisValue::Tag(t) => self.tag = Some(t),
        }
    }

    fn clear(&mut self, axis: Axis) {
        match axis {
            Axis::Phase => self.phase = None,
            Axis::Mof => self.mof = None,
            Axis::Tag => self.tag = None,
        }
    }

    /// The coordinates of `addr` on the axes that are free here.
    fn free_part(&self, addr: &CubeAddress) -> Slice {
        Slice {
            phase: self.phase.is_none().then_some(addr.phase),
            mof: self.mof.is_none().then_some(addr.mof),
            tag: self.tag.is_none().then_some(addr.tag),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CubeError {
    #[error("axis `{0}` is already fixed")]
    AlreadyFixed(Axis),
    #[error("axis `{0}` is already free")]
    AlreadyFree(Axis),
}

/// An immutable snapshot of the cube with some axes fixed. Later changes
/// to the store do not show through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubeView {
    base: Arc<[KnowledgeUnit]>,
    fixed: Slice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CubeGroup<'a> {
    /// Values of the free axes shared by this group.
    pub key: Slice,
    pub units: Vec<&'a KnowledgeUnit>,
}

impl CubeView {
    /// A view over `units` with every axis free.
    pub fn new(mut units: Vec<KnowledgeUnit>) -> CubeView {
        units.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
        CubeView { base: units.into(), fixed: Slice::default() }
    }

    pub fn fixed(&self) -> Slice {
        self.fixed
    }

    pub fn free_axes(&self) -> Vec<Axis> {
        Axis::ALL.into_iter().filter(|a| !self.fixed.is_fixed(*a)).collect()
    }

    pub fn units(&self) -> impl Iterator<Item = &KnowledgeUnit> {
        self.base.iter().filter(|u| self.fixed.matches(&u.cell))
    }

    pub fn len(&self) -> usize {
        self.units().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Units grouped by their free-axis coordinates, groups in key order,
    /// units by id.
    pub fn groups(&self) -> Vec<CubeGroup<'_>> {
        let mut map: BTreeMap<Slice, Vec<&KnowledgeUnit>> = BTreeMap::new();
        for u in self.units() {
            map.entry(self.fixed.free_part(&u.cell)).or_default().push(u);
        }
        map.into_iter().map(|(key, units)| CubeGroup { key, units }).collect()
    }

    pub fn drill_down(&self, value: AxisValue) -> Result<CubeView, CubeError> {
        if self.fixed.is_fixed(value.axis()) {
            return Err(CubeError::AlreadyFixed(value.axis()));
        }
        let mut fixed = self.fixed;
        fixed.set(value);
        Ok(CubeView { base: Arc::clone(&self.base), fixed })
    }

    pub fn roll_up(&self, axis: Axis) -> Result<CubeView, CubeError> {
        if !self.fixed.is_fixed(axis) {
            return Err(CubeError::AlreadyFree(axis));
        }
        let mut fixed = self.fixed;
        fixed.clear(axis);
        Ok(CubeView { base: Arc::clone(&self.base), fixed })
    }

    /// Serializable form of the view.
    pub fn to_doc(&self) -> CubeViewDoc {
        CubeViewDoc {
            fixed: self.fixed,
            free: self.free_axes(),
            total: self.len(),
            groups: self
                .groups()
                .into_iter()
                .map(|g| CubeGroupDoc { key: g.key, count: g.units.len(), units: g.units.into_iter().cloned().collect() })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeGroupDoc {
    pub key: Slice,
    pub count: usize,
    pub units: Vec<KnowledgeUnit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeViewDoc {
    pub fixed: Slice,
    pub free: Vec<Axis>,
    pub total: usize,
    pub groups: Vec<CubeGroupDoc>,
}
