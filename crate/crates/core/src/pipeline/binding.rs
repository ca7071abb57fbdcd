//! Placeholder bindings and plan instantiation.
//!
//! Binding file:
//!
//! ```text
//! @locality = Wagga Wagga
//! @region = Murrumbidgee
//! SES LN = Wagga Wagga
//! CouncilName = Wagga Wagga City Council
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::abm::{AbmSet, ConsistencyReport};
use crate::markup::{self, MarkupError};
use crate::text::slugify;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BindingError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("placeholder `{0}` is bound twice")]
    Duplicate(String),
    #[error("placeholder `{0}` has an empty replacement")]
    EmptyValue(String),
    #[error("replacement for `{0}` contains a marker delimiter")]
    MarkerInValue(String),
    #[error("invalid placeholder name `{0}`")]
    BadName(String),
    #[error("binding has no locality")]
    NoLocality,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    entries: BTreeMap<String, String>,
    locality: String,
    #[serde(default)]
    region: String,
}

impl Binding {
    pub fn new(
        entries: impl IntoIterator<Item = (String, String)>,
        locality: impl Into<String>,
        region: impl Into<String>,
    ) -> Result<Binding, BindingError> {
        let mut map = BTreeMap::new();
        for (k, v) in entries {
            let k = k.trim().to_string();
            if k.is_empty() || k.contains(['<', '>', '\n']) {
                return Err(BindingError::BadName(k));
            }
            if v.trim().is_empty() {
                return Err(BindingError::EmptyValue(k));
            }
            if v.contains(['<', '>']) {
                return Err(BindingError::MarkerInValue(k));
            }
            if map.insert(k.clone(), v).is_some() {
                return Err(BindingError::Duplicate(k));
            }
        }
        let locality = locality.into().trim().to_string();
        if slugify(&locality).is_empty() {
            return Err(BindingError::NoLocality);
        }
        Ok(Binding { entries: map, locality, region: region.into().trim().to_string() })
    }

    /// Re-checks invariants after deserialization.
    pub fn checked(self) -> Result<Binding, BindingError> {
        Binding::new(self.entries, self.locality, self.region)
    }

    pub fn parse(doc: &str) -> Result<Binding, BindingError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        let mut locality = None;
        let mut region = None;
        for (i, raw) in doc.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: &str| BindingError::Parse { line: i + 1, message: message.to_string() };
            let (key, value) = line.split_once('=').ok_or_else(|| perr("expected `name = value`"))?;
            let (key, value) = (key.trim(), value.trim().to_string());
            match key {
                "@locality" | "@region" => {
                    let slot = if key == "@locality" { &mut locality } else { &mut region };
                    if slot.replace(value).is_some() {
                        return Err(perr(&format!("`{key}` given twice")));
                    }
                }
                k if k.starts_with('@') => return Err(perr(&format!("unknown directive `{k}`"))),
                k => {
                    if !seen.insert(k.to_string()) {
                        return Err(BindingError::Duplicate(k.to_string()));
                    }
                    entries.push((k.to_string(), value));
                }
            }
        }
        Binding::new(entries, locality.ok_or(BindingError::NoLocality)?, region.unwrap_or_default())
    }

    pub fn to_document(&self) -> String {
        let mut out = format!("@locality = {}\n", self.locality);
        if !self.region.is_empty() {
            out.push_str(&format!("@region = {}\n", self.region));
        }
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.entries.get(name).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn locality(&self) -> &str {
        &self.locality
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    /// Plan id of instances made with this binding.
    pub fn plan_id(&self) -> String {
        slugify(&self.locality)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum UnboundPolicy {
    #[default]
    Strict,
    /// Placeholders in this set may stay unbound.
    Allow(BTreeSet<String>),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstantiateError {
    #[error("template models are inconsistent: {0}")]
    InvalidTemplate(ConsistencyReport),
    #[error("unbound placeholders: {}", .0.join(", "))]
    Unbound(Vec<String>),
    #[error(transparent)]
    Markup(#[from] MarkupError),
    #[error("instance is inconsistent after substitution: {0}")]
    InvalidInstance(ConsistencyReport),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instantiated {
    pub set: AbmSet,
    /// Binding keys that match no placeholder.
    pub warnings: Vec<String>,
}

/// Instance id of a template element.
pub fn instance_id(plan_id: &str, template_id: &str) -> String {
    format!("{plan_id}:{template_id}")
}

pub fn instantiate(
    template: &AbmSet,
    binding: &Binding,
    policy: &UnboundPolicy,
) -> Result<Instantiated, InstantiateError> {
    let report = template.validate();
    if !report.is_empty() {
        return Err(InstantiateError::InvalidTemplate(report));
    }
    let names = template.placeholder_names()?;
    let unbound: Vec<String> = names
        .iter()
        .filter(|n| binding.get(n).is_none())
        .filter(|n| match policy {
            UnboundPolicy::Strict => true,
            UnboundPolicy::Allow(ok) => !ok.contains(*n),
        })
        .cloned()
        .collect();
    if !unbound.is_empty() {
        return Err(InstantiateError::Unbound(unbound));
    }
    let warnings = binding
        .entries()
        .keys()
        .filter(|k| !names.contains(*k))
        .map(|k| format!("binding for `{k}` matches no placeholder"))
        .collect();

    let mut set = template.clone();
    set.map_texts(|t| markup::substitute(t, |n| binding.get(n)))?;
    let plan_id = binding.plan_id();
    set.map_ids(|id| instance_id(&plan_id, id));
    set.plan_id = plan_id;

    let report = set.validate();
    if !report.is_empty() {
        return Err(InstantiateError::InvalidInstance(report));
    }
    Ok(Instantiated { set, warnings })
}
