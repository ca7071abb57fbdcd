//! Disaster-management metamodel (DMM) concept catalog and its
//! agent-oriented annotation.
//!
//! Catalog document layout (UTF-8, tab-separated, newline-terminated):
//!
//! ```text
//! #dmm-catalog 1
//! version<TAB>...
//! default<TAB>true|false
//! concept<TAB>id<TAB>name<TAB>phase<TAB>tag|-<TAB>extended<TAB>description
//! ```
//!
//! Field text escapes `\`, tab and newline as `\\`, `\t`, `\n`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::axes::{AgentTag, PhaseId};
use crate::text::slugify;

pub const CATALOG_HEADER: &str = "#dmm-catalog 1";

/// Per-phase concept counts of the shipped metamodel, in PPRR order.
pub const DEFAULT_PHASE_COUNTS: [(PhaseId, usize); 4] = [
    (PhaseId::Prevention, 21),
    (PhaseId::Preparedness, 25),
    (PhaseId::Response, 25),
    (PhaseId::Recovery, 21),
];

const SHIPPED_CATALOG: &str = include_str!("../data/dmm_catalog.txt");
const SHIPPED_TAGS: &str = include_str!("../data/dmm_tags.txt");

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("line {line}: field `{field}`: {message}")]
    Parse { line: usize, field: &'static str, message: String },
    #[error("duplicate concept id `{0}`")]
    DuplicateId(String),
    #[error("duplicate concept name `{name}` in phase {phase}")]
    DuplicateName { phase: PhaseId, name: String },
    #[error("tag table rows conflict on `{concept}`: line {} (`{}`) vs line {} (`{}`)", .first.line, .first, .second.line, .second)]
    Conflict { concept: String, first: TagRow, second: TagRow },
    #[error("tag table line {}: `{}` matches no concept", .0.line, .0.pattern)]
    UnknownConcept(TagRow),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmmConcept {
    pub id: String,
    pub name: String,
    pub phase: PhaseId,
    pub tag: Option<AgentTag>,
    pub description: String,
}

impl DmmConcept {
    /// Builds a concept with the conventional `phase/slug` id.
    pub fn new(name: &str, phase: PhaseId, description: &str) -> Self {
        DmmConcept {
            id: format!("{}/{}", phase, slugify(name)),
            name: name.to_string(),
            phase,
            tag: None,
            description: description.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub tagged: usize,
    pub total: usize,
}

impl fmt::Display for Coverage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.tagged, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DmmCatalog {
    version: String,
    default: bool,
    concepts: Vec<DmmConcept>,
}

impl DmmCatalog {
    /// Builds a catalog, rejecting duplicate ids and duplicate names within a phase.
    pub fn new(version: impl Into<String>, default: bool, concepts: Vec<DmmConcept>) -> Result<Self, CatalogError> {
        let cat = DmmCatalog::from_raw(version, default, concepts);
        let mut ids = BTreeSet::new();
        let mut names = BTreeSet::new();
        for c in &cat.concepts {
            if !ids.insert(c.id.as_str()) {
                return Err(CatalogError::DuplicateId(c.id.clone()));
            }
            if !names.insert((c.phase, c.name.as_str())) {
                return Err(CatalogError::DuplicateName { phase: c.phase, name: c.name.clone() });
            }
        }
        Ok(cat)
    }

    /// No integrity checks; pair with [`DmmCatalog::validate`].
    pub fn from_raw(version: impl Into<String>, default: bool, concepts: Vec<DmmConcept>) -> Self {
        DmmCatalog { version: version.into(), default, concepts }
    }

    /// The shipped 92-concept catalog, unannotated.
    pub fn shipped() -> Self {
        DmmCatalog::load(SHIPPED_CATALOG).expect("shipped catalog parses")
    }

    /// The shipped catalog annotated with the shipped tag table.
    pub fn shipped_annotated() -> Self {
        DmmCatalog::shipped()
            .annotate(&TagTable::shipped())
            .expect("shipped tag table applies")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Whether the catalog claims to be the standard metamodel (and so must
    /// match [`DEFAULT_PHASE_COUNTS`]).
    pub fn is_default(&self) -> bool {
        self.default
    }

    pub fn concepts(&self) -> &[DmmConcept] {
        &self.concepts
    }

    pub fn into_concepts(self) -> Vec<DmmConcept> {
        self.concepts
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn concept(&self, id: &str) -> Option<&DmmConcept> {
        self.concepts.iter().find(|c| c.id == id)
    }

    pub fn phase_count(&self, phase: PhaseId) -> usize {
        self.concepts.iter().filter(|c| c.phase == phase).count()
    }

    pub fn coverage(&self) -> Coverage {
        Coverage {
            tagged: self.concepts.iter().filter(|c| c.tag.is_some()).count(),
            total: self.concepts.len(),
        }
    }

    pub fn is_fully_annotated(&self) -> bool {
        self.concepts.iter().all(|c| c.tag.is_some())
    }

    /// Concepts with the given phase and tag, sorted by name.
    pub fn concepts_by(&self, phase: PhaseId, tag: AgentTag) -> Vec<&DmmConcept> {
        let mut out: Vec<_> = self
            .concepts
            .iter()
            .filter(|c| c.phase == phase && c.tag == Some(tag))
            .collect();
        out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
        out
    }

    /// Applies every row of `table`. Rows may re-tag concepts that already
    /// carry a tag; the operation is idempotent.
    pub fn annotate(&self, table: &TagTable) -> Result<DmmCatalog, CatalogError> {
        let mut assigned: BTreeMap<usize, &TagRow> = BTreeMap::new();
        for row in &table.rows {
            let matched: Vec<usize> = self
                .concepts
                .iter()
                .enumerate()
                .filter(|(_, c)| row.matches(c))
                .map(|(i, _)| i)
                .collect();
            if matched.is_empty() {
                return Err(CatalogError::UnknownConcept(row.clone()));
            }
            for i in matched {
                match assigned.get(&i) {
                    Some(prev) if prev.tag != row.tag => {
                        return Err(CatalogError::Conflict {
                            concept: self.concepts[i].id.clone(),
                            first: (*prev).clone(),
                            second: row.clone(),
                        });
                    }
                    Some(_) => {}
                    None => {
                        assigned.insert(i, row);
                    }
                }
            }
        }
        let mut out = self.clone();
        for (i, row) in assigned {
            out.concepts[i].tag = Some(row.tag);
        }
        Ok(out)
    }

    /// Lists every violated catalog invariant. An empty report means the
    /// catalog is sound.
    pub fn validate(&self) -> ValidationReport {
        let mut issues = Vec::new();

        let mut by_id: BTreeMap<&str, usize> = BTreeMap::new();
        for c in &self.concepts {
            *by_id.entry(&c.id).or_default() += 1;
        }
        for (id, n) in &by_id {
            if *n > 1 {
                issues.push(CatalogIssue {
                    kind: IssueKind::DuplicateId,
                    concept_ids: vec![id.to_string()],
                    detail: format!("id occurs {n} times"),
                });
            }
        }

        let mut by_name: BTreeMap<(PhaseId, &str), Vec<&str>> = BTreeMap::new();
        for c in &self.concepts {
            by_name.entry((c.phase, &c.name)).or_default().push(&c.id);
        }
        for ((phase, name), ids) in &by_name {
            if ids.len() > 1 {
                issues.push(CatalogIssue {
                    kind: IssueKind::DuplicateName,
                    concept_ids: ids.iter().map(|s| s.to_string()).collect(),
                    detail: format!("name `{name}` repeated in {phase}"),
                });
            }
        }

        for c in &self.concepts {
            if c.id.trim().is_empty() || c.name.trim().is_empty() {
                issues.push(CatalogIssue {
                    kind: IssueKind::EmptyField,
                    concept_ids: vec![c.id.clone()],
                    detail: "id and name must be non-empty".into(),
                });
            }
        }

        if self.default {
            for (phase, expected) in DEFAULT_PHASE_COUNTS {
                let ids: Vec<String> = self
                    .concepts
                    .iter()
                    .filter(|c| c.phase == phase)
                    .map(|c| c.id.clone())
                    .collect();
                if ids.len() != expected {
                    issues.push(CatalogIssue {
                        kind: IssueKind::PhaseCountMismatch,
                        detail: format!("{phase}: expected {expected} concepts, found {}", ids.len()),
                        concept_ids: ids,
                    });
                }
            }
        }

        ValidationReport { issues }
    }

    pub fn load(source: &str) -> Result<DmmCatalog, CatalogError> {
        let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
        let perr = |line, field, message: &str| CatalogError::Parse { line, field, message: message.to_string() };

        if lines.next().map(|(_, l)| l) != Some(CATALOG_HEADER) {
            return Err(perr(1, "header", "expected `#dmm-catalog 1`"));
        }

        let (n, line) = lines.next().ok_or_else(|| perr(2, "version", "missing version record"))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0] != "version" {
            return Err(perr(n, "version", "expected `version<TAB>text`"));
        }
        let version = unescape(fields[1]).map_err(|m| perr(n, "version", &m))?;

        let (n, line) = lines.next().ok_or_else(|| perr(3, "default", "missing default record"))?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0] != "default" {
            return Err(perr(n, "default", "expected `default<TAB>true|false`"));
        }
        let default = parse_bool(fields[1]).ok_or_else(|| perr(n, "default", "expected true or false"))?;

        let mut concepts = Vec::new();
        let mut seen = BTreeSet::new();
        for (n, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.first() != Some(&"concept") {
                return Err(perr(n, "record", "expected a `concept` record"));
            }
            if fields.len() != 7 {
                return Err(perr(n, "record", &format!("expected 7 fields, found {}", fields.len())));
            }
            let id = unescape(fields[1]).map_err(|m| perr(n, "id", &m))?;
            let name = unescape(fields[2]).map_err(|m| perr(n, "name", &m))?;
            let phase = PhaseId::from_str(fields[3]).map_err(|e| perr(n, "phase", &e.to_string()))?;
            let tag = match fields[4] {
                "-" => None,
                t => Some(AgentTag::from_str(t).map_err(|e| perr(n, "tag", &e.to_string()))?),
            };
            let extended = parse_bool(fields[5]).ok_or_else(|| perr(n, "extended", "expected true or false"))?;
            if extended != tag.is_some_and(AgentTag::is_extended) {
                return Err(perr(n, "extended", "flag does not match the tag"));
            }
            let description = unescape(fields[6]).map_err(|m| perr(n, "description", &m))?;
            if id.is_empty() {
                return Err(perr(n, "id", "empty id"));
            }
            if !seen.insert(id.clone()) {
                return Err(CatalogError::DuplicateId(id));
            }
            concepts.push(DmmConcept { id, name, phase, tag, description });
        }
        if !source.ends_with('\n') {
            return Err(perr(source.lines().count(), "record", "document must end with a newline"));
        }
        DmmCatalog::new(version, default, concepts)
    }

    /// Canonical document; byte-identical for equal catalogs.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        out.push_str(CATALOG_HEADER);
        out.push('\n');
        out.push_str(&format!("version\t{}\n", escape(&self.version)));
        out.push_str(&format!("default\t{}\n", self.default));
        for c in &self.concepts {
            let tag = c.tag.map_or("-", AgentTag::keyword);
            let extended = c.tag.is_some_and(AgentTag::is_extended);
            out.push_str(&format!(
                "concept\t{}\t{}\t{}\t{}\t{}\t{}\n",
                escape(&c.id),
                escape(&c.name),
                c.phase,
                tag,
                extended,
                escape(&c.description)
            ));
        }
        out
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape `\\{other}`")),
            None => return Err("dangling `\\`".into()),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueKind {
    DuplicateId,
    DuplicateName,
    EmptyField,
    PhaseCountMismatch,
}

impl IssueKind {
    pub fn label(self) -> &'static str {
        match self {
            IssueKind::DuplicateId => "duplicate-id",
            IssueKind::DuplicateName => "duplicate-name",
            IssueKind::EmptyField => "empty-field",
            IssueKind::PhaseCountMismatch => "phase-count mismatch",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CatalogIssue {
    pub kind: IssueKind,
    pub concept_ids: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<CatalogIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

/// One row of a tag table: a concept id (contains `/`) or a name pattern
/// where `*` matches any run of characters and `?` a single one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagRow {
    pub pattern: String,
    pub tag: AgentTag,
    /// Source line, 0 when built in memory.
    #[serde(default)]
    pub line: usize,
}

impl TagRow {
    pub fn new(pattern: impl Into<String>, tag: AgentTag) -> Self {
        TagRow { pattern: pattern.into(), tag, line: 0 }
    }

    pub fn matches(&self, concept: &DmmConcept) -> bool {
        if self.pattern.contains('/') {
            concept.id == self.pattern
        } else {
            glob_match(&self.pattern, &concept.name)
        }
    }
}

impl fmt::Display for TagRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.pattern, self.tag)
    }
}

fn glob_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    let (mut pi, mut ti) = (0, 0);
    let mut star: Option<(usize, usize)> = None;
    while ti < t.len() {
        if pi < p.len() && (p[pi] == '?' || p[pi] == t[ti]) {
            pi += 1;
            ti += 1;
        } else if pi < p.len() && p[pi] == '*' {
            star = Some((pi, ti));
            pi += 1;
        } else if let Some((sp, st)) = star {
            pi = sp + 1;
            ti = st + 1;
            star = Some((sp, st + 1));
        } else {
            return false;
        }
    }
    p[pi..].iter().all(|&c| c == '*')
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagTable {
    pub rows: Vec<TagRow>,
}

impl TagTable {
    pub fn new(rows: Vec<TagRow>) -> Self {
        TagTable { rows }
    }

    pub fn shipped() -> Self {
        TagTable::parse(SHIPPED_TAGS).expect("shipped tag table parses")
    }

    /// Parses `pattern = tag` lines; blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<TagTable, CatalogError> {
        let mut rows = Vec::new();
        for (i, raw) in source.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (pattern, tag) = line.split_once('=').ok_or_else(|| CatalogError::Parse {
                line: i + 1,
                field: "row",
                message: "expected `pattern = tag`".into(),
            })?;
            let tag = AgentTag::from_str(tag).map_err(|e| CatalogError::Parse {
                line: i + 1,
                field: "tag",
                message: e.to_string(),
            })?;
            let pattern = pattern.trim();
            if pattern.is_empty() {
                return Err(CatalogError::Parse { line: i + 1, field: "pattern", message: "empty pattern".into() });
            }
            rows.push(TagRow { pattern: pattern.to_string(), tag, line: i + 1 });
        }
        Ok(TagTable { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_counts() {
        let cat = DmmCatalog::shipped();
        assert_eq!(cat.len(), 92);
        let counts: Vec<usize> = PhaseId::ALL.iter().map(|p| cat.phase_count(*p)).collect();
        assert_eq!(counts, [21, 25, 25, 21]);
        assert!(cat.is_default());
        assert!(cat.validate().is_empty());
        assert_eq!(cat.coverage(), Coverage { tagged: 0, total: 92 });
    }

    #[test]
    fn shipped_ids_follow_phase_slug_convention() {
        for c in DmmCatalog::shipped().concepts() {
            assert_eq!(c.id, format!("{}/{}", c.phase, slugify(&c.name)));
        }
    }

    #[test]
    fn empty_catalog_is_valid_non_default() {
        let doc = "#dmm-catalog 1\nversion\tlocal\ndefault\tfalse\n";
        let cat = DmmCatalog::load(doc).unwrap();
        assert!(cat.is_empty());
        assert!(!cat.is_default());
        assert!(cat.validate().is_empty());
    }

    #[test]
    fn duplicate_id_names_the_id() {
        let doc = "#dmm-catalog 1\nversion\tv\ndefault\tfalse\n\
                   concept\tresponse/x\tX\tresponse\t-\tfalse\td\n\
                   concept\tresponse/x\tY\tresponse\t-\tfalse\td\n";
        let err = DmmCatalog::load(doc).unwrap_err();
        assert_eq!(err, CatalogError::DuplicateId("response/x".into()));
        assert!(err.to_string().contains("response/x"));
    }

    #[test]
    fn parse_errors_carry_line_and_field() {
        let doc = "#dmm-catalog 1\nversion\tv\ndefault\tfalse\nconcept\ta/b\tB\tsummer\t-\tfalse\td\n";
        match DmmCatalog::load(doc).unwrap_err() {
            CatalogError::Parse { line, field, .. } => assert_eq!((line, field), (4, "phase")),
            e => panic!("unexpected {e:?}"),
        }
        let doc = "#dmm-catalog 1\nversion\tv\ndefault\tfalse\nconcept\ta/b\tB\tresponse\tinteraction\tfalse\td\n";
        match DmmCatalog::load(doc).unwrap_err() {
            CatalogError::Parse { field, .. } => assert_eq!(field, "extended"),
            e => panic!("unexpected {e:?}"),
        }
        assert!(DmmCatalog::load("nonsense\n").is_err());
        assert!(DmmCatalog::load("").is_err());
    }

    #[test]
    fn annotate_single_row() {
        let cat = DmmCatalog::shipped()
            .annotate(&TagTable::new(vec![TagRow::new("PreparednessGoal", AgentTag::Goal)]))
            .unwrap();
        let c = cat.concept("preparedness/preparedness-goal").unwrap();
        assert_eq!(c.tag, Some(AgentTag::Goal));
        assert_eq!(cat.coverage(), Coverage { tagged: 1, total: 92 });
    }

    #[test]
    fn annotate_empty_table_is_noop() {
        let cat = DmmCatalog::shipped();
        let out = cat.annotate(&TagTable::default()).unwrap();
        assert_eq!(out, cat);
        assert_eq!(out.coverage().tagged, 0);
    }

    #[test]
    fn annotate_conflict_lists_both_rows() {
        let table = TagTable::parse("Training = activity\nTrain* = event\n").unwrap();
        match DmmCatalog::shipped().annotate(&table).unwrap_err() {
            CatalogError::Conflict { concept, first, second } => {
                assert_eq!(concept, "preparedness/training");
                assert_eq!((first.line, second.line), (1, 2));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn annotate_same_tag_overlap_is_fine() {
        let table = TagTable::parse("Training = activity\nTrain* = activity\n").unwrap();
        assert!(DmmCatalog::shipped().annotate(&table).is_ok());
    }

    #[test]
    fn annotate_unknown_row() {
        let table = TagTable::parse("Nonexistent = goal\n").unwrap();
        assert!(matches!(
            DmmCatalog::shipped().annotate(&table),
            Err(CatalogError::UnknownConcept(_))
        ));
    }

    #[test]
    fn retagging_is_allowed() {
        let cat = DmmCatalog::shipped_annotated();
        let out = cat
            .annotate(&TagTable::new(vec![TagRow::new("Media", AgentTag::Activity)]))
            .unwrap();
        assert_eq!(out.concept("preparedness/media").unwrap().tag, Some(AgentTag::Activity));
    }

    #[test]
    fn concepts_by_empty_and_sorted() {
        let cat = DmmCatalog::shipped_annotated();
        assert!(cat.concepts_by(PhaseId::Prevention, AgentTag::Event).is_empty());
        let acts = cat.concepts_by(PhaseId::Preparedness, AgentTag::Activity);
        let names: Vec<_> = acts.iter().map(|c| c.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        assert!(names.contains(&"Training") && names.contains(&"PublicEducation"));
    }

    #[test]
    fn ninety_one_default_concepts_is_a_count_mismatch() {
        let mut concepts = DmmCatalog::shipped().into_concepts();
        concepts.pop();
        let cat = DmmCatalog::new("v", true, concepts).unwrap();
        let report = cat.validate();
        assert_eq!(report.issues.len(), 1);
        assert_eq!(report.issues[0].kind.label(), "phase-count mismatch");
        assert_eq!(report.issues[0].concept_ids.len(), 20);
    }

    #[test]
    fn glob() {
        assert!(glob_match("Train*", "Training"));
        assert!(glob_match("*Goal", "PreparednessGoal"));
        assert!(glob_match("R?sponse*", "ResponseTeam"));
        assert!(!glob_match("Goal", "PreparednessGoal"));
        assert!(glob_match("*", ""));
    }

    #[test]
    fn escapes_round_trip() {
        let s = "tab\there\nnew \\ line";
        assert_eq!(unescape(&escape(s)).unwrap(), s);
        assert!(unescape("bad\\q").is_err());
    }
}
