//! Rule-based entity recognition over closed-class entity types.
//!
//! Every rule proposes candidate spans; candidates are then accepted greedily
//! by type precedence, longer spans first, then leftmost, skipping any that
//! overlap an accepted span.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dates::{resolve_date, DateRange, DATE_SPAN_RE};
use crate::model::basename;
use crate::query::CommitKind;
use crate::store::KnowledgeBase;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NerError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("commit hash prefix {0} matches more than one commit")]
    AmbiguousHashPrefix(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EntityType {
    IssueKey,
    CommitHash,
    DateRange,
    File,
    Status,
    Priority,
    CommitKind,
    K,
}

impl EntityType {
    pub const ALL: [EntityType; 8] = [
        EntityType::IssueKey,
        EntityType::CommitHash,
        EntityType::DateRange,
        EntityType::File,
        EntityType::Status,
        EntityType::Priority,
        EntityType::CommitKind,
        EntityType::K,
    ];

    /// Lower wins on overlap.
    pub fn precedence(self) -> u8 {
        self as u8
    }

    /// Token that stands in for the entity when embedding an utterance.
    pub fn placeholder(self) -> &'static str {
        match self {
            EntityType::IssueKey => "issuekey",
            EntityType::CommitHash => "commithash",
            EntityType::DateRange => "daterange",
            EntityType::File => "filename",
            EntityType::Status => "statusvalue",
            EntityType::Priority => "priorityvalue",
            EntityType::CommitKind => "commitkind",
            EntityType::K => "topk",
        }
    }

    pub fn from_placeholder(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.placeholder() == token)
    }

    /// Human wording, as used in "Could you please specify the ...?".
    pub fn describe(self) -> &'static str {
        match self {
            EntityType::IssueKey => "bug id",
            EntityType::CommitHash => "commit hash",
            EntityType::DateRange => "date",
            EntityType::File => "file name",
            EntityType::Status => "status",
            EntityType::Priority => "priority",
            EntityType::CommitKind => "commit type (buggy or fixing)",
            EntityType::K => "number of results",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EntityType::IssueKey => "ISSUE_KEY",
            EntityType::CommitHash => "COMMIT_HASH",
            EntityType::DateRange => "DATE_RANGE",
            EntityType::File => "FILE",
            EntityType::Status => "STATUS",
            EntityType::Priority => "PRIORITY",
            EntityType::CommitKind => "COMMIT_KIND",
            EntityType::K => "K",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntityValue {
    /// Store paths the name matched; empty when the name only looks like a
    /// file (known extension) but matches nothing.
    File { name: String, paths: Vec<String> },
    IssueKey { key: String },
    /// `resolved` is false when the hash-like token matched no commit.
    CommitHash { hash: String, resolved: bool },
    DateRange { range: DateRange },
    Status { status: String },
    Priority { priority: String },
    CommitKind { commit_kind: CommitKind },
    K { k: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_type: EntityType,
    pub surface: String,
    /// Character offsets, end exclusive.
    pub span: (usize, usize),
    pub value: EntityValue,
    #[serde(skip)]
    byte_span: (usize, usize),
}

impl Entity {
    pub fn byte_span(&self) -> (usize, usize) {
        self.byte_span
    }
}

/// Clock used to resolve relative dates; fixed for one utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NowClock {
    pub now: DateTime<Utc>,
}

impl NowClock {
    pub fn system() -> Self {
        NowClock { now: Utc::now() }
    }

    pub fn fixed(now: DateTime<Utc>) -> Self {
        NowClock { now }
    }
}

/// Known file names and commit hashes.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    paths: BTreeSet<String>,
    by_lower_path: BTreeMap<String, Vec<String>>,
    by_lower_base: BTreeMap<String, Vec<String>>,
    extensions: BTreeSet<String>,
    hashes: BTreeSet<String>,
}

impl Gazetteer {
    pub fn new<P, H>(paths: P, hashes: H) -> Self
    where
        P: IntoIterator,
        P::Item: Into<String>,
        H: IntoIterator,
        H::Item: Into<String>,
    {
        let mut g = Gazetteer {
            hashes: hashes.into_iter().map(Into::into).collect(),
            ..Default::default()
        };
        for path in paths {
            let path: String = path.into();
            g.by_lower_path.entry(path.to_lowercase()).or_default().push(path.clone());
            let base = basename(&path);
            g.by_lower_base.entry(base.to_lowercase()).or_default().push(path.clone());
            if let Some(ext) = extension(base) {
                g.extensions.insert(ext);
            }
            g.paths.insert(path);
        }
        g
    }

    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        Self::new(
            kb.file_index().keys().cloned(),
            kb.commits().map(|c| c.hash.clone()),
        )
    }

    pub fn paths(&self) -> &BTreeSet<String> {
        &self.paths
    }

    fn match_file(&self, token: &str) -> Option<Vec<String>> {
        if self.paths.contains(token) {
            return Some(vec![token.to_string()]);
        }
        let lowered = token.to_lowercase();
        let mut candidates = match self.by_lower_path.get(&lowered) {
            Some(paths) => paths.clone(),
            None => self.by_lower_base.get(&lowered)?.clone(),
        };
        // extension-less names ("build", "README") must match case exactly
        if !token.contains('.') {
            candidates.retain(|p| p == token || basename(p) == token);
        }
        (!candidates.is_empty()).then_some(candidates)
    }

    fn looks_like_file(&self, token: &str) -> bool {
        extension(token).is_some_and(|e| self.extensions.contains(&e))
    }

    fn hashes_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a String> + 'a {
        self.hashes
            .range(prefix.to_string()..)
            .take_while(move |h| h.starts_with(prefix))
    }
}

fn extension(name: &str) -> Option<String> {
    let (stem, ext) = name.rsplit_once('.')?;
    let valid = !stem.is_empty()
        && (1..=10).contains(&ext.len())
        && ext.bytes().all(|b| b.is_ascii_alphanumeric())
        && ext.bytes().any(|b| b.is_ascii_alphabetic());
    valid.then(|| ext.to_lowercase())
}

static ISSUE_KEY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[A-Z][A-Z0-9]*-\d+\b").unwrap());
static HASH_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[0-9a-f]{7,40}\b").unwrap());
static FILE_TOKEN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[A-Za-z0-9_][A-Za-z0-9_./\-]*").unwrap());
static STATUS_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:open|resolved|closed|in[ -]progress|reopened)\b").unwrap()
});
static PRIORITY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:blocker|critical|major|minor|trivial)\b").unwrap());
static BUGGY_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:bug[ -]introducing|bug[ -]inducing|fix[ -]inducing|introduced bugs|introduce bugs|buggy)\b")
        .unwrap()
});
static FIXING_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(?:bug[ -]fixing|bug[ -]fixes|bug[ -]fix|fixing)\b").unwrap()
});
static K_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\btop (\d{1,4})\b|\b(\d{1,4}) most\b|\blatest (\d{1,4})\b|\b(\d{1,4}) latest\b")
        .unwrap()
});

enum Proposal {
    Entity(EntityValue),
    AmbiguousHash(String),
}

struct Candidate {
    entity_type: EntityType,
    start: usize,
    end: usize,
    proposal: Proposal,
}

/// Extracts typed entities from `utterance`, ordered by position.
pub fn recognize(
    utterance: &str,
    gazetteer: &Gazetteer,
    clock: NowClock,
) -> Result<Vec<Entity>, NerError> {
    if utterance.trim().is_empty() {
        return Err(NerError::EmptyUtterance);
    }
    let mut candidates = Vec::new();
    let mut push = |entity_type, m: regex::Match<'_>, proposal| {
        candidates.push(Candidate {
            entity_type,
            start: m.start(),
            end: m.end(),
            proposal,
        })
    };
    let mut file_candidates = Vec::new();

    for m in ISSUE_KEY_RE.find_iter(utterance) {
        push(
            EntityType::IssueKey,
            m,
            Proposal::Entity(EntityValue::IssueKey {
                key: m.as_str().to_string(),
            }),
        );
    }

    for m in HASH_RE.find_iter(utterance) {
        let token = m.as_str();
        let mut hits = gazetteer.hashes_with_prefix(token);
        let proposal = match (hits.next(), hits.next()) {
            (Some(h), None) => Proposal::Entity(EntityValue::CommitHash {
                hash: h.clone(),
                resolved: true,
            }),
            (Some(_), Some(_)) => Proposal::AmbiguousHash(token.to_string()),
            (None, _) => {
                let has_digit = token.bytes().any(|b| b.is_ascii_digit());
                let has_letter = token.bytes().any(|b| b.is_ascii_alphabetic());
                if !(has_digit && has_letter) {
                    continue;
                }
                Proposal::Entity(EntityValue::CommitHash {
                    hash: token.to_string(),
                    resolved: false,
                })
            }
        };
        push(EntityType::CommitHash, m, proposal);
    }

    for m in DATE_SPAN_RE.find_iter(utterance) {
        if let Ok(range) = resolve_date(m.as_str(), clock.now) {
            push(
                EntityType::DateRange,
                m,
                Proposal::Entity(EntityValue::DateRange { range }),
            );
        }
    }

    for m in FILE_TOKEN_RE.find_iter(utterance) {
        let token = m.as_str().trim_end_matches(['.', '-', '/']);
        if token.is_empty() {
            continue;
        }
        let paths = match gazetteer.match_file(token) {
            Some(paths) => paths,
            None if gazetteer.looks_like_file(token) => Vec::new(),
            None => continue,
        };
        file_candidates.push(Candidate {
            entity_type: EntityType::File,
            start: m.start(),
            end: m.start() + token.len(),
            proposal: Proposal::Entity(EntityValue::File {
                name: token.to_string(),
                paths,
            }),
        });
    }

    for m in STATUS_RE.find_iter(utterance) {
        let status = m.as_str().to_lowercase().replace('-', " ");
        push(EntityType::Status, m, Proposal::Entity(EntityValue::Status { status }));
    }
    for m in PRIORITY_RE.find_iter(utterance) {
        let priority = m.as_str().to_lowercase();
        push(EntityType::Priority, m, Proposal::Entity(EntityValue::Priority { priority }));
    }
    for (re, commit_kind) in [(&*BUGGY_RE, CommitKind::Buggy), (&*FIXING_RE, CommitKind::Fixing)] {
        for m in re.find_iter(utterance) {
            push(
                EntityType::CommitKind,
                m,
                Proposal::Entity(EntityValue::CommitKind { commit_kind }),
            );
        }
    }
    for caps in K_RE.captures_iter(utterance) {
        let whole = caps.get(0).unwrap();
        let n = (1..=4)
            .find_map(|i| caps.get(i))
            .and_then(|g| g.as_str().parse::<usize>().ok());
        if let Some(k) = n.filter(|k| *k > 0) {
            push(EntityType::K, whole, Proposal::Entity(EntityValue::K { k }));
        }
    }

    candidates.append(&mut file_candidates);
    candidates.sort_by_key(|c| (c.entity_type.precedence(), usize::MAX - (c.end - c.start), c.start));
    let mut taken: Vec<(usize, usize)> = Vec::new();
    let mut accepted = Vec::new();
    for c in candidates {
        if taken.iter().any(|&(s, e)| c.start < e && s < c.end) {
            continue;
        }
        taken.push((c.start, c.end));
        match c.proposal {
            Proposal::AmbiguousHash(prefix) => return Err(NerError::AmbiguousHashPrefix(prefix)),
            Proposal::Entity(value) => accepted.push(Entity {
                entity_type: c.entity_type,
                surface: utterance[c.start..c.end].to_string(),
                span: (
                    utterance[..c.start].chars().count(),
                    utterance[..c.end].chars().count(),
                ),
                value,
                byte_span: (c.start, c.end),
            }),
        }
    }
    accepted.sort_by_key(|e| e.byte_span.0);
    Ok(accepted)
}

/// Replaces every entity span with its placeholder token.
pub fn substitute_placeholders(utterance: &str, entities: &[Entity]) -> String {
    let mut out = String::with_capacity(utterance.len());
    let mut cursor = 0;
    for e in entities {
        let (start, end) = e.byte_span;
        if start < cursor {
            continue;
        }
        out.push_str(&utterance[cursor..start]);
        out.push(' ');
        out.push_str(e.entity_type.placeholder());
        out.push(' ');
        cursor = end;
    }
    out.push_str(&utterance[cursor..]);
    out
}

/// One labeled utterance of the NER evaluation set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NerCase {
    pub utterance: String,
    pub entities: Vec<GoldEntity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntity {
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NerScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub errors: Vec<String>,
}

/// Exact-span scoring: a prediction counts only when type, start and end
/// all equal a gold entity.
pub fn evaluate_ner(cases: &[NerCase], gazetteer: &Gazetteer, clock: NowClock) -> NerScore {
    let mut score = NerScore::default();
    for case in cases {
        let gold: BTreeSet<(EntityType, usize, usize)> = case
            .entities
            .iter()
            .map(|g| (g.entity_type, g.start, g.end))
            .collect();
        let predicted: BTreeSet<(EntityType, usize, usize)> = match recognize(&case.utterance, gazetteer, clock) {
            Ok(entities) => entities.iter().map(|e| (e.entity_type, e.span.0, e.span.1)).collect(),
            Err(err) => {
                score.errors.push(format!("{}: {err}", case.utterance));
                BTreeSet::new()
            }
        };
        let hits = gold.intersection(&predicted).count();
        score.true_positives += hits;
        score.false_positives += predicted.len() - hits;
        score.false_negatives += gold.len() - hits;
        if hits != gold.len() || hits != predicted.len() {
            score.errors.push(format!(
                "{}: expected {:?}, got {:?}",
                case.utterance, gold, predicted
            ));
        }
    }
    let tp = score.true_positives as f64;
    score.precision = ratio(tp, tp + score.false_positives as f64);
    score.recall = ratio(tp, tp + score.false_negatives as f64);
    score.f1 = ratio(2.0 * score.precision * score.recall, score.precision + score.recall);
    score
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}
