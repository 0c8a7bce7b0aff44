//! The single-file knowledge base.
//!
//! The on-disk form is one JSON document keyed by `schema_version`. All
//! tables are ordered maps, so the same logical content always serializes to
//! the same bytes (modulo `ingest_meta.ingested_at`).

use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{basename, Commit, CommitIssueLink, Issue};
use crate::szz::{FixRecord, InducingRecord};

pub const SCHEMA_VERSION: u32 = 1;
pub const MINED_SECTION_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("store is not valid JSON: {0}")]
    Corrupt(String),
    #[error("store schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("commit history contains a cycle through {0}")]
    CyclicHistory(String),
    #[error("link refers to unknown {kind} {value}")]
    DanglingLink { kind: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestMeta {
    /// SHA-256 over the canonical (hash-sorted) commit records.
    pub commit_checksum: String,
    /// SHA-256 over the canonical (key-sorted) issue records.
    pub issue_checksum: String,
    pub ingested_at: DateTime<Utc>,
}

/// SZZ output persisted by `msrbot mine`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinedSection {
    pub version: u32,
    pub filter_report_date: bool,
    pub fixes: Vec<FixRecord>,
    pub inducing: Vec<InducingRecord>,
}

#[derive(Serialize, Deserialize)]
struct StoreFile {
    schema_version: u32,
    ingest_meta: IngestMeta,
    commits: BTreeMap<String, Commit>,
    issues: BTreeMap<String, Issue>,
    links: BTreeSet<CommitIssueLink>,
    file_index: BTreeMap<String, Vec<String>>,
    gazetteer: BTreeSet<String>,
    boundary_parents: BTreeSet<String>,
    #[serde(default)]
    mined: Option<MinedSection>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

/// Immutable, read-only view of commits, issues and their links.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    commits: BTreeMap<String, Commit>,
    issues: BTreeMap<String, Issue>,
    links: BTreeSet<CommitIssueLink>,
    file_index: BTreeMap<String, Vec<String>>,
    gazetteer: BTreeSet<String>,
    boundary_parents: BTreeSet<String>,
    ingest_meta: IngestMeta,
    mined: Option<MinedSection>,
    /// Topological position (parents first, ties by committer time then hash).
    position: HashMap<String, usize>,
    ordered: Vec<String>,
    links_by_issue: BTreeMap<String, Vec<String>>,
}

impl KnowledgeBase {
    /// Assembles a store in memory from validated, linked records.
    pub fn from_parts(
        commits: Vec<Commit>,
        issues: Vec<Issue>,
        links: BTreeSet<CommitIssueLink>,
    ) -> Result<Self, StoreError> {
        Self::from_parts_at(commits, issues, links, Utc::now())
    }

    pub fn from_parts_at(
        commits: Vec<Commit>,
        issues: Vec<Issue>,
        links: BTreeSet<CommitIssueLink>,
        ingested_at: DateTime<Utc>,
    ) -> Result<Self, StoreError> {
        let commits: BTreeMap<String, Commit> =
            commits.into_iter().map(|c| (c.hash.clone(), c)).collect();
        let issues: BTreeMap<String, Issue> =
            issues.into_iter().map(|i| (i.key.clone(), i)).collect();
        for link in &links {
            if !commits.contains_key(&link.commit_hash) {
                return Err(StoreError::DanglingLink {
                    kind: "commit",
                    value: link.commit_hash.clone(),
                });
            }
            if !issues.contains_key(&link.issue_key) {
                return Err(StoreError::DanglingLink {
                    kind: "issue",
                    value: link.issue_key.clone(),
                });
            }
        }
        let ingest_meta = IngestMeta {
            commit_checksum: checksum(commits.values()),
            issue_checksum: checksum(issues.values()),
            ingested_at,
        };
        let ordered = topological_order(&commits)?;
        let boundary_parents = commits
            .values()
            .flat_map(|c| c.parents.iter())
            .filter(|p| !commits.contains_key(*p))
            .cloned()
            .collect();
        let mut file_index: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut gazetteer = BTreeSet::new();
        for hash in &ordered {
            let commit = &commits[hash];
            let mut touched = BTreeSet::new();
            for change in &commit.changes {
                touched.insert(change.path.as_str());
                if let Some(old) = &change.old_path {
                    touched.insert(old.as_str());
                }
            }
            for path in touched {
                file_index.entry(path.to_string()).or_default().push(hash.clone());
                gazetteer.insert(path.to_string());
                gazetteer.insert(basename(path).to_string());
            }
        }
        Ok(Self::assemble(StoreFile {
            schema_version: SCHEMA_VERSION,
            ingest_meta,
            commits,
            issues,
            links,
            file_index,
            gazetteer,
            boundary_parents,
            mined: None,
        }, ordered))
    }

    fn assemble(file: StoreFile, ordered: Vec<String>) -> Self {
        let position = ordered.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        let mut links_by_issue: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for link in &file.links {
            links_by_issue
                .entry(link.issue_key.clone())
                .or_default()
                .push(link.commit_hash.clone());
        }
        KnowledgeBase {
            commits: file.commits,
            issues: file.issues,
            links: file.links,
            file_index: file.file_index,
            gazetteer: file.gazetteer,
            boundary_parents: file.boundary_parents,
            ingest_meta: file.ingest_meta,
            mined: file.mined,
            position,
            ordered,
            links_by_issue,
        }
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref();
        let io_err = |source| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        let bytes = fs::read(path).map_err(io_err)?;
        let probe: VersionProbe =
            serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if probe.schema_version != SCHEMA_VERSION {
            return Err(StoreError::SchemaVersionMismatch {
                found: probe.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let file: StoreFile = serde_json::from_slice(&bytes)
            .map_err(|e| StoreError::Corrupt(e.to_string()))?;
        if let Some(mined) = &file.mined {
            if mined.version != MINED_SECTION_VERSION {
                return Err(StoreError::SchemaVersionMismatch {
                    found: mined.version,
                    expected: MINED_SECTION_VERSION,
                });
            }
        }
        let ordered = topological_order(&file.commits)?;
        Ok(Self::assemble(file, ordered))
    }

    /// Writes the store atomically (temp file, then rename).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let path = path.as_ref();
        let io_err = |source| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = StoreFile {
            schema_version: SCHEMA_VERSION,
            ingest_meta: self.ingest_meta.clone(),
            commits: self.commits.clone(),
            issues: self.issues.clone(),
            links: self.links.clone(),
            file_index: self.file_index.clone(),
            gazetteer: self.gazetteer.clone(),
            boundary_parents: self.boundary_parents.clone(),
            mined: self.mined.clone(),
        };
        let tmp = path.with_extension("tmp");
        {
            let out = fs::File::create(&tmp).map_err(io_err)?;
            let mut writer = BufWriter::new(out);
            serde_json::to_writer(&mut writer, &file)
                .map_err(|e| io_err(std::io::Error::other(e)))?;
            writer.write_all(b"\n").map_err(io_err)?;
            writer.flush().map_err(io_err)?;
        }
        fs::rename(&tmp, path).map_err(io_err)
    }

    /// Returns a copy carrying a freshly mined SZZ section.
    pub fn with_mined(&self, mined: MinedSection) -> Self {
        let mut kb = self.clone();
        kb.mined = Some(mined);
        kb
    }

    pub fn commits(&self) -> impl Iterator<Item = &Commit> {
        self.ordered.iter().map(|h| &self.commits[h])
    }

    pub fn commit(&self, hash: &str) -> Option<&Commit> {
        self.commits.get(hash)
    }

    pub fn commit_count(&self) -> usize {
        self.commits.len()
    }

    pub fn issues(&self) -> impl Iterator<Item = &Issue> {
        self.issues.values()
    }

    pub fn issue(&self, key: &str) -> Option<&Issue> {
        self.issues.get(key)
    }

    pub fn issue_count(&self) -> usize {
        self.issues.len()
    }

    pub fn links(&self) -> &BTreeSet<CommitIssueLink> {
        &self.links
    }

    pub fn commits_linked_to(&self, key: &str) -> &[String] {
        self.links_by_issue.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn file_index(&self) -> &BTreeMap<String, Vec<String>> {
        &self.file_index
    }

    /// Commits touching `path` on either side of a change, oldest first.
    pub fn commits_touching(&self, path: &str) -> &[String] {
        self.file_index.get(path).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn gazetteer(&self) -> &BTreeSet<String> {
        &self.gazetteer
    }

    pub fn boundary_parents(&self) -> &BTreeSet<String> {
        &self.boundary_parents
    }

    pub fn ingest_meta(&self) -> &IngestMeta {
        &self.ingest_meta
    }

    pub fn mined(&self) -> Option<&MinedSection> {
        self.mined.as_ref()
    }

    /// Position in the store's topological order.
    pub fn position(&self, hash: &str) -> Option<usize> {
        self.position.get(hash).copied()
    }

    /// Commits whose hash starts with `prefix` (lowercase hex).
    pub fn commits_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.commits
            .range(prefix.to_string()..)
            .take_while(move |(h, _)| h.starts_with(prefix))
            .map(|(h, _)| h.as_str())
    }

    /// First-parent chain from the root down to and including `hash`.
    pub fn first_parent_chain(&self, hash: &str) -> Vec<String> {
        let mut chain = Vec::new();
        let mut cursor = self.commits.get(hash);
        while let Some(commit) = cursor {
            chain.push(commit.hash.clone());
            cursor = commit.parents.first().and_then(|p| self.commits.get(p));
        }
        chain.reverse();
        chain
    }
}

fn checksum<'a, T: Serialize + 'a>(records: impl Iterator<Item = &'a T>) -> String {
    let mut hasher = Sha256::new();
    for record in records {
        let bytes = serde_json::to_vec(record).expect("records serialize");
        hasher.update(&bytes);
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

/// Kahn's algorithm; among ready commits the earliest committer time goes
/// first, then the smallest hash. Parents outside the store are ignored.
fn topological_order(commits: &BTreeMap<String, Commit>) -> Result<Vec<String>, StoreError> {
    let mut pending: HashMap<&str, usize> = HashMap::new();
    let mut children: HashMap<&str, Vec<&str>> = HashMap::new();
    for commit in commits.values() {
        let inner: BTreeSet<&str> = commit
            .parents
            .iter()
            .filter(|p| commits.contains_key(*p))
            .map(String::as_str)
            .collect();
        pending.insert(&commit.hash, inner.len());
        for parent in inner {
            children.entry(parent).or_default().push(&commit.hash);
        }
    }
    let mut ready: BinaryHeap<Reverse<(DateTime<Utc>, &str)>> = pending
        .iter()
        .filter(|(_, n)| **n == 0)
        .map(|(h, _)| Reverse((commits[*h].committer_time, *h)))
        .collect();
    let mut ordered = Vec::with_capacity(commits.len());
    while let Some(Reverse((_, hash))) = ready.pop() {
        ordered.push(hash.to_string());
        for child in children.get(hash).into_iter().flatten() {
            let n = pending.get_mut(child).unwrap();
            *n -= 1;
            if *n == 0 {
                ready.push(Reverse((commits[*child].committer_time, child)));
            }
        }
    }
    if ordered.len() != commits.len() {
        let stuck = pending
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(h, _)| *h)
            .min()
            .unwrap_or_default();
        return Err(StoreError::CyclicHistory(stuck.to_string()));
    }
    Ok(ordered)
}

/// Builds the store from validated inputs and writes it to `out_path`.
pub fn build_store(
    commits: Vec<Commit>,
    issues: Vec<Issue>,
    links: BTreeSet<CommitIssueLink>,
    out_path: impl AsRef<Path>,
) -> Result<KnowledgeBase, StoreError> {
    let kb = KnowledgeBase::from_parts(commits, issues, links)?;
    kb.write(out_path)?;
    Ok(kb)
}
