//! The fifteen supported repository questions, each a pure function of the
//! knowledge base, its mined SZZ records and the question's parameters.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dates::DateRange;
use crate::model::{basename, canonical_label, ChangeType, Commit};
use crate::store::{KnowledgeBase, MinedSection};
use crate::szz::{self, SzzError};

pub const DEFAULT_TOP_K: usize = 5;
pub const DEFAULT_LATEST_K: usize = 3;
pub const UNASSIGNED: &str = "(unassigned)";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("unknown file {0}")]
    UnknownFile(String),
    #[error("unknown issue {0}")]
    UnknownIssue(String),
    #[error("unknown commit {0}")]
    UnknownCommit(String),
    #[error("commit prefix {0} matches more than one commit")]
    AmbiguousCommit(String),
    #[error("k must be a positive integer")]
    InvalidK,
    #[error(transparent)]
    Szz(#[from] SzzError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Q1,
    Q2,
    Q3,
    Q4,
    Q5,
    Q6,
    Q7,
    Q8,
    Q9,
    Q10,
    Q11,
    Q12,
    Q13,
    Q14,
    Q15,
}

impl QueryKind {
    pub const ALL: [QueryKind; 15] = [
        QueryKind::Q1,
        QueryKind::Q2,
        QueryKind::Q3,
        QueryKind::Q4,
        QueryKind::Q5,
        QueryKind::Q6,
        QueryKind::Q7,
        QueryKind::Q8,
        QueryKind::Q9,
        QueryKind::Q10,
        QueryKind::Q11,
        QueryKind::Q12,
        QueryKind::Q13,
        QueryKind::Q14,
        QueryKind::Q15,
    ];

    pub fn id(self) -> &'static str {
        match self {
            QueryKind::Q1 => "Q1",
            QueryKind::Q2 => "Q2",
            QueryKind::Q3 => "Q3",
            QueryKind::Q4 => "Q4",
            QueryKind::Q5 => "Q5",
            QueryKind::Q6 => "Q6",
            QueryKind::Q7 => "Q7",
            QueryKind::Q8 => "Q8",
            QueryKind::Q9 => "Q9",
            QueryKind::Q10 => "Q10",
            QueryKind::Q11 => "Q11",
            QueryKind::Q12 => "Q12",
            QueryKind::Q13 => "Q13",
            QueryKind::Q14 => "Q14",
            QueryKind::Q15 => "Q15",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id().eq_ignore_ascii_case(id))
    }
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CommitKind {
    Buggy,
    Fixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IssueFacet {
    Status,
    Priority,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSummary {
    pub hash: String,
    pub author_name: String,
    pub date: NaiveDate,
    pub message: String,
}

impl CommitSummary {
    fn of(commit: &Commit) -> Self {
        CommitSummary {
            hash: commit.hash.clone(),
            author_name: commit.author_name.clone(),
            date: commit.committer_time.date_naive(),
            message: commit.first_line().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueSummary {
    pub key: String,
    pub status: String,
    pub priority: String,
    pub watchers: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "row", rename_all = "snake_case")]
pub enum Row {
    Commit(CommitSummary),
    Issue(IssueSummary),
    Count { count: u64 },
    Percentage { percent: f64, numerator: u64, denominator: u64 },
    EmptyDenominator,
    Ranked { name: String, count: u64 },
    Name { name: String },
    FileAuthor { path: String, author_name: String, hash: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub kind: QueryKind,
    pub rows: Vec<Row>,
    pub truncated: bool,
    /// Store paths a file argument resolved to; empty for other questions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matched_paths: Vec<String>,
}

impl QueryResult {
    fn new(kind: QueryKind, rows: Vec<Row>) -> Self {
        QueryResult {
            kind,
            rows,
            truncated: false,
            matched_paths: Vec::new(),
        }
    }

    fn for_paths(mut self, paths: &[String]) -> Self {
        self.matched_paths = paths.to_vec();
        self
    }

    pub fn commit_rows(&self) -> impl Iterator<Item = &CommitSummary> {
        self.rows.iter().filter_map(|r| match r {
            Row::Commit(c) => Some(c),
            _ => None,
        })
    }
}

/// Answers questions over one store. Cheap to clone.
#[derive(Debug, Clone)]
pub struct QueryEngine {
    kb: Arc<KnowledgeBase>,
    mined: Arc<MinedSection>,
}

impl QueryEngine {
    /// Uses the store's mined section, or mines with the report-date filter
    /// on when the store has none.
    pub fn new(kb: Arc<KnowledgeBase>) -> Result<Self, SzzError> {
        let mined = match kb.mined() {
            Some(m) => m.clone(),
            None => szz::mine(&kb, true)?,
        };
        Ok(Self::with_mined(kb, mined))
    }

    pub fn with_mined(kb: Arc<KnowledgeBase>, mined: MinedSection) -> Self {
        QueryEngine {
            kb,
            mined: Arc::new(mined),
        }
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn mined(&self) -> &MinedSection {
        &self.mined
    }

    /// Full path first (exact, then case-insensitive), else every path whose
    /// basename matches case-insensitively.
    pub fn resolve_file(&self, name: &str) -> Result<Vec<String>, QueryError> {
        let name = name.trim().trim_start_matches("./");
        let index = self.kb.file_index();
        if index.contains_key(name) {
            return Ok(vec![name.to_string()]);
        }
        let lowered = name.to_lowercase();
        let by_path: Vec<String> = index
            .keys()
            .filter(|p| p.to_lowercase() == lowered)
            .cloned()
            .collect();
        if !by_path.is_empty() {
            return Ok(by_path);
        }
        let by_base: Vec<String> = index
            .keys()
            .filter(|p| basename(p).to_lowercase() == lowered)
            .cloned()
            .collect();
        if by_base.is_empty() {
            return Err(QueryError::UnknownFile(name.to_string()));
        }
        Ok(by_base)
    }

    /// Full hash or unique prefix of at least 7 characters.
    pub fn resolve_commit(&self, hash: &str) -> Result<String, QueryError> {
        let prefix = hash.trim().to_ascii_lowercase();
        if prefix.len() < 7 || !prefix.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(QueryError::UnknownCommit(hash.to_string()));
        }
        let mut matches = self.kb.commits_with_prefix(&prefix);
        match (matches.next(), matches.next()) {
            (Some(h), None) => Ok(h.to_string()),
            (None, _) => Err(QueryError::UnknownCommit(hash.to_string())),
            (Some(_), Some(_)) => Err(QueryError::AmbiguousCommit(hash.to_string())),
        }
    }

    fn commit(&self, hash: &str) -> &Commit {
        self.kb.commit(hash).expect("mined records refer to stored commits")
    }

    fn chronological(&self, hashes: impl IntoIterator<Item = String>) -> Vec<&Commit> {
        let unique: BTreeSet<String> = hashes.into_iter().collect();
        let mut commits: Vec<&Commit> = unique.iter().map(|h| self.commit(h)).collect();
        commits.sort_by_key(|c| (c.committer_time, self.kb.position(&c.hash)));
        commits
    }

    fn commit_rows<'a>(commits: impl IntoIterator<Item = &'a Commit>) -> Vec<Row> {
        commits.into_iter().map(|c| Row::Commit(CommitSummary::of(c))).collect()
    }

    /// Commits touching any of `paths`, following renames back to earlier
    /// names. Also returns every (path, last position) on the lineage.
    fn history(&self, paths: &[String]) -> (BTreeSet<String>, Vec<(String, usize)>) {
        let mut commits = BTreeSet::new();
        let mut lineage = Vec::new();
        let mut visited = HashSet::new();
        let mut work: Vec<(String, usize)> = paths.iter().map(|p| (p.clone(), usize::MAX)).collect();
        while let Some((path, bound)) = work.pop() {
            if !visited.insert((path.clone(), bound)) {
                continue;
            }
            lineage.push((path.clone(), bound));
            for hash in self.kb.commits_touching(&path) {
                let pos = self.kb.position(hash).unwrap_or(usize::MAX);
                if pos > bound {
                    continue;
                }
                commits.insert(hash.clone());
                for change in &self.commit(hash).changes {
                    if change.change_type == ChangeType::Renamed && change.path == path && pos > 0 {
                        if let Some(old) = &change.old_path {
                            work.push((old.clone(), pos - 1));
                        }
                    }
                }
            }
        }
        (commits, lineage)
    }

    fn in_range<'a>(&'a self, range: &'a DateRange) -> impl Iterator<Item = &'a Commit> + 'a {
        self.kb.commits().filter(move |c| range.contains(&c.committer_time))
    }

    fn fix_commits_in(&self, range: &DateRange) -> BTreeSet<String> {
        self.mined
            .fixes
            .iter()
            .filter(|f| range.contains(&self.commit(&f.fix_commit).committer_time))
            .map(|f| f.fix_commit.clone())
            .collect()
    }

    pub fn q1_fixing_commits(&self, issue_key: &str) -> Result<QueryResult, QueryError> {
        let key = issue_key.trim();
        if self.kb.issue(key).is_none() {
            return Err(QueryError::UnknownIssue(key.to_string()));
        }
        let fixes = self
            .mined
            .fixes
            .iter()
            .filter(|f| f.issue_key == key)
            .map(|f| f.fix_commit.clone());
        Ok(QueryResult::new(QueryKind::Q1, Self::commit_rows(self.chronological(fixes))))
    }

    pub fn q2_top_bug_fixers(&self, file: &str) -> Result<QueryResult, QueryError> {
        let paths = self.resolve_file(file)?;
        let mut per_author: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for fix in &self.mined.fixes {
            if fix.touched_files.iter().any(|t| paths.contains(t)) {
                let author = self.commit(&fix.fix_commit).author_name.as_str();
                per_author.entry(author).or_default().insert(&fix.issue_key);
            }
        }
        let max = per_author.values().map(BTreeSet::len).max().unwrap_or(0);
        let rows = per_author
            .into_iter()
            .filter(|(_, keys)| keys.len() == max)
            .map(|(name, keys)| Row::Ranked {
                name: name.to_string(),
                count: keys.len() as u64,
            })
            .collect();
        Ok(QueryResult::new(QueryKind::Q2, rows).for_paths(&paths))
    }

    pub fn q3_most_bug_introducing_files(&self, k: usize) -> Result<QueryResult, QueryError> {
        if k == 0 {
            return Err(QueryError::InvalidK);
        }
        let mut per_path: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for record in &self.mined.inducing {
            for evidence in &record.evidence_files {
                per_path.entry(&evidence.path).or_default().insert(&record.inducing_commit);
            }
        }
        let mut ranked: Vec<(&str, u64)> =
            per_path.into_iter().map(|(p, c)| (p, c.len() as u64)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let truncated = ranked.len() > k;
        ranked.truncate(k);
        let mut result = QueryResult::new(
            QueryKind::Q3,
            ranked
                .into_iter()
                .map(|(name, count)| Row::Ranked {
                    name: name.to_string(),
                    count,
                })
                .collect(),
        );
        result.truncated = truncated;
        Ok(result)
    }

    pub fn q4_modifiers_of_file(&self, file: &str) -> Result<QueryResult, QueryError> {
        let paths = self.resolve_file(file)?;
        let mut touching: Vec<&str> = paths
            .iter()
            .flat_map(|p| self.kb.commits_touching(p))
            .map(String::as_str)
            .collect();
        touching.sort_by_key(|h| self.kb.position(h));
        touching.dedup();
        let mut seen = HashSet::new();
        let rows = touching
            .into_iter()
            .map(|h| &self.commit(h).author_name)
            .filter(|name| seen.insert(name.as_str()))
            .map(|name| Row::Name { name: name.clone() })
            .collect();
        Ok(QueryResult::new(QueryKind::Q4, rows).for_paths(&paths))
    }

    pub fn q5_bugs_introduced_by_commit(&self, hash: &str) -> Result<QueryResult, QueryError> {
        let hash = self.resolve_commit(hash)?;
        let keys: BTreeSet<&str> = self
            .mined
            .inducing
            .iter()
            .filter(|r| r.inducing_commit == hash)
            .map(|r| r.issue_key.as_str())
            .collect();
        let mut issues: Vec<_> = keys.into_iter().filter_map(|k| self.kb.issue(k)).collect();
        issues.sort_by(|a, b| a.created.cmp(&b.created).then(a.key.cmp(&b.key)));
        let rows = issues
            .into_iter()
            .map(|i| {
                Row::Issue(IssueSummary {
                    key: i.key.clone(),
                    status: i.status.clone(),
                    priority: i.priority.clone(),
                    watchers: i.watcher_count,
                })
            })
            .collect();
        Ok(QueryResult::new(QueryKind::Q5, rows))
    }

    pub fn q6_commit_count(&self, range: &DateRange) -> QueryResult {
        let count = self.in_range(range).count() as u64;
        QueryResult::new(QueryKind::Q6, vec![Row::Count { count }])
    }

    pub fn q7_commits_in_range(&self, range: &DateRange) -> QueryResult {
        let hashes = self.in_range(range).map(|c| c.hash.clone());
        QueryResult::new(QueryKind::Q7, Self::commit_rows(self.chronological(hashes)))
    }

    pub fn q8_latest_commits_to_file(&self, file: &str, k: usize) -> Result<QueryResult, QueryError> {
        if k == 0 {
            return Err(QueryError::InvalidK);
        }
        let paths = self.resolve_file(file)?;
        let (history, _) = self.history(&paths);
        let mut commits = self.chronological(history);
        commits.reverse();
        let truncated = commits.len() > k;
        commits.truncate(k);
        let mut result = QueryResult::new(QueryKind::Q8, Self::commit_rows(commits)).for_paths(&paths);
        result.truncated = truncated;
        Ok(result)
    }

    pub fn q9_commits_for_file(&self, file: &str) -> Result<QueryResult, QueryError> {
        let paths = self.resolve_file(file)?;
        let (history, _) = self.history(&paths);
        Ok(QueryResult::new(QueryKind::Q9, Self::commit_rows(self.chronological(history))).for_paths(&paths))
    }

    pub fn q10_most_common_bugs(&self, k: usize) -> Result<QueryResult, QueryError> {
        if k == 0 {
            return Err(QueryError::InvalidK);
        }
        let mut bugs: Vec<_> = self.kb.issues().filter(|i| i.is_bug()).collect();
        bugs.sort_by(|a, b| {
            b.watcher_count
                .cmp(&a.watcher_count)
                .then(a.created.cmp(&b.created))
                .then(a.key.cmp(&b.key))
        });
        let truncated = bugs.len() > k;
        bugs.truncate(k);
        let rows = bugs
            .into_iter()
            .map(|i| {
                Row::Issue(IssueSummary {
                    key: i.key.clone(),
                    status: i.status.clone(),
                    priority: i.priority.clone(),
                    watchers: i.watcher_count,
                })
            })
            .collect();
        let mut result = QueryResult::new(QueryKind::Q10, rows);
        result.truncated = truncated;
        Ok(result)
    }

    pub fn q11_buggy_or_fixing_commits(&self, range: &DateRange, kind: CommitKind) -> QueryResult {
        let hashes: BTreeSet<String> = match kind {
            CommitKind::Fixing => self.fix_commits_in(range),
            CommitKind::Buggy => self
                .mined
                .inducing
                .iter()
                .filter(|r| range.contains(&self.commit(&r.inducing_commit).committer_time))
                .map(|r| r.inducing_commit.clone())
                .collect(),
        };
        QueryResult::new(QueryKind::Q11, Self::commit_rows(self.chronological(hashes)))
    }

    pub fn q12_issue_count(&self, facet: IssueFacet, value: &str) -> QueryResult {
        let value = canonical_label(value);
        let count = self
            .kb
            .issues()
            .filter(|i| i.is_bug())
            .filter(|i| match facet {
                IssueFacet::Status => i.status == value,
                IssueFacet::Priority => i.priority == value,
            })
            .count() as u64;
        QueryResult::new(QueryKind::Q12, vec![Row::Count { count }])
    }

    pub fn q13_author_of_file(&self, file: &str) -> Result<QueryResult, QueryError> {
        let paths = self.resolve_file(file)?;
        let mut rows = Vec::new();
        for path in &paths {
            let (_, lineage) = self.history(std::slice::from_ref(path));
            let creator = lineage
                .iter()
                .flat_map(|(p, bound)| {
                    self.kb.commits_touching(p).iter().filter_map(move |h| {
                        let pos = self.kb.position(h)?;
                        let commit = self.commit(h);
                        let added = commit
                            .changes
                            .iter()
                            .any(|c| c.change_type == ChangeType::Added && c.path == *p);
                        (pos <= *bound && added).then_some((pos, commit))
                    })
                })
                .min_by_key(|(pos, _)| *pos);
            if let Some((_, commit)) = creator {
                rows.push(Row::FileAuthor {
                    path: path.clone(),
                    author_name: commit.author_name.clone(),
                    hash: commit.hash.clone(),
                });
            }
        }
        Ok(QueryResult::new(QueryKind::Q13, rows).for_paths(&paths))
    }

    pub fn q14_most_unfixed_bugs(&self, k: usize) -> Result<QueryResult, QueryError> {
        if k == 0 {
            return Err(QueryError::InvalidK);
        }
        let mut per_assignee: BTreeMap<&str, u64> = BTreeMap::new();
        for issue in self.kb.issues().filter(|i| i.is_bug() && i.is_unfixed()) {
            *per_assignee.entry(issue.assignee.as_deref().unwrap_or(UNASSIGNED)).or_default() += 1;
        }
        let max = per_assignee.values().copied().max().unwrap_or(0);
        let mut leaders: Vec<(&str, u64)> =
            per_assignee.into_iter().filter(|(_, n)| *n == max).collect();
        let truncated = leaders.len() > k;
        leaders.truncate(k);
        let mut result = QueryResult::new(
            QueryKind::Q14,
            leaders
                .into_iter()
                .map(|(name, count)| Row::Ranked {
                    name: name.to_string(),
                    count,
                })
                .collect(),
        );
        result.truncated = truncated;
        Ok(result)
    }

    pub fn q15_fix_inducing_percentage(&self, range: &DateRange) -> QueryResult {
        let fixes = self.fix_commits_in(range);
        let inducing: HashSet<&str> =
            self.mined.inducing.iter().map(|r| r.inducing_commit.as_str()).collect();
        let denominator = fixes.len() as u64;
        let row = if denominator == 0 {
            Row::EmptyDenominator
        } else {
            let numerator = fixes.iter().filter(|h| inducing.contains(h.as_str())).count() as u64;
            let percent = (1000.0 * numerator as f64 / denominator as f64).round() / 10.0;
            Row::Percentage {
                percent,
                numerator,
                denominator,
            }
        };
        QueryResult::new(QueryKind::Q15, vec![row])
    }
}
