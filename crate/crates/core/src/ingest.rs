//! Parsing and validation of the commit (NDJSON) and issue (JSON array)
//! exports, and commit-to-issue linking by message mention.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::BufRead;
use std::sync::LazyLock;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use regex::Regex;
use serde::Deserialize;

use crate::model::{
    canonical_label, ChangeType, Commit, CommitIssueLink, FileChange, Hunk, Issue, IssueType,
    LinkSource,
};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate commit hash {0}")]
    DuplicateHash(String),
    #[error("duplicate issue key {0}")]
    DuplicateKey(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) static ISSUE_KEY_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Z][A-Z0-9]*-[0-9]+$").unwrap());

static ISSUE_MENTION_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b[A-Z][A-Z0-9]*-[0-9]+\b").unwrap());

#[derive(Deserialize)]
struct RawCommit {
    hash: String,
    #[serde(default)]
    parents: Vec<String>,
    author_name: String,
    #[serde(default)]
    author_email: String,
    author_time: String,
    committer_time: String,
    #[serde(default)]
    message: String,
    #[serde(default)]
    changes: Vec<RawChange>,
}

#[derive(Deserialize)]
struct RawChange {
    path: String,
    #[serde(default)]
    old_path: Option<String>,
    change_type: String,
    #[serde(default)]
    hunks: Vec<Hunk>,
}

#[derive(Deserialize)]
struct RawIssue {
    key: String,
    #[serde(rename = "type", default)]
    issue_type: Option<String>,
    #[serde(default)]
    status: Option<String>,
    #[serde(default)]
    priority: Option<String>,
    #[serde(default)]
    resolution: Option<String>,
    #[serde(default)]
    assignee: Option<String>,
    #[serde(default)]
    watchers: Option<i64>,
    created: String,
    #[serde(default)]
    resolved: Option<String>,
    #[serde(default)]
    summary: Option<String>,
}

/// Parses an NDJSON commit export. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn parse_commit_export<R: BufRead>(stream: R) -> Result<Vec<Commit>, IngestError> {
    let mut commits = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in stream.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| IngestError::MalformedRecord {
            line: line_no,
            reason,
        };
        let raw: RawCommit = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let commit = validate_commit(raw).map_err(malformed)?;
        if !seen.insert(commit.hash.clone()) {
            return Err(IngestError::DuplicateHash(commit.hash));
        }
        commits.push(commit);
    }
    Ok(commits)
}

fn validate_commit(raw: RawCommit) -> Result<Commit, String> {
    let hash = normalize_hash(&raw.hash)?;
    let parents = raw
        .parents
        .iter()
        .map(|p| normalize_hash(p))
        .collect::<Result<Vec<_>, _>>()?;
    let changes = raw
        .changes
        .into_iter()
        .map(validate_change)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Commit {
        hash,
        parents,
        author_name: raw.author_name,
        author_email: raw.author_email,
        author_time: parse_timestamp(&raw.author_time)?,
        committer_time: parse_timestamp(&raw.committer_time)?,
        message: raw.message,
        changes,
    })
}

fn normalize_hash(raw: &str) -> Result<String, String> {
    let hash = raw.trim().to_ascii_lowercase();
    if hash.len() != 40 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(format!("invalid commit hash {raw:?}"));
    }
    Ok(hash)
}

fn normalize_path(raw: &str) -> Result<String, String> {
    let path = raw.trim().replace('\\', "/");
    let path = path.trim_start_matches("./").to_string();
    if path.is_empty() {
        return Err("empty path".into());
    }
    Ok(path)
}

fn validate_change(raw: RawChange) -> Result<FileChange, String> {
    let change_type = match raw.change_type.trim() {
        "A" => ChangeType::Added,
        "M" => ChangeType::Modified,
        "D" => ChangeType::Deleted,
        // git emits R plus a similarity score, e.g. R087
        r if r.starts_with('R') && r[1..].bytes().all(|b| b.is_ascii_digit()) => {
            ChangeType::Renamed
        }
        other => return Err(format!("unknown change_type {other:?}")),
    };
    let path = normalize_path(&raw.path)?;
    let old_path = raw.old_path.as_deref().map(normalize_path).transpose()?;
    match (change_type, &old_path) {
        (ChangeType::Renamed, None) => return Err(format!("rename of {path} lacks old_path")),
        (ChangeType::Renamed, Some(_)) | (_, None) => {}
        (_, Some(_)) => return Err(format!("old_path given for non-rename change of {path}")),
    }

    let mut hunks = raw.hunks;
    hunks.sort_by_key(|h| (h.old_start, h.old_count));
    for h in &hunks {
        if h.old_count > 0 && h.old_start == 0 {
            return Err(format!("hunk in {path} removes lines starting at line 0"));
        }
        if h.new_count > 0 && h.new_start == 0 {
            return Err(format!("hunk in {path} adds lines starting at line 0"));
        }
        if change_type == ChangeType::Added && h.old_count != 0 {
            return Err(format!("added file {path} has a hunk with old lines"));
        }
        if change_type == ChangeType::Deleted && h.new_count != 0 {
            return Err(format!("deleted file {path} has a hunk with new lines"));
        }
    }
    for pair in hunks.windows(2) {
        let end = pair[0].old_start + pair[0].old_count.max(1);
        if pair[1].old_start < end {
            return Err(format!("overlapping hunks in {path}"));
        }
    }
    Ok(FileChange {
        path,
        old_path,
        change_type,
        hunks,
    })
}

/// Accepts RFC 3339, `git log --date=iso` style (`2020-01-05 10:00:00 +0100`),
/// compact offsets (`+0000`) and bare dates (midnight UTC).
pub fn parse_timestamp(raw: &str) -> Result<DateTime<Utc>, String> {
    let s = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f%z", "%Y-%m-%d %H:%M:%S %z", "%Y-%m-%d %H:%M:%S%.f%z"] {
        if let Ok(t) = DateTime::parse_from_str(s, fmt) {
            return Ok(t.with_timezone(&Utc));
        }
    }
    if let Ok(t) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f") {
        return Ok(t.and_utc());
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc());
    }
    Err(format!("unparseable timestamp {raw:?}"))
}

/// Parses the issue export (a JSON array). The `line` of a malformed-record
/// error is the 1-based position of the record in the array, or the JSON
/// parser's line for syntax errors.
pub fn parse_issue_export<R: BufRead>(stream: R) -> Result<Vec<Issue>, IngestError> {
    let raws: Vec<serde_json::Value> =
        serde_json::from_reader(stream).map_err(|e| IngestError::MalformedRecord {
            line: e.line(),
            reason: e.to_string(),
        })?;
    let mut issues = Vec::with_capacity(raws.len());
    let mut seen = HashSet::new();
    for (idx, value) in raws.into_iter().enumerate() {
        let malformed = |reason: String| IngestError::MalformedRecord {
            line: idx + 1,
            reason,
        };
        let raw: RawIssue = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let issue = validate_issue(raw).map_err(malformed)?;
        if !seen.insert(issue.key.clone()) {
            return Err(IngestError::DuplicateKey(issue.key));
        }
        issues.push(issue);
    }
    Ok(issues)
}

fn validate_issue(raw: RawIssue) -> Result<Issue, String> {
    let key = raw.key.trim().to_string();
    if !ISSUE_KEY_RE.is_match(&key) {
        return Err(format!("invalid issue key {:?}", raw.key));
    }
    let watcher_count = match raw.watchers {
        None => 0,
        Some(n) => u32::try_from(n).map_err(|_| format!("invalid watcher count {n} on {key}"))?,
    };
    let status = canonical_label(raw.status.as_deref().unwrap_or(""));
    let resolved = raw
        .resolved
        .as_deref()
        .filter(|s| !s.trim().is_empty())
        .map(parse_timestamp)
        .transpose()?;
    if resolved.is_some() && !matches!(status.as_str(), "resolved" | "closed") {
        return Err(format!("{key} has a resolved time but status {status:?}"));
    }
    let non_empty = |s: Option<String>| s.map(|v| v.trim().to_string()).filter(|v| !v.is_empty());
    Ok(Issue {
        issue_type: IssueType::from_export(raw.issue_type.as_deref().unwrap_or("")),
        status,
        priority: canonical_label(raw.priority.as_deref().unwrap_or("")),
        resolution: non_empty(raw.resolution).map(|r| canonical_label(&r)),
        assignee: non_empty(raw.assignee),
        watcher_count,
        created: parse_timestamp(&raw.created)?,
        resolved,
        summary: raw.summary.unwrap_or_default(),
        key,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkReport {
    pub links: BTreeSet<CommitIssueLink>,
    /// Distinct (commit, key) mentions whose key is not in the issue table.
    pub ignored_mentions: usize,
}

pub fn link_commits_to_issues(commits: &[Commit], issues: &[Issue]) -> LinkReport {
    let known: BTreeMap<&str, ()> = issues.iter().map(|i| (i.key.as_str(), ())).collect();
    let mut report = LinkReport::default();
    for commit in commits {
        let mentioned: BTreeSet<&str> = ISSUE_MENTION_RE
            .find_iter(&commit.message)
            .map(|m| m.as_str())
            .collect();
        for key in mentioned {
            if known.contains_key(key) {
                report.links.insert(CommitIssueLink {
                    commit_hash: commit.hash.clone(),
                    issue_key: key.to_string(),
                    source: LinkSource::MessageMention,
                });
            } else {
                report.ignored_mentions += 1;
            }
        }
    }
    report
}
