//! Commit and issue records as they appear in the exports and in the store.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// One version-control change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Commit {
    pub hash: String,
    pub parents: Vec<String>,
    pub author_name: String,
    pub author_email: String,
    pub author_time: DateTime<Utc>,
    pub committer_time: DateTime<Utc>,
    pub message: String,
    pub changes: Vec<FileChange>,
}

impl Commit {
    pub fn first_line(&self) -> &str {
        self.message.lines().next().unwrap_or("").trim_end()
    }

    /// True when `path` is either side of one of this commit's changes.
    pub fn touches(&self, path: &str) -> bool {
        self.changes
            .iter()
            .any(|c| c.path == path || c.old_path.as_deref() == Some(path))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub old_path: Option<String>,
    pub change_type: ChangeType,
    pub hunks: Vec<Hunk>,
}

impl FileChange {
    /// Path the change reads from in the parent revision.
    pub fn source_path(&self) -> &str {
        self.old_path.as_deref().unwrap_or(&self.path)
    }

    pub fn deletes_lines(&self) -> bool {
        self.hunks.iter().any(|h| h.old_count > 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChangeType {
    #[serde(rename = "A")]
    Added,
    #[serde(rename = "M")]
    Modified,
    #[serde(rename = "D")]
    Deleted,
    #[serde(rename = "R")]
    Renamed,
}

/// A unified-diff hunk header. A zero count means the start line is the
/// line *after which* the empty range sits, as in `git diff` output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub old_start: u32,
    pub old_count: u32,
    pub new_start: u32,
    pub new_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueType {
    Bug,
    Improvement,
    Task,
    Other,
}

impl IssueType {
    pub fn from_export(raw: &str) -> Self {
        match raw.trim().to_ascii_lowercase().as_str() {
            "bug" => IssueType::Bug,
            "improvement" => IssueType::Improvement,
            "task" => IssueType::Task,
            _ => IssueType::Other,
        }
    }
}

/// One issue-tracker ticket. Serialized with the export's field names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub key: String,
    #[serde(rename = "type")]
    pub issue_type: IssueType,
    pub status: String,
    pub priority: String,
    pub resolution: Option<String>,
    pub assignee: Option<String>,
    #[serde(rename = "watchers")]
    pub watcher_count: u32,
    pub created: DateTime<Utc>,
    pub resolved: Option<DateTime<Utc>>,
    pub summary: String,
}

impl Issue {
    pub fn is_bug(&self) -> bool {
        self.issue_type == IssueType::Bug
    }

    pub fn is_fixed_bug(&self) -> bool {
        self.is_bug() && self.resolution.as_deref() == Some("fixed")
    }

    pub fn is_unfixed(&self) -> bool {
        !matches!(self.status.as_str(), "resolved" | "closed")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkSource {
    MessageMention,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CommitIssueLink {
    pub commit_hash: String,
    pub issue_key: String,
    pub source: LinkSource,
}

/// Lowercased, trimmed, inner whitespace collapsed.
pub fn canonical_label(raw: &str) -> String {
    raw.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

pub fn basename(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}
