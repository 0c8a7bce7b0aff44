//! Converts `git log` output into commit records.
//!
//! Expected invocation (see [`GIT_LOG_ARGS`]): records separated by `\x1e`,
//! header fields by `\x1f`, followed by a zero-context unified diff taken
//! against the first parent.

use crate::ingest::parse_timestamp;
use crate::model::{ChangeType, Commit, FileChange, Hunk};

/// Arguments for `git log` that produce the format this module reads.
pub const GIT_LOG_ARGS: &[&str] = &[
    "-c",
    "core.quotePath=false",
    "log",
    "--reverse",
    "--topo-order",
    "--no-color",
    "--no-ext-diff",
    "-M",
    "--unified=0",
    "--diff-merges=first-parent",
    "--pretty=format:%x1e%H%x1f%P%x1f%an%x1f%ae%x1f%aI%x1f%cI%x1f%B%x1f",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("git log record {record}: {reason}")]
pub struct GitLogError {
    pub record: usize,
    pub reason: String,
}

pub fn parse_git_log(text: &str) -> Result<Vec<Commit>, GitLogError> {
    text.split('\x1e')
        .filter(|r| !r.trim().is_empty())
        .enumerate()
        .map(|(i, record)| {
            parse_record(record).map_err(|reason| GitLogError {
                record: i + 1,
                reason,
            })
        })
        .collect()
}

fn parse_record(record: &str) -> Result<Commit, String> {
    let fields: Vec<&str> = record.splitn(8, '\x1f').collect();
    let [hash, parents, author_name, author_email, author_time, committer_time, message, diff] =
        fields.as_slice()
    else {
        return Err(format!("expected 8 fields, found {}", fields.len()));
    };
    Ok(Commit {
        hash: hash.trim().to_lowercase(),
        parents: parents.split_whitespace().map(str::to_lowercase).collect(),
        author_name: author_name.to_string(),
        author_email: author_email.to_string(),
        author_time: parse_timestamp(author_time)?,
        committer_time: parse_timestamp(committer_time)?,
        message: message.trim_end().to_string(),
        changes: parse_diff(diff)?,
    })
}

#[derive(Default)]
struct Block {
    header_path: Option<String>,
    old: Option<String>,
    new: Option<String>,
    rename_from: Option<String>,
    rename_to: Option<String>,
    added: bool,
    deleted: bool,
    hunks: Vec<Hunk>,
}

impl Block {
    fn finish(self) -> Result<FileChange, String> {
        let (change_type, path, old_path) = if let (Some(from), Some(to)) = (&self.rename_from, &self.rename_to) {
            (ChangeType::Renamed, to.clone(), Some(from.clone()))
        } else if self.added {
            (ChangeType::Added, self.new.or(self.header_path).ok_or("added file without a path")?, None)
        } else if self.deleted {
            (ChangeType::Deleted, self.old.or(self.header_path).ok_or("deleted file without a path")?, None)
        } else {
            let path = self.new.or(self.old).or(self.header_path).ok_or("diff block without a path")?;
            (ChangeType::Modified, path, None)
        };
        Ok(FileChange {
            path,
            old_path,
            change_type,
            hunks: self.hunks,
        })
    }
}

/// `a/P b/P` with identical sides; used only when no other line names the file.
fn header_path(rest: &str) -> Option<String> {
    let len = rest.len().checked_sub(5)? / 2;
    let (a, b) = (rest.get(2..2 + len)?, rest.get(len + 5..)?);
    (rest.starts_with("a/") && a == b).then(|| a.to_string())
}

fn side(line: &str, prefix: &str) -> Option<String> {
    let p = line.split('\t').next().unwrap_or(line);
    if p == "/dev/null" {
        None
    } else {
        Some(p.strip_prefix(prefix).unwrap_or(p).to_string())
    }
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (start, count) = match s.split_once(',') {
        Some((a, b)) => (a, b),
        None => (s, "1"),
    };
    let parse = |x: &str| x.parse::<u32>().map_err(|e| format!("hunk range {s:?}: {e}"));
    Ok((parse(start)?, parse(count)?))
}

fn parse_hunk(line: &str) -> Result<Hunk, String> {
    let mut parts = line.split_whitespace().skip(1);
    let old = parts.next().and_then(|p| p.strip_prefix('-'));
    let new = parts.next().and_then(|p| p.strip_prefix('+'));
    let (Some(old), Some(new)) = (old, new) else {
        return Err(format!("bad hunk header {line:?}"));
    };
    let (old_start, old_count) = parse_range(old)?;
    let (new_start, new_count) = parse_range(new)?;
    Ok(Hunk {
        old_start,
        old_count,
        new_start,
        new_count,
    })
}

fn parse_diff(diff: &str) -> Result<Vec<FileChange>, String> {
    let mut changes = Vec::new();
    let mut block: Option<Block> = None;
    for line in diff.lines() {
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(b) = block.take() {
                changes.push(b.finish()?);
            }
            block = Some(Block {
                header_path: header_path(rest),
                ..Block::default()
            });
            continue;
        }
        let Some(b) = block.as_mut() else { continue };
        if line.starts_with("new file mode") {
            b.added = true;
        } else if line.starts_with("deleted file mode") {
            b.deleted = true;
        } else if let Some(p) = line.strip_prefix("rename from ") {
            b.rename_from = Some(p.to_string());
        } else if let Some(p) = line.strip_prefix("rename to ") {
            b.rename_to = Some(p.to_string());
        } else if let Some(p) = line.strip_prefix("--- ") {
            b.old = side(p, "a/");
        } else if let Some(p) = line.strip_prefix("+++ ") {
            b.new = side(p, "b/");
        } else if line.starts_with("@@ ") {
            b.hunks.push(parse_hunk(line)?);
        }
    }
    if let Some(b) = block {
        changes.push(b.finish()?);
    }
    Ok(changes)
}
