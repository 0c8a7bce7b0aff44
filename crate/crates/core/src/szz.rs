//! SZZ: find bug-fixing commits, replay hunks to track which commit last
//! wrote each line, and blame the lines a fix deletes on their origins.
//!
//! Replay follows first parents only and works purely on hunk arithmetic:
//! a hunk removes its old range and inserts `new_count` lines attributed to
//! the commit being replayed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{ChangeType, Commit, FileChange, Hunk};
use crate::store::{KnowledgeBase, MinedSection, MINED_SECTION_VERSION};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SzzError {
    #[error("hunk in {path} of commit {commit} does not fit the replayed file")]
    HunkInconsistency { path: String, commit: String },
    #[error("unknown commit {0}")]
    UnknownCommit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FixRecord {
    pub fix_commit: String,
    pub issue_key: String,
    pub touched_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EvidenceFile {
    pub path: String,
    /// 1-based line numbers, in the pre-fix file, that the fix deleted.
    pub lines: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InducingRecord {
    pub inducing_commit: String,
    pub fix_commit: String,
    pub issue_key: String,
    pub evidence_files: Vec<EvidenceFile>,
}

/// Per path, the commit that introduced each current line (index 0 = line 1).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LineOriginTable {
    files: BTreeMap<String, Vec<String>>,
}

impl LineOriginTable {
    pub fn get(&self, path: &str) -> Option<&[String]> {
        self.files.get(path).map(Vec::as_slice)
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.files.keys().map(String::as_str)
    }

    /// Applies every change of `commit` on top of the current state.
    pub fn apply(&mut self, commit: &Commit) -> Result<(), SzzError> {
        let mut removed = Vec::new();
        let mut written = Vec::new();
        for change in &commit.changes {
            let inconsistent = || SzzError::HunkInconsistency {
                path: change.path.clone(),
                commit: commit.hash.clone(),
            };
            match change.change_type {
                ChangeType::Added => {
                    let lines = apply_hunks(&[], &change.hunks, &commit.hash).ok_or_else(inconsistent)?;
                    written.push((change.path.clone(), lines));
                }
                ChangeType::Deleted => {
                    let current = self.files.get(&change.path).map(Vec::as_slice).unwrap_or(&[]);
                    apply_hunks(current, &change.hunks, &commit.hash).ok_or_else(inconsistent)?;
                    removed.push(change.path.clone());
                }
                ChangeType::Modified | ChangeType::Renamed => {
                    let source = change.source_path();
                    let current = self.files.get(source).map(Vec::as_slice).unwrap_or(&[]);
                    let lines =
                        apply_hunks(current, &change.hunks, &commit.hash).ok_or_else(inconsistent)?;
                    if source != change.path {
                        removed.push(source.to_string());
                    }
                    written.push((change.path.clone(), lines));
                }
            }
        }
        for path in removed {
            self.files.remove(&path);
        }
        self.files.extend(written);
        Ok(())
    }
}

/// Returns `None` when a hunk's old range does not fit `current`.
fn apply_hunks(current: &[String], hunks: &[Hunk], origin: &str) -> Option<Vec<String>> {
    let mut out = Vec::with_capacity(current.len());
    let mut consumed = 0usize;
    for hunk in hunks {
        let keep_until = if hunk.old_count == 0 {
            hunk.old_start as usize
        } else {
            hunk.old_start as usize - 1
        };
        let resume_at = keep_until + hunk.old_count as usize;
        if keep_until < consumed || resume_at > current.len() {
            return None;
        }
        out.extend_from_slice(&current[consumed..keep_until]);
        out.extend(std::iter::repeat_n(origin.to_string(), hunk.new_count as usize));
        consumed = resume_at;
    }
    out.extend_from_slice(&current[consumed..]);
    Some(out)
}

/// Changes of a fix that can carry blame: everything but additions, with at
/// least one deleted line.
fn blamable(change: &FileChange) -> bool {
    change.change_type != ChangeType::Added && change.deletes_lines()
}

/// One record per (commit, issue) link whose issue is a bug resolved as fixed.
pub fn identify_fixing_commits(kb: &KnowledgeBase) -> Vec<FixRecord> {
    let mut fixes: Vec<FixRecord> = kb
        .links()
        .iter()
        .filter(|link| kb.issue(&link.issue_key).is_some_and(|i| i.is_fixed_bug()))
        .filter_map(|link| {
            let commit = kb.commit(&link.commit_hash)?;
            let touched: BTreeSet<&str> = commit
                .changes
                .iter()
                .filter(|c| blamable(c))
                .map(|c| c.path.as_str())
                .collect();
            Some(FixRecord {
                fix_commit: commit.hash.clone(),
                issue_key: link.issue_key.clone(),
                touched_files: touched.into_iter().map(str::to_string).collect(),
            })
        })
        .collect();
    fixes.sort_by_key(|f| (kb.position(&f.fix_commit), f.issue_key.clone()));
    fixes
}

/// File state immediately before `up_to`, replayed along first parents.
pub fn replay_line_origins(kb: &KnowledgeBase, up_to: &str) -> Result<LineOriginTable, SzzError> {
    let mut replayer = Replayer::default();
    replayer.advance_to_parent_of(kb, up_to)?;
    Ok(replayer.table)
}

/// Keeps the last replayed chain so consecutive fixes on the same line of
/// history only replay the commits in between.
#[derive(Default)]
struct Replayer {
    chain: Vec<String>,
    table: LineOriginTable,
}

impl Replayer {
    fn advance_to_parent_of(&mut self, kb: &KnowledgeBase, target: &str) -> Result<(), SzzError> {
        if kb.commit(target).is_none() {
            return Err(SzzError::UnknownCommit(target.to_string()));
        }
        let mut wanted = kb.first_parent_chain(target);
        wanted.pop();
        let reusable = self.chain.len() <= wanted.len()
            && self.chain.last().is_none_or(|last| wanted[self.chain.len() - 1] == *last);
        if !reusable {
            self.chain.clear();
            self.table = LineOriginTable::default();
        }
        for hash in &wanted[self.chain.len()..] {
            let commit = kb.commit(hash).expect("chain built from store");
            self.table.apply(commit)?;
        }
        self.chain = wanted;
        Ok(())
    }
}

/// Maps each fix to the commits that last wrote the lines it deletes.
pub fn compute_inducing(
    kb: &KnowledgeBase,
    fixes: &[FixRecord],
    filter_by_report_date: bool,
) -> Result<Vec<InducingRecord>, SzzError> {
    let mut by_fix: BTreeMap<(Option<usize>, &str), Vec<&FixRecord>> = BTreeMap::new();
    for fix in fixes {
        by_fix
            .entry((kb.position(&fix.fix_commit), fix.fix_commit.as_str()))
            .or_default()
            .push(fix);
    }

    let mut replayer = Replayer::default();
    let mut records = Vec::new();
    for ((_, fix_hash), fix_records) in by_fix {
        let fix_commit = kb
            .commit(fix_hash)
            .ok_or_else(|| SzzError::UnknownCommit(fix_hash.to_string()))?;
        replayer.advance_to_parent_of(kb, fix_hash)?;

        // origin -> path -> deleted line numbers
        let mut blamed: BTreeMap<&str, BTreeMap<&str, BTreeSet<u32>>> = BTreeMap::new();
        for change in fix_commit.changes.iter().filter(|c| blamable(c)) {
            let source = change.source_path();
            let inconsistent = || SzzError::HunkInconsistency {
                path: source.to_string(),
                commit: fix_hash.to_string(),
            };
            let origins = replayer.table.get(source).ok_or_else(inconsistent)?;
            for hunk in change.hunks.iter().filter(|h| h.old_count > 0) {
                for line in hunk.old_start..hunk.old_start + hunk.old_count {
                    let origin = origins.get(line as usize - 1).ok_or_else(inconsistent)?;
                    blamed.entry(origin).or_default().entry(source).or_default().insert(line);
                }
            }
        }

        for fix in fix_records {
            let issue = kb.issue(&fix.issue_key);
            for (origin, files) in &blamed {
                let Some(candidate) = kb.commit(origin) else { continue };
                if candidate.committer_time >= fix_commit.committer_time {
                    continue;
                }
                if filter_by_report_date && issue.is_some_and(|i| candidate.committer_time > i.created) {
                    continue;
                }
                records.push(InducingRecord {
                    inducing_commit: origin.to_string(),
                    fix_commit: fix_hash.to_string(),
                    issue_key: fix.issue_key.clone(),
                    evidence_files: files
                        .iter()
                        .map(|(path, lines)| EvidenceFile {
                            path: path.to_string(),
                            lines: lines.iter().copied().collect(),
                        })
                        .collect(),
                });
            }
        }
    }
    records.sort_by(|a, b| {
        let key = |r: &InducingRecord| {
            (kb.position(&r.fix_commit), kb.position(&r.inducing_commit), r.issue_key.clone())
        };
        key(a).cmp(&key(b))
    });
    records.dedup_by(|a, b| {
        a.fix_commit == b.fix_commit && a.inducing_commit == b.inducing_commit && a.issue_key == b.issue_key
    });
    Ok(records)
}

/// Runs both SZZ phases and packages the result for the store.
pub fn mine(kb: &KnowledgeBase, filter_by_report_date: bool) -> Result<MinedSection, SzzError> {
    let fixes = identify_fixing_commits(kb);
    let inducing = compute_inducing(kb, &fixes, filter_by_report_date)?;
    Ok(MinedSection {
        version: MINED_SECTION_VERSION,
        filter_report_date: filter_by_report_date,
        fixes,
        inducing,
    })
}
