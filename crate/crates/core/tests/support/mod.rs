//! Shared helpers for integration tests: fixture loading, a random linear
//! history generator and a textual last-writer oracle for SZZ.
#![allow(dead_code)]

pub mod date_exprs;
pub mod fixture_oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use chrono::{DateTime, Duration, TimeZone, Utc};
use msrbot_core::model::{ChangeType, Commit, FileChange, Hunk, Issue, IssueType};
use msrbot_core::nlu::{read_training_file, IntentClassifier, WordVectorTable, DEFAULT_THRESHOLD};
use msrbot_core::{link_commits_to_issues, parse_commit_export, parse_issue_export, Bot, KnowledgeBase, QueryEngine};
use std::sync::Arc;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn fixture_commits_path() -> PathBuf {
    data_dir().join("fixture/commits.ndjson")
}

pub fn fixture_issues_path() -> PathBuf {
    data_dir().join("fixture/issues.json")
}

pub fn fixture_oracle() -> fixture_oracle::Oracle {
    fixture_oracle::Oracle::load(
        &std::fs::read_to_string(fixture_commits_path()).unwrap(),
        &std::fs::read_to_string(fixture_issues_path()).unwrap(),
    )
}

pub fn fixture_kb() -> KnowledgeBase {
    let commits = parse_commit_export(BufReader::new(File::open(fixture_commits_path()).unwrap())).unwrap();
    let issues = parse_issue_export(BufReader::new(File::open(fixture_issues_path()).unwrap())).unwrap();
    let links = link_commits_to_issues(&commits, &issues).links;
    KnowledgeBase::from_parts(commits, issues, links).unwrap()
}

pub fn classifier() -> IntentClassifier {
    let table = WordVectorTable::read(BufReader::new(File::open(data_dir().join("nlu/vectors.txt")).unwrap())).unwrap();
    let training =
        read_training_file(BufReader::new(File::open(data_dir().join("nlu/training.json")).unwrap())).unwrap();
    IntentClassifier::new(table, &training, DEFAULT_THRESHOLD).unwrap()
}

pub fn bot_for(kb: KnowledgeBase) -> Bot {
    Bot::new(QueryEngine::new(Arc::new(kb)).unwrap(), classifier())
}

pub fn fixture_bot() -> Bot {
    bot_for(fixture_kb())
}

/// Sixteen commits spread over 2019-01-21..=27 (a Monday to Sunday), plus
/// one just before and one just after that week.
pub fn busy_week_kb() -> KnowledgeBase {
    let start = Utc.with_ymd_and_hms(2019, 1, 20, 23, 30, 0).unwrap();
    let times: Vec<DateTime<Utc>> = std::iter::once(start)
        .chain((0..16).map(|i| Utc.with_ymd_and_hms(2019, 1, 21, 8, 0, 0).unwrap() + Duration::hours(i * 10)))
        .chain(std::iter::once(Utc.with_ymd_and_hms(2019, 1, 28, 0, 30, 0).unwrap()))
        .collect();
    let commits: Vec<Commit> = times
        .iter()
        .enumerate()
        .map(|(k, t)| Commit {
            hash: commit_hash(k + 1),
            parents: if k == 0 { vec![] } else { vec![commit_hash(k)] },
            author_name: "dev".into(),
            author_email: String::new(),
            author_time: *t,
            committer_time: *t,
            message: format!("change {k}"),
            changes: vec![FileChange {
                path: "notes.txt".into(),
                old_path: None,
                change_type: if k == 0 { ChangeType::Added } else { ChangeType::Modified },
                hunks: vec![Hunk { old_start: k as u32, old_count: 0, new_start: k as u32 + 1, new_count: 1 }],
            }],
        })
        .collect();
    KnowledgeBase::from_parts(commits, vec![], Default::default()).unwrap()
}

/// Zero-context hunks turning `old` into `new`. Every line text is unique, so
/// the kept lines are exactly those present in both, in the same order.
pub fn diff_hunks(old: &[String], new: &[String]) -> Vec<Hunk> {
    let kept: BTreeSet<&String> = old.iter().filter(|l| new.contains(l)).collect();
    let (mut i, mut j) = (0, 0);
    let mut hunks = Vec::new();
    while i < old.len() || j < new.len() {
        if i < old.len() && j < new.len() && old[i] == new[j] {
            i += 1;
            j += 1;
            continue;
        }
        let (oi, nj) = (i, j);
        while i < old.len() && !kept.contains(&old[i]) {
            i += 1;
        }
        while j < new.len() && !kept.contains(&new[j]) {
            j += 1;
        }
        let (old_count, new_count) = ((i - oi) as u32, (j - nj) as u32);
        hunks.push(Hunk {
            old_start: if old_count > 0 { oi as u32 + 1 } else { oi as u32 },
            old_count,
            new_start: if new_count > 0 { nj as u32 + 1 } else { nj as u32 },
            new_count,
        });
    }
    hunks
}

/// A generated history with the full text of every file before each commit.
pub struct GeneratedHistory {
    pub commits: Vec<Commit>,
    pub issues: Vec<Issue>,
    /// `states[i]` maps path -> text before commit `i`; the last entry is
    /// the final state.
    pub states: Vec<BTreeMap<String, Vec<String>>>,
}

pub fn commit_hash(k: usize) -> String {
    format!("{:040x}", 0xc000 + k)
}

fn line_author(line: &str) -> usize {
    line.split(':').next().unwrap()[1..].parse().unwrap()
}

fn base_time() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap()
}

/// Linear history of 2..=20 commits over at most 5 files. Lines read
/// `c{k}:{n}` where `k` is the commit that wrote them.
pub fn generate_history(seed: u64) -> GeneratedHistory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_commits = rng.random_range(2..=20usize);
    let n_issues = rng.random_range(1..=4usize);
    let mut files: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut next_file = 0;
    let mut uid = 0;
    let mut commits = Vec::new();
    let mut states = Vec::new();

    for k in 1..=n_commits {
        states.push(files.clone());
        let mut fresh = |count: usize| -> Vec<String> {
            (0..count)
                .map(|_| {
                    uid += 1;
                    format!("c{k}:{uid}")
                })
                .collect()
        };
        let mut changes = Vec::new();
        let mut touched: BTreeSet<String> = BTreeSet::new();
        let actions = rng.random_range(1..=2);
        for _ in 0..actions {
            let candidates: Vec<String> = files.keys().filter(|p| !touched.contains(*p)).cloned().collect();
            let roll: f64 = rng.random();
            if candidates.is_empty() || (roll < 0.2 && files.len() < 5) {
                let path = format!("f{next_file}.txt");
                next_file += 1;
                let len = rng.random_range(1..=6);
                let text = fresh(len);
                changes.push(FileChange {
                    path: path.clone(),
                    old_path: None,
                    change_type: ChangeType::Added,
                    hunks: vec![Hunk { old_start: 0, old_count: 0, new_start: 1, new_count: len as u32 }],
                });
                touched.insert(path.clone());
                files.insert(path, text);
                continue;
            }
            let path = candidates[rng.random_range(0..candidates.len())].clone();
            let old = files[&path].clone();
            if roll > 0.9 && files.len() > 1 {
                changes.push(FileChange {
                    path: path.clone(),
                    old_path: None,
                    change_type: ChangeType::Deleted,
                    hunks: if old.is_empty() {
                        vec![]
                    } else {
                        vec![Hunk { old_start: 1, old_count: old.len() as u32, new_start: 0, new_count: 0 }]
                    },
                });
                touched.insert(path.clone());
                files.remove(&path);
                continue;
            }
            let mut new = Vec::new();
            for line in &old {
                let r: f64 = rng.random();
                if rng.random_bool(0.15) {
                    let n = rng.random_range(1..=2);
                    new.extend(fresh(n));
                }
                if r < 0.25 {
                    continue;
                } else if r < 0.4 {
                    new.extend(fresh(1));
                } else {
                    new.push(line.clone());
                }
            }
            if rng.random_bool(0.2) || new == old {
                new.extend(fresh(1));
            }
            let hunks = diff_hunks(&old, &new);
            if roll > 0.8 && !files.contains_key(&format!("r{next_file}.txt")) {
                let renamed = format!("r{next_file}.txt");
                next_file += 1;
                changes.push(FileChange {
                    path: renamed.clone(),
                    old_path: Some(path.clone()),
                    change_type: ChangeType::Renamed,
                    hunks,
                });
                touched.insert(path.clone());
                touched.insert(renamed.clone());
                files.remove(&path);
                files.insert(renamed, new);
            } else {
                changes.push(FileChange {
                    path: path.clone(),
                    old_path: None,
                    change_type: ChangeType::Modified,
                    hunks,
                });
                touched.insert(path.clone());
                files.insert(path, new);
            }
        }

        let mut message = format!("change {k}");
        if rng.random_bool(0.45) {
            message.push_str(&format!(" fixes BUG-{}", rng.random_range(1..=n_issues)));
            if rng.random_bool(0.2) {
                message.push_str(&format!(" and BUG-{}", rng.random_range(1..=n_issues)));
            }
        }
        let time = base_time() + Duration::days(k as i64) + Duration::minutes(rng.random_range(0..600));
        commits.push(Commit {
            hash: commit_hash(k),
            parents: if k == 1 { vec![] } else { vec![commit_hash(k - 1)] },
            author_name: format!("dev{}", rng.random_range(1..=3)),
            author_email: String::new(),
            author_time: time,
            committer_time: time,
            message,
            changes,
        });
    }

    states.push(files);

    let issues = (1..=n_issues)
        .map(|i| {
            let fixed = rng.random_bool(0.8);
            let bug = rng.random_bool(0.85);
            Issue {
                key: format!("BUG-{i}"),
                issue_type: if bug { IssueType::Bug } else { IssueType::Improvement },
                status: "closed".into(),
                priority: "major".into(),
                resolution: Some(if fixed { "fixed" } else { "won't fix" }.into()),
                assignee: None,
                watcher_count: 0,
                created: base_time()
                    + Duration::days(rng.random_range(0..=n_commits as i64 + 1))
                    + Duration::hours(12),
                resolved: None,
                summary: String::new(),
            }
        })
        .collect();

    GeneratedHistory {
        commits,
        issues,
        states,
    }
}

impl GeneratedHistory {
    pub fn kb(&self) -> KnowledgeBase {
        let links = link_commits_to_issues(&self.commits, &self.issues).links;
        KnowledgeBase::from_parts(self.commits.clone(), self.issues.clone(), links).unwrap()
    }

    /// (inducing, fix, issue) -> path -> deleted old line numbers, computed
    /// from file text alone.
    pub fn oracle(&self, filter_by_report_date: bool) -> BTreeMap<(String, String, String), BTreeMap<String, Vec<u32>>> {
        let mut out: BTreeMap<(String, String, String), BTreeMap<String, Vec<u32>>> = BTreeMap::new();
        for (idx, fix) in self.commits.iter().enumerate() {
            let keys: BTreeSet<String> = fix
                .message
                .split_whitespace()
                .filter(|w| w.starts_with("BUG-"))
                .map(str::to_string)
                .collect();
            let after = &self.states[idx + 1];
            for key in keys {
                let Some(issue) = self.issues.iter().find(|i| i.key == key) else { continue };
                if issue.issue_type != IssueType::Bug || issue.resolution.as_deref() != Some("fixed") {
                    continue;
                }
                for change in &fix.changes {
                    if change.change_type == ChangeType::Added {
                        continue;
                    }
                    let source = change.old_path.as_ref().unwrap_or(&change.path);
                    let old_text = &self.states[idx][source];
                    let new_text = after.get(&change.path).cloned().unwrap_or_default();
                    for (n, line) in old_text.iter().enumerate() {
                        if new_text.contains(line) {
                            continue;
                        }
                        let author = line_author(line);
                        let candidate = &self.commits[author - 1];
                        if candidate.committer_time >= fix.committer_time {
                            continue;
                        }
                        if filter_by_report_date && candidate.committer_time > issue.created {
                            continue;
                        }
                        out.entry((candidate.hash.clone(), fix.hash.clone(), key.clone()))
                            .or_default()
                            .entry(source.clone())
                            .or_default()
                            .push(n as u32 + 1);
                    }
                }
            }
        }
        out
    }
}
