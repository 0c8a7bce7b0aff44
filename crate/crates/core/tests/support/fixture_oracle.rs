//! Brute-force answers to the fifteen questions, computed from the raw
//! fixture files with serde_json::Value and direct scans. Fix-inducing
//! commits come from materialized file text, not from the line-origin replay.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, NaiveDate, Utc};
use msrbot_core::query::{CommitKind, IssueFacet, QueryEngine, Row};
use msrbot_core::DateRange;
use serde_json::Value;

struct RawChange {
    path: String,
    old_path: Option<String>,
    kind: String,
    hunks: Vec<[u32; 4]>,
}

struct RawCommit {
    hash: String,
    author: String,
    time: DateTime<Utc>,
    message: String,
    changes: Vec<RawChange>,
}

struct RawIssue {
    key: String,
    kind: String,
    status: String,
    priority: String,
    resolution: Option<String>,
    assignee: Option<String>,
    watchers: u64,
    created: DateTime<Utc>,
}

pub struct Oracle {
    commits: Vec<RawCommit>,
    issues: Vec<RawIssue>,
    /// (fix hash, issue key)
    fixes: Vec<(String, String)>,
    /// (inducing, fix, key, evidence path)
    inducing: Vec<(String, String, String, String)>,
}

fn time(v: &Value) -> DateTime<Utc> {
    DateTime::parse_from_rfc3339(v.as_str().unwrap()).unwrap().with_timezone(&Utc)
}

fn text(v: &Value) -> String {
    v.as_str().unwrap_or_default().to_string()
}

fn label(v: &Value) -> Option<String> {
    v.as_str().map(|s| s.trim().to_lowercase())
}

fn base(path: &str) -> &str {
    path.rsplit('/').next().unwrap()
}

impl Oracle {
    pub fn load(commits_ndjson: &str, issues_json: &str) -> Oracle {
        let commits: Vec<RawCommit> = commits_ndjson
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                let v: Value = serde_json::from_str(l).unwrap();
                RawCommit {
                    hash: text(&v["hash"]),
                    author: text(&v["author_name"]),
                    time: time(&v["committer_time"]),
                    message: text(&v["message"]),
                    changes: v["changes"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .map(|c| RawChange {
                            path: text(&c["path"]),
                            old_path: c["old_path"].as_str().map(str::to_string),
                            kind: text(&c["change_type"]),
                            hunks: c["hunks"]
                                .as_array()
                                .unwrap()
                                .iter()
                                .map(|h| {
                                    let f = |k: &str| h[k].as_u64().unwrap() as u32;
                                    [f("old_start"), f("old_count"), f("new_start"), f("new_count")]
                                })
                                .collect(),
                        })
                        .collect(),
                }
            })
            .collect();
        let issues: Vec<RawIssue> = serde_json::from_str::<Value>(issues_json)
            .unwrap()
            .as_array()
            .unwrap()
            .iter()
            .map(|i| RawIssue {
                key: text(&i["key"]),
                kind: text(&i["type"]).to_lowercase(),
                status: label(&i["status"]).unwrap(),
                priority: label(&i["priority"]).unwrap(),
                resolution: label(&i["resolution"]),
                assignee: i["assignee"].as_str().map(str::to_string),
                watchers: i["watchers"].as_u64().unwrap(),
                created: time(&i["created"]),
            })
            .collect();
        let mut oracle = Oracle {
            commits,
            issues,
            fixes: vec![],
            inducing: vec![],
        };
        oracle.mine();
        oracle
    }

    fn issue(&self, key: &str) -> Option<&RawIssue> {
        self.issues.iter().find(|i| i.key == key)
    }

    fn commit(&self, hash: &str) -> &RawCommit {
        self.commits.iter().find(|c| c.hash == hash).unwrap()
    }

    fn mentions(message: &str) -> BTreeSet<String> {
        message
            .split(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
            .filter(|w| {
                let Some((project, number)) = w.split_once('-') else { return false };
                !project.is_empty()
                    && project.starts_with(|c: char| c.is_ascii_uppercase())
                    && project.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
                    && !number.is_empty()
                    && number.chars().all(|c| c.is_ascii_digit())
            })
            .map(str::to_string)
            .collect()
    }

    fn mine(&mut self) {
        // The fixture is a single linear chain listed oldest first.
        let mut files: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut fixes = Vec::new();
        let mut inducing = Vec::new();
        for commit in &self.commits {
            let keys: Vec<String> = Self::mentions(&commit.message)
                .into_iter()
                .filter(|k| {
                    self.issue(k)
                        .is_some_and(|i| i.kind == "bug" && i.resolution.as_deref() == Some("fixed"))
                })
                .collect();
            for key in &keys {
                fixes.push((commit.hash.clone(), key.clone()));
            }
            let before = files.clone();
            for change in &commit.changes {
                let source = change.old_path.clone().unwrap_or_else(|| change.path.clone());
                let old = if change.kind == "A" { vec![] } else { before[&source].clone() };
                let mut new = Vec::new();
                let mut cursor = 0usize;
                let mut fresh = 0;
                for [old_start, old_count, _, new_count] in &change.hunks {
                    let keep_until = if *old_count > 0 { *old_start - 1 } else { *old_start } as usize;
                    new.extend_from_slice(&old[cursor..keep_until]);
                    for line in &old[keep_until..keep_until + *old_count as usize] {
                        let writer = line.split('#').next().unwrap().to_string();
                        for key in &keys {
                            let candidate = self.commits.iter().find(|c| c.hash == writer).unwrap();
                            let issue = self.issue(key).unwrap();
                            if candidate.time < commit.time
                                && candidate.time <= issue.created
                            {
                                inducing.push((writer.clone(), commit.hash.clone(), key.clone(), source.clone()));
                            }
                        }
                    }
                    cursor = keep_until + *old_count as usize;
                    for _ in 0..*new_count {
                        fresh += 1;
                        new.push(format!("{}#{}#{fresh}", commit.hash, change.path));
                    }
                }
                new.extend_from_slice(&old[cursor..]);
                if change.old_path.is_some() {
                    files.remove(&source);
                }
                if change.kind == "D" {
                    files.remove(&change.path);
                } else {
                    files.insert(change.path.clone(), new);
                }
            }
        }
        inducing.sort();
        inducing.dedup();
        self.fixes = fixes;
        self.inducing = inducing;
    }

    fn resolve(&self, name: &str) -> Vec<String> {
        let mut all = BTreeSet::new();
        for c in &self.commits {
            for ch in &c.changes {
                all.insert(ch.path.clone());
                if let Some(o) = &ch.old_path {
                    all.insert(o.clone());
                }
            }
        }
        if all.contains(name) {
            return vec![name.to_string()];
        }
        all.into_iter()
            .filter(|p| p.eq_ignore_ascii_case(name) || base(p).eq_ignore_ascii_case(name))
            .collect()
    }

    fn touches(commit: &RawCommit, path: &str) -> bool {
        commit
            .changes
            .iter()
            .any(|c| c.path == path || c.old_path.as_deref() == Some(path))
    }

    /// Commits on the rename lineage of `path`, oldest first, plus the set
    /// of names the file had.
    fn lineage(&self, path: &str) -> (Vec<&RawCommit>, BTreeSet<String>) {
        let mut names = BTreeSet::from([path.to_string()]);
        let mut hits = Vec::new();
        for commit in self.commits.iter().rev() {
            if names.iter().any(|n| Self::touches(commit, n)) {
                hits.push(commit);
            }
            for ch in &commit.changes {
                if ch.kind == "R" && names.contains(&ch.path) {
                    names.insert(ch.old_path.clone().unwrap());
                }
            }
        }
        hits.reverse();
        (hits, names)
    }

    fn day_range(range: &DateRange) -> (NaiveDate, NaiveDate) {
        (range.start_day, range.end_day)
    }

    fn in_range(range: &DateRange, t: DateTime<Utc>) -> bool {
        let (a, b) = Self::day_range(range);
        (a..=b).contains(&t.date_naive())
    }

    pub fn q1(&self, key: &str) -> Vec<String> {
        self.fixes.iter().filter(|(_, k)| k == key).map(|(h, _)| h.clone()).collect()
    }

    pub fn q2(&self, file: &str) -> Vec<(String, u64)> {
        let paths = self.resolve(file);
        let mut per: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (hash, key) in &self.fixes {
            let c = self.commit(hash);
            let touched = c.changes.iter().any(|ch| {
                ch.kind != "A" && ch.hunks.iter().any(|h| h[1] > 0) && paths.contains(&ch.path)
            });
            if touched {
                per.entry(c.author.clone()).or_default().insert(key.clone());
            }
        }
        let max = per.values().map(|s| s.len()).max().unwrap_or(0);
        per.into_iter()
            .filter(|(_, s)| s.len() == max)
            .map(|(a, s)| (a, s.len() as u64))
            .collect()
    }

    pub fn q3(&self, k: usize) -> Vec<(String, u64)> {
        let mut per: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (inducing, _, _, path) in &self.inducing {
            per.entry(path.clone()).or_default().insert(inducing.clone());
        }
        let mut v: Vec<(String, u64)> = per.into_iter().map(|(p, s)| (p, s.len() as u64)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }

    pub fn q4(&self, file: &str) -> Vec<String> {
        let paths = self.resolve(file);
        let mut out: Vec<String> = Vec::new();
        for c in &self.commits {
            if paths.iter().any(|p| Self::touches(c, p)) && !out.contains(&c.author) {
                out.push(c.author.clone());
            }
        }
        out
    }

    pub fn q5(&self, hash: &str) -> Vec<String> {
        let keys: BTreeSet<String> =
            self.inducing.iter().filter(|r| r.0 == hash).map(|r| r.2.clone()).collect();
        let mut issues: Vec<&RawIssue> = keys.iter().filter_map(|k| self.issue(k)).collect();
        issues.sort_by_key(|i| (i.created, i.key.clone()));
        issues.into_iter().map(|i| i.key.clone()).collect()
    }

    pub fn q6(&self, range: &DateRange) -> u64 {
        self.commits.iter().filter(|c| Self::in_range(range, c.time)).count() as u64
    }

    pub fn q7(&self, range: &DateRange) -> Vec<String> {
        self.commits
            .iter()
            .filter(|c| Self::in_range(range, c.time))
            .map(|c| c.hash.clone())
            .collect()
    }

    pub fn q8(&self, file: &str, k: usize) -> Vec<String> {
        let mut v = self.q9(file);
        v.reverse();
        v.truncate(k);
        v
    }

    pub fn q9(&self, file: &str) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for path in self.resolve(file) {
            for c in self.lineage(&path).0 {
                if seen.insert(c.hash.clone()) {
                    out.push((c.time, c.hash.clone()));
                }
            }
        }
        out.sort();
        out.into_iter().map(|(_, h)| h).collect()
    }

    pub fn q10(&self, k: usize) -> Vec<String> {
        let mut bugs: Vec<&RawIssue> = self.issues.iter().filter(|i| i.kind == "bug").collect();
        bugs.sort_by_key(|i| (std::cmp::Reverse(i.watchers), i.created, i.key.clone()));
        bugs.into_iter().take(k).map(|i| i.key.clone()).collect()
    }

    pub fn q11(&self, range: &DateRange, kind: CommitKind) -> Vec<String> {
        let hashes: BTreeSet<&String> = match kind {
            CommitKind::Buggy => self.inducing.iter().map(|r| &r.0).collect(),
            CommitKind::Fixing => self.fixes.iter().map(|f| &f.0).collect(),
        };
        self.commits
            .iter()
            .filter(|c| hashes.contains(&c.hash) && Self::in_range(range, c.time))
            .map(|c| c.hash.clone())
            .collect()
    }

    pub fn q12(&self, facet: IssueFacet, value: &str) -> u64 {
        let value = value.to_lowercase();
        self.issues
            .iter()
            .filter(|i| i.kind == "bug")
            .filter(|i| match facet {
                IssueFacet::Status => i.status == value,
                IssueFacet::Priority => i.priority == value,
            })
            .count() as u64
    }

    pub fn q13(&self, file: &str) -> Vec<(String, String, String)> {
        let mut out = Vec::new();
        for path in self.resolve(file) {
            let (commits, names) = self.lineage(&path);
            let creator = commits.into_iter().find(|c| {
                c.changes.iter().any(|ch| ch.kind == "A" && names.contains(&ch.path))
            });
            if let Some(c) = creator {
                out.push((path.clone(), c.author.clone(), c.hash.clone()));
            }
        }
        out
    }

    pub fn q14(&self, k: usize) -> Vec<(String, u64)> {
        let mut per: BTreeMap<String, u64> = BTreeMap::new();
        for i in &self.issues {
            if i.kind == "bug" && i.status != "resolved" && i.status != "closed" {
                *per.entry(i.assignee.clone().unwrap_or_else(|| "(unassigned)".into())).or_default() += 1;
            }
        }
        let max = per.values().copied().max().unwrap_or(0);
        per.into_iter().filter(|(_, n)| *n == max).take(k).collect()
    }

    /// None when no fixing commit falls in the range.
    pub fn q15(&self, range: &DateRange) -> Option<(f64, u64, u64)> {
        let fixes: BTreeSet<&String> = self
            .fixes
            .iter()
            .map(|f| &f.0)
            .filter(|h| Self::in_range(range, self.commit(h).time))
            .collect();
        if fixes.is_empty() {
            return None;
        }
        let inducing: BTreeSet<&String> = self.inducing.iter().map(|r| &r.0).collect();
        let n = fixes.iter().filter(|h| inducing.contains(*h)).count() as u64;
        let d = fixes.len() as u64;
        Some(((1000.0 * n as f64 / d as f64).round() / 10.0, n, d))
    }
}

fn hashes(rows: &[Row]) -> Vec<String> {
    rows.iter()
        .map(|r| match r {
            Row::Commit(c) => c.hash.clone(),
            other => panic!("expected commit row, got {other:?}"),
        })
        .collect()
}

fn ranked(rows: &[Row]) -> Vec<(String, u64)> {
    rows.iter()
        .map(|r| match r {
            Row::Ranked { name, count } => (name.clone(), *count),
            other => panic!("expected ranked row, got {other:?}"),
        })
        .collect()
}

fn keys(rows: &[Row]) -> Vec<String> {
    rows.iter()
        .map(|r| match r {
            Row::Issue(i) => i.key.clone(),
            other => panic!("expected issue row, got {other:?}"),
        })
        .collect()
}

fn count(rows: &[Row]) -> u64 {
    match rows {
        [Row::Count { count }] => *count,
        other => panic!("expected one count row, got {other:?}"),
    }
}

/// One comparison: a label, the oracle's answer and the engine's answer.
pub struct Check {
    pub label: String,
    pub expected: String,
    pub actual: String,
}

impl Check {
    pub fn ok(&self) -> bool {
        self.expected == self.actual
    }
}

fn check<T: std::fmt::Debug>(label: impl Into<String>, expected: T, actual: T) -> Check {
    Check {
        label: label.into(),
        expected: format!("{expected:?}"),
        actual: format!("{actual:?}"),
    }
}

pub fn day(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

/// Runs every question over a grid of arguments on the fixture.
pub fn compare_all(oracle: &Oracle, engine: &QueryEngine) -> Vec<Check> {
    let files = ["Foo.java", "src/Foo.java", "foo.java", "Bar.java", "Baz.java", "src/Baz.java"];
    let ranges = [
        DateRange::new(day(2020, 1, 1), day(2020, 1, 31)).unwrap(),
        DateRange::new(day(2020, 2, 1), day(2020, 2, 29)).unwrap(),
        DateRange::new(day(2020, 1, 8), day(2020, 1, 8)).unwrap(),
        DateRange::new(day(2020, 1, 1), day(2020, 12, 31)).unwrap(),
        DateRange::new(day(2019, 1, 1), day(2019, 12, 31)).unwrap(),
    ];
    let hashes_all: Vec<String> = oracle.commits.iter().map(|c| c.hash.clone()).collect();
    let mut out = Vec::new();

    for key in ["HHH-1", "HHH-2", "HHH-3"] {
        out.push(check(format!("q1 {key}"), oracle.q1(key), hashes(&engine.q1_fixing_commits(key).unwrap().rows)));
    }
    for f in files {
        out.push(check(format!("q2 {f}"), oracle.q2(f), ranked(&engine.q2_top_bug_fixers(f).unwrap().rows)));
        out.push(check(
            format!("q4 {f}"),
            oracle.q4(f),
            engine
                .q4_modifiers_of_file(f)
                .unwrap()
                .rows
                .iter()
                .map(|r| match r {
                    Row::Name { name } => name.clone(),
                    other => panic!("{other:?}"),
                })
                .collect(),
        ));
        for k in [1, 2, 3, 10] {
            out.push(check(
                format!("q8 {f} k={k}"),
                oracle.q8(f, k),
                hashes(&engine.q8_latest_commits_to_file(f, k).unwrap().rows),
            ));
        }
        out.push(check(format!("q9 {f}"), oracle.q9(f), hashes(&engine.q9_commits_for_file(f).unwrap().rows)));
        out.push(check(
            format!("q13 {f}"),
            oracle.q13(f),
            engine
                .q13_author_of_file(f)
                .unwrap()
                .rows
                .iter()
                .map(|r| match r {
                    Row::FileAuthor { path, author_name, hash } => (path.clone(), author_name.clone(), hash.clone()),
                    other => panic!("{other:?}"),
                })
                .collect(),
        ));
    }
    for k in [1, 2, 5] {
        out.push(check(format!("q3 k={k}"), oracle.q3(k), ranked(&engine.q3_most_bug_introducing_files(k).unwrap().rows)));
        out.push(check(format!("q10 k={k}"), oracle.q10(k), keys(&engine.q10_most_common_bugs(k).unwrap().rows)));
        out.push(check(format!("q14 k={k}"), oracle.q14(k), ranked(&engine.q14_most_unfixed_bugs(k).unwrap().rows)));
    }
    for h in &hashes_all {
        out.push(check(format!("q5 {}", &h[..8]), oracle.q5(h), keys(&engine.q5_bugs_introduced_by_commit(h).unwrap().rows)));
    }
    for r in &ranges {
        out.push(check(format!("q6 {r}"), oracle.q6(r), count(&engine.q6_commit_count(r).rows)));
        out.push(check(format!("q7 {r}"), oracle.q7(r), hashes(&engine.q7_commits_in_range(r).rows)));
        for kind in [CommitKind::Buggy, CommitKind::Fixing] {
            out.push(check(
                format!("q11 {r} {kind:?}"),
                oracle.q11(r, kind),
                hashes(&engine.q11_buggy_or_fixing_commits(r, kind).rows),
            ));
        }
        let actual = match engine.q15_fix_inducing_percentage(r).rows.as_slice() {
            [Row::EmptyDenominator] => None,
            [Row::Percentage { percent, numerator, denominator }] => Some((*percent, *numerator, *denominator)),
            other => panic!("{other:?}"),
        };
        out.push(check(format!("q15 {r}"), oracle.q15(r), actual));
    }
    for (facet, value) in [
        (IssueFacet::Status, "open"),
        (IssueFacet::Status, "resolved"),
        (IssueFacet::Status, "closed"),
        (IssueFacet::Priority, "major"),
        (IssueFacet::Priority, "blocker"),
        (IssueFacet::Priority, "minor"),
    ] {
        out.push(check(
            format!("q12 {facet:?} {value}"),
            oracle.q12(facet, value),
            count(&engine.q12_issue_count(facet, value).rows),
        ));
    }
    out
}
