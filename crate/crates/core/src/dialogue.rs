//! Wires recognizer, classifier, query engine and reply templates into one
//! single-turn `handle` call.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use chrono::{DateTime, Utc};
use serde::Serialize;

use crate::dates::DateRange;
use crate::ner::{recognize, Entity, EntityType, EntityValue, Gazetteer, NerError, NowClock};
use crate::nlu::{Classification, IntentClassifier};
use crate::query::{
    CommitKind, CommitSummary, IssueFacet, QueryEngine, QueryError, QueryKind, QueryResult, Row,
    DEFAULT_LATEST_K, DEFAULT_TOP_K,
};

pub const FALLBACK_REPLY: &str =
    "Sorry, I did not understand your question, could you please ask a different question?";
pub const EMPTY_FIX_PERIOD_REPLY: &str = "There were no bug-fixing commits in that period.";
pub const TRANSIENT_ERROR_REPLY: &str =
    "Sorry, I was unable to retrieve the data for your question right now. Please try again later.";
pub const GREETING_REPLY: &str =
    "Hello! I'm doing well, thanks for asking. Ask me anything about this repository's commits and bugs.";
pub const BOT_INFO_REPLY: &str = "I am a bot that answers questions about this project's Git history and issue tracker: who changed a file, which commits fixed a bug, which commits introduced bugs, how many commits happened in a period, and more.";

pub const GREETING: &str = "GREETING";
pub const BOT_INFO: &str = "BOT_INFO";
pub const FALLBACK: &str = "fallback";

pub fn missing_entity_prompt(entity: &str) -> String {
    format!("Could you please specify the {entity}?")
}

/// Entities an intent needs before its query can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Requirement {
    Entity(EntityType),
    /// Exactly one of two types; both present is resolved in favor of the first.
    EitherOf(EntityType, EntityType),
}

impl Requirement {
    fn describe(self) -> String {
        match self {
            Requirement::Entity(t) => t.describe().to_string(),
            Requirement::EitherOf(a, b) => format!("{} or {}", a.describe(), b.describe()),
        }
    }

    fn satisfied_by(self, entities: &[Entity]) -> bool {
        let has = |t: EntityType| entities.iter().any(|e| e.entity_type == t);
        match self {
            Requirement::Entity(t) => has(t),
            Requirement::EitherOf(a, b) => has(a) || has(b),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IntentSpec {
    pub intent_id: &'static str,
    pub query: Option<QueryKind>,
    pub required_entities: &'static [Requirement],
    pub description: &'static str,
    pub example: &'static str,
}

use EntityType as E;
use Requirement::{EitherOf, Entity as Needs};

pub const INTENT_SPECS: [IntentSpec; 17] = [
    IntentSpec { intent_id: "Q1", query: Some(QueryKind::Q1), required_entities: &[Needs(E::IssueKey)], description: "Which commits fixed a bug", example: "Which commits fixed HHH-1?" },
    IntentSpec { intent_id: "Q2", query: Some(QueryKind::Q2), required_entities: &[Needs(E::File)], description: "Which developers fixed the most bugs in a file", example: "Which developer fixes the most bugs related to Foo.java?" },
    IntentSpec { intent_id: "Q3", query: Some(QueryKind::Q3), required_entities: &[], description: "The most bug-introducing files", example: "Which are the most bug introducing files?" },
    IntentSpec { intent_id: "Q4", query: Some(QueryKind::Q4), required_entities: &[Needs(E::File)], description: "Who modified a file", example: "Who modified Foo.java?" },
    IntentSpec { intent_id: "Q5", query: Some(QueryKind::Q5), required_entities: &[Needs(E::CommitHash)], description: "Bugs introduced by a commit", example: "Which bugs were introduced by commit c2c2c2c?" },
    IntentSpec { intent_id: "Q6", query: Some(QueryKind::Q6), required_entities: &[Needs(E::DateRange)], description: "Number of commits in a period", example: "How many commits happened last week?" },
    IntentSpec { intent_id: "Q7", query: Some(QueryKind::Q7), required_entities: &[Needs(E::DateRange)], description: "Commits submitted in a period", example: "What commits were submitted in January 2020?" },
    IntentSpec { intent_id: "Q8", query: Some(QueryKind::Q8), required_entities: &[Needs(E::File)], description: "Latest commits to a file", example: "What is the latest commit to Foo.java?" },
    IntentSpec { intent_id: "Q9", query: Some(QueryKind::Q9), required_entities: &[Needs(E::File)], description: "Commits related to a file", example: "What are the commits related to Bar.java?" },
    IntentSpec { intent_id: "Q10", query: Some(QueryKind::Q10), required_entities: &[], description: "The most common bugs (by watchers)", example: "What are the most common bugs?" },
    IntentSpec { intent_id: "Q11", query: Some(QueryKind::Q11), required_entities: &[Needs(E::DateRange), Needs(E::CommitKind)], description: "Buggy or fixing commits in a period", example: "What are the buggy commits that happened in January 2020?" },
    IntentSpec { intent_id: "Q12", query: Some(QueryKind::Q12), required_entities: &[EitherOf(E::Status, E::Priority)], description: "Number of bugs with a status or priority", example: "How many bugs are open?" },
    IntentSpec { intent_id: "Q13", query: Some(QueryKind::Q13), required_entities: &[Needs(E::File)], description: "Who authored a file", example: "Who is the author of Baz.java?" },
    IntentSpec { intent_id: "Q14", query: Some(QueryKind::Q14), required_entities: &[], description: "Developers with the most unfixed bugs", example: "Which developer has the most unfixed bugs?" },
    IntentSpec { intent_id: "Q15", query: Some(QueryKind::Q15), required_entities: &[Needs(E::DateRange)], description: "Share of bug-fixing commits that introduced bugs in a period", example: "What percentage of bug fixing commits introduced bugs in January 2020?" },
    IntentSpec { intent_id: GREETING, query: None, required_entities: &[], description: "Greetings and small talk", example: "Hello, how are you?" },
    IntentSpec { intent_id: BOT_INFO, query: None, required_entities: &[], description: "What the bot can do", example: "What can you do?" },
];

pub fn intent_spec(intent_id: &str) -> Option<&'static IntentSpec> {
    INTENT_SPECS.iter().find(|s| s.intent_id == intent_id)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplyOutcome {
    Answer,
    Fallback,
    MissingEntity,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BotReply {
    pub text: String,
    pub payload: Option<QueryResult>,
    /// Intent id, or "fallback".
    pub intent: String,
    pub confidence: f64,
    pub entities: Vec<Entity>,
    pub outcome: ReplyOutcome,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RenderError {
    #[error("template {template} cannot render a {result} result")]
    TemplateMismatch { template: QueryKind, result: String },
}

/// Values from the utterance echoed into a reply.
#[derive(Debug, Clone, Default)]
pub struct RenderContext {
    pub period: Option<String>,
    pub file: Option<String>,
    pub issue_key: Option<String>,
    pub commit: Option<String>,
    pub commit_kind: Option<CommitKind>,
    pub facet: Option<(IssueFacet, String)>,
    pub notes: Vec<String>,
}

/// How a date expression reads inside "...pushed to the repository {period}".
pub fn period_phrase(surface: &str, range: &DateRange) -> String {
    let s = surface.trim();
    let lower = s.to_lowercase();
    let first = lower.split_whitespace().next().unwrap_or("");
    match first {
        "last" | "past" | "previous" => format!("in the {s}"),
        "this" | "today" | "yesterday" | "between" | "from" => s.to_string(),
        _ if range.start_day == range.end_day => format!("on {s}"),
        _ if lower.contains(" - ") || lower.contains(" to ") || lower.contains('–') => format!("between {s}"),
        _ => format!("in {s}"),
    }
}

fn commit_line(c: &CommitSummary) -> String {
    format!("{} — {} — {} — {}", c.hash, c.author_name, c.date, c.message)
}

fn plural(n: u64, one: &str, many: &str) -> String {
    if n == 1 {
        format!("{n} {one}")
    } else {
        format!("{n} {many}")
    }
}

fn bulleted(lines: impl IntoIterator<Item = String>) -> String {
    lines.into_iter().map(|l| format!("\n- {l}")).collect()
}

/// Fills the reply template of `template` with `result`.
pub fn render(result: &QueryResult, template: QueryKind, ctx: &RenderContext) -> Result<String, RenderError> {
    let mismatch = || RenderError::TemplateMismatch {
        template,
        result: result.kind.id().to_string(),
    };
    if result.kind != template {
        return Err(mismatch());
    }
    let file = ctx.file.as_deref().unwrap_or("that file");
    let period = ctx.period.as_deref().unwrap_or("in that period");
    let commits = || -> Result<Vec<String>, RenderError> {
        result
            .rows
            .iter()
            .map(|r| match r {
                Row::Commit(c) => Ok(commit_line(c)),
                _ => Err(mismatch()),
            })
            .collect()
    };
    let ranked = || -> Result<Vec<(String, u64)>, RenderError> {
        result
            .rows
            .iter()
            .map(|r| match r {
                Row::Ranked { name, count } => Ok((name.clone(), *count)),
                _ => Err(mismatch()),
            })
            .collect()
    };
    let single_count = || match result.rows.as_slice() {
        [Row::Count { count }] => Ok(*count),
        _ => Err(mismatch()),
    };

    let mut text = match template {
        QueryKind::Q1 => {
            let key = ctx.issue_key.as_deref().unwrap_or("that bug");
            let lines = commits()?;
            if lines.is_empty() {
                format!("No fixing commits found for {key}.")
            } else {
                format!("{key} was fixed by the following commits:{}", bulleted(lines))
            }
        }
        QueryKind::Q2 => {
            let rows = ranked()?;
            if rows.is_empty() {
                format!("No bug-fixing commits found for {file}.")
            } else {
                let names: Vec<String> = rows
                    .iter()
                    .map(|(n, c)| format!("{n} ({})", plural(*c, "bug", "bugs")))
                    .collect();
                format!("The developers who fixed the most bugs related to {file}: {}.", names.join(", "))
            }
        }
        QueryKind::Q3 => {
            let rows = ranked()?;
            if rows.is_empty() {
                "No bug-introducing files found in the repository.".to_string()
            } else {
                format!(
                    "The most bug-introducing files are:{}",
                    bulleted(rows.iter().map(|(p, c)| {
                        format!("{p} ({})", plural(*c, "bug-introducing commit", "bug-introducing commits"))
                    }))
                )
            }
        }
        QueryKind::Q4 => {
            let names = result
                .rows
                .iter()
                .map(|r| match r {
                    Row::Name { name } => Ok(name.clone()),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if names.is_empty() {
                format!("No modifications found for {file}.")
            } else {
                format!("{file} was modified by: {}.", names.join(", "))
            }
        }
        QueryKind::Q5 => {
            let commit = ctx.commit.as_deref().unwrap_or("that commit");
            let issues = result
                .rows
                .iter()
                .map(|r| match r {
                    Row::Issue(i) => Ok(format!("{} ({}, {})", i.key, i.status, i.priority)),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if issues.is_empty() {
                format!("No bugs found that were introduced by commit {commit}.")
            } else {
                format!("Commit {commit} introduced the following bugs:{}", bulleted(issues))
            }
        }
        QueryKind::Q6 => {
            let n = single_count()?;
            format!("There is a total of {n} commits that were pushed to the repository {period}")
        }
        QueryKind::Q7 => {
            let lines = commits()?;
            if lines.is_empty() {
                format!("No commits found {period}.")
            } else {
                format!("The following commits were pushed {period}:{}", bulleted(lines))
            }
        }
        QueryKind::Q8 => {
            let lines = commits()?;
            if lines.is_empty() {
                format!("No commits found for {file}.")
            } else {
                format!("The latest commits to {file} are:{}", bulleted(lines))
            }
        }
        QueryKind::Q9 => {
            let lines = commits()?;
            if lines.is_empty() {
                format!("No commits found for {file}.")
            } else {
                format!("The commits related to {file} are:{}", bulleted(lines))
            }
        }
        QueryKind::Q10 => {
            let issues = result
                .rows
                .iter()
                .map(|r| match r {
                    Row::Issue(i) => Ok(format!(
                        "{} ({}, {}, {})",
                        i.key,
                        plural(u64::from(i.watchers), "watcher", "watchers"),
                        i.status,
                        i.priority
                    )),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if issues.is_empty() {
                "No bugs found in the repository.".to_string()
            } else {
                format!("The most common bugs, by number of watchers, are:{}", bulleted(issues))
            }
        }
        QueryKind::Q11 => {
            let kind = match ctx.commit_kind {
                Some(CommitKind::Buggy) => "buggy",
                Some(CommitKind::Fixing) => "fixing",
                None => "matching",
            };
            let lines = commits()?;
            if lines.is_empty() {
                format!("No {kind} commits found {period}.")
            } else {
                format!("The {kind} commits {period} are:{}", bulleted(lines))
            }
        }
        QueryKind::Q12 => {
            let n = single_count()?;
            let (facet, value) = ctx
                .facet
                .as_ref()
                .map(|(f, v)| (if *f == IssueFacet::Status { "status" } else { "priority" }, v.as_str()))
                .unwrap_or(("status", "given"));
            format!("There are {} with {facet} {value}.", plural(n, "bug", "bugs"))
        }
        QueryKind::Q13 => {
            let lines = result
                .rows
                .iter()
                .map(|r| match r {
                    Row::FileAuthor {
                        path,
                        author_name,
                        hash,
                    } => Ok(format!("{path} was created by {author_name} in commit {hash}")),
                    _ => Err(mismatch()),
                })
                .collect::<Result<Vec<_>, _>>()?;
            match lines.len() {
                0 => format!("No author found for {file}."),
                1 => format!("{}.", lines[0]),
                _ => format!("Several files match {file}:{}", bulleted(lines)),
            }
        }
        QueryKind::Q14 => {
            let rows = ranked()?;
            if rows.is_empty() {
                "No unfixed bugs found.".to_string()
            } else {
                let names: Vec<String> = rows
                    .iter()
                    .map(|(n, c)| format!("{n} ({})", plural(*c, "unfixed bug", "unfixed bugs")))
                    .collect();
                format!("The developers with the most unfixed bugs: {}.", names.join(", "))
            }
        }
        QueryKind::Q15 => match result.rows.as_slice() {
            [Row::EmptyDenominator] => EMPTY_FIX_PERIOD_REPLY.to_string(),
            [Row::Percentage {
                percent,
                numerator,
                denominator,
            }] => format!(
                "{percent:.1}% of the bug-fixing commits {period} also introduced bugs ({numerator} of {denominator})."
            ),
            _ => return Err(mismatch()),
        },
    };

    if result.matched_paths.len() > 1 {
        text.push_str(&format!("\n(Matched files: {}.)", result.matched_paths.join(", ")));
    }
    if result.truncated {
        text.push_str(&format!("\n(Showing the top {} results.)", result.rows.len()));
    }
    for note in &ctx.notes {
        text.push_str(&format!("\n({note})"));
    }
    Ok(text)
}

fn query_error_reply(err: &QueryError) -> String {
    match err {
        QueryError::UnknownFile(name) => {
            format!("I could not find a file named {name} in the repository.")
        }
        QueryError::UnknownIssue(key) => format!("I could not find the issue {key} in the issue tracker."),
        QueryError::UnknownCommit(hash) => format!("I could not find a commit with hash {hash}."),
        QueryError::AmbiguousCommit(hash) => format!(
            "The commit hash {hash} matches more than one commit; could you please give a longer hash?"
        ),
        QueryError::InvalidK => "The number of results must be a positive number.".to_string(),
        QueryError::Szz(_) => TRANSIENT_ERROR_REPLY.to_string(),
    }
}

/// One line of the conversation log.
#[derive(Debug, Clone, Serialize)]
pub struct LogRecord<'a> {
    pub timestamp: DateTime<Utc>,
    pub utterance: &'a str,
    pub entities: &'a [Entity],
    pub intent: &'a str,
    pub confidence: f64,
    pub reply: &'a str,
    pub elapsed_ms: f64,
}

/// Append-only NDJSON log; writes are serialized.
#[derive(Debug)]
pub struct ConversationLog {
    file: Mutex<File>,
}

impl ConversationLog {
    pub fn open(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(ConversationLog {
            file: Mutex::new(file),
        })
    }

    pub fn append(&self, utterance: &str, reply: &BotReply) -> std::io::Result<()> {
        let record = LogRecord {
            timestamp: Utc::now(),
            utterance,
            entities: &reply.entities,
            intent: &reply.intent,
            confidence: reply.confidence,
            reply: &reply.text,
            elapsed_ms: reply.elapsed_ms,
        };
        let mut line = serde_json::to_vec(&record).map_err(std::io::Error::other)?;
        line.push(b'\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(&line)
    }
}

/// The assembled bot. Shareable across threads; `handle` takes `&self`.
#[derive(Debug)]
pub struct Bot {
    engine: QueryEngine,
    gazetteer: Gazetteer,
    classifier: IntentClassifier,
    log: Option<ConversationLog>,
}

impl Bot {
    pub fn new(engine: QueryEngine, classifier: IntentClassifier) -> Self {
        let gazetteer = Gazetteer::from_kb(engine.kb());
        Bot {
            engine,
            gazetteer,
            classifier,
            log: None,
        }
    }

    pub fn with_log(mut self, log: ConversationLog) -> Self {
        self.log = Some(log);
        self
    }

    pub fn engine(&self) -> &QueryEngine {
        &self.engine
    }

    pub fn classifier(&self) -> &IntentClassifier {
        &self.classifier
    }

    pub fn gazetteer(&self) -> &Gazetteer {
        &self.gazetteer
    }

    /// Answers one utterance. Log write failures are reported on stderr and
    /// never change the reply.
    pub fn handle(&self, utterance: &str, clock: NowClock) -> BotReply {
        let started = Instant::now();
        let mut reply = self.respond(utterance, clock);
        reply.elapsed_ms = started.elapsed().as_secs_f64() * 1000.0;
        if let Some(log) = &self.log {
            if let Err(err) = log.append(utterance, &reply) {
                eprintln!("conversation log write failed: {err}");
            }
        }
        reply
    }

    fn respond(&self, utterance: &str, clock: NowClock) -> BotReply {
        let reply = |text: String, intent: &str, confidence: f64, entities: Vec<Entity>, outcome| BotReply {
            text,
            payload: None,
            intent: intent.to_string(),
            confidence,
            entities,
            outcome,
            elapsed_ms: 0.0,
        };
        let (entities, ner_error) = match recognize(utterance, &self.gazetteer, clock) {
            Ok(entities) => (entities, None),
            Err(NerError::EmptyUtterance) => {
                return reply(FALLBACK_REPLY.to_string(), FALLBACK, 0.0, vec![], ReplyOutcome::Fallback)
            }
            Err(err @ NerError::AmbiguousHashPrefix(_)) => (Vec::new(), Some(err)),
        };

        let prediction = match self.classifier.classify(utterance, &entities) {
            Classification::Intent(p) => p,
            Classification::Fallback { nearest } => {
                let confidence = nearest.map(|p| p.score).unwrap_or(0.0);
                return reply(FALLBACK_REPLY.to_string(), FALLBACK, confidence, entities, ReplyOutcome::Fallback);
            }
        };
        let intent = prediction.intent_id.as_str();
        let confidence = prediction.score;

        if let Some(NerError::AmbiguousHashPrefix(prefix)) = ner_error {
            let text = query_error_reply(&QueryError::AmbiguousCommit(prefix));
            return reply(text, intent, confidence, entities, ReplyOutcome::Error);
        }

        let Some(spec) = intent_spec(intent) else {
            return reply(FALLBACK_REPLY.to_string(), FALLBACK, confidence, entities, ReplyOutcome::Fallback);
        };
        let Some(kind) = spec.query else {
            let text = if intent == GREETING { GREETING_REPLY } else { BOT_INFO_REPLY };
            return reply(text.to_string(), intent, confidence, entities, ReplyOutcome::Answer);
        };
        if let Some(missing) = spec.required_entities.iter().find(|r| !r.satisfied_by(&entities)) {
            let text = missing_entity_prompt(&missing.describe());
            return reply(text, intent, confidence, entities, ReplyOutcome::MissingEntity);
        }

        let (outcome, text, payload) = match self.execute(kind, &entities) {
            Ok((result, ctx)) => match render(&result, kind, &ctx) {
                Ok(text) => (ReplyOutcome::Answer, text, Some(result)),
                Err(err) => panic!("reply template bug: {err}"),
            },
            Err(err) => (ReplyOutcome::Error, query_error_reply(&err), None),
        };
        BotReply {
            text,
            payload,
            intent: intent.to_string(),
            confidence,
            entities,
            outcome,
            elapsed_ms: 0.0,
        }
    }

    fn execute(&self, kind: QueryKind, entities: &[Entity]) -> Result<(QueryResult, RenderContext), QueryError> {
        let mut ctx = RenderContext::default();
        let first = |t: EntityType| entities.iter().find(|e| e.entity_type == t);

        let dates: Vec<&Entity> = entities.iter().filter(|e| e.entity_type == E::DateRange).collect();
        let range = dates.first().and_then(|e| match &e.value {
            EntityValue::DateRange { range } => {
                ctx.period = Some(period_phrase(&e.surface, range));
                Some(*range)
            }
            _ => None,
        });
        let uses_dates = matches!(kind, QueryKind::Q6 | QueryKind::Q7 | QueryKind::Q11 | QueryKind::Q15);
        if uses_dates && dates.len() > 1 {
            ctx.notes.push(format!(
                "You mentioned several dates; I used the first one, \"{}\".",
                dates[0].surface
            ));
        }
        let file = first(E::File).and_then(|e| match &e.value {
            EntityValue::File { name, .. } => Some(name.clone()),
            _ => None,
        });
        ctx.file = file.clone();
        let k = first(E::K).and_then(|e| match e.value {
            EntityValue::K { k } => Some(k),
            _ => None,
        });
        let needs = |v: Option<String>| v.ok_or(QueryError::InvalidK);

        let engine = &self.engine;
        let result = match kind {
            QueryKind::Q1 => {
                let key = first(E::IssueKey).map(|e| e.surface.clone());
                ctx.issue_key = key.clone();
                engine.q1_fixing_commits(&needs(key)?)?
            }
            QueryKind::Q2 => engine.q2_top_bug_fixers(&needs(file)?)?,
            QueryKind::Q3 => engine.q3_most_bug_introducing_files(k.unwrap_or(DEFAULT_TOP_K))?,
            QueryKind::Q4 => engine.q4_modifiers_of_file(&needs(file)?)?,
            QueryKind::Q5 => {
                let hash = first(E::CommitHash).and_then(|e| match &e.value {
                    EntityValue::CommitHash { hash, .. } => Some(hash.clone()),
                    _ => None,
                });
                let hash = needs(hash)?;
                let full = engine.resolve_commit(&hash)?;
                ctx.commit = Some(full.clone());
                engine.q5_bugs_introduced_by_commit(&full)?
            }
            QueryKind::Q6 => engine.q6_commit_count(&range.ok_or(QueryError::InvalidK)?),
            QueryKind::Q7 => engine.q7_commits_in_range(&range.ok_or(QueryError::InvalidK)?),
            QueryKind::Q8 => engine.q8_latest_commits_to_file(&needs(file)?, k.unwrap_or(DEFAULT_LATEST_K))?,
            QueryKind::Q9 => engine.q9_commits_for_file(&needs(file)?)?,
            QueryKind::Q10 => engine.q10_most_common_bugs(k.unwrap_or(DEFAULT_TOP_K))?,
            QueryKind::Q11 => {
                let commit_kind = first(E::CommitKind)
                    .and_then(|e| match e.value {
                        EntityValue::CommitKind { commit_kind } => Some(commit_kind),
                        _ => None,
                    })
                    .ok_or(QueryError::InvalidK)?;
                ctx.commit_kind = Some(commit_kind);
                engine.q11_buggy_or_fixing_commits(&range.ok_or(QueryError::InvalidK)?, commit_kind)
            }
            QueryKind::Q12 => {
                let status = first(E::Status).and_then(|e| match &e.value {
                    EntityValue::Status { status } => Some(status.clone()),
                    _ => None,
                });
                let priority = first(E::Priority).and_then(|e| match &e.value {
                    EntityValue::Priority { priority } => Some(priority.clone()),
                    _ => None,
                });
                let (facet, value) = match (status, priority) {
                    (Some(s), Some(p)) => {
                        ctx.notes.push(format!(
                            "You mentioned both a status and a priority; I counted by status \"{s}\" and ignored priority \"{p}\"."
                        ));
                        (IssueFacet::Status, s)
                    }
                    (Some(s), None) => (IssueFacet::Status, s),
                    (None, Some(p)) => (IssueFacet::Priority, p),
                    (None, None) => return Err(QueryError::InvalidK),
                };
                ctx.facet = Some((facet, value.clone()));
                engine.q12_issue_count(facet, &value)
            }
            QueryKind::Q13 => engine.q13_author_of_file(&needs(file)?)?,
            QueryKind::Q14 => engine.q14_most_unfixed_bugs(k.unwrap_or(DEFAULT_TOP_K))?,
            QueryKind::Q15 => engine.q15_fix_inducing_percentage(&range.ok_or(QueryError::InvalidK)?),
        };
        Ok((result, ctx))
    }
}
