//! Repository question-answering bot: knowledge base, SZZ miner, query
//! engine, entity recognizer, intent classifier and dialogue manager.

pub mod dates;
pub mod dialogue;
pub mod gitlog;
pub mod ingest;
pub mod model;
pub mod ner;
pub mod nlu;
pub mod query;
pub mod store;
pub mod szz;

pub use dates::{resolve_date, DateError, DateRange};
pub use ingest::{link_commits_to_issues, parse_commit_export, parse_issue_export, IngestError};
pub use model::{ChangeType, Commit, CommitIssueLink, FileChange, Hunk, Issue, IssueType};
pub use query::{QueryEngine, QueryError, QueryKind, QueryResult, Row};
pub use store::{build_store, KnowledgeBase, StoreError};
pub use szz::{compute_inducing, identify_fixing_commits, replay_line_origins, FixRecord, InducingRecord};
pub use dialogue::{Bot, BotReply, ConversationLog, ReplyOutcome, FALLBACK_REPLY};
pub use ner::{recognize, Entity, EntityType, EntityValue, Gazetteer, NowClock};
pub use nlu::{Classification, IntentClassifier, WordVectorTable};
