use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use msrbot::config::{load_classifier, load_engine, ServiceConfig, DEFAULT_TRAINING, DEFAULT_VECTORS};
use msrbot::service::{self, AppState};
use msrbot::{load_bot, repl};
use msrbot_core::gitlog::{parse_git_log, GIT_LOG_ARGS};
use msrbot_core::ner::{evaluate_ner, NerCase};
use msrbot_core::nlu::{evaluate_nlu, read_training_file};
use msrbot_core::query::{CommitKind, IssueFacet, DEFAULT_LATEST_K, DEFAULT_TOP_K};
use msrbot_core::{
    link_commits_to_issues, parse_commit_export, parse_issue_export, resolve_date, szz, Gazetteer,
    KnowledgeBase, NowClock, QueryKind,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "msrbot", version, about = "Answers natural-language questions about a repository's history and bugs")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a knowledge base from a commit export and an issue export.
    Ingest {
        #[arg(long)]
        git_export: PathBuf,
        #[arg(long)]
        issues: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the commit export of a local Git repository as NDJSON.
    GitExport {
        #[arg(long, default_value = ".")]
        repo: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run SZZ and store fixing / fix-inducing commits in the knowledge base.
    Mine {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        no_report_date_filter: bool,
    },
    /// Start the HTTP chat service.
    Serve(ResourceArgs),
    /// Interactive terminal chat.
    Chat(ResourceArgs),
    /// Answer a single question.
    Ask {
        text: String,
        #[command(flatten)]
        resources: ResourceArgs,
        #[arg(long)]
        json: bool,
    },
    /// Score the recognizer on a labeled file (exact-span precision/recall/F1).
    EvalNer {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value = "data/ner/labeled.json")]
        labeled: PathBuf,
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        #[arg(long)]
        json: bool,
    },
    /// Top-1 intent accuracy on a held-out paraphrase file.
    EvalNlu {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long, default_value = DEFAULT_VECTORS)]
        vectors: PathBuf,
        #[arg(long, default_value = DEFAULT_TRAINING)]
        nlu: PathBuf,
        #[arg(long, default_value = "data/nlu/heldout.json")]
        heldout: PathBuf,
        #[arg(long, default_value_t = msrbot_core::nlu::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        now: Option<DateTime<Utc>>,
        #[arg(long)]
        json: bool,
    },
    /// Run one of the fifteen queries directly and print JSON.
    Query(QueryArgs),
}

#[derive(Args, Clone)]
struct ResourceArgs {
    /// TOML configuration file.
    #[arg(long, env = "MSRBOT_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    nlu: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    fixed_now: Option<DateTime<Utc>>,
    #[arg(long)]
    no_report_date_filter: bool,
}

impl ResourceArgs {
    fn into_config(self) -> Result<ServiceConfig> {
        let mut config = match (&self.config, &self.kb) {
            (Some(path), _) => ServiceConfig::from_toml_file(path)?,
            (None, Some(kb)) => ServiceConfig::new(kb),
            (None, None) => bail!("either --config (or MSRBOT_CONFIG) or --kb is required"),
        };
        if let Some(kb) = self.kb {
            config.kb_path = kb;
        }
        if let Some(v) = self.vectors {
            config.vectors_path = v;
        }
        if let Some(n) = self.nlu {
            config.nlu_path = n;
        }
        if let Some(t) = self.threshold {
            config.threshold = t;
        }
        if let Some(p) = self.port {
            config.port = p;
        }
        if self.log.is_some() {
            config.log_path = self.log;
        }
        if self.fixed_now.is_some() {
            config.fixed_now = self.fixed_now;
        }
        if self.no_report_date_filter {
            config.szz_filter_report_date = false;
        }
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Buggy,
    Fixing,
}

#[derive(Args)]
struct QueryArgs {
    /// q1 .. q15
    id: String,
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    file: Option<String>,
    #[arg(long)]
    issue: Option<String>,
    #[arg(long)]
    commit: Option<String>,
    /// Date expression, e.g. "last week" or "June 2018".
    #[arg(long)]
    date: Option<String>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    status: Option<String>,
    #[arg(long)]
    priority: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    now: Option<DateTime<Utc>>,
    #[arg(long)]
    no_report_date_filter: bool,
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn clock(now: Option<DateTime<Utc>>) -> NowClock {
    now.map(NowClock::fixed).unwrap_or_else(NowClock::system)
}

fn ingest(git_export: &Path, issues: &Path, out: &Path) -> Result<()> {
    let commits = parse_commit_export(open_reader(git_export)?)
        .with_context(|| format!("in {}", git_export.display()))?;
    let issues = parse_issue_export(open_reader(issues)?).with_context(|| format!("in {}", issues.display()))?;
    let report = link_commits_to_issues(&commits, &issues);
    let (n_commits, n_issues, n_links) = (commits.len(), issues.len(), report.links.len());
    let kb = KnowledgeBase::from_parts(commits, issues, report.links)?;
    kb.write(out)?;
    println!(
        "ingested {n_commits} commits, {n_issues} issues, {n_links} links ({} unmatched issue mentions) into {}",
        report.ignored_mentions,
        out.display()
    );
    if !kb.boundary_parents().is_empty() {
        println!("{} parent commits lie outside the export", kb.boundary_parents().len());
    }
    Ok(())
}

fn git_export(repo: &Path, out: Option<&Path>) -> Result<()> {
    let output = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(GIT_LOG_ARGS)
        .output()
        .context("cannot run git")?;
    if !output.status.success() {
        bail!("git log failed: {}", String::from_utf8_lossy(&output.stderr).trim());
    }
    let commits = parse_git_log(&String::from_utf8_lossy(&output.stdout))?;
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(io::BufWriter::new(
            File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    for commit in &commits {
        serde_json::to_writer(&mut sink, commit)?;
        writeln!(sink)?;
    }
    sink.flush()?;
    eprintln!("exported {} commits", commits.len());
    Ok(())
}

fn mine(kb_path: &Path, filter: bool) -> Result<()> {
    let kb = KnowledgeBase::open(kb_path)?;
    let mined = szz::mine(&kb, filter)?;
    println!(
        "{} fixing commits, {} fix-inducing records (report-date filter {})",
        mined.fixes.len(),
        mined.inducing.len(),
        if filter { "on" } else { "off" }
    );
    kb.with_mined(mined).write(kb_path)?;
    Ok(())
}

fn eval_ner(kb: &Path, labeled: &Path, now: Option<DateTime<Utc>>, json: bool) -> Result<()> {
    let kb = KnowledgeBase::open(kb)?;
    let cases: Vec<NerCase> = serde_json::from_reader(open_reader(labeled)?)
        .with_context(|| format!("invalid labeled file {}", labeled.display()))?;
    let score = evaluate_ner(&cases, &Gazetteer::from_kb(&kb), clock(now));
    if json {
        return print_json(&score);
    }
    println!("utterances: {}", cases.len());
    println!(
        "precision {:.3}  recall {:.3}  f1 {:.3}  (tp {}, fp {}, fn {})",
        score.precision, score.recall, score.f1, score.true_positives, score.false_positives, score.false_negatives
    );
    for e in &score.errors {
        println!("  mismatch: {e}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval_nlu(
    kb: &Path,
    vectors: &Path,
    nlu: &Path,
    heldout: &Path,
    threshold: f64,
    now: Option<DateTime<Utc>>,
    json: bool,
) -> Result<()> {
    let kb = KnowledgeBase::open(kb)?;
    let classifier = load_classifier(vectors, nlu, threshold)?;
    let heldout = read_training_file(open_reader(heldout)?)?;
    let report = evaluate_nlu(&classifier, &heldout, &Gazetteer::from_kb(&kb), clock(now));
    if json {
        return print_json(&report);
    }
    println!("top-1 accuracy {:.3} ({}/{})", report.accuracy, report.correct, report.total);
    println!("{:<10} {:>8}", "intent", "accuracy");
    for (intent, (correct, total)) in &report.per_intent {
        println!("{intent:<10} {correct:>3}/{total:<3}");
    }
    println!("confusion (gold -> predicted: count)");
    for (gold, row) in &report.confusion {
        let cells: Vec<String> = row.iter().map(|(p, n)| format!("{p}:{n}")).collect();
        println!("  {gold:<10} {}", cells.join("  "));
    }
    for (gold, predicted, utterance) in &report.misses {
        println!("  miss: {gold} -> {predicted}: {utterance}");
    }
    Ok(())
}

fn run_query(args: QueryArgs) -> Result<()> {
    let kind = QueryKind::from_id(&args.id.to_uppercase())
        .with_context(|| format!("unknown query {:?}; expected q1..q15", args.id))?;
    let engine = load_engine(&args.kb, !args.no_report_date_filter)?;
    let need = |v: Option<String>, flag: &str| v.with_context(|| format!("{} needs --{flag}", kind.id()));
    let now = clock(args.now).now;
    let range = |expr: Option<String>| -> Result<_> { Ok(resolve_date(&need(expr, "date")?, now)?) };
    let result = match kind {
        QueryKind::Q1 => engine.q1_fixing_commits(&need(args.issue, "issue")?)?,
        QueryKind::Q2 => engine.q2_top_bug_fixers(&need(args.file, "file")?)?,
        QueryKind::Q3 => engine.q3_most_bug_introducing_files(args.k.unwrap_or(DEFAULT_TOP_K))?,
        QueryKind::Q4 => engine.q4_modifiers_of_file(&need(args.file, "file")?)?,
        QueryKind::Q5 => {
            let full = engine.resolve_commit(&need(args.commit, "commit")?)?;
            engine.q5_bugs_introduced_by_commit(&full)?
        }
        QueryKind::Q6 => engine.q6_commit_count(&range(args.date)?),
        QueryKind::Q7 => engine.q7_commits_in_range(&range(args.date)?),
        QueryKind::Q8 => engine.q8_latest_commits_to_file(&need(args.file, "file")?, args.k.unwrap_or(DEFAULT_LATEST_K))?,
        QueryKind::Q9 => engine.q9_commits_for_file(&need(args.file, "file")?)?,
        QueryKind::Q10 => engine.q10_most_common_bugs(args.k.unwrap_or(DEFAULT_TOP_K))?,
        QueryKind::Q11 => {
            let kind = match args.kind.context("q11 needs --kind buggy|fixing")? {
                KindArg::Buggy => CommitKind::Buggy,
                KindArg::Fixing => CommitKind::Fixing,
            };
            engine.q11_buggy_or_fixing_commits(&range(args.date)?, kind)
        }
        QueryKind::Q12 => match (args.status, args.priority) {
            (Some(s), _) => engine.q12_issue_count(IssueFacet::Status, &s),
            (None, Some(p)) => engine.q12_issue_count(IssueFacet::Priority, &p),
            (None, None) => bail!("q12 needs --status or --priority"),
        },
        QueryKind::Q13 => engine.q13_author_of_file(&need(args.file, "file")?)?,
        QueryKind::Q14 => engine.q14_most_unfixed_bugs(args.k.unwrap_or(DEFAULT_TOP_K))?,
        QueryKind::Q15 => engine.q15_fix_inducing_percentage(&range(args.date)?),
    };
    print_json(&result)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Ingest { git_export: g, issues, out } => ingest(&g, &issues, &out),
        Cmd::GitExport { repo, out } => git_export(&repo, out.as_deref()),
        Cmd::Mine { kb, no_report_date_filter } => mine(&kb, !no_report_date_filter),
        Cmd::Serve(resources) => {
            let config = resources.into_config()?;
            let bot = Arc::new(load_bot(&config)?);
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(service::serve(AppState::new(bot, config.fixed_now), config.port))
        }
        Cmd::Chat(resources) => {
            let config = resources.into_config()?;
            let bot = load_bot(&config)?;
            repl::run(&bot, || config.clock(), io::stdin().lock(), io::stdout().lock())?;
            Ok(())
        }
        Cmd::Ask { text, resources, json } => {
            let config = resources.into_config()?;
            let bot = load_bot(&config)?;
            let reply = bot.handle(&text, config.clock());
            if json {
                print_json(&reply)
            } else {
                println!("{}", reply.text);
                Ok(())
            }
        }
        Cmd::EvalNer { kb, labeled, now, json } => eval_ner(&kb, &labeled, now, json),
        Cmd::EvalNlu { kb, vectors, nlu, heldout, threshold, now, json } => {
            eval_nlu(&kb, &vectors, &nlu, &heldout, threshold, now, json)
        }
        Cmd::Query(args) => run_query(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
