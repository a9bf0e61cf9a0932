//! `tfm` - campaign runner and report emitter for the fragmented-prompt
//! red-teaming harness.
//!
//! Exit codes: 0 ok, 2 config error, 3 dataset error, 4 incomplete log.

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use tfm_core::backend::{LexiconBackend, StructureTemplates};
use tfm_core::campaign::{
    read_log, report, run_campaign, run_variant, CampaignConfig, CampaignError, ReportError,
    ReportKind,
};
use tfm_core::csm::Budget;
use tfm_core::eval::Variant;
use tfm_core::lexicon::Lexicon;
use tfm_core::tbp::DEFAULT_FRAMES;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATASET: u8 = 3;
const EXIT_INCOMPLETE_LOG: u8 = 4;

#[derive(Parser)]
#[command(name = "tfm", version, about = "Fragmented-prompt red-teaming harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a campaign described by a config file.
    Run(RunArgs),
    /// Emit report tables from a result log.
    Report(ReportArgs),
    /// Transform one prompt with a variant pipeline and print it.
    Transform(TransformArgs),
    /// Lexicon utilities.
    Lexicon(LexiconArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Campaign config file (TOML or JSON).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Result log (JSONL) to aggregate.
    #[arg(long)]
    log: PathBuf,
    /// Report kind: main-table | ablation-table | seq-table | radar-csv.
    #[arg(long)]
    kind: String,
    /// Output directory.
    #[arg(long, default_value = "reports")]
    out: PathBuf,
}

#[derive(Args)]
struct TransformArgs {
    /// Variant pipeline id (tfm, without_tbp, without_csm, with_middle, revs_seq, direct).
    #[arg(long)]
    variant: String,
    /// Raw prompt text.
    #[arg(long)]
    prompt: String,
    /// Lexicon file.
    #[arg(long)]
    lexicon: PathBuf,
    /// Structure templates for the deterministic backend.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Frame count for structuring.
    #[arg(long, default_value_t = DEFAULT_FRAMES)]
    frames: u32,
    /// Substitution budget (a number, or "unlimited").
    #[arg(long, default_value = "4")]
    budget: String,
}

#[derive(Args)]
struct LexiconArgs {
    #[command(subcommand)]
    command: LexiconCommand,
}

#[derive(Subcommand)]
enum LexiconCommand {
    /// Validate a lexicon file and print a summary.
    Check { file: PathBuf },
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn campaign_exit_code(err: &CampaignError) -> u8 {
    match err {
        CampaignError::Config(_) => EXIT_CONFIG,
        CampaignError::Dataset(_) => EXIT_DATASET,
        CampaignError::Log(_) => EXIT_CONFIG,
        CampaignError::Report(ReportError::MissingVariant { .. })
        | CampaignError::Report(ReportError::EmptyLog) => EXIT_INCOMPLETE_LOG,
        CampaignError::Report(_) | CampaignError::Io(_) => 1,
    }
}

fn cmd_run(args: &RunArgs) -> ExitCode {
    let cfg = match CampaignConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(campaign_exit_code(&e), e),
    };
    match run_campaign(&cfg) {
        Ok(summary) => {
            println!(
                "campaign complete: {} tasks ({} resumed), {} written, {} successes, {} failures",
                summary.total_tasks,
                summary.skipped,
                summary.written,
                summary.successes,
                summary.failures
            );
            println!("log: {}", summary.log_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(campaign_exit_code(&e), e),
    }
}

fn cmd_report(args: &ReportArgs) -> ExitCode {
    let Some(kind) = ReportKind::parse(&args.kind) else {
        return fail(EXIT_CONFIG, format!("unknown report kind `{}`", args.kind));
    };
    let records = match read_log(&args.log) {
        Ok((_, records)) => records,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match report(&records, kind, &args.out) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e @ (ReportError::MissingVariant { .. } | ReportError::EmptyLog)) => {
            fail(EXIT_INCOMPLETE_LOG, e)
        }
        Err(e) => fail(1, e),
    }
}

fn cmd_transform(args: &TransformArgs) -> ExitCode {
    let Some(variant) = Variant::parse_id(&args.variant) else {
        return fail(EXIT_CONFIG, format!("unknown variant `{}`", args.variant));
    };
    let budget = if args.budget == "unlimited" {
        Budget::Unlimited
    } else {
        match args.budget.parse::<u32>() {
            Ok(n) => Budget::Limited(n),
            Err(_) => return fail(EXIT_CONFIG, format!("invalid budget `{}`", args.budget)),
        }
    };
    let lexicon = match Lexicon::load(&args.lexicon) {
        Ok(l) => Arc::new(l),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let templates = match &args.templates {
        Some(path) => match StructureTemplates::load(path) {
            Ok(t) => t,
            Err(e) => return fail(EXIT_CONFIG, e),
        },
        None => StructureTemplates::default(),
    };
    let backend = LexiconBackend::new(lexicon.clone(), templates);
    match run_variant(
        &args.prompt,
        variant,
        &backend,
        &lexicon,
        args.frames,
        budget,
        "default",
        "cli",
        "fixture",
    ) {
        Ok(out) => {
            println!("{}", out.text);
            println!("risk before: {:.4}", out.risk_before);
            println!("risk after:  {:.4}", out.risk_after);
            if !out.substitutions.is_empty() {
                println!("substitutions:");
                for s in &out.substitutions {
                    let marker = if s.fallback { " (fallback)" } else { "" };
                    println!(
                        "  frame {} unit {}: {} ({:.2}) -> {} ({:.2}){}",
                        s.frame_index,
                        s.unit_position,
                        s.original,
                        s.original_score,
                        s.chosen,
                        s.chosen_score,
                        marker
                    );
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_CONFIG, e),
    }
}

fn cmd_lexicon(args: &LexiconArgs) -> ExitCode {
    match &args.command {
        LexiconCommand::Check { file } => match Lexicon::load(file) {
            Ok(lexicon) => {
                let phrases = lexicon
                    .entries()
                    .keys()
                    .filter(|t| t.contains(' '))
                    .count();
                let candidates: usize =
                    lexicon.entries().values().map(|e| e.candidates.len()).sum();
                println!(
                    "ok: {} v{} - {} terms ({} phrases), {} candidates",
                    lexicon.name,
                    lexicon.version,
                    lexicon.len(),
                    phrases,
                    candidates
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(&args),
        Command::Report(args) => cmd_report(&args),
        Command::Transform(args) => cmd_transform(&args),
        Command::Lexicon(args) => cmd_lexicon(&args),
    }
}
