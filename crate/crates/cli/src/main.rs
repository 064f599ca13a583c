//! manbench: curate datasets, run collective false-memory experiments,
//! resume and report on them, and build fine-tuning datasets from finished
//! runs.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use manbench_cli::config::{RawConfig, RawModel};
use manbench_cli::{
    build_backend, plan_units, read_ledger, run_experiment, write_reports, ReportFormat,
    RunConfig, RunMode, RunnerError, Unit,
};
use manbench_core::dataset::{distractor_selection_prompt, select_distractor_opts};
use manbench_core::protocols::templates;
use manbench_core::{
    assign_identities, build_baseline_prompt, build_cooperative_record, build_resilience_record,
    emit_sft_dataset, load_task, write_task, DefenseError, Protocol, ProtocolSession, Question,
    SftKind, SftRecord,
};

#[derive(Parser)]
#[command(
    name = "manbench",
    version,
    about = "Measure and defend against collective false memories in multi-agent LLM systems"
)]
struct Cli {
    /// TOML run configuration; CLI flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for the content-addressed response cache.
    #[arg(long, global = true, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    /// Maximum units in flight.
    #[arg(long, global = true, value_name = "N")]
    max_parallel: Option<usize>,
    /// Seed for question subsampling and dataset shuffles.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Plan and print the work without calling any backend.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick the most plausible wrong option for every question missing one.
    Curate(CurateArgs),
    /// Execute a configured experiment run.
    Run(RunArgs),
    /// Complete the missing units of an existing run.
    Resume(ResumeArgs),
    /// Aggregate a run's ledger into report files.
    Report(ReportArgs),
    /// Run the influence protocols behind a defense wrapper.
    Defend(RunArgs),
    /// Build a fine-tuning dataset from a finished run's ledger.
    SftGen(SftArgs),
}

#[derive(Args)]
struct CurateArgs {
    /// Task file to curate.
    #[arg(long)]
    input: PathBuf,
    /// Where to write the curated copy.
    #[arg(long)]
    output: PathBuf,
    /// Selector model; `scripted:echo-target` picks deterministically offline.
    #[arg(long, default_value = "scripted:echo-target")]
    model: String,
    /// Selection retries before falling back (or failing under --strict).
    #[arg(long, default_value_t = 2)]
    max_retries: u32,
    /// Fail questions whose selection never resolves instead of using the
    /// edit-distance fallback.
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long)]
    run_id: Option<String>,
    /// Task files, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    datasets: Vec<PathBuf>,
    /// Protocols to run (B, GS, GL, RS, RL, C), comma separated.
    #[arg(long, value_delimiter = ',')]
    protocols: Vec<String>,
    /// Group sizes to run each influence protocol at.
    #[arg(long, value_delimiter = ',')]
    group_sizes: Vec<usize>,
    #[arg(long)]
    subject_model: Option<String>,
    #[arg(long)]
    narrator_model: Option<String>,
    /// none, anchoring, or scrutiny.
    #[arg(long)]
    defense: Option<String>,
    /// Cap on questions drawn (seeded subsample).
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    runs_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ResumeArgs {
    #[arg(long)]
    run_id: String,
    #[arg(long)]
    runs_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    run_id: String,
    #[arg(long)]
    runs_dir: Option<PathBuf>,
    /// json, csv, markdown; default all three.
    #[arg(long, value_delimiter = ',')]
    format: Vec<String>,
}

#[derive(Args)]
struct SftArgs {
    /// Finished (typically defended) run to harvest.
    #[arg(long)]
    run_id: String,
    #[arg(long)]
    runs_dir: Option<PathBuf>,
    /// Output JSONL path.
    #[arg(long)]
    output: PathBuf,
    /// resilience:cooperative mix, e.g. 1:1 or 2:1.
    #[arg(long, default_value = "1:1")]
    ratio: String,
    /// Generator model for cooperative records; defaults to the run's
    /// narrator.
    #[arg(long)]
    narrator_model: Option<String>,
    /// Guidance group size for cooperative records.
    #[arg(long, default_value_t = 5)]
    group_size: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_secs()
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Curate(args) => curate(&cli, args),
        Command::Run(args) => run(&cli, args, None),
        Command::Defend(args) => run(&cli, args, Some("anchoring")),
        Command::Resume(args) => resume(&cli, args),
        Command::Report(args) => report(args),
        Command::SftGen(args) => sft_gen(&cli, args),
    }
}

/// Layers defaults <- config file <- CLI flags into a resolved run config.
fn resolve_config(
    cli: &Cli,
    args: &RunArgs,
    default_defense: Option<&str>,
) -> Result<RunConfig, RunnerError> {
    let base = match &cli.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let over = RawConfig {
        run_id: args.run_id.clone(),
        datasets: (!args.datasets.is_empty()).then(|| args.datasets.clone()),
        protocols: (!args.protocols.is_empty()).then(|| args.protocols.clone()),
        group_size: None,
        group_sizes: (!args.group_sizes.is_empty()).then(|| args.group_sizes.clone()),
        subject: args.subject_model.clone().map(|model| RawModel {
            model: Some(model),
            temperature: None,
            max_tokens: None,
        }),
        narrator: args.narrator_model.clone().map(|model| RawModel {
            model: Some(model),
            temperature: None,
            max_tokens: None,
        }),
        defense: args.defense.clone().or_else(|| default_defense.map(String::from)),
        question_limit: args.limit,
        seed: cli.seed,
        runs_dir: args.runs_dir.clone(),
        cache_dir: cli.cache_dir.clone(),
        max_parallel: cli.max_parallel,
    };
    RawConfig::merge(base, over).finish()
}

fn run(cli: &Cli, args: &RunArgs, default_defense: Option<&str>) -> Result<ExitCode> {
    let config = resolve_config(cli, args, default_defense)?;
    if cli.dry_run {
        dry_run(&config)?;
        return Ok(ExitCode::SUCCESS);
    }
    finish_run(run_experiment(&config, RunMode::Fresh)?)
}

fn resume(cli: &Cli, args: &ResumeArgs) -> Result<ExitCode> {
    let runs_dir = args.runs_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let mut config = RunConfig::read_snapshot(&runs_dir.join(&args.run_id))?;
    config.runs_dir = runs_dir;
    // Operational knobs may change across resumes; they are outside the digest.
    if let Some(dir) = &cli.cache_dir {
        config.cache_dir = Some(dir.clone());
    }
    if let Some(n) = cli.max_parallel {
        config.max_parallel = n;
    }
    if cli.dry_run {
        dry_run(&config)?;
        return Ok(ExitCode::SUCCESS);
    }
    finish_run(run_experiment(&config, RunMode::Resume)?)
}

fn finish_run(summary: manbench_cli::RunSummary) -> Result<ExitCode> {
    println!(
        "run complete: {} unit(s) succeeded, {} failed, {} already done (ledger: {})",
        summary.succeeded,
        summary.failed.len(),
        summary.already_complete,
        summary.ledger.display()
    );
    if summary.all_succeeded() {
        Ok(ExitCode::SUCCESS)
    } else {
        for (unit, error) in &summary.failed {
            eprintln!("failed {unit}: {error}");
        }
        Ok(ExitCode::FAILURE)
    }
}

/// Prints the planned units and, per protocol, the first prompt of its
/// first unit, without touching any backend.
fn dry_run(config: &RunConfig) -> Result<()> {
    let questions = manbench_cli::experiment::load_questions(config)?;
    let units = plan_units(config, &questions, &Default::default());
    println!("dry run: {} unit(s) over {} question(s)", units.len(), questions.len());
    for unit in &units {
        println!("  {}", unit.describe());
    }
    let mut shown: Vec<Protocol> = Vec::new();
    for unit in &units {
        if shown.contains(&unit.protocol) {
            continue;
        }
        shown.push(unit.protocol);
        println!("\n--- opening prompt for {} ---", unit.describe());
        println!("{}", opening_prompt(unit)?);
    }
    Ok(())
}

/// The first prompt a unit would send: the subject query for baseline, the
/// seat-1 narrator generation prompt for every group protocol.
fn opening_prompt(unit: &Unit) -> Result<String> {
    let q = &unit.question;
    if unit.protocol == Protocol::B {
        return Ok(build_baseline_prompt(q)
            .iter()
            .map(|t| t.content.clone())
            .collect::<Vec<_>>()
            .join("\n\n"));
    }
    let identities = assign_identities(unit.group_size.max(1), &q.task)?;
    let first = &identities[0];
    if unit.protocol == Protocol::C {
        return Ok(templates::guidance_generation_prompt(first, q, &[]));
    }
    let target = q.distractor_text().unwrap_or("<no distractor curated yet>");
    Ok(if unit.protocol.is_role_based() {
        templates::role_generation_prompt(manbench_core::Archetype::E, first, q, target, &[])
    } else {
        templates::generic_generation_prompt(first, q, target)
    })
}

fn report(args: &ReportArgs) -> Result<ExitCode> {
    let runs_dir = args.runs_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let run_dir = runs_dir.join(&args.run_id);
    let formats = if args.format.is_empty() {
        ReportFormat::ALL.to_vec()
    } else {
        args.format
            .iter()
            .map(|f| f.parse::<ReportFormat>().map_err(|e| anyhow::anyhow!(e)))
            .collect::<Result<Vec<_>>>()?
    };
    let written = write_reports(&run_dir, &formats)?;
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn curate(cli: &Cli, args: &CurateArgs) -> Result<ExitCode> {
    let mut questions = load_task(&args.input)?;
    if questions.is_empty() {
        bail!("{} contains no questions", args.input.display());
    }
    let task = questions[0].task.clone();
    let pending: Vec<usize> = questions
        .iter()
        .enumerate()
        .filter(|(_, q)| q.distractor_label.is_none())
        .map(|(i, _)| i)
        .collect();
    println!(
        "curating {}: {} question(s), {} missing a distractor",
        args.input.display(),
        questions.len(),
        pending.len()
    );
    if cli.dry_run {
        for i in pending {
            println!("\n--- selection prompt for {} ---", questions[i].id);
            println!("{}", distractor_selection_prompt(&questions[i]));
        }
        return Ok(ExitCode::SUCCESS);
    }
    let backend = build_backend(&args.model, cli.cache_dir.as_deref())?;
    let params = manbench_core::CompletionParams::new(&args.model);
    let mut failed = 0usize;
    for i in pending {
        match select_distractor_opts(
            &questions[i],
            backend.as_ref(),
            &params,
            args.max_retries,
            !args.strict,
        ) {
            Ok(label) => questions[i].distractor_label = Some(label),
            Err(e) => {
                log::error!("{}: {e}", questions[i].id);
                failed += 1;
            }
        }
    }
    write_task(&args.output, &task, &questions)?;
    println!("wrote {}", args.output.display());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn parse_ratio(raw: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = raw.split(':').collect();
    let [res, coop] = parts.as_slice() else {
        bail!("ratio '{raw}' is not of the form R:C");
    };
    let res: usize = res.trim().parse().context("ratio resilience side")?;
    let coop: usize = coop.trim().parse().context("ratio cooperative side")?;
    if res == 0 || coop == 0 {
        bail!("ratio sides must both be at least 1");
    }
    Ok((res, coop))
}

fn sft_gen(cli: &Cli, args: &SftArgs) -> Result<ExitCode> {
    let ratio = parse_ratio(&args.ratio)?;
    let runs_dir = args.runs_dir.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let run_dir = runs_dir.join(&args.run_id);
    let mut source = RunConfig::read_snapshot(&run_dir)?;
    source.runs_dir = runs_dir;
    let entries = read_ledger(&manbench_cli::ledger_path(&run_dir))?;
    if entries.is_empty() {
        bail!("run '{}' has an empty ledger", args.run_id);
    }
    let questions: BTreeMap<String, Question> = manbench_cli::experiment::load_questions(&source)?
        .into_iter()
        .map(|q| (q.id.clone(), q))
        .collect();

    if cli.dry_run {
        let defended = entries.iter().filter(|e| e.outcome.defense.is_some()).count();
        let baseline = entries.iter().filter(|e| e.outcome.protocol == Protocol::B).count();
        println!(
            "dry run: {} defended outcome(s) for resilience, {} baseline outcome(s) for cooperative records, ratio {}:{}",
            defended, baseline, ratio.0, ratio.1
        );
        return Ok(ExitCode::SUCCESS);
    }

    let narrator_model =
        args.narrator_model.clone().unwrap_or_else(|| source.narrator.model.clone());
    let subject = build_backend(&source.subject.model, cli.cache_dir.as_deref())?;
    let narrator = build_backend(&narrator_model, cli.cache_dir.as_deref())?;
    let mut narrator_params = source.narrator.params();
    narrator_params.model = narrator_model;
    let session = ProtocolSession {
        subject: subject.as_ref(),
        narrator: narrator.as_ref(),
        subject_params: source.subject.params(),
        narrator_params,
    };

    let mut records: Vec<SftRecord> = Vec::new();
    let mut skipped = 0usize;
    for entry in entries.iter().filter(|e| e.outcome.defense.is_some()) {
        let Some(q) = questions.get(&entry.outcome.question_id) else {
            log::warn!("{}: not in the configured datasets, skipping", entry.outcome.question_id);
            skipped += 1;
            continue;
        };
        match build_resilience_record(&entry.outcome, q) {
            Some(record) => records.push(record),
            None => skipped += 1,
        }
    }
    let resilience = records.len();

    for entry in entries.iter().filter(|e| e.outcome.protocol == Protocol::B) {
        let Some(q) = questions.get(&entry.outcome.question_id) else {
            log::warn!("{}: not in the configured datasets, skipping", entry.outcome.question_id);
            skipped += 1;
            continue;
        };
        let kind = if entry.outcome.correct { SftKind::Enriching } else { SftKind::Corrective };
        match build_cooperative_record(kind, q, &entry.outcome, &session, args.group_size) {
            Ok(record) => records.push(record),
            Err(DefenseError::Eligibility { detail, .. }) => {
                log::warn!("{}: ineligible ({detail})", entry.outcome.question_id);
                skipped += 1;
            }
            Err(e) => {
                log::error!("{}: {e}", entry.outcome.question_id);
                skipped += 1;
            }
        }
    }
    let cooperative = records.len() - resilience;
    println!(
        "collected {resilience} resilience and {cooperative} cooperative record(s) ({skipped} skipped)"
    );

    let summary = emit_sft_dataset(&records, &args.output, ratio)?;
    println!(
        "wrote {} line(s) to {} ({} resilience, {} corrective, {} enriching; dropped {} + {})",
        summary.written,
        args.output.display(),
        summary.resilience,
        summary.corrective,
        summary.enriching,
        summary.dropped_resilience,
        summary.dropped_cooperative
    );
    Ok(ExitCode::SUCCESS)
}
