use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};

use patchgauge::analytics::{observations, render_report, Report, ReportFormat};
use patchgauge::fixtures::build_fixture_corpus;
use patchgauge::miner;
use patchgauge::pipeline::{
    campaign_tasks, import_tasks, Campaign, CampaignConfig, CampaignError, ConfigInvalid, Execution, ImportError,
    RunStore,
};
use patchgauge::triage::{serve, AppState, TriageError, TriageStore};

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Environment variable holding the triage bearer token.
const TOKEN_ENV: &str = "PATCHGAUGE_TRIAGE_TOKEN";

#[derive(Parser)]
#[command(name = "patchgauge", version, about = "Evaluate generated patches against C project history")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine each configured repository and add the tasks to the store.
    Mine {
        #[arg(long, short)]
        config: PathBuf,
        /// Only this project.
        #[arg(long)]
        project: Option<String>,
    },
    /// Add hand-built tasks from a JSON-lines file to the store.
    Import {
        #[arg(long, short)]
        config: PathBuf,
        file: PathBuf,
    },
    /// Evaluate every pending (task, provider) pair.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        /// Override campaign.workers.
        #[arg(long)]
        workers: Option<usize>,
        /// Run pairs one at a time regardless of workers.
        #[arg(long)]
        sequential: bool,
        /// Stop after this many new records.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Serve the triage HTTP API over the store's records.
    TriageServe {
        #[arg(long, short)]
        config: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
    /// Print success-rate tables and size tests from sealed verdicts.
    Report {
        #[arg(long, short)]
        config: PathBuf,
        /// text, csv or markdown
        #[arg(long, default_value = "text")]
        format: String,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Freeze the verdict log so reports can be produced.
    Seal {
        #[arg(long, short)]
        config: PathBuf,
        /// Seal even while reviewers disagree; disputed records stay unjudged.
        #[arg(long)]
        override_disputes: bool,
    },
    /// Write the fixture corpus (repositories, replay responses, config,
    /// manifest) into a directory.
    Fixtures { out: PathBuf },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigInvalid>() || cause.is::<ImportError>() {
            return EXIT_CONFIG;
        }
        if let Some(CampaignError::Config(_) | CampaignError::Import(_)) = cause.downcast_ref::<CampaignError>() {
            return EXIT_CONFIG;
        }
    }
    EXIT_PARTIAL
}

fn open_triage(config: &CampaignConfig) -> anyhow::Result<TriageStore> {
    let records = RunStore::open(&config.campaign.store)?.load_records()?;
    let store = TriageStore::open(&config.triage_dir(), records, config.triage_options())?;
    Ok(store)
}

fn mine(config: &CampaignConfig, only: Option<&str>) -> anyhow::Result<u8> {
    if let Some(p) = only {
        if config.project(p).is_none() {
            return Err(ConfigInvalid {
                message: format!("unknown project `{p}`"),
            }
            .into());
        }
    }
    config.probe_paths()?;
    let store = RunStore::open(&config.campaign.store)?;
    let mut code = 0;
    for p in config.projects.iter().filter(|p| only.is_none_or(|o| o == p.name)) {
        match miner::mine(&p.repo, &p.name, &config.criteria) {
            Ok(outcome) => {
                let added = store.add_tasks(&outcome.tasks)?;
                for s in &outcome.skipped {
                    tracing::debug!(project = %p.name, commit = %s.commit_id, reason = %s.reason, "skipped");
                }
                println!(
                    "{}: {} task(s) mined, {} new, {} commit(s) skipped",
                    p.name,
                    outcome.tasks.len(),
                    added,
                    outcome.skipped.len()
                );
            }
            Err(e) => {
                tracing::error!(project = %p.name, error = %e, "mining failed");
                code = EXIT_PARTIAL;
            }
        }
    }
    Ok(code)
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Mine { config, project } => {
            let config = CampaignConfig::load(&config)?;
            mine(&config, project.as_deref())
        }
        Command::Import { config, file } => {
            let config = CampaignConfig::load(&config)?;
            let tasks = import_tasks(&file, &config.criteria)?;
            if let Some(t) = tasks.iter().find(|t| config.project(&t.project).is_none()) {
                return Err(ConfigInvalid {
                    message: format!("task {} names unknown project `{}`", t.task_id, t.project),
                }
                .into());
            }
            config.probe_paths()?;
            let added = RunStore::open(&config.campaign.store)?.add_tasks(&tasks)?;
            println!("{} task(s) read, {added} new", tasks.len());
            Ok(0)
        }
        Command::Run {
            config,
            workers,
            sequential,
            limit,
        } => {
            let mut config = CampaignConfig::load(&config)?;
            if let Some(w) = workers {
                config.campaign.workers = w;
            }
            let mut campaign = Campaign::new(config)?;
            if sequential {
                campaign = campaign.with_execution(Execution::Sequential);
            }
            if let Some(n) = limit {
                campaign = campaign.with_limit(n);
            }
            let store = campaign.open_store()?;
            let tasks = campaign_tasks(campaign.config(), &store)?;
            let summary = campaign.run(&store, &tasks)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(if summary.infrastructure_failures > 0 { EXIT_PARTIAL } else { 0 })
        }
        Command::TriageServe { config, addr } => {
            let config = CampaignConfig::load(&config)?;
            let store = Arc::new(open_triage(&config)?);
            let token = std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty());
            if token.is_none() {
                tracing::warn!("{TOKEN_ENV} is not set, the API accepts unauthenticated requests");
            }
            let runtime = tokio::runtime::Runtime::new().context("starting runtime")?;
            runtime.block_on(serve(addr, AppState::new(store, token)))?;
            Ok(0)
        }
        Command::Report { config, format, out } => {
            let config = CampaignConfig::load(&config)?;
            let format: ReportFormat = format.parse().map_err(|e| ConfigInvalid {
                message: format!("{e}"),
            })?;
            let triage = open_triage(&config)?;
            let obs = observations(&triage);
            let report = Report::build(&obs, &config.campaign.bin_edges.spec(), &config.knowledge_cutoffs())?;
            let text = render_report(&report, format);
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::Seal {
            config,
            override_disputes,
        } => {
            let config = CampaignConfig::load(&config)?;
            let triage = open_triage(&config)?;
            match triage.seal(override_disputes) {
                Ok(info) => {
                    println!("{}", serde_json::to_string_pretty(&info)?);
                    Ok(0)
                }
                Err(e @ TriageError::OpenDisagreements(_)) => {
                    for id in triage.disputed() {
                        eprintln!("disputed: {id}");
                    }
                    Err(e.into())
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::Fixtures { out } => {
            let manifest = build_fixture_corpus(&out)?;
            println!(
                "{} case(s), {} expectation(s) written to {}",
                manifest.cases.len(),
                manifest.expectations().count(),
                out.display()
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
