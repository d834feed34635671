//! The `inspectkit` command line.
//!
//! [`run`] parses arguments, writes the report to `out` and diagnostics to
//! `err`, and returns the process exit code: 0 on success, 1 when the data
//! has violations (or a log does not replay), 2 on usage and I/O errors.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::SystemTime;

use clap::{Args, Parser, Subcommand};
use inspectkit_core::advisor::{benchmark, benchmark_report, check_compliance, DesiredRangeTable};
use inspectkit_core::bbn::{build_model, recommend, CptModel, Evidence, LevelScheme, ParamNode};
use inspectkit_core::dataset::{load_dataset, validate, Phase, ProjectDataset, SizeCategory};
use inspectkit_core::lifecycle::{dp_centre_summary, parse_log, replay_all};
use inspectkit_core::metrics::{di_series, pattern_summary, project_metrics, DiLevel};
use inspectkit_core::report::{OutputFormat, Report};
use inspectkit_core::tables::reproduce_table;
use inspectkit_core::Error;

mod reports;

pub const EXIT_OK: u8 = 0;
pub const EXIT_DATA: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "inspectkit", version, about = "Inspection effectiveness analytics")]
struct Cli {
    /// Report format: text, csv or structured.
    #[arg(long, global = true, default_value = "text", value_parser = parse_format)]
    format: OutputFormat,

    /// Add a generation timestamp to the report.
    #[arg(long, global = true)]
    stamp: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a dataset against its cross-field rules.
    Validate { file: PathBuf },
    /// Per-phase DI, IPM, time and defect shares.
    Metrics {
        file: PathBuf,
        #[arg(long)]
        project: Option<String>,
    },
    /// Recompute a published table and list the cells that differ.
    Tables {
        file: PathBuf,
        #[arg(long)]
        table: u8,
    },
    /// Severity share spans per phase and size class.
    Pattern { file: PathBuf },
    /// Compliance with the desired ranges, or a benchmark without --project.
    Advise {
        file: PathBuf,
        #[arg(long)]
        project: Option<String>,
        /// Desired-range table to use instead of the built-in one.
        #[arg(long)]
        ranges: Option<PathBuf>,
    },
    /// Naive-Bayes what-if models.
    #[command(subcommand)]
    Bbn(BbnCommand),
    /// Deliverable inspection workflows.
    #[command(subcommand)]
    Lifecycle(LifecycleCommand),
    /// Plot data series.
    #[command(subcommand)]
    Plot(PlotCommand),
    /// Serve the HTTP API until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum BbnCommand {
    /// Estimate a model for one (phase, size) slice and write it as JSON.
    Build {
        file: PathBuf,
        #[arg(long, value_parser = parse_phase)]
        phase: Phase,
        #[arg(long, value_parser = parse_size)]
        size: SizeCategory,
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Posterior over DI levels given parameter levels.
    Query {
        model: PathBuf,
        /// Comma-separated node=level pairs, e.g. num_inspectors=M.
        #[arg(long, default_value = "")]
        evidence: String,
    },
    /// Rank parameter settings by posterior mass on the target DI levels.
    Recommend {
        model: PathBuf,
        /// Comma-separated DI levels, e.g. desirable,excellent.
        #[arg(long)]
        target: String,
        /// Comma-separated nodes whose levels are enumerated.
        #[arg(long, default_value = "num_inspectors,inspection_time_pct")]
        grid: String,
    },
}

#[derive(Debug, Subcommand)]
enum LifecycleCommand {
    /// Replay a JSON-lines event log and summarise the workflows.
    Replay { log: PathBuf },
}

#[derive(Debug, Subcommand)]
enum PlotCommand {
    /// DI per phase against total project hours.
    Di { file: PathBuf },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "@reference")]
    dataset: PathBuf,
    #[arg(long)]
    ranges: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_phase(s: &str) -> Result<Phase, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_size(s: &str) -> Result<SizeCategory, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Replay { .. }
            | Error::State { .. }
            | Error::Policy(_)
            | Error::UndefinedMetric(_)
            | Error::InsufficientData(_)
            | Error::ImpossibleEvidence => EXIT_DATA,
            Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Argument(_)
            | Error::Configuration(_)
            | Error::Io(_) => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// A rendered report plus the exit code it implies.
struct Outcome {
    report: Report,
    code: u8,
}

impl Outcome {
    fn ok(report: Report) -> Self {
        Outcome {
            report,
            code: EXIT_OK,
        }
    }
}

/// Runs the command line and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = sink.write_all(rendered.as_bytes());
            return code;
        }
    };

    if let Command::Serve(args) = &cli.command {
        return match serve(args, out) {
            Ok(()) => EXIT_OK,
            Err(f) => {
                let _ = writeln!(err, "error: {}", f.message);
                f.code
            }
        };
    }

    match dispatch(&cli.command) {
        Ok(mut outcome) => {
            if cli.stamp {
                outcome.report.generated_at =
                    Some(humantime::format_rfc3339_seconds(SystemTime::now()).to_string());
            }
            if out
                .write_all(outcome.report.render(cli.format).as_bytes())
                .is_err()
            {
                return EXIT_USAGE;
            }
            outcome.code
        }
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(command: &Command) -> Result<Outcome, Failure> {
    match command {
        Command::Validate { file } => {
            let ds = load(file)?;
            let v = validate(&ds);
            let code = if v.is_clean() { EXIT_OK } else { EXIT_DATA };
            Ok(Outcome {
                report: reports::validation(&file.display().to_string(), ds.len(), &v),
                code,
            })
        }
        Command::Metrics { file, project } => with_dataset(file, |ds| {
            let selected: Vec<_> = match project {
                Some(id) => vec![find(ds, id)?],
                None => ds.iter().collect(),
            };
            let metrics = selected
                .into_iter()
                .map(project_metrics)
                .collect::<Result<Vec<_>, _>>()?;
            Ok(reports::metrics(&metrics))
        }),
        Command::Tables { file, table } => {
            with_dataset(file, |ds| Ok(reproduce_table(ds, *table)?.to_report()))
        }
        Command::Pattern { file } => with_dataset(file, |ds| Ok(reports::pattern(&pattern_summary(ds)?))),
        Command::Advise {
            file,
            project,
            ranges,
        } => {
            let table = match ranges {
                Some(path) => DesiredRangeTable::load(path)?,
                None => DesiredRangeTable::default(),
            };
            with_dataset(file, |ds| match project {
                Some(id) => Ok(check_compliance(find(ds, id)?, &table)?.to_report()),
                None => Ok(benchmark_report(&benchmark(ds, &table)?)),
            })
        }
        Command::Bbn(BbnCommand::Build {
            file,
            phase,
            size,
            smoothing,
            out,
        }) => with_dataset(file, |ds| {
            let model = build_model(ds, *phase, *size, &LevelScheme::default(), *smoothing)?;
            std::fs::write(out, model.to_json())
                .map_err(|e| usage(format!("cannot write {}: {e}", out.display())))?;
            Ok(reports::model(&model, &out.display().to_string()))
        }),
        Command::Bbn(BbnCommand::Query { model, evidence }) => {
            let model = load_model(model)?;
            let evidence = Evidence::parse(evidence)?;
            let post = model.posterior(&evidence)?;
            Ok(Outcome::ok(reports::posterior(&model, &evidence, &post)))
        }
        Command::Bbn(BbnCommand::Recommend {
            model,
            target,
            grid,
        }) => {
            let model = load_model(model)?;
            let target = split(target)
                .map(|s| s.parse::<DiLevel>())
                .collect::<Result<Vec<_>, _>>()?;
            let nodes = split(grid)
                .map(|s| s.parse::<ParamNode>())
                .collect::<Result<Vec<_>, _>>()?;
            let candidates = model.grid(&nodes)?;
            let ranking = recommend(&model, &target, &candidates)?;
            Ok(Outcome::ok(reports::ranking(&model, &target, &ranking)))
        }
        Command::Lifecycle(LifecycleCommand::Replay { log }) => {
            let source = read(log)?;
            let records = parse_log(&source)?;
            let workflows = replay_all(&records)?;
            Ok(Outcome::ok(dp_centre_summary(&workflows).to_report(&workflows)))
        }
        Command::Plot(PlotCommand::Di { file }) => with_dataset(file, |ds| Ok(reports::di_plot(&di_series(ds)))),
        Command::Serve(_) => unreachable!("serve is handled before dispatch"),
    }
}

fn split(list: &str) -> impl Iterator<Item = &str> {
    list.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn load(file: &Path) -> Result<ProjectDataset, Failure> {
    load_dataset(file).map_err(|e| match e {
        Error::Io(io) => usage(format!("cannot read {}: {io}", file.display())),
        other => other.into(),
    })
}

fn load_model(path: &Path) -> Result<CptModel, Failure> {
    Ok(CptModel::from_json(&read(path)?)?)
}

fn find<'a>(
    ds: &'a ProjectDataset,
    id: &str,
) -> Result<&'a inspectkit_core::dataset::ProjectRecord, Failure> {
    ds.get(id)
        .ok_or_else(|| usage(format!("no project `{id}` in the dataset")))
}

/// Loads a dataset and builds a report from it. Validation violations do not
/// stop the report; they are appended as notes and turn the exit code to 1.
fn with_dataset(
    file: &Path,
    build: impl FnOnce(&ProjectDataset) -> Result<Report, Failure>,
) -> Result<Outcome, Failure> {
    let ds = load(file)?;
    let v = validate(&ds);
    let mut report = build(&ds)?;
    if v.is_clean() {
        return Ok(Outcome::ok(report));
    }
    for violation in &v.violations {
        report = report.note(format!(
            "violation {} at {}: observed {}, expected {}",
            violation.rule.id(),
            violation.location,
            violation.observed,
            violation.expected
        ));
    }
    Ok(Outcome {
        report,
        code: EXIT_DATA,
    })
}

fn serve(args: &ServeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .try_init();

    let config = inspectkit_server::ServerConfig {
        port: args.port,
        dataset: args.dataset.clone(),
        ranges: args.ranges.clone(),
    };
    let state = inspectkit_server::SessionState::load(&config).map_err(|e| usage(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| usage(format!("cannot start runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", args.port))
            .await
            .map_err(|e| usage(format!("cannot bind 127.0.0.1:{}: {e}", args.port)))?;
        let addr = listener
            .local_addr()
            .map_err(|e| usage(e.to_string()))?;
        let _ = writeln!(out, "listening on http://{addr}");
        let _ = out.flush();
        inspectkit_server::serve_on(listener, Arc::new(state), inspectkit_server::ctrl_c())
            .await
            .map_err(|e| usage(e.to_string()))
    })
}
