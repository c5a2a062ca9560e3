use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use themegrain::experiments::{
    ambivalence_options, bench_sweep, build_variation, csv, divergence_breakdown, run_fidelity_experiment,
    AmbivalenceModeConfig, Experiment, ExperimentConfig, Provenance,
};
use themegrain::fast_mix::{BenchRow, MixPath};
use themegrain::machine::Path;
use themegrain::transmission::{check_ambivalence, AmbivalenceReport};
use themegrain::{parallel, Error};

const THREADS_ENV: &str = "THEMEGRAIN_THREADS";

#[derive(Parser)]
#[command(
    name = "themegrain",
    version,
    about = "Coarse-grained evolution dynamics over schema partitions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the fine machine and its quotient in lockstep and write the
    /// fidelity report.
    Compare(CommonArgs),
    /// Check that the configured transmission is ambivalent under the
    /// configured schema.
    CheckAmbivalence(CommonArgs),
    /// Time naive and fast variation over the configured length range.
    Bench(CommonArgs),
    /// Report the thematic mean divergence of the generated fitness.
    Divergence(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Output directory, or `-` to send the main CSV to stdout.
    #[arg(long, default_value = ".")]
    out: String,
    /// Overrides the config's mixing path.
    #[arg(long, value_parser = ["naive", "fast", "auto"])]
    path: Option<String>,
    #[arg(long)]
    seed_fitness: Option<u64>,
    #[arg(long)]
    seed_population: Option<u64>,
}

/// A failure with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn validation(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    fn io(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Compare(args) => cmd_compare(args),
        Command::CheckAmbivalence(args) => cmd_check_ambivalence(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Divergence(args) => cmd_divergence(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("{THREADS_ENV}={raw:?} is not a thread count"))?;
    parallel::init_thread_pool(threads).map_err(anyhow::Error::msg)
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, Failure> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))
        .map_err(Failure::validation)?;
    let mut config = ExperimentConfig::from_json(&text)
        .with_context(|| format!("invalid config {}", args.config.display()))
        .map_err(Failure::validation)?;
    if let Some(p) = &args.path {
        config.path = p.parse::<Path>().map_err(Failure::validation)?;
    }
    if let Some(s) = args.seed_fitness {
        config.seeds.fitness = s;
    }
    if let Some(s) = args.seed_population {
        config.seeds.population = s;
    }
    Ok(config)
}

/// Where a CSV goes: stdout for `-`, otherwise a file under the output
/// directory.
fn destination(out: &str, name: &str) -> Option<PathBuf> {
    if out == "-" || name == "-" {
        None
    } else {
        Some(FsPath::new(out).join(name))
    }
}

fn emit<F>(out: &str, name: &str, write: F) -> Result<(), Failure>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    match destination(out, name) {
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).and_then(|_| lock.flush()).map_err(Failure::io)
        }
        Some(path) => {
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir)
                    .with_context(|| format!("cannot create {}", dir.display()))
                    .map_err(Failure::io)?;
            }
            let file = File::create(&path)
                .with_context(|| format!("cannot create {}", path.display()))
                .map_err(Failure::io)?;
            let mut w = BufWriter::new(file);
            write(&mut w)
                .and_then(|_| w.flush())
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::io)?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn print_report(report: &AmbivalenceReport) {
    eprintln!(
        "ambivalent: {}  max_deviation: {:.3e}  tolerance: {:.1e}  parent_tuples: {}{}",
        report.ambivalent,
        report.max_deviation,
        report.tolerance,
        report.parent_tuples,
        if report.pairwise_exact {
            ""
        } else {
            "  (spread measured from class representatives)"
        }
    );
    if let Some(w) = &report.witness {
        eprintln!("witness themes: {:?}", w.themes);
        eprintln!("  parents {:?} -> class sums {:?}", w.first, w.first_class_sums);
        eprintln!("  parents {:?} -> class sums {:?}", w.second, w.second_class_sums);
    }
}

fn cmd_compare(args: &CommonArgs) -> Outcome {
    let config = load_config(args)?;
    let outcome = match run_fidelity_experiment(&config) {
        Ok(o) => o,
        Err(Error::NotAmbivalent(report)) => {
            eprintln!("error: transmission is not ambivalent under the schema; no quotient exists");
            print_report(&report);
            return Ok(3);
        }
        Err(e) => return Err(Failure::validation(e)),
    };
    let report = &outcome.report;
    eprintln!(
        "generations: {}  path: {}  max_error: {:.6e}  final delta_hat: {:.6e}",
        config.generations,
        report.path.as_str(),
        report.max_error(),
        report.rows.last().map_or(0.0, |r| r.delta_hat)
    );
    eprintln!(
        "non-departure: {:.1}% of generations  selection marginal departure: {:.4}",
        100.0 * report.non_departure_fraction(0.0),
        outcome.selection_marginal_departure
    );
    emit(&args.out, &config.outputs.report_csv, |w| {
        csv::write_fidelity_csv(w, &outcome.provenance, report, config.outputs.timing)
    })?;
    if let Some(name) = &config.outputs.trajectory_csv {
        if args.out == "-" {
            eprintln!("note: trajectory CSV skipped when writing to stdout");
        } else {
            emit(&args.out, name, |w| {
                csv::write_trajectory_csv(w, &outcome.provenance, &outcome.theme_trajectory)
            })?;
        }
    }
    Ok(0)
}

fn cmd_check_ambivalence(args: &CommonArgs) -> Outcome {
    let config = load_config(args)?;
    let beta = config.partitioning().map_err(Failure::validation)?;
    let variation = build_variation(&config.transmission, config.genome_length).map_err(Failure::validation)?;
    let options = ambivalence_options(&config.ambivalence, &variation);
    match check_ambivalence(&variation, &beta, options) {
        Ok(report) => {
            print_report(&report);
            Ok(if report.ambivalent { 0 } else { 1 })
        }
        Err(e @ Error::Infeasible { .. }) => {
            let hint = if config.ambivalence.mode == AmbivalenceModeConfig::Exhaustive {
                "set ambivalence.mode to \"sampled\" or \"auto\""
            } else {
                "reduce genome_length or the schema order"
            };
            Err(Failure::validation(anyhow::Error::new(e).context(hint.to_string())))
        }
        Err(e) => Err(Failure::validation(e)),
    }
}

fn print_ratios(rows: &[BenchRow]) {
    for naive in rows.iter().filter(|r| r.path == MixPath::Naive) {
        if let Some(fast) = rows
            .iter()
            .find(|r| r.path == MixPath::Fast && r.length == naive.length)
        {
            eprintln!(
                "length {:2}: naive/fast = {:.2}",
                naive.length,
                naive.mean_seconds / fast.mean_seconds
            );
        }
    }
    let fast: Vec<_> = rows.iter().filter(|r| r.path == MixPath::Fast).collect();
    for pair in fast.windows(2) {
        eprintln!(
            "length {:2} -> {:2}: fast time x{:.2}",
            pair[0].length,
            pair[1].length,
            pair[1].mean_seconds / pair[0].mean_seconds
        );
    }
}

fn cmd_bench(args: &CommonArgs) -> Outcome {
    let config = load_config(args)?;
    let rows = bench_sweep(&config).map_err(Failure::validation)?;
    print_ratios(&rows);
    let provenance = Provenance::for_config(&config).with("threads", parallel::current_threads());
    emit(&args.out, &config.outputs.bench_csv, |w| {
        csv::write_bench_csv(w, &provenance, &rows)
    })?;
    Ok(0)
}

fn cmd_divergence(args: &CommonArgs) -> Outcome {
    let config = load_config(args)?;
    let exp = Experiment::build(&config).map_err(Failure::validation)?;
    let (delta, rows) = divergence_breakdown(&exp).map_err(Failure::validation)?;
    eprintln!("delta_hat: {}", csv::fmt_float(delta));
    let provenance = exp.provenance().with("delta_hat", csv::fmt_float(delta));
    emit(&args.out, &config.outputs.divergence_csv, |w| {
        csv::write_divergence_csv(w, &provenance, &rows)
    })?;
    Ok(0)
}
