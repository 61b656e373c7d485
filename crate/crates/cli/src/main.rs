use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};

use misspec_ts::experiments::emit::{
    analyze_outputs, describe, graph_outputs, mc_outputs, mc_summary, simulate_outputs,
};
use misspec_ts::experiments::{monte_carlo, write_outputs, ExperimentConfig, SigmaMode};
use misspec_ts::pseudo_truth::analyze;
use misspec_ts::thompson::run_episode;
use misspec_ts::Error;

#[derive(Debug, Parser)]
#[command(name = "misspec-ts", version, about = "Thompson Sampling under reward-model misspecification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one episode and write its trace and posterior snapshots.
    Simulate(Common),
    /// Static analysis: pseudo-truth set, gap, increment bound and constants.
    Analyze(Common),
    /// Overshadowing graph as DOT plus candidate concentration sets.
    Graph(Common),
    /// Full Monte Carlo pipeline: series, summary, graph and config copy.
    Mc(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; the built-in notched-quadratic experiment when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for `simulate`, base seed for `mc`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Output directory (default: the config's `output_dir`, else `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Whether `sigma` in the config is a standard deviation or a variance.
    #[arg(long, value_parser = PossibleValuesParser::new(["std", "var"]))]
    sigma_mode: Option<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.base_seed = seed;
        }
        if let Some(reps) = self.reps {
            cfg.replications = reps;
        }
        if let Some(horizon) = self.horizon {
            cfg.horizon = horizon;
            // default windows and fit start follow the horizon
        }
        if let Some(mode) = &self.sigma_mode {
            cfg.sigma_mode = mode.parse::<SigmaMode>()?;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.6e}"))
}

fn run(cli: Cli) -> Result<String, Error> {
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.config()?;
            let resolved = cfg.resolve()?;
            let seed = cfg.base_seed;
            let trace = run_episode(&resolved.scenario, &resolved.settings, seed)?;
            let files = simulate_outputs(&trace, &resolved, seed)?;
            let paths = write_outputs(&out_dir(&cfg), &files)?;
            let ar = trace.average_regret(trace.horizon())?;
            Ok(format!(
                "{}horizon {} seed {seed}: average regret {ar:.6e}\n",
                describe(&paths),
                trace.horizon()
            ))
        }
        Command::Analyze(common) => {
            let cfg = common.config()?;
            let resolved = cfg.resolve()?;
            let (report, fit) = analyze(&resolved.scenario, cfg.tol, cfg.r_clip)?;
            let files = analyze_outputs(&report, &fit)?;
            let paths = write_outputs(&out_dir(&cfg), &files)?;
            Ok(format!(
                "{}pseudo-truth set: {} of {} parameters {:?}\nepsilon {}  d {:.6e}  a {}  b {}\n",
                describe(&paths),
                report.theta_dagger.len(),
                resolved.scenario.space.len(),
                report.theta_dagger,
                fmt_opt(report.epsilon),
                report.d,
                fmt_opt(report.a_const),
                fmt_opt(report.b_const),
            ))
        }
        Command::Graph(common) => {
            let cfg = common.config()?;
            let resolved = cfg.resolve()?;
            let (files, graph) = graph_outputs(&resolved)?;
            let paths = write_outputs(&out_dir(&cfg), &files)?;
            Ok(format!(
                "{}{} vertices, {} edges\n",
                describe(&paths),
                graph.n,
                graph.edges.len()
            ))
        }
        Command::Mc(common) => {
            let cfg = common.config()?;
            let resolved = cfg.resolve()?;
            let result = monte_carlo(&resolved)?;
            let files = mc_outputs(&result, &resolved)?;
            let paths = write_outputs(&out_dir(&cfg), &files)?;
            let summary = mc_summary(&result, &resolved);
            let rate = summary
                .fitted_rate_log
                .map_or_else(|| "n/a".to_owned(), |f| format!("{:.6e} (r2 {:.4})", f.b_hat, f.r_squared));
            let hard = summary.bound_report.as_ref().map_or(0, |b| b.hard_violations);
            Ok(format!(
                "{}{} replications, T = {}: final mass on pseudo-truth set {:.6}, average regret {:.6e}\n\
                 fitted decay rate {rate}, bound violations {hard}\n",
                describe(&paths),
                result.replications,
                resolved.settings.horizon,
                summary.final_dagger_mass_mean,
                summary.final_avg_regret_mean,
            ))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(message) => {
            print!("{message}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 1 } else { 2 })
        }
    }
}
