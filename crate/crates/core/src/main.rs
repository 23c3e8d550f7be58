use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use povspace::econometrics::CovarianceKind;
use povspace::ingest::JoinMode;
use povspace::pipeline::{run_pipeline, run_step, RunConfig, Step};
use povspace::product_space::GraphFormat;
use povspace::{Result, YearSpan};

#[derive(Parser)]
#[command(name = "povspace", version, about = "Product-space poverty analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write every report.
    Run(ConfigArgs),
    /// Run a single stage from the inputs and earlier stage files.
    Step {
        /// rca, proximity, ppi, eigenpoverty, metrics, regress, elbow or indices
        step: Step,
        #[command(flatten)]
        args: ConfigArgs,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    exports: Option<PathBuf>,
    #[arg(long)]
    poverty: Option<PathBuf>,
    #[arg(long)]
    controls: Option<PathBuf>,
    /// Trade years, e.g. 1995-2010.
    #[arg(long)]
    years: Option<YearSpan>,
    #[arg(long)]
    base_year: Option<i32>,
    #[arg(long)]
    target_year: Option<i32>,
    /// RCA threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// Proximity threshold of the exported graph.
    #[arg(long)]
    viz_threshold: Option<f64>,
    #[arg(long)]
    eigen_tol: Option<f64>,
    #[arg(long)]
    eigen_max_iter: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    /// Solve for the left instead of the right eigenvector.
    #[arg(long)]
    transpose: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Poverty headcounts are given in percent.
    #[arg(long)]
    percent: bool,
    /// graphml, dot or csv
    #[arg(long)]
    format: Option<GraphFormat>,
    /// Binarize the averaged advantage matrix by majority vote.
    #[arg(long)]
    majority_vote: bool,
    /// Use the mean proximity of the trade years in every year.
    #[arg(long)]
    pool_proximity: bool,
    /// Drop trade countries without poverty data instead of flagging them.
    #[arg(long)]
    intersect: bool,
    /// Heteroskedasticity-robust (HC1) standard errors.
    #[arg(long)]
    hc1: bool,
    /// Write stage files during a pipeline run.
    #[arg(long)]
    keep_intermediates: bool,
    /// Income microdata for the indices step.
    #[arg(long)]
    incomes: Option<PathBuf>,
    #[arg(long)]
    poverty_line: Option<f64>,
    /// Count incomes equal to the poverty line as poor.
    #[arg(long)]
    inclusive: bool,
}

impl ConfigArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            years => cfg.years,
            base_year => cfg.base_year,
            target_year => cfg.target_year,
            tau => cfg.tau,
            viz_threshold => cfg.viz_threshold,
            eigen_tol => cfg.eigen.tolerance,
            eigen_max_iter => cfg.eigen.max_iterations,
            damping => cfg.eigen.damping,
            out_dir => cfg.out_dir,
            format => cfg.format,
        }
        for (flag, target) in [
            (self.exports, &mut cfg.exports),
            (self.poverty, &mut cfg.poverty),
            (self.controls, &mut cfg.controls),
            (self.incomes, &mut cfg.incomes),
        ] {
            if flag.is_some() {
                *target = flag;
            }
        }
        if self.poverty_line.is_some() {
            cfg.poverty_line = self.poverty_line;
        }
        cfg.eigen.transpose |= self.transpose;
        cfg.percent |= self.percent;
        cfg.majority_vote |= self.majority_vote;
        cfg.pool_proximity |= self.pool_proximity;
        cfg.keep_intermediates |= self.keep_intermediates;
        cfg.inclusive_line |= self.inclusive;
        if self.intersect {
            cfg.join = JoinMode::Intersection;
        }
        if self.hc1 {
            cfg.covariance = CovarianceKind::Hc1;
        }
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let summary = run_pipeline(&cfg)?;
            log::info!(
                "wrote {} files to {}",
                summary.files.len() + 1,
                cfg.out_dir.display()
            );
        }
        Command::Step { step, args } => {
            let cfg = args.into_config()?;
            for f in run_step(step, &cfg)? {
                log::info!("wrote {}", f.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
