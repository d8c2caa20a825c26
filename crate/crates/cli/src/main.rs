use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cointegra::johansen::DeterministicCase;
use cointegra::panel::{ingest_panel, Naics, PanelSchema, StateCode};
use cointegra::parallel::Execution;
use cointegra::pipeline::{run_stage, write_panel_file, PipelineError, RunConfig, RunManifest, Selection, Stage};

#[derive(Parser)]
#[command(name = "cointegra", version, about = "Quarterly state-industry VECM forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate panel files and write normalized copies.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Panel CSV outside the data directory (needs --state and --naics).
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Per-variable N, mean, sd, min and max.
    Summarize(Common),
    /// Location quotients and their significance screen.
    Lq(Common),
    /// ADF unit-root tests on every level series.
    Adf(Common),
    /// Lag-order selection criteria.
    Lags(Common),
    /// Johansen trace and max-eigenvalue tests.
    Johansen(Common),
    /// Fit the VECM and write its coefficients.
    Fit(Common),
    /// Residual normality and LM autocorrelation tests.
    Diagnose(Common),
    /// Point forecasts, impulse responses and relative plot series.
    Forecast(Common),
    /// Holdout forecast accuracy.
    Backtest(Common),
    /// Every stage for every configured model.
    Run(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Restrict to one state (two-letter code).
    #[arg(long)]
    state: Option<StateCode>,
    /// Restrict to one industry (113, 321 or 322).
    #[arg(long)]
    naics: Option<Naics>,
    /// Lag order of the level VAR.
    #[arg(long)]
    k: Option<usize>,
    /// Cointegration rank.
    #[arg(long)]
    r: Option<usize>,
    /// Deterministic case: none, rconst, uconst, rtrend or utrend.
    #[arg(long)]
    case: Option<DeterministicCase>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed recorded with the run, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Run models one at a time.
    #[arg(long)]
    sequential: bool,
}

impl Common {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        Ok(config)
    }

    fn selection(&self) -> Selection {
        Selection { state: self.state.clone(), naics: self.naics, k: self.k, r: self.r, case: self.case }
    }

    fn execution(&self) -> Execution {
        if self.sequential { Execution::Sequential } else { Execution::Parallel }
    }
}

fn run(common: &Common, stage: Stage) -> Result<RunManifest, PipelineError> {
    let config = common.config()?;
    run_stage(&config, stage, &common.selection(), common.execution())
}

fn ingest_file(common: &Common, input: &Path) -> Result<(), PipelineError> {
    let (Some(state), Some(naics)) = (common.state.clone(), common.naics) else {
        return Err(PipelineError::ConfigInvalid("--input needs --state and --naics".into()));
    };
    let config = common.config()?;
    let panel = ingest_panel(input, state, naics, &PanelSchema::default())
        .map_err(|e| PipelineError::Input(format!("{}: {e}", input.display())))?;
    std::fs::create_dir_all(&config.out_dir)
        .map_err(|source| PipelineError::Io { path: config.out_dir.clone(), source })?;
    let dest = config.panel_path(&panel.state, panel.naics);
    let dest = config.out_dir.join(dest.file_name().expect("panel file name"));
    write_panel_file(&panel, &dest)?;
    println!("{} {}: {} quarters {}..{} -> {}", panel.state, panel.naics, panel.len(), panel.start(), panel.end(), dest.display());
    Ok(())
}

fn report(manifest: &RunManifest) -> ExitCode {
    for m in &manifest.models {
        match &m.message {
            None => {
                let spec = match (m.k, m.r, m.case) {
                    (Some(k), Some(r), Some(case)) => format!(" k={k} r={r} case={case}"),
                    _ => String::new(),
                };
                println!("{} {} ok{spec}", m.state, m.naics);
            }
            Some(msg) => println!("{} {} error: {msg}", m.state, m.naics),
        }
    }
    for o in &manifest.outputs {
        println!("wrote {} ({} rows)", o.file, o.rows);
    }
    if manifest.failed() > 0 {
        eprintln!("{} of {} models failed", manifest.failed(), manifest.models.len());
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, stage) = match &cli.command {
        Command::Ingest { common, input: Some(input) } => {
            return match ingest_file(common, input) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            };
        }
        Command::Ingest { common, input: None } => (common, Stage::Ingest),
        Command::Summarize(c) => (c, Stage::Summarize),
        Command::Lq(c) => (c, Stage::Lq),
        Command::Adf(c) => (c, Stage::Adf),
        Command::Lags(c) => (c, Stage::Lags),
        Command::Johansen(c) => (c, Stage::Johansen),
        Command::Fit(c) => (c, Stage::Fit),
        Command::Diagnose(c) => (c, Stage::Diagnose),
        Command::Forecast(c) => (c, Stage::Forecast),
        Command::Backtest(c) => (c, Stage::Backtest),
        Command::Run(c) => (c, Stage::Run),
    };
    match run(common, stage) {
        Ok(manifest) => report(&manifest),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
