use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hill_delta::asymptotics::BandRegime;
use hill_delta::sweep::{
    BandsConfig, Fig1Config, Fig2Config, Fig3Config, FpCheckConfig, MapConfig, MomentsConfig, DEFAULT_SEED,
};
use hill_delta::{Error, ForcingModel, SweepTable};

/// Growth-rate experiments for Hill's equation with random delta-function forcing.
///
/// Each subcommand writes one CSV table with a `#` metadata preamble.
#[derive(Parser, Debug)]
#[command(name = "hill-delta", version)]
struct Cli {
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true, env = "HILL_DELTA_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Output {
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a gnuplot script that plots the CSV.
    #[arg(long, requires = "out")]
    plot_script: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Dist {
    Constant,
    Shifted,
    Symmetric,
}

impl Dist {
    fn model(self, q0: f64, af: f64) -> hill_delta::Result<ForcingModel> {
        match self {
            Dist::Constant => ForcingModel::constant(q0, af),
            Dist::Shifted => ForcingModel::shifted_uniform(q0, af),
            Dist::Symmetric => ForcingModel::symmetric_uniform(q0, af),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Regime {
    Small,
    Large,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Large-q error scaling of the product estimate against the asymptotic forms.
    Fig1 {
        #[arg(long, default_value_t = 32.0)]
        q0_min: f64,
        #[arg(long, default_value_t = 4096.0)]
        q0_max: f64,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 0.5)]
        af: f64,
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
        #[arg(long, default_value_t = 16)]
        trials: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Small-q growth across af for q0 = 10/2^ell.
    Fig2 {
        #[arg(long, default_value_t = 0.5)]
        af_min: f64,
        #[arg(long, default_value_t = 10.0)]
        af_max: f64,
        #[arg(long, default_value_t = 191)]
        points: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [4u32, 5, 6, 7, 8])]
        ells: Vec<u32>,
        #[arg(long, default_value_t = 1_000_000)]
        cycles: u64,
        #[arg(long, default_value_t = 16)]
        trials: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Product estimate, small-q law, cycle-averaged rate and classical rate across af.
    Fig3 {
        #[arg(long, default_value_t = 0.5)]
        af_min: f64,
        #[arg(long, default_value_t = 10.0)]
        af_max: f64,
        #[arg(long, default_value_t = 191)]
        points: usize,
        #[arg(long, default_value_t = 2.5)]
        q0: f64,
        #[arg(long, default_value_t = 100_000)]
        cycles: u64,
        #[arg(long, default_value_t = 16)]
        trials: u32,
        /// Samples per point for the cycle-averaged rate.
        #[arg(long, default_value_t = 200_000)]
        inf_samples: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Analytic element moments against sampled moments.
    Moments {
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[command(flatten)]
        output: Output,
    },
    /// Ensemble energy growth against the diffusion prediction.
    FpCheck {
        #[arg(long, default_value_t = 2.0)]
        af: f64,
        #[arg(long, default_value_t = 0.1)]
        q0: f64,
        #[arg(long, default_value_t = 20_000)]
        trajectories: usize,
        #[arg(long, default_value_t = 2_000)]
        cycles: usize,
        /// Cycles for the product estimate reported alongside.
        #[arg(long, default_value_t = 1_000_000)]
        mc_cycles: u64,
        #[arg(long, default_value_t = 16)]
        trials: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Growth of the iterative phase map over a range of q0.
    Map {
        #[arg(long, default_value_t = 0.01)]
        q0_min: f64,
        #[arg(long, default_value_t = 0.1)]
        q0_max: f64,
        #[arg(long, default_value_t = 5)]
        points: usize,
        #[arg(long, default_value_t = 2.0)]
        af: f64,
        #[arg(long, value_enum, default_value_t = Dist::Symmetric)]
        dist: Dist,
        /// Samples per trial.
        #[arg(long, default_value_t = 1 << 21)]
        samples: u64,
        #[arg(long, default_value_t = 16)]
        trials: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Stability-zone widths around af = n^2.
    Bands {
        #[arg(long, default_value_t = 0.1)]
        q0: f64,
        #[arg(long, value_enum, default_value_t = Dist::Symmetric)]
        dist: Dist,
        #[arg(long, value_enum, default_value_t = Regime::Small)]
        regime: Regime,
        #[arg(long, default_value_t = 3)]
        n_max: u32,
        #[command(flatten)]
        output: Output,
    },
}

fn run(command: Command) -> hill_delta::Result<(SweepTable, Output, PlotSpec)> {
    Ok(match command {
        Command::Fig1 { q0_min, q0_max, points, af, cycles, trials, output } => {
            let t = Fig1Config { q0_min, q0_max, points, af, cycles, trials, seed: output.seed }.run()?;
            (t, output, PlotSpec::new("q0", &["abs_diff21", "abs_diffcor"], true, true))
        }
        Command::Fig2 { af_min, af_max, points, ells, cycles, trials, output } => {
            let cfg = Fig2Config { af_min, af_max, points, ells, cycles, trials, seed: output.seed };
            let t = cfg.run()?;
            let ys: Vec<String> = cfg
                .ells
                .iter()
                .flat_map(|l| [format!("gamma_mc_l{l}"), format!("gamma_thm31_l{l}")])
                .collect();
            let ys: Vec<&str> = ys.iter().map(String::as_str).collect();
            (t, output, PlotSpec::new("af", &ys, false, true))
        }
        Command::Fig3 { af_min, af_max, points, q0, cycles, trials, inf_samples, output } => {
            let t = Fig3Config { af_min, af_max, points, q0, cycles, trials, inf_samples, seed: output.seed }.run()?;
            (t, output, PlotSpec::new("af", &["gamma_mc", "gamma_thm31", "gamma_inf", "gamma_classical"], false, false))
        }
        Command::Moments { samples, output } => {
            let t = MomentsConfig { samples, seed: output.seed, ..MomentsConfig::default() }.run()?;
            (t, output, PlotSpec::new("param", &["z"], false, false))
        }
        Command::FpCheck { af, q0, trajectories, cycles, mc_cycles, trials, output } => {
            let t = FpCheckConfig { af, q0, trajectories, cycles, mc_cycles, mc_trials: trials, seed: output.seed }.run()?;
            (t, output, PlotSpec::new("t", &["mean_y_sq"], false, true))
        }
        Command::Map { q0_min, q0_max, points, af, dist, samples, trials, output } => {
            let model = dist.model(1.0, af)?;
            let t = MapConfig { q0_min, q0_max, points, model, samples, trials, seed: output.seed }.run()?;
            (t, output, PlotSpec::new("q0", &["gamma_uniform", "gamma_trajectory"], true, true))
        }
        Command::Bands { q0, dist, regime, n_max, output } => {
            let model = dist.model(q0, 2.0)?;
            let regime = match regime {
                Regime::Small => BandRegime::SmallQ,
                Regime::Large => BandRegime::LargeQ,
            };
            let t = BandsConfig { model, regime, n_max }.run()?;
            (t, output, PlotSpec::new("n", &["lower", "upper"], false, false))
        }
    })
}

struct PlotSpec {
    x: String,
    ys: Vec<String>,
    log_x: bool,
    log_y: bool,
}

impl PlotSpec {
    fn new(x: &str, ys: &[&str], log_x: bool, log_y: bool) -> Self {
        PlotSpec {
            x: x.to_string(),
            ys: ys.iter().map(|s| s.to_string()).collect(),
            log_x,
            log_y,
        }
    }

    fn gnuplot(&self, table: &SweepTable, csv: &Path) -> String {
        let col = |name: &str| table.names().iter().position(|n| n == name).map_or(0, |i| i + 1);
        let mut s = String::from("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
        if self.log_x {
            s.push_str("set logscale x\n");
        }
        if self.log_y {
            s.push_str("set logscale y\n");
        }
        s.push_str(&format!("set xlabel '{}'\n", self.x));
        let file = csv.display().to_string().replace('\'', "''");
        let curves: Vec<String> = self
            .ys
            .iter()
            .map(|y| format!("'{file}' using {}:{} with linespoints", col(&self.x), col(y)))
            .collect();
        s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
        s
    }
}

fn write_output(table: &SweepTable, output: &Output, plot: &PlotSpec) -> hill_delta::Result<()> {
    match &output.out {
        Some(path) => table.write_path(path)?,
        None => table.write_to(io::stdout().lock())?,
    }
    if let (Some(script), Some(csv)) = (&output.plot_script, &output.out) {
        fs::write(script, plot.gnuplot(table, csv))?;
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_bad_argument() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let result = run(cli.command).and_then(|(table, output, plot)| write_output(&table, &output, &plot));
    match result {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
