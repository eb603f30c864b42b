use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uadiff_core::harness::{self, CsvTable, ExperimentConfig};

/// Experiment runner for the oscillatory advection-diffusion solver.
#[derive(Parser)]
#[command(name = "uadiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spatial convergence over `discretization.n_list`.
    ConvergenceSpace(Common),
    /// Time convergence over `discretization.n_ts`, one block per epsilon.
    ConvergenceTime(Common),
    /// Error against epsilon at fixed dt (or fixed N with `discretization.sweep = "space"`).
    EpsSweep(Common),
    /// Concentration time series at `output.detector`.
    Detector(Common),
    /// Wall time against error for orders 2 and 3.
    CpuPareto(Common),
    /// Adsorption length M from (delta, phi, cutoff).
    ComputeM(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config file; defaults apply to anything it leaves out.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any config field, e.g. `--set physics.diffusivity=0.01`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination (overrides `output.csv`; stdout when neither is set).
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    #[arg(long)]
    order: Option<u8>,
    #[arg(long)]
    t_fin: Option<f64>,
    #[arg(long)]
    dt_ref: Option<f64>,
    #[arg(long)]
    diffusivity: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    cutoff: Option<f64>,
}

fn list(v: &[f64]) -> String {
    format!("[{}]", v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(", "))
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut out = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        push("discretization.n", self.n.map(|v| v.to_string()));
        push("physics.epsilon", self.epsilon.as_deref().map(list));
        push("discretization.order", self.order.map(|v| v.to_string()));
        push("discretization.t_fin", self.t_fin.map(|v| format!("{v:e}")));
        push("discretization.dt_ref", self.dt_ref.map(|v| format!("{v:e}")));
        push("physics.diffusivity", self.diffusivity.map(|v| format!("{v:e}")));
        push("physics.delta", self.delta.map(|v| format!("{v:e}")));
        push("physics.phi", self.phi.map(|v| format!("{v:e}")));
        push("physics.cutoff", self.cutoff.map(|v| format!("{v:e}")));
        for s in &self.set {
            let (k, v) = s.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }

    fn load(&self) -> Result<ExperimentConfig, String> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?,
            None => String::new(),
        };
        ExperimentConfig::from_toml(&text, &self.overrides()?).map_err(|e| e.to_string())
    }
}

fn run(cli: Cli) -> Result<(), String> {
    let (common, name) = match &cli.command {
        Command::ConvergenceSpace(c) => (c, "convergence-space"),
        Command::ConvergenceTime(c) => (c, "convergence-time"),
        Command::EpsSweep(c) => (c, "eps-sweep"),
        Command::Detector(c) => (c, "detector"),
        Command::CpuPareto(c) => (c, "cpu-pareto"),
        Command::ComputeM(c) => (c, "compute-m"),
    };
    let cfg = common.load()?;
    let err = |e: uadiff_core::Error| format!("{name}: {e}");
    let table: CsvTable = match cli.command {
        Command::ConvergenceSpace(_) => harness::convergence_space(&cfg).map_err(err)?.to_table(),
        Command::ConvergenceTime(_) => harness::convergence_time(&cfg).map_err(err)?.to_table(),
        Command::EpsSweep(_) => harness::eps_sweep(&cfg).map_err(err)?.to_table(),
        Command::Detector(_) => harness::detector(&cfg).map_err(err)?.to_table(),
        Command::CpuPareto(_) => harness::cpu_pareto(&cfg).map_err(err)?.to_table(),
        Command::ComputeM(_) => {
            let p = &cfg.physics;
            harness::m_report(p.delta, p.phi, p.cutoff).map_err(err)?.to_table(&cfg)
        }
    };
    let dest = common.out.clone().or_else(|| cfg.output.csv.as_ref().map(PathBuf::from));
    match dest {
        Some(path) => table.write(&path).map_err(|e| format!("{}: {e}", path.display())),
        None => {
            print!("{}", table.to_csv().map_err(|e| e.to_string())?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
