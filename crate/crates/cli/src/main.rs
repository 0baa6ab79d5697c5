//! `lifmf`: command-line front end for the mean-field LIF solvers.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::Failure;

#[derive(Debug, Parser)]
#[command(name = "lifmf", version = env!("LIFMF_VERSION"), about = "Mean-field LIF network laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Classify parameters into the known regimes.
    Regime {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
    },
    /// Simulate one neuron driven by Poisson input.
    SimulateNeuron {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Initial potential.
        #[arg(long)]
        v0: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Spacing of the recorded trajectory.
        #[arg(long)]
        sample_dt: Option<f64>,
    },
    /// Simulate the finite excitatory network and record its raster.
    SimulateNetwork {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        initial: Initial,
        /// Number of neurons.
        #[arg(long = "N")]
        neurons: Option<usize>,
        #[arg(long)]
        horizon: Option<f64>,
    },
    /// Solve the mean-field equation on a grid.
    SolvePde {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        initial: Initial,
        #[command(flatten)]
        grid: Grid,
        /// Comma-separated times at which densities are written.
        #[arg(long, value_delimiter = ',')]
        output_times: Vec<f64>,
    },
    /// Stationary densities: at a given rate, or at every steady state.
    SteadyState {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        scan: Scan,
        /// Evaluate the linear invariant density at this rate instead.
        #[arg(long)]
        sigma: Option<f64>,
        /// Cells of the projected grid density.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Tabulate F and G and locate their crossings.
    ScanSigma {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        scan: Scan,
    },
    /// Empirical check of the Doeblin minorization.
    DoeblinCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        /// Replicas per starting point.
        #[arg(long)]
        replicas: Option<usize>,
        /// Comma-separated starting potentials.
        #[arg(long, value_delimiter = ',')]
        starts: Vec<f64>,
        /// Histogram bins on [h/2, h].
        #[arg(long)]
        bins: Option<usize>,
    },
    /// TV contraction of the linear equation between two Dirac data.
    VerifyContraction {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        grid: Grid,
        #[command(flatten)]
        decay: Decay,
        #[arg(long)]
        v0_a: Option<f64>,
        #[arg(long)]
        v0_b: Option<f64>,
    },
    /// TV decay to a steady state of the nonlinear equation.
    VerifyStability {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        initial: Initial,
        #[command(flatten)]
        grid: Grid,
        #[command(flatten)]
        decay: Decay,
        #[command(flatten)]
        scan: Scan,
        /// Which steady state (in increasing rate) to compare against.
        #[arg(long)]
        root_index: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Flat JSON config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: lifmf-out/<command>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replica and scan loops.
    #[arg(long)]
    threads: Option<usize>,
    /// Reject integer (1 - v_r)/h instead of warning.
    #[arg(long)]
    strict_ratio: bool,
}

#[derive(Debug, Args)]
struct Model {
    /// Jump amplitude.
    #[arg(long)]
    h: Option<f64>,
    /// Reset potential.
    #[arg(long)]
    v_r: Option<f64>,
    /// External input rate.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Mean synaptic out-degree.
    #[arg(long = "J")]
    coupling: Option<f64>,
}

#[derive(Debug, Args)]
struct Initial {
    /// uniform, gaussian, dirac or interval.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    init_mean: Option<f64>,
    #[arg(long)]
    init_sd: Option<f64>,
    #[arg(long)]
    init_at: Option<f64>,
    #[arg(long)]
    init_lo: Option<f64>,
    #[arg(long)]
    init_hi: Option<f64>,
}

#[derive(Debug, Args)]
struct Grid {
    /// Requested number of cells (raised until h is a whole number of cells).
    #[arg(long)]
    n: Option<usize>,
    /// Fixed time step (default: automatic from the stability limit).
    #[arg(long)]
    dt: Option<f64>,
    /// minmod or upwind.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    t_end: Option<f64>,
}

#[derive(Debug, Args)]
struct Scan {
    /// Cells of the stationary solver.
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    sigma_min: Option<f64>,
    #[arg(long)]
    sigma_max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    root_tol: Option<f64>,
}

#[derive(Debug, Args)]
struct Decay {
    /// Number of TV samples.
    #[arg(long)]
    samples: Option<usize>,
    /// Relative slack on the envelope.
    #[arg(long)]
    slack: Option<f64>,
}

fn non_empty(v: Vec<f64>) -> Option<Vec<f64>> {
    (!v.is_empty()).then_some(v)
}

impl Common {
    fn apply(&self, c: &mut RunConfig) {
        c.out = self.out.clone();
        c.seed = self.seed;
        c.threads = self.threads;
        c.strict_ratio = self.strict_ratio.then_some(true);
    }
}

impl Model {
    fn apply(&self, c: &mut RunConfig) {
        c.h = self.h;
        c.v_r = self.v_r;
        c.sigma0 = self.sigma0;
        c.coupling = self.coupling;
    }
}

impl Initial {
    fn apply(&self, c: &mut RunConfig) {
        c.initial = self.initial.clone();
        c.init_mean = self.init_mean;
        c.init_sd = self.init_sd;
        c.init_at = self.init_at;
        c.init_lo = self.init_lo;
        c.init_hi = self.init_hi;
    }
}

impl Grid {
    fn apply(&self, c: &mut RunConfig) {
        c.n = self.n;
        c.dt = self.dt;
        c.scheme = self.scheme.clone();
        c.t_end = self.t_end;
    }
}

impl Scan {
    fn apply(&self, c: &mut RunConfig) {
        c.cells = self.cells;
        c.sigma_min = self.sigma_min;
        c.sigma_max = self.sigma_max;
        c.points = self.points;
        c.root_tol = self.root_tol;
    }
}

impl Decay {
    fn apply(&self, c: &mut RunConfig) {
        c.samples = self.samples;
        c.slack = self.slack;
    }
}

/// Command name, config file and the flag layer.
fn flags(command: Command) -> (&'static str, Option<PathBuf>, RunConfig) {
    let mut c = RunConfig::default();
    let (name, common) = match command {
        Command::Regime { common, model } => {
            model.apply(&mut c);
            ("regime", common)
        }
        Command::SimulateNeuron { common, model, v0, horizon, sample_dt } => {
            model.apply(&mut c);
            c.v0 = v0;
            c.horizon = horizon;
            c.sample_dt = sample_dt;
            ("simulate-neuron", common)
        }
        Command::SimulateNetwork { common, model, initial, neurons, horizon } => {
            model.apply(&mut c);
            initial.apply(&mut c);
            c.neurons = neurons;
            c.horizon = horizon;
            ("simulate-network", common)
        }
        Command::SolvePde { common, model, initial, grid, output_times } => {
            model.apply(&mut c);
            initial.apply(&mut c);
            grid.apply(&mut c);
            c.output_times = non_empty(output_times);
            ("solve-pde", common)
        }
        Command::SteadyState { common, model, scan, sigma, n } => {
            model.apply(&mut c);
            scan.apply(&mut c);
            c.sigma = sigma;
            c.n = n;
            ("steady-state", common)
        }
        Command::ScanSigma { common, model, scan } => {
            model.apply(&mut c);
            scan.apply(&mut c);
            ("scan-sigma", common)
        }
        Command::DoeblinCheck { common, model, replicas, starts, bins } => {
            model.apply(&mut c);
            c.replicas = replicas;
            c.starts = non_empty(starts);
            c.bins = bins;
            ("doeblin-check", common)
        }
        Command::VerifyContraction { common, model, grid, decay, v0_a, v0_b } => {
            model.apply(&mut c);
            grid.apply(&mut c);
            decay.apply(&mut c);
            c.v0_a = v0_a;
            c.v0_b = v0_b;
            ("verify-contraction", common)
        }
        Command::VerifyStability { common, model, initial, grid, decay, scan, root_index } => {
            model.apply(&mut c);
            initial.apply(&mut c);
            grid.apply(&mut c);
            decay.apply(&mut c);
            scan.apply(&mut c);
            c.root_index = root_index;
            ("verify-stability", common)
        }
    };
    common.apply(&mut c);
    (name, common.config, c)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (name, config_path, flag_layer) = flags(cli.command);
    let mut cfg = match &config_path {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(cmd) = &cfg.command {
        if cmd != name {
            return Err(Failure::Validation(format!(
                "config is for command {cmd:?}, not {name:?}"
            )));
        }
    }
    cfg.overlay(&flag_layer);
    cfg.command = Some(name.to_string());
    if let Some(threads) = cfg.threads {
        if threads == 0 {
            return Err(Failure::Validation("threads must be at least 1".into()));
        }
        // a second initialization only happens in-process and is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    commands::dispatch(name, cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lifmf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
