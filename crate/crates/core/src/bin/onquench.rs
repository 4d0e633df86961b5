use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use onquench::config::ModelConfig;
use onquench::error::{Error, Result};
use onquench::pipeline::{run, ExperimentPlan, PlanKind, QGrid};
use onquench::plot::{emit_plot, PlotKind};
use onquench::store::TrajectoryCache;

#[derive(Parser)]
#[command(name = "onquench", version, about = "Quench dynamics and slab entanglement spectra of the large-N O(N) model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Model configuration (JSON). Defaults to the desk-scale preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to `$ONQUENCH_OUT/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Trajectory cache; defaults to `<output root>/cache`.
    #[arg(long, global = true, env = "ONQUENCH_CACHE")]
    cache: Option<PathBuf>,
    /// Worker threads for the per-block stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved: the pipeline is deterministic and takes no seed.
    #[arg(long, global = true)]
    seedless: bool,
    /// Use the full-resolution preset instead of the desk-scale one.
    #[arg(long, global = true)]
    reference: bool,
    /// Override the quench depth of the configuration.
    #[arg(long, global = true, allow_hyphen_values = true)]
    delta: Option<f64>,
    /// Override the final time of the configuration.
    #[arg(long, global = true)]
    t_end: Option<f64>,
}

#[derive(Args, Default)]
struct Sampling {
    /// Snapshot times (comma separated).
    #[arg(long, value_delimiter = ',')]
    times: Vec<f64>,
    /// Slab widths in sites (comma separated).
    #[arg(long = "n-s", value_delimiter = ',')]
    n_s: Vec<usize>,
    /// Fit window as `lo,hi`.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_hyphen_values = true)]
    fit_window: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical mass and post-quench mass.
    Rc,
    /// Integrate the mode equations and write the effective-mass history.
    Evolve {
        #[command(flatten)]
        s: Sampling,
    },
    /// Lowest entanglement energies against transverse momentum.
    Dispersion {
        #[command(flatten)]
        s: Sampling,
        #[arg(long)]
        q_lo: Option<f64>,
        #[arg(long)]
        q_hi: Option<f64>,
        #[arg(long, default_value_t = 24)]
        q_n: usize,
        /// Also write the full spectrum of every snapshot.
        #[arg(long)]
        spectra: bool,
    },
    /// Entanglement gap against time for several widths, with scaling fits.
    Gap {
        #[command(flatten)]
        s: Sampling,
    },
    /// Slab entanglement entropy against time and width.
    Entropy {
        #[command(flatten)]
        s: Sampling,
    },
    /// Lowest entanglement modes, their profiles and fronts.
    Modes {
        #[command(flatten)]
        s: Sampling,
        #[arg(long, default_value_t = 2)]
        count: usize,
        /// Fraction of the half mass that locates a front.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Dispersion prefactor against quench depth.
    DeltaScan {
        #[command(flatten)]
        s: Sampling,
        /// Quench depths (comma separated, negative).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        deltas: Vec<f64>,
    },
    /// Render a result table as SVG.
    Plot {
        /// CSV table produced by another command.
        table: PathBuf,
        /// r_eff, dispersion, entropy, gap or zero_mode.
        #[arg(long)]
        kind: String,
        /// Output file; defaults to the table path with an `.svg` extension.
        #[arg(long = "svg")]
        svg: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Rc => "rc",
            Command::Evolve { .. } => "evolve",
            Command::Dispersion { .. } => "dispersion",
            Command::Gap { .. } => "gap",
            Command::Entropy { .. } => "entropy",
            Command::Modes { .. } => "modes",
            Command::DeltaScan { .. } => "delta-scan",
            Command::Plot { .. } => "plot",
        }
    }
}

fn load_config(c: &Common) -> Result<ModelConfig> {
    let mut cfg = match &c.config {
        Some(p) => ModelConfig::load(p)?,
        None if c.reference => ModelConfig::reference(),
        None => ModelConfig::desk(),
    };
    if let Some(d) = c.delta {
        cfg = cfg.with_delta(d);
    }
    if let Some(t) = c.t_end {
        cfg.t_end = t;
        cfg.checkpoint_times.retain(|&x| x <= t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply(plan: &mut ExperimentPlan, s: Sampling) {
    plan.times = s.times;
    plan.n_s_list = s.n_s;
    plan.fit_window = s.fit_window.map(|w| (w[0], w[1]));
}

fn execute(cli: Cli) -> Result<()> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    let root = std::env::var_os("ONQUENCH_OUT").map_or_else(|| PathBuf::from("onquench_out"), PathBuf::from);
    let out = c.out.clone().unwrap_or_else(|| root.join(cli.command.name()));

    if let Command::Plot { table, kind, svg } = &cli.command {
        let kind: PlotKind = kind.parse()?;
        let target = svg.clone().unwrap_or_else(|| table.with_extension("svg"));
        emit_plot(table, kind, &target)?;
        println!("{}", target.display());
        return Ok(());
    }

    let cfg = load_config(c)?;
    let cache = TrajectoryCache::new(c.cache.clone().unwrap_or_else(|| root.join("cache")));
    let plan = match cli.command {
        Command::Rc => ExperimentPlan::new(PlanKind::Rc, cfg),
        Command::Evolve { s } => {
            let mut p = ExperimentPlan::new(PlanKind::Evolve, cfg);
            apply(&mut p, s);
            p
        }
        Command::Dispersion {
            s,
            q_lo,
            q_hi,
            q_n,
            spectra,
        } => {
            let mut p = ExperimentPlan::new(PlanKind::Dispersion, cfg);
            let geom = onquench::geometry::SlabGeometry::from_config(&p.config)?;
            let (lo, hi) = onquench::pipeline::default_dispersion_window(&geom);
            p.q_grid = Some(QGrid {
                lo: q_lo.unwrap_or(lo),
                hi: q_hi.unwrap_or(hi),
                n: q_n,
            });
            p.write_spectra = spectra;
            apply(&mut p, s);
            p
        }
        Command::Gap { s } => {
            let mut p = ExperimentPlan::new(PlanKind::Gap, cfg);
            apply(&mut p, s);
            p
        }
        Command::Entropy { s } => {
            let mut p = ExperimentPlan::new(PlanKind::EntropyScan, cfg);
            apply(&mut p, s);
            p
        }
        Command::Modes { s, count, threshold } => {
            let mut p = ExperimentPlan::new(PlanKind::Modes, cfg);
            p.mode_count = count;
            if let Some(t) = threshold {
                p.front_threshold = t;
            }
            apply(&mut p, s);
            p
        }
        Command::DeltaScan { s, deltas } => {
            let mut p = ExperimentPlan::new(PlanKind::DeltaScan, cfg);
            p.deltas = deltas;
            apply(&mut p, s);
            p
        }
        Command::Plot { .. } => unreachable!(),
    };
    let outcome = run(&plan, &out, &cache)?;
    if !outcome.summary.is_empty() {
        println!("{}", outcome.summary);
    }
    println!("{}", out.join(onquench::pipeline::MANIFEST_NAME).display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
