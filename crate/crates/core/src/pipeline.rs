//! End-to-end experiments: evolve, correlate, diagonalize, fit, persist.
//!
//! Every experiment kind reads trajectories through a [`TrajectoryCache`]
//! and writes its tables plus a `manifest.json` into an output directory.
//! The computational stages are also exposed as plain functions returning
//! in-memory results.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    collapse_fit, fit_fixed_exponent, fit_log_growth, fit_power_law, fit_shifted_power, front_position,
    linear_fit, prefactor_scan, FitReport, GapSeries,
};
use crate::checkpoint::{sha256_hex, write_atomic};
use crate::config::ModelConfig;
use crate::correlators::{mixed_correlation_matrix, ChainTransform, CorrelationMatrix, KernelTable};
use crate::entropy::{entropy_from_matrices, slab_matrices, write_entropy_csv, EntropyRecord};
use crate::error::{Error, Result};
use crate::evolve::ModeState;
use crate::geometry::SlabGeometry;
use crate::grid::{critical_mass, resolve_post_quench_mass, RadialGrid};
use crate::store::{CachedRun, TrajectoryCache};
use crate::symplectic::{write_profiles_csv, write_spectrum_csv, EntanglementBlock, EntanglementMode, ModeProfile};

/// Grids and transforms shared by all stages of one configuration.
pub struct Context {
    pub cfg: ModelConfig,
    pub grid: RadialGrid,
    pub geom: SlabGeometry,
    pub transform: ChainTransform,
}

impl Context {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Context {
            cfg: cfg.clone(),
            grid: RadialGrid::for_config(cfg)?,
            geom: SlabGeometry::from_config(cfg)?,
            transform: ChainTransform::new(cfg.n_tot),
        })
    }

    pub fn matrix(&self, state: &ModeState, q_par: f64) -> Result<CorrelationMatrix> {
        let table = KernelTable::new(state, &self.grid)?;
        mixed_correlation_matrix(&table, &self.geom, q_par, &self.transform)
    }
}

/// `n` logarithmically spaced values on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}

/// Default dispersion-fit window `[5 * 2 pi / (n_tot a), 0.1]`.
pub fn default_dispersion_window(geom: &SlabGeometry) -> (f64, f64) {
    (5.0 * geom.kz_spacing(), 0.1)
}

/// Spectra of the slab at one instant for each transverse momentum.
pub fn dispersion(ctx: &Context, state: &ModeState, qs: &[f64]) -> Result<Vec<EntanglementBlock>> {
    let table = KernelTable::new(state, &ctx.grid)?;
    qs.par_iter()
        .map(|&q| {
            mixed_correlation_matrix(&table, &ctx.geom, q, &ctx.transform)
                .and_then(|cm| EntanglementBlock::from_correlation(&cm))
                .map_err(|e| Error::Block {
                    q_par: q,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// Lowest two entanglement energies of the `q_par = 0` block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub t: f64,
    pub n_s: usize,
    pub l: f64,
    pub omega0: f64,
    pub omega1: f64,
}

pub fn gap_points(ctx: &Context, states: &[ModeState], n_s_list: &[usize]) -> Result<Vec<GapPoint>> {
    let rows: Vec<Vec<GapPoint>> = states
        .par_iter()
        .map(|s| {
            let cm = ctx.matrix(s, 0.0)?;
            n_s_list
                .iter()
                .map(|&n_s| {
                    let b = EntanglementBlock::from_correlation(&cm.truncated(n_s))?;
                    Ok(GapPoint {
                        t: s.t,
                        n_s,
                        l: n_s as f64 * ctx.geom.a,
                        omega0: b.omegas[0],
                        omega1: *b.omegas.get(1).unwrap_or(&f64::INFINITY),
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Groups gap points into one inverse-gap series per width, skipping `t = 0`.
pub fn gap_series(points: &[GapPoint]) -> Result<Vec<GapSeries>> {
    let mut widths: Vec<usize> = points.iter().map(|p| p.n_s).collect();
    widths.sort_unstable();
    widths.dedup();
    widths
        .into_iter()
        .map(|n_s| {
            let pts: Vec<&GapPoint> = points.iter().filter(|p| p.n_s == n_s && p.t > 0.0).collect();
            GapSeries::new(
                pts.first().map_or(0.0, |p| p.l),
                pts.iter().map(|p| p.t).collect(),
                pts.iter().map(|p| 1.0 / p.omega0).collect(),
            )
        })
        .collect()
}

/// Restricts each series to `t >= L / 2`, the regime after the light cone
/// has crossed the slab.
pub fn after_light_cone(series: &[GapSeries]) -> Result<Vec<GapSeries>> {
    series
        .iter()
        .map(|s| {
            let (t, g): (Vec<f64>, Vec<f64>) = s
                .times
                .iter()
                .zip(&s.inv_gap)
                .filter(|(t, _)| **t >= 0.5 * s.l)
                .map(|(a, b)| (*a, *b))
                .unzip();
            GapSeries::new(s.l, t, g)
        })
        .collect()
}

/// Entropy records for every state and width (one shared matrix set per
/// state).
pub fn entropy_scan(ctx: &Context, states: &[ModeState], n_s_list: &[usize]) -> Result<Vec<EntropyRecord>> {
    let mut out = Vec::with_capacity(states.len() * n_s_list.len());
    for s in states {
        let table = KernelTable::new(s, &ctx.grid)?;
        let matrices = slab_matrices(&table, &ctx.geom, &ctx.transform)?;
        out.extend(entropy_from_matrices(&matrices, &ctx.geom, n_s_list)?);
    }
    Ok(out)
}

/// Lowest entanglement modes of the `q_par = 0` block at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSnapshot {
    pub t: f64,
    pub n_s: usize,
    pub lambdas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub modes: Vec<EntanglementMode>,
}

pub fn mode_snapshots(ctx: &Context, states: &[ModeState], n_s: usize, count: usize) -> Result<Vec<ModeSnapshot>> {
    states
        .par_iter()
        .map(|s| {
            let cm = ctx.matrix(s, 0.0)?.truncated(n_s);
            let block = EntanglementBlock::with_modes(&cm, count)?;
            Ok(ModeSnapshot {
                t: s.t,
                n_s,
                lambdas: block.lambdas.clone(),
                omegas: block.omegas.clone(),
                modes: block.vectors.unwrap_or_default(),
            })
        })
        .collect()
}

/// Front positions of the `j = 0` mode over time, as distances (in units
/// of length) from the slab boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontTrack {
    pub times: Vec<f64>,
    pub distance: Vec<f64>,
    pub half_width: f64,
}

pub fn front_track(snapshots: &[ModeSnapshot], a: f64, threshold: f64) -> Result<FrontTrack> {
    let mut times = Vec::new();
    let mut distance = Vec::new();
    let mut half_width = 0.0;
    for s in snapshots {
        let Some(m) = s.modes.first() else { continue };
        let (z_left, _) = front_position(&m.profile, threshold)?;
        times.push(s.t);
        distance.push((z_left + 0.5) * a);
        half_width = 0.5 * s.n_s as f64 * a;
    }
    Ok(FrontTrack {
        times,
        distance,
        half_width,
    })
}

/// Front speed from a linear fit over `t in (t_lo, t_hi]`, and the time at
/// which the fitted front reaches the slab center.
pub fn front_speed(track: &FrontTrack, t_lo: f64, t_hi: f64) -> Result<(f64, f64)> {
    let (t, d): (Vec<f64>, Vec<f64>) = track
        .times
        .iter()
        .zip(&track.distance)
        .filter(|(t, _)| **t > t_lo && **t <= t_hi)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let line = linear_fit(&t, &d)?;
    if !(line.slope > 0.0) {
        return Err(Error::Fit(format!("front does not advance (slope {})", line.slope)));
    }
    Ok((line.slope, (track.half_width - line.intercept) / line.slope))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    Rc,
    Evolve,
    Dispersion,
    Gap,
    EntropyScan,
    Modes,
    DeltaScan,
}

impl PlanKind {
    pub fn name(self) -> &'static str {
        match self {
            PlanKind::Rc => "rc",
            PlanKind::Evolve => "evolve",
            PlanKind::Dispersion => "dispersion",
            PlanKind::Gap => "gap",
            PlanKind::EntropyScan => "entropy_scan",
            PlanKind::Modes => "modes",
            PlanKind::DeltaScan => "delta_scan",
        }
    }
}

/// Transverse momenta for dispersion runs: `n` log-spaced values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// What to run. Fields not used by a kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub config: ModelConfig,
    /// Snapshot times; defaults to the config's checkpoint times, or `t_end`.
    #[serde(default)]
    pub times: Vec<f64>,
    /// Slab widths in sites; defaults to `config.n_s`.
    #[serde(default)]
    pub n_s_list: Vec<usize>,
    /// Quench depths for `delta_scan`.
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub q_grid: Option<QGrid>,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Entanglement modes per snapshot for `modes`.
    #[serde(default = "default_mode_count")]
    pub mode_count: usize,
    #[serde(default = "default_front_threshold")]
    pub front_threshold: f64,
    /// Also write one spectrum table per snapshot.
    #[serde(default)]
    pub write_spectra: bool,
}

fn default_mode_count() -> usize {
    2
}

fn default_front_threshold() -> f64 {
    crate::analysis::Tolerances::default().front_threshold
}

impl ExperimentPlan {
    pub fn new(kind: PlanKind, config: ModelConfig) -> Self {
        ExperimentPlan {
            kind,
            config,
            times: Vec::new(),
            n_s_list: Vec::new(),
            deltas: Vec::new(),
            q_grid: None,
            fit_window: None,
            mode_count: default_mode_count(),
            front_threshold: default_front_threshold(),
            write_spectra: false,
        }
    }

    pub fn snapshot_times(&self) -> Vec<f64> {
        if !self.times.is_empty() {
            self.times.clone()
        } else if !self.config.checkpoint_times.is_empty() {
            self.config.checkpoint_times.clone()
        } else {
            vec![self.config.t_end]
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        if self.n_s_list.is_empty() {
            vec![self.config.n_s]
        } else {
            self.n_s_list.clone()
        }
    }

    pub fn q_values(&self, geom: &SlabGeometry) -> Vec<f64> {
        let g = self.q_grid.unwrap_or_else(|| {
            let (lo, hi) = default_dispersion_window(geom);
            QGrid { lo, hi, n: 24 }
        });
        log_grid(g.lo, g.hi, g.n)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        let times = self.snapshot_times();
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return bad("times must be strictly increasing".into());
        }
        if let Some(&t) = times.iter().find(|&&t| !(t >= 0.0 && t <= self.config.t_end)) {
            return bad(format!("time {t} outside [0, t_end = {}]", self.config.t_end));
        }
        if let Some(&n) = self.widths().iter().find(|&&n| n == 0 || n > self.config.n_s) {
            return bad(format!("slab width {n} outside 1..={}", self.config.n_s));
        }
        if let Some(g) = self.q_grid {
            let q_max = (2.0f64 / 3.0).sqrt() * self.config.k_max;
            if !(g.lo > 0.0 && g.lo < g.hi && g.hi <= q_max && g.n >= 1) {
                return bad(format!("q grid must satisfy 0 < lo < hi <= {q_max}, n >= 1"));
            }
        }
        if !(self.front_threshold > 0.0 && self.front_threshold < 1.0) {
            return bad("front_threshold must lie in (0, 1)".into());
        }
        match self.kind {
            PlanKind::Gap if self.widths().len() < 3 => bad("gap plans need >= 3 slab widths".into()),
            PlanKind::DeltaScan if self.deltas.len() < 2 => bad("delta_scan needs >= 2 quench depths".into()),
            PlanKind::DeltaScan if self.deltas.iter().any(|d| !(*d < 0.0)) => {
                bad("delta_scan needs negative quench depths".into())
            }
            PlanKind::Modes if self.mode_count == 0 || self.mode_count > self.config.n_s => {
                bad(format!("mode_count must lie in 1..={}", self.config.n_s))
            }
            _ => Ok(()),
        }
    }
}

/// One output file and its content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: PlanKind,
    pub config: ModelConfig,
    pub geometry: SlabGeometry,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub content_hash: String,
    pub artifacts: Vec<Artifact>,
    /// Cached snapshot files the results were computed from.
    pub checkpoints: Vec<PathBuf>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    /// Loads a manifest and verifies every listed artifact.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: RunManifest = serde_json::from_str(&text)?;
        for a in &m.artifacts {
            let p = dir.join(&a.path);
            let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
            if sha256_hex(&bytes) != a.sha256 {
                return Err(Error::Format(format!("{} does not match the manifest", p.display())));
            }
        }
        for c in &m.checkpoints {
            if !c.exists() {
                return Err(Error::Format(format!("checkpoint {} is missing", c.display())));
            }
        }
        Ok(m)
    }
}

/// Collects outputs and commits them, manifest last.
struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn put_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| Error::io(self.dir.join(name), e))?;
        self.put(name, &buf)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.put(name, text.as_bytes())
    }
}

/// Summary of a finished run, for the CLI to print.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub summary: String,
}

#[derive(Serialize)]
struct RcResult {
    r_c: f64,
    r: f64,
    delta: f64,
}

#[derive(Serialize)]
struct FrontReport {
    threshold: f64,
    front_speed: Option<f64>,
    meeting_time: Option<f64>,
    light_cone_time: f64,
}

#[derive(Serialize)]
struct GapFits {
    collapse: Option<FitReport>,
    shifted_power: Vec<(f64, Option<FitReport>)>,
}

fn snapshot_paths(cache: &TrajectoryCache, cfg: &ModelConfig, run: &CachedRun) -> Vec<PathBuf> {
    let dir = cache.run_dir(cfg);
    run.states
        .iter()
        .map(|s| dir.join(format!("step_{:010}.onq", (s.t / cfg.dt).round() as u64)))
        .collect()
}

fn series_csv(series: &[(f64, f64)]) -> String {
    let mut out = String::with_capacity(series.len() * 40);
    out.push_str("t,r_eff\n");
    for (t, r) in series {
        let _ = writeln!(out, "{t},{r}");
    }
    out
}

/// Executes `plan`, writing tables and `manifest.json` into `out`.
pub fn run(plan: &ExperimentPlan, out: &Path, cache: &TrajectoryCache) -> Result<RunOutcome> {
    plan.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let cfg = &plan.config;
    let ctx = Context::new(cfg)?;
    let mut w = Writer {
        dir: out.to_path_buf(),
        artifacts: Vec::new(),
    };
    let mut checkpoints = Vec::new();
    let mut summary = String::new();

    match plan.kind {
        PlanKind::Rc => {
            let r_c = critical_mass(cfg, &ctx.grid)?;
            let r = resolve_post_quench_mass(cfg.delta, r_c)?;
            w.json("rc.json", &RcResult { r_c, r, delta: cfg.delta })?;
            let _ = write!(summary, "r_c = {r_c}\nr = {r}");
        }
        PlanKind::Evolve => {
            let times = plan.snapshot_times();
            let run = cache.run(cfg, &times)?;
            checkpoints = snapshot_paths(cache, cfg, &run);
            w.put("r_eff.csv", series_csv(&run.series).as_bytes())?;
            let lo = 20f64.min(cfg.t_end / 10.0);
            let (ts, rs): (Vec<f64>, Vec<f64>) = run.series.iter().copied().unzip();
            match fit_power_law(&ts, &rs, plan.fit_window.unwrap_or((lo, cfg.t_end))) {
                Ok(fit) => {
                    let _ = write!(
                        summary,
                        "r_eff ~ {:.6} t^{:.4} over [{}, {}]",
                        fit.prefactor, fit.exponent, fit.window.0, fit.window.1
                    );
                    w.json("r_eff_fit.json", &fit)?;
                }
                Err(e) => {
                    let _ = write!(summary, "no power-law tail: {e}");
                }
            }
        }
        PlanKind::Dispersion => {
            let times = plan.snapshot_times();
            let run = cache.run(cfg, &times)?;
            checkpoints = snapshot_paths(cache, cfg, &run);
            let qs = plan.q_values(&ctx.geom);
            let window = plan.fit_window.unwrap_or_else(|| default_dispersion_window(&ctx.geom));
            let mut table = String::from("t,q_par,omega0,omega1,lambda0\n");
            let mut fits = Vec::new();
            for s in &run.states {
                let blocks = dispersion(&ctx, s, &qs)?;
                for b in &blocks {
                    let _ = writeln!(
                        table,
                        "{},{},{},{},{}",
                        s.t,
                        b.q_par,
                        b.omegas[0],
                        b.omegas.get(1).copied().unwrap_or(f64::INFINITY),
                        b.lambdas[0]
                    );
                }
                if plan.write_spectra {
                    w.put_with(&format!("spectrum_t{}.csv", s.t), |buf| write_spectrum_csv(&blocks, buf))?;
                }
                let w0: Vec<f64> = blocks.iter().map(|b| b.omegas[0]).collect();
                let fit = fit_power_law(&qs, &w0, window).ok();
                if let Some(f) = &fit {
                    let _ = writeln!(summary, "t = {}: omega0 ~ q^{:.4}", s.t, f.exponent);
                }
                fits.push((s.t, fit));
            }
            w.put("dispersion.csv", table.as_bytes())?;
            w.json("dispersion_fit.json", &fits)?;
        }
        PlanKind::Gap => {
            let times = plan.snapshot_times();
            let run = cache.run(cfg, &times)?;
            checkpoints = snapshot_paths(cache, cfg, &run);
            let points = gap_points(&ctx, &run.states, &plan.widths())?;
            let mut table = String::from("t,L,n_s,omega0,omega1,inv_gap\n");
            for p in &points {
                let _ = writeln!(table, "{},{},{},{},{},{}", p.t, p.l, p.n_s, p.omega0, p.omega1, 1.0 / p.omega0);
            }
            w.put("gap.csv", table.as_bytes())?;
            let series = gap_series(&points)?;
            let collapse = collapse_fit(&after_light_cone(&series)?, (0.0, 1.0)).ok();
            let shifted = series
                .iter()
                .map(|s| (s.l, fit_shifted_power(&s.times, &s.inv_gap, s.l / 2.0).ok()))
                .collect();
            if let Some(c) = &collapse {
                let _ = write!(summary, "collapse alpha = {:.4}", c.exponent);
            }
            w.json("gap_fit.json", &GapFits { collapse, shifted_power: shifted })?;
        }
        PlanKind::EntropyScan => {
            let times = plan.snapshot_times();
            let run = cache.run(cfg, &times)?;
            checkpoints = snapshot_paths(cache, cfg, &run);
            let records = entropy_scan(&ctx, &run.states, &plan.widths())?;
            w.put_with("entropy.csv", |buf| write_entropy_csv(&records, false, buf))?;
            w.put_with("entropy_wide.csv", |buf| write_entropy_csv(&records, true, buf))?;
            let mut fits = Vec::new();
            for n_s in plan.widths() {
                let l = n_s as f64 * ctx.geom.a;
                let (ts, s0): (Vec<f64>, Vec<f64>) = records
                    .iter()
                    .filter(|r| r.l == l)
                    .map(|r| (r.t, r.s_zero_mode))
                    .unzip();
                let fit = fit_log_growth(&ts, &s0, l / 2.0).ok();
                if let Some(f) = &fit {
                    let _ = writeln!(summary, "L = {l}: S0 slope in ln t = {:.4}", f.exponent);
                }
                fits.push((l, fit));
            }
            w.json("entropy_fit.json", &fits)?;
        }
        PlanKind::Modes => {
            let times = plan.snapshot_times();
            let run = cache.run(cfg, &times)?;
            checkpoints = snapshot_paths(cache, cfg, &run);
            let n_s = plan.widths()[0];
            let snaps = mode_snapshots(&ctx, &run.states, n_s, plan.mode_count)?;
            let mut table = String::from("t,omega0,omega1,splitting,front_left,front_right\n");
            for s in &snaps {
                let (zl, zr) = front_position(&s.modes[0].profile, plan.front_threshold)?;
                let split = (s.omegas[1] - s.omegas[0]).abs() / s.omegas[0].max(f64::MIN_POSITIVE);
                let _ = writeln!(table, "{},{},{},{},{},{}", s.t, s.omegas[0], s.omegas[1], split, zl, zr);
                let profiles: Vec<ModeProfile> = s.modes.iter().map(|m| m.profile.clone()).collect();
                w.put_with(&format!("profiles_t{}.csv", s.t), |buf| write_profiles_csv(&profiles, buf))?;
            }
            w.put("modes.csv", table.as_bytes())?;
            let l = n_s as f64 * ctx.geom.a;
            let track = front_track(&snaps, ctx.geom.a, plan.front_threshold)?;
            let speed = front_speed(&track, 0.0, l / 4.0).ok();
            if let Some((v, tm)) = speed {
                let _ = write!(summary, "front speed = {v:.4}, fronts meet at t = {tm:.4}");
            }
            w.json(
                "modes_fit.json",
                &FrontReport {
                    threshold: plan.front_threshold,
                    front_speed: speed.map(|s| s.0),
                    meeting_time: speed.map(|s| s.1),
                    light_cone_time: l / 2.0,
                },
            )?;
        }
        PlanKind::DeltaScan => {
            let t = plan.snapshot_times().last().copied().unwrap_or(cfg.t_end);
            let qs = plan.q_values(&ctx.geom);
            let window = plan.fit_window.unwrap_or_else(|| default_dispersion_window(&ctx.geom));
            let mut table = String::from("delta,prefactor,free_exponent\n");
            let mut prefactors = Vec::new();
            for &delta in &plan.deltas {
                let c = cfg.clone().with_delta(delta);
                let run = cache.run(&c, &[t])?;
                checkpoints.extend(snapshot_paths(cache, &c, &run));
                let blocks = dispersion(&ctx, &run.states[0], &qs)?;
                let w0: Vec<f64> = blocks.iter().map(|b| b.omegas[0]).collect();
                let fixed = fit_fixed_exponent(&qs, &w0, window, 0.5)?;
                let free = fit_power_law(&qs, &w0, window)?;
                let _ = writeln!(table, "{delta},{},{}", fixed.prefactor, free.exponent);
                prefactors.push(fixed.prefactor);
            }
            w.put("delta_scan.csv", table.as_bytes())?;
            if let Ok(fit) = prefactor_scan(&plan.deltas, &prefactors) {
                let _ = write!(summary, "gamma = {:.4}, prefactor = {:.5}", fit.exponent, fit.prefactor);
                w.json("delta_scan_fit.json", &fit)?;
            }
        }
    }

    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let manifest = RunManifest {
        kind: plan.kind,
        config: cfg.clone(),
        geometry: ctx.geom.clone(),
        created_at,
        content_hash: cfg.dynamics_hash(),
        artifacts: w.artifacts.clone(),
        checkpoints,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    write_atomic(&out.join(MANIFEST_NAME), text.as_bytes())?;
    Ok(RunOutcome {
        manifest,
        summary: summary.trim_end().to_string(),
    })
}
