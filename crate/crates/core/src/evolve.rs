//! Self-consistent mode-function dynamics after the mass quench.
//!
//! Each radial mode obeys `f'' = -(k^2 + r_eff(t)) f` with
//! `r_eff = r + (u/6) V(t)` and `V = int d^3k/(2pi)^3 R(k) |f_k|^2`.
//! The system is integrated with classical RK4 on `(f, f')`, recomputing
//! `r_eff` from the stage-local mode populations at every stage.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::grid::{critical_mass, regulator, resolve_post_quench_mass, RadialGrid};

/// Largest admissible `|f_k|` before the integration is declared unstable.
pub const OVERFLOW_GUARD: f64 = 1e150;

/// Mode functions and their time derivatives at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeState {
    pub t: f64,
    pub f: Vec<C64>,
    pub fdot: Vec<C64>,
    /// Effective mass evaluated from `f`.
    pub r_eff: f64,
}

impl ModeState {
    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// `max_k |2 Im[f_k conj(fdot_k)] - 1|`.
    pub fn wronskian_residual(&self) -> f64 {
        self.f
            .iter()
            .zip(&self.fdot)
            .map(|(f, fd)| (2.0 * (f * fd.conj()).im - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Snapshots of one run plus the dense effective-mass history.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub checkpoints: Vec<ModeState>,
    /// `(t, r_eff)` after every integration step, starting at `t = 0`.
    pub r_eff_series: Vec<(f64, f64)>,
    pub config_hash: String,
}

impl Trajectory {
    /// Snapshot whose time is closest to `t`.
    pub fn nearest(&self, t: f64) -> Option<&ModeState> {
        self.checkpoints.iter().min_by(|a, b| {
            (a.t - t).abs().total_cmp(&(b.t - t).abs())
        })
    }
}

/// A configured quench: grid, resolved masses and the radial measure.
#[derive(Debug, Clone)]
pub struct QuenchModel {
    cfg: ModelConfig,
    grid: RadialGrid,
    r_c: f64,
    r: f64,
    k2: Vec<f64>,
    /// `w_i k_i^2 R(k_i) / (2 pi^2)`, so that `V = sum_i measure_i |f_i|^2`.
    measure: Vec<f64>,
}

impl QuenchModel {
    /// Resolves `r_c` on the radial grid and sets `r = r_c + delta |r_c|`.
    pub fn new(cfg: ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = RadialGrid::for_config(&cfg)?;
        let r_c = critical_mass(&cfg, &grid)?;
        let r = resolve_post_quench_mass(cfg.delta, r_c)?;
        Ok(Self::assemble(cfg, grid, r_c, r))
    }

    /// Quench to an explicit post-quench mass, bypassing the `delta`
    /// parametrization. Needed when `u = 0`, where `r_c` vanishes.
    pub fn with_mass(cfg: ModelConfig, r: f64) -> Result<Self> {
        cfg.validate()?;
        let grid = RadialGrid::for_config(&cfg)?;
        let r_c = critical_mass(&cfg, &grid)?;
        Ok(Self::assemble(cfg, grid, r_c, r))
    }

    fn assemble(cfg: ModelConfig, grid: RadialGrid, r_c: f64, r: f64) -> Self {
        let k2: Vec<f64> = grid.nodes().iter().map(|k| k * k).collect();
        let measure: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(grid.weights())
            .map(|(&k, &w)| w * k * k * regulator(k, cfg.lambda) / (2.0 * PI * PI))
            .collect();
        QuenchModel {
            cfg,
            grid,
            r_c,
            r,
            k2,
            measure,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn critical_mass(&self) -> f64 {
        self.r_c
    }

    /// Post-quench bare mass `r`.
    pub fn mass(&self) -> f64 {
        self.r
    }

    /// Regulated fluctuation `V = int d^3k/(2pi)^3 R(k) |f_k|^2`.
    pub fn fluctuation(&self, f: &[C64]) -> f64 {
        self.measure
            .iter()
            .zip(f)
            .map(|(m, f)| m * f.norm_sqr())
            .sum()
    }

    fn mass_from_fluctuation(&self, v: f64) -> f64 {
        self.r + self.cfg.u / 6.0 * v
    }

    /// `r + (u / 12 pi^2) int k^2 dk R(k) |f_k|^2`.
    pub fn effective_mass(&self, state: &ModeState) -> f64 {
        self.mass_from_fluctuation(self.fluctuation(&state.f))
    }

    /// Free ground state of mass `r_i`:
    /// `f = 1/sqrt(2 w0)`, `fdot = -i sqrt(w0/2)`, `w0 = sqrt(k^2 + r_i)`.
    pub fn init_modes(&self) -> ModeState {
        let r_i = self.cfg.r_i;
        let (f, fdot): (Vec<C64>, Vec<C64>) = self
            .k2
            .iter()
            .map(|&k2| {
                let w0 = (k2 + r_i).sqrt();
                (
                    C64::new(1.0 / (2.0 * w0).sqrt(), 0.0),
                    C64::new(0.0, -(w0 / 2.0).sqrt()),
                )
            })
            .unzip();
        let r_eff = self.mass_from_fluctuation(self.fluctuation(&f));
        ModeState {
            t: 0.0,
            f,
            fdot,
            r_eff,
        }
    }

    /// Energy density per field component,
    /// `(1/4pi^2) int k^2 R (|fdot|^2 + k^2 |f|^2) + (r/2) V + (u/24) V^2`,
    /// exactly conserved by the continuum dynamics.
    pub fn conserved_energy(&self, state: &ModeState) -> f64 {
        let kinetic: f64 = self
            .measure
            .iter()
            .zip(&self.k2)
            .zip(state.f.iter().zip(&state.fdot))
            .map(|((m, k2), (f, fd))| 0.5 * m * (fd.norm_sqr() + k2 * f.norm_sqr()))
            .sum();
        let v = self.fluctuation(&state.f);
        kinetic + 0.5 * self.r * v + self.cfg.u / 24.0 * v * v
    }

    /// One RK4 step of length `dt`.
    pub fn step(&self, state: &ModeState) -> Result<ModeState> {
        let mut next = state.clone();
        let mut stepper = Stepper::new(state.len());
        stepper.advance(self, &mut next)?;
        next.t = state.t + self.cfg.dt;
        Ok(next)
    }

    /// Integrate to `t_end`, snapshotting at the steps nearest to each
    /// requested time.
    pub fn evolve(&self, checkpoint_times: &[f64]) -> Result<Trajectory> {
        let mut checkpoints = Vec::with_capacity(checkpoint_times.len());
        let r_eff_series = self.evolve_with(checkpoint_times, |s| {
            checkpoints.push(s.clone());
            Ok(())
        })?;
        Ok(Trajectory {
            checkpoints,
            r_eff_series,
            config_hash: self.cfg.dynamics_hash(),
        })
    }

    /// Like [`evolve`](Self::evolve) but hands each snapshot to `observe`
    /// instead of keeping it. Returns the `(t, r_eff)` series.
    pub fn evolve_with(
        &self,
        checkpoint_times: &[f64],
        observe: impl FnMut(&ModeState) -> Result<()>,
    ) -> Result<Vec<(f64, f64)>> {
        self.evolve_from(self.init_modes(), checkpoint_times, observe)
    }

    /// Continue integrating `start` (a state on the step grid, e.g. a loaded
    /// checkpoint) to `t_end`. Checkpoint times before `start.t` are skipped.
    /// The series begins with `start`.
    pub fn evolve_from(
        &self,
        start: ModeState,
        checkpoint_times: &[f64],
        observe: impl FnMut(&ModeState) -> Result<()>,
    ) -> Result<Vec<(f64, f64)>> {
        let targets = self.step_targets(checkpoint_times)?;
        self.evolve_steps(start, &targets, observe)
    }

    /// Continue `start` to `t_end`, observing at the given step indices
    /// (ascending).
    pub fn evolve_steps(
        &self,
        start: ModeState,
        targets: &[u64],
        mut observe: impl FnMut(&ModeState) -> Result<()>,
    ) -> Result<Vec<(f64, f64)>> {
        let dt = self.cfg.dt;
        let n_steps = self.cfg.n_steps();
        if start.len() != self.grid.len() || start.fdot.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} modes, grid has {}",
                start.len(),
                self.grid.len()
            )));
        }
        let n0 = (start.t / dt).round() as u64;
        if (n0 as f64 * dt - start.t).abs() > 1e-9 * dt.max(start.t) || n0 > n_steps {
            return Err(Error::InvalidArgument(format!(
                "start time {} is not a step of this run",
                start.t
            )));
        }
        if targets.windows(2).any(|w| w[0] >= w[1]) || targets.last().is_some_and(|&n| n > n_steps) {
            return Err(Error::InvalidArgument("step targets must ascend within the run".into()));
        }

        let mut state = start;
        let mut stepper = Stepper::new(state.len());
        let mut series = Vec::with_capacity((n_steps - n0) as usize + 1);
        series.push((state.t, state.r_eff));
        let mut next_target = targets.iter().filter(|&&n| n >= n0).peekable();
        if next_target.peek() == Some(&&n0) {
            observe(&state)?;
            next_target.next();
        }
        for n in n0 + 1..=n_steps {
            stepper.advance(self, &mut state)?;
            state.t = n as f64 * dt;
            series.push((state.t, state.r_eff));
            if next_target.peek() == Some(&&n) {
                observe(&state)?;
                next_target.next();
            }
        }
        Ok(series)
    }

    /// Step indices nearest to the requested times, deduplicated.
    pub fn step_targets(&self, checkpoint_times: &[f64]) -> Result<Vec<u64>> {
        let dt = self.cfg.dt;
        let n_steps = self.cfg.n_steps();
        for w in checkpoint_times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidArgument(
                    "checkpoint times must be strictly increasing".into(),
                ));
            }
        }
        let mut targets: Vec<u64> = Vec::with_capacity(checkpoint_times.len());
        for &t in checkpoint_times {
            if !(t >= 0.0 && t <= self.cfg.t_end) {
                return Err(Error::InvalidArgument(format!(
                    "checkpoint time {t} outside [0, {}]",
                    self.cfg.t_end
                )));
            }
            let n = ((t / dt).round() as u64).min(n_steps);
            if targets.last() != Some(&n) {
                targets.push(n);
            }
        }
        Ok(targets)
    }
}

/// Stage buffers for the fused RK4 update.
struct Stepper {
    sf: Vec<C64>,
    sd: Vec<C64>,
    acc_f: Vec<C64>,
    acc_d: Vec<C64>,
}

impl Stepper {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Stepper {
            sf: z.clone(),
            sd: z.clone(),
            acc_f: z.clone(),
            acc_d: z,
        }
    }

    /// Advance `state` in place by `dt`. The caller updates `state.t`.
    fn advance(&mut self, model: &QuenchModel, state: &mut ModeState) -> Result<()> {
        let h = model.cfg.dt;
        let half = 0.5 * h;
        let n = state.f.len();
        let k2 = &model.k2[..n];
        let m = &model.measure[..n];
        let (f, fd) = (&mut state.f[..n], &mut state.fdot[..n]);
        let (sf, sd) = (&mut self.sf[..n], &mut self.sd[..n]);
        let (acc_f, acc_d) = (&mut self.acc_f[..n], &mut self.acc_d[..n]);

        // Stage 1 uses the cached r_eff of the state.
        let r1 = state.r_eff;
        let v = lane_sum(n, |i| {
            let kf = fd[i];
            let kd = -(k2[i] + r1) * f[i];
            acc_f[i] = kf;
            acc_d[i] = kd;
            sf[i] = f[i] + half * kf;
            sd[i] = fd[i] + half * kd;
            m[i] * sf[i].norm_sqr()
        });
        // Stage 2.
        let r2 = model.mass_from_fluctuation(v);
        let v = lane_sum(n, |i| {
            let kf = sd[i];
            let kd = -(k2[i] + r2) * sf[i];
            acc_f[i] += 2.0 * kf;
            acc_d[i] += 2.0 * kd;
            sf[i] = f[i] + half * kf;
            sd[i] = fd[i] + half * kd;
            m[i] * sf[i].norm_sqr()
        });
        // Stage 3.
        let r3 = model.mass_from_fluctuation(v);
        let v = lane_sum(n, |i| {
            let kf = sd[i];
            let kd = -(k2[i] + r3) * sf[i];
            acc_f[i] += 2.0 * kf;
            acc_d[i] += 2.0 * kd;
            sf[i] = f[i] + h * kf;
            sd[i] = fd[i] + h * kd;
            m[i] * sf[i].norm_sqr()
        });
        // Stage 4 and combination.
        let r4 = model.mass_from_fluctuation(v);
        let sixth = h / 6.0;
        let v = lane_sum(n, |i| {
            let kf = sd[i];
            let kd = -(k2[i] + r4) * sf[i];
            f[i] += sixth * (acc_f[i] + kf);
            fd[i] += sixth * (acc_d[i] + kd);
            m[i] * f[i].norm_sqr()
        });
        let peak = lane_max_abs(bytemuck::cast_slice(f));
        state.r_eff = model.mass_from_fluctuation(v);

        if !(peak <= OVERFLOW_GUARD) || !state.r_eff.is_finite() {
            let worst = state
                .f
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm_sqr().total_cmp(&b.1.norm_sqr()))
                .map_or(0, |(i, _)| i);
            return Err(Error::Unstable {
                time: state.t + h,
                k: model.grid.nodes()[worst],
                guard: OVERFLOW_GUARD,
            });
        }
        Ok(())
    }
}

const LANES: usize = 8;

/// `sum_i body(i)` with a fixed lane-striped summation order, so the
/// reduction vectorizes and stays deterministic.
#[inline(always)]
fn lane_sum(n: usize, mut body: impl FnMut(usize) -> f64) -> f64 {
    let mut part = [0.0; LANES];
    let full = n - n % LANES;
    let mut i = 0;
    while i < full {
        for (l, p) in part.iter_mut().enumerate() {
            *p += body(i + l);
        }
        i += LANES;
    }
    let mut tail = 0.0;
    for j in full..n {
        tail += body(j);
    }
    part.iter().sum::<f64>() + tail
}

fn lane_max_abs(x: &[f64]) -> f64 {
    let mut part = [0.0f64; LANES];
    let mut chunks = x.chunks_exact(LANES);
    for c in &mut chunks {
        for (p, v) in part.iter_mut().zip(c) {
            *p = p.max(v.abs());
        }
    }
    chunks
        .remainder()
        .iter()
        .chain(&part)
        .fold(0.0, |a, v| a.max(v.abs()))
}
