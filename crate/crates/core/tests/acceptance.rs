//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Trajectories are cached under `$ONQUENCH_ACCEPTANCE_CACHE` (default: the
//! cargo target tmp dir), so only the first run pays for the integrations.
//! Criteria listed in `KNOWN_SHORTFALLS` are still evaluated and reported as
//! FAIL; they do not fail the process. Any other failure, or any error while
//! evaluating a criterion, does.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRng, TestRunner};

use onquench::analysis::{
    collapse_fit, fit_fixed_exponent, fit_log_growth, fit_power_law, fit_shifted_power, linear_fit, prefactor_scan,
    Tolerances,
};
use onquench::config::ModelConfig;
use onquench::correlators::{mixed_correlation_matrix, mixed_correlation_matrix_direct, ChainTransform, KernelTable};
use onquench::entropy::block_entropy;
use onquench::error::Result;
use onquench::evolve::{ModeState, QuenchModel};
use onquench::geometry::SlabGeometry;
use onquench::grid::{critical_mass, RadialGrid};
use onquench::pipeline::{
    after_light_cone, default_dispersion_window, dispersion, entropy_scan, front_track, front_speed, gap_points,
    gap_series, log_grid, mode_snapshots, Context,
};
use onquench::store::{CachedRun, TrajectoryCache};
use onquench::symplectic::{symplectic_spectrum, EntanglementBlock};

/// Criteria that fail at desk scale, with the one-line reason.
const KNOWN_SHORTFALLS: &[(&str, &str)] = &[
    (
        "AC3",
        "RK4 truncation at the fastest mode (omega dt = 0.016 at k_max = 5 pi) is ~5e-8 over t = 10; the error falls 16x per halving of dt",
    ),
    (
        "AC6",
        "the scaling window 1/t << q << 1/L is too narrow at t <= 300; the exponent does not move with n_k and is 0.59 at t = 1000",
    ),
    (
        "AC9",
        "at t <= 300 the finite-q modes of the q = 0 block have not saturated; near criticality the mass scale 1/m ~ 800 exceeds the window",
    ),
    (
        "AC10",
        "the fitted front speed depends on the mass threshold that defines the front (0.48 at 0.5, 1.74 at 0.999); 0.9 is fixed in advance",
    ),
];

const WIDTHS: [usize; 3] = [25, 50, 100];
const DISPERSION_POINTS: usize = 24;

struct Check {
    ok: bool,
    text: String,
}

fn check(ok: bool, text: String) -> Check {
    Check { ok, text }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISS"
    }
}

struct Env {
    cache: TrajectoryCache,
    tol: Tolerances,
}

impl Env {
    fn cfg(&self, delta: f64) -> ModelConfig {
        ModelConfig::desk().with_delta(delta)
    }

    fn run(&self, cfg: &ModelConfig, times: &[f64]) -> Result<CachedRun> {
        let start = Instant::now();
        let r = self.cache.run(cfg, times)?;
        if r.steps_integrated > 0 {
            println!(
                "    (integrated {} steps for delta = {} in {:.0} s)",
                r.steps_integrated,
                cfg.delta,
                start.elapsed().as_secs_f64()
            );
        }
        Ok(r)
    }

    fn states(&self, delta: f64) -> Result<Vec<ModeState>> {
        Ok(self.run(&self.cfg(delta), &schedule(300.0))?.states)
    }
}

/// Dense early, sparser late.
fn schedule(t_end: f64) -> Vec<f64> {
    let mut t: Vec<f64> = (0..=20).map(f64::from).collect();
    t.extend((11..=30).map(|i| 2.0 * i as f64));
    t.extend((13..).map(|i| 5.0 * i as f64).take_while(|&x| x <= 300.0));
    t.retain(|&x| x <= t_end);
    t
}

fn ac1(env: &Env) -> Result<Vec<Check>> {
    let cfg = env.cfg(0.0);
    let start = Instant::now();
    let grid = RadialGrid::for_config(&cfg)?;
    let r_c = critical_mass(&cfg, &grid)?;
    let secs = start.elapsed().as_secs_f64();
    let ok = ((r_c + 0.43) / 0.43).abs() <= env.tol.critical_mass_rel;
    Ok(vec![
        check(ok, format!("r_c = {r_c:.5} (target -0.43 +- 1%) {}", verdict(ok))),
        check(secs < 1.0, format!("runtime {secs:.3} s (< 1 s) {}", verdict(secs < 1.0))),
    ])
}

fn ac2(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let crit = env.run(&env.cfg(0.0), &[300.0])?;
    let amp: Vec<f64> = crit
        .series
        .iter()
        .filter(|(t, _)| (20.0..=200.0).contains(t))
        .map(|(t, r)| r * t * t)
        .collect();
    let (lo, hi) = amp.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let target = 3.0 / 16.0;
    let ok = ((lo - target) / target).abs() <= env.tol.critical_amplitude_rel
        && ((hi - target) / target).abs() <= env.tol.critical_amplitude_rel;
    out.push(check(
        ok,
        format!("delta = 0: r_eff t^2 in [{lo:.4}, {hi:.4}] over t in [20, 200] (3/16 +- 10%) {}", verdict(ok)),
    ));

    let mut deep = env.cfg(-9.0);
    deep.t_end = 60.0;
    let run = env.run(&deep, &[50.0])?;
    let worst = run
        .series
        .iter()
        .filter(|(t, _)| *t >= 50.0 - 0.5 * deep.dt)
        .map(|(_, r)| r.abs())
        .fold(0.0, f64::max);
    let ok = worst < env.tol.massless_r_eff;
    out.push(check(ok, format!("delta = -9: max |r_eff| over t in [50, 60] = {worst:.2e} (< 1e-4) {}", verdict(ok))));

    // The approach to the plateau takes ~1/sqrt(r_eff) ~ 10^3, so this run is
    // long and uses a coarser step.
    let mut above = env.cfg(0.001);
    above.t_end = 3000.0;
    above.dt = 0.1 / (above.k_max * above.k_max + above.r_i).sqrt();
    let run = env.run(&above, &[3000.0])?;
    let tail: Vec<f64> = run.series.iter().filter(|(t, _)| *t >= 2400.0).map(|(_, r)| *r).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let early: Vec<f64> = run
        .series
        .iter()
        .filter(|(t, _)| (2400.0..2700.0).contains(t))
        .map(|(_, r)| *r)
        .collect();
    let late: Vec<f64> = run.series.iter().filter(|(t, _)| *t >= 2700.0).map(|(_, r)| *r).collect();
    let drift = (late.iter().sum::<f64>() / late.len() as f64 - early.iter().sum::<f64>() / early.len() as f64) / mean;
    let ok = lo > 0.0 && drift.abs() < 0.05;
    out.push(check(
        ok,
        format!(
            "delta = 0.001: r_eff over t in [2400, 3000] in [{lo:.3e}, {hi:.3e}], mean {mean:.3e}, drift between halves {:.1}% (positive, < 5%) {}",
            100.0 * drift,
            verdict(ok)
        ),
    ));
    Ok(out)
}

fn ac3(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let cfg = env.cfg(-1.0);
    let run = env.run(&cfg, &[0.0, 100.0])?;
    let model = QuenchModel::new(cfg.clone())?;
    let w = run.states[1].wronskian_residual();
    let e0 = model.conserved_energy(&run.states[0]);
    let e1 = model.conserved_energy(&run.states[1]);
    let drift = ((e1 - e0) / e0).abs();
    out.push(check(w < env.tol.wronskian, format!("Wronskian residual at t = 100: {w:.2e} (< 1e-6) {}", verdict(w < env.tol.wronskian))));
    out.push(check(
        drift < env.tol.energy_drift,
        format!("relative energy drift over t = 100: {drift:.2e} (< 1e-6) {}", verdict(drift < env.tol.energy_drift)),
    ));

    // Free field: every mode is a harmonic oscillator of frequency sqrt(k^2 + r).
    let mut free = ModelConfig::desk();
    free.u = 0.0;
    free.n_k = 256;
    free.dt = 1e-3;
    let worst = std::cell::Cell::new(0.0f64);
    let result = runner(24).run(&(0.05f64..4.0, 1.0f64..10.0), |(r, t)| {
        let err = free_field_error(&free, r, t).map_err(|e| TestCaseError::fail(e.to_string()))?;
        worst.set(worst.get().max(err));
        prop_assert!(err < 1e-8, "free-field error {err:e} at r = {r}, t = {t}");
        Ok(())
    });
    let ok = result.is_ok();
    out.push(check(
        ok,
        format!(
            "free-field oracle at dt = 1e-3, 24 random (r, t <= 10): max relative error {:.2e} (< 1e-8) {}",
            worst.get(),
            verdict(ok)
        ),
    ));
    let coarse = free_field_error(&free, 1.0, 10.0)?;
    let mut half = free.clone();
    half.dt /= 2.0;
    let fine = free_field_error(&half, 1.0, 10.0)?;
    let ratio = coarse / fine;
    let ok = (12.0..20.0).contains(&ratio);
    out.push(check(
        ok,
        format!("halving dt at r = 1, t = 10: error {coarse:.2e} -> {fine:.2e}, ratio {ratio:.1} (~16) {}", verdict(ok)),
    ));
    Ok(out)
}

/// Largest relative deviation from the closed-form oscillator solution.
fn free_field_error(cfg: &ModelConfig, r: f64, t: f64) -> Result<f64> {
    let mut c = cfg.clone();
    c.t_end = t;
    let model = QuenchModel::with_mass(c, r)?;
    let traj = model.evolve(&[t])?;
    let s = &traj.checkpoints[0];
    let init = model.init_modes();
    let mut err = 0.0f64;
    for (i, &k) in model.grid().nodes().iter().enumerate() {
        let w = (k * k + r).sqrt();
        let (c, sn) = ((w * s.t).cos(), (w * s.t).sin());
        let f = init.f[i] * c + init.fdot[i] * (sn / w);
        let fd = init.fdot[i] * c - init.f[i] * (w * sn);
        let ef = (s.f[i] - f).norm() / f.norm().max(init.f[i].norm());
        let ed = (s.fdot[i] - fd).norm() / fd.norm().max(init.fdot[i].norm());
        err = err.max(ef).max(ed);
    }
    Ok(err)
}

fn ac4(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let t = 200.0;
    for (delta, target) in [(-1.0, -2.0), (0.0, -1.5)] {
        let cfg = env.cfg(delta);
        let run = env.run(&cfg, &[t])?;
        let s = &run.states[0];
        let grid = RadialGrid::for_config(&cfg)?;
        let (ks, g): (Vec<f64>, Vec<f64>) = grid.nodes().iter().zip(&s.f).map(|(k, f)| (*k, f.norm_sqr())).unzip();
        let fit = fit_power_law(&ks, &g, (2.0 / s.t, 0.2))?;
        let ok = within(fit.exponent, target, env.tol.ir_slope);
        out.push(check(
            ok,
            format!(
                "delta = {delta}: slope of G_phiphi(k, t = 200) over k in [2/t, 0.2] = {:.3} ({target} +- 0.15, {} points) {}",
                fit.exponent,
                fit.n_points,
                verdict(ok)
            ),
        ));
    }
    Ok(out)
}

fn ac5(env: &Env) -> Result<Vec<Check>> {
    let cfg = env.cfg(-1.0);
    let ctx = Context::new(&cfg)?;
    let run = env.run(&cfg, &[0.0, 300.0])?;
    let widths = [25, 50, 75, 100];
    let rec = entropy_scan(&ctx, &run.states, &widths)?;
    let at = |t0: bool| -> Vec<(f64, f64)> {
        rec.iter()
            .filter(|r| (r.t == 0.0) == t0)
            .map(|r| (r.l, r.s_per_area))
            .collect()
    };
    let early = at(true);
    let (lo, hi) = early.iter().fold((f64::INFINITY, 0.0f64), |(a, b), x| (a.min(x.1), b.max(x.1)));
    let spread = (hi - lo) / lo;
    let ok_area = spread < env.tol.area_law_rel;
    let late = at(false);
    let (ls, ss): (Vec<f64>, Vec<f64>) = late.iter().copied().unzip();
    let line = linear_fit(&ls, &ss)?;
    let mean = ss.iter().sum::<f64>() / ss.len() as f64;
    let resid = line.rms / mean;
    let ok_vol = resid < env.tol.volume_law_residual && line.slope > 0.0;
    Ok(vec![
        check(
            ok_area,
            format!(
                "t = 0: S/area over L in [{:.2}, {:.2}] varies by {:.3}% (< 2%) {}",
                early[0].0,
                early[early.len() - 1].0,
                100.0 * spread,
                verdict(ok_area)
            ),
        ),
        check(
            ok_vol,
            format!(
                "t = 300: S/area = {:.3} + {:.3} L, relative RMS residual {:.3}% (< 3%) {}",
                line.intercept,
                line.slope,
                100.0 * resid,
                verdict(ok_vol)
            ),
        ),
    ])
}

fn dispersion_fit(env: &Env, delta: f64, t: f64, exponent: Option<f64>) -> Result<onquench::analysis::FitReport> {
    let cfg = env.cfg(delta);
    let ctx = Context::new(&cfg)?;
    let run = env.run(&cfg, &[t])?;
    let window = default_dispersion_window(&ctx.geom);
    let qs = log_grid(window.0, window.1, DISPERSION_POINTS);
    let blocks = dispersion(&ctx, &run.states[0], &qs)?;
    let w0: Vec<f64> = blocks.iter().map(|b| b.omegas[0]).collect();
    match exponent {
        Some(x) => fit_fixed_exponent(&qs, &w0, window, x),
        None => fit_power_law(&qs, &w0, window),
    }
}

fn ac6(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (delta, target, tol) in [
        (-1.0, 0.5, env.tol.dispersion_exponent),
        (-4.0, 0.5, env.tol.dispersion_exponent),
        (0.0, 0.25, env.tol.critical_dispersion_exponent),
    ] {
        let fit = dispersion_fit(env, delta, 300.0, None)?;
        let ok = within(fit.exponent, target, tol);
        out.push(check(
            ok,
            format!(
                "delta = {delta}, t = 300: omega0 ~ q^{:.3} over q in [{:.2e}, {}] ({target} +- {tol}) {}",
                fit.exponent,
                fit.window.0,
                fit.window.1,
                verdict(ok)
            ),
        ));
    }
    Ok(out)
}

fn ac7(env: &Env) -> Result<Vec<Check>> {
    let deltas = [-1.0, -2.0, -4.0, -8.0];
    let mut prefactors = Vec::new();
    for &d in &deltas {
        prefactors.push(dispersion_fit(env, d, 300.0, Some(0.5))?.prefactor);
    }
    let fit = prefactor_scan(&deltas, &prefactors)?;
    let ok = within(fit.exponent, 0.5, env.tol.prefactor_gamma);
    let listing: Vec<String> = deltas.iter().zip(&prefactors).map(|(d, p)| format!("{d}: {p:.4}")).collect();
    Ok(vec![check(
        ok,
        format!(
            "prefactors at t = 300 ({}): {:.4} |delta|^-{:.3} (gamma 0.5 +- 0.1) {}",
            listing.join(", "),
            fit.prefactor,
            fit.exponent,
            verdict(ok)
        ),
    )])
}

fn ac8(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (delta, alpha, b) in [(-1.0, 0.51, 0.50), (0.0, 0.29, 0.27)] {
        let cfg = env.cfg(delta);
        let ctx = Context::new(&cfg)?;
        let states = env.states(delta)?;
        let series = gap_series(&gap_points(&ctx, &states, &WIDTHS)?)?;
        let collapse = collapse_fit(&after_light_cone(&series)?, (0.0, 1.0))?;
        let ok = within(collapse.exponent, alpha, env.tol.collapse_alpha);
        out.push(check(
            ok,
            format!(
                "delta = {delta}: collapse alpha = {:.3} over t >= L/2 ({alpha} +- 0.05) {}",
                collapse.exponent,
                verdict(ok)
            ),
        ));
        for s in &series {
            let fit = fit_shifted_power(&s.times, &s.inv_gap, s.l / 2.0)?;
            let ok = within(fit.exponent, b, env.tol.shifted_power_b);
            out.push(check(
                ok,
                format!(
                    "delta = {delta}, L = {:.2}: 1/gap ~ (t - {:.2})^{:.3} ({b} +- 0.05) {}",
                    s.l,
                    fit.offset,
                    fit.exponent,
                    verdict(ok)
                ),
            ));
        }
    }
    Ok(out)
}

fn zero_mode_slope(states: &[ModeState], ctx: &Context, n_s: usize, t_min: f64) -> Result<onquench::analysis::FitReport> {
    let mut ts = Vec::new();
    let mut s0 = Vec::new();
    for s in states.iter().filter(|s| s.t > t_min) {
        let cm = ctx.matrix(s, 0.0)?.truncated(n_s);
        ts.push(s.t);
        s0.push(block_entropy(&EntanglementBlock::from_correlation(&cm)?));
    }
    fit_log_growth(&ts, &s0, t_min)
}

/// The disordered side near criticality on the long, coarse-step run used
/// for the plateau check.
fn long_disordered_run(env: &Env) -> Result<(ModelConfig, CachedRun)> {
    let mut cfg = env.cfg(0.001);
    cfg.t_end = 3000.0;
    cfg.dt = 0.1 / (cfg.k_max * cfg.k_max + cfg.r_i).sqrt();
    let times: Vec<f64> = (0..=20).map(|i| 1000.0 + 100.0 * i as f64).collect();
    let run = env.run(&cfg, &times)?;
    Ok((cfg, run))
}

fn ac9(env: &Env) -> Result<Vec<Check>> {
    let n_s = 100;
    let ctx = Context::new(&env.cfg(-1.0))?;
    let half = n_s as f64 * ctx.geom.a / 2.0;
    let ordered = zero_mode_slope(&env.states(-1.0)?, &ctx, n_s, half)?;
    let ok1 = within(ordered.exponent, 0.5, env.tol.log_slope_ordered);
    let disordered = zero_mode_slope(&env.states(0.001)?, &ctx, n_s, half)?;
    let ok2 = within(disordered.exponent, 0.0, env.tol.log_slope_disordered);
    let (long_cfg, long) = long_disordered_run(env)?;
    let late = zero_mode_slope(&long.states, &Context::new(&long_cfg)?, n_s, 999.0)?;
    Ok(vec![
        check(
            ok1,
            format!(
                "delta = -1, N_s = {n_s}: dS0/dln t over t in ({half:.1}, 300] = {:.3} (0.5 +- 0.1) {}",
                ordered.exponent,
                verdict(ok1)
            ),
        ),
        check(
            ok2,
            format!(
                "delta = 0.001, N_s = {n_s}: dS0/dln t over t in ({half:.1}, 300] = {:.3} (0 +- 0.05) {}",
                disordered.exponent,
                verdict(ok2)
            ),
        ),
        check(
            true,
            format!(
                "diagnostic, not graded: delta = 0.001 over t in [1000, 3000] at the coarse step = {:.3}",
                late.exponent
            ),
        ),
    ])
}

fn ac10(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let n_s = 100;
    let cfg = env.cfg(-1.0);
    let ctx = Context::new(&cfg)?;
    let l = n_s as f64 * ctx.geom.a;
    let snaps = mode_snapshots(&ctx, &env.states(-1.0)?, n_s, 2)?;
    let track = front_track(&snaps, ctx.geom.a, env.tol.front_threshold)?;
    let (speed, meet) = front_speed(&track, 0.0, l / 4.0)?;
    let ok = within(speed, 2.0, 2.0 * env.tol.front_speed_rel);
    out.push(check(
        ok,
        format!(
            "front speed over t in (0, L/4] at threshold {}: {speed:.3} (2 +- 10%) {}",
            env.tol.front_threshold,
            verdict(ok)
        ),
    ));
    let ok = within(meet, l / 4.0, l / 4.0 * env.tol.front_meeting_rel);
    out.push(check(ok, format!("fronts meet at t = {meet:.2} (L/4 = {:.2} +- 10%) {}", l / 4.0, verdict(ok))));

    for (delta, snaps) in [
        (-1.0, snaps.clone()),
        (0.001, mode_snapshots(&ctx, &env.states(0.001)?, n_s, 2)?),
    ] {
        let worst = snaps
            .iter()
            .filter(|s| s.t < l / 2.0)
            .map(|s| (s.omegas[1] - s.omegas[0]).abs() / s.omegas[0])
            .fold(0.0, f64::max);
        let ok = worst < env.tol.degeneracy_splitting;
        out.push(check(
            ok,
            format!("delta = {delta}: max splitting for t < L/2 = {:.2e} (< 10%) {}", worst, verdict(ok)),
        ));
    }

    let late: Vec<_> = snaps.iter().filter(|s| s.t >= l / 2.0).collect();
    let first = late.first().expect("snapshots past the light cone");
    let last = late.last().expect("snapshots past the light cone");
    let mid = late[late.len() / 2];
    let decays = late.windows(2).all(|w| w[1].omegas[0] < w[0].omegas[0]) && last.omegas[0] < 0.5 * first.omegas[0];
    let saturates = ((last.omegas[1] - mid.omegas[1]) / last.omegas[1]).abs() < 0.01;
    let ok = decays && saturates;
    out.push(check(
        ok,
        format!(
            "delta = -1 after L/2: omega0 {:.2e} -> {:.2e} (monotone decay), omega1 {:.4e} -> {:.4e} (saturated within 1%) {}",
            first.omegas[0],
            last.omegas[0],
            mid.omegas[1],
            last.omegas[1],
            verdict(ok)
        ),
    ));
    Ok(out)
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(config.rng_algorithm);
    TestRunner::new_with_rng(config, rng)
}

/// Product of random symplectic generators for the ordering (phi, pi).
fn random_symplectic(n: usize, seeds: &[f64]) -> DMatrix<f64> {
    let mut s = DMatrix::<f64>::identity(2 * n, 2 * n);
    let mut it = seeds.iter().cycle();
    let mut next = || *it.next().unwrap();
    for round in 0..3 {
        let mut g = DMatrix::<f64>::identity(2 * n, 2 * n);
        if round % 2 == 0 {
            // [[I, 0], [B, I]] with B symmetric.
            for i in 0..n {
                for j in 0..=i {
                    let b = next();
                    g[(n + i, j)] = b;
                    g[(n + j, i)] = b;
                }
            }
        } else {
            // [[A, 0], [0, A^-T]] with A near the identity.
            let mut a = DMatrix::<f64>::identity(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] += 0.3 * next();
                }
            }
            let Some(inv) = a.clone().try_inverse() else { continue };
            g.view_mut((0, 0), (n, n)).copy_from(&a);
            g.view_mut((n, n), (n, n)).copy_from(&inv.transpose());
        }
        s = g * s;
    }
    s
}

fn ac11(env: &Env) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let mut cfg = ModelConfig::desk();
    cfg.n_k = 4000;
    let model = QuenchModel::new(cfg.clone())?;
    let table = KernelTable::new(&model.init_modes(), model.grid())?;
    let worst = std::cell::Cell::new(0.0f64);
    let res = runner(24).run(&(2usize..48, 0.0f64..1.0), |(n, qf)| {
        let geom = SlabGeometry {
            n_s: n,
            ..SlabGeometry::new(cfg.k_max, 1, n, 2).unwrap()
        };
        let cm = mixed_correlation_matrix(&table, &geom, qf * geom.q_max, &ChainTransform::new(n)).unwrap();
        let b = EntanglementBlock::from_correlation(&cm).unwrap();
        let dev = b.lambdas.iter().map(|l| (l - 0.5).abs()).fold(0.0, f64::max);
        worst.set(worst.get().max(dev));
        prop_assert!(dev <= env.tol.purity_lambda);
        Ok(())
    });
    out.push(check(
        res.is_ok(),
        format!("full-cut purity: max |lambda - 1/2| = {:.2e} (<= 1e-6) {}", worst.get(), verdict(res.is_ok())),
    ));

    let worst = std::cell::Cell::new(0.0f64);
    let res = runner(256).run(&(0.1f64..10.0, 0.1f64..10.0, -1.0f64..1.0), |(a, b, c)| {
        let c = c * (a * b - 0.25).max(0.0).sqrt();
        let g = DMatrix::from_row_slice(2, 2, &[a, c, c, b]);
        let lambda = symplectic_spectrum(&g).unwrap()[0];
        let exact = (a * b - c * c).sqrt();
        let err = (lambda - exact).abs() / exact;
        worst.set(worst.get().max(err));
        prop_assert!(err < 1e-10);
        Ok(())
    });
    out.push(check(
        res.is_ok(),
        format!("2x2 formula sqrt(ab - c^2): max relative error {:.2e} {}", worst.get(), verdict(res.is_ok())),
    ));

    let worst = std::cell::Cell::new(0.0f64);
    let strategy = (
        prop::collection::vec(0.5f64..20.0, 1..6),
        prop::collection::vec(-1.0f64..1.0, 64),
    );
    let res = runner(64).run(&strategy, |(nus, seeds)| {
        let n = nus.len();
        let mut d = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for (i, &nu) in nus.iter().enumerate() {
            d[(i, i)] = nu;
            d[(n + i, n + i)] = nu;
        }
        let s = random_symplectic(n, &seeds);
        let g = &s * d * s.transpose();
        let g = (&g + g.transpose()) * 0.5;
        let got = symplectic_spectrum(&g).unwrap();
        let mut want = nus.clone();
        want.sort_by(|a, b| b.total_cmp(a));
        let err = got.iter().zip(&want).map(|(x, y)| (x - y).abs() / y).fold(0.0, f64::max);
        worst.set(worst.get().max(err));
        prop_assert!(err < 1e-7, "{got:?} vs {want:?}");
        Ok(())
    });
    out.push(check(
        res.is_ok(),
        format!("Williamson invariance under random symplectic maps: max relative error {:.2e} {}", worst.get(), verdict(res.is_ok())),
    ));

    let evolved = model.evolve(&[3.0]).map(|t| t.checkpoints[0].clone())?;
    let table = KernelTable::new(&evolved, model.grid())?;
    let worst = std::cell::Cell::new(0.0f64);
    let res = runner(24).run(&(64usize..1024, 1usize..16, 0.0f64..1.0), |(n_tot, n_s, qf)| {
        let geom = SlabGeometry::new(cfg.k_max, n_s.min(n_tot - 1), n_tot, 2).unwrap();
        let q = qf * geom.q_max;
        let fast = mixed_correlation_matrix(&table, &geom, q, &ChainTransform::new(n_tot)).unwrap();
        let slow = mixed_correlation_matrix_direct(&table, &geom, q).unwrap();
        let (a, b) = (fast.assemble(), slow.assemble());
        let err = (&a - &b).amax() / b.amax();
        worst.set(worst.get().max(err));
        prop_assert!(err <= env.tol.transform_rel);
        Ok(())
    });
    out.push(check(
        res.is_ok(),
        format!("FFT vs direct cosine sums: max relative difference {:.2e} (<= 1e-10) {}", worst.get(), verdict(res.is_ok())),
    ));
    Ok(out)
}

type Criterion = fn(&Env) -> Result<Vec<Check>>;

fn main() {
    let root = std::env::var_os("ONQUENCH_ACCEPTANCE_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-cache"));
    let env = Env {
        cache: TrajectoryCache::new(&root),
        tol: Tolerances::default(),
    };
    let criteria: [(&str, &str, Criterion); 11] = [
        ("AC1", "critical mass", ac1),
        ("AC2", "effective-mass asymptotics", ac2),
        ("AC3", "conservation and free-field oracle", ac3),
        ("AC4", "correlator infrared exponent", ac4),
        ("AC5", "area to volume law", ac5),
        ("AC6", "dispersion exponents", ac6),
        ("AC7", "dispersion prefactor scaling", ac7),
        ("AC8", "gap collapse and shifted power law", ac8),
        ("AC9", "logarithmic zero-mode growth", ac9),
        ("AC10", "entanglement mode structure", ac10),
        ("AC11", "purity and oracle properties", ac11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC")).collect();
    println!("acceptance suite (cache: {})", root.display());
    let mut unexpected = Vec::new();
    for (id, title, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == id) {
            continue;
        }
        let start = Instant::now();
        let (ok, lines) = match f(&env) {
            Ok(checks) => (checks.iter().all(|c| c.ok), checks.into_iter().map(|c| c.text).collect()),
            Err(e) => (false, vec![format!("error: {e}")]),
        };
        let known = KNOWN_SHORTFALLS.iter().find(|(k, _)| *k == id);
        let tag = match (ok, known) {
            (true, _) => "PASS",
            (false, Some(_)) => "FAIL (known shortfall)",
            (false, None) => "FAIL",
        };
        println!("{id} {tag} {title} [{:.1} s]", start.elapsed().as_secs_f64());
        for l in lines {
            println!("    {l}");
        }
        if let (false, Some((_, why))) = (ok, known) {
            println!("    note: {why}");
        }
        if !ok && known.is_none() {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}
