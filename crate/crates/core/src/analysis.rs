//! Scaling fits, data collapse and front tracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::ModeProfile;

/// Smallest number of points any fit accepts.
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    PowerLaw,
    ShiftedPower,
    LogGrowth,
    Collapse,
}

/// Outcome of a fit.
///
/// For `log_growth` the `exponent` is the slope in `ln t` and `prefactor`
/// the additive constant. For `collapse` the `prefactor` is that of a
/// power-law fit to the collapsed master curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub kind: FitKind,
    pub exponent: f64,
    pub prefactor: f64,
    pub offset: f64,
    pub residual: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

impl FitReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit reports always serialize")
    }
}

/// Inverse entanglement gap of one slab width over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSeries {
    pub l: f64,
    pub times: Vec<f64>,
    pub inv_gap: Vec<f64>,
}

impl GapSeries {
    pub fn new(l: f64, times: Vec<f64>, inv_gap: Vec<f64>) -> Result<Self> {
        if times.len() != inv_gap.len() {
            return Err(Error::InvalidArgument(format!(
                "gap series lengths differ ({} times, {} values)",
                times.len(),
                inv_gap.len()
            )));
        }
        if inv_gap.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidArgument("inverse gaps must be positive".into()));
        }
        Ok(GapSeries { l, times, inv_gap })
    }
}

/// Ordinary least squares `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::Fit(format!("need >= 2 paired points (got {n}, {})", y.len())));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        rms: (ss_res / nf).sqrt(),
        r_squared,
    })
}

fn in_window(xs: &[f64], ys: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if xs.len() != ys.len() {
        return Err(Error::Fit("x and y lengths differ".into()));
    }
    if !(window.0 < window.1) {
        return Err(Error::Fit(format!("empty window [{}, {}]", window.0, window.1)));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter(|(x, _)| **x >= window.0 && **x <= window.1)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if x.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "{} points in window [{}, {}], need {MIN_POINTS}",
            x.len(),
            window.0,
            window.1
        )));
    }
    Ok((x, y))
}

fn logs(v: &[f64]) -> Result<Vec<f64>> {
    if v.iter().any(|&a| !(a > 0.0)) {
        return Err(Error::Fit("log-log fit needs positive data".into()));
    }
    Ok(v.iter().map(|a| a.ln()).collect())
}

/// `y = prefactor x^exponent` by least squares in log-log space. The
/// residual is the RMS of the log residuals.
pub fn fit_power_law(xs: &[f64], ys: &[f64], window: (f64, f64)) -> Result<FitReport> {
    let (x, y) = in_window(xs, ys, window)?;
    let line = linear_fit(&logs(&x)?, &logs(&y)?)?;
    Ok(FitReport {
        kind: FitKind::PowerLaw,
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        offset: 0.0,
        residual: line.rms,
        window,
        n_points: x.len(),
    })
}

/// Prefactor `c` of `y = c x^exponent` with the exponent held fixed.
pub fn fit_fixed_exponent(xs: &[f64], ys: &[f64], window: (f64, f64), exponent: f64) -> Result<FitReport> {
    let (x, y) = in_window(xs, ys, window)?;
    let lx = logs(&x)?;
    let ly = logs(&y)?;
    let resid: Vec<f64> = lx.iter().zip(&ly).map(|(a, b)| b - exponent * a).collect();
    let mean = resid.iter().sum::<f64>() / resid.len() as f64;
    let rms = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / resid.len() as f64).sqrt();
    Ok(FitReport {
        kind: FitKind::PowerLaw,
        exponent,
        prefactor: mean.exp(),
        offset: 0.0,
        residual: rms,
        window,
        n_points: x.len(),
    })
}

/// Fits `prefactor = c |delta|^{-gamma}` and reports `gamma` as the exponent.
pub fn prefactor_scan(deltas: &[f64], prefactors: &[f64]) -> Result<FitReport> {
    if deltas.len() != prefactors.len() {
        return Err(Error::Fit("delta and prefactor lengths differ".into()));
    }
    if deltas.iter().any(|&d| !(d < 0.0)) {
        return Err(Error::Fit("prefactor scan needs delta < 0 throughout".into()));
    }
    if deltas.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "prefactor scan needs {MIN_POINTS} quench depths (got {})",
            deltas.len()
        )));
    }
    let abs: Vec<f64> = deltas.iter().map(|d| d.abs()).collect();
    let lo = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = abs.iter().copied().fold(0.0, f64::max);
    let mut rep = fit_power_law(&abs, prefactors, (lo, hi))?;
    rep.exponent = -rep.exponent;
    Ok(rep)
}

/// Piecewise-linear interpolation of `(lx, ly)` at `x`; `lx` ascending.
fn interp(lx: &[f64], ly: &[f64], x: f64) -> f64 {
    let i = lx.partition_point(|&a| a <= x).clamp(1, lx.len() - 1);
    let (x0, x1) = (lx[i - 1], lx[i]);
    let s = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    ly[i - 1] + s * (ly[i] - ly[i - 1])
}

/// Number of points of the common logarithmic grid used by `collapse_fit`.
pub const COLLAPSE_GRID: usize = 64;

/// Log-space RMS spread of the curves `inv_gap / L^{2 alpha}` against `t/L`
/// on a common logarithmic grid of the overlapping range.
pub fn collapse_spread(series: &[GapSeries], alpha: f64) -> Result<f64> {
    let (lo, hi) = collapse_overlap(series)?;
    let curves: Vec<(Vec<f64>, Vec<f64>)> = series
        .iter()
        .map(|s| {
            let mut pts: Vec<(f64, f64)> = s
                .times
                .iter()
                .zip(&s.inv_gap)
                .filter(|(t, _)| **t > 0.0)
                .map(|(t, g)| ((t / s.l).ln(), g.ln() - 2.0 * alpha * s.l.ln()))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts.into_iter().unzip()
        })
        .collect();
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut total = 0.0;
    for g in 0..COLLAPSE_GRID {
        let x = llo + (lhi - llo) * g as f64 / (COLLAPSE_GRID - 1) as f64;
        let vals: Vec<f64> = curves.iter().map(|(cx, cy)| interp(cx, cy, x)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        total += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    }
    Ok((total / COLLAPSE_GRID as f64).sqrt())
}

fn collapse_overlap(series: &[GapSeries]) -> Result<(f64, f64)> {
    let mut ls: Vec<f64> = series.iter().map(|s| s.l).collect();
    ls.sort_by(f64::total_cmp);
    ls.dedup();
    if ls.len() < 3 {
        return Err(Error::Fit(format!("collapse needs 3 distinct sizes (got {})", ls.len())));
    }
    let mut lo = 0.0f64;
    let mut hi = f64::INFINITY;
    for s in series {
        let scaled: Vec<f64> = s.times.iter().filter(|t| **t > 0.0).map(|t| t / s.l).collect();
        if scaled.len() < 2 {
            return Err(Error::Fit(format!("series at L = {} has < 2 positive times", s.l)));
        }
        lo = lo.max(scaled.iter().copied().fold(f64::INFINITY, f64::min));
        hi = hi.min(scaled.iter().copied().fold(0.0, f64::max));
    }
    if !(lo < hi) {
        return Err(Error::Fit(format!(
            "rescaled time windows do not overlap ({lo} >= {hi})"
        )));
    }
    Ok((lo, hi))
}

/// Golden-section minimization of `f` on `[a, b]` to abscissa tolerance `tol`.
pub fn golden_section(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Coarse scan over `n` points followed by golden-section refinement in the
/// neighbouring bracket. Returns the minimizer and whether it sits on an edge.
fn scan_then_refine(f: &mut impl FnMut(f64) -> f64, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, bool) {
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let best = xs
        .iter()
        .map(|&x| f(x))
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or(0, |(i, _)| i);
    let a = xs[best.saturating_sub(1)];
    let b = xs[(best + 1).min(n - 1)];
    let x = golden_section(&mut *f, a, b, tol);
    (x, best == 0 || best == n - 1)
}

/// Finds `alpha` in `alpha_range` that best collapses `inv_gap / L^{2 alpha}`
/// against `t / L`.
pub fn collapse_fit(series: &[GapSeries], alpha_range: (f64, f64)) -> Result<FitReport> {
    let (lo, hi) = collapse_overlap(series)?;
    if !(alpha_range.0 < alpha_range.1) {
        return Err(Error::Fit("empty alpha range".into()));
    }
    let mut cost = |a: f64| collapse_spread(series, a).unwrap_or(f64::INFINITY);
    let (alpha, _) = scan_then_refine(&mut cost, alpha_range.0, alpha_range.1, 41, 1e-5);
    let residual = collapse_spread(series, alpha)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = series
        .iter()
        .flat_map(|s| {
            s.times
                .iter()
                .zip(&s.inv_gap)
                .map(move |(t, g)| (t / s.l, g / s.l.powf(2.0 * alpha)))
        })
        .filter(|(x, _)| *x >= lo && *x <= hi)
        .unzip();
    let master = fit_power_law(&xs, &ys, (lo, hi))?;
    Ok(FitReport {
        kind: FitKind::Collapse,
        exponent: alpha,
        prefactor: master.prefactor,
        offset: 0.0,
        residual,
        window: (lo, hi),
        n_points: xs.len(),
    })
}

/// `y = c (t - a)^b` for `t > t_min`: log-linear fit for each trial `a`,
/// minimizing the log residual over `a`.
pub fn fit_shifted_power(ts: &[f64], ys: &[f64], t_min: f64) -> Result<FitReport> {
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (t, y) = in_window(ts, ys, (t_min.next_up(), t_max))?;
    let ly = logs(&y)?;
    let first = t.iter().copied().fold(f64::INFINITY, f64::min);
    let span = t_max - first;
    let fit_at = |a: f64| -> Option<LineFit> {
        let lx: Vec<f64> = t.iter().map(|v| (v - a).ln()).collect();
        linear_fit(&lx, &ly).ok()
    };
    let mut cost = |a: f64| fit_at(a).map_or(f64::INFINITY, |l| l.rms);
    let lo = first - 10.0 * span;
    let hi = first - 1e-9 * span.max(1.0);
    let (a, edge) = scan_then_refine(&mut cost, lo, hi, 801, 1e-12 * span.max(1.0));
    if edge {
        return Err(Error::Fit(format!(
            "offset search did not converge inside [{lo}, {hi}]"
        )));
    }
    let line = fit_at(a).ok_or_else(|| Error::Fit("offset fit failed".into()))?;
    Ok(FitReport {
        kind: FitKind::ShiftedPower,
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        offset: a,
        residual: line.rms,
        window: (t_min, t_max),
        n_points: t.len(),
    })
}

/// `S0 = slope ln t + const` for `t > t_min`. Residual is the RMS
/// deviation relative to the RMS of the data.
pub fn fit_log_growth(ts: &[f64], s0: &[f64], t_min: f64) -> Result<FitReport> {
    let t_max = ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (t, s) = in_window(ts, s0, (t_min.next_up(), t_max))?;
    let line = linear_fit(&logs(&t)?, &s)?;
    let scale = (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
    Ok(FitReport {
        kind: FitKind::LogGrowth,
        exponent: line.slope,
        prefactor: line.intercept,
        offset: 0.0,
        residual: if scale > 0.0 { line.rms / scale } else { line.rms },
        window: (t_min, t_max),
        n_points: t.len(),
    })
}

/// Front positions (site units) measured from each boundary of the
/// reflection-symmetrized profile: where the density accumulated from that
/// boundary reaches `threshold` of the half mass.
pub fn front_position(profile: &ModeProfile, threshold: f64) -> Result<(f64, f64)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "front threshold must lie in (0, 1) (got {threshold})"
        )));
    }
    let n = profile.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty profile".into()));
    }
    let sym: Vec<f64> = (0..n)
        .map(|z| 0.5 * (profile.density[z] + profile.density[n - 1 - z]))
        .collect();
    let total: f64 = sym.iter().sum();
    let target = threshold * 0.5 * total;
    // Cumulative mass through site z, interpolated linearly between sites.
    let mut acc = 0.0;
    let mut z_left = (n - 1) as f64 / 2.0;
    for (z, d) in sym.iter().enumerate() {
        if acc + d >= target {
            z_left = if z == 0 { 0.0 } else { (z - 1) as f64 + (target - acc) / d };
            break;
        }
        acc += d;
    }
    let z_left = z_left.max(0.0);
    Ok((z_left, (n - 1) as f64 - z_left))
}

/// `|omega1 - omega0| / max(omega0, tiny)` per time.
pub fn degeneracy_splitting(omega0: &[f64], omega1: &[f64], times: &[f64]) -> Result<Vec<f64>> {
    if omega0.len() != omega1.len() || omega0.len() != times.len() {
        return Err(Error::InvalidArgument("splitting inputs differ in length".into()));
    }
    Ok(omega0
        .iter()
        .zip(omega1)
        .map(|(a, b)| (b - a).abs() / a.max(f64::MIN_POSITIVE))
        .collect())
}

/// Default tolerances of the scaling checks, in one place.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub critical_mass_rel: f64,
    pub critical_amplitude_rel: f64,
    pub massless_r_eff: f64,
    pub wronskian: f64,
    pub energy_drift: f64,
    pub free_field: f64,
    pub ir_slope: f64,
    pub area_law_rel: f64,
    pub volume_law_residual: f64,
    pub dispersion_exponent: f64,
    pub critical_dispersion_exponent: f64,
    pub prefactor_gamma: f64,
    pub collapse_alpha: f64,
    pub shifted_power_b: f64,
    pub log_slope_ordered: f64,
    pub log_slope_disordered: f64,
    pub front_speed_rel: f64,
    pub front_meeting_rel: f64,
    pub degeneracy_splitting: f64,
    pub purity_lambda: f64,
    pub transform_rel: f64,
    /// Cumulative half-mass fraction that locates a front.
    pub front_threshold: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            critical_mass_rel: 0.01,
            critical_amplitude_rel: 0.10,
            massless_r_eff: 1e-4,
            wronskian: 1e-6,
            energy_drift: 1e-6,
            free_field: 1e-8,
            ir_slope: 0.15,
            area_law_rel: 0.02,
            volume_law_residual: 0.03,
            dispersion_exponent: 0.05,
            critical_dispersion_exponent: 0.07,
            prefactor_gamma: 0.1,
            collapse_alpha: 0.05,
            shifted_power_b: 0.05,
            log_slope_ordered: 0.1,
            log_slope_disordered: 0.05,
            front_speed_rel: 0.10,
            front_meeting_rel: 0.10,
            degeneracy_splitting: 0.10,
            purity_lambda: 1e-6,
            transform_rel: 1e-10,
            front_threshold: 0.9,
        }
    }
}

/// Late-time slope over the final 20% of a time window.
pub fn late_slope(ts: &[f64], ys: &[f64]) -> Result<f64> {
    let n = ts.len();
    if n != ys.len() || n < 2 {
        return Err(Error::Fit("late slope needs >= 2 paired points".into()));
    }
    let t_end = ts[n - 1];
    let t_start = ts[0] + 0.8 * (t_end - ts[0]);
    let (x, y): (Vec<f64>, Vec<f64>) = ts
        .iter()
        .zip(ys)
        .filter(|(t, _)| **t >= t_start)
        .map(|(a, b)| (*a, *b))
        .unzip();
    let (x, y) = if x.len() >= 2 {
        (x, y)
    } else {
        (ts[n - 2..].to_vec(), ys[n - 2..].to_vec())
    };
    Ok(linear_fit(&x, &y)?.slope)
}
