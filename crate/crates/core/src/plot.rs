//! Minimal SVG rendering of the result tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::fit_power_law;
use crate::checkpoint::write_atomic;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `t, r_eff`: log-log decay of the magnitude with a `t^-2` guide.
    REff,
    /// `t, q_par, omega0`: log-log dispersion with a fitted guide.
    Dispersion,
    /// `t, L, S_per_area` against linear time.
    Entropy,
    /// `t, L, inv_gap`: log-log inverse gap.
    Gap,
    /// `t, L, S_zero_mode` against logarithmic time.
    ZeroMode,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "r_eff" | "r-eff" => PlotKind::REff,
            "dispersion" => PlotKind::Dispersion,
            "entropy" => PlotKind::Entropy,
            "gap" => PlotKind::Gap,
            "zero_mode" | "zero-mode" => PlotKind::ZeroMode,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown plot kind `{other}` (expected r_eff, dispersion, entropy, gap, zero_mode)"
                )))
            }
        })
    }
}

impl PlotKind {
    /// Columns as `(x, y, group)`.
    fn columns(self) -> (&'static str, &'static str, Option<&'static str>) {
        match self {
            PlotKind::REff => ("t", "r_eff", None),
            PlotKind::Dispersion => ("q_par", "omega0", Some("t")),
            PlotKind::Entropy => ("t", "S_per_area", Some("L")),
            PlotKind::Gap => ("t", "inv_gap", Some("L")),
            PlotKind::ZeroMode => ("t", "S_zero_mode", Some("L")),
        }
    }

    fn y_label(self) -> &'static str {
        match self {
            PlotKind::REff => "|r_eff|",
            other => other.columns().1,
        }
    }

    fn log_axes(self) -> (bool, bool) {
        match self {
            PlotKind::REff | PlotKind::Dispersion | PlotKind::Gap => (true, true),
            PlotKind::Entropy => (false, false),
            PlotKind::ZeroMode => (true, false),
        }
    }
}

type Series = Vec<(String, Vec<(f64, f64)>)>;

fn read_table(text: &str, kind: PlotKind) -> Result<Series> {
    let (xc, yc, gc) = kind.columns();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let (xi, yi) = (find(xc)?, find(yc)?);
    let gi = gc.map(find).transpose()?;
    let mut groups: BTreeMap<u64, (String, Vec<(f64, f64)>)> = BTreeMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Schema(e.to_string()))?;
        let num = |i: usize, name: &str| -> Result<f64> {
            let field = rec.get(i).unwrap_or("").trim();
            field
                .parse()
                .map_err(|_| Error::Schema(format!("column `{name}` row {}: `{field}` is not a number", row + 1)))
        };
        let x = num(xi, xc)?;
        // r_eff changes sign after a quench; the log axis shows its magnitude.
        let y = if kind == PlotKind::REff { num(yi, yc)?.abs() } else { num(yi, yc)? };
        let (key, label) = match (gi, gc) {
            (Some(i), Some(name)) => {
                let g = num(i, name)?;
                (g.to_bits(), format!("{name} = {g}"))
            }
            _ => (0, kind.y_label().to_string()),
        };
        groups.entry(key).or_insert_with(|| (label, Vec::new())).1.push((x, y));
    }
    if groups.is_empty() {
        return Err(Error::Schema("table has no rows".into()));
    }
    let mut out: Vec<(String, Vec<(f64, f64)>)> = groups.into_values().collect();
    // BTreeMap on raw bits orders positive floats numerically.
    for (_, pts) in &mut out {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

struct Axis {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Option<Axis> {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return None;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        Some(Axis { log, lo, hi })
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            let step = ((b - a) / 6).max(1);
            (a..=b)
                .step_by(step as usize)
                .map(|e| (10f64.powi(e), format!("1e{e}")))
                .collect()
        } else {
            (0..=4)
                .map(|i| {
                    let v = self.lo + (self.hi - self.lo) * i as f64 / 4.0;
                    (v, format!("{v:.3}"))
                })
                .collect()
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn guide(kind: PlotKind, series: &Series) -> Option<(String, Vec<(f64, f64)>)> {
    let (_, pts) = series.last()?;
    let (x0, x1) = (pts.first()?.0, pts.last()?.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().filter(|p| p.0 > 0.0 && p.1 > 0.0).unzip();
    let (exponent, prefactor) = match kind {
        PlotKind::REff => {
            let (xl, yl) = (*xs.last()?, *ys.last()?);
            (-2.0, yl * xl * xl)
        }
        PlotKind::Dispersion => {
            let f = fit_power_law(&xs, &ys, (x0, 0.1f64.min(x1).max(x0 * 1.0001))).ok()?;
            (f.exponent, f.prefactor)
        }
        _ => return None,
    };
    let x0 = x0.max(f64::MIN_POSITIVE);
    let line = (0..=32)
        .map(|i| {
            let x = x0 * (x1 / x0).powf(i as f64 / 32.0);
            (x, prefactor * x.powf(exponent))
        })
        .collect();
    Some((format!("~ x^{exponent:.3}"), line))
}

fn render(kind: PlotKind, series: &Series) -> Result<String> {
    let (lx, ly) = kind.log_axes();
    let usable = |p: &(f64, f64)| (!lx || p.0 > 0.0) && (!ly || p.1 > 0.0) && p.0.is_finite() && p.1.is_finite();
    let all = || series.iter().flat_map(|s| s.1.iter()).filter(|p| usable(p));
    let (Some(ax), Some(ay)) = (Axis::fit(all().map(|p| p.0), lx), Axis::fit(all().map(|p| p.1), ly)) else {
        return Err(Error::Schema("no plottable rows (non-positive values on a log axis?)".into()));
    };
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let px = |x: f64| LEFT + pw * ax.frac(x);
    let py = |y: f64| TOP + ph * (1.0 - ay.frac(y));
    let (xc, _, _) = kind.columns();
    let yc = kind.y_label();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for (v, label) in ax.ticks() {
        let x = px(v);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
    }
    for (v, label) in ay.ticks() {
        let y = py(v);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            y + 4.0
        );
    }
    let xlabel = if kind == PlotKind::ZeroMode { "t (log scale)" } else { xc };
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{xlabel}</text><text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{yc}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        TOP + ph / 2.0,
        TOP + ph / 2.0
    );
    let mut polyline = |pts: &[(f64, f64)], color: &str, dash: &str| {
        let coords: Vec<String> = pts
            .iter()
            .filter(|p| usable(p))
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            coords.join(" ")
        );
    };
    for (i, (_, pts)) in series.iter().enumerate() {
        polyline(pts, PALETTE[i % PALETTE.len()], "");
    }
    let g = guide(kind, series);
    if let Some((_, line)) = &g {
        // Clip the guide to the plotted range.
        let inside: Vec<(f64, f64)> = line
            .iter()
            .copied()
            .filter(|p| usable(p) && (0.0..=1.0).contains(&ay.frac(p.1)))
            .collect();
        polyline(&inside, "gray", r#" stroke-dasharray="5,4""#);
    }
    let labels = series
        .iter()
        .map(|x| x.0.clone())
        .chain(g.map(|x| x.0))
        .enumerate()
        .collect::<Vec<_>>();
    for (i, label) in labels {
        let color = if i < series.len() { PALETTE[i % PALETTE.len()] } else { "gray" };
        let y = TOP + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{y:.2}" fill="{color}" text-anchor="end">{label}</text>"#,
            W - RIGHT - 8.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Renders `text` (CSV) as an SVG document.
pub fn render_table(text: &str, kind: PlotKind) -> Result<String> {
    render(kind, &read_table(text, kind)?)
}

/// Reads the CSV at `table` and writes an SVG to `out`. Nothing is written
/// when the table does not fit the plot kind.
pub fn emit_plot(table: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(table).map_err(|e| Error::io(table, e))?;
    let svg = render_table(&text, kind)?;
    write_atomic(out, svg.as_bytes())
}
