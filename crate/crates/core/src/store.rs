//! On-disk cache of trajectories keyed by the dynamics hash.
//!
//! A run directory holds `step_<n>.onq` snapshots (with sidecars) and
//! `series.csv`, the `(t, r_eff)` history from `t = 0` up to the furthest
//! step integrated so far. Requests for missing snapshots resume from the
//! latest cached snapshot that precedes them.

use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{read_checkpoint, write_atomic, write_checkpoint};
use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::evolve::{ModeState, QuenchModel};

/// Snapshots at the requested times plus the effective-mass history.
#[derive(Debug, Clone)]
pub struct CachedRun {
    pub states: Vec<ModeState>,
    pub series: Vec<(f64, f64)>,
    /// Number of integration steps actually performed for this request.
    pub steps_integrated: u64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryCache {
    root: PathBuf,
}

impl TrajectoryCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        TrajectoryCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, cfg: &ModelConfig) -> PathBuf {
        self.root.join("trajectories").join(&cfg.dynamics_hash()[..16])
    }

    fn snapshot_path(dir: &Path, step: u64) -> PathBuf {
        dir.join(format!("step_{step:010}.onq"))
    }

    fn cached_steps(dir: &Path) -> Vec<u64> {
        let Ok(entries) = fs::read_dir(dir) else {
            return Vec::new();
        };
        let mut steps: Vec<u64> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_prefix("step_")?.strip_suffix(".onq")?.parse().ok()
            })
            .collect();
        steps.sort_unstable();
        steps
    }

    fn read_series(path: &Path) -> Vec<(f64, f64)> {
        let Ok(text) = fs::read_to_string(path) else {
            return Vec::new();
        };
        text.lines()
            .skip(1)
            .map_while(|l| {
                let (a, b) = l.split_once(',')?;
                Some((a.parse().ok()?, b.parse().ok()?))
            })
            .collect()
    }

    fn write_series(path: &Path, series: &[(f64, f64)]) -> Result<()> {
        let mut out = String::with_capacity(series.len() * 40);
        out.push_str("t,r_eff\n");
        for (t, r) in series {
            out.push_str(&format!("{t},{r}\n"));
        }
        write_atomic(path, out.as_bytes())
    }

    /// Snapshots at `times` (snapped to the step grid) and the series up to
    /// `cfg.t_end`, integrating only what the cache lacks.
    pub fn run(&self, cfg: &ModelConfig, times: &[f64]) -> Result<CachedRun> {
        let model = QuenchModel::new(cfg.clone())?;
        let targets = model.step_targets(times)?;
        let n_end = cfg.n_steps();
        let dir = self.run_dir(cfg);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let series_path = dir.join("series.csv");

        let cached = Self::cached_steps(&dir);
        let mut series = Self::read_series(&series_path);
        let series_steps = series.len().saturating_sub(1) as u64;
        let missing: Vec<u64> = targets
            .iter()
            .copied()
            .filter(|s| cached.binary_search(s).is_err())
            .collect();

        let mut fresh: Vec<ModeState> = Vec::new();
        let mut steps_integrated = 0;
        if !missing.is_empty() || series_steps < n_end {
            // Resume point: latest snapshot not beyond the first missing
            // target and inside the contiguous cached series.
            let limit = missing.first().copied().unwrap_or(n_end).min(series_steps);
            let start = match cached.iter().rev().find(|&&s| s <= limit) {
                Some(&s) => read_checkpoint(&Self::snapshot_path(&dir, s))?.0,
                None => model.init_modes(),
            };
            let n0 = (start.t / cfg.dt).round() as u64;
            let tail = model.evolve_steps(start, &missing, |s| {
                let step = (s.t / cfg.dt).round() as u64;
                write_checkpoint(&Self::snapshot_path(&dir, step), s, cfg)?;
                fresh.push(s.clone());
                Ok(())
            })?;
            steps_integrated = n_end - n0;
            series.truncate(n0 as usize);
            series.extend(tail);
            Self::write_series(&series_path, &series)?;
        }

        let mut states = Vec::with_capacity(targets.len());
        for &step in &targets {
            let time = step as f64 * cfg.dt;
            match fresh.iter().find(|s| s.t == time) {
                Some(s) => states.push(s.clone()),
                None => states.push(read_checkpoint(&Self::snapshot_path(&dir, step))?.0),
            }
        }
        series.truncate(n_end as usize + 1);
        Ok(CachedRun {
            states,
            series,
            steps_integrated,
        })
    }
}
