//! Run parameters and their JSON form.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Spatial dimension. Only three dimensions are supported.
pub const DIMENSION: u32 = 3;

/// Default integration step in units of the fastest initial period scale,
/// `dt = DT_FACTOR / sqrt(k_max^2 + r_i)`.
pub const DT_FACTOR: f64 = 0.025;

/// Physical and numerical parameters of a quench run.
///
/// The post-quench mass `r` is never set directly; it follows from `delta`
/// and the critical mass computed on the radial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct ModelConfig {
    /// Pre-quench mass.
    pub r_i: f64,
    /// Quartic coupling.
    pub u: f64,
    /// Gaussian regulator scale.
    pub lambda: f64,
    /// Radial momentum cutoff.
    pub k_max: f64,
    /// Number of radial grid points, including both endpoints.
    pub n_k: usize,
    /// Quench depth `(r - r_c) / |r_c|`.
    pub delta: f64,
    /// Integration step.
    pub dt: f64,
    /// Slab sites.
    pub n_s: usize,
    /// Chain sites along z.
    pub n_tot: usize,
    /// Transverse momentum samples.
    pub n_par: usize,
    pub t_end: f64,
    pub checkpoint_times: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    r_i: Option<f64>,
    u: Option<f64>,
    lambda: Option<f64>,
    k_max: Option<f64>,
    n_k: Option<usize>,
    delta: Option<f64>,
    dt: Option<f64>,
    n_s: Option<usize>,
    n_tot: Option<usize>,
    n_par: Option<usize>,
    t_end: Option<f64>,
    checkpoint_times: Option<Vec<f64>>,
}

impl TryFrom<RawConfig> for ModelConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let base = ModelConfig::reference();
        let r_i = raw.r_i.unwrap_or(base.r_i);
        let lambda = raw.lambda.unwrap_or(base.lambda);
        let k_max = raw.k_max.unwrap_or(10.0 * lambda);
        let cfg = ModelConfig {
            r_i,
            u: raw.u.unwrap_or(base.u),
            lambda,
            k_max,
            n_k: raw.n_k.unwrap_or(base.n_k),
            delta: raw.delta.unwrap_or(base.delta),
            dt: raw.dt.unwrap_or_else(|| default_dt(k_max, r_i)),
            n_s: raw.n_s.unwrap_or(base.n_s),
            n_tot: raw.n_tot.unwrap_or(base.n_tot),
            n_par: raw.n_par.unwrap_or(base.n_par),
            t_end: raw.t_end.unwrap_or(base.t_end),
            checkpoint_times: raw.checkpoint_times.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `DT_FACTOR / sqrt(k_max^2 + r_i)`.
pub fn default_dt(k_max: f64, r_i: f64) -> f64 {
    DT_FACTOR / (k_max * k_max + r_i).sqrt()
}

impl ModelConfig {
    /// Parameters of the reference study: `r_i = 100`, `u = 10`,
    /// `Lambda = pi/2`, `k_max = 10 Lambda`, `10^5` radial points.
    pub fn reference() -> Self {
        let lambda = PI / 2.0;
        let k_max = 10.0 * lambda;
        let r_i = 100.0;
        ModelConfig {
            r_i,
            u: 10.0,
            lambda,
            k_max,
            n_k: 100_000,
            delta: 0.0,
            dt: default_dt(k_max, r_i),
            n_s: 100,
            n_tot: 500_000,
            n_par: 200,
            t_end: 1000.0,
            checkpoint_times: Vec::new(),
        }
    }

    /// Reduced grids that keep a full pipeline run within minutes on one core.
    pub fn desk() -> Self {
        ModelConfig {
            n_k: 20_000,
            n_tot: 60_000,
            n_par: 100,
            t_end: 300.0,
            ..Self::reference()
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    /// Replace `k_max` and reset `dt` to its default for the new cutoff.
    pub fn with_k_max(mut self, k_max: f64) -> Self {
        self.k_max = k_max;
        self.dt = default_dt(k_max, self.r_i);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.r_i > 0.0) {
            return bad(format!("r_i must be > 0 (got {})", self.r_i));
        }
        if !(self.u >= 0.0) {
            return bad(format!("u must be >= 0 (got {})", self.u));
        }
        if !(self.lambda > 0.0) {
            return bad(format!("lambda must be > 0 (got {})", self.lambda));
        }
        if !(self.k_max >= 2.0 * self.lambda) {
            return bad(format!(
                "k_max must be >= 2 lambda (got k_max = {}, lambda = {})",
                self.k_max, self.lambda
            ));
        }
        if self.n_k < 3 {
            return bad(format!("n_k must be >= 3 (got {})", self.n_k));
        }
        if !self.delta.is_finite() {
            return bad("delta must be finite".into());
        }
        if !(self.dt > 0.0) {
            return bad(format!("dt must be > 0 (got {})", self.dt));
        }
        let stiffness = self.dt * (self.k_max * self.k_max + self.r_i).sqrt();
        if stiffness > 0.5 {
            return bad(format!(
                "dt * sqrt(k_max^2 + r_i) = {stiffness} exceeds the stability bound 0.5"
            ));
        }
        if self.n_s == 0 || self.n_s >= self.n_tot {
            return bad(format!(
                "need 0 < n_s < n_tot (got n_s = {}, n_tot = {})",
                self.n_s, self.n_tot
            ));
        }
        if self.n_par < 2 {
            return bad(format!("n_par must be >= 2 (got {})", self.n_par));
        }
        if !(self.t_end >= 0.0) {
            return bad(format!("t_end must be >= 0 (got {})", self.t_end));
        }
        for w in self.checkpoint_times.windows(2) {
            if !(w[0] < w[1]) {
                return bad("checkpoint_times must be strictly increasing".into());
            }
        }
        if let Some(&t) = self
            .checkpoint_times
            .iter()
            .find(|&&t| !(0.0..=self.t_end).contains(&t))
        {
            return bad(format!("checkpoint time {t} outside [0, t_end = {}]", self.t_end));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Hash of every field that changes the mode-function trajectory.
    ///
    /// Slab and transverse-grid sizes are analysis settings and are left out,
    /// so one trajectory serves any number of subsystem sizes. Checkpoint
    /// times and `t_end` are tracked separately by the trajectory cache.
    pub fn dynamics_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"onquench-dynamics-v1");
        for x in [self.r_i, self.u, self.lambda, self.k_max, self.delta, self.dt] {
            h.update(x.to_bits().to_le_bytes());
        }
        h.update((self.n_k as u64).to_le_bytes());
        h.update((DIMENSION as u64).to_le_bytes());
        hex::encode(h.finalize())
    }

    /// Number of integration steps needed to reach `t_end`.
    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}
