//! Radial momentum grid, the Gaussian regulator, and the critical mass.

use std::f64::consts::PI;

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// Smooth Gaussian regulator `exp(-k^2 / (2 Lambda^2))`.
#[inline]
pub fn regulator(k: f64, lambda: f64) -> f64 {
    (-k * k / (2.0 * lambda * lambda)).exp()
}

/// Uniform grid on `[0, k_max]` with composite-trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
}

impl RadialGrid {
    pub fn uniform(k_max: f64, n_k: usize) -> Result<Self> {
        if n_k < 3 || !(k_max > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "radial grid needs k_max > 0 and n_k >= 3 (got {k_max}, {n_k})"
            )));
        }
        let spacing = k_max / (n_k - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_k).map(|i| i as f64 * spacing).collect();
        nodes[n_k - 1] = k_max;
        let mut weights = vec![spacing; n_k];
        weights[0] = 0.5 * spacing;
        weights[n_k - 1] = 0.5 * spacing;
        Ok(RadialGrid {
            nodes,
            weights,
            spacing,
        })
    }

    pub fn for_config(cfg: &ModelConfig) -> Result<Self> {
        Self::uniform(cfg.k_max, cfg.n_k)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `sum_i w_i g(k_i)`.
    pub fn integrate(&self, mut g: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&k, &w)| w * g(k))
            .sum()
    }

    /// Bracketing node index and linear weight for `k`, so that a node
    /// function interpolates as `(1 - s) y[i] + s y[i + 1]`.
    pub fn locate(&self, k: f64) -> Result<(usize, f64)> {
        let k_max = self.k_max();
        if !(0.0..=k_max * (1.0 + 1e-12)).contains(&k) {
            return Err(Error::MomentumOutOfRange { k, k_max });
        }
        let x = k / self.spacing;
        let last = self.nodes.len() - 2;
        let i = (x.floor() as usize).min(last);
        let s = (x - i as f64).clamp(0.0, 1.0);
        Ok((i, s))
    }
}

/// Critical mass of the quench,
/// `r_c = -(u / 48 pi^2) int_0^k_max dk R(k) (2k^2 + r_i) / sqrt(k^2 + r_i)`.
///
/// The radial measure `k^2 dk / (2 pi^2)` cancels the `1/k^2` of the
/// mode-averaged fluctuation, so the integrand is finite at `k = 0`.
pub fn critical_mass(cfg: &ModelConfig, grid: &RadialGrid) -> Result<f64> {
    if !(cfg.u >= 0.0) {
        return Err(Error::InvalidArgument(format!("u must be >= 0 (got {})", cfg.u)));
    }
    if !(cfg.r_i > 0.0) {
        return Err(Error::InvalidArgument(format!("r_i must be > 0 (got {})", cfg.r_i)));
    }
    let r_i = cfg.r_i;
    let integral = grid.integrate(|k| {
        regulator(k, cfg.lambda) * (2.0 * k * k + r_i) / (k * k + r_i).sqrt()
    });
    Ok(-cfg.u / (48.0 * PI * PI) * integral)
}

/// Post-quench mass `r = r_c + delta |r_c|`.
pub fn resolve_post_quench_mass(delta: f64, r_c: f64) -> Result<f64> {
    if !(r_c < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "critical mass must be negative to normalize the quench depth (got {r_c})"
        )));
    }
    Ok(r_c + delta * r_c.abs())
}
