//! Lattice geometry of the slab bipartition.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};

/// A slab of `n_s` sites inside a periodic chain of `n_tot` sites along z,
/// infinite in the transverse plane.
///
/// The lattice spacing ties the z Brillouin zone to the radial cutoff:
/// `pi / a = k_max / sqrt(3)`, and the transverse momenta run up to
/// `sqrt(2/3) k_max`, so every sampled `|k|` stays inside `[0, k_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabGeometry {
    pub a: f64,
    pub n_s: usize,
    pub n_tot: usize,
    pub n_par: usize,
    pub q_max: f64,
    pub k_max: f64,
}

/// `sqrt(3) pi / k_max`.
pub fn lattice_spacing(k_max: f64) -> f64 {
    3f64.sqrt() * PI / k_max
}

impl SlabGeometry {
    pub fn new(k_max: f64, n_s: usize, n_tot: usize, n_par: usize) -> Result<Self> {
        if !(k_max > 0.0) {
            return Err(Error::InvalidArgument(format!("k_max must be > 0 (got {k_max})")));
        }
        if n_s == 0 || n_s >= n_tot {
            return Err(Error::InvalidArgument(format!(
                "need 0 < n_s < n_tot (got n_s = {n_s}, n_tot = {n_tot})"
            )));
        }
        if n_par < 2 {
            return Err(Error::InvalidArgument(format!("n_par must be >= 2 (got {n_par})")));
        }
        Ok(SlabGeometry {
            a: lattice_spacing(k_max),
            n_s,
            n_tot,
            n_par,
            q_max: (2.0f64 / 3.0).sqrt() * k_max,
            k_max,
        })
    }

    pub fn from_config(cfg: &ModelConfig) -> Result<Self> {
        Self::new(cfg.k_max, cfg.n_s, cfg.n_tot, cfg.n_par)
    }

    /// Same chain, different slab width.
    pub fn with_n_s(&self, n_s: usize) -> Result<Self> {
        Self::new(self.k_max, n_s, self.n_tot, self.n_par)
    }

    /// Slab width `L = n_s a`.
    pub fn length(&self) -> f64 {
        self.n_s as f64 * self.a
    }

    pub fn total_length(&self) -> f64 {
        self.n_tot as f64 * self.a
    }

    /// Brillouin-zone edge `pi / a`.
    pub fn kz_edge(&self) -> f64 {
        PI / self.a
    }

    /// `k_z^j = -pi/a + j 2pi / (n_tot a)`, half-open on `[-pi/a, pi/a)`.
    pub fn kz(&self, j: usize) -> f64 {
        -PI / self.a + j as f64 * 2.0 * PI / (self.n_tot as f64 * self.a)
    }

    pub fn kz_spacing(&self) -> f64 {
        2.0 * PI / (self.n_tot as f64 * self.a)
    }

    /// Uniform transverse samples on `[0, q_max]`, both ends included.
    pub fn q_samples(&self) -> Vec<f64> {
        let n = self.n_par;
        (0..n)
            .map(|i| self.q_max * i as f64 / (n - 1) as f64)
            .collect()
    }
}
