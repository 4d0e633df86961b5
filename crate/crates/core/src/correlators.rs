//! Two-point functions of the Gaussian state and the mixed-representation
//! correlation matrix of a slab.
//!
//! For a transverse momentum `q`, the z-direction is Fourier transformed on
//! the periodic chain of `n_tot` sites:
//!
//! ```text
//! G_q(d a) = (1/n_tot) sum_j cos(k_z^j d a) g(sqrt(k_z^j^2 + q^2))
//! ```
//!
//! for each of the kernels `g = |f|^2, Re[f conj(fdot)], |fdot|^2`.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::evolve::ModeState;
use crate::geometry::SlabGeometry;
use crate::grid::RadialGrid;

/// Matrices whose smallest eigenvalue lies in `(-PD_SLACK, 0]` get a
/// diagonal jitter; anything more negative is rejected.
pub const PD_SLACK: f64 = 1e-10;

/// Equal-time correlators of one momentum mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumCorrelators {
    /// `<phi phi> = |f|^2`
    pub g_pp: f64,
    /// `<{phi, pi}>/2 = Re[f conj(fdot)]`
    pub g_pq: f64,
    /// `<pi pi> = |fdot|^2`
    pub g_qq: f64,
}

impl MomentumCorrelators {
    /// `g_pp g_qq - g_pq^2`, equal to 1/4 for a pure mode.
    pub fn uncertainty(&self) -> f64 {
        self.g_pp * self.g_qq - self.g_pq * self.g_pq
    }
}

/// Node values of the three kernels on the radial grid of one snapshot.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub t: f64,
    spacing: f64,
    k_max: f64,
    pp: Vec<f64>,
    pq: Vec<f64>,
    qq: Vec<f64>,
}

impl KernelTable {
    pub fn new(state: &ModeState, grid: &RadialGrid) -> Result<Self> {
        if state.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "state has {} modes but the grid has {} nodes",
                state.len(),
                grid.len()
            )));
        }
        let mut pp = Vec::with_capacity(state.len());
        let mut pq = Vec::with_capacity(state.len());
        let mut qq = Vec::with_capacity(state.len());
        for (f, fd) in state.f.iter().zip(&state.fdot) {
            pp.push(f.norm_sqr());
            pq.push((f * fd.conj()).re);
            qq.push(fd.norm_sqr());
        }
        Ok(KernelTable {
            t: state.t,
            spacing: grid.spacing(),
            k_max: grid.k_max(),
            pp,
            pq,
            qq,
        })
    }

    /// Kernel values at a node.
    pub fn node(&self, i: usize) -> MomentumCorrelators {
        MomentumCorrelators {
            g_pp: self.pp[i],
            g_pq: self.pq[i],
            g_qq: self.qq[i],
        }
    }

    pub fn len(&self) -> usize {
        self.pp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pp.is_empty()
    }

    fn locate(&self, k: f64) -> Result<(usize, f64)> {
        if !(0.0..=self.k_max * (1.0 + 1e-12)).contains(&k) {
            return Err(Error::MomentumOutOfRange { k, k_max: self.k_max });
        }
        let x = k / self.spacing;
        let i = (x.floor() as usize).min(self.pp.len() - 2);
        Ok((i, (x - i as f64).clamp(0.0, 1.0)))
    }

    /// Linear interpolation of the three real kernels.
    pub fn at(&self, k: f64) -> Result<MomentumCorrelators> {
        let (i, s) = self.locate(k)?;
        let lerp = |v: &[f64]| (1.0 - s) * v[i] + s * v[i + 1];
        Ok(MomentumCorrelators {
            g_pp: lerp(&self.pp),
            g_pq: lerp(&self.pq),
            g_qq: lerp(&self.qq),
        })
    }

    /// Kernels at `|k| = sqrt(k_z^2 + q^2)` for every chain momentum `k_z^j`.
    pub fn on_chain(&self, geom: &SlabGeometry, q_par: f64) -> Result<[Vec<f64>; 3]> {
        if !(q_par >= 0.0 && q_par <= geom.q_max * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "q_par = {q_par} outside [0, {}]",
                geom.q_max
            )));
        }
        let n = geom.n_tot;
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for j in 0..n {
            let kz = geom.kz(j);
            let c = self.at((kz * kz + q_par * q_par).sqrt())?;
            out[0][j] = c.g_pp;
            out[1][j] = c.g_pq;
            out[2][j] = c.g_qq;
        }
        Ok(out)
    }
}

/// Correlators of a single radial momentum, interpolated from the grid.
pub fn correlators_at(state: &ModeState, grid: &RadialGrid, k: f64) -> Result<MomentumCorrelators> {
    if k > grid.k_max() {
        return Err(Error::MomentumOutOfRange { k, k_max: grid.k_max() });
    }
    KernelTable::new(state, grid)?.at(k)
}

/// Toeplitz blocks of the slab correlation matrix at one transverse momentum,
/// stored by site separation.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub q_par: f64,
    pub t: f64,
    /// `<phi_m phi_n>` as a function of `|m - n|`.
    pub phi_phi: Vec<f64>,
    /// `Re <phi_m pi_n>` as a function of `|m - n|`.
    pub phi_pi: Vec<f64>,
    /// `<pi_m pi_n>` as a function of `|m - n|`.
    pub pi_pi: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn n_s(&self) -> usize {
        self.phi_phi.len()
    }

    /// Restrict to the first `n_s` sites.
    pub fn truncated(&self, n_s: usize) -> CorrelationMatrix {
        let n = n_s.min(self.n_s());
        CorrelationMatrix {
            q_par: self.q_par,
            t: self.t,
            phi_phi: self.phi_phi[..n].to_vec(),
            phi_pi: self.phi_pi[..n].to_vec(),
            pi_pi: self.pi_pi[..n].to_vec(),
        }
    }

    /// Dense `[[phi_phi, phi_pi], [phi_pi, pi_pi]]`.
    pub fn assemble(&self) -> DMatrix<f64> {
        let n = self.n_s();
        DMatrix::from_fn(2 * n, 2 * n, |r, c| {
            let d = (r % n).abs_diff(c % n);
            match (r < n, c < n) {
                (true, true) => self.phi_phi[d],
                (false, false) => self.pi_pi[d],
                _ => self.phi_pi[d],
            }
        })
    }

    /// Assembled matrix, with a diagonal jitter of `1e-12 tr / (2 n_s)`
    /// when it grazes positive-definiteness.
    pub fn assemble_positive(&self) -> Result<DMatrix<f64>> {
        let g = self.assemble();
        if g.clone().cholesky().is_some() {
            return Ok(g);
        }
        let min = SymmetricEigen::new(g.clone()).eigenvalues.min();
        if min <= -PD_SLACK {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        let n = g.nrows();
        let jitter = (1e-12 * g.trace() / n as f64).max(-min + f64::EPSILON);
        let mut repaired = g;
        for i in 0..n {
            repaired[(i, i)] += jitter;
        }
        if repaired.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(repaired)
    }

    /// CSV with a comment line carrying `q_par` and `t`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# q_par={} t={}", self.q_par, self.t)?;
        writeln!(w, "separation_index,g_phiphi,g_phipi,g_pipi")?;
        for d in 0..self.n_s() {
            writeln!(w, "{},{},{},{}", d, self.phi_phi[d], self.phi_pi[d], self.pi_pi[d])?;
        }
        Ok(())
    }
}

/// Cosine transform along the chain via one FFT of length `n_tot` per kernel.
pub struct ChainTransform {
    fft: Arc<dyn Fft<f64>>,
    n_tot: usize,
}

impl ChainTransform {
    pub fn new(n_tot: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n_tot);
        ChainTransform { fft, n_tot }
    }

    /// `(1/N) sum_j cos(k_z^j d a) g_j` for `d = 0..n_s`. With
    /// `k_z^j a = -pi + 2 pi j / N` this is `(-1)^d Re[FFT(g)_d] / N`.
    pub fn separations(&self, g: &[f64], n_s: usize) -> Vec<f64> {
        assert_eq!(g.len(), self.n_tot);
        let mut buf: Vec<C64> = g.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        let norm = 1.0 / self.n_tot as f64;
        (0..n_s)
            .map(|d| {
                let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
                sign * buf[d].re * norm
            })
            .collect()
    }
}

/// Mixed-representation correlation matrix of the slab at `q_par`.
pub fn mixed_correlation_matrix(
    table: &KernelTable,
    geom: &SlabGeometry,
    q_par: f64,
    transform: &ChainTransform,
) -> Result<CorrelationMatrix> {
    if transform.n_tot != geom.n_tot {
        return Err(Error::InvalidArgument(format!(
            "transform length {} does not match n_tot = {}",
            transform.n_tot, geom.n_tot
        )));
    }
    let [pp, pq, qq] = table.on_chain(geom, q_par)?;
    Ok(CorrelationMatrix {
        q_par,
        t: table.t,
        phi_phi: transform.separations(&pp, geom.n_s),
        phi_pi: transform.separations(&pq, geom.n_s),
        pi_pi: transform.separations(&qq, geom.n_s),
    })
}

/// Direct `O(n_s n_tot)` evaluation of the cosine sums.
pub fn mixed_correlation_matrix_direct(
    table: &KernelTable,
    geom: &SlabGeometry,
    q_par: f64,
) -> Result<CorrelationMatrix> {
    let kernels = table.on_chain(geom, q_par)?;
    let n = geom.n_tot as f64;
    let sum = |g: &[f64], d: usize| -> f64 {
        g.iter()
            .enumerate()
            .map(|(j, x)| (geom.kz(j) * d as f64 * geom.a).cos() * x)
            .sum::<f64>()
            / n
    };
    let block = |g: &[f64]| (0..geom.n_s).map(|d| sum(g, d)).collect();
    Ok(CorrelationMatrix {
        q_par,
        t: table.t,
        phi_phi: block(&kernels[0]),
        phi_pi: block(&kernels[1]),
        pi_pi: block(&kernels[2]),
    })
}
