//! Williamson spectrum of Gaussian covariance matrices and the entanglement
//! modes built from it.
//!
//! Phase-space ordering is `(phi_1..phi_n, pi_1..pi_n)` with
//! `J = [[0, I], [-I, 0]]`. With `G = T T^T` the antisymmetric matrix
//! `A = T^T J T` is similar to `J G`, so its eigenvalues are `±i lambda_j`
//! and `-A^2 = A^T A` carries every `lambda_j^2` twice.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::correlators::CorrelationMatrix;
use crate::error::{Error, Result};

/// Relative tolerance on the two copies of each `lambda^2`.
pub const PAIRING_TOL: f64 = 1e-8;
/// Values in `[1/2 - LAMBDA_FLOOR_TOL, 1/2)` are clamped to `1/2`.
pub const LAMBDA_FLOOR_TOL: f64 = 1e-8;
/// Modes whose `lambda` agree to this relative precision are treated as one
/// degenerate multiplet when building spatial profiles.
pub const DEGENERACY_TOL: f64 = 1e-6;

/// Symplectic data of one transverse-momentum block.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementBlock {
    pub q_par: f64,
    pub t: f64,
    /// Descending.
    pub lambdas: Vec<f64>,
    pub omegas: Vec<f64>,
    pub occupations: Vec<f64>,
    pub vectors: Option<Vec<EntanglementMode>>,
}

impl EntanglementBlock {
    pub fn from_lambdas(q_par: f64, t: f64, lambdas: Vec<f64>) -> Result<Self> {
        let omegas = lambdas
            .iter()
            .map(|&l| dispersion_from_lambda(l))
            .collect::<Result<Vec<_>>>()?;
        let occupations = lambdas.iter().map(|&l| l - 0.5).collect();
        Ok(EntanglementBlock {
            q_par,
            t,
            lambdas,
            omegas,
            occupations,
            vectors: None,
        })
    }

    pub fn from_correlation(cm: &CorrelationMatrix) -> Result<Self> {
        let g = cm.assemble_positive()?;
        Self::from_lambdas(cm.q_par, cm.t, symplectic_spectrum(&g)?)
    }

    /// Spectrum plus the `count` lowest entanglement modes.
    pub fn with_modes(cm: &CorrelationMatrix, count: usize) -> Result<Self> {
        let g = cm.assemble_positive()?;
        let w = Williamson::new(&g)?;
        let modes = w.modes(count)?;
        let mut block = Self::from_lambdas(cm.q_par, cm.t, w.lambdas.clone())?;
        block.vectors = Some(modes);
        Ok(block)
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Entanglement gap `omega_0`.
    pub fn gap(&self) -> f64 {
        self.omegas[0]
    }
}

/// Normalized spatial density `|phi'(z)|^2 + |Pi'(z)|^2` of one mode,
/// indexed by site `z = 0..n_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile {
    pub density: Vec<f64>,
}

impl ModeProfile {
    pub fn from_vector(xi: &DVector<C64>) -> Self {
        let n = xi.len() / 2;
        let mut density: Vec<f64> = (0..n)
            .map(|z| xi[z].norm_sqr() + xi[n + z].norm_sqr())
            .collect();
        let total: f64 = density.iter().sum();
        if total > 0.0 {
            density.iter_mut().for_each(|d| *d /= total);
        }
        ModeProfile { density }
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    /// `sum_z z |psi(z)|^2` in site units.
    pub fn mean_position(&self) -> f64 {
        self.density
            .iter()
            .enumerate()
            .map(|(z, d)| z as f64 * d)
            .sum()
    }

    /// Image under `z -> n_s - 1 - z`.
    pub fn reflected(&self) -> ModeProfile {
        ModeProfile {
            density: self.density.iter().rev().copied().collect(),
        }
    }

    /// Total-variation distance `(1/2) sum_z |p(z) - q(z)|`.
    pub fn distance(&self, other: &ModeProfile) -> f64 {
        0.5 * self
            .density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// One eigenpair `(i J G) xi = lambda xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementMode {
    pub lambda: f64,
    pub omega: f64,
    pub xi: DVector<C64>,
    pub profile: ModeProfile,
}

/// `ln((lambda + 1/2) / (lambda - 1/2))`, infinite at `lambda = 1/2`.
pub fn dispersion_from_lambda(lambda: f64) -> Result<f64> {
    if !(lambda >= 0.5) {
        return Err(Error::SubPhysicalEigenvalue(lambda));
    }
    if lambda == 0.5 {
        return Ok(f64::INFINITY);
    }
    // ln(1 + 1/(lambda - 1/2)) keeps precision at large lambda.
    Ok((1.0 / (lambda - 0.5)).ln_1p())
}

/// `(1/2) coth(omega / 2)`.
pub fn lambda_from_dispersion(omega: f64) -> f64 {
    if omega.is_infinite() {
        return 0.5;
    }
    // coth(x/2)/2 = 1/2 + 1/(e^x - 1)
    0.5 + 1.0 / omega.exp_m1()
}

/// Symplectic eigenvalues of a positive-definite `2n x 2n` matrix, descending.
pub fn symplectic_spectrum(g: &DMatrix<f64>) -> Result<Vec<f64>> {
    eigenvalues_only(g)
}

/// The `count` largest-`lambda` eigenpairs of `i J G` with their profiles.
pub fn entanglement_eigenvectors(cm: &CorrelationMatrix, count: usize) -> Result<Vec<EntanglementMode>> {
    let g = cm.assemble_positive()?;
    Williamson::new(&g)?.modes(count)
}

/// `J` for `n` modes.
pub fn symplectic_form(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        if c == r + n {
            1.0
        } else if r == c + n {
            -1.0
        } else {
            0.0
        }
    })
}

/// Factorized problem shared by the spectrum and the eigenvectors.
struct Williamson {
    n: usize,
    chol: DMatrix<f64>,
    a: DMatrix<f64>,
    /// Eigenvectors of `-A^2`, columns ordered by descending eigenvalue.
    u: DMatrix<f64>,
    mu: Vec<f64>,
    lambdas: Vec<f64>,
}

/// Cholesky factor `T`, `A = T^T J T` and the symmetrized `-A^2`.
fn factor(g: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let dim = g.nrows();
    if dim != g.ncols() || !dim.is_multiple_of(2) || dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "correlation matrix must be square with even size (got {}x{})",
            g.nrows(),
            g.ncols()
        )));
    }
    let n = dim / 2;
    let chol = match g.clone().cholesky() {
        Some(c) => c.l(),
        None => {
            let min = g.clone().symmetric_eigenvalues().min();
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
    };
    // J T: swap the halves and negate the lower one.
    let mut jt = DMatrix::zeros(dim, dim);
    jt.rows_mut(0, n).copy_from(&chol.rows(n, n));
    jt.rows_mut(n, n).copy_from(&(-chol.rows(0, n)));
    let mut a = chol.transpose() * jt;
    let a_t = a.transpose();
    a = (&a - &a_t) * 0.5;
    let mut m = a.transpose() * &a;
    let m_t = m.transpose();
    m = (&m + &m_t) * 0.5;
    Ok((chol, a, m))
}

/// Pairs the descending eigenvalues of `-A^2` into symplectic eigenvalues.
fn pair_lambdas(mu: &[f64]) -> Result<Vec<f64>> {
    let scale = mu[0].abs();
    let n = mu.len() / 2;
    let mut lambdas = Vec::with_capacity(n);
    for i in 0..n {
        let (m0, m1) = (mu[2 * i], mu[2 * i + 1]);
        let residual = (m0 - m1).abs();
        if residual > PAIRING_TOL * scale {
            return Err(Error::PairingFailure {
                residual: residual / scale,
                tolerance: PAIRING_TOL,
            });
        }
        let l = (0.5 * (m0 + m1)).max(0.0).sqrt();
        if l < 0.5 - LAMBDA_FLOOR_TOL {
            return Err(Error::SubPhysicalEigenvalue(l));
        }
        lambdas.push(l.max(0.5));
    }
    Ok(lambdas)
}

fn eigenvalues_only(g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (_, _, m) = factor(g)?;
    let mut mu: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    pair_lambdas(&mu)
}

impl Williamson {
    fn new(g: &DMatrix<f64>) -> Result<Self> {
        let (chol, a, m) = factor(g)?;
        let dim = m.nrows();
        let eig = SymmetricEigen::new(m);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mu: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let u = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        let lambdas = pair_lambdas(&mu)?;
        Ok(Williamson {
            n: dim / 2,
            chol,
            a,
            u,
            mu,
            lambdas,
        })
    }

    /// Right eigenvectors of `i J G` for the `count` largest `lambda`.
    ///
    /// For a real eigenvector `u` of `-A^2` with eigenvalue `l^2`, the vector
    /// `v = u - i A u / l` satisfies `A v = i l v`, hence
    /// `xi = conj(J T v)` obeys `i J G xi = l xi`. Degenerate eigenspaces
    /// of `-A^2` are split greedily into `{u, A u / l}` planes.
    fn modes(&self, count: usize) -> Result<Vec<EntanglementMode>> {
        if count > self.n {
            return Err(Error::InvalidArgument(format!(
                "requested {count} modes from a block with {} sites",
                self.n
            )));
        }
        let dim = 2 * self.n;
        let want = (count + 1).min(self.n);
        let scale = self.mu[0].abs();
        let mut raw: Vec<(f64, DVector<C64>)> = Vec::with_capacity(want);
        let mut pair = 0;
        while raw.len() < want {
            // Pairs whose lambda^2 coincide numerically span one
            // A-invariant subspace.
            let mu0 = self.mu[2 * pair];
            let tol = (PAIRING_TOL * mu0).max(1e3 * f64::EPSILON * scale);
            let mut end = pair + 1;
            while end < self.n && (self.mu[2 * end] - mu0).abs() <= tol {
                end += 1;
            }
            let mut basis: Vec<DVector<f64>> =
                (2 * pair..2 * end).map(|c| self.u.column(c).into_owned()).collect();
            for p in pair..end {
                let lambda = self.lambdas[p];
                let best = basis
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.norm_squared().total_cmp(&b.1.norm_squared()))
                    .map(|(i, _)| i)
                    .expect("basis is never exhausted before its pairs");
                let u = basis.swap_remove(best).normalize();
                let root = self.mu[2 * p].max(0.0).sqrt();
                let mut w = &self.a * &u / root;
                w -= &u * u.dot(&w);
                let w = w.normalize();
                for b in basis.iter_mut() {
                    let pu = u.dot(b);
                    let pw = w.dot(b);
                    *b -= &u * pu + &w * pw;
                }
                let v = DVector::from_fn(dim, |i, _| C64::new(u[i], -w[i]));
                let tv = self.chol.map(|x| C64::new(x, 0.0)) * v;
                let xi = DVector::from_fn(dim, |i, _| {
                    let jtv = if i < self.n { tv[i + self.n] } else { -tv[i - self.n] };
                    jtv.conj()
                });
                raw.push((lambda, xi.normalize()));
            }
            pair = end;
        }
        raw.truncate(want);
        let localized = localize_multiplets(raw, self.n);
        localized
            .into_iter()
            .take(count)
            .map(|(lambda, xi)| {
                Ok(EntanglementMode {
                    lambda,
                    omega: dispersion_from_lambda(lambda)?,
                    profile: ModeProfile::from_vector(&xi),
                    xi,
                })
            })
            .collect()
    }
}

/// Within each group of (numerically) degenerate modes, rotate to the basis
/// that diagonalizes the site-position operator, ordered left to right.
fn localize_multiplets(modes: Vec<(f64, DVector<C64>)>, n: usize) -> Vec<(f64, DVector<C64>)> {
    let mut out = Vec::with_capacity(modes.len());
    let mut i = 0;
    while i < modes.len() {
        let mut end = i + 1;
        while end < modes.len() && (modes[i].0 - modes[end].0).abs() <= DEGENERACY_TOL * modes[i].0 {
            end += 1;
        }
        if end - i == 1 {
            out.push(modes[i].clone());
            i = end;
            continue;
        }
        // Complex Gram-Schmidt on the multiplet.
        let mut basis: Vec<DVector<C64>> = Vec::new();
        for (_, v) in &modes[i..end] {
            let mut v = v.clone();
            for b in &basis {
                let c = b.dotc(&v);
                v -= b * c;
            }
            let norm = v.norm();
            if norm > 1e-12 {
                basis.push(v / C64::new(norm, 0.0));
            }
        }
        let m = basis.len();
        let position = |a: &DVector<C64>, b: &DVector<C64>| -> C64 {
            (0..n)
                .map(|z| (a[z].conj() * b[z] + a[n + z].conj() * b[n + z]) * z as f64)
                .sum()
        };
        let zmat = DMatrix::from_fn(m, m, |r, c| position(&basis[r], &basis[c]));
        let eig = SymmetricEigen::new(zmat);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (slot, &k) in order.iter().enumerate() {
            let mut v = DVector::zeros(2 * n);
            for (b, vec) in basis.iter().enumerate() {
                v += vec * eig.eigenvectors[(b, k)];
            }
            out.push((modes[i + slot].0, v));
        }
        // Rank-deficient multiplets keep their remaining members unchanged.
        for slot in m..(end - i) {
            out.push(modes[i + slot].clone());
        }
        i = end;
    }
    out
}

/// Columns `q_par,j,lambda,omega,n`.
pub fn write_spectrum_csv(blocks: &[EntanglementBlock], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "q_par,j,lambda,omega,n")?;
    for b in blocks {
        for j in 0..b.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                b.q_par, j, b.lambdas[j], b.omegas[j], b.occupations[j]
            )?;
        }
    }
    Ok(())
}

/// Columns `z_index,density_j0,density_j1,...`.
pub fn write_profiles_csv(profiles: &[ModeProfile], mut w: impl Write) -> std::io::Result<()> {
    let n = profiles.first().map_or(0, ModeProfile::len);
    if profiles.iter().any(|p| p.len() != n) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "profiles have different lengths",
        ));
    }
    write!(w, "z_index")?;
    for j in 0..profiles.len() {
        write!(w, ",density_j{j}")?;
    }
    writeln!(w)?;
    for z in 0..n {
        write!(w, "{z}")?;
        for p in profiles {
            write!(w, ",{}", p.density[z])?;
        }
        writeln!(w)?;
    }
    Ok(())
}
