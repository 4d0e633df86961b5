//! Entanglement entropy of the slab from its symplectic spectra.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::correlators::{mixed_correlation_matrix, ChainTransform, CorrelationMatrix, KernelTable};
use crate::error::{Error, Result};
use crate::geometry::SlabGeometry;
use crate::symplectic::EntanglementBlock;

/// Entropy of a Bose mode with occupation `n`.
pub fn mode_entropy(n: f64) -> Result<f64> {
    if !(n >= 0.0) {
        return Err(Error::InvalidArgument(format!("occupation must be >= 0 (got {n})")));
    }
    if n == 0.0 {
        return Ok(0.0);
    }
    Ok((1.0 + n) * n.ln_1p() - n * n.ln())
}

pub fn block_entropy(block: &EntanglementBlock) -> f64 {
    block
        .occupations
        .iter()
        .map(|&n| mode_entropy(n.max(0.0)).unwrap_or(0.0))
        .sum()
}

/// Slab entropy at one time and one width.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRecord {
    pub t: f64,
    pub l: f64,
    /// Entropy per unit transverse area.
    pub s_per_area: f64,
    /// Absolute entropy of the `q_par = 0` block.
    pub s_zero_mode: f64,
    /// `(q_par, S_q)` for every transverse sample.
    pub s_blocks: Vec<(f64, f64)>,
}

/// `(1/2 pi) int_0^{q_max} q S_q dq` by the trapezoid rule on the samples.
pub fn per_area(s_blocks: &[(f64, f64)]) -> f64 {
    s_blocks
        .windows(2)
        .map(|w| {
            let (q0, s0) = w[0];
            let (q1, s1) = w[1];
            0.5 * (q1 - q0) * (q0 * s0 + q1 * s1)
        })
        .sum::<f64>()
        / (2.0 * PI)
}

impl EntropyRecord {
    pub fn from_blocks(t: f64, l: f64, s_blocks: Vec<(f64, f64)>) -> Self {
        let s_zero_mode = s_blocks
            .iter()
            .find(|(q, _)| *q == 0.0)
            .map_or(f64::NAN, |b| b.1);
        EntropyRecord {
            t,
            l,
            s_per_area: per_area(&s_blocks),
            s_zero_mode,
            s_blocks,
        }
    }
}

/// Correlation matrices at every transverse sample, for the widest slab.
pub fn slab_matrices(
    table: &KernelTable,
    geom: &SlabGeometry,
    transform: &ChainTransform,
) -> Result<Vec<CorrelationMatrix>> {
    geom.q_samples()
        .into_par_iter()
        .map(|q| {
            mixed_correlation_matrix(table, geom, q, transform).map_err(|e| Error::Block {
                q_par: q,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Entropy records for each width in `n_s_list`, sharing one set of
/// correlation matrices (every width must be `<= geom.n_s`).
pub fn entropy_from_matrices(
    matrices: &[CorrelationMatrix],
    geom: &SlabGeometry,
    n_s_list: &[usize],
) -> Result<Vec<EntropyRecord>> {
    let t = matrices.first().map_or(0.0, |m| m.t);
    n_s_list
        .iter()
        .map(|&n_s| {
            if n_s == 0 || n_s > geom.n_s {
                return Err(Error::InvalidArgument(format!(
                    "slab width {n_s} outside 1..={}",
                    geom.n_s
                )));
            }
            let s_blocks = matrices
                .par_iter()
                .map(|cm| {
                    let block = EntanglementBlock::from_correlation(&cm.truncated(n_s)).map_err(|e| {
                        Error::Block {
                            q_par: cm.q_par,
                            source: Box::new(e),
                        }
                    })?;
                    Ok((cm.q_par, block_entropy(&block)))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(EntropyRecord::from_blocks(t, n_s as f64 * geom.a, s_blocks))
        })
        .collect()
}

/// Entropy of the slab described by `geom` at the time of `table`.
pub fn slab_entropy(
    table: &KernelTable,
    geom: &SlabGeometry,
    transform: &ChainTransform,
) -> Result<EntropyRecord> {
    let matrices = slab_matrices(table, geom, transform)?;
    let mut records = entropy_from_matrices(&matrices, geom, &[geom.n_s])?;
    Ok(records.remove(0))
}

/// Columns `t,L,S_per_area,S_zero_mode`; with `wide`, one extra
/// `S_q=<q_par>` column per transverse sample.
pub fn write_entropy_csv(records: &[EntropyRecord], wide: bool, mut w: impl Write) -> std::io::Result<()> {
    write!(w, "t,L,S_per_area,S_zero_mode")?;
    let qs: Vec<f64> = records
        .first()
        .map(|r| r.s_blocks.iter().map(|b| b.0).collect())
        .unwrap_or_default();
    if wide {
        for q in &qs {
            write!(w, ",S_q={q}")?;
        }
    }
    writeln!(w)?;
    for r in records {
        write!(w, "{},{},{},{}", r.t, r.l, r.s_per_area, r.s_zero_mode)?;
        if wide {
            if r.s_blocks.len() != qs.len() {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    "records sample different transverse grids",
                ));
            }
            for (_, s) in &r.s_blocks {
                write!(w, ",{s}")?;
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
