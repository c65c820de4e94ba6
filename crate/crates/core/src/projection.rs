//! Gaussian random projection `z = P·x`.
//!
//! `P` is `d×n` with i.i.d. `N(0, κ²)` entries, drawn row-major once and then
//! frozen for the whole run. With `κ² = 1/d` the projection preserves inner
//! products in expectation: `E[(Pθ)ᵀ(Px)] = θᵀx`.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::types::{Context, ReducedContext};

const MAGIC: [u8; 8] = *b"RPBPROJ1";

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    entries: DMatrix<f64>,
    kappa_sq: f64,
    seed: u64,
}

/// Draw a `d×n` projection with entries `N(0, kappa_sq)`, row-major.
pub fn build_projection(n: usize, d: usize, kappa_sq: f64, rng: &mut Rng) -> Result<ProjectionMatrix> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!("projection shape must be positive, got d={d}, n={n}")));
    }
    if d > n {
        return Err(Error::invalid(format!("reduced dimension d={d} exceeds n={n}")));
    }
    if !(kappa_sq > 0.0) || !kappa_sq.is_finite() {
        return Err(Error::invalid(format!("kappa_sq must be positive, got {kappa_sq}")));
    }
    let std = kappa_sq.sqrt();
    let mut row_major = Vec::with_capacity(d * n);
    for _ in 0..d * n {
        row_major.push(std * rng.standard_normal());
    }
    Ok(ProjectionMatrix {
        entries: DMatrix::from_row_slice(d, n, &row_major),
        kappa_sq,
        seed: rng.seed(),
    })
}

impl ProjectionMatrix {
    /// Explicit entries, row-major. Intended for tests and pinned projections.
    pub fn from_entries(d: usize, n: usize, row_major: &[f64]) -> Result<Self> {
        if d == 0 || n == 0 || row_major.len() != d * n {
            return Err(Error::invalid(format!(
                "expected {d}x{n} = {} entries, got {}",
                d * n,
                row_major.len()
            )));
        }
        if row_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("projection entries must be finite"));
        }
        let entries = DMatrix::from_row_slice(d, n, row_major);
        let kappa_sq = entries.iter().map(|v| v * v).sum::<f64>() / (d * n) as f64;
        Ok(Self {
            entries,
            kappa_sq,
            seed: 0,
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("identity projection needs n > 0"));
        }
        Ok(Self {
            entries: DMatrix::identity(n, n),
            kappa_sq: 1.0 / n as f64,
            seed: 0,
        })
    }

    pub fn d(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    pub fn kappa_sq(&self) -> f64 {
        self.kappa_sq
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Rescale every column to unit length. Off by default.
    pub fn normalize_columns(&mut self) {
        for mut col in self.entries.column_iter_mut() {
            let norm = col.norm();
            if norm > 0.0 {
                col /= norm;
            }
        }
    }

    pub fn project(&self, x: &Context) -> Result<ReducedContext> {
        Ok(ReducedContext {
            z: self.apply(x.as_vector())?,
        })
    }

    /// `P·v` for an arbitrary `n`-vector (e.g. `ψ* = P·θ*`).
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n() {
            return Err(Error::invalid(format!(
                "vector has length {}, projection expects {}",
                v.len(),
                self.n()
            )));
        }
        Ok(&self.entries * v)
    }

    /// Little-endian dump: 8-byte magic, `d` and `n` as u32, then `d·n` f64 row-major.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let d = u32::try_from(self.d()).map_err(|_| Error::invalid("d too large"))?;
        let n = u32::try_from(self.n()).map_err(|_| Error::invalid("n too large"))?;
        w.write_all(&MAGIC)?;
        w.write_all(&d.to_le_bytes())?;
        w.write_all(&n.to_le_bytes())?;
        for i in 0..self.d() {
            for j in 0..self.n() {
                w.write_all(&self.entries[(i, j)].to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if header[..8] != MAGIC {
            return Err(Error::data("not a projection matrix file (bad magic)"));
        }
        let d = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let n = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut buf = vec![0u8; d * n * 8];
        r.read_exact(&mut buf)?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_entries(d, n, &values)
    }
}

/// Monte Carlo check of inner-product preservation.
///
/// For each trial a fresh projection with `κ² = 1/d` is drawn, and the trial
/// counts as a violation when `|(Pθ)ᵀ(Px) − θᵀx| > ε‖x‖‖θ‖`. Returns the
/// violation fraction; the two-sided tail is bounded by `2·exp(−dε²/8)`.
pub fn inner_product_distortion_trial(
    theta: &[f64],
    x: &Context,
    d: usize,
    epsilon: f64,
    trials: usize,
    rng: &mut Rng,
) -> Result<f64> {
    if trials == 0 || d == 0 {
        return Err(Error::invalid(format!("trials and d must be positive, got {trials} and {d}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0,1), got {epsilon}")));
    }
    let n = x.dim();
    if theta.len() != n {
        return Err(Error::invalid(format!(
            "theta has length {}, context has length {n}",
            theta.len()
        )));
    }
    let theta = DVector::from_column_slice(theta);
    if theta.norm() > 1.0 + crate::types::NORM_SLACK {
        return Err(Error::Constraint(format!("theta norm {} exceeds 1", theta.norm())));
    }
    let exact = theta.dot(x.as_vector());
    let tolerance = epsilon * x.norm() * theta.norm();
    let std = (1.0 / d as f64).sqrt();
    let x = x.as_vector();

    // Each trial is a fresh d×n matrix drawn row-major, as in
    // `build_projection`, but consumed row by row without materializing it.
    // The bound holds for any d, so unlike `build_projection` d > n is fine.
    let mut row = DVector::<f64>::zeros(n);
    let mut violations = 0usize;
    for _ in 0..trials {
        let mut estimate = 0.0;
        for _ in 0..d {
            for v in row.iter_mut() {
                *v = std * rng.standard_normal();
            }
            estimate += row.dot(&theta) * row.dot(x);
        }
        if (estimate - exact).abs() > tolerance {
            violations += 1;
        }
    }
    Ok(violations as f64 / trials as f64)
}

/// The two-sided bound `2·exp(−dε²/8)`.
pub fn distortion_bound(d: usize, epsilon: f64) -> f64 {
    2.0 * (-(d as f64) * epsilon * epsilon / 8.0).exp()
}
