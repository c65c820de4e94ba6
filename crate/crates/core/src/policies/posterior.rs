//! Ridge statistics `(Z, b, ψ̂)` behind the Gaussian posterior `N(ψ̂, ν²Z⁻¹)`.
//!
//! `Z⁻¹` is maintained with the Sherman–Morrison identity, O(d²) per update,
//! and refreshed from a Cholesky solve every `refresh_every` updates or when
//! the residual `‖Zψ̂ − b‖∞` drifts past tolerance.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_REFRESH_EVERY: u64 = 500;
const INVERSE_TOLERANCE: f64 = 1e-6;
const SNAPSHOT_MAGIC: [u8; 8] = *b"RPBPOST\0";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorState {
    gram: DMatrix<f64>,
    gram_inv: DMatrix<f64>,
    b: DVector<f64>,
    psi_hat: DVector<f64>,
    t: u64,
    lambda: f64,
    refresh_every: u64,
    since_refresh: u64,
    refreshes: u64,
}

impl PosteriorState {
    /// `Z₁ = λI`, `b₁ = 0`, `t = 1`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("posterior dimension must be positive"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            gram: DMatrix::identity(dim, dim) * lambda,
            gram_inv: DMatrix::identity(dim, dim) / lambda,
            b: DVector::zeros(dim),
            psi_hat: DVector::zeros(dim),
            t: 1,
            lambda,
            refresh_every: DEFAULT_REFRESH_EVERY,
            since_refresh: 0,
            refreshes: 0,
        })
    }

    /// A crafted state from an explicit Gram matrix and reward vector.
    /// The inverse and estimate are computed directly.
    pub fn from_parts(gram: DMatrix<f64>, b: DVector<f64>, lambda: f64) -> Result<Self> {
        let dim = b.len();
        if gram.nrows() != dim || gram.ncols() != dim {
            return Err(Error::invalid("gram matrix and b disagree on dimension"));
        }
        let mut state = Self::new(dim, lambda)?;
        state.gram = gram;
        state.b = b;
        state.refresh()?;
        state.refreshes = 0;
        Ok(state)
    }

    pub fn with_refresh_interval(mut self, every: u64) -> Self {
        self.refresh_every = every.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_inv(&self) -> &DMatrix<f64> {
        &self.gram_inv
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn psi_hat(&self) -> &DVector<f64> {
        &self.psi_hat
    }

    /// Round counter; 1 before any update.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of full inverse refreshes performed so far.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    /// `s = √(zᵀZ⁻¹z)`.
    pub fn width(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.gram_inv * z)).max(0.0).sqrt()
    }

    /// Rank-one update `Z += zzᵀ`, `b += r·z`.
    pub fn update(&mut self, z: &DVector<f64>, reward: f64) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::invalid(format!(
                "update vector has length {}, posterior has dimension {}",
                z.len(),
                self.dim()
            )));
        }
        if !reward.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite context or reward in posterior update"));
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::data(format!("reward {reward} outside [0,1]")));
        }

        self.gram.ger(1.0, z, z, 1.0);
        self.b.axpy(reward, z, 1.0);

        let u = &self.gram_inv * z;
        let denom = 1.0 + z.dot(&u);
        self.gram_inv.ger(-1.0 / denom, &u, &u, 1.0);
        self.t += 1;
        self.since_refresh += 1;

        if self.since_refresh >= self.refresh_every {
            self.refresh()?;
        } else {
            self.psi_hat = &self.gram_inv * &self.b;
            if self.residual() > INVERSE_TOLERANCE * (1.0 + self.b.amax()) {
                self.refresh()?;
            }
        }
        Ok(())
    }

    fn residual(&self) -> f64 {
        (&self.gram * &self.psi_hat - &self.b).amax()
    }

    /// Recompute `Z⁻¹` by Cholesky and verify `Z·Z⁻¹ ≈ I`.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numeric("gram matrix is not positive definite".into()))?;
        let mut inv = chol.inverse();
        // Symmetrize; the Cholesky inverse can differ in the last ulp across the diagonal.
        let t = inv.transpose();
        inv += t;
        inv *= 0.5;
        self.gram_inv = inv;
        self.psi_hat = &self.gram_inv * &self.b;
        self.since_refresh = 0;
        self.refreshes += 1;
        let err = self.inverse_error();
        if err > INVERSE_TOLERANCE {
            return Err(Error::Numeric(format!(
                "refreshed inverse is off by {err:e} (max-abs of Z·Z⁻¹ − I)"
            )));
        }
        Ok(())
    }

    /// Max-abs entry of `Z·Z⁻¹ − I`. O(d³); for checks, not the hot path.
    pub fn inverse_error(&self) -> f64 {
        let dim = self.dim();
        (&self.gram * &self.gram_inv - DMatrix::<f64>::identity(dim, dim)).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.gram
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Versioned little-endian snapshot; matrices row-major f64.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = u32::try_from(self.dim()).map_err(|_| Error::invalid("dimension too large"))?;
        w.write_all(&SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        w.write_all(&self.t.to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&self.refresh_every.to_le_bytes())?;
        w.write_all(&self.since_refresh.to_le_bytes())?;
        w.write_all(&self.refreshes.to_le_bytes())?;
        for m in [&self.gram, &self.gram_inv] {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    w.write_all(&m[(i, j)].to_le_bytes())?;
                }
            }
        }
        for v in [&self.b, &self.psi_hat] {
            for x in v.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if magic != SNAPSHOT_MAGIC {
            return Err(Error::data("not a posterior snapshot (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::data(format!("unsupported snapshot version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        if dim == 0 {
            return Err(Error::data("snapshot has zero dimension"));
        }
        let t = read_u64(&mut r)?;
        let lambda = read_f64(&mut r)?;
        let refresh_every = read_u64(&mut r)?;
        let since_refresh = read_u64(&mut r)?;
        let refreshes = read_u64(&mut r)?;
        let mut read_matrix = |rows: usize, cols: usize| -> Result<Vec<f64>> {
            (0..rows * cols).map(|_| read_f64(&mut r)).collect()
        };
        let gram = DMatrix::from_row_slice(dim, dim, &read_matrix(dim, dim)?);
        let gram_inv = DMatrix::from_row_slice(dim, dim, &read_matrix(dim, dim)?);
        let b = DVector::from_vec(read_matrix(dim, 1)?);
        let psi_hat = DVector::from_vec(read_matrix(dim, 1)?);
        Ok(Self {
            gram,
            gram_inv,
            b,
            psi_hat,
            t,
            lambda,
            refresh_every,
            since_refresh,
            refreshes,
        })
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}
