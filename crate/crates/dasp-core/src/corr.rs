//! Parametric correlation matrix construction and validation.
//!
//! The generators cover autoregressive, moving-average and equicorrelation
//! templates plus block-diagonal variants with zero off-block correlation.
//! Every constructor validates positive definiteness numerically instead of
//! gating the parameter analytically: banded moving-average templates are
//! only positive definite on a dimension-dependent slice of (-1, 1).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative eigenvalue floor for the positive definiteness check at
/// construction time: smallest eigenvalue must exceed `PD_RTOL * largest`.
pub const PD_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureKind {
    Ar1,
    Ma1,
    Ma2,
    Bar1,
    Bma1,
    Bma2,
    Equicorrelation,
    Identity,
}

impl StructureKind {
    pub fn is_blocked(self) -> bool {
        matches!(self, Self::Bar1 | Self::Bma1 | Self::Bma2)
    }

    fn base(self) -> StructureKind {
        match self {
            Self::Bar1 => Self::Ar1,
            Self::Bma1 => Self::Ma1,
            Self::Bma2 => Self::Ma2,
            other => other,
        }
    }
}

impl std::fmt::Display for StructureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Ar1 => "ar1",
            Self::Ma1 => "ma1",
            Self::Ma2 => "ma2",
            Self::Bar1 => "bar1",
            Self::Bma1 => "bma1",
            Self::Bma2 => "bma2",
            Self::Equicorrelation => "equicorrelation",
            Self::Identity => "identity",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ar1" => Ok(Self::Ar1),
            "ma1" => Ok(Self::Ma1),
            "ma2" => Ok(Self::Ma2),
            "bar1" => Ok(Self::Bar1),
            "bma1" => Ok(Self::Bma1),
            "bma2" => Ok(Self::Bma2),
            "equicorrelation" | "equi" => Ok(Self::Equicorrelation),
            "identity" | "id" => Ok(Self::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown correlation structure '{other}'"
            ))),
        }
    }
}

/// One parametric correlation template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureSpec {
    pub kind: StructureKind,
    pub rho: f64,
    /// Block size for the blocked kinds; ignored otherwise.
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    /// Refuse dimensions that are not a multiple of `block_size` instead of
    /// emitting a trailing partial block.
    #[serde(default)]
    pub strict_blocks: bool,
}

fn default_block_size() -> usize {
    5
}

impl StructureSpec {
    pub fn new(kind: StructureKind, rho: f64) -> Self {
        Self {
            kind,
            rho,
            block_size: default_block_size(),
            strict_blocks: false,
        }
    }

    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    pub fn strict(mut self) -> Self {
        self.strict_blocks = true;
        self
    }
}

/// Symmetric positive definite matrix with unit diagonal.
///
/// Instances only exist through the constructors in this module (or
/// [`crate::omega`]), so holding one certifies the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: DMatrix::identity(dim, dim),
        }
    }

    /// Internal constructor: caller guarantees symmetry and unit diagonal,
    /// positive definiteness is checked here.
    pub(crate) fn checked(entries: DMatrix<f64>) -> Result<Self> {
        let dim = entries.nrows();
        let eigs = linalg::sym_eigenvalues(&entries);
        let min = eigs[0];
        let max = eigs[dim - 1];
        if min <= PD_RTOL * max.abs() {
            return Err(Error::NonPositiveDefinite {
                min_eigenvalue: min,
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn is_identity(&self) -> bool {
        self.entries == DMatrix::identity(self.dim, self.dim)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || rho <= -1.0 || rho >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "rho must lie in (-1, 1), got {rho}"
        )));
    }
    Ok(())
}

/// Fill the raw entries of a non-blocked template.
fn fill_base(kind: StructureKind, rho: f64, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |i, j| {
        let lag = i.abs_diff(j);
        match kind {
            StructureKind::Identity => {
                if lag == 0 {
                    1.0
                } else {
                    0.0
                }
            }
            StructureKind::Ar1 => rho.powi(lag as i32),
            StructureKind::Ma1 => match lag {
                0 => 1.0,
                1 => rho,
                _ => 0.0,
            },
            StructureKind::Ma2 => match lag {
                0 => 1.0,
                1 => rho,
                2 => (1.0 - rho) * rho,
                _ => 0.0,
            },
            StructureKind::Equicorrelation => {
                if lag == 0 {
                    1.0
                } else {
                    rho
                }
            }
            _ => unreachable!("blocked kinds are assembled in make_blocked"),
        }
    })
}

/// Build a correlation matrix from a template.
///
/// Dispatches blocked kinds to [`make_blocked`]. Fails with
/// `NonPositiveDefinite` when the template is indefinite at this (rho, dim),
/// e.g. a banded MA(1) needs |rho| < 1/(2 cos(pi/(dim+1))).
pub fn make_structure(spec: &StructureSpec, dim: usize) -> Result<CorrelationMatrix> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be >= 1".into()));
    }
    if spec.kind.is_blocked() {
        return make_blocked(spec, dim);
    }
    if spec.kind != StructureKind::Identity {
        check_rho(spec.rho)?;
    }
    if spec.kind == StructureKind::Ma2 {
        let (rho1, rho2) = (spec.rho, (1.0 - spec.rho) * spec.rho);
        if rho1 + rho2 >= 1.0 || rho1 - rho2 >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "MA2 requires rho1 +/- rho2 < 1, got rho1 = {rho1}, rho2 = {rho2}"
            )));
        }
    }
    CorrelationMatrix::checked(fill_base(spec.kind, spec.rho, dim))
}

/// Block-diagonal correlation matrix: each diagonal block is the base
/// template at `block_size`, off-block entries are exactly zero. A trailing
/// remainder becomes a smaller block of the same template unless
/// `strict_blocks` is set.
pub fn make_blocked(spec: &StructureSpec, dim: usize) -> Result<CorrelationMatrix> {
    if !spec.kind.is_blocked() {
        return Err(Error::InvalidParameter(format!(
            "make_blocked requires a blocked kind, got {}",
            spec.kind
        )));
    }
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be >= 1".into()));
    }
    if spec.block_size == 0 {
        return Err(Error::InvalidParameter("block_size must be >= 1".into()));
    }
    check_rho(spec.rho)?;
    if spec.strict_blocks && dim % spec.block_size != 0 {
        return Err(Error::InvalidParameter(format!(
            "dim {dim} is not a multiple of block_size {} (strict mode)",
            spec.block_size
        )));
    }

    let base = spec.kind.base();
    let mut entries = DMatrix::zeros(dim, dim);
    let mut start = 0;
    while start < dim {
        let size = spec.block_size.min(dim - start);
        let block = fill_base(base, spec.rho, size);
        entries.view_mut((start, start), (size, size)).copy_from(&block);
        start += size;
    }
    CorrelationMatrix::checked(entries)
}

/// Validate an arbitrary square matrix as a correlation matrix.
///
/// Accepts iff symmetric within `tol`, unit diagonal within `tol` and the
/// smallest eigenvalue exceeds `tol`. The returned matrix is re-symmetrized
/// via (M + M')/2 with the diagonal pinned to exactly 1.
pub fn validate(m: &DMatrix<f64>, tol: f64) -> Result<CorrelationMatrix> {
    let dim = linalg::ensure_square(m, "correlation matrix")?;
    let asym = linalg::max_asymmetry(m);
    if asym > tol {
        return Err(Error::NonSymmetric {
            max_asymmetry: asym,
            tol,
        });
    }
    let diag_dev = (0..dim)
        .map(|i| (m[(i, i)] - 1.0).abs())
        .fold(0.0_f64, f64::max);
    if diag_dev > tol {
        return Err(Error::NonUnitDiagonal {
            max_deviation: diag_dev,
        });
    }
    let mut entries = linalg::symmetrize(m);
    for i in 0..dim {
        entries[(i, i)] = 1.0;
    }
    let min_eig = linalg::sym_eigenvalues(&entries)[0];
    if min_eig <= tol {
        return Err(Error::NonPositiveDefinite {
            min_eigenvalue: min_eig,
        });
    }
    Ok(CorrelationMatrix { dim, entries })
}

/// Project a symmetric matrix onto the nearest valid correlation matrix by
/// alternating eigenvalue clipping and diagonal re-standardization.
///
/// This is an explicit repair used when an indefinite template is requested
/// anyway (e.g. a banded MA block beyond its positive definite slice); the
/// result has unit diagonal and all eigenvalues above `eig_floor`.
pub fn nearest_pd(m: &DMatrix<f64>, eig_floor: f64) -> Result<CorrelationMatrix> {
    let dim = linalg::ensure_square(m, "matrix to repair")?;
    if !(eig_floor > 0.0) {
        return Err(Error::InvalidParameter("eig_floor must be > 0".into()));
    }
    let mut work = linalg::symmetrize(m);
    for _ in 0..200 {
        let eig = work.clone().symmetric_eigen();
        let clipped = eig.eigenvalues.map(|e| e.max(eig_floor));
        let mut rebuilt = &eig.eigenvectors
            * DMatrix::from_diagonal(&clipped)
            * eig.eigenvectors.transpose();
        rebuilt = linalg::symmetrize(&rebuilt);
        // Rescale to unit diagonal.
        let scale: Vec<f64> = (0..dim).map(|i| rebuilt[(i, i)].sqrt()).collect();
        for i in 0..dim {
            for j in 0..dim {
                rebuilt[(i, j)] /= scale[i] * scale[j];
            }
            rebuilt[(i, i)] = 1.0;
        }
        let min_eig = linalg::sym_eigenvalues(&rebuilt)[0];
        work = rebuilt;
        if min_eig >= 0.5 * eig_floor {
            return Ok(CorrelationMatrix { dim, entries: work });
        }
    }
    Err(Error::NonPositiveDefinite {
        min_eigenvalue: linalg::sym_eigenvalues(&work)[0],
    })
}
