//! Affine-subspace algebra on the Stiefel manifold.
//!
//! A `k`-dimensional affine subspace `S` of `R^m` is stored either as a
//! projection/origin pair `(R, theta)` or as an orthonormal frame `U`
//! (`R = U U'`) together with an origin satisfying `U' theta = 0`. The
//! orthogonal complement `V` is derived deterministically from `U`, so a
//! frame always determines the same complement coordinates.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PscError, Result};

/// Tolerance on `||U'U - I||_F` accepted by [`OrthonormalFrame::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Drift above which a frame is re-orthonormalized by polar retraction.
pub const RETRACTION_DRIFT: f64 = 1e-8;

const SIGN_EPS: f64 = 1e-10;

/// An `m x k` matrix with orthonormal columns, i.e. a point on `V_{k,m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct OrthonormalFrame {
    columns: DMatrix<f64>,
}

impl OrthonormalFrame {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if columns.ncols() == 0 || columns.ncols() > columns.nrows() {
            return Err(PscError::InvalidDimension {
                k: columns.ncols(),
                m: columns.nrows(),
            });
        }
        if columns.iter().any(|v| !v.is_finite()) {
            return Err(PscError::NonFinite("frame"));
        }
        let drift = orthonormal_drift(&columns);
        if drift > ORTHONORMAL_TOL {
            return Err(PscError::NotOrthonormal { drift });
        }
        Ok(Self { columns })
    }

    /// First `k` columns of the identity.
    pub fn canonical(m: usize, k: usize) -> Result<Self> {
        if k == 0 || k > m {
            return Err(PscError::InvalidDimension { k, m });
        }
        Ok(Self {
            columns: DMatrix::identity(m, k),
        })
    }

    /// Nearest frame in Frobenius norm (polar factor `A (A'A)^{-1/2}`).
    pub fn orthonormalize(mat: &DMatrix<f64>) -> Result<Self> {
        let (m, k) = mat.shape();
        if k == 0 || k > m {
            return Err(PscError::InvalidDimension { k, m });
        }
        if mat.iter().any(|v| !v.is_finite()) {
            return Err(PscError::NonFinite("frame"));
        }
        let svd = mat.clone().svd(true, true);
        let u = svd.u.expect("svd computed with u");
        let v_t = svd.v_t.expect("svd computed with v_t");
        if svd.singular_values.iter().any(|&s| s <= f64::EPSILON * m as f64) {
            return Err(PscError::InvalidConfig(
                "cannot orthonormalize a rank-deficient matrix".into(),
            ));
        }
        Ok(Self {
            columns: u * v_t,
        })
    }

    /// Draw uniformly (Haar measure) from `V_{k,m}`.
    pub fn random<R: Rng + ?Sized>(m: usize, k: usize, rng: &mut R) -> Result<Self> {
        if k == 0 || k > m {
            return Err(PscError::InvalidDimension { k, m });
        }
        loop {
            let g = DMatrix::from_fn(m, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(frame) = Self::orthonormalize(&g) {
                return Ok(frame);
            }
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.columns
    }

    /// `||U'U - I||_F`.
    pub fn drift(&self) -> f64 {
        orthonormal_drift(&self.columns)
    }

    /// Re-orthonormalize when accumulated drift exceeds [`RETRACTION_DRIFT`].
    /// Returns whether a retraction happened.
    pub fn retract_if_drifted(&mut self) -> bool {
        if self.drift() > RETRACTION_DRIFT {
            if let Ok(f) = Self::orthonormalize(&self.columns) {
                *self = f;
                return true;
            }
        }
        false
    }

    /// `R = U U'`.
    pub fn projection(&self) -> DMatrix<f64> {
        frame_to_projection(self)
    }

    /// Deterministic orthonormal completion; see [`complete_frame`].
    pub fn complement(&self) -> Result<OrthonormalFrame> {
        complete_frame(self)
    }

    /// Isometric coordinates `U'x`.
    pub fn coordinates(&self, x: &DVector<f64>) -> DVector<f64> {
        self.columns.tr_mul(x)
    }
}

impl OrthonormalFrame {
    /// Random rotation `U* = Q U` with `Q` the Cayley transform of `step * A`,
    /// `A` a standard Gaussian skew-symmetric matrix.
    ///
    /// `A` and `-A` are equally likely and `Q(-A) = Q(A)'`, so the move is
    /// symmetric with respect to the uniform measure on `V_{k,m}`.
    pub fn cayley_perturb<R: Rng + ?Sized>(&self, step: f64, rng: &mut R) -> OrthonormalFrame {
        let m = self.ambient_dim();
        let g = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let half = (&g - g.transpose()) * (0.5 * step / std::f64::consts::SQRT_2);
        let eye = DMatrix::<f64>::identity(m, m);
        let rhs = (&eye + &half) * &self.columns;
        let moved = (&eye - &half)
            .lu()
            .solve(&rhs)
            .expect("I - A is invertible for skew-symmetric A");
        let mut frame = OrthonormalFrame { columns: moved };
        frame.retract_if_drifted();
        frame
    }
}

impl TryFrom<DMatrix<f64>> for OrthonormalFrame {
    type Error = PscError;

    fn try_from(value: DMatrix<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<OrthonormalFrame> for DMatrix<f64> {
    fn from(value: OrthonormalFrame) -> Self {
        value.columns
    }
}

pub(crate) fn orthonormal_drift(u: &DMatrix<f64>) -> f64 {
    let k = u.ncols();
    (u.tr_mul(u) - DMatrix::<f64>::identity(k, k)).norm()
}

/// `R = U U'`, symmetrized so the result is exactly symmetric.
pub fn frame_to_projection(frame: &OrthonormalFrame) -> DMatrix<f64> {
    let u = &frame.columns;
    let r = u * u.transpose();
    (&r + r.transpose()) * 0.5
}

/// Orthonormal basis `V` of the orthogonal complement of `span(U)`.
///
/// Householder QR of `[U | I_m]`; the trailing `m - k` columns of the full
/// `Q` span the complement. Each column is then signed so that its first
/// entry with magnitude above `1e-10` is positive.
pub fn complete_frame(frame: &OrthonormalFrame) -> Result<OrthonormalFrame> {
    let (m, k) = frame.columns.shape();
    if k >= m {
        return Err(PscError::NoComplement { m });
    }
    let mut aug = DMatrix::<f64>::zeros(m, k + m);
    aug.columns_mut(0, k).copy_from(&frame.columns);
    aug.columns_mut(k, m).fill_with_identity();
    let q = aug.qr().q();
    let mut v = q.columns(k, m - k).into_owned();
    for mut col in v.column_iter_mut() {
        if let Some(first) = col.iter().find(|x| x.abs() > SIGN_EPS) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
    }
    Ok(OrthonormalFrame { columns: v })
}

/// Coordinates of a point relative to an affine subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCoordinates {
    /// `U'x`, length `k`.
    pub projected: DVector<f64>,
    /// `V'(x - theta)`, length `m - k`.
    pub residual: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedPoint {
    /// `P_S(x) = R x + theta`.
    pub point: DVector<f64>,
    pub coords: SubspaceCoordinates,
}

/// Project `x` onto the affine subspace with frame `U` and origin `theta`.
pub fn project_point(
    frame: &OrthonormalFrame,
    theta: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<ProjectedPoint> {
    let m = frame.ambient_dim();
    check_len(theta.len(), m, "origin")?;
    check_len(x.len(), m, "point")?;
    let projected = frame.coordinates(x);
    let point = frame.as_matrix() * &projected + theta;
    let residual = match frame.complement() {
        Ok(v) => v.as_matrix().tr_mul(&(x - theta)),
        Err(PscError::NoComplement { .. }) => DVector::zeros(0),
        Err(e) => return Err(e),
    };
    Ok(ProjectedPoint {
        point,
        coords: SubspaceCoordinates {
            projected,
            residual,
        },
    })
}

fn check_len(actual: usize, expected: usize, context: &'static str) -> Result<()> {
    if actual != expected {
        return Err(PscError::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}

/// The pair `(R, theta)` with `R = R' = R^2` and `R theta = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSubspace {
    projection: DMatrix<f64>,
    origin: DVector<f64>,
}

impl AffineSubspace {
    pub const TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-8;

    pub fn new(projection: DMatrix<f64>, origin: DVector<f64>) -> Result<Self> {
        let m = projection.nrows();
        check_len(projection.ncols(), m, "projection columns")?;
        check_len(origin.len(), m, "origin")?;
        if (&projection - projection.transpose()).norm() > Self::TOL {
            return Err(PscError::InvalidConfig("projection is not symmetric".into()));
        }
        if (&projection * &projection - &projection).norm() > Self::TOL {
            return Err(PscError::InvalidConfig("projection is not idempotent".into()));
        }
        if (&projection * &origin).norm() > Self::TOL {
            return Err(PscError::InvalidConfig("origin is not orthogonal to the subspace".into()));
        }
        let tr = projection.trace();
        if (tr - tr.round()).abs() > Self::TRACE_TOL {
            return Err(PscError::InvalidConfig(format!("projection has non-integer trace {tr}")));
        }
        Ok(Self { projection, origin })
    }

    pub fn from_frame(frame: &OrthonormalFrame, origin: DVector<f64>) -> Result<Self> {
        check_len(origin.len(), frame.ambient_dim(), "origin")?;
        if frame.coordinates(&origin).norm() > Self::TOL {
            return Err(PscError::InvalidConfig("origin is not orthogonal to the frame".into()));
        }
        Ok(Self {
            projection: frame.projection(),
            origin,
        })
    }

    /// Empty subspace through the origin (`R = 0`).
    pub fn zero(m: usize) -> Self {
        Self {
            projection: DMatrix::zeros(m, m),
            origin: DVector::zeros(m),
        }
    }

    pub fn projection(&self) -> &DMatrix<f64> {
        &self.projection
    }

    pub fn origin(&self) -> &DVector<f64> {
        &self.origin
    }

    pub fn ambient_dim(&self) -> usize {
        self.origin.len()
    }

    pub fn dim(&self) -> usize {
        self.projection.trace().round() as usize
    }

    /// `P_S(x) = R x + theta`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len(x.len(), self.ambient_dim(), "point")?;
        Ok(&self.projection * x + &self.origin)
    }
}
