//! Gaussian gates as affine symplectic maps on the quadrature vector
//! `Gamma = [q_1..q_m, p_1..p_m]`: the gate `G` acts as `G^dag Gamma G = S Gamma + d`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::quadpoly::{NCPolynomial, QuadVar};

/// Entry-wise tolerance on `S^T Omega S - Omega`.
pub const SYMPLECTIC_TOL: f64 = 1e-9;

/// Tolerance used when classifying a gate as block-diagonal.
pub const BLOCK_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("width mismatch: {left} modes vs {right} modes")]
    WidthMismatch { left: usize, right: usize },
    #[error("matrix is not symplectic (residual {residual:.3e})")]
    NotSymplectic { residual: f64 },
    #[error("matrix has shape {rows}x{cols}, expected {expected}x{expected}")]
    BadShape { rows: usize, cols: usize, expected: usize },
    #[error("non-finite entry in gate")]
    NonFinite,
    #[error("beam-splitter efficiency {0} outside [0, 1]")]
    EfficiencyOutOfRange(f64),
    #[error("matrix is not orthogonal (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("mode index {mode} out of range for {width} modes")]
    ModeOutOfRange { mode: usize, width: usize },
    #[error("two-mode gate needs distinct modes, got {0} twice")]
    RepeatedMode(usize),
}

/// Symplectic form `[[0, I], [-I, 0]]`.
pub fn omega(width: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * width, 2 * width);
    for k in 0..width {
        w[(k, width + k)] = 1.0;
        w[(width + k, k)] = -1.0;
    }
    w
}

/// Largest entry of `|S^T Omega S - Omega|`.
pub fn symplectic_residual(s: &DMatrix<f64>) -> f64 {
    let width = s.nrows() / 2;
    let w = omega(width);
    (s.transpose() * &w * s - w).amax()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticGate {
    s: DMatrix<f64>,
    d: DVector<f64>,
}

fn check_mode(mode: usize, width: usize) -> Result<(), GateError> {
    if mode >= width {
        Err(GateError::ModeOutOfRange { mode, width })
    } else {
        Ok(())
    }
}

fn check_pair(i: usize, j: usize, width: usize) -> Result<(), GateError> {
    check_mode(i, width)?;
    check_mode(j, width)?;
    if i == j {
        return Err(GateError::RepeatedMode(i));
    }
    Ok(())
}

impl SymplecticGate {
    /// Validates shape, finiteness and the symplectic condition.
    pub fn new(s: DMatrix<f64>, d: DVector<f64>) -> Result<Self, GateError> {
        let n = s.nrows();
        if !n.is_multiple_of(2) || s.ncols() != n || n == 0 {
            return Err(GateError::BadShape { rows: s.nrows(), cols: s.ncols(), expected: n + n % 2 });
        }
        if d.len() != n {
            return Err(GateError::BadShape { rows: d.len(), cols: 1, expected: n });
        }
        if s.iter().chain(d.iter()).any(|x| !x.is_finite()) {
            return Err(GateError::NonFinite);
        }
        let residual = symplectic_residual(&s);
        if residual > SYMPLECTIC_TOL {
            return Err(GateError::NotSymplectic { residual });
        }
        Ok(SymplecticGate { s, d })
    }

    pub fn identity(width: usize) -> Self {
        SymplecticGate { s: DMatrix::identity(2 * width, 2 * width), d: DVector::zeros(2 * width) }
    }

    /// Pure displacement `Gamma -> Gamma + d`.
    pub fn displacement(d: DVector<f64>) -> Result<Self, GateError> {
        let n = d.len();
        Self::new(DMatrix::identity(n, n), d)
    }

    /// Block-diagonal `S = A (+) A^{-T}` for invertible `A`.
    pub fn block_diag(a: &DMatrix<f64>) -> Result<Self, GateError> {
        let m = a.nrows();
        if a.ncols() != m || m == 0 {
            return Err(GateError::BadShape { rows: a.nrows(), cols: a.ncols(), expected: m });
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(GateError::NonFinite);
        }
        let inv = a.clone().try_inverse().ok_or(GateError::Singular)?;
        if inv.iter().any(|x| !x.is_finite()) || a.determinant().abs() < 1e-12 {
            return Err(GateError::Singular);
        }
        let mut s = DMatrix::zeros(2 * m, 2 * m);
        s.view_mut((0, 0), (m, m)).copy_from(a);
        s.view_mut((m, m), (m, m)).copy_from(&inv.transpose());
        Self::new(s, DVector::zeros(2 * m))
    }

    /// Passive orthogonal gate `S = A (+) A`.
    pub fn orthogonal(a: &DMatrix<f64>) -> Result<Self, GateError> {
        let m = a.nrows();
        if a.ncols() != m || m == 0 {
            return Err(GateError::BadShape { rows: a.nrows(), cols: a.ncols(), expected: m });
        }
        let residual = (a.transpose() * a - DMatrix::<f64>::identity(m, m)).amax();
        if !residual.is_finite() || residual > SYMPLECTIC_TOL {
            return Err(GateError::NotOrthogonal { residual });
        }
        Self::block_diag(a)
    }

    /// Beam splitter of efficiency `eta` between modes `i` and `j`.
    pub fn beamsplitter(width: usize, eta: f64, i: usize, j: usize) -> Result<Self, GateError> {
        check_pair(i, j, width)?;
        if !(0.0..=1.0).contains(&eta) {
            return Err(GateError::EfficiencyOutOfRange(eta));
        }
        let t = eta.sqrt();
        let r = (1.0 - eta).sqrt();
        let mut a = DMatrix::identity(width, width);
        a[(i, i)] = t;
        a[(i, j)] = r;
        a[(j, i)] = -r;
        a[(j, j)] = t;
        Self::orthogonal(&a)
    }

    /// Mode exchange.
    pub fn swap(width: usize, i: usize, j: usize) -> Result<Self, GateError> {
        check_mode(i, width)?;
        check_mode(j, width)?;
        let mut a = DMatrix::identity(width, width);
        if i != j {
            a[(i, i)] = 0.0;
            a[(j, j)] = 0.0;
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        Self::orthogonal(&a)
    }

    /// `q_tgt -> q_tgt + q_ctrl`, `p_ctrl -> p_ctrl - p_tgt`.
    pub fn sum_gate(width: usize, ctrl: usize, tgt: usize) -> Result<Self, GateError> {
        check_pair(ctrl, tgt, width)?;
        let mut a = DMatrix::identity(width, width);
        a[(tgt, ctrl)] = 1.0;
        Self::block_diag(&a)
    }

    /// Phase rotation: `q -> cos(t) q + sin(t) p`, `p -> -sin(t) q + cos(t) p`.
    pub fn rotation(width: usize, theta: f64, mode: usize) -> Result<Self, GateError> {
        check_mode(mode, width)?;
        if !theta.is_finite() {
            return Err(GateError::NonFinite);
        }
        let (sin, cos) = theta.sin_cos();
        let mut s = DMatrix::identity(2 * width, 2 * width);
        let (q, p) = (mode, width + mode);
        s[(q, q)] = cos;
        s[(q, p)] = sin;
        s[(p, q)] = -sin;
        s[(p, p)] = cos;
        Self::new(s, DVector::zeros(2 * width))
    }

    /// Fourier gate, the quarter-turn rotation `q -> p`, `p -> -q`.
    pub fn fourier(width: usize, mode: usize) -> Result<Self, GateError> {
        check_mode(mode, width)?;
        let mut s = DMatrix::identity(2 * width, 2 * width);
        let (q, p) = (mode, width + mode);
        s[(q, q)] = 0.0;
        s[(q, p)] = 1.0;
        s[(p, q)] = -1.0;
        s[(p, p)] = 0.0;
        Self::new(s, DVector::zeros(2 * width))
    }

    /// Single-mode squeezer `q -> e^{-r} q`, `p -> e^{r} p`.
    pub fn squeeze(width: usize, r: f64, mode: usize) -> Result<Self, GateError> {
        check_mode(mode, width)?;
        let mut a = DMatrix::identity(width, width);
        a[(mode, mode)] = (-r).exp();
        Self::block_diag(&a)
    }

    pub fn width(&self) -> usize {
        self.s.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn displacement_vector(&self) -> &DVector<f64> {
        &self.d
    }

    /// Same linear part, displacement replaced.
    pub fn with_displacement(&self, d: DVector<f64>) -> Result<Self, GateError> {
        Self::new(self.s.clone(), d)
    }

    /// Gate equivalent to applying `early` and then `late` to a state.
    ///
    /// In the Heisenberg picture `Gamma -> S_late Gamma + d_late` is applied
    /// first and the early gate's map is then substituted into it, giving
    /// `S = S_late S_early` and `d = S_late d_early + d_late`.
    pub fn compose(late: &Self, early: &Self) -> Result<Self, GateError> {
        if late.width() != early.width() {
            return Err(GateError::WidthMismatch { left: late.width(), right: early.width() });
        }
        let s = &late.s * &early.s;
        let d = &late.s * &early.d + &late.d;
        Self::new(s, d)
    }

    /// True iff both off-diagonal `m x m` blocks vanish within `tol`.
    pub fn is_block_diagonal(&self, tol: f64) -> bool {
        let m = self.width();
        let qp = self.s.view((0, m), (m, m));
        let pq = self.s.view((m, 0), (m, m));
        qp.iter().chain(pq.iter()).all(|x| x.abs() <= tol)
    }

    /// True iff `S` is the identity within `tol`.
    pub fn is_linear_identity(&self, tol: f64) -> bool {
        let n = self.s.nrows();
        (&self.s - DMatrix::<f64>::identity(n, n)).amax() <= tol
    }

    pub fn has_displacement(&self) -> bool {
        self.d.iter().any(|&x| x != 0.0)
    }

    /// Number of distinct modes whose quadratures are mixed into some other mode.
    pub fn couples_modes(&self, tol: f64) -> bool {
        let m = self.width();
        for i in 0..2 * m {
            for j in 0..2 * m {
                if i % m != j % m && self.s[(i, j)].abs() > tol {
                    return true;
                }
            }
        }
        false
    }

    /// If the gate is a phase rotation on a single mode (identity elsewhere),
    /// returns `(mode, theta)`.
    pub fn as_single_mode_rotation(&self, tol: f64) -> Option<(usize, f64)> {
        let m = self.width();
        let mut mode = None;
        for k in 0..m {
            if self.s[(k, m + k)].abs() > tol || self.s[(m + k, k)].abs() > tol {
                if mode.is_some() {
                    return None;
                }
                mode = Some(k);
            }
        }
        let k = mode?;
        let theta = self.s[(k, m + k)].atan2(self.s[(k, k)]);
        let expected = Self::rotation(m, theta, k).ok()?;
        if (&expected.s - &self.s).amax() <= tol.max(1e-10) {
            Some((k, theta))
        } else {
            None
        }
    }

    /// Heisenberg image of one quadrature: the matching row of `S` applied to
    /// `Gamma`, plus the matching displacement entry.
    pub fn quad_transform(&self, r: QuadVar) -> NCPolynomial {
        let m = self.width();
        let row = r.block_index(m);
        let coeffs: Vec<f64> = self.s.row(row).iter().copied().collect();
        NCPolynomial::affine(m, &coeffs, self.d[row])
    }

    /// Images of all `2m` quadratures.
    pub fn substitution(&self) -> crate::quadpoly::Substitution {
        let m = self.width();
        let mut sub = crate::quadpoly::Substitution::new(m);
        for v in QuadVar::all(m) {
            sub.set(v, self.quad_transform(v));
        }
        sub
    }

    /// Mean and covariance of the Gaussian state `G|0>`.
    pub fn vacuum_moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        (self.d.clone(), &self.s * self.s.transpose())
    }
}
