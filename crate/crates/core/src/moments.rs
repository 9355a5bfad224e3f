//! Ordered moments of Gaussian states.
//!
//! For a state with mean `mu` and symmetrized covariance `V` (vacuum `V = I`),
//! the ordered two-point function of the centered quadratures is
//! `M = V + i Omega`, i.e. `M_jk = <dGamma_j dGamma_k>`. Moments of
//! canonically ordered monomials follow from Wick's theorem with every pair
//! contributing `M[earlier, later]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rustc_hash::FxHashMap;
use smallvec::SmallVec;
use thiserror::Error;

use crate::quadpoly::{Monomial, NCPolynomial, QuadVar, PRUNE_TOL};
use crate::symplectic::{omega, SymplecticGate};

/// Default maximum monomial degree accepted by the moment evaluator.
pub const DEFAULT_DEGREE_GUARD: u32 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MomentError {
    #[error("state dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("state has non-finite entries")]
    NonFinite,
    #[error("covariance matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("covariance violates the uncertainty relation (min eigenvalue of V + i Omega is {0:.3e})")]
    Unphysical(f64),
    #[error("monomial degree {degree} exceeds the guard {guard}")]
    DegreeGuard { degree: u32, guard: u32 },
    #[error("polynomial width {got} does not match the state width {expected}")]
    WidthMismatch { expected: usize, got: usize },
}

/// Gaussian input state: mean vector and symmetrized covariance in the block
/// basis `[q_1..q_m, p_1..p_m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStateSpec {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianStateSpec {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, MomentError> {
        let n = mean.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(MomentError::Dimension { expected: (n / 2 + 1) * 2, got: n });
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(MomentError::Dimension { expected: n, got: cov.nrows().max(cov.ncols()) });
        }
        if mean.iter().chain(cov.iter()).any(|x| !x.is_finite()) {
            return Err(MomentError::NonFinite);
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > 1e-10 {
            return Err(MomentError::NotSymmetric(asym));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        let min_eig = uncertainty_min_eigenvalue(&cov);
        if min_eig < -1e-9 {
            return Err(MomentError::Unphysical(min_eig));
        }
        Ok(GaussianStateSpec { mean, cov })
    }

    pub fn vacuum(width: usize) -> Self {
        GaussianStateSpec { mean: DVector::zeros(2 * width), cov: DMatrix::identity(2 * width, 2 * width) }
    }

    /// State `G|0>` for a Gaussian gate `G`.
    pub fn from_gate(g: &SymplecticGate) -> Self {
        let (mean, cov) = g.vacuum_moments();
        GaussianStateSpec { mean, cov }
    }

    pub fn width(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `M = V + i Omega`.
    pub fn two_point(&self) -> DMatrix<Complex64> {
        let w = omega(self.width());
        DMatrix::from_fn(self.cov.nrows(), self.cov.ncols(), |i, j| Complex64::new(self.cov[(i, j)], w[(i, j)]))
    }

    /// True when `det V = 1` up to tolerance, i.e. the state is pure.
    pub fn is_pure(&self, tol: f64) -> bool {
        (self.cov.determinant() - 1.0).abs() <= tol
    }
}

/// Smallest eigenvalue of the Hermitian matrix `V + i Omega`, computed via its
/// real embedding `[[V, -Omega], [Omega, V]]`.
fn uncertainty_min_eigenvalue(cov: &DMatrix<f64>) -> f64 {
    let n = cov.nrows();
    let w = omega(n / 2);
    let mut big = DMatrix::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(cov);
    big.view_mut((n, n), (n, n)).copy_from(cov);
    big.view_mut((0, n), (n, n)).copy_from(&(-&w));
    big.view_mut((n, 0), (n, n)).copy_from(&w);
    SymmetricEigen::new(big).eigenvalues.min()
}

type Counts = SmallVec<[u16; 8]>;

/// Evaluates moments of one state, memoizing centered moments by exponent
/// pattern so that whole polynomials are cheap.
pub struct MomentEvaluator<'a> {
    state: &'a GaussianStateSpec,
    /// Pair weights indexed by canonical slots, `weights[i][j]` for `i <= j`.
    weights: Vec<Vec<Complex64>>,
    mean: Vec<f64>,
    guard: u32,
    centered: FxHashMap<Counts, Complex64>,
}

impl<'a> MomentEvaluator<'a> {
    pub fn new(state: &'a GaussianStateSpec) -> Self {
        Self::with_guard(state, DEFAULT_DEGREE_GUARD)
    }

    pub fn with_guard(state: &'a GaussianStateSpec, guard: u32) -> Self {
        let m = state.width();
        let two = state.two_point();
        let n = 2 * m;
        let mut weights = vec![vec![Complex64::new(0.0, 0.0); n]; n];
        for (i, row) in weights.iter_mut().enumerate() {
            for (j, w) in row.iter_mut().enumerate() {
                let bi = QuadVar::from_slot(i).block_index(m);
                let bj = QuadVar::from_slot(j).block_index(m);
                *w = two[(bi, bj)];
            }
        }
        let mean = (0..n).map(|s| state.mean[QuadVar::from_slot(s).block_index(m)]).collect();
        MomentEvaluator { state, weights, mean, guard, centered: FxHashMap::default() }
    }

    /// `< product of the monomial's factors in canonical order >`.
    pub fn moment(&mut self, mono: &Monomial) -> Result<Complex64, MomentError> {
        if mono.width() != self.state.width() {
            return Err(MomentError::WidthMismatch { expected: self.state.width(), got: mono.width() });
        }
        let degree = mono.degree();
        if degree > self.guard {
            return Err(MomentError::DegreeGuard { degree, guard: self.guard });
        }
        let n: Counts = mono.exponents().iter().copied().collect();
        // Expand every factor as mean + centered part; the centered factors keep
        // their relative order, so only the per-slot counts matter.
        let mut total = Complex64::new(0.0, 0.0);
        let mut s: Counts = SmallVec::from_elem(0, n.len());
        loop {
            let mut weight = 1.0;
            for (slot, (&ni, &si)) in n.iter().zip(s.iter()).enumerate() {
                if si < ni {
                    weight *= binomial(ni, si) * self.mean[slot].powi((ni - si) as i32);
                }
            }
            if weight != 0.0 {
                total += self.centered_moment(&s) * weight;
            }
            // next s in the box 0..=n
            let mut idx = 0;
            loop {
                if idx == n.len() {
                    return Ok(total);
                }
                if s[idx] < n[idx] {
                    s[idx] += 1;
                    break;
                }
                s[idx] = 0;
                idx += 1;
            }
        }
    }

    /// Sum over perfect pairings of the centered factors, pairing the first
    /// remaining factor with each later one.
    fn centered_moment(&mut self, counts: &Counts) -> Complex64 {
        let total: u32 = counts.iter().map(|&c| c as u32).sum();
        if total == 0 {
            return Complex64::new(1.0, 0.0);
        }
        if total % 2 == 1 {
            return Complex64::new(0.0, 0.0);
        }
        if let Some(v) = self.centered.get(counts) {
            return *v;
        }
        let first = counts.iter().position(|&c| c > 0).unwrap();
        let mut rest = counts.clone();
        rest[first] -= 1;
        let mut sum = Complex64::new(0.0, 0.0);
        for j in first..rest.len() {
            let choices = rest[j];
            if choices == 0 {
                continue;
            }
            let w = self.weights[first][j];
            if w.re == 0.0 && w.im == 0.0 {
                continue;
            }
            let mut next = rest.clone();
            next[j] -= 1;
            sum += w * choices as f64 * self.centered_moment(&next);
        }
        self.centered.insert(counts.clone(), sum);
        sum
    }

    /// `sum coeff * moment` over the (pruned) polynomial.
    pub fn expectation(&mut self, poly: &NCPolynomial) -> Result<Complex64, MomentError> {
        if poly.width() != self.state.width() {
            return Err(MomentError::WidthMismatch { expected: self.state.width(), got: poly.width() });
        }
        let pruned = poly.pruned(PRUNE_TOL);
        let mut total = Complex64::new(0.0, 0.0);
        for (m, c) in pruned.terms() {
            total += c * self.moment(m)?;
        }
        Ok(total)
    }
}

fn binomial(n: u16, k: u16) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for j in 0..k {
        r = r * (n - j) as f64 / (j + 1) as f64;
    }
    r
}

/// Ordered moment of a single monomial.
pub fn moment(state: &GaussianStateSpec, mono: &Monomial) -> Result<Complex64, MomentError> {
    MomentEvaluator::new(state).moment(mono)
}

/// `Tr[rho P]` for a Gaussian `rho`.
pub fn expectation_poly(state: &GaussianStateSpec, poly: &NCPolynomial) -> Result<Complex64, MomentError> {
    MomentEvaluator::new(state).expectation(poly)
}
