//! Brute-force reference simulator in a truncated Fock basis.
//!
//! Quadratures follow `q = a + a^dag`, `p = -i (a - a^dag)`. Every gate is
//! realised as `exp(i G)` for a Hermitian generator `G` chosen so that its
//! Heisenberg action matches the corresponding [`SymplecticGate`] or cubic
//! shift `p -> p + 3 gamma q^2`:
//!
//! | gate | generator |
//! |------|-----------|
//! | rotation by `theta` | `-theta n` |
//! | squeeze `q -> s q` | `-(ln s / 4)(qp + pq)` |
//! | displacement `d` | `(d_p q - d_q p) / 2` |
//! | cubic `gamma` | `gamma q^3 / 2` |
//! | mode mixer `q_i -> c q_i + s q_j` | `-i phi (a_i^dag a_j - a_j^dag a_i)` |
//!
//! Block-diagonal Gaussians `A (+) A^{-T}` are synthesized from the SVD of
//! `A` with the orthogonal factors split into Givens rotations; Gaussians
//! acting on single modes use the Euler decomposition rotation-squeeze-rotation.
//! Single-mode gates are exponentiated exactly by diagonalizing the truncated
//! generator. Two-mode mixers are folded to `|phi| <= pi/4` with parity and
//! exchange steps, then applied to the state as a Chebyshev series in the
//! sparse hopping operator.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

use crate::circuit::CircuitElement;
use crate::quadpoly::{NCPolynomial, QuadKind, QuadVar};
use crate::symplectic::{SymplecticGate, BLOCK_TOL};

/// Squared norm below which photon-number sectors are dropped before a mixer.
const NEGLIGIBLE_WEIGHT: f64 = 1e-30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("Fock space of dimension {dim} exceeds the memory guard {guard}")]
    MemoryGuard { dim: f64, guard: usize },
    #[error("Gaussian gate has no supported decomposition into elementary generators")]
    NoDecomposition,
    #[error("state norm drifted to {norm:.12} after a gate (cutoff {cutoff})")]
    Unitarity { norm: f64, cutoff: usize },
    #[error("no convergence to {tol:.1e}: last cutoffs {prev} -> {last} differ by {delta:.3e}")]
    NoConvergence { tol: f64, prev: usize, last: usize, delta: f64 },
    #[error("width mismatch: {expected} modes expected, got {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("mode index {mode} out of range for {width} modes")]
    ModeOutOfRange { mode: usize, width: usize },
    #[error("Gaussian state cannot be prepared from vacuum by the supported gates")]
    UnpreparableState,
}

/// Cutoff and memory limits for the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct FockConfig {
    pub start_cutoff: usize,
    /// Largest per-mode cutoff tried by [`converge`].
    pub max_cutoff: usize,
    /// Maximum Hilbert-space dimension `N^m`.
    pub memory_guard: usize,
    /// Allowed drift of the state norm after a gate.
    pub unitarity_tol: f64,
}

impl Default for FockConfig {
    fn default() -> Self {
        FockConfig { start_cutoff: 16, max_cutoff: 512, memory_guard: 1 << 22, unitarity_tol: 1e-8 }
    }
}

/// Truncated single-mode ladder and quadrature matrices at cutoff `N`.
#[derive(Debug, Clone)]
pub struct FockOperatorSet {
    pub modes: usize,
    pub cutoff: usize,
    pub a: DMatrix<Complex64>,
    pub adag: DMatrix<Complex64>,
    pub q: DMatrix<Complex64>,
    pub p: DMatrix<Complex64>,
}

impl FockOperatorSet {
    pub fn new(modes: usize, cutoff: usize) -> Self {
        let a = DMatrix::from_fn(cutoff, cutoff, |i, j| {
            if j == i + 1 {
                Complex64::new((j as f64).sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let adag = a.adjoint();
        let q = &a + &adag;
        let p = (&a - &adag) * Complex64::new(0.0, -1.0);
        FockOperatorSet { modes, cutoff, a, adag, q, p }
    }

    pub fn dim(&self) -> usize {
        self.cutoff.pow(self.modes as u32)
    }

    /// Dense embedding of a single-mode operator acting on `mode`.
    pub fn embed(&self, op: &DMatrix<Complex64>, mode: usize) -> DMatrix<Complex64> {
        let mut out = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        for k in 0..self.modes {
            let factor = if k == mode { op.clone() } else { DMatrix::identity(self.cutoff, self.cutoff) };
            out = out.kronecker(&factor);
        }
        out
    }

    /// Dense matrix of a polynomial, with factors multiplied in canonical order.
    pub fn polynomial_matrix(&self, poly: &NCPolynomial) -> DMatrix<Complex64> {
        let dim = self.dim();
        let mut out = DMatrix::zeros(dim, dim);
        for (mono, c) in poly.terms() {
            let mut mat = DMatrix::identity(dim, dim);
            for v in mono.factors() {
                let single = match v.kind {
                    QuadKind::Q => &self.q,
                    QuadKind::P => &self.p,
                };
                mat *= self.embed(single, v.mode);
            }
            out += mat * *c;
        }
        out
    }
}

/// Pure state on `modes` modes, each truncated to `cutoff` levels. Mode 0 is
/// the most significant index.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl FockState {
    pub fn vacuum(modes: usize, cutoff: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.pow(modes as u32)];
        amps[0] = Complex64::new(1.0, 0.0);
        FockState { modes, cutoff, amps }
    }

    /// Normalized superposition of number states given as `(occupations, amplitude)`.
    /// Occupations at or above the cutoff are dropped.
    pub fn from_number_states(modes: usize, cutoff: usize, components: &[(Vec<usize>, Complex64)]) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.pow(modes as u32)];
        for (occ, amp) in components {
            assert_eq!(occ.len(), modes);
            if occ.iter().all(|&n| n < cutoff) {
                let idx = occ.iter().fold(0, |acc, &n| acc * cutoff + n);
                amps[idx] += *amp;
            }
        }
        let mut st = FockState { modes, cutoff, amps };
        let norm = st.norm();
        st.amps.iter_mut().for_each(|a| *a /= norm);
        st
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    fn stride(&self, mode: usize) -> usize {
        self.cutoff.pow((self.modes - 1 - mode) as u32)
    }

    /// Applies a dense single-mode operator to `mode`.
    pub fn apply_single_mode(&mut self, op: &DMatrix<Complex64>, mode: usize) {
        let n = self.cutoff;
        let stride = self.stride(mode);
        let block = stride * n;
        let mut column = vec![Complex64::new(0.0, 0.0); n];
        for outer in (0..self.amps.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (k, c) in column.iter_mut().enumerate() {
                    *c = self.amps[base + k * stride];
                }
                for r in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, c) in column.iter().enumerate() {
                        acc += op[(r, k)] * c;
                    }
                    self.amps[base + r * stride] = acc;
                }
            }
        }
    }

    /// `V diag(phases) V^T` on `mode` for a real orthogonal `V`, with all
    /// slices of the state gathered into one matrix.
    fn apply_real_spectral(&mut self, v: &DMatrix<f64>, phases: &[Complex64], mode: usize) {
        let n = self.cutoff;
        let stride = self.stride(mode);
        let slices = self.amps.len() / n;
        let base = |s: usize| (s / stride) * stride * n + s % stride;
        let mut re = DMatrix::<f64>::zeros(n, slices);
        let mut im = DMatrix::<f64>::zeros(n, slices);
        for s in 0..slices {
            for k in 0..n {
                let a = self.amps[base(s) + k * stride];
                re[(k, s)] = a.re;
                im[(k, s)] = a.im;
            }
        }
        let (wr, wi) = (v.tr_mul(&re), v.tr_mul(&im));
        for k in 0..n {
            let ph = phases[k];
            for s in 0..slices {
                let (x, y) = (wr[(k, s)], wi[(k, s)]);
                re[(k, s)] = ph.re * x - ph.im * y;
                im[(k, s)] = ph.re * y + ph.im * x;
            }
        }
        let (zr, zi) = (v * &re, v * &im);
        for s in 0..slices {
            for k in 0..n {
                self.amps[base(s) + k * stride] = Complex64::new(zr[(k, s)], zi[(k, s)]);
            }
        }
    }

    /// Multiplies each amplitude by `phases[n_mode]`.
    fn apply_diagonal(&mut self, phases: &[Complex64], mode: usize) {
        let n = self.cutoff;
        let stride = self.stride(mode);
        for (idx, a) in self.amps.iter_mut().enumerate() {
            *a *= phases[(idx / stride) % n];
        }
    }

    /// `q` or `p` on one mode, using the sparse ladder action.
    pub fn apply_quadrature(&self, v: QuadVar) -> FockState {
        let n = self.cutoff;
        let stride = self.stride(v.mode);
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (idx, &amp) in self.amps.iter().enumerate() {
            if amp.re == 0.0 && amp.im == 0.0 {
                continue;
            }
            let level = (idx / stride) % n;
            // a|n> = sqrt(n)|n-1>, a^dag|n> = sqrt(n+1)|n+1>
            if level > 0 {
                let s = (level as f64).sqrt();
                let c = match v.kind {
                    QuadKind::Q => Complex64::new(s, 0.0),
                    QuadKind::P => Complex64::new(0.0, -s),
                };
                out[idx - stride] += c * amp;
            }
            if level + 1 < n {
                let s = ((level + 1) as f64).sqrt();
                let c = match v.kind {
                    QuadKind::Q => Complex64::new(s, 0.0),
                    QuadKind::P => Complex64::new(0.0, s),
                };
                out[idx + stride] += c * amp;
            }
        }
        FockState { modes: self.modes, cutoff: self.cutoff, amps: out }
    }

    /// `P |psi>` with every monomial applied factor by factor, rightmost first.
    pub fn apply_polynomial(&self, poly: &NCPolynomial) -> FockState {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (mono, c) in poly.terms() {
            let mut v = self.clone();
            for f in mono.factors().into_iter().rev() {
                v = v.apply_quadrature(f);
            }
            for (o, x) in out.iter_mut().zip(v.amps.iter()) {
                *o += c * x;
            }
        }
        FockState { modes: self.modes, cutoff: self.cutoff, amps: out }
    }

    pub fn inner(&self, other: &FockState) -> Complex64 {
        self.amps.iter().zip(other.amps.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    /// `<psi| P |psi>`.
    pub fn expectation(&self, poly: &NCPolynomial) -> Complex64 {
        self.inner(&self.apply_polynomial(poly))
    }

    /// Zeroes the amplitudes with `n_i + n_j` above the smallest cap whose
    /// discarded squared norm stays below `tail`, and returns that cap.
    fn drop_pair_tail(&mut self, i: usize, j: usize, tail: f64) -> usize {
        let n = self.cutoff;
        let (si, sj) = (self.stride(i), self.stride(j));
        let mut weight = vec![0.0f64; 2 * n - 1];
        for (idx, a) in self.amps.iter().enumerate() {
            weight[(idx / si) % n + (idx / sj) % n] += a.norm_sqr();
        }
        let mut cap = 2 * n - 2;
        let mut dropped = 0.0;
        while cap > 0 && dropped + weight[cap] < tail {
            dropped += weight[cap];
            cap -= 1;
        }
        if cap < 2 * n - 2 {
            for (idx, a) in self.amps.iter_mut().enumerate() {
                if (idx / si) % n + (idx / sj) % n > cap {
                    *a = Complex64::new(0.0, 0.0);
                }
            }
        }
        cap
    }

    /// The mixer at a quarter turn: `|a, b> -> (-1)^a |b, a>` on modes `i, j`,
    /// or its inverse `|a, b> -> (-1)^b |b, a>`.
    fn apply_quarter_exchange(&mut self, i: usize, j: usize, inverse: bool) {
        let n = self.cutoff;
        let (si, sj) = (self.stride(i), self.stride(j));
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (idx, &amp) in self.amps.iter().enumerate() {
            let (a, b) = ((idx / si) % n, (idx / sj) % n);
            let target = idx - a * si - b * sj + b * si + a * sj;
            let odd = if inverse { b % 2 == 1 } else { a % 2 == 1 };
            out[target] = if odd { -amp } else { amp };
        }
        self.amps = out;
    }

    /// `exp(X) |psi>` for a real antisymmetric sparse `X` given as triplets,
    /// by a Chebyshev expansion of `exp(i H)` with `H = -i X`. `radius` must
    /// bound the spectral radius of `X`.
    fn apply_exp_sparse(&mut self, triplets: &[(usize, usize, f64)], radius: f64) {
        if radius == 0.0 {
            return;
        }
        let coeffs = bessel_sequence(radius);
        let len = self.amps.len();
        // x v = -i X v / radius
        let scale = Complex64::new(0.0, -1.0 / radius);
        let apply = |v: &[Complex64], out: &mut [Complex64]| {
            out.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
            for &(row, col, val) in triplets {
                out[row] += v[col] * val;
            }
            out.iter_mut().for_each(|x| *x *= scale);
        };
        let mut prev = self.amps.clone();
        let mut cur = vec![Complex64::new(0.0, 0.0); len];
        apply(&prev, &mut cur);
        let mut next = vec![Complex64::new(0.0, 0.0); len];
        let mut result: Vec<Complex64> = prev.iter().map(|v| v * coeffs[0]).collect();
        let mut ik = Complex64::new(0.0, 1.0);
        for (k, &jk) in coeffs.iter().enumerate().skip(1) {
            if k > 1 {
                apply(&cur, &mut next);
                for (n, p) in next.iter_mut().zip(prev.iter()) {
                    *n = *n * 2.0 - p;
                }
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut cur, &mut next);
                ik *= Complex64::new(0.0, 1.0);
            }
            let c = ik * (2.0 * jk);
            for (r, t) in result.iter_mut().zip(cur.iter()) {
                *r += c * t;
            }
        }
        self.amps = result;
    }
}

/// `J_0(x), J_1(x), ...` up to the order where the tail drops below `1e-17`,
/// by Miller's backward recurrence normalized with `J_0 + 2 sum J_2k = 1`.
fn bessel_sequence(x: f64) -> Vec<f64> {
    let top = (x + 12.0 * x.cbrt() + 40.0).ceil() as usize;
    let mut j = vec![0.0f64; top + 2];
    j[top] = 1e-300;
    for k in (1..=top).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            j.iter_mut().skip(k - 1).for_each(|v| *v *= 1e-250);
        }
    }
    let norm = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
    j.iter_mut().for_each(|v| *v /= norm);
    let keep = j.iter().rposition(|v| v.abs() > 1e-17).unwrap_or(0) + 1;
    j.truncate(keep);
    j
}

/// One elementary operation of a synthesized gate.
#[derive(Debug, Clone, PartialEq)]
enum Elementary {
    /// Single-mode `exp(i G)` with `G` built from the truncated operators.
    SingleMode { mode: usize, generator: SingleGenerator },
    /// `q_i -> cos(phi) q_i + sin(phi) q_j` (same for momenta).
    Mixer { i: usize, j: usize, phi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum SingleGenerator {
    Rotation(f64),
    /// `q -> s q`, `p -> p / s`.
    Squeeze(f64),
    Displacement { dq: f64, dp: f64 },
    Cubic(f64),
}

/// Eigendecompositions of the `q` quadrature and of the squeezing generator
/// `i (a^2 - a^dag^2)`, computed once per cutoff.
struct SpectralCache {
    q: OnceLock<(DMatrix<f64>, Vec<f64>)>,
    squeeze: OnceLock<(DMatrix<Complex64>, Vec<f64>)>,
}

impl SpectralCache {
    fn new() -> Self {
        SpectralCache { q: OnceLock::new(), squeeze: OnceLock::new() }
    }

    fn q(&self, ops: &FockOperatorSet) -> &(DMatrix<f64>, Vec<f64>) {
        self.q.get_or_init(|| {
            let eig = SymmetricEigen::new(ops.q.map(|z| z.re));
            (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
        })
    }

    fn squeeze(&self, ops: &FockOperatorSet) -> &(DMatrix<Complex64>, Vec<f64>) {
        self.squeeze.get_or_init(|| {
            let g = (&ops.a * &ops.a - &ops.adag * &ops.adag) * Complex64::new(0.0, 1.0);
            let herm = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
            let eig = SymmetricEigen::new(herm);
            (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
        })
    }
}

fn phases(values: impl Iterator<Item = f64>) -> Vec<Complex64> {
    values.map(|x| Complex64::new(0.0, x).exp()).collect()
}

/// `V diag(exp(i f(lambda))) V^dag`.
fn spectral_unitary(eig: &(DMatrix<Complex64>, Vec<f64>), f: impl Fn(f64) -> f64) -> DMatrix<Complex64> {
    let (v, lambda) = eig;
    let mut scaled = v.clone();
    for (k, &l) in lambda.iter().enumerate() {
        let ph = Complex64::new(0.0, f(l)).exp();
        scaled.column_mut(k).iter_mut().for_each(|x| *x *= ph);
    }
    scaled * v.adjoint()
}

/// Givens factorization `O = G_1 ... G_k D` of an orthogonal matrix, returned
/// in application order (`D` first). Each factor is `(i, j, phi)`; `D` entries
/// are returned as the modes carrying a sign flip.
fn givens_factors(o: &DMatrix<f64>) -> (Vec<usize>, Vec<(usize, usize, f64)>) {
    let m = o.nrows();
    let mut r = o.clone();
    let mut left = Vec::new(); // rotations R applied on the left: R_k ... R_1 O = D
    for col in 0..m {
        for row in (col + 1..m).rev() {
            let (x, y) = (r[(col, col)], r[(row, col)]);
            if y.abs() < 1e-300 {
                continue;
            }
            let phi = y.atan2(x);
            // R acts on rows (col, row) as [[c, s], [-s, c]]
            let (s, c) = phi.sin_cos();
            for k in 0..m {
                let (a, b) = (r[(col, k)], r[(row, k)]);
                r[(col, k)] = c * a + s * b;
                r[(row, k)] = -s * a + c * b;
            }
            left.push((col, row, phi));
        }
    }
    let flips: Vec<usize> = (0..m).filter(|&k| r[(k, k)] < 0.0).collect();
    // O = R_1^T ... R_k^T D; the latest gate is R_1^T, so apply R_k^T first.
    let rotations = left.into_iter().rev().map(|(i, j, phi)| (i, j, -phi)).collect();
    (flips, rotations)
}

fn rotation_angle(r: &DMatrix<f64>) -> f64 {
    // [[cos, sin], [-sin, cos]]
    r[(0, 1)].atan2(r[(0, 0)])
}

/// Elementary sequence (application order) realising a Gaussian gate.
fn decompose_gaussian(g: &SymplecticGate) -> Result<Vec<Elementary>, OracleError> {
    let m = g.width();
    let s = g.matrix();
    let mut seq = Vec::new();
    if g.is_block_diagonal(BLOCK_TOL) {
        let a = s.view((0, 0), (m, m)).clone_owned();
        if (&a - DMatrix::<f64>::identity(m, m)).amax() > 1e-15 {
            let svd = SVD::new(a, true, true);
            let (u, vt) = (svd.u.ok_or(OracleError::NoDecomposition)?, svd.v_t.ok_or(OracleError::NoDecomposition)?);
            push_orthogonal(&mut seq, &vt);
            for (k, &sigma) in svd.singular_values.iter().enumerate() {
                if (sigma - 1.0).abs() > 1e-15 {
                    seq.push(Elementary::SingleMode { mode: k, generator: SingleGenerator::Squeeze(sigma) });
                }
            }
            push_orthogonal(&mut seq, &u);
        }
    } else if !g.couples_modes(BLOCK_TOL) {
        for k in 0..m {
            let block = DMatrix::from_row_slice(2, 2, &[s[(k, k)], s[(k, m + k)], s[(m + k, k)], s[(m + k, m + k)]]);
            push_single_mode_euler(&mut seq, &block, k)?;
        }
    } else {
        return Err(OracleError::NoDecomposition);
    }
    let d = g.displacement_vector();
    for k in 0..m {
        if d[k] != 0.0 || d[m + k] != 0.0 {
            seq.push(Elementary::SingleMode { mode: k, generator: SingleGenerator::Displacement { dq: d[k], dp: d[m + k] } });
        }
    }
    Ok(seq)
}

fn push_orthogonal(seq: &mut Vec<Elementary>, o: &DMatrix<f64>) {
    let (flips, rotations) = givens_factors(o);
    for k in flips {
        seq.push(Elementary::SingleMode { mode: k, generator: SingleGenerator::Rotation(std::f64::consts::PI) });
    }
    for (i, j, phi) in rotations {
        seq.push(Elementary::Mixer { i, j, phi });
    }
}

fn push_single_mode_euler(seq: &mut Vec<Elementary>, block: &DMatrix<f64>, mode: usize) -> Result<(), OracleError> {
    if (block - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-15 {
        return Ok(());
    }
    let svd = SVD::new(block.clone(), true, true);
    let mut u = svd.u.ok_or(OracleError::NoDecomposition)?;
    let mut vt = svd.v_t.ok_or(OracleError::NoDecomposition)?;
    if u.determinant() < 0.0 {
        u.column_mut(1).neg_mut();
        vt.row_mut(1).neg_mut();
    }
    let sig = &svd.singular_values;
    if (sig[0] * sig[1] - 1.0).abs() > 1e-8 {
        return Err(OracleError::NoDecomposition);
    }
    seq.push(Elementary::SingleMode { mode, generator: SingleGenerator::Rotation(rotation_angle(&vt)) });
    if (sig[0] - 1.0).abs() > 1e-15 {
        seq.push(Elementary::SingleMode { mode, generator: SingleGenerator::Squeeze(sig[0]) });
    }
    seq.push(Elementary::SingleMode { mode, generator: SingleGenerator::Rotation(rotation_angle(&u)) });
    Ok(())
}

fn elementary_sequence(el: &CircuitElement, modes: usize) -> Result<Vec<Elementary>, OracleError> {
    match el {
        CircuitElement::Gaussian(g) => {
            if g.width() != modes {
                return Err(OracleError::WidthMismatch { expected: modes, got: g.width() });
            }
            decompose_gaussian(g)
        }
        CircuitElement::CubicPhase { gamma, mode } => {
            if *mode >= modes {
                return Err(OracleError::ModeOutOfRange { mode: *mode, width: modes });
            }
            Ok(vec![Elementary::SingleMode { mode: *mode, generator: SingleGenerator::Cubic(*gamma) }])
        }
        CircuitElement::Rotation { theta, mode } => {
            if *mode >= modes {
                return Err(OracleError::ModeOutOfRange { mode: *mode, width: modes });
            }
            Ok(vec![Elementary::SingleMode { mode: *mode, generator: SingleGenerator::Rotation(*theta) }])
        }
    }
}

/// Sparse triplets of `phi (a_i^dag a_j - a_j^dag a_i)` restricted to
/// `n_i + n_j <= cap`, and a bound on its spectral radius there.
fn mixer_triplets(modes: usize, cutoff: usize, i: usize, j: usize, phi: f64, cap: usize) -> (Vec<(usize, usize, f64)>, f64) {
    let dim = cutoff.pow(modes as u32);
    let si = cutoff.pow((modes - 1 - i) as u32);
    let sj = cutoff.pow((modes - 1 - j) as u32);
    let mut trip = Vec::new();
    for col in 0..dim {
        let ni = (col / si) % cutoff;
        let nj = (col / sj) % cutoff;
        if ni + nj > cap {
            continue;
        }
        // a_i^dag a_j
        if nj > 0 && ni + 1 < cutoff {
            let row = col + si - sj;
            trip.push((row, col, phi * ((ni + 1) as f64 * nj as f64).sqrt()));
        }
        // - a_j^dag a_i
        if ni > 0 && nj + 1 < cutoff {
            let row = col - si + sj;
            trip.push((row, col, -phi * ((nj + 1) as f64 * ni as f64).sqrt()));
        }
    }
    // each n_i + n_j = n sector is a spin-n/2 block with spectrum within phi [-n, n]
    (trip, phi.abs() * cap as f64)
}

/// Applies circuit elements (application order) to a state.
pub struct FockSimulator {
    ops: FockOperatorSet,
    config: FockConfig,
    cache: SpectralCache,
}

impl FockSimulator {
    pub fn new(modes: usize, cutoff: usize, config: FockConfig) -> Result<Self, OracleError> {
        let dim = (cutoff as f64).powi(modes as i32);
        if dim > config.memory_guard as f64 {
            return Err(OracleError::MemoryGuard { dim, guard: config.memory_guard });
        }
        Ok(FockSimulator { ops: FockOperatorSet::new(modes, cutoff), config, cache: SpectralCache::new() })
    }

    pub fn operators(&self) -> &FockOperatorSet {
        &self.ops
    }

    fn apply_elementary(&self, state: &mut FockState, e: &Elementary) {
        match e {
            Elementary::SingleMode { mode, generator: SingleGenerator::Rotation(theta) } => {
                let phases: Vec<Complex64> =
                    (0..self.ops.cutoff).map(|k| Complex64::new(0.0, -theta * k as f64).exp()).collect();
                state.apply_diagonal(&phases, *mode);
            }
            Elementary::SingleMode { mode, generator: SingleGenerator::Squeeze(s) } => {
                // exp(-2 i kappa G) with G = i (a^2 - a^dag^2)
                let kappa = -s.ln() / 4.0;
                let u = spectral_unitary(self.cache.squeeze(&self.ops), |l| -2.0 * kappa * l);
                state.apply_single_mode(&u, *mode);
            }
            Elementary::SingleMode { mode, generator: SingleGenerator::Displacement { dq, dp } } => {
                // (dp q - dq p) / 2 = (r / 2) e^{i t n} q e^{-i t n}
                let r = dp.hypot(*dq);
                let t = (-dq).atan2(*dp);
                let n = self.ops.cutoff;
                let (v, lambda) = self.cache.q(&self.ops);
                state.apply_diagonal(&phases((0..n).map(|k| -t * k as f64)), *mode);
                state.apply_real_spectral(v, &phases(lambda.iter().map(|l| 0.5 * r * l)), *mode);
                state.apply_diagonal(&phases((0..n).map(|k| t * k as f64)), *mode);
            }
            Elementary::SingleMode { mode, generator: SingleGenerator::Cubic(gamma) } => {
                let (v, lambda) = self.cache.q(&self.ops);
                state.apply_real_spectral(v, &phases(lambda.iter().map(|x| 0.5 * gamma * x * x * x)), *mode);
            }
            Elementary::Mixer { i, j, phi } => {
                // a rotation by pi on both modes is central here, so fold |phi| into [0, pi/2]
                let mut phi = phi.rem_euclid(2.0 * PI);
                if phi > PI {
                    phi -= 2.0 * PI;
                }
                if phi.abs() > PI / 2.0 {
                    phi -= PI.copysign(phi);
                    let parity: Vec<Complex64> =
                        (0..self.ops.cutoff).map(|k| if k % 2 == 0 { Complex64::new(1.0, 0.0) } else { Complex64::new(-1.0, 0.0) }).collect();
                    state.apply_diagonal(&parity, *i);
                    state.apply_diagonal(&parity, *j);
                }
                // the quarter turn is a signed mode exchange; split it off to keep |phi| <= pi/4
                let quarter = if phi > PI / 4.0 {
                    phi -= PI / 2.0;
                    Some(false)
                } else if phi < -PI / 4.0 {
                    phi += PI / 2.0;
                    Some(true)
                } else {
                    None
                };
                // the mixer conserves n_i + n_j, so sectors carrying no weight stay empty
                let cap = state.drop_pair_tail(*i, *j, NEGLIGIBLE_WEIGHT);
                let (trip, radius) = mixer_triplets(self.ops.modes, self.ops.cutoff, *i, *j, phi, cap);
                state.apply_exp_sparse(&trip, radius);
                if let Some(inverse) = quarter {
                    state.apply_quarter_exchange(*i, *j, inverse);
                }
            }
        }
    }

    pub fn apply(&self, state: &mut FockState, el: &CircuitElement) -> Result<(), OracleError> {
        for e in elementary_sequence(el, self.ops.modes)? {
            self.apply_elementary(state, &e);
        }
        let norm = state.norm();
        if (norm - 1.0).abs() > self.config.unitarity_tol {
            return Err(OracleError::Unitarity { norm, cutoff: self.ops.cutoff });
        }
        Ok(())
    }

    pub fn evolve(&self, state: &mut FockState, elements: &[CircuitElement]) -> Result<(), OracleError> {
        elements.iter().try_for_each(|el| self.apply(state, el))
    }
}

/// Dense unitary of a circuit element at the given cutoff (small spaces only).
pub fn gate_matrix(el: &CircuitElement, ops: &FockOperatorSet) -> Result<DMatrix<Complex64>, OracleError> {
    let sim = FockSimulator::new(ops.modes, ops.cutoff, FockConfig { unitarity_tol: f64::INFINITY, ..FockConfig::default() })?;
    let dim = ops.dim();
    let mut out = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[col] = Complex64::new(1.0, 0.0);
        let mut st = FockState { modes: ops.modes, cutoff: ops.cutoff, amps };
        sim.apply(&mut st, el)?;
        for (row, a) in st.amps.iter().enumerate() {
            out[(row, col)] = *a;
        }
    }
    Ok(out)
}

/// Result of a single oracle run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    pub value: f64,
    pub imag_residual: f64,
}

/// Applies `prep` and then `circuit` to `initial` and evaluates `<H>`.
pub fn simulate_from(
    initial: &FockState,
    prep: &[CircuitElement],
    circuit: &[CircuitElement],
    observable: &NCPolynomial,
    config: &FockConfig,
) -> Result<OracleValue, OracleError> {
    if observable.width() != initial.modes() {
        return Err(OracleError::WidthMismatch { expected: initial.modes(), got: observable.width() });
    }
    let sim = FockSimulator::new(initial.modes(), initial.cutoff(), config.clone())?;
    let mut st = initial.clone();
    sim.evolve(&mut st, prep)?;
    sim.evolve(&mut st, circuit)?;
    let v = st.expectation(observable);
    Ok(OracleValue { value: v.re, imag_residual: v.im })
}

/// Vacuum input, `prep` then `circuit`, at cutoff `n`.
pub fn simulate(
    modes: usize,
    prep: &[CircuitElement],
    circuit: &[CircuitElement],
    observable: &NCPolynomial,
    cutoff: usize,
    config: &FockConfig,
) -> Result<OracleValue, OracleError> {
    let dim = (cutoff as f64).powi(modes as i32);
    if dim > config.memory_guard as f64 {
        return Err(OracleError::MemoryGuard { dim, guard: config.memory_guard });
    }
    simulate_from(&FockState::vacuum(modes, cutoff), prep, circuit, observable, config)
}

/// Converged oracle value and the cutoff at which it was reached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Converged {
    pub value: f64,
    pub imag_residual: f64,
    pub cutoff: usize,
}

/// Doubles the cutoff from `config.start_cutoff` until two successive values
/// differ by less than `tol`. `initial` builds the input state at a cutoff.
pub fn converge_with(
    modes: usize,
    initial: impl Fn(usize) -> FockState,
    prep: &[CircuitElement],
    circuit: &[CircuitElement],
    observable: &NCPolynomial,
    tol: f64,
    config: &FockConfig,
) -> Result<Converged, OracleError> {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut cutoff = config.start_cutoff.max(2);
    let mut prev: Option<(usize, f64)> = None;
    loop {
        let dim = (cutoff as f64).powi(modes as i32);
        if dim > config.memory_guard as f64 {
            return Err(OracleError::MemoryGuard { dim, guard: config.memory_guard });
        }
        let v = simulate_from(&initial(cutoff), prep, circuit, observable, config)?;
        if let Some((pc, pv)) = prev {
            let delta = (v.value - pv).abs();
            if delta < tol {
                return Ok(Converged { value: v.value, imag_residual: v.imag_residual, cutoff });
            }
            if 2 * cutoff > config.max_cutoff || (2.0 * cutoff as f64).powi(modes as i32) > config.memory_guard as f64 {
                return Err(OracleError::NoConvergence { tol, prev: pc, last: cutoff, delta });
            }
        } else if 2 * cutoff > config.max_cutoff {
            return Err(OracleError::NoConvergence { tol, prev: cutoff, last: cutoff, delta: f64::INFINITY });
        }
        prev = Some((cutoff, v.value));
        cutoff *= 2;
    }
}

/// [`converge_with`] starting from vacuum.
pub fn converge(
    modes: usize,
    prep: &[CircuitElement],
    circuit: &[CircuitElement],
    observable: &NCPolynomial,
    tol: f64,
    config: &FockConfig,
) -> Result<Converged, OracleError> {
    converge_with(modes, |n| FockState::vacuum(modes, n), prep, circuit, observable, tol, config)
}

/// Gates preparing a pure Gaussian state from vacuum, when the covariance is
/// either a product over modes or free of position-momentum correlations.
pub fn preparation_for(state: &crate::moments::GaussianStateSpec) -> Result<Vec<CircuitElement>, OracleError> {
    let m = state.width();
    let cov = state.cov();
    if !state.is_pure(1e-8) {
        return Err(OracleError::UnpreparableState);
    }
    let mut s = DMatrix::<f64>::identity(2 * m, 2 * m);
    let qp_free = (0..m).all(|i| (0..m).all(|j| cov[(i, m + j)].abs() <= 1e-12));
    let product = (0..2 * m).all(|i| (0..2 * m).all(|j| i % m == j % m || cov[(i, j)].abs() <= 1e-12));
    if qp_free {
        // cov = A A^T (+) (A A^T)^{-1} with A = cov_qq^{1/2}
        let cq = cov.view((0, 0), (m, m)).clone_owned();
        let eig = SymmetricEigen::new(cq);
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(OracleError::UnpreparableState);
        }
        let a = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
        let g = SymplecticGate::block_diag(&a).map_err(|_| OracleError::UnpreparableState)?;
        s = g.matrix().clone();
    } else if product {
        for k in 0..m {
            let c2 = DMatrix::from_row_slice(2, 2, &[cov[(k, k)], cov[(k, m + k)], cov[(m + k, k)], cov[(m + k, m + k)]]);
            let eig = SymmetricEigen::new(c2);
            let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt())) * eig.eigenvectors.transpose();
            s[(k, k)] = root[(0, 0)];
            s[(k, m + k)] = root[(0, 1)];
            s[(m + k, k)] = root[(1, 0)];
            s[(m + k, m + k)] = root[(1, 1)];
        }
    } else {
        return Err(OracleError::UnpreparableState);
    }
    let g = SymplecticGate::new(s, state.mean().clone()).map_err(|_| OracleError::UnpreparableState)?;
    if (g.matrix() * g.matrix().transpose() - cov).amax() > 1e-8 {
        return Err(OracleError::UnpreparableState);
    }
    Ok(vec![CircuitElement::Gaussian(g)])
}
