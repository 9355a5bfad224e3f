//! Heisenberg-picture back-propagation of polynomial observables.
//!
//! Inside a block `O_t C_t O_{t-1} ... C_1 O_0` of block-diagonal Gaussians
//! `O_i` and cubic gates `C_i` on mode 1, a quadrature evolves as
//!
//! ```text
//! U^dag r U = A_{t..0}(r) + sum_i 3 gamma_i [A_{t..i}(r)]_{p_1} (A_{i-1..0}(q_1))^2
//! ```
//!
//! where `A_{j..i}` is the affine Heisenberg map of `O_j ... O_i` and
//! `[.]_{p_1}` takes the `p_1` coefficient. Each term is one computational
//! path through a single cubic gate; positions never pick up momenta, so the
//! result has degree at most two with a position-only quadratic part.
//! Rotation layers between blocks mix `q_1` and `p_1` and double the degree.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::circuit::{CircuitElement, CircuitIR, OGammaBlock};
use crate::moments::{GaussianStateSpec, MomentError, MomentEvaluator, DEFAULT_DEGREE_GUARD};
use crate::quadpoly::{AlgebraError, Monomial, NCPolynomial, QuadVar, Substitution};
use crate::symplectic::{GateError, SymplecticGate};

/// Default bound on the predicted term count accepted by [`naive_backprop`].
pub const NAIVE_TERM_GUARD: f64 = 1e6;

/// Tolerance for the Hermiticity check on observables.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackpropError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Gate(#[from] GateError),
    #[error(transparent)]
    Moment(#[from] MomentError),
    #[error("observable width {got} does not match circuit width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("observable is not Hermitian (deviation {0:.3e})")]
    NonHermitian(f64),
    #[error("predicted term count {predicted:.3e} exceeds the guard {guard:.3e}")]
    TermGuard { predicted: f64, guard: f64 },
    #[error("evolved {var} violates the degree bound: degree {degree} > {bound}")]
    DegreeBound { var: QuadVar, degree: u32, bound: u32 },
    #[error("evolved {var} has momentum variables in its quadratic part after a block")]
    MomentumInQuadratic { var: QuadVar },
}

/// Affine maps of all prefix and suffix products of a block's Gaussians.
#[derive(Debug, Clone)]
pub struct BlockCache {
    /// `prefix[j]` is the map of `O_j ... O_0`.
    prefix: Vec<SymplecticGate>,
    /// `suffix[i]` is the map of `O_t ... O_i`.
    suffix: Vec<SymplecticGate>,
}

impl BlockCache {
    pub fn new(block: &OGammaBlock) -> Result<Self, GateError> {
        let gs = block.gaussians();
        let mut prefix = Vec::with_capacity(gs.len());
        for (j, g) in gs.iter().enumerate() {
            let next = if j == 0 { g.clone() } else { SymplecticGate::compose(g, &prefix[j - 1])? };
            prefix.push(next);
        }
        let mut suffix = vec![gs[gs.len() - 1].clone(); gs.len()];
        for i in (0..gs.len() - 1).rev() {
            suffix[i] = SymplecticGate::compose(&suffix[i + 1], &gs[i])?;
        }
        Ok(BlockCache { prefix, suffix })
    }

    pub fn prefix(&self, j: usize) -> &SymplecticGate {
        &self.prefix[j]
    }

    pub fn suffix(&self, i: usize) -> &SymplecticGate {
        &self.suffix[i]
    }
}

fn backprop_with_cache(block: &OGammaBlock, cache: &BlockCache, r: QuadVar) -> Result<NCPolynomial, AlgebraError> {
    let m = block.width();
    let row = r.block_index(m);
    let p1 = QuadVar::p(0).block_index(m);
    let mut out = cache.suffix(0).quad_transform(r);
    for (k, &gamma) in block.cubicities().iter().enumerate() {
        let i = k + 1;
        let weight = 3.0 * gamma * cache.suffix(i).matrix()[(row, p1)];
        if weight == 0.0 {
            continue;
        }
        let lin = cache.prefix(i - 1).quad_transform(QuadVar::q(0));
        let sq = lin.multiply(&lin)?;
        out = out.add(&sq.scale(Complex64::new(weight, 0.0)))?;
    }
    Ok(out)
}

/// Exact `O_gamma^dag r O_gamma` for one block, via the telescoped path sum.
pub fn backprop_quadrature_block(block: &OGammaBlock, r: QuadVar) -> Result<NCPolynomial, BackpropError> {
    let cache = BlockCache::new(block)?;
    Ok(backprop_with_cache(block, &cache, r)?)
}

/// The same evolution written as the cubicity-weighted average of `t`
/// single-cubic circuits `O_{t..i} C(gamma) O_{i-1..0}` with
/// `gamma = sum gamma_i`. Each path is evolved gate by gate. Returns `None`
/// when the total cubicity is (numerically) zero.
pub fn path_sum_form(block: &OGammaBlock, r: QuadVar) -> Result<Option<NCPolynomial>, BackpropError> {
    let gamma = block.total_cubicity();
    if gamma.abs() <= 1e-12 || block.cubic_count() == 0 {
        return Ok(None);
    }
    let m = block.width();
    let cache = BlockCache::new(block)?;
    let obs = NCPolynomial::var(m, r);
    let mut out = NCPolynomial::zero(m);
    for (k, &gi) in block.cubicities().iter().enumerate() {
        let i = k + 1;
        let path = vec![
            CircuitElement::Gaussian(cache.prefix(i - 1).clone()),
            CircuitElement::cubic(gamma, 0),
            CircuitElement::Gaussian(cache.suffix(i).clone()),
        ];
        let evolved = evolve_elements(&path, &obs)?;
        out = out.add(&evolved.scale(Complex64::new(gi / gamma, 0.0)))?;
    }
    Ok(Some(out))
}

fn cubic_substitution(width: usize, gamma: f64, mode: usize) -> Substitution {
    let mut s = Substitution::identity(width);
    let image = NCPolynomial::from_terms(
        width,
        [
            (Monomial::var(width, QuadVar::p(mode)), Complex64::new(1.0, 0.0)),
            (Monomial::from_powers(width, &[(QuadVar::q(mode), 2)]), Complex64::new(3.0 * gamma, 0.0)),
        ],
    );
    s.set(QuadVar::p(mode), image);
    s
}

fn element_substitution(width: usize, el: &CircuitElement) -> Result<Substitution, GateError> {
    Ok(match el {
        CircuitElement::Gaussian(g) => g.substitution(),
        CircuitElement::CubicPhase { gamma, mode } => cubic_substitution(width, *gamma, *mode),
        CircuitElement::Rotation { theta, mode } => SymplecticGate::rotation(width, *theta, *mode)?.substitution(),
    })
}

/// Gate-by-gate Heisenberg evolution of `obs` through `elements` (given in
/// application order).
fn evolve_elements(elements: &[CircuitElement], obs: &NCPolynomial) -> Result<NCPolynomial, BackpropError> {
    let m = obs.width();
    let mut current = obs.clone();
    for el in elements.iter().rev() {
        current = current.substitute(&element_substitution(m, el)?)?;
    }
    Ok(current)
}

fn rotation_substitution(width: usize, theta: f64) -> Result<Substitution, GateError> {
    Ok(SymplecticGate::rotation(width, theta, 0)?.substitution())
}

/// Output of [`backprop_observable`].
#[derive(Debug, Clone)]
pub struct BackpropResult {
    pub polynomial: NCPolynomial,
    /// Number of single-cubic computational paths summed (all blocks).
    pub path_count: usize,
    pub max_degree: u32,
    pub term_count: usize,
    pub wall_time: Duration,
}

/// Evolved images of all `2m` quadratures through one block, with the
/// degree-two / position-only checks applied.
pub fn block_images(block: &OGammaBlock) -> Result<Substitution, BackpropError> {
    let m = block.width();
    let cache = BlockCache::new(block)?;
    let vars: Vec<QuadVar> = QuadVar::all(m).collect();
    let images: Vec<Result<NCPolynomial, AlgebraError>> =
        vars.par_iter().map(|&v| backprop_with_cache(block, &cache, v)).collect();
    let mut sub = Substitution::new(m);
    for (v, img) in vars.into_iter().zip(images) {
        let img = img?;
        let degree = img.degree();
        if degree > 2 {
            return Err(BackpropError::DegreeBound { var: v, degree, bound: 2 });
        }
        if img.homogeneous_part(2).terms().any(|(mono, _)| mono.momentum_degree() > 0) {
            return Err(BackpropError::MomentumInQuadratic { var: v });
        }
        sub.set(v, img);
    }
    Ok(sub)
}

/// `U^dag H U` for a normalized circuit, walking layers from the last applied
/// to the first applied.
pub fn backprop_observable(circuit: &CircuitIR, observable: &NCPolynomial) -> Result<BackpropResult, BackpropError> {
    let start = Instant::now();
    let m = circuit.width();
    if observable.width() != m {
        return Err(BackpropError::WidthMismatch { expected: m, got: observable.width() });
    }
    let blocks = circuit.blocks();
    let mut current = observable.clone();
    for (j, block) in blocks.iter().enumerate().rev() {
        let images = block_images(block)?;
        current = current.substitute(&images)?;
        if j > 0 {
            current = current.substitute(&rotation_substitution(m, circuit.rotations()[j - 1])?)?;
        }
    }
    Ok(BackpropResult {
        max_degree: current.degree(),
        term_count: current.term_count(),
        path_count: circuit.total_cubics(),
        polynomial: current,
        wall_time: start.elapsed(),
    })
}

/// Evolves a single quadrature and checks it against the `2^(c+1)` bound
/// (or 1 when the circuit has no cubic gates).
pub fn backprop_quadrature(circuit: &CircuitIR, r: QuadVar) -> Result<NCPolynomial, BackpropError> {
    let m = circuit.width();
    let evolved = backprop_observable(circuit, &NCPolynomial::var(m, r))?.polynomial;
    let bound = degree_bound(circuit, 1);
    let degree = evolved.degree();
    if degree > bound {
        return Err(BackpropError::DegreeBound { var: r, degree, bound });
    }
    Ok(evolved)
}

/// Predicted maximum degree of the evolved observable: `d * 2^(c+1)`, or `d`
/// for a Gaussian circuit.
pub fn degree_bound(circuit: &CircuitIR, d: u32) -> u32 {
    if circuit.total_cubics() == 0 {
        d
    } else {
        d.saturating_mul(1u32 << (circuit.rotation_count() + 1).min(30))
    }
}

/// Number of monomials of degree at most `degree` in `vars` variables.
fn monomial_count(vars: usize, degree: u32) -> f64 {
    // C(vars + degree, degree)
    let mut r = 1.0;
    for j in 0..degree as usize {
        r = r * (vars + j + 1) as f64 / (j + 1) as f64;
    }
    r
}

/// Gate-by-gate substitution through the original element list, without the
/// block decomposition. Exponential in the worst case; refuses instances whose
/// predicted term count exceeds `guard`.
pub fn naive_backprop_guarded(circuit: &CircuitIR, observable: &NCPolynomial, guard: f64) -> Result<NCPolynomial, BackpropError> {
    let m = circuit.width();
    if observable.width() != m {
        return Err(BackpropError::WidthMismatch { expected: m, got: observable.width() });
    }
    let predicted = monomial_count(2 * m, degree_bound(circuit, observable.degree()));
    if predicted > guard {
        return Err(BackpropError::TermGuard { predicted, guard });
    }
    evolve_elements(circuit.elements(), observable)
}

pub fn naive_backprop(circuit: &CircuitIR, observable: &NCPolynomial) -> Result<NCPolynomial, BackpropError> {
    naive_backprop_guarded(circuit, observable, NAIVE_TERM_GUARD)
}

/// Output of [`expectation`].
#[derive(Debug, Clone)]
pub struct ExpectationResult {
    pub value: f64,
    /// Imaginary part of the raw complex trace.
    pub imag_residual: f64,
    pub backprop: BackpropResult,
}

/// `Tr[rho U^dag H U]` for a Gaussian input state.
pub fn expectation(circuit: &CircuitIR, state: &GaussianStateSpec, observable: &NCPolynomial) -> Result<ExpectationResult, BackpropError> {
    expectation_with_guard(circuit, state, observable, DEFAULT_DEGREE_GUARD)
}

pub fn expectation_with_guard(
    circuit: &CircuitIR,
    state: &GaussianStateSpec,
    observable: &NCPolynomial,
    degree_guard: u32,
) -> Result<ExpectationResult, BackpropError> {
    if state.width() != circuit.width() {
        return Err(BackpropError::WidthMismatch { expected: circuit.width(), got: state.width() });
    }
    let deviation = observable.max_abs_diff(&observable.adjoint());
    if deviation > HERMITIAN_TOL {
        return Err(BackpropError::NonHermitian(deviation));
    }
    let backprop = backprop_observable(circuit, observable)?;
    let raw = MomentEvaluator::with_guard(state, degree_guard).expectation(&backprop.polynomial)?;
    Ok(ExpectationResult { value: raw.re, imag_residual: raw.im, backprop })
}

/// Cost model report for a normalized circuit and observable degree.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CostReport {
    pub modes: usize,
    pub max_block_cubics: usize,
    pub total_cubics: usize,
    pub rotation_layers: usize,
    pub observable_degree: u32,
    pub formula: String,
    pub formula_value: f64,
    pub degree_bound: u32,
    /// `m^(degree_bound)`, the order of the evolved term count.
    pub term_order: f64,
    pub efficient_regime: bool,
}

/// Rotation-layer count up to which a circuit is reported as efficiently simulable.
pub const EFFICIENT_ROTATION_LIMIT: usize = 2;

pub fn cost_estimate(circuit: &CircuitIR, d: u32) -> CostReport {
    let m = circuit.width() as f64;
    let t = circuit.max_block_cubics() as f64;
    let c = circuit.rotation_count();
    let (formula, value) = if c == 0 {
        ("O(m^{3d}+t^2m^6)".to_string(), m.powi(3 * d as i32) + t * t * m.powi(6))
    } else {
        let exp = d as f64 * 2f64.powi(c as i32 + 1);
        ("O(m^{d2^{c+1}}+(c+1)t^2m^7)".to_string(), m.powf(exp) + (c as f64 + 1.0) * t * t * m.powi(7))
    };
    let bound = degree_bound(circuit, d);
    CostReport {
        modes: circuit.width(),
        max_block_cubics: circuit.max_block_cubics(),
        total_cubics: circuit.total_cubics(),
        rotation_layers: c,
        observable_degree: d,
        formula,
        formula_value: value,
        degree_bound: bound,
        term_order: m.powf(bound as f64),
        efficient_regime: c <= EFFICIENT_ROTATION_LIMIT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitElement as E;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn single_cubic_block() {
        let g = 0.37;
        let block = OGammaBlock::new(vec![SymplecticGate::identity(1); 2], vec![g]).unwrap();
        let p = backprop_quadrature_block(&block, QuadVar::p(0)).unwrap();
        let expected = NCPolynomial::from_terms(
            1,
            [(Monomial::var(1, QuadVar::p(0)), c(1.0)), (Monomial::from_powers(1, &[(QuadVar::q(0), 2)]), c(3.0 * g))],
        );
        assert_eq!(p, expected);
        let q = backprop_quadrature_block(&block, QuadVar::q(0)).unwrap();
        assert_eq!(q, NCPolynomial::var(1, QuadVar::q(0)));
    }

    #[test]
    fn two_cubics_add_up() {
        let (g1, g2) = (0.2, -0.45);
        let block = OGammaBlock::new(vec![SymplecticGate::identity(1); 3], vec![g1, g2]).unwrap();
        let p = backprop_quadrature_block(&block, QuadVar::p(0)).unwrap();
        let q2 = Monomial::from_powers(1, &[(QuadVar::q(0), 2)]);
        assert!((p.coefficient(&q2) - c(3.0 * (g1 + g2))).norm() < 1e-15);
        let weighted = path_sum_form(&block, QuadVar::p(0)).unwrap().unwrap();
        assert!(weighted.max_abs_diff(&p) < 1e-14);
    }

    #[test]
    fn zero_total_cubicity_has_no_weighted_form() {
        let block = OGammaBlock::new(vec![SymplecticGate::identity(1); 3], vec![0.3, -0.3]).unwrap();
        assert!(path_sum_form(&block, QuadVar::p(0)).unwrap().is_none());
        // the telescoped sum is still exact
        let p = backprop_quadrature_block(&block, QuadVar::p(0)).unwrap();
        assert_eq!(p, NCPolynomial::var(1, QuadVar::p(0)));
    }

    #[test]
    fn number_operator_after_cubic() {
        let g = 0.1;
        let ir = CircuitIR::normalize(vec![E::cubic(g, 0)], 1).unwrap();
        let n = NCPolynomial::number_operator(1, 0);
        let res = backprop_observable(&ir, &n).unwrap();
        let shifted = NCPolynomial::parse(&format!("p1 + {} q1^2", 3.0 * g), 1).unwrap();
        let expected = NCPolynomial::parse("q1^2 - 2", 1)
            .unwrap()
            .add(&shifted.multiply(&shifted).unwrap())
            .unwrap()
            .scale(c(0.25));
        assert!(res.polynomial.max_abs_diff(&expected) < 1e-15);
        assert_eq!(res.path_count, 1);
        let ev = expectation(&ir, &GaussianStateSpec::vacuum(1), &n).unwrap();
        assert!((ev.value - 27.0 * g * g / 4.0).abs() < 1e-15);
        assert!(ev.imag_residual.abs() < 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let h = NCPolynomial::parse("(1,0) q1 p2 + 3 p1^2 q2", 2).unwrap();
        let ir = CircuitIR::normalize(vec![], 2).unwrap();
        assert_eq!(backprop_observable(&ir, &h).unwrap().polynomial, h);
        assert_eq!(naive_backprop(&ir, &h).unwrap(), h);
    }

    #[test]
    fn fourier_maps_q_squared_to_p_squared() {
        let ir = CircuitIR::normalize(vec![E::Gaussian(SymplecticGate::fourier(1, 0).unwrap())], 1).unwrap();
        let res = backprop_observable(&ir, &NCPolynomial::parse("q1^2", 1).unwrap()).unwrap();
        assert!(res.polynomial.max_abs_diff(&NCPolynomial::parse("p1^2", 1).unwrap()) < 1e-15);
    }

    #[test]
    fn cubic_fourier_cubic_reaches_degree_four() {
        let g = 0.2;
        let f = E::Gaussian(SymplecticGate::fourier(1, 0).unwrap());
        let ir = CircuitIR::normalize(vec![E::cubic(g, 0), f, E::cubic(g, 0)], 1).unwrap();
        // q1 -> q1 -> p1 -> p1 + 3g q1^2
        let q = NCPolynomial::var(1, QuadVar::q(0));
        let path_q = backprop_observable(&ir, &q).unwrap().polynomial;
        assert_eq!(path_q.degree(), 2);
        // p1 -> p1 + 3g q1^2 -> -q1 + 3g p1^2 -> -q1 + 3g (p1 + 3g q1^2)^2
        let p = NCPolynomial::var(1, QuadVar::p(0));
        let path = backprop_observable(&ir, &p).unwrap().polynomial;
        let naive = naive_backprop(&ir, &p).unwrap();
        assert!(path.max_abs_diff(&naive) < 1e-14);
        assert_eq!(path.degree(), 4);
        let q4 = Monomial::from_powers(1, &[(QuadVar::q(0), 4)]);
        assert!((path.coefficient(&q4) - c(27.0 * g * g * g)).norm() < 1e-15);
    }

    #[test]
    fn expectation_of_displaced_vacuum() {
        let d = nalgebra::DVector::from_vec(vec![1.2, -0.4]);
        let ir = CircuitIR::normalize(vec![E::Gaussian(SymplecticGate::displacement(d).unwrap())], 1).unwrap();
        let ev = expectation(&ir, &GaussianStateSpec::vacuum(1), &NCPolynomial::number_operator(1, 0)).unwrap();
        assert!((ev.value - (1.44 + 0.16) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian_observable() {
        let ir = CircuitIR::empty(1);
        let err = expectation(&ir, &GaussianStateSpec::vacuum(1), &NCPolynomial::parse("q1 p1", 1).unwrap()).unwrap_err();
        assert!(matches!(err, BackpropError::NonHermitian(_)));
    }

    #[test]
    fn cost_reports() {
        let mut els = Vec::new();
        for _ in 0..10 {
            els.push(E::cubic(0.1, 0));
        }
        let ir = CircuitIR::normalize(els, 4).unwrap();
        let r = cost_estimate(&ir, 2);
        assert_eq!(r.degree_bound, 4);
        assert_eq!(r.formula, "O(m^{3d}+t^2m^6)");
        assert_eq!(r.max_block_cubics, 10);
        let f = E::Gaussian(SymplecticGate::fourier(1, 0).unwrap());
        let ir = CircuitIR::normalize(vec![E::cubic(0.1, 0), f.clone(), E::cubic(0.1, 0), f, E::cubic(0.1, 0)], 1).unwrap();
        let r = cost_estimate(&ir, 1);
        assert_eq!(r.rotation_layers, 2);
        assert_eq!(r.degree_bound, 8);
        assert_eq!(r.formula, "O(m^{d2^{c+1}}+(c+1)t^2m^7)");
        assert_eq!(cost_estimate(&CircuitIR::empty(3), 3).degree_bound, 3);
    }

    #[test]
    fn naive_guard_declines_large_instances() {
        let f = E::Gaussian(SymplecticGate::fourier(6, 0).unwrap());
        let mut els = Vec::new();
        for _ in 0..4 {
            els.push(E::cubic(0.1, 0));
            els.push(f.clone());
        }
        els.push(E::cubic(0.1, 0));
        let ir = CircuitIR::normalize(els, 6).unwrap();
        let err = naive_backprop(&ir, &NCPolynomial::number_operator(6, 0)).unwrap_err();
        assert!(matches!(err, BackpropError::TermGuard { .. }));
    }
}
