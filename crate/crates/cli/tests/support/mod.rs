//! Seeded generators of random blocks, circuits and states shared by the
//! integration suites.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvpath::fockoracle::FockState;
use cvpath::{CircuitElement, OGammaBlock, SymplecticGate};

pub struct Gen {
    pub rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Entries drawn from [-1, 1] and re-orthogonalized by QR.
    pub fn orthogonal(&mut self, m: usize) -> DMatrix<f64> {
        loop {
            let a = DMatrix::from_fn(m, m, |_, _| self.rng.gen_range(-1.0f64..1.0));
            if a.determinant().abs() > 1e-3 {
                return a.qr().q();
            }
        }
    }

    pub fn displacement(&mut self, m: usize, scale: f64) -> DVector<f64> {
        if scale == 0.0 {
            return DVector::zeros(2 * m);
        }
        DVector::from_fn(2 * m, |_, _| self.rng.gen_range(-scale..scale))
    }

    /// Displaced orthogonal gate.
    pub fn orthogonal_gate(&mut self, m: usize, disp: f64) -> SymplecticGate {
        let o = self.orthogonal(m);
        let d = self.displacement(m, disp);
        SymplecticGate::orthogonal(&o).unwrap().with_displacement(d).unwrap()
    }

    /// Displaced block-diagonal gate `A (+) A^{-T}` with singular values of
    /// `A` in [0.7, 1.4].
    pub fn block_gate(&mut self, m: usize, disp: f64) -> SymplecticGate {
        let o1 = self.orthogonal(m);
        let o2 = self.orthogonal(m);
        let sig = DMatrix::from_diagonal(&DVector::from_fn(m, |_, _| self.rng.gen_range(0.7..1.4)));
        let a = o1 * sig * o2;
        let d = self.displacement(m, disp);
        SymplecticGate::block_diag(&a).unwrap().with_displacement(d).unwrap()
    }

    /// `t` cubicities in [-0.5, 0.5] with total magnitude above 1e-3.
    pub fn cubicities(&mut self, t: usize) -> Vec<f64> {
        loop {
            let g: Vec<f64> = (0..t).map(|_| self.rng.gen_range(-0.5..0.5)).collect();
            if g.iter().sum::<f64>().abs() > 1e-3 {
                return g;
            }
        }
    }

    /// Block of `t + 1` orthogonal gates, displaced by up to `disp`, around
    /// `t` cubic gates.
    pub fn block(&mut self, m: usize, t: usize, disp: f64) -> OGammaBlock {
        let gaussians = (0..=t).map(|_| self.orthogonal_gate(m, disp)).collect();
        OGammaBlock::new(gaussians, self.cubicities(t)).unwrap()
    }

    /// A circuit in application order with exactly `c` coherence-inducing
    /// gates and `t` cubic gates on arbitrary modes.
    pub fn circuit(&mut self, m: usize, c: usize, t: usize, gamma_max: f64, disp: f64) -> Vec<CircuitElement> {
        let mut per_block = vec![0usize; c + 1];
        for _ in 0..t {
            per_block[self.index(c + 1)] += 1;
        }
        let mut els = Vec::new();
        for (b, &cubics) in per_block.iter().enumerate() {
            if b > 0 {
                let mode = self.index(m);
                let el = match self.index(3) {
                    0 => CircuitElement::rotation(self.uniform(0.2, 3.0), mode),
                    1 => CircuitElement::Gaussian(SymplecticGate::fourier(m, mode).unwrap()),
                    _ => CircuitElement::Gaussian(SymplecticGate::rotation(m, self.uniform(-3.0, -0.2), mode).unwrap()),
                };
                els.push(el);
            }
            for _ in 0..cubics {
                els.push(CircuitElement::Gaussian(self.block_gate(m, disp)));
                let mode = self.index(m);
                els.push(CircuitElement::cubic(self.uniform(-gamma_max, gamma_max), mode));
            }
            els.push(CircuitElement::Gaussian(self.block_gate(m, disp)));
        }
        els
    }

    /// Like [`Gen::circuit`] with orthogonal (passive) Gaussians, which the
    /// Fock oracle handles without squeezing.
    pub fn passive_circuit(&mut self, m: usize, c: usize, t: usize, gamma_max: f64, disp: f64) -> Vec<CircuitElement> {
        let mut per_block = vec![0usize; c + 1];
        for _ in 0..t {
            per_block[self.index(c + 1)] += 1;
        }
        let mut els = Vec::new();
        for (b, &cubics) in per_block.iter().enumerate() {
            if b > 0 {
                let mode = self.index(m);
                els.push(CircuitElement::rotation(self.uniform(0.2, 3.0), mode));
            }
            for _ in 0..cubics {
                els.push(CircuitElement::Gaussian(self.orthogonal_gate(m, disp)));
                let mode = self.index(m);
                els.push(CircuitElement::cubic(self.uniform(-gamma_max, gamma_max), mode));
            }
            els.push(CircuitElement::Gaussian(self.orthogonal_gate(m, disp)));
        }
        els
    }

    /// Normalized superposition of number states with occupations at most 2.
    pub fn low_energy_state(&mut self, m: usize) -> Vec<(Vec<usize>, Complex64)> {
        let count = 1 + self.index(4);
        (0..count)
            .map(|_| {
                let occ = (0..m).map(|_| self.index(3)).collect();
                (occ, Complex64::new(self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0)))
            })
            .collect()
    }
}

pub fn state_at(m: usize, cutoff: usize, comps: &[(Vec<usize>, Complex64)]) -> FockState {
    FockState::from_number_states(m, cutoff, comps)
}
