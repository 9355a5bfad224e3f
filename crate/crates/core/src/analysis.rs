//! Resource classification of circuit gates: non-Gaussianity (cubic phase),
//! entanglement (mode-coupling block-diagonal Gaussians) and symplectic
//! coherence (Gaussians mixing positions with momenta).

use serde::Serialize;

use crate::circuit::{CircuitElement, CircuitIR};
use crate::circuit_file::CircuitFile;
use crate::pathprop::EFFICIENT_ROTATION_LIMIT;
use crate::symplectic::BLOCK_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateClass {
    NonGaussian,
    EntanglingBlockDiagonal,
    /// Block-diagonal and acting on each mode separately, e.g. a squeezer.
    LocalBlockDiagonal,
    CoherenceInducing,
    DisplacementOnly,
    Identity,
}

impl GateClass {
    pub fn label(self) -> &'static str {
        match self {
            GateClass::NonGaussian => "non-Gaussian",
            GateClass::EntanglingBlockDiagonal => "entangling block-diagonal",
            GateClass::LocalBlockDiagonal => "local block-diagonal",
            GateClass::CoherenceInducing => "coherence-inducing",
            GateClass::DisplacementOnly => "displacement-only",
            GateClass::Identity => "identity",
        }
    }
}

pub fn classify(el: &CircuitElement) -> GateClass {
    match el {
        CircuitElement::CubicPhase { .. } => GateClass::NonGaussian,
        CircuitElement::Rotation { .. } => GateClass::CoherenceInducing,
        CircuitElement::Gaussian(g) => {
            if g.is_linear_identity(BLOCK_TOL) {
                if g.has_displacement() {
                    GateClass::DisplacementOnly
                } else {
                    GateClass::Identity
                }
            } else if !g.is_block_diagonal(BLOCK_TOL) {
                GateClass::CoherenceInducing
            } else if g.couples_modes(BLOCK_TOL) {
                GateClass::EntanglingBlockDiagonal
            } else {
                GateClass::LocalBlockDiagonal
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// No coherence-inducing gate.
    Efficient,
    /// A constant number of coherence-inducing gates.
    EfficientConstantCoherence,
    OutsideProvenRegime,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Efficient => "efficient (no symplectic coherence)",
            Verdict::EfficientConstantCoherence => "efficient for constant c (low symplectic coherence)",
            Verdict::OutsideProvenRegime => "outside proven regime",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateReport {
    /// 1-based position in the circuit.
    pub index: usize,
    /// Source line, when the circuit came from a file.
    pub line: Option<usize>,
    pub gate: String,
    pub class: GateClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub modes: usize,
    pub gates: Vec<GateReport>,
    /// Number of cubic phase gates.
    pub t: usize,
    /// Number of coherence-inducing gates.
    pub c: usize,
    pub entangling: usize,
    pub local_block_diagonal: usize,
    pub displacement_only: usize,
    /// Whether the circuit fits the block/rotation normal form.
    pub supported: bool,
    pub verdict: Verdict,
}

impl AnalysisReport {
    pub fn count(&self, class: GateClass) -> usize {
        self.gates.iter().filter(|g| g.class == class).count()
    }
}

fn element_name(el: &CircuitElement) -> &'static str {
    match el {
        CircuitElement::CubicPhase { .. } => "cubic",
        CircuitElement::Rotation { .. } => "rotation",
        CircuitElement::Gaussian(_) => "gaussian",
    }
}

pub fn analyze(elements: &[CircuitElement], modes: usize) -> AnalysisReport {
    let names: Vec<&str> = elements.iter().map(element_name).collect();
    build(elements, modes, &names, None)
}

pub fn analyze_file(file: &CircuitFile) -> AnalysisReport {
    let names: Vec<&str> = file.gates().iter().map(|g| g.keyword()).collect();
    build(file.elements(), file.modes(), &names, Some(file.gate_lines()))
}

fn build(elements: &[CircuitElement], modes: usize, names: &[&str], lines: Option<&[usize]>) -> AnalysisReport {
    let gates: Vec<GateReport> = elements
        .iter()
        .enumerate()
        .map(|(i, el)| GateReport {
            index: i + 1,
            line: lines.and_then(|l| l.get(i).copied()).filter(|&l| l > 0),
            gate: names[i].to_string(),
            class: classify(el),
        })
        .collect();
    let count = |c: GateClass| gates.iter().filter(|g| g.class == c).count();
    let t = count(GateClass::NonGaussian);
    let c = count(GateClass::CoherenceInducing);
    let supported = CircuitIR::normalize(elements.to_vec(), modes).is_ok();
    let verdict = if !supported || c > EFFICIENT_ROTATION_LIMIT {
        Verdict::OutsideProvenRegime
    } else if c == 0 {
        Verdict::Efficient
    } else {
        Verdict::EfficientConstantCoherence
    };
    AnalysisReport {
        modes,
        t,
        c,
        entangling: count(GateClass::EntanglingBlockDiagonal),
        local_block_diagonal: count(GateClass::LocalBlockDiagonal),
        displacement_only: count(GateClass::DisplacementOnly),
        supported,
        verdict,
        gates,
    }
}
