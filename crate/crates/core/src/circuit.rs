//! Circuit elements and the normalized layer structure used by the
//! back-propagation engine.
//!
//! A normalized circuit alternates blocks and rotation layers:
//! `block_0, R_1(theta_1), block_1, ..., R_1(theta_c), block_c` in the order
//! the gates act on the state. Each block is
//! `O_0, cubic(gamma_1), O_1, ..., cubic(gamma_t), O_t` with every `O_i` a
//! displaced block-diagonal Gaussian and every cubic gate on mode 1.

use thiserror::Error;

use crate::symplectic::{GateError, SymplecticGate, BLOCK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub enum CircuitElement {
    Gaussian(SymplecticGate),
    /// `exp(i gamma q^3)` with Heisenberg action `p -> p + 3 gamma q^2`.
    CubicPhase { gamma: f64, mode: usize },
    Rotation { theta: f64, mode: usize },
}

impl CircuitElement {
    pub fn cubic(gamma: f64, mode: usize) -> Self {
        CircuitElement::CubicPhase { gamma, mode }
    }

    pub fn rotation(theta: f64, mode: usize) -> Self {
        CircuitElement::Rotation { theta, mode }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CircuitError {
    #[error("unsupported symplectic coherence structure: element {index} mixes positions and momenta beyond a single-mode rotation")]
    UnsupportedCoherence { index: usize },
    #[error("element {index}: mode index {mode} out of range for {width} modes")]
    ModeOutOfRange { index: usize, mode: usize, width: usize },
    #[error("element {index}: non-finite parameter")]
    NonFinite { index: usize },
    #[error("element {index}: {source}")]
    Gate { index: usize, source: GateError },
    #[error("circuit needs at least one mode")]
    NoModes,
}

/// `O_0, cubic(gamma_1), O_1, ..., cubic(gamma_t), O_t` with cubic gates on mode 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OGammaBlock {
    gaussians: Vec<SymplecticGate>,
    cubicities: Vec<f64>,
}

impl OGammaBlock {
    /// `gaussians.len()` must be `cubicities.len() + 1` and every Gaussian
    /// block-diagonal.
    pub fn new(gaussians: Vec<SymplecticGate>, cubicities: Vec<f64>) -> Result<Self, CircuitError> {
        assert_eq!(gaussians.len(), cubicities.len() + 1, "block needs t+1 Gaussians for t cubic gates");
        let width = gaussians[0].width();
        for (index, g) in gaussians.iter().enumerate() {
            if g.width() != width {
                return Err(CircuitError::Gate {
                    index,
                    source: GateError::WidthMismatch { left: width, right: g.width() },
                });
            }
            if !g.is_block_diagonal(BLOCK_TOL) {
                return Err(CircuitError::UnsupportedCoherence { index });
            }
        }
        if let Some(index) = cubicities.iter().position(|g| !g.is_finite()) {
            return Err(CircuitError::NonFinite { index });
        }
        Ok(OGammaBlock { gaussians, cubicities })
    }

    pub fn identity(width: usize) -> Self {
        OGammaBlock { gaussians: vec![SymplecticGate::identity(width)], cubicities: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.gaussians[0].width()
    }

    /// Number of cubic gates `t`.
    pub fn cubic_count(&self) -> usize {
        self.cubicities.len()
    }

    pub fn gaussians(&self) -> &[SymplecticGate] {
        &self.gaussians
    }

    pub fn cubicities(&self) -> &[f64] {
        &self.cubicities
    }

    /// Sum of the block's cubicities.
    pub fn total_cubicity(&self) -> f64 {
        self.cubicities.iter().sum()
    }

    /// Gate list in application order.
    pub fn elements(&self) -> Vec<CircuitElement> {
        let mut out = Vec::with_capacity(2 * self.gaussians.len());
        for (i, g) in self.gaussians.iter().enumerate() {
            if i > 0 {
                out.push(CircuitElement::cubic(self.cubicities[i - 1], 0));
            }
            out.push(CircuitElement::Gaussian(g.clone()));
        }
        out
    }
}

/// Validated circuit together with its normalized layer structure.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitIR {
    width: usize,
    elements: Vec<CircuitElement>,
    blocks: Vec<OGammaBlock>,
    rotations: Vec<f64>,
}

struct Builder {
    width: usize,
    blocks: Vec<OGammaBlock>,
    rotations: Vec<f64>,
    gaussians: Vec<SymplecticGate>,
    cubicities: Vec<f64>,
    pending: SymplecticGate,
}

impl Builder {
    fn new(width: usize) -> Self {
        Builder {
            width,
            blocks: Vec::new(),
            rotations: Vec::new(),
            gaussians: Vec::new(),
            cubicities: Vec::new(),
            pending: SymplecticGate::identity(width),
        }
    }

    fn push_gaussian(&mut self, g: &SymplecticGate, index: usize) -> Result<(), CircuitError> {
        self.pending = SymplecticGate::compose(g, &self.pending).map_err(|source| CircuitError::Gate { index, source })?;
        Ok(())
    }

    fn swap_into_first(&mut self, mode: usize, index: usize) -> Result<Option<SymplecticGate>, CircuitError> {
        if mode == 0 {
            return Ok(None);
        }
        let swap = SymplecticGate::swap(self.width, 0, mode).map_err(|source| CircuitError::Gate { index, source })?;
        self.push_gaussian(&swap, index)?;
        Ok(Some(swap))
    }

    fn push_cubic(&mut self, gamma: f64, mode: usize, index: usize) -> Result<(), CircuitError> {
        let swap = self.swap_into_first(mode, index)?;
        let done = std::mem::replace(&mut self.pending, SymplecticGate::identity(self.width));
        self.gaussians.push(done);
        self.cubicities.push(gamma);
        if let Some(swap) = swap {
            self.pending = swap;
        }
        Ok(())
    }

    fn close_block(&mut self) -> OGammaBlock {
        let done = std::mem::replace(&mut self.pending, SymplecticGate::identity(self.width));
        let mut gaussians = std::mem::take(&mut self.gaussians);
        gaussians.push(done);
        let cubicities = std::mem::take(&mut self.cubicities);
        OGammaBlock { gaussians, cubicities }
    }

    fn push_rotation(&mut self, theta: f64, mode: usize, after: Option<&SymplecticGate>, index: usize) -> Result<(), CircuitError> {
        let swap = self.swap_into_first(mode, index)?;
        let block = self.close_block();
        self.blocks.push(block);
        self.rotations.push(theta);
        if let Some(swap) = swap {
            self.pending = swap;
        }
        if let Some(g) = after {
            self.push_gaussian(g, index)?;
        }
        Ok(())
    }
}

impl CircuitIR {
    /// Groups the elements into blocks and rotation layers.
    ///
    /// Cubic gates and rotations on mode `k != 1` are conjugated onto mode 1
    /// by SWAP gates absorbed into the neighbouring Gaussians. Gaussians that
    /// are not block-diagonal must be single-mode rotations (any displacement
    /// is moved into the following block); anything else is rejected.
    pub fn normalize(elements: Vec<CircuitElement>, width: usize) -> Result<Self, CircuitError> {
        if width == 0 {
            return Err(CircuitError::NoModes);
        }
        let mut b = Builder::new(width);
        for (index, el) in elements.iter().enumerate() {
            match el {
                CircuitElement::CubicPhase { gamma, mode } => {
                    if *mode >= width {
                        return Err(CircuitError::ModeOutOfRange { index, mode: *mode, width });
                    }
                    if !gamma.is_finite() {
                        return Err(CircuitError::NonFinite { index });
                    }
                    b.push_cubic(*gamma, *mode, index)?;
                }
                CircuitElement::Rotation { theta, mode } => {
                    if *mode >= width {
                        return Err(CircuitError::ModeOutOfRange { index, mode: *mode, width });
                    }
                    let g = SymplecticGate::rotation(width, *theta, *mode).map_err(|source| CircuitError::Gate { index, source })?;
                    if g.is_block_diagonal(BLOCK_TOL) {
                        b.push_gaussian(&g, index)?;
                    } else {
                        b.push_rotation(*theta, *mode, None, index)?;
                    }
                }
                CircuitElement::Gaussian(g) => {
                    if g.width() != width {
                        return Err(CircuitError::Gate {
                            index,
                            source: GateError::WidthMismatch { left: width, right: g.width() },
                        });
                    }
                    if g.is_block_diagonal(BLOCK_TOL) {
                        b.push_gaussian(g, index)?;
                    } else if let Some((mode, theta)) = g.as_single_mode_rotation(BLOCK_TOL) {
                        let disp = if g.has_displacement() {
                            Some(SymplecticGate::displacement(g.displacement_vector().clone()).map_err(|source| CircuitError::Gate { index, source })?)
                        } else {
                            None
                        };
                        b.push_rotation(theta, mode, disp.as_ref(), index)?;
                    } else {
                        return Err(CircuitError::UnsupportedCoherence { index });
                    }
                }
            }
        }
        let last = b.close_block();
        b.blocks.push(last);
        Ok(CircuitIR { width, elements, blocks: b.blocks, rotations: b.rotations })
    }

    pub fn empty(width: usize) -> Self {
        CircuitIR { width, elements: Vec::new(), blocks: vec![OGammaBlock::identity(width)], rotations: Vec::new() }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Elements as supplied, before normalization.
    pub fn elements(&self) -> &[CircuitElement] {
        &self.elements
    }

    /// Blocks in application order; there are `c + 1` of them.
    pub fn blocks(&self) -> &[OGammaBlock] {
        &self.blocks
    }

    /// Rotation angles on mode 1; `rotations()[i]` acts between block `i` and `i + 1`.
    pub fn rotations(&self) -> &[f64] {
        &self.rotations
    }

    /// Number of rotation layers `c`.
    pub fn rotation_count(&self) -> usize {
        self.rotations.len()
    }

    /// Largest per-block cubic count.
    pub fn max_block_cubics(&self) -> usize {
        self.blocks.iter().map(OGammaBlock::cubic_count).max().unwrap_or(0)
    }

    pub fn total_cubics(&self) -> usize {
        self.blocks.iter().map(OGammaBlock::cubic_count).sum()
    }

    /// The normalized circuit as a flat gate list in application order.
    pub fn flatten(&self) -> Vec<CircuitElement> {
        let mut out = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                out.push(CircuitElement::rotation(self.rotations[i - 1], 0));
            }
            out.extend(block.elements());
        }
        out
    }
}
