//! Line-oriented circuit description format.
//!
//! ```text
//! # comment
//! modes 2
//! state mean 0 0 0 0
//! state cov 1 1 0 0 0
//! gate cubic 0.1 1
//! gate bs 0.5 1 2
//! observable 0.25 q1^2 + 0.25 p1^2 - 0.5
//! ```
//!
//! Mode indices are 1-based in the file and 0-based in memory. Gate lines
//! form the circuit in application order. Matrices are row-major; the
//! `symplectic` matrix and displacement vectors use the quadrature order
//! `q_1..q_m, p_1..p_m`.

use std::fmt::{self, Write as _};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::circuit::{CircuitElement, CircuitError, CircuitIR};
use crate::moments::{GaussianStateSpec, MomentError};
use crate::quadpoly::{AlgebraError, NCPolynomial};
use crate::symplectic::{GateError, SymplecticGate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FileError {
    #[error("line {line}, column {column}: syntax error: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}: {invariant}: {message}")]
    Semantic { line: usize, column: usize, invariant: &'static str, message: String },
}

impl FileError {
    pub fn line(&self) -> usize {
        match self {
            FileError::Syntax { line, .. } | FileError::Semantic { line, .. } => *line,
        }
    }
}

/// A file that parsed but whose circuit cannot be brought into the
/// block/rotation form.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("line {line}: {source}")]
pub struct StructureError {
    pub line: usize,
    pub source: CircuitError,
}

/// One `gate` statement, with 0-based modes.
#[derive(Debug, Clone, PartialEq)]
pub enum GateSpec {
    Cubic { gamma: f64, mode: usize },
    Rotation { theta: f64, mode: usize },
    Beamsplitter { eta: f64, i: usize, j: usize },
    Fourier { mode: usize },
    Sum { ctrl: usize, tgt: usize },
    Orth(DMatrix<f64>),
    BlockDiag(DMatrix<f64>),
    Disp(DVector<f64>),
    Symplectic(DMatrix<f64>),
}

impl GateSpec {
    pub fn keyword(&self) -> &'static str {
        match self {
            GateSpec::Cubic { .. } => "cubic",
            GateSpec::Rotation { .. } => "rotation",
            GateSpec::Beamsplitter { .. } => "bs",
            GateSpec::Fourier { .. } => "fourier",
            GateSpec::Sum { .. } => "sum",
            GateSpec::Orth(_) => "orth",
            GateSpec::BlockDiag(_) => "blockdiag",
            GateSpec::Disp(_) => "disp",
            GateSpec::Symplectic(_) => "symplectic",
        }
    }

    /// Builds the circuit element; fails if a matrix violates its invariant.
    pub fn to_element(&self, width: usize) -> Result<CircuitElement, GateError> {
        let check = |mode: usize| {
            if mode < width {
                Ok(())
            } else {
                Err(GateError::ModeOutOfRange { mode, width })
            }
        };
        Ok(match self {
            GateSpec::Cubic { gamma, mode } => {
                check(*mode)?;
                if !gamma.is_finite() {
                    return Err(GateError::NonFinite);
                }
                CircuitElement::cubic(*gamma, *mode)
            }
            GateSpec::Rotation { theta, mode } => {
                check(*mode)?;
                if !theta.is_finite() {
                    return Err(GateError::NonFinite);
                }
                CircuitElement::rotation(*theta, *mode)
            }
            GateSpec::Beamsplitter { eta, i, j } => CircuitElement::Gaussian(SymplecticGate::beamsplitter(width, *eta, *i, *j)?),
            GateSpec::Fourier { mode } => CircuitElement::Gaussian(SymplecticGate::fourier(width, *mode)?),
            GateSpec::Sum { ctrl, tgt } => CircuitElement::Gaussian(SymplecticGate::sum_gate(width, *ctrl, *tgt)?),
            GateSpec::Orth(a) => CircuitElement::Gaussian(SymplecticGate::orthogonal(a)?),
            GateSpec::BlockDiag(a) => CircuitElement::Gaussian(SymplecticGate::block_diag(a)?),
            GateSpec::Disp(d) => CircuitElement::Gaussian(SymplecticGate::displacement(d.clone())?),
            GateSpec::Symplectic(s) => CircuitElement::Gaussian(SymplecticGate::new(s.clone(), DVector::zeros(s.nrows()))?),
        })
    }
}

/// Parsed circuit file.
#[derive(Debug, Clone)]
pub struct CircuitFile {
    modes: usize,
    gates: Vec<GateSpec>,
    elements: Vec<CircuitElement>,
    gate_lines: Vec<usize>,
    state: GaussianStateSpec,
    observable: NCPolynomial,
}

impl PartialEq for CircuitFile {
    /// Field-wise equality; source line numbers are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes
            && self.gates == other.gates
            && self.state == other.state
            && self.observable == other.observable
    }
}

impl CircuitFile {
    /// Empty circuit on vacuum with observable `q1`.
    pub fn new(modes: usize) -> Self {
        assert!(modes > 0, "a circuit needs at least one mode");
        CircuitFile {
            modes,
            gates: Vec::new(),
            elements: Vec::new(),
            gate_lines: Vec::new(),
            state: GaussianStateSpec::vacuum(modes),
            observable: NCPolynomial::var(modes, crate::quadpoly::QuadVar::q(0)),
        }
    }

    pub fn parse(text: &str) -> Result<Self, FileError> {
        Parser::default().run(text)
    }

    pub fn push_gate(&mut self, gate: GateSpec) -> Result<(), GateError> {
        let el = gate.to_element(self.modes)?;
        self.gates.push(gate);
        self.elements.push(el);
        self.gate_lines.push(0);
        Ok(())
    }

    pub fn set_observable(&mut self, observable: NCPolynomial) {
        assert_eq!(observable.width(), self.modes);
        self.observable = observable;
    }

    pub fn set_state(&mut self, state: GaussianStateSpec) {
        assert_eq!(state.width(), self.modes);
        self.state = state;
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn gates(&self) -> &[GateSpec] {
        &self.gates
    }

    pub fn elements(&self) -> &[CircuitElement] {
        &self.elements
    }

    /// Source line of each gate (0 for gates added programmatically).
    pub fn gate_lines(&self) -> &[usize] {
        &self.gate_lines
    }

    pub fn state(&self) -> &GaussianStateSpec {
        &self.state
    }

    pub fn observable(&self) -> &NCPolynomial {
        &self.observable
    }

    pub fn circuit_ir(&self) -> Result<CircuitIR, StructureError> {
        CircuitIR::normalize(self.elements.clone(), self.modes).map_err(|source| {
            let index = match &source {
                CircuitError::UnsupportedCoherence { index }
                | CircuitError::ModeOutOfRange { index, .. }
                | CircuitError::NonFinite { index }
                | CircuitError::Gate { index, .. } => Some(*index),
                CircuitError::NoModes => None,
            };
            let line = index.and_then(|i| self.gate_lines.get(i).copied()).unwrap_or(0);
            StructureError { line, source }
        })
    }

    /// Text form; numbers use 17 significant digits so parsing it back
    /// reproduces every value exactly.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "modes {}", self.modes);
        let vac = GaussianStateSpec::vacuum(self.modes);
        if self.state.mean() != vac.mean() {
            let _ = writeln!(out, "state mean {}", join(self.state.mean().iter()));
        }
        if self.state.cov() != vac.cov() {
            for (r, row) in self.state.cov().row_iter().enumerate() {
                let _ = writeln!(out, "state cov {} {}", r + 1, join(row.iter()));
            }
        }
        for g in &self.gates {
            let _ = write!(out, "gate {}", g.keyword());
            match g {
                GateSpec::Cubic { gamma: x, mode } | GateSpec::Rotation { theta: x, mode } => {
                    let _ = write!(out, " {} {}", num(*x), mode + 1);
                }
                GateSpec::Beamsplitter { eta, i, j } => {
                    let _ = write!(out, " {} {} {}", num(*eta), i + 1, j + 1);
                }
                GateSpec::Fourier { mode } => {
                    let _ = write!(out, " {}", mode + 1);
                }
                GateSpec::Sum { ctrl, tgt } => {
                    let _ = write!(out, " {} {}", ctrl + 1, tgt + 1);
                }
                GateSpec::Orth(a) | GateSpec::BlockDiag(a) | GateSpec::Symplectic(a) => {
                    let _ = write!(out, " {}", join(a.transpose().iter()));
                }
                GateSpec::Disp(d) => {
                    let _ = write!(out, " {}", join(d.iter()));
                }
            }
            out.push('\n');
        }
        let _ = writeln!(out, "observable {}", self.observable);
        out
    }
}

impl fmt::Display for CircuitFile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.serialize())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn join<'a>(xs: impl Iterator<Item = &'a f64>) -> String {
    xs.map(|x| num(*x)).collect::<Vec<_>>().join(" ")
}

/// Convenience wrapper returning the three pieces a simulation needs.
pub fn parse_circuit_file(text: &str) -> Result<(CircuitIR, GaussianStateSpec, NCPolynomial), LoadError> {
    let file = CircuitFile::parse(text)?;
    let ir = file.circuit_ir()?;
    Ok((ir, file.state.clone(), file.observable.clone()))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error(transparent)]
    File(#[from] FileError),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token { text: &line[s..i], column: s + 1 });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token { text: &line[s..], column: s + 1 });
    }
    out
}

#[derive(Default)]
struct Parser {
    modes: Option<usize>,
    mean: Option<DVector<f64>>,
    cov_rows: Vec<Option<Vec<f64>>>,
    cov_line: usize,
    gates: Vec<GateSpec>,
    elements: Vec<CircuitElement>,
    gate_lines: Vec<usize>,
    observable: Option<NCPolynomial>,
}

struct LineCtx {
    line: usize,
    end_column: usize,
}

impl LineCtx {
    fn syntax(&self, column: usize, message: impl Into<String>) -> FileError {
        FileError::Syntax { line: self.line, column, message: message.into() }
    }

    fn semantic(&self, column: usize, invariant: &'static str, message: impl Into<String>) -> FileError {
        FileError::Semantic { line: self.line, column, invariant, message: message.into() }
    }

    fn number(&self, tok: &Token<'_>) -> Result<f64, FileError> {
        let ok = tok.text.chars().all(|c| c.is_ascii_digit() || matches!(c, '+' | '-' | '.' | 'e' | 'E'));
        match tok.text.parse::<f64>() {
            Ok(x) if ok && x.is_finite() => Ok(x),
            _ => Err(self.syntax(tok.column, format!("expected a finite decimal number, found `{}`", tok.text))),
        }
    }

    fn index(&self, tok: &Token<'_>, modes: usize) -> Result<usize, FileError> {
        let k: usize = tok
            .text
            .parse()
            .map_err(|_| self.syntax(tok.column, format!("expected a mode index, found `{}`", tok.text)))?;
        if k == 0 || k > modes {
            return Err(self.semantic(tok.column, "mode index out of range", format!("mode {k} with {modes} modes (indices start at 1)")));
        }
        Ok(k - 1)
    }

    fn exact<'t, 'a>(&self, args: &'t [Token<'a>], n: usize, what: &str) -> Result<&'t [Token<'a>], FileError> {
        if args.len() < n {
            let col = args.last().map(|t| t.column + t.text.len()).unwrap_or(self.end_column);
            return Err(self.syntax(col, format!("{what} expects {n} arguments, found {}", args.len())));
        }
        if args.len() > n {
            return Err(self.syntax(args[n].column, format!("{what} expects {n} arguments, found {}", args.len())));
        }
        Ok(args)
    }

    fn numbers(&self, args: &[Token<'_>], n: usize, what: &str) -> Result<Vec<f64>, FileError> {
        self.exact(args, n, what)?.iter().map(|t| self.number(t)).collect()
    }
}

fn gate_invariant(e: &GateError) -> &'static str {
    match e {
        GateError::NotSymplectic { .. } => "matrix is not symplectic",
        GateError::NotOrthogonal { .. } => "matrix is not orthogonal",
        GateError::Singular => "matrix is singular",
        GateError::EfficiencyOutOfRange(_) => "efficiency outside [0, 1]",
        GateError::ModeOutOfRange { .. } => "mode index out of range",
        GateError::RepeatedMode(_) => "two-mode gate needs distinct modes",
        GateError::NonFinite => "parameters must be finite",
        GateError::BadShape { .. } | GateError::WidthMismatch { .. } => "dimension mismatch",
    }
}

impl Parser {
    fn run(mut self, text: &str) -> Result<CircuitFile, FileError> {
        let mut last_line = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("");
            let tokens = tokenize(content);
            if tokens.is_empty() {
                continue;
            }
            let ctx = LineCtx { line, end_column: content.trim_end().len() + 1 };
            self.statement(&ctx, content, &tokens)?;
        }
        let end = LineCtx { line: last_line.max(1), end_column: 1 };
        let modes = self.modes.ok_or_else(|| end.syntax(1, "missing `modes` declaration"))?;
        let observable = self.observable.ok_or_else(|| end.syntax(1, "missing `observable` line"))?;
        let mean = self.mean.unwrap_or_else(|| DVector::zeros(2 * modes));
        let cov = if self.cov_rows.iter().all(Option::is_none) {
            DMatrix::identity(2 * modes, 2 * modes)
        } else {
            let ctx = LineCtx { line: self.cov_line, end_column: 1 };
            let mut cov = DMatrix::zeros(2 * modes, 2 * modes);
            for (r, row) in self.cov_rows.iter().enumerate() {
                let row = row
                    .as_ref()
                    .ok_or_else(|| ctx.semantic(1, "covariance rows complete", format!("row {} of the covariance is missing", r + 1)))?;
                for (c, x) in row.iter().enumerate() {
                    cov[(r, c)] = *x;
                }
            }
            cov
        };
        let state = GaussianStateSpec::new(mean, cov).map_err(|e| {
            let ctx = LineCtx { line: self.cov_line.max(1), end_column: 1 };
            let inv = match e {
                MomentError::NotSymmetric(_) => "covariance must be symmetric",
                MomentError::Unphysical(_) => "covariance violates the uncertainty relation",
                _ => "invalid Gaussian state",
            };
            ctx.semantic(1, inv, e.to_string())
        })?;
        Ok(CircuitFile { modes, gates: self.gates, elements: self.elements, gate_lines: self.gate_lines, state, observable })
    }

    fn require_modes(&self, ctx: &LineCtx, tok: &Token<'_>) -> Result<usize, FileError> {
        self.modes.ok_or_else(|| ctx.semantic(tok.column, "modes declared before use", "`modes` must precede this statement"))
    }

    fn statement(&mut self, ctx: &LineCtx, content: &str, tokens: &[Token<'_>]) -> Result<(), FileError> {
        let head = &tokens[0];
        match head.text {
            "modes" => {
                if self.modes.is_some() {
                    return Err(ctx.semantic(head.column, "modes declared once", "duplicate `modes` declaration"));
                }
                let args = ctx.exact(&tokens[1..], 1, "modes")?;
                let m: usize = args[0]
                    .text
                    .parse()
                    .map_err(|_| ctx.syntax(args[0].column, format!("expected a positive integer, found `{}`", args[0].text)))?;
                if m == 0 {
                    return Err(ctx.semantic(args[0].column, "at least one mode", "`modes 0` declares an empty register"));
                }
                self.modes = Some(m);
                self.cov_rows = vec![None; 2 * m];
            }
            "gate" => {
                let m = self.require_modes(ctx, head)?;
                let kind = tokens.get(1).ok_or_else(|| ctx.syntax(ctx.end_column, "missing gate name"))?;
                let args = &tokens[2..];
                let spec = match kind.text {
                    "cubic" | "rotation" => {
                        let a = ctx.exact(args, 2, kind.text)?;
                        let x = ctx.number(&a[0])?;
                        let mode = ctx.index(&a[1], m)?;
                        if kind.text == "cubic" {
                            GateSpec::Cubic { gamma: x, mode }
                        } else {
                            GateSpec::Rotation { theta: x, mode }
                        }
                    }
                    "bs" => {
                        let a = ctx.exact(args, 3, "bs")?;
                        GateSpec::Beamsplitter { eta: ctx.number(&a[0])?, i: ctx.index(&a[1], m)?, j: ctx.index(&a[2], m)? }
                    }
                    "fourier" => {
                        let a = ctx.exact(args, 1, "fourier")?;
                        GateSpec::Fourier { mode: ctx.index(&a[0], m)? }
                    }
                    "sum" => {
                        let a = ctx.exact(args, 2, "sum")?;
                        GateSpec::Sum { ctrl: ctx.index(&a[0], m)?, tgt: ctx.index(&a[1], m)? }
                    }
                    "orth" | "blockdiag" => {
                        let v = ctx.numbers(args, m * m, kind.text)?;
                        let a = DMatrix::from_row_slice(m, m, &v);
                        if kind.text == "orth" {
                            GateSpec::Orth(a)
                        } else {
                            GateSpec::BlockDiag(a)
                        }
                    }
                    "disp" => GateSpec::Disp(DVector::from_vec(ctx.numbers(args, 2 * m, "disp")?)),
                    "symplectic" => {
                        let v = ctx.numbers(args, 4 * m * m, "symplectic")?;
                        GateSpec::Symplectic(DMatrix::from_row_slice(2 * m, 2 * m, &v))
                    }
                    other => return Err(ctx.syntax(kind.column, format!("unknown gate `{other}`"))),
                };
                let el = spec.to_element(m).map_err(|e| ctx.semantic(kind.column, gate_invariant(&e), e.to_string()))?;
                self.gates.push(spec);
                self.elements.push(el);
                self.gate_lines.push(ctx.line);
            }
            "state" => {
                let m = self.require_modes(ctx, head)?;
                let kind = tokens.get(1).ok_or_else(|| ctx.syntax(ctx.end_column, "expected `mean` or `cov`"))?;
                match kind.text {
                    "mean" => {
                        if self.mean.is_some() {
                            return Err(ctx.semantic(kind.column, "state mean given once", "duplicate `state mean`"));
                        }
                        self.mean = Some(DVector::from_vec(ctx.numbers(&tokens[2..], 2 * m, "state mean")?));
                    }
                    "cov" => {
                        let row_tok = tokens.get(2).ok_or_else(|| ctx.syntax(ctx.end_column, "expected a row index"))?;
                        let row: usize = row_tok
                            .text
                            .parse()
                            .map_err(|_| ctx.syntax(row_tok.column, format!("expected a row index, found `{}`", row_tok.text)))?;
                        if row == 0 || row > 2 * m {
                            return Err(ctx.semantic(row_tok.column, "covariance row out of range", format!("row {row} of a {0}x{0} matrix", 2 * m)));
                        }
                        if self.cov_rows[row - 1].is_some() {
                            return Err(ctx.semantic(row_tok.column, "covariance row given once", format!("duplicate row {row}")));
                        }
                        self.cov_rows[row - 1] = Some(ctx.numbers(&tokens[3..], 2 * m, "state cov")?);
                        self.cov_line = ctx.line;
                    }
                    other => return Err(ctx.syntax(kind.column, format!("unknown state key `{other}`"))),
                }
            }
            "observable" => {
                let m = self.require_modes(ctx, head)?;
                if self.observable.is_some() {
                    return Err(ctx.semantic(head.column, "observable given once", "duplicate `observable`"));
                }
                let offset = head.column - 1 + head.text.len();
                let expr = &content[offset..];
                let poly = NCPolynomial::parse(expr, m).map_err(|e| match e {
                    AlgebraError::Parse { column, message } => ctx.syntax(offset + column, message),
                    AlgebraError::ModeOutOfRange { mode, width } => {
                        ctx.semantic(offset + 1, "mode index out of range", format!("mode {mode} with {width} modes"))
                    }
                    other => ctx.semantic(offset + 1, "valid polynomial", other.to_string()),
                })?;
                self.observable = Some(poly);
            }
            other => return Err(ctx.syntax(head.column, format!("unknown key `{other}`"))),
        }
        Ok(())
    }
}
