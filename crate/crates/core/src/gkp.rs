//! Structural translation of qubit circuits over `{H, T, CNOT}` into CV
//! circuits under the GKP encoding: `H -> rotation(pi/2)`, `CNOT -> SUM`,
//! `T -> cubic phase` with a caller-chosen cubicity.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::circuit_file::{CircuitFile, GateSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DvError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: unsupported gate `{name}` (expected H, T or CNOT)")]
    UnsupportedGate { line: usize, name: String },
    #[error("line {line}: qubit index {index} out of range for {qubits} qubits")]
    IndexOutOfRange { line: usize, index: usize, qubits: usize },
    #[error("line {line}: CNOT needs distinct qubits")]
    RepeatedQubit { line: usize },
    #[error("cubicity must be finite")]
    NonFiniteGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DvGate {
    H(usize),
    T(usize),
    Cnot(usize, usize),
}

/// Qubit circuit with 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvCircuit {
    pub qubits: usize,
    pub gates: Vec<DvGate>,
}

impl DvCircuit {
    pub fn new(qubits: usize, gates: Vec<DvGate>) -> Self {
        DvCircuit { qubits, gates }
    }

    /// Parses `qubits <n>` followed by `H i`, `T i`, `CNOT i j` lines
    /// (1-based indices, `#` comments).
    pub fn parse(text: &str) -> Result<Self, DvError> {
        let mut qubits = None;
        let mut gates = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            let toks: Vec<(usize, &str)> = content
                .split_whitespace()
                .map(|t| (t.as_ptr() as usize - content.as_ptr() as usize + 1, t))
                .collect();
            let Some(&(col, head)) = toks.first() else { continue };
            let syntax = |column: usize, message: String| DvError::Syntax { line, column, message };
            let arity = |n: usize| {
                if toks.len() != n + 1 {
                    Err(syntax(col, format!("`{head}` expects {n} arguments, found {}", toks.len() - 1)))
                } else {
                    Ok(())
                }
            };
            if head == "qubits" {
                arity(1)?;
                if qubits.is_some() {
                    return Err(syntax(col, "duplicate `qubits` declaration".into()));
                }
                let n: usize = toks[1].1.parse().map_err(|_| syntax(toks[1].0, format!("expected a qubit count, found `{}`", toks[1].1)))?;
                if n == 0 {
                    return Err(syntax(toks[1].0, "qubit count must be positive".into()));
                }
                qubits = Some(n);
                continue;
            }
            let n = qubits.ok_or_else(|| syntax(col, "`qubits` must come first".into()))?;
            let index = |(c, t): (usize, &str)| -> Result<usize, DvError> {
                let k: usize = t.parse().map_err(|_| syntax(c, format!("expected a qubit index, found `{t}`")))?;
                if k == 0 || k > n {
                    return Err(DvError::IndexOutOfRange { line, index: k, qubits: n });
                }
                Ok(k - 1)
            };
            let gate = match head.to_ascii_uppercase().as_str() {
                "H" => {
                    arity(1)?;
                    DvGate::H(index(toks[1])?)
                }
                "T" => {
                    arity(1)?;
                    DvGate::T(index(toks[1])?)
                }
                "CNOT" | "CX" => {
                    arity(2)?;
                    let (a, b) = (index(toks[1])?, index(toks[2])?);
                    if a == b {
                        return Err(DvError::RepeatedQubit { line });
                    }
                    DvGate::Cnot(a, b)
                }
                _ => return Err(DvError::UnsupportedGate { line, name: head.to_string() }),
            };
            gates.push(gate);
        }
        let qubits = qubits.ok_or(DvError::Syntax { line: 1, column: 1, message: "missing `qubits` declaration".into() })?;
        Ok(DvCircuit { qubits, gates })
    }
}

/// CV circuit file on `n` modes, vacuum input and observable `q1`.
pub fn translate(dv: &DvCircuit, gamma_t: f64) -> Result<CircuitFile, DvError> {
    if !gamma_t.is_finite() {
        return Err(DvError::NonFiniteGamma);
    }
    let mut file = CircuitFile::new(dv.qubits);
    for g in &dv.gates {
        let spec = match *g {
            DvGate::H(i) => GateSpec::Rotation { theta: FRAC_PI_2, mode: i },
            DvGate::T(i) => GateSpec::Cubic { gamma: gamma_t, mode: i },
            DvGate::Cnot(i, j) => GateSpec::Sum { ctrl: i, tgt: j },
        };
        file.push_gate(spec).expect("indices validated against the qubit count");
    }
    Ok(file)
}
