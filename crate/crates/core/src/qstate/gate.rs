use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::{QStateError, Result, TOLERANCE};

/// A unitary on `arity` qubits, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    arity: usize,
    matrix: Vec<Complex64>,
}

impl Gate {
    /// Validates shape and unitarity (`U†U = I` within 1e-9).
    pub fn new(arity: usize, matrix: Vec<Complex64>) -> Result<Self> {
        let dim = 1usize << arity;
        if arity == 0 || matrix.len() != dim * dim {
            return Err(QStateError::InvalidState(format!(
                "gate of arity {arity} needs a {dim}x{dim} matrix"
            )));
        }
        let gate = Self { arity, matrix };
        if !gate.is_unitary(TOLERANCE) {
            return Err(QStateError::NotUnitary);
        }
        Ok(gate)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * self.dim() + col]
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let dot: Complex64 = (0..d).map(|k| self.entry(k, i).conj() * self.entry(k, j)).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                (dot - Complex64::new(expected, 0.0)).norm() <= tol
            })
        })
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Gate) -> Result<Gate> {
        if self.arity != other.arity {
            return Err(QStateError::ArityMismatch {
                expected: self.arity,
                got: other.arity,
            });
        }
        let d = self.dim();
        let matrix = (0..d * d)
            .map(|idx| {
                let (r, c) = (idx / d, idx % d);
                (0..d).map(|k| self.entry(r, k) * other.entry(k, c)).sum()
            })
            .collect();
        Ok(Gate {
            arity: self.arity,
            matrix,
        })
    }
}

/// The fixed gates the calculus can name.
///
/// `Sigma(first, second)` is the teleportation correction selected by a
/// two-bit classical value: `σ00 = I`, `σ01 = X`, `σ10 = Z`, `σ11 = Z·X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StandardGate {
    I,
    X,
    Z,
    H,
    CNot,
    Sigma(bool, bool),
}

impl StandardGate {
    pub fn arity(self) -> usize {
        match self {
            StandardGate::CNot => 2,
            _ => 1,
        }
    }

    pub fn gate(self) -> Gate {
        let o = Complex64::new(0.0, 0.0);
        let l = Complex64::new(1.0, 0.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let matrix = match self {
            StandardGate::I | StandardGate::Sigma(false, false) => vec![l, o, o, l],
            StandardGate::X | StandardGate::Sigma(false, true) => vec![o, l, l, o],
            StandardGate::Z | StandardGate::Sigma(true, false) => vec![l, o, o, -l],
            // Z·X
            StandardGate::Sigma(true, true) => vec![o, l, -l, o],
            StandardGate::H => vec![h, h, h, -h],
            StandardGate::CNot => vec![
                l, o, o, o, //
                o, l, o, o, //
                o, o, o, l, //
                o, o, l, o,
            ],
        };
        Gate {
            arity: self.arity(),
            matrix,
        }
    }
}

impl fmt::Display for StandardGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StandardGate::I => f.write_str("I"),
            StandardGate::X => f.write_str("X"),
            StandardGate::Z => f.write_str("Z"),
            StandardGate::H => f.write_str("H"),
            StandardGate::CNot => f.write_str("CNot"),
            StandardGate::Sigma(a, b) => write!(f, "sigma{}{}", *a as u8, *b as u8),
        }
    }
}

impl FromStr for StandardGate {
    type Err = QStateError;

    fn from_str(s: &str) -> Result<Self> {
        let sigma = |rest: &str| match rest {
            "00" => Some(StandardGate::Sigma(false, false)),
            "01" => Some(StandardGate::Sigma(false, true)),
            "10" => Some(StandardGate::Sigma(true, false)),
            "11" => Some(StandardGate::Sigma(true, true)),
            _ => None,
        };
        let parsed = match s {
            "I" => Some(StandardGate::I),
            "X" => Some(StandardGate::X),
            "Z" => Some(StandardGate::Z),
            "H" => Some(StandardGate::H),
            "CNot" => Some(StandardGate::CNot),
            _ => s.strip_prefix("sigma").or_else(|| s.strip_prefix('σ')).and_then(sigma),
        };
        parsed.ok_or_else(|| QStateError::UnknownGate(s.to_string()))
    }
}

/// Looks up a named gate: `I`, `X`, `Z`, `H`, `CNot`, `sigma00`..`sigma11`
/// (or `σ00`..`σ11`).
pub fn standard_gate(name: &str) -> Result<Gate> {
    Ok(name.parse::<StandardGate>()?.gate())
}
