//! Dense state-vector simulation.
//!
//! Qubit `0` is the least significant bit of a basis-state index, and newly
//! allocated qubits always take the next higher indices, so tensoring is an
//! append. Whenever an operation takes an ordered list of qubits (gate
//! targets, measured qubits, qubits kept by a partial trace) the *first*
//! listed qubit is the most significant bit of the local index. This keeps
//! textbook matrices valid: `CNot` on `[control, target]`.

mod density;
mod gate;

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

pub use density::DensityMatrix;
pub use gate::{standard_gate, Gate, StandardGate};

/// Tolerance used for all user-facing numerical comparisons.
pub const TOLERANCE: f64 = 1e-9;

/// Amplitudes whose magnitude falls below this are set to exact zero after a gate.
pub const PRUNE_THRESHOLD: f64 = 1e-12;

/// Default cap on the number of qubits a state may hold.
pub const DEFAULT_MAX_QUBITS: usize = 12;

pub type Amplitude = Complex64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QStateError {
    #[error("qubit capacity exceeded: {requested} qubits requested, cap is {cap}")]
    Capacity { requested: usize, cap: usize },
    #[error("gate of arity {expected} applied to {got} target(s)")]
    ArityMismatch { expected: usize, got: usize },
    #[error("qubit {0} listed more than once")]
    DuplicateTarget(usize),
    #[error("qubit index {index} out of range for a {num_qubits}-qubit state")]
    TargetOutOfRange { index: usize, num_qubits: usize },
    #[error("empty target list")]
    EmptyTargets,
    #[error("dimension mismatch: {0} vs {1} qubits")]
    DimensionMismatch(usize, usize),
    #[error("unknown gate `{0}`")]
    UnknownGate(String),
    #[error("matrix is not unitary")]
    NotUnitary,
    #[error("invalid state: {0}")]
    InvalidState(String),
}

pub type Result<T> = std::result::Result<T, QStateError>;

/// Normalized pure state over `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Amplitude>,
}

/// One possible result of a measurement.
#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    /// One bit per measured qubit, in the order the qubits were listed.
    pub result: Vec<u8>,
    pub probability: f64,
    pub post_state: StateVector,
}

impl Default for StateVector {
    fn default() -> Self {
        Self::empty()
    }
}

impl StateVector {
    /// The zero-qubit state, a single amplitude `1`.
    pub fn empty() -> Self {
        Self {
            num_qubits: 0,
            amps: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Computational basis state `|index⟩` over `num_qubits` qubits.
    pub fn basis(num_qubits: usize, index: usize) -> Result<Self> {
        let dim = 1usize.checked_shl(num_qubits as u32).ok_or(QStateError::Capacity {
            requested: num_qubits,
            cap: usize::BITS as usize - 1,
        })?;
        if index >= dim {
            return Err(QStateError::InvalidState(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { num_qubits, amps })
    }

    /// Builds a state from raw amplitudes. The length must be a power of two,
    /// all entries finite and the vector normalized within [`TOLERANCE`].
    pub fn from_amplitudes(amps: Vec<Amplitude>) -> Result<Self> {
        let state = Self::from_amplitudes_unnormalized(amps)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(QStateError::InvalidState(format!("squared norm {norm} is not 1")));
        }
        Ok(state)
    }

    /// Like [`StateVector::from_amplitudes`] but rescales to unit norm.
    pub fn normalized(amps: Vec<Amplitude>) -> Result<Self> {
        let mut state = Self::from_amplitudes_unnormalized(amps)?;
        let norm = state.norm_sqr().sqrt();
        if norm < PRUNE_THRESHOLD {
            return Err(QStateError::InvalidState("zero vector".into()));
        }
        for a in &mut state.amps {
            *a /= norm;
        }
        Ok(state)
    }

    fn from_amplitudes_unnormalized(amps: Vec<Amplitude>) -> Result<Self> {
        if amps.is_empty() || !amps.len().is_power_of_two() {
            return Err(QStateError::InvalidState(format!(
                "length {} is not a power of two",
                amps.len()
            )));
        }
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(QStateError::InvalidState("non-finite amplitude".into()));
        }
        let num_qubits = amps.len().trailing_zeros() as usize;
        Ok(Self { num_qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Amplitude] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Amplitude> {
        if self.num_qubits != other.num_qubits {
            return Err(QStateError::DimensionMismatch(self.num_qubits, other.num_qubits));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Appends `count` fresh qubits in `|0⟩` under the default cap.
    pub fn alloc(&self, count: usize) -> Result<StateVector> {
        self.alloc_capped(count, DEFAULT_MAX_QUBITS)
    }

    pub fn alloc_capped(&self, count: usize, cap: usize) -> Result<StateVector> {
        let requested = self.num_qubits + count;
        if requested > cap {
            return Err(QStateError::Capacity { requested, cap });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << requested];
        amps[..self.amps.len()].copy_from_slice(&self.amps);
        Ok(StateVector {
            num_qubits: requested,
            amps,
        })
    }

    /// `self ⊗ other`, with `other`'s qubits placed above `self`'s.
    pub fn tensor_capped(&self, other: &StateVector, cap: usize) -> Result<StateVector> {
        let requested = self.num_qubits + other.num_qubits;
        if requested > cap {
            return Err(QStateError::Capacity { requested, cap });
        }
        let mut amps = Vec::with_capacity(1 << requested);
        for hi in &other.amps {
            amps.extend(self.amps.iter().map(|lo| lo * hi));
        }
        Ok(StateVector {
            num_qubits: requested,
            amps,
        })
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &t) in targets.iter().enumerate() {
            if t >= self.num_qubits {
                return Err(QStateError::TargetOutOfRange {
                    index: t,
                    num_qubits: self.num_qubits,
                });
            }
            if targets[..i].contains(&t) {
                return Err(QStateError::DuplicateTarget(t));
            }
        }
        Ok(())
    }

    /// Applies `gate` to `targets`; `targets[0]` is the gate's most
    /// significant qubit.
    pub fn apply_gate(&self, gate: &Gate, targets: &[usize]) -> Result<StateVector> {
        if targets.len() != gate.arity() {
            return Err(QStateError::ArityMismatch {
                expected: gate.arity(),
                got: targets.len(),
            });
        }
        self.check_targets(targets)?;
        let k = targets.len();
        let local_dim = 1usize << k;
        let target_mask: usize = targets.iter().map(|t| 1 << t).sum();
        let offsets: Vec<usize> = (0..local_dim).map(|l| scatter(l, targets)).collect();

        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let mut local = vec![Complex64::new(0.0, 0.0); local_dim];
        for base in (0..self.amps.len()).filter(|b| b & target_mask == 0) {
            for (l, off) in offsets.iter().enumerate() {
                local[l] = self.amps[base | off];
            }
            for (r, off) in offsets.iter().enumerate() {
                let row = &gate.matrix()[r * local_dim..(r + 1) * local_dim];
                out[base | off] = row.iter().zip(&local).map(|(m, a)| m * a).sum();
            }
        }
        prune(&mut out);
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amps: out,
        })
    }

    /// Born-rule measurement of `targets` in the computational basis. Returns
    /// one outcome per result with nonzero probability, ordered by result.
    pub fn measure(&self, targets: &[usize]) -> Result<Vec<MeasurementOutcome>> {
        if targets.is_empty() {
            return Err(QStateError::EmptyTargets);
        }
        self.check_targets(targets)?;
        let k = targets.len();
        let mut probs = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            probs[gather(i, targets)] += a.norm_sqr();
        }
        let mut outcomes = Vec::new();
        for (r, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let scale = p.sqrt();
            let amps = self
                .amps
                .iter()
                .enumerate()
                .map(|(i, a)| {
                    if gather(i, targets) == r {
                        a / scale
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            outcomes.push(MeasurementOutcome {
                result: (0..k).map(|j| ((r >> (k - 1 - j)) & 1) as u8).collect(),
                probability: p,
                post_state: StateVector {
                    num_qubits: self.num_qubits,
                    amps,
                },
            });
        }
        Ok(outcomes)
    }

    /// Partial trace onto `keep`; `keep[0]` is the most significant qubit of
    /// the result.
    pub fn reduced_density_matrix(&self, keep: &[usize]) -> Result<DensityMatrix> {
        self.check_targets(keep)?;
        let k = keep.len();
        let dim = 1usize << k;
        let keep_mask: usize = keep.iter().map(|t| 1 << t).sum();
        let offsets: Vec<usize> = (0..dim).map(|l| scatter(l, keep)).collect();
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        for base in (0..self.amps.len()).filter(|b| b & keep_mask == 0) {
            for r in 0..dim {
                let ar = self.amps[base | offsets[r]];
                if ar == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..dim {
                    entries[r * dim + c] += ar * self.amps[base | offsets[c]].conj();
                }
            }
        }
        Ok(DensityMatrix::from_entries_unchecked(k, entries))
    }

    /// True iff `self = c · other` for some unit complex `c`, judged by
    /// `|⟨self|other⟩| ≥ 1 − tol`.
    pub fn equal_up_to_global_phase(&self, other: &StateVector, tol: f64) -> Result<bool> {
        Ok(self.inner(other)?.norm() >= 1.0 - tol)
    }

    /// Reorders qubits: qubit `j` of the result is qubit `order[j]` of `self`.
    /// `order` must be a permutation of `0..num_qubits`.
    pub fn permute(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.num_qubits {
            return Err(QStateError::DimensionMismatch(order.len(), self.num_qubits));
        }
        self.check_targets(order)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (i, a) in self.amps.iter().enumerate() {
            let j = order
                .iter()
                .enumerate()
                .fold(0, |acc, (new, &old)| acc | (((i >> old) & 1) << new));
            amps[j] = *a;
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amps,
        })
    }

    /// Removes `qubit` when it is unentangled with the rest of the state,
    /// returning the state of the remaining qubits (indices above `qubit`
    /// shift down by one). Returns `None` when the qubit is entangled.
    pub fn factor_out(&self, qubit: usize) -> Result<Option<StateVector>> {
        let rho = self.reduced_density_matrix(&[qubit])?;
        if rho.purity() < 1.0 - TOLERANCE {
            return Ok(None);
        }
        // Pure single-qubit state: the dominant column of ρ is proportional to |φ⟩.
        let col = if rho.get(0, 0).re >= rho.get(1, 1).re { 0 } else { 1 };
        let scale = rho.get(col, col).re.sqrt();
        let phi = [rho.get(0, col) / scale, rho.get(1, col) / scale];
        let bit = 1usize << qubit;
        let low = bit - 1;
        let mut amps = Vec::with_capacity(self.amps.len() / 2);
        for rest in 0..self.amps.len() / 2 {
            let i0 = (rest & low) | ((rest & !low) << 1);
            let i1 = i0 | bit;
            amps.push(phi[0].conj() * self.amps[i0] + phi[1].conj() * self.amps[i1]);
        }
        let mut reduced = StateVector::normalized(amps)?;
        prune(&mut reduced.amps);
        Ok(Some(reduced))
    }

    /// Dirac-notation rendering with four decimal places, e.g.
    /// `0.7071|00⟩ + 0.7071|11⟩`.
    pub fn dirac(&self) -> String {
        let mut out = String::new();
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() < 5e-5 {
                continue;
            }
            let ket = format!("|{}⟩", basis_label(i, self.num_qubits));
            let (negative, coeff) = format_coefficient(*a);
            if out.is_empty() {
                if negative {
                    out.push('-');
                }
            } else {
                out.push_str(if negative { " - " } else { " + " });
            }
            out.push_str(&coeff);
            out.push_str(&ket);
        }
        if out.is_empty() {
            out.push('0');
        }
        out
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dirac())
    }
}

fn basis_label(index: usize, n: usize) -> String {
    (0..n)
        .rev()
        .map(|q| if (index >> q) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn format_coefficient(a: Complex64) -> (bool, String) {
    let re_zero = a.re.abs() < 5e-5;
    let im_zero = a.im.abs() < 5e-5;
    if im_zero {
        (a.re < 0.0, format!("{:.4}", a.re.abs()))
    } else if re_zero {
        (a.im < 0.0, format!("{:.4}i", a.im.abs()))
    } else {
        let sign = if a.im < 0.0 { '-' } else { '+' };
        (false, format!("({:.4}{sign}{:.4}i)", a.re, a.im.abs()))
    }
}

/// Spreads the bits of a local index over the global positions in `targets`
/// (first target = most significant local bit).
fn scatter(local: usize, targets: &[usize]) -> usize {
    let k = targets.len();
    targets
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &t)| acc | (((local >> (k - 1 - j)) & 1) << t))
}

/// Inverse of [`scatter`]: reads the local index of `targets` out of a global index.
fn gather(global: usize, targets: &[usize]) -> usize {
    let k = targets.len();
    targets
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &t)| acc | (((global >> t) & 1) << (k - 1 - j)))
}

fn prune(amps: &mut [Complex64]) {
    for a in amps {
        if a.norm() < PRUNE_THRESHOLD {
            *a = Complex64::new(0.0, 0.0);
        }
    }
}
