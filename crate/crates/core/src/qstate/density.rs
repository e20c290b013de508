use num_complex::Complex64;

use super::StateVector;

/// Density matrix over `num_qubits` qubits, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub(crate) fn from_entries_unchecked(num_qubits: usize, entries: Vec<Complex64>) -> Self {
        debug_assert_eq!(entries.len(), 1 << (2 * num_qubits));
        Self { num_qubits, entries }
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(state: &StateVector) -> Self {
        let amps = state.amplitudes();
        let entries = amps
            .iter()
            .flat_map(|r| amps.iter().map(move |c| r * c.conj()))
            .collect();
        Self {
            num_qubits: state.num_qubits(),
            entries,
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `tr(ρ²)`; 1 for pure states.
    pub fn purity(&self) -> f64 {
        let d = self.dim();
        (0..d)
            .flat_map(|r| (0..d).map(move |c| (r, c)))
            .map(|(r, c)| (self.get(r, c) * self.get(c, r)).re)
            .sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| (self.get(r, c) - self.get(c, r).conj()).norm() <= tol))
    }

    /// Diagonal entries, i.e. computational-basis measurement probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i).re).collect()
    }

    /// Entrywise comparison within `tol`.
    pub fn approx_eq(&self, other: &DensityMatrix, tol: f64) -> bool {
        self.num_qubits == other.num_qubits
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Largest entrywise deviation, `None` on dimension mismatch.
    pub fn max_deviation(&self, other: &DensityMatrix) -> Option<f64> {
        (self.num_qubits == other.num_qubits).then(|| {
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        })
    }
}
