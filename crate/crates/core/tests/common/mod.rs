// Shared helpers for the integration tests: an independent gate oracle,
// corpus loading and generators for random transition systems and programs.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use cqp::qstate::{DensityMatrix, Gate, StateVector};
use cqp::semantics::{explore_program, Label, OutputValue, Plts, StateKind};
use cqp::syntax::{parse_program, Program};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn example_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

pub fn example_source(name: &str) -> String {
    std::fs::read_to_string(example_path(name)).unwrap()
}

pub fn example(name: &str) -> Program {
    parse_program(&example_source(name)).unwrap()
}

pub fn explore_example(name: &str, tests: Vec<StateVector>) -> Plts {
    explore_program(Arc::new(example(name)), tests, 20_000).unwrap()
}

/// Dense row-major complex matrix.
#[derive(Clone, Debug)]
pub struct Matrix {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl Matrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        Self { dim, data }
    }

    pub fn kron(&self, other: &Matrix) -> Matrix {
        let dim = self.dim * other.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r1 in 0..self.dim {
            for c1 in 0..self.dim {
                let a = self.data[r1 * self.dim + c1];
                for r2 in 0..other.dim {
                    for c2 in 0..other.dim {
                        data[(r1 * other.dim + r2) * dim + c1 * other.dim + c2] = a * other.data[r2 * other.dim + c2];
                    }
                }
            }
        }
        Matrix { dim, data }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.dim;
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                for j in 0..n {
                    data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        Matrix { dim: n, data }
    }

    pub fn transpose(&self) -> Matrix {
        let n = self.dim;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Matrix { dim: n, data }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.data[i * self.dim + j] * v[j]).sum())
            .collect()
    }
}

/// Permutation matrix relabelling qubit `perm[q]` of the input as qubit `q`
/// of the output.
fn qubit_permutation(n: usize, perm: &[usize]) -> Matrix {
    let dim = 1 << n;
    let mut m = Matrix {
        dim,
        data: vec![Complex64::new(0.0, 0.0); dim * dim],
    };
    for src in 0..dim {
        let dst: usize = (0..n).map(|q| ((src >> perm[q]) & 1) << q).sum();
        m.data[dst * dim + src] = Complex64::new(1.0, 0.0);
    }
    m
}

/// The full `2^n` unitary of `gate` on `targets`, built as
/// `Pᵀ (G ⊗ I) P` where `P` moves the targets to the top qubits.
pub fn expanded_gate(n: usize, gate: &Gate, targets: &[usize]) -> Matrix {
    let k = targets.len();
    let g = Matrix {
        dim: gate.dim(),
        data: gate.matrix().to_vec(),
    };
    let full = g.kron(&Matrix::identity(1 << (n - k)));
    // Output qubit n-1-j takes target j; the rest keep their order below.
    let rest: Vec<usize> = (0..n).filter(|q| !targets.contains(q)).collect();
    let mut perm = vec![0; n];
    for (j, &t) in targets.iter().enumerate() {
        perm[n - 1 - j] = t;
    }
    for (q, &r) in rest.iter().enumerate() {
        perm[q] = r;
    }
    let p = qubit_permutation(n, &perm);
    p.transpose().mul(&full).mul(&p)
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    let amps = (0..1 << n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    StateVector::normalized(amps).unwrap()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn out_bit(bit: u8) -> Label {
    Label::Output {
        channel: 0,
        message: vec![OutputValue::Bit(bit)],
    }
}

pub fn out_qubit() -> Label {
    Label::Output {
        channel: 0,
        message: vec![OutputValue::Qubit],
    }
}

/// A small random transition system over one channel `c`. Nondeterministic
/// states carry tau, `c![0]`, `c![1]` and qubit outputs; some are followed by
/// two- or three-way probabilistic choices.
pub fn random_plts(rng: &mut ChaCha8Rng) -> Plts {
    let mut p = Plts::new(vec!["c".into()]);
    let n = rng.gen_range(2..=6);
    for _ in 0..n {
        p.add_state(StateKind::Nondeterministic, false);
    }
    let qubits = [
        StateVector::basis(1, 0).unwrap(),
        StateVector::normalized(vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]).unwrap(),
    ];
    for s in 0..n {
        let moves = rng.gen_range(0..=2);
        if moves == 0 {
            p.states[s].terminal = rng.gen_bool(0.7);
        }
        for _ in 0..moves {
            let dst = rng.gen_range(0..n);
            match rng.gen_range(0..6) {
                0 => p.add_edge(s, Label::Tau, None, dst),
                1 | 2 => p.add_edge(s, out_bit(rng.gen_range(0..2)), None, dst),
                3 => {
                    let q = &qubits[rng.gen_range(0..2)];
                    p.add_edge(s, out_qubit(), Some(DensityMatrix::pure(q)), dst)
                }
                _ => {
                    let ps = p.add_state(StateKind::Probabilistic, false);
                    p.add_edge(s, Label::Tau, None, ps);
                    let split = [[0.5, 0.5, 0.0], [0.25, 0.75, 0.0], [0.2, 0.3, 0.5]][rng.gen_range(0..3)];
                    for w in split.into_iter().filter(|w| *w > 0.0) {
                        p.add_edge(ps, Label::Prob(w), None, rng.gen_range(0..n));
                    }
                }
            }
        }
    }
    p
}

/// Inserts a fresh state `t` with a single tau edge `t -> s` and redirects
/// every edge into `s` to `t`.
pub fn insert_tau_before(p: &Plts, s: usize) -> Plts {
    let mut q = p.clone();
    let t = q.add_state(StateKind::Nondeterministic, false);
    for e in &mut q.edges {
        if e.dst == s {
            e.dst = t;
        }
    }
    q.add_edge(t, Label::Tau, None, s);
    if q.initial == s {
        q.initial = t;
    }
    q
}

/// A random prefix of bit outputs and taus ending in a probabilistic choice
/// between `c![0].0` and `c![1].0` with probability `p` for the first.
pub fn prefixed_coin(rng: &mut ChaCha8Rng, p: f64) -> (Plts, usize) {
    let mut plts = Plts::new(vec!["c".into()]);
    let mut cur = plts.add_state(StateKind::Nondeterministic, false);
    for _ in 0..rng.gen_range(0..3) {
        let next = plts.add_state(StateKind::Nondeterministic, false);
        let label = if rng.gen_bool(0.5) { Label::Tau } else { out_bit(1) };
        plts.add_edge(cur, label, None, next);
        cur = next;
    }
    let ps = plts.add_state(StateKind::Probabilistic, false);
    plts.add_edge(cur, Label::Tau, None, ps);
    let end = plts.add_state(StateKind::Nondeterministic, true);
    for (bit, w) in [(0, p), (1, 1.0 - p)] {
        let s = plts.add_state(StateKind::Nondeterministic, false);
        plts.add_edge(ps, Label::Prob(w), None, s);
        plts.add_edge(s, out_bit(bit), None, end);
    }
    (plts, ps)
}

/// Random well-formed programs over an entry `Gen(c,d)` with `c : ^[Bit]`
/// and `d : ^[Qbit]`. Every generated program respects the ownership
/// discipline by construction.
pub struct ProgramGen<'a> {
    rng: &'a mut ChaCha8Rng,
    fresh: usize,
}

impl<'a> ProgramGen<'a> {
    pub fn new(rng: &'a mut ChaCha8Rng) -> Self {
        Self { rng, fresh: 0 }
    }

    fn name(&mut self, base: &str) -> String {
        self.fresh += 1;
        format!("{base}{}", self.fresh)
    }

    pub fn program(&mut self) -> String {
        let qubits: Vec<String> = (0..self.rng.gen_range(0..=2)).map(|_| self.name("q")).collect();
        let body = self.process(3, qubits.clone());
        let body = if qubits.is_empty() {
            body
        } else {
            format!("(qbit {}) {body}", qubits.join(","))
        };
        format!("//: Gen : ^[Bit], ^[Qbit]\nGen(c,d) = {body}\n")
    }

    fn process(&mut self, depth: usize, mut qubits: Vec<String>) -> String {
        if depth == 0 {
            // Spend every remaining qubit so nothing is left dangling.
            return self.finish(qubits);
        }
        match self.rng.gen_range(0..7) {
            0 => {
                let q = self.name("q");
                qubits.push(q.clone());
                let rest = self.process(depth - 1, qubits);
                format!("(qbit {q}) {rest}")
            }
            1 if !qubits.is_empty() => {
                let q = qubits[self.rng.gen_range(0..qubits.len())].clone();
                let g = ["H", "X", "Z"][self.rng.gen_range(0..3)];
                let rest = self.process(depth - 1, qubits);
                format!("{{{q} *= {g}}} . {rest}")
            }
            2 if qubits.len() >= 2 => {
                let i = self.rng.gen_range(0..qubits.len());
                let mut j = self.rng.gen_range(0..qubits.len() - 1);
                if j >= i {
                    j += 1;
                }
                let (a, b) = (qubits[i].clone(), qubits[j].clone());
                let rest = self.process(depth - 1, qubits);
                format!("{{{a},{b} *= CNot}} . {rest}")
            }
            3 if !qubits.is_empty() => {
                let q = qubits.remove(self.rng.gen_range(0..qubits.len()));
                let rest = self.process(depth - 1, qubits);
                format!("c![measure {q}] . {rest}")
            }
            4 if !qubits.is_empty() => {
                let q = qubits.remove(self.rng.gen_range(0..qubits.len()));
                let rest = self.process(depth - 1, qubits);
                format!("d![{q}] . {rest}")
            }
            5 => {
                let cut = self.rng.gen_range(0..=qubits.len());
                let right = qubits.split_off(cut);
                let l = self.process(depth - 1, qubits);
                let r = self.process(depth - 1, right);
                format!("(({l}) | ({r}))")
            }
            6 => {
                // Hand a qubit across a private channel.
                let k = self.name("k");
                let z = self.name("z");
                let q = self.name("q");
                let mine = self.process(depth - 1, qubits);
                let theirs = self.process(depth - 1, vec![z.clone()]);
                format!("(new {k})(((qbit {q}) {k}![{q}] . 0) | ({k}?[{z}] . {theirs}) | ({mine}))")
            }
            _ => {
                let bit = self.rng.gen_range(0..2);
                let rest = self.process(depth - 1, qubits);
                format!("c![{bit}] . {rest}")
            }
        }
    }

    fn finish(&mut self, qubits: Vec<String>) -> String {
        let mut out = String::new();
        for q in qubits {
            if self.rng.gen_bool(0.5) {
                out.push_str(&format!("c![measure {q}] . "));
            } else {
                out.push_str(&format!("d![{q}] . "));
            }
        }
        out.push('0');
        out
    }
}
