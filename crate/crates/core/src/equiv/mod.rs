//! Probabilistic branching bisimulation by signature refinement.
//!
//! Both systems are put side by side and their states partitioned into
//! blocks. A state's signature is the set of moves it can make after inert
//! internal steps, that is, internal steps that stay inside its own block.
//! A move is either a visible label into a block, or a distribution over
//! blocks (a tau step counts as a point distribution; a probabilistic state
//! contributes the distribution of its successors). Blocks are split by
//! signature until nothing changes. Probabilities are compared on a grid of
//! 1e-6; qubit payloads are compared by density matrix within 1e-9.

mod context;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde_json::{json, Value as Json};

use crate::qstate::{DensityMatrix, TOLERANCE};
use crate::semantics::{Label, Plts, StateKind};

pub use context::{
    check_congruence_samples, fill, generate_context, CongruenceOptions, CongruenceReport, ContextError,
    ProcessContext, Sample, SampleOutcome, HOLE,
};

/// Grid on which probabilities are compared.
pub const PROBABILITY_RESOLUTION: f64 = 1e-6;

/// Label equality with qubit payloads compared by reduced density matrix.
pub fn labels_match(l1: &Label, l2: &Label, q1: Option<&DensityMatrix>, q2: Option<&DensityMatrix>) -> bool {
    let payloads = match (q1, q2) {
        (None, None) => true,
        (Some(a), Some(b)) => a.approx_eq(b, TOLERANCE),
        _ => false,
    };
    match (l1, l2) {
        (Label::Tau, Label::Tau) => true,
        (Label::Prob(a), Label::Prob(b)) => (a - b).abs() <= PROBABILITY_RESOLUTION,
        (Label::Input { .. }, Label::Input { .. }) | (Label::Output { .. }, Label::Output { .. }) => {
            l1 == l2 && payloads
        }
        _ => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Move {
    Visible(usize, usize),
    /// Block and probability in grid units, sorted by block.
    Dist(Vec<(usize, u64)>),
}

impl Move {
    fn is_point(&self) -> bool {
        matches!(self, Move::Dist(d) if d.len() == 1)
    }
}

fn quantise(p: f64) -> u64 {
    (p / PROBABILITY_RESOLUTION).round() as u64
}

enum Step {
    Tau(usize),
    Visible(usize, usize),
    Prob(f64, usize),
}

/// Several systems laid out in one state space, with visible labels
/// clustered into classes of matching labels.
struct Joint {
    offsets: Vec<usize>,
    kinds: Vec<StateKind>,
    terminal: Vec<bool>,
    steps: Vec<Vec<Step>>,
    classes: Vec<(Label, Option<DensityMatrix>)>,
}

impl Joint {
    fn new(systems: &[&Plts]) -> Self {
        let mut joint = Joint {
            offsets: Vec::new(),
            kinds: Vec::new(),
            terminal: Vec::new(),
            steps: Vec::new(),
            classes: Vec::new(),
        };
        for p in systems {
            let base = joint.kinds.len();
            joint.offsets.push(base);
            for s in &p.states {
                joint.kinds.push(s.kind);
                joint.terminal.push(s.terminal);
                joint.steps.push(Vec::new());
            }
            for e in &p.edges {
                let (src, dst) = (base + e.src, base + e.dst);
                let step = match &e.label {
                    Label::Tau => Step::Tau(dst),
                    Label::Prob(q) => Step::Prob(*q, dst),
                    label => Step::Visible(joint.class_of(label, e.payload.as_ref()), dst),
                };
                joint.steps[src].push(step);
            }
        }
        joint
    }

    fn class_of(&mut self, label: &Label, payload: Option<&DensityMatrix>) -> usize {
        if let Some(i) = self
            .classes
            .iter()
            .position(|(l, q)| labels_match(l, label, q.as_ref(), payload))
        {
            return i;
        }
        self.classes.push((label.clone(), payload.cloned()));
        self.classes.len() - 1
    }

    fn len(&self) -> usize {
        self.kinds.len()
    }

    /// Terminated states start in a block of their own.
    fn initial_partition(&self) -> Vec<usize> {
        let any_live = self.terminal.iter().any(|t| !t);
        self.terminal
            .iter()
            .map(|&t| if t && any_live { 1 } else { 0 })
            .collect()
    }

    /// Signatures under `block`: each state's non-inert moves together with
    /// those of everything it reaches by inert moves.
    fn signatures(&self, block: &[usize]) -> Vec<BTreeSet<Move>> {
        let n = self.len();
        let mut direct = vec![BTreeSet::new(); n];
        let mut graph = DiGraph::<(), ()>::with_capacity(n, n);
        let nodes: Vec<NodeIndex> = (0..n).map(|_| graph.add_node(())).collect();
        for s in 0..n {
            match self.kinds[s] {
                StateKind::Nondeterministic => {
                    for step in &self.steps[s] {
                        match *step {
                            Step::Tau(t) if block[t] == block[s] => {
                                graph.add_edge(nodes[s], nodes[t], ());
                            }
                            Step::Tau(t) => {
                                direct[s].insert(Move::Dist(vec![(block[t], quantise(1.0))]));
                            }
                            Step::Visible(c, t) => {
                                direct[s].insert(Move::Visible(c, block[t]));
                            }
                            Step::Prob(..) => {}
                        }
                    }
                }
                StateKind::Probabilistic => {
                    let mut mass: BTreeMap<usize, f64> = BTreeMap::new();
                    for step in &self.steps[s] {
                        if let Step::Prob(p, t) = *step {
                            *mass.entry(block[t]).or_default() += p;
                        }
                    }
                    if mass.len() == 1 && mass.contains_key(&block[s]) {
                        for step in &self.steps[s] {
                            if let Step::Prob(_, t) = *step {
                                graph.add_edge(nodes[s], nodes[t], ());
                            }
                        }
                    } else if !mass.is_empty() {
                        let dist = mass.into_iter().map(|(b, p)| (b, quantise(p))).collect();
                        direct[s].insert(Move::Dist(dist));
                    }
                }
            }
        }

        // Components come out sinks first, so successors are done before
        // the components that reach them.
        let mut component = vec![usize::MAX; n];
        let mut closed: Vec<BTreeSet<Move>> = Vec::new();
        for (ci, scc) in tarjan_scc(&graph).into_iter().enumerate() {
            for v in &scc {
                component[v.index()] = ci;
            }
            let mut sig = BTreeSet::new();
            for v in &scc {
                sig.extend(direct[v.index()].iter().cloned());
                for w in graph.neighbors(*v) {
                    let cw = component[w.index()];
                    if cw != ci {
                        sig.extend(closed[cw].iter().cloned());
                    }
                }
            }
            closed.push(sig);
        }
        (0..n).map(|s| closed[component[s]].clone()).collect()
    }

    /// Coarsest stable partition and the signatures under it.
    fn refine(&self) -> (Vec<usize>, Vec<BTreeSet<Move>>) {
        let mut block = self.initial_partition();
        let mut count = block.iter().collect::<BTreeSet<_>>().len();
        loop {
            let sigs = self.signatures(&block);
            let mut ids: HashMap<(usize, &BTreeSet<Move>), usize> = HashMap::new();
            let next: Vec<usize> = (0..self.len())
                .map(|s| {
                    let fresh = ids.len();
                    *ids.entry((block[s], &sigs[s])).or_insert(fresh)
                })
                .collect();
            if ids.len() == count {
                return (block, sigs);
            }
            count = ids.len();
            block = next;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

/// Why two initial states ended up in different blocks.
#[derive(Clone, Debug, PartialEq)]
pub enum Witness {
    /// The two sides reach `block` with different probabilities.
    ProbabilityMismatch { block: usize, left: f64, right: f64 },
    /// `side` can make a move into `block` that the other side cannot match.
    UnmatchedMove { side: Side, label: String, block: usize },
    /// One side has terminated and the other has not.
    TerminationMismatch { left_terminal: bool, right_terminal: bool },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::ProbabilityMismatch { block, left, right } => write!(
                f,
                "probability mismatch: block {block} is reached with probability {left:.6} on the left and {right:.6} on the right"
            ),
            Witness::UnmatchedMove { side, label, block } => {
                write!(f, "unmatched move: {side} side can do {label} into block {block}")
            }
            Witness::TerminationMismatch {
                left_terminal,
                right_terminal,
            } => write!(
                f,
                "termination mismatch: left {}, right {}",
                if *left_terminal { "terminated" } else { "running" },
                if *right_terminal { "terminated" } else { "running" }
            ),
        }
    }
}

impl Witness {
    pub fn to_json(&self) -> Json {
        match self {
            Witness::ProbabilityMismatch { block, left, right } => {
                json!({"kind": "probability_mismatch", "block": block, "left": left, "right": right})
            }
            Witness::UnmatchedMove { side, label, block } => {
                json!({"kind": "unmatched_move", "side": side.to_string(), "label": label, "block": block})
            }
            Witness::TerminationMismatch {
                left_terminal,
                right_terminal,
            } => {
                json!({"kind": "termination_mismatch", "left_terminal": left_terminal, "right_terminal": right_terminal})
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceVerdict {
    pub equivalent: bool,
    pub witness: Option<Witness>,
}

impl EquivalenceVerdict {
    pub fn to_json(&self) -> Json {
        json!({
            "equivalent": self.equivalent,
            "witness": self.witness.as_ref().map(Witness::to_json),
        })
    }
}

impl fmt::Display for EquivalenceVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.equivalent {
            return f.write_str("EQUIVALENT");
        }
        f.write_str("NOT EQUIVALENT")?;
        if let Some(w) = &self.witness {
            write!(f, "\nwitness: {w}")?;
        }
        Ok(())
    }
}

fn dists(sig: &BTreeSet<Move>) -> Vec<&Vec<(usize, u64)>> {
    sig.iter()
        .filter_map(|m| match m {
            Move::Dist(d) if d.len() > 1 => Some(d),
            _ => None,
        })
        .collect()
}

fn mass(d: &[(usize, u64)], block: usize) -> f64 {
    d.iter()
        .find(|(b, _)| *b == block)
        .map_or(0.0, |(_, q)| *q as f64 * PROBABILITY_RESOLUTION)
}

fn witness(
    joint: &Joint,
    block: &[usize],
    sigs: &[BTreeSet<Move>],
    (left, right): (usize, usize),
    channels: &[String],
) -> Witness {
    let (sl, sr) = (&sigs[left], &sigs[right]);
    let (dl, dr) = (dists(sl), dists(sr));
    if dl != dr {
        let own = |s: usize| vec![(block[s], quantise(1.0))];
        let (a, b) = match dl.iter().find(|d| !dr.contains(d)) {
            Some(d) => ((*d).clone(), dr.first().map_or_else(|| own(right), |d| (*d).clone())),
            None => {
                let d = dr.iter().find(|d| !dl.contains(d)).expect("sets differ");
                (dl.first().map_or_else(|| own(left), |d| (*d).clone()), (*d).clone())
            }
        };
        let blocks: BTreeSet<usize> = a.iter().chain(&b).map(|(blk, _)| *blk).collect();
        let (blk, l, r) = blocks
            .into_iter()
            .map(|blk| (blk, mass(&a, blk), mass(&b, blk)))
            .fold(None, |best: Option<(usize, f64, f64)>, cur| match best {
                Some(bst) if (bst.1 - bst.2).abs() >= (cur.1 - cur.2).abs() => Some(bst),
                _ => Some(cur),
            })
            .expect("distributions are non-empty");
        return Witness::ProbabilityMismatch {
            block: blk,
            left: l,
            right: r,
        };
    }
    let (tl, tr) = (joint.terminal[left], joint.terminal[right]);
    if tl != tr {
        return Witness::TerminationMismatch {
            left_terminal: tl,
            right_terminal: tr,
        };
    }
    let render = |m: &Move| -> (String, usize) {
        match m {
            Move::Visible(c, b) => (joint.classes[*c].0.render(channels), *b),
            Move::Dist(d) => ("tau".into(), d[0].0),
        }
    };
    if let Some(m) = sl.difference(sr).next() {
        let (label, block) = render(m);
        return Witness::UnmatchedMove {
            side: Side::Left,
            label,
            block,
        };
    }
    if let Some(m) = sr.difference(sl).next() {
        let (label, block) = render(m);
        return Witness::UnmatchedMove {
            side: Side::Right,
            label,
            block,
        };
    }
    unreachable!("states in different blocks have different signatures")
}

/// Decides whether the initial states of `p1` and `p2` are probabilistic
/// branching bisimilar.
pub fn branching_bisim(p1: &Plts, p2: &Plts) -> EquivalenceVerdict {
    let joint = Joint::new(&[p1, p2]);
    let (block, sigs) = joint.refine();
    let (left, right) = (p1.initial, joint.offsets[1] + p2.initial);
    if block[left] == block[right] {
        return EquivalenceVerdict {
            equivalent: true,
            witness: None,
        };
    }
    let channels = if p1.channels.is_empty() {
        &p2.channels
    } else {
        &p1.channels
    };
    EquivalenceVerdict {
        equivalent: false,
        witness: Some(witness(&joint, &block, &sigs, (left, right), channels)),
    }
}

/// Quotient of `p` by its coarsest branching bisimulation, restricted to
/// what the initial block can reach.
pub fn minimize(p: &Plts) -> Plts {
    let joint = Joint::new(&[p]);
    let (block, sigs) = joint.refine();
    let blocks = block.iter().max().map_or(0, |m| m + 1);
    let mut sig_of: Vec<Option<&BTreeSet<Move>>> = vec![None; blocks];
    let mut terminal = vec![false; blocks];
    for s in 0..joint.len() {
        sig_of[block[s]].get_or_insert(&sigs[s]);
        terminal[block[s]] |= joint.terminal[s];
    }

    let mut out = Plts::new(p.channels.clone());
    let mut id: Vec<Option<usize>> = vec![None; blocks];
    let mut queue = std::collections::VecDeque::new();
    let visit = |b: usize,
                 id: &mut Vec<Option<usize>>,
                 out: &mut Plts,
                 queue: &mut std::collections::VecDeque<usize>|
     -> usize {
        if let Some(i) = id[b] {
            return i;
        }
        let sig = sig_of[b].expect("every block has a member");
        let probabilistic = sig.len() == 1 && sig.iter().all(|m| matches!(m, Move::Dist(d) if d.len() > 1));
        let terminal = terminal[b];
        let kind = if probabilistic {
            StateKind::Probabilistic
        } else {
            StateKind::Nondeterministic
        };
        let i = out.add_state(kind, terminal);
        id[b] = Some(i);
        queue.push_back(b);
        i
    };
    let prob_edges = |d: &[(usize, u64)]| -> Vec<(f64, usize)> {
        let total: u64 = d.iter().map(|(_, q)| q).sum();
        d.iter().map(|(b, q)| (*q as f64 / total as f64, *b)).collect()
    };

    out.initial = visit(block[p.initial], &mut id, &mut out, &mut queue);
    while let Some(b) = queue.pop_front() {
        let src = id[b].expect("queued blocks are numbered");
        let sig = sig_of[b].expect("every block has a member");
        let probabilistic = out.states[src].kind == StateKind::Probabilistic;
        for m in sig {
            match m {
                Move::Visible(c, t) => {
                    let dst = visit(*t, &mut id, &mut out, &mut queue);
                    let (label, payload) = joint.classes[*c].clone();
                    out.add_edge(src, label, payload, dst);
                }
                Move::Dist(d) if m.is_point() => {
                    let dst = visit(d[0].0, &mut id, &mut out, &mut queue);
                    out.add_edge(src, Label::Tau, None, dst);
                }
                Move::Dist(d) => {
                    let from = if probabilistic {
                        src
                    } else {
                        let fresh = out.add_state(StateKind::Probabilistic, false);
                        out.add_edge(src, Label::Tau, None, fresh);
                        fresh
                    };
                    for (prob, t) in prob_edges(d) {
                        let dst = visit(t, &mut id, &mut out, &mut queue);
                        out.add_edge(from, Label::Prob(prob), None, dst);
                    }
                }
            }
        }
    }
    out
}
