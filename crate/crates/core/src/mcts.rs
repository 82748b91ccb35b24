//! UCT Monte Carlo tree search over sequential slot assignments, rewarded
//! by the negated surrogate.
//!
//! A design point lives in slot space: one entry per slot, holding an action
//! index in `0..k`. The tree assigns slots in the schema's visiting order.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CategoricalPoint, CategoricalSpace};
use crate::error::{Error, Result};
use crate::rna::pair_table;
use crate::surrogate::Surrogate;

pub const UNPAIRED_ACTIONS: [char; 4] = ['A', 'G', 'C', 'U'];
pub const PAIRED_ACTIONS: [(char, char); 4] = [('G', 'C'), ('C', 'G'), ('A', 'U'), ('U', 'A')];
pub const PLAYOUTS_PER_SLOT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Unpaired(usize),
    Paired(usize, usize),
    /// Generic variable with abstract actions `0..k`.
    Variable(usize),
}

impl Slot {
    fn first_position(&self) -> usize {
        match *self {
            Slot::Unpaired(i) | Slot::Paired(i, _) | Slot::Variable(i) => i,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSchema {
    slots: Vec<Slot>,
    order: Vec<usize>,
    actions: usize,
    length: usize,
}

impl DesignSchema {
    /// `n` variable slots with `k` actions each, visited in index order.
    pub fn generic(n: usize, k: usize) -> Result<Self> {
        CategoricalSpace::new(n, k)?;
        Ok(Self {
            slots: (0..n).map(Slot::Variable).collect(),
            order: (0..n).collect(),
            actions: k,
            length: n,
        })
    }

    /// RNA design schema for a dot-bracket target. Slots are sorted by their
    /// first sequence position and visited in that order until
    /// [`DesignSchema::shuffled`] is applied.
    pub fn from_target(target: &str) -> Result<Self> {
        let table = pair_table(target)?;
        if table.is_empty() {
            return Err(Error::StructureParse {
                position: 0,
                message: "empty target".into(),
            });
        }
        let mut slots = Vec::new();
        for (i, partner) in table.iter().enumerate() {
            match partner {
                None => slots.push(Slot::Unpaired(i)),
                Some(j) if *j > i => slots.push(Slot::Paired(i, *j)),
                Some(_) => {}
            }
        }
        let h = slots.len();
        Ok(Self {
            slots,
            order: (0..h).collect(),
            actions: 4,
            length: table.len(),
        })
    }

    /// Copy with a uniformly random visiting order.
    pub fn shuffled<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut s = self.clone();
        s.order.shuffle(rng);
        s
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn height(&self) -> usize {
        self.slots.len()
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// Length of the decoded sequence.
    pub fn sequence_length(&self) -> usize {
        self.length
    }

    pub fn space(&self) -> CategoricalSpace {
        CategoricalSpace::new(self.height(), self.actions).expect("schema has at least one slot")
    }

    pub fn is_rna(&self) -> bool {
        !matches!(self.slots.first(), Some(Slot::Variable(_)))
    }

    /// Nucleotide sequence encoded by a slot-space point.
    pub fn decode_sequence(&self, point: &[usize]) -> Result<String> {
        if !self.is_rna() {
            return Err(Error::InvalidArgument(
                "generic schema has no sequence decoding".into(),
            ));
        }
        self.space().validate(point)?;
        let mut seq = vec!['?'; self.length];
        for (slot, &a) in self.slots.iter().zip(point) {
            match *slot {
                Slot::Unpaired(i) => seq[i] = UNPAIRED_ACTIONS[a],
                Slot::Paired(i, j) => {
                    let (x, y) = PAIRED_ACTIONS[a];
                    seq[i] = x;
                    seq[j] = y;
                }
                Slot::Variable(_) => unreachable!(),
            }
        }
        Ok(seq.into_iter().collect())
    }

    /// Slot-space point for a sequence, if every paired slot holds a legal
    /// dimer.
    pub fn encode_sequence(&self, sequence: &str) -> Result<CategoricalPoint> {
        let chars: Vec<char> = sequence.chars().map(|c| c.to_ascii_uppercase()).collect();
        if chars.len() != self.length || !self.is_rna() {
            return Err(Error::DimensionMismatch(format!(
                "sequence of length {} for schema of length {}",
                chars.len(),
                self.length
            )));
        }
        let mut out = Vec::with_capacity(self.height());
        for slot in &self.slots {
            let idx = match *slot {
                Slot::Unpaired(i) => UNPAIRED_ACTIONS.iter().position(|&c| c == chars[i]),
                Slot::Paired(i, j) => PAIRED_ACTIONS
                    .iter()
                    .position(|&p| p == (chars[i], chars[j])),
                Slot::Variable(_) => None,
            };
            out.push(idx.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "sequence does not fit slot at position {}",
                    slot.first_position()
                ))
            })?);
        }
        Ok(CategoricalPoint::new_unchecked(out))
    }
}

/// Builds the design schema for `target` with a visiting order drawn from
/// `rng`.
pub fn build_schema<R: Rng + ?Sized>(target: &str, rng: &mut R) -> Result<DesignSchema> {
    Ok(DesignSchema::from_target(target)?.shuffled(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MctsConfig {
    pub exploration: f64,
    pub playouts: usize,
}

impl MctsConfig {
    pub fn new(exploration: f64, playouts: usize) -> Result<Self> {
        if !(exploration >= 0.0 && exploration.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "exploration must be >= 0, got {exploration}"
            )));
        }
        if playouts == 0 {
            return Err(Error::InvalidArgument(
                "at least one playout is required".into(),
            ));
        }
        Ok(Self {
            exploration,
            playouts,
        })
    }

    /// `30 * h` playouts.
    pub fn for_schema(exploration: f64, schema: &DesignSchema) -> Result<Self> {
        Self::new(exploration, PLAYOUTS_PER_SLOT * schema.height())
    }
}

#[derive(Debug, Clone)]
struct Node {
    children: Vec<u32>,
    visits: Vec<u32>,
    q: Vec<f64>,
    total: u32,
    untried: Vec<usize>,
}

const NO_CHILD: u32 = u32::MAX;

/// What one playout did: the full assignment in visiting order, how many of
/// its leading edges lie in the tree, and the reward.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayoutRecord {
    pub actions: Vec<usize>,
    pub tree_edges: usize,
    pub reward: f64,
}

/// A search tree for one fixed surrogate.
pub struct Mcts<'a, S: ?Sized> {
    schema: &'a DesignSchema,
    surrogate: &'a S,
    exploration: f64,
    nodes: Vec<Node>,
    best: Option<(Vec<usize>, f64)>,
    scratch: Vec<usize>,
    path: Vec<(u32, usize)>,
}

impl<'a, S: Surrogate + ?Sized> Mcts<'a, S> {
    pub fn new<R: Rng + ?Sized>(
        schema: &'a DesignSchema,
        surrogate: &'a S,
        exploration: f64,
        rng: &mut R,
    ) -> Self {
        let mut t = Self {
            schema,
            surrogate,
            exploration,
            nodes: Vec::new(),
            best: None,
            scratch: vec![0; schema.height()],
            path: Vec::new(),
        };
        t.new_node(rng);
        t
    }

    fn new_node<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        let k = self.schema.actions();
        let mut untried: Vec<usize> = (0..k).collect();
        untried.shuffle(rng);
        self.nodes.push(Node {
            children: vec![NO_CHILD; k],
            visits: vec![0; k],
            q: vec![0.0; k],
            total: 0,
            untried,
        });
        (self.nodes.len() - 1) as u32
    }

    fn uct_action(&self, node: &Node) -> usize {
        let ln_n = (node.total as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for a in 0..node.q.len() {
            let score = node.q[a] + self.exploration * (ln_n / node.visits[a] as f64).sqrt();
            if score > best_score {
                best_score = score;
                best = a;
            }
        }
        best
    }

    /// Selection, one expansion, uniform rollout, backup.
    pub fn playout<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<PlayoutRecord> {
        let h = self.schema.height();
        let k = self.schema.actions();
        self.path.clear();
        let mut actions = Vec::with_capacity(h);
        let mut node = 0u32;
        let mut depth = 0;
        while depth < h {
            let n = &mut self.nodes[node as usize];
            if let Some(a) = n.untried.pop() {
                let child = if depth + 1 < h {
                    self.new_node(rng)
                } else {
                    NO_CHILD
                };
                self.nodes[node as usize].children[a] = child;
                self.path.push((node, a));
                actions.push(a);
                break;
            }
            let a = self.uct_action(&self.nodes[node as usize]);
            self.path.push((node, a));
            actions.push(a);
            depth += 1;
            node = self.nodes[node as usize].children[a];
        }
        let tree_edges = self.path.len();
        while actions.len() < h {
            actions.push(rng.random_range(0..k));
        }
        for (pos, &a) in actions.iter().enumerate() {
            self.scratch[self.schema.order()[pos]] = a;
        }
        let value = self.surrogate.eval(&self.scratch);
        if !value.is_finite() {
            return Err(Error::NonFinite(format!(
                "surrogate value {value} in playout"
            )));
        }
        let reward = -value;
        for &(node, a) in &self.path {
            let n = &mut self.nodes[node as usize];
            n.visits[a] += 1;
            n.total += 1;
            n.q[a] += (reward - n.q[a]) / n.visits[a] as f64;
        }
        if self.best.as_ref().is_none_or(|(_, r)| reward > *r) {
            self.best = Some((self.scratch.clone(), reward));
        }
        Ok(PlayoutRecord {
            actions,
            tree_edges,
            reward,
        })
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[0].total
    }

    /// `(N(s,a), Q(s,a))` for the last edge of `prefix`, if that edge is in
    /// the tree.
    pub fn edge_stats(&self, prefix: &[usize]) -> Option<(u32, f64)> {
        let (&last, head) = prefix.split_last()?;
        let mut node = 0u32;
        for &a in head {
            node = *self.nodes[node as usize].children.get(a)?;
            if node == NO_CHILD {
                return None;
            }
        }
        let n = &self.nodes[node as usize];
        if last >= n.visits.len() {
            return None;
        }
        Some((n.visits[last], n.q[last]))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Best complete slot-space point seen so far with its reward.
    pub fn best(&self) -> Option<(CategoricalPoint, f64)> {
        self.best
            .as_ref()
            .map(|(x, r)| (CategoricalPoint::new_unchecked(x.clone()), *r))
    }
}

/// Runs `config.playouts` playouts on a fresh tree and returns the
/// assignment with the highest reward `-surrogate(x)`.
pub fn mcts_maximize<S, R>(
    surrogate: &S,
    schema: &DesignSchema,
    config: &MctsConfig,
    rng: &mut R,
) -> Result<CategoricalPoint>
where
    S: Surrogate + ?Sized,
    R: Rng + ?Sized,
{
    let mut tree = Mcts::new(schema, surrogate, config.exploration, rng);
    for _ in 0..config.playouts {
        tree.playout(rng)?;
    }
    Ok(tree.best().expect("at least one playout").0)
}
