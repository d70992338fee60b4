//! Compositional task generators.
//!
//! Every generator is a pure function of its parameters (and seed, where
//! one is taken). Component values are encoded as indices; the mapping back
//! to task-level values (numbers, truth values, contexts) is documented on
//! each generator.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{enumerate_grid, CompInput, ComponentSpace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub input: CompInput,
    pub target: f64,
}

impl Example {
    pub fn new(input: CompInput, target: f64) -> Self {
        Example { input, target }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionalDataset {
    pub space: ComponentSpace,
    pub train: Vec<Example>,
    pub test: Vec<Example>,
    pub kind: TaskKind,
}

impl CompositionalDataset {
    /// Builds a dataset and checks its invariants: all tuples lie in the
    /// grid, splits are disjoint, classification targets are ±1.
    pub fn new(
        space: ComponentSpace,
        train: Vec<Example>,
        test: Vec<Example>,
        kind: TaskKind,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for (split, ex) in train
            .iter()
            .map(|e| (Split::Train, e))
            .chain(test.iter().map(|e| (Split::Test, e)))
        {
            space.check(&ex.input)?;
            if !seen.insert(&ex.input) {
                return Err(Error::InvalidTask(format!(
                    "tuple {:?} appears twice (second time in {split} split)",
                    ex.input
                )));
            }
            if !ex.target.is_finite() {
                return Err(Error::InvalidTask(format!("non-finite target at {:?}", ex.input)));
            }
            if kind == TaskKind::Classification && ex.target != 1.0 && ex.target != -1.0 {
                return Err(Error::InvalidTask(format!(
                    "classification target {} at {:?} is not ±1",
                    ex.target, ex.input
                )));
            }
        }
        Ok(CompositionalDataset {
            space,
            train,
            test,
            kind,
        })
    }

    pub fn split(&self, split: Split) -> &[Example] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn train_inputs(&self) -> Vec<CompInput> {
        self.train.iter().map(|e| e.input.clone()).collect()
    }

    pub fn test_inputs(&self) -> Vec<CompInput> {
        self.test.iter().map(|e| e.input.clone()).collect()
    }

    pub fn train_targets(&self) -> Vec<f64> {
        self.train.iter().map(|e| e.target).collect()
    }

    /// Train rows followed by test rows, each tagged with its split.
    pub fn rows(&self) -> impl Iterator<Item = (Split, &Example)> {
        self.train
            .iter()
            .map(|e| (Split::Train, e))
            .chain(self.test.iter().map(|e| (Split::Test, e)))
    }
}

fn pm(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

/// Two-operand operations on hidden item values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArithmeticOp {
    Add,
    Subtract,
    Multiply,
}

impl ArithmeticOp {
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            ArithmeticOp::Add => a + b,
            ArithmeticOp::Subtract => a - b,
            ArithmeticOp::Multiply => a * b,
        }
    }
}

/// Symbolic addition: component index `i` stands for `values[i]` in both
/// slots. The training set holds every pair with at least one anchor value.
pub fn gen_symbolic_addition(values: &[f64], anchors: &[f64]) -> Result<CompositionalDataset> {
    gen_arithmetic(values, anchors, ArithmeticOp::Add)
}

/// Same layout as [`gen_symbolic_addition`] with an arbitrary composition
/// of the two hidden values. Only `Add` and `Subtract` are additive.
pub fn gen_arithmetic(
    values: &[f64],
    anchors: &[f64],
    op: ArithmeticOp,
) -> Result<CompositionalDataset> {
    if values.len() < 2 {
        return Err(Error::InvalidTask("need at least two values".into()));
    }
    if anchors.is_empty() {
        return Err(Error::InvalidTask("anchor set is empty: no training rows".into()));
    }
    for (i, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::InvalidTask(format!("value {v} is not finite")));
        }
        if values[..i].contains(v) {
            return Err(Error::InvalidTask(format!("value {v} is repeated")));
        }
    }
    let mut is_anchor = vec![false; values.len()];
    for w in anchors {
        match values.iter().position(|v| v == w) {
            Some(i) => is_anchor[i] = true,
            None => return Err(Error::InvalidTask(format!("anchor {w} is not among the values"))),
        }
    }
    let n = values.len();
    let space = ComponentSpace::new(vec![n, n])?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for z in enumerate_grid(&space) {
        let (i, j) = (z.0[0], z.0[1]);
        let ex = Example::new(z, op.apply(values[i], values[j]));
        if is_anchor[i] || is_anchor[j] {
            train.push(ex);
        } else {
            test.push(ex);
        }
    }
    CompositionalDataset::new(space, train, test, TaskKind::Regression)
}

/// Held-out block size for the context-dependence task.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CdVariant {
    #[serde(rename = "CD1", alias = "cd1")]
    Cd1,
    #[serde(rename = "CD2", alias = "cd2")]
    Cd2,
    #[serde(rename = "CD3", alias = "cd3")]
    Cd3,
}

impl CdVariant {
    pub const ALL: [CdVariant; 3] = [CdVariant::Cd1, CdVariant::Cd2, CdVariant::Cd3];

    pub fn block(self) -> usize {
        match self {
            CdVariant::Cd1 => 1,
            CdVariant::Cd2 => 2,
            CdVariant::Cd3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CdVariant::Cd1 => "CD1",
            CdVariant::Cd2 => "CD2",
            CdVariant::Cd3 => "CD3",
        }
    }
}

impl FromStr for CdVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "CD1" => Ok(CdVariant::Cd1),
            "CD2" => Ok(CdVariant::Cd2),
            "CD3" => Ok(CdVariant::Cd3),
            _ => Err(Error::InvalidTask(format!("unknown context-dependence variant `{s}`"))),
        }
    }
}

/// Slot layout of a context-dependence dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLayout {
    pub context_slot: usize,
    pub feature1_slot: usize,
    pub feature2_slot: usize,
    /// Context values under which feature 1 decides the label.
    pub feature1_contexts: Vec<usize>,
    /// Context values under which feature 2 decides the label.
    pub feature2_contexts: Vec<usize>,
}

impl ContextLayout {
    /// Slots `(context, feature 1, feature 2) = (0, 1, 2)`.
    pub fn standard(feature1_contexts: Vec<usize>, feature2_contexts: Vec<usize>) -> Self {
        ContextLayout {
            context_slot: 0,
            feature1_slot: 1,
            feature2_slot: 2,
            feature1_contexts,
            feature2_contexts,
        }
    }
}

/// Number of feature values per category in the context-dependence task.
pub const CD_FEATURES_PER_CATEGORY: usize = 3;

/// Decision function shared by both features: values `0..3` are category 1
/// (label −1), values `3..6` are category 2 (label +1).
pub fn cd_decision(feature: usize) -> f64 {
    pm(feature >= CD_FEATURES_PER_CATEGORY)
}

/// Context dependence over slots `(context, feature 1, feature 2)` with two
/// contexts and six values per feature. Context 0 makes feature 1 relevant,
/// context 1 makes feature 2 relevant.
///
/// The held-out set is the leading `k×k` block (`k` = 1, 2, 3) of the orthant
/// where feature 1 is in category 2 and feature 2 is in category 1, under
/// both contexts.
pub fn gen_context_dependence(variant: CdVariant) -> CompositionalDataset {
    let k = variant.block();
    let n = 2 * CD_FEATURES_PER_CATEGORY;
    let space = ComponentSpace::new(vec![2, n, n]).expect("fixed space");
    let mut train = Vec::new();
    let mut test = Vec::new();
    for z in enumerate_grid(&space) {
        let (co, f1, f2) = (z.0[0], z.0[1], z.0[2]);
        let y = if co == 0 { cd_decision(f1) } else { cd_decision(f2) };
        let held = (CD_FEATURES_PER_CATEGORY..CD_FEATURES_PER_CATEGORY + k).contains(&f1) && f2 < k;
        let ex = Example::new(z, y);
        if held {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    CompositionalDataset::new(space, train, test, TaskKind::Classification).expect("valid by construction")
}

pub fn context_dependence_layout() -> ContextLayout {
    ContextLayout::standard(vec![0], vec![1])
}

/// Context dependence where two cue values share each rule: contexts 0 and
/// 1 select feature 1, contexts 2 and 3 select feature 2. Feature values 0
/// and 3 (one per category) are never shown together with contexts 1 and 3,
/// so the test tuples lack the context-feature conjunctions the additive
/// solution relies on.
pub fn gen_context_rule_transfer() -> CompositionalDataset {
    let n = 2 * CD_FEATURES_PER_CATEGORY;
    let space = ComponentSpace::new(vec![4, n, n]).expect("fixed space");
    let withheld_values = [0, CD_FEATURES_PER_CATEGORY];
    let mut train = Vec::new();
    let mut test = Vec::new();
    for z in enumerate_grid(&space) {
        let (co, f1, f2) = (z.0[0], z.0[1], z.0[2]);
        let y = if co < 2 { cd_decision(f1) } else { cd_decision(f2) };
        let novel_cue = co == 1 || co == 3;
        let held = novel_cue && (withheld_values.contains(&f1) || withheld_values.contains(&f2));
        let ex = Example::new(z, y);
        if held {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    CompositionalDataset::new(space, train, test, TaskKind::Classification).expect("valid by construction")
}

pub fn context_rule_transfer_layout() -> ContextLayout {
    ContextLayout::standard(vec![0, 1], vec![2, 3])
}

/// Default held-out pairs for transitive equivalence: the first and last
/// member of each class, e.g. `(A, C)` and `(D, F)` for two classes of three.
pub fn default_equivalence_held_out(items_per_class: usize, num_classes: usize) -> Vec<(usize, usize)> {
    (0..num_classes)
        .map(|c| (c * items_per_class, c * items_per_class + items_per_class - 1))
        .collect()
}

/// Held-out pairs `(A, C), (D, F), (A, F), (C, D)` for two classes of three:
/// two within-class and two cross-class pairs.
pub const BALANCED_EQUIVALENCE_HELD_OUT: [(usize, usize); 4] = [(0, 2), (3, 5), (0, 5), (2, 3)];

/// Transitive equivalence over ordered item pairs `(z1, z2)`, `z1 != z2`.
///
/// Held-out pairs are given in class-major positions: position `p` is item
/// `p % items_per_class` of class `p / items_per_class`. A seed permutes
/// which grid index plays each position; without one the mapping is the
/// identity. Reverses of held-out pairs are held out too.
pub fn gen_transitive_equivalence(
    items_per_class: usize,
    num_classes: usize,
    held_out: &[(usize, usize)],
    seed: Option<u64>,
) -> Result<CompositionalDataset> {
    if items_per_class < 2 || num_classes < 2 {
        return Err(Error::InvalidTask(
            "need at least two classes of at least two items".into(),
        ));
    }
    let n = items_per_class * num_classes;
    let class_of = |p: usize| p / items_per_class;
    let mut held = BTreeSet::new();
    for &(a, b) in held_out {
        if a >= n || b >= n {
            return Err(Error::InvalidTask(format!("held-out pair ({a}, {b}) outside the {n} items")));
        }
        if a == b {
            return Err(Error::InvalidTask(format!("held-out pair ({a}, {b}) is an identity pair")));
        }
        held.insert((a, b));
        held.insert((b, a));
    }
    // Each class must stay connected through trained within-class pairs,
    // and each pair of classes must keep a trained cross-class pair.
    for c in 0..num_classes {
        let members: Vec<usize> = (c * items_per_class..(c + 1) * items_per_class).collect();
        let mut reached = vec![members[0]];
        let mut frontier = vec![members[0]];
        while let Some(u) = frontier.pop() {
            for &v in &members {
                if !reached.contains(&v) && !held.contains(&(u, v)) {
                    reached.push(v);
                    frontier.push(v);
                }
            }
        }
        if reached.len() != members.len() {
            return Err(Error::InvalidTask(format!(
                "held-out pairs disconnect class {c}; its equivalence cannot be inferred"
            )));
        }
        for d in c + 1..num_classes {
            let any = (c * items_per_class..(c + 1) * items_per_class).any(|u| {
                (d * items_per_class..(d + 1) * items_per_class).any(|v| !held.contains(&(u, v)))
            });
            if !any {
                return Err(Error::InvalidTask(format!(
                    "no trained pair separates classes {c} and {d}"
                )));
            }
        }
    }

    let mut index_of: Vec<usize> = (0..n).collect();
    if let Some(seed) = seed {
        index_of.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut position_of = vec![0; n];
    for (p, &i) in index_of.iter().enumerate() {
        position_of[i] = p;
    }

    let space = ComponentSpace::new(vec![n, n])?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for z in enumerate_grid(&space) {
        let (i, j) = (z.0[0], z.0[1]);
        if i == j {
            continue;
        }
        let (p, q) = (position_of[i], position_of[j]);
        let ex = Example::new(z, pm(class_of(p) == class_of(q)));
        if held.contains(&(p, q)) {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    CompositionalDataset::new(space, train, test, TaskKind::Classification)
}

/// Which pairs of a linear order are trained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingSplit {
    /// Train on pairs of adjacent ranks (both orders).
    Adjacent,
    /// Train on pairs whose ranks differ by at most the given distance.
    WithinDistance(usize),
}

/// Transitive ordering: item `i` has rank `i`; target is +1 when the first
/// item outranks the second.
pub fn gen_transitive_ordering(num_items: usize, split: OrderingSplit) -> Result<CompositionalDataset> {
    if num_items < 3 {
        return Err(Error::InvalidTask("transitive ordering needs at least three items".into()));
    }
    let max_dist = match split {
        OrderingSplit::Adjacent => 1,
        OrderingSplit::WithinDistance(0) => {
            return Err(Error::InvalidTask("training distance must be at least 1".into()))
        }
        OrderingSplit::WithinDistance(d) => d,
    };
    let space = ComponentSpace::new(vec![num_items, num_items])?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for z in enumerate_grid(&space) {
        let (i, j) = (z.0[0], z.0[1]);
        if i == j {
            continue;
        }
        let ex = Example::new(z, pm(i > j));
        if i.abs_diff(j) <= max_dist {
            train.push(ex);
        } else {
            test.push(ex);
        }
    }
    CompositionalDataset::new(space, train, test, TaskKind::Classification)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogicalOp {
    And,
    Or,
    Xor,
}

impl LogicalOp {
    fn apply(self, a: bool, b: bool) -> bool {
        match self {
            LogicalOp::And => a && b,
            LogicalOp::Or => a || b,
            LogicalOp::Xor => a ^ b,
        }
    }
}

impl FromStr for LogicalOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "and" => Ok(LogicalOp::And),
            "or" => Ok(LogicalOp::Or),
            "xor" => Ok(LogicalOp::Xor),
            _ => Err(Error::InvalidTask(format!("unknown logical operation `{s}`"))),
        }
    }
}

/// Logical operation over hidden truth values of two items, on the full
/// `n×n` grid of ordered pairs (identity pairs included). `held_out` pairs
/// form the test set as given.
pub fn gen_logical_op(
    op: LogicalOp,
    truth: &[bool],
    held_out: &[(usize, usize)],
) -> Result<CompositionalDataset> {
    let n = truth.len();
    if n < 2 {
        return Err(Error::InvalidTask("need at least two items".into()));
    }
    let held: BTreeSet<(usize, usize)> = held_out.iter().copied().collect();
    if let Some(&(a, b)) = held.iter().find(|&&(a, b)| a >= n || b >= n) {
        return Err(Error::InvalidTask(format!("held-out pair ({a}, {b}) outside the {n} items")));
    }
    for item in 0..n {
        let first = (0..n).any(|j| !held.contains(&(item, j)));
        let second = (0..n).any(|i| !held.contains(&(i, item)));
        if !first || !second {
            return Err(Error::InvalidTask(format!(
                "item {item} is never observed in one of the slots"
            )));
        }
    }
    let space = ComponentSpace::new(vec![n, n])?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for z in enumerate_grid(&space) {
        let (i, j) = (z.0[0], z.0[1]);
        let ex = Example::new(z, pm(op.apply(truth[i], truth[j])));
        if held.contains(&(i, j)) {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    CompositionalDataset::new(space, train, test, TaskKind::Classification)
}

/// Two binary components, index 0 ↔ −1 and 1 ↔ +1. The label is −z₂ and
/// only inputs with z₁ = −1 are trained.
pub fn gen_invariance() -> CompositionalDataset {
    binary_pair_task(&[(0, 0), (0, 1)], &[(1, 0), (1, 1)])
}

/// Like [`gen_invariance`] with `(+1, −1)` moved into training.
pub fn gen_partial_exposure() -> CompositionalDataset {
    binary_pair_task(&[(0, 0), (0, 1), (1, 0)], &[(1, 1)])
}

fn binary_pair_task(train: &[(usize, usize)], test: &[(usize, usize)]) -> CompositionalDataset {
    let space = ComponentSpace::new(vec![2, 2]).expect("fixed space");
    let label = |&(a, b): &(usize, usize)| Example::new(CompInput(vec![a, b]), pm(b == 0));
    CompositionalDataset::new(
        space,
        train.iter().map(label).collect(),
        test.iter().map(label).collect(),
        TaskKind::Classification,
    )
    .expect("valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjoint(d: &CompositionalDataset) -> bool {
        let tr: HashSet<_> = d.train.iter().map(|e| &e.input).collect();
        d.test.iter().all(|e| !tr.contains(&e.input))
    }

    #[test]
    fn symbolic_addition_counts() {
        let v: Vec<f64> = (-4..=4).map(f64::from).collect();
        let d = gen_symbolic_addition(&v, &[0.0]).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (17, 64));
        assert!(d.rows().all(|(_, e)| (-8.0..=8.0).contains(&e.target)));
        assert!(disjoint(&d));
        assert_eq!(d.kind, TaskKind::Regression);

        let d = gen_symbolic_addition(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (4, 0));

        let d = gen_symbolic_addition(&[-2.0, -1.0, 1.0, 2.0], &[-2.0, 2.0]).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (12, 4));
        let mean: f64 = d.train.iter().map(|e| e.target).sum::<f64>() / d.train.len() as f64;
        assert_eq!(mean, 0.0);
    }

    #[test]
    fn symbolic_addition_errors() {
        assert!(gen_symbolic_addition(&[0.0, 1.0], &[]).is_err());
        assert!(gen_symbolic_addition(&[0.0], &[0.0]).is_err());
        assert!(gen_symbolic_addition(&[0.0, 0.0], &[0.0]).is_err());
        assert!(gen_symbolic_addition(&[0.0, 1.0], &[2.0]).is_err());
    }

    #[test]
    fn arithmetic_variants() {
        let d = gen_arithmetic(&[1.0, 2.0, 3.0], &[1.0], ArithmeticOp::Multiply).unwrap();
        let t = d.test.iter().find(|e| e.input.0 == vec![2, 2]).unwrap();
        assert_eq!(t.target, 9.0);
        let d = gen_arithmetic(&[1.0, 2.0, 3.0], &[1.0], ArithmeticOp::Subtract).unwrap();
        let t = d.test.iter().find(|e| e.input.0 == vec![1, 2]).unwrap();
        assert_eq!(t.target, -1.0);
    }

    #[test]
    fn context_dependence_sizes_and_labels() {
        for (v, test_len) in [(CdVariant::Cd1, 2), (CdVariant::Cd2, 8), (CdVariant::Cd3, 18)] {
            let d = gen_context_dependence(v);
            assert_eq!(d.test.len(), test_len);
            assert_eq!(d.train.len(), 72 - test_len);
            assert!(disjoint(&d));
            for (_, e) in d.rows() {
                let z = &e.input.0;
                let want = if z[0] == 0 { cd_decision(z[1]) } else { cd_decision(z[2]) };
                assert_eq!(e.target, want);
            }
            // held-out tuples: feature 1 in category 2, feature 2 in category 1
            for e in &d.test {
                assert!(e.input.0[1] >= 3 && e.input.0[2] < 3);
            }
        }
        // nested blocks
        let t1: HashSet<_> = gen_context_dependence(CdVariant::Cd1).test_inputs().into_iter().collect();
        let t2: HashSet<_> = gen_context_dependence(CdVariant::Cd2).test_inputs().into_iter().collect();
        assert!(t1.is_subset(&t2));
    }

    #[test]
    fn context_shortcut_predictiveness() {
        // context alone predicts 2/3 of CD-3 training labels and 9/16 of CD-2
        for (v, frac) in [(CdVariant::Cd3, 2.0 / 3.0), (CdVariant::Cd2, 9.0 / 16.0)] {
            let d = gen_context_dependence(v);
            let hits = d
                .train
                .iter()
                .filter(|e| e.target == if e.input.0[0] == 0 { -1.0 } else { 1.0 })
                .count();
            assert!((hits as f64 / d.train.len() as f64 - frac).abs() < 1e-12);
        }
    }

    #[test]
    fn rule_transfer_layout() {
        let d = gen_context_rule_transfer();
        assert!(disjoint(&d));
        assert!(d.test.iter().all(|e| e.input.0[0] == 1 || e.input.0[0] == 3));
        assert_eq!(d.train.len() + d.test.len(), 144);
    }

    #[test]
    fn transitive_equivalence_sizes() {
        let d = gen_transitive_equivalence(3, 2, &[(0, 2), (3, 5)], None).unwrap();
        assert_eq!((d.test.len(), d.train.len()), (4, 26));
        assert!(d.test.iter().all(|e| e.target == 1.0));
        assert!(disjoint(&d));

        let d = gen_transitive_equivalence(3, 2, &[], None).unwrap();
        assert!(d.test.is_empty());
        assert_eq!(d.train.len(), 30);

        let d = gen_transitive_equivalence(3, 2, &BALANCED_EQUIVALENCE_HELD_OUT, None).unwrap();
        assert_eq!(d.test.len(), 8);
        assert_eq!(d.test.iter().filter(|e| e.target == 1.0).count(), 4);
    }

    #[test]
    fn transitive_equivalence_seeded_relabeling() {
        let base = gen_transitive_equivalence(3, 2, &[(0, 2), (3, 5)], None).unwrap();
        let a = gen_transitive_equivalence(3, 2, &[(0, 2), (3, 5)], Some(7)).unwrap();
        let b = gen_transitive_equivalence(3, 2, &[(0, 2), (3, 5)], Some(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.test.len(), base.test.len());
        assert_eq!(a.train.len(), base.train.len());
        let pos = |d: &CompositionalDataset| d.train.iter().filter(|e| e.target == 1.0).count();
        assert_eq!(pos(&a), pos(&base));
        assert!(a.test.iter().all(|e| e.target == 1.0));
    }

    #[test]
    fn transitive_equivalence_errors() {
        assert!(gen_transitive_equivalence(3, 2, &[(0, 6)], None).is_err());
        assert!(gen_transitive_equivalence(3, 2, &[(1, 1)], None).is_err());
        // holding out both links of item A disconnects class 0
        assert!(gen_transitive_equivalence(3, 2, &[(0, 1), (0, 2)], None).is_err());
    }

    #[test]
    fn transitive_ordering() {
        let d = gen_transitive_ordering(5, OrderingSplit::Adjacent).unwrap();
        assert_eq!((d.train.len(), d.test.len()), (8, 12));
        let d = gen_transitive_ordering(3, OrderingSplit::Adjacent).unwrap();
        let t: Vec<_> = d.test_inputs().into_iter().map(|z| z.0).collect();
        assert_eq!(t, vec![vec![0, 2], vec![2, 0]]);
        for (_, e) in d.rows() {
            let (a, b) = (e.input.0[0] as f64, e.input.0[1] as f64);
            assert_eq!(e.target, (a - b).signum());
        }
        assert!(gen_transitive_ordering(2, OrderingSplit::Adjacent).is_err());
    }

    #[test]
    fn logical_ops() {
        let truth = [true, true, false, false];
        let d = gen_logical_op(LogicalOp::Or, &truth, &[]).unwrap();
        assert_eq!(d.train.iter().filter(|e| e.target == 1.0).count(), 12);
        let d = gen_logical_op(LogicalOp::And, &[true; 4], &[(0, 1)]).unwrap();
        assert!(d.rows().all(|(_, e)| e.target == 1.0));
        // XOR equals the negated equivalence labels of the truth classes
        let d = gen_logical_op(LogicalOp::Xor, &truth, &[(0, 1), (2, 3)]).unwrap();
        for (_, e) in d.rows() {
            let same = truth[e.input.0[0]] == truth[e.input.0[1]];
            assert_eq!(e.target, -pm(same));
        }
        assert!(gen_logical_op(LogicalOp::Or, &truth, &[(0, 0), (0, 1), (0, 2), (0, 3)]).is_err());
    }

    #[test]
    fn invariance_and_partial_exposure() {
        let inv = gen_invariance();
        let pe = gen_partial_exposure();
        assert_eq!((inv.train.len(), inv.test.len()), (2, 2));
        assert_eq!((pe.train.len(), pe.test.len()), (3, 1));
        for d in [&inv, &pe] {
            for (_, e) in d.rows() {
                assert_eq!(e.target, if e.input.0[1] == 0 { 1.0 } else { -1.0 });
            }
        }
        assert_eq!(pe.test[0].input.0, vec![1, 1]);
        assert_eq!(pe.test[0].target, -1.0);
    }

    #[test]
    fn constructor_checks() {
        let s = ComponentSpace::new(vec![2, 2]).unwrap();
        let e = Example::new(CompInput(vec![0, 0]), 1.0);
        assert!(CompositionalDataset::new(s.clone(), vec![e.clone()], vec![e.clone()], TaskKind::Regression).is_err());
        let bad = Example::new(CompInput(vec![0, 0]), 0.5);
        assert!(CompositionalDataset::new(s.clone(), vec![bad], vec![], TaskKind::Classification).is_err());
        let out = Example::new(CompInput(vec![0, 2]), 1.0);
        assert!(CompositionalDataset::new(s, vec![out], vec![], TaskKind::Regression).is_err());
    }
}
