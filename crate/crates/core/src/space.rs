//! Component spaces, compositional inputs and conjunctions.
//!
//! A conjunction is a subset of component slots, stored as a bitmask where
//! bit `c` marks slot `c`. Overlaps between two inputs are conjunctions too.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the number of components. Per-conjunction tables have
/// `2^C` entries.
pub const MAX_COMPONENTS: usize = 16;

/// A subset of component slots.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Conjunction(pub u32);

impl Conjunction {
    pub const EMPTY: Conjunction = Conjunction(0);

    pub fn full(num_components: usize) -> Self {
        Conjunction(((1u64 << num_components) - 1) as u32)
    }

    pub fn from_slots(slots: &[usize]) -> Self {
        Conjunction(slots.iter().fold(0u32, |m, &c| m | (1 << c)))
    }

    pub fn contains(self, slot: usize) -> bool {
        self.0 & (1 << slot) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: Conjunction) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn slots(self) -> impl Iterator<Item = usize> {
        (0..32).filter(move |&c| self.0 & (1 << c) != 0)
    }

    /// All subsets of `self`, including the empty set and `self`, in
    /// increasing mask order.
    pub fn subsets(self) -> impl Iterator<Item = Conjunction> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(Conjunction(cur))
        })
    }

    /// Every conjunction over `num_components` slots, ordered by mask.
    pub fn all(num_components: usize) -> impl Iterator<Item = Conjunction> {
        (0..(1u32 << num_components)).map(Conjunction)
    }
}

impl fmt::Debug for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let slots: Vec<usize> = self.slots().collect();
        write!(f, "{slots:?}")
    }
}

impl fmt::Display for Conjunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The number of components and the cardinality of each.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentSpace {
    cardinalities: Vec<usize>,
}

impl ComponentSpace {
    pub fn new(cardinalities: Vec<usize>) -> Result<Self> {
        if cardinalities.is_empty() {
            return Err(Error::InvalidSpace("need at least one component".into()));
        }
        if cardinalities.len() > MAX_COMPONENTS {
            return Err(Error::InvalidSpace(format!(
                "{} components exceeds the maximum of {MAX_COMPONENTS}",
                cardinalities.len()
            )));
        }
        if let Some(c) = cardinalities.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpace(format!("component {c} has cardinality 0")));
        }
        Ok(ComponentSpace { cardinalities })
    }

    pub fn num_components(&self) -> usize {
        self.cardinalities.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cardinalities
    }

    pub fn grid_size(&self) -> usize {
        self.cardinalities.iter().product()
    }

    pub fn full_conjunction(&self) -> Conjunction {
        Conjunction::full(self.num_components())
    }

    pub fn contains(&self, z: &CompInput) -> bool {
        z.0.len() == self.cardinalities.len()
            && z.0.iter().zip(&self.cardinalities).all(|(&v, &n)| v < n)
    }

    pub fn check(&self, z: &CompInput) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::InputOutOfSpace {
                input: z.0.clone(),
                cardinalities: self.cardinalities.clone(),
            })
        }
    }

    pub fn input(&self, components: Vec<usize>) -> Result<CompInput> {
        let z = CompInput(components);
        self.check(&z)?;
        Ok(z)
    }

    /// Lexicographic position of `z` in the grid.
    pub fn index_of(&self, z: &CompInput) -> usize {
        z.0.iter()
            .zip(&self.cardinalities)
            .fold(0, |acc, (&v, &n)| acc * n + v)
    }
}

/// All tuples of the grid in lexicographic order (last component fastest).
pub fn enumerate_grid(space: &ComponentSpace) -> Vec<CompInput> {
    let dims = space.cardinalities();
    let mut out = Vec::with_capacity(space.grid_size());
    let mut cur = vec![0usize; dims.len()];
    loop {
        out.push(CompInput(cur.clone()));
        let mut c = dims.len();
        loop {
            if c == 0 {
                return out;
            }
            c -= 1;
            cur[c] += 1;
            if cur[c] < dims[c] {
                break;
            }
            cur[c] = 0;
        }
    }
}

/// A tuple of component indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CompInput(pub Vec<usize>);

impl CompInput {
    pub fn new(components: Vec<usize>) -> Self {
        CompInput(components)
    }

    pub fn components(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The values `z_J` restricted to the slots of `j`, in slot order.
    pub fn restrict(&self, j: Conjunction) -> Vec<usize> {
        j.slots().map(|c| self.0[c]).collect()
    }

    /// Whether `self` and `other` agree on every slot of `j`.
    pub fn agrees_on(&self, other: &CompInput, j: Conjunction) -> bool {
        j.slots().all(|c| self.0[c] == other.0[c])
    }
}

impl fmt::Debug for CompInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// Slots on which two inputs carry identical components.
pub fn overlap(z: &CompInput, other: &CompInput) -> Result<Conjunction> {
    if z.len() != other.len() {
        return Err(Error::MismatchedSpaces {
            left: z.len(),
            right: other.len(),
        });
    }
    Ok(overlap_unchecked(z, other))
}

#[inline]
pub(crate) fn overlap_unchecked(z: &CompInput, other: &CompInput) -> Conjunction {
    let mut mask = 0u32;
    for (c, (a, b)) in z.0.iter().zip(&other.0).enumerate() {
        if a == b {
            mask |= 1 << c;
        }
    }
    Conjunction(mask)
}

/// The conjunctions on which some training input agrees with a given input.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ConjunctionSet {
    conjunctions: BTreeSet<Conjunction>,
}

impl ConjunctionSet {
    pub fn contains(&self, j: Conjunction) -> bool {
        self.conjunctions.contains(&j)
    }

    pub fn iter(&self) -> impl Iterator<Item = Conjunction> + '_ {
        self.conjunctions.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.conjunctions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conjunctions.is_empty()
    }

    pub fn is_downward_closed(&self) -> bool {
        self.conjunctions
            .iter()
            .all(|j| j.subsets().all(|s| self.conjunctions.contains(&s)))
    }
}

impl FromIterator<Conjunction> for ConjunctionSet {
    fn from_iter<I: IntoIterator<Item = Conjunction>>(iter: I) -> Self {
        ConjunctionSet {
            conjunctions: iter.into_iter().collect(),
        }
    }
}

/// `{ J | some training input agrees with z on every slot of J }`.
///
/// Every overlap with a training input contributes all of its subsets.
pub fn conjunction_set(z: &CompInput, train: &[CompInput]) -> Result<ConjunctionSet> {
    let mut seen = BTreeSet::new();
    for t in train {
        let o = overlap(z, t)?;
        if seen.contains(&o) {
            continue;
        }
        seen.extend(o.subsets());
    }
    Ok(ConjunctionSet { conjunctions: seen })
}
