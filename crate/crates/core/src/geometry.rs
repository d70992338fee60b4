//! Compositionally structured kernels.
//!
//! A compositionally structured kernel assigns one similarity κ to every
//! overlap class: either per overlap size (the uniform case) or per overlap
//! set (the generalized case). Salience is the normalized unique
//! contribution of each conjunction to those similarities.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::space::{overlap_unchecked, CompInput, Conjunction, MAX_COMPONENTS};

/// Relative tolerance on eigenvalues for the PSD check.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Tolerance on the salience normalization `Σ S = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Values indexed either by overlap size or by overlap set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Indexing {
    /// One value per size `k`.
    BySize(Vec<f64>),
    /// One value per conjunction mask, `2^C` entries.
    ByConjunction(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalienceProfile {
    num_components: usize,
    /// `BySize` holds `S(k;C)` at index `k − 1`; `ByConjunction` holds
    /// `S(J)` at index `J`, with index 0 unused.
    values: Indexing,
}

impl SalienceProfile {
    /// Per-size saliences `S(1;C), …, S(C;C)`. Validated: non-negative and
    /// `Σ_k binom(C,k)·S(k;C) = 1`.
    pub fn uniform(per_size: Vec<f64>) -> Result<Self> {
        let p = SalienceProfile {
            num_components: per_size.len(),
            values: Indexing::BySize(per_size),
        };
        p.validate()?;
        Ok(p)
    }

    /// Per-conjunction saliences, indexed by mask (`values[0]` is ignored).
    pub fn by_conjunction(num_components: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << num_components {
            return Err(Error::InvalidProfile(format!(
                "expected {} per-conjunction values, got {}",
                1usize << num_components,
                values.len()
            )));
        }
        values[0] = 0.0;
        let p = SalienceProfile {
            num_components,
            values: Indexing::ByConjunction(values),
        };
        p.validate()?;
        Ok(p)
    }

    /// Two components with `S(1;2) = s1` and `S(2;2) = 1 − 2·s1`.
    pub fn two_component(s1: f64) -> Result<Self> {
        Self::uniform(vec![s1, 1.0 - 2.0 * s1])
    }

    /// Three components with `S(3;3)` fixed by normalization.
    pub fn three_component(s1: f64, s2: f64) -> Result<Self> {
        Self::uniform(vec![s1, s2, 1.0 - 3.0 * s1 - 3.0 * s2])
    }

    /// Concatenated one-hot codes: `S(1;C) = 1/C`, higher sizes zero.
    pub fn multi_hot(num_components: usize) -> Self {
        let mut v = vec![0.0; num_components];
        v[0] = 1.0 / num_components as f64;
        SalienceProfile {
            num_components,
            values: Indexing::BySize(v),
        }
    }

    /// Only the full conjunction is represented (a look-up table).
    pub fn pure_conjunctive(num_components: usize) -> Self {
        let mut v = vec![0.0; num_components];
        v[num_components - 1] = 1.0;
        SalienceProfile {
            num_components,
            values: Indexing::BySize(v),
        }
    }

    fn unchecked(num_components: usize, values: Indexing) -> Self {
        SalienceProfile {
            num_components,
            values,
        }
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn indexing(&self) -> &Indexing {
        &self.values
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.values, Indexing::BySize(_))
    }

    /// `S(k;C)` for `k = 1..=C`, when the profile is uniform.
    pub fn per_size(&self) -> Option<&[f64]> {
        match &self.values {
            Indexing::BySize(v) => Some(v),
            Indexing::ByConjunction(_) => None,
        }
    }

    /// Salience of a non-empty conjunction.
    pub fn get(&self, j: Conjunction) -> f64 {
        if j.is_empty() {
            return 0.0;
        }
        match &self.values {
            Indexing::BySize(v) => v[j.len() - 1],
            Indexing::ByConjunction(v) => v[j.0 as usize],
        }
    }

    /// `S(k;C)` for a uniform profile; for a generalized profile, the mean
    /// over conjunctions of size `k`.
    pub fn size_salience(&self, k: usize) -> f64 {
        match &self.values {
            Indexing::BySize(v) => v[k - 1],
            Indexing::ByConjunction(v) => {
                let (sum, n) = Conjunction::all(self.num_components)
                    .filter(|j| j.len() == k)
                    .fold((0.0, 0usize), |(s, n), j| (s + v[j.0 as usize], n + 1));
                sum / n as f64
            }
        }
    }

    /// `Σ` over non-empty conjunctions.
    pub fn total(&self) -> f64 {
        match &self.values {
            Indexing::BySize(v) => v
                .iter()
                .enumerate()
                .map(|(i, s)| binomial(self.num_components, i + 1) * s)
                .sum(),
            Indexing::ByConjunction(v) => v[1..].iter().sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_components == 0 || self.num_components > MAX_COMPONENTS {
            return Err(Error::InvalidProfile(format!(
                "number of components {} outside 1..={MAX_COMPONENTS}",
                self.num_components
            )));
        }
        let vals = match &self.values {
            Indexing::BySize(v) => &v[..],
            Indexing::ByConjunction(v) => &v[1..],
        };
        if let Some(s) = vals.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidProfile(format!("salience {s} is negative or not finite")));
        }
        let total = self.total();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidProfile(format!(
                "saliences sum to {total} over non-empty conjunctions, expected 1"
            )));
        }
        Ok(())
    }

    /// Short human-readable parameter list, e.g. `S1=0.4;S2=0.2`.
    pub fn label(&self) -> String {
        match &self.values {
            Indexing::BySize(v) => v
                .iter()
                .enumerate()
                .map(|(i, s)| format!("S{}={}", i + 1, crate::io::fmt_num(*s)))
                .collect::<Vec<_>>()
                .join(";"),
            Indexing::ByConjunction(v) => v[1..]
                .iter()
                .enumerate()
                .map(|(i, s)| format!("S{:?}={}", Conjunction(i as u32 + 1), crate::io::fmt_num(*s)))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }
}

/// Similarity κ per overlap class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTable {
    num_components: usize,
    /// `BySize` holds κ(k) for `k = 0..=C`; `ByConjunction` holds κ(J) by mask.
    values: Indexing,
}

impl SimilarityTable {
    /// κ(0), …, κ(C) for overlap counts.
    pub fn by_size(kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() < 2 {
            return Err(Error::DegenerateTable("need κ for overlaps 0..=C with C ≥ 1".into()));
        }
        let t = SimilarityTable {
            num_components: kappa.len() - 1,
            values: Indexing::BySize(kappa),
        };
        t.check_values()?;
        Ok(t)
    }

    pub fn by_conjunction(num_components: usize, kappa: Vec<f64>) -> Result<Self> {
        if kappa.len() != 1 << num_components {
            return Err(Error::DegenerateTable(format!(
                "expected {} per-conjunction similarities, got {}",
                1usize << num_components,
                kappa.len()
            )));
        }
        let t = SimilarityTable {
            num_components,
            values: Indexing::ByConjunction(kappa),
        };
        t.check_values()?;
        Ok(t)
    }

    fn check_values(&self) -> Result<()> {
        let vals = match &self.values {
            Indexing::BySize(v) | Indexing::ByConjunction(v) => v,
        };
        if self.num_components > MAX_COMPONENTS {
            return Err(Error::DegenerateTable(format!(
                "{} components exceeds {MAX_COMPONENTS}",
                self.num_components
            )));
        }
        if vals.iter().any(|k| !k.is_finite()) {
            return Err(Error::DegenerateTable("non-finite similarity".into()));
        }
        let full = self.kappa(Conjunction::full(self.num_components));
        if let Some(j) = Conjunction::all(self.num_components).find(|&j| self.kappa(j) > full * (1.0 + 1e-12) + 1e-300) {
            return Err(Error::DegenerateTable(format!(
                "κ({j}) = {} exceeds the identical-input similarity {full}",
                self.kappa(j)
            )));
        }
        Ok(())
    }

    pub fn num_components(&self) -> usize {
        self.num_components
    }

    pub fn indexing(&self) -> &Indexing {
        &self.values
    }

    #[inline]
    pub fn kappa(&self, j: Conjunction) -> f64 {
        match &self.values {
            Indexing::BySize(v) => v[j.len()],
            Indexing::ByConjunction(v) => v[j.0 as usize],
        }
    }

    /// Similarity of identical inputs.
    pub fn identical(&self) -> f64 {
        self.kappa(Conjunction::full(self.num_components))
    }

    pub fn scaled(&self, c: f64) -> SimilarityTable {
        self.map(|k| k * c)
    }

    /// Adds a constant `b ≥ 0` to every similarity (a constant kernel).
    pub fn shifted(&self, b: f64) -> Result<SimilarityTable> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::OutOfDomain {
                what: "baseline must be finite and ≥ 0".into(),
                value: b,
            });
        }
        Ok(self.map(|k| k + b))
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> SimilarityTable {
        let values = match &self.values {
            Indexing::BySize(v) => Indexing::BySize(v.iter().map(|&k| f(k)).collect()),
            Indexing::ByConjunction(v) => Indexing::ByConjunction(v.iter().map(|&k| f(k)).collect()),
        };
        SimilarityTable {
            num_components: self.num_components,
            values,
        }
    }

    /// Table divided by the identical-input similarity, so κ(full) = 1.
    pub fn normalized(&self) -> Result<SimilarityTable> {
        let id = self.identical();
        if id <= 0.0 {
            return Err(Error::DegenerateTable(format!("identical-input similarity {id} is not positive")));
        }
        Ok(self.map(|k| k / id))
    }

    /// `(κ(J) − κ(∅)) / (κ(full) − κ(∅))`: how far an overlap sits between
    /// distinct and identical inputs.
    pub fn excess_similarity(&self, j: Conjunction) -> f64 {
        let base = self.kappa(Conjunction::EMPTY);
        (self.kappa(j) - base) / (self.identical() - base)
    }
}

/// κ(∅) = 0 and κ(J) = Σ over non-empty J' ⊆ J of S(J'); identical inputs
/// get similarity 1.
pub fn similarities_from_salience(profile: &SalienceProfile) -> Result<SimilarityTable> {
    profile.validate()?;
    let c = profile.num_components;
    let values = match &profile.values {
        Indexing::BySize(s) => Indexing::BySize(
            (0..=c)
                .map(|k| (1..=k).map(|j| binomial(k, j) * s[j - 1]).sum())
                .collect(),
        ),
        Indexing::ByConjunction(s) => Indexing::ByConjunction(
            Conjunction::all(c)
                .map(|j| j.subsets().skip(1).map(|sub| s[sub.0 as usize]).sum())
                .collect(),
        ),
    };
    Ok(SimilarityTable {
        num_components: c,
        values,
    })
}

/// Unnormalized per-conjunction contributions: `S̄(∅) = κ(∅)`,
/// `S̄(J) = κ(J) − Σ_{J' ⊊ J} S̄(J')`.
pub fn unnormalized_salience(table: &SimilarityTable) -> Indexing {
    let c = table.num_components;
    match &table.values {
        Indexing::BySize(kappa) => {
            let mut bar = Vec::with_capacity(c + 1);
            for k in 0..=c {
                let lower: f64 = (0..k).map(|j| binomial(k, j) * bar[j]).sum();
                bar.push(kappa[k] - lower);
            }
            Indexing::BySize(bar)
        }
        Indexing::ByConjunction(kappa) => {
            let mut bar = vec![0.0; 1 << c];
            // Masks in increasing order visit every proper subset first.
            for j in Conjunction::all(c) {
                let lower: f64 = j
                    .subsets()
                    .filter(|&s| s != j)
                    .map(|s| bar[s.0 as usize])
                    .sum();
                bar[j.0 as usize] = kappa[j.0 as usize] - lower;
            }
            Indexing::ByConjunction(bar)
        }
    }
}

/// Inverse of [`similarities_from_salience`] up to the baseline κ(∅) and the
/// overall scale, which the normalization removes.
///
/// The result may carry negative entries when the table is not the kernel of
/// any representation; it is not re-validated.
pub fn salience_from_similarities(table: &SimilarityTable) -> Result<SalienceProfile> {
    let c = table.num_components;
    let (values, total) = match unnormalized_salience(table) {
        Indexing::BySize(bar) => {
            let total: f64 = (1..=c).map(|k| binomial(c, k) * bar[k]).sum();
            (Indexing::BySize(bar[1..].to_vec()), total)
        }
        Indexing::ByConjunction(mut bar) => {
            bar[0] = 0.0;
            let total: f64 = bar[1..].iter().sum();
            (Indexing::ByConjunction(bar), total)
        }
    };
    let scale = table
        .kappa(Conjunction::full(c))
        .abs()
        .max(table.kappa(Conjunction::EMPTY).abs());
    if !(total.abs() > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateTable(format!(
            "total unnormalized salience {total:e} is zero; saliences are undefined"
        )));
    }
    let values = match values {
        Indexing::BySize(v) => Indexing::BySize(v.into_iter().map(|s| s / total).collect()),
        Indexing::ByConjunction(v) => Indexing::ByConjunction(v.into_iter().map(|s| s / total).collect()),
    };
    Ok(SalienceProfile::unchecked(c, values))
}

/// A kernel matrix over compositional inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub row_inputs: Vec<CompInput>,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.row_inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_inputs.is_empty()
    }
}

fn check_inputs(inputs: &[CompInput], c: usize) -> Result<()> {
    match inputs.iter().find(|z| z.len() != c) {
        Some(z) => Err(Error::MismatchedSpaces { left: z.len(), right: c }),
        None => Ok(()),
    }
}

/// `rows × cols` matrix of κ(overlap). Entries are computed independently,
/// so the parallel build is bit-identical to the sequential one.
pub fn cross_gram(rows: &[CompInput], cols: &[CompInput], table: &SimilarityTable) -> Result<DMatrix<f64>> {
    check_inputs(rows, table.num_components)?;
    check_inputs(cols, table.num_components)?;
    let row_vals: Vec<Vec<f64>> = par::map(rows, |r| {
        cols.iter().map(|c| table.kappa(overlap_unchecked(r, c))).collect()
    });
    Ok(DMatrix::from_fn(rows.len(), cols.len(), |i, j| row_vals[i][j]))
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    if m.is_empty() {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

pub fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    let (min, max) = eigen_range(m);
    if min < -PSD_TOLERANCE * max.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            max_eigenvalue: max,
        });
    }
    Ok(())
}

/// `K[i][j] = κ(overlap(z_i, z_j))`, checked for positive semidefiniteness.
pub fn gram(inputs: &[CompInput], table: &SimilarityTable) -> Result<GramMatrix> {
    let entries = cross_gram(inputs, inputs, table)?;
    check_psd(&entries)?;
    Ok(GramMatrix {
        entries,
        row_inputs: inputs.to_vec(),
    })
}

/// Plain inner products `X·Xᵀ` of representation rows.
pub fn linear_kernel(representation: &DMatrix<f64>) -> DMatrix<f64> {
    representation * representation.transpose()
}

/// Averages kernel entries over pairs `i ≤ j` within each overlap class.
/// Returns per-class sums and counts indexed by conjunction mask.
fn class_averages(kernel: &DMatrix<f64>, inputs: &[CompInput]) -> (Vec<f64>, Vec<usize>) {
    let c = inputs[0].len();
    let mut sums = vec![0.0; 1 << c];
    let mut counts = vec![0usize; 1 << c];
    for i in 0..inputs.len() {
        for j in i..inputs.len() {
            let o = overlap_unchecked(&inputs[i], &inputs[j]).0 as usize;
            sums[o] += kernel[(i, j)];
            counts[o] += 1;
        }
    }
    (sums, counts)
}

fn check_representation(representation: &DMatrix<f64>, inputs: &[CompInput]) -> Result<usize> {
    if representation.nrows() != inputs.len() {
        return Err(Error::Dimension(format!(
            "representation has {} rows for {} inputs",
            representation.nrows(),
            inputs.len()
        )));
    }
    if inputs.len() < 2 {
        return Err(Error::Dimension("need at least two inputs".into()));
    }
    let c = inputs[0].len();
    check_inputs(inputs, c)?;
    Ok(c)
}

/// Average similarity per overlap size, estimated from a representation.
pub fn empirical_similarities(representation: &DMatrix<f64>, inputs: &[CompInput]) -> Result<SimilarityTable> {
    let c = check_representation(representation, inputs)?;
    let (sums, counts) = class_averages(&linear_kernel(representation), inputs);
    let mut ssum = vec![0.0; c + 1];
    let mut scount = vec![0usize; c + 1];
    for j in Conjunction::all(c) {
        ssum[j.len()] += sums[j.0 as usize];
        scount[j.len()] += counts[j.0 as usize];
    }
    if let Some(k) = scount.iter().position(|&n| n == 0) {
        return Err(Error::MissingOverlapClass(format!("overlap size {k}")));
    }
    Ok(SimilarityTable {
        num_components: c,
        values: Indexing::BySize(ssum.iter().zip(&scount).map(|(s, &n)| s / n as f64).collect()),
    })
}

/// Average similarity per overlap set, estimated from a representation.
pub fn empirical_similarities_by_conjunction(
    representation: &DMatrix<f64>,
    inputs: &[CompInput],
) -> Result<SimilarityTable> {
    let c = check_representation(representation, inputs)?;
    let (sums, counts) = class_averages(&linear_kernel(representation), inputs);
    if let Some(m) = counts.iter().position(|&n| n == 0) {
        return Err(Error::MissingOverlapClass(format!("overlap set {:?}", Conjunction(m as u32))));
    }
    Ok(SimilarityTable {
        num_components: c,
        values: Indexing::ByConjunction(sums.iter().zip(&counts).map(|(s, &n)| s / n as f64).collect()),
    })
}

/// Salience per overlap size of a representation (rows = inputs).
pub fn empirical_salience(representation: &DMatrix<f64>, inputs: &[CompInput]) -> Result<SalienceProfile> {
    salience_from_similarities(&empirical_similarities(representation, inputs)?)
}

pub fn empirical_salience_by_conjunction(
    representation: &DMatrix<f64>,
    inputs: &[CompInput],
) -> Result<SalienceProfile> {
    salience_from_similarities(&empirical_similarities_by_conjunction(representation, inputs)?)
}

fn relu_layer_map(u: f64, leak: f64) -> f64 {
    let one_minus = 1.0 - leak;
    one_minus * one_minus / (2.0 * std::f64::consts::PI)
        * ((1.0 - u * u).max(0.0).sqrt() + (std::f64::consts::PI - u.acos()) * u)
        + leak * u
}

/// One infinite-width (leaky) ReLU layer acting on a normalized similarity,
/// `k(u) / k(1)`.
pub fn arccos_step(u: f64, leak: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&leak) {
        return Err(Error::OutOfDomain {
            what: "leak must lie in [0, 1)".into(),
            value: leak,
        });
    }
    if !(u.abs() <= 1.0 + 1e-12) {
        return Err(Error::OutOfDomain {
            what: "normalized similarity must lie in [-1, 1]".into(),
            value: u,
        });
    }
    let u = u.clamp(-1.0, 1.0);
    Ok(relu_layer_map(u, leak) / relu_layer_map(1.0, leak))
}

/// Normalized similarity tables after 0, 1, …, `depth` random layers.
pub fn depth_similarities(profile: &SalienceProfile, depth: usize, leak: f64) -> Result<Vec<SimilarityTable>> {
    let mut table = similarities_from_salience(profile)?.normalized()?;
    let mut out = Vec::with_capacity(depth + 1);
    out.push(table.clone());
    for _ in 0..depth {
        let values = match &table.values {
            Indexing::BySize(v) => Indexing::BySize(v.iter().map(|&u| arccos_step(u, leak)).collect::<Result<_>>()?),
            Indexing::ByConjunction(v) => {
                Indexing::ByConjunction(v.iter().map(|&u| arccos_step(u, leak)).collect::<Result<_>>()?)
            }
        };
        table = SimilarityTable {
            num_components: table.num_components,
            values,
        };
        out.push(table.clone());
    }
    Ok(out)
}

/// Salience after each of 0..=`depth` layers of a random (leaky) ReLU
/// network. Entry 0 is the input profile.
pub fn depth_salience(profile: &SalienceProfile, depth: usize, leak: f64) -> Result<Vec<SalienceProfile>> {
    let tables = depth_similarities(profile, depth, leak)?;
    let mut out = Vec::with_capacity(depth + 1);
    out.push(profile.clone());
    for t in &tables[1..] {
        out.push(salience_from_similarities(t)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn table(v: &[f64]) -> SimilarityTable {
        SimilarityTable::by_size(v.to_vec()).unwrap()
    }

    #[test]
    fn salience_to_similarity_examples() {
        let t = similarities_from_salience(&SalienceProfile::two_component(0.4).unwrap()).unwrap();
        let k: Vec<f64> = (0..=2).map(|k| t.kappa(Conjunction::full(k))).collect();
        assert_abs_diff_eq!(k[0], 0.0);
        assert_abs_diff_eq!(k[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(k[2], 1.0, epsilon = 1e-15);

        for c in 1..=5 {
            let t = similarities_from_salience(&SalienceProfile::multi_hot(c)).unwrap();
            for k in 0..=c {
                assert_abs_diff_eq!(t.kappa(Conjunction::full(k)), k as f64 / c as f64, epsilon = 1e-15);
            }
            let t = similarities_from_salience(&SalienceProfile::pure_conjunctive(c)).unwrap();
            for k in 0..c {
                assert_eq!(t.kappa(Conjunction::full(k)), 0.0);
            }
            assert_eq!(t.identical(), 1.0);
        }
    }

    #[test]
    fn invalid_profiles_rejected() {
        assert!(SalienceProfile::uniform(vec![0.5, 0.5]).is_err());
        assert!(SalienceProfile::uniform(vec![0.6, -0.2]).is_err());
        assert!(SalienceProfile::two_component(0.5).is_ok());
        assert!(SalienceProfile::by_conjunction(2, vec![0.0, 0.3, 0.3]).is_err());
    }

    #[test]
    fn similarity_to_salience_examples() {
        let p = salience_from_similarities(&table(&[0.0, 0.4, 1.0])).unwrap();
        assert_abs_diff_eq!(p.per_size().unwrap()[0], 0.4, epsilon = 1e-15);

        let err = salience_from_similarities(&table(&[0.7, 0.7, 0.7])).unwrap_err();
        assert!(matches!(err, Error::DegenerateTable(_)));

        let p = salience_from_similarities(&table(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0])).unwrap();
        let s = p.per_size().unwrap();
        assert_abs_diff_eq!(s[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn baseline_and_scale_do_not_change_salience() {
        let base = salience_from_similarities(&table(&[0.0, 0.4, 1.0])).unwrap();
        let shifted = salience_from_similarities(&table(&[2.0, 2.8, 4.0])).unwrap();
        assert_abs_diff_eq!(base.get(Conjunction(1)), shifted.get(Conjunction(1)), epsilon = 1e-14);
    }

    #[test]
    fn generalized_round_trip() {
        let p = SalienceProfile::by_conjunction(2, vec![0.0, 0.3, 0.5, 0.2]).unwrap();
        let t = similarities_from_salience(&p).unwrap();
        assert_abs_diff_eq!(t.kappa(Conjunction(1)), 0.3);
        assert_abs_diff_eq!(t.kappa(Conjunction(2)), 0.5);
        assert_abs_diff_eq!(t.kappa(Conjunction(3)), 1.0, epsilon = 1e-15);
        let back = salience_from_similarities(&t).unwrap();
        for j in 1..4 {
            assert_abs_diff_eq!(back.get(Conjunction(j)), p.get(Conjunction(j)), epsilon = 1e-15);
        }
    }

    #[test]
    fn invariance_gram() {
        let k = [0.1, 0.3, 0.9];
        let inputs = vec![CompInput(vec![0, 0]), CompInput(vec![0, 1])];
        let g = gram(&inputs, &table(&k)).unwrap();
        assert_eq!(g.entries, DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 0.3, 0.9]));
        let g = gram(&inputs[..1], &table(&k)).unwrap();
        assert_eq!(g.entries[(0, 0)], 0.9);
    }

    #[test]
    fn non_psd_table_rejected() {
        // partial overlaps more similar than distinct ones, with κ(∅) large
        // and negative: the 2×2 grid has a negative eigenvalue.
        let t = table(&[-1.0, 0.9, 1.0]);
        let s = crate::space::ComponentSpace::new(vec![2, 2]).unwrap();
        let err = gram(&crate::space::enumerate_grid(&s), &t).unwrap_err();
        assert!(matches!(err, Error::NotPsd { .. }));
        assert!(SimilarityTable::by_size(vec![0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn disentangled_gram_is_low_rank() {
        let s = crate::space::ComponentSpace::new(vec![3, 4]).unwrap();
        let grid = crate::space::enumerate_grid(&s);
        let t = similarities_from_salience(&SalienceProfile::two_component(0.5).unwrap()).unwrap();
        let g = gram(&grid, &t).unwrap();
        let rank = g.entries.clone().svd(false, false).rank(1e-9);
        assert!(rank <= 3 + 4, "rank {rank}");
    }

    #[test]
    fn arccos_values() {
        for a in [0.0, 0.2, 0.5, 0.9] {
            assert_eq!(arccos_step(1.0, a).unwrap(), 1.0);
        }
        assert_abs_diff_eq!(arccos_step(0.0, 0.0).unwrap(), 1.0 / std::f64::consts::PI, epsilon = 1e-15);
        assert_abs_diff_eq!(arccos_step(0.3, 0.999999).unwrap(), 0.3, epsilon = 1e-6);
        assert!(arccos_step(1.1, 0.0).is_err());
        assert!(arccos_step(0.5, 1.0).is_err());
        assert!(arccos_step(1.0 + 1e-13, 0.0).is_ok());
        let mut prev = arccos_step(0.0, 0.0).unwrap();
        for i in 1..=100 {
            let cur = arccos_step(i as f64 / 100.0, 0.0).unwrap();
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn depth_zero_is_identity() {
        let p = SalienceProfile::multi_hot(3);
        let traj = depth_salience(&p, 0, 0.0).unwrap();
        assert_eq!(traj, vec![p]);
    }

    #[test]
    fn full_conjunction_salience_grows_with_depth() {
        let traj = depth_salience(&SalienceProfile::multi_hot(3), 64, 0.0).unwrap();
        for w in traj.windows(2) {
            assert!(w[1].get(Conjunction::full(3)) > w[0].get(Conjunction::full(3)));
        }
        // the pair salience rises and then falls again
        let s2: Vec<f64> = traj.iter().map(|p| p.size_salience(2)).collect();
        let peak = s2.iter().cloned().fold(0.0, f64::max);
        assert!(s2[1] < peak && *s2.last().unwrap() < peak);
    }

    #[test]
    fn first_layer_against_hand_computation() {
        // κ = [0, 1/2, 1] → [1/π, k̃(1/2), 1]; k̃(1/2) = (√3/2 + π/3)/π
        let pi = std::f64::consts::PI;
        let k0 = 1.0 / pi;
        let k1 = (3f64.sqrt() / 2.0 + pi / 3.0) / pi;
        let s1 = (k1 - k0) / (2.0 * (k1 - k0) + (1.0 - 2.0 * k1 + k0));
        let traj = depth_salience(&SalienceProfile::multi_hot(2), 1, 0.0).unwrap();
        assert_abs_diff_eq!(traj[1].size_salience(1), s1, epsilon = 1e-14);
    }

    #[test]
    fn empirical_salience_of_multi_hot() {
        let s = crate::space::ComponentSpace::new(vec![2, 3, 2]).unwrap();
        let grid = crate::space::enumerate_grid(&s);
        let x = crate::random_reps::multi_hot(&s, &grid);
        let p = empirical_salience(&x, &grid).unwrap();
        assert_abs_diff_eq!(p.size_salience(1), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.size_salience(2), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.size_salience(3), 0.0, epsilon = 1e-15);

        // duplicating rows leaves the estimate unchanged
        let dup: Vec<CompInput> = grid.iter().flat_map(|z| [z.clone(), z.clone()]).collect();
        let xd = crate::random_reps::multi_hot(&s, &dup);
        let pd = empirical_salience(&xd, &dup).unwrap();
        assert_abs_diff_eq!(pd.size_salience(1), p.size_salience(1), epsilon = 1e-15);
    }

    #[test]
    fn empirical_salience_reports_missing_class() {
        let inputs = vec![CompInput(vec![0, 0]), CompInput(vec![1, 1])];
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let err = empirical_salience(&x, &inputs).unwrap_err();
        assert_eq!(err, Error::MissingOverlapClass("overlap size 1".into()));
    }
}
