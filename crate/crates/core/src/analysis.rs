//! Behavioral analysis of arbitrary predictors on compositional datasets.

use std::collections::{BTreeMap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::linear_kernel;
use crate::space::{overlap_unchecked, CompInput, Conjunction};
use crate::tasks::{CompositionalDataset, ContextLayout, Split};

/// Which rows the conjunction-wise additive fit has to explain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdditivitySplit {
    TestOnly,
    TrainAndTest,
}

/// Relative singular-value cutoff for the minimal-norm least-squares fit.
pub const LSTSQ_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ConjunctionCoefficient {
    pub conjunction: Conjunction,
    /// `z_J` in slot order.
    pub values: Vec<usize>,
    pub coefficient: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdditivityReport {
    /// `1 − SS_res/SS_tot`; `None` when the predictions on the split have
    /// zero variance.
    pub r_squared: Option<f64>,
    pub residual_ss: f64,
    pub total_ss: f64,
    pub coefficients: Vec<ConjunctionCoefficient>,
    pub feature_count: usize,
    pub split_used: AdditivitySplit,
    /// The all-ones ∅ feature is never included and no intercept is fit.
    pub intercept_dropped: bool,
}

impl AdditivityReport {
    pub fn is_degenerate(&self) -> bool {
        self.r_squared.is_none()
    }

    pub fn coefficient(&self, j: Conjunction, values: &[usize]) -> Option<f64> {
        self.coefficients
            .iter()
            .find(|c| c.conjunction == j && c.values == values)
            .map(|c| c.coefficient)
    }
}

/// Non-empty conjunction instances `(J, z_J)` seen in the training split,
/// ordered by mask and then by values.
pub fn training_conjunction_instances(dataset: &CompositionalDataset) -> Vec<(Conjunction, Vec<usize>)> {
    let c = dataset.space.num_components();
    let mut out = Vec::new();
    for j in Conjunction::all(c).skip(1) {
        let vals: std::collections::BTreeSet<Vec<usize>> =
            dataset.train.iter().map(|e| e.input.restrict(j)).collect();
        out.extend(vals.into_iter().map(|v| (j, v)));
    }
    out
}

/// Minimal-norm least squares through an SVD with a relative cutoff.
pub fn min_norm_lstsq(x: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if x.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.solve(b, LSTSQ_CUTOFF * smax.max(f64::MIN_POSITIVE))
        .expect("both singular vector sets were computed")
}

/// Fits predictions on a split with one-hot features for every conjunction
/// instance present in the training split.
pub fn additivity(
    predictions: &HashMap<CompInput, f64>,
    dataset: &CompositionalDataset,
    split: AdditivitySplit,
) -> Result<AdditivityReport> {
    let rows: Vec<&CompInput> = match split {
        AdditivitySplit::TestOnly => dataset.test.iter().map(|e| &e.input).collect(),
        AdditivitySplit::TrainAndTest => dataset.rows().map(|(_, e)| &e.input).collect(),
    };
    if rows.is_empty() {
        return Err(Error::DegenerateSplit("no rows to fit".into()));
    }
    let p: Vec<f64> = rows
        .iter()
        .map(|z| {
            predictions
                .get(*z)
                .copied()
                .ok_or_else(|| Error::Dimension(format!("no prediction for {z:?}")))
        })
        .collect::<Result<_>>()?;

    let features = training_conjunction_instances(dataset);
    let index: HashMap<(Conjunction, Vec<usize>), usize> =
        features.iter().cloned().enumerate().map(|(i, f)| (f, i)).collect();
    let c = dataset.space.num_components();
    let mut x = DMatrix::zeros(rows.len(), features.len());
    for (r, z) in rows.iter().enumerate() {
        for j in Conjunction::all(c).skip(1) {
            if let Some(&col) = index.get(&(j, z.restrict(j))) {
                x[(r, col)] = 1.0;
            }
        }
    }
    let b = DVector::from_vec(p.clone());
    let coef = min_norm_lstsq(&x, &b);
    let fitted = &x * &coef;
    let residual_ss: f64 = (&b - fitted).iter().map(|r| r * r).sum();
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    let total_ss: f64 = p.iter().map(|v| (v - mean).powi(2)).sum();
    let scale = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = total_ss <= (1e-12 * scale).powi(2) * p.len() as f64;
    Ok(AdditivityReport {
        r_squared: (!degenerate).then(|| 1.0 - residual_ss / total_ss),
        residual_ss,
        total_ss,
        coefficients: features
            .into_iter()
            .zip(coef.iter())
            .map(|((j, v), &c)| ConjunctionCoefficient {
                conjunction: j,
                values: v,
                coefficient: c,
            })
            .collect(),
        feature_count: x.ncols(),
        split_used: split,
        intercept_dropped: true,
    })
}

/// Collects `(input, prediction)` pairs into a lookup map.
pub fn prediction_map<'a>(pairs: impl IntoIterator<Item = (&'a CompInput, f64)>) -> HashMap<CompInput, f64> {
    pairs.into_iter().map(|(z, p)| (z.clone(), p)).collect()
}

/// Mean absolute coefficient per conjunction group of a context-dependence
/// fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoefficientGroups {
    pub right_conj: f64,
    pub wrong_conj: f64,
    pub sensory_feat: f64,
    pub context_only: f64,
    pub memorization: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientGroup {
    RightConj,
    WrongConj,
    SensoryFeat,
    ContextOnly,
    Memorization,
}

pub fn classify_coefficient(c: &ConjunctionCoefficient, layout: &ContextLayout) -> Option<CoefficientGroup> {
    let co = Conjunction::from_slots(&[layout.context_slot]);
    let f1 = Conjunction::from_slots(&[layout.feature1_slot]);
    let f2 = Conjunction::from_slots(&[layout.feature2_slot]);
    let j = c.conjunction;
    let context_value = || {
        let pos = j.slots().position(|s| s == layout.context_slot).expect("context in J");
        c.values[pos]
    };
    if j == co {
        Some(CoefficientGroup::ContextOnly)
    } else if j == Conjunction(co.0 | f1.0 | f2.0) {
        Some(CoefficientGroup::Memorization)
    } else if j == Conjunction(co.0 | f1.0) {
        Some(if layout.feature1_contexts.contains(&context_value()) {
            CoefficientGroup::RightConj
        } else {
            CoefficientGroup::WrongConj
        })
    } else if j == Conjunction(co.0 | f2.0) {
        Some(if layout.feature2_contexts.contains(&context_value()) {
            CoefficientGroup::RightConj
        } else {
            CoefficientGroup::WrongConj
        })
    } else if !j.is_empty() && j.is_subset_of(Conjunction(f1.0 | f2.0)) {
        Some(CoefficientGroup::SensoryFeat)
    } else {
        None
    }
}

pub fn coefficient_groups(report: &AdditivityReport, layout: &ContextLayout) -> CoefficientGroups {
    let mut acc = [(0.0, 0usize); 5];
    for c in &report.coefficients {
        if let Some(g) = classify_coefficient(c, layout) {
            let slot = &mut acc[g as usize];
            slot.0 += c.coefficient.abs();
            slot.1 += 1;
        }
    }
    let m = |i: usize| if acc[i].1 == 0 { 0.0 } else { acc[i].0 / acc[i].1 as f64 };
    CoefficientGroups {
        right_conj: m(CoefficientGroup::RightConj as usize),
        wrong_conj: m(CoefficientGroup::WrongConj as usize),
        sensory_feat: m(CoefficientGroup::SensoryFeat as usize),
        context_only: m(CoefficientGroup::ContextOnly as usize),
        memorization: m(CoefficientGroup::Memorization as usize),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the line.
    pub residual: f64,
}

/// Least-squares line of prediction against ground truth on a split.
pub fn slope_estimate(
    predictions: &HashMap<CompInput, f64>,
    dataset: &CompositionalDataset,
    split: Split,
) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = dataset
        .split(split)
        .iter()
        .map(|e| {
            predictions
                .get(&e.input)
                .map(|&p| (e.target, p))
                .ok_or_else(|| Error::Dimension(format!("no prediction for {:?}", e.input)))
        })
        .collect::<Result<_>>()?;
    line_fit(&pts)
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn line_fit(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::DegenerateSplit("fewer than two points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateSplit("fewer than two distinct ground-truth values".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (rss / n).sqrt(),
    })
}

/// Fraction of off-diagonal kernel variance left after replacing every
/// entry by the mean of its overlap class.
///
/// Uses the pairs `i < j`; the diagonal is excluded since its magnitude
/// would otherwise dominate the variance of any representation.
pub fn variance_ratio(representation: &DMatrix<f64>, inputs: &[CompInput]) -> Result<f64> {
    if representation.nrows() != inputs.len() || inputs.len() < 2 {
        return Err(Error::Dimension(format!(
            "representation has {} rows for {} inputs (need ≥ 2)",
            representation.nrows(),
            inputs.len()
        )));
    }
    let k = linear_kernel(representation);
    let mut classes: BTreeMap<Conjunction, Vec<f64>> = BTreeMap::new();
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            classes
                .entry(overlap_unchecked(&inputs[i], &inputs[j]))
                .or_default()
                .push(k[(i, j)]);
        }
    }
    let all: Vec<f64> = classes.values().flatten().copied().collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let var = all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if !(var > 0.0) {
        return Err(Error::DegenerateSplit("kernel entries have zero variance".into()));
    }
    let cs: f64 = classes
        .values()
        .map(|vals| {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - m).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        / n;
    Ok(cs / var)
}
