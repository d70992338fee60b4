//! Metric tables over task variants and salience profiles.

use crate::analysis::{additivity, coefficient_groups, prediction_map, slope_estimate, AdditivitySplit};
use crate::error::Result;
use crate::geometry::{similarities_from_salience, SalienceProfile, SimilarityTable};
use crate::par;
use crate::solver::{fit, predict};
use crate::tasks::{CompositionalDataset, ContextLayout, Split, TaskKind};

/// One dataset to evaluate at every salience point.
#[derive(Clone, Debug)]
pub struct SweepCase {
    pub task: String,
    pub variant: String,
    pub dataset: CompositionalDataset,
    /// Adds coefficient-group metrics when set.
    pub layout: Option<ContextLayout>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOptions {
    pub additivity: bool,
    pub coefficient_groups: bool,
    /// Maps the unit-normalized similarity table before fitting.
    pub similarity_scale: f64,
    pub baseline: f64,
}

impl SweepOptions {
    pub fn plain() -> Self {
        SweepOptions {
            similarity_scale: 1.0,
            ..Default::default()
        }
    }

    fn table(&self, profile: &SalienceProfile) -> Result<SimilarityTable> {
        let t = similarities_from_salience(profile)?;
        Ok(t.shifted(self.baseline)?.scaled(self.similarity_scale))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub task: String,
    pub variant: String,
    /// Per-size salience of the evaluated point.
    pub salience: Vec<f64>,
    pub metric: String,
    /// `None` when the metric does not apply (e.g. an empty split).
    pub value: Option<f64>,
    pub seed: Option<u64>,
}

fn evaluate(case: &SweepCase, profile: &SalienceProfile, opts: &SweepOptions) -> Result<Vec<(String, Option<f64>)>> {
    let d = &case.dataset;
    let model = fit(d, &opts.table(profile)?)?;
    let report = predict(&model, d)?;
    let empty_test = d.test.is_empty();
    let mut out: Vec<(String, Option<f64>)> = Vec::new();
    match d.kind {
        TaskKind::Classification => {
            out.push(("test_accuracy".into(), report.accuracy(Split::Test)));
            out.push(("test_ties".into(), (!empty_test).then(|| report.ties(Split::Test) as f64)));
            out.push(("mean_test_margin".into(), report.mean_margin(Split::Test)));
            out.push(("min_test_margin".into(), report.min_margin(Split::Test)));
        }
        TaskKind::Regression => {
            let preds = prediction_map(report.rows.iter().map(|r| (&r.input, r.predicted)));
            let line = slope_estimate(&preds, d, Split::Test).ok();
            out.push(("test_slope".into(), line.map(|l| l.slope)));
            out.push(("test_intercept".into(), line.map(|l| l.intercept)));
            out.push(("test_mse".into(), report.mse(Split::Test)));
        }
    }
    if opts.additivity || opts.coefficient_groups {
        let preds = prediction_map(report.rows.iter().map(|r| (&r.input, r.predicted)));
        if opts.additivity {
            let test = additivity(&preds, d, AdditivitySplit::TestOnly).ok().and_then(|r| r.r_squared);
            out.push(("additivity_r2_test".into(), test));
        }
        let joint = additivity(&preds, d, AdditivitySplit::TrainAndTest)?;
        if opts.additivity {
            out.push(("additivity_r2_joint".into(), joint.r_squared));
        }
        if let (true, Some(layout)) = (opts.coefficient_groups, &case.layout) {
            let g = coefficient_groups(&joint, layout);
            out.push(("group_right_conj".into(), Some(g.right_conj)));
            out.push(("group_wrong_conj".into(), Some(g.wrong_conj)));
            out.push(("group_sensory_feat".into(), Some(g.sensory_feat)));
            out.push(("group_context_only".into(), Some(g.context_only)));
            out.push(("group_memorization".into(), Some(g.memorization)));
        }
    }
    Ok(out)
}

fn per_size(profile: &SalienceProfile) -> Vec<f64> {
    (1..=profile.num_components()).map(|k| profile.size_salience(k)).collect()
}

/// Evaluates every case at every profile. Points run in parallel; rows come
/// back ordered by case, then profile, then metric.
pub fn sweep(cases: &[SweepCase], profiles: &[SalienceProfile], opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let points: Vec<(usize, usize)> = (0..cases.len())
        .flat_map(|c| (0..profiles.len()).map(move |p| (c, p)))
        .collect();
    let results = par::map(&points, |&(c, p)| evaluate(&cases[c], &profiles[p], opts));
    let mut rows = Vec::new();
    for (&(c, p), metrics) in points.iter().zip(results) {
        let salience = per_size(&profiles[p]);
        for (metric, value) in metrics? {
            rows.push(SweepRow {
                task: cases[c].task.clone(),
                variant: cases[c].variant.clone(),
                salience: salience.clone(),
                metric,
                value,
                seed: None,
            });
        }
    }
    Ok(rows)
}

/// Picks `metric` values for one case, in profile order.
pub fn metric_values<'a>(rows: &'a [SweepRow], variant: &'a str, metric: &'a str) -> impl Iterator<Item = &'a SweepRow> {
    rows.iter().filter(move |r| r.variant == variant && r.metric == metric)
}

/// Uniform profiles on a grid: `S(k;C) = i_k·step` for `k < C` with every
/// `i_k ≥ 1`, and `S(C;C)` taking the remainder (≥ 0).
pub fn salience_grid(num_components: usize, step: f64) -> Result<Vec<SalienceProfile>> {
    use crate::error::Error;
    if num_components < 2 || !(step > 0.0 && step < 1.0) {
        return Err(Error::InvalidProfile("grid needs C ≥ 2 and 0 < step < 1".into()));
    }
    let c = num_components;
    let binom: Vec<f64> = (1..=c).map(|k| crate::geometry::binomial(c, k)).collect();
    let max_i = (1.0 / step).floor() as usize + 1;
    let mut out = Vec::new();
    let mut idx = vec![1usize; c - 1];
    loop {
        let partial: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
        let used: f64 = partial.iter().zip(&binom).map(|(s, b)| s * b).sum();
        let rest = 1.0 - used;
        if rest >= -1e-12 {
            let mut v = partial;
            v.push(rest.max(0.0) / binom[c - 1]);
            out.push(SalienceProfile::uniform(v)?);
        }
        // odometer over the c − 1 free sizes, first index slowest
        let mut pos = c - 1;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] <= max_i {
                for i in &mut idx[pos + 1..] {
                    *i = 1;
                }
                break;
            }
            idx[pos] = 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::*;

    #[test]
    fn grid_sizes() {
        let g = salience_grid(2, 0.05).unwrap();
        assert_eq!(g.len(), 10);
        assert!((g[9].size_salience(1) - 0.5).abs() < 1e-12);
        assert!(g[9].size_salience(2).abs() < 1e-12);
        let g = salience_grid(3, 0.02).unwrap();
        assert_eq!(g.len(), 120);
        assert!(g.iter().all(|p| p.size_salience(3) > 0.0));
        assert!(salience_grid(1, 0.1).is_err());
    }

    #[test]
    fn cd3_accuracy_is_all_or_nothing() {
        let cases: Vec<SweepCase> = CdVariant::ALL
            .iter()
            .map(|&v| SweepCase {
                task: "context_dependence".into(),
                variant: v.name().into(),
                dataset: gen_context_dependence(v),
                layout: Some(context_dependence_layout()),
            })
            .collect();
        let grid = salience_grid(3, 0.04).unwrap();
        let rows = sweep(&cases, &grid, &SweepOptions::plain()).unwrap();
        let acc: Vec<f64> = metric_values(&rows, "CD3", "test_accuracy").map(|r| r.value.unwrap()).collect();
        assert_eq!(acc.len(), grid.len());
        assert!(acc.iter().all(|&a| a == 0.0 || a == 1.0));
        let cd1 = metric_values(&rows, "CD1", "test_accuracy").filter(|r| r.value == Some(1.0)).count();
        let cd3 = acc.iter().filter(|&&a| a == 1.0).count();
        assert!(cd1 > cd3);
    }

    #[test]
    fn rows_are_deterministic_and_ordered() {
        let v: Vec<f64> = (-4..=4).map(f64::from).collect();
        let cases = vec![SweepCase {
            task: "symbolic_addition".into(),
            variant: "p=1".into(),
            dataset: gen_symbolic_addition(&v, &[0.0]).unwrap(),
            layout: None,
        }];
        let grid = salience_grid(2, 0.1).unwrap();
        let opts = SweepOptions {
            additivity: true,
            ..SweepOptions::plain()
        };
        let a = sweep(&cases, &grid, &opts).unwrap();
        let b = par::with_threads(1, || sweep(&cases, &grid, &opts).unwrap());
        assert_eq!(a, b);
        let slopes: Vec<f64> = metric_values(&a, "p=1", "test_slope").map(|r| r.value.unwrap()).collect();
        for (p, s) in grid.iter().zip(&slopes) {
            let m = crate::oracles::addition_slope(p.size_salience(1), 1).unwrap();
            assert!((m - s).abs() < 1e-6);
        }
        let r2 = metric_values(&a, "p=1", "additivity_r2_test");
        assert!(r2.into_iter().all(|r| r.value.unwrap() > 1.0 - 1e-8));
    }

    #[test]
    fn empty_test_split_is_not_applicable() {
        let cases = vec![SweepCase {
            task: "symbolic_addition".into(),
            variant: "all".into(),
            dataset: gen_symbolic_addition(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap(),
            layout: None,
        }];
        let rows = sweep(&cases, &[SalienceProfile::two_component(0.3).unwrap()], &SweepOptions::plain()).unwrap();
        assert!(rows.iter().all(|r| r.value.is_none()));
        let cases = vec![SweepCase {
            task: "transitive_equivalence".into(),
            variant: "none".into(),
            dataset: gen_transitive_equivalence(3, 2, &[], None).unwrap(),
            layout: None,
        }];
        let rows = sweep(&cases, &[SalienceProfile::two_component(0.3).unwrap()], &SweepOptions::plain()).unwrap();
        assert!(rows.iter().all(|r| r.value.is_none()));
    }
}
