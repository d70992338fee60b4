//! Random Gaussian per-conjunction representations and seed-averaged model
//! behavior.
//!
//! Every conjunction instance `(J, z_J)` gets its own random vector; an
//! input is represented by the sum of the vectors of all its conjunction
//! instances. Vectors are generated from a stream keyed by
//! `(seed, J, z_J)`, so a row does not depend on which other inputs are
//! sampled alongside it.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{linear_kernel, SalienceProfile};
use crate::par;
use crate::solver::solve_dual;
use crate::space::{CompInput, ComponentSpace, Conjunction};
use crate::tasks::{CompositionalDataset, Split};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianRepSpec {
    pub space: ComponentSpace,
    pub dim: usize,
    /// Standard deviation per conjunction size, indexed `0..=C`.
    pub sigma: Vec<f64>,
    /// Per-conjunction standard deviations taking precedence over `sigma`.
    #[serde(default)]
    pub overrides: BTreeMap<u32, f64>,
    pub seed: u64,
}

impl GaussianRepSpec {
    /// `sigma_by_size` lists `σ_1, …, σ_C`; `σ_0` is 0.
    pub fn new(space: ComponentSpace, dim: usize, sigma_by_size: &[f64], seed: u64) -> Result<Self> {
        let mut sigma = vec![0.0];
        sigma.extend_from_slice(sigma_by_size);
        let spec = GaussianRepSpec {
            space,
            dim,
            sigma,
            overrides: BTreeMap::new(),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_override(mut self, j: Conjunction, sigma: f64) -> Result<Self> {
        self.overrides.insert(j.0, sigma);
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GaussianRepSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.space.num_components();
        if self.dim == 0 {
            return Err(Error::Dimension("representation dimension must be ≥ 1".into()));
        }
        if self.sigma.len() != c + 1 {
            return Err(Error::Dimension(format!(
                "need σ for conjunction sizes 0..={c}, got {} values",
                self.sigma.len()
            )));
        }
        for (&m, &s) in &self.overrides {
            if m >= 1 << c {
                return Err(Error::Dimension(format!("override mask {m} outside {c} components")));
            }
            check_sigma(s)?;
        }
        self.sigma.iter().try_for_each(|&s| check_sigma(s))
    }

    pub fn sigma_for(&self, j: Conjunction) -> f64 {
        self.overrides.get(&j.0).copied().unwrap_or(self.sigma[j.len()])
    }
}

fn check_sigma(s: f64) -> Result<()> {
    if s >= 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            what: "standard deviations must be finite and ≥ 0".into(),
            value: s,
        })
    }
}

fn instance_rng(seed: u64, j: Conjunction, values: &[usize]) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(j.0.to_le_bytes());
    for v in values {
        h.update((*v as u64).to_le_bytes());
    }
    ChaCha8Rng::from_seed(h.finalize().into())
}

fn instance_vector(spec: &GaussianRepSpec, j: Conjunction, values: &[usize], sigma: f64) -> Vec<f64> {
    let mut rng = instance_rng(spec.seed, j, values);
    (0..spec.dim)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            sigma * g
        })
        .collect()
}

/// Representation matrix with one row per input.
pub fn sample_representation(spec: &GaussianRepSpec, inputs: &[CompInput]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    inputs.iter().try_for_each(|z| spec.space.check(z))?;
    let c = spec.space.num_components();
    let mut cache: BTreeMap<(Conjunction, Vec<usize>), Vec<f64>> = BTreeMap::new();
    let mut x = DMatrix::zeros(inputs.len(), spec.dim);
    for (i, z) in inputs.iter().enumerate() {
        for j in Conjunction::all(c) {
            let s = spec.sigma_for(j);
            if s == 0.0 {
                continue;
            }
            let key = (j, z.restrict(j));
            let v = cache
                .entry(key)
                .or_insert_with_key(|(j, vals)| instance_vector(spec, *j, vals, s));
            for (k, val) in v.iter().enumerate() {
                x[(i, k)] += val;
            }
        }
    }
    Ok(x)
}

/// One-hot code per component, concatenated.
pub fn multi_hot(space: &ComponentSpace, inputs: &[CompInput]) -> DMatrix<f64> {
    let offsets: Vec<usize> = space
        .cardinalities()
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    let width = space.cardinalities().iter().sum();
    let mut x = DMatrix::zeros(inputs.len(), width);
    for (i, z) in inputs.iter().enumerate() {
        for (c, &v) in z.0.iter().enumerate() {
            x[(i, offsets[c] + v)] = 1.0;
        }
    }
    x
}

/// Per-size standard deviations whose expected salience is `profile`:
/// `σ_k = sqrt(S(k;C))`, with `σ_0 = 0`. Exact in expectation for the
/// energy ratio; the realized salience approaches it as `d` grows.
pub fn sigma_for_expected_salience(profile: &SalienceProfile) -> Result<Vec<f64>> {
    let per_size = profile
        .per_size()
        .ok_or_else(|| Error::InvalidProfile("expected a per-size profile".into()))?;
    Ok(per_size.iter().map(|s| s.max(0.0).sqrt()).collect())
}

/// Expected per-size salience `σ_k² / Σ_k binom(C,k)·σ_k²` (with `σ_0 = 0`).
pub fn expected_salience(sigma_by_size: &[f64]) -> Result<SalienceProfile> {
    let c = sigma_by_size.len();
    let energy: f64 = sigma_by_size
        .iter()
        .enumerate()
        .map(|(i, s)| crate::geometry::binomial(c, i + 1) * s * s)
        .sum();
    if !(energy > 0.0) {
        return Err(Error::InvalidProfile("all standard deviations are zero".into()));
    }
    SalienceProfile::uniform(sigma_by_size.iter().map(|s| s * s / energy).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub seed: u64,
    /// Predictions on `dataset.rows()` order, `None` if the seed failed.
    pub predictions: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AveragedBehavior {
    pub runs: Vec<SeedRun>,
    /// Mean prediction per row of `dataset.rows()`.
    pub mean: Vec<f64>,
    /// Standard error of the mean per row; `None` with fewer than two
    /// successful seeds.
    pub std_error: Vec<Option<f64>>,
    pub seeds_used: usize,
}

impl AveragedBehavior {
    pub fn skipped(&self) -> impl Iterator<Item = &SeedRun> {
        self.runs.iter().filter(|r| r.predictions.is_none())
    }
}

/// Fits one model per seed on the empirical Gram matrix of a freshly
/// sampled representation and returns predictions on every dataset row.
pub fn run_seed(spec: &GaussianRepSpec, dataset: &CompositionalDataset) -> Result<Vec<f64>> {
    let inputs: Vec<CompInput> = dataset.rows().map(|(_, e)| e.input.clone()).collect();
    let x = sample_representation(spec, &inputs)?;
    let n_train = dataset.train.len();
    let k = linear_kernel(&x);
    let k_train = k.view((0, 0), (n_train, n_train)).into_owned();
    let a = solve_dual(&k_train, &dataset.train_targets())?;
    let k_all = k.columns(0, n_train);
    let p: DVector<f64> = k_all * a;
    Ok(p.iter().copied().collect())
}

/// Seeds `spec.seed, spec.seed + 1, …` run in parallel. Seeds whose
/// empirical Gram matrix is singular are skipped and reported in `runs`.
pub fn averaged_behavior(
    spec: &GaussianRepSpec,
    dataset: &CompositionalDataset,
    num_seeds: usize,
) -> Result<AveragedBehavior> {
    if num_seeds == 0 {
        return Err(Error::InvalidTask("need at least one seed".into()));
    }
    if spec.space != dataset.space {
        return Err(Error::MismatchedSpaces {
            left: spec.space.num_components(),
            right: dataset.space.num_components(),
        });
    }
    let runs: Vec<SeedRun> = par::map_range(num_seeds, |i| {
        let seed = spec.seed.wrapping_add(i as u64);
        match run_seed(&spec.with_seed(seed), dataset) {
            Ok(p) => SeedRun {
                seed,
                predictions: Some(p),
                error: None,
            },
            Err(e) if e.is_numerical() => SeedRun {
                seed,
                predictions: None,
                error: Some(e.to_string()),
            },
            Err(e) => SeedRun {
                seed,
                predictions: None,
                error: Some(format!("fatal: {e}")),
            },
        }
    });
    if let Some(r) = runs.iter().find(|r| r.error.as_deref().is_some_and(|e| e.starts_with("fatal: "))) {
        return Err(Error::InvalidTask(format!("seed {}: {}", r.seed, r.error.as_ref().unwrap())));
    }
    let ok: Vec<&Vec<f64>> = runs.iter().filter_map(|r| r.predictions.as_ref()).collect();
    if ok.is_empty() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let n = ok.len() as f64;
    let rows = ok[0].len();
    let mean: Vec<f64> = (0..rows).map(|i| ok.iter().map(|p| p[i]).sum::<f64>() / n).collect();
    let std_error = (0..rows)
        .map(|i| {
            (ok.len() >= 2).then(|| {
                let var = ok.iter().map(|p| (p[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            })
        })
        .collect();
    Ok(AveragedBehavior {
        seeds_used: ok.len(),
        runs,
        mean,
        std_error,
    })
}

/// Mean predictions keyed by input, for the analysis functions.
pub fn mean_prediction_map(
    dataset: &CompositionalDataset,
    avg: &AveragedBehavior,
) -> std::collections::HashMap<CompInput, f64> {
    dataset
        .rows()
        .zip(&avg.mean)
        .map(|((_, e), &p)| (e.input.clone(), p))
        .collect()
}

/// Mean accuracy over successful seeds on one split (sign(0) is wrong).
pub fn mean_seed_accuracy(dataset: &CompositionalDataset, avg: &AveragedBehavior, split: Split) -> Option<f64> {
    let idx: Vec<(usize, f64)> = dataset
        .rows()
        .enumerate()
        .filter(|(_, (s, _))| *s == split)
        .map(|(i, (_, e))| (i, e.target))
        .collect();
    if idx.is_empty() {
        return None;
    }
    let accs: Vec<f64> = avg
        .runs
        .iter()
        .filter_map(|r| r.predictions.as_ref())
        .map(|p| {
            idx.iter()
                .filter(|&&(i, y)| p[i] != 0.0 && p[i].signum() == y)
                .count() as f64
                / idx.len() as f64
        })
        .collect();
    (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64)
}
