//! Minimal-norm kernel interpolation in dual form.
//!
//! A fitted model predicts `f(x) = Σ_i a_i·κ(overlap(x, x_i))` with dual
//! coefficients `a = K⁻¹y`, the dual of the minimal ℓ2-norm readout that
//! interpolates the training targets.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{cross_gram, eigen_range, gram, SimilarityTable};
use crate::space::CompInput;
use crate::tasks::{CompositionalDataset, Split, TaskKind};

/// Diagonal jitter relative to `trace(K)/n`.
pub const JITTER: f64 = 1e-12;

/// Maximum train residual relative to `max|y|`.
pub const INTERPOLATION_TOLERANCE: f64 = 1e-8;

const REFINEMENT_STEPS: usize = 3;

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn condition_estimate(k: &DMatrix<f64>) -> f64 {
    let (min, max) = eigen_range(k);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `K a = y` for a symmetric PSD kernel.
///
/// `K + εI` with `ε = JITTER·trace(K)/n` is Cholesky-factored; a few steps
/// of iterative refinement against the unperturbed `K` follow. Fails with
/// [`Error::Singular`] when the factorization breaks down or the train
/// residual stays above `INTERPOLATION_TOLERANCE·max|y|`.
pub fn solve_dual(k: &DMatrix<f64>, targets: &[f64]) -> Result<DVector<f64>> {
    let n = k.nrows();
    if k.ncols() != n || targets.len() != n {
        return Err(Error::Dimension(format!(
            "kernel is {}×{} but there are {} targets",
            k.nrows(),
            k.ncols(),
            targets.len()
        )));
    }
    if n == 0 {
        return Ok(DVector::zeros(0));
    }
    let y = DVector::from_column_slice(targets);
    let trace = k.trace();
    if !(trace > 0.0) {
        return Err(Error::Singular {
            condition: f64::INFINITY,
        });
    }
    let eps = JITTER * trace / n as f64;
    let mut jittered = k.clone();
    for i in 0..n {
        jittered[(i, i)] += eps;
    }
    let chol = Cholesky::new(jittered).ok_or_else(|| Error::Singular {
        condition: condition_estimate(k),
    })?;
    let tol = INTERPOLATION_TOLERANCE * max_abs(targets.iter().copied());
    let mut a = chol.solve(&y);
    let mut residual = &y - k * &a;
    // Refinement removes the bias the jitter introduces; a step is kept only
    // if it lowers the residual.
    for _ in 0..REFINEMENT_STEPS {
        let r = max_abs(residual.iter().copied());
        if r == 0.0 {
            break;
        }
        let next = &a + chol.solve(&residual);
        let next_residual = &y - k * &next;
        if max_abs(next_residual.iter().copied()) >= r {
            break;
        }
        a = next;
        residual = next_residual;
    }
    if !(max_abs(residual.iter().copied()) <= tol) {
        return Err(Error::Singular {
            condition: condition_estimate(k),
        });
    }
    Ok(a)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelModel {
    pub train_inputs: Vec<CompInput>,
    pub dual_coeffs: DVector<f64>,
    pub table: SimilarityTable,
}

impl KernelModel {
    pub fn predict_one(&self, z: &CompInput) -> f64 {
        self.train_inputs
            .iter()
            .zip(self.dual_coeffs.iter())
            .map(|(t, a)| a * self.table.kappa(crate::space::overlap_unchecked(z, t)))
            .sum()
    }

    /// Predictions for arbitrary inputs of the model's space.
    pub fn predict_values(&self, inputs: &[CompInput]) -> Result<Vec<f64>> {
        let kx = cross_gram(inputs, &self.train_inputs, &self.table)?;
        Ok((kx * &self.dual_coeffs).iter().copied().collect())
    }
}

/// Fits the minimal-norm interpolant of the training split.
pub fn fit(dataset: &CompositionalDataset, table: &SimilarityTable) -> Result<KernelModel> {
    if table.num_components() != dataset.space.num_components() {
        return Err(Error::MismatchedSpaces {
            left: table.num_components(),
            right: dataset.space.num_components(),
        });
    }
    let inputs = dataset.train_inputs();
    let g = gram(&inputs, table)?;
    let a = solve_dual(&g.entries, &dataset.train_targets())?;
    Ok(KernelModel {
        train_inputs: inputs,
        dual_coeffs: a,
        table: table.clone(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRow {
    pub input: CompInput,
    pub split: Split,
    pub predicted: f64,
    pub truth: f64,
    /// `y·ŷ`, classification only.
    pub margin: Option<f64>,
    /// `(ŷ − y)²`, regression only.
    pub squared_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictionReport {
    pub kind: TaskKind,
    pub rows: Vec<PredictionRow>,
}

impl PredictionReport {
    pub fn from_predictions(dataset: &CompositionalDataset, predicted: &[f64]) -> Result<Self> {
        let n = dataset.train.len() + dataset.test.len();
        if predicted.len() != n {
            return Err(Error::Dimension(format!("{} predictions for {n} rows", predicted.len())));
        }
        let rows = dataset
            .rows()
            .zip(predicted)
            .map(|((split, ex), &p)| PredictionRow {
                input: ex.input.clone(),
                split,
                predicted: p,
                truth: ex.target,
                margin: (dataset.kind == TaskKind::Classification).then(|| ex.target * p),
                squared_error: (dataset.kind == TaskKind::Regression).then(|| (p - ex.target).powi(2)),
            })
            .collect();
        Ok(PredictionReport {
            kind: dataset.kind,
            rows,
        })
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &PredictionRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn predictions(&self, split: Split) -> Vec<f64> {
        self.split(split).map(|r| r.predicted).collect()
    }

    /// Fraction with `sign(ŷ) = y`; a zero prediction counts as incorrect.
    /// `None` for an empty split or a regression task.
    pub fn accuracy(&self, split: Split) -> Option<f64> {
        if self.kind != TaskKind::Classification {
            return None;
        }
        let (hits, n) = self.split(split).fold((0usize, 0usize), |(h, n), r| {
            let hit = r.predicted != 0.0 && r.predicted.signum() == r.truth;
            (h + hit as usize, n + 1)
        });
        (n > 0).then(|| hits as f64 / n as f64)
    }

    /// Number of exact zero predictions on a split.
    pub fn ties(&self, split: Split) -> usize {
        self.split(split).filter(|r| r.predicted == 0.0).count()
    }

    pub fn mean_margin(&self, split: Split) -> Option<f64> {
        mean(self.split(split).filter_map(|r| r.margin))
    }

    pub fn min_margin(&self, split: Split) -> Option<f64> {
        self.split(split).filter_map(|r| r.margin).reduce(f64::min)
    }

    pub fn mse(&self, split: Split) -> Option<f64> {
        mean(self.split(split).filter_map(|r| r.squared_error))
    }
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Predictions on both splits of a dataset.
pub fn predict(model: &KernelModel, dataset: &CompositionalDataset) -> Result<PredictionReport> {
    let inputs: Vec<CompInput> = dataset.rows().map(|(_, e)| e.input.clone()).collect();
    let values = model.predict_values(&inputs)?;
    PredictionReport::from_predictions(dataset, &values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{similarities_from_salience, SalienceProfile};
    use crate::tasks::*;
    use approx::assert_abs_diff_eq;

    fn kappa(v: &[f64]) -> SimilarityTable {
        SimilarityTable::by_size(v.to_vec()).unwrap()
    }

    #[test]
    fn invariance_dual_coefficients() {
        let (k1, k2) = (0.3, 0.8);
        let m = fit(&gen_invariance(), &kappa(&[0.0, k1, k2])).unwrap();
        let want = (k2 + k1) / (k2 * k2 - k1 * k1);
        assert_abs_diff_eq!(m.dual_coeffs[0], want, epsilon = 1e-12);
        assert_abs_diff_eq!(m.dual_coeffs[1], -want, epsilon = 1e-12);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let s = crate::space::ComponentSpace::new(vec![2, 2]).unwrap();
        let train = crate::space::enumerate_grid(&s)
            .into_iter()
            .map(|z| Example::new(z, 0.0))
            .collect();
        let d = CompositionalDataset::new(s, train, vec![], TaskKind::Regression).unwrap();
        let m = fit(&d, &kappa(&[0.0, 0.4, 1.0])).unwrap();
        assert!(m.dual_coeffs.iter().all(|&a| a == 0.0));
        assert!(predict(&m, &d).unwrap().rows.iter().all(|r| r.predicted == 0.0));
    }

    #[test]
    fn identity_kernel_returns_targets() {
        let d = gen_context_dependence(CdVariant::Cd2);
        let t = similarities_from_salience(&SalienceProfile::pure_conjunctive(3)).unwrap();
        let m = fit(&d, &t).unwrap();
        for (a, e) in m.dual_coeffs.iter().zip(&d.train) {
            assert_eq!(*a, e.target);
        }
    }

    #[test]
    fn invariance_margin_closed_form() {
        for s1 in [0.1, 0.25, 0.4, 0.5] {
            let t = similarities_from_salience(&SalienceProfile::two_component(s1).unwrap()).unwrap();
            let r = predict(&fit(&gen_invariance(), &t).unwrap(), &gen_invariance()).unwrap();
            for row in r.split(Split::Test) {
                assert_abs_diff_eq!(row.margin.unwrap(), s1 / (1.0 - s1), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn partial_exposure_margin_from_hand_solved_system() {
        // K = [[1,.4,.4],[.4,1,0],[.4,0,1]], y = (1,−1,1): a₁ = 1/0.68,
        // a₂ = −1 − 0.4a₁, a₃ = 1 − 0.4a₁, ŷ(1,1) = 0.4(a₂ + a₃).
        let t = kappa(&[0.0, 0.4, 1.0]);
        let d = gen_partial_exposure();
        let r = predict(&fit(&d, &t).unwrap(), &d).unwrap();
        let m = r.split(Split::Test).next().unwrap().margin.unwrap();
        assert_abs_diff_eq!(m, 0.32 / 0.68, epsilon = 1e-12);
        // same decision under the κ₀ = 0, κ₁ = 1, κ₂ = 1/S parameterization
        let r2 = predict(&fit(&d, &kappa(&[0.0, 1.0, 2.5])).unwrap(), &d).unwrap();
        assert_abs_diff_eq!(r2.split(Split::Test).next().unwrap().margin.unwrap(), m, epsilon = 1e-12);
    }

    #[test]
    fn train_margins_interpolate() {
        let t = similarities_from_salience(&SalienceProfile::three_component(0.1, 0.15).unwrap()).unwrap();
        let d = gen_context_dependence(CdVariant::Cd3);
        let r = predict(&fit(&d, &t).unwrap(), &d).unwrap();
        assert!(r.split(Split::Train).all(|row| row.margin.unwrap() >= 1.0 - 1e-8));
        assert_eq!(r.accuracy(Split::Train), Some(1.0));
    }

    #[test]
    fn accuracy_conventions() {
        let d = gen_invariance();
        let r = PredictionReport::from_predictions(&d, &[1.0, -1.0, 0.0, -0.5]).unwrap();
        assert_eq!(r.accuracy(Split::Test), Some(0.5));
        assert_eq!(r.ties(Split::Test), 1);
        let empty = gen_symbolic_addition(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        let r = PredictionReport::from_predictions(&empty, &[0.0; 4]).unwrap();
        assert_eq!(r.mse(Split::Test), None);
        assert_eq!(r.accuracy(Split::Train), None);
    }

    #[test]
    fn singular_kernel_reported() {
        // a purely component-wise kernel cannot interpolate XOR on the full grid
        let d = gen_logical_op(LogicalOp::Xor, &[true, false], &[]).unwrap();
        let t = similarities_from_salience(&SalienceProfile::two_component(0.5).unwrap()).unwrap();
        let err = fit(&d, &t).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }), "{err:?}");
    }

    #[test]
    fn addition_symmetry_of_dual_coefficients() {
        let v: Vec<f64> = (-3..=3).map(f64::from).collect();
        let d = gen_symbolic_addition(&v, &[-1.0, 1.0]).unwrap();
        let t = similarities_from_salience(&SalienceProfile::two_component(0.3).unwrap()).unwrap();
        let m = fit(&d, &t).unwrap();
        for (i, z) in m.train_inputs.iter().enumerate() {
            let swapped = CompInput(vec![z.0[1], z.0[0]]);
            let j = m.train_inputs.iter().position(|x| *x == swapped).unwrap();
            assert_abs_diff_eq!(m.dual_coeffs[i], m.dual_coeffs[j], epsilon = 1e-8);
        }
    }
}
