//! Experiment configs and reproducible runs.
//!
//! A config names one or more tasks, a geometry (explicit salience
//! profiles, a salience grid, depth-recursion profiles or random Gaussian
//! representations) and analysis toggles. [`run`] writes CSVs, optional SVG
//! plots derived from those CSVs, and a manifest of SHA-256 hashes written
//! last.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{additivity, prediction_map, slope_estimate, AdditivitySplit};
use crate::error::{Error, Result};
use crate::geometry::{depth_salience, SalienceProfile};
use crate::io::{fmt_num, fmt_opt};
use crate::random_reps::{averaged_behavior, expected_salience, mean_seed_accuracy, sigma_for_expected_salience, GaussianRepSpec};
use crate::solver::PredictionReport;
use crate::space::Conjunction;
use crate::sweep::{salience_grid, sweep, SweepCase, SweepOptions, SweepRow};
use crate::tasks::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub tasks: Vec<TaskSpec>,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

fn default_items_per_class() -> usize {
    3
}

fn default_num_classes() -> usize {
    2
}

fn default_distance() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    SymbolicAddition {
        values: Vec<f64>,
        anchors: Vec<f64>,
        #[serde(default)]
        variant: Option<String>,
    },
    Arithmetic {
        values: Vec<f64>,
        anchors: Vec<f64>,
        op: ArithmeticOp,
        #[serde(default)]
        variant: Option<String>,
    },
    ContextDependence {
        variant: CdVariant,
    },
    ContextRuleTransfer {},
    TransitiveEquivalence {
        #[serde(default = "default_items_per_class")]
        items_per_class: usize,
        #[serde(default = "default_num_classes")]
        num_classes: usize,
        #[serde(default)]
        held_out: Option<Vec<(usize, usize)>>,
        #[serde(default)]
        class_seed: Option<u64>,
    },
    TransitiveOrdering {
        num_items: usize,
        #[serde(default = "default_distance")]
        max_distance: usize,
    },
    LogicalOp {
        op: LogicalOp,
        truth: Vec<bool>,
        #[serde(default)]
        held_out: Vec<(usize, usize)>,
    },
    Invariance {},
    PartialExposure {},
}

/// A generated dataset with the labels used in output rows.
#[derive(Clone, Debug)]
pub struct BuiltTask {
    pub task: String,
    pub variant: String,
    pub dataset: CompositionalDataset,
    pub layout: Option<ContextLayout>,
}

impl TaskSpec {
    pub fn build(&self) -> Result<BuiltTask> {
        let built = |task: &str, variant: String, dataset, layout| BuiltTask {
            task: task.into(),
            variant,
            dataset,
            layout,
        };
        let anchor_label = |a: &[f64]| format!("p={}", a.len());
        Ok(match self {
            TaskSpec::SymbolicAddition { values, anchors, variant } => built(
                "symbolic_addition",
                variant.clone().unwrap_or_else(|| anchor_label(anchors)),
                gen_symbolic_addition(values, anchors)?,
                None,
            ),
            TaskSpec::Arithmetic {
                values,
                anchors,
                op,
                variant,
            } => built(
                "arithmetic",
                variant.clone().unwrap_or_else(|| format!("{op:?}").to_lowercase()),
                gen_arithmetic(values, anchors, *op)?,
                None,
            ),
            TaskSpec::ContextDependence { variant } => built(
                "context_dependence",
                variant.name().into(),
                gen_context_dependence(*variant),
                Some(context_dependence_layout()),
            ),
            TaskSpec::ContextRuleTransfer {} => built(
                "context_rule_transfer",
                "default".into(),
                gen_context_rule_transfer(),
                Some(context_rule_transfer_layout()),
            ),
            TaskSpec::TransitiveEquivalence {
                items_per_class,
                num_classes,
                held_out,
                class_seed,
            } => {
                let held = held_out
                    .clone()
                    .unwrap_or_else(|| default_equivalence_held_out(*items_per_class, *num_classes));
                built(
                    "transitive_equivalence",
                    class_seed.map_or_else(|| "identity".to_string(), |s| format!("classes_seed={s}")),
                    gen_transitive_equivalence(*items_per_class, *num_classes, &held, *class_seed)?,
                    None,
                )
            }
            TaskSpec::TransitiveOrdering { num_items, max_distance } => built(
                "transitive_ordering",
                format!("n={num_items} d={max_distance}"),
                gen_transitive_ordering(*num_items, OrderingSplit::WithinDistance(*max_distance))?,
                None,
            ),
            TaskSpec::LogicalOp { op, truth, held_out } => built(
                "logical_op",
                format!("{op:?}").to_lowercase(),
                gen_logical_op(*op, truth, held_out)?,
                None,
            ),
            TaskSpec::Invariance {} => built("invariance", "default".into(), gen_invariance(), None),
            TaskSpec::PartialExposure {} => built("partial_exposure", "default".into(), gen_partial_exposure(), None),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    /// Explicit per-size profiles `[S(1;C), …, S(C;C)]`.
    Salience { profiles: Vec<Vec<f64>> },
    /// All per-size profiles on a grid, see [`salience_grid`].
    Grid { components: usize, step: f64 },
    /// Multi-hot input passed through `depth` random (leaky) ReLU layers.
    Depth {
        components: usize,
        leak: f64,
        depths: Vec<usize>,
    },
    /// Seed-averaged models on random Gaussian representations.
    Random {
        dim: usize,
        seeds: usize,
        /// Explicit `σ_1, …, σ_C`.
        #[serde(default)]
        sigma: Option<Vec<f64>>,
        /// Expected per-size profiles, converted to σ.
        #[serde(default)]
        expected_salience: Option<Vec<Vec<f64>>>,
        /// Per-conjunction σ keyed by comma-separated slots, e.g. `"0,2"`.
        #[serde(default)]
        overrides: BTreeMap<String, f64>,
    },
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Multiplies every similarity; decisions are invariant to it.
    #[serde(default = "default_scale")]
    pub similarity_scale: f64,
    /// Constant added to every similarity before scaling.
    #[serde(default)]
    pub baseline: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            similarity_scale: 1.0,
            baseline: 0.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default)]
    pub additivity: bool,
    #[serde(default)]
    pub coefficient_groups: bool,
}

/// Parses a TOML config, reporting the dotted path of a bad key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
        path: "<root>".into(),
        message: e.to_string(),
    })?;
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path: if path == "." { "<root>".into() } else { path },
            message: e.into_inner().message().trim().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn parse_slots(key: &str) -> Result<Conjunction> {
    let slots = key
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Config {
            path: format!("geometry.overrides.{key}"),
            message: "expected comma-separated slot indices".into(),
        })?;
    Ok(Conjunction::from_slots(&slots))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| {
            Err(Error::Config {
                path: path.into(),
                message: message.into(),
            })
        };
        if self.tasks.is_empty() {
            return bad("tasks", "at least one task is required");
        }
        match &self.geometry {
            GeometrySpec::Salience { profiles } if profiles.is_empty() => {
                return bad("geometry.profiles", "at least one profile is required")
            }
            GeometrySpec::Depth { depths, .. } if depths.is_empty() => {
                return bad("geometry.depths", "at least one depth is required")
            }
            GeometrySpec::Random {
                sigma,
                expected_salience,
                seeds,
                overrides,
                ..
            } => {
                if sigma.is_some() == expected_salience.is_some() {
                    return bad("geometry", "give exactly one of `sigma` and `expected_salience`");
                }
                if *seeds == 0 {
                    return bad("geometry.seeds", "at least one seed is required");
                }
                for k in overrides.keys() {
                    parse_slots(k)?;
                }
            }
            _ => {}
        }
        if !(self.solver.similarity_scale > 0.0) {
            return bad("solver.similarity_scale", "must be positive");
        }
        Ok(())
    }

    /// Salience profiles for the kernel geometries; `None` for random
    /// representations.
    pub fn profiles(&self) -> Result<Option<Vec<SalienceProfile>>> {
        Ok(Some(match &self.geometry {
            GeometrySpec::Salience { profiles } => profiles
                .iter()
                .map(|p| SalienceProfile::uniform(p.clone()))
                .collect::<Result<_>>()?,
            GeometrySpec::Grid { components, step } => salience_grid(*components, *step)?,
            GeometrySpec::Depth { components, leak, depths } => {
                let max = depths.iter().copied().max().unwrap_or(0);
                let traj = depth_salience(&SalienceProfile::multi_hot(*components), max, *leak)?;
                depths.iter().map(|&l| traj[l].clone()).collect()
            }
            GeometrySpec::Random { .. } => return Ok(None),
        }))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub plots: bool,
}

/// Files written by a run, with their SHA-256 digests, in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub files: Vec<(String, String)>,
    pub rows: Vec<SweepRow>,
    /// Seeds skipped because their empirical Gram matrix was singular.
    pub skipped_seeds: Vec<(String, u64, String)>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct Bundle {
    dir: PathBuf,
    files: BTreeMap<String, Vec<u8>>,
}

impl Bundle {
    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.insert(name.to_string(), bytes);
    }

    fn write(self) -> Result<Vec<(String, String)>> {
        fs::create_dir_all(&self.dir)?;
        let mut manifest = Vec::new();
        for (name, bytes) in &self.files {
            fs::write(self.dir.join(name), bytes)?;
            manifest.push((name.clone(), sha256_hex(bytes), bytes.len()));
        }
        let mut buf = Vec::new();
        crate::io::write_table_rows(
            &mut buf,
            &["file", "bytes", "sha256"],
            manifest.iter().map(|(n, h, b)| vec![n.clone(), b.to_string(), h.clone()]),
        )?;
        fs::write(self.dir.join("manifest.csv"), buf)?;
        Ok(manifest.into_iter().map(|(n, h, _)| (n, h)).collect())
    }
}

/// Header `task,variant,s_1..s_K,metric,value,seed`.
pub fn write_sweep_rows<W: std::io::Write>(w: W, rows: &[SweepRow]) -> Result<()> {
    let k = rows.iter().map(|r| r.salience.len()).max().unwrap_or(0);
    let mut header = vec!["task".to_string(), "variant".to_string()];
    header.extend((1..=k).map(|i| format!("s_{i}")));
    header.extend(["metric", "value", "seed"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    crate::io::write_table_rows(
        w,
        &header,
        rows.iter().map(|r| {
            let mut f = vec![r.task.clone(), r.variant.clone()];
            f.extend((0..k).map(|i| r.salience.get(i).map_or_else(String::new, |s| fmt_num(*s))));
            f.push(r.metric.clone());
            f.push(fmt_opt(r.value));
            f.push(r.seed.map_or_else(String::new, |s| s.to_string()));
            f
        }),
    )
}

fn tuple_label(z: &crate::space::CompInput) -> String {
    z.0.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

struct RandomOutputs {
    rows: Vec<SweepRow>,
    per_seed: Vec<Vec<String>>,
    aggregate: Vec<Vec<String>>,
    skipped: Vec<(String, u64, String)>,
}

fn run_random(cfg: &ExperimentConfig, tasks: &[BuiltTask]) -> Result<RandomOutputs> {
    let GeometrySpec::Random {
        dim,
        seeds,
        sigma,
        expected_salience: expected,
        overrides,
    } = &cfg.geometry
    else {
        unreachable!("random geometry");
    };
    let sigmas: Vec<Vec<f64>> = match (sigma, expected) {
        (Some(s), _) => vec![s.clone()],
        (_, Some(ps)) => ps
            .iter()
            .map(|p| sigma_for_expected_salience(&SalienceProfile::uniform(p.clone())?))
            .collect::<Result<_>>()?,
        _ => unreachable!("validated"),
    };
    let mut out = RandomOutputs {
        rows: Vec::new(),
        per_seed: Vec::new(),
        aggregate: Vec::new(),
        skipped: Vec::new(),
    };
    for t in tasks {
        let d = &t.dataset;
        for (point, sig) in sigmas.iter().enumerate() {
            let mut spec = GaussianRepSpec::new(d.space.clone(), *dim, sig, cfg.seed)?;
            for (k, v) in overrides {
                spec = spec.with_override(parse_slots(k)?, *v)?;
            }
            let salience: Vec<f64> = {
                let e = expected_salience(sig)?;
                (1..=sig.len()).map(|k| e.size_salience(k)).collect()
            };
            let avg = match averaged_behavior(&spec, d, *seeds) {
                Ok(a) => a,
                Err(e) if e.is_numerical() => {
                    out.skipped.push((t.variant.clone(), cfg.seed, format!("all {seeds} seeds: {e}")));
                    out.rows.push(SweepRow {
                        task: t.task.clone(),
                        variant: t.variant.clone(),
                        salience: salience.clone(),
                        metric: "seeds_used".into(),
                        value: Some(0.0),
                        seed: None,
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            for r in avg.skipped() {
                out.skipped.push((t.variant.clone(), r.seed, r.error.clone().unwrap_or_default()));
            }
            let preds = crate::random_reps::mean_prediction_map(d, &avg);
            let report = PredictionReport::from_predictions(d, &avg.mean)?;
            let mut metrics: Vec<(&str, Option<f64>)> = vec![
                ("seeds_used", Some(avg.seeds_used as f64)),
                ("seeds_skipped", Some((seeds - avg.seeds_used) as f64)),
            ];
            match d.kind {
                TaskKind::Classification => {
                    metrics.push(("mean_seed_test_accuracy", mean_seed_accuracy(d, &avg, Split::Test)));
                    metrics.push(("averaged_test_accuracy", report.accuracy(Split::Test)));
                }
                TaskKind::Regression => {
                    let line = slope_estimate(&preds, d, Split::Test).ok();
                    metrics.push(("averaged_test_slope", line.map(|l| l.slope)));
                    metrics.push(("averaged_test_intercept", line.map(|l| l.intercept)));
                }
            }
            if cfg.analysis.additivity {
                let r2 = additivity(&preds, d, AdditivitySplit::TestOnly).ok().and_then(|r| r.r_squared);
                metrics.push(("averaged_r2_test", r2));
                let mut single: Vec<f64> = avg
                    .runs
                    .iter()
                    .filter_map(|r| r.predictions.as_ref())
                    .filter_map(|p| {
                        let m = prediction_map(d.rows().map(|(_, e)| &e.input).zip(p.iter().copied()));
                        additivity(&m, d, AdditivitySplit::TestOnly).ok().and_then(|r| r.r_squared)
                    })
                    .collect();
                single.sort_by(f64::total_cmp);
                metrics.push(("median_seed_r2_test", (!single.is_empty()).then(|| single[single.len() / 2])));
            }
            for (m, v) in metrics {
                out.rows.push(SweepRow {
                    task: t.task.clone(),
                    variant: t.variant.clone(),
                    salience: salience.clone(),
                    metric: m.into(),
                    value: v,
                    seed: None,
                });
            }
            for run in &avg.runs {
                if let Some(p) = &run.predictions {
                    for ((split, e), v) in d.rows().zip(p) {
                        out.per_seed.push(vec![
                            t.task.clone(),
                            t.variant.clone(),
                            point.to_string(),
                            run.seed.to_string(),
                            tuple_label(&e.input),
                            split.to_string(),
                            fmt_num(*v),
                        ]);
                    }
                }
            }
            for (((split, e), m), se) in d.rows().zip(&avg.mean).zip(&avg.std_error) {
                out.aggregate.push(vec![
                    t.task.clone(),
                    t.variant.clone(),
                    point.to_string(),
                    tuple_label(&e.input),
                    split.to_string(),
                    fmt_num(e.target),
                    fmt_num(*m),
                    fmt_opt(*se),
                    avg.seeds_used.to_string(),
                ]);
            }
        }
    }
    Ok(out)
}

/// Runs a config and writes its artifact bundle into `opts.out_dir`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let tasks: Vec<BuiltTask> = cfg
        .tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            t.build().map_err(|e| Error::Config {
                path: format!("tasks[{i}]"),
                message: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let mut bundle = Bundle {
        dir: opts.out_dir.clone(),
        files: BTreeMap::new(),
    };
    let mut skipped = Vec::new();
    let rows = match cfg.profiles()? {
        Some(profiles) => {
            let cases: Vec<SweepCase> = tasks
                .iter()
                .map(|t| SweepCase {
                    task: t.task.clone(),
                    variant: t.variant.clone(),
                    dataset: t.dataset.clone(),
                    layout: t.layout.clone(),
                })
                .collect();
            let sopts = SweepOptions {
                additivity: cfg.analysis.additivity,
                coefficient_groups: cfg.analysis.coefficient_groups,
                similarity_scale: cfg.solver.similarity_scale,
                baseline: cfg.solver.baseline,
            };
            sweep(&cases, &profiles, &sopts)?
        }
        None => {
            let r = run_random(cfg, &tasks)?;
            let mut buf = Vec::new();
            crate::io::write_table_rows(
                &mut buf,
                &["task", "variant", "point", "seed", "tuple", "split", "prediction"],
                r.per_seed,
            )?;
            bundle.add("random_per_seed.csv", buf);
            let mut buf = Vec::new();
            crate::io::write_table_rows(
                &mut buf,
                &["task", "variant", "point", "tuple", "split", "truth", "mean", "std_error", "seeds_used"],
                r.aggregate,
            )?;
            bundle.add("random_aggregate.csv", buf);
            skipped = r.skipped;
            r.rows
        }
    };
    let mut buf = Vec::new();
    write_sweep_rows(&mut buf, &rows)?;
    if opts.plots {
        let text = String::from_utf8(buf.clone()).expect("utf-8 csv");
        for (name, svg) in crate::harness::plot::sweep_plots(&text)? {
            bundle.add(&name, svg.into_bytes());
        }
    }
    bundle.add("sweep.csv", buf);
    let files = bundle.write()?;
    Ok(RunSummary {
        files,
        rows,
        skipped_seeds: skipped,
    })
}

pub mod plot {
    //! SVG plots computed from a sweep CSV only.

    use std::collections::BTreeMap;
    use std::fmt::Write;

    use crate::error::Result;
    use crate::io::{parse_num, read_table_rows};

    const PRIMARY: [&str; 6] = [
        "test_accuracy",
        "test_slope",
        "mean_test_margin",
        "mean_seed_test_accuracy",
        "averaged_test_slope",
        "averaged_r2_test",
    ];
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 50.0;

    struct Point {
        variant: String,
        s: Vec<Option<f64>>,
        value: f64,
    }

    fn sx(x: f64, lo: f64, hi: f64) -> f64 {
        PAD + (x - lo) / (hi - lo).max(1e-12) * (W - 2.0 * PAD)
    }

    fn sy(y: f64, lo: f64, hi: f64) -> f64 {
        H - PAD - (y - lo) / (hi - lo).max(1e-12) * (H - 2.0 * PAD)
    }

    fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if lo == hi {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    }

    fn frame(title: &str, xlabel: &str, ylabel: &str, lo: (f64, f64), hi: (f64, f64)) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"11\">\n\
             <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">{title}</text>\n\
             <line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{xlabel}</text>\n\
             <text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{ylabel}</text>\n\
             <text x=\"{PAD}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{r}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{}\" y=\"{b}\" text-anchor=\"end\">{}</text>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            W / 2.0,
            W / 2.0,
            H - 12.0,
            H / 2.0,
            H / 2.0,
            H - PAD + 14.0,
            crate::io::fmt_num(lo.0),
            H - PAD + 14.0,
            crate::io::fmt_num(hi.0),
            PAD - 4.0,
            crate::io::fmt_num(lo.1),
            PAD - 4.0,
            PAD + 4.0,
            crate::io::fmt_num(hi.1),
            b = H - PAD,
            r = W - PAD,
        );
        s
    }

    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

    fn line_plot(task: &str, metric: &str, pts: &[Point]) -> String {
        let (x0, x1) = range(pts.iter().filter_map(|p| p.s[0]));
        let (y0, y1) = range(pts.iter().map(|p| p.value));
        let mut s = frame(&format!("{task}: {metric}"), "s_1", metric, (x0, y0), (x1, y1));
        let mut by_variant: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for p in pts {
            if let Some(x) = p.s[0] {
                by_variant.entry(&p.variant).or_default().push((x, p.value));
            }
        }
        for (i, (variant, mut xy)) in by_variant.into_iter().enumerate() {
            xy.sort_by(|a, b| a.0.total_cmp(&b.0));
            let color = COLORS[i % COLORS.len()];
            let path: Vec<String> = xy
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x, x0, x1), sy(y, y0, y1)))
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                path.join(" ")
            );
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{variant}</text>",
                W - PAD + 4.0,
                PAD + 14.0 * i as f64
            );
        }
        s.push_str("</svg>\n");
        s
    }

    fn map_plot(task: &str, variant: &str, metric: &str, pts: &[&Point]) -> String {
        let (x0, x1) = range(pts.iter().filter_map(|p| p.s[0]));
        let (y0, y1) = range(pts.iter().filter_map(|p| p.s[1]));
        let (v0, v1) = range(pts.iter().map(|p| p.value));
        let mut s = frame(&format!("{task} {variant}: {metric}"), "s_1", "s_2", (x0, y0), (x1, y1));
        for p in pts {
            let (Some(x), Some(y)) = (p.s[0], p.s[1]) else { continue };
            let t = (p.value - v0) / (v1 - v0).max(1e-12);
            let shade = (255.0 * (1.0 - t)).round() as u8;
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"rgb({shade},{shade},255)\" stroke=\"#333\" stroke-width=\"0.3\"/>",
                sx(x, x0, x1),
                sy(y, y0, y1)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// One SVG per (task, primary metric); phase maps per variant when the
    /// profiles vary in two free saliences.
    pub fn sweep_plots(csv: &str) -> Result<Vec<(String, String)>> {
        let (header, rows) = read_table_rows(csv.as_bytes())?;
        let scols: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("s_"))
            .map(|(i, _)| i)
            .collect();
        let col = |n: &str| header.iter().position(|h| h == n);
        let (Some(ti), Some(vi), Some(mi), Some(xi)) = (col("task"), col("variant"), col("metric"), col("value")) else {
            return Ok(Vec::new());
        };
        let mut groups: BTreeMap<(String, String), Vec<Point>> = BTreeMap::new();
        for r in &rows {
            if !PRIMARY.contains(&r[mi].as_str()) {
                continue;
            }
            let Some(value) = parse_num(&r[xi])? else { continue };
            let s = scols.iter().map(|&i| parse_num(&r[i])).collect::<Result<Vec<_>>>()?;
            if s.is_empty() {
                continue;
            }
            groups.entry((r[ti].clone(), r[mi].clone())).or_default().push(Point {
                variant: r[vi].clone(),
                s,
                value,
            });
        }
        let mut out = Vec::new();
        for ((task, metric), pts) in groups {
            let two_free = pts.iter().all(|p| p.s.len() >= 3 && p.s[2].is_some()) && {
                let (a, b) = range(pts.iter().filter_map(|p| p.s[1]));
                b - a > 1e-9 && pts.len() > 1
            };
            if two_free {
                let mut by_variant: BTreeMap<&str, Vec<&Point>> = BTreeMap::new();
                for p in &pts {
                    by_variant.entry(&p.variant).or_default().push(p);
                }
                for (variant, vp) in by_variant {
                    let name = format!("{task}_{metric}_{}.svg", variant.replace(|c: char| !c.is_alphanumeric(), "_"));
                    out.push((name, map_plot(&task, variant, &metric, &vp)));
                }
            } else {
                out.push((format!("{task}_{metric}.svg"), line_plot(&task, &metric, &pts)));
            }
        }
        Ok(out)
    }
}
