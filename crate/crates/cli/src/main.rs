use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kernelcomp::analysis::{
    additivity, coefficient_groups, prediction_map, slope_estimate, AdditivitySplit,
};
use kernelcomp::geometry::{
    depth_salience, empirical_salience, gram, similarities_from_salience, SalienceProfile, SimilarityTable,
};
use kernelcomp::harness::{self, RunOptions, TaskSpec};
use kernelcomp::random_reps::{sample_representation, GaussianRepSpec};
use kernelcomp::space::{enumerate_grid, ComponentSpace};
use kernelcomp::tasks::{context_dependence_layout, context_rule_transfer_layout, Split, TaskKind};
use kernelcomp::{io as kio, oracles, par, Error};

#[derive(Parser)]
#[command(name = "kernelcomp", version, about = "Compositional generalization in kernel models")]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a task dataset as CSV.
    GenerateTask(GenerateArgs),
    /// Gram matrix of a dataset's inputs under a salience profile.
    BuildKernel(KernelArgs),
    /// Fit the minimal-norm kernel model and write predictions.
    Fit(KernelArgs),
    /// Conjunction-wise additivity and slope of a predictions file.
    Analyze(AnalyzeArgs),
    /// Run an experiment config.
    Sweep(SweepArgs),
    /// Salience of multi-hot inputs across random ReLU layers.
    DepthSalience(DepthArgs),
    /// Sample a random Gaussian representation of a component grid.
    SampleReps(RepArgs),
    /// Check every closed form against brute-force fits.
    VerifyOracles(VerifyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Task name, e.g. symbolic_addition, context_dependence, transitive_equivalence.
    #[arg(long, required_unless_present = "config")]
    task: Option<String>,
    /// Task parameter as key=value (TOML value syntax; bare words are strings).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Read the task from the first [[tasks]] entry of a config instead.
    #[arg(long, conflicts_with = "task")]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Per-size saliences S(1;C),…,S(C;C), comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "profile")]
    salience: Option<Vec<f64>>,
    /// Salience profile CSV.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Similarity table CSV (used as given).
    #[arg(long, conflicts_with_all = ["salience", "profile"])]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    profile: ProfileArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    TestOnly,
    TrainAndTest,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    ContextDependence,
    ContextRuleTransfer,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, value_enum, default_value = "test-only")]
    split: SplitArg,
    /// Report coefficient groups for this context layout.
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    /// Output directory for additivity.csv and additivity_summary.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output_dir, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct DepthArgs {
    #[arg(long)]
    components: usize,
    #[arg(long, default_value_t = 0.0)]
    leak: f64,
    #[arg(long)]
    depth: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RepArgs {
    /// Cardinality per component, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    cardinalities: Vec<usize>,
    #[arg(long)]
    dim: usize,
    /// σ_1,…,σ_C, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Also write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Lib(Error),
    Mismatch(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn sink(out: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn open(p: &Path) -> Result<BufReader<File>, Failure> {
    File::open(p)
        .map(BufReader::new)
        .map_err(|e| Failure::Lib(Error::Io(format!("{}: {e}", p.display()))))
}

fn load_table(args: &ProfileArgs) -> Result<SimilarityTable, Failure> {
    if let Some(t) = &args.table {
        return Ok(kio::read_table(open(t)?)?);
    }
    let profile = match (&args.salience, &args.profile) {
        (Some(s), _) => SalienceProfile::uniform(s.clone())?,
        (_, Some(p)) => kio::read_profile(open(p)?)?,
        _ => return Err(Failure::Usage("give --salience, --profile or --table".into())),
    };
    Ok(similarities_from_salience(&profile)?)
}

fn parse_param(kv: &str) -> Result<(String, toml::Value), Failure> {
    let (k, v) = kv
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("parameter `{kv}` is not KEY=VALUE")))?;
    let value = format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

fn generate(args: GenerateArgs) -> CliResult {
    let spec: TaskSpec = match &args.config {
        Some(path) => harness::load_config(path)?.tasks.remove(0),
        None => {
            let mut table = toml::Table::new();
            let name = args.task.clone().unwrap_or_default();
            table.insert("name".into(), toml::Value::String(name));
            for p in &args.params {
                let (k, v) = parse_param(p)?;
                table.insert(k, v);
            }
            let text = format!("name = \"cli\"\n[[tasks]]\n{table}\n[geometry]\nkind = \"grid\"\ncomponents = 2\nstep = 0.5\n");
            harness::parse_config(&text)?.tasks.remove(0)
        }
    };
    let built = spec.build()?;
    kio::write_dataset(sink(&args.out)?, &built.dataset)?;
    Ok(())
}

fn build_kernel(args: KernelArgs) -> CliResult {
    let d = kio::read_dataset(open(&args.dataset)?, None, None)?;
    let table = load_table(&args.profile)?;
    let inputs: Vec<_> = d.rows().map(|(_, e)| e.input.clone()).collect();
    let g = gram(&inputs, &table)?;
    kio::write_matrix(sink(&args.out)?, "k", &g.entries, Some(&g.row_inputs))?;
    Ok(())
}

fn fit(args: KernelArgs) -> CliResult {
    let d = kio::read_dataset(open(&args.dataset)?, None, None)?;
    let table = load_table(&args.profile)?;
    let model = kernelcomp::fit(&d, &table)?;
    let report = kernelcomp::predict(&model, &d)?;
    kio::write_predictions(sink(&args.out)?, &report)?;
    let mut err = io::stderr();
    match d.kind {
        TaskKind::Classification => {
            writeln!(
                err,
                "train accuracy {}  test accuracy {}  test ties {}  mean test margin {}",
                kio::fmt_opt(report.accuracy(Split::Train)),
                kio::fmt_opt(report.accuracy(Split::Test)),
                report.ties(Split::Test),
                kio::fmt_opt(report.mean_margin(Split::Test)),
            )?;
        }
        TaskKind::Regression => {
            let preds = prediction_map(report.rows.iter().map(|r| (&r.input, r.predicted)));
            let line = slope_estimate(&preds, &d, Split::Test).ok();
            writeln!(
                err,
                "test slope {}  intercept {}  test mse {}",
                kio::fmt_opt(line.map(|l| l.slope)),
                kio::fmt_opt(line.map(|l| l.intercept)),
                kio::fmt_opt(report.mse(Split::Test)),
            )?;
        }
    }
    Ok(())
}

fn analyze(args: AnalyzeArgs) -> CliResult {
    let d = kio::read_dataset(open(&args.dataset)?, None, None)?;
    let preds: std::collections::HashMap<_, _> = kio::read_predictions(open(&args.predictions)?)?.into_iter().collect();
    let split = match args.split {
        SplitArg::TestOnly => AdditivitySplit::TestOnly,
        SplitArg::TrainAndTest => AdditivitySplit::TrainAndTest,
    };
    let report = additivity(&preds, &d, split)?;
    let mut out = io::stdout();
    writeln!(out, "r_squared {}", kio::fmt_opt(report.r_squared))?;
    writeln!(out, "feature_count {}", report.feature_count)?;
    if d.kind == TaskKind::Regression {
        for s in [Split::Train, Split::Test] {
            if let Ok(line) = slope_estimate(&preds, &d, s) {
                writeln!(
                    out,
                    "{s}_slope {}  {s}_intercept {}  {s}_residual {}",
                    kio::fmt_num(line.slope),
                    kio::fmt_num(line.intercept),
                    kio::fmt_num(line.residual)
                )?;
            }
        }
    }
    if let Some(layout) = args.layout {
        let layout = match layout {
            LayoutArg::ContextDependence => context_dependence_layout(),
            LayoutArg::ContextRuleTransfer => context_rule_transfer_layout(),
        };
        let g = coefficient_groups(&report, &layout);
        writeln!(
            out,
            "right_conj {}  wrong_conj {}  sensory_feat {}  context_only {}  memorization {}",
            kio::fmt_num(g.right_conj),
            kio::fmt_num(g.wrong_conj),
            kio::fmt_num(g.sensory_feat),
            kio::fmt_num(g.context_only),
            kio::fmt_num(g.memorization)
        )?;
    }
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        kio::write_additivity(File::create(dir.join("additivity.csv"))?, &report)?;
        kio::write_additivity_summary(File::create(dir.join("additivity_summary.csv"))?, &report)?;
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> CliResult {
    let mut cfg = harness::load_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out_dir = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let summary = harness::run(
        &cfg,
        &RunOptions {
            out_dir: out_dir.clone(),
            plots: !args.no_plots,
        },
    )?;
    for (variant, seed, msg) in &summary.skipped_seeds {
        eprintln!("skipped seed {seed} ({variant}): {msg}");
    }
    println!("wrote {} files to {}", summary.files.len() + 1, out_dir.display());
    Ok(())
}

fn depth(args: DepthArgs) -> CliResult {
    let layers = depth_salience(&SalienceProfile::multi_hot(args.components), args.depth, args.leak)?;
    kio::write_depth_trajectory(sink(&args.out)?, &layers)?;
    Ok(())
}

fn sample_reps(args: RepArgs) -> CliResult {
    let space = ComponentSpace::new(args.cardinalities)?;
    let spec = GaussianRepSpec::new(space.clone(), args.dim, &args.sigma, args.seed)?;
    let grid = enumerate_grid(&space);
    let x = sample_representation(&spec, &grid)?;
    kio::write_matrix(sink(&args.out)?, "x", &x, Some(&grid))?;
    if let Ok(p) = empirical_salience(&x, &grid) {
        let s: Vec<String> = (1..=space.num_components())
            .map(|k| format!("S({k};{})={}", space.num_components(), kio::fmt_num(p.size_salience(k))))
            .collect();
        eprintln!("empirical salience {}", s.join(" "));
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> CliResult {
    let checks = oracles::verify_oracles()?;
    let mut out = io::stdout();
    writeln!(out, "{:<26} {:<28} {:>16} {:>16} {:>8}  result", "check", "parameters", "expected", "observed", "tol")?;
    for c in &checks {
        writeln!(
            out,
            "{:<26} {:<28} {:>16} {:>16} {:>8}  {}",
            c.name,
            c.parameters,
            kio::fmt_num(c.expected),
            kio::fmt_num(c.observed),
            kio::fmt_num(c.tolerance),
            if c.pass { "pass" } else { "FAIL" }
        )?;
    }
    if args.out.is_some() {
        kio::write_table_rows(
            sink(&args.out)?,
            &["check", "parameters", "expected", "observed", "tolerance", "pass"],
            checks.iter().map(|c| {
                vec![
                    c.name.clone(),
                    c.parameters.clone(),
                    kio::fmt_num(c.expected),
                    kio::fmt_num(c.observed),
                    kio::fmt_num(c.tolerance),
                    c.pass.to_string(),
                ]
            }),
        )?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(Failure::Mismatch(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = par::with_threads(cli.jobs, move || match cli.command {
        Command::GenerateTask(a) => generate(a),
        Command::BuildKernel(a) => build_kernel(a),
        Command::Fit(a) => fit(a),
        Command::Analyze(a) => analyze(a),
        Command::Sweep(a) => run_sweep(a),
        Command::DepthSalience(a) => depth(a),
        Command::SampleReps(a) => sample_reps(a),
        Command::VerifyOracles(a) => verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
        Err(Failure::Mismatch(n)) => {
            eprintln!("{n} oracle check(s) failed");
            ExitCode::from(3)
        }
    }
}
