use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use weightlab::config::{ConfigError, ExperimentConfig};
use weightlab::experiments::{run_experiment, write_artifacts};
use weightlab_core::gen::WeightSpec;
use weightlab_core::io::{load, save, AnyField};
use weightlab_core::operators::opnorm::{operator_norm_estimate, Operator};
use weightlab_core::operators::{
    christ_goldberg, convex_maximal, convex_sparse, hilbert_at, hilbert_maximal, hilbert_principal, hilbert_truncated, maximal_scalar,
    maximal_weighted_universal, sparse_generate, sparse_scalar, SparseStrategy,
};
use weightlab_core::weights::{
    a1k_characteristic, matrix_a1, matrix_a2_tv, matrix_ap_roudenko, scalar_a1, scalar_ap, tv_norm_ap_constant,
};
use weightlab_core::{DirectionSet, DyadicField, DyadicGrid, NormFunction, Variant, WeightRef};

/// Weighted norm inequalities on dyadic grids.
#[derive(Parser)]
#[command(name = "weightlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a weight characteristic and the cube attaining it as JSON.
    Characteristics {
        #[arg(long = "in")]
        input: PathBuf,
        /// scalar-ap, scalar-a1, tv, roudenko, matrix-a1, norm-ap or convex-a1.
        #[arg(long)]
        variant: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Apply the maximal operator that fits the input (and optional weight).
    Maximal {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        weight: Option<PathBuf>,
        /// Conjugation exponent of the Christ–Goldberg operator.
        #[arg(long, default_value_t = 2.0)]
        r: f64,
    },
    /// Apply a sparse operator built by a generation strategy.
    Sparse {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// nested, random:SEED[:STRIDE] or stopping[:THRESHOLD].
        #[arg(long, default_value = "nested")]
        strategy: String,
    },
    /// Truncated, principal-value or maximal Hilbert transform.
    Hilbert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, required_unless_present = "at")]
        out: Option<PathBuf>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long, conflicts_with = "eps")]
        maximal: bool,
        /// Evaluate at one point (any real x) and print JSON instead of a field.
        #[arg(long, requires = "eps", conflicts_with = "maximal")]
        at: Option<f64>,
    },
    /// Randomized lower bound for an operator norm.
    Opnorm(OpnormArgs),
    /// Run a named experiment and write its artifacts.
    Run(RunArgs),
}

#[derive(Args)]
struct OpnormArgs {
    /// maximal, sparse, hilbert-maximal, christ-goldberg or convex-maximal.
    #[arg(long)]
    operator: String,
    #[arg(long)]
    depth: u32,
    #[arg(long, default_value_t = 1)]
    dim: u32,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value = "constant")]
    weight: String,
    #[arg(long, default_value_t = 32)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    weight: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output: Option<String>,
}

fn scalar(f: AnyField, what: &str) -> Result<DyadicField<f64>> {
    match f {
        AnyField::Scalar(s) => Ok(s),
        other => bail!("{what} must be a scalar field, got a {} field", other.kind()),
    }
}

fn print_json(v: serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

fn characteristics(input: PathBuf, variant: &str, p: f64) -> Result<()> {
    let variant: Variant = variant.parse().map_err(|e| ConfigError::new("variant", format!("{e}")))?;
    let field = load(&input).with_context(|| format!("reading {}", input.display()))?;
    let report = match (variant, field) {
        (Variant::ScalarAp, AnyField::Scalar(w)) => scalar_ap(&w, p)?,
        (Variant::ScalarA1, AnyField::Scalar(w)) => scalar_a1(&w)?,
        (Variant::TreilVolberg, AnyField::Matrix(w)) => matrix_a2_tv(&w)?,
        (Variant::Roudenko, AnyField::Matrix(w)) => matrix_ap_roudenko(&w, p)?,
        (Variant::MatrixA1, AnyField::Matrix(w)) => matrix_a1(&w)?,
        (Variant::NormAp, AnyField::Matrix(w)) => {
            let d = w.values()[0].dim();
            let root = DyadicField::new(*w.grid(), w.values().iter().map(|m| m.power(1.0 / p)).collect::<weightlab_core::Result<_>>()?)?;
            tv_norm_ap_constant(&NormFunction::Matrix(root), p, &standard_vectors(d))?
        }
        (Variant::NormAp, AnyField::Body(f)) => {
            let d = f.values()[0].dim();
            tv_norm_ap_constant(&NormFunction::Body(f), p, &standard_vectors(d))?
        }
        (Variant::ConvexA1, AnyField::Body(f)) => a1k_characteristic(&f)?,
        (v, f) => bail!("variant {v} does not apply to a {} field", f.kind()),
    };
    let dim = report.argmax_cube.dim as usize;
    print_json(json!({
        "variant": report.variant.name(),
        "p": report.p,
        "value": report.value,
        "argmax_cube": { "level": report.argmax_cube.level, "index": &report.argmax_cube.index[..dim] },
        "clamped": report.clamped,
    }))
}

fn standard_vectors(d: usize) -> Vec<Vec<f64>> {
    DirectionSet::standard(d).iter().map(|u| u.to_vec()).collect()
}

fn maximal(input: PathBuf, out: PathBuf, weight: Option<PathBuf>, r: f64) -> Result<()> {
    let f = load(&input).with_context(|| format!("reading {}", input.display()))?;
    let w = weight.map(|p| load(&p).with_context(|| format!("reading {}", p.display()))).transpose()?;
    let result = match (f, w) {
        (AnyField::Scalar(f), None) => AnyField::Scalar(maximal_scalar(&f)),
        (AnyField::Scalar(f), Some(w)) => AnyField::Scalar(maximal_weighted_universal(&f, &scalar(w, "the weight of a scalar input")?)?),
        (AnyField::Vector(f), Some(AnyField::Matrix(w))) => AnyField::Scalar(christ_goldberg(&w, &f, r)?),
        (AnyField::Vector(f), None) => AnyField::Scalar(maximal_scalar(&f.magnitude())),
        (AnyField::Body(f), None) => AnyField::Body(convex_maximal(&f)),
        (f, Some(w)) => bail!("no maximal operator takes a {} input with a {} weight", f.kind(), w.kind()),
        (f, None) => bail!("no maximal operator takes a {} input", f.kind()),
    };
    save(&out, &result).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn parse_strategy(text: &str, f: &DyadicField<f64>) -> Result<SparseStrategy> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || ConfigError::new("strategy", format!("`{text}` is not nested, random:SEED[:STRIDE] or stopping[:THRESHOLD]"));
    Ok(match parts.as_slice() {
        ["nested"] => SparseStrategy::NestedHalves,
        ["random", seed] | ["random", seed, _] => SparseStrategy::Random {
            seed: seed.parse().map_err(|_| bad())?,
            stride: parts.get(2).map_or(Ok(1), |s| s.parse()).map_err(|_| bad())?,
        },
        ["stopping"] | ["stopping", _] => SparseStrategy::StoppingTime {
            f: f.clone(),
            threshold: parts.get(1).map_or(Ok(2.0), |s| s.parse()).map_err(|_| bad())?,
        },
        _ => return Err(bad().into()),
    })
}

fn sparse(input: PathBuf, out: PathBuf, strategy: &str) -> Result<()> {
    let f = load(&input).with_context(|| format!("reading {}", input.display()))?;
    let result = match f {
        AnyField::Scalar(f) => {
            let s = sparse_generate(f.grid(), &parse_strategy(strategy, &f)?)?;
            AnyField::Scalar(sparse_scalar(&s, &f)?)
        }
        AnyField::Vector(f) => {
            let s = sparse_generate(f.grid(), &parse_strategy(strategy, &f.magnitude())?)?;
            AnyField::Body(convex_sparse(&s, &f)?)
        }
        other => bail!("the sparse operator takes scalar or vector fields, got a {} field", other.kind()),
    };
    save(&out, &result).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn hilbert(input: PathBuf, out: Option<PathBuf>, eps: Option<f64>, maximal: bool, at: Option<f64>) -> Result<()> {
    let f = scalar(load(&input).with_context(|| format!("reading {}", input.display()))?, "the Hilbert input")?;
    if let Some(x) = at {
        let eps = eps.expect("clap enforces --eps with --at");
        return print_json(json!({ "x": x, "eps": eps, "value": hilbert_at(&f, x, eps)? }));
    }
    let result = if maximal {
        hilbert_maximal(&f)?
    } else if let Some(eps) = eps {
        let vals = (0..f.grid().cell_count())
            .map(|c| hilbert_truncated(&f, c, eps))
            .collect::<weightlab_core::Result<Vec<f64>>>()?;
        DyadicField::new(*f.grid(), vals)?
    } else {
        hilbert_principal(&f)?
    };
    let out = out.expect("clap enforces --out without --at");
    save(&out, &AnyField::Scalar(result)).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}

fn opnorm(a: OpnormArgs) -> Result<()> {
    let grid = DyadicGrid::new(a.dim, a.depth).map_err(|e| ConfigError::new("depth", format!("{e}")))?;
    let spec: WeightSpec = a.weight.parse().map_err(|e| ConfigError::new("weight", format!("{e}")))?;
    let nested = sparse_generate(&grid, &SparseStrategy::NestedHalves)?;
    let est = match a.operator.as_str() {
        "maximal" | "sparse" | "hilbert-maximal" => {
            let w = spec.scalar(&grid)?;
            let op = match a.operator.as_str() {
                "maximal" => Operator::Maximal,
                "sparse" => Operator::Sparse(&nested),
                _ => Operator::HilbertMaximal,
            };
            operator_norm_estimate(&op, &grid, a.p, Some(WeightRef::Scalar(&w)), a.trials, a.seed)?
        }
        "christ-goldberg" | "convex-maximal" => {
            let w = spec.matrix(&grid, a.d)?;
            let op = if a.operator == "christ-goldberg" {
                Operator::ChristGoldberg { r: a.r.unwrap_or(a.p) }
            } else {
                Operator::ConvexMaximal { d: a.d }
            };
            operator_norm_estimate(&op, &grid, a.p, Some(WeightRef::Matrix(&w)), a.trials, a.seed)?
        }
        other => {
            return Err(ConfigError::new(
                "operator",
                format!("unknown operator `{other}`; expected maximal, sparse, hilbert-maximal, christ-goldberg or convex-maximal"),
            )
            .into())
        }
    };
    print_json(json!({ "operator": a.operator, "p": a.p, "estimate": est.estimate, "trials": est.trials, "seed": est.seed }))
}

fn run(a: RunArgs) -> Result<bool> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::new(a.experiment.clone().ok_or_else(|| ConfigError::new("experiment", "missing; pass --experiment or --config"))?),
    };
    let overrides = [
        ("experiment", &a.experiment),
        ("depth", &a.depth),
        ("dim", &a.dim),
        ("d", &a.d),
        ("p", &a.p),
        ("weight", &a.weight),
        ("trials", &a.trials),
        ("seed", &a.seed),
        ("output", &a.output),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    let outcome = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            if let Some(prefix) = &cfg.output {
                let [_, _, txt] = weightlab::experiments::artifact_paths(prefix);
                if let Some(dir) = txt.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir)?;
                }
                std::fs::write(&txt, format!("{}: ERROR\n  {e:#}\n", cfg.experiment))?;
            }
            return Err(e);
        }
    };
    match &cfg.output {
        Some(prefix) => {
            write_artifacts(&outcome, prefix)?;
            print!("{}", outcome.to_text());
        }
        None => {
            print!("{}", outcome.to_json());
            eprint!("{}", outcome.to_text());
        }
    }
    Ok(outcome.passed)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("WEIGHTLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| ConfigError::new("WEIGHTLAB_THREADS", format!("`{v}` is not a positive thread count")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| anyhow!("configuring the thread pool: {e}"))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Characteristics { input, variant, p } => characteristics(input, &variant, p)?,
        Command::Maximal { input, out, weight, r } => maximal(input, out, weight, r)?,
        Command::Sparse { input, out, strategy } => sparse(input, out, &strategy)?,
        Command::Hilbert { input, out, eps, maximal, at } => hilbert(input, out, eps, maximal, at)?,
        Command::Opnorm(a) => opnorm(a)?,
        Command::Run(a) => return run(a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<ConfigError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
