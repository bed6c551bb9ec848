//! Benchmark and inspection CLI for the hierarchical solver.
//!
//! Exit codes: 0 success, 1 hard error, 2 non-convergence.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use hlu::problems::{self, Boundary, CoeffCase, CoeffField, GridSpec};
use hlu::{
    factorize, gmres_solve, load_matrix_market, metrics, BlockSparseMatrix, DepthSpec, Error,
    FactorConfig, GmresConfig, PartitionStrategy, TruncationRule,
};

#[derive(Parser)]
#[command(
    name = "hlu",
    about = "Hierarchical approximate LU: tunable-accuracy sparse direct solver and GMRES preconditioner",
    long_about = None,
    after_help = "The HLU_THREADS environment variable is reserved for future use and currently ignored."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factorize a matrix and run a stand-alone direct solve.
    Solve(SolveArgs),
    /// Run preconditioned GMRES with the factorization as left preconditioner.
    Precond(PrecondArgs),
    /// Time factorization and solve over a ladder of problem sizes.
    Scaling(ScalingArgs),
    /// Emit the step-by-step factorization trace of a tiny instance.
    Trace(TraceArgs),
}

#[derive(Args, Clone)]
struct MatrixSource {
    /// Generator spec, e.g. poisson2d:64,64 | poisson3d:16,16,16[,periodic]
    /// | vcp:16,16,16,case1 | advdiff:16,16,16,1.0,1.0 | identity:64
    /// | chain:16,periodic | randdd:1000,4
    #[arg(long, conflicts_with = "mtx")]
    gen: Option<String>,
    /// Matrix Market file to load.
    #[arg(long)]
    mtx: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct FactorArgs {
    /// Low-rank truncation precision.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Truncation rule: relsigma (sigma_k/sigma_0 >= eps) or frob.
    #[arg(long, default_value = "relsigma")]
    rule: String,
    /// Explicit tree depth.
    #[arg(long, conflicts_with = "target_leaf")]
    depth: Option<usize>,
    /// Target variables per leaf cluster (depth = round(log2(n / leaf))).
    #[arg(long, default_value_t = 32)]
    target_leaf: usize,
    /// Partitioner seed, echoed in reports.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Partitioning strategy: bisect or contiguous.
    #[arg(long, default_value = "bisect")]
    partition: String,
    /// Record the sparsity instrumentation and step trace.
    #[arg(long)]
    instrument: bool,
    /// Write level-wise cluster assignments as JSON.
    #[arg(long)]
    dump_partition: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: MatrixSource,
    #[command(flatten)]
    factor: FactorArgs,
    /// Right-hand side: manufactured | ones | a path to a whitespace-separated file.
    #[arg(long, default_value = "manufactured")]
    rhs: String,
    /// Report format: json | csv.
    #[arg(long, default_value = "json")]
    out: String,
}

#[derive(Args)]
struct PrecondArgs {
    #[command(flatten)]
    source: MatrixSource,
    #[command(flatten)]
    factor: FactorArgs,
    #[arg(long, default_value = "manufactured")]
    rhs: String,
    /// GMRES tolerance on the preconditioned relative residual.
    #[arg(long, default_value_t = 1e-14)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Optional restart length (full GMRES when absent).
    #[arg(long)]
    restart: Option<usize>,
    /// Write the per-iteration preconditioned residual as CSV.
    #[arg(long)]
    history_csv: Option<PathBuf>,
    #[arg(long, default_value = "json")]
    out: String,
}

#[derive(Args)]
struct ScalingArgs {
    /// Family: poisson2d or poisson3d.
    #[arg(long, default_value = "poisson2d")]
    family: String,
    /// Grid side lengths, e.g. 64,128,256,512.
    #[arg(long, value_delimiter = ',')]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 32)]
    target_leaf: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    source: MatrixSource,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 2)]
    target_leaf: usize,
    #[arg(long)]
    depth: Option<usize>,
    /// Partitioning strategy; contiguous gives reproducible textbook layouts.
    #[arg(long, default_value = "contiguous")]
    partition: String,
    /// Write the JSON trace here instead of stdout.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Directory for per-step DOT files.
    #[arg(long)]
    dot_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Precond(args) => cmd_precond(args),
        Command::Scaling(args) => cmd_scaling(args),
        Command::Trace(args) => cmd_trace(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn parse_generator(spec: &str) -> Result<BlockSparseMatrix, Error> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let parts: Vec<&str> = if params.is_empty() {
        Vec::new()
    } else {
        params.split(',').collect()
    };
    let dims = |count: usize| -> Result<Vec<usize>, Error> {
        parts
            .iter()
            .take(count)
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::InvalidInput(format!("bad dimension '{p}' in {spec}")))
            })
            .collect()
    };
    let bc_at = |idx: usize| -> Boundary {
        if parts.get(idx) == Some(&"periodic") {
            Boundary::Periodic
        } else {
            Boundary::Dirichlet
        }
    };
    match name {
        "poisson2d" => {
            let d = dims(2)?;
            if d.len() < 2 {
                return Err(Error::InvalidInput(format!("{spec}: need nx,ny")));
            }
            problems::poisson(&GridSpec {
                dims: d,
                bc: bc_at(2),
            })
        }
        "poisson3d" => {
            let d = dims(3)?;
            if d.len() < 3 {
                return Err(Error::InvalidInput(format!("{spec}: need nx,ny,nz")));
            }
            problems::poisson(&GridSpec {
                dims: d,
                bc: bc_at(3),
            })
        }
        "vcp" => {
            let d = dims(3)?;
            if d.len() < 3 || parts.len() < 4 {
                return Err(Error::InvalidInput(format!("{spec}: need nx,ny,nz,caseN[,seed]")));
            }
            let case = match parts[3] {
                "case1" | "1" => CoeffCase::Unif01,
                "case2" | "2" => CoeffCase::InverseUnif01,
                "case3" | "3" => CoeffCase::UnifNeg11,
                "const" => CoeffCase::Constant,
                other => {
                    return Err(Error::InvalidInput(format!("unknown vcp case '{other}'")))
                }
            };
            let seed = parts
                .get(4)
                .map(|s| s.parse::<u64>().unwrap_or(0))
                .unwrap_or(0);
            problems::variable_coeff_poisson(
                &GridSpec {
                    dims: d,
                    bc: Boundary::Periodic,
                },
                &CoeffField { case, seed },
            )
        }
        "advdiff" => {
            let d = dims(3)?;
            if d.len() < 3 || parts.len() < 5 {
                return Err(Error::InvalidInput(format!(
                    "{spec}: need nx,ny,nz,sigma,R"
                )));
            }
            let sigma: f64 = parts[3]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad sigma '{}'", parts[3])))?;
            let r: f64 = parts[4]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad R '{}'", parts[4])))?;
            problems::advection_diffusion(
                &GridSpec {
                    dims: d,
                    bc: Boundary::Dirichlet,
                },
                sigma,
                r,
            )
        }
        "identity" => {
            let d = dims(1)?;
            if d.is_empty() {
                return Err(Error::InvalidInput(format!("{spec}: need n")));
            }
            Ok(problems::identity(d[0]))
        }
        "chain" => {
            let d = dims(1)?;
            if d.is_empty() {
                return Err(Error::InvalidInput(format!("{spec}: need n")));
            }
            Ok(problems::chain1d(d[0], parts.get(1) == Some(&"periodic")))
        }
        "randdd" => {
            let d = dims(2)?;
            if d.len() < 2 {
                return Err(Error::InvalidInput(format!("{spec}: need n,extra_per_row")));
            }
            let seed = parts
                .get(2)
                .map(|s| s.parse::<u64>().unwrap_or(0))
                .unwrap_or(0);
            Ok(problems::random_diag_dominant(d[0], d[1], seed))
        }
        other => Err(Error::InvalidInput(format!("unknown generator '{other}'"))),
    }
}

fn load_source(src: &MatrixSource) -> Result<(BlockSparseMatrix, String), Error> {
    match (&src.gen, &src.mtx) {
        (Some(g), None) => Ok((parse_generator(g)?, g.clone())),
        (None, Some(path)) => Ok((
            load_matrix_market(path)?,
            path.display().to_string(),
        )),
        _ => Err(Error::InvalidInput(
            "exactly one of --gen or --mtx is required".into(),
        )),
    }
}

fn factor_config(args: &FactorArgs, n: usize) -> Result<FactorConfig, Error> {
    let rule = match args.rule.as_str() {
        "relsigma" => TruncationRule::RelativeSigma(args.eps),
        "frob" => TruncationRule::FrobeniusGlobal(args.eps),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown rule '{other}' (use relsigma or frob)"
            )))
        }
    };
    let depth = match args.depth {
        Some(l) => DepthSpec::Depth(l),
        None => DepthSpec::TargetLeaf(args.target_leaf.min(n.max(1))),
    };
    let partition = match args.partition.as_str() {
        "bisect" => PartitionStrategy::GraphBisection,
        "contiguous" => PartitionStrategy::Contiguous,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown partition strategy '{other}'"
            )))
        }
    };
    Ok(FactorConfig {
        rule,
        depth,
        seed: args.seed,
        instrument: args.instrument,
        partition,
    })
}

/// Periodic pure-diffusion operators annihilate constants: the solution is
/// defined modulo a constant and error is reported on mean-centered vectors.
fn has_constant_nullspace(source: &str) -> bool {
    source.starts_with("vcp:")
        || (source.starts_with("poisson") && source.contains("periodic"))
        || (source.starts_with("chain") && source.contains("periodic"))
}

fn mean_centered(x: &[f64]) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len().max(1) as f64;
    x.iter().map(|v| v - mean).collect()
}

fn build_rhs(
    kind: &str,
    m: &BlockSparseMatrix,
    seed: u64,
    zero_mean: bool,
) -> Result<(Vec<f64>, Option<Vec<f64>>), Error> {
    match kind {
        "manufactured" => {
            let (b, x) = if zero_mean {
                problems::manufactured_rhs_zero_mean(m, seed.wrapping_add(1))
            } else {
                problems::manufactured_rhs(m, seed.wrapping_add(1))
            };
            Ok((b, Some(x)))
        }
        "ones" => Ok((vec![1.0; m.n()], None)),
        path => {
            let text = std::fs::read_to_string(path)?;
            let b: Vec<f64> = text
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad rhs value '{t}'")))
                })
                .collect::<Result<_, _>>()?;
            if b.len() != m.n() {
                return Err(Error::DimensionMismatch(format!(
                    "rhs file has {} values, matrix size is {}",
                    b.len(),
                    m.n()
                )));
            }
            Ok((b, None))
        }
    }
}

fn maybe_dump_partition(args: &FactorArgs, m: &BlockSparseMatrix, cfg: &FactorConfig) {
    if let Some(path) = &args.dump_partition {
        let depth = match cfg.depth {
            DepthSpec::Depth(l) => l,
            DepthSpec::TargetLeaf(t) => hlu::choose_depth(m.n(), t),
        };
        if let Ok(np) = hlu::partition::build_nested_partitioning_with(
            m,
            depth,
            cfg.seed,
            cfg.partition == PartitionStrategy::Contiguous,
        ) {
            if let Ok(mut f) = std::fs::File::create(path) {
                let _ = writeln!(f, "{}", np.to_json());
            }
        }
    }
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode, Error> {
    let (m, source_name) = load_source(&args.source)?;
    let cfg = factor_config(&args.factor, m.n())?;
    maybe_dump_partition(&args.factor, &m, &cfg);
    let singular_family = has_constant_nullspace(&source_name);
    let (b, x_true) = build_rhs(&args.rhs, &m, args.factor.seed, singular_family)?;

    let t0 = Instant::now();
    let (fact, stats) = factorize(&m, &cfg)?;
    let factor_time = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let x = fact.solve(&b)?;
    let solve_time = t1.elapsed().as_secs_f64();

    let ax = m.matvec(&x);
    let res_abs: f64 = ax
        .iter()
        .zip(&b)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let bnorm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual = if bnorm > 0.0 { res_abs / bnorm } else { res_abs };
    let error = x_true.as_ref().map(|xt| metrics(&x, xt, &m, &b).0);
    let error_quotient = if singular_family {
        x_true
            .as_ref()
            .map(|xt| metrics(&mean_centered(&x), xt, &m, &b).0)
    } else {
        None
    };

    let report = json!({
        "command": "solve",
        "source": source_name,
        "n": m.n(),
        "nnz": m.nnz(),
        "config": cfg,
        "factor_seconds": factor_time,
        "solve_seconds": solve_time,
        "relative_residual": residual,
        "relative_error": error,
        "relative_error_mean_centered": error_quotient,
        "constant_nullspace": singular_family,
        "aux_variables": stats.aux_var_total,
        "alpha_hat": stats.alpha_hat,
        "levels": stats.levels,
        "phase_seconds": {
            "svd": stats.svd_seconds,
            "gemm": stats.gemm_seconds,
            "pivot_inverse": stats.pivot_seconds,
        },
        "depth_clamped": stats.depth_clamped,
    });
    emit_report(&report, &args.out, &["n", "relative_residual", "factor_seconds", "solve_seconds"]);
    Ok(ExitCode::SUCCESS)
}

fn cmd_precond(args: PrecondArgs) -> Result<ExitCode, Error> {
    let (m, source_name) = load_source(&args.source)?;
    let cfg = factor_config(&args.factor, m.n())?;
    maybe_dump_partition(&args.factor, &m, &cfg);
    let singular_family = has_constant_nullspace(&source_name);
    let (b, x_true) = build_rhs(&args.rhs, &m, args.factor.seed, singular_family)?;

    let t0 = Instant::now();
    let (fact, stats) = factorize(&m, &cfg)?;
    let factor_time = t0.elapsed().as_secs_f64();

    let gcfg = GmresConfig {
        tol: args.tol,
        max_iters: args.max_iters,
        restart: args.restart,
    };
    let t1 = Instant::now();
    let result = gmres_solve(&m, Some(&fact), &b, &gcfg)?;
    let gmres_time = t1.elapsed().as_secs_f64();

    if let Some(path) = &args.history_csv {
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "iteration,preconditioned_residual")?;
        for (i, r) in result.history.iter().enumerate() {
            writeln!(f, "{},{:e}", i + 1, r)?;
        }
    }

    let (error, residual) = match &x_true {
        Some(xt) => metrics(&result.x, xt, &m, &b),
        None => {
            let mm = hlu::krylov::Metrics::compute(&result.x, &result.x, &m, &b);
            (f64::NAN, mm.residual)
        }
    };
    let error_quotient = if singular_family {
        x_true
            .as_ref()
            .map(|xt| metrics(&mean_centered(&result.x), xt, &m, &b).0)
    } else {
        None
    };
    let report = json!({
        "command": "precond",
        "source": source_name,
        "n": m.n(),
        "config": cfg,
        "gmres": { "tol": args.tol, "max_iters": args.max_iters, "restart": args.restart },
        "factor_seconds": factor_time,
        "gmres_seconds": gmres_time,
        "total_seconds": factor_time + gmres_time,
        "iterations": result.iterations,
        "converged": result.converged,
        "breakdown": result.breakdown,
        "relative_error": if error.is_nan() { None } else { Some(error) },
        "relative_error_mean_centered": error_quotient,
        "constant_nullspace": singular_family,
        "true_relative_residual": residual,
        "final_preconditioned_residual": result.history.last(),
        "aux_variables": stats.aux_var_total,
        "levels": stats.levels,
    });
    emit_report(
        &report,
        &args.out,
        &["n", "iterations", "factor_seconds", "gmres_seconds", "total_seconds"],
    );
    if result.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(2))
    }
}


fn cmd_scaling(args: ScalingArgs) -> Result<ExitCode, Error> {
    if args.sizes.is_empty() {
        return Err(Error::InvalidInput("--sizes must not be empty".into()));
    }
    println!("n,factor_seconds,solve_seconds,relative_residual");
    for &side in &args.sizes {
        let m = match args.family.as_str() {
            "poisson2d" => problems::poisson2d(side, side, Boundary::Dirichlet),
            "poisson3d" => problems::poisson3d(side, side, side, Boundary::Dirichlet),
            other => {
                return Err(Error::InvalidInput(format!(
                    "unknown scaling family '{other}'"
                )))
            }
        };
        let cfg = FactorConfig {
            rule: TruncationRule::RelativeSigma(args.eps),
            depth: DepthSpec::TargetLeaf(args.target_leaf),
            seed: args.seed,
            instrument: false,
            partition: PartitionStrategy::GraphBisection,
        };
        let (b, _) = problems::manufactured_rhs(&m, args.seed.wrapping_add(1));
        let t0 = Instant::now();
        let (fact, _stats) = factorize(&m, &cfg)?;
        let factor_time = t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let x = fact.solve(&b)?;
        let solve_time = t1.elapsed().as_secs_f64();
        let ax = m.matvec(&x);
        let res: f64 = ax
            .iter()
            .zip(&b)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            / b.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("{},{factor_time},{solve_time},{res:e}", m.n());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace(args: TraceArgs) -> Result<ExitCode, Error> {
    let (m, _name) = load_source(&args.source)?;
    if m.n() > 64 {
        return Err(Error::InvalidInput(format!(
            "trace refused for n = {} > 64",
            m.n()
        )));
    }
    let rule = TruncationRule::RelativeSigma(args.eps);
    let depth = match args.depth {
        Some(l) => DepthSpec::Depth(l),
        None => DepthSpec::TargetLeaf(args.target_leaf),
    };
    let partition = match args.partition.as_str() {
        "bisect" => PartitionStrategy::GraphBisection,
        _ => PartitionStrategy::Contiguous,
    };
    let cfg = FactorConfig {
        rule,
        depth,
        seed: 0,
        instrument: true,
        partition,
    };
    let (fact, _stats) = factorize(&m, &cfg)?;
    let trace = fact.trace();
    let text = trace.to_json_string();
    match &args.out_json {
        Some(path) => std::fs::write(path, &text)?,
        None => println!("{text}"),
    }
    if let Some(dir) = &args.dot_dir {
        std::fs::create_dir_all(dir)?;
        for step in 0..trace.events.len() {
            std::fs::write(dir.join(format!("step_{step:03}.dot")), trace.event_dot(step))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn emit_report(report: &serde_json::Value, out: &str, csv_fields: &[&str]) {
    match out {
        "csv" => {
            let mut header = Vec::new();
            let mut row = Vec::new();
            for f in csv_fields {
                header.push(f.to_string());
                row.push(
                    report
                        .get(*f)
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "".into()),
                );
            }
            println!("{}", header.join(","));
            println!("{}", row.join(","));
        }
        _ => println!("{}", serde_json::to_string_pretty(report).unwrap()),
    }
}
