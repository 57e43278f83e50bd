use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fastcp::bench::{self, BenchCell, BenchConfig, CsvSink};
use fastcp::io::{read_tensor, write_model};
use fastcp::{
    cp_gradient_all, mttkrp_direct, predicted_mult_count, select_pivot, Algorithm, CostCounter,
    CountVariant, DenseTensor, Matrix, Shape, SolveOptions, UpdateOrder,
};

#[derive(Parser)]
#[command(name = "fastcp", version, about = "Dense CP decomposition with a fast all-mode MTTKRP")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time two ALS variants on random problems and report speed ratios.
    Bench(BenchArgs),
    /// Fit a CP model to a tensor file and write the factors.
    Decompose(DecomposeArgs),
    /// Compare the fast and direct MTTKRP against a brute-force sum.
    Gradcheck(GradcheckArgs),
    /// Print measured and predicted multiplication counts per mode.
    Counts(CountsArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Standard,
    Pivot,
}

#[derive(clap::Args)]
struct BenchArgs {
    /// Comma-separated dims of a single cell; omit to run the default grid.
    #[arg(long, value_delimiter = ',')]
    dims: Option<Vec<usize>>,
    /// Rank of the single cell.
    #[arg(long, requires = "dims")]
    rank: Option<usize>,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    /// Repetitions per cell [default: enough for 200 measured iterations].
    #[arg(long)]
    reps: Option<usize>,
    /// Baseline and contender, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "als-direct,als-fast")]
    algos: Vec<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write results here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip cells whose tensor needs more than this many bytes.
    #[arg(long, default_value_t = bench::DEFAULT_MEM_BUDGET)]
    mem_budget: u64,
    /// Largest dim of the default grid.
    #[arg(long, default_value_t = 40)]
    max_dim: usize,
    /// Smallest order of the default grid.
    #[arg(long, default_value_t = 3)]
    min_order: usize,
    /// Largest order of the default grid.
    #[arg(long, default_value_t = 7)]
    max_order: usize,
    /// Run the baseline in the contender's mode order.
    #[arg(long)]
    matched_order: bool,
}

#[derive(clap::Args)]
struct DecomposeArgs {
    /// Tensor file (text or binary, detected from its header).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    rank: usize,
    #[arg(long, default_value = "als-fast")]
    algo: String,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    /// Relative cost-change tolerance; 0 runs all iterations.
    #[arg(long, default_value_t = 0.0)]
    tol: f64,
    /// Factor file to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Step size for gradient descent.
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    /// Mode order for als-direct and mu.
    #[arg(long, value_enum, default_value_t = Order::Standard)]
    order: Order,
}

#[derive(clap::Args)]
struct GradcheckArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    rank: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
}

#[derive(clap::Args)]
struct CountsArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    rank: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bench(args) => bench_cmd(args),
        Command::Decompose(args) => decompose_cmd(args),
        Command::Gradcheck(args) => gradcheck_cmd(args),
        Command::Counts(args) => counts_cmd(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout()),
    })
}

fn bench_cmd(args: BenchArgs) -> Result<bool> {
    if args.algos.len() != 2 {
        bail!("--algos takes exactly two algorithms, got {}", args.algos.len());
    }
    let algos = [args.algos[0].parse::<Algorithm>()?, args.algos[1].parse::<Algorithm>()?];
    let cells = match (&args.dims, args.rank) {
        (Some(dims), Some(rank)) => vec![BenchCell { dims: dims.clone(), rank }],
        (Some(_), None) => bail!("--dims needs --rank"),
        _ => bench::default_grid(args.max_dim, args.min_order..=args.max_order, args.mem_budget),
    };
    let mut cfg = BenchConfig::new(cells, args.iters);
    cfg.reps = args.reps.unwrap_or(cfg.reps);
    cfg.seed = args.seed;
    cfg.algos = algos;
    cfg.matched_order = args.matched_order;
    cfg.mem_budget = args.mem_budget;

    let mut out = output(&args.out)?;
    let records = match args.format {
        Format::Csv => {
            let mut sink = CsvSink::new(&mut out)?;
            let mut failure = None;
            let records = bench::run_benchmark_with(&cfg, |r| {
                if let Err(e) = sink.write(r) {
                    failure.get_or_insert(e);
                }
            })?;
            if let Some(e) = failure {
                return Err(e).context("writing CSV");
            }
            records
        }
        Format::Table => {
            let records = bench::run_benchmark_with(&cfg, |r| {
                eprintln!("done {} R={}: rho {:.2}", r.dims_label(), r.rank, r.rho);
            })?;
            out.write_all(bench::format_table(&records).as_bytes())?;
            records
        }
    };
    out.flush()?;
    Ok(records.iter().all(|r| r.note.is_none()))
}

fn decompose_cmd(args: DecomposeArgs) -> Result<bool> {
    let y = read_tensor(&args.input)?;
    let algo: Algorithm = args.algo.parse()?;
    let init = fastcp::KruskalModel::random_seeded(y.dims(), args.rank, args.seed)?;
    let opts = SolveOptions {
        max_iters: args.iters,
        tol: args.tol,
        seed: args.seed,
        step_size: args.step,
        order: match args.order {
            Order::Standard => UpdateOrder::Standard,
            Order::Pivot => UpdateOrder::Pivot,
        },
        ..SolveOptions::default()
    };
    let (model, trace) = fastcp::run(&y, &init, &opts, algo)?;
    println!("{:>5} {:>16} {:>12} {:>10}", "iter", "cost", "rel_error", "seconds");
    for k in 0..trace.iterations() {
        println!(
            "{:>5} {:>16.8e} {:>12.4e} {:>10.4e}",
            k + 1,
            trace.cost[k],
            trace.rel_error[k],
            trace.seconds[k]
        );
    }
    write_model(&args.out, &model)?;
    eprintln!("wrote {}", args.out.display());
    Ok(trace.cost.iter().all(|c| c.is_finite()))
}

/// Entry-by-entry evaluation of `Σ_{i_{-n}} y(i) Π_{k≠n} a_r(k)[i_k]`.
fn brute_force(y: &DenseTensor, factors: &[Matrix], n: usize) -> Matrix {
    let rank = factors[0].cols();
    let mut out = Matrix::zeros(y.dims()[n], rank);
    for (lin, &v) in y.values().iter().enumerate() {
        let idx = y.shape().multi_index(lin).expect("in range");
        for r in 0..rank {
            let w: f64 = (0..y.order()).filter(|&k| k != n).map(|k| factors[k][(idx[k], r)]).product();
            out[(idx[n], r)] += v * w;
        }
    }
    out
}

/// Largest entrywise `|a - b| / |b|`; entries where `b` is zero use `|a|`.
fn relative_gap(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| if *y == 0.0 { x.abs() } else { (x - y).abs() / y.abs() })
        .fold(0.0, f64::max)
}

fn gradcheck_cmd(args: GradcheckArgs) -> Result<bool> {
    let mut worst: f64 = 0.0;
    for trial in 0..args.trials {
        let (y, init) = bench::generate_problem(&args.dims, args.rank, args.seed.wrapping_add(trial as u64))?;
        let factors = init.factors();
        let fast = cp_gradient_all(&y, factors, &mut CostCounter::new())?;
        let mut line = format!("trial {trial:>3}:");
        for (n, g) in fast.iter().enumerate() {
            let oracle = brute_force(&y, factors, n);
            let direct = mttkrp_direct(&y, factors, n, &mut CostCounter::new())?;
            let e = relative_gap(g, &oracle).max(relative_gap(&direct, &oracle));
            worst = worst.max(e);
            line.push_str(&format!(" mode {n} {e:.2e}"));
        }
        println!("{line}");
    }
    let ok = worst <= args.tol;
    println!("max relative error {worst:.3e} (tolerance {:.1e}): {}", args.tol, if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn counts_cmd(args: CountsArgs) -> Result<bool> {
    let mut sorted = args.dims.clone();
    sorted.sort_unstable();
    let shape = Shape::new(sorted.clone())?;
    let pivot = select_pivot(&shape)?;
    let y = DenseTensor::zeros(sorted.clone())?;
    let factors: Vec<Matrix> = sorted.iter().map(|&d| Matrix::filled(d, args.rank, 1.0)).collect();
    let mut fast = CostCounter::new();
    cp_gradient_all(&y, &factors, &mut fast)?;
    let mut direct = CostCounter::new();
    for n in 0..sorted.len() {
        mttkrp_direct(&y, &factors, n, &mut direct)?;
    }
    println!("dims {sorted:?} (ascending), rank {}, pivot mode {pivot}", args.rank);
    println!(
        "{:>4} {:>14} {:>14} {:>14} {:>14} {:>14}",
        "mode", "direct", "direct_model", "fast", "fast_table", "fast_derived"
    );
    for n in 0..sorted.len() {
        println!(
            "{:>4} {:>14} {:>14} {:>14} {:>14} {:>14}",
            n,
            direct.mode(n),
            predicted_mult_count(&shape, args.rank, n, CountVariant::Direct)?,
            fast.mode(n),
            predicted_mult_count(&shape, args.rank, n, CountVariant::Fast)?,
            predicted_mult_count(&shape, args.rank, n, CountVariant::FastDerived)?,
        );
    }
    println!("totals: direct {} fast {}", direct.total(), fast.total());
    Ok(true)
}
