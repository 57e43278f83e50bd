//! Timing harness comparing two CP algorithms on identical random problems.

use std::io::Write;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algorithms::{run, Algorithm, SolveOptions, UpdateOrder};
use crate::error::{Error, Result};
use crate::model::KruskalModel;
use crate::mttkrp::{predicted_mult_count, CountVariant};
use crate::tensor::{DenseTensor, Shape};

/// A random dense tensor and a random initial model, all entries
/// uniform(0, 1), fully determined by `seed`.
pub fn generate_problem(dims: &[usize], rank: usize, seed: u64) -> Result<(DenseTensor, KruskalModel)> {
    let shape = Shape::new(dims.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..shape.len()).map(|_| rng.sample::<f64, _>(Open01)).collect();
    let y = DenseTensor::new(dims.to_vec(), values)?;
    let init = KruskalModel::random(dims, rank, &mut rng)?;
    Ok((y, init))
}

/// `t_als / t_fast`.
pub fn speed_ratio(t_als: f64, t_fast: f64) -> Result<f64> {
    if t_als <= 0.0 || t_fast <= 0.0 || !t_als.is_finite() || !t_fast.is_finite() {
        return Err(Error::argument(format!(
            "times must be positive and finite, got {t_als} and {t_fast}"
        )));
    }
    Ok(t_als / t_fast)
}

/// Analytic multiplications per sweep of the direct route over the fast one,
/// both summed over all modes.
pub fn count_ratio(dims: &[usize], rank: usize) -> Result<f64> {
    let (direct, fast) = predicted_sweep_counts(dims, rank)?;
    Ok(direct as f64 / fast as f64)
}

/// Predicted per-sweep multiplication totals `(direct, fast)`. The fast
/// total is evaluated on the ascending arrangement of `dims`.
pub fn predicted_sweep_counts(dims: &[usize], rank: usize) -> Result<(u64, u64)> {
    let shape = Shape::new(dims.to_vec())?;
    let mut sorted_dims = dims.to_vec();
    sorted_dims.sort_unstable();
    let sorted = Shape::new(sorted_dims)?;
    let mut direct = 0;
    let mut fast = 0;
    for n in 0..dims.len() {
        direct += predicted_mult_count(&shape, rank, n, CountVariant::Direct)?;
        fast += predicted_mult_count(&sorted, rank, n, CountVariant::Fast)?;
    }
    Ok((direct, fast))
}

/// One `(dims, R)` combination.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BenchCell {
    pub dims: Vec<usize>,
    pub rank: usize,
}

impl BenchCell {
    /// Bytes for the tensor plus one permuted working copy.
    pub fn estimated_bytes(&self) -> u128 {
        let len: u128 = self.dims.iter().map(|&d| d as u128).product();
        2 * 8 * len
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub cells: Vec<BenchCell>,
    pub iters: usize,
    pub reps: usize,
    pub seed: u64,
    /// The baseline and the contender; ratios are `first / second`.
    pub algos: [Algorithm; 2],
    /// Run the baseline in the contender's (pivot) mode order.
    pub matched_order: bool,
    /// Cells estimated above this many bytes are skipped.
    pub mem_budget: u64,
}

pub const DEFAULT_MEM_BUDGET: u64 = 1 << 30;

impl BenchConfig {
    /// Enough repetitions for at least 200 measured iterations.
    pub fn default_reps(iters: usize) -> usize {
        200usize.div_ceil(iters.max(1)).max(1)
    }

    pub fn new(cells: Vec<BenchCell>, iters: usize) -> Self {
        BenchConfig {
            cells,
            iters,
            reps: Self::default_reps(iters),
            seed: 42,
            algos: [Algorithm::AlsDirect, Algorithm::AlsFast],
            matched_order: false,
            mem_budget: DEFAULT_MEM_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.reps == 0 {
            return Err(Error::argument("iterations and repetitions must be at least 1"));
        }
        for cell in &self.cells {
            Shape::new(cell.dims.clone())?;
            if cell.rank == 0 {
                return Err(Error::argument("rank must be at least 1"));
            }
        }
        Ok(())
    }
}

/// Equal dims `I` in `{10, 20, .., max_dim}`, ranks `{1, 10, 20, .., I}`,
/// orders `orders`, keeping cells within `mem_budget`.
pub fn default_grid(max_dim: usize, orders: std::ops::RangeInclusive<usize>, mem_budget: u64) -> Vec<BenchCell> {
    let mut cells = Vec::new();
    for order in orders {
        for i in (10..=max_dim).step_by(10) {
            let ranks = std::iter::once(1).chain((10..=i).step_by(10));
            for rank in ranks {
                let cell = BenchCell {
                    dims: vec![i; order],
                    rank,
                };
                if cell.estimated_bytes() <= mem_budget as u128 {
                    cells.push(cell);
                }
            }
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub iters: usize,
    pub reps: usize,
    /// Mean seconds per iteration of the baseline.
    pub t_direct: f64,
    /// Mean seconds per iteration of the contender.
    pub t_fast: f64,
    /// Ratio of the mean times.
    pub rho: f64,
    /// Mean of the per-repetition ratios.
    pub rho_mean_of_runs: f64,
    /// Counted multiplications per iteration.
    pub mults_direct: u64,
    pub mults_fast: u64,
    /// Predicted per-sweep count ratio.
    pub count_ratio: f64,
    /// Largest factor difference between the two final models of the first
    /// repetition.
    pub factor_gap: f64,
    /// Why the cell has no timings, if it has none.
    pub note: Option<String>,
}

impl BenchRecord {
    fn failed(cell: &BenchCell, cfg: &BenchConfig, note: String) -> Self {
        BenchRecord {
            dims: cell.dims.clone(),
            rank: cell.rank,
            iters: cfg.iters,
            reps: cfg.reps,
            t_direct: f64::NAN,
            t_fast: f64::NAN,
            rho: f64::NAN,
            rho_mean_of_runs: f64::NAN,
            mults_direct: 0,
            mults_fast: 0,
            count_ratio: count_ratio(&cell.dims, cell.rank).unwrap_or(f64::NAN),
            factor_gap: f64::NAN,
            note: Some(note),
        }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims_label(&self) -> String {
        self.dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
    }
}

/// Runs every cell in turn. Failures inside a cell are recorded in its note
/// and the run moves on.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    run_benchmark_with(cfg, |_| {})
}

/// As [`run_benchmark`], reporting each record as soon as it is complete.
pub fn run_benchmark_with(cfg: &BenchConfig, mut on_record: impl FnMut(&BenchRecord)) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.cells.len());
    for cell in &cfg.cells {
        let record = if cell.estimated_bytes() > cfg.mem_budget as u128 {
            BenchRecord::failed(
                cell,
                cfg,
                format!("skipped: needs about {} bytes, budget {}", cell.estimated_bytes(), cfg.mem_budget),
            )
        } else {
            bench_cell(cell, cfg).unwrap_or_else(|e| BenchRecord::failed(cell, cfg, e.to_string()))
        };
        on_record(&record);
        records.push(record);
    }
    Ok(records)
}

fn bench_cell(cell: &BenchCell, cfg: &BenchConfig) -> Result<BenchRecord> {
    let opts_for = |algo: Algorithm| SolveOptions {
        max_iters: cfg.iters,
        tol: 0.0,
        track_cost: false,
        order: if cfg.matched_order && algo != Algorithm::AlsFast {
            UpdateOrder::Pivot
        } else {
            UpdateOrder::Standard
        },
        seed: cfg.seed,
        ..SolveOptions::default()
    };
    let opts = [opts_for(cfg.algos[0]), opts_for(cfg.algos[1])];
    let mut totals = [0.0f64; 2];
    let mut mults = [0u64; 2];
    let mut ratios = Vec::with_capacity(cfg.reps);
    let mut factor_gap = f64::NAN;

    for rep in 0..cfg.reps {
        let (y, init) = generate_problem(&cell.dims, cell.rank, cfg.seed.wrapping_add(rep as u64))?;
        let mut seconds = [0.0; 2];
        let mut finals = Vec::with_capacity(2);
        for k in 0..2 {
            let (model, trace) = run(&y, &init, &opts[k], cfg.algos[k])?;
            seconds[k] = trace.total_seconds();
            mults[k] = trace.mults.last().copied().unwrap_or(0) / cfg.iters as u64;
            finals.push(model);
        }
        if rep == 0 {
            factor_gap = finals[0]
                .factors()
                .iter()
                .zip(finals[1].factors())
                .map(|(a, b)| a.max_abs_diff(b))
                .fold(0.0, f64::max);
        }
        ratios.push(speed_ratio(seconds[0], seconds[1])?);
        totals[0] += seconds[0];
        totals[1] += seconds[1];
    }

    let per_iter = (cfg.reps * cfg.iters) as f64;
    let t_direct = totals[0] / per_iter;
    let t_fast = totals[1] / per_iter;
    Ok(BenchRecord {
        dims: cell.dims.clone(),
        rank: cell.rank,
        iters: cfg.iters,
        reps: cfg.reps,
        t_direct,
        t_fast,
        rho: speed_ratio(t_direct, t_fast)?,
        rho_mean_of_runs: ratios.iter().sum::<f64>() / ratios.len() as f64,
        mults_direct: mults[0],
        mults_fast: mults[1],
        count_ratio: count_ratio(&cell.dims, cell.rank)?,
        factor_gap,
        note: None,
    })
}

/// CSV column names, in order.
pub const CSV_COLUMNS: [&str; 13] = [
    "N",
    "dims",
    "R",
    "iters",
    "reps",
    "t_direct",
    "t_fast",
    "rho",
    "mults_direct",
    "mults_fast",
    "count_ratio",
    "rho_mean_of_runs",
    "note",
];

pub fn csv_header() -> csv::StringRecord {
    csv::StringRecord::from(CSV_COLUMNS.to_vec())
}

fn csv_row(r: &BenchRecord) -> Vec<String> {
    vec![
        r.order().to_string(),
        r.dims_label(),
        r.rank.to_string(),
        r.iters.to_string(),
        r.reps.to_string(),
        format!("{:e}", r.t_direct),
        format!("{:e}", r.t_fast),
        format!("{:.6}", r.rho),
        r.mults_direct.to_string(),
        r.mults_fast.to_string(),
        format!("{:.6}", r.count_ratio),
        format!("{:.6}", r.rho_mean_of_runs),
        r.note.clone().unwrap_or_default(),
    ]
}

/// Streaming CSV output: header on creation, one row per record.
pub struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(inner: W) -> std::io::Result<Self> {
        let mut writer = csv::Writer::from_writer(inner);
        writer.write_record(&csv_header()).map_err(std::io::Error::other)?;
        Ok(CsvSink { writer })
    }

    pub fn write(&mut self, record: &BenchRecord) -> std::io::Result<()> {
        self.writer.write_record(csv_row(record)).map_err(std::io::Error::other)?;
        self.writer.flush()
    }
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> std::io::Result<()> {
    let mut sink = CsvSink::new(out)?;
    for r in records {
        sink.write(r)?;
    }
    Ok(())
}

/// Fixed-width table for terminals.
pub fn format_table(records: &[BenchRecord]) -> String {
    let mut out = format!(
        "{:>2} {:>18} {:>4} {:>12} {:>12} {:>8} {:>8} {:>14} {:>14} {:>8}  note\n",
        "N", "dims", "R", "t_direct", "t_fast", "rho", "rho_runs", "mults_direct", "mults_fast", "ratio"
    );
    for r in records {
        out.push_str(&format!(
            "{:>2} {:>18} {:>4} {:>12.4e} {:>12.4e} {:>8.2} {:>8.2} {:>14} {:>14} {:>8.2}  {}\n",
            r.order(),
            r.dims_label(),
            r.rank,
            r.t_direct,
            r.t_fast,
            r.rho,
            r.rho_mean_of_runs,
            r.mults_direct,
            r.mults_fast,
            r.count_ratio,
            r.note.as_deref().unwrap_or("")
        ));
    }
    out
}
