use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use clap::ValueEnum;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sram_ntt::bitserial::{pim_mod_add, pim_mod_mul, pim_mod_sub, BankLayout};
use sram_ntt::params::find_ntt_prime;
use sram_ntt::refarith::schoolbook_polymul;
use sram_ntt::{
    predict_cycles, validate_params, Accelerator, CycleReport, EnergyModel, NttParams, Placement,
    Polynomial, RingMode, SramBank,
};

use crate::coeffs::{format_block, parse_blocks};
use crate::config::RunConfig;
use crate::CliError;

/// Write `text` to `--out` if given, otherwise return it for stdout.
fn emit(cfg: &RunConfig, text: String) -> Result<Option<String>, CliError> {
    match &cfg.out {
        Some(path) => {
            fs::write(path, text).map_err(|e| CliError::io(path, e))?;
            Ok(None)
        }
        None => Ok(Some(text)),
    }
}

pub fn validate(cfg: &RunConfig) -> Result<String, CliError> {
    let params = cfg.params()?;
    let bank = SramBank::for_transform(params.n(), params.width())?;
    let layout = BankLayout::new(params.width());
    let mut out = String::from("status\tvalid\n");
    let _ = writeln!(out, "{params}");
    let _ = writeln!(out, "bank_rows\t{}", bank.rows());
    let _ = writeln!(out, "bank_cols\t{}", bank.cols());
    let _ = writeln!(out, "active_cols\t{}", params.columns());
    let _ = writeln!(out, "scratchpad_rows\t{}", layout.scratchpad_rows());
    Ok(out)
}

fn energy_line(report: &CycleReport, model: &EnergyModel) -> String {
    format!("energy\t{:.3}", report.energy_estimate(model))
}

/// Multiply two polynomials in the bank and check against the schoolbook
/// product. Returns stdout text; a mismatch is a verification error after
/// the report has been written.
pub fn polymul(cfg: &RunConfig, input: Option<&Path>) -> Result<String, CliError> {
    let params = cfg.params()?;
    let (n, q) = (params.n(), params.q());
    let (a, s) = match input {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let mut blocks = parse_blocks(&text, 2, n, q)?;
            let s = blocks.pop().expect("two blocks");
            (blocks.pop().expect("two blocks"), s)
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (Polynomial::random(n, q, &mut rng), Polynomial::random(n, q, &mut rng))
        }
    };
    let mut acc = Accelerator::new(params.clone())?;
    acc.set_energy_model(cfg.energy);
    let (b, report) = acc.polymul(&a, &s)?;
    let expected = schoolbook_polymul(&params, &a, &s)?;
    let pass = b == expected;

    let mut stdout = emit(cfg, format_block(&b))?.map(|s| s + "\n").unwrap_or_default();
    let _ = writeln!(stdout, "{report}");
    let _ = writeln!(stdout, "{}", energy_line(&report, &cfg.energy));
    let _ = writeln!(stdout, "oracle\t{}", if pass { "PASS" } else { "FAIL" });
    if pass {
        Ok(stdout)
    } else {
        Err(CliError::Verification {
            output: stdout,
            message: "in-memory product differs from the schoolbook product".into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum BenchFormat {
    /// Tab-separated table with a header row
    #[default]
    Tsv,
    /// Full cycle report per configuration
    Report,
}

const BENCH_HEADER: &str = "n\tN\tq\tnumeric\tstages\tpredicted_cycles\tsimulated_cycles\tmatch\t\
single_activations\tdual_activations\trow_writes\tsensed_bits\twritten_bits\trouted_bits\t\
latch_cycles\tenergy";

struct BenchRow {
    params: NttParams,
    predicted: CycleReport,
    simulated: CycleReport,
}

/// Real NTT prime for `(n, N)` if one fits, otherwise timing-only params.
fn bench_params(n: usize, width: u32) -> Result<NttParams, CliError> {
    Ok(match find_ntt_prime(n, width, RingMode::Cyclic) {
        Some(q) => validate_params(q, n, width, RingMode::Cyclic)?,
        None => NttParams::timing_model(n, width)?,
    })
}

fn bench_row(n: usize, width: u32, seed: u64) -> Result<BenchRow, CliError> {
    let params = bench_params(n, width)?;
    let predicted = predict_cycles(n, width)?;
    let mut acc = Accelerator::new(params.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64) << 8 ^ width as u64);
    let a = Polynomial::random(n, params.q(), &mut rng);
    let (_, simulated) = acc.ntt(&a)?;
    Ok(BenchRow {
        params,
        predicted,
        simulated,
    })
}

pub fn default_sweep(cfg: &RunConfig) -> (Vec<usize>, Vec<u32>) {
    let sizes = match cfg.n {
        Some(n) => vec![n],
        None if cfg.quick => (2..=6).map(|b| 1 << b).collect(),
        None => (2..=10).map(|b| 1 << b).collect(),
    };
    let widths = match cfg.width {
        Some(w) => vec![w],
        None if cfg.quick => vec![8, 14],
        None => vec![8, 14, 32],
    };
    (sizes, widths)
}

/// Simulate every `(n, N)` pair on its own bank, in parallel, and tabulate
/// in sweep order.
pub fn bench(
    cfg: &RunConfig,
    sizes: &[usize],
    widths: &[u32],
    format: BenchFormat,
) -> Result<String, CliError> {
    let jobs: Vec<(usize, u32)> = widths
        .iter()
        .flat_map(|&w| sizes.iter().map(move |&n| (n, w)))
        .collect();
    let results: Mutex<Vec<Option<Result<BenchRow, CliError>>>> =
        Mutex::new((0..jobs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = thread::available_parallelism().map_or(1, |p| p.get()).min(jobs.len().max(1));
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(n, w)) = jobs.get(i) else { break };
                let row = bench_row(n, w, cfg.seed);
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });

    let mut out = String::new();
    if format == BenchFormat::Tsv {
        out.push_str(BENCH_HEADER);
        out.push('\n');
    }
    let mut mismatches = Vec::new();
    for (slot, (n, w)) in results.into_inner().unwrap().into_iter().zip(&jobs) {
        let row = slot.expect("every job ran")?;
        let matches = row.predicted == row.simulated;
        if !matches {
            mismatches.push(format!("n={n} N={w}"));
        }
        let r = &row.simulated;
        match format {
            BenchFormat::Tsv => {
                let e = &r.events;
                let _ = writeln!(
                    out,
                    "{n}\t{w}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3}",
                    row.params.q(),
                    if row.params.is_numerically_valid() { "yes" } else { "no" },
                    r.stages.len(),
                    row.predicted.total(),
                    r.total(),
                    if matches { "yes" } else { "no" },
                    e.single_activations,
                    e.dual_activations,
                    e.row_writes,
                    e.sensed_bits,
                    e.written_bits,
                    e.routed_bits,
                    e.latch_cycles,
                    r.energy_estimate(&cfg.energy)
                );
            }
            BenchFormat::Report => {
                let _ = writeln!(out, "[n={n} N={w} q={}]", row.params.q());
                let _ = writeln!(out, "{r}");
                let _ = writeln!(out, "predicted_total\t{}", row.predicted.total());
                let _ = writeln!(out, "{}", energy_line(r, &cfg.energy));
                let _ = writeln!(out, "match\t{}\n", if matches { "yes" } else { "no" });
            }
        }
    }
    let stdout = emit(cfg, out)?.unwrap_or_default();
    if mismatches.is_empty() {
        Ok(stdout)
    } else {
        Err(CliError::Verification {
            output: stdout,
            message: format!("prediction differs from simulation for {}", mismatches.join(", ")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum TraceScope {
    /// One modular addition on every column
    Add,
    /// One modular subtraction
    Sub,
    /// One modular multiplication
    Mul,
    /// The first forward butterfly stage
    Stage,
    /// A complete forward transform
    #[default]
    Ntt,
}

/// Micro-op trace of one operation on random data drawn from the seed.
pub fn trace(cfg: &RunConfig, scope: TraceScope) -> Result<String, CliError> {
    let params = cfg.params()?;
    let (n, q) = (params.n(), params.q());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let a = Polynomial::random(n, q, &mut rng);
    let mut acc = Accelerator::new(params.clone())?;
    acc.load(&a, Placement::TransformInput)?;
    let layout = BankLayout::new(params.width());
    for c in 0..params.columns() {
        acc.bank_mut()
            .host_write_word(c, layout.w.base_row, params.width(), rng.gen_range(0..q))?;
    }

    let log = Arc::new(Mutex::new(String::new()));
    let sink = Arc::clone(&log);
    acc.bank_mut().set_trace_hook(Some(Box::new(move |e| {
        let mut s = sink.lock().unwrap();
        let _ = writeln!(s, "{e}");
    })));
    let bank = acc.bank_mut();
    match scope {
        TraceScope::Add => {
            pim_mod_add(bank, layout.a, layout.b, layout.sum_out(), q)?;
        }
        TraceScope::Sub => {
            pim_mod_sub(bank, layout.a, layout.b, layout.diff_out(), layout.s1, q)?;
        }
        TraceScope::Mul => {
            pim_mod_mul(bank, layout.w, layout.b, layout.b, [layout.s0, layout.s1], q)?;
        }
        TraceScope::Stage => {
            acc.forward_stage(1)?;
        }
        TraceScope::Ntt => {
            acc.ntt(&a)?;
        }
    }
    acc.bank_mut().set_trace_hook(None);
    let text = std::mem::take(&mut *log.lock().unwrap());
    Ok(emit(cfg, text)?.unwrap_or_default())
}
