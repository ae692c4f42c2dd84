//! Built-in checks: exhaustive modular arithmetic, address-mapping
//! properties, transform round trips and cycle predictions.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sram_ntt::bitserial::{pim_mod_add, pim_mod_mul, pim_mod_sub, BankLayout};
use sram_ntt::dataflow::interstage_permutation;
use sram_ntt::periph::Fault;
use sram_ntt::{
    predict_cycles, predict_intt, predict_polymul, validate_params, Accelerator, AddressMap,
    Polynomial, RingMode, SramBank,
};

use crate::config::RunConfig;
use crate::CliError;

type SuiteResult = Result<String, String>;
type Suite<'a> = (&'static str, Box<dyn Fn() -> SuiteResult + 'a>);

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

#[derive(Clone, Copy)]
enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// Every `(x, y)` pair in `Z_q` on its own column, one op on all of them.
fn exhaustive_op(op: ArithOp, q: u64, width: u32, fault: Option<Fault>) -> Result<(), String> {
    let layout = BankLayout::new(width);
    let cols = (q * q) as usize;
    let mut bank = SramBank::new(layout.rows(), cols.next_power_of_two()).map_err(err)?;
    bank.set_active_columns(cols).map_err(err)?;
    bank.inject_fault(fault);
    for c in 0..cols {
        let (x, y) = (c as u64 / q, c as u64 % q);
        bank.host_write_word(c, layout.a.base_row, width, x).map_err(err)?;
        bank.host_write_word(c, layout.b.base_row, width, y).map_err(err)?;
        bank.host_write_word(c, layout.w.base_row, width, x).map_err(err)?;
    }
    let out = match op {
        ArithOp::Add => {
            pim_mod_add(&mut bank, layout.a, layout.b, layout.sum_out(), q).map_err(err)?;
            layout.sum_out()
        }
        ArithOp::Sub => {
            pim_mod_sub(&mut bank, layout.a, layout.b, layout.diff_out(), layout.s1, q)
                .map_err(err)?;
            layout.diff_out()
        }
        ArithOp::Mul => {
            pim_mod_mul(&mut bank, layout.w, layout.b, layout.b, [layout.s0, layout.s1], q)
                .map_err(err)?;
            layout.b
        }
    };
    for c in 0..cols {
        let (x, y) = (c as u64 / q, c as u64 % q);
        let expected = match op {
            ArithOp::Add => (x + y) % q,
            ArithOp::Sub => (x + q - y) % q,
            ArithOp::Mul => x * y % q,
        };
        let got = bank.host_read_word(c, out.base_row, width).map_err(err)?;
        if got != expected {
            return Err(format!("q={q} N={width}: {x},{y} gave {got}, expected {expected}"));
        }
    }
    Ok(())
}

fn arith_suite(op: ArithOp, fault: Option<Fault>) -> SuiteResult {
    let cases = [(13, 6), (17, 7)];
    for (q, width) in cases {
        exhaustive_op(op, q, width, fault)?;
    }
    Ok(format!("{} pairs", cases.iter().map(|(q, _)| q * q).sum::<u64>()))
}

fn mapping_suite(max_log: u32) -> SuiteResult {
    let mut checked = 0;
    for log_n in 1..=max_log {
        let n = 1usize << log_n;
        let perm = interstage_permutation(n).map_err(err)?;
        for stage in 1..=log_n {
            let map = AddressMap::new(n, stage).map_err(err)?;
            let next = (stage < log_n)
                .then(|| AddressMap::new(n, stage + 1))
                .transpose()
                .map_err(err)?;
            let mut seen = vec![false; n];
            for i in 0..n {
                let a = map.map(i).map_err(err)?.value;
                if seen[a] {
                    return Err(format!("n={n} stage {stage}: address {a} used twice"));
                }
                seen[a] = true;
                if map.index_of(a) != i {
                    return Err(format!("n={n} stage {stage}: index_of is not the inverse at {i}"));
                }
                // Butterfly partners share a column.
                let half = n >> stage;
                let block = i / (2 * half) * 2 * half;
                if i - block < half {
                    let b = map.map(i + half).map_err(err)?.value;
                    if a / 2 != b / 2 || a % 2 != 0 {
                        return Err(format!("n={n} stage {stage}: {i} and {} not paired", i + half));
                    }
                }
                if let Some(next) = &next {
                    if perm[a] != next.map(i).map_err(err)?.value {
                        return Err(format!("n={n} stage {stage}: routing misplaces {i}"));
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} placements up to n=2^{max_log}"))
}

fn accelerator(q: u64, n: usize, mode: RingMode, fault: Option<Fault>) -> Result<Accelerator, String> {
    let params = validate_params(q, n, sram_ntt::params::min_width(q), mode).map_err(err)?;
    let mut acc = Accelerator::new(params).map_err(err)?;
    acc.bank_mut().inject_fault(fault);
    Ok(acc)
}

fn roundtrip_suite(max_n: usize, seed: u64, fault: Option<Fault>) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = 12289;
    let mut n = 2;
    while n <= max_n {
        let mut acc = accelerator(q, n, RingMode::Cyclic, fault)?;
        let a = Polynomial::random(n, q, &mut rng);
        let (a_hat, _) = acc.ntt(&a).map_err(err)?;
        let (back, _) = acc.intt(&a_hat).map_err(err)?;
        if back != a {
            return Err(format!("n={n}: INTT(NTT(a)) != a"));
        }
        n *= 2;
    }
    Ok(format!("q={q}, n=2..{max_n}"))
}

fn prediction_suite(max_n: usize, seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = 12289;
    let width = sram_ntt::params::min_width(q);
    let mut n = 2;
    let mut runs = 0;
    while n <= max_n {
        let mut acc = accelerator(q, n, RingMode::Cyclic, None)?;
        let a = Polynomial::random(n, q, &mut rng);
        let (a_hat, forward) = acc.ntt(&a).map_err(err)?;
        let (_, inverse) = acc.intt(&a_hat).map_err(err)?;
        if forward != predict_cycles(n, width).map_err(err)? {
            return Err(format!("n={n}: forward report differs from prediction"));
        }
        if inverse != predict_intt(n, width).map_err(err)? {
            return Err(format!("n={n}: inverse report differs from prediction"));
        }
        for mode in [RingMode::Cyclic, RingMode::Negacyclic] {
            let mut acc = accelerator(q, n, mode, None)?;
            let s = Polynomial::random(n, q, &mut rng);
            let (_, report) = acc.polymul(&a, &s).map_err(err)?;
            if report != predict_polymul(n, width, mode).map_err(err)? {
                return Err(format!("n={n} {mode}: product report differs from prediction"));
            }
        }
        runs += 4;
        n *= 2;
    }
    Ok(format!("{runs} reports"))
}

pub fn run(cfg: &RunConfig, inject_fault: bool) -> Result<String, CliError> {
    let fault = inject_fault.then_some(Fault::StrictAddComparator);
    let (max_log, max_n) = if cfg.quick { (8, 64) } else { (12, 1024) };
    let suites: Vec<Suite> = vec![
        ("mod-add", Box::new(move || arith_suite(ArithOp::Add, fault))),
        ("mod-sub", Box::new(move || arith_suite(ArithOp::Sub, fault))),
        ("mod-mul", Box::new(move || arith_suite(ArithOp::Mul, fault))),
        ("address-mapping", Box::new(move || mapping_suite(max_log))),
        ("ntt-roundtrip", Box::new(move || roundtrip_suite(max_n, cfg.seed, fault))),
        ("cycle-prediction", Box::new(move || prediction_suite(max_n.min(256), cfg.seed))),
    ];
    let mut out = String::new();
    let mut failed = Vec::new();
    for (name, suite) in &suites {
        let start = Instant::now();
        let result = suite();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => {
                let _ = writeln!(out, "PASS\t{name}\t{detail}\t{secs:.2}s");
            }
            Err(detail) => {
                let _ = writeln!(out, "FAIL\t{name}\t{detail}\t{secs:.2}s");
                failed.push(*name);
            }
        }
    }
    let _ = writeln!(out, "{} of {} suites passed", suites.len() - failed.len(), suites.len());
    if failed.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Verification {
            output: out,
            message: format!("failing suites: {}", failed.join(", ")),
        })
    }
}
