//! Transform parameters: modulus, size, operand width and the roots of unity
//! derived from them.
//!
//! Everything downstream (twiddle tables, bank geometry, oracles) is driven
//! by a validated [`NttParams`]. Roots are chosen deterministically as the
//! smallest element of the required order so that runs are reproducible.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::dataflow::{bit_reverse, AddressMap};

/// Largest supported operand width in bits. Words are moved as `u64`.
pub const MAX_WIDTH: u32 = 64;

/// Guard bits required between the modulus and the operand width.
pub const HEADROOM_BITS: u32 = 2;

/// Largest supported transform size (log2).
pub const MAX_LOG_N: u32 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParamsError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("transform size {0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("no primitive {order}-th root of unity modulo {q}")]
    NoRootExists { q: u64, order: u64 },
    #[error("operand width {width} is too small for modulus {q}: need at least {required} bits")]
    InsufficientBitWidth { q: u64, width: u32, required: u32 },
    #[error("operand width {0} exceeds {MAX_WIDTH} bits")]
    WidthTooLarge(u32),
    #[error("stage {stage} out of range 1..={max}")]
    StageOutOfRange { stage: u32, max: u32 },
}

/// Which quotient ring the polynomial product is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RingMode {
    /// `Z_q[x] / (x^n - 1)`
    Cyclic,
    /// `Z_q[x] / (x^n + 1)`, realised with 2n-th root weighting.
    Negacyclic,
}

impl RingMode {
    /// Order of the root of unity this mode needs for a size-`n` transform.
    pub fn root_order(self, n: usize) -> u64 {
        match self {
            RingMode::Cyclic => n as u64,
            RingMode::Negacyclic => 2 * n as u64,
        }
    }
}

impl fmt::Display for RingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RingMode::Cyclic => "cyclic",
            RingMode::Negacyclic => "negacyclic",
        })
    }
}

impl FromStr for RingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cyclic" => Ok(RingMode::Cyclic),
            "negacyclic" => Ok(RingMode::Negacyclic),
            other => Err(format!("unknown ring mode `{other}` (expected cyclic or negacyclic)")),
        }
    }
}

/// Direction of a transform pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Forward => "ntt",
            Direction::Inverse => "intt",
        })
    }
}

/// Validated transform parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NttParams {
    q: u64,
    n: usize,
    log_n: u32,
    width: u32,
    w: u64,
    w_inv: u64,
    n_inv: u64,
    psi: Option<u64>,
    psi_inv: Option<u64>,
    mode: RingMode,
    numerically_valid: bool,
}

impl NttParams {
    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn log_n(&self) -> u32 {
        self.log_n
    }

    /// Operand width `N` in bits.
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Primitive n-th root of unity.
    pub fn w(&self) -> u64 {
        self.w
    }

    pub fn w_inv(&self) -> u64 {
        self.w_inv
    }

    pub fn n_inv(&self) -> u64 {
        self.n_inv
    }

    /// Primitive 2n-th root of unity, negacyclic mode only.
    pub fn psi(&self) -> Option<u64> {
        self.psi
    }

    pub fn psi_inv(&self) -> Option<u64> {
        self.psi_inv
    }

    pub fn mode(&self) -> RingMode {
        self.mode
    }

    /// False for [`NttParams::timing_model`] parameters, whose roots are
    /// placeholders: such runs have exact cycle and event counts but
    /// meaningless numeric output.
    pub fn is_numerically_valid(&self) -> bool {
        self.numerically_valid
    }

    /// Number of butterfly columns, `n / 2`.
    pub fn columns(&self) -> usize {
        self.n / 2
    }

    /// Twiddle factor used by each physical column at `stage` of the forward
    /// transform.
    pub fn stage_twiddles(&self, stage: u32) -> Result<Vec<u64>, ParamsError> {
        self.twiddles_with_root(self.w, stage)
    }

    /// Twiddle factor used by each physical column at `stage` of the inverse
    /// transform (powers of `w^-1`).
    pub fn inverse_stage_twiddles(&self, stage: u32) -> Result<Vec<u64>, ParamsError> {
        self.twiddles_with_root(self.w_inv, stage)
    }

    pub fn twiddles(&self, direction: Direction, stage: u32) -> Result<Vec<u64>, ParamsError> {
        match direction {
            Direction::Forward => self.stage_twiddles(stage),
            Direction::Inverse => self.inverse_stage_twiddles(stage),
        }
    }

    fn twiddles_with_root(&self, root: u64, stage: u32) -> Result<Vec<u64>, ParamsError> {
        if stage == 0 || stage > self.log_n {
            return Err(ParamsError::StageOutOfRange {
                stage,
                max: self.log_n,
            });
        }
        let map = AddressMap::new(self.n, stage).expect("stage checked above");
        let half_block = 1usize << (stage - 1);
        // w_m = w^(n/m) with m = 2^stage
        let stride = (self.n >> stage) as u64;
        let stage_root = pow_mod(root, stride, self.q);
        Ok((0..self.columns())
            .map(|column| {
                // Slot A of the column holds the upper-half input of the butterfly
                // at Alg. position p; its offset inside the block picks the power.
                let index = map.index_of(2 * column);
                let position = bit_reverse(index, self.log_n).expect("index < n");
                let j = (position & (half_block - 1)) as u64;
                pow_mod(stage_root, j, self.q)
            })
            .collect())
    }

    /// Parameters with the right geometry but placeholder roots, for
    /// cycle/event accounting where no NTT-friendly prime fits in `width`.
    ///
    /// The modulus is the largest prime below `2^(width - 2)`.
    pub fn timing_model(n: usize, width: u32) -> Result<Self, ParamsError> {
        let log_n = check_size(n)?;
        if width > MAX_WIDTH {
            return Err(ParamsError::WidthTooLarge(width));
        }
        if width < HEADROOM_BITS + 2 {
            return Err(ParamsError::InsufficientBitWidth {
                q: 2,
                width,
                required: HEADROOM_BITS + 2,
            });
        }
        let bound = 1u64 << (width - HEADROOM_BITS);
        let q = (2..bound).rev().find(|&c| is_prime(c)).expect("3 < bound");
        let n_inv = inv_mod(n as u64 % q, q).unwrap_or(1);
        Ok(NttParams {
            q,
            n,
            log_n,
            width,
            w: 1,
            w_inv: 1,
            n_inv,
            psi: None,
            psi_inv: None,
            mode: RingMode::Cyclic,
            numerically_valid: false,
        })
    }
}

impl fmt::Display for NttParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "q\t{}", self.q)?;
        writeln!(f, "n\t{}", self.n)?;
        writeln!(f, "N\t{}", self.width)?;
        writeln!(f, "mode\t{}", self.mode)?;
        writeln!(f, "w\t{}", self.w)?;
        writeln!(f, "w_inv\t{}", self.w_inv)?;
        writeln!(f, "n_inv\t{}", self.n_inv)?;
        if let (Some(psi), Some(psi_inv)) = (self.psi, self.psi_inv) {
            writeln!(f, "psi\t{psi}")?;
            writeln!(f, "psi_inv\t{psi_inv}")?;
        }
        write!(
            f,
            "headroom\t{} bits (modulus uses {})",
            self.width - bit_length(self.q),
            bit_length(self.q)
        )
    }
}

fn check_size(n: usize) -> Result<u32, ParamsError> {
    if n < 2 || !n.is_power_of_two() || n.trailing_zeros() > MAX_LOG_N {
        return Err(ParamsError::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

/// Validate `(q, n, width, mode)` and derive all roots.
pub fn validate_params(
    q: u64,
    n: usize,
    width: u32,
    mode: RingMode,
) -> Result<NttParams, ParamsError> {
    let log_n = check_size(n)?;
    if !is_prime(q) {
        return Err(ParamsError::NotPrime(q));
    }
    if width > MAX_WIDTH {
        return Err(ParamsError::WidthTooLarge(width));
    }
    let required = bit_length(q) + HEADROOM_BITS;
    if width < required {
        return Err(ParamsError::InsufficientBitWidth { q, width, required });
    }

    let order = mode.root_order(n);
    let (w, psi) = match mode {
        RingMode::Cyclic => (find_primitive_root(q, order)?, None),
        RingMode::Negacyclic => {
            let psi = find_primitive_root(q, order)?;
            (mul_mod(psi, psi, q), Some(psi))
        }
    };
    let inv = |x: u64| inv_mod(x, q).expect("nonzero element of a prime field");
    Ok(NttParams {
        q,
        n,
        log_n,
        width,
        w,
        w_inv: inv(w),
        n_inv: inv(n as u64 % q),
        psi,
        psi_inv: psi.map(inv),
        mode,
        numerically_valid: true,
    })
}

/// Smallest `g` with `g^order = 1` and `g^(order/2) = q - 1 (mod q)`.
///
/// `order` must be a power of two (at least 2) dividing `q - 1`; for such
/// orders the two conditions are equivalent to `g` being a primitive
/// `order`-th root of unity.
pub fn find_primitive_root(q: u64, order: u64) -> Result<u64, ParamsError> {
    let no_root = ParamsError::NoRootExists { q, order };
    if q < 3 || order < 2 || !order.is_power_of_two() || !(q - 1).is_multiple_of(order) {
        return Err(no_root);
    }
    if !is_prime(q) {
        return Err(ParamsError::NotPrime(q));
    }
    let cofactor = (q - 1) / order;
    let half = order / 2;
    let seed = (2..q)
        .map(|g| pow_mod(g, cofactor, q))
        .find(|&h| pow_mod(h, half, q) == q - 1)
        .ok_or(no_root)?;
    // Every primitive root of a 2-power order is an odd power of any other.
    let seed_sq = mul_mod(seed, seed, q);
    let mut best = seed;
    let mut root = seed;
    for _ in 1..half {
        root = mul_mod(root, seed_sq, q);
        best = best.min(root);
    }
    Ok(best)
}

/// Largest prime `q < 2^(width - 2)` with `q = 1 (mod order)`, if any.
pub fn find_ntt_prime(n: usize, width: u32, mode: RingMode) -> Option<u64> {
    if !(HEADROOM_BITS + 2..=MAX_WIDTH).contains(&width) {
        return None;
    }
    let order = mode.root_order(n);
    let bound = 1u64 << (width - HEADROOM_BITS);
    let top = (bound - 2) / order;
    (1..=top).rev().map(|k| k * order + 1).find(|&q| is_prime(q))
}

/// Named parameter presets for common Ring-LWE sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub n: usize,
    pub q: u64,
    pub mode: RingMode,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "toy8",
        n: 8,
        q: 17,
        mode: RingMode::Cyclic,
    },
    Preset {
        name: "rlwe256",
        n: 256,
        q: 7681,
        mode: RingMode::Negacyclic,
    },
    Preset {
        name: "rlwe512",
        n: 512,
        q: 12289,
        mode: RingMode::Negacyclic,
    },
    Preset {
        name: "rlwe1024",
        n: 1024,
        q: 12289,
        mode: RingMode::Negacyclic,
    },
];

pub fn preset(name: &str) -> Option<Preset> {
    PRESETS.iter().copied().find(|p| p.name == name)
}

/// Number of bits needed to represent `x` (0 for 0).
pub fn bit_length(x: u64) -> u32 {
    u64::BITS - x.leading_zeros()
}

/// Smallest operand width that satisfies the headroom rule for `q`.
pub fn min_width(q: u64) -> u32 {
    bit_length(q) + HEADROOM_BITS
}

pub fn is_prime(x: u64) -> bool {
    primal_check::miller_rabin(x)
}

pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, q: u64) -> u64 {
    let mut acc = 1 % q;
    base %= q;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, q);
        }
        base = mul_mod(base, base, q);
        exp >>= 1;
    }
    acc
}

/// Inverse modulo a prime `q`, `None` for zero.
pub fn inv_mod(x: u64, q: u64) -> Option<u64> {
    let x = x % q;
    (x != 0).then(|| pow_mod(x, q - 2, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_root(q: u64, order: u64) -> Option<u64> {
        (1..q).find(|&g| {
            let mut acc = 1u64;
            let mut half_value = 0;
            for e in 1..=order {
                acc = acc * g % q;
                if e == order / 2 {
                    half_value = acc;
                }
            }
            acc == 1 && half_value == q - 1
        })
    }

    #[test]
    fn small_cyclic_params() {
        let p = validate_params(17, 8, 7, RingMode::Cyclic).unwrap();
        assert_eq!(p.w(), 2);
        assert_eq!(pow_mod(2, 8, 17), 1);
        assert_eq!(pow_mod(2, 4, 17), 16);
        assert_eq!(mul_mod(p.w(), p.w_inv(), 17), 1);
        assert_eq!(mul_mod(8, p.n_inv(), 17), 1);
        assert!(p.psi().is_none());
    }

    #[test]
    fn validation_errors() {
        assert_eq!(
            validate_params(17, 8, 5, RingMode::Cyclic),
            Err(ParamsError::InsufficientBitWidth {
                q: 17,
                width: 5,
                required: 7
            })
        );
        assert_eq!(
            validate_params(15, 8, 7, RingMode::Cyclic),
            Err(ParamsError::NotPrime(15))
        );
        assert_eq!(
            validate_params(17, 6, 7, RingMode::Cyclic),
            Err(ParamsError::NotPowerOfTwo(6))
        );
        assert_eq!(
            validate_params(17, 1, 7, RingMode::Cyclic),
            Err(ParamsError::NotPowerOfTwo(1))
        );
        assert_eq!(
            validate_params(7681, 1024, 15, RingMode::Cyclic),
            Err(ParamsError::NoRootExists {
                q: 7681,
                order: 1024
            })
        );
        // 17 = 1 mod 16 but not mod 32
        assert!(validate_params(17, 16, 7, RingMode::Cyclic).is_ok());
        assert!(matches!(
            validate_params(17, 16, 7, RingMode::Negacyclic),
            Err(ParamsError::NoRootExists { .. })
        ));
        assert_eq!(
            validate_params(17, 8, 70, RingMode::Cyclic),
            Err(ParamsError::WidthTooLarge(70))
        );
    }

    #[test]
    fn primitive_roots_match_exhaustive_search() {
        assert_eq!(find_primitive_root(17, 8), Ok(2));
        assert_eq!(find_primitive_root(17, 2), Ok(16));
        for (q, order) in [(17, 16), (7681, 256), (7681, 512), (12289, 1024), (257, 256)] {
            assert_eq!(
                find_primitive_root(q, order).ok(),
                brute_force_root(q, order),
                "q={q} order={order}"
            );
        }
        assert_eq!(find_primitive_root(7681, 256), Ok(brute_force_root(7681, 256).unwrap()));
        assert!(find_primitive_root(17, 32).is_err());
        assert!(find_primitive_root(17, 6).is_err());
    }

    #[test]
    fn negacyclic_roots() {
        let p = validate_params(7681, 256, 15, RingMode::Negacyclic).unwrap();
        let psi = p.psi().unwrap();
        assert_eq!(mul_mod(psi, psi, p.q()), p.w());
        assert_eq!(pow_mod(psi, 256, p.q()), p.q() - 1);
        assert_eq!(mul_mod(psi, p.psi_inv().unwrap(), p.q()), 1);
        assert_eq!(pow_mod(p.w(), 128, p.q()), p.q() - 1);
    }

    #[test]
    fn roots_are_primitive() {
        for (q, n, mode) in [
            (17, 8, RingMode::Cyclic),
            (257, 64, RingMode::Negacyclic),
            (12289, 512, RingMode::Negacyclic),
            (2013265921, 1024, RingMode::Cyclic),
        ] {
            let width = min_width(q);
            let p = validate_params(q, n, width, mode).unwrap();
            let mut acc = 1;
            for k in 1..n {
                acc = mul_mod(acc, p.w(), q);
                assert_ne!(acc, 1, "w^{k} = 1 for q={q} n={n}");
            }
            assert_eq!(mul_mod(acc, p.w(), q), 1);
        }
    }

    #[test]
    fn validation_is_deterministic() {
        let a = validate_params(12289, 1024, 16, RingMode::Negacyclic).unwrap();
        let b = validate_params(12289, 1024, 16, RingMode::Negacyclic).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stage_twiddle_tables() {
        let p = validate_params(17, 8, 7, RingMode::Cyclic).unwrap();
        assert_eq!(p.stage_twiddles(1).unwrap(), vec![1, 1, 1, 1]);
        // Alg. position of each column's A slot at stage 3: 0, 2, 1, 3.
        assert_eq!(p.stage_twiddles(3).unwrap(), vec![1, 4, 2, 8]);
        assert_eq!(p.stage_twiddles(2).unwrap(), vec![1, 4, 1, 4]);
        assert_eq!(
            p.stage_twiddles(4),
            Err(ParamsError::StageOutOfRange { stage: 4, max: 3 })
        );
        assert!(p.stage_twiddles(0).is_err());
        let inv = p.inverse_stage_twiddles(3).unwrap();
        for (t, ti) in p.stage_twiddles(3).unwrap().iter().zip(&inv) {
            assert_eq!(mul_mod(*t, *ti, 17), 1);
        }

        let p2 = validate_params(17, 2, 7, RingMode::Cyclic).unwrap();
        assert_eq!(p2.w(), 16);
        assert_eq!(p2.stage_twiddles(1).unwrap(), vec![1]);
    }

    /// Walk the butterfly loops (k over blocks, j within a half block) and
    /// file each twiddle `w_m^j` under the column whose A slot holds
    /// position `k + j` at this stage.
    fn twiddles_by_enumeration(p: &NttParams, stage: u32) -> Vec<u64> {
        let (n, bits) = (p.n(), p.log_n());
        let m = 1usize << stage;
        let w_m = pow_mod(p.w(), (n / m) as u64, p.q());
        let mut table = vec![None; n / 2];
        for k in (0..n).step_by(m) {
            let mut w = 1;
            for j in 0..m / 2 {
                let index = bit_reverse(k + j, bits).unwrap();
                let addr = AddressMap::new(n, stage).unwrap().map(index).unwrap();
                assert_eq!(addr.value % 2, 0);
                assert!(table[addr.column()].replace(w).is_none());
                w = mul_mod(w, w_m, p.q());
            }
        }
        table.into_iter().map(Option::unwrap).collect()
    }

    #[test]
    fn stage_twiddles_match_enumeration() {
        for (q, n) in [(17u64, 8usize), (17, 16), (257, 64), (7681, 512), (12289, 1024)] {
            let p = validate_params(q, n, min_width(q), RingMode::Cyclic).unwrap();
            for stage in 1..=p.log_n() {
                assert_eq!(p.stage_twiddles(stage).unwrap(), twiddles_by_enumeration(&p, stage));
            }
        }
    }

    #[test]
    fn ntt_prime_search() {
        assert_eq!(find_ntt_prime(8, 7, RingMode::Cyclic), Some(17));
        let q = find_ntt_prime(256, 15, RingMode::Negacyclic).unwrap();
        assert!(is_prime(q) && q % 512 == 1 && q < 1 << 13);
        assert_eq!(find_ntt_prime(1024, 8, RingMode::Cyclic), None);
    }

    #[test]
    fn timing_model_params() {
        let p = NttParams::timing_model(1024, 8).unwrap();
        assert_eq!(p.q(), 61);
        assert!(!p.is_numerically_valid());
        assert_eq!(p.stage_twiddles(10).unwrap(), vec![1; 512]);
    }

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            validate_params(p.q, p.n, min_width(p.q), p.mode).unwrap();
        }
        assert_eq!(preset("rlwe256").unwrap().q, 7681);
    }
}
