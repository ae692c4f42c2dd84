//! Placement of transform points in the bank and the fixed inter-stage router.
//!
//! A physical address `a` in `[0, n)` names column `a / 2`, slot A (the
//! upper butterfly input, even `a`) or slot B (odd `a`). At stage `s` the
//! point whose bit-reversed position is `index` sits at
//! `rotl(index, s)` over `log2 n` bits, which puts both members of every
//! butterfly in the same column. Moving from stage `s` to `s + 1` is then a
//! one-bit rotation of the address, the same for every stage.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bitserial::{load_constants, measured, BankLayout, BitserialError, OpResult, WordSlot};
use crate::params::{Direction, NttParams, ParamsError};
use crate::refarith::Polynomial;
use crate::sram::{BitRow, SramBank, SramError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataflowError {
    #[error("index {index} out of range for {bits}-bit addresses")]
    IndexOutOfRange { index: usize, bits: u32 },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("stage {stage} out of range 1..={max}")]
    StageOutOfRange { stage: u32, max: u32 },
    #[error("{0} is not a power of two >= 2")]
    NotPowerOfTwo(usize),
    #[error("value {value} is not reduced modulo {q}")]
    CoefficientOutOfRange { value: u64, q: u64 },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Bitserial(#[from] BitserialError),
    #[error(transparent)]
    Sram(#[from] SramError),
}

/// Operand slot holding a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PhysicalAddress {
    pub value: usize,
}

impl PhysicalAddress {
    pub fn column(&self) -> usize {
        self.value / 2
    }

    pub fn slot(&self) -> Slot {
        if self.value.is_multiple_of(2) {
            Slot::A
        } else {
            Slot::B
        }
    }
}

fn log2_exact(n: usize) -> Result<u32, DataflowError> {
    if n < 2 || !n.is_power_of_two() {
        return Err(DataflowError::NotPowerOfTwo(n));
    }
    Ok(n.trailing_zeros())
}

fn rotl(x: usize, by: u32, bits: u32) -> usize {
    let by = by % bits;
    let mask = (1usize << bits) - 1;
    ((x << by) | (x >> ((bits - by) % bits))) & mask
}

fn rotr(x: usize, by: u32, bits: u32) -> usize {
    rotl(x, bits - by % bits, bits)
}

/// Reverse the low `bits` bits of `index`.
pub fn bit_reverse(index: usize, bits: u32) -> Result<usize, DataflowError> {
    if bits < usize::BITS && index >> bits != 0 {
        return Err(DataflowError::IndexOutOfRange { index, bits });
    }
    if bits == 0 {
        return Ok(0);
    }
    Ok(index.reverse_bits() >> (usize::BITS - bits))
}

/// Index-to-address map of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AddressMap {
    n: usize,
    log_n: u32,
    stage: u32,
}

impl AddressMap {
    pub fn new(n: usize, stage: u32) -> Result<Self, DataflowError> {
        let log_n = log2_exact(n)?;
        if stage == 0 || stage > log_n {
            return Err(DataflowError::StageOutOfRange { stage, max: log_n });
        }
        Ok(AddressMap { n, log_n, stage })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    /// `{index[log_n - s - 1 : 0], index[msb : log_n - s]}`, a left rotation
    /// by `s`.
    pub fn map(&self, index: usize) -> Result<PhysicalAddress, DataflowError> {
        self.check(index)?;
        Ok(PhysicalAddress {
            value: rotl(index, self.stage, self.log_n),
        })
    }

    /// Inverse of [`AddressMap::map`].
    pub fn index_of(&self, addr: usize) -> usize {
        debug_assert!(addr < self.n);
        rotr(addr, self.stage, self.log_n)
    }

    fn check(&self, index: usize) -> Result<(), DataflowError> {
        if index >= self.n {
            return Err(DataflowError::IndexOutOfRange {
                index,
                bits: self.log_n,
            });
        }
        Ok(())
    }
}

/// Address each output goes to between consecutive stages: `rotl(a, 1)`.
pub fn interstage_permutation(n: usize) -> Result<Vec<usize>, DataflowError> {
    let bits = log2_exact(n)?;
    Ok((0..n).map(|a| rotl(a, 1, bits)).collect())
}

/// Permutation that takes forward-transform output (point `p` at
/// `bitrev(p)`) to transform-input placement (point `p` at `rotl(p, 1)`).
pub fn reorder_permutation(n: usize) -> Result<Vec<usize>, DataflowError> {
    let bits = log2_exact(n)?;
    (0..n)
        .map(|a| Ok(rotl(bit_reverse(a, bits)?, 1, bits)))
        .collect()
}

/// Where each entry of a polynomial sits in the bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    /// Entry `i` at `rotl(i, 1)`: ready for stage 1 of a transform.
    TransformInput,
    /// Entry `p` at `bitrev(p)`: where the last stage leaves its outputs.
    TransformOutput,
}

impl Placement {
    pub fn address(&self, n: usize, i: usize) -> Result<PhysicalAddress, DataflowError> {
        let bits = log2_exact(n)?;
        if i >= n {
            return Err(DataflowError::IndexOutOfRange { index: i, bits });
        }
        let value = match self {
            Placement::TransformInput => rotl(i, 1, bits),
            Placement::TransformOutput => bit_reverse(i, bits)?,
        };
        Ok(PhysicalAddress { value })
    }

    /// Entry stored at physical address `addr`.
    pub fn index_at(&self, n: usize, addr: usize) -> Result<usize, DataflowError> {
        let bits = log2_exact(n)?;
        if addr >= n {
            return Err(DataflowError::IndexOutOfRange { index: addr, bits });
        }
        Ok(match self {
            Placement::TransformInput => rotr(addr, 1, bits),
            Placement::TransformOutput => bit_reverse(addr, bits)?,
        })
    }
}

fn slot_for(layout: &BankLayout, addr: PhysicalAddress) -> WordSlot {
    match addr.slot() {
        Slot::A => layout.a,
        Slot::B => layout.b,
    }
}

/// Host write of `a` into the A/B slots. Not counted as bank cycles.
pub fn load_polynomial(
    bank: &mut SramBank,
    params: &NttParams,
    a: &Polynomial,
    placement: Placement,
) -> Result<(), DataflowError> {
    let n = params.n();
    if a.len() != n {
        return Err(DataflowError::LengthMismatch {
            expected: n,
            got: a.len(),
        });
    }
    let layout = BankLayout::new(params.width());
    for (i, &c) in a.coeffs().iter().enumerate() {
        if c >= params.q() {
            return Err(DataflowError::CoefficientOutOfRange {
                value: c,
                q: params.q(),
            });
        }
        let addr = placement.address(n, i)?;
        let slot = slot_for(&layout, addr);
        bank.host_write_word(addr.column(), slot.base_row, slot.width, c)?;
    }
    Ok(())
}

/// Host read of the A/B slots. Not counted as bank cycles.
pub fn store_polynomial(
    bank: &SramBank,
    params: &NttParams,
    placement: Placement,
) -> Result<Polynomial, DataflowError> {
    let n = params.n();
    let layout = BankLayout::new(params.width());
    let coeffs = (0..n)
        .map(|i| {
            let addr = placement.address(n, i)?;
            let slot = slot_for(&layout, addr);
            Ok(bank.host_read_word(addr.column(), slot.base_row, slot.width)?)
        })
        .collect::<Result<Vec<_>, DataflowError>>()?;
    // an unreduced word means the in-memory arithmetic went wrong
    if let Some(&value) = coeffs.iter().find(|&&c| c >= params.q()) {
        return Err(DataflowError::CoefficientOutOfRange {
            value,
            q: params.q(),
        });
    }
    Ok(Polynomial::reduced(coeffs, params.q()))
}

/// Row-wise router: for each bit position, read that bit of both source
/// words in every column, permute the `2 * columns` bits through the switch
/// and write them into the destination rows. Word at address `a` (column
/// `a / 2`, source slot `a % 2`) lands at `perm[a]`. Four cycles per bit.
pub fn route(
    bank: &mut SramBank,
    src: [WordSlot; 2],
    dst: [WordSlot; 2],
    perm: &[usize],
) -> Result<OpResult, DataflowError> {
    let width = src[0].width;
    for s in src.iter().chain(&dst) {
        if s.width != width {
            return Err(BitserialError::WidthMismatch {
                expected: width,
                got: s.width,
            }
            .into());
        }
        if s.rows().end > bank.rows() {
            return Err(SramError::RowOutOfRange {
                row: s.rows().end - 1,
                rows: bank.rows(),
            }
            .into());
        }
    }
    for s in &src {
        for d in &dst {
            if s.overlaps(d) {
                return Err(BitserialError::SlotOverlapInvalid(*s, *d).into());
            }
        }
    }
    let cols = bank.active_cols();
    let points = 2 * cols;
    if perm.len() != points {
        return Err(DataflowError::LengthMismatch {
            expected: points,
            got: perm.len(),
        });
    }
    let mut seen = vec![false; points];
    for &p in perm {
        if p >= points || std::mem::replace(&mut seen[p], true) {
            return Err(DataflowError::IndexOutOfRange {
                index: p,
                bits: points.trailing_zeros(),
            });
        }
    }

    let total = bank.cols();
    Ok(measured(bank, |bank| {
        for j in 0..width {
            bank.begin_cycle("route.read");
            let even = bank.read_row(src[0].row(j))?;
            bank.begin_cycle("route.read");
            let odd = bank.read_row(src[1].row(j))?;
            let mut out = [BitRow::zeros(total), BitRow::zeros(total)];
            for (a, &to) in perm.iter().enumerate() {
                let bit = if a % 2 == 0 { even.get(a / 2) } else { odd.get(a / 2) };
                out[to % 2].set(to / 2, bit);
            }
            bank.count_routed_bits(points as u64);
            bank.begin_cycle("route.write");
            bank.write_row_full(dst[0].row(j), &out[0])?;
            bank.begin_cycle("route.write");
            bank.write_row_full(dst[1].row(j), &out[1])?;
        }
        Ok(())
    })?)
}

/// Move the butterfly outputs (sum and difference in the scratchpad) to
/// the A/B operand slots of their next-stage columns.
pub fn route_stage(bank: &mut SramBank, n: usize, width: u32) -> Result<OpResult, DataflowError> {
    let layout = BankLayout::new(width);
    route(
        bank,
        [layout.sum_out(), layout.diff_out()],
        [layout.a, layout.b],
        &interstage_permutation(n)?,
    )
}

/// Write the twiddle factors of `stage` into the W slot of every column.
pub fn load_twiddles(
    bank: &mut SramBank,
    params: &NttParams,
    direction: Direction,
    stage: u32,
) -> Result<OpResult, DataflowError> {
    let twiddles = params.twiddles(direction, stage)?;
    load_word_constants(bank, params, &twiddles)
}

/// Write one arbitrary constant per column into the W slot.
pub fn load_word_constants(
    bank: &mut SramBank,
    params: &NttParams,
    values: &[u64],
) -> Result<OpResult, DataflowError> {
    let layout = BankLayout::new(params.width());
    Ok(load_constants(bank, layout.w, values)?)
}

/// Address of every index at every stage, one index per line.
pub fn mapping_table(n: usize) -> Result<String, DataflowError> {
    let bits = log2_exact(n)?;
    let maps: Vec<AddressMap> = (1..=bits)
        .map(|s| AddressMap::new(n, s))
        .collect::<Result<_, _>>()?;
    let mut out = String::from("index");
    for s in 1..=bits {
        let _ = write!(out, "\tstage{s}");
    }
    out.push('\n');
    for i in 0..n {
        let _ = write!(out, "{i}");
        for m in &maps {
            let a = m.map(i)?;
            let slot = if a.slot() == Slot::A { 'A' } else { 'B' };
            let _ = write!(out, "\t{}:c{}{}", a.value, a.column(), slot);
        }
        out.push('\n');
    }
    Ok(out)
}

/// Router permutation, one source address per line.
pub fn permutation_table(n: usize) -> Result<String, DataflowError> {
    let mut out = String::from("from\tto\n");
    for (a, p) in interstage_permutation(n)?.iter().enumerate() {
        let _ = writeln!(out, "{a}\t{p}");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{validate_params, RingMode};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Butterfly pairs of the bit-reversed-input Cooley-Tukey loop at
    /// `stage`, as Alg. positions `(k + j, k + j + m/2)`.
    fn butterfly_pairs(n: usize, stage: u32) -> Vec<(usize, usize)> {
        let m = 1usize << stage;
        let mut pairs = Vec::new();
        for k in (0..n).step_by(m) {
            for j in 0..m / 2 {
                pairs.push((k + j, k + j + m / 2));
            }
        }
        pairs
    }

    fn string_reverse(index: usize, bits: u32) -> usize {
        let s = format!("{index:0width$b}", width = bits as usize);
        usize::from_str_radix(&s.chars().rev().collect::<String>(), 2).unwrap_or(0)
    }

    #[test]
    fn bit_reverse_examples() {
        assert_eq!(bit_reverse(0, 5).unwrap(), 0);
        assert_eq!(bit_reverse(1, 3).unwrap(), 4);
        assert_eq!(bit_reverse(6, 3).unwrap(), string_reverse(6, 3));
        assert_eq!(bit_reverse(6, 3).unwrap(), 3);
        assert!(matches!(
            bit_reverse(8, 3),
            Err(DataflowError::IndexOutOfRange { index: 8, bits: 3 })
        ));
        for bits in 1..=12 {
            for i in 0..1usize << bits {
                assert_eq!(bit_reverse(i, bits).unwrap(), string_reverse(i, bits));
            }
        }
    }

    #[test]
    fn mapping_examples() {
        for s in 1..=3 {
            assert_eq!(AddressMap::new(8, s).unwrap().map(0).unwrap().value, 0);
        }
        let full = AddressMap::new(8, 3).unwrap();
        for i in 0..8 {
            assert_eq!(full.map(i).unwrap().value, i);
        }
        // index 4 pairs with index 0 at stage 1
        let a4 = AddressMap::new(8, 1).unwrap().map(4).unwrap();
        assert_eq!(a4.value, 1);
        assert_eq!((a4.column(), a4.slot()), (0, Slot::B));
        assert!(AddressMap::new(8, 0).is_err());
        assert!(AddressMap::new(8, 4).is_err());
        assert!(AddressMap::new(12, 1).is_err());
        assert!(AddressMap::new(8, 1).unwrap().map(8).is_err());
    }

    #[test]
    fn mapping_is_bijective_and_colocates_partners() {
        for bits in 1..=12u32 {
            let n = 1usize << bits;
            for s in 1..=bits {
                let map = AddressMap::new(n, s).unwrap();
                let mut seen = vec![false; n];
                for i in 0..n {
                    let a = map.map(i).unwrap().value;
                    assert!(!std::mem::replace(&mut seen[a], true));
                    assert_eq!(map.index_of(a), i);
                }
                for (u, t) in butterfly_pairs(n, s) {
                    let au = map.map(bit_reverse(u, bits).unwrap()).unwrap();
                    let at = map.map(bit_reverse(t, bits).unwrap()).unwrap();
                    assert_eq!(au.column(), at.column(), "n={n} s={s} pair=({u},{t})");
                    assert_eq!((au.slot(), at.slot()), (Slot::A, Slot::B));
                }
            }
        }
    }

    #[test]
    fn interstage_permutation_is_stage_invariant() {
        for bits in 1..=12u32 {
            let n = 1usize << bits;
            let perm = interstage_permutation(n).unwrap();
            for s in 1..bits {
                let (cur, next) = (AddressMap::new(n, s).unwrap(), AddressMap::new(n, s + 1).unwrap());
                for a in 0..n {
                    assert_eq!(next.map(cur.index_of(a)).unwrap().value, perm[a]);
                }
            }
        }
        let p8 = interstage_permutation(8).unwrap();
        assert_eq!(p8[4], 1);
        assert_eq!(p8[0], 0);
        assert_eq!(p8, vec![0, 2, 4, 6, 1, 3, 5, 7]);
    }

    #[test]
    fn reorder_permutation_connects_placements() {
        for bits in 1..=10u32 {
            let n = 1usize << bits;
            let perm = reorder_permutation(n).unwrap();
            for p in 0..n {
                let from = Placement::TransformOutput.address(n, p).unwrap().value;
                let to = Placement::TransformInput.address(n, p).unwrap().value;
                assert_eq!(perm[from], to);
                assert_eq!(Placement::TransformOutput.index_at(n, from).unwrap(), p);
                assert_eq!(Placement::TransformInput.index_at(n, to).unwrap(), p);
            }
        }
    }

    fn bank_for(params: &NttParams) -> SramBank {
        let mut bank = SramBank::for_transform(params.n(), params.width()).unwrap();
        bank.set_active_columns(params.columns()).unwrap();
        bank
    }

    #[test]
    fn load_store_round_trip() {
        let params = validate_params(7681, 256, 15, RingMode::Cyclic).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Polynomial::random(256, 7681, &mut rng);
        for placement in [Placement::TransformInput, Placement::TransformOutput] {
            let mut bank = bank_for(&params);
            load_polynomial(&mut bank, &params, &a, placement).unwrap();
            assert_eq!(bank.cycles(), 0);
            assert_eq!(store_polynomial(&bank, &params, placement).unwrap(), a);
        }
        let mut bank = bank_for(&params);
        load_polynomial(&mut bank, &params, &Polynomial::zero(256), Placement::TransformInput)
            .unwrap();
        for row in 0..2 * 15 {
            assert_eq!(bank.peek_row(row).unwrap().count_ones(), 0);
        }
        assert!(matches!(
            load_polynomial(&mut bank, &params, &Polynomial::zero(8), Placement::TransformInput),
            Err(DataflowError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn n8_placement_table() {
        // coefficient i sits at rotl(i, 1) before stage 1
        let expected = [0, 2, 4, 6, 1, 3, 5, 7];
        for (i, &e) in expected.iter().enumerate() {
            assert_eq!(Placement::TransformInput.address(8, i).unwrap().value, e);
            assert_eq!(AddressMap::new(8, 1).unwrap().map(i).unwrap().value, e);
        }
    }

    #[test]
    fn router_moves_words_and_costs_4n() {
        let params = validate_params(17, 8, 7, RingMode::Cyclic).unwrap();
        let layout = BankLayout::new(7);
        let mut bank = bank_for(&params);
        // output address a holds value 10 + a
        for a in 0..8usize {
            let slot = if a % 2 == 0 { layout.sum_out() } else { layout.diff_out() };
            bank.host_write_word(a / 2, slot.base_row, 7, 10 + a as u64).unwrap();
        }
        let r = route_stage(&mut bank, 8, 7).unwrap();
        assert_eq!(r.cycles, 28);
        assert_eq!(r.events.routed_bits, 8 * 7);
        assert_eq!(r.events.single_activations, 14);
        assert_eq!(r.events.row_writes, 14);
        let perm = interstage_permutation(8).unwrap();
        for a in 0..8usize {
            let to = PhysicalAddress { value: perm[a] };
            let slot = slot_for(&layout, to);
            let v = bank.host_read_word(to.column(), slot.base_row, 7).unwrap();
            assert_eq!(v, 10 + a as u64);
        }
        // address 4 (column 2, A) lands at address 1 (column 0, B)
        assert_eq!(bank.host_read_word(0, layout.b.base_row, 7).unwrap(), 14);
    }

    #[test]
    fn router_conserves_payload() {
        let params = validate_params(12289, 1024, 16, RingMode::Cyclic).unwrap();
        let layout = BankLayout::new(16);
        let mut bank = bank_for(&params);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let payload = Polynomial::random(1024, 12289, &mut rng);
        for (a, &v) in payload.coeffs().iter().enumerate() {
            let slot = if a % 2 == 0 { layout.sum_out() } else { layout.diff_out() };
            bank.host_write_word(a / 2, slot.base_row, 16, v).unwrap();
        }
        let r = route_stage(&mut bank, 1024, 16).unwrap();
        assert_eq!(r.cycles, 4 * 16);
        // every one of the n words moved once
        assert_eq!(r.events.routed_bits, 1024 * 16);
        let perm = interstage_permutation(1024).unwrap();
        let mut inverse = vec![0; 1024];
        for (a, &p) in perm.iter().enumerate() {
            inverse[p] = a;
        }
        for (to, &from) in inverse.iter().enumerate() {
            let addr = PhysicalAddress { value: to };
            let slot = slot_for(&layout, addr);
            let v = bank.host_read_word(addr.column(), slot.base_row, 16).unwrap();
            assert_eq!(v, payload.coeffs()[from]);
        }
    }

    #[test]
    fn twiddle_loading() {
        let params = validate_params(7681, 16, 15, RingMode::Cyclic).unwrap();
        let layout = BankLayout::new(15);
        let mut bank = bank_for(&params);
        let r = load_twiddles(&mut bank, &params, Direction::Forward, 1).unwrap();
        assert_eq!(r.cycles, 15);
        for c in 0..8 {
            assert_eq!(bank.host_read_word(c, layout.w.base_row, 15).unwrap(), 1);
        }
        let table = params.stage_twiddles(4).unwrap();
        load_twiddles(&mut bank, &params, Direction::Forward, 4).unwrap();
        for (c, &t) in table.iter().enumerate() {
            assert_eq!(bank.host_read_word(c, layout.w.base_row, 15).unwrap(), t);
        }
        assert!(matches!(
            load_twiddles(&mut bank, &params, Direction::Forward, 5),
            Err(DataflowError::Params(ParamsError::StageOutOfRange { stage: 5, max: 4 }))
        ));
        let p14 = validate_params(12289, 8, 16, RingMode::Cyclic).unwrap();
        let mut small = SramBank::for_transform(8, 14).unwrap();
        let p14 = NttParams::timing_model(p14.n(), 14).unwrap();
        assert_eq!(load_twiddles(&mut small, &p14, Direction::Forward, 2).unwrap().cycles, 14);
    }

    #[test]
    fn router_rejects_bad_permutations() {
        let params = validate_params(17, 8, 7, RingMode::Cyclic).unwrap();
        let layout = BankLayout::new(7);
        let mut bank = bank_for(&params);
        let src = [layout.sum_out(), layout.diff_out()];
        let dst = [layout.a, layout.b];
        assert!(route(&mut bank, src, dst, &[0, 1, 2]).is_err());
        assert!(route(&mut bank, src, dst, &[0, 0, 1, 2, 3, 4, 5, 6]).is_err());
        assert!(route(&mut bank, src, [layout.a, layout.sum_out()], &[0; 8]).is_err());
    }

    #[test]
    fn tables_render() {
        let t = mapping_table(8).unwrap();
        assert!(t.starts_with("index\tstage1\tstage2\tstage3\n"));
        assert!(t.contains("\n4\t1:c0B\t2:c1A\t4:c2A\n"));
        assert_eq!(permutation_table(8).unwrap().lines().count(), 9);
    }
}
