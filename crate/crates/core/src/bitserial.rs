//! Bit-serial modular arithmetic executed in the array, one word per column,
//! all columns in parallel.
//!
//! Every operation runs a fixed schedule of word-line activations that depends
//! only on the operand width, never on the stored data. One cycle is one
//! activation step; peripheral latch updates are absorbed into it and a
//! write-back shares the cycle of the read that produced it.
//!
//! | operation            | cycles        |
//! |----------------------|---------------|
//! | [`pim_mod_add`]      | `2(N+1)`      |
//! | [`pim_mod_sub`]      | `3(N+1)`      |
//! | [`pim_mod_mul`]      | `(N+1)^2`     |
//! | [`pim_copy`]         | `2N`          |
//! | [`pim_twos_complement`] | `N+1`      |

use std::ops::Range;

use thiserror::Error;

use crate::params::{bit_length, HEADROOM_BITS};
use crate::periph::{comparator_word, splat, Fault, PeripheralArray};
use crate::sram::{BitRow, EventCounts, SramBank, SramError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitserialError {
    #[error(transparent)]
    Sram(#[from] SramError),
    #[error("slots {0:?} and {1:?} overlap")]
    SlotOverlapInvalid(WordSlot, WordSlot),
    #[error("slot width {got} does not match expected width {expected}")]
    WidthMismatch { expected: u32, got: u32 },
    #[error("modulus {q} leaves less than {HEADROOM_BITS} guard bits in a {width}-bit word")]
    HeadroomViolated { q: u64, width: u32 },
}

/// A little-endian word stored vertically: bit `j` lives in row `base_row + j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WordSlot {
    pub base_row: usize,
    pub width: u32,
}

impl WordSlot {
    pub const fn new(base_row: usize, width: u32) -> Self {
        WordSlot { base_row, width }
    }

    pub fn row(&self, bit: u32) -> usize {
        debug_assert!(bit < self.width);
        self.base_row + bit as usize
    }

    pub fn rows(&self) -> Range<usize> {
        self.base_row..self.base_row + self.width as usize
    }

    pub fn overlaps(&self, other: &WordSlot) -> bool {
        let (a, b) = (self.rows(), other.rows());
        a.start < b.end && b.start < a.end
    }

    /// The low `width` rows of this slot.
    pub fn truncated(&self, width: u32) -> WordSlot {
        debug_assert!(width <= self.width);
        WordSlot::new(self.base_row, width)
    }
}

/// Fixed row map of a bank for operand width `N`.
///
/// | rows               | slot | contents                                    |
/// |--------------------|------|---------------------------------------------|
/// | `[0, N)`           | A    | butterfly upper input                       |
/// | `[N, 2N)`          | B    | butterfly lower input, then `W * B`         |
/// | `[2N, 3N)`         | W    | twiddle factor or other per-column constant |
/// | `[3N, 4N+1)`       | S0   | product accumulator 0, then `A + W*B`       |
/// | `[4N+1, 5N+2)`     | S1   | product accumulator 1, then `A - W*B`       |
///
/// S0 and S1 together are the `2N + 2` row scratchpad.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BankLayout {
    pub width: u32,
    pub a: WordSlot,
    pub b: WordSlot,
    pub w: WordSlot,
    pub s0: WordSlot,
    pub s1: WordSlot,
}

impl BankLayout {
    pub fn new(width: u32) -> Self {
        let n = width as usize;
        BankLayout {
            width,
            a: WordSlot::new(0, width),
            b: WordSlot::new(n, width),
            w: WordSlot::new(2 * n, width),
            s0: WordSlot::new(3 * n, width + 1),
            s1: WordSlot::new(4 * n + 1, width + 1),
        }
    }

    pub fn rows(&self) -> usize {
        5 * self.width as usize + 2
    }

    pub fn scratchpad_rows(&self) -> usize {
        (self.s0.width + self.s1.width) as usize
    }

    /// Butterfly sum output, `A + W*B`.
    pub fn sum_out(&self) -> WordSlot {
        self.s0.truncated(self.width)
    }

    /// Butterfly difference output, `A - W*B`.
    pub fn diff_out(&self) -> WordSlot {
        self.s1.truncated(self.width)
    }
}

/// Cycles and micro-event deltas of one operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OpResult {
    pub cycles: u64,
    pub events: EventCounts,
}

impl std::ops::Add for OpResult {
    type Output = OpResult;

    fn add(self, o: OpResult) -> OpResult {
        OpResult {
            cycles: self.cycles + o.cycles,
            events: self.events + o.events,
        }
    }
}

impl std::ops::AddAssign for OpResult {
    fn add_assign(&mut self, o: OpResult) {
        *self = *self + o;
    }
}

/// Closed-form schedule of an operation, independent of any bank.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCost {
    pub cycles: u64,
    pub single_activations: u64,
    pub dual_activations: u64,
    pub row_writes: u64,
    pub latch_cycles: u64,
    /// Bits moved by the router per powered column.
    pub routed_bits_per_column: u64,
}

impl OpCost {
    pub fn mod_add(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: 2 * (n + 1),
            dual_activations: 2 * n,
            row_writes: n,
            latch_cycles: 2,
            ..Default::default()
        }
    }

    pub fn mod_sub(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: 3 * (n + 1),
            single_activations: n + 1,
            dual_activations: 2 * n,
            row_writes: 2 * n + 1,
            latch_cycles: 1,
            ..Default::default()
        }
    }

    pub fn mod_mul(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: (n + 1) * (n + 1),
            // tag rows, first round, bit 0 of later rounds, final pass
            single_activations: 4 * n - 1,
            dual_activations: (n - 1) * (n - 1),
            row_writes: n * n + n,
            latch_cycles: 1,
            ..Default::default()
        }
    }

    pub fn copy(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: 2 * n,
            single_activations: n,
            row_writes: n,
            ..Default::default()
        }
    }

    /// Two's complement of a `width`-bit word into a `width + 1`-bit slot.
    pub fn twos_complement_extended(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: n + 1,
            single_activations: n,
            row_writes: n + 1,
            ..Default::default()
        }
    }

    /// Two's complement into a slot of the same width.
    pub fn twos_complement(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: n + 1,
            single_activations: n,
            row_writes: n,
            latch_cycles: 1,
            ..Default::default()
        }
    }

    /// Controller write of one constant word per column.
    pub fn constant_load(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: n,
            row_writes: n,
            ..Default::default()
        }
    }

    /// Row-wise routing of two words per column.
    pub fn route(width: u32) -> Self {
        let n = width as u64;
        OpCost {
            cycles: 4 * n,
            single_activations: 2 * n,
            row_writes: 2 * n,
            routed_bits_per_column: 2 * n,
            ..Default::default()
        }
    }

    /// Cycles and events when run with `active_cols` powered columns.
    pub fn on_columns(&self, active_cols: usize) -> OpResult {
        let c = active_cols as u64;
        OpResult {
            cycles: self.cycles,
            events: EventCounts {
                single_activations: self.single_activations,
                dual_activations: self.dual_activations,
                row_writes: self.row_writes,
                sensed_bits: (self.single_activations + self.dual_activations) * c,
                written_bits: self.row_writes * c,
                routed_bits: self.routed_bits_per_column * c,
                latch_cycles: self.latch_cycles,
            },
        }
    }
}

/// Run `body` and report the cycles and events it consumed.
pub(crate) fn measured<F>(bank: &mut SramBank, body: F) -> Result<OpResult, BitserialError>
where
    F: FnOnce(&mut SramBank) -> Result<(), BitserialError>,
{
    let (c0, e0) = (bank.cycles(), bank.events());
    body(bank)?;
    Ok(OpResult {
        cycles: bank.cycles() - c0,
        events: bank.events() - e0,
    })
}

/// Bit `j` of `x` broadcast to every column; out-of-range indices read 0.
fn const_bit(x: u64, j: i64) -> u64 {
    splat((0..64).contains(&j) && x >> j & 1 == 1)
}

fn check_slot(bank: &SramBank, slot: &WordSlot) -> Result<(), BitserialError> {
    let end = slot.rows().end;
    if slot.width == 0 || end > bank.rows() {
        return Err(SramError::RowOutOfRange {
            row: end.saturating_sub(1),
            rows: bank.rows(),
        }
        .into());
    }
    Ok(())
}

fn check_width(slot: &WordSlot, expected: u32) -> Result<(), BitserialError> {
    if slot.width != expected {
        return Err(BitserialError::WidthMismatch {
            expected,
            got: slot.width,
        });
    }
    Ok(())
}

fn check_disjoint(a: &WordSlot, b: &WordSlot) -> Result<(), BitserialError> {
    if a.overlaps(b) {
        return Err(BitserialError::SlotOverlapInvalid(*a, *b));
    }
    Ok(())
}

/// An output may alias one of `in_place` exactly (same base row) and must
/// otherwise be disjoint from `others`.
fn check_output(
    out: &WordSlot,
    in_place: &[WordSlot],
    others: &[WordSlot],
) -> Result<(), BitserialError> {
    if in_place.iter().any(|s| s.base_row == out.base_row) {
        return Ok(());
    }
    for s in in_place.iter().chain(others) {
        check_disjoint(out, s)?;
    }
    Ok(())
}

fn check_headroom(q: u64, width: u32) -> Result<(), BitserialError> {
    if q < 2 || bit_length(q) + HEADROOM_BITS > width {
        return Err(BitserialError::HeadroomViolated { q, width });
    }
    Ok(())
}

fn zeros(words: usize) -> Vec<u64> {
    vec![0; words]
}

fn not(words: &[u64]) -> Vec<u64> {
    words.iter().map(|w| !w).collect()
}

/// Modular addition `z = (x + y) mod q` in every column.
///
/// A trial pass adds the operands while the comparator tracks `x + y >= q`;
/// a second pass recomputes the sum, subtracting `q` only in columns that
/// overflowed. Both passes always run.
pub fn pim_mod_add(
    bank: &mut SramBank,
    x: WordSlot,
    y: WordSlot,
    z: WordSlot,
    q: u64,
) -> Result<OpResult, BitserialError> {
    let width = x.width;
    for s in [&x, &y, &z] {
        check_slot(bank, s)?;
        check_width(s, width)?;
    }
    check_headroom(q, width)?;
    check_disjoint(&x, &y)?;
    check_output(&z, &[x, y], &[])?;

    let cols = bank.cols();
    measured(bank, |bank| {
        let mut p = PeripheralArray::reset(cols);
        let nw = p.words();
        let none = zeros(nw);

        // trial add and compare
        p.clear_carries(false);
        let init = bank.fault() != Some(Fault::StrictAddComparator);
        let mut cmp = vec![splat(init); nw];
        for j in 0..width {
            bank.begin_cycle("mod_add.trial");
            let r = bank.read_two_rows(x.row(j), y.row(j))?;
            let sum = p.add_words(r.and_bits.words(), &not(r.nor_bits.words()), &none);
            let qj = const_bit(q, j as i64);
            for w in 0..nw {
                cmp[w] = comparator_word(cmp[w], sum[w], qj);
            }
        }
        bank.begin_cycle("mod_add.trial");
        bank.latch();
        let carry_out = p.add_words(&none, &none, &none);
        let qn = const_bit(q, width as i64);
        for w in 0..nw {
            p.overflow[w] = comparator_word(cmp[w], carry_out[w], qn);
        }

        // modular addition
        p.clear_carries(false);
        for j in 0..width {
            bank.begin_cycle("mod_add.reduce");
            let r = bank.read_two_rows(x.row(j), y.row(j))?;
            let qj = const_bit(q, j as i64);
            let sub: Vec<u64> = p.overflow.iter().map(|o| o & qj).collect();
            let sum = p.add_words(r.and_bits.words(), &not(r.nor_bits.words()), &sub);
            bank.write_row_full(z.row(j), &BitRow::from_words(sum, cols))?;
        }
        bank.begin_cycle("mod_add.reduce");
        bank.latch();
        Ok(())
    })
}

/// Two's complement of `src` into `dst`: initial carry 1 and the inverted
/// (BLB) value of each bit. When `dst` is one bit wider the final carry is
/// written to its top row, so `dst = 2^w - src` exactly.
fn twos_complement_pass(
    bank: &mut SramBank,
    p: &mut PeripheralArray,
    src: WordSlot,
    dst: WordSlot,
) -> Result<(), BitserialError> {
    let cols = bank.cols();
    let none = zeros(p.words());
    p.clear_carries(true);
    for j in 0..src.width {
        bank.begin_cycle("twos_complement");
        let bits = bank.read_row(src.row(j))?;
        let sum = p.add_words(&not(bits.words()), &none, &none);
        bank.write_row_full(dst.row(j), &BitRow::from_words(sum, cols))?;
    }
    bank.begin_cycle("twos_complement");
    if dst.width > src.width {
        let top = p.add_words(&none, &none, &none);
        bank.write_row_full(dst.row(src.width), &BitRow::from_words(top, cols))?;
    } else {
        bank.latch();
    }
    Ok(())
}

/// `dst = (2^w - src) mod 2^w` for `w = src.width`; `dst` may be `w` or
/// `w + 1` bits wide (the extra bit receives the final carry).
pub fn pim_twos_complement(
    bank: &mut SramBank,
    src: WordSlot,
    dst: WordSlot,
) -> Result<OpResult, BitserialError> {
    check_slot(bank, &src)?;
    check_slot(bank, &dst)?;
    if dst.width != src.width && dst.width != src.width + 1 {
        return Err(BitserialError::WidthMismatch {
            expected: src.width,
            got: dst.width,
        });
    }
    check_disjoint(&src, &dst)?;
    let cols = bank.cols();
    measured(bank, |bank| {
        let mut p = PeripheralArray::reset(cols);
        twos_complement_pass(bank, &mut p, src, dst)
    })
}

/// Modular subtraction `z = (x - y) mod q` in every column.
///
/// `temp` (`N + 1` rows) first receives `2^N - y`; the trial pass adds it to
/// `x` and records underflow (`x < y`) from the top bit of the sum; the
/// second pass recomputes the sum and, in underflowing columns, adds `q`
/// modulo `2^N` by subtracting `2^N - q`. `z` may share its base row with
/// `temp`, `x` or `y`.
pub fn pim_mod_sub(
    bank: &mut SramBank,
    x: WordSlot,
    y: WordSlot,
    z: WordSlot,
    temp: WordSlot,
    q: u64,
) -> Result<OpResult, BitserialError> {
    let width = x.width;
    for s in [&x, &y, &z] {
        check_slot(bank, s)?;
        check_width(s, width)?;
    }
    check_slot(bank, &temp)?;
    check_width(&temp, width + 1)?;
    check_headroom(q, width)?;
    check_disjoint(&x, &y)?;
    check_disjoint(&temp, &x)?;
    check_disjoint(&temp, &y)?;
    check_output(&z, &[x, y, temp], &[])?;

    let cols = bank.cols();
    let complement_q = (1u64 << width) - q;
    measured(bank, |bank| {
        let mut p = PeripheralArray::reset(cols);
        let nw = p.words();
        let none = zeros(nw);

        twos_complement_pass(bank, &mut p, y, temp)?;

        // trial: x + (2^N - y) has bit N set exactly when x >= y
        p.clear_carries(false);
        for j in 0..width {
            bank.begin_cycle("mod_sub.trial");
            let r = bank.read_two_rows(x.row(j), temp.row(j))?;
            p.add_words(r.and_bits.words(), &not(r.nor_bits.words()), &none);
        }
        bank.begin_cycle("mod_sub.trial");
        let top = bank.read_row(temp.row(width))?;
        let sign = p.add_words(top.words(), &none, &none);
        p.overflow = not(&sign);

        p.clear_carries(false);
        for j in 0..width {
            bank.begin_cycle("mod_sub.reduce");
            let r = bank.read_two_rows(x.row(j), temp.row(j))?;
            let cj = const_bit(complement_q, j as i64);
            let sub: Vec<u64> = p.overflow.iter().map(|u| u & cj).collect();
            let diff = p.add_words(r.and_bits.words(), &not(r.nor_bits.words()), &sub);
            bank.write_row_full(z.row(j), &BitRow::from_words(diff, cols))?;
        }
        bank.begin_cycle("mod_sub.reduce");
        bank.latch();
        Ok(())
    })
}

/// Shifted-`q` bit subtracted at position `j` under the latched flags.
///
/// `overflow_4q` selects `q` read `shift_hi` bits lower, otherwise
/// `overflow_2q` selects `q` read one bit less shifted.
fn reduction_words(p: &PeripheralArray, q: u64, j: i64, shift_hi: i64) -> Vec<u64> {
    let hi = const_bit(q, j - shift_hi);
    let lo = const_bit(q, j - shift_hi + 1);
    p.overflow_4q
        .iter()
        .zip(&p.overflow_2q)
        .map(|(o4, o2)| (o4 & hi) | (!o4 & o2 & lo))
        .collect()
}

/// Modular multiplication `z = (x * y) mod q` in every column.
///
/// MSB-first shift-and-add over the bits of `y`: each round reads one bit of
/// `y` into the Tag latch (gating `x` off the bit lines when it is 0) and
/// computes `psum' = 2 * psum - r + Tag * x` bit-serially, where `r` is `4q`
/// or `2q` as selected by the overflow flags latched from the previous
/// round's comparisons of `psum` against `2q` and `q`. The partial sum stays
/// in `[0, 3q)`; a final pass subtracts `2q` or `q` as the last flags
/// dictate. The accumulator ping-pongs between the two `psum` slots.
///
/// `z` may alias `x` or `y`.
pub fn pim_mod_mul(
    bank: &mut SramBank,
    x: WordSlot,
    y: WordSlot,
    z: WordSlot,
    psum: [WordSlot; 2],
    q: u64,
) -> Result<OpResult, BitserialError> {
    let width = x.width;
    for s in [&x, &y, &z] {
        check_slot(bank, s)?;
        check_width(s, width)?;
    }
    for s in &psum {
        check_slot(bank, s)?;
        if s.width < width {
            return Err(BitserialError::WidthMismatch {
                expected: width,
                got: s.width,
            });
        }
    }
    check_headroom(q, width)?;
    if x.base_row != y.base_row {
        check_disjoint(&x, &y)?;
    }
    check_disjoint(&psum[0], &psum[1])?;
    for s in &psum {
        check_disjoint(s, &x)?;
        check_disjoint(s, &y)?;
    }
    check_output(&z, &[x, y], &psum)?;

    let cols = bank.cols();
    measured(bank, |bank| {
        let mut p = PeripheralArray::reset(cols);
        let nw = p.words();
        let none = zeros(nw);

        for (round, k) in (0..width).rev().enumerate() {
            let cur = psum[round % 2];
            let prev = psum[(round + 1) % 2];

            bank.begin_cycle("mod_mul.tag");
            let tag = bank.read_row(y.row(k))?;
            p.tag = tag.words().to_vec();
            if round == 0 {
                p.overflow_4q = zeros(nw);
                p.overflow_2q = zeros(nw);
            } else {
                p.overflow_4q = std::mem::take(&mut p.cmp_4q);
                p.overflow_2q = std::mem::take(&mut p.cmp_2q);
            }
            p.cmp_4q = vec![u64::MAX; nw];
            p.cmp_2q = vec![u64::MAX; nw];
            p.clear_carries(false);

            for j in 0..width {
                bank.begin_cycle("mod_mul.accumulate");
                let (shifted, addend) = if round == 0 || j == 0 {
                    let xb = bank.read_row_gated(x.row(j), &tag)?;
                    (xb.words().to_vec(), none.clone())
                } else {
                    let r = bank.read_two_rows_gated(prev.row(j - 1), x.row(j), &tag)?;
                    let or_gated: Vec<u64> = r
                        .nor_bits
                        .words()
                        .iter()
                        .zip(&p.tag)
                        .map(|(nor, t)| !nor & t)
                        .collect();
                    (r.and_bits.words().to_vec(), or_gated)
                };
                let sub = reduction_words(&p, q, j as i64, 2);
                let sum = p.add_words(&shifted, &addend, &sub);
                let (q_hi, q_lo) = (const_bit(q, j as i64 - 1), const_bit(q, j as i64));
                for w in 0..nw {
                    p.cmp_4q[w] = comparator_word(p.cmp_4q[w], sum[w], q_hi);
                    p.cmp_2q[w] = comparator_word(p.cmp_2q[w], sum[w], q_lo);
                }
                bank.write_row_full(cur.row(j), &BitRow::from_words(sum, cols))?;
            }
            debug_assert!(
                (0..bank.active_cols()).all(|c| !p.column(c).carry),
                "partial sum exceeded the word width"
            );
        }

        let last = psum[(width as usize - 1) % 2];
        bank.begin_cycle("mod_mul.final");
        bank.latch();
        p.overflow_4q = std::mem::take(&mut p.cmp_4q);
        p.overflow_2q = std::mem::take(&mut p.cmp_2q);
        p.clear_carries(false);
        for j in 0..width {
            bank.begin_cycle("mod_mul.final");
            let bits = bank.read_row(last.row(j))?;
            let sub = reduction_words(&p, q, j as i64, 1);
            let out = p.add_words(bits.words(), &none, &sub);
            bank.write_row_full(z.row(j), &BitRow::from_words(out, cols))?;
        }
        Ok(())
    })
}

/// Bitwise copy, one read cycle and one write cycle per bit.
pub fn pim_copy(
    bank: &mut SramBank,
    src: WordSlot,
    dst: WordSlot,
) -> Result<OpResult, BitserialError> {
    check_slot(bank, &src)?;
    check_slot(bank, &dst)?;
    check_width(&dst, src.width)?;
    check_disjoint(&src, &dst)?;
    measured(bank, |bank| {
        for j in 0..src.width {
            bank.begin_cycle("copy.read");
            let bits = bank.read_row(src.row(j))?;
            bank.begin_cycle("copy.write");
            bank.write_row_full(dst.row(j), &bits)?;
        }
        Ok(())
    })
}

/// Controller write of a per-column constant word into `slot`, one row per
/// cycle. Columns beyond `values.len()` receive 0.
pub fn load_constants(
    bank: &mut SramBank,
    slot: WordSlot,
    values: &[u64],
) -> Result<OpResult, BitserialError> {
    check_slot(bank, &slot)?;
    if values.len() > bank.cols() {
        return Err(SramError::ColumnOutOfRange {
            column: values.len(),
            cols: bank.cols(),
        }
        .into());
    }
    let cols = bank.cols();
    measured(bank, |bank| {
        for j in 0..slot.width {
            bank.begin_cycle("constant.write");
            let row = BitRow::from_bits(
                (0..cols).map(|c| values.get(c).is_some_and(|v| v >> j & 1 == 1)),
            );
            bank.write_row_full(slot.row(j), &row)?;
        }
        Ok(())
    })
}
