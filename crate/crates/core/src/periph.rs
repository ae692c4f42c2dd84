//! Near-memory column peripheral: adder/subtractor with carry and borrow
//! latches, the Tag switch, and the bit-serial comparator with its overflow
//! flags.
//!
//! [`ColumnPeripheralState`] is the one-column reference model.
//! [`PeripheralArray`] holds the same latches bit-sliced across columns (bit
//! `c % 64` of word `c / 64` belongs to column `c`) and is what the bit-serial
//! operations drive.

/// Latches of one column peripheral.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ColumnPeripheralState {
    pub carry: bool,
    pub borrow: bool,
    pub tag: bool,
    pub cmp_2q: bool,
    pub cmp_4q: bool,
    pub overflow_2q: bool,
    pub overflow_4q: bool,
    /// Overflow/underflow flag of the add and subtract trial phase.
    pub overflow: bool,
}

/// Which shifted multiple of `q` the next accumulation subtracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reduction {
    None,
    /// Subtract `q` read one bit lower (`q_{j-1}`).
    SubtractQShift1,
    /// Subtract `q` read two bits lower (`q_{j-2}`).
    SubtractQShift2,
}

/// Deliberate defects for fault-detection tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fault {
    /// Start the modular-add overflow comparator at 0, so it detects
    /// `sum > q` instead of `sum >= q`.
    StrictAddComparator,
}

impl ColumnPeripheralState {
    pub fn reset() -> Self {
        Self::default()
    }

    /// One bit position of `a + b - subtract + carry - borrow`.
    ///
    /// Returns the sum bit; the carry latch is set when the position value
    /// exceeds 1 and the borrow latch when it is negative.
    pub fn adder_step(&mut self, a: bool, b: bool, subtract: bool) -> bool {
        let value = a as i8 + b as i8 - subtract as i8 + self.carry as i8 - self.borrow as i8;
        self.carry = value > 1;
        self.borrow = value < 0;
        value & 1 == 1
    }

    pub fn reduction_select(&self) -> Reduction {
        if self.overflow_4q {
            Reduction::SubtractQShift2
        } else if self.overflow_2q {
            Reduction::SubtractQShift1
        } else {
            Reduction::None
        }
    }
}

/// Keep the previous verdict while the bits agree, otherwise take the value
/// bit. Folded LSB first, the final state is `value >= reference` when
/// started at 1 and `value > reference` when started at 0.
pub fn comparator_step(cmp_prev: bool, value_bit: bool, ref_bit: bool) -> bool {
    if value_bit == ref_bit {
        cmp_prev
    } else {
        value_bit
    }
}

/// Fold [`comparator_step`] over the low `bits` bits, LSB first.
pub fn compare_lsb_first(value: u64, reference: u64, bits: u32, init: bool) -> bool {
    (0..bits).fold(init, |cmp, j| {
        comparator_step(cmp, value >> j & 1 == 1, reference >> j & 1 == 1)
    })
}

/// Bit-sliced [`ColumnPeripheralState::adder_step`] over 64 columns.
pub(crate) fn adder_word(a: u64, b: u64, sub: u64, carry: &mut u64, borrow: &mut u64) -> u64 {
    let (c, br) = (*carry, *borrow);
    // positive part a + b + carry in 0..=3, negative part sub + borrow in 0..=2
    let p0 = a ^ b ^ c;
    let p1 = (a & b) | (c & (a ^ b));
    let n0 = sub ^ br;
    let n1 = sub & br;
    let pos0 = !p1 & !p0;
    let pos1 = !p1 & p0;
    let pos2 = p1 & !p0;
    let pos3 = p1 & p0;
    let neg0 = !n1 & !n0;
    *carry = (pos2 & neg0) | (pos3 & !n1);
    *borrow = (pos0 & (n0 | n1)) | (pos1 & n1);
    p0 ^ n0
}

/// Bit-sliced [`comparator_step`].
pub(crate) fn comparator_word(cmp: u64, value: u64, reference: u64) -> u64 {
    let differ = value ^ reference;
    (cmp & !differ) | (value & differ)
}

/// Broadcast of a controller-supplied constant bit.
pub(crate) fn splat(bit: bool) -> u64 {
    if bit {
        u64::MAX
    } else {
        0
    }
}

/// All column peripherals of a bank, bit-sliced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeripheralArray {
    pub(crate) carry: Vec<u64>,
    pub(crate) borrow: Vec<u64>,
    pub(crate) tag: Vec<u64>,
    pub(crate) cmp_2q: Vec<u64>,
    pub(crate) cmp_4q: Vec<u64>,
    pub(crate) overflow_2q: Vec<u64>,
    pub(crate) overflow_4q: Vec<u64>,
    pub(crate) overflow: Vec<u64>,
    cols: usize,
}

impl PeripheralArray {
    /// All latches cleared.
    pub fn reset(cols: usize) -> Self {
        let words = cols.div_ceil(64);
        PeripheralArray {
            carry: vec![0; words],
            borrow: vec![0; words],
            tag: vec![0; words],
            cmp_2q: vec![0; words],
            cmp_4q: vec![0; words],
            overflow_2q: vec![0; words],
            overflow_4q: vec![0; words],
            overflow: vec![0; words],
            cols,
        }
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub(crate) fn words(&self) -> usize {
        self.carry.len()
    }

    /// Clear carry and borrow, and set the carry latch to `initial_carry` in
    /// every column (1 for two's-complement passes).
    pub(crate) fn clear_carries(&mut self, initial_carry: bool) {
        self.carry.fill(splat(initial_carry));
        self.borrow.fill(0);
    }

    /// Column-wise [`ColumnPeripheralState::adder_step`]; `sub` is per column.
    pub(crate) fn add_words(&mut self, a: &[u64], b: &[u64], sub: &[u64]) -> Vec<u64> {
        (0..self.words())
            .map(|w| adder_word(a[w], b[w], sub[w], &mut self.carry[w], &mut self.borrow[w]))
            .collect()
    }

    /// The latches of column `c` as a scalar state.
    pub fn column(&self, c: usize) -> ColumnPeripheralState {
        assert!(c < self.cols, "column {c} out of range {}", self.cols);
        let bit = |v: &Vec<u64>| v[c / 64] >> (c % 64) & 1 == 1;
        ColumnPeripheralState {
            carry: bit(&self.carry),
            borrow: bit(&self.borrow),
            tag: bit(&self.tag),
            cmp_2q: bit(&self.cmp_2q),
            cmp_4q: bit(&self.cmp_4q),
            overflow_2q: bit(&self.overflow_2q),
            overflow_4q: bit(&self.overflow_4q),
            overflow: bit(&self.overflow),
        }
    }
}
