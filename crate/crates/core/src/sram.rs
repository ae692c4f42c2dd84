//! Digital model of a 6T SRAM bank used as a bit-serial compute fabric.
//!
//! Rows are word lines, columns are bit lines. Each column stores the bits of
//! its words vertically (LSB at the lowest row of a slot), so reading one row
//! yields bit `j` of one word in every column at once. Activating two rows
//! together leaves `A AND B` on BL and `A NOR B` on BLB of every column.
//!
//! Rows are packed 64 columns per `u64`; every micro-operation is counted in
//! [`EventCounts`] and can be streamed to a trace hook.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};

use thiserror::Error;

use crate::periph::Fault;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SramError {
    #[error("row {row} out of range (bank has {rows} rows)")]
    RowOutOfRange { row: usize, rows: usize },
    #[error("column {column} out of range (bank has {cols} columns)")]
    ColumnOutOfRange { column: usize, cols: usize },
    #[error("dual activation of row {0} with itself")]
    SameRow(usize),
    #[error("bit vector has {got} entries, bank has {expected} columns")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid geometry {rows}x{cols}: need at least one row and a power-of-two column count >= 2")]
    InvalidGeometry { rows: usize, cols: usize },
}

/// A packed vector of one bit per column.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitRow {
    words: Vec<u64>,
    len: usize,
}

impl BitRow {
    pub fn zeros(len: usize) -> Self {
        BitRow {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut row = BitRow {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        row.clear_tail();
        row
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut row = BitRow::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            row.set(i, b);
        }
        row
    }

    pub(crate) fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(len.div_ceil(64), 0);
        let mut row = BitRow { words, len };
        row.clear_tail();
        row
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(|i| self.get(i))
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BitRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: String = self.iter().map(|b| if b { '1' } else { '0' }).collect();
        write!(f, "BitRow({s})")
    }
}

/// Sense-amplifier output of a dual-row activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReadout {
    /// BL: `A AND B`.
    pub and_bits: BitRow,
    /// BLB: `A NOR B`.
    pub nor_bits: BitRow,
}

/// Tallies of array micro-events.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EventCounts {
    pub single_activations: u64,
    pub dual_activations: u64,
    pub row_writes: u64,
    /// Column sense events (one per powered column per activation).
    pub sensed_bits: u64,
    /// Cells written (one per powered, masked-in column per row write).
    pub written_bits: u64,
    /// Bits moved through the inter-column router.
    pub routed_bits: u64,
    /// Cycles with no array activity (peripheral latch/resolve only).
    pub latch_cycles: u64,
}

impl Add for EventCounts {
    type Output = EventCounts;

    fn add(self, o: EventCounts) -> EventCounts {
        EventCounts {
            single_activations: self.single_activations + o.single_activations,
            dual_activations: self.dual_activations + o.dual_activations,
            row_writes: self.row_writes + o.row_writes,
            sensed_bits: self.sensed_bits + o.sensed_bits,
            written_bits: self.written_bits + o.written_bits,
            routed_bits: self.routed_bits + o.routed_bits,
            latch_cycles: self.latch_cycles + o.latch_cycles,
        }
    }
}

impl AddAssign for EventCounts {
    fn add_assign(&mut self, o: EventCounts) {
        *self = *self + o;
    }
}

impl Sub for EventCounts {
    type Output = EventCounts;

    fn sub(self, o: EventCounts) -> EventCounts {
        EventCounts {
            single_activations: self.single_activations - o.single_activations,
            dual_activations: self.dual_activations - o.dual_activations,
            row_writes: self.row_writes - o.row_writes,
            sensed_bits: self.sensed_bits - o.sensed_bits,
            written_bits: self.written_bits - o.written_bits,
            routed_bits: self.routed_bits - o.routed_bits,
            latch_cycles: self.latch_cycles - o.latch_cycles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MicroOpKind {
    Read,
    ReadGated,
    DualRead,
    DualReadGated,
    Write,
    Latch,
}

impl fmt::Display for MicroOpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MicroOpKind::Read => "read",
            MicroOpKind::ReadGated => "read_gated",
            MicroOpKind::DualRead => "read2",
            MicroOpKind::DualReadGated => "read2_gated",
            MicroOpKind::Write => "write",
            MicroOpKind::Latch => "latch",
        })
    }
}

/// One traced micro-operation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub cycle: u64,
    pub kind: MicroOpKind,
    pub rows: Vec<usize>,
    pub detail: &'static str,
}

impl fmt::Display for TraceEvent {
    /// `cycle<TAB>opkind<TAB>rows<TAB>detail`
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = if self.rows.is_empty() {
            "-".to_string()
        } else {
            self.rows
                .iter()
                .map(|r| r.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        write!(f, "{}\t{}\t{}\t{}", self.cycle, self.kind, rows, self.detail)
    }
}

pub type TraceHook = Box<dyn FnMut(&TraceEvent) + Send>;

/// A rows x cols SRAM bank with a powered prefix of `active_cols` columns.
pub struct SramBank {
    rows: usize,
    cols: usize,
    active_cols: usize,
    words_per_row: usize,
    cells: Vec<u64>,
    active_mask: Vec<u64>,
    events: EventCounts,
    cycles: u64,
    detail: &'static str,
    trace: Option<TraceHook>,
    fault: Option<Fault>,
}

impl fmt::Debug for SramBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SramBank")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("active_cols", &self.active_cols)
            .field("cycles", &self.cycles)
            .field("events", &self.events)
            .finish_non_exhaustive()
    }
}

impl SramBank {
    /// A zeroed bank with every column powered.
    pub fn new(rows: usize, cols: usize) -> Result<Self, SramError> {
        if rows == 0 || cols < 2 || !cols.is_power_of_two() {
            return Err(SramError::InvalidGeometry { rows, cols });
        }
        let words_per_row = cols.div_ceil(64);
        let mut bank = SramBank {
            rows,
            cols,
            active_cols: cols,
            words_per_row,
            cells: vec![0; rows * words_per_row],
            active_mask: Vec::new(),
            events: EventCounts::default(),
            cycles: 0,
            detail: "",
            trace: None,
            fault: None,
        };
        bank.active_mask = BitRow::ones(cols).words;
        Ok(bank)
    }

    /// Rows needed for operand width `width`: three words plus a
    /// `2 * width + 2` row scratchpad.
    pub fn rows_for_width(width: u32) -> usize {
        5 * width as usize + 2
    }

    /// A bank sized for an `n`-point transform of `width`-bit operands.
    pub fn for_transform(n: usize, width: u32) -> Result<Self, SramError> {
        SramBank::new(SramBank::rows_for_width(width), n)
    }

    /// Whether this bank can host an `n`-point, `width`-bit transform.
    pub fn supports(&self, n: usize, width: u32) -> bool {
        self.rows >= SramBank::rows_for_width(width) && self.cols >= n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn active_cols(&self) -> usize {
        self.active_cols
    }

    /// Power-gate every column at or beyond `active`.
    pub fn set_active_columns(&mut self, active: usize) -> Result<(), SramError> {
        if active == 0 || active > self.cols {
            return Err(SramError::ColumnOutOfRange {
                column: active,
                cols: self.cols,
            });
        }
        self.active_cols = active;
        let mut mask = BitRow::zeros(self.cols);
        for c in 0..active {
            mask.set(c, true);
        }
        self.active_mask = mask.words;
        Ok(())
    }

    pub fn events(&self) -> EventCounts {
        self.events
    }

    /// Cycles begun so far.
    pub fn cycles(&self) -> u64 {
        self.cycles
    }

    pub fn set_trace_hook(&mut self, hook: Option<TraceHook>) {
        self.trace = hook;
    }

    pub fn inject_fault(&mut self, fault: Option<Fault>) {
        self.fault = fault;
    }

    pub(crate) fn fault(&self) -> Option<Fault> {
        self.fault
    }

    /// Open a new cycle; every micro-op until the next call is stamped with it.
    pub fn begin_cycle(&mut self, detail: &'static str) {
        self.cycles += 1;
        self.detail = detail;
    }

    /// Record a peripheral-only cycle (no word line raised).
    pub fn latch(&mut self) {
        self.events.latch_cycles += 1;
        self.emit(MicroOpKind::Latch, &[]);
    }

    pub(crate) fn count_routed_bits(&mut self, bits: u64) {
        self.events.routed_bits += bits;
    }

    fn emit(&mut self, kind: MicroOpKind, rows: &[usize]) {
        if let Some(hook) = self.trace.as_mut() {
            hook(&TraceEvent {
                cycle: self.cycles.saturating_sub(1),
                kind,
                rows: rows.to_vec(),
                detail: self.detail,
            });
        }
    }

    fn check_row(&self, row: usize) -> Result<(), SramError> {
        if row >= self.rows {
            return Err(SramError::RowOutOfRange {
                row,
                rows: self.rows,
            });
        }
        Ok(())
    }

    fn check_len(&self, bits: &BitRow) -> Result<(), SramError> {
        if bits.len != self.cols {
            return Err(SramError::LengthMismatch {
                expected: self.cols,
                got: bits.len,
            });
        }
        Ok(())
    }

    fn row_words(&self, row: usize) -> &[u64] {
        &self.cells[row * self.words_per_row..(row + 1) * self.words_per_row]
    }

    fn sense(&mut self, dual: bool) {
        if dual {
            self.events.dual_activations += 1;
        } else {
            self.events.single_activations += 1;
        }
        self.events.sensed_bits += self.active_cols as u64;
    }

    /// Single-row activation.
    pub fn read_row(&mut self, row: usize) -> Result<BitRow, SramError> {
        self.check_row(row)?;
        self.sense(false);
        self.emit(MicroOpKind::Read, &[row]);
        let words = self
            .row_words(row)
            .iter()
            .zip(&self.active_mask)
            .map(|(c, m)| c & m)
            .collect();
        Ok(BitRow::from_words(words, self.cols))
    }

    /// Single-row activation with a per-column access switch; columns whose
    /// gate is 0 read 0.
    pub fn read_row_gated(&mut self, row: usize, gate: &BitRow) -> Result<BitRow, SramError> {
        self.check_row(row)?;
        self.check_len(gate)?;
        self.sense(false);
        self.emit(MicroOpKind::ReadGated, &[row]);
        let words = self
            .row_words(row)
            .iter()
            .zip(&self.active_mask)
            .zip(&gate.words)
            .map(|((c, m), g)| c & m & g)
            .collect();
        Ok(BitRow::from_words(words, self.cols))
    }

    /// Dual-row activation: BL carries `A AND B`, BLB carries `A NOR B`.
    pub fn read_two_rows(&mut self, row_a: usize, row_b: usize) -> Result<RowReadout, SramError> {
        self.check_row(row_a)?;
        self.check_row(row_b)?;
        if row_a == row_b {
            return Err(SramError::SameRow(row_a));
        }
        self.sense(true);
        self.emit(MicroOpKind::DualRead, &[row_a, row_b]);
        let (mut and, mut nor) = (Vec::new(), Vec::new());
        for ((a, b), m) in self
            .row_words(row_a)
            .iter()
            .zip(self.row_words(row_b))
            .zip(&self.active_mask)
        {
            and.push(a & b & m);
            nor.push(!(a | b) & m);
        }
        Ok(RowReadout {
            and_bits: BitRow::from_words(and, self.cols),
            nor_bits: BitRow::from_words(nor, self.cols),
        })
    }

    /// Dual-row activation where `row_b` is disconnected from the bit lines in
    /// columns whose gate is 0; those columns behave as a single read of
    /// `row_a` (BL = A, BLB = NOT A).
    pub fn read_two_rows_gated(
        &mut self,
        row_a: usize,
        row_b: usize,
        gate: &BitRow,
    ) -> Result<RowReadout, SramError> {
        self.check_row(row_a)?;
        self.check_row(row_b)?;
        self.check_len(gate)?;
        if row_a == row_b {
            return Err(SramError::SameRow(row_a));
        }
        self.sense(true);
        self.emit(MicroOpKind::DualReadGated, &[row_a, row_b]);
        let (mut and, mut nor) = (Vec::new(), Vec::new());
        for (((a, b), m), g) in self
            .row_words(row_a)
            .iter()
            .zip(self.row_words(row_b))
            .zip(&self.active_mask)
            .zip(&gate.words)
        {
            let b_eff_and = b | !g;
            let b_eff_or = b & g;
            and.push(a & b_eff_and & m);
            nor.push(!(a | b_eff_or) & m);
        }
        Ok(RowReadout {
            and_bits: BitRow::from_words(and, self.cols),
            nor_bits: BitRow::from_words(nor, self.cols),
        })
    }

    /// Write `values` into `row` for every powered column selected by `mask`.
    pub fn write_row(
        &mut self,
        row: usize,
        values: &BitRow,
        mask: &BitRow,
    ) -> Result<(), SramError> {
        self.check_row(row)?;
        self.check_len(values)?;
        self.check_len(mask)?;
        let mut written = 0u64;
        let wpr = self.words_per_row;
        for (i, cell) in self.cells[row * wpr..(row + 1) * wpr]
            .iter_mut()
            .enumerate()
        {
            let m = mask.words[i] & self.active_mask[i];
            *cell = (*cell & !m) | (values.words[i] & m);
            written += m.count_ones() as u64;
        }
        self.events.row_writes += 1;
        self.events.written_bits += written;
        self.emit(MicroOpKind::Write, &[row]);
        Ok(())
    }

    /// Write `values` into `row` across all powered columns.
    pub fn write_row_full(&mut self, row: usize, values: &BitRow) -> Result<(), SramError> {
        let mask = BitRow::ones(self.cols);
        self.write_row(row, values, &mask)
    }

    /// Uncounted, untraced view of a row (test and host-port use).
    pub fn peek_row(&self, row: usize) -> Result<BitRow, SramError> {
        self.check_row(row)?;
        Ok(BitRow::from_words(self.row_words(row).to_vec(), self.cols))
    }

    /// Host-port write of a `width`-bit little-endian word into one column.
    /// Not a compute-fabric operation: no cycles or events are charged.
    pub fn host_write_word(
        &mut self,
        column: usize,
        base_row: usize,
        width: u32,
        value: u64,
    ) -> Result<(), SramError> {
        if column >= self.cols {
            return Err(SramError::ColumnOutOfRange {
                column,
                cols: self.cols,
            });
        }
        self.check_row(base_row + width as usize - 1)?;
        let (w, bit) = (column / 64, 1u64 << (column % 64));
        for j in 0..width as usize {
            let cell = &mut self.cells[(base_row + j) * self.words_per_row + w];
            if value >> j & 1 == 1 {
                *cell |= bit;
            } else {
                *cell &= !bit;
            }
        }
        Ok(())
    }

    /// Host-port read counterpart of [`SramBank::host_write_word`].
    pub fn host_read_word(
        &self,
        column: usize,
        base_row: usize,
        width: u32,
    ) -> Result<u64, SramError> {
        if column >= self.cols {
            return Err(SramError::ColumnOutOfRange {
                column,
                cols: self.cols,
            });
        }
        self.check_row(base_row + width as usize - 1)?;
        let (w, shift) = (column / 64, column % 64);
        Ok((0..width as usize).fold(0u64, |acc, j| {
            let bit = self.cells[(base_row + j) * self.words_per_row + w] >> shift & 1;
            acc | bit << j
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::{Arc, Mutex};

    fn row_from(bits: &[u8]) -> BitRow {
        BitRow::from_bits(bits.iter().map(|&b| b == 1))
    }

    #[test]
    fn fresh_bank_reads_zero() {
        let mut bank = SramBank::new(4, 8).unwrap();
        assert_eq!(bank.read_row(3).unwrap(), BitRow::zeros(8));
        assert_eq!(bank.events().single_activations, 1);
        assert_eq!(bank.events().sensed_bits, 8);
    }

    #[test]
    fn read_after_write() {
        let mut bank = SramBank::new(4, 8).unwrap();
        let v = row_from(&[1, 0, 1, 1, 0, 0, 1, 0]);
        bank.write_row_full(2, &v).unwrap();
        assert_eq!(bank.read_row(2).unwrap(), v);
        assert_eq!(bank.events().row_writes, 1);
        assert_eq!(bank.events().written_bits, 8);
    }

    #[test]
    fn dual_read_truth_table() {
        let mut bank = SramBank::new(2, 4).unwrap();
        bank.write_row_full(0, &row_from(&[1, 0, 1, 0])).unwrap();
        bank.write_row_full(1, &row_from(&[1, 0, 0, 1])).unwrap();
        let r = bank.read_two_rows(0, 1).unwrap();
        assert_eq!(r.and_bits, row_from(&[1, 0, 0, 0]));
        assert_eq!(r.nor_bits, row_from(&[0, 1, 0, 0]));
        assert_eq!(bank.events().dual_activations, 1);
        assert_eq!(bank.events().single_activations, 0);
    }

    #[test]
    fn dual_read_errors() {
        let mut bank = SramBank::new(2, 4).unwrap();
        assert_eq!(bank.read_two_rows(1, 1), Err(SramError::SameRow(1)));
        assert_eq!(
            bank.read_two_rows(0, 2),
            Err(SramError::RowOutOfRange { row: 2, rows: 2 })
        );
        assert!(bank.read_row(5).is_err());
        assert!(bank.write_row_full(2, &BitRow::zeros(4)).is_err());
        assert_eq!(
            bank.write_row_full(0, &BitRow::zeros(3)),
            Err(SramError::LengthMismatch {
                expected: 4,
                got: 3
            })
        );
    }

    #[test]
    fn masked_writes() {
        let mut bank = SramBank::new(1, 4).unwrap();
        let ones = BitRow::ones(4);
        bank.write_row(0, &ones, &BitRow::zeros(4)).unwrap();
        assert_eq!(bank.peek_row(0).unwrap(), BitRow::zeros(4));
        bank.write_row(0, &ones, &row_from(&[0, 1, 1, 0])).unwrap();
        assert_eq!(bank.peek_row(0).unwrap(), row_from(&[0, 1, 1, 0]));
        assert_eq!(bank.events().written_bits, 2);
    }

    #[test]
    fn gated_reads_disconnect_second_row() {
        let mut bank = SramBank::new(2, 4).unwrap();
        bank.write_row_full(0, &row_from(&[1, 1, 0, 0])).unwrap();
        bank.write_row_full(1, &row_from(&[1, 0, 1, 0])).unwrap();
        let gate = row_from(&[0, 0, 0, 1]);
        let r = bank.read_two_rows_gated(0, 1, &gate).unwrap();
        // gate off: BL = A, BLB = !A
        assert_eq!(r.and_bits, row_from(&[1, 1, 0, 0]));
        assert_eq!(r.nor_bits, row_from(&[0, 0, 1, 1]));
        assert_eq!(bank.read_row_gated(1, &gate).unwrap(), BitRow::zeros(4));
    }

    #[test]
    fn power_gated_columns_are_inert() {
        let mut bank = SramBank::new(1, 8).unwrap();
        bank.set_active_columns(2).unwrap();
        bank.write_row_full(0, &BitRow::ones(8)).unwrap();
        assert_eq!(bank.peek_row(0).unwrap(), row_from(&[1, 1, 0, 0, 0, 0, 0, 0]));
        assert_eq!(bank.events().written_bits, 2);
        bank.read_row(0).unwrap();
        assert_eq!(bank.events().sensed_bits, 2);
        assert!(bank.set_active_columns(9).is_err());
    }

    #[test]
    fn host_port_round_trip_is_uncounted() {
        let mut bank = SramBank::new(10, 128).unwrap();
        bank.host_write_word(100, 2, 7, 0b1011001).unwrap();
        assert_eq!(bank.host_read_word(100, 2, 7).unwrap(), 0b1011001);
        assert_eq!(bank.host_read_word(99, 2, 7).unwrap(), 0);
        assert_eq!(bank.events(), EventCounts::default());
        assert!(bank.host_write_word(0, 5, 7, 1).is_err());
    }

    #[test]
    fn trace_hook_sees_micro_ops() {
        let log = Arc::new(Mutex::new(Vec::new()));
        let sink = Arc::clone(&log);
        let mut bank = SramBank::new(3, 4).unwrap();
        bank.set_trace_hook(Some(Box::new(move |e: &TraceEvent| {
            sink.lock().unwrap().push(e.to_string())
        })));
        bank.begin_cycle("t");
        bank.read_two_rows(0, 2).unwrap();
        bank.begin_cycle("t");
        bank.write_row_full(1, &BitRow::zeros(4)).unwrap();
        bank.begin_cycle("t");
        bank.latch();
        assert_eq!(
            *log.lock().unwrap(),
            vec!["0\tread2\t0,2\tt", "1\twrite\t1\tt", "2\tlatch\t-\tt"]
        );
        assert_eq!(bank.cycles(), 3);
    }

    #[test]
    fn geometry() {
        let bank = SramBank::for_transform(1024, 32).unwrap();
        assert_eq!((bank.rows(), bank.cols()), (162, 1024));
        assert!(bank.supports(1024, 32));
        assert!(!bank.supports(2048, 32));
        assert!(!bank.supports(1024, 33));
        assert!(SramBank::new(4, 6).is_err());
    }

    proptest! {
        #[test]
        fn dual_read_matches_single_reads(
            a in proptest::collection::vec(any::<bool>(), 130),
            b in proptest::collection::vec(any::<bool>(), 130),
        ) {
            let mut bank = SramBank::new(2, 256).unwrap();
            let pad = |v: &Vec<bool>| BitRow::from_bits(v.iter().copied().chain(std::iter::repeat(false)).take(256));
            bank.write_row_full(0, &pad(&a)).unwrap();
            bank.write_row_full(1, &pad(&b)).unwrap();
            let before = bank.events();
            let dual = bank.read_two_rows(0, 1).unwrap();
            let mid = bank.events();
            let ra = bank.read_row(0).unwrap();
            let rb = bank.read_row(1).unwrap();
            let after = bank.events();
            for c in 0..256 {
                prop_assert_eq!(dual.and_bits.get(c), ra.get(c) && rb.get(c));
                prop_assert_eq!(dual.nor_bits.get(c), !(ra.get(c) || rb.get(c)));
                prop_assert!(!(dual.and_bits.get(c) && dual.nor_bits.get(c)));
            }
            prop_assert_eq!((mid - before).dual_activations, 1);
            prop_assert_eq!((after - mid).single_activations, 2);
            // reads never modify cells
            prop_assert_eq!(bank.peek_row(0).unwrap(), ra);
        }
    }
}
