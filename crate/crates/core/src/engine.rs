//! Transform orchestration on one bank, with cycle and event reporting.
//!
//! Every butterfly stage runs the same sequence on all `n/2` columns:
//!
//! 1. write the stage twiddles into W (`N` cycles)
//! 2. `B <- W * B`, accumulating in S0/S1 (`(N+1)^2`)
//! 3. `S0 <- A + B` (`2(N+1)`)
//! 4. `S1 <- A - B`, using S1 as the complement temp (`3(N+1)`)
//! 5. route S0/S1 into the next stage's A/B slots (`4N`); after the last
//!    stage the outputs are copied back to A/B instead (`2 * 2N`), or routed
//!    straight into the inverse transform's input placement when a
//!    polynomial product continues with pointwise multiplication.
//!
//! Host loads and stores are not bank cycles and are not counted.

use std::fmt;

use thiserror::Error;

use crate::bitserial::{
    pim_copy, pim_mod_add, pim_mod_mul, pim_mod_sub, BankLayout, BitserialError, OpCost, OpResult,
    WordSlot,
};
use crate::dataflow::{
    interstage_permutation, load_polynomial, load_word_constants, reorder_permutation, route,
    store_polynomial, DataflowError, Placement,
};
use crate::params::{mul_mod, pow_mod, Direction, NttParams, ParamsError, RingMode};
use crate::refarith::{ArithError, Polynomial};
use crate::sram::{EventCounts, SramBank, SramError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("bank of {rows}x{cols} cells cannot hold an {n}-point transform of {width}-bit words")]
    BankTooSmall {
        rows: usize,
        cols: usize,
        n: usize,
        width: u32,
    },
    #[error("expected {expected} coefficients, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Dataflow(#[from] DataflowError),
    #[error(transparent)]
    Bitserial(#[from] BitserialError),
    #[error(transparent)]
    Sram(#[from] SramError),
    #[error(transparent)]
    Arith(#[from] ArithError),
}

/// Unit cost per micro-event kind. Dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyModel {
    pub single_activation: f64,
    pub dual_activation: f64,
    pub row_write: f64,
    pub sensed_bit: f64,
    pub written_bit: f64,
    pub routed_bit: f64,
    pub latch_cycle: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            single_activation: 1.0,
            dual_activation: 1.0,
            row_write: 1.0,
            sensed_bit: 1.0,
            written_bit: 1.0,
            routed_bit: 1.0,
            latch_cycle: 1.0,
        }
    }
}

impl EnergyModel {
    pub const KEYS: [&'static str; 7] = [
        "single_activation",
        "dual_activation",
        "row_write",
        "sensed_bit",
        "written_bit",
        "routed_bit",
        "latch_cycle",
    ];

    /// Set one unit cost by name. Costs must be finite and non-negative.
    pub fn set(&mut self, key: &str, value: f64) -> Result<(), String> {
        if !value.is_finite() || value < 0.0 {
            return Err(format!("energy cost `{key}` must be a non-negative number"));
        }
        let slot = match key {
            "single_activation" => &mut self.single_activation,
            "dual_activation" => &mut self.dual_activation,
            "row_write" => &mut self.row_write,
            "sensed_bit" => &mut self.sensed_bit,
            "written_bit" => &mut self.written_bit,
            "routed_bit" => &mut self.routed_bit,
            "latch_cycle" => &mut self.latch_cycle,
            other => return Err(format!("unknown energy cost `{other}`")),
        };
        *slot = value;
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EnergyModel {
            single_activation: self.single_activation * factor,
            dual_activation: self.dual_activation * factor,
            row_write: self.row_write * factor,
            sensed_bit: self.sensed_bit * factor,
            written_bit: self.written_bit * factor,
            routed_bit: self.routed_bit * factor,
            latch_cycle: self.latch_cycle * factor,
        }
    }

    pub fn estimate(&self, e: &EventCounts) -> f64 {
        e.single_activations as f64 * self.single_activation
            + e.dual_activations as f64 * self.dual_activation
            + e.row_writes as f64 * self.row_write
            + e.sensed_bits as f64 * self.sensed_bit
            + e.written_bits as f64 * self.written_bit
            + e.routed_bits as f64 * self.routed_bit
            + e.latch_cycles as f64 * self.latch_cycle
    }
}

/// Cycles of one butterfly stage, by phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageCycles {
    pub direction: Direction,
    pub stage: u32,
    pub twiddle_load: u64,
    pub multiply: u64,
    pub add: u64,
    pub subtract: u64,
    pub route: u64,
    pub copy_back: u64,
}

impl StageCycles {
    fn new(direction: Direction, stage: u32) -> Self {
        StageCycles {
            direction,
            stage,
            twiddle_load: 0,
            multiply: 0,
            add: 0,
            subtract: 0,
            route: 0,
            copy_back: 0,
        }
    }

    /// Multiply, add and subtract: the butterfly itself.
    pub fn butterfly(&self) -> u64 {
        self.multiply + self.add + self.subtract
    }

    pub fn total(&self) -> u64 {
        self.twiddle_load + self.butterfly() + self.route + self.copy_back
    }
}

/// Cycle and event account of one engine run.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub n: usize,
    pub width: u32,
    pub stages: Vec<StageCycles>,
    /// Forward `psi^i` weighting (negacyclic products).
    pub weighting: u64,
    /// Coefficient-wise product with the second operand's transform.
    pub pointwise: u64,
    /// Routing from forward-output placement to inverse-input placement.
    pub reorder: u64,
    /// Multiplication by `n^-1` folded into the last inverse stage.
    pub scaling: u64,
    /// Inverse `psi^-i * n^-1` weighting (negacyclic products).
    pub unweighting: u64,
    pub events: EventCounts,
}

impl CycleReport {
    fn new(n: usize, width: u32) -> Self {
        CycleReport {
            n,
            width,
            stages: Vec::new(),
            weighting: 0,
            pointwise: 0,
            reorder: 0,
            scaling: 0,
            unweighting: 0,
            events: EventCounts::default(),
        }
    }

    pub fn stage_cycles(&self) -> u64 {
        self.stages.iter().map(StageCycles::total).sum()
    }

    pub fn total(&self) -> u64 {
        self.stage_cycles()
            + self.weighting
            + self.pointwise
            + self.reorder
            + self.scaling
            + self.unweighting
    }

    pub fn energy_estimate(&self, model: &EnergyModel) -> f64 {
        model.estimate(&self.events)
    }
}

impl fmt::Display for CycleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "n\t{}", self.n)?;
        writeln!(f, "N\t{}", self.width)?;
        writeln!(f, "direction\tstage\ttwiddle_load\tmultiply\tadd\tsubtract\troute\tcopy_back\ttotal")?;
        for s in &self.stages {
            writeln!(
                f,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.direction,
                s.stage,
                s.twiddle_load,
                s.multiply,
                s.add,
                s.subtract,
                s.route,
                s.copy_back,
                s.total()
            )?;
        }
        writeln!(f, "stages_total\t{}", self.stage_cycles())?;
        writeln!(f, "weighting\t{}", self.weighting)?;
        writeln!(f, "pointwise\t{}", self.pointwise)?;
        writeln!(f, "reorder\t{}", self.reorder)?;
        writeln!(f, "scaling\t{}", self.scaling)?;
        writeln!(f, "unweighting\t{}", self.unweighting)?;
        writeln!(f, "total_cycles\t{}", self.total())?;
        let e = &self.events;
        writeln!(f, "single_activations\t{}", e.single_activations)?;
        writeln!(f, "dual_activations\t{}", e.dual_activations)?;
        writeln!(f, "row_writes\t{}", e.row_writes)?;
        writeln!(f, "sensed_bits\t{}", e.sensed_bits)?;
        writeln!(f, "written_bits\t{}", e.written_bits)?;
        writeln!(f, "routed_bits\t{}", e.routed_bits)?;
        write!(f, "latch_cycles\t{}", e.latch_cycles)
    }
}

/// What happens to the outputs of the last stage of a transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LastStageExit {
    /// Copy S0/S1 back to A/B; points end up in transform-output placement.
    CopyBack,
    /// Route S0/S1 straight into transform-input placement.
    Reorder,
}

/// A bank plus the parameters it is configured for.
pub struct Accelerator {
    params: NttParams,
    bank: SramBank,
    energy: EnergyModel,
}

impl fmt::Debug for Accelerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Accelerator")
            .field("params", &self.params)
            .field("rows", &self.bank.rows())
            .field("cols", &self.bank.cols())
            .finish()
    }
}

impl Accelerator {
    /// A bank of exactly `5N + 2` rows by `n` columns.
    pub fn new(params: NttParams) -> Result<Self, EngineError> {
        let bank = SramBank::for_transform(params.n(), params.width())?;
        Self::with_bank(params, bank)
    }

    /// Use an existing bank; columns beyond `n/2` stay power-gated.
    pub fn with_bank(params: NttParams, mut bank: SramBank) -> Result<Self, EngineError> {
        if !bank.supports(params.n(), params.width()) {
            return Err(EngineError::BankTooSmall {
                rows: bank.rows(),
                cols: bank.cols(),
                n: params.n(),
                width: params.width(),
            });
        }
        bank.set_active_columns(params.columns())?;
        Ok(Accelerator {
            params,
            bank,
            energy: EnergyModel::default(),
        })
    }

    pub fn params(&self) -> &NttParams {
        &self.params
    }

    pub fn bank(&self) -> &SramBank {
        &self.bank
    }

    pub fn bank_mut(&mut self) -> &mut SramBank {
        &mut self.bank
    }

    pub fn energy_model(&self) -> &EnergyModel {
        &self.energy
    }

    pub fn set_energy_model(&mut self, model: EnergyModel) {
        self.energy = model;
    }

    pub fn into_bank(self) -> SramBank {
        self.bank
    }

    fn layout(&self) -> BankLayout {
        BankLayout::new(self.params.width())
    }

    pub fn load(&mut self, a: &Polynomial, placement: Placement) -> Result<(), EngineError> {
        self.check_len(a)?;
        Ok(load_polynomial(&mut self.bank, &self.params, a, placement)?)
    }

    pub fn store(&self, placement: Placement) -> Result<Polynomial, EngineError> {
        Ok(store_polynomial(&self.bank, &self.params, placement)?)
    }

    fn check_len(&self, a: &Polynomial) -> Result<(), EngineError> {
        if a.len() != self.params.n() {
            return Err(EngineError::LengthMismatch {
                expected: self.params.n(),
                got: a.len(),
            });
        }
        Ok(())
    }

    /// `slot <- W * slot` with `W` set to `constants` (one per column).
    fn scale_slot(&mut self, slot: WordSlot, constants: &[u64]) -> Result<OpResult, EngineError> {
        let l = self.layout();
        let load = load_word_constants(&mut self.bank, &self.params, constants)?;
        let mul = pim_mod_mul(&mut self.bank, l.w, slot, slot, [l.s0, l.s1], self.params.q())?;
        Ok(load + mul)
    }

    /// Multiply every point by `f(point index)`, both slots, given where
    /// the points currently sit.
    fn scale_points<F>(&mut self, placement: Placement, f: F) -> Result<u64, EngineError>
    where
        F: Fn(usize) -> u64,
    {
        let n = self.params.n();
        let l = self.layout();
        let mut cycles = 0;
        for (slot, parity) in [(l.a, 0), (l.b, 1)] {
            let constants = (0..n / 2)
                .map(|c| Ok(f(placement.index_at(n, 2 * c + parity)?)))
                .collect::<Result<Vec<_>, DataflowError>>()?;
            cycles += self.scale_slot(slot, &constants)?.cycles;
        }
        Ok(cycles)
    }

    /// One butterfly stage on the current bank contents, with the given
    /// per-column twiddles.
    fn stage(
        &mut self,
        direction: Direction,
        stage: u32,
        twiddles: &[u64],
        exit: LastStageExit,
    ) -> Result<(StageCycles, u64), EngineError> {
        let l = self.layout();
        let q = self.params.q();
        let n = self.params.n();
        let mut s = StageCycles::new(direction, stage);
        let mut reorder = 0;
        s.twiddle_load = load_word_constants(&mut self.bank, &self.params, twiddles)?.cycles;
        s.multiply = pim_mod_mul(&mut self.bank, l.w, l.b, l.b, [l.s0, l.s1], q)?.cycles;
        s.add = pim_mod_add(&mut self.bank, l.a, l.b, l.sum_out(), q)?.cycles;
        s.subtract = pim_mod_sub(&mut self.bank, l.a, l.b, l.diff_out(), l.s1, q)?.cycles;
        let outputs = [l.sum_out(), l.diff_out()];
        if stage < self.params.log_n() {
            s.route = route(&mut self.bank, outputs, [l.a, l.b], &interstage_permutation(n)?)?.cycles;
        } else if exit == LastStageExit::Reorder {
            reorder = route(&mut self.bank, outputs, [l.a, l.b], &reorder_permutation(n)?)?.cycles;
        } else {
            s.copy_back = pim_copy(&mut self.bank, outputs[0], l.a)?.cycles
                + pim_copy(&mut self.bank, outputs[1], l.b)?.cycles;
        }
        Ok((s, reorder))
    }

    /// Run one forward stage on whatever the bank holds.
    pub fn forward_stage(&mut self, stage: u32) -> Result<StageCycles, EngineError> {
        let twiddles = self.params.stage_twiddles(stage)?;
        Ok(self.stage(Direction::Forward, stage, &twiddles, LastStageExit::CopyBack)?.0)
    }

    fn transform(
        &mut self,
        direction: Direction,
        scale: bool,
        exit: LastStageExit,
        report: &mut CycleReport,
    ) -> Result<(), EngineError> {
        let log_n = self.params.log_n();
        let q = self.params.q();
        for stage in 1..=log_n {
            let mut twiddles = self.params.twiddles(direction, stage)?;
            if scale && stage == log_n {
                // n^-1 (A + W B) = n^-1 A + (n^-1 W) B
                let n_inv = self.params.n_inv();
                let a = self.layout().a;
                report.scaling += self.scale_slot(a, &vec![n_inv; self.params.columns()])?.cycles;
                for t in &mut twiddles {
                    *t = mul_mod(*t, n_inv, q);
                }
            }
            let (cycles, reorder) = self.stage(direction, stage, &twiddles, exit)?;
            report.stages.push(cycles);
            report.reorder += reorder;
        }
        Ok(())
    }

    fn measured<F>(&mut self, body: F) -> Result<CycleReport, EngineError>
    where
        F: FnOnce(&mut Self, &mut CycleReport) -> Result<(), EngineError>,
    {
        let mut report = CycleReport::new(self.params.n(), self.params.width());
        let (c0, e0) = (self.bank.cycles(), self.bank.events());
        body(self, &mut report)?;
        report.events = self.bank.events() - e0;
        debug_assert_eq!(self.bank.cycles() - c0, report.total());
        Ok(report)
    }

    /// Forward transform, natural order in and out.
    pub fn ntt(&mut self, a: &Polynomial) -> Result<(Polynomial, CycleReport), EngineError> {
        self.load(a, Placement::TransformInput)?;
        let report = self.measured(|acc, r| {
            acc.transform(Direction::Forward, false, LastStageExit::CopyBack, r)
        })?;
        Ok((self.store(Placement::TransformOutput)?, report))
    }

    /// Inverse transform including the `n^-1` scaling.
    pub fn intt(&mut self, a_hat: &Polynomial) -> Result<(Polynomial, CycleReport), EngineError> {
        self.load(a_hat, Placement::TransformInput)?;
        let report = self.measured(|acc, r| {
            acc.transform(Direction::Inverse, true, LastStageExit::CopyBack, r)
        })?;
        Ok((self.store(Placement::TransformOutput)?, report))
    }

    /// Multiply the points currently held in A/B (in `placement`) by
    /// `s_hat`, given in natural order.
    pub fn pointwise_mul(
        &mut self,
        s_hat: &Polynomial,
        placement: Placement,
    ) -> Result<CycleReport, EngineError> {
        self.check_len(s_hat)?;
        let q = self.params.q();
        if let Some(&value) = s_hat.coeffs().iter().find(|&&c| c >= q) {
            return Err(ArithError::OutOfRange { value, q }.into());
        }
        self.measured(|acc, r| {
            r.pointwise = acc.scale_points(placement, |p| s_hat.coeffs()[p])?;
            Ok(())
        })
    }

    /// Weighted forward transform of `s` on this bank, in natural order: the
    /// second operand of a product.
    fn operand_transform(&mut self, s: &Polynomial) -> Result<Polynomial, EngineError> {
        self.load(s, Placement::TransformInput)?;
        let mut scratch = CycleReport::new(self.params.n(), self.params.width());
        self.weight(&mut scratch)?;
        self.transform(Direction::Forward, false, LastStageExit::CopyBack, &mut scratch)?;
        self.store(Placement::TransformOutput)
    }

    fn weight(&mut self, report: &mut CycleReport) -> Result<(), EngineError> {
        if self.params.mode() == RingMode::Negacyclic {
            let (psi, q) = (self.params.psi().expect("negacyclic"), self.params.q());
            report.weighting = self.scale_points(Placement::TransformInput, |i| pow_mod(psi, i as u64, q))?;
        }
        Ok(())
    }

    /// `a * s` in the ring selected by the parameter mode.
    ///
    /// The transform of `s` is computed by a simulated forward transform on
    /// a second bank of the same geometry; that run is not part of the
    /// returned report.
    pub fn polymul(
        &mut self,
        a: &Polynomial,
        s: &Polynomial,
    ) -> Result<(Polynomial, CycleReport), EngineError> {
        self.check_len(s)?;
        let second = SramBank::new(self.bank.rows(), self.bank.cols())?;
        let mut other = Accelerator::with_bank(self.params.clone(), second)?;
        let s_hat = other.operand_transform(s)?;
        self.polymul_with_transform(a, &s_hat)
    }

    /// `a * s` given `s_hat`, the (weighted, in negacyclic mode) forward
    /// transform of `s` in natural order.
    pub fn polymul_with_transform(
        &mut self,
        a: &Polynomial,
        s_hat: &Polynomial,
    ) -> Result<(Polynomial, CycleReport), EngineError> {
        self.check_len(s_hat)?;
        self.load(a, Placement::TransformInput)?;
        let negacyclic = self.params.mode() == RingMode::Negacyclic;
        let report = self.measured(|acc, r| {
            acc.weight(r)?;
            acc.transform(Direction::Forward, false, LastStageExit::Reorder, r)?;
            r.pointwise = acc.scale_points(Placement::TransformInput, |p| s_hat.coeffs()[p])?;
            acc.transform(Direction::Inverse, !negacyclic, LastStageExit::CopyBack, r)?;
            if negacyclic {
                let q = acc.params.q();
                let psi_inv = acc.params.psi_inv().expect("negacyclic");
                let n_inv = acc.params.n_inv();
                r.unweighting = acc.scale_points(Placement::TransformOutput, |i| {
                    mul_mod(pow_mod(psi_inv, i as u64, q), n_inv, q)
                })?;
            }
            Ok(())
        })?;
        Ok((self.store(Placement::TransformOutput)?, report))
    }
}

fn predicted_stage(direction: Direction, stage: u32, log_n: u32, exit: LastStageExit, width: u32) -> (StageCycles, u64, Vec<OpCost>) {
    let mut s = StageCycles::new(direction, stage);
    let mut ops = vec![
        OpCost::constant_load(width),
        OpCost::mod_mul(width),
        OpCost::mod_add(width),
        OpCost::mod_sub(width),
    ];
    s.twiddle_load = ops[0].cycles;
    s.multiply = ops[1].cycles;
    s.add = ops[2].cycles;
    s.subtract = ops[3].cycles;
    let mut reorder = 0;
    if stage < log_n {
        s.route = OpCost::route(width).cycles;
        ops.push(OpCost::route(width));
    } else if exit == LastStageExit::Reorder {
        reorder = OpCost::route(width).cycles;
        ops.push(OpCost::route(width));
    } else {
        s.copy_back = 2 * OpCost::copy(width).cycles;
        ops.extend([OpCost::copy(width), OpCost::copy(width)]);
    }
    (s, reorder, ops)
}

/// Analytic report builder mirroring the engine's schedule.
struct Prediction {
    report: CycleReport,
    log_n: u32,
    ops: Vec<OpCost>,
}

impl Prediction {
    fn new(n: usize, width: u32) -> Result<Self, EngineError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(ParamsError::NotPowerOfTwo(n).into());
        }
        Ok(Prediction {
            report: CycleReport::new(n, width),
            log_n: n.trailing_zeros(),
            ops: Vec::new(),
        })
    }

    /// Two constant-multiply passes (A and B slots).
    fn scale_points(&mut self) -> u64 {
        let w = self.report.width;
        let pass = [OpCost::constant_load(w), OpCost::mod_mul(w)];
        for _ in 0..2 {
            self.ops.extend(pass);
        }
        2 * pass.iter().map(|o| o.cycles).sum::<u64>()
    }

    fn transform(&mut self, direction: Direction, scale: bool, exit: LastStageExit) {
        let w = self.report.width;
        for stage in 1..=self.log_n {
            if scale && stage == self.log_n {
                let pass = [OpCost::constant_load(w), OpCost::mod_mul(w)];
                self.report.scaling += pass.iter().map(|o| o.cycles).sum::<u64>();
                self.ops.extend(pass);
            }
            let (s, reorder, ops) = predicted_stage(direction, stage, self.log_n, exit, w);
            self.report.stages.push(s);
            self.report.reorder += reorder;
            self.ops.extend(ops);
        }
    }

    fn finish(mut self) -> CycleReport {
        let cols = self.report.n / 2;
        self.report.events = self
            .ops
            .iter()
            .map(|o| o.on_columns(cols).events)
            .fold(EventCounts::default(), |acc, e| acc + e);
        self.report
    }
}

/// Closed-form report of [`Accelerator::ntt`] for size `n`, width `N`.
pub fn predict_cycles(n: usize, width: u32) -> Result<CycleReport, EngineError> {
    let mut p = Prediction::new(n, width)?;
    p.transform(Direction::Forward, false, LastStageExit::CopyBack);
    Ok(p.finish())
}

/// Closed-form report of [`Accelerator::intt`].
pub fn predict_intt(n: usize, width: u32) -> Result<CycleReport, EngineError> {
    let mut p = Prediction::new(n, width)?;
    p.transform(Direction::Inverse, true, LastStageExit::CopyBack);
    Ok(p.finish())
}

/// Closed-form report of [`Accelerator::pointwise_mul`].
pub fn predict_pointwise(n: usize, width: u32) -> Result<CycleReport, EngineError> {
    let mut p = Prediction::new(n, width)?;
    p.report.pointwise = p.scale_points();
    Ok(p.finish())
}

/// Closed-form report of [`Accelerator::polymul`].
pub fn predict_polymul(n: usize, width: u32, mode: RingMode) -> Result<CycleReport, EngineError> {
    let mut p = Prediction::new(n, width)?;
    let negacyclic = mode == RingMode::Negacyclic;
    if negacyclic {
        p.report.weighting = p.scale_points();
    }
    p.transform(Direction::Forward, false, LastStageExit::Reorder);
    p.report.pointwise = p.scale_points();
    p.transform(Direction::Inverse, !negacyclic, LastStageExit::CopyBack);
    if negacyclic {
        p.report.unweighting = p.scale_points();
    }
    Ok(p.finish())
}
