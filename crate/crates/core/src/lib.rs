//! Bit-accurate, cycle-counting model of a Number Theoretic Transform
//! accelerator that computes inside an SRAM bank.
//!
//! Each bank column holds the two inputs of one butterfly, a twiddle factor
//! and a `2N + 2` row scratchpad. Modular add, subtract and multiply run
//! bit-serially on all columns at once through dual word-line activation
//! and a small per-column peripheral (adder, Tag switch, comparator). A
//! fixed row-wise router moves stage outputs to the next stage's columns.
//!
//! ```
//! use sram_ntt::{validate_params, Accelerator, Polynomial, RingMode};
//!
//! let params = validate_params(17, 8, 7, RingMode::Cyclic).unwrap();
//! let mut acc = Accelerator::new(params).unwrap();
//! let a = Polynomial::new(vec![1, 1, 0, 0, 0, 0, 0, 0], 17).unwrap();
//! let (a_hat, report) = acc.ntt(&a).unwrap();
//! assert_eq!(a_hat.coeffs(), &[2, 3, 5, 9, 0, 16, 14, 10]);
//! assert_eq!(report.total(), sram_ntt::predict_cycles(8, 7).unwrap().total());
//! ```

pub mod bitserial;
pub mod dataflow;
pub mod engine;
pub mod params;
pub mod periph;
pub mod refarith;
pub mod sram;

pub use bitserial::{BankLayout, BitserialError, OpCost, OpResult, WordSlot};
pub use dataflow::{AddressMap, DataflowError, Placement};
pub use engine::{
    predict_cycles, predict_intt, predict_pointwise, predict_polymul, Accelerator, CycleReport,
    EnergyModel, EngineError, StageCycles,
};
pub use params::{validate_params, Direction, NttParams, ParamsError, RingMode};
pub use refarith::{ArithError, Polynomial};
pub use sram::{EventCounts, SramBank, SramError, TraceEvent};
