//! Simulation and characterization toolkit for clocked dynamic-latch
//! (StrongARM-family) comparators.
//!
//! The crate is organized bottom-up:
//!
//! - [`netlist`]: circuit data model, SPICE-subset text format and the
//!   comparator topology generators.
//! - [`devmodel`]: square-law MOSFET evaluation (currents, conductances,
//!   Meyer-style capacitances).
//! - [`engine`]: modified nodal analysis with Newton iteration, DC operating
//!   point and fixed-step transient analysis.
//! - [`analytic`]: closed-form delay, power and offset models.
//! - [`metrics`]: waveform measurements and the end-to-end `characterize`
//!   flow producing [`metrics::ComparatorMetrics`].
//! - [`variation`]: Monte-Carlo mismatch, process corners and sweeps.
//! - [`report`]: benchmark tables and improvement percentages.
//!
//! The numerical core ([`devmodel`], [`engine`], [`analytic`] and the
//! waveform measurements) is generic over [`Scalar`]; `f64` aliases are
//! provided at the crate root for the common case.

pub mod analytic;
pub mod devmodel;
pub mod engine;
pub mod metrics;
pub mod netlist;
pub mod report;
pub mod variation;

use std::fmt::{Debug, Display};

/// Floating-point scalar the numerical core is written against: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, panicking only for values the type cannot
    /// represent at all (never the case for `f32`/`f64`).
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub use analytic::{DelayModelInputs, OffsetModelInputs};
pub use devmodel::{ModelCard, OperatingPoint, Polarity, Region};
pub use engine::{Integration, SolverOptions, TransientResult};
pub use metrics::{ComparatorMetrics, TestbenchSpec};
pub use netlist::{Device, Netlist, TopologyId, Waveform};

/// Double-precision aliases.
pub type Model64 = ModelCard<f64>;
pub type OperatingPoint64 = OperatingPoint<f64>;
pub type Options64 = SolverOptions<f64>;
pub type Waveforms64 = TransientResult<f64>;
pub type DelayInputs64 = DelayModelInputs<f64>;
pub type OffsetInputs64 = OffsetModelInputs<f64>;

/// Single-precision aliases.
pub type Model32 = ModelCard<f32>;
pub type Options32 = SolverOptions<f32>;
pub type Waveforms32 = TransientResult<f32>;
pub type DelayInputs32 = DelayModelInputs<f32>;
