//! Closed-form delay, power and offset models for the dynamic latch.
//!
//! The delay splits into a discharge phase, during which the tail current
//! pulls the output load down by one PMOS threshold, and a regeneration
//! phase whose duration is logarithmic in the imbalance left at its start:
//!
//! ```text
//! t0      = 2 C_L |Vthp| / I_tail
//! dV0     = 2 |Vthp| sqrt(beta / I_tail) dVin
//! t_latch = (C_L / gm_eff) ln((VDD / 2) / dV0)
//! t_total = t0 + t_latch
//! ```
//!
//! The discharge term assumes each input device carries about `I_tail / 2`,
//! which holds for small `dVin` only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticError {
    #[error("{name} must be strictly positive and finite, got {value:e}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("input difference {dv_in:e} V must be below VDD {vdd:e} V")]
    InputExceedsSupply { dv_in: f64, vdd: f64 },
    #[error("initial imbalance {0:e} V must lie in (0, VDD/2]")]
    DegenerateImbalance(f64),
    #[error("overdrive must be non-negative, got {0:e} V")]
    NegativeOverdrive(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayModelInputs<T = f64> {
    pub c_load: T,
    pub v_thp: T,
    pub i_tail: T,
    pub gm_eff: T,
    pub vdd: T,
    pub beta: T,
    pub dv_in: T,
}

impl<T: Scalar> DelayModelInputs<T> {
    pub fn validate(&self) -> Result<(), AnalyticError> {
        let fields = [
            ("c_load", self.c_load),
            ("v_thp", self.v_thp),
            ("i_tail", self.i_tail),
            ("gm_eff", self.gm_eff),
            ("vdd", self.vdd),
            ("beta", self.beta),
            ("dv_in", self.dv_in),
        ];
        for (name, value) in fields {
            if !(value > T::zero() && value.is_finite()) {
                return Err(AnalyticError::NonPositive {
                    name,
                    value: value.as_f64(),
                });
            }
        }
        if self.dv_in >= self.vdd {
            return Err(AnalyticError::InputExceedsSupply {
                dv_in: self.dv_in.as_f64(),
                vdd: self.vdd.as_f64(),
            });
        }
        Ok(())
    }

    /// Discharge and regeneration components plus the imbalance linking them.
    pub fn breakdown(&self) -> Result<DelayBreakdown<T>, AnalyticError> {
        let t0 = discharge_delay(self)?;
        let dv0 = initial_imbalance(self)?;
        let t_latch = latch_delay(self, dv0)?;
        Ok(DelayBreakdown {
            t0,
            dv0,
            t_latch,
            total: t0 + t_latch,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayBreakdown<T = f64> {
    pub t0: T,
    pub dv0: T,
    pub t_latch: T,
    pub total: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffsetModelInputs<T = f64> {
    pub d_vt: T,
    pub vgs_minus_vt: T,
    pub d_rl_over_r: T,
    pub d_beta_over_beta: T,
}

/// `t0 = 2 C_L |Vthp| / I_tail`.
pub fn discharge_delay<T: Scalar>(inp: &DelayModelInputs<T>) -> Result<T, AnalyticError> {
    inp.validate()?;
    Ok(T::lit(2.0) * inp.c_load * inp.v_thp / inp.i_tail)
}

/// Imbalance left after discharging for `t0` with one side carrying `i_d2`:
/// `dV0 = |Vthp| - i_d2 t0 / C_L`.
pub fn imbalance_after_discharge<T: Scalar>(v_thp: T, i_d2: T, t0: T, c_load: T) -> T {
    v_thp - i_d2 * t0 / c_load
}

/// Per-side current for an input difference `dv_in`, linearized about the
/// balanced point: `I_tail/2 - gm dVin / 2` with `gm = sqrt(beta I_tail)`.
pub fn losing_side_current<T: Scalar>(inp: &DelayModelInputs<T>) -> T {
    let half = T::lit(0.5);
    half * inp.i_tail - half * (inp.beta * inp.i_tail).sqrt() * inp.dv_in
}

/// `dV0 = 2 |Vthp| sqrt(beta / I_tail) dVin`.
pub fn initial_imbalance<T: Scalar>(inp: &DelayModelInputs<T>) -> Result<T, AnalyticError> {
    inp.validate()?;
    Ok(T::lit(2.0) * inp.v_thp * (inp.beta / inp.i_tail).sqrt() * inp.dv_in)
}

/// `t_latch = (C_L / gm_eff) ln((VDD/2) / dV0)`.
pub fn latch_delay<T: Scalar>(inp: &DelayModelInputs<T>, dv0: T) -> Result<T, AnalyticError> {
    let half_vdd = inp.vdd * T::lit(0.5);
    if !(dv0 > T::zero() && dv0 <= half_vdd) {
        return Err(AnalyticError::DegenerateImbalance(dv0.as_f64()));
    }
    for (name, value) in [
        ("c_load", inp.c_load),
        ("gm_eff", inp.gm_eff),
        ("vdd", inp.vdd),
    ] {
        if !(value > T::zero() && value.is_finite()) {
            return Err(AnalyticError::NonPositive {
                name,
                value: value.as_f64(),
            });
        }
    }
    if dv0 == half_vdd {
        return Ok(T::zero());
    }
    Ok(inp.c_load / inp.gm_eff * (half_vdd / dv0).ln())
}

/// `t0 + t_latch` with the imbalance from [`initial_imbalance`].
pub fn total_delay<T: Scalar>(inp: &DelayModelInputs<T>) -> Result<T, AnalyticError> {
    inp.breakdown().map(|b| b.total)
}

/// `P = f_clk VDD Q` for the charge `Q` drawn in one clock period.
pub fn average_power<T: Scalar>(supply_charge: T, vdd: T, f_clk: T) -> Result<T, AnalyticError> {
    if !(f_clk > T::zero() && f_clk.is_finite()) {
        return Err(AnalyticError::NonPositive {
            name: "f_clk",
            value: f_clk.as_f64(),
        });
    }
    Ok(f_clk * vdd * supply_charge)
}

/// `Vos = dVT + (Vov / 2) (dR/R + dbeta/beta)`.
///
/// The latch has no literal load resistor; callers map `d_rl_over_r` to the
/// relative mismatch of whatever effective load they model.
pub fn offset_voltage<T: Scalar>(inp: &OffsetModelInputs<T>) -> Result<T, AnalyticError> {
    if !(inp.vgs_minus_vt >= T::zero()) {
        return Err(AnalyticError::NegativeOverdrive(inp.vgs_minus_vt.as_f64()));
    }
    Ok(inp.d_vt + inp.vgs_minus_vt * T::lit(0.5) * (inp.d_rl_over_r + inp.d_beta_over_beta))
}
