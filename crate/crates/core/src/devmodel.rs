//! Square-law MOSFET model.
//!
//! Drain current follows the long-channel square law with channel-length
//! modulation applied in both triode and saturation, so the current is
//! continuous across the region boundary. Body effect is not modelled:
//! `vbs` is accepted for interface completeness and ignored.
//!
//! Currents are reported drain-to-source. PMOS devices are evaluated by
//! polarity mirroring, `ids_p(vgs, vds) = -ids_n(-vgs, -vds)`, with
//! thresholds stored as positive magnitudes for both polarities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

/// Channel length at which the default `lambda` values are specified.
pub const REFERENCE_LENGTH_M: f64 = 180e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Nmos,
    Pmos,
}

impl Polarity {
    pub fn keyword(self) -> &'static str {
        match self {
            Polarity::Nmos => "nmos",
            Polarity::Pmos => "pmos",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    Cutoff,
    Triode,
    Saturation,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DevModelError {
    #[error("model parameter {name} out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("device dimension {name} must be strictly positive, got {value}")]
    InvalidDimension { name: &'static str, value: f64 },
    #[error("gm_eff needs at least one operating point")]
    EmptyDeviceList,
}

/// MOSFET parameter set. `kp` is the process transconductance `mu * Cox`
/// in A/V^2; `cgso`/`cgdo` are overlap capacitances per unit width (F/m);
/// `cox` is the gate oxide capacitance density (F/m^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelCard<T = f64> {
    pub polarity: Polarity,
    pub vt0: T,
    pub kp: T,
    pub lambda: T,
    pub cgso: T,
    pub cgdo: T,
    pub cox: T,
}

impl ModelCard<f64> {
    /// Generic 180nm-class NMOS.
    pub fn default_nmos() -> Self {
        ModelCard {
            polarity: Polarity::Nmos,
            vt0: 0.45,
            kp: 170e-6,
            lambda: 0.06,
            cgso: 0.3e-9,
            cgdo: 0.3e-9,
            cox: 8.5e-3,
        }
    }

    /// Generic 180nm-class PMOS.
    pub fn default_pmos() -> Self {
        ModelCard {
            polarity: Polarity::Pmos,
            vt0: 0.45,
            kp: 60e-6,
            lambda: 0.08,
            cgso: 0.3e-9,
            cgdo: 0.3e-9,
            cox: 8.5e-3,
        }
    }

    pub fn default_for(polarity: Polarity) -> Self {
        match polarity {
            Polarity::Nmos => Self::default_nmos(),
            Polarity::Pmos => Self::default_pmos(),
        }
    }
}

impl<T: Scalar> ModelCard<T> {
    pub fn cast<U: Scalar>(&self) -> ModelCard<U> {
        ModelCard {
            polarity: self.polarity,
            vt0: U::lit(self.vt0.as_f64()),
            kp: U::lit(self.kp.as_f64()),
            lambda: U::lit(self.lambda.as_f64()),
            cgso: U::lit(self.cgso.as_f64()),
            cgdo: U::lit(self.cgdo.as_f64()),
            cox: U::lit(self.cox.as_f64()),
        }
    }

    pub fn validate(&self) -> Result<(), DevModelError> {
        let check = |name: &'static str, v: T, ok: bool| {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(DevModelError::InvalidParameter {
                    name,
                    value: v.as_f64(),
                })
            }
        };
        let zero = T::zero();
        check("KP", self.kp, self.kp > zero)?;
        check("VT0", self.vt0, self.vt0 > zero)?;
        check("LAMBDA", self.lambda, self.lambda >= zero)?;
        check("CGSO", self.cgso, self.cgso >= zero)?;
        check("CGDO", self.cgdo, self.cgdo >= zero)?;
        check("COX", self.cox, self.cox >= zero)
    }
}

/// Small-signal operating point of one MOSFET.
///
/// `gm`, `gds` and the region describe the device in its conducting
/// orientation: when the drain-source voltage is reversed (`reversed`), the
/// physical drain acts as the source and those quantities refer to the
/// swapped device. `ids` is always the physical drain-to-source current and
/// `cgs`/`cgd` always refer to the physical terminals. Use
/// [`OperatingPoint::terminal_partials`] for derivatives with respect to the
/// physical `vgs`/`vds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint<T = f64> {
    pub region: Region,
    pub ids: T,
    pub gm: T,
    pub gds: T,
    pub cgs: T,
    pub cgd: T,
    pub reversed: bool,
}

impl<T: Scalar> OperatingPoint<T> {
    /// `(d ids / d vgs, d ids / d vds)` at the physical terminals.
    pub fn terminal_partials(&self) -> (T, T) {
        if self.reversed {
            (-self.gm, self.gm + self.gds)
        } else {
            (self.gm, self.gds)
        }
    }
}

/// Current factor `kp * W / L`.
pub fn beta<T: Scalar>(model: &ModelCard<T>, width_m: T, length_m: T) -> T {
    model.kp * width_m / length_m
}

struct Core<T> {
    region: Region,
    ids: T,
    gm: T,
    gds: T,
}

/// NMOS-normalized square law for `vds >= 0`.
fn square_law<T: Scalar>(beta: T, vt: T, lambda: T, vgs: T, vds: T) -> Core<T> {
    let zero = T::zero();
    let one = T::one();
    let half = T::lit(0.5);
    let vov = vgs - vt;
    if vov <= zero {
        return Core {
            region: Region::Cutoff,
            ids: zero,
            gm: zero,
            gds: zero,
        };
    }
    let clm = one + lambda * vds;
    if vds < vov {
        let core = vov * vds - half * vds * vds;
        Core {
            region: Region::Triode,
            ids: beta * core * clm,
            gm: beta * vds * clm,
            gds: beta * (vov - vds) * clm + beta * core * lambda,
        }
    } else {
        Core {
            region: Region::Saturation,
            ids: half * beta * vov * vov * clm,
            gm: beta * vov * clm,
            gds: half * beta * vov * vov * lambda,
        }
    }
}

/// Evaluates a MOSFET at the given terminal voltages. Total on finite input.
pub fn evaluate_mosfet<T: Scalar>(
    model: &ModelCard<T>,
    width_m: T,
    length_m: T,
    vgs: T,
    vds: T,
    _vbs: T,
) -> OperatingPoint<T> {
    let zero = T::zero();
    let b = beta(model, width_m, length_m);
    // NMOS-normalized terminal voltages.
    let (nvgs, nvds) = match model.polarity {
        Polarity::Nmos => (vgs, vds),
        Polarity::Pmos => (-vgs, -vds),
    };
    let reversed = nvds < zero;
    let core = if reversed {
        square_law(b, model.vt0, model.lambda, nvgs - nvds, -nvds)
    } else {
        square_law(b, model.vt0, model.lambda, nvgs, nvds)
    };
    // Physical drain-to-source current in NMOS-normalized frame.
    let n_ids = if reversed { -core.ids } else { core.ids };
    let ids = match model.polarity {
        Polarity::Nmos => n_ids,
        Polarity::Pmos => -n_ids,
    };

    let area = model.cox * width_m * length_m;
    let (c_src, c_drn) = match core.region {
        Region::Cutoff => (zero, zero),
        Region::Triode => (T::lit(0.5) * area, T::lit(0.5) * area),
        Region::Saturation => (T::lit(2.0 / 3.0) * area, zero),
    };
    // Intrinsic split is oriented; overlaps stay with the physical terminals.
    let (c_gs_int, c_gd_int) = if reversed {
        (c_drn, c_src)
    } else {
        (c_src, c_drn)
    };

    OperatingPoint {
        region: core.region,
        ids,
        gm: core.gm,
        gds: core.gds,
        cgs: c_gs_int + model.cgso * width_m,
        cgd: c_gd_int + model.cgdo * width_m,
        reversed,
    }
}

/// Regeneration transconductance of one inverter of a cross-coupled pair:
/// the sum of its devices' `gm`. A pseudo-NMOS inverter passes only its NMOS
/// (the grounded-gate load contributes no gate-driven transconductance).
pub fn gm_eff<T: Scalar>(latch_devices: &[OperatingPoint<T>]) -> Result<T, DevModelError> {
    if latch_devices.is_empty() {
        return Err(DevModelError::EmptyDeviceList);
    }
    Ok(latch_devices.iter().fold(T::zero(), |acc, op| acc + op.gm))
}
