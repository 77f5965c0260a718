//! Monte-Carlo mismatch, process corners and parameter sweeps.
//!
//! Mismatch follows Pelgrom area scaling: per device,
//! `sigma(dVT) = a_vt / sqrt(W L)` and `sigma(dbeta/beta) = a_beta / sqrt(W L)`.
//! Each perturbed device receives its own copy of its model card.
//!
//! Sample `i` draws from a ChaCha stream selected by `(seed, i)`, so results
//! do not depend on execution order or thread count. Failed samples are kept
//! as censored entries and counted rather than dropped.

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution as _, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devmodel::Polarity;
use crate::engine::SolverOptions;
use crate::metrics::{
    characterize_comparator, characterize_netlist, ComparatorMetrics, Metric, MetricsError,
    PartialMetrics, TestbenchSpec,
};
use crate::netlist::{Device, Netlist};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationError {
    #[error("invalid mismatch spec: {0}")]
    InvalidSpec(String),
    #[error("unknown sweep parameter {0}")]
    UnknownParameter(String),
    #[error("corner {corner}: {source}")]
    Corner {
        corner: String,
        source: MetricsError,
    },
    #[error("sweep value {value:e}: {source}")]
    Sweep { value: f64, source: MetricsError },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Pelgrom coefficients and sampling controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MismatchSpec {
    /// Threshold coefficient in V*m (5 mV*um = 5e-9).
    pub a_vt: f64,
    /// Current-factor coefficient in m (1 %*um = 1e-8).
    pub a_beta: f64,
    pub seed: u64,
    pub n_samples: usize,
    /// Devices to perturb; `None` perturbs every MOSFET.
    pub devices: Option<Vec<String>>,
}

impl Default for MismatchSpec {
    fn default() -> Self {
        MismatchSpec {
            a_vt: 5e-9,
            a_beta: 1e-8,
            seed: 0,
            n_samples: 100,
            devices: None,
        }
    }
}

impl MismatchSpec {
    pub fn validate(&self) -> Result<(), VariationError> {
        if !(self.a_vt >= 0.0 && self.a_vt.is_finite()) {
            return Err(VariationError::InvalidSpec("a_vt must be >= 0".into()));
        }
        if !(self.a_beta >= 0.0 && self.a_beta.is_finite()) {
            return Err(VariationError::InvalidSpec("a_beta must be >= 0".into()));
        }
        if self.n_samples < 1 {
            return Err(VariationError::InvalidSpec("n_samples must be >= 1".into()));
        }
        Ok(())
    }

    fn selects(&self, device: &str) -> bool {
        self.devices
            .as_ref()
            .is_none_or(|d| d.iter().any(|x| x.eq_ignore_ascii_case(device)))
    }
}

/// `sigma(dVT)` for a `w` x `l` device.
pub fn sigma_vt(a_vt: f64, w: f64, l: f64) -> f64 {
    a_vt / (w * l).sqrt()
}

/// `sigma(dbeta/beta)` for a `w` x `l` device.
pub fn sigma_beta(a_beta: f64, w: f64, l: f64) -> f64 {
    a_beta / (w * l).sqrt()
}

/// Per-device draw applied to one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceShift {
    pub device: String,
    pub d_vt: f64,
    pub d_beta_rel: f64,
}

/// Random stream of sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws the shifts of sample `index`, in device order.
pub fn draw_shifts(netlist: &Netlist, spec: &MismatchSpec, index: u64) -> Vec<DeviceShift> {
    let mut rng = sample_rng(spec.seed, index);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut out = Vec::new();
    for d in &netlist.devices {
        if let Device::Mosfet {
            name,
            width_m,
            length_m,
            ..
        } = d
        {
            // Always draw, so enabling a device filter does not reshuffle
            // the remaining devices' values.
            let z_vt: f64 = std_normal.sample(&mut rng);
            let z_beta: f64 = std_normal.sample(&mut rng);
            if spec.selects(name) {
                out.push(DeviceShift {
                    device: name.clone(),
                    d_vt: z_vt * sigma_vt(spec.a_vt, *width_m, *length_m),
                    d_beta_rel: z_beta * sigma_beta(spec.a_beta, *width_m, *length_m),
                });
            }
        }
    }
    out
}

/// Gives each shifted device a private model card with the shift applied.
/// Threshold shifts add to the threshold magnitude for both polarities.
pub fn apply_shifts(netlist: &Netlist, shifts: &[DeviceShift]) -> Netlist {
    let mut n = netlist.clone();
    for s in shifts {
        if let Some(Device::Mosfet { name, model, .. }) = n.device_mut(&s.device) {
            let mut card = netlist.models[model.as_str()];
            card.vt0 += s.d_vt;
            card.kp *= 1.0 + s.d_beta_rel;
            let private = format!("{model}__{name}").to_ascii_lowercase();
            *model = private.clone();
            n.models.insert(private, card);
        }
    }
    n
}

/// Sample statistics plus the censored (failed) samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub metric: Metric,
    /// `(sample_index, value)` of every successful sample, by index.
    pub samples: Vec<(usize, f64)>,
    /// `(sample_index, message)` of every failed sample.
    pub failures: Vec<(usize, String)>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// JSON summary of a [`Distribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub n_failed: usize,
}

impl Distribution {
    pub fn from_samples(
        metric: Metric,
        samples: Vec<(usize, f64)>,
        failures: Vec<(usize, String)>,
    ) -> Self {
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let (mean, std, min, max) = stats(&values);
        Distribution {
            metric,
            samples,
            failures,
            mean,
            std,
            min,
            max,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.1).collect()
    }

    pub fn summary(&self) -> DistributionSummary {
        DistributionSummary {
            metric: self.metric,
            mean: self.mean,
            std: self.std,
            min: self.min,
            max: self.max,
            n: self.samples.len(),
            n_failed: self.failures.len(),
        }
    }

    /// `sample_index,value` rows, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "sample_index,value")?;
        for (i, v) in &self.samples {
            writeln!(out, "{i},{v:.16e}")?;
        }
        Ok(())
    }

    pub fn histogram(&self, bins: usize) -> Vec<HistogramBin> {
        histogram(&self.values(), bins)
    }
}

/// Mean, sample standard deviation, min and max. Empty input gives NaN.
pub fn stats(values: &[f64]) -> (f64, f64, f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return (min, 0.0, min, max);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt(), min, max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width bins spanning `[min, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistogramBin> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let (_, _, min, max) = stats(values);
    let width = if max > min {
        (max - min) / bins as f64
    } else {
        1.0
    };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: min + i as f64 * width,
            hi: min + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for v in values {
        let i = (((v - min) / width) as usize).min(bins - 1);
        out[i].count += 1;
    }
    out
}

/// Monte-Carlo over mismatch. Samples run in parallel and are merged by
/// index. Offsets keep their sign so the spread reflects the mismatch.
pub fn monte_carlo(
    comparator: &Netlist,
    bench: &TestbenchSpec,
    options: &SolverOptions<f64>,
    spec: &MismatchSpec,
    metric: Metric,
) -> Result<Distribution, VariationError> {
    spec.validate()?;
    bench.validate()?;
    let results: Vec<(usize, Result<f64, String>)> = (0..spec.n_samples)
        .into_par_iter()
        .map(|i| {
            let shifts = draw_shifts(comparator, spec, i as u64);
            let n = apply_shifts(comparator, &shifts);
            let r = characterize_netlist(&n, bench, options, &[metric])
                .map_err(|e| e.to_string())
                .and_then(|p| {
                    p.get(metric)
                        .ok_or_else(|| "metric not produced".to_string())
                });
            (i, r)
        })
        .collect();
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(v) => samples.push((i, v)),
            Err(e) => failures.push((i, e)),
        }
    }
    Ok(Distribution::from_samples(metric, samples, failures))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CornerName {
    TT,
    FF,
    SS,
    FS,
    SF,
}

impl CornerName {
    pub fn as_str(self) -> &'static str {
        match self {
            CornerName::TT => "TT",
            CornerName::FF => "FF",
            CornerName::SS => "SS",
            CornerName::FS => "FS",
            CornerName::SF => "SF",
        }
    }
}

/// Shift applied to every card of one polarity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerShift {
    pub kp_scale: f64,
    /// Added to the threshold magnitude, volts.
    pub vt0_offset: f64,
}

impl CornerShift {
    pub const IDENTITY: CornerShift = CornerShift {
        kp_scale: 1.0,
        vt0_offset: 0.0,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Corner {
    pub name: CornerName,
    pub nmos: CornerShift,
    pub pmos: CornerShift,
}

impl Corner {
    /// Fast: `kp` x (1 + `kp_frac`), threshold lowered by `vt_frac` of the
    /// default 0.45 V; slow is the reverse.
    pub fn standard(name: CornerName, kp_frac: f64, vt_frac: f64) -> Corner {
        let vt = vt_frac * 0.45;
        let fast = CornerShift {
            kp_scale: 1.0 + kp_frac,
            vt0_offset: -vt,
        };
        let slow = CornerShift {
            kp_scale: 1.0 - kp_frac,
            vt0_offset: vt,
        };
        let (nmos, pmos) = match name {
            CornerName::TT => (CornerShift::IDENTITY, CornerShift::IDENTITY),
            CornerName::FF => (fast, fast),
            CornerName::SS => (slow, slow),
            CornerName::FS => (fast, slow),
            CornerName::SF => (slow, fast),
        };
        Corner { name, nmos, pmos }
    }

    /// TT, FF, SS, FS, SF with 10 % `kp` and 10 % threshold shifts.
    pub fn standard_set() -> Vec<Corner> {
        [
            CornerName::TT,
            CornerName::FF,
            CornerName::SS,
            CornerName::FS,
            CornerName::SF,
        ]
        .into_iter()
        .map(|c| Corner::standard(c, 0.1, 0.1))
        .collect()
    }

    pub fn apply(&self, netlist: &Netlist) -> Netlist {
        let mut n = netlist.clone();
        for card in n.models.values_mut() {
            let s = match card.polarity {
                Polarity::Nmos => self.nmos,
                Polarity::Pmos => self.pmos,
            };
            card.kp *= s.kp_scale;
            card.vt0 += s.vt0_offset;
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerResult {
    pub corner: CornerName,
    pub metrics: ComparatorMetrics,
}

/// Full characterization at each corner, in the order given.
pub fn corners(
    label: &str,
    comparator: &Netlist,
    bench: &TestbenchSpec,
    options: &SolverOptions<f64>,
    set: &[Corner],
) -> Result<Vec<CornerResult>, VariationError> {
    let results: Vec<Result<CornerResult, VariationError>> = set
        .par_iter()
        .map(|c| {
            characterize_comparator(label, &c.apply(comparator), bench, options)
                .map(|metrics| CornerResult {
                    corner: c.name,
                    metrics,
                })
                .map_err(|source| VariationError::Corner {
                    corner: c.name.as_str().to_string(),
                    source,
                })
        })
        .collect();
    results.into_iter().collect()
}

/// Target of a sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    /// `M5.W` or `M5.L`.
    DeviceDim { device: String, length: bool },
    /// `nch.VT0` etc.
    ModelField { model: String, field: String },
    /// `bench.vdd` etc.
    BenchField(String),
}

const MODEL_FIELDS: [&str; 6] = ["VT0", "KP", "LAMBDA", "CGSO", "CGDO", "COX"];
const BENCH_FIELDS: [&str; 8] = [
    "vdd",
    "vref",
    "vin",
    "f_clk",
    "clk_edge_s",
    "c_load_f",
    "kickback_rsource",
    "power_ramp_s",
];

impl SweepParam {
    /// Parses a path against `netlist`.
    pub fn parse(path: &str, netlist: &Netlist) -> Result<SweepParam, VariationError> {
        let unknown = || VariationError::UnknownParameter(path.to_string());
        let (head, tail) = path.split_once('.').ok_or_else(unknown)?;
        if head.eq_ignore_ascii_case("bench") {
            let f = tail.to_ascii_lowercase();
            return BENCH_FIELDS
                .contains(&f.as_str())
                .then_some(SweepParam::BenchField(f))
                .ok_or_else(unknown);
        }
        if let Some(Device::Mosfet { name, .. }) = netlist.device(head) {
            return match tail.to_ascii_uppercase().as_str() {
                "W" => Ok(SweepParam::DeviceDim {
                    device: name.clone(),
                    length: false,
                }),
                "L" => Ok(SweepParam::DeviceDim {
                    device: name.clone(),
                    length: true,
                }),
                _ => Err(unknown()),
            };
        }
        if netlist.models.contains_key(head) {
            let f = tail.to_ascii_uppercase();
            if MODEL_FIELDS.contains(&f.as_str()) {
                return Ok(SweepParam::ModelField {
                    model: head.to_string(),
                    field: f,
                });
            }
        }
        Err(unknown())
    }

    /// Netlist and bench with the parameter set to `value`.
    pub fn apply(
        &self,
        netlist: &Netlist,
        bench: &TestbenchSpec,
        value: f64,
    ) -> (Netlist, TestbenchSpec) {
        let mut n = netlist.clone();
        let mut b = *bench;
        match self {
            SweepParam::DeviceDim { device, length } => {
                if let Some(Device::Mosfet {
                    width_m, length_m, ..
                }) = n.device_mut(device)
                {
                    if *length {
                        *length_m = value;
                    } else {
                        *width_m = value;
                    }
                }
            }
            SweepParam::ModelField { model, field } => {
                if let Some(card) = n.models.get_mut(model) {
                    match field.as_str() {
                        "VT0" => card.vt0 = value,
                        "KP" => card.kp = value,
                        "LAMBDA" => card.lambda = value,
                        "CGSO" => card.cgso = value,
                        "CGDO" => card.cgdo = value,
                        _ => card.cox = value,
                    }
                }
            }
            SweepParam::BenchField(f) => match f.as_str() {
                "vdd" => b.vdd = value,
                "vref" => b.vref = value,
                "vin" => b.vin = value,
                "f_clk" => b.f_clk = value,
                "clk_edge_s" => b.clk_edge_s = value,
                "c_load_f" => b.c_load_f = value,
                "kickback_rsource" => b.kickback_rsource = value,
                _ => b.power_ramp_s = value,
            },
        }
        (n, b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub metrics: PartialMetrics,
}

/// One characterization per value, returned in input order.
pub fn sweep(
    comparator: &Netlist,
    bench: &TestbenchSpec,
    options: &SolverOptions<f64>,
    path: &str,
    values: &[f64],
    selection: &[Metric],
) -> Result<Vec<SweepPoint>, VariationError> {
    let param = SweepParam::parse(path, comparator)?;
    let results: Vec<Result<SweepPoint, VariationError>> = values
        .par_iter()
        .map(|&value| {
            let (n, b) = param.apply(comparator, bench, value);
            n.validate()
                .map_err(MetricsError::from)
                .and_then(|_| characterize_netlist(&n, &b, options, selection))
                .map(|metrics| SweepPoint { value, metrics })
                .map_err(|source| VariationError::Sweep { value, source })
        })
        .collect();
    results.into_iter().collect()
}
