use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use super::ScenarioError;

pub const TRACE_COLUMNS: [&str; 4] = ["timestamp", "price_aud_mwh", "demand_mw", "inference_frac"];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("missing column `{0}` (expected header {cols})", cols = TRACE_COLUMNS.join(","))]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },
    #[error("trace has {found} rows, {needed} needed")]
    TooFewRows { needed: usize, found: usize },
    #[error("row {row}: inference_frac {value} outside [0,1]")]
    InferenceOutOfRange { row: usize, value: f64 },
    #[error("row {row}: {column} value {value} is not finite")]
    NonFinite {
        row: usize,
        column: String,
        value: f64,
    },
    #[error("row {row}: negative demand {value}")]
    NegativeDemand { row: usize, value: f64 },
    #[error("csv: {0}")]
    Csv(String),
    #[error("invalid profile: {0}")]
    Profile(String),
}

/// Exogenous public signals over a horizon of `T` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ExogenousTrace {
    pub dt_h: f64,
    pub timestamps: Vec<String>,
    pub price: Vec<f64>,
    pub demand: Vec<f64>,
    pub inference: Vec<f64>,
    /// `bus_demand[t][n]`, MW, in case bus order.
    pub bus_demand: Vec<Vec<f64>>,
}

impl ExogenousTrace {
    /// Builds the per-bus forecasts as `share_n * D(t)`.
    pub fn from_series(
        dt_h: f64,
        timestamps: Vec<String>,
        price: Vec<f64>,
        demand: Vec<f64>,
        inference: Vec<f64>,
        shares: &[f64],
    ) -> Self {
        let bus_demand = demand
            .iter()
            .map(|d| shares.iter().map(|s| s * d).collect())
            .collect();
        Self {
            dt_h,
            timestamps,
            price,
            demand,
            inference,
            bus_demand,
        }
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    /// Sub-trace of `len` steps starting at `start`.
    pub fn window(&self, start: usize, len: usize) -> Self {
        let r = start..start + len;
        Self {
            dt_h: self.dt_h,
            timestamps: self.timestamps[r.clone()].to_vec(),
            price: self.price[r.clone()].to_vec(),
            demand: self.demand[r.clone()].to_vec(),
            inference: self.inference[r.clone()].to_vec(),
            bus_demand: self.bus_demand[r].to_vec(),
        }
    }

    pub fn check(&self, n_buses: usize) -> Vec<String> {
        let mut issues = Vec::new();
        let t = self.horizon();
        if t == 0 {
            issues.push("trace horizon is zero".to_string());
        }
        if !(self.dt_h > 0.0) {
            issues.push(format!("trace step must be positive, got {}", self.dt_h));
        }
        for (name, len) in [
            ("timestamps", self.timestamps.len()),
            ("price", self.price.len()),
            ("inference", self.inference.len()),
            ("bus_demand", self.bus_demand.len()),
        ] {
            if len != t {
                issues.push(format!("{name} has length {len}, expected {t}"));
            }
        }
        if let Some(k) = self.inference.iter().position(|v| !(0.0..=1.0).contains(v)) {
            issues.push(format!("inference demand outside [0,1] at step {k}"));
        }
        for (k, row) in self.bus_demand.iter().enumerate() {
            if row.len() != n_buses {
                issues.push(format!("bus demand at step {k} has {} buses", row.len()));
                break;
            }
            if row.iter().any(|d| !(*d >= 0.0)) {
                issues.push(format!("negative bus demand at step {k}"));
                break;
            }
        }
        issues
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(TRACE_COLUMNS)?;
        for t in 0..self.horizon() {
            out.write_record([
                self.timestamps[t].clone(),
                self.price[t].to_string(),
                self.demand[t].to_string(),
                self.inference[t].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads the first `horizon` rows of a trace CSV.
pub fn read_traces<R: Read>(
    reader: R,
    dt_h: f64,
    horizon: usize,
    shares: &[f64],
) -> Result<ExogenousTrace, TraceError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| TraceError::Csv(e.to_string()))?.clone();
    for (k, want) in TRACE_COLUMNS.iter().enumerate() {
        if headers.get(k) != Some(*want) {
            return Err(TraceError::MissingColumn(want.to_string()));
        }
    }
    let (mut ts, mut price, mut demand, mut inf) = (vec![], vec![], vec![], vec![]);
    for (i, rec) in rdr.records().enumerate() {
        if ts.len() == horizon {
            break;
        }
        let rec = rec.map_err(|e| TraceError::Csv(e.to_string()))?;
        let row = i + 2;
        let num = |k: usize| -> Result<f64, TraceError> {
            let raw = rec.get(k).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| TraceError::NonNumeric {
                row,
                column: TRACE_COLUMNS[k].to_string(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(TraceError::NonFinite {
                    row,
                    column: TRACE_COLUMNS[k].to_string(),
                    value: v,
                });
            }
            Ok(v)
        };
        let (p, d, f) = (num(1)?, num(2)?, num(3)?);
        if !(0.0..=1.0).contains(&f) {
            return Err(TraceError::InferenceOutOfRange { row, value: f });
        }
        if d < 0.0 {
            return Err(TraceError::NegativeDemand { row, value: d });
        }
        ts.push(rec.get(0).unwrap_or("").to_string());
        price.push(p);
        demand.push(d);
        inf.push(f);
    }
    if ts.len() < horizon {
        return Err(TraceError::TooFewRows {
            needed: horizon,
            found: ts.len(),
        });
    }
    Ok(ExogenousTrace::from_series(dt_h, ts, price, demand, inf, shares))
}

pub fn load_traces(
    path: impl AsRef<Path>,
    dt_h: f64,
    horizon: usize,
    shares: &[f64],
) -> Result<ExogenousTrace, ScenarioError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| ScenarioError::io(path, e))?;
    read_traces(file, dt_h, horizon, shares).map_err(|source| ScenarioError::Trace {
        path: path.display().to_string(),
        source,
    })
}

/// Parameters of one diurnal profile:
/// `mean + amplitude * cos(w) + harmonic * cos(2w)`, `w = 2π(h - peak_hour)/24`,
/// plus Gaussian noise. A positive `harmonic` sharpens the peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diurnal {
    pub mean: f64,
    pub amplitude: f64,
    #[serde(default)]
    pub harmonic: f64,
    pub noise: f64,
    pub peak_hour: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSpike {
    pub start_step: usize,
    pub steps: usize,
    pub extra_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticProfile {
    pub dt_h: f64,
    pub horizon: usize,
    pub price: Diurnal,
    pub demand: Diurnal,
    pub inference_peak: f64,
    pub inference_trough: f64,
    pub inference_peak_hour: f64,
    pub inference_noise: f64,
    /// Relative day-to-day scaling of the demand swing, drawn once per day.
    pub daily_variation: f64,
    pub spikes: Vec<DemandSpike>,
}

impl Default for SyntheticProfile {
    fn default() -> Self {
        Self {
            dt_h: 0.25,
            horizon: 96,
            price: Diurnal {
                mean: 95.0,
                amplitude: 55.0,
                harmonic: 0.0,
                noise: 8.0,
                peak_hour: 18.0,
            },
            demand: Diurnal {
                mean: 4900.0,
                amplitude: 700.0,
                harmonic: 0.0,
                noise: 40.0,
                peak_hour: 18.0,
            },
            inference_peak: 0.55,
            inference_trough: 0.15,
            inference_peak_hour: 12.0,
            inference_noise: 0.0,
            daily_variation: 0.0,
            spikes: Vec::new(),
        }
    }
}

impl SyntheticProfile {
    fn check(&self) -> Result<(), TraceError> {
        let bad = |m: &str| Err(TraceError::Profile(m.to_string()));
        if self.horizon == 0 {
            return bad("horizon must be positive");
        }
        if !(self.dt_h > 0.0) {
            return bad("step length must be positive");
        }
        if self.price.amplitude < 0.0 || self.demand.amplitude < 0.0 {
            return bad("amplitudes must be nonnegative");
        }
        if self.price.noise < 0.0 || self.demand.noise < 0.0 || self.inference_noise < 0.0 {
            return bad("noise levels must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.inference_trough)
            || !(0.0..=1.0).contains(&self.inference_peak)
            || self.inference_trough > self.inference_peak
        {
            return bad("inference trough/peak must satisfy 0 <= trough <= peak <= 1");
        }
        if !(0.0..1.0).contains(&self.daily_variation) {
            return bad("daily variation must lie in [0,1)");
        }
        Ok(())
    }
}

fn diurnal(p: &Diurnal, hour: f64) -> f64 {
    let w = 2.0 * PI * (hour - p.peak_hour) / 24.0;
    p.mean + p.amplitude * w.cos() + p.harmonic * (2.0 * w).cos()
}

/// Seeded synthetic diurnal trace. Step 0 starts at 00:00.
pub fn synth_traces(
    profile: &SyntheticProfile,
    seed: u64,
    shares: &[f64],
) -> Result<ExogenousTrace, TraceError> {
    profile.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let steps_per_day = (24.0 / profile.dt_h).round().max(1.0) as usize;
    let n = profile.horizon;
    let (mut ts, mut price, mut demand, mut inf) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut day_scale = 1.0;
    for t in 0..n {
        if t % steps_per_day == 0 && profile.daily_variation > 0.0 {
            day_scale = 1.0 + profile.daily_variation * normal().clamp(-2.0, 2.0) / 2.0;
        }
        let minutes = (t as f64 * profile.dt_h * 60.0).round() as u64;
        let hour = (minutes % 1440) as f64 / 60.0;
        ts.push(format!(
            "d{:03}T{:02}:{:02}",
            minutes / 1440 + 1,
            (minutes % 1440) / 60,
            minutes % 60
        ));

        let p = diurnal(&profile.price, hour) + profile.price.noise * normal();
        price.push(p);

        let base = profile.demand.mean
            + day_scale * (diurnal(&profile.demand, hour) - profile.demand.mean);
        let spike: f64 = profile
            .spikes
            .iter()
            .filter(|s| (s.start_step..s.start_step + s.steps).contains(&t))
            .map(|s| s.extra_mw)
            .sum();
        let d = base + profile.demand.noise * normal() + spike;
        demand.push(d.max(0.0));

        let shape = 0.5 * (1.0 + (2.0 * PI * (hour - profile.inference_peak_hour) / 24.0).cos());
        let f = profile.inference_trough
            + (profile.inference_peak - profile.inference_trough) * shape
            + profile.inference_noise * normal();
        inf.push(f.clamp(0.0, 1.0));
    }
    Ok(ExogenousTrace::from_series(
        profile.dt_h,
        ts,
        price,
        demand,
        inf,
        shares,
    ))
}
