//! Experiment configs, fidelity metrics and the named runs behind the CLI.
//!
//! Every run returns an outcome value; `write` methods put CSV, JSON and
//! image files into an output directory.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::eliminate::{self, DecayFit, EffectiveHamiltonian, Regime, RegimeThresholds, SubspacePartition};
use crate::error::{Error, Result};
use crate::evolve::{self, PropagationRecord, StateVector, DEFAULT_STEPS_PER_PERIOD, MAX_PHASE_PER_STEP};
use crate::floquet::{self, ClassifyThresholds, FloquetSpectrum, SpectrumSweep};
use crate::model::{self, LatticeConfig};
use crate::scalar::Real;

/// Static runs use this many steps per coupling-limited step (0.05 / kappa0).
const STATIC_SUBSTEPS: usize = 10;

/// Limits on the input channel: leakage out of it and transfer to its mirror site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelityThresholds {
    pub max_leakage: f64,
    pub min_transfer: f64,
}

impl Default for FidelityThresholds {
    fn default() -> Self {
        Self { max_leakage: 0.65, min_transfer: 0.6 }
    }
}

/// omega/Delta grid, either explicit or evenly spaced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub start: Option<f64>,
    #[serde(default)]
    pub stop: Option<f64>,
    #[serde(default)]
    pub count: Option<usize>,
}

impl GridSpec {
    pub fn linear(start: f64, stop: f64, count: usize) -> Self {
        Self { values: None, start: Some(start), stop: Some(stop), count: Some(count) }
    }

    pub fn resolve<T: Real>(&self) -> Result<Vec<T>> {
        let grid: Vec<f64> = match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => floquet::linear_grid(a, b, n),
            _ => {
                return Err(Error::InvalidArgument(
                    "grid needs either `values` or all of `start`, `stop`, `count`".into(),
                ))
            }
        };
        if grid.is_empty() {
            return Err(Error::InvalidArgument("omega/Delta grid is empty".into()));
        }
        Ok(grid.into_iter().map(T::lit).collect())
    }
}

/// One experiment file. Fields after `sample_stride` are used by specific verbs only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig<T: Real> {
    pub lattice: LatticeConfig<T>,
    /// When set, overrides `lattice.period` with 2 pi / (omega_over_delta * Delta).
    #[serde(default)]
    pub omega_over_delta: Option<T>,
    /// 1-based.
    #[serde(default = "one")]
    pub input_site: usize,
    #[serde(default)]
    pub n_periods: usize,
    /// Derived as n_periods * period when omitted on a driven lattice.
    #[serde(default)]
    pub total_length: Option<T>,
    #[serde(default = "one")]
    pub sample_stride: usize,
    #[serde(default)]
    pub dz: Option<T>,
    #[serde(default)]
    pub steps_per_period: Option<usize>,
    #[serde(default)]
    pub thresholds: FidelityThresholds,
    #[serde(default)]
    pub classify: Option<ClassifyThresholds>,
    #[serde(default)]
    pub regime: RegimeThresholds,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    /// 1-based kept sites for the effective Hamiltonian (default: the two ends).
    #[serde(default)]
    pub kept: Option<Vec<usize>>,
    /// Free-form provenance, e.g. a microwave frequency label. Never read by the physics.
    #[serde(default)]
    pub metadata: Option<Value>,
}

fn one() -> usize {
    1
}

impl<T: Real> ExperimentConfig<T> {
    pub fn new(lattice: LatticeConfig<T>, input_site: usize) -> Self {
        Self {
            lattice,
            omega_over_delta: None,
            input_site,
            n_periods: 0,
            total_length: None,
            sample_stride: 1,
            dz: None,
            steps_per_period: None,
            thresholds: FidelityThresholds::default(),
            classify: None,
            regime: RegimeThresholds::default(),
            grid: None,
            sizes: None,
            kept: None,
            metadata: None,
        }
    }

    pub fn with_length(mut self, total_length: T) -> Self {
        self.total_length = Some(total_length);
        self
    }

    pub fn with_periods(mut self, n_periods: usize) -> Self {
        self.n_periods = n_periods;
        self
    }

    /// Strict parse. Values are checked by each run, since verbs use different fields.
    pub fn from_json(text: &str) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        let mut cfg: Self = serde_json::from_str(text)?;
        if let Some(x) = cfg.omega_over_delta {
            if !(x > T::zero()) || !x.as_f64().is_finite() {
                return Err(Error::InvalidConfig(format!("omega_over_delta = {x} (need > 0)")));
            }
            cfg.lattice = cfg.lattice.with_omega_over_delta(x);
        }
        Ok(cfg)
    }

    pub fn steps_per_period(&self) -> usize {
        self.steps_per_period.unwrap_or(DEFAULT_STEPS_PER_PERIOD)
    }

    pub fn validate(&self) -> Result<()> {
        self.lattice.validate()?;
        let n = self.lattice.n_sites;
        if self.input_site == 0 || self.input_site > n {
            return Err(Error::InvalidConfig(format!("input_site = {} outside 1..={n}", self.input_site)));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidConfig("sample_stride must be >= 1".into()));
        }
        if let Some(s) = self.steps_per_period {
            if s < evolve::MIN_STEPS_PER_PERIOD {
                return Err(Error::InvalidConfig(format!(
                    "steps_per_period = {s} (need >= {})",
                    evolve::MIN_STEPS_PER_PERIOD
                )));
            }
        }
        let th = &self.thresholds;
        if !(0.0..=1.0).contains(&th.max_leakage) || !(0.0..=1.0).contains(&th.min_transfer) {
            return Err(Error::InvalidConfig("fidelity thresholds must lie in [0, 1]".into()));
        }
        if let Some(c) = &self.classify {
            c.validate()?;
        }
        if let Some(kept) = &self.kept {
            if kept.iter().any(|&k| k == 0 || k > n) {
                return Err(Error::InvalidConfig(format!("kept indices must lie in 1..={n}")));
            }
        }
        self.total_length().map(|_| ())
    }

    /// Propagation length, checked against n_periods * period for driven lattices.
    pub fn total_length(&self) -> Result<T> {
        let lat = &self.lattice;
        if lat.is_driven() {
            if self.n_periods == 0 {
                return Err(Error::InvalidConfig("driven runs need n_periods >= 1".into()));
            }
            let expected = T::from_usize_lossy(self.n_periods) * lat.period;
            match self.total_length {
                None => Ok(expected),
                Some(l) if (l - expected).abs() < T::lit(1e-9) => Ok(l),
                Some(l) => Err(Error::InvalidConfig(format!(
                    "total_length = {l} but n_periods * period = {expected}"
                ))),
            }
        } else {
            match self.total_length {
                Some(l) if l > T::zero() && l.as_f64().is_finite() => Ok(l),
                Some(l) => Err(Error::InvalidConfig(format!("total_length = {l} (need > 0)"))),
                None if self.n_periods > 0 && lat.period > T::zero() => {
                    Ok(T::from_usize_lossy(self.n_periods) * lat.period)
                }
                None => Err(Error::InvalidConfig("static runs need total_length".into())),
            }
        }
    }

    /// Integration step: period / steps_per_period when driven, a tenth of the coupling limit otherwise.
    pub fn step(&self) -> T {
        if let Some(dz) = self.dz {
            return dz;
        }
        if self.lattice.is_driven() {
            self.lattice.period / T::from_usize_lossy(self.steps_per_period())
        } else {
            T::lit(MAX_PHASE_PER_STEP) / self.lattice.kappa0 / T::from_usize_lossy(STATIC_SUBSTEPS)
        }
    }

    pub fn classify_thresholds(&self) -> ClassifyThresholds {
        self.classify.unwrap_or_else(|| ClassifyThresholds::for_size(self.lattice.n_sites))
    }

    fn with_lattice(&self, lattice: LatticeConfig<T>) -> Self {
        Self { lattice, ..self.clone() }
    }
}

/// Channel metrics for one run.
///
/// The channel of input site `s` is the mirror pair {s, N + 1 - s}: leakage is
/// the intensity outside the pair, transfer is the intensity on the mirror site.
/// Driven runs are sampled at z = k * period, static runs at every step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub input_site: usize,
    pub mirror_site: usize,
    pub max_inner_leakage: f64,
    pub outer_transfer_peak: f64,
    pub peak_z: f64,
    pub samples: usize,
    pub stroboscopic: bool,
    pub eliminated: bool,
}

impl FidelityReport {
    /// Smallest distance of either metric from its threshold, positive when on the passing side.
    pub fn margin(&self, th: &FidelityThresholds) -> f64 {
        let leak = th.max_leakage - self.max_inner_leakage;
        let transfer = self.outer_transfer_peak - th.min_transfer;
        if self.eliminated {
            leak.min(transfer)
        } else {
            // Distance by which the failing metric misses.
            (-leak).max(-transfer)
        }
    }
}

/// Channel metrics over the samples at `indices` (all samples when `None`).
pub fn fidelity<T: Real>(
    record: &PropagationRecord<T>,
    input_site: usize,
    indices: Option<&[usize]>,
    th: &FidelityThresholds,
) -> Result<FidelityReport> {
    let n = record.n_sites();
    if record.is_empty() || input_site == 0 || input_site > n {
        return Err(Error::InvalidArgument(format!("input_site {input_site} invalid for a {n}-site record")));
    }
    let (a, b) = (input_site - 1, n - input_site);
    let all: Vec<usize>;
    let idx = match indices {
        Some(i) => i,
        None => {
            all = (0..record.len()).collect();
            &all
        }
    };
    let mut leak_max = 0.0f64;
    let (mut peak, mut peak_z) = (0.0f64, 0.0f64);
    for &k in idx {
        let amps = &record.states[k].amplitudes;
        let total: f64 = amps.iter().map(|c| c.norm_sqr().as_f64()).sum();
        let ia = amps[a].norm_sqr().as_f64();
        let ib = amps[b].norm_sqr().as_f64();
        let channel = if a == b { ia } else { ia + ib };
        leak_max = leak_max.max((total - channel).clamp(0.0, 1.0));
        if ib > peak {
            peak = ib;
            peak_z = record.z_samples[k].as_f64();
        }
    }
    let peak = peak.clamp(0.0, 1.0);
    Ok(FidelityReport {
        input_site,
        mirror_site: b + 1,
        max_inner_leakage: leak_max,
        outer_transfer_peak: peak,
        peak_z,
        samples: idx.len(),
        stroboscopic: indices.is_some(),
        eliminated: leak_max < th.max_leakage && peak > th.min_transfer,
    })
}

#[derive(Clone, Debug)]
pub struct PropagationOutcome<T: Real> {
    /// Full-resolution trajectory.
    pub record: PropagationRecord<T>,
    pub report: FidelityReport,
    pub config: ExperimentConfig<T>,
}

impl<T: Real> PropagationOutcome<T> {
    /// Trajectory thinned by `sample_stride`.
    pub fn sampled(&self) -> PropagationRecord<T> {
        self.record.subsample(self.config.sample_stride)
    }

    pub fn summary(&self) -> Value {
        json!({
            "verb": "propagate",
            "report": self.report,
            "thresholds": self.config.thresholds,
            "lattice": lattice_json(&self.config.lattice),
            "input_site": self.config.input_site,
            "total_length": self.record.z_samples.last().map(|z| z.as_f64()),
            "dz": self.config.step().as_f64(),
            "metadata": self.config.metadata,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_record(&self.sampled(), &dir.join("propagation.csv"))?;
        write_json(&self.summary(), &dir.join("summary.json"))
    }
}

pub fn lattice_json<T: Real>(cfg: &LatticeConfig<T>) -> Value {
    json!({
        "n_sites": cfg.n_sites,
        "kappa0": cfg.kappa0.as_f64(),
        "dkappa0": cfg.dkappa0.as_f64(),
        "dkappa1": cfg.dkappa1.as_f64(),
        "period": cfg.period.as_f64(),
        "gauge": cfg.gauge.as_f64(),
        "beta0": cfg.beta0.as_f64(),
    })
}

fn write_record<T: Real>(record: &PropagationRecord<T>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    record.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_json(value: &Value, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Propagates the unit input and scores the channel.
pub fn run_propagation_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<PropagationOutcome<T>> {
    cfg.validate()?;
    let lat = &cfg.lattice;
    let length = cfg.total_length()?;
    let input = StateVector::site(lat.n_sites, cfg.input_site - 1);
    let record = evolve::propagate(lat, &input, length, cfg.step())?;
    let strobe = if lat.is_driven() { Some(stroboscopic_indices(&record, lat.period, cfg.n_periods)?) } else { None };
    let report = fidelity(&record, cfg.input_site, strobe.as_deref(), &cfg.thresholds)?;
    Ok(PropagationOutcome { record, report, config: cfg.clone() })
}

/// Indices of the samples sitting at z = k * period, k = 0..=n_periods.
fn stroboscopic_indices<T: Real>(record: &PropagationRecord<T>, period: T, n_periods: usize) -> Result<Vec<usize>> {
    let steps = record.len() - 1;
    if n_periods == 0 || !steps.is_multiple_of(n_periods) {
        return Err(Error::InvalidConfig(format!(
            "{steps} integration steps do not divide into {n_periods} periods; pick dz = period / integer"
        )));
    }
    let per = steps / n_periods;
    let idx: Vec<usize> = (0..=n_periods).map(|k| k * per).collect();
    let tol = period * T::lit(1e-6);
    for (k, &i) in idx.iter().enumerate() {
        if (record.z_samples[i] - T::from_usize_lossy(k) * period).abs() > tol {
            return Err(Error::InvalidConfig("stroboscopic samples are misaligned with the period".into()));
        }
    }
    Ok(idx)
}

#[derive(Clone, Debug)]
pub struct GaugeCell<T: Real> {
    pub gauge: T,
    pub input_site: usize,
    pub outcome: PropagationOutcome<T>,
}

#[derive(Clone, Debug)]
pub struct GaugeOutcome<T: Real> {
    /// Order: (0, 1), (pi, 1), (0, 2), (pi, 2).
    pub cells: Vec<GaugeCell<T>>,
    pub thresholds: FidelityThresholds,
}

impl<T: Real> GaugeOutcome<T> {
    pub const EXPECTED: [bool; 4] = [true, false, false, true];

    pub fn flags(&self) -> Vec<bool> {
        self.cells.iter().map(|c| c.outcome.report.eliminated).collect()
    }

    pub fn matches_expected(&self) -> bool {
        self.flags() == Self::EXPECTED
    }

    /// Smallest signed margin over the four cells, measured against the expected flags.
    pub fn expected_margin(&self) -> f64 {
        self.cells
            .iter()
            .zip(Self::EXPECTED)
            .map(|(c, want)| {
                let r = &c.outcome.report;
                let m = r.margin(&self.thresholds);
                if r.eliminated == want {
                    m
                } else {
                    -m
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn summary(&self) -> Value {
        let cells: Vec<Value> = self
            .cells
            .iter()
            .map(|c| json!({"gauge": c.gauge.as_f64(), "input_site": c.input_site, "report": c.outcome.report}))
            .collect();
        json!({
            "verb": "gauge",
            "cells": cells,
            "expected": Self::EXPECTED,
            "matches_expected": self.matches_expected(),
            "expected_margin": self.expected_margin(),
            "thresholds": self.thresholds,
            "lattice": self.cells.first().map(|c| lattice_json(&c.outcome.config.lattice)),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for c in &self.cells {
            let tag = if c.gauge == T::zero() { "0" } else { "pi" };
            let name = format!("propagation_gauge{tag}_input{}.csv", c.input_site);
            write_record(&c.outcome.sampled(), &dir.join(name))?;
        }
        write_json(&self.summary(), &dir.join("summary.json"))
    }
}

/// The gauge {0, pi} x input {1, 2} grid.
pub fn run_gauge_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<GaugeOutcome<T>> {
    cfg.validate()?;
    if cfg.lattice.n_sites < 3 {
        return Err(Error::InvalidConfig("gauge grid needs at least 3 sites".into()));
    }
    let combos = [(T::zero(), 1), (T::pi(), 1), (T::zero(), 2), (T::pi(), 2)];
    let cells = combos
        .par_iter()
        .map(|&(gauge, site)| {
            let mut c = cfg.with_lattice(cfg.lattice.with_gauge(gauge));
            c.input_site = site;
            Ok(GaugeCell { gauge, input_site: site, outcome: run_propagation_experiment(&c)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GaugeOutcome { cells, thresholds: cfg.thresholds })
}

#[derive(Clone, Debug)]
pub struct SweepOutcome<T: Real> {
    pub sweep: SpectrumSweep<T>,
    pub window: Option<(T, T)>,
}

impl<T: Real> SweepOutcome<T> {
    pub fn summary(&self) -> Value {
        let counts: Vec<Value> = self
            .sweep
            .grid
            .iter()
            .zip(&self.sweep.points)
            .map(|(x, s)| {
                json!({
                    "omega_over_delta": x.as_f64(),
                    "pi_modes": s.count(floquet::ModeLabel::Pi),
                    "zero_modes": s.count(floquet::ModeLabel::Zero),
                })
            })
            .collect();
        json!({
            "verb": "spectrum",
            "pi_window": self.window.map(|(a, b)| [a.as_f64(), b.as_f64()]),
            "points": counts,
            "classify": self.sweep.thresholds,
            "lattice": lattice_json(&self.sweep.template),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join("spectrum.csv"))?);
        self.sweep.write_csv(&mut out)?;
        out.flush()?;
        write_json(&self.summary(), &dir.join("summary.json"))
    }
}

pub fn run_sweep_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<SweepOutcome<T>> {
    let grid = cfg.grid.as_ref().ok_or_else(|| Error::InvalidConfig("spectrum needs a `grid`".into()))?.resolve()?;
    let sweep = floquet::band_sweep_with_steps(
        &cfg.lattice,
        &grid,
        Some(cfg.classify_thresholds()),
        cfg.steps_per_period(),
    )?;
    let window = sweep.pi_window();
    Ok(SweepOutcome { sweep, window })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplittingKind {
    Pi,
    Zero,
}

#[derive(Clone, Debug)]
pub struct FiniteSizeRow<T: Real> {
    pub n_sites: usize,
    pub kind: SplittingKind,
    /// rad/mm; `None` when fewer than two edge modes were found.
    pub splitting: Option<T>,
    /// Splitting in units of pi / period (driven) or Delta (static).
    pub splitting_scaled: Option<T>,
    pub report: FidelityReport,
}

#[derive(Clone, Debug)]
pub struct FiniteSizeOutcome<T: Real> {
    pub rows: Vec<FiniteSizeRow<T>>,
    pub config: ExperimentConfig<T>,
}

impl<T: Real> FiniteSizeOutcome<T> {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "n_sites,splitting_kind,splitting,splitting_scaled,max_inner_leakage,outer_transfer_peak,eliminated"
        )?;
        let opt = |v: Option<T>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.rows {
            let kind = match r.kind {
                SplittingKind::Pi => "pi",
                SplittingKind::Zero => "zero",
            };
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.n_sites,
                kind,
                opt(r.splitting),
                opt(r.splitting_scaled),
                r.report.max_inner_leakage,
                r.report.outer_transfer_peak,
                r.report.eliminated
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "n_sites": r.n_sites,
                    "splitting_kind": r.kind,
                    "splitting": r.splitting.map(|v| v.as_f64()),
                    "splitting_scaled": r.splitting_scaled.map(|v| v.as_f64()),
                    "report": r.report,
                })
            })
            .collect();
        json!({
            "verb": "finite-size",
            "rows": rows,
            "thresholds": self.config.thresholds,
            "lattice": lattice_json(&self.config.lattice),
            "total_length": self.config.total_length().ok().map(|v| v.as_f64()),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut out = BufWriter::new(File::create(dir.join("finite_size.csv"))?);
        self.write_csv(&mut out)?;
        out.flush()?;
        write_json(&self.summary(), &dir.join("summary.json"))
    }
}

/// Edge-mode splitting and channel fidelity per chain length at a common total length.
pub fn run_finite_size_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<FiniteSizeOutcome<T>> {
    cfg.validate()?;
    let sizes = cfg.sizes.clone().unwrap_or_else(|| vec![cfg.lattice.n_sites]);
    if sizes.is_empty() || sizes.iter().any(|&n| n < 4 || n % 2 != 0) {
        return Err(Error::InvalidConfig("sizes must be a nonempty list of even numbers >= 4".into()));
    }
    let rows = sizes
        .par_iter()
        .map(|&n| {
            let sized = cfg.with_lattice(cfg.lattice.with_sites(n));
            let th = sized.classify.unwrap_or_else(|| ClassifyThresholds::for_size(n));
            let (spec, kind): (FloquetSpectrum<T>, _) = if sized.lattice.is_driven() {
                (floquet::analyze(&sized.lattice, sized.steps_per_period(), &th)?, SplittingKind::Pi)
            } else {
                (floquet::static_spectrum(&sized.lattice, &th)?, SplittingKind::Zero)
            };
            let splitting = match kind {
                SplittingKind::Pi => floquet::pi_splitting(&spec),
                SplittingKind::Zero => floquet::zero_splitting(&spec),
            };
            let splitting = match splitting {
                Ok(v) => Some(v),
                Err(Error::InsufficientModes { .. }) => None,
                Err(e) => return Err(e),
            };
            let unit = match kind {
                SplittingKind::Pi => T::pi() / spec.period,
                SplittingKind::Zero => model::bandwidth(&sized.lattice),
            };
            let report = run_propagation_experiment(&sized)?.report;
            Ok(FiniteSizeRow { n_sites: n, kind, splitting, splitting_scaled: splitting.map(|s| s / unit), report })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FiniteSizeOutcome { rows, config: cfg.clone() })
}

#[derive(Clone, Debug)]
pub struct EliminationOutcome<T: Real> {
    pub effective: EffectiveHamiltonian<T>,
    pub adiabatic_ratio: T,
    pub effective_coupling: T,
    pub regime: Regime,
    pub decay: Option<DecayFit<T>>,
    pub lattice: LatticeConfig<T>,
}

impl<T: Real> EliminationOutcome<T> {
    pub fn summary(&self) -> Value {
        json!({
            "verb": "eliminate",
            "regime": self.regime,
            "adiabatic_ratio": self.adiabatic_ratio.as_f64(),
            "effective_stroboscopic_coupling": self.effective_coupling.as_f64(),
            "effective_hamiltonian": self.effective.to_json(),
            "decay_fit": self.decay.as_ref().map(decay_json),
            "lattice": lattice_json(&self.lattice),
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&self.effective.to_json(), &dir.join("effective_hamiltonian.json"))?;
        if let Some(fit) = &self.decay {
            write_json(&decay_json(fit), &dir.join("decay_fit.json"))?;
        }
        write_json(&self.summary(), &dir.join("summary.json"))
    }
}

pub fn decay_json<T: Real>(fit: &DecayFit<T>) -> Value {
    json!({
        "sizes": fit.sizes,
        "norms": fit.norms.iter().map(|v| v.as_f64()).collect::<Vec<_>>(),
        "slope": fit.slope.as_f64(),
        "intercept": fit.intercept.as_f64(),
        "n_critical": fit.n_critical.as_f64(),
        "r_squared": fit.r_squared.as_f64(),
    })
}

/// Effective Hamiltonian of the drive-averaged lattice, regime diagnosis and optional decay fit.
pub fn run_elimination_experiment<T: Real>(cfg: &ExperimentConfig<T>) -> Result<EliminationOutcome<T>> {
    let lat = &cfg.lattice;
    lat.validate()?;
    let h = model::static_reference(lat)?;
    let partition = match &cfg.kept {
        Some(k) => SubspacePartition::new(lat.n_sites, &k.iter().map(|i| i - 1).collect::<Vec<_>>())?,
        None => SubspacePartition::outer(lat.n_sites)?,
    };
    let effective = eliminate::project_effective(&h.to_complex(), &partition)?;
    let dk = eliminate::effective_stroboscopic_coupling(lat);
    let decay = match &cfg.sizes {
        Some(sizes) => {
            let averaged = LatticeConfig { dkappa1: T::zero(), period: T::zero(), ..*lat };
            Some(eliminate::decay_fit(&averaged, sizes)?)
        }
        None => None,
    };
    Ok(EliminationOutcome {
        effective,
        adiabatic_ratio: eliminate::adiabatic_ratio(lat.kappa0, dk)?,
        effective_coupling: dk,
        regime: eliminate::classify_regime(lat, &cfg.regime)?,
        decay,
        lattice: *lat,
    })
}

/// Image container for [`render_intensity_map`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImageFormat {
    /// Binary portable pixmap (P6).
    Ppm,
    Svg,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("ppm") => Ok(ImageFormat::Ppm),
            Some("svg") => Ok(ImageFormat::Svg),
            _ => Err(Error::InvalidArgument(format!("{}: expected a .ppm or .svg path", path.display()))),
        }
    }
}

/// Cell size in pixels.
pub const CELL_WIDTH: usize = 2;
pub const CELL_HEIGHT: usize = 8;

/// Grayscale level per (site, sample), normalized to the brightest cell.
pub fn intensity_levels<T: Real>(record: &PropagationRecord<T>) -> Vec<Vec<u8>> {
    let peak = record
        .states
        .iter()
        .flat_map(|s| s.amplitudes.iter().map(|c| c.norm_sqr().as_f64()))
        .fold(0.0f64, f64::max);
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    (0..record.n_sites())
        .map(|site| {
            record.states.iter().map(|s| (s.amplitudes[site].norm_sqr().as_f64() * scale).round() as u8).collect()
        })
        .collect()
}

/// z runs left to right, site 1 is the top row.
pub fn render_intensity_map<T: Real>(record: &PropagationRecord<T>, path: &Path) -> Result<()> {
    if record.is_empty() {
        return Err(Error::InvalidArgument("cannot render an empty record".into()));
    }
    let format = ImageFormat::from_path(path)?;
    let levels = intensity_levels(record);
    let (cols, rows) = (record.len(), record.n_sites());
    let (w, h) = (cols * CELL_WIDTH, rows * CELL_HEIGHT);
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        ImageFormat::Ppm => {
            write!(out, "P6\n{w} {h}\n255\n")?;
            let mut line = Vec::with_capacity(w * 3);
            for row in &levels {
                line.clear();
                for &g in row {
                    for _ in 0..CELL_WIDTH {
                        line.extend_from_slice(&[g, g, g]);
                    }
                }
                for _ in 0..CELL_HEIGHT {
                    out.write_all(&line)?;
                }
            }
        }
        ImageFormat::Svg => {
            writeln!(
                out,
                r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" shape-rendering="crispEdges">"#
            )?;
            writeln!(out, r#"<rect width="{w}" height="{h}" fill="rgb(0,0,0)"/>"#)?;
            for (r, row) in levels.iter().enumerate() {
                for (c, &g) in row.iter().enumerate() {
                    if g > 0 {
                        writeln!(
                            out,
                            r#"<rect x="{}" y="{}" width="{CELL_WIDTH}" height="{CELL_HEIGHT}" fill="rgb({g},{g},{g})"/>"#,
                            c * CELL_WIDTH,
                            r * CELL_HEIGHT
                        )?;
                    }
                }
            }
            writeln!(out, "</svg>")?;
        }
    }
    out.flush()?;
    Ok(())
}
