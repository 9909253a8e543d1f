//! Quasi-energy spectra of the one-period operator, edge-mode labels and
//! frequency sweeps.

use std::io::Write;

use nalgebra::{Complex, ComplexField, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{self, MonodromyResult, StateVector, DEFAULT_STEPS_PER_PERIOD};
use crate::linalg;
use crate::model::LatticeConfig;
use crate::scalar::Real;

/// Largest tolerated max |U^H U - I| before the spectrum is refused.
pub const UNITARITY_TOLERANCE: f64 = 1e-6;

/// Eigenphases closer than this (radians) are treated as one degenerate cluster.
pub const DEGENERACY_SPACING: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModeLabel {
    Bulk,
    Zero,
    Pi,
}

impl ModeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::Bulk => "BULK",
            ModeLabel::Zero => "ZERO",
            ModeLabel::Pi => "PI",
        }
    }
}

#[derive(Clone, Debug)]
pub struct FloquetMode<T: Real> {
    /// Folded quasi-energy in (-pi/period, pi/period].
    pub quasienergy: T,
    pub vector: StateVector<T>,
    pub label: ModeLabel,
    /// |v_1|^2 + |v_N|^2
    pub edge_weight: T,
}

#[derive(Clone, Debug)]
pub struct FloquetSpectrum<T: Real> {
    /// Sorted ascending by quasi-energy.
    pub modes: Vec<FloquetMode<T>>,
    pub period: T,
    pub omega: T,
    pub omega_over_delta: T,
    pub config: LatticeConfig<T>,
}

impl<T: Real> FloquetSpectrum<T> {
    pub fn count(&self, label: ModeLabel) -> usize {
        self.modes.iter().filter(|m| m.label == label).count()
    }

    /// Quasi-energies in units of pi / period.
    pub fn scaled_quasienergies(&self) -> Vec<T> {
        let unit = T::pi() / self.period;
        self.modes.iter().map(|m| m.quasienergy / unit).collect()
    }
}

/// Label thresholds. Tolerances are fractions of pi.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyThresholds {
    pub tol_zero: f64,
    pub tol_pi: f64,
    pub w_min: f64,
}

impl ClassifyThresholds {
    /// Defaults by chain length.
    ///
    /// Long chains carry one well-localized mode per end, but near the upper
    /// window edge its weight on the terminal site drops to roughly a quarter.
    /// Short chains hybridize the pair, which then sits visibly off +-pi/period.
    pub fn for_size(n_sites: usize) -> Self {
        if n_sites >= 20 {
            Self { tol_zero: 0.05, tol_pi: 0.05, w_min: 0.25 }
        } else {
            Self { tol_zero: 0.05, tol_pi: 0.2, w_min: 0.6 }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let open = |v: f64, hi: f64| v > 0.0 && v < hi;
        if !open(self.tol_zero, 0.5) || !open(self.tol_pi, 0.5) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must lie in (0, 0.5): tol_zero = {}, tol_pi = {}",
                self.tol_zero, self.tol_pi
            )));
        }
        if !open(self.w_min, 1.0) {
            return Err(Error::InvalidArgument(format!("w_min = {} must lie in (0, 1)", self.w_min)));
        }
        Ok(())
    }
}

/// Folds a quasi-energy into (-pi/period, pi/period]. Values already inside are returned untouched.
pub fn fold_quasienergy<T: Real>(eps: T, period: T) -> T {
    let half = T::pi() / period;
    if eps > -half && eps <= half {
        return eps;
    }
    let zone = half + half;
    let mut r = eps - zone * ((eps + half) / zone).floor();
    if r <= -half {
        r += zone;
    }
    if r > half {
        r -= zone;
    }
    r
}

/// Shortest distance between two quasi-energies on the circle of circumference 2 pi / period.
pub fn circular_distance<T: Real>(a: T, b: T, period: T) -> T {
    let zone = T::two_pi() / period;
    let d = (a - b).abs() % zone;
    d.min(zone - d)
}

pub fn edge_weight<T: Real>(v: &DVector<Complex<T>>) -> T {
    let n = v.len();
    if n == 0 {
        return T::zero();
    }
    let w = v[0].norm_sqr();
    if n == 1 {
        w
    } else {
        w + v[n - 1].norm_sqr()
    }
}

/// Fixes the global phase so that the largest component is real and positive.
fn normalize_phase<T: Real>(v: &mut DVector<Complex<T>>) {
    let (mut best, mut idx) = (T::zero(), 0);
    for (i, c) in v.iter().enumerate() {
        let m = c.norm_sqr();
        if m > best {
            best = m;
            idx = i;
        }
    }
    let norm = v.iter().fold(T::zero(), |acc, c| acc + c.norm_sqr()).sqrt();
    if best == T::zero() || norm == T::zero() {
        return;
    }
    let pivot = v[idx];
    let rot = pivot.conj() / Complex::new(pivot.modulus() * norm, T::zero());
    for c in v.iter_mut() {
        *c *= rot;
    }
}

/// Within a degenerate cluster, rotates to the basis diagonalizing the edge projector.
fn rotate_cluster<T: Real>(vectors: &mut [DVector<Complex<T>>]) {
    let k = vectors.len();
    let n = vectors[0].len();
    let basis = DMatrix::from_fn(n, k, |r, c| vectors[c][r]);
    let q = basis.qr().q();
    let mut edge = DMatrix::<Complex<T>>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = q[(0, i)].conj() * q[(0, j)];
            if n > 1 {
                acc += q[(n - 1, i)].conj() * q[(n - 1, j)];
            }
            edge[(i, j)] = acc;
        }
    }
    let eig = edge.symmetric_eigen();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap_or(std::cmp::Ordering::Equal));
    let rotated = &q * &eig.eigenvectors;
    for (slot, &col) in vectors.iter_mut().zip(&order) {
        *slot = rotated.column(col).into_owned();
    }
}

/// Diagonalizes the monodromy operator. All modes come back labeled BULK; see [`classify_modes`].
pub fn quasienergies<T: Real>(mono: &MonodromyResult<T>) -> Result<FloquetSpectrum<T>> {
    let u = &mono.matrix;
    let dev = linalg::unitarity_deviation(u);
    if !(dev.as_f64() <= UNITARITY_TOLERANCE) {
        return Err(Error::NotUnitary(dev.as_f64()));
    }
    if mono.period <= T::zero() {
        return Err(Error::InvalidArgument(format!("period = {} (need > 0)", mono.period)));
    }
    let eig = linalg::unitary_eigen(u)?;
    let n = eig.values.len();

    let mut phases: Vec<(T, DVector<Complex<T>>)> = (0..n)
        .map(|j| {
            let eps = fold_quasienergy(-eig.values[j].argument() / mono.period, mono.period);
            (eps, eig.vectors.column(j).into_owned())
        })
        .collect();
    phases.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    // Group degenerate eigenphases, including a cluster straddling the zone edge.
    let spacing = T::lit(DEGENERACY_SPACING) / mono.period;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for j in 0..n {
        match clusters.last_mut() {
            Some(c) if phases[j].0 - phases[*c.last().unwrap()].0 < spacing => c.push(j),
            _ => clusters.push(vec![j]),
        }
    }
    if clusters.len() > 1 && circular_distance(phases[n - 1].0, phases[0].0, mono.period) < spacing {
        let last = clusters.pop().unwrap();
        clusters[0].extend(last);
    }
    for cluster in clusters.iter().filter(|c| c.len() > 1) {
        let mut vs: Vec<_> = cluster.iter().map(|&j| phases[j].1.clone()).collect();
        rotate_cluster(&mut vs);
        for (&j, v) in cluster.iter().zip(vs) {
            phases[j].1 = v;
        }
    }

    let modes = phases
        .into_iter()
        .map(|(eps, mut v)| {
            normalize_phase(&mut v);
            let w = edge_weight(&v);
            FloquetMode { quasienergy: eps, vector: StateVector::new(v), label: ModeLabel::Bulk, edge_weight: w }
        })
        .collect();
    let omega = T::two_pi() / mono.period;
    Ok(FloquetSpectrum {
        modes,
        period: mono.period,
        omega,
        omega_over_delta: omega / crate::model::bandwidth(&mono.config),
        config: mono.config,
    })
}

/// Assigns PI / ZERO / BULK labels.
pub fn classify_modes<T: Real>(mut spectrum: FloquetSpectrum<T>, th: &ClassifyThresholds) -> FloquetSpectrum<T> {
    let unit = T::pi() / spectrum.period;
    let (tol_zero, tol_pi, w_min) = (T::lit(th.tol_zero), T::lit(th.tol_pi), T::lit(th.w_min));
    for m in &mut spectrum.modes {
        let x = m.quasienergy.abs() / unit;
        let localized = m.edge_weight >= w_min;
        m.label = if localized && (T::one() - x).abs() <= tol_pi {
            ModeLabel::Pi
        } else if localized && x <= tol_zero {
            ModeLabel::Zero
        } else {
            ModeLabel::Bulk
        };
    }
    spectrum
}

/// Monodromy, spectrum and labels for one configuration.
pub fn analyze<T: Real>(config: &LatticeConfig<T>, steps: usize, th: &ClassifyThresholds) -> Result<FloquetSpectrum<T>> {
    let mono = evolve::monodromy_with_steps(config, steps)?;
    Ok(classify_modes(quasienergies(&mono)?, th))
}

/// Spectrum of a static lattice, read through the reference period pi / Delta.
///
/// Every static eigenvalue obeys |E| <= Delta / 2, so nothing folds and the
/// quasi-energies equal the eigenvalues of H.
pub fn static_spectrum<T: Real>(config: &LatticeConfig<T>, th: &ClassifyThresholds) -> Result<FloquetSpectrum<T>> {
    if config.is_driven() {
        return Err(Error::InvalidConfig("static spectrum needs dkappa1 = 0".into()));
    }
    config.validate()?;
    let period = T::pi() / crate::model::bandwidth(config);
    analyze(&config.with_period(period), 1, th)
}

#[derive(Clone, Debug)]
pub struct SpectrumSweep<T: Real> {
    pub grid: Vec<T>,
    pub points: Vec<FloquetSpectrum<T>>,
    pub template: LatticeConfig<T>,
    pub thresholds: ClassifyThresholds,
}

impl<T: Real> SpectrumSweep<T> {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "omega_over_delta,mode_index,quasienergy_times_period_over_pi,label,edge_weight")?;
        for (x, spec) in self.grid.iter().zip(&self.points) {
            for (k, (m, eps)) in spec.modes.iter().zip(spec.scaled_quasienergies()).enumerate() {
                writeln!(out, "{},{},{},{},{}", x, k, eps, m.label.as_str(), m.edge_weight)?;
            }
        }
        Ok(())
    }

    /// Lowest and highest grid value with at least two PI modes.
    pub fn pi_window(&self) -> Option<(T, T)> {
        let hits: Vec<T> =
            self.grid.iter().zip(&self.points).filter(|(_, s)| s.count(ModeLabel::Pi) >= 2).map(|(x, _)| *x).collect();
        Some((*hits.first()?, *hits.last()?))
    }
}

/// Spectra over a strictly increasing omega/Delta grid. Points run in parallel; output keeps grid order.
pub fn band_sweep<T: Real>(
    template: &LatticeConfig<T>,
    grid: &[T],
    th: Option<ClassifyThresholds>,
) -> Result<SpectrumSweep<T>> {
    band_sweep_with_steps(template, grid, th, DEFAULT_STEPS_PER_PERIOD)
}

pub fn band_sweep_with_steps<T: Real>(
    template: &LatticeConfig<T>,
    grid: &[T],
    th: Option<ClassifyThresholds>,
    steps: usize,
) -> Result<SpectrumSweep<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("omega/Delta grid is empty".into()));
    }
    if grid.iter().any(|&x| !(x > T::zero()) || !x.as_f64().is_finite()) {
        return Err(Error::InvalidArgument("omega/Delta values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("omega/Delta grid must be strictly increasing".into()));
    }
    let th = th.unwrap_or_else(|| ClassifyThresholds::for_size(template.n_sites));
    th.validate()?;
    let mut template = *template;
    if !template.is_driven() {
        return Err(Error::InvalidConfig("band sweep needs a driven template (dkappa1 != 0)".into()));
    }
    if template.period <= T::zero() {
        template.period = T::one();
    }
    template.validate()?;
    let points = grid
        .par_iter()
        .map(|&x| analyze(&template.with_omega_over_delta(x), steps, &th))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSweep { grid: grid.to_vec(), points, template, thresholds: th })
}

/// Evenly spaced grid of `count` points over [lo, hi].
pub fn linear_grid<T: Real>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / T::from_usize_lossy(count - 1);
            (0..count).map(|i| lo + step * T::from_usize_lossy(i)).collect()
        }
    }
}

/// Distance from the zone edge to the nearest BULK quasi-energy.
pub fn pi_gap<T: Real>(spectrum: &FloquetSpectrum<T>) -> Result<T> {
    let half = T::pi() / spectrum.period;
    let bulk: Vec<T> = spectrum.modes.iter().filter(|m| m.label == ModeLabel::Bulk).map(|m| m.quasienergy).collect();
    if bulk.len() < 2 {
        return Err(Error::InsufficientModes { kind: "BULK", needed: 2, found: bulk.len() });
    }
    Ok(bulk.iter().map(|&e| circular_distance(e, half, spectrum.period)).fold(half, |a, b| a.min(b)))
}

fn pair_splitting<T: Real>(
    spectrum: &FloquetSpectrum<T>,
    label: ModeLabel,
    kind: &'static str,
    anchor: T,
) -> Result<T> {
    let mut picked: Vec<T> = spectrum.modes.iter().filter(|m| m.label == label).map(|m| m.quasienergy).collect();
    if picked.len() < 2 {
        return Err(Error::InsufficientModes { kind, needed: 2, found: picked.len() });
    }
    let p = spectrum.period;
    picked.sort_by(|a, b| {
        circular_distance(*a, anchor, p).partial_cmp(&circular_distance(*b, anchor, p)).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(circular_distance(picked[0], picked[1], p))
}

/// Circular distance between the two PI quasi-energies nearest the zone edge.
pub fn pi_splitting<T: Real>(spectrum: &FloquetSpectrum<T>) -> Result<T> {
    pair_splitting(spectrum, ModeLabel::Pi, "PI", T::pi() / spectrum.period)
}

/// Circular distance between the two ZERO quasi-energies nearest zero.
pub fn zero_splitting<T: Real>(spectrum: &FloquetSpectrum<T>) -> Result<T> {
    pair_splitting(spectrum, ModeLabel::Zero, "ZERO", T::zero())
}
