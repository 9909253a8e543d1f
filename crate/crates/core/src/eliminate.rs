//! Projector-based reduction onto a kept subset of sites, elimination
//! diagnostics for the three drive regimes, and the size-decay fit of the
//! effective outer-pair coupling.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::evolve::{self, DEFAULT_STEPS_PER_PERIOD};
use crate::floquet::{self, ClassifyThresholds, ModeLabel};
use crate::linalg;
use crate::model::{self, build_hamiltonian, HamiltonianMatrix, LatticeConfig};
use crate::scalar::Real;

/// Relative singular-value floor below which the eliminated block counts as singular.
pub const SINGULAR_THRESHOLD: f64 = 1e-12;

/// Kept (P) and eliminated (Q) site indices, 0-based and sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubspacePartition {
    n_sites: usize,
    kept: Vec<usize>,
    eliminated: Vec<usize>,
}

impl SubspacePartition {
    pub fn new(n_sites: usize, kept: &[usize]) -> Result<Self> {
        let mut kept = kept.to_vec();
        kept.sort_unstable();
        kept.dedup();
        if kept.is_empty() {
            return Err(Error::InvalidArgument("kept set is empty".into()));
        }
        if let Some(&bad) = kept.iter().find(|&&i| i >= n_sites) {
            return Err(Error::InvalidArgument(format!("kept index {bad} out of range for {n_sites} sites")));
        }
        let eliminated: Vec<usize> = (0..n_sites).filter(|i| kept.binary_search(i).is_err()).collect();
        if eliminated.is_empty() {
            return Err(Error::InvalidArgument("nothing left to eliminate".into()));
        }
        Ok(Self { n_sites, kept, eliminated })
    }

    /// The two end sites.
    pub fn outer(n_sites: usize) -> Result<Self> {
        if n_sites < 3 {
            return Err(Error::InvalidArgument(format!("outer partition needs >= 3 sites, got {n_sites}")));
        }
        Self::new(n_sites, &[0, n_sites - 1])
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn eliminated(&self) -> &[usize] {
        &self.eliminated
    }
}

#[derive(Clone, Debug)]
pub struct EffectiveHamiltonian<T: Real> {
    pub matrix: DMatrix<Complex<T>>,
    pub partition: SubspacePartition,
    /// ||(QHQ)^-1 QHP||_2
    pub condition_ratio: T,
}

impl<T: Real> EffectiveHamiltonian<T> {
    pub fn norm(&self) -> T {
        linalg::operator_norm(&self.matrix)
    }

    /// Row-major `[re, im]` pairs; indices 1-based.
    pub fn to_json(&self) -> Value {
        json!({
            "matrix": matrix_to_json(&self.matrix),
            "kept_indices": self.partition.kept.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "eliminated_indices": self.partition.eliminated.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "condition_ratio": self.condition_ratio.as_f64(),
            "operator_norm": self.norm().as_f64(),
        })
    }
}

pub fn matrix_to_json<T: Real>(m: &DMatrix<Complex<T>>) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| json!([m[(r, c)].re.as_f64(), m[(r, c)].im.as_f64()])).collect())
        .collect();
    Value::Array(rows)
}

fn block<T: Real>(h: &DMatrix<Complex<T>>, rows: &[usize], cols: &[usize]) -> DMatrix<Complex<T>> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| h[(rows[r], cols[c])])
}

fn max_anti_hermitian<T: Real>(h: &DMatrix<Complex<T>>) -> T {
    let d = h - h.adjoint();
    linalg::max_modulus(&d)
}

/// H_eff = PHP - PHQ (QHQ)^-1 QHP on the kept sites.
pub fn project_effective<T: Real>(
    h: &DMatrix<Complex<T>>,
    partition: &SubspacePartition,
) -> Result<EffectiveHamiltonian<T>> {
    if !h.is_square() || h.nrows() != partition.n_sites {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, partition covers {} sites",
            h.nrows(),
            h.ncols(),
            partition.n_sites
        )));
    }
    let scale = linalg::max_modulus(h).max(T::one());
    let asym = max_anti_hermitian(h);
    if asym > T::lit(1e-12) * scale {
        return Err(Error::NotHermitian(asym.as_f64()));
    }
    let (p, q) = (&partition.kept, &partition.eliminated);
    let php = block(h, p, p);
    let phq = block(h, p, q);
    let qhp = block(h, q, p);
    let qhq = block(h, q, q);

    let threshold = T::lit(SINGULAR_THRESHOLD) * linalg::operator_norm(h);
    let sigma_min = linalg::min_singular_value(&qhq);
    let singular = || Error::SingularBlock { sigma_min: sigma_min.as_f64(), threshold: threshold.as_f64() };
    if sigma_min <= threshold {
        return Err(singular());
    }
    let slaved = qhq.lu().solve(&qhp).ok_or_else(singular)?;
    let raw = php - phq * &slaved;
    let half = Complex::new(T::lit(0.5), T::zero());
    let matrix = (&raw + raw.adjoint()) * half;
    Ok(EffectiveHamiltonian { matrix, partition: partition.clone(), condition_ratio: linalg::operator_norm(&slaved) })
}

/// Reduction of a real lattice Hamiltonian onto its two end sites.
pub fn project_outer<T: Real>(h: &HamiltonianMatrix<T>) -> Result<EffectiveHamiltonian<T>> {
    project_effective(&h.to_complex(), &SubspacePartition::outer(h.n_sites())?)
}

/// Closed form for the four-site chain with bonds (kappa1, kappa2, kappa1), basis (site 1, site 4).
pub fn ssh4_effective<T: Real>(kappa1: T, kappa2: T) -> Result<EffectiveHamiltonian<T>> {
    if kappa2 == T::zero() {
        return Err(Error::InvalidArgument("kappa2 must be nonzero".into()));
    }
    let off = Complex::new(-kappa1 * kappa1 / kappa2, T::zero());
    let zero = Complex::new(T::zero(), T::zero());
    Ok(EffectiveHamiltonian {
        matrix: DMatrix::from_row_slice(2, 2, &[zero, off, off, zero]),
        partition: SubspacePartition::outer(4)?,
        condition_ratio: (kappa1 / kappa2).abs(),
    })
}

/// Length for complete site-1 to site-4 transfer under the two-level reduction: pi kappa2 / (2 kappa1^2).
pub fn two_level_transfer_length<T: Real>(kappa1: T, kappa2: T) -> Result<T> {
    if kappa1 == T::zero() || kappa2 == T::zero() {
        return Err(Error::InvalidArgument("couplings must be nonzero".into()));
    }
    Ok(T::pi() * kappa2.abs() / (T::lit(2.0) * kappa1 * kappa1))
}

/// |(kappa0 - dk) / (kappa0 + dk)|
pub fn adiabatic_ratio<T: Real>(kappa0: T, dkappa: T) -> Result<T> {
    let denom = kappa0 + dkappa;
    if denom == T::zero() {
        return Err(Error::InvalidArgument("kappa0 + dkappa = 0".into()));
    }
    Ok(((kappa0 - dkappa) / denom).abs())
}

/// One-period average of the staggered coupling. The cosine drive averages out, leaving dkappa0.
pub fn effective_stroboscopic_coupling<T: Real>(config: &LatticeConfig<T>) -> T {
    config.dkappa0
}

/// ||U(period)^n - exp(-i H_avg n period)||_2, with H_avg the drive-averaged Hamiltonian.
pub fn averaged_evolution_error<T: Real>(
    config: &LatticeConfig<T>,
    n_periods: usize,
    steps_per_period: usize,
) -> Result<T> {
    if n_periods == 0 {
        return Err(Error::InvalidArgument("n_periods must be >= 1".into()));
    }
    let mono = evolve::monodromy_with_steps(config, steps_per_period)?;
    let mut u = mono.matrix.clone();
    for _ in 1..n_periods {
        u = &mono.matrix * u;
    }
    let avg = linalg::symmetric_eigen(&model::static_reference(config)?.entries)?;
    let target = linalg::exp_i_symmetric(&avg, T::from_usize_lossy(n_periods) * config.period);
    Ok(linalg::operator_norm(&(u - target)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    #[serde(rename = "AE")]
    Adiabatic,
    #[serde(rename = "HFLE")]
    HighFrequency,
    #[serde(rename = "QAE_CANDIDATE")]
    QuasiAdiabaticCandidate,
    #[serde(rename = "NONE")]
    None,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Adiabatic => "AE",
            Regime::HighFrequency => "HFLE",
            Regime::QuasiAdiabaticCandidate => "QAE_CANDIDATE",
            Regime::None => "NONE",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegimeThresholds {
    pub margin: f64,
    pub hf_threshold: f64,
    pub qae_window_large: [f64; 2],
    pub qae_window_small: [f64; 2],
    /// Chains shorter than this use the small-chain window.
    pub small_chain_limit: usize,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            margin: 0.05,
            hf_threshold: 4.0,
            qae_window_large: [1.0 / 3.0, 1.0],
            qae_window_small: [1.0 / 3.0, 1.4],
            small_chain_limit: 20,
        }
    }
}

impl RegimeThresholds {
    pub fn qae_window(&self, n_sites: usize) -> [f64; 2] {
        if n_sites < self.small_chain_limit {
            self.qae_window_small
        } else {
            self.qae_window_large
        }
    }
}

/// AE, then HFLE, then a spectral QAE check inside the frequency window.
pub fn classify_regime<T: Real>(config: &LatticeConfig<T>, th: &RegimeThresholds) -> Result<Regime> {
    config.validate()?;
    let ratio = adiabatic_ratio(config.kappa0, effective_stroboscopic_coupling(config))?.as_f64();
    let separated = ratio < 1.0 - th.margin;
    if !config.is_driven() {
        return Ok(if separated { Regime::Adiabatic } else { Regime::None });
    }
    let x = config.omega_over_delta().as_f64();
    if x >= th.hf_threshold && separated {
        return Ok(Regime::HighFrequency);
    }
    let [lo, hi] = th.qae_window(config.n_sites);
    if x >= lo && x <= hi {
        let spec =
            floquet::analyze(config, DEFAULT_STEPS_PER_PERIOD, &ClassifyThresholds::for_size(config.n_sites))?;
        if spec.count(ModeLabel::Pi) >= 2 {
            return Ok(Regime::QuasiAdiabaticCandidate);
        }
    }
    Ok(Regime::None)
}

/// Least-squares fit of ln ||H_eff|| against N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit<T: Real> {
    pub sizes: Vec<usize>,
    pub norms: Vec<T>,
    pub slope: T,
    pub intercept: T,
    /// -1 / slope
    pub n_critical: T,
    pub r_squared: T,
}

pub fn decay_fit<T: Real>(template: &LatticeConfig<T>, sizes: &[usize]) -> Result<DecayFit<T>> {
    template.validate()?;
    if template.is_driven() {
        return Err(Error::InvalidConfig("decay fit needs a static lattice (dkappa1 = 0)".into()));
    }
    if sizes.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 sizes, got {}", sizes.len())));
    }
    if sizes.iter().any(|&n| n < 4 || n % 2 != 0) {
        return Err(Error::InvalidArgument("sizes must be even and >= 4".into()));
    }
    if sizes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sizes must be strictly increasing".into()));
    }
    let ratio = adiabatic_ratio(template.kappa0, template.dkappa0)?;
    if ratio >= T::one() {
        return Err(Error::NonDecaying(ratio.as_f64()));
    }
    let norms = sizes
        .par_iter()
        .map(|&n| {
            let h = build_hamiltonian(&template.with_sites(n), T::zero())?;
            Ok(project_outer(&h)?.norm())
        })
        .collect::<Result<Vec<T>>>()?;

    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = norms.iter().map(|v| v.as_f64().ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if !(slope < 0.0) {
        return Err(Error::NonDecaying(ratio.as_f64()));
    }
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(DecayFit {
        sizes: sizes.to_vec(),
        norms,
        slope: T::lit(slope),
        intercept: T::lit(intercept),
        n_critical: T::lit(-1.0 / slope),
        r_squared: T::lit(r_squared),
    })
}
