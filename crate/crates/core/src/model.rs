//! Driven dimerized waveguide array: parameters and the instantaneous
//! nearest-neighbour Hamiltonian.
//!
//! Bond `j` (0-based, between sites `j` and `j + 1`) carries
//! `kappa0 - dk(z)` for even `j` and `kappa0 + dk(z)` for odd `j`, where
//! `dk(z) = dkappa0 + dkappa1 * cos(2 pi z / period + gauge)`.
//! The uniform propagation constant `beta0` is kept for provenance only and is
//! never placed on the diagonal.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

/// Multiplier applied to (kappa_1 + kappa_2) to obtain the static bandwidth.
///
/// 2 gives the full width of both bulk bands of the infinite chain
/// (band edges at +-(kappa_1 + kappa_2)). Setting it to 1 would measure the
/// half-width instead and rescale every omega/Delta axis by two.
pub const BANDWIDTH_SCALE: f64 = 2.0;

/// Full parameterization of the driven array. Rates in mm^-1, lengths in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig<T: Real> {
    pub n_sites: usize,
    pub kappa0: T,
    #[serde(default)]
    pub dkappa0: T,
    #[serde(default)]
    pub dkappa1: T,
    #[serde(default)]
    pub period: T,
    #[serde(default)]
    pub gauge: T,
    #[serde(default)]
    pub beta0: T,
}

impl<T: Real> LatticeConfig<T> {
    /// Static SSH chain with bonds `kappa0 -+ dkappa0`.
    pub fn ssh(n_sites: usize, kappa0: T, dkappa0: T) -> Self {
        Self {
            n_sites,
            kappa0,
            dkappa0,
            dkappa1: T::zero(),
            period: T::zero(),
            gauge: T::zero(),
            beta0: T::zero(),
        }
    }

    pub fn driven(mut self, dkappa1: T, period: T) -> Self {
        self.dkappa1 = dkappa1;
        self.period = period;
        self
    }

    pub fn with_gauge(mut self, gauge: T) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn with_period(mut self, period: T) -> Self {
        self.period = period;
        self
    }

    pub fn with_sites(mut self, n_sites: usize) -> Self {
        self.n_sites = n_sites;
        self
    }

    pub fn is_driven(&self) -> bool {
        self.dkappa1 != T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.kappa0, self.dkappa0, self.dkappa1, self.period, self.gauge, self.beta0]
            .iter()
            .all(|v| v.as_f64().is_finite());
        if !finite {
            return Err(Error::InvalidConfig("all parameters must be finite".into()));
        }
        if self.n_sites < 2 {
            return Err(Error::InvalidConfig(format!("n_sites = {} (need >= 2)", self.n_sites)));
        }
        if self.kappa0 <= T::zero() {
            return Err(Error::InvalidConfig(format!("kappa0 = {} (need > 0)", self.kappa0)));
        }
        let floor = self.kappa0 - self.dkappa0.abs() - self.dkappa1.abs();
        // Allow a few ulps so that e.g. kappa0 = dkappa1 (a bond touching zero) is accepted.
        if floor < -T::lit(8.0) * T::default_epsilon() * self.kappa0 {
            return Err(Error::InvalidConfig(format!(
                "kappa0 - |dkappa0| - |dkappa1| = {floor} < 0 (bond couplings would turn negative)"
            )));
        }
        if self.is_driven() && self.period <= T::zero() {
            return Err(Error::InvalidConfig(format!(
                "period = {} (need > 0 for a driven lattice)",
                self.period
            )));
        }
        if self.period < T::zero() {
            return Err(Error::InvalidConfig(format!("period = {} is negative", self.period)));
        }
        Ok(())
    }

    /// Drive frequency omega = 2 pi / period (zero for a static lattice without period).
    pub fn omega(&self) -> T {
        if self.period > T::zero() {
            T::two_pi() / self.period
        } else {
            T::zero()
        }
    }

    /// omega / Delta for this configuration.
    pub fn omega_over_delta(&self) -> T {
        self.omega() / bandwidth(self)
    }

    /// Sets the period so that omega / Delta takes the requested value.
    pub fn with_omega_over_delta(self, ratio: T) -> Self {
        let delta = bandwidth(&self);
        self.with_period(T::two_pi() / (ratio * delta))
    }
}

/// Staggered coupling dk(z).
pub fn drive_coupling<T: Real>(config: &LatticeConfig<T>, z: T) -> T {
    if !config.is_driven() {
        return config.dkappa0;
    }
    let phase = T::two_pi() * z / config.period + config.gauge;
    config.dkappa0 + config.dkappa1 * phase.cos()
}

/// Bond couplings along the chain at one propagation coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct BondCouplings<T: Real> {
    pub values: Vec<T>,
}

impl<T: Real> BondCouplings<T> {
    pub fn at(config: &LatticeConfig<T>, z: T) -> Self {
        let dk = drive_coupling(config, z);
        let values = (0..config.n_sites - 1)
            .map(|j| if j % 2 == 0 { config.kappa0 - dk } else { config.kappa0 + dk })
            .collect();
        Self { values }
    }
}

/// Gauge-stripped (zero-diagonal) tight-binding Hamiltonian at coordinate `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix<T: Real> {
    pub entries: DMatrix<T>,
    pub z: T,
}

impl<T: Real> HamiltonianMatrix<T> {
    pub fn from_bonds(bonds: &BondCouplings<T>, z: T) -> Self {
        let n = bonds.values.len() + 1;
        let mut entries = DMatrix::zeros(n, n);
        for (j, &b) in bonds.values.iter().enumerate() {
            entries[(j, j + 1)] = b;
            entries[(j + 1, j)] = b;
        }
        Self { entries, z }
    }

    pub fn n_sites(&self) -> usize {
        self.entries.nrows()
    }

    /// Superdiagonal (bond) entries.
    pub fn bonds(&self) -> Vec<T> {
        (0..self.n_sites() - 1).map(|j| self.entries[(j, j + 1)]).collect()
    }

    pub fn to_complex(&self) -> DMatrix<Complex<T>> {
        linalg::complexify(&self.entries)
    }

    /// Max entrywise |self - other|.
    pub fn max_deviation(&self, other: &Self) -> T {
        (&self.entries - &other.entries).amax()
    }
}

pub fn build_hamiltonian<T: Real>(config: &LatticeConfig<T>, z: T) -> Result<HamiltonianMatrix<T>> {
    config.validate()?;
    Ok(HamiltonianMatrix::from_bonds(&BondCouplings::at(config, z), z))
}

/// Drive-averaged Hamiltonian: the zero-mean cosine drops out, leaving dk = dkappa0.
pub fn static_reference<T: Real>(config: &LatticeConfig<T>) -> Result<HamiltonianMatrix<T>> {
    config.validate()?;
    let averaged = LatticeConfig { dkappa1: T::zero(), ..*config };
    Ok(HamiltonianMatrix::from_bonds(&BondCouplings::at(&averaged, T::zero()), T::zero()))
}

/// Static bandwidth Delta = BANDWIDTH_SCALE * (kappa_1 + kappa_2) of the drive-averaged chain.
pub fn bandwidth<T: Real>(config: &LatticeConfig<T>) -> T {
    let k1 = (config.kappa0 - config.dkappa0).abs();
    let k2 = (config.kappa0 + config.dkappa0).abs();
    T::lit(BANDWIDTH_SCALE) * (k1 + k2)
}

/// Max entrywise |H(z + period/2; gauge) - H(z; gauge + pi)|.
///
/// Exactly zero for a pure cosine drive; rejected when `dkappa0 != 0`.
pub fn gauge_shift_identity_check<T: Real>(config: &LatticeConfig<T>, z: T) -> Result<T> {
    config.validate()?;
    if config.dkappa0 != T::zero() {
        return Err(Error::InvalidArgument(
            "half-period/gauge-pi identity requires dkappa0 = 0".into(),
        ));
    }
    let shifted = build_hamiltonian(config, z + config.period / T::lit(2.0))?;
    let regauged = build_hamiltonian(&config.with_gauge(config.gauge + T::pi()), z)?;
    Ok(shifted.max_deviation(&regauged))
}
