//! Simulation of periodically driven, dimerized coupled-waveguide arrays.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod eliminate;
pub mod error;
pub mod evolve;
pub mod experiments;
pub mod floquet;
pub mod linalg;
pub mod model;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Lattice = model::LatticeConfig<f64>;
pub type Hamiltonian = model::HamiltonianMatrix<f64>;
pub type State = evolve::StateVector<f64>;
pub type Record = evolve::PropagationRecord<f64>;
pub type Monodromy = evolve::MonodromyResult<f64>;
pub type Spectrum = floquet::FloquetSpectrum<f64>;
pub type Sweep = floquet::SpectrumSweep<f64>;
pub type Effective = eliminate::EffectiveHamiltonian<f64>;
pub type Experiment = experiments::ExperimentConfig<f64>;

pub type Lattice32 = model::LatticeConfig<f32>;
pub type Spectrum32 = floquet::FloquetSpectrum<f32>;
