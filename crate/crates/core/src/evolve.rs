//! Integration of i dpsi/dz = H(z) psi with a midpoint-exponential stepper.
//!
//! Each step applies exp(-i H(z + dz/2) dz), built from the eigenpairs of the
//! real tridiagonal H, so every step is unitary to eigensolver precision. The
//! one-period product is the monodromy operator whose eigenphases are the
//! quasi-energies.

use std::io::Write;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricEigenpairs};
use crate::model::{BondCouplings, HamiltonianMatrix, LatticeConfig};
use crate::scalar::Real;

/// Default number of midpoint steps per drive period.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 1000;

/// Finest drive resolution accepted by [`propagate`]: dz <= period / 200.
pub const MIN_STEPS_PER_PERIOD: usize = 200;

/// Coupling resolution accepted by [`propagate`]: dz <= 0.05 / kappa0.
pub const MAX_PHASE_PER_STEP: f64 = 0.05;

/// Complex modal amplitudes across the array.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector<T: Real> {
    pub amplitudes: DVector<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(amplitudes: DVector<Complex<T>>) -> Self {
        Self { amplitudes }
    }

    /// Unit excitation of one waveguide (0-based index).
    pub fn site(n_sites: usize, index: usize) -> Self {
        let mut amplitudes = DVector::from_element(n_sites, Complex::new(T::zero(), T::zero()));
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Self { amplitudes }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm(&self) -> T {
        self.amplitudes.iter().map(|c| c.norm_sqr()).fold(T::zero(), |a, b| a + b).sqrt()
    }

    pub fn intensities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }
}

/// Sampled trajectory of one propagation run.
#[derive(Clone, Debug)]
pub struct PropagationRecord<T: Real> {
    pub z_samples: Vec<T>,
    pub states: Vec<StateVector<T>>,
    pub config: LatticeConfig<T>,
}

impl<T: Real> PropagationRecord<T> {
    pub fn len(&self) -> usize {
        self.z_samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_samples.is_empty()
    }

    pub fn n_sites(&self) -> usize {
        self.states.first().map_or(0, StateVector::len)
    }

    pub fn final_state(&self) -> Option<&StateVector<T>> {
        self.states.last()
    }

    /// Samples whose index is a multiple of `every`, plus the last one.
    pub fn subsample(&self, every: usize) -> Self {
        let every = every.max(1);
        let mut keep: Vec<usize> = (0..self.len()).step_by(every).collect();
        if let (Some(&last), false) = (keep.last(), self.is_empty()) {
            if last + 1 != self.len() {
                keep.push(self.len() - 1);
            }
        }
        Self {
            z_samples: keep.iter().map(|&k| self.z_samples[k]).collect(),
            states: keep.iter().map(|&k| self.states[k].clone()).collect(),
            config: self.config,
        }
    }

    /// Writes `z,site,re,im,intensity`, z-major and site-minor, sites numbered from 1.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "z,site,re,im,intensity")?;
        for (z, state) in self.z_samples.iter().zip(&self.states) {
            for (k, amp) in state.amplitudes.iter().enumerate() {
                writeln!(out, "{},{},{},{},{}", z, k + 1, amp.re, amp.im, amp.norm_sqr())?;
            }
        }
        Ok(())
    }
}

/// One-period evolution operator U(period; gauge).
#[derive(Clone, Debug)]
pub struct MonodromyResult<T: Real> {
    pub matrix: DMatrix<Complex<T>>,
    pub period: T,
    pub gauge: T,
    pub steps: usize,
    pub config: LatticeConfig<T>,
}

/// exp(-i H dz) for a Hermitian (real symmetric) H.
pub fn step_unitary<T: Real>(h_mid: &HamiltonianMatrix<T>, dz: T) -> Result<DMatrix<Complex<T>>> {
    if dz <= T::zero() || !dz.as_f64().is_finite() {
        return Err(Error::InvalidArgument(format!("dz = {dz} (need a positive finite step)")));
    }
    let eig = linalg::symmetric_eigen(&h_mid.entries)?;
    Ok(linalg::exp_i_symmetric(&eig, dz))
}

/// Eigenpairs of H at `z`, straight from the bond list.
fn instantaneous_eigen<T: Real>(config: &LatticeConfig<T>, z: T) -> Result<SymmetricEigenpairs<T>> {
    let bonds = BondCouplings::at(config, z);
    let diag = vec![T::zero(); config.n_sites];
    linalg::tridiagonal_eigen(&diag, &bonds.values)
}

/// psi <- V diag(exp(-i lambda dz)) V^T psi
fn apply_step<T: Real>(eig: &SymmetricEigenpairs<T>, dz: T, psi: &mut DVector<Complex<T>>) {
    let v = &eig.vectors;
    let n = psi.len();
    let mut w: Vec<Complex<T>> = (0..n)
        .map(|k| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for r in 0..n {
                acc += psi[r] * v[(r, k)];
            }
            let theta = eig.values[k] * dz;
            acc * Complex::new(theta.cos(), -theta.sin())
        })
        .collect();
    for r in 0..n {
        let mut acc = Complex::new(T::zero(), T::zero());
        for (k, wk) in w.iter_mut().enumerate() {
            acc += *wk * v[(r, k)];
        }
        psi[r] = acc;
    }
}

/// Largest ||H|| dz for which exp(-i H dz) is summed as a Taylor series.
const TAYLOR_MAX_ARGUMENT: f64 = 0.5;

/// Number of Taylor terms bringing the remainder below machine precision,
/// or `None` when the argument is too large for the series to be well conditioned.
fn taylor_terms<T: Real>(bonds: &[T], dz: T) -> Option<usize> {
    let mut row_max = T::zero();
    for r in 0..=bonds.len() {
        let left = if r > 0 { bonds[r - 1].abs() } else { T::zero() };
        let right = if r < bonds.len() { bonds[r].abs() } else { T::zero() };
        row_max = row_max.max(left + right);
    }
    let arg = (row_max * dz).as_f64();
    if arg > TAYLOR_MAX_ARGUMENT {
        return None;
    }
    let tol = T::default_epsilon().as_f64() * 0.25;
    let (mut term, mut k) = (1.0, 0);
    while term > tol && k < 40 {
        k += 1;
        term *= arg / k as f64;
    }
    Some(k)
}

/// out = scale * H x for each n-row column of the column-major buffer `x`.
fn tridiagonal_apply<T: Real>(bonds: &[T], n: usize, x: &[T], out: &mut [T], scale: T) {
    for (xc, oc) in x.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        oc[0] = scale * bonds[0] * xc[1];
        for r in 1..n - 1 {
            oc[r] = scale * (bonds[r - 1] * xc[r - 1] + bonds[r] * xc[r + 1]);
        }
        oc[n - 1] = scale * bonds[n - 2] * xc[n - 2];
    }
}

/// Work buffers for the Taylor path.
#[derive(Default)]
struct TaylorScratch<T> {
    term_re: Vec<T>,
    term_im: Vec<T>,
    next_re: Vec<T>,
    next_im: Vec<T>,
}

/// (re + i im) <- exp(-i H dz) (re + i im), H given by its bonds, summed to `terms` orders.
fn taylor_left_multiply<T: Real>(
    bonds: &[T],
    dz: T,
    terms: usize,
    re: &mut [T],
    im: &mut [T],
    s: &mut TaylorScratch<T>,
) {
    let n = bonds.len() + 1;
    s.term_re.clear();
    s.term_re.extend_from_slice(re);
    s.term_im.clear();
    s.term_im.extend_from_slice(im);
    s.next_re.resize(re.len(), T::zero());
    s.next_im.resize(re.len(), T::zero());
    for k in 1..=terms {
        // -i (dz / k) H (a + i b) = (dz / k) H b - i (dz / k) H a
        let c = dz / T::from_usize_lossy(k);
        tridiagonal_apply(bonds, n, &s.term_im, &mut s.next_re, c);
        tridiagonal_apply(bonds, n, &s.term_re, &mut s.next_im, -c);
        std::mem::swap(&mut s.term_re, &mut s.next_re);
        std::mem::swap(&mut s.term_im, &mut s.next_im);
        for (acc, t) in re.iter_mut().zip(&s.term_re) {
            *acc += *t;
        }
        for (acc, t) in im.iter_mut().zip(&s.term_im) {
            *acc += *t;
        }
    }
}

/// Operator accumulated as separate real and imaginary parts.
struct SplitOperator<T: Real> {
    re: DMatrix<T>,
    im: DMatrix<T>,
    scratch_re: DMatrix<T>,
    scratch_im: DMatrix<T>,
    taylor: TaylorScratch<T>,
}

impl<T: Real> SplitOperator<T> {
    fn identity(n: usize) -> Self {
        Self {
            re: DMatrix::identity(n, n),
            im: DMatrix::zeros(n, n),
            scratch_re: DMatrix::zeros(n, n),
            scratch_im: DMatrix::zeros(n, n),
            taylor: TaylorScratch::default(),
        }
    }

    /// U <- exp(-i H dz) U
    fn left_multiply(&mut self, bonds: &[T], dz: T) -> Result<()> {
        if let Some(terms) = taylor_terms(bonds, dz) {
            taylor_left_multiply(bonds, dz, terms, self.re.as_mut_slice(), self.im.as_mut_slice(), &mut self.taylor);
            return Ok(());
        }
        let eig = linalg::tridiagonal_eigen(&vec![T::zero(); bonds.len() + 1], bonds)?;
        let v = &eig.vectors;
        // Explicit transpose: tr_mul_to bypasses the blocked GEMM kernel.
        let vt = v.transpose();
        vt.mul_to(&self.re, &mut self.scratch_re);
        vt.mul_to(&self.im, &mut self.scratch_im);
        let n = self.re.nrows();
        for k in 0..n {
            let theta = eig.values[k] * dz;
            let (s, c) = (theta.sin(), theta.cos());
            for col in 0..n {
                let wr = self.scratch_re[(k, col)];
                let wi = self.scratch_im[(k, col)];
                self.scratch_re[(k, col)] = c * wr + s * wi;
                self.scratch_im[(k, col)] = c * wi - s * wr;
            }
        }
        v.mul_to(&self.scratch_re, &mut self.re);
        v.mul_to(&self.scratch_im, &mut self.im);
        Ok(())
    }

    fn into_complex(self) -> DMatrix<Complex<T>> {
        self.re.zip_map(&self.im, Complex::new)
    }
}

/// Ordered product of `steps` midpoint exponentials over [z_start, z_start + length).
///
/// A static lattice collapses to the single exponential exp(-i H length).
pub fn evolution_operator<T: Real>(
    config: &LatticeConfig<T>,
    z_start: T,
    length: T,
    steps: usize,
) -> Result<DMatrix<Complex<T>>> {
    config.validate()?;
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be >= 1".into()));
    }
    if length <= T::zero() || !length.as_f64().is_finite() {
        return Err(Error::InvalidArgument(format!("length = {length} (need > 0)")));
    }
    if !config.is_driven() {
        let eig = instantaneous_eigen(config, z_start)?;
        return Ok(linalg::exp_i_symmetric(&eig, length));
    }
    let dz = length / T::from_usize_lossy(steps);
    let half = T::lit(0.5);
    let mut op = SplitOperator::identity(config.n_sites);
    for s in 0..steps {
        let z_mid = z_start + (T::from_usize_lossy(s) + half) * dz;
        op.left_multiply(&BondCouplings::at(config, z_mid).values, dz)?;
    }
    Ok(op.into_complex())
}

pub fn monodromy<T: Real>(config: &LatticeConfig<T>) -> Result<MonodromyResult<T>> {
    monodromy_with_steps(config, DEFAULT_STEPS_PER_PERIOD)
}

pub fn monodromy_with_steps<T: Real>(config: &LatticeConfig<T>, steps: usize) -> Result<MonodromyResult<T>> {
    config.validate()?;
    if config.period <= T::zero() {
        return Err(Error::InvalidConfig("monodromy needs a positive period".into()));
    }
    let matrix = evolution_operator(config, T::zero(), config.period, steps)?;
    Ok(MonodromyResult { matrix, period: config.period, gauge: config.gauge, steps, config: *config })
}

fn check_input<T: Real>(config: &LatticeConfig<T>, input: &StateVector<T>) -> Result<()> {
    if input.len() != config.n_sites {
        return Err(Error::InvalidArgument(format!(
            "input has {} amplitudes, lattice has {} sites",
            input.len(),
            config.n_sites
        )));
    }
    if (input.norm() - T::one()).abs() > T::lit(1e-9) {
        return Err(Error::InvalidArgument(format!("input norm {} is not 1", input.norm())));
    }
    Ok(())
}

/// Propagates `input` to `z_max`, storing every step.
pub fn propagate<T: Real>(
    config: &LatticeConfig<T>,
    input: &StateVector<T>,
    z_max: T,
    dz: T,
) -> Result<PropagationRecord<T>> {
    propagate_strided(config, input, z_max, dz, 1)
}

/// Like [`propagate`], keeping every `stride`-th step plus the final state.
pub fn propagate_strided<T: Real>(
    config: &LatticeConfig<T>,
    input: &StateVector<T>,
    z_max: T,
    dz: T,
    stride: usize,
) -> Result<PropagationRecord<T>> {
    config.validate()?;
    check_input(config, input)?;
    if !(z_max.as_f64().is_finite() && z_max > T::zero()) {
        return Err(Error::InvalidArgument(format!("z_max = {z_max} (need a positive finite length)")));
    }
    if !(dz.as_f64().is_finite() && dz > T::zero()) {
        return Err(Error::InvalidArgument(format!("dz = {dz} (need a positive finite step)")));
    }
    let slack = T::one() + T::lit(1e-9);
    let coupling_limit = T::lit(MAX_PHASE_PER_STEP) / config.kappa0;
    if dz > coupling_limit * slack {
        return Err(Error::StepTooLarge { dz: dz.as_f64(), limit: coupling_limit.as_f64() });
    }
    if config.is_driven() {
        let drive_limit = config.period / T::from_usize_lossy(MIN_STEPS_PER_PERIOD);
        if dz > drive_limit * slack {
            return Err(Error::StepTooLarge { dz: dz.as_f64(), limit: drive_limit.as_f64() });
        }
    }
    let stride = stride.max(1);

    let ratio = (z_max / dz).as_f64();
    let steps = ((ratio - 1e-9).ceil() as usize).max(1);
    let h = z_max / T::from_usize_lossy(steps);
    let half = T::lit(0.5);

    let mut psi = input.amplitudes.clone();
    let mut z_samples = vec![T::zero()];
    let mut states = vec![input.clone()];
    let static_eig = if config.is_driven() { None } else { Some(instantaneous_eigen(config, T::zero())?) };

    let (mut re, mut im): (Vec<T>, Vec<T>) = psi.iter().map(|c| (c.re, c.im)).unzip();
    let mut scratch = TaylorScratch::default();
    for s in 0..steps {
        let z0 = T::from_usize_lossy(s) * h;
        match &static_eig {
            Some(eig) => apply_step(eig, h, &mut psi),
            None => {
                let bonds = BondCouplings::at(config, z0 + half * h).values;
                match taylor_terms(&bonds, h) {
                    Some(terms) => {
                        taylor_left_multiply(&bonds, h, terms, &mut re, &mut im, &mut scratch);
                        for (p, (&a, &b)) in psi.iter_mut().zip(re.iter().zip(&im)) {
                            *p = Complex::new(a, b);
                        }
                    }
                    None => {
                        apply_step(&instantaneous_eigen(config, z0 + half * h)?, h, &mut psi);
                        for (p, (a, b)) in psi.iter().zip(re.iter_mut().zip(im.iter_mut())) {
                            *a = p.re;
                            *b = p.im;
                        }
                    }
                }
            }
        }
        let done = s + 1;
        if done % stride == 0 || done == steps {
            z_samples.push(T::from_usize_lossy(done) * h);
            states.push(StateVector::new(psi.clone()));
        }
    }
    Ok(PropagationRecord { z_samples, states, config: *config })
}

/// States at z = 0, period, ..., n_periods * period.
pub fn stroboscopic_series<T: Real>(
    config: &LatticeConfig<T>,
    input: &StateVector<T>,
    n_periods: usize,
) -> Result<PropagationRecord<T>> {
    let mono = monodromy(config)?;
    stroboscopic_series_from(&mono, input, n_periods)
}

/// Stroboscopic series reusing an already computed monodromy operator.
pub fn stroboscopic_series_from<T: Real>(
    mono: &MonodromyResult<T>,
    input: &StateVector<T>,
    n_periods: usize,
) -> Result<PropagationRecord<T>> {
    check_input(&mono.config, input)?;
    if n_periods == 0 {
        return Err(Error::InvalidArgument("n_periods must be >= 1".into()));
    }
    let mut psi = input.amplitudes.clone();
    let mut z_samples = vec![T::zero()];
    let mut states = vec![input.clone()];
    for k in 1..=n_periods {
        psi = &mono.matrix * psi;
        z_samples.push(T::from_usize_lossy(k) * mono.period);
        states.push(StateVector::new(psi.clone()));
    }
    Ok(PropagationRecord { z_samples, states, config: mono.config })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::ComplexField;
    use crate::model::build_hamiltonian;
    use std::f64::consts::PI;

    #[test]
    fn zero_hamiltonian_gives_identity() {
        let h = HamiltonianMatrix { entries: DMatrix::<f64>::zeros(3, 3), z: 0.0 };
        let u = step_unitary(&h, 0.7).unwrap();
        assert!((u - DMatrix::identity(3, 3)).iter().all(|c| c.modulus() < 1e-15));
    }

    #[test]
    fn two_site_swap() {
        let kappa = 0.03;
        let h = HamiltonianMatrix { entries: DMatrix::from_row_slice(2, 2, &[0.0, kappa, kappa, 0.0]), z: 0.0 };
        let u = step_unitary(&h, PI / (2.0 * kappa)).unwrap();
        // exp(-i kappa dz sigma_x) = cos - i sin sigma_x, so |U_01| = sin(pi/2) = 1.
        assert!((u[(0, 1)].modulus() - 1.0).abs() < 1e-12);
        assert!(u[(0, 0)].modulus() < 1e-12);
        assert!(linalg::unitarity_deviation(&u) < 1e-12);
    }

    #[test]
    fn step_rejects_bad_input() {
        let h = HamiltonianMatrix { entries: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.9, 0.0]), z: 0.0 };
        assert!(matches!(step_unitary(&h, 0.1), Err(Error::NotHermitian(_))));
        let ok = HamiltonianMatrix { entries: DMatrix::<f64>::zeros(2, 2), z: 0.0 };
        assert!(step_unitary(&ok, 0.0).is_err());
    }

    #[test]
    fn rabi_transfer_between_two_sites() {
        let cfg = LatticeConfig::<f64>::ssh(2, 0.03, 0.0);
        let z_max = PI / (2.0 * 0.03);
        let rec = propagate(&cfg, &StateVector::site(2, 0), z_max, 0.05).unwrap();
        let last = rec.final_state().unwrap().intensities();
        assert!(last[0] < 1e-4 && (last[1] - 1.0).abs() < 1e-4);
        assert!((rec.z_samples.last().unwrap() - z_max).abs() < 1e-9);
    }

    #[test]
    fn single_step_run() {
        let cfg = LatticeConfig::<f64>::ssh(4, 0.03, 0.0).driven(0.02, 100.0);
        let rec = propagate(&cfg, &StateVector::site(4, 0), 0.5, 0.5).unwrap();
        assert_eq!(rec.len(), 2);
        assert!((rec.states[1].norm() - 1.0).abs() < 1e-12);
        assert!(propagate(&cfg, &StateVector::site(4, 0), 0.0, 0.5).is_err());
        assert!(propagate(&cfg, &StateVector::site(4, 0), f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn step_size_preconditions() {
        let cfg = LatticeConfig::<f64>::ssh(4, 0.03, 0.0).driven(0.02, 100.0);
        let psi = StateVector::site(4, 0);
        assert!(matches!(propagate(&cfg, &psi, 10.0, 0.6), Err(Error::StepTooLarge { .. })));
        assert!(propagate(&cfg, &psi, 10.0, 0.5).is_ok());
        let still = LatticeConfig::<f64>::ssh(4, 0.03, 0.0);
        assert!(matches!(propagate(&still, &psi, 10.0, 1.7), Err(Error::StepTooLarge { .. })));
        assert!(propagate(&still, &psi, 10.0, 1.6).is_ok());
    }

    #[test]
    fn input_must_be_normalized() {
        let cfg = LatticeConfig::<f64>::ssh(2, 0.03, 0.0);
        let mut psi = StateVector::site(2, 0);
        psi.amplitudes[1] = Complex::new(1.0, 0.0);
        assert!(propagate(&cfg, &psi, 1.0, 0.1).is_err());
    }

    #[test]
    fn stride_keeps_first_and_last() {
        let cfg = LatticeConfig::<f64>::ssh(4, 0.03, 0.01);
        let rec = propagate_strided(&cfg, &StateVector::site(4, 0), 10.0, 1.0, 3).unwrap();
        let z: Vec<f64> = rec.z_samples.iter().map(|z| (z * 1e9).round() / 1e9).collect();
        assert_eq!(z, vec![0.0, 3.0, 6.0, 9.0, 10.0]);
    }

    #[test]
    fn series_step_matches_spectral_step() {
        let cfg = LatticeConfig::<f64>::ssh(7, 0.03, 0.0).driven(0.02, 60.0);
        let dz = 0.3;
        let bonds = BondCouplings::at(&cfg, 11.0).values;
        let terms = taylor_terms(&bonds, dz).unwrap();
        let mut op = SplitOperator::identity(7);
        taylor_left_multiply(&bonds, dz, terms, op.re.as_mut_slice(), op.im.as_mut_slice(), &mut op.taylor);
        let series = op.into_complex();
        let exact = step_unitary(&build_hamiltonian(&cfg, 11.0).unwrap(), dz).unwrap();
        assert!(linalg::max_modulus(&(series - exact)) < 1e-14);
        assert!(taylor_terms(&bonds, 100.0).is_none());
    }

    #[test]
    fn large_steps_fall_back_to_spectral_path() {
        let cfg = LatticeConfig::<f64>::ssh(5, 0.03, 0.0).driven(0.02, 400.0);
        let coarse = evolution_operator(&cfg, 0.0, 400.0, 20).unwrap();
        let mut want = DMatrix::<Complex<f64>>::identity(5, 5);
        for s in 0..20 {
            let h = build_hamiltonian(&cfg, (s as f64 + 0.5) * 20.0).unwrap();
            want = step_unitary(&h, 20.0).unwrap() * want;
        }
        assert!(linalg::max_modulus(&(coarse - want)) < 1e-12);
    }

    #[test]
    fn static_monodromy_is_plain_exponential() {
        let cfg = LatticeConfig::<f64>::ssh(6, 0.042, 0.02).with_period(37.0);
        let mono = monodromy(&cfg).unwrap();
        let h = build_hamiltonian(&cfg, 0.0).unwrap();
        let exact = step_unitary(&h, 37.0).unwrap();
        assert!(linalg::max_modulus(&(&mono.matrix - exact)) < 1e-8);
        assert!(monodromy(&LatticeConfig::<f64>::ssh(6, 0.042, 0.02)).is_err());
    }

    #[test]
    fn monodromy_is_two_pi_periodic_in_gauge() {
        let cfg = LatticeConfig::<f64>::ssh(4, 0.03, 0.0).driven(0.02, 80.0).with_gauge(0.4);
        let a = monodromy(&cfg).unwrap();
        let b = monodromy(&cfg.with_gauge(0.4 + 2.0 * PI)).unwrap();
        assert!(linalg::max_modulus(&(&a.matrix - &b.matrix)) < 1e-12);
        assert!(linalg::unitarity_deviation(&a.matrix) < 1e-9);
        let det = a.matrix.clone().determinant();
        assert!((det.modulus() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stroboscopic_cardinality_and_first_period() {
        let cfg = LatticeConfig::<f64>::ssh(4, 0.03, 0.0).driven(0.02, 75.0);
        let psi = StateVector::site(4, 0);
        let rec = stroboscopic_series(&cfg, &psi, 1).unwrap();
        assert_eq!(rec.len(), 2);
        let mono = monodromy(&cfg).unwrap();
        let expected = &mono.matrix * &psi.amplitudes;
        assert!((&rec.states[1].amplitudes - expected).iter().all(|c| c.modulus() < 1e-15));
        let long = stroboscopic_series_from(&mono, &psi, 20).unwrap();
        assert!(long.states.iter().all(|s| (s.norm() - 1.0).abs() < 1e-9));
        assert!(stroboscopic_series_from(&mono, &psi, 0).is_err());
    }

    #[test]
    fn csv_layout() {
        let cfg = LatticeConfig::<f64>::ssh(2, 0.03, 0.0);
        let rec = propagate(&cfg, &StateVector::site(2, 1), 1.0, 1.0).unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z,site,re,im,intensity");
        assert_eq!(lines.len(), 1 + 2 * 2);
        assert_eq!(lines[1], "0,1,0,0,0");
        assert_eq!(lines[2], "0,2,1,0,1");
        assert!(lines[3].starts_with("1,1,"));
    }
}
