//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Set `ACCEPTANCE_STRICT=1` to exit non-zero when any criterion fails; by default the
//! process succeeds so that `cargo test --workspace` still runs the remaining targets.

use std::f64::consts::PI;
use std::time::Instant;

use floqsim::eliminate::{self, SubspacePartition};
use floqsim::evolve::{self, StateVector};
use floqsim::experiments::{self, ExperimentConfig, GaugeOutcome};
use floqsim::floquet::{self, ClassifyThresholds, ModeLabel};
use floqsim::linalg;
use floqsim::model::{self, LatticeConfig};
use floqsim::Lattice;
use nalgebra::{Complex, DMatrix};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = (bool, String);
type Criterion = (&'static str, fn() -> Outcome);

fn qae(n: usize) -> Lattice {
    LatticeConfig::ssh(n, 0.03, 0.0).driven(0.02, 1.0)
}

fn hfle() -> Lattice {
    LatticeConfig::ssh(4, 0.029, 0.008).driven(0.013, 1.0)
}

fn two_decimals(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn c1_hfle_ratio() -> Outcome {
    let dk = eliminate::effective_stroboscopic_coupling(&hfle());
    let r = eliminate::adiabatic_ratio(0.029, dk).unwrap();
    let ok = (r - 0.5676).abs() < 5e-5 && two_decimals(r) == 0.57 && r < 1.0;
    (ok, format!("adiabatic_ratio(0.029, {dk}) = {r:.4} (target 0.57)"))
}

fn c2_ae_ratio() -> Outcome {
    let r = eliminate::adiabatic_ratio(0.042f64, 0.02).unwrap();
    let ok = (r - 0.3548).abs() < 5e-5 && two_decimals(r) == 0.35;
    (ok, format!("adiabatic_ratio(0.042, 0.02) = {r:.4} (target 0.35)"))
}

fn c3_qae_diagnosis() -> Outcome {
    let dk = eliminate::effective_stroboscopic_coupling(&qae(4).with_omega_over_delta(0.7));
    let r = eliminate::adiabatic_ratio(0.03f64, dk).unwrap();
    (dk == 0.0 && r == 1.0, format!("effective coupling = {dk}, ratio = {r}"))
}

fn c4_closed_form() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let k2: f64 = rng.random_range(0.01..0.1);
        let k1: f64 = rng.random_range(0.001..k2);
        let lat = LatticeConfig::ssh(4, 0.5 * (k1 + k2), 0.5 * (k2 - k1));
        let h = model::build_hamiltonian(&lat, 0.0).unwrap();
        let eff = eliminate::project_outer(&h).unwrap();
        let closed = eliminate::ssh4_effective(k1, k2).unwrap();
        worst = worst.max(linalg::max_modulus(&(eff.matrix - closed.matrix)));
    }
    (worst < 1e-12, format!("50 pairs, max deviation {worst:.2e}"))
}

fn c5_decay_law() -> Outcome {
    let fit = eliminate::decay_fit(&LatticeConfig::ssh(4, 0.042, 0.02), &[4, 6, 8, 10, 12]).unwrap();
    (
        fit.r_squared > 0.99,
        format!("r^2 = {:.6}, slope = {:.4}, N_cr = {:.3}", fit.r_squared, fit.slope, fit.n_critical),
    )
}

fn c6_window() -> Outcome {
    let start = Instant::now();
    let grid = floquet::linear_grid(0.2, 1.4, 60);
    let sweep = floquet::band_sweep(&qae(80), &grid, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let Some((lo, hi)) = sweep.pi_window() else {
        return (false, "no pi modes detected".into());
    };
    let contiguous = sweep
        .grid
        .iter()
        .zip(&sweep.points)
        .all(|(x, s)| (s.count(ModeLabel::Pi) >= 2) == (*x >= lo && *x <= hi));
    let lo_ok = (lo - 1.0 / 3.0).abs() <= 0.15 / 3.0;
    let hi_ok = (hi - 1.0).abs() <= 0.15;
    (
        contiguous && lo_ok && hi_ok && elapsed < 120.0,
        format!("window [{lo:.3}, {hi:.3}] vs [1/3, 1] +-15%, contiguous {contiguous}, {elapsed:.1} s"),
    )
}

fn c7_splitting() -> Outcome {
    let at = |n: usize| {
        floquet::analyze(&qae(n).with_omega_over_delta(0.7), 1000, &ClassifyThresholds::for_size(n)).unwrap()
    };
    let (s4, s80) = (at(4), at(80));
    let unit = PI / s4.period;
    let split4 = floquet::pi_splitting(&s4).unwrap() / unit;
    let split80 = floquet::pi_splitting(&s80).unwrap() / unit;
    let gap4 = floquet::pi_gap(&s4).unwrap() / unit;
    (
        split4 > 10.0 * split80 && split4 < gap4,
        format!("splitting N=4 {split4:.4}, N=80 {split80:.2e}, gap N=4 {gap4:.4} (units of pi/period)"),
    )
}

fn c8_ae_dynamics() -> Outcome {
    let cfg = ExperimentConfig::new(LatticeConfig::ssh(4, 0.042, 0.02), 1).with_length(800.0);
    let run = experiments::run_propagation_experiment(&cfg).unwrap();
    let z_star = eliminate::two_level_transfer_length(0.022, 0.062).unwrap();
    let (lo, hi) = (0.9 * z_star, 1.1 * z_star);
    let mut best = (0.0f64, 0.0f64);
    for (z, s) in run.record.z_samples.iter().zip(&run.record.states) {
        let i4 = s.amplitudes[3].norm_sqr();
        if *z >= lo && *z <= hi && i4 > best.0 {
            best = (i4, *z);
        }
    }
    let leak = run.report.max_inner_leakage;
    (
        best.0 > 0.8 && leak < 0.15,
        format!(
            "z* = {z_star:.1} mm; max I_4 in [{lo:.0}, {hi:.0}] = {:.3} at z = {:.0}; global peak {:.3} at z = {:.0}; leakage {leak:.3} (need > 0.8 and < 0.15)",
            best.0, best.1, run.report.outer_transfer_peak, run.report.peak_z
        ),
    )
}

fn c9_gauge_grid() -> Outcome {
    let lat = qae(4).with_omega_over_delta(0.45);
    let cfg = ExperimentConfig::new(lat, 1).with_periods(3);
    let g = experiments::run_gauge_experiment(&cfg).unwrap();
    let cells: Vec<String> = g
        .cells
        .iter()
        .map(|c| {
            let r = &c.outcome.report;
            format!(
                "({},{}) leak {:.2} transfer {:.2} -> {}",
                if c.gauge == 0.0 { "0" } else { "pi" },
                c.input_site,
                r.max_inner_leakage,
                r.outer_transfer_peak,
                r.eliminated
            )
        })
        .collect();
    let (a, b) = (&g.cells[0].outcome.report, &g.cells[3].outcome.report);
    let symmetric = (a.max_inner_leakage - b.max_inner_leakage).abs() <= 0.05
        && (a.outer_transfer_peak - b.outer_transfer_peak).abs() <= 0.05;
    let margin = g.expected_margin();
    (
        g.matches_expected() && margin >= 0.1,
        format!(
            "flags {:?} vs {:?}, margin {margin:.3}; {}; (0,1)~(pi,2) symmetric {symmetric}",
            g.flags(),
            GaugeOutcome::<f64>::EXPECTED,
            cells.join("; ")
        ),
    )
}

fn random_hermitian(rng: &mut StdRng, n: usize) -> DMatrix<Complex<f64>> {
    let mut h = DMatrix::from_fn(n, n, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    h = &h + h.adjoint();
    // Diagonal shift on the eliminated block keeps it well conditioned.
    for i in 2..n {
        h[(i, i)] += Complex::new(4.0 * n as f64, 0.0);
    }
    h
}

fn c10_properties() -> Outcome {
    let start = Instant::now();
    let mut notes = Vec::new();
    let mut all = true;
    let mut check = |name: &str, ok: bool, detail: String| {
        all &= ok;
        notes.push(format!("{name} {} ({detail})", if ok { "ok" } else { "FAILED" }));
    };

    let cfg = qae(6).with_omega_over_delta(0.6);
    let input = StateVector::site(6, 0);
    let rec = evolve::propagate(&cfg, &input, 3.0 * cfg.period, cfg.period / 1000.0).unwrap();
    let drift = rec.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
    let mono = evolve::monodromy(&cfg).unwrap();
    let udev = linalg::unitarity_deviation(&mono.matrix);
    check("unitarity", drift < 1e-9 && udev < 1e-9, format!("norm drift {drift:.1e}, U^H U {udev:.1e}"));

    let reference = evolve::evolution_operator(&cfg, 0.0, cfg.period, 6400).unwrap();
    let err = |steps| linalg::operator_norm(&(evolve::evolution_operator(&cfg, 0.0, cfg.period, steps).unwrap() - &reference));
    let (e1, e2, e3) = (err(50), err(100), err(200));
    let (r1, r2) = (e1 / e2, e2 / e3);
    check(
        "second order",
        (r1 - 4.0).abs() <= 0.5 && (r2 - 4.0).abs() <= 0.5,
        format!("error ratios {r1:.3}, {r2:.3}"),
    );

    let spec = floquet::quasienergies(&mono).unwrap();
    let idem = spec.modes.iter().all(|m| floquet::fold_quasienergy(m.quasienergy, spec.period) == m.quasienergy);
    let mut rng = StdRng::seed_from_u64(10);
    let idem_random = (0..1000).all(|_| {
        let e: f64 = rng.random_range(-50.0..50.0);
        let f = floquet::fold_quasienergy(e, 7.0);
        floquet::fold_quasienergy(f, 7.0) == f && f > -PI / 7.0 && f <= PI / 7.0
    });
    check("folding idempotence", idem && idem_random, "spectrum + 1000 random values".into());

    let mut eps: Vec<f64> = spec.modes.iter().map(|m| m.quasienergy).collect();
    eps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let chiral = eps
        .iter()
        .map(|&e| eps.iter().map(|&f| floquet::circular_distance(e, -f, spec.period)).fold(f64::MAX, f64::min))
        .fold(0.0, f64::max);
    check("chiral symmetry", chiral < 1e-7, format!("max pairing mismatch {chiral:.1e}"));

    let gauge = (0..16)
        .map(|k| model::gauge_shift_identity_check(&cfg, k as f64 * cfg.period / 16.0).unwrap())
        .fold(0.0, f64::max);
    check("gauge identity", gauge < 1e-15, format!("max deviation {gauge:.1e}"));

    let mut rng = StdRng::seed_from_u64(11);
    let mut schur = 0.0f64;
    for trial in 0..100 {
        let n = 4 + trial % 5;
        let h = random_hermitian(&mut rng, n);
        let part = SubspacePartition::new(n, &[0, 1]).unwrap();
        let eff = eliminate::project_effective(&h, &part).unwrap();
        let (p, q): (Vec<usize>, Vec<usize>) = ((0..2).collect(), (2..n).collect());
        let blk = |r: &[usize], c: &[usize]| DMatrix::from_fn(r.len(), c.len(), |i, j| h[(r[i], c[j])]);
        let inv = blk(&q, &q).try_inverse().unwrap();
        let oracle = blk(&p, &p) - blk(&p, &q) * inv * blk(&q, &p);
        schur = schur.max(linalg::max_modulus(&(eff.matrix - oracle)));
    }
    check("Schur oracle", schur < 1e-12, format!("100 matrices, max deviation {schur:.1e}"));

    let base = hfle().with_gauge(PI / 2.0);
    let ratios: Vec<f64> = {
        let l8 = base.with_omega_over_delta(8.0).period;
        let n8 = (400.0 / l8).round() as usize;
        let errs: Vec<f64> = [(8.0, n8), (16.0, 2 * n8), (32.0, 4 * n8)]
            .iter()
            .map(|&(x, n)| eliminate::averaged_evolution_error(&base.with_omega_over_delta(x), n, 400).unwrap())
            .collect();
        errs.windows(2).map(|w| w[0] / w[1]).collect()
    };
    check(
        "HFLE error halving",
        ratios.iter().all(|&r| r >= 1.8),
        format!("error ratios per omega doubling {:.2}, {:.2}", ratios[0], ratios[1]),
    );

    let elapsed = start.elapsed().as_secs_f64();
    check("runtime", elapsed < 300.0, format!("{elapsed:.1} s"));
    (all, notes.join("; "))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("HFLE condition number", c1_hfle_ratio),
        ("AE condition number", c2_ae_ratio),
        ("QAE diagnosis", c3_qae_diagnosis),
        ("four-site closed form", c4_closed_form),
        ("effective-coupling decay law", c5_decay_law),
        ("N=80 pi-mode window", c6_window),
        ("pi splitting vs size", c7_splitting),
        ("AE dynamics", c8_ae_dynamics),
        ("gauge grid", c9_gauge_grid),
        ("property suites", c10_properties),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (ok, detail) = f();
        passed += ok as usize;
        println!("[{}] {:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed != criteria.len() {
        std::process::exit(1);
    }
}
