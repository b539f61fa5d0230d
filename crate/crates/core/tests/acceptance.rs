//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Seeds are fixed, so every run reproduces the same numbers.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viviani_witness::io::CountsDocument;
use viviani_witness::montecarlo::{
    simulate_counts, DriftKind, DriftSpec, DriftTarget, ExperimentPlan,
};
use viviani_witness::noise::{constant_leakage, LeakageModel, LeakageSpec, NoiseModel, NoiseSpec};
use viviani_witness::optimizer::{optimize_angles, sensitivity, Constraint};
use viviani_witness::qubit::{measurement_effect, ComplexMatrix, DensityState};
use viviani_witness::report::{build_report, Outcome, ReportDocument, Verdict};
use viviani_witness::witness::{
    default_angles, determinant, ideal_prob_matrix, witness_sigma, AngleConfig,
};

struct Finding {
    passed: bool,
    detail: String,
}

fn finding(passed: bool, detail: String) -> Finding {
    Finding { passed, detail }
}

fn random_angles(rng: &mut ChaCha8Rng) -> AngleConfig {
    AngleConfig::new(
        std::array::from_fn(|_| rng.random_range(-PI..PI)),
        std::array::from_fn(|_| rng.random_range(-PI..PI)),
    )
    .unwrap()
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn report_for(plan: &ExperimentPlan) -> ReportDocument {
    let doc = CountsDocument::new("acceptance", plan.angle_config, simulate_counts(plan).unwrap(), None);
    build_report(&doc, None, 5.0).unwrap()
}

fn null_witness() -> Finding {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = determinant(&ideal_prob_matrix(&default_angles())).abs();
    for _ in 0..1000 {
        worst = worst.max(determinant(&ideal_prob_matrix(&random_angles(&mut rng))).abs());
    }
    finding(worst < 1e-12, format!("max |det F| = {worst:.2e} over 1001 angle sets (tol 1e-12)"))
}

fn noiseless_consistency() -> Finding {
    let t = 1_000_000;
    let sigma = witness_sigma(&ideal_prob_matrix(&default_angles()), t).unwrap();
    let single = |seed: u64| {
        let plan = ExperimentPlan::ideal(1, 100_000, 10, seed);
        determinant(&simulate_counts(&plan).unwrap()[0].empirical_f().unwrap())
    };
    let w0 = single(2_000);
    let ws: Vec<f64> = (0..50).map(|s| single(2_000 + s)).collect();
    let ratio = sd(&ws) / sigma;
    finding(
        w0.abs() <= 4.0 * sigma && (ratio - 1.0).abs() <= 0.1,
        format!(
            "W = {w0:+.3e}, |W|/sigma = {:.2} (<= 4); empirical/analytic sigma over 50 seeds = {ratio:.4} (within 10%)",
            w0.abs() / sigma
        ),
    )
}

fn variance_calibration() -> Finding {
    let t = 10_000;
    let sigma = witness_sigma(&ideal_prob_matrix(&default_angles()), t).unwrap();
    let ws: Vec<f64> = (0..200)
        .map(|s| {
            let plan = ExperimentPlan::ideal(1, t, 1, 3_000 + s);
            determinant(&simulate_counts(&plan).unwrap()[0].empirical_f().unwrap())
        })
        .collect();
    let ratio = sd(&ws) / sigma;
    finding(
        (0.9..=1.1).contains(&ratio),
        format!("empirical/analytic sigma over 200 runs at T = 1e4: {ratio:.4} (in [0.9, 1.1])"),
    )
}

fn random_density3(rng: &mut ChaCha8Rng) -> DensityState {
    // A A^dagger / tr, a full-rank state
    let a: Vec<Complex64> = (0..9)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut m = ComplexMatrix::zeros(3);
    for i in 0..3 {
        for j in 0..3 {
            m[(i, j)] = (0..3).map(|l| a[i * 3 + l] * a[j * 3 + l].conj()).sum();
        }
    }
    let tr = m.trace().re;
    DensityState::new(m.scale(Complex64::new(1.0 / tr, 0.0))).unwrap()
}

fn leakage_invariance() -> Finding {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let a = if i == 0 { default_angles() } else { random_angles(&mut rng) };
        let weight = rng.random_range(0.0..=0.3);
        let model = LeakageModel::constant(weight, random_density3(&mut rng)).unwrap();
        let f = ideal_prob_matrix(&a);
        let shifted = constant_leakage(&f, &model, &a.phi.map(measurement_effect)).unwrap();
        let circuit = NoiseModel { leakage: Some(model), ..NoiseModel::ideal() }.prob_matrix(&a);
        let d0 = determinant(&f);
        worst = worst
            .max((determinant(&shifted) - d0).abs())
            .max((determinant(&circuit) - d0).abs());
    }
    finding(worst < 1e-10, format!("max |delta det F| = {worst:.2e} over 100 draws (tol 1e-10)"))
}

fn scheme_agreement() -> Finding {
    let agree = (0..100)
        .filter(|s| {
            let r = report_for(&ExperimentPlan::ideal(20, 10_000, 1, 5_000 + s));
            let wi = r.scheme_i.unwrap();
            (wi.w - r.scheme_ii.w).abs() <= 2.0 * wi.sigma.max(r.scheme_ii.sigma)
        })
        .count();
    finding(agree >= 95, format!("{agree}/100 seeds with |W_i - W_ii| <= 2 max(sigma) (need 95)"))
}

fn leaky_plan(coupling: f64, seed: u64) -> ExperimentPlan {
    let mut plan = ExperimentPlan::ideal(1, 1_000_000, 10, seed);
    plan.noise = NoiseSpec {
        leakage: Some(LeakageSpec::ParameterDependent { coupling }),
        ..NoiseSpec::default()
    };
    plan
}

fn detection_power() -> Finding {
    let detected = (0..100)
        .filter(|s| {
            let r = report_for(&leaky_plan(0.15, 6_000 + s));
            r.verdict.outcome == Outcome::Fail && r.scheme_ii.abs_z() >= 5.0
        })
        .count();
    let worst_null = (0..200)
        .map(|s| report_for(&leaky_plan(0.0, 7_000 + s)).scheme_ii.abs_z())
        .fold(0.0, f64::max);
    finding(
        detected >= 95 && worst_null <= 4.0,
        format!(
            "eps = 0.15: {detected}/100 fail at >= 5 sigma (need 95); eps = 0: max |z| = {worst_null:.2} over 200 seeds (<= 4)"
        ),
    )
}

/// Tuned random-walk drift, radians per job.
const DRIFT_MAGNITUDE: f64 = 0.25;

fn drift_signature(magnitude: f64, seed: u64) -> bool {
    let mut plan = ExperimentPlan::ideal(20, 5_000, 1, seed);
    if magnitude > 0.0 {
        plan.drift = Some(DriftSpec {
            kind: DriftKind::RandomWalk,
            magnitude,
            target: DriftTarget::Both,
        });
    }
    let r = report_for(&plan);
    let wi = r.scheme_i.unwrap();
    let beyond = r.per_job_w.iter().any(|j| (j.w / j.sigma).abs() > 10.0);
    let differs = (wi.w - r.scheme_ii.w).abs() > 2.0 * wi.sigma.max(r.scheme_ii.sigma);
    beyond && differs
}

fn drift() -> Finding {
    let with = (0..100).filter(|s| drift_signature(DRIFT_MAGNITUDE, 8_000 + s)).count();
    let without = (0..100).filter(|s| drift_signature(0.0, 8_000 + s)).count();
    finding(
        with > 50 && without == 0,
        format!(
            "random walk {DRIFT_MAGNITUDE} rad/job: signature in {with}/100 seeds (need majority); no drift: {without}/100 (need 0)"
        ),
    )
}

fn hardware_arithmetic() -> Finding {
    let v = Verdict::from_summary(-29.8e-5, 2.3e-5, 5.0);
    let z = v.z.unwrap_or(f64::NAN);
    finding(
        v.outcome == Outcome::Fail && (z + 12.96).abs() <= 0.05,
        format!("verdict {v}, z = {z:.4} (target -12.96 +- 0.05)"),
    )
}

fn optimizer_contract() -> Finding {
    let floor = sensitivity(&default_angles()).adj_frobenius - 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let reached: Vec<f64> = (0..10)
        .map(|_| {
            let init = AngleConfig::paired(std::array::from_fn(|_| rng.random_range(-PI..PI))).unwrap();
            optimize_angles(&init, 10_000, Constraint::VivianiPaired).adj_frobenius
        })
        .collect();
    let worst = reached.iter().copied().fold(f64::INFINITY, f64::min);
    finding(
        worst >= floor,
        format!("worst of 10 runs = {worst:.6}, floor = {floor:.6}"),
    )
}

type Criterion = (&'static str, fn() -> Finding, Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("null-witness exactness", null_witness, Duration::from_secs(1)),
        ("noiseless consistency", noiseless_consistency, Duration::from_secs(120)),
        ("variance calibration", variance_calibration, Duration::from_secs(60)),
        ("constant-leakage invariance", leakage_invariance, Duration::from_secs(1)),
        ("scheme agreement", scheme_agreement, Duration::from_secs(120)),
        ("detection power", detection_power, Duration::from_secs(300)),
        ("drift signature", drift, Duration::from_secs(300)),
        ("hardware-report arithmetic", hardware_arithmetic, Duration::from_secs(1)),
        ("optimizer contract", optimizer_contract, Duration::from_secs(60)),
    ];
    let mut failures = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let passed = o.passed && elapsed <= *limit;
        failures += usize::from(!passed);
        println!(
            "{} {}. {name}: {} [{:.2} s, limit {} s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
