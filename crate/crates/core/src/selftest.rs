//! Built-in invariant suite behind `vwit selftest`.
//!
//! Every check reports the measured quantity next to its tolerance, so a
//! pass shows how much headroom it had.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cofactor::SmallMatrix;
use crate::montecarlo::{simulate_counts, ExperimentPlan};
use crate::qubit::{make_s, make_s_theta};
use crate::witness::{default_angles, ideal_prob_matrix, witness_sigma, AngleConfig, ProbMatrix};

const SEED: u64 = 0x5e1f_7e57;
const RANDOM_ANGLE_SETS: usize = 200;
const CALIBRATION_RUNS: u64 = 400;
const CALIBRATION_T: u64 = 10_000;

#[derive(Clone, Copy, Debug, Default)]
pub struct SelftestOptions {
    /// Debug hook: negate every determinant the suite computes. The suite
    /// must then fail.
    pub tamper_det_sign: bool,
}

#[derive(Clone, Debug)]
pub struct Check {
    pub name: &'static str,
    /// Worst observed deviation.
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.measured <= self.tolerance
    }

    pub fn margin(&self) -> f64 {
        self.tolerance - self.measured
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} measured {:.3e}  tolerance {:.1e}  margin {:+.3e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.margin()
        )
    }
}

#[derive(Clone, Debug)]
pub struct SelftestSummary {
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl SelftestSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

struct Suite {
    sign: f64,
    rng: ChaCha8Rng,
}

impl Suite {
    fn det(&self, m: &SmallMatrix) -> f64 {
        self.sign * m.determinant()
    }

    fn random_angles(&mut self) -> AngleConfig {
        let beta = std::array::from_fn(|_| self.rng.random_range(-PI..PI));
        let phi = std::array::from_fn(|_| self.rng.random_range(-PI..PI));
        AngleConfig::new(beta, phi).expect("finite")
    }

    fn unitarity(&mut self) -> Check {
        let mut worst = make_s().unitarity_error();
        for i in 0..=64 {
            let theta = -2.0 * PI + i as f64 * PI / 16.0;
            worst = worst.max(make_s_theta(theta).unitarity_error());
        }
        Check { name: "unitarity", measured: worst, tolerance: 1e-12 }
    }

    fn det_null(&mut self) -> Check {
        let mut worst = self.det(&ideal_prob_matrix(&default_angles()).to_matrix()).abs();
        for _ in 0..RANDOM_ANGLE_SETS {
            let a = self.random_angles();
            worst = worst.max(self.det(&ideal_prob_matrix(&a).to_matrix()).abs());
        }
        Check { name: "det_null", measured: worst, tolerance: 1e-12 }
    }

    fn row_shift(&mut self) -> Check {
        let mut worst: f64 = 0.0;
        for _ in 0..RANDOM_ANGLE_SETS {
            let a = self.random_angles();
            let shifts: [f64; 4] = std::array::from_fn(|_| self.rng.random_range(-1.0..1.0));
            let f = ideal_prob_matrix(&a);
            // adding c times the ones row to a measured row keeps det
            let g = ProbMatrix::from_affine_rows(f.map_rows(|k, v| v + shifts[k])).expect("finite");
            let (d0, d1) = (self.det(&f.to_matrix()), self.det(&g.to_matrix()));
            worst = worst.max((d0 - d1).abs());
        }
        Check { name: "row_shift_invariance", measured: worst, tolerance: 1e-12 }
    }

    fn adjugate_identity(&mut self) -> Check {
        let mut worst: f64 = 0.0;
        for _ in 0..RANDOM_ANGLE_SETS {
            let m = SmallMatrix::from_fn(5, |_, _| self.rng.random_range(-1.0..1.0));
            let lhs = m.mul(&m.adjugate());
            let d = self.det(&m);
            let rhs = SmallMatrix::from_fn(5, |i, j| if i == j { d } else { 0.0 });
            worst = worst.max(lhs.max_abs_diff(&rhs));
        }
        Check { name: "adjugate_identity", measured: worst, tolerance: 1e-12 }
    }

    fn identity_det(&mut self) -> Check {
        let d = self.det(&SmallMatrix::identity(5));
        Check { name: "det_identity", measured: (d - 1.0).abs(), tolerance: 1e-15 }
    }

    fn sigma_calibration(&mut self) -> Check {
        let angles = default_angles();
        let ws: Vec<f64> = (0..CALIBRATION_RUNS)
            .map(|seed| {
                let plan = ExperimentPlan::ideal(1, CALIBRATION_T, 1, SEED ^ seed);
                let counts = simulate_counts(&plan).expect("valid plan");
                self.det(&counts[0].empirical_f().expect("nonempty").to_matrix())
            })
            .collect();
        let n = ws.len() as f64;
        let mean = ws.iter().sum::<f64>() / n;
        let sd = (ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let analytic = witness_sigma(&ideal_prob_matrix(&angles), CALIBRATION_T).expect("T > 0");
        Check {
            name: "sigma_calibration",
            measured: (sd / analytic - 1.0).abs(),
            // about 4 standard errors of a 400-sample sd
            tolerance: 0.15,
        }
    }
}

pub fn run_selftest(options: SelftestOptions) -> SelftestSummary {
    let start = Instant::now();
    let mut suite = Suite {
        sign: if options.tamper_det_sign { -1.0 } else { 1.0 },
        rng: ChaCha8Rng::seed_from_u64(SEED),
    };
    let checks = vec![
        suite.unitarity(),
        suite.det_null(),
        suite.row_shift(),
        suite.adjugate_identity(),
        suite.identity_det(),
        suite.sigma_calibration(),
    ];
    SelftestSummary { checks, seconds: start.elapsed().as_secs_f64() }
}
