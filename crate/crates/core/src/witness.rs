//! The 5x5 probability matrix, the determinant witness and its error bar.
//!
//! Rows `k = 1..4` hold `p(M_k | P_j)` for the four measurement angles, row 5
//! is all ones. For any two-level system the rows live in a four-dimensional
//! affine space, so `W = det F` vanishes; a statistically significant nonzero
//! value points at extra levels or at correlated preparation and measurement.
//!
//! Indices are zero-based in code and one-based in files and messages.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::cofactor::SmallMatrix;
use crate::error::{Error, Result};
use crate::montecarlo::{pool_cells, JobCounts};
use crate::qubit::{born_probability, measurement_effect, prepare};

pub const N_PREP: usize = 5;
pub const N_MEAS: usize = 4;

/// Five preparation angles and four measurement angles, in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAngles")]
pub struct AngleConfig {
    pub beta: [f64; N_PREP],
    pub phi: [f64; N_MEAS],
}

#[derive(Deserialize)]
struct RawAngles {
    beta: [f64; N_PREP],
    phi: [f64; N_MEAS],
}

impl TryFrom<RawAngles> for AngleConfig {
    type Error = Error;
    fn try_from(raw: RawAngles) -> Result<Self> {
        AngleConfig::new(raw.beta, raw.phi)
    }
}

impl AngleConfig {
    pub fn new(beta: [f64; N_PREP], phi: [f64; N_MEAS]) -> Result<Self> {
        for &a in beta.iter().chain(&phi) {
            if !a.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "angle",
                    value: a,
                    reason: "must be finite",
                });
            }
        }
        Ok(Self { beta, phi })
    }

    /// Measurement angles mirrored from the first four preparations, `phi_k = -beta_k`.
    pub fn paired(beta: [f64; N_PREP]) -> Result<Self> {
        Self::new(beta, [-beta[0], -beta[1], -beta[2], -beta[3]])
    }

    /// Same configuration with every angle wrapped into `(-pi, pi]`.
    pub fn wrapped(&self) -> Self {
        Self {
            beta: self.beta.map(wrap_angle),
            phi: self.phi.map(wrap_angle),
        }
    }

    /// Adds common offsets to all preparation and measurement angles.
    pub fn offset(&self, beta_offset: f64, phi_offset: f64) -> Self {
        Self {
            beta: self.beta.map(|b| b + beta_offset),
            phi: self.phi.map(|p| p + phi_offset),
        }
    }
}

impl Default for AngleConfig {
    fn default() -> Self {
        default_angles()
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// `beta = {pi/4, -pi/4, 3pi/4, -3pi/4, 0}`, `phi_k = -beta_k`.
pub fn default_angles() -> AngleConfig {
    let beta = [FRAC_PI_4, -FRAC_PI_4, 3.0 * FRAC_PI_4, -3.0 * FRAC_PI_4, 0.0];
    AngleConfig {
        beta,
        phi: [-beta[0], -beta[1], -beta[2], -beta[3]],
    }
}

/// Probability matrix with a final row of ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<[f64; 5]>", try_from = "Vec<[f64; 5]>")]
pub struct ProbMatrix {
    rows: [[f64; N_PREP]; N_MEAS],
}

impl ProbMatrix {
    /// Rows must be finite probabilities.
    pub fn new(rows: [[f64; N_PREP]; N_MEAS]) -> Result<Self> {
        for (k, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry (k={}, j={}) = {v} outside [0, 1]",
                        k + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Rows need only be finite. Used for affine bookkeeping (leakage shifts)
    /// where entries can leave the probability range.
    pub fn from_affine_rows(rows: [[f64; N_PREP]; N_MEAS]) -> Result<Self> {
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite probability entry".into()));
        }
        Ok(Self { rows })
    }

    /// Entry `F[k][j]`; `k == 4` is the ones row.
    pub fn get(&self, k: usize, j: usize) -> f64 {
        if k == N_MEAS {
            1.0
        } else {
            self.rows[k][j]
        }
    }

    pub fn measured_rows(&self) -> &[[f64; N_PREP]; N_MEAS] {
        &self.rows
    }

    pub fn to_matrix(&self) -> SmallMatrix {
        SmallMatrix::from_fn(5, |k, j| self.get(k, j))
    }

    pub fn to_rows(&self) -> [[f64; 5]; 5] {
        std::array::from_fn(|k| std::array::from_fn(|j| self.get(k, j)))
    }

    pub fn map_rows(&self, mut f: impl FnMut(usize, f64) -> f64) -> [[f64; N_PREP]; N_MEAS] {
        std::array::from_fn(|k| std::array::from_fn(|j| f(k, self.rows[k][j])))
    }
}

impl From<ProbMatrix> for Vec<[f64; 5]> {
    fn from(m: ProbMatrix) -> Self {
        m.to_rows().to_vec()
    }
}

impl TryFrom<Vec<[f64; 5]>> for ProbMatrix {
    type Error = Error;
    fn try_from(rows: Vec<[f64; 5]>) -> Result<Self> {
        if rows.len() != 5 {
            return Err(Error::Document(format!(
                "probability matrix needs 5 rows, got {}",
                rows.len()
            )));
        }
        if rows[4].iter().any(|&v| v != 1.0) {
            return Err(Error::Document(
                "probability matrix row 5 must be all ones".into(),
            ));
        }
        Self::from_affine_rows([rows[0], rows[1], rows[2], rows[3]])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Determinant per job, then averaged.
    PerJob,
    /// Counts pooled across jobs, one determinant.
    Pooled,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub w: f64,
    pub sigma: f64,
    /// `w / sigma`; absent when `sigma == 0`.
    pub z: Option<f64>,
    pub scheme: Scheme,
    /// Samples per cell behind the estimate.
    pub t_total: u64,
}

impl WitnessResult {
    pub fn new(w: f64, sigma: f64, scheme: Scheme, t_total: u64) -> Self {
        let z = (sigma > 0.0).then(|| w / sigma);
        Self {
            w,
            sigma,
            z,
            scheme,
            t_total,
        }
    }

    /// `|z|`, infinite for a nonzero witness with vanishing sigma.
    pub fn abs_z(&self) -> f64 {
        match self.z {
            Some(z) => z.abs(),
            None if self.w == 0.0 => 0.0,
            None => f64::INFINITY,
        }
    }
}

/// `p(M_phi | P_beta)` for the noiseless qubit circuit.
pub fn ideal_probability(beta: f64, phi: f64) -> f64 {
    born_probability(&measurement_effect(phi), &prepare(beta))
        .expect("qubit effect and state share dimension")
}

pub fn ideal_prob_matrix(angles: &AngleConfig) -> ProbMatrix {
    let states = angles.beta.map(prepare);
    let effects = angles.phi.map(measurement_effect);
    let rows = std::array::from_fn(|k| {
        std::array::from_fn(|j| {
            born_probability(&effects[k], &states[j]).expect("qubit dimensions match")
        })
    });
    ProbMatrix { rows }
}

/// `W = det F` by cofactor expansion.
pub fn determinant(f: &ProbMatrix) -> f64 {
    f.to_matrix().determinant()
}

/// Adjugate of `F`, indexed `[j][k]`; well defined when `det F = 0`.
pub fn adjugate(f: &ProbMatrix) -> SmallMatrix {
    f.to_matrix().adjugate()
}

/// Shot-noise standard deviation of `W` with `t` samples in every cell:
/// `sigma^2 = sum_{k<=4, j} F_kj (1 - F_kj) Adj_jk^2 / t`.
pub fn witness_sigma(f: &ProbMatrix, t: u64) -> Result<f64> {
    if t == 0 {
        return Err(Error::ZeroExperiments);
    }
    witness_sigma_cells(f, &[[t; N_PREP]; N_MEAS])
}

/// Like [`witness_sigma`] with a separate sample count per cell.
pub fn witness_sigma_cells(f: &ProbMatrix, totals: &[[u64; N_PREP]; N_MEAS]) -> Result<f64> {
    let adj = adjugate(f);
    let mut var = 0.0;
    for (k, row) in totals.iter().enumerate() {
        for (j, &t) in row.iter().enumerate() {
            if t == 0 {
                return Err(Error::ZeroExperiments);
            }
            let p = f.get(k, j);
            let a = adj.get(j, k);
            var += p * (1.0 - p) * a * a / t as f64;
        }
    }
    Ok(var.max(0.0).sqrt())
}

/// Scheme (i): mean of per-job determinants with the empirical standard
/// error across jobs. Each entry is a job's matrix and its samples per cell.
pub fn analyze_per_job(jobs: &[(ProbMatrix, u64)]) -> Result<WitnessResult> {
    if jobs.len() < 2 {
        return Err(Error::TooFewJobs {
            needed: 2,
            found: jobs.len(),
        });
    }
    let ws: Vec<f64> = jobs.iter().map(|(f, _)| determinant(f)).collect();
    let n = ws.len() as f64;
    let mean = ws.iter().sum::<f64>() / n;
    let var = ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = (var / n).sqrt();
    let t_total = jobs.iter().map(|(_, t)| t).sum();
    Ok(WitnessResult::new(mean, sigma, Scheme::PerJob, t_total))
}

/// Scheme (ii): counts summed cell by cell across jobs, one determinant, and
/// the analytic sigma at the pooled per-cell totals.
pub fn analyze_pooled(jobs: &[JobCounts]) -> Result<WitnessResult> {
    if jobs.is_empty() {
        return Err(Error::TooFewJobs {
            needed: 1,
            found: 0,
        });
    }
    let pooled = pool_cells(jobs)?;
    let f = crate::montecarlo::empirical_f(&pooled)?;
    let totals = pooled.map(|row| row.map(|c| c.total));
    let sigma = witness_sigma_cells(&f, &totals)?;
    let t_total = totals.iter().flatten().sum::<u64>() / (N_PREP * N_MEAS) as u64;
    Ok(WitnessResult::new(determinant(&f), sigma, Scheme::Pooled, t_total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    #[test]
    fn default_angle_values() {
        let a = default_angles();
        assert_eq!(a.beta[4], 0.0);
        assert_eq!(a.phi[0], -FRAC_PI_4);
        for k in 0..4 {
            assert_eq!(-a.beta[k], a.phi[k]);
        }
    }

    #[test]
    fn ideal_entries() {
        let f = ideal_prob_matrix(&default_angles());
        assert!((f.get(0, 0) - 0.75).abs() < 1e-12);
        assert!(f.get(0, 2).abs() < 1e-12);
        assert!(f.get(1, 3).abs() < 1e-12);
        assert!((f.get(2, 4) - (1.0 - SQRT_2 / 2.0) / 2.0).abs() < 1e-12);
        assert!((0..5).all(|j| f.get(4, j) == 1.0));
    }

    #[test]
    fn ideal_determinant_vanishes() {
        assert!(determinant(&ideal_prob_matrix(&default_angles())).abs() < 1e-12);
    }

    #[test]
    fn sigma_degenerate_and_scaling() {
        let rows = [[1.0, 0.0, 1.0, 0.0, 1.0]; 4];
        let f = ProbMatrix::new(rows).unwrap();
        assert_eq!(witness_sigma(&f, 100).unwrap(), 0.0);

        let f = ideal_prob_matrix(&default_angles());
        let s1 = witness_sigma(&f, 1_000).unwrap();
        let s4 = witness_sigma(&f, 4_000).unwrap();
        assert!((s1 / s4 - 2.0).abs() < 1e-12);
        assert!(matches!(witness_sigma(&f, 0), Err(Error::ZeroExperiments)));
    }

    #[test]
    fn sigma_at_million_samples() {
        // Every adjugate entry of the ideal matrix is +-1/16 outside the last
        // row; the value lands on the published 9.9e-5 error bar.
        let f = ideal_prob_matrix(&default_angles());
        let s = witness_sigma(&f, 1_000_000).unwrap();
        assert!((s - 9.882117688026164e-5).abs() < 1e-15);
    }

    #[test]
    fn per_job_edge_cases() {
        let f = ideal_prob_matrix(&default_angles());
        assert!(matches!(
            analyze_per_job(&[(f, 10)]),
            Err(Error::TooFewJobs { .. })
        ));
        let r = analyze_per_job(&[(f, 10), (f, 10), (f, 10)]).unwrap();
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.w, determinant(&f));
        assert_eq!(r.t_total, 30);
        assert_eq!(r.scheme, Scheme::PerJob);
    }

    #[test]
    fn per_job_symmetric_values_cancel() {
        let mut plus = [[0.0; 5]; 4];
        for (k, row) in plus.iter_mut().enumerate() {
            row[k] = 1.0;
        }
        plus[0][4] = 0.5;
        // swapping two columns flips the sign of the determinant
        let minus = plus.map(|mut row| {
            row.swap(0, 1);
            row
        });
        let p = ProbMatrix::new(plus).unwrap();
        let m = ProbMatrix::new(minus).unwrap();
        let (wp, wm) = (determinant(&p), determinant(&m));
        assert!((wp - 0.5).abs() < 1e-15);
        assert!((wp + wm).abs() < 1e-15);
        let r = analyze_per_job(&[(p, 1), (m, 1)]).unwrap();
        assert!(r.w.abs() < 1e-15);
    }

    #[test]
    fn wrap_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.25), 0.25);
    }

    #[test]
    fn prob_matrix_validation() {
        let mut rows = [[0.5; 5]; 4];
        rows[2][3] = 1.5;
        assert!(ProbMatrix::new(rows).is_err());
        assert!(ProbMatrix::from_affine_rows(rows).is_ok());
        rows[2][3] = f64::NAN;
        assert!(ProbMatrix::from_affine_rows(rows).is_err());
    }

    #[test]
    fn z_sigma_consistency() {
        let r = WitnessResult::new(-29.8e-5, 2.3e-5, Scheme::Pooled, 1);
        assert!((r.z.unwrap() * r.sigma - r.w).abs() < 1e-12);
        let r = WitnessResult::new(1e-3, 0.0, Scheme::Pooled, 1);
        assert_eq!(r.z, None);
        assert_eq!(r.abs_z(), f64::INFINITY);
    }
}
