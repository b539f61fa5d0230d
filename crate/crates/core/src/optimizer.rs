//! Angle design: push the adjugate of the ideal `F` away from zero.
//!
//! The shot-noise variance of `W` is a weighted sum of squared adjugate
//! entries, so the adjugate's Frobenius norm measures how strongly a small
//! extra-dimensional contribution to `F` moves the witness. The search is a
//! coordinate-wise grid sweep followed by Nelder-Mead refinement with
//! restarts, all under a hard budget of objective evaluations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::witness::{
    adjugate, determinant, ideal_prob_matrix, witness_sigma, AngleConfig, N_MEAS, N_PREP,
};

/// Samples per cell used for `predicted_sigma_at_t`.
pub const REFERENCE_T: u64 = 1_000_000;
pub const GRID_POINTS: usize = 32;

const SIMPLEX_STEP: f64 = 0.2;
const MIN_SIMPLEX_STEP: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub angles: AngleConfig,
    /// Frobenius norm of `Adj F`; the search objective.
    pub adj_frobenius: f64,
    /// Smallest `|Adj_jk|` over the 20 entries with `k <= 4`, the ones that
    /// weight the error bar.
    pub adj_min_abs: f64,
    pub predicted_sigma_at_t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// All nine angles free.
    Free,
    /// Five free preparation angles, `phi_k = -beta_k`.
    VivianiPaired,
}

impl Constraint {
    fn dim(self) -> usize {
        match self {
            Constraint::Free => N_PREP + N_MEAS,
            Constraint::VivianiPaired => N_PREP,
        }
    }

    fn angles(self, x: &[f64]) -> AngleConfig {
        let beta: [f64; N_PREP] = std::array::from_fn(|j| x[j]);
        let phi = match self {
            Constraint::Free => std::array::from_fn(|k| x[N_PREP + k]),
            Constraint::VivianiPaired => std::array::from_fn(|k| -beta[k]),
        };
        AngleConfig { beta, phi }.wrapped()
    }

    fn params(self, a: &AngleConfig) -> Vec<f64> {
        match self {
            Constraint::Free => a.beta.iter().chain(&a.phi).copied().collect(),
            Constraint::VivianiPaired => a.beta.to_vec(),
        }
    }
}

pub fn sensitivity(angles: &AngleConfig) -> SensitivityReport {
    let f = ideal_prob_matrix(angles);
    let adj = adjugate(&f);
    let adj_min_abs = (0..N_PREP)
        .flat_map(|j| (0..N_MEAS).map(move |k| (j, k)))
        .map(|(j, k)| adj.get(j, k).abs())
        .fold(f64::INFINITY, f64::min);
    SensitivityReport {
        angles: *angles,
        adj_frobenius: adj.frobenius_norm(),
        adj_min_abs,
        predicted_sigma_at_t: witness_sigma(&f, REFERENCE_T).expect("reference T is positive"),
    }
}

/// Result of a traced search.
#[derive(Clone, Debug)]
pub struct Optimization {
    pub report: SensitivityReport,
    pub evaluations: usize,
    /// Best objective after each evaluation.
    pub best_trace: Vec<f64>,
    /// Largest `|det F|` over every evaluated candidate.
    pub max_abs_det: f64,
}

struct Search {
    constraint: Constraint,
    budget: usize,
    evaluations: usize,
    best_x: Vec<f64>,
    best_value: f64,
    best_angles: AngleConfig,
    best_trace: Vec<f64>,
    max_abs_det: f64,
}

impl Search {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    fn record(&mut self, angles: AngleConfig, x: Option<&[f64]>) -> Option<f64> {
        if self.exhausted() {
            return None;
        }
        self.evaluations += 1;
        let f = ideal_prob_matrix(&angles);
        self.max_abs_det = self.max_abs_det.max(determinant(&f).abs());
        let value = adjugate(&f).frobenius_norm();
        // strict improvement only: the first maximum found wins ties
        if value > self.best_value {
            self.best_value = value;
            self.best_angles = angles;
            if let Some(x) = x {
                self.best_x = x.to_vec();
            }
        }
        self.best_trace.push(self.best_value);
        Some(value)
    }

    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        let angles = self.constraint.angles(x);
        self.record(angles, Some(x))
    }

    fn sweep(&mut self) {
        let grid: Vec<f64> = (1..=GRID_POINTS)
            .map(|g| -PI + g as f64 * 2.0 * PI / GRID_POINTS as f64)
            .collect();
        loop {
            let before = self.best_value;
            for i in 0..self.constraint.dim() {
                let base = self.best_x.clone();
                for &g in &grid {
                    let mut x = base.clone();
                    x[i] = g;
                    if self.eval(&x).is_none() {
                        return;
                    }
                }
            }
            if self.best_value <= before {
                return;
            }
        }
    }

    /// Minimizes `-objective` from the current best point. Returns whether
    /// the best value improved.
    fn nelder_mead(&mut self, step: f64) -> bool {
        let start_value = self.best_value;
        let n = self.constraint.dim();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        let anchor = self.best_x.clone();
        let Some(v) = self.eval(&anchor) else {
            return false;
        };
        simplex.push((anchor, -v));
        for i in 0..n {
            let mut x = self.best_x.clone();
            x[i] += step;
            let Some(v) = self.eval(&x) else {
                return self.best_value > start_value;
            };
            simplex.push((x, -v));
        }

        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread.abs() < 1e-15 && size < MIN_SIMPLEX_STEP {
                break;
            }

            let centroid: Vec<f64> = (0..n)
                .map(|d| simplex[..n].iter().map(|(x, _)| x[d]).sum::<f64>() / n as f64)
                .collect();
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst = simplex[n].0.clone();

            let xr = along(1.0, &worst);
            let Some(fr) = self.eval(&xr).map(|v| -v) else { break };
            if fr < simplex[0].1 {
                let xe = along(2.0, &worst);
                let Some(fe) = self.eval(&xe).map(|v| -v) else { break };
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(0.5, &worst);
                let Some(v) = self.eval(&xc) else { break };
                (xc, -v)
            } else {
                let xc = along(-0.5, &worst);
                let Some(v) = self.eval(&xc) else { break };
                (xc, -v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            // shrink toward the best vertex
            let best = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x: Vec<f64> = best
                    .iter()
                    .zip(&vertex.0)
                    .map(|(b, v)| b + 0.5 * (v - b))
                    .collect();
                let Some(v) = self.eval(&x) else {
                    return self.best_value > start_value;
                };
                *vertex = (x, -v);
            }
        }
        self.best_value > start_value
    }
}

/// Like [`optimize_angles`], also returning the evaluation trace.
pub fn optimize_angles_traced(
    init: &AngleConfig,
    budget: usize,
    constraint: Constraint,
) -> Optimization {
    let mut search = Search {
        constraint,
        budget: budget.max(1),
        evaluations: 0,
        best_x: constraint.params(init),
        best_value: f64::NEG_INFINITY,
        best_angles: init.wrapped(),
        best_trace: Vec::new(),
        max_abs_det: 0.0,
    };
    // the initial configuration is the baseline, as given
    search.record(init.wrapped(), None);

    search.sweep();
    let mut step = SIMPLEX_STEP;
    while !search.exhausted() && step >= MIN_SIMPLEX_STEP {
        if !search.nelder_mead(step) {
            step *= 0.5;
        }
    }

    Optimization {
        report: sensitivity(&search.best_angles),
        evaluations: search.evaluations,
        best_trace: search.best_trace,
        max_abs_det: search.max_abs_det,
    }
}

/// Best configuration found within `budget` objective evaluations; never
/// worse than `init`.
pub fn optimize_angles(init: &AngleConfig, budget: usize, constraint: Constraint) -> SensitivityReport {
    optimize_angles_traced(init, budget, constraint).report
}
