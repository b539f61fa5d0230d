//! Shot-level simulation of the experimental protocol.
//!
//! A job runs every one of the 20 circuits `shots * repetitions` times. Shots
//! are independent, so each cell is drawn as a single exact binomial; the
//! shuffled circuit order is kept as metadata and, when drift is enabled,
//! decides when each circuit sees the drifting gate angles.
//!
//! # Random streams
//!
//! Every random draw comes from ChaCha8 seeded with `shuffle_seed`:
//!
//! * job `i` uses stream `i` (shuffle first, then one binomial per cell in
//!   row-major `(k, j)` order);
//! * the random-walk drift path uses stream [`DRIFT_STREAM`].
//!
//! Jobs are therefore reproducible one by one and can run in parallel.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::witness::{AngleConfig, ProbMatrix, N_MEAS, N_PREP};

pub const N_CELLS: usize = N_MEAS * N_PREP;
pub const DRIFT_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub successes: u64,
    pub total: u64,
}

/// Counts indexed `[k][j]`, measurement by preparation.
pub type CellGrid = [[CellCounts; N_PREP]; N_MEAS];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JobCounts {
    pub job_index: usize,
    pub cells: CellGrid,
    /// Execution order of the 20 `(k, j)` circuits, zero-based.
    pub circuit_order: Vec<(usize, usize)>,
    pub seed: u64,
}

impl JobCounts {
    pub fn empirical_f(&self) -> Result<ProbMatrix> {
        empirical_f(&self.cells).map_err(|e| match e {
            Error::EmptyCell { k, j, .. } => Error::EmptyCell {
                job: Some(self.job_index),
                k,
                j,
            },
            other => other,
        })
    }

    pub fn totals(&self) -> [[u64; N_PREP]; N_MEAS] {
        self.cells.map(|row| row.map(|c| c.total))
    }

    /// Per-cell sample count when all cells agree.
    pub fn uniform_total(&self) -> Option<u64> {
        let t = self.cells[0][0].total;
        self.cells.iter().flatten().all(|c| c.total == t).then_some(t)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    #[default]
    None,
    Linear,
    RandomWalk,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftTarget {
    Preparation,
    Measurement,
    #[default]
    Both,
}

/// Slow drift of the parameterized gate angles, in radians per job.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSpec {
    pub kind: DriftKind,
    pub magnitude: f64,
    #[serde(default)]
    pub target: DriftTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub jobs: u64,
    pub shots: u64,
    pub repetitions: u64,
    #[serde(default)]
    pub angle_config: AngleConfig,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub shuffle_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
}

impl ExperimentPlan {
    /// Noiseless plan at the default angles.
    pub fn ideal(jobs: u64, shots: u64, repetitions: u64, shuffle_seed: u64) -> Self {
        Self {
            jobs,
            shots,
            repetitions,
            angle_config: AngleConfig::default(),
            noise: NoiseSpec::default(),
            shuffle_seed,
            drift: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("jobs", self.jobs),
            ("shots", self.shots),
            ("repetitions", self.repetitions),
        ] {
            if v == 0 {
                return Err(Error::InvalidPlan(format!("{name} must be at least 1")));
            }
        }
        self.checked_t_total()
            .ok_or_else(|| Error::InvalidPlan("jobs * shots * repetitions overflows".into()))?;
        if let Some(d) = &self.drift {
            if !(d.magnitude.is_finite() && d.magnitude >= 0.0) {
                return Err(Error::InvalidPlan(format!(
                    "drift magnitude {} must be finite and non-negative",
                    d.magnitude
                )));
            }
        }
        self.noise.to_model()?;
        Ok(())
    }

    fn checked_t_total(&self) -> Option<u64> {
        self.jobs
            .checked_mul(self.shots)?
            .checked_mul(self.repetitions)
    }

    /// `T = jobs * shots * repetitions`, the samples per cell over all jobs.
    pub fn t_total(&self) -> u64 {
        self.jobs * self.shots * self.repetitions
    }

    pub fn samples_per_job(&self) -> u64 {
        self.shots * self.repetitions
    }
}

/// Exact binomial draw.
///
/// # Panics
///
/// If `p` lies outside `[0, 1]`.
pub fn binomial_sample<R: Rng + ?Sized>(p: f64, n: u64, rng: &mut R) -> u64 {
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    Binomial::new(n, p)
        .expect("valid binomial parameters")
        .sample(rng)
}

/// `successes / total` per cell, ones in the last row.
pub fn empirical_f(cells: &CellGrid) -> Result<ProbMatrix> {
    let mut rows = [[0.0; N_PREP]; N_MEAS];
    for k in 0..N_MEAS {
        for j in 0..N_PREP {
            let c = cells[k][j];
            if c.total == 0 {
                return Err(Error::EmptyCell {
                    job: None,
                    k: k + 1,
                    j: j + 1,
                });
            }
            rows[k][j] = c.successes as f64 / c.total as f64;
        }
    }
    ProbMatrix::new(rows)
}

/// Cell-wise sum of counts over jobs.
pub fn pool_cells(jobs: &[JobCounts]) -> Result<CellGrid> {
    let mut pooled = CellGrid::default();
    for job in jobs {
        for (acc_row, row) in pooled.iter_mut().zip(&job.cells) {
            for (acc, c) in acc_row.iter_mut().zip(row) {
                acc.successes = acc
                    .successes
                    .checked_add(c.successes)
                    .ok_or_else(|| Error::Document("pooled count overflow".into()))?;
                acc.total = acc
                    .total
                    .checked_add(c.total)
                    .ok_or_else(|| Error::Document("pooled count overflow".into()))?;
            }
        }
    }
    Ok(pooled)
}

/// Angle offsets added to every preparation (`beta`) and measurement (`phi`) angle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AngleOffsets {
    pub beta: f64,
    pub phi: f64,
}

/// Drift offset at every circuit slot of the run: slot `i * 20 + s` is the
/// `s`-th circuit executed in job `i`.
#[derive(Clone, Debug)]
pub struct DriftPath {
    spec: DriftSpec,
    offsets: Vec<f64>,
}

impl DriftPath {
    pub fn new(plan: &ExperimentPlan) -> Self {
        let spec = plan.drift.unwrap_or_default();
        let slots = plan.jobs as usize * N_CELLS + 1;
        let m = spec.magnitude;
        let offsets = match spec.kind {
            DriftKind::None => vec![0.0; slots],
            DriftKind::Linear => (0..slots)
                .map(|t| m * t as f64 / N_CELLS as f64)
                .collect(),
            DriftKind::RandomWalk => {
                let mut rng = ChaCha8Rng::seed_from_u64(plan.shuffle_seed);
                rng.set_stream(DRIFT_STREAM);
                // per-slot std m/sqrt(20) gives std m per job
                let step = Normal::new(0.0, m / (N_CELLS as f64).sqrt())
                    .expect("magnitude validated");
                let mut acc = 0.0;
                let mut v = Vec::with_capacity(slots);
                v.push(0.0);
                for _ in 1..slots {
                    acc += step.sample(&mut rng);
                    v.push(acc);
                }
                v
            }
        };
        Self { spec, offsets }
    }

    pub fn is_static(&self) -> bool {
        self.spec.kind == DriftKind::None
    }

    fn split(&self, value: f64) -> AngleOffsets {
        match self.spec.target {
            DriftTarget::Preparation => AngleOffsets {
                beta: value,
                phi: 0.0,
            },
            DriftTarget::Measurement => AngleOffsets {
                beta: 0.0,
                phi: value,
            },
            DriftTarget::Both => AngleOffsets {
                beta: value,
                phi: value,
            },
        }
    }

    /// Offsets seen by the `slot`-th circuit of job `job_index`.
    pub fn at(&self, job_index: usize, slot: usize) -> AngleOffsets {
        self.split(self.offsets[job_index * N_CELLS + slot])
    }
}

/// Offsets at the start of job `job_index`: `magnitude * job_index` for
/// linear drift, the accumulated walk for random-walk drift.
pub fn apply_drift(plan: &ExperimentPlan, job_index: usize) -> AngleOffsets {
    DriftPath::new(plan).at(job_index, 0)
}

fn all_cells() -> Vec<(usize, usize)> {
    (0..N_MEAS)
        .flat_map(|k| (0..N_PREP).map(move |j| (k, j)))
        .collect()
}

fn simulate_job(
    plan: &ExperimentPlan,
    model: &NoiseModel,
    path: &DriftPath,
    static_probs: &Option<ProbMatrix>,
    job_index: usize,
) -> JobCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.shuffle_seed);
    rng.set_stream(job_index as u64);
    let mut order = all_cells();
    order.shuffle(&mut rng);

    let probs = match static_probs {
        Some(f) => *f.measured_rows(),
        None => {
            let mut rows = [[0.0; N_PREP]; N_MEAS];
            for (slot, &(k, j)) in order.iter().enumerate() {
                let off = path.at(job_index, slot);
                rows[k][j] = model.cell_probability(
                    plan.angle_config.beta[j] + off.beta,
                    plan.angle_config.phi[k] + off.phi,
                );
            }
            rows
        }
    };

    let n = plan.samples_per_job();
    let mut cells = CellGrid::default();
    for k in 0..N_MEAS {
        for j in 0..N_PREP {
            cells[k][j] = CellCounts {
                successes: binomial_sample(probs[k][j], n, &mut rng),
                total: n,
            };
        }
    }
    JobCounts {
        job_index,
        cells,
        circuit_order: order,
        seed: plan.shuffle_seed,
    }
}

/// Simulates every job of `plan`. Output is identical for a given plan
/// regardless of thread count.
pub fn simulate_counts(plan: &ExperimentPlan) -> Result<Vec<JobCounts>> {
    plan.validate()?;
    let model = plan.noise.to_model()?;
    let path = DriftPath::new(plan);
    let static_probs = path
        .is_static()
        .then(|| model.prob_matrix(&plan.angle_config));
    Ok((0..plan.jobs as usize)
        .into_par_iter()
        .map(|i| simulate_job(plan, &model, &path, &static_probs, i))
        .collect())
}
