//! Witness analysis of a counts document and the pass/fail verdict.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, CountsDocument, Provenance, REPORT_SCHEMA, TOOL_VERSION};
use crate::witness::{
    analyze_per_job, analyze_pooled, determinant, witness_sigma_cells, AngleConfig, ProbMatrix,
    WitnessResult,
};

pub const DEFAULT_THRESHOLD_SIGMA: f64 = 5.0;

/// Recorded in every report so readers know which estimators produced the
/// two sigma values.
pub const CONVENTIONS: [&str; 3] = [
    "scheme_i: mean of per-job determinants; sigma is the empirical standard error across jobs",
    "scheme_ii: determinant of the cell-wise pooled matrix; sigma is the analytic shot-noise value at the pooled per-cell totals",
    "unequal shot totals: pooling weights cells by raw counts, scheme_i weights jobs equally",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub threshold_sigma: f64,
    /// z of the most significant scheme; absent when that scheme has a
    /// nonzero witness with zero sigma (unbounded significance).
    pub z: Option<f64>,
}

impl Verdict {
    /// Fails iff any result's `|z|` exceeds `threshold_sigma`.
    pub fn from_results<'a>(
        results: impl IntoIterator<Item = &'a WitnessResult>,
        threshold_sigma: f64,
    ) -> Self {
        let decisive = results
            .into_iter()
            .max_by(|a, b| a.abs_z().total_cmp(&b.abs_z()));
        let (abs_z, z) = match decisive {
            Some(r) => (r.abs_z(), r.z.or_else(|| (r.w == 0.0).then_some(0.0))),
            None => (0.0, Some(0.0)),
        };
        Self {
            outcome: if abs_z > threshold_sigma {
                Outcome::Fail
            } else {
                Outcome::Pass
            },
            threshold_sigma,
            z,
        }
    }

    /// Verdict for a published `W +- sigma` summary.
    pub fn from_summary(w: f64, sigma: f64, threshold_sigma: f64) -> Self {
        let r = WitnessResult::new(w, sigma, crate::witness::Scheme::Pooled, 0);
        Self::from_results([&r], threshold_sigma)
    }

    pub fn passed(&self) -> bool {
        self.outcome == Outcome::Pass
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = match self.outcome {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
        };
        match self.z {
            Some(z) => write!(f, "{word} (z = {z:.1})"),
            None => write!(f, "{word} (z = inf)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobWitness {
    pub job_index: usize,
    pub w: f64,
    /// Analytic shot-noise sigma of this job alone.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportProvenance {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counts_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: String,
    pub platform_label: String,
    pub provenance: ReportProvenance,
    pub angle_config: AngleConfig,
    pub per_job_w: Vec<JobWitness>,
    /// Absent for single-job data, where an across-job spread is undefined.
    pub scheme_i: Option<WitnessResult>,
    pub scheme_ii: WitnessResult,
    pub prob_matrix_pooled: ProbMatrix,
    pub verdict: Verdict,
    pub conventions: Vec<String>,
}

/// Runs both averaging schemes on `doc`.
pub fn build_report(
    doc: &CountsDocument,
    counts_sha256: Option<String>,
    threshold_sigma: f64,
) -> Result<ReportDocument> {
    if !(threshold_sigma.is_finite() && threshold_sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "threshold_sigma",
            value: threshold_sigma,
            reason: "must be positive",
        });
    }
    let mut per_job = Vec::with_capacity(doc.jobs.len());
    let mut matrices = Vec::with_capacity(doc.jobs.len());
    for job in &doc.jobs {
        let f = job.empirical_f()?;
        let sigma = witness_sigma_cells(&f, &job.totals())?;
        per_job.push(JobWitness {
            job_index: job.job_index,
            w: determinant(&f),
            sigma,
        });
        let t = job.cells.iter().flatten().map(|c| c.total).sum::<u64>() / 20;
        matrices.push((f, t));
    }
    let scheme_i = if matrices.len() >= 2 {
        Some(analyze_per_job(&matrices)?)
    } else {
        None
    };
    let scheme_ii = analyze_pooled(&doc.jobs)?;
    let pooled = crate::montecarlo::empirical_f(&crate::montecarlo::pool_cells(&doc.jobs)?)?;
    let verdict = Verdict::from_results(scheme_i.iter().chain([&scheme_ii]), threshold_sigma);
    Ok(ReportDocument {
        schema_version: REPORT_SCHEMA.into(),
        platform_label: doc.platform_label.clone(),
        provenance: ReportProvenance {
            tool_version: TOOL_VERSION.into(),
            counts_sha256,
            source: doc.provenance.clone(),
        },
        angle_config: doc.angle_config,
        per_job_w: per_job,
        scheme_i,
        scheme_ii,
        prob_matrix_pooled: pooled,
        verdict,
        conventions: CONVENTIONS.iter().map(|s| s.to_string()).collect(),
    })
}

pub fn save_report(report: &ReportDocument, path: &Path) -> Result<()> {
    io::write(path, &io::to_json(report))
}

pub fn load_report(path: &Path) -> Result<ReportDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    io::parse_versioned(path, &text, REPORT_SCHEMA)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{simulate_counts, ExperimentPlan};
    use crate::witness::Scheme;

    #[test]
    fn published_summary_verdict() {
        let v = Verdict::from_summary(-29.8e-5, 2.3e-5, DEFAULT_THRESHOLD_SIGMA);
        assert_eq!(v.outcome, Outcome::Fail);
        assert!((v.z.unwrap() + 12.956521739130435).abs() < 1e-12);
        assert_eq!(v.to_string(), "fail (z = -13.0)");
    }

    #[test]
    fn verdict_threshold_is_strict() {
        let at = WitnessResult::new(5.0, 1.0, Scheme::Pooled, 1);
        assert!(Verdict::from_results([&at], 5.0).passed());
        let over = WitnessResult::new(-5.01, 1.0, Scheme::PerJob, 1);
        let v = Verdict::from_results([&at, &over], 5.0);
        assert!(!v.passed());
        assert_eq!(v.z, Some(-5.01));
    }

    #[test]
    fn zero_sigma_nonzero_w_fails() {
        let r = WitnessResult::new(1e-6, 0.0, Scheme::PerJob, 1);
        let v = Verdict::from_results([&r], 5.0);
        assert!(!v.passed());
        assert_eq!(v.to_string(), "fail (z = inf)");
    }

    #[test]
    fn report_on_ideal_simulation() {
        let plan = ExperimentPlan::ideal(4, 5_000, 2, 21);
        let doc = CountsDocument::new("sim", plan.angle_config, simulate_counts(&plan).unwrap(), None);
        let r = build_report(&doc, None, DEFAULT_THRESHOLD_SIGMA).unwrap();
        assert_eq!(r.per_job_w.len(), 4);
        assert_eq!(r.scheme_ii.t_total, plan.t_total());
        assert_eq!(r.scheme_i.unwrap().t_total, plan.t_total());
        let verdict_again = Verdict::from_results(r.scheme_i.iter().chain([&r.scheme_ii]), 5.0);
        assert_eq!(r.verdict, verdict_again);
        // p = 0 cells stay exactly zero
        assert_eq!(r.prob_matrix_pooled.get(0, 2), 0.0);

        let single = CountsDocument::new("sim", plan.angle_config, doc.jobs[..1].to_vec(), None);
        let r = build_report(&single, None, 5.0).unwrap();
        assert!(r.scheme_i.is_none());
    }

    #[test]
    fn report_round_trip() {
        let plan = ExperimentPlan::ideal(2, 1_000, 1, 3);
        let doc = CountsDocument::new("sim", plan.angle_config, simulate_counts(&plan).unwrap(), None);
        let r = build_report(&doc, Some("00".into()), 5.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        save_report(&r, &path).unwrap();
        assert_eq!(load_report(&path).unwrap(), r);
    }

    #[test]
    fn threshold_must_be_positive() {
        let plan = ExperimentPlan::ideal(2, 100, 1, 3);
        let doc = CountsDocument::new("sim", plan.angle_config, simulate_counts(&plan).unwrap(), None);
        assert!(build_report(&doc, None, 0.0).is_err());
    }
}
