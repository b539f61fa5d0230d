//! On-disk documents: experiment plans, shot counts, reports.
//!
//! All documents are JSON with a `schema_version` string. Floats are written
//! in shortest round-trip form, so a save/load cycle is lossless. Cell indices
//! are one-based in files (`k` = 1..4 measurement, `j` = 1..5 preparation).
//! `FORMATS.md` at the repository root is the field-by-field reference.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::montecarlo::{CellCounts, CellGrid, DriftSpec, ExperimentPlan, JobCounts, N_CELLS};
use crate::noise::NoiseSpec;
use crate::witness::{AngleConfig, N_MEAS, N_PREP};

pub const PLAN_SCHEMA: &str = "viviani-witness/plan/v1";
pub const COUNTS_SCHEMA: &str = "viviani-witness/counts/v1";
pub const REPORT_SCHEMA: &str = "viviani-witness/report/v1";
pub const TOOL_VERSION: &str = concat!("viviani-witness ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn malformed(path: &Path, e: serde_json::Error) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses `text` after checking its `schema_version`.
pub(crate) fn parse_versioned<T: DeserializeOwned>(
    path: &Path,
    text: &str,
    expected: &'static str,
) -> Result<T> {
    #[derive(Deserialize)]
    struct Header {
        schema_version: Option<serde_json::Value>,
    }
    let header: Header = serde_json::from_str(text).map_err(|e| malformed(path, e))?;
    match header.schema_version {
        Some(serde_json::Value::String(v)) if v == expected => {}
        Some(serde_json::Value::String(v)) => {
            return Err(Error::UnknownSchema { found: v, expected })
        }
        Some(other) => {
            return Err(Error::UnknownSchema {
                found: other.to_string(),
                expected,
            })
        }
        None => {
            return Err(Error::UnknownSchema {
                found: String::new(),
                expected,
            })
        }
    }
    serde_json::from_str(text).map_err(|e| malformed(path, e))
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

/// Experiment plan file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDocument {
    pub schema_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub platform_label: Option<String>,
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

impl PlanDocument {
    pub fn new(plan: ExperimentPlan, platform_label: Option<String>) -> Self {
        Self {
            schema_version: PLAN_SCHEMA.into(),
            platform_label,
            jobs: plan.jobs,
            shots: plan.shots,
            repetitions: plan.repetitions,
            angle_config: plan.angle_config,
            noise: plan.noise,
            shuffle_seed: plan.shuffle_seed,
            drift: plan.drift,
        }
    }

    pub fn plan(&self) -> ExperimentPlan {
        ExperimentPlan {
            jobs: self.jobs,
            shots: self.shots,
            repetitions: self.repetitions,
            angle_config: self.angle_config,
            noise: self.noise.clone(),
            shuffle_seed: self.shuffle_seed,
            drift: self.drift,
        }
    }
}

/// Loads and validates a plan; also returns the SHA-256 of the file bytes.
pub fn load_plan(path: &Path) -> Result<(PlanDocument, String)> {
    let text = read(path)?;
    let doc: PlanDocument = parse_versioned(path, &text, PLAN_SCHEMA)?;
    doc.plan().validate()?;
    Ok((doc, sha256_hex(text.as_bytes())))
}

pub fn save_plan(doc: &PlanDocument, path: &Path) -> Result<()> {
    write(path, &to_json(doc))
}

/// Where a counts file came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuffle_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountsDocument {
    pub platform_label: String,
    pub angle_config: AngleConfig,
    pub jobs: Vec<JobCounts>,
    pub provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CountsFile {
    schema_version: String,
    platform_label: String,
    angle_config: AngleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
    jobs: Vec<JobRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRecord {
    job_index: usize,
    seed: u64,
    /// One-based `[k, j]` pairs in execution order; empty when unknown.
    #[serde(default)]
    circuit_order: Vec<[usize; 2]>,
    cells: Vec<CellRecord>,
}

/// One row of the flat tabular form, and one cell of a JSON job record.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub k: usize,
    pub j: usize,
    pub successes: u64,
    pub total: u64,
}

fn job_from_records(
    job_index: usize,
    seed: u64,
    cells: &[CellRecord],
    order: &[[usize; 2]],
) -> Result<JobCounts> {
    let mut grid: [[Option<CellCounts>; N_PREP]; N_MEAS] = Default::default();
    for c in cells {
        if !(1..=N_MEAS).contains(&c.k) || !(1..=N_PREP).contains(&c.j) {
            return Err(Error::CellInvariant {
                job: job_index,
                k: c.k,
                j: c.j,
                reason: "index out of range (k in 1..=4, j in 1..=5)".into(),
            });
        }
        if c.successes > c.total {
            return Err(Error::CellInvariant {
                job: job_index,
                k: c.k,
                j: c.j,
                reason: format!("has successes {} > total {}", c.successes, c.total),
            });
        }
        let slot = &mut grid[c.k - 1][c.j - 1];
        if slot.is_some() {
            return Err(Error::CellInvariant {
                job: job_index,
                k: c.k,
                j: c.j,
                reason: "appears more than once".into(),
            });
        }
        *slot = Some(CellCounts {
            successes: c.successes,
            total: c.total,
        });
    }
    let mut full = CellGrid::default();
    for k in 0..N_MEAS {
        for j in 0..N_PREP {
            full[k][j] = grid[k][j].ok_or(Error::MissingCell {
                job: job_index,
                k: k + 1,
                j: j + 1,
            })?;
        }
    }

    let circuit_order: Vec<(usize, usize)> = order.iter().map(|&[k, j]| (k, j)).collect();
    if !circuit_order.is_empty() {
        let distinct: BTreeSet<_> = circuit_order.iter().copied().collect();
        let valid = circuit_order.len() == N_CELLS
            && distinct.len() == N_CELLS
            && circuit_order
                .iter()
                .all(|&(k, j)| (1..=N_MEAS).contains(&k) && (1..=N_PREP).contains(&j));
        if !valid {
            return Err(Error::Document(format!(
                "job {job_index}: circuit_order is not a permutation of the 20 cells"
            )));
        }
    }
    Ok(JobCounts {
        job_index,
        cells: full,
        circuit_order: circuit_order.iter().map(|&(k, j)| (k - 1, j - 1)).collect(),
        seed,
    })
}

fn check_jobs(jobs: &[JobCounts]) -> Result<()> {
    if jobs.is_empty() {
        return Err(Error::Document("jobs list is empty".into()));
    }
    let mut seen = BTreeSet::new();
    for job in jobs {
        if !seen.insert(job.job_index) {
            return Err(Error::Document(format!(
                "job_index {} appears more than once",
                job.job_index
            )));
        }
    }
    Ok(())
}

impl CountsDocument {
    pub fn new(
        platform_label: impl Into<String>,
        angle_config: AngleConfig,
        jobs: Vec<JobCounts>,
        provenance: Option<Provenance>,
    ) -> Self {
        Self {
            platform_label: platform_label.into(),
            angle_config,
            jobs,
            provenance,
        }
    }

    pub fn to_json(&self) -> String {
        let file = CountsFile {
            schema_version: COUNTS_SCHEMA.into(),
            platform_label: self.platform_label.clone(),
            angle_config: self.angle_config,
            provenance: self.provenance.clone(),
            jobs: self
                .jobs
                .iter()
                .map(|job| JobRecord {
                    job_index: job.job_index,
                    seed: job.seed,
                    circuit_order: job
                        .circuit_order
                        .iter()
                        .map(|&(k, j)| [k + 1, j + 1])
                        .collect(),
                    cells: (0..N_MEAS)
                        .flat_map(|k| (0..N_PREP).map(move |j| (k, j)))
                        .map(|(k, j)| CellRecord {
                            k: k + 1,
                            j: j + 1,
                            successes: job.cells[k][j].successes,
                            total: job.cells[k][j].total,
                        })
                        .collect(),
                })
                .collect(),
        };
        to_json(&file)
    }

    /// Parses and validates a counts document; `path` only labels errors.
    pub fn from_json(path: &Path, text: &str) -> Result<Self> {
        let file: CountsFile = parse_versioned(path, text, COUNTS_SCHEMA)?;
        let jobs = file
            .jobs
            .iter()
            .map(|r| job_from_records(r.job_index, r.seed, &r.cells, &r.circuit_order))
            .collect::<Result<Vec<_>>>()?;
        check_jobs(&jobs)?;
        Ok(Self {
            platform_label: file.platform_label,
            angle_config: file.angle_config,
            jobs,
            provenance: file.provenance,
        })
    }

    /// Total samples across all jobs and cells.
    pub fn total_samples(&self) -> u64 {
        self.jobs
            .iter()
            .flat_map(|j| j.cells.iter().flatten())
            .map(|c| c.total)
            .sum()
    }
}

pub fn load_counts(path: &Path) -> Result<CountsDocument> {
    CountsDocument::from_json(path, &read(path)?)
}

pub fn save_counts(doc: &CountsDocument, path: &Path) -> Result<()> {
    write(path, &doc.to_json())
}

/// Imports the flat tabular form: a CSV with header
/// `job_index,k,j,successes,total`, one row per job and cell. Circuit order
/// and seeds are not part of this form.
pub fn import_counts_csv(
    path: &Path,
    angle_config: AngleConfig,
    platform_label: impl Into<String>,
) -> Result<CountsDocument> {
    #[derive(Deserialize)]
    struct Row {
        job_index: usize,
        k: usize,
        j: usize,
        successes: u64,
        total: u64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
    let mut by_job: BTreeMap<usize, Vec<CellRecord>> = BTreeMap::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            // header is line 1
            line: e.position().map(|p| p.line() as usize).unwrap_or(i + 2),
            column: 0,
            message: e.to_string(),
        })?;
        by_job.entry(row.job_index).or_default().push(CellRecord {
            k: row.k,
            j: row.j,
            successes: row.successes,
            total: row.total,
        });
    }
    let jobs = by_job
        .iter()
        .map(|(&idx, cells)| job_from_records(idx, 0, cells, &[]))
        .collect::<Result<Vec<_>>>()?;
    check_jobs(&jobs)?;
    Ok(CountsDocument::new(platform_label, angle_config, jobs, None))
}
