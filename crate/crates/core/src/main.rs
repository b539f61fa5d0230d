use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use viviani_witness::io::{
    import_counts_csv, load_counts, load_plan, save_counts, sha256_hex, CountsDocument,
    Provenance, TOOL_VERSION,
};
use viviani_witness::montecarlo::simulate_counts;
use viviani_witness::optimizer::{optimize_angles_traced, sensitivity, Constraint};
use viviani_witness::render::render_report;
use viviani_witness::report::{build_report, load_report, save_report, DEFAULT_THRESHOLD_SIGMA};
use viviani_witness::selftest::{run_selftest, SelftestOptions};
use viviani_witness::witness::{default_angles, AngleConfig, Scheme};
use viviani_witness::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_FAIL: u8 = 3;

/// Determinant dimension witness: simulate, analyze and certify qubit data.
///
/// Exit status: 0 success or pass, 1 usage error, 2 data error, 3 verdict
/// fail (or a failed selftest check).
#[derive(Parser)]
#[command(name = "vwit", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate shot counts for a plan; writes <out>/counts.json.
    Simulate {
        /// Plan file (JSON).
        #[arg(long)]
        plan: PathBuf,
        /// Output directory.
        #[arg(long, env = "VWIT_OUT_DIR", default_value = "vwit-out")]
        out: PathBuf,
        /// Override the plan's shuffle_seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for simulating jobs; 0 uses every core. Output does
        /// not depend on this.
        #[arg(long, default_value_t = 0)]
        jobs_parallel: usize,
    },
    /// Analyze counts; writes <out>/report.json and renderings.
    Analyze {
        /// Counts file: JSON, or CSV with header job_index,k,j,successes,total.
        #[arg(long)]
        counts: PathBuf,
        /// Output directory.
        #[arg(long, env = "VWIT_OUT_DIR", default_value = "vwit-out")]
        out: PathBuf,
        /// Verdict fails when |z| of either scheme exceeds this.
        #[arg(long, default_value_t = DEFAULT_THRESHOLD_SIGMA)]
        threshold_sigma: f64,
        /// Plan whose angles apply to CSV counts (default angles otherwise).
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Platform label for CSV counts (default: file stem).
        #[arg(long)]
        label: Option<String>,
    },
    /// Search angles maximizing the adjugate norm; writes <out>/angles.json.
    OptimizeAngles {
        /// Objective evaluations allowed.
        #[arg(long, default_value_t = 10_000)]
        budget: usize,
        /// viviani-paired ties phi_k = -beta_k; free searches all nine angles.
        #[arg(long, value_enum, default_value_t = ConstraintArg::VivianiPaired)]
        constraint: ConstraintArg,
        /// Starting angles, a JSON object {"beta": [5], "phi": [4]} in radians
        /// (default angles otherwise).
        #[arg(long)]
        init: Option<PathBuf>,
        /// Output directory.
        #[arg(long, env = "VWIT_OUT_DIR", default_value = "vwit-out")]
        out: PathBuf,
    },
    /// Re-render an existing report.json into <out>.
    Report {
        #[arg(long)]
        report: PathBuf,
        /// Output directory.
        #[arg(long, env = "VWIT_OUT_DIR", default_value = "vwit-out")]
        out: PathBuf,
    },
    /// Run the built-in invariant suite.
    Selftest {
        #[arg(long, hide = true)]
        tamper_det_sign: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    Free,
    VivianiPaired,
}

impl From<ConstraintArg> for Constraint {
    fn from(c: ConstraintArg) -> Self {
        match c {
            ConstraintArg::Free => Constraint::Free,
            ConstraintArg::VivianiPaired => Constraint::VivianiPaired,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Document(format!("{}: {e}", dir.display())))
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::Simulate { plan, out, seed, jobs_parallel } => {
            let (doc, plan_sha) = load_plan(&plan)?;
            let mut p = doc.plan();
            if let Some(s) = seed {
                p.shuffle_seed = s;
            }
            eprintln!("T_total = {} samples per cell ({} jobs)", p.t_total(), p.jobs);
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs_parallel)
                .build()
                .map_err(|e| Error::Document(format!("thread pool: {e}")))?;
            let jobs = pool.install(|| simulate_counts(&p))?;
            for j in &jobs {
                let samples: u64 = j.cells.iter().flatten().map(|c| c.total).sum();
                eprintln!("job {}/{} done: {samples} samples", j.job_index + 1, p.jobs);
            }
            let counts = CountsDocument::new(
                doc.platform_label.clone().unwrap_or_else(|| "simulation".into()),
                p.angle_config,
                jobs,
                Some(Provenance {
                    tool_version: TOOL_VERSION.into(),
                    plan_sha256: Some(plan_sha),
                    shuffle_seed: Some(p.shuffle_seed),
                }),
            );
            ensure_dir(&out)?;
            let path = out.join("counts.json");
            save_counts(&counts, &path)?;
            println!("{} ({} samples)", path.display(), counts.total_samples());
            Ok(ExitCode::SUCCESS)
        }
        Command::Analyze { counts, out, threshold_sigma, plan, label } => {
            let is_csv = counts
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
            let doc = if is_csv {
                let angles = match &plan {
                    Some(p) => load_plan(p)?.0.angle_config,
                    None => default_angles(),
                };
                let label = label.unwrap_or_else(|| {
                    counts.file_stem().map_or("import".into(), |s| s.to_string_lossy().into())
                });
                import_counts_csv(&counts, angles, label)?
            } else {
                load_counts(&counts)?
            };
            let bytes = std::fs::read(&counts)
                .map_err(|e| Error::Document(format!("{}: {e}", counts.display())))?;
            let report = build_report(&doc, Some(sha256_hex(&bytes)), threshold_sigma)?;
            ensure_dir(&out)?;
            save_report(&report, &out.join("report.json"))?;
            render_report(&report, &out)?;
            for r in report.scheme_i.iter().chain([&report.scheme_ii]) {
                let z = r.z.map_or("inf".into(), |z| format!("{z:.3}"));
                let name = match r.scheme {
                    Scheme::PerJob => "scheme_i ",
                    Scheme::Pooled => "scheme_ii",
                };
                println!("{name}: W = {:+.4e} sigma = {:.4e} z = {z}", r.w, r.sigma);
            }
            println!("verdict: {}", report.verdict);
            Ok(if report.verdict.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            })
        }
        Command::OptimizeAngles { budget, constraint, init, out } => {
            let init = match init {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| Error::Document(format!("{}: {e}", p.display())))?;
                    serde_json::from_str::<AngleConfig>(&text)
                        .map_err(|e| Error::Document(format!("{}: {e}", p.display())))?
                }
                None => default_angles(),
            };
            let baseline = sensitivity(&init);
            let result = optimize_angles_traced(&init, budget, constraint.into());
            let json = serde_json::json!({
                "baseline": baseline,
                "best": result.report,
                "evaluations": result.evaluations,
            });
            ensure_dir(&out)?;
            let path = out.join("angles.json");
            let mut text = serde_json::to_string_pretty(&json).expect("serializable");
            text.push('\n');
            std::fs::write(&path, text).map_err(|e| Error::Document(format!("{}: {e}", path.display())))?;
            println!(
                "adj_frobenius {:.6} -> {:.6} after {} evaluations",
                baseline.adj_frobenius, result.report.adj_frobenius, result.evaluations
            );
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { report, out } => {
            let doc = load_report(&report)?;
            for path in render_report(&doc, &out)? {
                println!("{}", path.display());
            }
            println!("verdict: {}", doc.verdict);
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { tamper_det_sign } => {
            let summary = run_selftest(SelftestOptions { tamper_det_sign });
            for c in &summary.checks {
                println!("{c}");
            }
            println!(
                "{} in {:.2} s",
                if summary.passed() { "selftest passed" } else { "selftest FAILED" },
                summary.seconds
            );
            Ok(if summary.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAIL)
            })
        }
    }
}
