//! Subcommand implementations behind the `fracgrow` binary.
//!
//! Exit-code contract: 0 success, 2 configuration error, 3 solver failure,
//! 4 assumption refusal (with the violated assumption named in the
//! message). The sweep layer honors the `FRACGROW_THREADS` environment
//! variable as a parallelism cap.

use std::path::{Path, PathBuf};

use crate::asymptotics::{check_assumptions, run_sweep, stability_check, SweepPlan};
use crate::config::{parse_config, LoadedConfig};
use crate::error::{Error, Result};
use crate::report::{
    config_hash, convergence_table_to_csv, stability_table_to_csv, to_json_pretty,
    trajectory_from_csv, trajectory_to_csv, write_output, RunManifest,
};
use crate::scheme::{apriori_report, simulate, Trajectory};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const ESTIMATE_FILE: &str = "estimate_report.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_TABLE_FILE: &str = "sweep_table.csv";
pub const SWEEP_VERDICT_FILE: &str = "sweep_verdict.json";
pub const STABILITY_TABLE_FILE: &str = "stability_table.csv";
pub const STABILITY_REPORT_FILE: &str = "stability_report.json";
pub const VERIFY_REPORT_FILE: &str = "verify_report.json";

/// Outcome of one subcommand: the exit code and the files written.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl RunOutcome {
    fn success(files: Vec<PathBuf>, messages: Vec<String>) -> RunOutcome {
        RunOutcome {
            exit_code: 0,
            files,
            messages,
        }
    }
}

fn load(config_path: &Path, seed_override: Option<u64>) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        Error::config(format!(
            "cannot read configuration {}: {e}",
            config_path.display()
        ))
    })?;
    let mut loaded = parse_config(&text)?;
    if let Some(seed) = seed_override {
        loaded.file.seed = seed;
        loaded.problem = crate::config::build_problem(&loaded.file)?;
    }
    Ok(loaded)
}

fn manifest_for(loaded: &LoadedConfig, files: &[PathBuf], warnings: Vec<String>) -> RunManifest {
    RunManifest::new(
        &loaded.file,
        check_assumptions(&loaded.problem),
        files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect(),
        warnings,
    )
}

/// `simulate`: run the trajectory, emit the CSV, the estimate report, and
/// the manifest. A solver failure still writes the partial trajectory and
/// diagnostics before reporting exit code 3.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    let loaded = load(config_path, seed)?;
    match simulate(&loaded.problem) {
        Ok(traj) => {
            let mut files = vec![
                out_dir.join(TRAJECTORY_FILE),
                out_dir.join(ESTIMATE_FILE),
                out_dir.join(MANIFEST_FILE),
            ];
            write_output(out_dir, TRAJECTORY_FILE, &trajectory_to_csv(&traj))?;
            let report = apriori_report(&traj)?;
            write_output(out_dir, ESTIMATE_FILE, &to_json_pretty(&report))?;
            let manifest = manifest_for(&loaded, &files, traj.warnings.clone());
            write_output(out_dir, MANIFEST_FILE, &to_json_pretty(&manifest))?;
            files.sort();
            Ok(RunOutcome::success(
                files,
                vec![format!(
                    "simulated {} states; implied stability constant {:.6e}",
                    traj.len(),
                    report.implied_k1
                )],
            ))
        }
        Err(failure) => {
            // dump what exists for post-mortem, then fail with code 3
            write_output(
                out_dir,
                TRAJECTORY_FILE,
                &trajectory_to_csv(&failure.partial),
            )?;
            let manifest = manifest_for(
                &loaded,
                &[out_dir.join(TRAJECTORY_FILE)],
                failure.partial.warnings.clone(),
            );
            write_output(out_dir, MANIFEST_FILE, &to_json_pretty(&manifest))?;
            Err(failure.error)
        }
    }
}

/// `sweep`: run the configured relaxation-limit study.
pub fn cmd_sweep(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    let loaded = load(config_path, seed)?;
    let sweep = loaded
        .file
        .sweep
        .clone()
        .ok_or_else(|| Error::config("sweep subcommand needs a \"sweep\" section"))?;
    let plan = SweepPlan {
        regime: sweep.regime,
        fixed_value: sweep.fixed,
        values: sweep.values.clone(),
        base: loaded.problem.clone(),
        reference: sweep.reference,
    };
    let table = with_thread_cap(|| run_sweep(&plan))?;

    let files = vec![
        out_dir.join(SWEEP_TABLE_FILE),
        out_dir.join(SWEEP_VERDICT_FILE),
        out_dir.join(MANIFEST_FILE),
    ];
    write_output(out_dir, SWEEP_TABLE_FILE, &convergence_table_to_csv(&table))?;
    write_output(out_dir, SWEEP_VERDICT_FILE, &to_json_pretty(&table))?;
    let manifest = manifest_for(&loaded, &files, Vec::new());
    write_output(out_dir, MANIFEST_FILE, &to_json_pretty(&manifest))?;
    Ok(RunOutcome::success(
        files,
        vec![format!(
            "sweep {} over {} values: monotone = {}, observed rate = {:?}",
            table.regime.label(),
            table.rows.len(),
            table.monotone,
            table.observed_rate
        )],
    ))
}

/// `stability`: evaluate the two-trajectory inequality term table.
pub fn cmd_stability(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    let loaded = load(config_path, seed)?;
    let section = loaded
        .file
        .stability
        .clone()
        .ok_or_else(|| Error::config("stability subcommand needs a \"stability\" section"))?;

    let run_pair = |alpha: f64, beta: f64| -> Result<Trajectory> {
        let mut cfg = loaded.problem.clone();
        cfg.alpha = alpha;
        cfg.beta = beta;
        simulate(&cfg).map_err(|f| f.error)
    };
    let t1 = run_pair(section.pair1.alpha, section.pair1.beta)?;
    let t2 = run_pair(section.pair2.alpha, section.pair2.beta)?;
    let report = stability_check(&t1, &t2, section.delta)?;

    let files = vec![
        out_dir.join(STABILITY_TABLE_FILE),
        out_dir.join(STABILITY_REPORT_FILE),
        out_dir.join(MANIFEST_FILE),
    ];
    write_output(
        out_dir,
        STABILITY_TABLE_FILE,
        &stability_table_to_csv(&report),
    )?;
    write_output(out_dir, STABILITY_REPORT_FILE, &to_json_pretty(&report))?;
    let manifest = manifest_for(&loaded, &files, Vec::new());
    write_output(out_dir, MANIFEST_FILE, &to_json_pretty(&manifest))?;
    Ok(RunOutcome::success(
        files,
        vec![format!(
            "stability margin min = {:.6e}; implied constant = {:?}",
            report.min_margin, report.implied_m_hat
        )],
    ))
}

/// `verify`: run the invariant suites, print one line per check.
pub fn cmd_verify(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    // configuration is parsed for validity but the suites pin their own
    // desk-scale setups
    let loaded = load(config_path, seed)?;
    let suites = crate::verify::run_all()?;
    let mut messages = Vec::new();
    let mut all = true;
    for suite in &suites {
        for check in &suite.checks {
            messages.push(format!(
                "{} {}::{} (worst {:.3e}, tol {:.3e})",
                if check.passed { "PASS" } else { "FAIL" },
                suite.suite,
                check.name,
                check.worst,
                check.tolerance
            ));
            all &= check.passed;
        }
    }
    let files = vec![
        out_dir.join(VERIFY_REPORT_FILE),
        out_dir.join(MANIFEST_FILE),
    ];
    write_output(out_dir, VERIFY_REPORT_FILE, &to_json_pretty(&suites))?;
    let manifest = manifest_for(&loaded, &files, Vec::new());
    write_output(out_dir, MANIFEST_FILE, &to_json_pretty(&manifest))?;
    if all {
        Ok(RunOutcome::success(files, messages))
    } else {
        Ok(RunOutcome {
            exit_code: 3,
            files,
            messages,
        })
    }
}

/// `report`: re-derive the estimate report from a stored trajectory.
pub fn cmd_report(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<RunOutcome> {
    let loaded = load(config_path, seed)?;
    let csv_path = out_dir.join(TRAJECTORY_FILE);
    let text = std::fs::read_to_string(&csv_path).map_err(|e| {
        Error::config(format!(
            "cannot read stored trajectory {}: {e}",
            csv_path.display()
        ))
    })?;
    let traj = trajectory_from_csv(&text, &loaded.problem)?;
    let report = apriori_report(&traj)?;
    write_output(out_dir, ESTIMATE_FILE, &to_json_pretty(&report))?;
    Ok(RunOutcome::success(
        vec![out_dir.join(ESTIMATE_FILE)],
        vec![format!(
            "re-derived estimate report from {} states (config {})",
            traj.len(),
            &config_hash(&loaded.file)[..12]
        )],
    ))
}

/// Run `f` under a rayon pool capped by `FRACGROW_THREADS` when set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match std::env::var("FRACGROW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
    {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
            pool.install(f)
        }
        None => f(),
    }
}

/// Dispatch a subcommand by name.
pub fn run(
    subcommand: &str,
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<RunOutcome> {
    match subcommand {
        "simulate" => cmd_simulate(config_path, out_dir, seed),
        "sweep" => cmd_sweep(config_path, out_dir, seed),
        "stability" => cmd_stability(config_path, out_dir, seed),
        "verify" => cmd_verify(config_path, out_dir, seed),
        "report" => cmd_report(config_path, out_dir, seed),
        other => Err(Error::config(format!("unknown subcommand {other:?}"))),
    }
}
