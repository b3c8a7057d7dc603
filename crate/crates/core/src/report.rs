//! Deterministic serialization of trajectories, reports, sweep tables, and
//! the run manifest.
//!
//! Numeric tables are CSV with all floating-point values printed with 17
//! significant digits (enough for a bit-faithful round trip); structured
//! reports and verdicts are JSON.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::asymptotics::{AssumptionCheck, ConvergenceTable, StabilityReport};
use crate::config::ConfigFile;
use crate::error::{Error, Result};
use crate::scheme::{ProblemConfig, State, Trajectory};
use crate::spectral::Field;

/// Fixed trajectory CSV header.
pub const TRAJECTORY_HEADER: &str = "t, field, mode_index, coefficient";

/// Format a float with 17 significant digits (bit-faithful round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize a trajectory as CSV: one row per (step, field, mode), with
/// the fields ordered `mu, phi, s, xi` and modes ascending. Row order is
/// deterministic.
pub fn trajectory_to_csv(traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for st in &traj.states {
        let t = fmt_f64(st.time);
        for (name, field) in [
            ("mu", &st.mu),
            ("phi", &st.phi),
            ("s", &st.s_nutrient),
            ("xi", &st.xi),
        ] {
            for (j, c) in field.coeffs().iter().enumerate() {
                out.push_str(&t);
                out.push(',');
                out.push_str(name);
                out.push(',');
                out.push_str(&(j + 1).to_string());
                out.push(',');
                out.push_str(&fmt_f64(*c));
                out.push('\n');
            }
        }
    }
    out
}

/// Rebuild a trajectory from its CSV serialization and the configuration
/// that produced it.
pub fn trajectory_from_csv(text: &str, cfg: &ProblemConfig) -> Result<Trajectory> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::config("empty trajectory document"))?;
    if header.split(',').map(str::trim).collect::<Vec<_>>()
        != ["t", "field", "mode_index", "coefficient"]
    {
        return Err(Error::config(format!(
            "unexpected trajectory header: {header}"
        )));
    }

    #[derive(Default)]
    struct Partial {
        mu: Vec<f64>,
        phi: Vec<f64>,
        s: Vec<f64>,
        xi: Vec<f64>,
    }

    let mut times: Vec<f64> = Vec::new();
    let mut partials: Vec<Partial> = Vec::new();

    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(Error::config(format!(
                "trajectory row {} has {} columns, expected 4",
                lineno + 2,
                cols.len()
            )));
        }
        let t: f64 = cols[0]
            .parse()
            .map_err(|_| Error::config(format!("bad time value {:?}", cols[0])))?;
        let mode: usize = cols[2]
            .parse()
            .map_err(|_| Error::config(format!("bad mode index {:?}", cols[2])))?;
        let value: f64 = cols[3]
            .parse()
            .map_err(|_| Error::config(format!("bad coefficient {:?}", cols[3])))?;

        let is_new = match times.last() {
            None => true,
            Some(&last) => t != last,
        };
        if is_new {
            times.push(t);
            partials.push(Partial::default());
        }
        let p = partials.last_mut().unwrap();
        let target = match cols[1] {
            "mu" => &mut p.mu,
            "phi" => &mut p.phi,
            "s" => &mut p.s,
            "xi" => &mut p.xi,
            other => {
                return Err(Error::config(format!(
                    "unknown field name {other:?} in trajectory row"
                )))
            }
        };
        if mode != target.len() + 1 {
            return Err(Error::config(format!(
                "trajectory rows out of order at t = {t}, field {}, mode {mode}",
                cols[1]
            )));
        }
        target.push(value);
    }

    let mut states = Vec::with_capacity(times.len());
    for (t, p) in times.iter().zip(partials) {
        states.push(State {
            time: *t,
            mu: Field::new(Arc::clone(cfg.op_a.basis()), p.mu)?,
            phi: Field::new(Arc::clone(cfg.op_b.basis()), p.phi)?,
            s_nutrient: Field::new(Arc::clone(cfg.op_c.basis()), p.s)?,
            xi: Field::new(Arc::clone(cfg.op_b.basis()), p.xi)?,
        });
    }
    Ok(Trajectory {
        states,
        config: cfg.clone(),
        warnings: Vec::new(),
    })
}

/// Serialize a convergence table as CSV.
pub fn convergence_table_to_csv(table: &ConvergenceTable) -> String {
    let mut out = String::new();
    out.push_str("value, d_phi, d_mu, d_s, rate, failed\n");
    for row in &table.rows {
        out.push_str(&format!(
            "{}, {}, {}, {}, {}, {}\n",
            fmt_f64(row.value),
            fmt_f64(row.d_phi),
            fmt_f64(row.d_mu),
            fmt_f64(row.d_s),
            row.rate.map(fmt_f64).unwrap_or_default(),
            row.failed
        ));
    }
    out
}

/// Serialize a stability report's per-step term table as CSV.
pub fn stability_table_to_csv(report: &StabilityReport) -> String {
    let mut out = String::new();
    out.push_str("t, lhs, w_term, beta_term, margin\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{}, {}, {}, {}, {}\n",
            fmt_f64(row.t),
            fmt_f64(row.lhs),
            fmt_f64(row.w_term),
            fmt_f64(row.beta_term),
            fmt_f64(row.margin)
        ));
    }
    out
}

/// SHA-256 of the canonical (struct-ordered) JSON form of the config.
pub fn config_hash(file: &ConfigFile) -> String {
    let canonical = serde_json::to_string(file).expect("config serialization cannot fail");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance record for one CLI invocation: configuration hash, tool
/// version, wall-clock stamp, emitted files, and the assumption block.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    pub wall_clock_utc: String,
    pub emitted_files: Vec<String>,
    pub assumptions: AssumptionCheck,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn new(
        file: &ConfigFile,
        assumptions: AssumptionCheck,
        emitted_files: Vec<String>,
        warnings: Vec<String>,
    ) -> RunManifest {
        RunManifest {
            config_hash: config_hash(file),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_clock_utc: chrono::Utc::now().to_rfc3339(),
            emitted_files,
            assumptions,
            warnings,
        }
    }
}

/// Write a string to `dir/name`, creating the directory if needed.
pub fn write_output(dir: &Path, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = std::fs::File::create(dir.join(name))?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

/// Pretty JSON with a trailing newline (stable across runs for identical
/// values: serde_json emits shortest round-trip digits deterministically).
pub fn to_json_pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}
