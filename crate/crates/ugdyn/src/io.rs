//! File formats for trajectories and analysis results.
//!
//! CSV files are self-describing: `# key = value` comment lines carry the
//! instance hash, the full run configuration and every convention flag, so a
//! result file can be interpreted (and re-analyzed) without the run that
//! produced it. The binary state dump is for exact restarts.

use crate::analysis::{
    scaling_exponent_f, vicinity_episode_labels, FsleEstimate, ResidencyTable, ScalingExponent,
    VicinityLabel,
};
use crate::cnf::CnfFormula;
use crate::error::{Error, Result};
use crate::integrate::{IntegrateConfig, OdeState, TrajectoryRecord};
use std::fmt::Write as _;
use std::io::{Read as _, Write as _};
use std::path::Path;

/// Conventions echoed into every result header.
pub const VICINITY_SPACE: &str = "x_blocks";
pub const VICINITY_RADIUS_UNIT: &str = "per_spin";
pub const Y_DENOMINATOR: &str = "non_transient";

fn header_line(out: &mut String, key: &str, value: impl std::fmt::Display) {
    let _ = writeln!(out, "# {key} = {value}");
}

/// Renders a trajectory record as columnar CSV. The `in_vicinity` and
/// `assignment` columns make the file sufficient for residency and ergodicity
/// analysis on its own.
pub fn trajectory_csv(
    record: &TrajectoryRecord,
    formula: &CnfFormula,
    config: &IntegrateConfig,
    instance_hash: &str,
    radius: f64,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# ugdyn trajectory v{}", crate::VERSION);
    header_line(&mut out, "instance_hash", instance_hash);
    header_line(&mut out, "k", formula.k);
    header_line(&mut out, "n_x", formula.n_x);
    header_line(&mut out, "n_eq", formula.n_eq);
    header_line(&mut out, "alpha", record.alpha);
    header_line(&mut out, "a_init", format!("{:?}", config.a_init).to_lowercase());
    header_line(&mut out, "rtol", config.rtol);
    header_line(&mut out, "atol", config.atol);
    header_line(&mut out, "max_step", config.max_step);
    header_line(&mut out, "t_end", config.t_end);
    header_line(&mut out, "obs_dt", record.obs_dt);
    header_line(&mut out, "seed", config.seed);
    header_line(&mut out, "vicinity_space", VICINITY_SPACE);
    header_line(&mut out, "vicinity_radius", radius);
    header_line(&mut out, "vicinity_radius_unit", VICINITY_RADIUS_UNIT);
    header_line(&mut out, "used_stiff_fallback", record.used_stiff_fallback);
    header_line(&mut out, "tool_version", crate::VERSION);
    out.push_str("t,sat_count,energy,max_k,log_a_max,in_vicinity,assignment\n");

    let labels = vicinity_episode_labels(record, formula, radius);
    for (sample, label) in record.samples.iter().zip(&labels) {
        let in_vic = matches!(label, VicinityLabel::In(_)) as u8;
        let assignment = sample
            .assignment
            .values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("-");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            sample.t, sample.sat_count, sample.energy, sample.max_k, sample.log_a_max,
            in_vic, assignment
        );
    }
    out
}

/// One parsed trajectory row; only the columns analysis needs.
#[derive(Debug, Clone)]
pub struct TrajectoryRow {
    pub t: f64,
    pub sat_count: usize,
    pub in_vicinity: bool,
    pub assignment: String,
}

/// A trajectory CSV read back for analysis.
#[derive(Debug, Clone)]
pub struct ParsedTrajectory {
    pub instance_hash: String,
    pub k: u32,
    pub n_x: usize,
    pub n_eq: usize,
    pub alpha: f64,
    pub obs_dt: f64,
    pub vicinity_radius: f64,
    pub rows: Vec<TrajectoryRow>,
}

pub fn parse_trajectory_csv(text: &str) -> Result<ParsedTrajectory> {
    let mut headers = std::collections::HashMap::new();
    let mut rows = Vec::new();
    let mut saw_columns = false;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((key, value)) = rest.split_once('=') {
                headers.insert(key.trim().to_string(), value.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if !saw_columns {
            if !line.starts_with("t,") {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected column header, got '{line}'"),
                });
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 7 fields, got {}", fields.len()),
            });
        }
        let bad = |what: &str| Error::Parse {
            line: lineno,
            msg: format!("bad {what} field"),
        };
        rows.push(TrajectoryRow {
            t: fields[0].parse().map_err(|_| bad("t"))?,
            sat_count: fields[1].parse().map_err(|_| bad("sat_count"))?,
            in_vicinity: fields[5] == "1",
            assignment: fields[6].to_string(),
        });
    }

    let get = |key: &str| -> Result<&String> {
        headers
            .get(key)
            .ok_or_else(|| Error::invalid(format!("trajectory file is missing header '{key}'")))
    };
    let num = |key: &str| -> Result<f64> {
        get(key)?
            .parse()
            .map_err(|_| Error::invalid(format!("header '{key}' is not numeric")))
    };
    Ok(ParsedTrajectory {
        instance_hash: get("instance_hash")?.clone(),
        k: num("k")? as u32,
        n_x: num("n_x")? as usize,
        n_eq: num("n_eq")? as usize,
        alpha: num("alpha")?,
        obs_dt: num("obs_dt")?,
        vicinity_radius: num("vicinity_radius")?,
        rows,
    })
}

/// Renders a residency table (plus fitted exponents) as CSV.
pub fn residency_csv(
    table: &ResidencyTable,
    n_x: usize,
    beta: f64,
    instance_hash: &str,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# ugdyn residency v{}", crate::VERSION);
    header_line(&mut out, "instance_hash", instance_hash);
    header_line(&mut out, "n_x", n_x);
    header_line(&mut out, "vicinity_space", VICINITY_SPACE);
    header_line(&mut out, "vicinity_radius", table.vicinity_radius);
    header_line(&mut out, "vicinity_radius_unit", VICINITY_RADIUS_UNIT);
    header_line(&mut out, "y_denominator", Y_DENOMINATOR);
    header_line(&mut out, "beta", beta);
    header_line(&mut out, "ensemble_size", table.ensemble_size);
    header_line(&mut out, "total_time", table.total_time);
    header_line(&mut out, "vicinity_time", table.vicinity_time);
    header_line(&mut out, "transient_time", table.transient_time);
    header_line(&mut out, "tool_version", crate::VERSION);
    out.push_str("delta,y,y_total,f,f_raw\n");
    for (i, &delta) in table.delta_grid.iter().enumerate() {
        if table.is_empty() {
            let _ = writeln!(out, "{delta},,,,");
            continue;
        }
        let y = table.y_values[i];
        let y_total = table.y_values_total[i];
        match scaling_exponent_f(y, n_x, beta) {
            ScalingExponent::Defined(f) => {
                let raw = beta.ln() - y.ln();
                let _ = writeln!(out, "{delta},{y},{y_total},{f},{raw}");
            }
            ScalingExponent::Undefined { raw } => {
                if raw.is_nan() {
                    let _ = writeln!(out, "{delta},{y},{y_total},,");
                } else {
                    let _ = writeln!(out, "{delta},{y},{y_total},,{raw}");
                }
            }
        }
    }
    out
}

/// Renders FSLE estimates (one row per alpha) as CSV.
pub fn fsle_csv(estimates: &[FsleEstimate], instance_hashes: &[String], seeds: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# ugdyn fsle v{}", crate::VERSION);
    header_line(&mut out, "instances", instance_hashes.join(";"));
    header_line(&mut out, "seeds_per_instance", seeds);
    if let Some(first) = estimates.first() {
        header_line(&mut out, "delta0", first.delta0);
        header_line(&mut out, "delta1", first.delta1);
    }
    header_line(&mut out, "tool_version", crate::VERSION);
    out.push_str("alpha,lambda_mean,lambda_std,n_segments,converged\n");
    for est in estimates {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            est.alpha, est.lambda_mean, est.lambda_std, est.n_segments, est.converged
        );
    }
    out
}

const STATE_MAGIC: &[u8; 8] = b"UGDYNST1";

/// Writes the exact (t, s, log a) state in little-endian binary for restarts.
pub fn write_state_dump(state: &OdeState, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + 24 + 8 * state.dim());
    buf.extend_from_slice(STATE_MAGIC);
    buf.extend_from_slice(&(state.s.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(state.log_a.len() as u64).to_le_bytes());
    buf.extend_from_slice(&state.t.to_le_bytes());
    for v in state.s.iter().chain(state.log_a.iter()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_state_dump(path: &Path) -> Result<OdeState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 || &bytes[..8] != STATE_MAGIC {
        return Err(Error::invalid("not a ugdyn state dump"));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let m = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = 32 + 8 * (n + m);
    if bytes.len() != expected {
        return Err(Error::invalid(format!(
            "state dump length mismatch: {} bytes, expected {expected}",
            bytes.len()
        )));
    }
    let t = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let mut values = bytes[32..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let s = values.by_ref().take(n).collect();
    let log_a = values.collect();
    Ok(OdeState { t, s, log_a })
}
