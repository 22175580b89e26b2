//! Ensemble sweeps over (k, epsilon) cells and the FSLE protocol.
//!
//! Every cell's instance and every trajectory seed derive deterministically
//! from the master seed, and parallel results are reduced in index order, so
//! output files are byte-identical for any worker count. Per-cell failures are
//! quarantined: the sweep continues and reports them in the manifest.

use crate::analysis::{
    fsle, scaling_exponent_f, FsleEstimate, FsleParams, ResidencyAccumulator, ResidencyTable,
    ScalingExponent,
};
use crate::cnf::{encode, CnfFormula};
use crate::error::{Error, Result};
use crate::instance::{generate_polygon, TwoLinInstance};
use crate::integrate::{integrate, AInit, IntegrateConfig, TrajectoryRecord};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

/// splitmix64: cheap, well-mixed derivation of child seeds.
pub fn derive_seed(parent: u64, stream: u64) -> u64 {
    let mut z = parent ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepConfig {
    pub k_list: Vec<u32>,
    /// Unsat fractions; target_unsat = round(epsilon * n_eq) per cell.
    pub epsilon_list: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub alpha: f64,
    pub n_x: usize,
    pub n_eq: usize,
    /// Trajectories per cell.
    pub ensemble: usize,
    pub t_end: f64,
    pub master_seed: u64,
    pub worker_count: usize,
    pub beta: f64,
    pub vicinity_radius: f64,
    pub a_init: AInit,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k_list: vec![4, 6, 8],
            epsilon_list: vec![0.4],
            delta_grid: (1..=9).map(|i| i as f64 / 10.0).collect(),
            alpha: 2.0,
            n_x: 8,
            n_eq: 20,
            ensemble: 50,
            t_end: 600.0,
            master_seed: 0,
            worker_count: 1,
            beta: 1.0,
            vicinity_radius: crate::analysis::DEFAULT_VICINITY_RADIUS,
            a_init: AInit::One,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() || self.epsilon_list.is_empty() {
            return Err(Error::invalid("k_list and epsilon_list must be nonempty"));
        }
        if self.ensemble == 0 {
            return Err(Error::invalid("ensemble must be >= 1"));
        }
        if self.worker_count == 0 {
            return Err(Error::invalid("worker_count must be >= 1"));
        }
        if self.delta_grid.is_empty()
            || self.delta_grid.iter().any(|&d| d <= 0.0 || d > 1.0)
            || self.delta_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::invalid(
                "delta_grid must be strictly ascending within (0, 1]",
            ));
        }
        if self.epsilon_list.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
            return Err(Error::invalid("epsilon values must lie in [0, 1]"));
        }
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if !(self.t_end > 0.0 && self.alpha > 0.0 && self.vicinity_radius > 0.0) {
            return Err(Error::invalid("t_end, alpha and vicinity_radius must be positive"));
        }
        Ok(())
    }

    /// Cells in output order: epsilon-major, then k.
    pub fn cells(&self) -> Vec<(usize, f64, u32)> {
        let mut out = Vec::new();
        let mut index = 0;
        for &epsilon in &self.epsilon_list {
            for &k in &self.k_list {
                out.push((index, epsilon, k));
                index += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CellReport {
    pub cell_index: usize,
    pub k: u32,
    pub epsilon: f64,
    pub target_unsat: usize,
    pub instance_seed: u64,
    pub instance_hash: String,
    pub designed_opt: Option<String>,
    pub trajectory_seeds: Vec<u64>,
    /// Quarantined trajectory failures, as (seed, message).
    pub failures: Vec<(u64, String)>,
}

/// One completed (k, epsilon) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub report: CellReport,
    pub residency: ResidencyTable,
    /// f per delta grid point under the configured beta; None when undefined.
    pub f_values: Vec<Option<f64>>,
    /// Range diagnostics pooled over the cell's trajectories: the largest
    /// |s_p| and the (min, max) of K_m seen at any sample.
    pub max_abs_spin: f64,
    pub k_range: (f64, f64),
}

#[derive(Debug)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub cells: Vec<CellResult>,
    /// Cells that failed outright, as (cell_index, k, epsilon, message).
    pub failed_cells: Vec<(usize, u32, f64, String)>,
}

impl SweepResult {
    /// True when any cell failed or any trajectory was quarantined.
    pub fn is_partial(&self) -> bool {
        !self.failed_cells.is_empty()
            || self.cells.iter().any(|c| !c.report.failures.is_empty())
    }
}

fn target_unsat_for(epsilon: f64, n_eq: usize) -> usize {
    (epsilon * n_eq as f64).round() as usize
}

fn run_cell(
    config: &SweepConfig,
    cell_index: usize,
    epsilon: f64,
    k: u32,
) -> Result<CellResult> {
    let target_unsat = target_unsat_for(epsilon, config.n_eq);
    let instance_seed = derive_seed(config.master_seed, cell_index as u64);
    let gen = generate_polygon(config.n_x, config.n_eq, k, target_unsat, instance_seed)?;
    let formula = encode(&gen.instance)?;

    let trajectory_seeds: Vec<u64> = (0..config.ensemble)
        .map(|t| derive_seed(instance_seed, 0x1000 + t as u64))
        .collect();

    // parallel map over trajectories, ordered reduce below
    let runs: Vec<(u64, Result<TrajectoryRecord>)> = trajectory_seeds
        .par_iter()
        .map(|&seed| {
            let run_config = IntegrateConfig {
                alpha: config.alpha,
                a_init: config.a_init,
                t_end: config.t_end,
                seed,
                ..Default::default()
            };
            (seed, integrate(&formula, &gen.instance, &run_config))
        })
        .collect();

    let mut acc =
        ResidencyAccumulator::new(config.delta_grid.clone(), config.vicinity_radius)?;
    let dynamics = crate::dynamics::Dynamics::new(&formula, config.alpha)?;
    let mut failures = Vec::new();
    let mut max_abs_spin = 0.0f64;
    let mut k_range = (f64::INFINITY, f64::NEG_INFINITY);
    for (seed, run) in &runs {
        match run {
            Ok(record) => {
                acc.add_record(record, &formula, &gen.instance);
                for s in &record.spin_states {
                    for &v in s {
                        max_abs_spin = max_abs_spin.max(v.abs());
                    }
                    for m in 0..formula.num_clauses() {
                        let k_m = dynamics.clause_k(s, m);
                        k_range.0 = k_range.0.min(k_m);
                        k_range.1 = k_range.1.max(k_m);
                    }
                }
            }
            Err(e) => failures.push((*seed, e.to_string())),
        }
    }
    if failures.len() == runs.len() {
        return Err(Error::invalid(format!(
            "all {} trajectories failed; first error: {}",
            runs.len(),
            failures[0].1
        )));
    }
    let table = acc.finish();
    let f_values = table
        .delta_grid
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if table.is_empty() {
                return None;
            }
            match scaling_exponent_f(table.y_values[i], config.n_x, config.beta) {
                ScalingExponent::Defined(f) => Some(f),
                ScalingExponent::Undefined { .. } => None,
            }
        })
        .collect();

    Ok(CellResult {
        report: CellReport {
            cell_index,
            k,
            epsilon,
            target_unsat,
            instance_seed,
            instance_hash: gen.instance.content_hash(),
            designed_opt: gen
                .instance
                .designed_opt
                .map(|r| format!("{}/{}", r.num, r.den)),
            trajectory_seeds,
            failures,
        },
        residency: table,
        f_values,
        max_abs_spin,
        k_range,
    })
}

/// Runs the full sweep on a private thread pool of `worker_count` threads.
/// Results are independent of the worker count.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;

    let cells = config.cells();
    let outcomes: Vec<(usize, f64, u32, Result<CellResult>)> = pool.install(|| {
        cells
            .iter()
            .map(|&(index, epsilon, k)| (index, epsilon, k, run_cell(config, index, epsilon, k)))
            .collect()
    });

    let mut done = Vec::new();
    let mut failed = Vec::new();
    for (index, epsilon, k, outcome) in outcomes {
        match outcome {
            Ok(cell) => done.push(cell),
            Err(e) => failed.push((index, k, epsilon, e.to_string())),
        }
    }
    if done.is_empty() {
        return Err(Error::invalid(format!(
            "every sweep cell failed; first error: {}",
            failed
                .first()
                .map(|f| f.3.clone())
                .unwrap_or_else(|| "none".into())
        )));
    }
    Ok(SweepResult {
        config: config.clone(),
        cells: done,
        failed_cells: failed,
    })
}

fn common_header(out: &mut String, config: &SweepConfig, title: &str) {
    let _ = writeln!(out, "# ugdyn {title} v{}", crate::VERSION);
    let _ = writeln!(out, "# n_x = {}", config.n_x);
    let _ = writeln!(out, "# n_eq = {}", config.n_eq);
    let _ = writeln!(out, "# alpha = {}", config.alpha);
    let _ = writeln!(out, "# t_end = {}", config.t_end);
    let _ = writeln!(out, "# ensemble = {}", config.ensemble);
    let _ = writeln!(out, "# master_seed = {}", config.master_seed);
    let _ = writeln!(out, "# beta = {}", config.beta);
    let _ = writeln!(out, "# vicinity_space = {}", crate::io::VICINITY_SPACE);
    let _ = writeln!(out, "# vicinity_radius = {}", config.vicinity_radius);
    let _ = writeln!(out, "# vicinity_radius_unit = {}", crate::io::VICINITY_RADIUS_UNIT);
    let _ = writeln!(out, "# y_denominator = {}", crate::io::Y_DENOMINATOR);
    let _ = writeln!(out, "# tool_version = {}", crate::VERSION);
}

/// Y(delta) curves per cell (figure-4 analogue; long format).
pub fn y_curves_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    common_header(&mut out, &result.config, "y_curves");
    out.push_str("k,epsilon,target_unsat,instance_hash,delta,y,y_total\n");
    for cell in &result.cells {
        let r = &cell.report;
        for (i, &delta) in cell.residency.delta_grid.iter().enumerate() {
            if cell.residency.is_empty() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{delta},,",
                    r.k, r.epsilon, r.target_unsat, r.instance_hash
                );
            } else {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{delta},{},{}",
                    r.k,
                    r.epsilon,
                    r.target_unsat,
                    r.instance_hash,
                    cell.residency.y_values[i],
                    cell.residency.y_values_total[i]
                );
            }
        }
    }
    out
}

/// f(delta, k) grid at each fixed epsilon (figure-5 analogue).
pub fn f_grid_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    common_header(&mut out, &result.config, "f_grid");
    out.push_str("epsilon,k,delta,f\n");
    for cell in &result.cells {
        let r = &cell.report;
        for (i, &delta) in cell.residency.delta_grid.iter().enumerate() {
            match cell.f_values[i] {
                Some(f) => {
                    let _ = writeln!(out, "{},{},{delta},{f}", r.epsilon, r.k);
                }
                None => {
                    let _ = writeln!(out, "{},{},{delta},", r.epsilon, r.k);
                }
            }
        }
    }
    out
}

/// f over (delta, 1 - epsilon) at each fixed k (figure-6 analogue).
pub fn f_gap_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    common_header(&mut out, &result.config, "f_gap");
    out.push_str("k,one_minus_epsilon,epsilon,delta,gap,f\n");
    for cell in &result.cells {
        let r = &cell.report;
        let one_minus = 1.0 - r.epsilon;
        for (i, &delta) in cell.residency.delta_grid.iter().enumerate() {
            let gap = one_minus - delta;
            match cell.f_values[i] {
                Some(f) => {
                    let _ = writeln!(
                        out,
                        "{},{one_minus},{},{delta},{gap},{f}",
                        r.k, r.epsilon
                    );
                }
                None => {
                    let _ = writeln!(out, "{},{one_minus},{},{delta},{gap},", r.k, r.epsilon);
                }
            }
        }
    }
    out
}

/// JSON manifest: config echo, per-cell seeds and hashes, conventions, failures.
pub fn manifest_json(result: &SweepResult) -> String {
    let manifest = serde_json::json!({
        "tool": "ugdyn",
        "tool_version": crate::VERSION,
        "config": result.config,
        "conventions": {
            "vicinity_space": crate::io::VICINITY_SPACE,
            "vicinity_radius": result.config.vicinity_radius,
            "vicinity_radius_unit": crate::io::VICINITY_RADIUS_UNIT,
            "y_denominator": crate::io::Y_DENOMINATOR,
            "beta": result.config.beta,
            "target_unsat_rule": "round(epsilon * n_eq)",
            "seed_rule": "instance = splitmix64(master_seed, cell_index); trajectory = splitmix64(instance_seed, 0x1000 + index)",
        },
        "cells": result.cells.iter().map(|c| &c.report).collect::<Vec<_>>(),
        "failed_cells": result.failed_cells.iter().map(|(index, k, epsilon, msg)| {
            serde_json::json!({ "cell_index": index, "k": k, "epsilon": epsilon, "error": msg })
        }).collect::<Vec<_>>(),
        "partial": result.is_partial(),
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    text
}

/// Writes the four result files into `dir`.
pub fn write_outputs(result: &SweepResult, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("y_curves.csv"), y_curves_csv(result))?;
    std::fs::write(dir.join("f_grid.csv"), f_grid_csv(result))?;
    std::fs::write(dir.join("f_gap.csv"), f_gap_csv(result))?;
    std::fs::write(dir.join("manifest.json"), manifest_json(result))?;
    Ok(())
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FsleSweepConfig {
    pub alpha_list: Vec<f64>,
    pub n_instances: usize,
    pub seeds_per_instance: usize,
    pub n_x: usize,
    pub n_eq: usize,
    pub k: u32,
    pub target_unsat: usize,
    pub master_seed: u64,
    pub worker_count: usize,
}

impl Default for FsleSweepConfig {
    fn default() -> Self {
        FsleSweepConfig {
            alpha_list: vec![1.0, 1.5, 2.0],
            n_instances: 2,
            seeds_per_instance: 50,
            n_x: 5,
            n_eq: 8,
            k: 3,
            target_unsat: 1,
            master_seed: 0,
            worker_count: 1,
        }
    }
}

#[derive(Debug)]
pub struct FsleSweepResult {
    pub config: FsleSweepConfig,
    pub instance_hashes: Vec<String>,
    /// Pooled mean/std per alpha, in alpha_list order.
    pub estimates: Vec<FsleEstimate>,
}

/// Figure-A protocol: per alpha, pool FSLE over n_instances x seeds runs.
pub fn run_fsle_sweep(
    config: &FsleSweepConfig,
    params: &FsleParams,
) -> Result<FsleSweepResult> {
    if config.alpha_list.is_empty() {
        return Err(Error::invalid("alpha_list must be nonempty"));
    }
    if config.n_instances == 0 || config.seeds_per_instance == 0 {
        return Err(Error::invalid("n_instances and seeds_per_instance must be >= 1"));
    }
    if config.worker_count == 0 {
        return Err(Error::invalid("worker_count must be >= 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build worker pool: {e}")))?;

    let mut instances: Vec<(TwoLinInstance, CnfFormula)> = Vec::new();
    for i in 0..config.n_instances {
        let seed = derive_seed(config.master_seed, 0x2000 + i as u64);
        let gen = generate_polygon(config.n_x, config.n_eq, config.k, config.target_unsat, seed)?;
        let formula = encode(&gen.instance)?;
        instances.push((gen.instance, formula));
    }
    let instance_hashes: Vec<String> =
        instances.iter().map(|(inst, _)| inst.content_hash()).collect();

    let mut estimates = Vec::with_capacity(config.alpha_list.len());
    for &alpha in &config.alpha_list {
        let jobs: Vec<(usize, u64)> = (0..config.n_instances)
            .flat_map(|i| {
                (0..config.seeds_per_instance)
                    .map(move |s| (i, derive_seed(config.master_seed, ((i as u64) << 32) | s as u64)))
            })
            .collect();
        let runs: Vec<Result<FsleEstimate>> = pool.install(|| {
            jobs.par_iter()
                .map(|&(i, seed)| {
                    let run_config = IntegrateConfig {
                        alpha,
                        seed,
                        ..Default::default()
                    };
                    fsle(&instances[i].1, &run_config, params, seed)
                })
                .collect()
        });
        let mut lambdas = Vec::new();
        let mut converged = 0usize;
        for run in runs {
            let est = run?;
            lambdas.push(est.lambda_mean);
            if est.converged {
                converged += 1;
            }
        }
        let n = lambdas.len() as f64;
        let mean = lambdas.iter().sum::<f64>() / n;
        let var = lambdas.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
        estimates.push(FsleEstimate {
            alpha,
            lambda_mean: mean,
            lambda_std: var.sqrt(),
            delta0: params.delta0,
            delta1: params.delta1,
            n_segments: params.n_segments,
            converged: converged * 2 > lambdas.len(),
        });
    }

    Ok(FsleSweepResult {
        config: config.clone(),
        instance_hashes,
        estimates,
    })
}
