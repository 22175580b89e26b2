//! Command-line front end: instance generation, encoding, single runs,
//! trajectory analysis, (k, epsilon) sweeps and the FSLE protocol.
//!
//! Every option can also come from a `key = value` config file (`--config`);
//! explicit flags win. Exit codes: 0 success, 2 input error, 3 numerical
//! failure, 4 partial sweep.

use clap::{Args, Parser, Subcommand};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use ugdyn::analysis::{episode_stats, FsleParams, ResidencyAccumulator};
use ugdyn::cnf::{encode, write_dimacs};
use ugdyn::instance::{generate_polygon, TwoLinInstance};
use ugdyn::integrate::{integrate, integrate_from, AInit, IntegrateConfig};
use ugdyn::sweep::{run_fsle_sweep, run_sweep, write_outputs, FsleSweepConfig, SweepConfig};
use ugdyn::{Error, Result};

#[derive(Parser)]
#[command(name = "ugdyn", version = ugdyn::VERSION, about = "2-Lin-k dynamical-system hardness experiments")]
struct Cli {
    /// Key-value config file; command-line flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a polygon 2-Lin-k instance.
    Gen(GenArgs),
    /// Encode an instance file as DIMACS CNF.
    Encode(EncodeArgs),
    /// Integrate one trajectory and write a trajectory CSV.
    Simulate(SimulateArgs),
    /// Compute residency/ergodicity tables from a trajectory CSV.
    Analyze(AnalyzeArgs),
    /// Ensemble sweep over (k, epsilon) cells; writes CSVs and a manifest.
    Sweep(SweepArgs),
    /// Finite-size Lyapunov exponents over an alpha grid.
    Fsle(FsleArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    nx: Option<usize>,
    /// Number of equations; defaults to nx (the bare cycle).
    #[arg(long)]
    neq: Option<usize>,
    /// Number of deliberately inconsistent equations.
    #[arg(long)]
    unsat: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
    /// Integration horizon t_end.
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Weight initialization: 'one' or 'uniform'.
    #[arg(long)]
    a_init: Option<String>,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long)]
    obs_dt: Option<f64>,
    /// L1 vicinity radius used for the in_vicinity column.
    #[arg(long)]
    radius: Option<f64>,
    /// Resume from a binary state dump instead of a seeded initial condition.
    #[arg(long)]
    state_in: Option<PathBuf>,
    /// Write the final state as a binary dump (for restarts).
    #[arg(long)]
    state_out: Option<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trajectory CSV produced by `simulate`.
    #[arg(short, long)]
    input: PathBuf,
    /// Comma-separated delta grid, ascending within (0, 1].
    #[arg(long)]
    deltas: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated alphabet sizes, e.g. 4,6,8.
    #[arg(long)]
    k: Option<String>,
    /// Comma-separated unsat fractions, e.g. 0.4.
    #[arg(long)]
    epsilons: Option<String>,
    /// Comma-separated delta grid.
    #[arg(long)]
    deltas: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    neq: Option<usize>,
    /// Trajectories per cell.
    #[arg(long)]
    ensemble: Option<usize>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    radius: Option<f64>,
    /// Paper-scale defaults (n_x = 11, n_eq = 30, k = 30, ensemble = 300).
    /// Expect a multi-hour run.
    #[arg(long)]
    paper_scale: bool,
    #[arg(short, long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct FsleArgs {
    /// Comma-separated alpha grid, e.g. 1,1.5,2.
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    neq: Option<usize>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    unsat: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
    /// Seeds per instance.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    delta1: Option<f64>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    segment_cap: Option<f64>,
    #[arg(short, long)]
    output: PathBuf,
}

/// `key = value` lines; '#' comments and blank lines ignored.
struct FileConfig {
    map: HashMap<String, String>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<FileConfig> {
        let mut map = HashMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or(Error::Parse {
                    line: idx + 1,
                    msg: "expected 'key = value'".into(),
                })?;
                map.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        Ok(FileConfig { map })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::invalid(format!("config key '{key}': bad value '{raw}'"))),
        }
    }
}

/// flag > config file > default.
fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    file: &FileConfig,
    key: &str,
    default: T,
) -> Result<T> {
    Ok(flag.or(file.get(key)?).unwrap_or(default))
}

fn parse_list<T: std::str::FromStr>(raw: &str, what: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad {what} entry '{part}'")))
        })
        .collect()
}

fn resolve_list<T: std::str::FromStr>(
    flag: Option<String>,
    file: &FileConfig,
    key: &str,
    default: Vec<T>,
) -> Result<Vec<T>> {
    match flag.or_else(|| file.map.get(key).cloned()) {
        Some(raw) => parse_list(&raw, key),
        None => Ok(default),
    }
}

fn cmd_gen(args: GenArgs, file: &FileConfig) -> Result<()> {
    let k = resolve(args.k, file, "k", 3)?;
    let nx = resolve(args.nx, file, "nx", 8)?;
    let neq = resolve(args.neq, file, "neq", nx)?;
    let unsat = resolve(args.unsat, file, "unsat", 0)?;
    let seed = resolve(args.seed, file, "seed", 0)?;
    let gen = generate_polygon(nx, neq, k, unsat, seed)?;
    gen.instance.write_to(&args.output)?;
    println!(
        "wrote {} (k={k} n_x={nx} n_eq={neq} unsat={unsat} hash={})",
        args.output.display(),
        gen.instance.content_hash()
    );
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<()> {
    let instance = TwoLinInstance::read_from(&args.input)?;
    let formula = encode(&instance)?;
    write_dimacs(&formula, &args.output)?;
    println!(
        "wrote {} (p cnf {} {})",
        args.output.display(),
        formula.num_spins(),
        formula.num_clauses()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, file: &FileConfig) -> Result<()> {
    let instance = TwoLinInstance::read_from(&args.input)?;
    let formula = encode(&instance)?;
    let defaults = IntegrateConfig::default();
    let a_init: AInit = args
        .a_init
        .or_else(|| file.map.get("a_init").cloned())
        .map(|raw| raw.parse().map_err(Error::InvalidInput))
        .transpose()?
        .unwrap_or(defaults.a_init);
    let config = IntegrateConfig {
        alpha: resolve(args.alpha, file, "alpha", defaults.alpha)?,
        a_init,
        rtol: resolve(args.rtol, file, "rtol", defaults.rtol)?,
        atol: resolve(args.atol, file, "atol", defaults.atol)?,
        max_step: resolve(args.max_step, file, "max_step", defaults.max_step)?,
        t_end: resolve(args.tmax, file, "tmax", defaults.t_end)?,
        obs_dt: resolve(args.obs_dt, file, "obs_dt", defaults.obs_dt)?,
        seed: resolve(args.seed, file, "seed", defaults.seed)?,
    };
    let radius = resolve(
        args.radius,
        file,
        "radius",
        ugdyn::analysis::DEFAULT_VICINITY_RADIUS,
    )?;

    let record = match &args.state_in {
        Some(path) => {
            let state = ugdyn::io::read_state_dump(path)?;
            if state.s.len() != formula.num_spins()
                || state.log_a.len() != formula.num_clauses()
            {
                return Err(Error::invalid(format!(
                    "state dump dimensions ({}, {}) do not match the formula ({}, {})",
                    state.s.len(),
                    state.log_a.len(),
                    formula.num_spins(),
                    formula.num_clauses()
                )));
            }
            integrate_from(&formula, &instance, &config, state)?
        }
        None => integrate(&formula, &instance, &config)?,
    };

    let csv = ugdyn::io::trajectory_csv(
        &record,
        &formula,
        &config,
        &instance.content_hash(),
        radius,
    );
    std::fs::write(&args.output, csv)?;
    if let Some(path) = &args.state_out {
        let state = record
            .final_state()
            .ok_or_else(|| Error::invalid("trajectory record is empty"))?;
        ugdyn::io::write_state_dump(&state, path)?;
    }
    let last = record.samples.last().expect("record has samples");
    println!(
        "wrote {} (t_end={} V={:.3e} sat={}/{})",
        args.output.display(),
        last.t,
        last.energy,
        last.sat_count,
        instance.n_eq()
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs, file: &FileConfig) -> Result<()> {
    let text = std::fs::read_to_string(&args.input)?;
    let parsed = ugdyn::io::parse_trajectory_csv(&text)?;
    let deltas: Vec<f64> = resolve_list(
        args.deltas,
        file,
        "deltas",
        (1..=9).map(|i| i as f64 / 10.0).collect(),
    )?;
    let beta = resolve(args.beta, file, "beta", 1.0)?;

    let mut acc = ResidencyAccumulator::new(deltas, parsed.vicinity_radius)?;
    for row in &parsed.rows {
        acc.add_sample(
            row.in_vicinity,
            row.sat_count as f64 / parsed.n_eq as f64,
            parsed.obs_dt,
        );
    }
    acc.bump_ensemble();
    let table = acc.finish();

    let labels: Vec<Option<&str>> = parsed
        .rows
        .iter()
        .map(|row| row.in_vicinity.then_some(row.assignment.as_str()))
        .collect();
    let summary = episode_stats(&labels, parsed.obs_dt);

    let mut csv = ugdyn::io::residency_csv(&table, parsed.n_x, beta, &parsed.instance_hash);
    // append ergodicity diagnostics as trailing comment lines
    csv.push_str(&format!(
        "# distinct_assignments = {}\n# max_dwell = {}\n# recurrence_count = {}\n",
        summary.distinct_assignments, summary.max_dwell, summary.recurrence_count
    ));
    std::fs::write(&args.output, csv)?;
    println!(
        "wrote {} (vicinity {:.1}% of total, {} distinct assignments)",
        args.output.display(),
        if table.total_time > 0.0 {
            100.0 * table.vicinity_time / table.total_time
        } else {
            0.0
        },
        summary.distinct_assignments
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs, file: &FileConfig) -> Result<ExitCode> {
    let defaults = SweepConfig::default();
    let (nx_d, neq_d, k_d, ensemble_d) = if args.paper_scale {
        (11, 30, vec![30u32], 300)
    } else {
        (defaults.n_x, defaults.n_eq, defaults.k_list.clone(), defaults.ensemble)
    };
    let config = SweepConfig {
        k_list: resolve_list(args.k, file, "k_list", k_d)?,
        epsilon_list: resolve_list(args.epsilons, file, "epsilon_list", defaults.epsilon_list)?,
        delta_grid: resolve_list(args.deltas, file, "delta_grid", defaults.delta_grid)?,
        alpha: resolve(args.alpha, file, "alpha", defaults.alpha)?,
        n_x: resolve(args.nx, file, "nx", nx_d)?,
        n_eq: resolve(args.neq, file, "neq", neq_d)?,
        ensemble: resolve(args.ensemble, file, "ensemble", ensemble_d)?,
        t_end: resolve(args.tmax, file, "tmax", defaults.t_end)?,
        master_seed: resolve(args.master_seed, file, "master_seed", defaults.master_seed)?,
        worker_count: resolve(args.workers, file, "workers", defaults.worker_count)?,
        beta: resolve(args.beta, file, "beta", defaults.beta)?,
        vicinity_radius: resolve(args.radius, file, "radius", defaults.vicinity_radius)?,
        a_init: defaults.a_init,
    };

    let result = run_sweep(&config)?;
    write_outputs(&result, &args.output_dir)?;
    let quarantined: usize = result.cells.iter().map(|c| c.report.failures.len()).sum();
    println!(
        "wrote {} ({} cells, {} failed cells, {} quarantined trajectories)",
        args.output_dir.display(),
        result.cells.len(),
        result.failed_cells.len(),
        quarantined
    );
    if result.is_partial() {
        eprintln!("ugdyn-error code=4 kind=partial_sweep msg=\"some cells or trajectories failed; see manifest.json\"");
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fsle(args: FsleArgs, file: &FileConfig) -> Result<()> {
    let defaults = FsleSweepConfig::default();
    let config = FsleSweepConfig {
        alpha_list: resolve_list(args.alphas, file, "alpha_list", defaults.alpha_list)?,
        n_instances: resolve(args.instances, file, "instances", defaults.n_instances)?,
        seeds_per_instance: resolve(args.seeds, file, "seeds", defaults.seeds_per_instance)?,
        n_x: resolve(args.nx, file, "nx", defaults.n_x)?,
        n_eq: resolve(args.neq, file, "neq", defaults.n_eq)?,
        k: resolve(args.k, file, "k", defaults.k)?,
        target_unsat: resolve(args.unsat, file, "unsat", defaults.target_unsat)?,
        master_seed: resolve(args.master_seed, file, "master_seed", defaults.master_seed)?,
        worker_count: resolve(args.workers, file, "workers", defaults.worker_count)?,
    };
    let param_defaults = FsleParams::default();
    let params = FsleParams {
        delta0: resolve(args.delta0, file, "delta0", param_defaults.delta0)?,
        delta1: resolve(args.delta1, file, "delta1", param_defaults.delta1)?,
        n_segments: resolve(args.segments, file, "segments", param_defaults.n_segments)?,
        segment_cap: resolve(args.segment_cap, file, "segment_cap", param_defaults.segment_cap)?,
        check_dt: param_defaults.check_dt,
    };

    let result = run_fsle_sweep(&config, &params)?;
    let csv = ugdyn::io::fsle_csv(
        &result.estimates,
        &result.instance_hashes,
        config.seeds_per_instance,
    );
    std::fs::write(&args.output, csv)?;
    let summary: Vec<String> = result
        .estimates
        .iter()
        .map(|e| format!("alpha={} lambda={:.4}", e.alpha, e.lambda_mean))
        .collect();
    println!("wrote {} ({})", args.output.display(), summary.join(", "));
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Gen(args) => cmd_gen(args, &file).map(|()| ExitCode::SUCCESS),
        Command::Encode(args) => cmd_encode(args).map(|()| ExitCode::SUCCESS),
        Command::Simulate(args) => cmd_simulate(args, &file).map(|()| ExitCode::SUCCESS),
        Command::Analyze(args) => cmd_analyze(args, &file).map(|()| ExitCode::SUCCESS),
        Command::Sweep(args) => cmd_sweep(args, &file),
        Command::Fsle(args) => cmd_fsle(args, &file).map(|()| ExitCode::SUCCESS),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!(
                "ugdyn-error code={} kind={} msg=\"{}\"",
                e.exit_code(),
                e.kind(),
                e.to_string().replace('"', "'")
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
