//! Observables computed from trajectories: vicinity residency Y(delta), the
//! scaling exponent f, finite-size Lyapunov exponents, the MLE lower-bound
//! integral, and ergodicity diagnostics.
//!
//! Vicinity distances use only the x-block spins: assignments live on the x
//! variables, the z blocks are encoding artifacts. Y(delta)'s default
//! denominator is the non-transient time; the total-time convention is computed
//! alongside.

use crate::cnf::CnfFormula;
use crate::error::{Error, Result};
use crate::instance::{Assignment, TwoLinInstance};
use crate::integrate::{initial_state, IntegrateConfig, Integrator, TrajectoryRecord};

/// Default per-spin L1 vicinity radius around an assignment corner. The ball
/// threshold scales with the number of x spins: a sample is IN when the total
/// x-block L1 distance is at most `radius * n_x * k`. A fixed total radius
/// would shrink the ball relative to the corner geometry as n_x or k grows,
/// making residency incomparable across alphabet sizes.
pub const DEFAULT_VICINITY_RADIUS: f64 = 0.1;

/// Per-sample vicinity label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VicinityLabel {
    /// Within the L1 ball around the decoded assignment's one-hot corner.
    In(Assignment),
    /// Outside every assignment vicinity; excluded from residency statistics.
    Transient,
}

/// L1 distance between the x-block spins and the one-hot corner of `assignment`.
pub fn x_corner_distance(s: &[f64], formula: &CnfFormula, assignment: &Assignment) -> f64 {
    let k = formula.k as usize;
    let mut dist = 0.0;
    for (i, &v) in assignment.values.iter().enumerate() {
        let base = formula.x_block(i);
        for t in 0..k {
            let corner = if t == v as usize { 1.0 } else { -1.0 };
            dist += (s[base + t] - corner).abs();
        }
    }
    dist
}

/// Labels every sample of the record: IN(decoded assignment) when the x-block
/// spins are within `radius` per spin (total L1 `radius * n_x * k`) of the
/// decoded corner, TRANSIENT otherwise.
pub fn vicinity_episode_labels(
    record: &TrajectoryRecord,
    formula: &CnfFormula,
    radius: f64,
) -> Vec<VicinityLabel> {
    let threshold = radius * (formula.n_x * formula.k as usize) as f64;
    record
        .samples
        .iter()
        .zip(&record.spin_states)
        .map(|(sample, s)| {
            if x_corner_distance(s, formula, &sample.assignment) <= threshold {
                VicinityLabel::In(sample.assignment.clone())
            } else {
                VicinityLabel::Transient
            }
        })
        .collect()
}

/// Y(delta) over a delta grid with ensemble bookkeeping.
#[derive(Debug, Clone)]
pub struct ResidencyTable {
    pub delta_grid: Vec<f64>,
    /// Default convention: denominator = non-transient time. Empty when the
    /// pooled vicinity time is zero (see [`ResidencyTable::is_empty`]).
    pub y_values: Vec<f64>,
    /// Alternative convention: denominator = total time.
    pub y_values_total: Vec<f64>,
    pub vicinity_radius: f64,
    pub total_time: f64,
    pub vicinity_time: f64,
    pub transient_time: f64,
    pub ensemble_size: usize,
}

impl ResidencyTable {
    /// True when no sample of any pooled trajectory entered a vicinity; Y is
    /// then undefined rather than zero.
    pub fn is_empty(&self) -> bool {
        self.vicinity_time == 0.0
    }
}

/// Pools residency statistics over an ensemble of records.
#[derive(Debug, Clone)]
pub struct ResidencyAccumulator {
    delta_grid: Vec<f64>,
    radius: f64,
    time_at_least: Vec<f64>,
    vicinity_time: f64,
    transient_time: f64,
    total_time: f64,
    ensemble_size: usize,
}

impl ResidencyAccumulator {
    pub fn new(delta_grid: Vec<f64>, radius: f64) -> Result<Self> {
        if delta_grid.is_empty() {
            return Err(Error::invalid("delta grid is empty"));
        }
        if delta_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("delta grid must be strictly ascending"));
        }
        if delta_grid.iter().any(|&d| d <= 0.0 || d > 1.0) {
            return Err(Error::invalid("delta values must lie in (0, 1]"));
        }
        if !(radius > 0.0) {
            return Err(Error::invalid("vicinity radius must be positive"));
        }
        let n = delta_grid.len();
        Ok(ResidencyAccumulator {
            delta_grid,
            radius,
            time_at_least: vec![0.0; n],
            vicinity_time: 0.0,
            transient_time: 0.0,
            total_time: 0.0,
            ensemble_size: 0,
        })
    }

    /// One observation: whether it was inside a vicinity and, if so, the
    /// satisfied fraction there. Usable directly from parsed trajectory rows.
    pub fn add_sample(&mut self, in_vicinity: bool, sat_frac: f64, dt: f64) {
        self.total_time += dt;
        if in_vicinity {
            self.vicinity_time += dt;
            for (slot, &delta) in self.time_at_least.iter_mut().zip(&self.delta_grid) {
                if sat_frac >= delta {
                    *slot += dt;
                }
            }
        } else {
            self.transient_time += dt;
        }
    }

    pub fn bump_ensemble(&mut self) {
        self.ensemble_size += 1;
    }

    pub fn add_record(
        &mut self,
        record: &TrajectoryRecord,
        formula: &CnfFormula,
        instance: &TwoLinInstance,
    ) {
        let dt = record.obs_dt;
        let n_eq = instance.n_eq() as f64;
        let labels = vicinity_episode_labels(record, formula, self.radius);
        for (label, sample) in labels.iter().zip(&record.samples) {
            let in_vicinity = matches!(label, VicinityLabel::In(_));
            self.add_sample(in_vicinity, sample.sat_count as f64 / n_eq, dt);
        }
        self.bump_ensemble();
    }

    pub fn finish(self) -> ResidencyTable {
        let (y_values, y_values_total) = if self.vicinity_time > 0.0 {
            (
                self.time_at_least
                    .iter()
                    .map(|&t| t / self.vicinity_time)
                    .collect(),
                self.time_at_least
                    .iter()
                    .map(|&t| t / self.total_time)
                    .collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        ResidencyTable {
            delta_grid: self.delta_grid,
            y_values,
            y_values_total,
            vicinity_radius: self.radius,
            total_time: self.total_time,
            vicinity_time: self.vicinity_time,
            transient_time: self.transient_time,
            ensemble_size: self.ensemble_size,
        }
    }
}

/// Residency table for a single record.
pub fn residency(
    record: &TrajectoryRecord,
    formula: &CnfFormula,
    instance: &TwoLinInstance,
    delta_grid: &[f64],
    radius: f64,
) -> Result<ResidencyTable> {
    let mut acc = ResidencyAccumulator::new(delta_grid.to_vec(), radius)?;
    acc.add_record(record, formula, instance);
    Ok(acc.finish())
}

/// f = log_{n_x}(ln beta - ln y), defined when the argument exceeds 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalingExponent {
    Defined(f64),
    /// ln beta - ln y was <= 1 (or y was not in (0, 1]); carries the raw value.
    Undefined { raw: f64 },
}

impl ScalingExponent {
    pub fn value(&self) -> Option<f64> {
        match self {
            ScalingExponent::Defined(f) => Some(*f),
            ScalingExponent::Undefined { .. } => None,
        }
    }
}

pub fn scaling_exponent_f(y: f64, n_x: usize, beta: f64) -> ScalingExponent {
    if !(y > 0.0 && y <= 1.0) || !(beta > 0.0) {
        return ScalingExponent::Undefined { raw: f64::NAN };
    }
    let raw = beta.ln() - y.ln();
    if raw <= 1.0 {
        return ScalingExponent::Undefined { raw };
    }
    ScalingExponent::Defined(raw.ln() / (n_x as f64).ln())
}

/// Parameters of the perturbation-doubling FSLE experiment.
#[derive(Debug, Clone)]
pub struct FsleParams {
    pub delta0: f64,
    pub delta1: f64,
    pub n_segments: usize,
    /// Per-segment time cap; a segment that never reaches delta1 contributes 0.
    pub segment_cap: f64,
    /// Cadence at which the separation is measured.
    pub check_dt: f64,
}

impl Default for FsleParams {
    fn default() -> Self {
        FsleParams {
            delta0: 1e-8,
            delta1: 1e-4,
            n_segments: 6,
            segment_cap: 50.0,
            check_dt: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FsleEstimate {
    pub alpha: f64,
    pub lambda_mean: f64,
    pub lambda_std: f64,
    pub delta0: f64,
    pub delta1: f64,
    pub n_segments: usize,
    /// The fiducial trajectory reached a solution equilibrium.
    pub converged: bool,
}

/// Finite-size Lyapunov exponent by repeated perturbation doubling.
///
/// A fiducial trajectory is integrated from a seeded initial condition; at each
/// segment start a clone is perturbed on one randomly chosen x-spin by delta0
/// and both are co-integrated until the L2 spin separation reaches delta1 or
/// the segment cap elapses. Per-segment rate = ln(delta1/delta0) / elapsed,
/// 0 when the cap is hit. Deterministic given the seed.
pub fn fsle(
    formula: &CnfFormula,
    config: &IntegrateConfig,
    params: &FsleParams,
    seed: u64,
) -> Result<FsleEstimate> {
    use rand::{Rng, SeedableRng};
    if !(params.delta0 > 0.0 && params.delta0 < params.delta1) {
        return Err(Error::invalid("FSLE requires 0 < delta0 < delta1"));
    }
    if params.n_segments == 0 {
        return Err(Error::invalid("n_segments must be >= 1"));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5f5e_100);
    let n_x_spins = formula.n_x * formula.k as usize;

    let mut fiducial = Integrator::new(formula, config)?;
    let mut state = initial_state(formula, config.a_init, config.seed);

    let mut rates = Vec::with_capacity(params.n_segments);
    let mut converged = false;

    for _segment in 0..params.n_segments {
        if fiducial.dynamics.energy(&state.s, &state.log_a) < 1e-8 {
            converged = true;
        }
        // perturb one x-spin, pushed inward at the boundary
        let mut perturbed = state.clone();
        let p = rng.gen_range(0..n_x_spins);
        let dir = if perturbed.s[p] + params.delta0 > 1.0 { -1.0 } else { 1.0 };
        perturbed.s[p] += dir * params.delta0;

        let mut shadow = Integrator::new(formula, config)?;
        let mut elapsed = 0.0;
        let mut sep = params.delta0;
        while elapsed < params.segment_cap {
            let t_next = state.t + params.check_dt;
            fiducial.advance_to(&mut state, t_next)?;
            shadow.advance_to(&mut perturbed, t_next)?;
            elapsed += params.check_dt;
            sep = state
                .s
                .iter()
                .zip(&perturbed.s)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if sep >= params.delta1 {
                break;
            }
        }
        if sep >= params.delta1 {
            rates.push((params.delta1 / params.delta0).ln() / elapsed);
        } else if converged {
            // contraction rate at the equilibrium; nonpositive by construction
            rates.push((sep.max(f64::MIN_POSITIVE) / params.delta0).ln() / elapsed);
        } else {
            rates.push(0.0);
        }
        if converged {
            break;
        }
    }

    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok(FsleEstimate {
        alpha: config.alpha,
        lambda_mean: mean,
        lambda_std: var.sqrt(),
        delta0: params.delta0,
        delta1: params.delta1,
        n_segments: rates.len(),
        converged,
    })
}

/// Time-average lower bound on the maximum Lyapunov exponent:
/// (1/t) Integral K_g(s(tau))^alpha d tau by trapezoidal accumulation.
pub fn mle_lower_bound(
    record: &TrajectoryRecord,
    formula: &CnfFormula,
    alpha: f64,
    clause_index: usize,
) -> Result<f64> {
    if clause_index >= formula.num_clauses() {
        return Err(Error::invalid(format!(
            "clause index {clause_index} out of range (M = {})",
            formula.num_clauses()
        )));
    }
    if record.samples.len() < 2 {
        return Err(Error::invalid("record must contain at least two samples"));
    }
    let dynamics = crate::dynamics::Dynamics::new(formula, alpha)?;
    let values: Vec<f64> = record
        .spin_states
        .iter()
        .map(|s| dynamics.clause_k(s, clause_index).max(0.0).powf(alpha))
        .collect();
    let mut integral = 0.0;
    for (w, ts) in values.windows(2).zip(record.samples.windows(2)) {
        let dt = ts[1].t - ts[0].t;
        integral += 0.5 * (w[0] + w[1]) * dt;
    }
    let span = record.samples.last().unwrap().t - record.samples[0].t;
    Ok(integral / span)
}

/// Empirical face of the ergodicity property at the level of assignment corners.
#[derive(Debug, Clone)]
pub struct ErgodicitySummary {
    /// Distinct assignments appearing as IN labels.
    pub distinct_assignments: usize,
    /// Longest single-vicinity dwell, in time units.
    pub max_dwell: f64,
    /// Number of separate episodes of the most-visited assignment.
    pub recurrence_count: usize,
}

/// Episode statistics over a stream of per-sample vicinity labels (`None` =
/// transient). An episode ends when the label changes or drops to transient.
pub fn episode_stats<T: Eq + std::hash::Hash + Clone>(
    labels: &[Option<T>],
    dt: f64,
) -> ErgodicitySummary {
    use std::collections::HashMap;
    let mut episodes: HashMap<T, usize> = HashMap::new();
    let mut max_dwell = 0.0f64;
    let mut current: Option<(&T, f64)> = None;
    for label in labels {
        match label {
            Some(a) => {
                current = match current {
                    Some((prev, dwell)) if prev == a => Some((a, dwell + dt)),
                    _ => {
                        if let Some((_, dwell)) = current.take() {
                            max_dwell = max_dwell.max(dwell);
                        }
                        *episodes.entry(a.clone()).or_insert(0) += 1;
                        Some((a, dt))
                    }
                };
            }
            None => {
                if let Some((_, dwell)) = current.take() {
                    max_dwell = max_dwell.max(dwell);
                }
            }
        }
    }
    if let Some((_, dwell)) = current {
        max_dwell = max_dwell.max(dwell);
    }

    let recurrence_count = episodes.values().copied().max().unwrap_or(0);
    ErgodicitySummary {
        distinct_assignments: episodes.len(),
        max_dwell,
        recurrence_count,
    }
}

/// Episode statistics over the record's vicinity labels. An episode ends when
/// the label changes or the decoded assignment changes, whichever first.
pub fn ergodicity_diagnostics(
    record: &TrajectoryRecord,
    formula: &CnfFormula,
    radius: f64,
) -> ErgodicitySummary {
    let labels: Vec<Option<Assignment>> = vicinity_episode_labels(record, formula, radius)
        .into_iter()
        .map(|label| match label {
            VicinityLabel::In(a) => Some(a),
            VicinityLabel::Transient => None,
        })
        .collect();
    episode_stats(&labels, record.obs_dt)
}

/// Trapezoidal accumulation of K_m^alpha for every clause along a frozen spin
/// path; this is the log-weight increment each a_m law would accumulate.
pub fn accumulated_log_weights(
    record: &TrajectoryRecord,
    formula: &CnfFormula,
    alpha: f64,
) -> Result<Vec<f64>> {
    let dynamics = crate::dynamics::Dynamics::new(formula, alpha)?;
    let m_total = formula.num_clauses();
    let mut acc = vec![0.0; m_total];
    for (pair_s, pair_t) in record
        .spin_states
        .windows(2)
        .zip(record.samples.windows(2))
    {
        let dt = pair_t[1].t - pair_t[0].t;
        for m in 0..m_total {
            let k0 = dynamics.clause_k(&pair_s[0], m).max(0.0).powf(alpha);
            let k1 = dynamics.clause_k(&pair_s[1], m).max(0.0).powf(alpha);
            acc[m] += 0.5 * (k0 + k1) * dt;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{encode, encode_assignment};
    use crate::instance::{generate_polygon, Assignment};
    use crate::integrate::Sample;
    use approx::assert_relative_eq;

    fn synthetic_record(
        formula: &CnfFormula,
        instance: &TwoLinInstance,
        segments: &[(Vec<u32>, usize, bool)], // (assignment, samples, in_vicinity)
    ) -> TrajectoryRecord {
        let mut samples = Vec::new();
        let mut spin_states = Vec::new();
        let mut log_a_states = Vec::new();
        let mut t = 0.0;
        for (values, count, in_vicinity) in segments {
            let a = Assignment { values: values.clone() };
            let sat = instance.satisfied_count(&a).unwrap();
            let mut s = encode_assignment(formula, &a, instance).unwrap();
            if !in_vicinity {
                // push the x-spins far from every corner
                for v in s.iter_mut().take(formula.n_x * formula.k as usize) {
                    *v *= 0.2;
                }
            }
            for _ in 0..*count {
                samples.push(Sample {
                    t,
                    assignment: a.clone(),
                    sat_count: sat,
                    energy: 0.0,
                    max_k: 0.0,
                    log_a_max: 0.0,
                });
                spin_states.push(s.clone());
                log_a_states.push(vec![0.0; formula.num_clauses()]);
                t += 1.0;
            }
        }
        TrajectoryRecord {
            alpha: 1.0,
            obs_dt: 1.0,
            samples,
            spin_states,
            log_a_states,
            used_stiff_fallback: false,
        }
    }

    #[test]
    fn corner_distance_zero_and_origin() {
        let gen = generate_polygon(3, 3, 2, 0, 1).unwrap();
        let f = encode(&gen.instance).unwrap();
        let a = gen.reference.clone();
        let s = encode_assignment(&f, &a, &gen.instance).unwrap();
        assert_eq!(x_corner_distance(&s, &f, &a), 0.0);
        let zero = vec![0.0; f.num_spins()];
        let decoded = crate::cnf::decode_assignment(&zero, &f);
        assert_relative_eq!(
            x_corner_distance(&zero, &f, &decoded),
            (f.n_x * f.k as usize) as f64
        );
    }

    #[test]
    fn small_perturbation_stays_in_vicinity() {
        let gen = generate_polygon(3, 3, 2, 0, 1).unwrap();
        let f = encode(&gen.instance).unwrap();
        let a = gen.reference.clone();
        let mut s = encode_assignment(&f, &a, &gen.instance).unwrap();
        s[0] -= 0.05_f64.copysign(s[0]);
        assert!(x_corner_distance(&s, &f, &a) <= 0.1);
    }

    #[test]
    fn residency_hand_computed_example() {
        // 3 units at a 2/3-sat corner, 1 unit at a 1/3-sat corner, 6 units transient
        use crate::instance::TwoLinEquation;
        let inst = TwoLinInstance {
            k: 2,
            n_x: 4,
            equations: vec![
                TwoLinEquation { i: 0, j: 1, b: 0 },
                TwoLinEquation { i: 1, j: 2, b: 0 },
                TwoLinEquation { i: 2, j: 3, b: 0 },
            ],
            designed_opt: None,
        };
        let f = encode(&inst).unwrap();
        let two = vec![0, 0, 1, 1]; // satisfies equations 0 and 2
        let one = vec![0, 1, 1, 0]; // satisfies equation 1 only
        assert_eq!(inst.satisfied_count(&Assignment { values: two.clone() }).unwrap(), 2);
        assert_eq!(inst.satisfied_count(&Assignment { values: one.clone() }).unwrap(), 1);
        let rec = synthetic_record(
            &f,
            &inst,
            &[(two, 3, true), (one, 1, true), (vec![0, 1, 0, 1], 6, false)],
        );
        let table = residency(&rec, &f, &inst, &[1.0 / 3.0, 2.0 / 3.0, 0.9], 0.1).unwrap();
        assert_relative_eq!(table.y_values[0], 1.0);
        assert_relative_eq!(table.y_values[1], 0.75);
        assert_relative_eq!(table.y_values[2], 0.0);
        assert_relative_eq!(table.vicinity_time, 4.0);
        assert_relative_eq!(table.transient_time, 6.0);
        assert_relative_eq!(table.vicinity_time + table.transient_time, table.total_time);
        // total-time convention
        assert_relative_eq!(table.y_values_total[0], 0.4);
    }

    #[test]
    fn residency_pinned_sat_corner() {
        let gen = generate_polygon(3, 3, 2, 0, 5).unwrap();
        let f = encode(&gen.instance).unwrap();
        let rec = synthetic_record(&f, &gen.instance, &[(gen.reference.values.clone(), 5, true)]);
        let table = residency(&rec, &f, &gen.instance, &[0.25, 0.5, 1.0], 0.1).unwrap();
        assert!(table.y_values.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn residency_empty_result() {
        let gen = generate_polygon(3, 3, 2, 1, 5).unwrap();
        let f = encode(&gen.instance).unwrap();
        let rec = synthetic_record(&f, &gen.instance, &[(vec![0, 0, 0], 4, false)]);
        let table = residency(&rec, &f, &gen.instance, &[0.5], 0.1).unwrap();
        assert!(table.is_empty());
        assert!(table.y_values.is_empty());
    }

    #[test]
    fn residency_monotone_in_delta() {
        let gen = generate_polygon(4, 5, 2, 1, 9).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 30.0,
            seed: 2,
            ..Default::default()
        };
        let rec = crate::integrate::integrate(&f, &gen.instance, &config).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let table = residency(&rec, &f, &gen.instance, &grid, 0.1).unwrap();
        if !table.is_empty() {
            for w in table.y_values.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn residency_invariant_under_time_rescaling() {
        let gen = generate_polygon(3, 3, 2, 1, 3).unwrap();
        let f = encode(&gen.instance).unwrap();
        let mut rec = synthetic_record(
            &f,
            &gen.instance,
            &[(gen.reference.values.clone(), 4, true), (vec![0, 0, 0], 3, false)],
        );
        let t1 = residency(&rec, &f, &gen.instance, &[0.5], 0.1).unwrap();
        rec.obs_dt *= 7.0;
        for (i, s) in rec.samples.iter_mut().enumerate() {
            s.t = i as f64 * 7.0;
        }
        let t2 = residency(&rec, &f, &gen.instance, &[0.5], 0.1).unwrap();
        assert_relative_eq!(t1.y_values[0], t2.y_values[0]);
    }

    #[test]
    fn scaling_exponent_identities() {
        match scaling_exponent_f((-11.0f64).exp(), 11, 1.0) {
            ScalingExponent::Defined(f) => assert_relative_eq!(f, 1.0, epsilon = 1e-12),
            _ => panic!("expected defined"),
        }
        match scaling_exponent_f((-121.0f64).exp(), 11, 1.0) {
            ScalingExponent::Defined(f) => assert_relative_eq!(f, 2.0, epsilon = 1e-12),
            _ => panic!("expected defined"),
        }
        match scaling_exponent_f((-(11.0f64).sqrt()).exp(), 11, 1.0) {
            ScalingExponent::Defined(f) => assert_relative_eq!(f, 0.5, epsilon = 1e-12),
            _ => panic!("expected defined"),
        }
    }

    #[test]
    fn scaling_exponent_undefined_region() {
        match scaling_exponent_f(0.9, 11, 1.0) {
            ScalingExponent::Undefined { raw } => {
                assert_relative_eq!(raw, -(0.9f64.ln()), epsilon = 1e-12)
            }
            _ => panic!("expected undefined"),
        }
    }

    #[test]
    fn scaling_exponent_decreasing_in_y() {
        // smaller y means larger f
        let mut prev = f64::NEG_INFINITY;
        for y_exp in [-5.0, -10.0, -20.0, -40.0] {
            let f = scaling_exponent_f((y_exp as f64).exp(), 8, 1.0)
                .value()
                .unwrap();
            assert!(f > prev);
            prev = f;
        }
    }

    #[test]
    fn mle_constant_synthetic() {
        // constant record with K_g = 0.25 and alpha = 2 integrates to 0.0625
        let gen = generate_polygon(3, 3, 2, 1, 3).unwrap();
        let f = encode(&gen.instance).unwrap();
        let mut rec = synthetic_record(&f, &gen.instance, &[(vec![0, 0, 0], 5, false)]);
        // overwrite spin states with all-zero: every binary clause has K = 0.25
        for s in &mut rec.spin_states {
            s.fill(0.0);
        }
        let bound = mle_lower_bound(&rec, &f, 2.0, 0).unwrap();
        assert_relative_eq!(bound, 0.0625, epsilon = 1e-12);
    }

    #[test]
    fn mle_bounded_by_max_sample() {
        let gen = generate_polygon(4, 5, 2, 1, 10).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 10.0,
            seed: 3,
            ..Default::default()
        };
        let rec = crate::integrate::integrate(&f, &gen.instance, &config).unwrap();
        let dynamics = crate::dynamics::Dynamics::new(&f, 2.0).unwrap();
        for g in [0, f.num_clauses() / 2, f.num_clauses() - 1] {
            let bound = mle_lower_bound(&rec, &f, 2.0, g).unwrap();
            let max_sample = rec
                .spin_states
                .iter()
                .map(|s| dynamics.clause_k(s, g).powf(2.0))
                .fold(0.0, f64::max);
            assert!(bound >= 0.0);
            assert!(bound <= max_sample + 1e-12);
        }
    }

    #[test]
    fn ergodicity_episode_bookkeeping() {
        let gen = generate_polygon(3, 3, 2, 1, 3).unwrap();
        let f = encode(&gen.instance).unwrap();
        let a = gen.reference.values.clone();
        let b = vec![
            (gen.reference.values[0] + 1) % 2,
            gen.reference.values[1],
            gen.reference.values[2],
        ];
        let rec = synthetic_record(
            &f,
            &gen.instance,
            &[
                (a.clone(), 3, true),
                (vec![0, 0, 0], 2, false),
                (b, 1, true),
                (vec![0, 0, 0], 1, false),
                (a, 2, true),
            ],
        );
        let summary = ergodicity_diagnostics(&rec, &f, 0.1);
        assert_eq!(summary.distinct_assignments, 2);
        assert_relative_eq!(summary.max_dwell, 3.0);
        assert_eq!(summary.recurrence_count, 2);
    }

    #[test]
    fn alpha_two_accumulates_less_log_weight() {
        // K^2 <= K pointwise, so the alpha = 2 law accumulates less on the same path
        let gen = generate_polygon(4, 5, 2, 1, 12).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 20.0,
            seed: 4,
            alpha: 1.0,
            ..Default::default()
        };
        let rec = crate::integrate::integrate(&f, &gen.instance, &config).unwrap();
        let acc1 = accumulated_log_weights(&rec, &f, 1.0).unwrap();
        let acc2 = accumulated_log_weights(&rec, &f, 2.0).unwrap();
        for (a2, a1) in acc2.iter().zip(&acc1) {
            assert!(*a2 <= a1 + 1e-12);
        }
    }
}
