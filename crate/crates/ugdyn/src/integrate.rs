//! Trajectory integration for the spin / log-weight system.
//!
//! Default method is an adaptive Dormand-Prince 5(4) pair; when the step size
//! collapses the integrator switches to a linearly implicit 2-stage Rosenbrock
//! method with an analytic Jacobian. Spins are clamped back to [-1, 1] after
//! every accepted step; the clause weights evolve unclamped in log form.
//! Observables are sampled at a fixed cadence by integrating segment by segment.

use crate::cnf::{decode_assignment, CnfFormula};
use crate::dynamics::Dynamics;
use crate::error::{Error, Result};
use crate::instance::{Assignment, TwoLinInstance};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Initialization rule for the auxiliary clause weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AInit {
    /// a_m(0) = 1 for all m.
    One,
    /// a_m(0) drawn uniformly from (0, 1).
    Uniform01,
}

impl std::str::FromStr for AInit {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "one" | "1" => Ok(AInit::One),
            "uniform" | "uniform01" => Ok(AInit::Uniform01),
            other => Err(format!("unknown a-init rule: {other} (expected 'one' or 'uniform')")),
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct IntegrateConfig {
    pub alpha: f64,
    pub a_init: AInit,
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub t_end: f64,
    /// Observation cadence; vicinity episodes persist O(1) time units.
    pub obs_dt: f64,
    pub seed: u64,
}

impl Default for IntegrateConfig {
    fn default() -> Self {
        IntegrateConfig {
            alpha: 2.0,
            a_init: AInit::One,
            rtol: 1e-5,
            atol: 1e-8,
            max_step: 0.1,
            t_end: 600.0,
            obs_dt: 0.1,
            seed: 0,
        }
    }
}

impl IntegrateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.max_step > 0.0 && self.t_end > 0.0 && self.obs_dt > 0.0) {
            return Err(Error::invalid("max_step, t_end and obs_dt must be positive"));
        }
        Ok(())
    }
}

/// Continuous state: spins s in [-1,1]^N, clause weights as log a in R^M.
#[derive(Debug, Clone)]
pub struct OdeState {
    pub t: f64,
    pub s: Vec<f64>,
    pub log_a: Vec<f64>,
}

impl OdeState {
    pub fn dim(&self) -> usize {
        self.s.len() + self.log_a.len()
    }
}

/// Draws the initial state: spins uniform in (-1, 1), weights per the a-init rule.
pub fn initial_state(formula: &CnfFormula, a_init: AInit, seed: u64) -> OdeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = (0..formula.num_spins())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let log_a = (0..formula.num_clauses())
        .map(|_| match a_init {
            AInit::One => 0.0,
            AInit::Uniform01 => {
                let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                u.ln()
            }
        })
        .collect();
    OdeState { t: 0.0, s, log_a }
}

/// Per-sample derived observables.
#[derive(Debug, Clone)]
pub struct Sample {
    pub t: f64,
    pub assignment: Assignment,
    pub sat_count: usize,
    pub energy: f64,
    pub max_k: f64,
    pub log_a_max: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub alpha: f64,
    pub obs_dt: f64,
    pub samples: Vec<Sample>,
    /// Full spin state per sample.
    pub spin_states: Vec<Vec<f64>>,
    /// Full log-weight state per sample.
    pub log_a_states: Vec<Vec<f64>>,
    /// Whether the stiff fallback was engaged at any point.
    pub used_stiff_fallback: bool,
}

impl TrajectoryRecord {
    pub fn t_end(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn final_state(&self) -> Option<OdeState> {
        let last = self.samples.last()?;
        Some(OdeState {
            t: last.t,
            s: self.spin_states.last()?.clone(),
            log_a: self.log_a_states.last()?.clone(),
        })
    }
}

/// Below this step size the explicit pair has collapsed outright and the
/// L-stable Rosenbrock method takes over as a safety net. The explicit pair
/// stays the workhorse: the fast spin motion here is genuine dynamics, so an
/// implicit method gains no step size and pays a dense LU per step.
const STIFF_SWITCH_H: f64 = 1e-11;
const STIFF_MIN_STEP: f64 = 1e-13;

/// Adaptive stepper over a fixed formula and alpha. Keeps its step-size state
/// across calls so segment-wise observation sampling does not restart control.
pub struct Integrator<'a> {
    pub dynamics: Dynamics<'a>,
    rtol: f64,
    atol: f64,
    max_step: f64,
    h: f64,
    /// Stabilized Chebyshev mode: engaged when the explicit pair becomes
    /// stability-limited by the growing clause weights.
    rkc: bool,
    /// Rosenbrock mode: last-resort fallback on outright step collapse.
    stiff: bool,
    pub used_stiff_fallback: bool,
    rho_check: u32,
    // step scratch, reused across the millions of steps a stiff run takes
    stages: [Vec<f64>; 7],
    work: Vec<f64>,
    y_new: Vec<f64>,
    row_sums: Vec<f64>,
}

impl<'a> Integrator<'a> {
    pub fn new(formula: &'a CnfFormula, config: &IntegrateConfig) -> Result<Self> {
        config.validate()?;
        let dynamics = Dynamics::new(formula, config.alpha)?;
        let dim = formula.num_spins() + formula.num_clauses();
        Ok(Integrator {
            dynamics,
            rtol: config.rtol,
            atol: config.atol,
            max_step: config.max_step,
            h: config.max_step.min(1e-3),
            rkc: false,
            stiff: false,
            used_stiff_fallback: false,
            rho_check: 0,
            stages: std::array::from_fn(|_| vec![0.0; dim]),
            work: vec![0.0; dim],
            y_new: vec![0.0; dim],
            row_sums: vec![0.0; dim],
        })
    }

    /// Forces the implicit stepper from the start (diagnostics and tests).
    #[doc(hidden)]
    pub fn force_stiff(&mut self) {
        self.stiff = true;
        self.used_stiff_fallback = true;
    }

    /// Forces the Chebyshev stepper from the start (diagnostics and tests).
    #[doc(hidden)]
    pub fn force_rkc(&mut self) {
        self.rkc = true;
        self.used_stiff_fallback = true;
    }

    fn eval_packed(&self, y: &[f64], n: usize, out: &mut [f64]) {
        let (s, log_a) = y.split_at(n);
        let (ds, dla) = out.split_at_mut(n);
        self.dynamics.rhs(s, log_a, ds, dla);
    }

    /// Advances the state to `t_target`, clamping spins after accepted steps.
    pub fn advance_to(&mut self, state: &mut OdeState, t_target: f64) -> Result<()> {
        let n = state.s.len();
        let dim = n + state.log_a.len();
        let mut y: Vec<f64> = state.s.iter().chain(state.log_a.iter()).copied().collect();
        let mut t = state.t;

        while t < t_target - 1e-12 {
            let h = self.h.min(self.max_step).min(t_target - t);
            let taken = if self.stiff {
                self.step_ros2(&mut y, n, t, h)?
            } else if self.rkc {
                self.step_rkc(&mut y, n, h)?
            } else {
                self.step_dopri5(&mut y, n, t, h)?
            };
            if let Some(h_taken) = taken {
                t += h_taken;
                // project spins back into the cube
                for v in &mut y[..n] {
                    *v = v.clamp(-1.0, 1.0);
                }
                if y.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Overflow { t });
                }
            }
            if !self.stiff && !self.rkc {
                // small explicit steps with a large spectral bound mean the
                // pair is stability-limited, not accuracy-limited: hand over
                // to the Chebyshev stepper whose cost grows as sqrt(rho)
                self.rho_check += 1;
                if self.h < 2e-3 && self.rho_check >= 16 {
                    self.rho_check = 0;
                    let (s_part, la_part) = y.split_at(n);
                    let rho =
                        self.dynamics.spectral_bound(s_part, la_part, &mut self.row_sums);
                    if self.h * rho > 6.0 {
                        self.rkc = true;
                        self.used_stiff_fallback = true;
                    }
                }
                if self.h < STIFF_SWITCH_H {
                    self.stiff = true;
                    self.used_stiff_fallback = true;
                }
            } else if self.rkc && !self.stiff && self.h < STIFF_SWITCH_H {
                self.stiff = true;
            } else if self.stiff && self.h < STIFF_MIN_STEP {
                let max_log_a = y[n..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                return Err(Error::Stiffness {
                    t,
                    min_step: STIFF_MIN_STEP,
                    max_log_a,
                });
            }
        }

        state.t = t_target;
        state.s.copy_from_slice(&y[..n]);
        state.log_a.copy_from_slice(&y[n..dim]);
        Ok(())
    }

    /// One attempted Dormand-Prince 5(4) step; returns the step size on accept.
    fn step_dopri5(&mut self, y: &mut [f64], n: usize, _t: f64, h: f64) -> Result<Option<f64>> {
        const A: [[f64; 6]; 6] = [
            [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
            [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
            [
                19372.0 / 6561.0,
                -25360.0 / 2187.0,
                64448.0 / 6561.0,
                -212.0 / 729.0,
                0.0,
                0.0,
            ],
            [
                9017.0 / 3168.0,
                -355.0 / 33.0,
                46732.0 / 5247.0,
                49.0 / 176.0,
                -5103.0 / 18656.0,
                0.0,
            ],
            [
                35.0 / 384.0,
                0.0,
                500.0 / 1113.0,
                125.0 / 192.0,
                -2187.0 / 6784.0,
                11.0 / 84.0,
            ],
        ];
        const B5: [f64; 7] = [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
            0.0,
        ];
        const B4: [f64; 7] = [
            5179.0 / 57600.0,
            0.0,
            7571.0 / 16695.0,
            393.0 / 640.0,
            -92097.0 / 339200.0,
            187.0 / 2100.0,
            1.0 / 40.0,
        ];

        let dim = y.len();
        let (rtol, atol) = (self.rtol, self.atol);
        let Integrator { dynamics, stages, work, y_new, .. } = self;
        let k = stages;

        {
            let (s, log_a) = y.split_at(n);
            let (ds, dla) = k[0].split_at_mut(n);
            dynamics.rhs(s, log_a, ds, dla);
        }
        // stage 6 evaluates at the 5th-order solution: row 5 of A equals B5
        for stage in 1..=6 {
            for i in 0..dim {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(stage) {
                    acc += A[stage - 1][j] * kj[i];
                }
                work[i] = y[i] + h * acc;
            }
            let (head, tail) = k.split_at_mut(stage);
            let _ = head;
            let (s, log_a) = work.split_at(n);
            let (ds, dla) = tail[0].split_at_mut(n);
            dynamics.rhs(s, log_a, ds, dla);
        }

        let mut err_sq = 0.0;
        for i in 0..dim {
            let mut y5 = 0.0;
            let mut e = 0.0;
            for kj in k.iter().enumerate().take(7) {
                y5 += B5[kj.0] * kj.1[i];
                e += (B5[kj.0] - B4[kj.0]) * kj.1[i];
            }
            y_new[i] = y[i] + h * y5;
            let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
            let r = h * e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            self.h = (h * factor).min(self.max_step);
            y.copy_from_slice(&self.y_new);
            Ok(Some(h))
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            self.h = h * factor;
            Ok(None)
        }
    }

    /// One attempted step of the damped second-order Runge-Kutta-Chebyshev
    /// method (Sommeijer-Shampine-Verwer). The stage count follows the
    /// Gershgorin spectral bound, so the cost of a step of size h grows like
    /// sqrt(h * rho) instead of h * rho; ideal here because the spin block is
    /// a gradient flow with a real, increasingly negative spectrum.
    fn step_rkc(&mut self, y: &mut [f64], n: usize, h_req: f64) -> Result<Option<f64>> {
        const DAMPING: f64 = 2.0 / 13.0;
        const STAGE_CAP: usize = 512;
        // real-axis stability length is about 0.653 * s^2 at this damping
        const BETA_PER_S2: f64 = 0.653;

        let dim = y.len();
        let (rtol, atol) = (self.rtol, self.atol);
        let rho = {
            let (s_part, la_part) = y.split_at(n);
            self.dynamics
                .spectral_bound(s_part, la_part, &mut self.row_sums)
        };
        let rho = (1.05 * rho).max(1e-12);

        let mut h = h_req;
        let mut n_stages = (1.0 + (h * rho / BETA_PER_S2).sqrt()).ceil() as usize;
        if n_stages < 2 {
            n_stages = 2;
        }
        if n_stages > STAGE_CAP {
            n_stages = STAGE_CAP;
            h = BETA_PER_S2 * ((n_stages * n_stages - 1) as f64) / rho;
        }
        let s_f = n_stages as f64;
        let w0 = 1.0 + DAMPING / (s_f * s_f);

        // w1 = T_s'(w0) / T_s''(w0) via scalar recurrences
        let (mut tjm2, mut tjm1) = (1.0, w0);
        let (mut djm2, mut djm1) = (0.0, 1.0);
        let (mut d2jm2, mut d2jm1) = (0.0, 0.0);
        for _ in 2..=n_stages {
            let tj = 2.0 * w0 * tjm1 - tjm2;
            let dj = 2.0 * tjm1 + 2.0 * w0 * djm1 - djm2;
            let d2j = 4.0 * djm1 + 2.0 * w0 * d2jm1 - d2jm2;
            tjm2 = tjm1;
            tjm1 = tj;
            djm2 = djm1;
            djm1 = dj;
            d2jm2 = d2jm1;
            d2jm1 = d2j;
        }
        let w1 = djm1 / d2jm1;

        let Integrator { dynamics, stages, .. } = self;
        let [f0, fj, yjm2, yjm1, yj, f_new, _spare] = stages;
        let eval = |buf: &[f64], out: &mut [f64]| {
            let (s_part, la_part) = buf.split_at(n);
            let (ds, dla) = out.split_at_mut(n);
            dynamics.rhs(s_part, la_part, ds, dla);
        };

        eval(y, f0);
        let b2 = 1.0 / (4.0 * w0 * w0);
        let b1 = 1.0 / w0;
        let mu1_t = b1 * w1;
        yjm2.copy_from_slice(y);
        for i in 0..dim {
            yjm1[i] = y[i] + h * mu1_t * f0[i];
        }

        // streaming Chebyshev values and b_j through the stage sweep
        let (mut tjm2, mut tjm1) = (w0, 2.0 * w0 * w0 - 1.0);
        let (mut djm2, mut djm1) = (1.0, 4.0 * w0);
        let (mut d2jm2, mut d2jm1) = (0.0, 4.0);
        let mut b_jm2 = b2; // b_0 = b_2
        let mut b_jm1 = b1;
        let mut a_jm1 = 0.0; // a_1 = 1 - b_1 * T_1(w0) = 0

        for j in 2..=n_stages {
            let (tj, dj, d2j) = if j == 2 {
                (tjm1, djm1, d2jm1)
            } else {
                let tj = 2.0 * w0 * tjm1 - tjm2;
                let dj = 2.0 * tjm1 + 2.0 * w0 * djm1 - djm2;
                let d2j = 4.0 * djm1 + 2.0 * w0 * d2jm1 - d2jm2;
                tjm2 = tjm1;
                tjm1 = tj;
                djm2 = djm1;
                djm1 = dj;
                d2jm2 = d2jm1;
                d2jm1 = d2j;
                (tj, dj, d2j)
            };
            let b_j = d2j / (dj * dj);
            let mu = 2.0 * b_j * w0 / b_jm1;
            let nu = -b_j / b_jm2;
            let mu_t = mu * w1 / w0;
            let gamma_t = -a_jm1 * mu_t;

            eval(yjm1, fj);
            for i in 0..dim {
                yj[i] = (1.0 - mu - nu) * y[i]
                    + mu * yjm1[i]
                    + nu * yjm2[i]
                    + h * mu_t * fj[i]
                    + h * gamma_t * f0[i];
            }
            std::mem::swap(yjm2, yjm1);
            std::mem::swap(yjm1, yj);

            b_jm2 = b_jm1;
            b_jm1 = b_j;
            a_jm1 = 1.0 - b_j * tj;
        }

        eval(yjm1, f_new);
        let mut err_sq = 0.0;
        for i in 0..dim {
            let est = 0.8 * (y[i] - yjm1[i]) + 0.4 * h * (f0[i] + f_new[i]);
            let scale = atol + rtol * y[i].abs().max(yjm1[i].abs());
            let r = est / scale;
            err_sq += r * r;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            let factor = if err == 0.0 {
                10.0
            } else {
                (0.8 * err.powf(-1.0 / 3.0)).clamp(0.2, 10.0)
            };
            y.copy_from_slice(yjm1);
            self.h = (h * factor).min(self.max_step);
            Ok(Some(h))
        } else {
            let factor = if err.is_finite() {
                (0.8 * err.powf(-1.0 / 3.0)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            self.h = h * factor;
            Ok(None)
        }
    }

    /// One attempted step of a 2-stage L-stable Rosenbrock method.
    fn step_ros2(&mut self, y: &mut [f64], n: usize, _t: f64, h: f64) -> Result<Option<f64>> {
        let gamma = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
        let dim = y.len();
        let (s, log_a) = y.split_at(n);
        let jac = self.dynamics.jacobian(s, log_a);
        let mut a_mat = DMatrix::<f64>::identity(dim, dim);
        a_mat -= gamma * h * jac;
        let lu = a_mat.lu();

        let mut f1 = vec![0.0; dim];
        self.eval_packed(y, n, &mut f1);
        let k1 = match lu.solve(&DVector::from_column_slice(&f1)) {
            Some(v) => v,
            None => {
                self.h = h * 0.5;
                return Ok(None);
            }
        };

        let y_mid: Vec<f64> = (0..dim).map(|i| y[i] + h * k1[i]).collect();
        let mut f2 = vec![0.0; dim];
        self.eval_packed(&y_mid, n, &mut f2);
        let rhs2 = DVector::from_iterator(dim, (0..dim).map(|i| f2[i] - 2.0 * k1[i]));
        let k2 = match lu.solve(&rhs2) {
            Some(v) => v,
            None => {
                self.h = h * 0.5;
                return Ok(None);
            }
        };

        let mut err_sq = 0.0;
        let mut y_new = vec![0.0; dim];
        for i in 0..dim {
            y_new[i] = y[i] + 0.5 * h * (3.0 * k1[i] + k2[i]);
            let e = 0.5 * h * (k1[i] + k2[i]);
            let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            let r = e / scale;
            err_sq += r * r;
        }
        let err = (err_sq / dim as f64).sqrt();

        if err.is_finite() && err <= 1.0 {
            let factor = if err == 0.0 {
                4.0
            } else {
                (0.9 * err.powf(-1.0 / 3.0)).clamp(0.2, 4.0)
            };
            self.h = (h * factor).min(self.max_step);
            y.copy_from_slice(&y_new);
            Ok(Some(h))
        } else {
            let factor = if err.is_finite() {
                (0.9 * err.powf(-1.0 / 3.0)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            self.h = h * factor;
            Ok(None)
        }
    }
}

/// Integrates one trajectory from a seeded random initial condition, recording
/// observables at the configured cadence.
pub fn integrate(
    formula: &CnfFormula,
    instance: &TwoLinInstance,
    config: &IntegrateConfig,
) -> Result<TrajectoryRecord> {
    let state = initial_state(formula, config.a_init, config.seed);
    integrate_from(formula, instance, config, state)
}

/// Integrates from an explicit initial state (used by restarts and the FSLE
/// doubling experiment).
pub fn integrate_from(
    formula: &CnfFormula,
    instance: &TwoLinInstance,
    config: &IntegrateConfig,
    mut state: OdeState,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let mut integrator = Integrator::new(formula, config)?;
    // Restarts resume sampling from the state's own clock.
    let t0 = state.t;
    if config.t_end <= t0 {
        return Err(Error::invalid(format!(
            "t_end = {} does not exceed the initial state time {t0}",
            config.t_end
        )));
    }
    let n_samples = ((config.t_end - t0) / config.obs_dt).round() as usize;

    let mut samples = Vec::with_capacity(n_samples + 1);
    let mut spin_states = Vec::with_capacity(n_samples + 1);
    let mut log_a_states = Vec::with_capacity(n_samples + 1);

    let mut record = |state: &OdeState, dynamics: &Dynamics| {
        let assignment = decode_assignment(&state.s, formula);
        let sat_count = instance
            .satisfied_count(&assignment)
            .expect("decoded assignment is in range");
        samples.push(Sample {
            t: state.t,
            sat_count,
            assignment,
            energy: dynamics.energy(&state.s, &state.log_a),
            max_k: dynamics.max_k(&state.s),
            log_a_max: state.log_a.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        });
        spin_states.push(state.s.clone());
        log_a_states.push(state.log_a.clone());
    };

    record(&state, &integrator.dynamics);
    for i in 1..=n_samples {
        let t_target = t0 + i as f64 * config.obs_dt;
        integrator.advance_to(&mut state, t_target)?;
        record(&state, &integrator.dynamics);
    }

    Ok(TrajectoryRecord {
        alpha: config.alpha,
        obs_dt: config.obs_dt,
        samples,
        spin_states,
        log_a_states,
        used_stiff_fallback: integrator.used_stiff_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::encode;
    use crate::instance::generate_polygon;

    fn sat_setup() -> (TwoLinInstance, CnfFormula) {
        let gen = generate_polygon(4, 5, 2, 0, 21).unwrap();
        let f = encode(&gen.instance).unwrap();
        (gen.instance, f)
    }

    #[test]
    fn sat_instance_converges_to_solution() {
        let (inst, f) = sat_setup();
        let config = IntegrateConfig {
            t_end: 60.0,
            seed: 3,
            ..Default::default()
        };
        let rec = integrate(&f, &inst, &config).unwrap();
        let last = rec.samples.last().unwrap();
        assert!(last.energy < 1e-8, "V = {}", last.energy);
        assert_eq!(last.sat_count, inst.n_eq());
    }

    #[test]
    fn unsat_instance_never_fully_satisfied() {
        let gen = generate_polygon(4, 5, 2, 1, 2).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 30.0,
            seed: 8,
            ..Default::default()
        };
        let rec = integrate(&f, &gen.instance, &config).unwrap();
        for s in &rec.samples {
            assert!(s.sat_count < gen.instance.n_eq());
        }
    }

    #[test]
    fn log_weights_nondecreasing() {
        let gen = generate_polygon(4, 5, 2, 1, 5).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 20.0,
            seed: 1,
            ..Default::default()
        };
        let rec = integrate(&f, &gen.instance, &config).unwrap();
        for w in rec.log_a_states.windows(2) {
            for m in 0..f.num_clauses() {
                assert!(w[1][m] >= w[0][m] - 1e-9);
            }
        }
    }

    #[test]
    fn spins_stay_bounded_and_k_in_range() {
        let gen = generate_polygon(5, 7, 3, 1, 4).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 20.0,
            seed: 6,
            ..Default::default()
        };
        let rec = integrate(&f, &gen.instance, &config).unwrap();
        for (s, sample) in rec.spin_states.iter().zip(&rec.samples) {
            assert!(s.iter().all(|v| v.abs() <= 1.0 + 1e-9));
            assert!(sample.max_k >= 0.0 && sample.max_k <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let gen = generate_polygon(4, 5, 2, 1, 7).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 5.0,
            seed: 42,
            ..Default::default()
        };
        let a = integrate(&f, &gen.instance, &config).unwrap();
        let b = integrate(&f, &gen.instance, &config).unwrap();
        for (x, y) in a.spin_states.iter().zip(&b.spin_states) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn a_init_uniform_starts_below_one() {
        let (_, f) = sat_setup();
        let st = initial_state(&f, AInit::Uniform01, 9);
        assert!(st.log_a.iter().all(|&la| la < 0.0));
        let st1 = initial_state(&f, AInit::One, 9);
        assert!(st1.log_a.iter().all(|&la| la == 0.0));
    }

    #[test]
    fn rkc_agrees_with_dopri5() {
        let gen = generate_polygon(4, 5, 2, 1, 13).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 5.0,
            seed: 11,
            rtol: 1e-7,
            atol: 1e-10,
            ..Default::default()
        };
        let mut explicit = Integrator::new(&f, &config).unwrap();
        let mut chebyshev = Integrator::new(&f, &config).unwrap();
        chebyshev.force_rkc();
        let mut s1 = initial_state(&f, AInit::One, 11);
        let mut s2 = s1.clone();
        explicit.advance_to(&mut s1, 5.0).unwrap();
        chebyshev.advance_to(&mut s2, 5.0).unwrap();
        for (a, b) in s1.s.iter().zip(&s2.s) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        for (a, b) in s1.log_a.iter().zip(&s2.log_a) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn ros2_agrees_with_dopri5() {
        // force the stiff path and compare short-horizon trajectories
        let gen = generate_polygon(4, 5, 2, 1, 13).unwrap();
        let f = encode(&gen.instance).unwrap();
        let config = IntegrateConfig {
            t_end: 2.0,
            seed: 11,
            rtol: 1e-7,
            atol: 1e-10,
            ..Default::default()
        };
        let mut explicit = Integrator::new(&f, &config).unwrap();
        let mut implicit = Integrator::new(&f, &config).unwrap();
        implicit.stiff = true;
        implicit.h = 1e-4;
        let mut s1 = initial_state(&f, AInit::One, 11);
        let mut s2 = s1.clone();
        explicit.advance_to(&mut s1, 2.0).unwrap();
        implicit.advance_to(&mut s2, 2.0).unwrap();
        for (a, b) in s1.s.iter().zip(&s2.s) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }
}
