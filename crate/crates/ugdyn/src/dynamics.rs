//! The continuous-time dynamical system driven by the encoded formula.
//!
//! Spins follow gradient descent on V(s, a) = sum_m a_m K_m(s)^2 while the
//! auxiliary clause weights grow as da_m/dt = a_m K_m^alpha. The weights are
//! integrated in logarithmic form (d log a_m/dt = K_m^alpha) since they grow
//! exponentially on unsatisfiable instances.

use crate::cnf::CnfFormula;
use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Largest supported clause length (= alphabet size k); keeps per-clause
/// scratch on the stack in the right-hand-side hot path.
pub const MAX_CLAUSE_LEN: usize = 64;

/// Above this log-weight the clause term switches to log-space evaluation to
/// avoid overflowing exp().
const LOG_A_DIRECT_LIMIT: f64 = 600.0;

pub struct Dynamics<'a> {
    pub formula: &'a CnfFormula,
    pub alpha: f64,
    /// 2^{-len} lookup by clause length; powi in the hot path is measurable.
    norm_table: [f64; MAX_CLAUSE_LEN + 1],
}

impl<'a> Dynamics<'a> {
    pub fn new(formula: &'a CnfFormula, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if formula.k as usize > MAX_CLAUSE_LEN {
            return Err(Error::invalid(format!(
                "k = {} exceeds the supported clause length {MAX_CLAUSE_LEN}",
                formula.k
            )));
        }
        let mut norm_table = [0.0; MAX_CLAUSE_LEN + 1];
        for (len, slot) in norm_table.iter_mut().enumerate() {
            *slot = 0.5f64.powi(len as i32);
        }
        Ok(Dynamics { formula, alpha, norm_table })
    }

    /// |k|^alpha with the sign of k, avoiding powf for the common exponents.
    #[inline]
    fn signed_pow_alpha(&self, k: f64) -> f64 {
        if self.alpha == 2.0 {
            k * k.abs()
        } else if self.alpha == 1.0 {
            k
        } else {
            k.abs().powf(self.alpha).copysign(k)
        }
    }

    pub fn num_spins(&self) -> usize {
        self.formula.num_spins()
    }

    pub fn num_clauses(&self) -> usize {
        self.formula.num_clauses()
    }

    /// K_m = 2^{-|m|} prod_p (1 - c_mp s_p); 0 iff the clause is satisfied,
    /// 1 iff maximally violated.
    pub fn clause_k(&self, s: &[f64], m: usize) -> f64 {
        let clause = &self.formula.clauses[m];
        let mut prod = 1.0;
        for lit in &clause.literals {
            prod *= 1.0 - lit.polarity as f64 * s[lit.var];
        }
        prod * 0.5f64.powi(clause.literals.len() as i32)
    }

    /// The K_m product with the factor for spin l removed (normalization kept),
    /// so K_m = K_ml * (1 - c_ml s_l).
    pub fn clause_k_ml(&self, s: &[f64], m: usize, l: usize) -> Result<f64> {
        let clause = &self.formula.clauses[m];
        if !clause.literals.iter().any(|lit| lit.var == l) {
            return Err(Error::invalid(format!("spin {l} does not occur in clause {m}")));
        }
        let mut prod = 1.0;
        for lit in &clause.literals {
            if lit.var != l {
                prod *= 1.0 - lit.polarity as f64 * s[lit.var];
            }
        }
        Ok(prod * 0.5f64.powi(clause.literals.len() as i32))
    }

    /// Largest K_m over all clauses.
    pub fn max_k(&self, s: &[f64]) -> f64 {
        (0..self.num_clauses())
            .map(|m| self.clause_k(s, m))
            .fold(0.0, f64::max)
    }

    /// V = sum_m a_m K_m^2 with a_m = exp(log_a[m]).
    pub fn energy(&self, s: &[f64], log_a: &[f64]) -> f64 {
        let mut v = 0.0;
        for m in 0..self.num_clauses() {
            let k = self.clause_k(s, m);
            if k > 0.0 {
                v += (log_a[m] + 2.0 * k.ln()).exp();
            }
        }
        v
    }

    /// Evaluates ds_l/dt = sum_m 2 a_m c_ml K_ml K_m and d(log a_m)/dt = K_m^alpha.
    pub fn rhs(&self, s: &[f64], log_a: &[f64], ds: &mut [f64], dla: &mut [f64]) {
        ds.fill(0.0);
        let mut factors = [0.0f64; MAX_CLAUSE_LEN];
        for (m, clause) in self.formula.clauses.iter().enumerate() {
            let len = clause.literals.len();
            let norm = self.norm_table[len];
            let mut prod = 1.0;
            for (idx, lit) in clause.literals.iter().enumerate() {
                let f = 1.0 - lit.polarity as f64 * s[lit.var];
                factors[idx] = f;
                prod *= f;
            }
            let k_m = norm * prod;
            dla[m] = self.signed_pow_alpha(k_m);

            let la = log_a[m];
            if la <= LOG_A_DIRECT_LIMIT {
                let a = la.exp();
                // leave-one-out products via prefix/suffix sweeps
                let mut suffix = [0.0f64; MAX_CLAUSE_LEN];
                let mut acc = 1.0;
                for idx in (0..len).rev() {
                    suffix[idx] = acc;
                    acc *= factors[idx];
                }
                let mut prefix = 1.0;
                for (idx, lit) in clause.literals.iter().enumerate() {
                    let k_ml = norm * prefix * suffix[idx];
                    ds[lit.var] += 2.0 * a * lit.polarity as f64 * k_ml * k_m;
                    prefix *= factors[idx];
                }
            } else {
                // log-space magnitudes; signs tracked separately
                for (idx, lit) in clause.literals.iter().enumerate() {
                    let mut sign = 1.0f64;
                    let mut log_mag = norm.ln();
                    for (jdx, &f) in factors[..len].iter().enumerate() {
                        if jdx == idx {
                            continue;
                        }
                        if f == 0.0 {
                            sign = 0.0;
                            break;
                        }
                        sign *= f.signum();
                        log_mag += f.abs().ln();
                    }
                    if sign == 0.0 || k_m == 0.0 {
                        continue;
                    }
                    let term = sign
                        * k_m.signum()
                        * (la + log_mag + k_m.abs().ln()).exp();
                    ds[lit.var] += 2.0 * lit.polarity as f64 * term;
                }
            }
        }
    }

    /// Gershgorin bound on the spectral radius of the Jacobian: the maximum
    /// absolute row sum. `row_sums` is caller scratch of length N + M. Cheap
    /// (no matrix is formed) and safe to call every accepted step; the
    /// stabilized Chebyshev stepper sizes its stage count from this.
    pub fn spectral_bound(&self, s: &[f64], log_a: &[f64], row_sums: &mut [f64]) -> f64 {
        let n = self.num_spins();
        row_sums.fill(0.0);
        let mut factors = [0.0f64; MAX_CLAUSE_LEN];
        let mut suffix = [0.0f64; MAX_CLAUSE_LEN];
        let mut k_ml = [0.0f64; MAX_CLAUSE_LEN];

        for (m, clause) in self.formula.clauses.iter().enumerate() {
            let len = clause.literals.len();
            let norm = self.norm_table[len];
            let mut prod = 1.0;
            for (idx, lit) in clause.literals.iter().enumerate() {
                let f = 1.0 - lit.polarity as f64 * s[lit.var];
                factors[idx] = f;
                prod *= f;
            }
            let k_m = norm * prod;
            let a = log_a[m].min(LOG_A_DIRECT_LIMIT).exp();

            // leave-one-out values via prefix/suffix sweeps
            let mut acc = 1.0;
            for idx in (0..len).rev() {
                suffix[idx] = acc;
                acc *= factors[idx];
            }
            let mut prefix = 1.0;
            for idx in 0..len {
                k_ml[idx] = norm * prefix * suffix[idx];
                prefix *= factors[idx];
            }

            let kpow = if self.alpha == 1.0 {
                1.0
            } else if k_m == 0.0 {
                0.0
            } else {
                // alpha < 1 makes K^{alpha-1} blow up near K = 0; the floor
                // keeps the bound finite (overestimates only cost stages)
                k_m.abs().max(1e-9).powf(self.alpha - 1.0)
            };

            for (li, lit_l) in clause.literals.iter().enumerate() {
                let l = lit_l.var;
                // d(ds_l)/d(log a_m)
                row_sums[l] += 2.0 * a * (k_ml[li] * k_m).abs();
                // d(dlog a_m)/ds_l
                row_sums[n + m] += self.alpha * kpow * k_ml[li].abs();

                // leave-two-out products, skipping li, via a second sweep
                let mut acc2 = 1.0;
                for pj in (0..len).rev() {
                    if pj == li {
                        continue;
                    }
                    suffix[pj] = acc2;
                    acc2 *= factors[pj];
                }
                let mut prefix2 = 1.0;
                for (pi, _lit_p) in clause.literals.iter().enumerate() {
                    if pi == li {
                        row_sums[l] += 2.0 * a * k_ml[li] * k_ml[li];
                        continue;
                    }
                    let k_mlp = norm * prefix2 * suffix[pi];
                    prefix2 *= factors[pi];
                    row_sums[l] +=
                        2.0 * a * ((k_mlp * k_m).abs() + (k_ml[li] * k_ml[pi]).abs());
                }
            }
        }
        row_sums.iter().copied().fold(0.0, f64::max)
    }

    /// Dense Jacobian of the (s, log a) system, used by the stiff fallback.
    pub fn jacobian(&self, s: &[f64], log_a: &[f64]) -> DMatrix<f64> {
        let n = self.num_spins();
        let m_total = self.num_clauses();
        let dim = n + m_total;
        let mut jac = DMatrix::zeros(dim, dim);
        let mut factors = [0.0f64; MAX_CLAUSE_LEN];

        for (m, clause) in self.formula.clauses.iter().enumerate() {
            let len = clause.literals.len();
            let norm = 0.5f64.powi(len as i32);
            let mut prod = 1.0;
            for (idx, lit) in clause.literals.iter().enumerate() {
                let f = 1.0 - lit.polarity as f64 * s[lit.var];
                factors[idx] = f;
                prod *= f;
            }
            let k_m = norm * prod;
            let a = log_a[m].min(LOG_A_DIRECT_LIMIT).exp();

            let leave_one = |skip: usize| -> f64 {
                let mut p = 1.0;
                for (j, &f) in factors[..len].iter().enumerate() {
                    if j != skip {
                        p *= f;
                    }
                }
                norm * p
            };
            let leave_two = |skip1: usize, skip2: usize| -> f64 {
                let mut p = 1.0;
                for (j, &f) in factors[..len].iter().enumerate() {
                    if j != skip1 && j != skip2 {
                        p *= f;
                    }
                }
                norm * p
            };

            for (li, lit_l) in clause.literals.iter().enumerate() {
                let l = lit_l.var;
                let cl = lit_l.polarity as f64;
                let k_ml = leave_one(li);

                // d(ds_l)/d(log a_m)
                jac[(l, n + m)] += 2.0 * a * cl * k_ml * k_m;

                for (pi, lit_p) in clause.literals.iter().enumerate() {
                    let p = lit_p.var;
                    let cp = lit_p.polarity as f64;
                    if pi == li {
                        jac[(l, p)] += -2.0 * a * k_ml * k_ml;
                    } else {
                        let k_mp = leave_one(pi);
                        let k_mlp = leave_two(li, pi);
                        jac[(l, p)] += -2.0 * a * cl * cp * (k_mlp * k_m + k_ml * k_mp);
                    }
                }
            }

            // d(dlog a_m)/ds_p = alpha K^{alpha-1} * (-c_mp K_mp)
            if k_m > 0.0 || self.alpha >= 1.0 {
                let kpow = if self.alpha == 1.0 {
                    1.0
                } else if k_m <= 0.0 {
                    0.0
                } else {
                    k_m.powf(self.alpha - 1.0)
                };
                for (pi, lit_p) in clause.literals.iter().enumerate() {
                    let k_mp = leave_one(pi);
                    jac[(n + m, lit_p.var)] +=
                        -self.alpha * kpow * lit_p.polarity as f64 * k_mp;
                }
            }
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{encode, encode_assignment};
    use crate::instance::{generate_polygon, Assignment, TwoLinEquation, TwoLinInstance};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simple() -> TwoLinInstance {
        TwoLinInstance {
            k: 2,
            n_x: 2,
            equations: vec![TwoLinEquation { i: 0, j: 1, b: 1 }],
            designed_opt: None,
        }
    }

    #[test]
    fn clause_k_extremes() {
        let inst = simple();
        let f = encode(&inst).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        // clause 0 is (-s0 v -s1); both literals maximally violated at s = (1,1,..)
        let s = vec![1.0; f.num_spins()];
        assert_relative_eq!(dyn_.clause_k(&s, 0), 1.0);
        // any satisfied literal zeroes K
        let mut s2 = s.clone();
        s2[0] = -1.0;
        assert_eq!(dyn_.clause_k(&s2, 0), 0.0);
        // binary clause at the origin
        let zero = vec![0.0; f.num_spins()];
        assert_relative_eq!(dyn_.clause_k(&zero, 0), 0.25);
    }

    #[test]
    fn k_ml_identity_random() {
        let gen = generate_polygon(4, 5, 3, 1, 9).unwrap();
        let f = encode(&gen.instance).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s: Vec<f64> = (0..f.num_spins()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = rng.gen_range(0..f.num_clauses());
            let lit = f.clauses[m].literals[rng.gen_range(0..f.clauses[m].literals.len())];
            let k_ml = dyn_.clause_k_ml(&s, m, lit.var).unwrap();
            let k_m = dyn_.clause_k(&s, m);
            let factor = 1.0 - lit.polarity as f64 * s[lit.var];
            assert_relative_eq!(k_m, k_ml * factor, epsilon = 1e-12);
            assert!(k_ml >= 0.0);
        }
    }

    #[test]
    fn k_ml_rejects_foreign_spin() {
        let f = encode(&simple()).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let s = vec![0.0; f.num_spins()];
        // clause 0 covers spins 0 and 1 only
        assert!(dyn_.clause_k_ml(&s, 0, 5).is_err());
    }

    #[test]
    fn k_ml_binary_examples() {
        let f = encode(&simple()).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let mut s = vec![0.0; f.num_spins()];
        // at s = 0 the remaining factor is 1: K_ml = 2^{-2}
        assert_relative_eq!(dyn_.clause_k_ml(&s, 0, 0).unwrap(), 0.25);
        // other literal satisfied: clause 0 = (-s0 v -s1), s1 = -1 satisfies it
        s[1] = -1.0;
        assert_eq!(dyn_.clause_k_ml(&s, 0, 0).unwrap(), 0.0);
    }

    #[test]
    fn energy_zero_at_solution_corner() {
        let inst = simple();
        let f = encode(&inst).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let s = encode_assignment(&f, &Assignment { values: vec![0, 1] }, &inst).unwrap();
        let log_a = vec![0.0; f.num_clauses()];
        assert_eq!(dyn_.energy(&s, &log_a), 0.0);
        // equilibrium: ds = 0 and dlog a = 0
        let mut ds = vec![0.0; f.num_spins()];
        let mut dla = vec![0.0; f.num_clauses()];
        dyn_.rhs(&s, &log_a, &mut ds, &mut dla);
        assert!(ds.iter().all(|&v| v == 0.0));
        assert!(dla.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn energy_linear_in_a() {
        let gen = generate_polygon(4, 5, 2, 1, 3).unwrap();
        let f = encode(&gen.instance).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<f64> = (0..f.num_spins()).map(|_| rng.gen_range(-0.9..0.9)).collect();
        let log_a = vec![0.3; f.num_clauses()];
        let doubled: Vec<f64> = log_a.iter().map(|la| la + 2.0f64.ln()).collect();
        assert_relative_eq!(
            dyn_.energy(&s, &doubled),
            2.0 * dyn_.energy(&s, &log_a),
            max_relative = 1e-12
        );
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let gen = generate_polygon(4, 6, 3, 1, 11).unwrap();
        let f = encode(&gen.instance).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = f.num_spins();
        let mut ds = vec![0.0; n];
        let mut dla = vec![0.0; f.num_clauses()];
        for _ in 0..20 {
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.95..0.95)).collect();
            let log_a: Vec<f64> = (0..f.num_clauses()).map(|_| rng.gen_range(-0.5..1.5)).collect();
            dyn_.rhs(&s, &log_a, &mut ds, &mut dla);
            let h = 1e-5;
            for l in 0..n {
                let mut sp = s.clone();
                sp[l] += h;
                let mut sm = s.clone();
                sm[l] -= h;
                let fd = -(dyn_.energy(&sp, &log_a) - dyn_.energy(&sm, &log_a)) / (2.0 * h);
                let scale = fd.abs().max(ds[l].abs()).max(1e-10);
                assert!(
                    (ds[l] - fd).abs() / scale <= 1e-6,
                    "spin {l}: rhs {} vs fd {}",
                    ds[l],
                    fd
                );
            }
        }
    }

    #[test]
    fn alpha_one_baseline_growth_law() {
        // with alpha = 1, d(log a_m)/dt = K_m exactly
        let gen = generate_polygon(4, 5, 2, 1, 17).unwrap();
        let f = encode(&gen.instance).unwrap();
        let dyn_ = Dynamics::new(&f, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = (0..f.num_spins()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let log_a = vec![0.0; f.num_clauses()];
        let mut ds = vec![0.0; f.num_spins()];
        let mut dla = vec![0.0; f.num_clauses()];
        dyn_.rhs(&s, &log_a, &mut ds, &mut dla);
        for m in 0..f.num_clauses() {
            assert_relative_eq!(dla[m], dyn_.clause_k(&s, m), epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_bound_equals_max_row_sum_of_jacobian() {
        let gen = generate_polygon(4, 6, 3, 1, 29).unwrap();
        let f = encode(&gen.instance).unwrap();
        for alpha in [1.0, 2.0] {
            let dyn_ = Dynamics::new(&f, alpha).unwrap();
            let n = f.num_spins();
            let mt = f.num_clauses();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..5 {
                let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let log_a: Vec<f64> = (0..mt).map(|_| rng.gen_range(0.0..3.0)).collect();
                let mut scratch = vec![0.0; n + mt];
                let bound = dyn_.spectral_bound(&s, &log_a, &mut scratch);
                let jac = dyn_.jacobian(&s, &log_a);
                let mut max_row = 0.0f64;
                for row in 0..n + mt {
                    let mut sum = 0.0;
                    for col in 0..n + mt {
                        sum += jac[(row, col)].abs();
                    }
                    max_row = max_row.max(sum);
                }
                // the clause-wise bound ignores sign cancellation inside a
                // row entry, so it dominates the true row sum but stays close
                assert!(bound >= max_row - 1e-9, "{bound} < {max_row}");
                assert!(bound <= 4.0 * max_row + 1e-9, "{bound} vs {max_row}");
            }
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let gen = generate_polygon(3, 3, 2, 1, 23).unwrap();
        let f = encode(&gen.instance).unwrap();
        for alpha in [1.0, 2.0] {
            let dyn_ = Dynamics::new(&f, alpha).unwrap();
            let n = f.num_spins();
            let mt = f.num_clauses();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.9..0.9)).collect();
            let log_a: Vec<f64> = (0..mt).map(|_| rng.gen_range(0.0..1.0)).collect();
            let jac = dyn_.jacobian(&s, &log_a);
            let h = 1e-6;
            let eval = |s: &[f64], la: &[f64]| {
                let mut ds = vec![0.0; n];
                let mut dla = vec![0.0; mt];
                dyn_.rhs(s, la, &mut ds, &mut dla);
                ds.into_iter().chain(dla).collect::<Vec<f64>>()
            };
            for col in 0..n + mt {
                let mut sp = s.clone();
                let mut lap = log_a.clone();
                let mut sm = s.clone();
                let mut lam = log_a.clone();
                if col < n {
                    sp[col] += h;
                    sm[col] -= h;
                } else {
                    lap[col - n] += h;
                    lam[col - n] -= h;
                }
                let fp = eval(&sp, &lap);
                let fm = eval(&sm, &lam);
                for row in 0..n + mt {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let scale = fd.abs().max(jac[(row, col)].abs()).max(1e-4);
                    assert!(
                        (jac[(row, col)] - fd).abs() / scale <= 1e-4,
                        "alpha {alpha} entry ({row},{col}): jac {} vs fd {}",
                        jac[(row, col)],
                        fd
                    );
                }
            }
        }
    }
}
