//! 2-Lin-k instances: systems of two-variable linear equations x_i = x_j + b (mod k).
//!
//! Provides the polygon-based generator with a prescribed satisfiable fraction,
//! a brute-force optimum oracle for small instances, and a line-oriented text format.

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

/// Default cap on k^{n_x} for the brute-force oracle.
pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;

/// Attempts the generator makes before giving up on hitting the designed optimum.
const MAX_GEN_ATTEMPTS: usize = 500;

/// One equation x_i = x_j + b (mod k). Directed: swapping i and j flips the sign of b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoLinEquation {
    pub i: usize,
    pub j: usize,
    pub b: u32,
}

/// Exact fraction m / n_eq, used for the designed optimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// A 2-Lin-k system over Z_k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoLinInstance {
    pub k: u32,
    pub n_x: usize,
    pub equations: Vec<TwoLinEquation>,
    /// The generator's intended max satisfiable fraction (1 - epsilon), when known.
    pub designed_opt: Option<Rational>,
}

/// An assignment of residues in [0, k) to the n_x variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub values: Vec<u32>,
}

impl TwoLinInstance {
    pub fn n_eq(&self) -> usize {
        self.equations.len()
    }

    /// Checks all structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be >= 2, got {}", self.k)));
        }
        if self.n_x < 2 {
            return Err(Error::invalid(format!("n_x must be >= 2, got {}", self.n_x)));
        }
        if self.equations.is_empty() {
            return Err(Error::invalid("instance has no equations"));
        }
        let mut used = vec![false; self.n_x];
        for (idx, eq) in self.equations.iter().enumerate() {
            if eq.i == eq.j {
                return Err(Error::invalid(format!("equation {idx}: i == j ({})", eq.i)));
            }
            if eq.i >= self.n_x || eq.j >= self.n_x {
                return Err(Error::invalid(format!(
                    "equation {idx}: variable index out of range (n_x = {})",
                    self.n_x
                )));
            }
            if eq.b >= self.k {
                return Err(Error::invalid(format!(
                    "equation {idx}: b = {} >= k = {}",
                    eq.b, self.k
                )));
            }
            used[eq.i] = true;
            used[eq.j] = true;
        }
        if let Some(p) = used.iter().position(|u| !u) {
            return Err(Error::invalid(format!("variable {p} appears in no equation")));
        }
        if let Some(r) = self.designed_opt {
            if r.den != self.n_eq() as u64 || r.num == 0 || r.num > r.den {
                return Err(Error::invalid(format!(
                    "designed_opt {}/{} is not m/n_eq with 0 < m <= n_eq = {}",
                    r.num,
                    r.den,
                    self.n_eq()
                )));
            }
        }
        Ok(())
    }

    fn check_assignment(&self, assignment: &Assignment) -> Result<()> {
        if assignment.values.len() != self.n_x {
            return Err(Error::invalid(format!(
                "assignment length {} != n_x = {}",
                assignment.values.len(),
                self.n_x
            )));
        }
        if let Some(v) = assignment.values.iter().find(|&&v| v >= self.k) {
            return Err(Error::invalid(format!("assignment value {v} >= k = {}", self.k)));
        }
        Ok(())
    }

    /// Whether equation `l` holds under `values` (caller has validated ranges).
    pub fn equation_satisfied(&self, l: usize, values: &[u32]) -> bool {
        let eq = &self.equations[l];
        values[eq.i] == (values[eq.j] + eq.b) % self.k
    }

    /// Number of equations satisfied by the assignment.
    pub fn satisfied_count(&self, assignment: &Assignment) -> Result<usize> {
        self.check_assignment(assignment)?;
        Ok((0..self.n_eq())
            .filter(|&l| self.equation_satisfied(l, &assignment.values))
            .count())
    }

    /// Exhaustive optimum with the default enumeration budget.
    pub fn brute_force_optimum(&self) -> Result<(Assignment, Rational)> {
        self.brute_force_optimum_with_budget(DEFAULT_ENUM_BUDGET)
    }

    /// Enumerates all k^{n_x} assignments in lexicographic order and returns the first
    /// one attaining the maximum satisfied count, together with the fraction satisfied.
    pub fn brute_force_optimum_with_budget(&self, budget: u64) -> Result<(Assignment, Rational)> {
        let total = (self.k as f64).powi(self.n_x as i32);
        if total > budget as f64 {
            return Err(Error::BudgetExceeded {
                needed: total,
                budget,
            });
        }
        let mut values = vec![0u32; self.n_x];
        let mut best_count = 0usize;
        let mut best = values.clone();
        loop {
            let count = (0..self.n_eq())
                .filter(|&l| self.equation_satisfied(l, &values))
                .count();
            // strict improvement keeps the lexicographically smallest maximizer
            if count > best_count {
                best_count = count;
                best = values.clone();
            }
            // lexicographic increment, most significant digit first
            let mut pos = self.n_x;
            while pos > 0 {
                pos -= 1;
                values[pos] += 1;
                if values[pos] < self.k {
                    break;
                }
                values[pos] = 0;
                if pos == 0 {
                    return Ok((
                        Assignment { values: best },
                        Rational {
                            num: best_count as u64,
                            den: self.n_eq() as u64,
                        },
                    ));
                }
            }
        }
    }

    /// SHA-256 of the canonical text serialization, as lowercase hex.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_text().as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            write!(out, "{byte:02x}").unwrap();
        }
        out
    }

    /// Canonical text serialization (see the crate-level format description).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "p 2link {} {} {}", self.k, self.n_x, self.n_eq()).unwrap();
        for eq in &self.equations {
            writeln!(out, "e {} {} {}", eq.i, eq.j, eq.b).unwrap();
        }
        if let Some(r) = self.designed_opt {
            writeln!(out, "c opt {}/{}", r.num, r.den).unwrap();
        }
        out
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<TwoLinInstance> {
        let mut header: Option<(u32, usize, usize)> = None;
        let mut equations = Vec::new();
        let mut designed_opt = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "p" => {
                    if header.is_some() {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: "duplicate header".into(),
                        });
                    }
                    if fields.len() != 5 || fields[1] != "2link" {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("malformed header: {line}"),
                        });
                    }
                    let k = parse_field(fields[2], lineno, "k")?;
                    let n_x = parse_field(fields[3], lineno, "n_x")?;
                    let n_eq = parse_field(fields[4], lineno, "n_eq")?;
                    header = Some((k as u32, n_x as usize, n_eq as usize));
                }
                "e" => {
                    let (k, n_x, _) = header.ok_or(Error::Parse {
                        line: lineno,
                        msg: "equation before header".into(),
                    })?;
                    if fields.len() != 4 {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("malformed equation line: {line}"),
                        });
                    }
                    let i = parse_field(fields[1], lineno, "i")? as usize;
                    let j = parse_field(fields[2], lineno, "j")? as usize;
                    let b = parse_field(fields[3], lineno, "b")? as u32;
                    if i == j {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("i == j ({i})"),
                        });
                    }
                    if i >= n_x || j >= n_x {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("variable index out of range (n_x = {n_x})"),
                        });
                    }
                    if b >= k {
                        return Err(Error::Parse {
                            line: lineno,
                            msg: format!("b = {b} >= k = {k}"),
                        });
                    }
                    equations.push(TwoLinEquation { i, j, b });
                }
                "c" => {
                    if fields.len() == 3 && fields[1] == "opt" {
                        let (num, den) = fields[2].split_once('/').ok_or(Error::Parse {
                            line: lineno,
                            msg: format!("malformed opt fraction: {}", fields[2]),
                        })?;
                        designed_opt = Some(Rational {
                            num: parse_field(num, lineno, "opt numerator")?,
                            den: parse_field(den, lineno, "opt denominator")?,
                        });
                    }
                    // other c-lines are comments
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: format!("unrecognized line: {line}"),
                    });
                }
            }
        }
        let (k, n_x, n_eq) = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing header".into(),
        })?;
        if equations.len() != n_eq {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header declares {n_eq} equations, found {}", equations.len()),
            });
        }
        let instance = TwoLinInstance {
            k,
            n_x,
            equations,
            designed_opt,
        };
        instance.validate().map_err(|e| Error::Parse {
            line: 0,
            msg: e.to_string(),
        })?;
        Ok(instance)
    }

    pub fn read_from(path: &Path) -> Result<TwoLinInstance> {
        let text = std::fs::read_to_string(path)?;
        TwoLinInstance::from_text(&text)
    }
}

fn parse_field(s: &str, line: usize, what: &str) -> Result<u64> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {what}: {s:?}"),
    })
}

/// Output of the polygon generator: the instance plus the hidden reference
/// assignment that satisfies exactly n_eq - target_unsat equations.
#[derive(Debug, Clone)]
pub struct PolygonInstance {
    pub instance: TwoLinInstance,
    pub reference: Assignment,
}

/// Generates a 2-Lin-k instance on an n_x-sided polygon with a prescribed number
/// of unsatisfiable equations.
///
/// The cycle edges (x_i, x_{i+1}) are always consistent with a hidden random
/// reference assignment; the closing edge and randomly chosen diagonals carry the
/// `target_unsat` inconsistent right-hand sides. When k^{n_x} fits the enumeration
/// budget the construction is verified against the brute-force oracle and
/// re-sampled until the optimum equals (n_eq - target_unsat)/n_eq; at larger
/// scales the designed optimum is trusted metadata. Deterministic given the seed.
pub fn generate_polygon(
    n_x: usize,
    n_eq: usize,
    k: u32,
    target_unsat: usize,
    seed: u64,
) -> Result<PolygonInstance> {
    if n_x < 3 {
        return Err(Error::invalid(format!("n_x must be >= 3, got {n_x}")));
    }
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    let max_eq = n_x * (n_x - 1) / 2;
    if n_eq < n_x || n_eq > max_eq {
        return Err(Error::invalid(format!(
            "n_eq = {n_eq} outside [{n_x}, {max_eq}] for n_x = {n_x}"
        )));
    }
    let eligible = n_eq - (n_x - 1); // closing edge plus diagonals
    if target_unsat > eligible {
        return Err(Error::invalid(format!(
            "target_unsat = {target_unsat} exceeds the {eligible} eligible equations \
             (closing edge + diagonals) for n_x = {n_x}, n_eq = {n_eq}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let verifiable = (k as f64).powi(n_x as i32) <= DEFAULT_ENUM_BUDGET as f64;

    let mut last: Option<PolygonInstance> = None;
    for _attempt in 0..MAX_GEN_ATTEMPTS {
        let candidate = sample_polygon(n_x, n_eq, k, target_unsat, &mut rng);
        if !verifiable || target_unsat <= 1 {
            // u <= 1 is exact by construction: satisfying the one inconsistent
            // equation requires breaking the cycle in two places.
            return Ok(candidate);
        }
        let (_, opt) = candidate.instance.brute_force_optimum()?;
        if opt.num as usize == n_eq - target_unsat {
            return Ok(candidate);
        }
        last = Some(candidate);
    }
    // Unsat designations kept colluding; keep the last sample but record the
    // measured optimum so designed_opt stays truthful.
    let mut out = last.expect("at least one attempt");
    let (_, opt) = out.instance.brute_force_optimum()?;
    out.instance.designed_opt = Some(opt);
    Ok(out)
}

fn sample_polygon(
    n_x: usize,
    n_eq: usize,
    k: u32,
    target_unsat: usize,
    rng: &mut ChaCha8Rng,
) -> PolygonInstance {
    let reference: Vec<u32> = (0..n_x).map(|_| rng.gen_range(0..k)).collect();

    // Path edges, then the closing edge, then diagonals in random order.
    let mut pairs: Vec<(usize, usize)> = (0..n_x - 1).map(|i| (i, i + 1)).collect();
    pairs.push((0, n_x - 1));
    let mut diagonals: Vec<(usize, usize)> = Vec::new();
    for i in 0..n_x {
        for j in i + 1..n_x {
            if j != i + 1 && !(i == 0 && j == n_x - 1) {
                diagonals.push((i, j));
            }
        }
    }
    diagonals.shuffle(rng);
    pairs.extend(diagonals.into_iter().take(n_eq - n_x));

    // The closing edge and the diagonals are eligible for the unsat designation;
    // path edges never are.
    let mut unsat = vec![false; n_eq];
    let mut eligible: Vec<usize> = (n_x - 1..n_eq).collect();
    eligible.shuffle(rng);
    for &e in eligible.iter().take(target_unsat) {
        unsat[e] = true;
    }

    let equations: Vec<TwoLinEquation> = pairs
        .iter()
        .enumerate()
        .map(|(l, &(i, j))| {
            let consistent = (reference[i] + k - reference[j]) % k;
            let b = if unsat[l] {
                let shift = rng.gen_range(1..k);
                (consistent + shift) % k
            } else {
                consistent
            };
            TwoLinEquation { i, j, b }
        })
        .collect();

    let instance = TwoLinInstance {
        k,
        n_x,
        equations,
        designed_opt: Some(Rational {
            num: (n_eq - target_unsat) as u64,
            den: n_eq as u64,
        }),
    };
    PolygonInstance {
        instance,
        reference: Assignment { values: reference },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The 3-cycle with b = (1,1,1) over Z_2: every assignment violates one equation.
    fn three_cycle() -> TwoLinInstance {
        TwoLinInstance {
            k: 2,
            n_x: 3,
            equations: vec![
                TwoLinEquation { i: 0, j: 1, b: 1 },
                TwoLinEquation { i: 1, j: 2, b: 1 },
                TwoLinEquation { i: 0, j: 2, b: 1 },
            ],
            designed_opt: None,
        }
    }

    #[test]
    fn satisfied_count_three_cycle() {
        let inst = three_cycle();
        let count = inst
            .satisfied_count(&Assignment { values: vec![0, 1, 0] })
            .unwrap();
        assert_eq!(count, 2);
    }

    #[test]
    fn satisfied_count_identity_shift() {
        let inst = TwoLinInstance {
            k: 5,
            n_x: 2,
            equations: vec![TwoLinEquation { i: 0, j: 1, b: 0 }],
            designed_opt: None,
        };
        for c in 0..5 {
            let n = inst
                .satisfied_count(&Assignment { values: vec![c, c] })
                .unwrap();
            assert_eq!(n, 1);
        }
    }

    #[test]
    fn satisfied_count_rejects_bad_input() {
        let inst = three_cycle();
        assert!(inst.satisfied_count(&Assignment { values: vec![0, 1] }).is_err());
        assert!(inst
            .satisfied_count(&Assignment { values: vec![0, 1, 2] })
            .is_err());
    }

    #[test]
    fn brute_force_three_cycle() {
        let (_, opt) = three_cycle().brute_force_optimum().unwrap();
        assert_eq!((opt.num, opt.den), (2, 3));
    }

    #[test]
    fn brute_force_consistent_cycle() {
        let inst = TwoLinInstance {
            k: 2,
            n_x: 3,
            equations: vec![
                TwoLinEquation { i: 0, j: 1, b: 1 },
                TwoLinEquation { i: 1, j: 2, b: 1 },
                TwoLinEquation { i: 0, j: 2, b: 0 },
            ],
            designed_opt: None,
        };
        let (best, opt) = inst.brute_force_optimum().unwrap();
        assert_eq!((opt.num, opt.den), (3, 3));
        assert_eq!(inst.satisfied_count(&best).unwrap(), 3);
    }

    #[test]
    fn brute_force_single_equation() {
        let inst = TwoLinInstance {
            k: 3,
            n_x: 2,
            equations: vec![TwoLinEquation { i: 0, j: 1, b: 2 }],
            designed_opt: None,
        };
        let (_, opt) = inst.brute_force_optimum().unwrap();
        assert_eq!((opt.num, opt.den), (1, 1));
    }

    #[test]
    fn brute_force_budget() {
        let inst = three_cycle();
        match inst.brute_force_optimum_with_budget(4) {
            Err(Error::BudgetExceeded { budget, .. }) => assert_eq!(budget, 4),
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn brute_force_lexicographic_tiebreak() {
        // Every assignment of the 3-cycle satisfies exactly 2 equations,
        // so the reported optimum must be the lexicographically smallest.
        let (best, _) = three_cycle().brute_force_optimum().unwrap();
        let count = three_cycle().satisfied_count(&best).unwrap();
        for values in [[0u32, 0, 0], [0, 0, 1], [0, 1, 0]] {
            let c = three_cycle()
                .satisfied_count(&Assignment { values: values.to_vec() })
                .unwrap();
            if c == count {
                assert_eq!(best.values, values.to_vec());
                break;
            }
        }
    }

    #[test]
    fn generator_triangle_one_unsat() {
        let gen = generate_polygon(3, 3, 2, 1, 42).unwrap();
        assert_eq!(gen.instance.n_eq(), 3);
        assert_eq!(gen.instance.designed_opt, Some(Rational { num: 2, den: 3 }));
        let (_, opt) = gen.instance.brute_force_optimum().unwrap();
        assert_eq!((opt.num, opt.den), (2, 3));
    }

    #[test]
    fn generator_sat_instance_reference_satisfies_all() {
        for seed in 0..5 {
            let gen = generate_polygon(5, 8, 3, 0, seed).unwrap();
            let n = gen.instance.satisfied_count(&gen.reference).unwrap();
            assert_eq!(n, gen.instance.n_eq());
            let (_, opt) = gen.instance.brute_force_optimum().unwrap();
            assert_eq!(opt.num, opt.den);
        }
    }

    #[test]
    fn generator_deterministic() {
        let a = generate_polygon(6, 9, 3, 2, 1234).unwrap();
        let b = generate_polygon(6, 9, 3, 2, 1234).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_eq!(a.reference, b.reference);
    }

    #[test]
    fn generator_reference_misses_exactly_unsat() {
        for seed in 0..10 {
            let gen = generate_polygon(6, 10, 4, 3, seed).unwrap();
            let n = gen.instance.satisfied_count(&gen.reference).unwrap();
            assert_eq!(n, gen.instance.n_eq() - 3);
        }
    }

    #[test]
    fn generator_optimum_matches_designed_small_scale() {
        for seed in 0..20 {
            let n_x = 4 + (seed as usize % 3);
            let n_eq = n_x + 2;
            let u = seed as usize % 3;
            let gen = generate_polygon(n_x, n_eq, 3, u, seed).unwrap();
            let (_, opt) = gen.instance.brute_force_optimum().unwrap();
            assert_eq!(Some(opt), gen.instance.designed_opt, "seed {seed}");
        }
    }

    #[test]
    fn generator_rejects_infeasible() {
        assert!(generate_polygon(2, 2, 2, 0, 0).is_err());
        assert!(generate_polygon(3, 3, 2, 2, 0).is_err()); // only closing edge eligible
        assert!(generate_polygon(4, 7, 2, 0, 0).is_err()); // n_eq > n_x(n_x-1)/2
        assert!(generate_polygon(4, 3, 2, 0, 0).is_err()); // n_eq < n_x
    }

    #[test]
    fn file_round_trip() {
        let mut inst = three_cycle();
        inst.designed_opt = Some(Rational { num: 2, den: 3 });
        let text = inst.to_text();
        let back = TwoLinInstance::from_text(&text).unwrap();
        assert_eq!(inst, back);
    }

    #[test]
    fn parse_count_mismatch() {
        let text = "p 2link 2 3 3\ne 0 1 1\ne 1 2 1\n";
        assert!(matches!(
            TwoLinInstance::from_text(text),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn parse_self_loop_rejected() {
        let text = "p 2link 2 3 1\ne 0 0 1\n";
        match TwoLinInstance::from_text(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn parse_b_out_of_range() {
        let text = "p 2link 2 3 1\ne 0 1 2\n";
        assert!(TwoLinInstance::from_text(text).is_err());
    }

    #[test]
    fn satisfied_count_mod_k_invariant() {
        // adding k to b then reducing mod k leaves satisfaction unchanged
        let inst = three_cycle();
        let shifted = TwoLinInstance {
            equations: inst
                .equations
                .iter()
                .map(|e| TwoLinEquation {
                    b: (e.b + inst.k) % inst.k,
                    ..*e
                })
                .collect(),
            ..inst.clone()
        };
        for values in [[0u32, 0, 0], [1, 0, 1], [0, 1, 1], [1, 1, 0]] {
            let a = Assignment { values: values.to_vec() };
            assert_eq!(
                inst.satisfied_count(&a).unwrap(),
                shifted.satisfied_count(&a).unwrap()
            );
        }
    }
}
