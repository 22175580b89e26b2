//! One-hot CNF embedding of 2-Lin-k instances over spin variables.
//!
//! Each k-valued variable x_i occupies the k spins [k*i, k*i + k); each equation q
//! gets a witness block z_q at [k*n_x + k*q, ..). Per variable we emit the
//! k(k-1)/2 pairwise at-most-one clauses (the at-least-one OR is redundant and
//! dropped); per equation one length-k OR over the z block plus 2k binary
//! implications tying each witness spin to its two operand spins. Totals:
//! N = (n_x + n_eq)k spins and M = n_x k(k-1)/2 + n_eq (1 + 2k) clauses.

use crate::error::{Error, Result};
use crate::instance::{Assignment, TwoLinInstance};
use std::path::Path;

/// A single literal: spin index and polarity (the c_mp entry, +1 or -1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub var: usize,
    pub polarity: i8,
}

/// A disjunction of literals; length is 2 or k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub literals: Vec<Literal>,
}

/// The encoded formula with the sparse literal matrix in clause-major and
/// variable-major adjacency.
#[derive(Debug, Clone)]
pub struct CnfFormula {
    pub k: u32,
    pub n_x: usize,
    pub n_eq: usize,
    pub clauses: Vec<Clause>,
    /// clauses[var_clauses[p]] are the clauses containing spin p.
    pub var_clauses: Vec<Vec<usize>>,
    /// Index of the first clause of the group derived from equation q.
    /// Each group is 1 + 2k clauses long (OR clause first).
    pub equation_clause_start: Vec<usize>,
}

impl CnfFormula {
    /// Total spin count N = (n_x + n_eq) k.
    pub fn num_spins(&self) -> usize {
        (self.n_x + self.n_eq) * self.k as usize
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// First spin of the x-block for variable i.
    pub fn x_block(&self, i: usize) -> usize {
        self.k as usize * i
    }

    /// First spin of the z-block for equation q.
    pub fn z_block(&self, q: usize) -> usize {
        self.k as usize * (self.n_x + q)
    }

    /// Clause indices of the group derived from equation q (OR clause first).
    pub fn equation_clauses(&self, q: usize) -> std::ops::Range<usize> {
        let start = self.equation_clause_start[q];
        start..start + 1 + 2 * self.k as usize
    }
}

/// Encodes an instance into its CNF formula. Clause order is deterministic:
/// all at-most-one pairs (ascending variable, ascending pair), then per-equation
/// groups in equation order.
pub fn encode(instance: &TwoLinInstance) -> Result<CnfFormula> {
    instance.validate()?;
    let k = instance.k as usize;
    let n_x = instance.n_x;
    let n_eq = instance.n_eq();
    let n_spins = (n_x + n_eq) * k;

    let mut clauses = Vec::with_capacity(n_x * k * (k - 1) / 2 + n_eq * (1 + 2 * k));

    for i in 0..n_x {
        let base = k * i;
        for q1 in 0..k {
            for q2 in q1 + 1..k {
                clauses.push(Clause {
                    literals: vec![
                        Literal { var: base + q1, polarity: -1 },
                        Literal { var: base + q2, polarity: -1 },
                    ],
                });
            }
        }
    }

    let mut equation_clause_start = Vec::with_capacity(n_eq);
    for (q, eq) in instance.equations.iter().enumerate() {
        equation_clause_start.push(clauses.len());
        let zb = (n_x + q) * k;
        clauses.push(Clause {
            literals: (0..k)
                .map(|t| Literal { var: zb + t, polarity: 1 })
                .collect(),
        });
        // Witness t asserts x_i = t and x_j = t - b (mod k); the shift acts only
        // on the within-block offset.
        for t in 0..k {
            let partner = (t + k - eq.b as usize % k) % k;
            clauses.push(Clause {
                literals: vec![
                    Literal { var: zb + t, polarity: -1 },
                    Literal { var: k * eq.i + t, polarity: 1 },
                ],
            });
            clauses.push(Clause {
                literals: vec![
                    Literal { var: zb + t, polarity: -1 },
                    Literal { var: k * eq.j + partner, polarity: 1 },
                ],
            });
        }
    }

    let mut var_clauses = vec![Vec::new(); n_spins];
    for (m, clause) in clauses.iter().enumerate() {
        for lit in &clause.literals {
            var_clauses[lit.var].push(m);
        }
    }

    Ok(CnfFormula {
        k: instance.k,
        n_x,
        n_eq,
        clauses,
        var_clauses,
        equation_clause_start,
    })
}

/// Maps an assignment to its spin corner: x-blocks one-hot at the assigned value,
/// z-blocks one-hot at the witness branch when the equation is satisfied and
/// all -1 otherwise (no witness asserted; only the OR clause then fails).
pub fn encode_assignment(
    formula: &CnfFormula,
    assignment: &Assignment,
    instance: &TwoLinInstance,
) -> Result<Vec<f64>> {
    instance.satisfied_count(assignment)?; // validates dimensions and ranges
    let mut s = vec![-1.0; formula.num_spins()];
    for (i, &v) in assignment.values.iter().enumerate() {
        s[formula.x_block(i) + v as usize] = 1.0;
    }
    for (q, _) in instance.equations.iter().enumerate() {
        if instance.equation_satisfied(q, &assignment.values) {
            let witness = assignment.values[instance.equations[q].i] as usize;
            s[formula.z_block(q) + witness] = 1.0;
        }
    }
    Ok(s)
}

/// Per x-block argmax of the spin entries; ties break to the smallest index.
pub fn decode_assignment(s: &[f64], formula: &CnfFormula) -> Assignment {
    let k = formula.k as usize;
    let values = (0..formula.n_x)
        .map(|i| {
            let block = &s[formula.x_block(i)..formula.x_block(i) + k];
            let mut best = 0;
            for (t, &v) in block.iter().enumerate() {
                if v > block[best] {
                    best = t;
                }
            }
            best as u32
        })
        .collect();
    Assignment { values }
}

/// Number of clauses with at least one satisfied literal at a +/-1 corner.
pub fn count_satisfied_clauses(formula: &CnfFormula, s: &[f64]) -> Result<usize> {
    if s.len() != formula.num_spins() {
        return Err(Error::invalid(format!(
            "state length {} != N = {}",
            s.len(),
            formula.num_spins()
        )));
    }
    if s.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("count_satisfied_clauses requires a +/-1 corner"));
    }
    Ok(formula
        .clauses
        .iter()
        .filter(|c| {
            c.literals
                .iter()
                .any(|lit| lit.polarity as f64 * s[lit.var] == 1.0)
        })
        .count())
}

/// Standard DIMACS CNF with 1-based variables; literal sign is the polarity.
pub fn write_dimacs(formula: &CnfFormula, path: &Path) -> Result<()> {
    std::fs::write(path, dimacs_string(formula))?;
    Ok(())
}

pub fn dimacs_string(formula: &CnfFormula) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(out, "p cnf {} {}", formula.num_spins(), formula.num_clauses()).unwrap();
    for clause in &formula.clauses {
        for lit in &clause.literals {
            let v = (lit.var + 1) as i64 * lit.polarity as i64;
            write!(out, "{v} ").unwrap();
        }
        writeln!(out, "0").unwrap();
    }
    out
}
