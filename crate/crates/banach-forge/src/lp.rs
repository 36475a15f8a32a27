//! Exact simplex over rationals.
//!
//! Two-phase dense simplex with Bland's rule, so termination is guaranteed
//! and every optimum/witness is an exact rational. Variables are free by
//! default and split into positive/negative parts internally; callers that
//! know a variable is nonnegative (the Minkowski-functional LPs) mark it so
//! and get a single column.

use crate::rational::Rational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Rational>,
    pub relation: Relation,
    pub rhs: Rational,
}

impl Constraint {
    pub fn le(coeffs: Vec<Rational>, rhs: Rational) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }
    pub fn eq(coeffs: Vec<Rational>, rhs: Rational) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Eq,
            rhs,
        }
    }
    pub fn ge(coeffs: Vec<Rational>, rhs: Rational) -> Self {
        Constraint {
            coeffs,
            relation: Relation::Ge,
            rhs,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<Rational>,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    /// Per-variable nonnegativity; `false` means free.
    pub nonnegative: Vec<bool>,
}

impl LinearProgram {
    /// A program over `num_vars` free variables.
    pub fn new(num_vars: usize, objective: Vec<Rational>, sense: Sense) -> Self {
        assert_eq!(objective.len(), num_vars);
        LinearProgram {
            num_vars,
            objective,
            sense,
            constraints: Vec::new(),
            nonnegative: vec![false; num_vars],
        }
    }

    pub fn with_nonnegative(mut self, nonneg: Vec<bool>) -> Self {
        assert_eq!(nonneg.len(), self.num_vars);
        self.nonnegative = nonneg;
        self
    }

    pub fn push(&mut self, c: Constraint) {
        assert_eq!(c.coeffs.len(), self.num_vars, "constraint width mismatch");
        self.constraints.push(c);
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub optimum: Rational,
    pub witness: Vec<Rational>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("infeasible constraint system")]
    Infeasible,
    #[error("objective unbounded in the optimization direction")]
    Unbounded,
}

struct Tableau {
    cols: usize,
    rows: Vec<Vec<Rational>>,
    rhs: Vec<Rational>,
    basis: Vec<usize>,
    artificial_start: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        debug_assert!(!p.is_zero());
        let inv = p.recip();
        for v in self.rows[r].iter_mut() {
            *v = &*v * &inv;
        }
        self.rhs[r] = &self.rhs[r] * &inv;
        for i in 0..self.rows.len() {
            if i == r || self.rows[i][c].is_zero() {
                continue;
            }
            let f = self.rows[i][c].clone();
            for j in 0..self.cols {
                if self.rows[r][j].is_zero() {
                    continue;
                }
                let v = &self.rows[i][j] - &f * &self.rows[r][j];
                self.rows[i][j] = v;
            }
            self.rhs[i] = &self.rhs[i] - &f * &self.rhs[r];
        }
        self.basis[r] = c;
    }

    /// Reduced costs and current objective value for a minimization cost row.
    fn reduced_costs(&self, cost: &[Rational]) -> (Vec<Rational>, Rational) {
        let m = self.rows.len();
        let mut multipliers: Vec<&Rational> = Vec::with_capacity(m);
        for i in 0..m {
            multipliers.push(&cost[self.basis[i]]);
        }
        let mut rc = cost.to_vec();
        let mut obj = Rational::zero();
        for i in 0..m {
            if multipliers[i].is_zero() {
                continue;
            }
            for j in 0..self.cols {
                if !self.rows[i][j].is_zero() {
                    rc[j] = &rc[j] - multipliers[i] * &self.rows[i][j];
                }
            }
            obj = obj + multipliers[i] * &self.rhs[i];
        }
        (rc, obj)
    }

    /// Bland-rule minimization. `banned` columns never enter.
    fn run(&mut self, cost: &[Rational], banned_from: usize) -> Result<Rational, LpError> {
        loop {
            let (rc, obj) = self.reduced_costs(cost);
            let Some(enter) = (0..banned_from).find(|&j| rc[j].is_negative()) else {
                return Ok(obj);
            };
            let mut leave: Option<usize> = None;
            let mut best: Option<Rational> = None;
            for i in 0..self.rows.len() {
                if self.rows[i][enter].is_positive() {
                    let ratio = &self.rhs[i] / &self.rows[i][enter];
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            ratio < *b
                                || (ratio == *b
                                    && self.basis[i] < self.basis[leave.unwrap()])
                        }
                    };
                    if better {
                        best = Some(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(LpError::Unbounded);
            };
            self.pivot(r, enter);
        }
    }
}

/// Solves the program exactly. The witness satisfies every constraint with
/// exact rational arithmetic and attains the optimum.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.num_vars;
    assert_eq!(lp.objective.len(), n);
    assert_eq!(lp.nonnegative.len(), n);

    // Column layout: per-variable (plus column, optional minus column),
    // then slacks/surpluses, then artificials.
    let mut plus_col = vec![0usize; n];
    let mut minus_col = vec![usize::MAX; n];
    let mut next = 0usize;
    for j in 0..n {
        plus_col[j] = next;
        next += 1;
        if !lp.nonnegative[j] {
            minus_col[j] = next;
            next += 1;
        }
    }
    let struct_cols = next;

    // Normalize rows to nonnegative rhs, then count slack/artificial columns.
    struct Row {
        coeffs: Vec<Rational>,
        relation: Relation,
        rhs: Rational,
    }
    let rows: Vec<Row> = lp
        .constraints
        .iter()
        .map(|c| {
            assert_eq!(c.coeffs.len(), n, "constraint width mismatch");
            if c.rhs.is_negative() {
                let relation = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                Row {
                    coeffs: c.coeffs.iter().map(|v| -v).collect(),
                    relation,
                    rhs: -c.rhs.clone(),
                }
            } else {
                Row {
                    coeffs: c.coeffs.clone(),
                    relation: c.relation,
                    rhs: c.rhs.clone(),
                }
            }
        })
        .collect();

    let m = rows.len();
    let num_slack = rows
        .iter()
        .filter(|r| r.relation != Relation::Eq)
        .count();
    let num_art = rows
        .iter()
        .filter(|r| r.relation != Relation::Le)
        .count();
    let cols = struct_cols + num_slack + num_art;

    let mut t = Tableau {
        cols,
        rows: vec![vec![Rational::zero(); cols]; m],
        rhs: rows.iter().map(|r| r.rhs.clone()).collect(),
        basis: vec![0; m],
        artificial_start: struct_cols + num_slack,
    };

    let mut slack = struct_cols;
    let mut art = t.artificial_start;
    for (i, row) in rows.iter().enumerate() {
        for j in 0..n {
            let v = &row.coeffs[j];
            if v.is_zero() {
                continue;
            }
            t.rows[i][plus_col[j]] = v.clone();
            if minus_col[j] != usize::MAX {
                t.rows[i][minus_col[j]] = -v;
            }
        }
        match row.relation {
            Relation::Le => {
                t.rows[i][slack] = Rational::one();
                t.basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                t.rows[i][slack] = -Rational::one();
                slack += 1;
                t.rows[i][art] = Rational::one();
                t.basis[i] = art;
                art += 1;
            }
            Relation::Eq => {
                t.rows[i][art] = Rational::one();
                t.basis[i] = art;
                art += 1;
            }
        }
    }

    // Phase 1: minimize the artificial sum.
    if num_art > 0 {
        let mut phase1 = vec![Rational::zero(); cols];
        for j in t.artificial_start..cols {
            phase1[j] = Rational::one();
        }
        let obj = t.run(&phase1, cols)?;
        if !obj.is_zero() {
            return Err(LpError::Infeasible);
        }
        // Drive artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] >= t.artificial_start {
                if let Some(c) = (0..t.artificial_start).find(|&j| !t.rows[i][j].is_zero()) {
                    t.pivot(i, c);
                }
                // An all-zero row is redundant; its artificial stays basic at
                // zero and is banned from entering below.
            }
        }
    }

    // Phase 2.
    let mut cost = vec![Rational::zero(); cols];
    for j in 0..n {
        let c = match lp.sense {
            Sense::Minimize => lp.objective[j].clone(),
            Sense::Maximize => -lp.objective[j].clone(),
        };
        cost[plus_col[j]] = c.clone();
        if minus_col[j] != usize::MAX {
            cost[minus_col[j]] = -c;
        }
    }
    let obj = t.run(&cost, t.artificial_start)?;

    let mut col_value = vec![Rational::zero(); cols];
    for i in 0..m {
        col_value[t.basis[i]] = t.rhs[i].clone();
    }
    let witness: Vec<Rational> = (0..n)
        .map(|j| {
            if minus_col[j] == usize::MAX {
                col_value[plus_col[j]].clone()
            } else {
                &col_value[plus_col[j]] - &col_value[minus_col[j]]
            }
        })
        .collect();
    let optimum = match lp.sense {
        Sense::Minimize => obj,
        Sense::Maximize => -obj,
    };
    Ok(LpSolution { optimum, witness })
}

/// Exact feasibility check of a constraint system (no objective).
pub fn is_feasible(num_vars: usize, constraints: &[Constraint], nonnegative: &[bool]) -> bool {
    let mut lp = LinearProgram::new(
        num_vars,
        vec![Rational::zero(); num_vars],
        Sense::Minimize,
    )
    .with_nonnegative(nonnegative.to_vec());
    for c in constraints {
        lp.push(c.clone());
    }
    solve_lp(&lp).is_ok()
}
