//! Dense two-phase primal simplex for small and medium linear programs.
//!
//! Problems are stated as `minimize c·x` subject to linear rows with `<=`, `>=` or `=`
//! relations and `x >= 0`. Phase one minimizes the sum of artificial variables to find a
//! feasible basis; phase two optimizes the real objective from there. Entering columns follow
//! Dantzig's rule and switch to Bland's rule after a run of degenerate pivots.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-9;
const ZERO_EPS: f64 = 1e-12;
const DEGENERATE_RUN_BEFORE_BLAND: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint { coeffs, relation, rhs }
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize objective·x` subject to `constraints` and `x >= 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum LpError {
    #[error("row {row} has {found} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, found: usize },
    #[error("problem is infeasible")]
    Infeasible,
    #[error("objective is unbounded below")]
    Unbounded,
    #[error("pivot limit of {0} reached")]
    PivotLimit(usize),
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
        self
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let bounds = x.iter().map(|&v| (-v).max(0.0));
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .chain(bounds)
            .fold(0.0, f64::max)
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        Tableau::build(self)?.run(self)
    }
}

struct Tableau {
    rows: usize,
    width: usize,
    structural: usize,
    /// First artificial column; artificials occupy `artificial_start..width - 1`.
    artificial_start: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    cost: Vec<f64>,
    pivots: usize,
    pivot_limit: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Result<Self, LpError> {
        let n = lp.objective.len();
        for (row, c) in lp.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    row,
                    expected: n,
                    found: c.coeffs.len(),
                });
            }
        }
        // Flip rows so every right-hand side is nonnegative.
        let rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let flipped = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|a| -a).collect(), flipped, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let m = rows.len();
        let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let artificial_count = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let artificial_start = n + slack_count;
        let width = artificial_start + artificial_count + 1;
        let mut cells = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let (mut next_slack, mut next_artificial) = (n, artificial_start);
        for (i, (coeffs, rel, rhs)) in rows.iter().enumerate() {
            let row = &mut cells[i * width..(i + 1) * width];
            row[..n].copy_from_slice(coeffs);
            row[width - 1] = *rhs;
            match rel {
                Relation::Le => {
                    row[next_slack] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -1.0;
                    next_slack += 1;
                    row[next_artificial] = 1.0;
                    basis[i] = next_artificial;
                    next_artificial += 1;
                }
                Relation::Eq => {
                    row[next_artificial] = 1.0;
                    basis[i] = next_artificial;
                    next_artificial += 1;
                }
            }
        }
        Ok(Tableau {
            rows: m,
            width,
            structural: n,
            artificial_start,
            cells,
            basis,
            cost: vec![0.0; width],
            pivots: 0,
            pivot_limit: 50 * (m + width) + 1000,
        })
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn rhs_col(&self) -> usize {
        self.width - 1
    }

    /// Reduced-cost row for column costs `c` under the current basis; the last entry holds
    /// minus the current objective value.
    fn price(&mut self, c: &[f64]) {
        let mut cost = vec![0.0; self.width];
        cost[..c.len()].copy_from_slice(c);
        for i in 0..self.rows {
            let cb = cost_of(c, self.basis[i]);
            if cb != 0.0 {
                let row = &self.cells[i * self.width..(i + 1) * self.width];
                for (r, &a) in cost.iter_mut().zip(row) {
                    *r -= cb * a;
                }
            }
        }
        self.cost = cost;
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let w = self.width;
        let p = self.at(r, col);
        {
            let row = &mut self.cells[r * w..(r + 1) * w];
            for x in row.iter_mut() {
                *x /= p;
            }
            row[col] = 1.0;
        }
        let pivot_row: Vec<f64> = self.cells[r * w..(r + 1) * w].to_vec();
        let nonzero: Vec<usize> = (0..w).filter(|&j| pivot_row[j] != 0.0).collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.cells[i * w + col];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.cells[i * w..(i + 1) * w];
            for &j in &nonzero {
                row[j] -= f * pivot_row[j];
                if row[j].abs() < ZERO_EPS {
                    row[j] = 0.0;
                }
            }
            row[col] = 0.0;
        }
        let f = self.cost[col];
        if f != 0.0 {
            for &j in &nonzero {
                self.cost[j] -= f * pivot_row[j];
            }
            self.cost[col] = 0.0;
        }
        self.basis[r] = col;
        self.pivots += 1;
    }

    /// Runs simplex iterations over columns `< allowed` until optimal.
    fn optimize(&mut self, allowed: usize) -> Result<(), LpError> {
        let mut degenerate_run = 0;
        loop {
            if self.pivots >= self.pivot_limit {
                return Err(LpError::PivotLimit(self.pivot_limit));
            }
            let bland = degenerate_run >= DEGENERATE_RUN_BEFORE_BLAND;
            let entering = if bland {
                (0..allowed).find(|&j| self.cost[j] < -PIVOT_EPS)
            } else {
                let mut best = None;
                let mut best_val = -PIVOT_EPS;
                for j in 0..allowed {
                    if self.cost[j] < best_val {
                        best_val = self.cost[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else {
                return Ok(());
            };
            let rhs = self.rhs_col();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, col);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, rhs) / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - ZERO_EPS
                                || (ratio <= lr + ZERO_EPS && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio.abs() <= ZERO_EPS {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, col);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpSolution, LpError> {
        let total_cols = self.width - 1;
        if self.artificial_start < total_cols {
            let mut phase_one = vec![0.0; total_cols];
            for c in phase_one.iter_mut().skip(self.artificial_start) {
                *c = 1.0;
            }
            self.price(&phase_one);
            self.optimize(total_cols)?;
            let infeasibility = -self.cost[self.rhs_col()];
            if infeasibility > 1e-7 {
                return Err(LpError::Infeasible);
            }
            self.evict_artificials();
        }
        self.price(&lp.objective);
        self.optimize(self.artificial_start)?;

        let mut x = vec![0.0; self.structural];
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < self.structural {
                x[b] = self.at(i, self.rhs_col()).max(0.0);
            }
        }
        let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            objective,
            pivots: self.pivots,
        })
    }

    /// Pivots zero-valued artificial variables out of the basis; rows where that is
    /// impossible are redundant and dropped.
    fn evict_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows {
            if self.basis[i] >= self.artificial_start {
                let col = (0..self.artificial_start).find(|&j| self.at(i, j).abs() > PIVOT_EPS);
                match col {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.cells.drain(i * self.width..(i + 1) * self.width);
                        self.basis.remove(i);
                        self.rows -= 1;
                        continue;
                    }
                }
            }
            i += 1;
        }
    }
}

fn cost_of(c: &[f64], col: usize) -> f64 {
    c.get(col).copied().unwrap_or(0.0)
}
