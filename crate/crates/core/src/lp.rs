//! Dense two-phase primal simplex for small linear programs in standard form
//!
//! ```text
//! minimize    c·x
//! subject to  A x = b,  x >= 0
//! ```
//!
//! Pivoting follows Bland's rule (lowest-index entering column, lowest-index
//! leaving basic variable among ratio ties), so the solver terminates on
//! degenerate problems and the returned vertex is a deterministic function
//! of the input.

use thiserror::Error;

const PIVOT_EPS: f64 = 1e-11;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex exceeded {MAX_PIVOTS} pivots")]
    PivotLimit,
    #[error("malformed linear program: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    /// Constraint matrix, one row per equality.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// Reduced costs, last entry is minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
    /// Columns allowed to enter the basis.
    allowed: Vec<bool>,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        *self.t[i].last().unwrap()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.t[row].len();
        let p = self.t[row][col];
        for j in 0..width {
            self.t[row][j] /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for j in 0..width {
                    r[j] -= f * pivot_row[j];
                }
                r[col] = 0.0;
            }
        }
        let f = self.cost[col];
        if f != 0.0 {
            for (c, p) in self.cost.iter_mut().zip(&pivot_row) {
                *c -= f * p;
            }
            self.cost[col] = 0.0;
        }
        self.basis[row] = col;
    }

    fn run(&mut self) -> Result<(), LpError> {
        for _ in 0..MAX_PIVOTS {
            let entering =
                (0..self.allowed.len()).find(|&j| self.allowed[j] && self.cost[j] < -PIVOT_EPS);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.t.len() {
                let a = self.t[i][col];
                if a <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                leaving = match leaving {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - PIVOT_EPS
                            || (ratio <= best + PIVOT_EPS && self.basis[i] < self.basis[r])
                        {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((row, _)) = leaving else {
                return Err(LpError::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(LpError::PivotLimit)
    }
}

pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let m = lp.a.len();
    let n = lp.c.len();
    if lp.b.len() != m {
        return Err(LpError::Shape(format!(
            "{m} rows but {} rhs entries",
            lp.b.len()
        )));
    }
    if let Some(i) = lp.a.iter().position(|r| r.len() != n) {
        return Err(LpError::Shape(format!("row {i} does not have {n} columns")));
    }

    // Columns: n structural, m artificial, 1 rhs.
    let width = n + m + 1;
    let mut t = Vec::with_capacity(m);
    for (i, (row, &bi)) in lp.a.iter().zip(&lp.b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut r = vec![0.0; width];
        for (j, &a) in row.iter().enumerate() {
            r[j] = sign * a;
        }
        r[n + i] = 1.0;
        r[width - 1] = sign * bi;
        t.push(r);
    }

    // Phase 1: minimize the sum of artificials.
    let mut cost = vec![0.0; width];
    for r in &t {
        for j in 0..n {
            cost[j] -= r[j];
        }
        cost[width - 1] -= r[width - 1];
    }
    let mut allowed = vec![true; n + m];
    for a in allowed.iter_mut().skip(n) {
        *a = false;
    }
    let mut tab = Tableau {
        t,
        cost,
        basis: (n..n + m).collect(),
        allowed,
    };
    tab.run()?;
    let infeasibility = -tab.cost[width - 1];
    let scale = 1.0 + lp.b.iter().map(|b| b.abs()).sum::<f64>();
    if infeasibility > 1e-9 * scale {
        return Err(LpError::Infeasible);
    }

    // Drive zero-level artificials out of the basis where possible; rows
    // where that fails are redundant and stay inert.
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[i][j].abs() > PIVOT_EPS) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase 2 on the original objective.
    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&lp.c);
    for (i, &bv) in tab.basis.iter().enumerate() {
        let cb = if bv < n { lp.c[bv] } else { 0.0 };
        if cb != 0.0 {
            for (c, t) in cost.iter_mut().zip(&tab.t[i]) {
                *c -= cb * t;
            }
        }
    }
    tab.cost = cost;
    tab.run()?;

    let mut x = vec![0.0; n];
    for (i, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.rhs(i);
        }
    }
    let objective = lp.c.iter().zip(&x).map(|(c, x)| c * x).sum();
    Ok(LpSolution { x, objective })
}
