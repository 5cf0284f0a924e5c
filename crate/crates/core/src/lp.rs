//! Dense two-phase simplex for small linear programs
//! `max c^T x  s.t.  A x (<=|>=|=) b,  x >= 0`.

use crate::{Error, Result};

const EPS: f64 = 1e-9;
const MAX_PIVOTS: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    /// A maximisation problem over `objective.len()` non-negative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn add(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.objective.len(), "constraint width");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
        self
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn solve(&self) -> Result<Solution> {
        Tableau::build(self).solve(&self.objective)
    }
}

struct Tableau {
    rows: usize,
    /// structural + slack/surplus columns; artificials follow
    real_cols: usize,
    cols: usize,
    /// row-major, `cols + 1` entries per row, rhs last
    a: Vec<f64>,
    basis: Vec<usize>,
    n: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.constraints.len();
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = lp
            .constraints
            .iter()
            .map(|c| {
                if c.rhs < 0.0 {
                    let rel = match c.relation {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs)
                } else {
                    (c.coeffs.clone(), c.relation, c.rhs)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
        let real_cols = n + n_slack;
        let cols = real_cols + n_art;
        let w = cols + 1;
        let mut a = vec![0.0; m * w];
        let mut basis = vec![0; m];
        let (mut s, mut art) = (n, real_cols);
        for (i, (coeffs, rel, rhs)) in rows.drain(..).enumerate() {
            let row = &mut a[i * w..(i + 1) * w];
            row[..n].copy_from_slice(&coeffs);
            row[cols] = rhs;
            match rel {
                Relation::Le => {
                    row[s] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Relation::Ge => {
                    row[s] = -1.0;
                    s += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self {
            rows: m,
            real_cols,
            cols,
            a,
            basis,
            n,
        }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize, cost: &mut [f64]) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[pc] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[pc];
            if f != 0.0 {
                for (v, &q) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * q;
                }
                row[pc] = 0.0;
            }
        };
        before.chunks_exact_mut(w).for_each(eliminate);
        after.chunks_exact_mut(w).for_each(eliminate);
        eliminate(cost);
        self.basis[pr] = pc;
    }

    /// Minimises the cost row (reduced costs in `cost[..cols]`, negated
    /// objective value in `cost[cols]`) over columns `< limit`.
    fn optimise(&mut self, cost: &mut [f64], limit: usize) -> Result<()> {
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate > 50;
            let mut enter = None;
            let mut best = -EPS;
            for (c, &v) in cost.iter().enumerate().take(limit) {
                if v < best {
                    enter = Some(c);
                    if bland {
                        break;
                    }
                    best = v;
                }
            }
            let Some(pc) = enter else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let v = self.at(r, pc);
                if v > EPS {
                    let ratio = self.rhs(r) / v;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - EPS
                                || (ratio <= lratio + EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(Error::Unbounded);
            };
            if ratio <= EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc, cost);
        }
        Err(Error::Solver(format!(
            "no optimum after {MAX_PIVOTS} pivots"
        )))
    }

    fn solve(mut self, objective: &[f64]) -> Result<Solution> {
        let w = self.cols + 1;
        // phase 1: minimise the sum of artificials
        if self.cols > self.real_cols {
            let mut cost = vec![0.0; w];
            for c in self.real_cols..self.cols {
                cost[c] = 1.0;
            }
            for r in 0..self.rows {
                if self.basis[r] >= self.real_cols {
                    for c in 0..w {
                        cost[c] -= self.a[r * w + c];
                    }
                }
            }
            self.optimise(&mut cost, self.cols)?;
            let infeasibility = -cost[self.cols];
            let scale = 1.0
                + (0..self.rows)
                    .map(|r| self.rhs(r).abs())
                    .fold(0.0, f64::max);
            if infeasibility > EPS * scale {
                return Err(Error::Infeasible);
            }
            // drive artificials out of the basis; drop redundant rows
            let mut r = 0;
            while r < self.rows {
                if self.basis[r] >= self.real_cols {
                    let pc = (0..self.real_cols).find(|&c| self.at(r, c).abs() > EPS);
                    match pc {
                        Some(pc) => {
                            self.pivot(r, pc, &mut cost);
                            r += 1;
                        }
                        None => {
                            self.a.drain(r * w..(r + 1) * w);
                            self.basis.remove(r);
                            self.rows -= 1;
                        }
                    }
                } else {
                    r += 1;
                }
            }
        }
        // phase 2 over the real columns
        let mut cost = vec![0.0; w];
        for (c, &v) in objective.iter().enumerate() {
            cost[c] = -v;
        }
        for r in 0..self.rows {
            let b = self.basis[r];
            let f = cost[b];
            if f != 0.0 {
                for c in 0..w {
                    cost[c] -= f * self.a[r * w + c];
                }
            }
        }
        self.optimise(&mut cost, self.real_cols)?;
        let mut x = vec![0.0; self.n];
        for r in 0..self.rows {
            let b = self.basis[r];
            if b < self.n {
                x[b] = self.rhs(r).max(0.0);
            }
        }
        let objective = objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(Solution { x, objective })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_maximisation() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::maximize(vec![3.0, 5.0]);
        lp.add(vec![1.0, 0.0], Relation::Le, 4.0)
            .add(vec![0.0, 2.0], Relation::Le, 12.0)
            .add(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, 36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 6.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_and_ge_rows() {
        // max -x - y, x + y = 1 and x >= 0.3: optimum value -1 with x >= 0.3
        let mut lp = LinearProgram::maximize(vec![-1.0, -2.0]);
        lp.add(vec![1.0, 1.0], Relation::Eq, 1.0)
            .add(vec![1.0, 0.0], Relation::Ge, 0.3);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.objective, -1.0, epsilon = 1e-9);
        // negative rhs is normalised
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.add(vec![-1.0, -1.0], Relation::Ge, -2.0);
        assert_abs_diff_eq!(lp.solve().unwrap().objective, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.add(vec![1.0], Relation::Le, 1.0)
            .add(vec![1.0], Relation::Ge, 2.0);
        assert!(matches!(lp.solve(), Err(Error::Infeasible)));
        let mut lp = LinearProgram::maximize(vec![1.0, 0.0]);
        lp.add(vec![0.0, 1.0], Relation::Le, 1.0);
        assert!(matches!(lp.solve(), Err(Error::Unbounded)));
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::maximize(vec![1.0, 2.0, 0.0]);
        lp.add(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0)
            .add(vec![2.0, 2.0, 2.0], Relation::Eq, 2.0)
            .add(vec![0.0, 1.0, 0.0], Relation::Le, 0.25);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, 1.25, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the plain largest-coefficient rule
        let mut lp = LinearProgram::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0)
            .add(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0)
            .add(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let s = lp.solve().unwrap();
        assert_abs_diff_eq!(s.objective, 0.05, epsilon = 1e-9);
    }

    #[test]
    fn matches_brute_force_vertices() {
        // random 2-variable LPs against vertex enumeration
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let c = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let mut rows: Vec<([f64; 2], f64)> = (0..4)
                .map(|_| {
                    (
                        [rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)],
                        rng.random_range(0.5..2.0),
                    )
                })
                .collect();
            rows.push(([-1.0, 0.0], 0.0));
            rows.push(([0.0, -1.0], 0.0));
            let mut lp = LinearProgram::maximize(c.to_vec());
            for (a, b) in &rows[..4] {
                lp.add(a.to_vec(), Relation::Le, *b);
            }
            let got = lp.solve().unwrap().objective;
            let mut best = f64::NEG_INFINITY;
            for i in 0..rows.len() {
                for j in i + 1..rows.len() {
                    let (a, b) = (rows[i], rows[j]);
                    let det = a.0[0] * b.0[1] - a.0[1] * b.0[0];
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let x = (a.1 * b.0[1] - a.0[1] * b.1) / det;
                    let y = (a.0[0] * b.1 - a.1 * b.0[0]) / det;
                    if rows
                        .iter()
                        .all(|(r, rhs)| r[0] * x + r[1] * y <= rhs + 1e-9)
                    {
                        best = best.max(c[0] * x + c[1] * y);
                    }
                }
            }
            assert_abs_diff_eq!(got, best, epsilon = 1e-8);
        }
    }
}
