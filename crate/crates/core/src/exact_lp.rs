//! Exact rational linear programming over `{x ≥ 0 : A x = b}`.
//!
//! A revised two-phase simplex with Bland's rule. Phase 1 either finds a
//! basic feasible point or stops with a positive optimum, in which case its
//! dual solution is a Farkas certificate `y` with `yA ≤ 0` and `yb > 0`.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Find `x ≥ 0` with `A x = b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem {
    n_rows: usize,
    /// Sparse columns: (row, non-zero value).
    columns: Vec<Vec<(usize, BigRational)>>,
    rhs: Vec<BigRational>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeasibilityOutcome {
    Feasible(Vec<BigRational>),
    /// Farkas certificate: `yA ≤ 0` componentwise and `yb > 0`.
    Infeasible(Vec<BigRational>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<BigRational>, value: BigRational },
    Infeasible(Vec<BigRational>),
    Unbounded,
}

impl FeasibilityProblem {
    /// Builds the problem from a dense row-major matrix.
    pub fn new(a: Vec<Vec<BigRational>>, b: Vec<BigRational>) -> Result<FeasibilityProblem> {
        if a.len() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} right-hand sides",
                a.len(),
                b.len()
            )));
        }
        let n_cols = a.first().map_or(0, Vec::len);
        if let Some(bad) = a.iter().position(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch(format!(
                "row {bad} has {} entries, expected {n_cols}",
                a[bad].len()
            )));
        }
        let mut columns = vec![Vec::new(); n_cols];
        for (i, row) in a.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                if !v.is_zero() {
                    columns[j].push((i, v));
                }
            }
        }
        Ok(FeasibilityProblem {
            n_rows: b.len(),
            columns,
            rhs: b,
        })
    }

    /// Builds the problem from sparse columns of `(row, value)` entries.
    pub fn from_sparse_columns(
        columns: Vec<Vec<(usize, BigRational)>>,
        rhs: Vec<BigRational>,
    ) -> Result<FeasibilityProblem> {
        let n_rows = rhs.len();
        let mut cleaned = Vec::with_capacity(columns.len());
        for (j, col) in columns.into_iter().enumerate() {
            let mut col: Vec<(usize, BigRational)> = col.into_iter().filter(|(_, v)| !v.is_zero()).collect();
            col.sort_by_key(|(i, _)| *i);
            if col.iter().any(|(i, _)| *i >= n_rows) || col.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::DimensionMismatch(format!("column {j} has an invalid row index")));
            }
            cleaned.push(col);
        }
        Ok(FeasibilityProblem {
            n_rows,
            columns: cleaned,
            rhs,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn rhs(&self) -> &[BigRational] {
        &self.rhs
    }

    pub fn entry(&self, row: usize, col: usize) -> BigRational {
        self.columns[col]
            .iter()
            .find(|(i, _)| *i == row)
            .map(|(_, v)| v.clone())
            .unwrap_or_else(BigRational::zero)
    }

    pub fn dense_rows(&self) -> Vec<Vec<BigRational>> {
        let mut rows = vec![vec![BigRational::zero(); self.n_cols()]; self.n_rows];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, v) in col {
                rows[*i][j] = v.clone();
            }
        }
        rows
    }

    /// `y · A_j` for column `j`.
    pub fn column_dot(&self, y: &[BigRational], j: usize) -> BigRational {
        dot_sparse(&self.columns[j], y)
    }

    /// `A x`.
    pub fn apply(&self, x: &[BigRational]) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.n_rows];
        for (col, xj) in self.columns.iter().zip(x) {
            if xj.is_zero() {
                continue;
            }
            for (i, v) in col {
                out[*i] += v * xj;
            }
        }
        out
    }

    /// Same matrix with a different right-hand side.
    pub fn with_rhs(&self, rhs: Vec<BigRational>) -> Result<FeasibilityProblem> {
        if rhs.len() != self.n_rows {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        Ok(FeasibilityProblem {
            n_rows: self.n_rows,
            columns: self.columns.clone(),
            rhs,
        })
    }

    /// Keeps only the listed columns, in the listed order.
    pub fn select_columns(&self, keep: &[usize]) -> FeasibilityProblem {
        FeasibilityProblem {
            n_rows: self.n_rows,
            columns: keep.iter().map(|&j| self.columns[j].clone()).collect(),
            rhs: self.rhs.clone(),
        }
    }
}

impl FeasibilityOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasibilityOutcome::Feasible(_))
    }

    /// Exact check of the certificate against `problem`.
    pub fn verify(&self, problem: &FeasibilityProblem) -> bool {
        match self {
            FeasibilityOutcome::Feasible(x) => {
                x.len() == problem.n_cols() && x.iter().all(|v| !v.is_negative()) && problem.apply(x) == problem.rhs
            }
            FeasibilityOutcome::Infeasible(y) => {
                y.len() == problem.n_rows()
                    && (0..problem.n_cols()).all(|j| !problem.column_dot(y, j).is_positive())
                    && dot(y, &problem.rhs).is_positive()
            }
        }
    }
}

fn dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dot_sparse(col: &[(usize, BigRational)], y: &[BigRational]) -> BigRational {
    let mut acc = BigRational::zero();
    for (i, v) in col {
        if v.is_one() {
            acc += &y[*i];
        } else {
            acc += &y[*i] * v;
        }
    }
    acc
}

/// Decides feasibility of `A x = b, x ≥ 0`, returning a point or a Farkas
/// certificate. Deterministic for a fixed problem.
pub fn solve_feasibility(problem: &FeasibilityProblem) -> FeasibilityOutcome {
    let mut simplex = Simplex::new(problem);
    let outcome = match simplex.phase_one() {
        Ok(()) => FeasibilityOutcome::Feasible(simplex.structural_solution()),
        Err(y) => FeasibilityOutcome::Infeasible(y),
    };
    debug_assert!(outcome.verify(problem), "simplex produced an invalid certificate");
    outcome
}

/// Optimizes `objective · x` over `{x ≥ 0 : A x = b}`.
pub fn optimize(problem: &FeasibilityProblem, objective: &[BigRational], sense: Sense) -> Result<LpOutcome> {
    if objective.len() != problem.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "objective has {} entries for {} columns",
            objective.len(),
            problem.n_cols()
        )));
    }
    let mut simplex = Simplex::new(problem);
    if let Err(y) = simplex.phase_one() {
        return Ok(LpOutcome::Infeasible(y));
    }
    let cost: Vec<BigRational> = match sense {
        Sense::Minimize => objective.to_vec(),
        Sense::Maximize => objective.iter().map(|c| -c).collect(),
    };
    if !simplex.phase_two(&cost) {
        return Ok(LpOutcome::Unbounded);
    }
    let x = simplex.structural_solution();
    let value = dot(objective, &x);
    Ok(LpOutcome::Optimal { x, value })
}

/// The lexicographically smallest point of `{x ≥ 0 : A x = b}` (a vertex), or
/// `None` when the set is empty.
pub fn lexmin_solution(problem: &FeasibilityProblem) -> Option<Vec<BigRational>> {
    let n = problem.n_cols();
    let mut x = match solve_feasibility(problem) {
        FeasibilityOutcome::Feasible(x) => x,
        FeasibilityOutcome::Infeasible(_) => return None,
    };
    let mut result = vec![BigRational::zero(); n];
    let mut rhs = problem.rhs.clone();
    let mut active: Vec<usize> = (0..n).collect();
    for j in 0..n {
        // `x` is feasible for the columns still active (first entry is `j`).
        let pos = active.iter().position(|&c| c == j).expect("column still active");
        debug_assert_eq!(pos, 0);
        if x[j].is_zero() {
            active.remove(pos);
            continue;
        }
        let sub = FeasibilityProblem {
            n_rows: problem.n_rows,
            columns: active.iter().map(|&c| problem.columns[c].clone()).collect(),
            rhs: rhs.clone(),
        };
        let mut objective = vec![BigRational::zero(); active.len()];
        objective[pos] = BigRational::one();
        match optimize(&sub, &objective, Sense::Minimize) {
            Ok(LpOutcome::Optimal { x: sub_x, value }) => {
                for (k, &c) in active.iter().enumerate() {
                    x[c] = sub_x[k].clone();
                }
                if !value.is_zero() {
                    for (i, v) in &problem.columns[j] {
                        rhs[*i] -= v * &value;
                    }
                    result[j] = value;
                }
            }
            _ => unreachable!("a feasible bounded-below subproblem has an optimum"),
        }
        active.remove(pos);
    }
    Some(result)
}

/// Dense revised simplex state. Rows are sign-normalized so that `b ≥ 0`;
/// variables `0..n` are structural, `n..n+m` artificial.
struct Simplex<'a> {
    problem: &'a FeasibilityProblem,
    sign: Vec<bool>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<Vec<BigRational>>,
    xb: Vec<BigRational>,
}

impl<'a> Simplex<'a> {
    fn new(problem: &'a FeasibilityProblem) -> Simplex<'a> {
        let m = problem.n_rows;
        let n = problem.n_cols();
        let sign: Vec<bool> = problem.rhs.iter().map(|b| b.is_negative()).collect();
        let xb = problem.rhs.iter().map(|b| b.abs()).collect();
        let mut binv = vec![vec![BigRational::zero(); m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = BigRational::one();
        }
        let mut is_basic = vec![false; n + m];
        for flag in &mut is_basic[n..] {
            *flag = true;
        }
        Simplex {
            problem,
            sign,
            basis: (n..n + m).collect(),
            is_basic,
            binv,
            xb,
        }
    }

    fn n(&self) -> usize {
        self.problem.n_cols()
    }

    /// Column `j` of the sign-normalized augmented matrix, as dense.
    fn column(&self, j: usize) -> Vec<BigRational> {
        let m = self.problem.n_rows;
        let mut col = vec![BigRational::zero(); m];
        if j < self.n() {
            for (i, v) in &self.problem.columns[j] {
                col[*i] = if self.sign[*i] { -v } else { v.clone() };
            }
        } else {
            col[j - self.n()] = BigRational::one();
        }
        col
    }

    /// `y · column(j)` without materializing the column.
    fn priced(&self, y: &[BigRational], j: usize) -> BigRational {
        if j < self.n() {
            let mut acc = BigRational::zero();
            for (i, v) in &self.problem.columns[j] {
                let t = if v.is_one() { y[*i].clone() } else { &y[*i] * v };
                if self.sign[*i] {
                    acc -= t;
                } else {
                    acc += t;
                }
            }
            acc
        } else {
            y[j - self.n()].clone()
        }
    }

    /// Simplex multipliers `c_B B^{-1}`.
    fn multipliers(&self, cost: &dyn Fn(usize) -> BigRational) -> Vec<BigRational> {
        let m = self.problem.n_rows;
        let mut y = vec![BigRational::zero(); m];
        for (r, &var) in self.basis.iter().enumerate() {
            let c = cost(var);
            if c.is_zero() {
                continue;
            }
            for (yi, b) in y.iter_mut().zip(&self.binv[r]) {
                if !b.is_zero() {
                    *yi += &c * b;
                }
            }
        }
        y
    }

    /// Runs simplex iterations with Bland's rule over entering candidates
    /// `0..limit`. Returns false if the problem is unbounded.
    fn iterate(&mut self, cost: &dyn Fn(usize) -> BigRational, limit: usize) -> bool {
        loop {
            let y = self.multipliers(cost);
            let entering = (0..limit).find(|&j| !self.is_basic[j] && (cost(j) - self.priced(&y, j)).is_negative());
            let Some(j) = entering else {
                return true;
            };
            let col = self.column(j);
            let d: Vec<BigRational> = self.binv.iter().map(|row| dot(row, &col)).collect();
            let mut leave: Option<(usize, BigRational)> = None;
            for (r, dr) in d.iter().enumerate() {
                if !dr.is_positive() {
                    continue;
                }
                let ratio = &self.xb[r] / dr;
                let better = match &leave {
                    None => true,
                    Some((lr, best)) => ratio < *best || (ratio == *best && self.basis[r] < self.basis[*lr]),
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
            let Some((r, _)) = leave else {
                return false;
            };
            self.pivot(r, j, &d);
        }
    }

    fn pivot(&mut self, r: usize, entering: usize, d: &[BigRational]) {
        let pivot = d[r].clone();
        for v in &mut self.binv[r] {
            *v /= &pivot;
        }
        self.xb[r] /= &pivot;
        let pivot_row = self.binv[r].clone();
        let pivot_x = self.xb[r].clone();
        for (i, di) in d.iter().enumerate() {
            if i == r || di.is_zero() {
                continue;
            }
            for (v, p) in self.binv[i].iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *v -= di * p;
                }
            }
            self.xb[i] -= di * &pivot_x;
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[entering] = true;
        self.basis[r] = entering;
    }

    /// Minimizes the sum of artificials. On infeasibility returns the Farkas
    /// certificate in the original row signs.
    fn phase_one(&mut self) -> std::result::Result<(), Vec<BigRational>> {
        let n = self.n();
        let cost = move |j: usize| {
            if j >= n {
                BigRational::one()
            } else {
                BigRational::zero()
            }
        };
        // Artificials never re-enter once they leave the basis.
        let finished = self.iterate(&cost, n);
        debug_assert!(finished, "phase one is bounded below by zero");
        let infeasibility: BigRational = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(&v, _)| v >= n)
            .map(|(_, x)| x)
            .sum();
        if infeasibility.is_positive() {
            let y = self.multipliers(&cost);
            return Err(y
                .into_iter()
                .zip(&self.sign)
                .map(|(v, &neg)| if neg { -v } else { v })
                .collect());
        }
        self.drive_out_artificials();
        Ok(())
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column can replace them; the rest sit on redundant rows.
    fn drive_out_artificials(&mut self) {
        let n = self.n();
        for r in 0..self.basis.len() {
            if self.basis[r] < n {
                continue;
            }
            let replacement = (0..n).filter(|&j| !self.is_basic[j]).find(|&j| {
                let col = self.column(j);
                !dot(&self.binv[r], &col).is_zero()
            });
            if let Some(j) = replacement {
                let col = self.column(j);
                let d: Vec<BigRational> = self.binv.iter().map(|row| dot(row, &col)).collect();
                self.pivot(r, j, &d);
            }
        }
    }

    fn phase_two(&mut self, objective: &[BigRational]) -> bool {
        let n = self.n();
        let cost = |j: usize| {
            if j < n {
                objective[j].clone()
            } else {
                BigRational::zero()
            }
        };
        self.iterate(&cost, n)
    }

    fn structural_solution(&self) -> Vec<BigRational> {
        let mut x = vec![BigRational::zero(); self.n()];
        for (&var, v) in self.basis.iter().zip(&self.xb) {
            if var < self.n() {
                x[var] = v.clone();
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use proptest::prelude::*;

    fn problem(a: &[&[i64]], b: &[BigRational]) -> FeasibilityProblem {
        FeasibilityProblem::new(
            a.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect(),
            b.to_vec(),
        )
        .unwrap()
    }

    /// Indicator table of the worked example plus the normalization row.
    fn example_system() -> FeasibilityProblem {
        problem(
            &[
                &[1, 1, 0, 1, 0, 0, 0],
                &[0, 1, 1, 0, 0, 1, 0],
                &[0, 1, 0, 0, 0, 0, 0],
                &[1, 1, 1, 1, 1, 1, 1],
            ],
            &[ratio(1, 4), int(1), ratio(1, 2), int(1)],
        )
    }

    #[test]
    fn example_system_is_infeasible() {
        let p = example_system();
        let out = solve_feasibility(&p);
        assert!(out.verify(&p));
        let FeasibilityOutcome::Infeasible(y) = out else {
            panic!("expected a Farkas certificate");
        };
        // Stakes are the first three multipliers; gain on every column is ≤ −y·b.
        let bound = -dot(&y, p.rhs());
        assert!(bound.is_negative());
        for j in 0..p.n_cols() {
            let gain: BigRational = (0..3).map(|i| &y[i] * (p.entry(i, j) - &p.rhs()[i])).sum();
            assert!(gain <= bound);
        }
    }

    #[test]
    fn trivial_feasible() {
        let p = problem(&[&[1]], &[int(1)]);
        assert_eq!(solve_feasibility(&p), FeasibilityOutcome::Feasible(vec![int(1)]));
    }

    #[test]
    fn negative_rhs_and_zero_rows() {
        let p = problem(&[&[-1, 0], &[0, 0]], &[int(-2), int(0)]);
        assert_eq!(
            solve_feasibility(&p),
            FeasibilityOutcome::Feasible(vec![int(2), int(0)])
        );
        let q = problem(&[&[0, 0]], &[int(1)]);
        let out = solve_feasibility(&q);
        assert!(!out.is_feasible() && out.verify(&q));
        let empty = FeasibilityProblem::new(vec![vec![]], vec![int(0)]).unwrap();
        assert!(solve_feasibility(&empty).is_feasible());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(FeasibilityProblem::new(vec![vec![int(1)]], vec![]).is_err());
        assert!(FeasibilityProblem::new(vec![vec![int(1)], vec![int(1), int(2)]], vec![int(0), int(0)]).is_err());
        let p = problem(&[&[1, 1]], &[int(1)]);
        assert!(optimize(&p, &[int(1)], Sense::Minimize).is_err());
    }

    #[test]
    fn optimize_extremes() {
        // x1 + x2 + x3 = 1, x1 + x2 = 1/2: minimize / maximize x1.
        let p = problem(&[&[1, 1, 1], &[1, 1, 0]], &[int(1), ratio(1, 2)]);
        let obj = [int(1), int(0), int(0)];
        match optimize(&p, &obj, Sense::Minimize).unwrap() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, int(0)),
            other => panic!("{other:?}"),
        }
        match optimize(&p, &obj, Sense::Maximize).unwrap() {
            LpOutcome::Optimal { value, x } => {
                assert_eq!(value, ratio(1, 2));
                assert_eq!(p.apply(&x), p.rhs());
            }
            other => panic!("{other:?}"),
        }
        let unbounded = problem(&[&[1, -1]], &[int(0)]);
        assert_eq!(
            optimize(&unbounded, &[int(-1), int(0)], Sense::Minimize).unwrap(),
            LpOutcome::Unbounded
        );
    }

    #[test]
    fn redundant_rows_in_phase_two() {
        // Duplicated row leaves an artificial on a redundant row.
        let p = problem(&[&[1, 1], &[1, 1], &[1, 0]], &[int(1), int(1), ratio(1, 3)]);
        match optimize(&p, &[int(0), int(1)], Sense::Maximize).unwrap() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, ratio(2, 3)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lexmin_prefers_late_columns() {
        // The worked example's correction: A x = d*, Σx = 1 over its seven columns.
        let p = example_system()
            .with_rhs(vec![ratio(3, 8), int(1), ratio(3, 8), int(1)])
            .unwrap();
        let x = lexmin_solution(&p).unwrap();
        assert_eq!(
            x,
            vec![int(0), ratio(3, 8), int(0), int(0), int(0), ratio(5, 8), int(0)]
        );
        assert!(lexmin_solution(&example_system()).is_none());
    }

    fn small_int() -> impl Strategy<Value = i64> {
        -2i64..3
    }

    proptest! {
        #[test]
        fn certificates_are_exact(
            rows in 1usize..4,
            cols in 1usize..6,
            seed in proptest::collection::vec(small_int(), 30),
            rhs in proptest::collection::vec(-3i64..4, 4),
        ) {
            let a: Vec<Vec<BigRational>> = (0..rows)
                .map(|i| (0..cols).map(|j| int(seed[i * cols + j])).collect())
                .collect();
            let b: Vec<BigRational> = rhs[..rows].iter().map(|&v| ratio(v, 2)).collect();
            let p = FeasibilityProblem::new(a, b).unwrap();
            let out = solve_feasibility(&p);
            prop_assert!(out.verify(&p));
            prop_assert_eq!(solve_feasibility(&p), out);
        }

        #[test]
        fn degenerate_instances_terminate(
            cols in proptest::collection::vec(proptest::collection::vec(0i64..2, 4), 1..12),
            weights in proptest::collection::vec(0i64..3, 12),
        ) {
            // 0/1 columns with a constructed feasible rhs: heavy degeneracy, all feasible.
            let n = cols.len();
            let mut a: Vec<Vec<BigRational>> = (0..4).map(|i| cols.iter().map(|c| int(c[i])).collect()).collect();
            a.push(vec![int(1); n]);
            let total: i64 = weights[..n].iter().sum::<i64>().max(1);
            let x: Vec<BigRational> = (0..n)
                .map(|j| if weights[..n].iter().all(|&w| w == 0) && j == 0 { int(1) } else { ratio(weights[j], total) })
                .collect();
            let tmp = FeasibilityProblem::new(a.clone(), vec![int(0); 5]).unwrap();
            let b = tmp.apply(&x);
            let p = FeasibilityProblem::new(a, b).unwrap();
            let out = solve_feasibility(&p);
            prop_assert!(out.is_feasible());
            prop_assert!(out.verify(&p));
        }
    }
}
