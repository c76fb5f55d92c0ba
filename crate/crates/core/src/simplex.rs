//! Exact two-phase revised simplex over rationals.
//!
//! Solves `min c·x  s.t.  A x = b, x >= 0` with sparse columns and a dense basis
//! inverse. Pivoting follows Bland's rule in both phases, so the solver cannot
//! cycle and the optimal vertex is a deterministic function of the input.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

/// Sparse column: `(row, coefficient)` pairs.
pub type Column = Vec<(usize, Rational)>;

#[derive(Debug, Clone, Default)]
pub struct StandardForm {
    pub rows: usize,
    pub columns: Vec<Column>,
    pub cost: Vec<Rational>,
    pub rhs: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Solution {
    Optimal { x: Vec<Rational>, value: Rational },
    Infeasible,
    Unbounded,
}

impl StandardForm {
    pub fn new(rows: usize) -> Self {
        Self {
            rows,
            columns: Vec::new(),
            cost: Vec::new(),
            rhs: vec![Rational::zero(); rows],
        }
    }

    pub fn add_column(&mut self, cost: Rational, column: Column) -> usize {
        debug_assert!(column.iter().all(|(r, _)| *r < self.rows));
        self.columns.push(column);
        self.cost.push(cost);
        self.columns.len() - 1
    }

    pub fn solve(&self) -> Solution {
        Tableau::new(self).run()
    }
}

/// Scaled integer cost and sparse entries of one column.
type IntColumn = (BigInt, Vec<(usize, BigInt)>);

struct Tableau<'a> {
    lp: &'a StandardForm,
    // Structural columns after the row sign flips that make the right-hand side nonnegative.
    columns: Vec<Column>,
    // Integer copies of integral columns and costs, for gcd-free pricing.
    int_columns: Vec<Option<IntColumn>>,
    n: usize,
    m: usize,
    basis: Vec<usize>,
    binv: Vec<Vec<Rational>>,
    xb: Vec<Rational>,
}

impl<'a> Tableau<'a> {
    fn new(lp: &'a StandardForm) -> Self {
        let m = lp.rows;
        let n = lp.columns.len();
        let sign: Vec<bool> = lp.rhs.iter().map(|b| b.is_negative()).collect();
        let columns = lp
            .columns
            .iter()
            .map(|c| {
                c.iter()
                    .filter(|(_, a)| !a.is_zero())
                    .map(|(r, a)| (*r, if sign[*r] { -a } else { a.clone() }))
                    .collect()
            })
            .collect::<Vec<Column>>();
        let int_columns = columns
            .iter()
            .zip(&lp.cost)
            .map(|(c, cost)| {
                if !cost.is_integer() || c.iter().any(|(_, a)| !a.is_integer()) {
                    return None;
                }
                Some((cost.to_integer(), c.iter().map(|(r, a)| (*r, a.to_integer())).collect()))
            })
            .collect();
        let xb = lp.rhs.iter().map(|b| b.abs()).collect();
        let mut binv = vec![vec![Rational::zero(); m]; m];
        for (i, row) in binv.iter_mut().enumerate() {
            row[i] = Rational::one();
        }
        Self {
            lp,
            columns,
            int_columns,
            n,
            m,
            basis: (n..n + m).collect(),
            binv,
            xb,
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= self.n
    }

    /// Column `j` after the row sign flips.
    fn column(&self, j: usize) -> Column {
        if self.is_artificial(j) {
            return vec![(j - self.n, Rational::one())];
        }
        self.columns[j].clone()
    }

    /// Sign test `reduced cost < 0`, in integers when the column allows it.
    /// `scaled` holds the duals times the common denominator `den`.
    fn improves(&self, j: usize, y: &[Rational], scaled: &[BigInt], den: &BigInt, phase_one: bool) -> bool {
        if let Some((cost, col)) = self.int_columns.get(j).and_then(Option::as_ref) {
            let mut d = if phase_one { BigInt::zero() } else { cost * den };
            for (r, a) in col {
                if !scaled[*r].is_zero() {
                    d -= &scaled[*r] * a;
                }
            }
            return d.is_negative();
        }
        self.reduced_cost(j, y, phase_one).is_negative()
    }

    /// Reduced cost of column `j` under duals `y`.
    fn reduced_cost(&self, j: usize, y: &[Rational], phase_one: bool) -> Rational {
        let mut d = self.cost(j, phase_one);
        if self.is_artificial(j) {
            d -= &y[j - self.n];
            return d;
        }
        for (r, a) in &self.columns[j] {
            if !y[*r].is_zero() {
                d -= &y[*r] * a;
            }
        }
        d
    }

    fn cost(&self, j: usize, phase_one: bool) -> Rational {
        match (phase_one, self.is_artificial(j)) {
            (true, true) => Rational::one(),
            (true, false) | (false, true) => Rational::zero(),
            (false, false) => self.lp.cost[j].clone(),
        }
    }

    fn duals(&self, phase_one: bool) -> Vec<Rational> {
        let mut y = vec![Rational::zero(); self.m];
        for (p, &j) in self.basis.iter().enumerate() {
            let cb = self.cost(j, phase_one);
            if cb.is_zero() {
                continue;
            }
            for (yi, b) in y.iter_mut().zip(&self.binv[p]) {
                if !b.is_zero() {
                    *yi += &cb * b;
                }
            }
        }
        y
    }

    fn direction(&self, col: &Column) -> Vec<Rational> {
        (0..self.m)
            .map(|p| {
                col.iter()
                    .filter(|(r, _)| !self.binv[p][*r].is_zero())
                    .map(|(r, a)| &self.binv[p][*r] * a)
                    .sum()
            })
            .collect()
    }

    fn pivot(&mut self, p: usize, entering: usize, u: &[Rational]) {
        let piv = u[p].clone();
        for v in self.binv[p].iter_mut() {
            *v /= &piv;
        }
        self.xb[p] /= &piv;
        let prow = self.binv[p].clone();
        let px = self.xb[p].clone();
        for i in 0..self.m {
            if i == p || u[i].is_zero() {
                continue;
            }
            let f = &u[i];
            for (v, pv) in self.binv[i].iter_mut().zip(&prow) {
                if !pv.is_zero() {
                    *v -= f * pv;
                }
            }
            self.xb[i] -= f * &px;
        }
        self.basis[p] = entering;
    }

    /// Runs simplex iterations; returns false if unbounded.
    fn iterate(&mut self, phase_one: bool) -> bool {
        loop {
            let y = self.duals(phase_one);
            let den = y.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
            let scaled: Vec<BigInt> = y.iter().map(|v| v.numer() * (&den / v.denom())).collect();
            let mut in_basis = vec![false; self.n + self.m];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            // Bland: lowest-index improving column.
            let limit = if phase_one { self.n + self.m } else { self.n };
            let mut entering = None;
            for j in 0..limit {
                if in_basis[j] {
                    continue;
                }
                if self.improves(j, &y, &scaled, &den, phase_one) {
                    entering = Some((j, self.column(j)));
                    break;
                }
            }
            let Some((j, col)) = entering else {
                return true;
            };
            let u = self.direction(&col);
            // Ratio test; ties broken by the smallest basic variable index.
            let mut leave: Option<(usize, Rational)> = None;
            for p in 0..self.m {
                if !u[p].is_positive() {
                    continue;
                }
                let ratio = &self.xb[p] / &u[p];
                let better = match &leave {
                    None => true,
                    Some((q, best)) => {
                        ratio < *best || (ratio == *best && self.basis[p] < self.basis[*q])
                    }
                };
                if better {
                    leave = Some((p, ratio));
                }
            }
            let Some((p, _)) = leave else {
                return false;
            };
            self.pivot(p, j, &u);
        }
    }

    /// Pivots zero-valued artificials out of the basis where a structural column allows it.
    /// Artificials that remain sit on redundant rows and never move again.
    fn drive_out_artificials(&mut self) {
        for p in 0..self.m {
            if !self.is_artificial(self.basis[p]) {
                continue;
            }
            let candidate = (0..self.n).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let entry: Rational = self
                    .column(j)
                    .iter()
                    .map(|(r, a)| &self.binv[p][*r] * a)
                    .sum();
                !entry.is_zero()
            });
            if let Some(j) = candidate {
                let u = self.direction(&self.column(j));
                self.pivot(p, j, &u);
            }
        }
    }

    fn run(mut self) -> Solution {
        self.iterate(true);
        let infeasibility: Rational = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(&j, _)| self.is_artificial(j))
            .map(|(_, v)| v)
            .sum();
        if infeasibility.is_positive() {
            return Solution::Infeasible;
        }
        self.drive_out_artificials();
        if !self.iterate(false) {
            return Solution::Unbounded;
        }
        let mut x = vec![Rational::zero(); self.n];
        for (&j, v) in self.basis.iter().zip(&self.xb) {
            if !self.is_artificial(j) {
                x[j] = v.clone();
            }
        }
        let value = x
            .iter()
            .zip(&self.lp.cost)
            .filter(|(v, _)| !v.is_zero())
            .map(|(v, c)| v * c)
            .sum();
        Solution::Optimal { x, value }
    }
}
