//! Dense bounded-variable primal simplex over exact rationals with Bland's
//! rule. Intended for desk-scale verification only.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

#[derive(Debug, Clone)]
pub struct Column {
    pub entries: Vec<(usize, BigRational)>,
    pub cost: BigRational,
    /// `None` means unbounded above; the lower bound is always zero.
    pub upper: Option<BigRational>,
}

/// `min c x  s.t.  A x = b,  0 <= x <= u`.
#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub rhs: Vec<BigRational>,
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<BigRational>, objective: BigRational },
    Infeasible,
    Unbounded,
}

impl Lp {
    pub fn new(rows: usize) -> Self {
        Self {
            rhs: vec![BigRational::zero(); rows],
            columns: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn add_column(&mut self, entries: Vec<(usize, BigRational)>, cost: BigRational, upper: Option<BigRational>) -> usize {
        self.columns.push(Column { entries, cost, upper });
        self.columns.len() - 1
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run()
    }
}

struct Tableau {
    t: Vec<Vec<BigRational>>,
    beta: Vec<BigRational>,
    basis: Vec<usize>,
    upper: Vec<Option<BigRational>>,
    at_upper: Vec<bool>,
    cost: Vec<BigRational>,
    n_orig: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Tableau {
    fn build(lp: &Lp) -> Self {
        let rows = lp.rows();
        let n_orig = lp.columns.len();
        let cols = n_orig + rows;
        let mut t = vec![vec![BigRational::zero(); cols]; rows];
        for (j, c) in lp.columns.iter().enumerate() {
            for (r, v) in &c.entries {
                t[*r][j] += v.clone();
            }
        }
        let mut beta = lp.rhs.clone();
        for r in 0..rows {
            if beta[r].is_negative() {
                for v in t[r].iter_mut() {
                    *v = -v.clone();
                }
                beta[r] = -beta[r].clone();
            }
            t[r][n_orig + r] = BigRational::one();
        }
        let mut upper: Vec<Option<BigRational>> = lp.columns.iter().map(|c| c.upper.clone()).collect();
        upper.extend(std::iter::repeat(None).take(rows));
        let cost = lp.columns.iter().map(|c| c.cost.clone()).collect();
        Self {
            t,
            beta,
            basis: (n_orig..cols).collect(),
            upper,
            at_upper: vec![false; cols],
            cost,
            n_orig,
        }
    }

    fn cols(&self) -> usize {
        self.upper.len()
    }

    fn reduced_costs(&self, c: &[BigRational]) -> Vec<BigRational> {
        let mut d = c.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            if c[b].is_zero() {
                continue;
            }
            for j in 0..self.cols() {
                if !self.t[r][j].is_zero() {
                    d[j] -= c[b].clone() * self.t[r][j].clone();
                }
            }
        }
        d
    }

    fn value(&self, j: usize) -> BigRational {
        if let Some(r) = self.basis.iter().position(|&b| b == j) {
            return self.beta[r].clone();
        }
        if self.at_upper[j] {
            self.upper[j].clone().expect("upper bound")
        } else {
            BigRational::zero()
        }
    }

    fn step(&mut self, d: &mut [BigRational], allowed: &[bool]) -> Step {
        let cols = self.cols();
        let mut basic = vec![false; cols];
        for &b in &self.basis {
            basic[b] = true;
        }
        // Bland: first eligible column
        let entering = (0..cols).find(|&j| {
            if basic[j] || !allowed[j] {
                return false;
            }
            if self.at_upper[j] {
                d[j].is_positive()
            } else {
                d[j].is_negative() && self.upper[j].as_ref().map_or(true, |u| u.is_positive())
            }
        });
        let Some(j) = entering else { return Step::Optimal };
        let sign = if self.at_upper[j] { -BigRational::one() } else { BigRational::one() };
        // basic r changes by -sign * t[r][j] * step
        let mut best: Option<(BigRational, Option<usize>, bool)> = self.upper[j].clone().map(|u| (u, None, false));
        for r in 0..self.t.len() {
            let a = sign.clone() * self.t[r][j].clone();
            if a.is_zero() {
                continue;
            }
            let (limit, to_upper) = if a.is_positive() {
                (self.beta[r].clone() / a, false)
            } else {
                match &self.upper[self.basis[r]] {
                    Some(u) => ((u.clone() - self.beta[r].clone()) / (-a), true),
                    None => continue,
                }
            };
            let better = match &best {
                None => true,
                Some((lim, row, _)) => {
                    limit < *lim
                        || (limit == *lim
                            && match row {
                                None => false,
                                Some(br) => self.basis[r] < self.basis[*br],
                            })
                }
            };
            if better {
                best = Some((limit, Some(r), to_upper));
            }
        }
        let Some((step, row, to_upper)) = best else { return Step::Unbounded };
        if !step.is_zero() {
            for r in 0..self.t.len() {
                let a = sign.clone() * self.t[r][j].clone();
                if !a.is_zero() {
                    self.beta[r] -= a * step.clone();
                }
            }
        }
        let entering_value = if self.at_upper[j] {
            self.upper[j].clone().unwrap() - step
        } else {
            step
        };
        match row {
            None => {
                self.at_upper[j] = !self.at_upper[j];
            }
            Some(r) => {
                let leaving = self.basis[r];
                self.pivot(r, j, d);
                self.beta[r] = entering_value;
                self.basis[r] = j;
                self.at_upper[j] = false;
                self.at_upper[leaving] = to_upper;
            }
        }
        Step::Moved
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [BigRational]) {
        let p = self.t[r][j].clone();
        if !p.is_one() {
            for v in self.t[r].iter_mut() {
                if !v.is_zero() {
                    *v = v.clone() / p.clone();
                }
            }
        }
        let pivot_row = self.t[r].clone();
        for (k, row) in self.t.iter_mut().enumerate() {
            if k == r || row[j].is_zero() {
                continue;
            }
            let factor = row[j].clone();
            for (c, v) in pivot_row.iter().enumerate() {
                if !v.is_zero() {
                    row[c] -= factor.clone() * v.clone();
                }
            }
        }
        if !d[j].is_zero() {
            let factor = d[j].clone();
            for (c, v) in pivot_row.iter().enumerate() {
                if !v.is_zero() {
                    d[c] -= factor.clone() * v.clone();
                }
            }
        }
    }

    fn run(mut self) -> LpOutcome {
        let cols = self.cols();
        // phase one: drive the artificial columns to zero
        let mut c1 = vec![BigRational::zero(); cols];
        for v in c1.iter_mut().skip(self.n_orig) {
            *v = BigRational::one();
        }
        let all = vec![true; cols];
        let mut d = self.reduced_costs(&c1);
        loop {
            match self.step(&mut d, &all) {
                Step::Optimal => break,
                Step::Unbounded => unreachable!("phase one is bounded below"),
                Step::Moved => {}
            }
        }
        let infeasibility: BigRational = (self.n_orig..cols).map(|j| self.value(j)).sum();
        if infeasibility.is_positive() {
            return LpOutcome::Infeasible;
        }
        for j in self.n_orig..cols {
            self.upper[j] = Some(BigRational::zero());
        }
        let mut c2 = self.cost.clone();
        c2.extend(std::iter::repeat(BigRational::zero()).take(cols - self.n_orig));
        let allowed: Vec<bool> = (0..cols).map(|j| j < self.n_orig).collect();
        let mut d = self.reduced_costs(&c2);
        loop {
            match self.step(&mut d, &allowed) {
                Step::Optimal => break,
                Step::Unbounded => return LpOutcome::Unbounded,
                Step::Moved => {}
            }
        }
        let x: Vec<BigRational> = (0..self.n_orig).map(|j| self.value(j)).collect();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a.clone() * b.clone()).sum();
        LpOutcome::Optimal { x, objective }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{integer, rational};

    fn objective(o: &LpOutcome) -> BigRational {
        match o {
            LpOutcome::Optimal { objective, .. } => objective.clone(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 (slacks as columns)
        let mut lp = Lp::new(3);
        lp.rhs = vec![integer(4), integer(12), integer(18)];
        lp.add_column(vec![(0, integer(1)), (2, integer(3))], integer(-3), None);
        lp.add_column(vec![(1, integer(2)), (2, integer(2))], integer(-5), None);
        for r in 0..3 {
            lp.add_column(vec![(r, integer(1))], integer(0), None);
        }
        let out = lp.solve();
        assert_eq!(objective(&out), integer(-36));
        if let LpOutcome::Optimal { x, .. } = out {
            assert_eq!((x[0].clone(), x[1].clone()), (integer(2), integer(6)));
        }
    }

    #[test]
    fn upper_bounds_and_bound_flips() {
        // min -x - y, x + y = 3/2, x <= 1, y <= 1
        let mut lp = Lp::new(1);
        lp.rhs = vec![rational(3, 2)];
        lp.add_column(vec![(0, integer(1))], integer(-1), Some(integer(1)));
        lp.add_column(vec![(0, integer(1))], integer(-2), Some(integer(1)));
        let out = lp.solve();
        assert_eq!(objective(&out), rational(-5, 2));
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(1);
        lp.rhs = vec![integer(5)];
        lp.add_column(vec![(0, integer(1))], integer(0), Some(integer(2)));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = Lp::new(1);
        lp.rhs = vec![integer(0)];
        lp.add_column(vec![(0, integer(1))], integer(-1), None);
        lp.add_column(vec![(0, integer(-1))], integer(0), None);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn negative_rhs_rows() {
        // x - y = -2, min x + y  ->  x = 0, y = 2
        let mut lp = Lp::new(1);
        lp.rhs = vec![integer(-2)];
        lp.add_column(vec![(0, integer(1))], integer(1), None);
        lp.add_column(vec![(0, integer(-1))], integer(1), None);
        assert_eq!(objective(&lp.solve()), integer(2));
    }
}
