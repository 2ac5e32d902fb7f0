//! Exact phase-one simplex for small feasibility problems over rationals.
//!
//! Finds `w >= 0` with `eq_rows * w = eq_rhs` and `ge_rows * w >= ge_rhs`.
//! Bland's rule keeps the pivoting finite.

use num_traits::{One, Signed, Zero};

use crate::scalar::Rational;

#[derive(Clone, Debug, Default)]
pub struct Feasibility {
    num_vars: usize,
    eq: Vec<(Vec<Rational>, Rational)>,
    ge: Vec<(Vec<Rational>, Rational)>,
}

impl Feasibility {
    pub fn new(num_vars: usize) -> Self {
        Feasibility { num_vars, eq: Vec::new(), ge: Vec::new() }
    }

    pub fn equal(&mut self, row: Vec<Rational>, rhs: Rational) -> &mut Self {
        assert_eq!(row.len(), self.num_vars);
        self.eq.push((row, rhs));
        self
    }

    pub fn at_least(&mut self, row: Vec<Rational>, rhs: Rational) -> &mut Self {
        assert_eq!(row.len(), self.num_vars);
        self.ge.push((row, rhs));
        self
    }

    /// A feasible point, or `None` when the constraints are inconsistent.
    pub fn solve(&self) -> Option<Vec<Rational>> {
        let n = self.num_vars;
        let n_slack = self.ge.len();
        let m = self.eq.len() + self.ge.len();
        let n_cols = n + n_slack + m;
        let rhs_col = n_cols;

        // rows: structural | surplus | artificial | rhs
        let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
        let rows = self.eq.iter().map(|r| (r, None)).chain(self.ge.iter().enumerate().map(|(s, r)| (r, Some(s))));
        for (r, ((coeffs, rhs), surplus)) in rows.enumerate() {
            let mut row = vec![Rational::zero(); n_cols + 1];
            row[..n].clone_from_slice(coeffs);
            if let Some(s) = surplus {
                row[n + s] = -Rational::one();
            }
            row[rhs_col] = rhs.clone();
            if rhs.is_negative() {
                for x in row.iter_mut() {
                    *x = -x.clone();
                }
            }
            row[n + n_slack + r] = Rational::one();
            t.push(row);
        }
        let mut basis: Vec<usize> = (0..m).map(|r| n + n_slack + r).collect();

        // reduced costs of "minimise the sum of artificials"
        let mut cost = vec![Rational::zero(); n_cols + 1];
        for row in &t {
            for j in 0..n + n_slack {
                cost[j] = cost[j].clone() - row[j].clone();
            }
            cost[rhs_col] = cost[rhs_col].clone() - row[rhs_col].clone();
        }

        while let Some(enter) = (0..n_cols).find(|&j| cost[j].is_negative()) {
            let mut leave: Option<(usize, Rational)> = None;
            for (r, row) in t.iter().enumerate() {
                if row[enter].is_positive() {
                    let ratio = row[rhs_col].clone() / row[enter].clone();
                    let better = match &leave {
                        None => true,
                        Some((lr, best)) => ratio < *best || (ratio == *best && basis[r] < basis[*lr]),
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, _)) = leave else {
                // unbounded direction; cannot happen for a bounded-below objective
                break;
            };
            let pivot = t[pr][enter].clone();
            for x in t[pr].iter_mut() {
                *x = x.clone() / pivot.clone();
            }
            let pivot_row = t[pr].clone();
            for (r, row) in t.iter_mut().enumerate() {
                if r != pr && !row[enter].is_zero() {
                    let f = row[enter].clone();
                    for (x, p) in row.iter_mut().zip(&pivot_row) {
                        if !p.is_zero() {
                            *x = x.clone() - f.clone() * p.clone();
                        }
                    }
                }
            }
            if !cost[enter].is_zero() {
                let f = cost[enter].clone();
                for (x, p) in cost.iter_mut().zip(&pivot_row) {
                    if !p.is_zero() {
                        *x = x.clone() - f.clone() * p.clone();
                    }
                }
            }
            basis[pr] = enter;
        }

        if !cost[rhs_col].is_zero() {
            return None;
        }
        let mut x = vec![Rational::zero(); n];
        for (r, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = t[r][rhs_col].clone();
            }
        }
        Some(x)
    }
}
