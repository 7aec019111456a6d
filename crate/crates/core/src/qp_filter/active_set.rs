//! Primal active-set method for small strictly convex QPs with a diagonal
//! Hessian:
//!
//! ```text
//! min 1/2 x' H x + c' x   s.t.   A x <= b
//! ```
//!
//! Problem sizes here are a handful of variables and rows, so each equality
//! subproblem is a dense KKT solve.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct DiagQp<T> {
    pub hess: Vec<T>,
    pub lin: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct QpSolution<T> {
    pub x: Vec<T>,
    /// One multiplier per row; zero off the final working set.
    pub multipliers: Vec<T>,
    pub working_set: Vec<usize>,
    pub iterations: usize,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm_inf<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Gaussian elimination with partial pivoting on a dense square system,
/// followed by iterative refinement (the KKT matrices mix slack penalties of
/// order 1e6 with unit entries).
pub(crate) fn solve_dense<T: Scalar>(m: Vec<Vec<T>>, r: Vec<T>) -> Result<Vec<T>> {
    let lu = Lu::factor(m.clone())?;
    let mut x = lu.solve(&r);
    for _ in 0..3 {
        let resid: Vec<T> = (0..r.len()).map(|i| r[i] - dot(&m[i], &x)).collect();
        if norm_inf(&resid) == T::zero() {
            break;
        }
        let dx = lu.solve(&resid);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
    }
    Ok(x)
}

struct Lu<T> {
    lu: Vec<Vec<T>>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    fn factor(mut m: Vec<Vec<T>>) -> Result<Self> {
        let n = m.len();
        let scale = m.iter().map(|row| norm_inf(row)).fold(T::zero(), T::max).max(T::min_positive_value());
        let tiny = scale * T::epsilon() * T::epsilon();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
                .unwrap_or(col);
            if !(m[piv][col].abs() > tiny) {
                return Err(Error::Singular);
            }
            m.swap(col, piv);
            perm.swap(col, piv);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                m[row][col] = f;
                if f != T::zero() {
                    for k in col + 1..n {
                        let v = m[col][k];
                        m[row][k] -= f * v;
                    }
                }
            }
        }
        Ok(Self { lu: m, perm })
    }

    fn solve(&self, r: &[T]) -> Vec<T> {
        let n = r.len();
        let mut y: Vec<T> = self.perm.iter().map(|&p| r[p]).collect();
        for row in 0..n {
            for k in 0..row {
                let v = self.lu[row][k] * y[k];
                y[row] -= v;
            }
        }
        for row in (0..n).rev() {
            for k in row + 1..n {
                let v = self.lu[row][k] * y[k];
                y[row] -= v;
            }
            y[row] /= self.lu[row][row];
        }
        y
    }
}

impl<T: Scalar> DiagQp<T> {
    pub fn n_vars(&self) -> usize {
        self.hess.len()
    }

    pub fn objective(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        (0..x.len()).fold(T::zero(), |acc, i| acc + half * self.hess[i] * x[i] * x[i] + self.lin[i] * x[i])
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        (0..x.len()).map(|i| self.hess[i] * x[i] + self.lin[i]).collect()
    }

    fn row_tol(&self, i: usize, x: &[T]) -> T {
        let scale = T::one() + self.rhs[i].abs() + norm_inf(&self.rows[i]) * norm_inf(x);
        scale * T::epsilon() * T::lit(1e3)
    }

    /// Equality-constrained step on the working set: returns the step `p`
    /// and the working-set multipliers from the full KKT system
    /// `[H A'; A 0] [p; lambda] = [-g; 0]`.
    fn eqp(&self, x: &[T], work: &[usize]) -> Result<(Vec<T>, Vec<T>)> {
        let n = self.n_vars();
        let g = self.gradient(x);
        let k = work.len();
        let dim = n + k;
        let mut m = vec![vec![T::zero(); dim]; dim];
        let mut r = vec![T::zero(); dim];
        for i in 0..n {
            m[i][i] = self.hess[i];
            r[i] = -g[i];
        }
        for (a, &w) in work.iter().enumerate() {
            for i in 0..n {
                m[i][n + a] = self.rows[w][i];
                m[n + a][i] = self.rows[w][i];
            }
        }
        let sol = solve_dense(m, r)?;
        Ok((sol[..n].to_vec(), sol[n..].to_vec()))
    }

    fn independent_of(&self, cand: usize, work: &[usize]) -> bool {
        // Gram-Schmidt residual of the candidate row against the working rows.
        let mut basis: Vec<Vec<T>> = Vec::new();
        let ortho = |v: &[T], basis: &Vec<Vec<T>>| {
            let mut v = v.to_vec();
            for q in basis {
                let c = dot(&v, q);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= c * *qi;
                }
            }
            v
        };
        for &w in work {
            let v = ortho(&self.rows[w], &basis);
            let nv = dot(&v, &v).sqrt();
            if nv > T::zero() {
                basis.push(v.iter().map(|&e| e / nv).collect());
            }
        }
        let v = ortho(&self.rows[cand], &basis);
        let orig = dot(&self.rows[cand], &self.rows[cand]).sqrt();
        dot(&v, &v).sqrt() > orig * T::lit(1e-9)
    }

    /// Solves from a (numerically) feasible starting point.
    pub fn solve_from(&self, x0: Vec<T>) -> Result<QpSolution<T>> {
        let n = self.n_vars();
        let m = self.rows.len();
        debug_assert_eq!(x0.len(), n);
        let mut x = x0;
        let mut work: Vec<usize> = Vec::new();
        for i in 0..m {
            if work.len() >= n {
                break;
            }
            let slackness = self.rhs[i] - dot(&self.rows[i], &x);
            if slackness <= self.row_tol(i, &x) && self.independent_of(i, &work) {
                work.push(i);
            }
        }

        let max_iter = 50 * (n + m) + 50;
        for iter in 0..max_iter {
            let (p, lambda) = self.eqp(&x, &work)?;
            let step_tol = T::epsilon() * T::lit(1e3) * (T::one() + norm_inf(&x));
            if norm_inf(&p) <= step_tol {
                let most_negative = lambda
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l < T::zero())
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal));
                let lam_tol = T::epsilon() * T::lit(1e4) * (T::one() + norm_inf(&lambda));
                match most_negative {
                    Some((pos, &l)) if l < -lam_tol => {
                        work.remove(pos);
                    }
                    _ => {
                        let mut multipliers = vec![T::zero(); m];
                        for (&w, &l) in work.iter().zip(&lambda) {
                            multipliers[w] = l.max(T::zero());
                        }
                        return Ok(QpSolution { x, multipliers, working_set: work, iterations: iter + 1 });
                    }
                }
                continue;
            }

            let mut alpha = T::one();
            let mut blocking = None;
            for i in 0..m {
                if work.contains(&i) {
                    continue;
                }
                let ap = dot(&self.rows[i], &p);
                if ap <= T::epsilon() * norm_inf(&self.rows[i]) * norm_inf(&p) {
                    continue;
                }
                let step = ((self.rhs[i] - dot(&self.rows[i], &x)) / ap).max(T::zero());
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
            for (xi, pi) in x.iter_mut().zip(&p) {
                *xi += alpha * *pi;
            }
            if let Some(i) = blocking {
                work.push(i);
            }
        }
        Err(Error::NotConverged { iterations: max_iter })
    }

    /// Scaled KKT residual of `(x, multipliers)`: the largest of stationarity,
    /// primal infeasibility, dual infeasibility, and complementarity, each
    /// divided by the magnitude of the terms it compares.
    pub fn kkt_residual(&self, x: &[T], multipliers: &[T]) -> T {
        let n = self.n_vars();
        let g = self.gradient(x);
        let mut worst = T::zero();
        for i in 0..n {
            let at_l = self.rows.iter().zip(multipliers).fold(T::zero(), |acc, (r, &l)| acc + r[i] * l);
            let terms = (self.hess[i] * x[i]).abs()
                + self.lin[i].abs()
                + self.rows.iter().zip(multipliers).fold(T::zero(), |acc, (r, &l)| acc + (r[i] * l).abs());
            worst = worst.max((g[i] + at_l).abs() / (T::one() + terms));
        }
        for (i, row) in self.rows.iter().enumerate() {
            let ax = dot(row, x);
            let mag =
                T::one() + self.rhs[i].abs() + row.iter().zip(x).fold(T::zero(), |acc, (&r, &v)| acc + (r * v).abs());
            let slack = self.rhs[i] - ax;
            worst = worst.max((-slack).max(T::zero()) / mag);
            let l = multipliers[i];
            worst = worst.max((-l).max(T::zero()));
            worst = worst.max((l * slack).abs() / (mag * (T::one() + l.abs())));
        }
        worst
    }
}
