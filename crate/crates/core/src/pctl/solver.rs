//! Graph precomputations and linear solvers for reachability.

use alloc::vec;
use alloc::vec::Vec;

use crate::dtmc::{Dtmc, StateSet};

/// Unknowns above this count are solved iteratively.
pub const DIRECT_SOLVE_LIMIT: usize = 512;

/// States from which `rhs` cannot be reached along `lhs` states.
pub fn prob0(d: &Dtmc, lhs: &StateSet, rhs: &StateSet) -> StateSet {
    let (ptr, preds) = d.predecessors();
    let mut reach = rhs.clone();
    let mut stack: Vec<usize> = rhs.iter().collect();
    while let Some(t) = stack.pop() {
        for &s in &preds[ptr[t]..ptr[t + 1]] {
            let s = s as usize;
            if !reach.contains(s) && lhs.contains(s) {
                reach.insert(s);
                stack.push(s);
            }
        }
    }
    reach.complement()
}

/// States that reach `rhs` along `lhs` states with probability one, given
/// the probability-zero set `no`: those that cannot reach `no` while
/// passing only through `lhs \ rhs` states.
pub fn prob1(d: &Dtmc, lhs: &StateSet, rhs: &StateSet, no: &StateSet) -> StateSet {
    let (ptr, preds) = d.predecessors();
    let middle = lhs.difference(rhs);
    let mut bad = no.clone();
    let mut stack: Vec<usize> = no.iter().collect();
    while let Some(t) = stack.pop() {
        for &s in &preds[ptr[t]..ptr[t + 1]] {
            let s = s as usize;
            if !bad.contains(s) && middle.contains(s) {
                bad.insert(s);
                stack.push(s);
            }
        }
    }
    bad.complement()
}

/// `x = b + A x` over a set of unknowns, with `A` in sparse row form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearSystem {
    pub ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub b: Vec<f64>,
}

impl LinearSystem {
    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    /// Largest `|b + A x - x|` over all rows.
    pub fn residual(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|i| {
                let mut acc = self.b[i];
                for k in self.ptr[i]..self.ptr[i + 1] {
                    acc += self.vals[k] * x[self.cols[k]];
                }
                libm::fabs(acc - x[i])
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Dense Gaussian elimination with partial pivoting on `(I - A) x = b`.
pub fn solve_direct(sys: &LinearSystem) -> (Vec<f64>, SolveStats) {
    let n = sys.len();
    let mut m = vec![0.0; n * n];
    let mut x = sys.b.clone();
    for i in 0..n {
        m[i * n + i] = 1.0;
        for k in sys.ptr[i]..sys.ptr[i + 1] {
            m[i * n + sys.cols[k]] -= sys.vals[k];
        }
    }
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&a, &b| libm::fabs(m[a * n + c]).total_cmp(&libm::fabs(m[b * n + c])))
            .unwrap_or(c);
        if pivot != c {
            for j in 0..n {
                m.swap(c * n + j, pivot * n + j);
            }
            x.swap(c, pivot);
        }
        let diag = m[c * n + c];
        if diag == 0.0 {
            continue;
        }
        for r in c + 1..n {
            let f = m[r * n + c] / diag;
            if f != 0.0 {
                for j in c..n {
                    m[r * n + j] -= f * m[c * n + j];
                }
                x[r] -= f * x[c];
            }
        }
    }
    for c in (0..n).rev() {
        let mut acc = x[c];
        for j in c + 1..n {
            acc -= m[c * n + j] * x[j];
        }
        let diag = m[c * n + c];
        x[c] = if diag == 0.0 { 0.0 } else { acc / diag };
    }
    let residual = sys.residual(&x);
    (
        x,
        SolveStats {
            iterations: 1,
            residual,
        },
    )
}

/// Gauss-Seidel sweeps in descending index order, starting from zero,
/// until the largest relative change drops to `tol`.
pub fn solve_gauss_seidel(
    sys: &LinearSystem,
    tol: f64,
    max_iterations: usize,
) -> Result<(Vec<f64>, SolveStats), SolveStats> {
    let n = sys.len();
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let mut change: f64 = 0.0;
        for i in (0..n).rev() {
            let mut acc = sys.b[i];
            let mut diag = 0.0;
            for k in sys.ptr[i]..sys.ptr[i + 1] {
                let j = sys.cols[k];
                if j == i {
                    diag += sys.vals[k];
                } else {
                    acc += sys.vals[k] * x[j];
                }
            }
            let new = acc / (1.0 - diag);
            let delta = libm::fabs(new - x[i]) / libm::fabs(new).max(1.0);
            change = change.max(delta);
            x[i] = new;
        }
        iterations += 1;
        if change <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations,
                    residual: change,
                },
            ));
        }
        if iterations >= max_iterations {
            return Err(SolveStats {
                iterations,
                residual: change,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(rows: &[&[(usize, f64)]], b: &[f64]) -> LinearSystem {
        let mut sys = LinearSystem {
            ptr: vec![0],
            b: b.to_vec(),
            ..Default::default()
        };
        for r in rows {
            for &(c, v) in *r {
                sys.cols.push(c);
                sys.vals.push(v);
            }
            sys.ptr.push(sys.cols.len());
        }
        sys
    }

    #[test]
    fn direct_and_iterative_agree() {
        // x0 = 0.2 + 0.5 x1, x1 = 0.1 + 0.3 x0 + 0.2 x1
        let sys = system(&[&[(1, 0.5)], &[(0, 0.3), (1, 0.2)]], &[0.2, 0.1]);
        let (xd, sd) = solve_direct(&sys);
        let (xg, _) = solve_gauss_seidel(&sys, 1e-14, 1000).unwrap();
        assert!(sd.residual < 1e-15);
        for (a, b) in xd.iter().zip(&xg) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((xd[0] - 0.2 - 0.5 * xd[1]).abs() < 1e-15);
    }

    #[test]
    fn iteration_cap_reports_the_last_change() {
        let sys = system(&[&[(0, 0.999999)]], &[1.0]);
        let err = solve_gauss_seidel(&sys, 0.0, 3);
        // A pure self-loop is solved exactly by the diagonal division.
        assert!(err.is_ok());
        let sys = system(&[&[(1, 0.9999)], &[(0, 0.9999)]], &[1.0, 1.0]);
        let err = solve_gauss_seidel(&sys, 1e-12, 5).unwrap_err();
        assert_eq!(err.iterations, 5);
        assert!(err.residual > 1e-12);
    }
}
