//! Box-constrained quasi-Newton minimization.
//!
//! Projected L-BFGS: the two-loop direction is restricted to the free
//! variables (those not pinned at a bound by the gradient), trial points are
//! projected onto the box, and an Armijo backtracking search accepts steps.
//! Falls back to projected steepest descent when the quasi-Newton direction is
//! not a descent direction.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxBounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((v, &lo), &hi) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(lo, hi);
        }
    }

    fn pinned(&self, x: &[f64], g: &[f64], i: usize) -> bool {
        (x[i] <= self.lower[i] && g[i] > 0.0) || (x[i] >= self.upper[i] && g[i] < 0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Stop when the relative objective decrease over one iteration falls below this.
    pub rel_tol: f64,
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
            memory: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimize `f` (returning value and gradient) over `bounds`, from `x0`.
///
/// Non-finite objective values are treated as +inf and rejected by the line
/// search.
pub fn minimize_box<F>(mut f: F, x0: &[f64], bounds: &BoxBounds, opts: MinimizeOptions) -> Minimum
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut evals = 1;
    if !fx.is_finite() {
        return Minimum {
            x,
            value: f64::INFINITY,
            iterations: 0,
            evaluations: evals,
        };
    }
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut iters = 0;

    while iters < opts.max_iters {
        let free: Vec<bool> = (0..n).map(|i| !bounds.pinned(&x, &g, i)).collect();
        let pg_norm = (0..n)
            .filter(|&i| free[i])
            .map(|i| g[i].abs())
            .fold(0.0, f64::max);
        if pg_norm < opts.grad_tol {
            break;
        }

        // Two-loop recursion on the free subspace.
        let mut d: Vec<f64> = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho
                * (0..n)
                    .filter(|&i| free[i])
                    .map(|i| s[i] * d[i])
                    .sum::<f64>();
            for i in 0..n {
                if free[i] {
                    d[i] -= a * y[i];
                }
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            if gamma.is_finite() && gamma > 0.0 {
                d.iter_mut().for_each(|v| *v *= gamma);
            }
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
            let b = rho
                * (0..n)
                    .filter(|&i| free[i])
                    .map(|i| y[i] * d[i])
                    .sum::<f64>();
            for i in 0..n {
                if free[i] {
                    d[i] += (a - b) * s[i];
                }
            }
        }

        let mut steepest = false;
        if !(dot(&d, &g) < 0.0) || d.iter().any(|v| !v.is_finite()) {
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
            steepest = true;
            mem.clear();
        }
        let mut step = if mem.is_empty() {
            (1.0 / d.iter().map(|v| v.abs()).fold(0.0, f64::max)).min(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            bounds.project(&mut trial);
            let dx: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let slope = dot(&g, &dx);
            if dx.iter().all(|v| *v == 0.0) {
                break;
            }
            let (ft, gt) = f(&trial);
            evals += 1;
            if ft.is_finite() && ft <= fx + 1e-4 * slope.min(0.0) && ft <= fx {
                accepted = Some((trial, ft, gt, dx));
                break;
            }
            step *= 0.5;
        }

        let Some((xn, fn_, gn, s)) = accepted else {
            if steepest || mem.is_empty() {
                break;
            }
            mem.clear();
            continue;
        };
        iters += 1;
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() && sy > 0.0 {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - fn_;
        x = xn;
        g = gn;
        fx = fn_;
        if decrease <= opts.rel_tol * fx.abs().max(1.0) {
            break;
        }
    }
    Minimum {
        x,
        value: fx,
        iterations: iters,
        evaluations: evals,
    }
}
