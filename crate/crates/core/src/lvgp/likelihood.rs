//! Profiled likelihood of the latent-variable GP and its analytic gradient.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Returned instead of the likelihood when the profiled variance collapses.
pub const DEGENERATE_PENALTY: f64 = 1e10;
pub const MAX_NUGGET: f64 = 1e-2;

/// Training inputs in model coordinates: quantitative block already scaled,
/// qualitative block as 0-based level indices.
#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub n: usize,
    pub q: usize,
    pub m: usize,
    pub x: Vec<f64>,
    pub t: Vec<usize>,
}

impl Design {
    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.q..(i + 1) * self.q]
    }

    pub fn t_row(&self, i: usize) -> &[usize] {
        &self.t[i * self.m..(i + 1) * self.m]
    }
}

/// Packing of free parameters: `log10 phi` for every quantitative variable,
/// then per qualitative variable the first-axis coordinate of level 2
/// followed by both coordinates of levels 3..l. Level 1 is pinned at the
/// origin and level 2 to the non-negative first axis.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub q: usize,
    pub levels: Vec<usize>,
}

impl Layout {
    pub fn n_params(&self) -> usize {
        self.q + self.levels.iter().map(|&l| 2 * l - 3).sum::<usize>()
    }

    pub fn unpack(&self, theta: &[f64]) -> (Vec<f64>, Vec<Vec<[f64; 2]>>) {
        let phi = theta[..self.q].iter().map(|v| 10f64.powf(*v)).collect();
        let mut k = self.q;
        let latent = self
            .levels
            .iter()
            .map(|&l| {
                let mut z = vec![[0.0, 0.0]; l];
                z[1] = [theta[k], 0.0];
                k += 1;
                for zl in z.iter_mut().skip(2) {
                    *zl = [theta[k], theta[k + 1]];
                    k += 2;
                }
                z
            })
            .collect();
        (phi, latent)
    }

    pub fn pack(&self, log10_phi: &[f64], latent: &[Vec<[f64; 2]>]) -> Vec<f64> {
        let mut theta = log10_phi.to_vec();
        for z in latent {
            theta.push(z[1][0]);
            for zl in &z[2..] {
                theta.extend_from_slice(zl);
            }
        }
        theta
    }

    pub fn bounds(&self, phi_range: (f64, f64), latent_box: f64) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![phi_range.0; self.q];
        let mut hi = vec![phi_range.1; self.q];
        for &l in &self.levels {
            lo.push(0.0);
            hi.push(latent_box);
            for _ in 0..2 * (l - 2) {
                lo.push(-latent_box);
                hi.push(latent_box);
            }
        }
        (lo, hi)
    }
}

/// Squared latent distances per qualitative variable, `l x l` row-major.
fn latent_sq_dists(latent: &[Vec<[f64; 2]>]) -> Vec<Vec<f64>> {
    latent
        .iter()
        .map(|z| {
            let l = z.len();
            let mut d = vec![0.0; l * l];
            for a in 0..l {
                for b in 0..l {
                    let dx = z[a][0] - z[b][0];
                    let dy = z[a][1] - z[b][1];
                    d[a * l + b] = dx * dx + dy * dy;
                }
            }
            d
        })
        .collect()
}

pub(crate) fn correlation_matrix(
    design: &Design,
    phi: &[f64],
    latent: &[Vec<[f64; 2]>],
) -> DMatrix<f64> {
    let n = design.n;
    let dists = latent_sq_dists(latent);
    let mut r = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        let xi = design.x_row(i);
        let ti = design.t_row(i);
        for j in 0..i {
            let xj = design.x_row(j);
            let tj = design.t_row(j);
            let mut s = 0.0;
            for k in 0..design.q {
                let d = xi[k] - xj[k];
                s += phi[k] * d * d;
            }
            for (v, d) in dists.iter().enumerate() {
                let l = latent[v].len();
                s += d[ti[v] * l + tj[v]];
            }
            let c = (-s).exp();
            r[(i, j)] = c;
            r[(j, i)] = c;
        }
    }
    r
}

/// Cholesky of `R + nugget I`, escalating the nugget by 10x up to
/// [`MAX_NUGGET`].
pub(crate) fn factorize(r: &DMatrix<f64>, nugget: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut nug = nugget;
    loop {
        let mut c = r.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += nug;
        }
        if let Some(ch) = Cholesky::new(c) {
            return Ok((ch, nug));
        }
        nug *= 10.0;
        if nug > MAX_NUGGET * (1.0 + 1e-9) {
            return Err(Error::Factorization(format!(
                "correlation matrix not positive definite with nugget up to {MAX_NUGGET:e}"
            )));
        }
    }
}

pub(crate) struct Profile {
    pub nll: f64,
    pub mu: f64,
    pub sigma2: f64,
    pub nugget: f64,
    pub chol: Cholesky<f64, Dyn>,
    pub alpha: DVector<f64>,
    pub grad: Option<Vec<f64>>,
}

/// Profile out mean and variance and evaluate `n/2 ln s2 + 1/2 ln|C|`.
pub(crate) fn profile(
    design: &Design,
    y: &DVector<f64>,
    layout: &Layout,
    theta: &[f64],
    nugget: f64,
    want_grad: bool,
) -> Result<Profile> {
    let n = design.n;
    let (phi, latent) = layout.unpack(theta);
    let r = correlation_matrix(design, &phi, &latent);
    let (chol, nugget) = factorize(&r, nugget)?;

    let ones = DVector::<f64>::from_element(n, 1.0);
    let cinv_one = chol.solve(&ones);
    let cinv_y = chol.solve(y);
    let denom = ones.dot(&cinv_one);
    let mu = ones.dot(&cinv_y) / denom;
    let alpha = &cinv_y - &cinv_one * mu;
    let resid = y - &ones * mu;
    let sigma2 = resid.dot(&alpha) / n as f64;
    let ybar2 = y.dot(y) / n as f64;

    if !(sigma2 > 1e-14 * ybar2) || !sigma2.is_finite() {
        return Ok(Profile {
            nll: DEGENERATE_PENALTY,
            mu,
            sigma2: sigma2.max(0.0),
            nugget,
            chol,
            alpha,
            grad: want_grad.then(|| vec![0.0; theta.len()]),
        });
    }

    let log_det: f64 = 2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v.ln())
            .sum::<f64>();
    let nll = 0.5 * n as f64 * sigma2.ln() + 0.5 * log_det;

    let grad =
        want_grad.then(|| gradient(design, layout, &phi, &latent, &r, &chol, &alpha, sigma2));
    Ok(Profile {
        nll,
        mu,
        sigma2,
        nugget,
        chol,
        alpha,
        grad,
    })
}

/// `dL/dtheta = 1/2 sum_ij (C^-1 - a a^T / s2)_ij dC_ij/dtheta`, with `a = C^-1 (y - mu 1)`.
#[allow(clippy::too_many_arguments)]
fn gradient(
    design: &Design,
    layout: &Layout,
    phi: &[f64],
    latent: &[Vec<[f64; 2]>],
    r: &DMatrix<f64>,
    chol: &Cholesky<f64, Dyn>,
    alpha: &DVector<f64>,
    sigma2: f64,
) -> Vec<f64> {
    let n = design.n;
    let cinv = chol.inverse();
    let mut grad = vec![0.0; layout.n_params()];
    // pair weights M_v[a][b] = sum over ordered pairs with levels (a, b) of G_ij
    let mut pair_w: Vec<Vec<f64>> = layout.levels.iter().map(|&l| vec![0.0; l * l]).collect();
    let ln10 = std::f64::consts::LN_10;

    for j in 0..n {
        let xj = design.x_row(j);
        let tj = design.t_row(j);
        for i in (j + 1)..n {
            let g = (cinv[(i, j)] - alpha[i] * alpha[j] / sigma2) * r[(i, j)];
            if g == 0.0 {
                continue;
            }
            let xi = design.x_row(i);
            for k in 0..design.q {
                let d = xi[k] - xj[k];
                // both (i,j) and (j,i) contribute; the 1/2 cancels
                grad[k] -= g * phi[k] * d * d * ln10;
            }
            let ti = design.t_row(i);
            for (v, w) in pair_w.iter_mut().enumerate() {
                let l = layout.levels[v];
                w[ti[v] * l + tj[v]] += g;
                w[tj[v] * l + ti[v]] += g;
            }
        }
    }

    let mut k = layout.q;
    for (v, &l) in layout.levels.iter().enumerate() {
        let z = &latent[v];
        let w = &pair_w[v];
        let level_grad = |a: usize| -> [f64; 2] {
            let mut out = [0.0; 2];
            for b in 0..l {
                let m = w[a * l + b];
                out[0] -= 2.0 * m * (z[a][0] - z[b][0]);
                out[1] -= 2.0 * m * (z[a][1] - z[b][1]);
            }
            out
        };
        grad[k] = level_grad(1)[0];
        k += 1;
        for a in 2..l {
            let g = level_grad(a);
            grad[k] = g[0];
            grad[k + 1] = g[1];
            k += 2;
        }
    }
    grad
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        let layout = Layout {
            q: 2,
            levels: vec![3, 2],
        };
        assert_eq!(layout.n_params(), 2 + 3 + 1);
        let theta = vec![0.5, -1.0, 1.5, 0.2, -0.3, 2.5];
        let (phi, latent) = layout.unpack(&theta);
        assert!((phi[0] - 10f64.powf(0.5)).abs() < 1e-12);
        assert_eq!(latent[0], vec![[0.0, 0.0], [1.5, 0.0], [0.2, -0.3]]);
        assert_eq!(latent[1], vec![[0.0, 0.0], [2.5, 0.0]]);
        assert_eq!(layout.pack(&theta[..2], &latent), theta);
    }
}
