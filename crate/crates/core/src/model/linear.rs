use nalgebra::{DMatrix, DVector};

use super::ModelError;

fn centered(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>, f64, Vec<f64>) {
    let n = y.len() as f64;
    let means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    let xc = columns
        .iter()
        .zip(&means)
        .map(|(c, m)| c.iter().map(|v| v - m).collect())
        .collect();
    let my = y.iter().sum::<f64>() / n;
    let yc = y.iter().map(|v| v - my).collect();
    (means, xc, my, yc)
}

fn intercept_for(my: f64, means: &[f64], coefficients: &[f64]) -> f64 {
    my - means.iter().zip(coefficients).map(|(m, c)| m * c).sum::<f64>()
}

/// Ordinary least squares with intercept over column-major features.
/// Rank-deficient systems get the minimum-norm solution.
pub fn fit_least_squares(columns: &[Vec<f64>], y: &[f64]) -> (f64, Vec<f64>) {
    let (means, xc, my, yc) = centered(columns, y);
    let k = columns.len();
    if k == 0 {
        return (my, Vec::new());
    }
    let n = y.len();
    let x = DMatrix::from_fn(n, k, |i, j| xc[j][i]);
    let b = DVector::from_vec(yc);
    let svd = x.svd(true, true);
    let s_max = svd.singular_values.max();
    let eps = s_max * (n.max(k) as f64) * f64::EPSILON;
    let beta: Vec<f64> = match svd.solve(&b, eps) {
        Ok(sol) => sol.iter().copied().collect(),
        // Only fails when U/V were not computed.
        Err(_) => vec![0.0; k],
    };
    (intercept_for(my, &means, &beta), beta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    /// Stop once no coordinate moves the fit by more than `tol * |y - mean(y)|`,
    /// or, for `lambda > 0`, once the duality gap is below `tol * |y - mean(y)|^2`.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_sweeps: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub sweeps: usize,
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Gap between the primal objective and the dual objective at the scaled
/// residual, an upper bound on the distance to the optimum.
fn duality_gap(xc: &[Vec<f64>], resid: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let corr = xc.iter().map(|c| c.iter().zip(resid).map(|(x, r)| x * r).sum::<f64>().abs()).fold(0.0, f64::max);
    let scale = if corr > lambda { lambda / corr } else { 1.0 };
    let r2: f64 = resid.iter().map(|r| r * r).sum();
    let ry: f64 = {
        // y - X beta = resid, so y = resid + X beta.
        let mut fitted = vec![0.0; resid.len()];
        for (c, &b) in xc.iter().zip(beta) {
            if b != 0.0 {
                for (f, x) in fitted.iter_mut().zip(c) {
                    *f += b * x;
                }
            }
        }
        resid.iter().zip(&fitted).map(|(r, f)| r * (r + f)).sum()
    };
    let primal = 0.5 * r2 + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
    // Dual objective at theta = scale * resid: <theta, y> - |theta|^2 / 2.
    let dual = scale * ry - 0.5 * scale * scale * r2;
    primal - dual
}

/// Cyclic coordinate descent on `0.5 * |y - b0 - X b|^2 + lambda * |b|_1`
/// with an unpenalized intercept.
pub fn fit_lasso(
    columns: &[Vec<f64>],
    y: &[f64],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<LassoFit, ModelError> {
    let (means, xc, my, mut resid) = centered(columns, y);
    let k = columns.len();
    let sq: Vec<f64> = xc.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let y_norm = resid.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut beta = vec![0.0; k];
    if y_norm == 0.0 || k == 0 {
        return Ok(LassoFit { intercept: my, coefficients: beta, sweeps: 0 });
    }
    let threshold = opts.tol * y_norm;
    for sweep in 1..=opts.max_sweeps {
        let mut max_move = 0.0f64;
        for j in 0..k {
            if sq[j] == 0.0 {
                continue;
            }
            let col = &xc[j];
            let old = beta[j];
            let rho = col.iter().zip(&resid).map(|(x, r)| x * r).sum::<f64>() + sq[j] * old;
            let new = soft_threshold(rho, lambda) / sq[j];
            let delta = new - old;
            if delta != 0.0 {
                for (r, x) in resid.iter_mut().zip(col) {
                    *r -= delta * x;
                }
                beta[j] = new;
                max_move = max_move.max(delta.abs() * sq[j].sqrt());
            }
        }
        if max_move <= threshold || (lambda > 0.0 && sweep % 10 == 0 && duality_gap(&xc, &resid, &beta, lambda) <= opts.tol * y_norm * y_norm) {
            return Ok(LassoFit { intercept: intercept_for(my, &means, &beta), coefficients: beta, sweeps: sweep });
        }
    }
    Err(ModelError::NonConvergence { iterations: opts.max_sweeps })
}
