//! Linear regression and damped Gauss–Newton (Levenberg–Marquardt) fitting.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: Vec<f64>,
    /// Parameter covariance scaled by the residual variance, when the
    /// problem is over-determined and the normal matrix is invertible.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Euclidean norm of the final residual vector.
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn std_error(&self, k: usize) -> Option<f64> {
        self.covariance.as_ref().map(|c| c[k][k].max(0.0).sqrt())
    }
}

/// Ordinary least squares `y = slope·x + intercept`; `params = [slope, intercept]`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::invalid(
            "y",
            format!("length {} does not match x length {}", y.len(), x.len()),
        ));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Degenerate(format!(
            "linear fit needs at least 2 points, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let spread = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if sxx <= (f64::EPSILON * spread).powi(2) * nf {
        return Err(Error::Degenerate("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let covariance = (n > 2).then(|| {
        let s2 = rss / (nf - 2.0);
        let var_slope = s2 / sxx;
        let var_intercept = s2 * (1.0 / nf + mx * mx / sxx);
        let cov = -mx * var_slope;
        vec![vec![var_slope, cov], vec![cov, var_intercept]]
    });
    Ok(FitResult {
        params: vec![slope, intercept],
        covariance,
        residual_norm: rss.sqrt(),
        converged: true,
        iterations: 1,
    })
}

/// Analytic Jacobian: `jac(params, x) -> ∂model/∂params` at one point.
pub type JacobianFn<'a> = &'a dyn Fn(&[f64], f64) -> Vec<f64>;

#[derive(Clone)]
pub struct NllsOptions<'a> {
    pub max_iterations: usize,
    /// Stop once an accepted step changes the cost by less than this
    /// fraction.
    pub tolerance: f64,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub jacobian: Option<JacobianFn<'a>>,
}

impl Default for NllsOptions<'_> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance: 1e-10,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 10.0,
            jacobian: None,
        }
    }
}

const FD_RELATIVE_STEP: f64 = 1e-6;
const FD_ABSOLUTE_FLOOR: f64 = 1e-12;
const MAX_DAMPING: f64 = 1e16;

fn residuals<M>(model: &M, params: &[f64], x: &[f64], y: &[f64]) -> Result<DVector<f64>>
where
    M: Fn(&[f64], f64) -> f64,
{
    let mut r = DVector::zeros(x.len());
    for (i, (&xi, &yi)) in x.iter().zip(y).enumerate() {
        let m = model(params, xi);
        if !m.is_finite() {
            return Err(Error::NonFinite {
                index: i,
                params: params.to_vec(),
            });
        }
        r[i] = yi - m;
    }
    Ok(r)
}

fn jacobian<M>(
    model: &M,
    params: &[f64],
    x: &[f64],
    analytic: Option<JacobianFn>,
) -> Result<DMatrix<f64>>
where
    M: Fn(&[f64], f64) -> f64,
{
    let (m, n) = (x.len(), params.len());
    let mut j = DMatrix::zeros(m, n);
    if let Some(jac) = analytic {
        for (i, &xi) in x.iter().enumerate() {
            let row = jac(params, xi);
            for k in 0..n {
                j[(i, k)] = row[k];
            }
        }
    } else {
        let mut shifted = params.to_vec();
        for k in 0..n {
            let step = (FD_RELATIVE_STEP * params[k].abs()).max(FD_ABSOLUTE_FLOOR);
            shifted[k] = params[k] + step;
            for (i, &xi) in x.iter().enumerate() {
                j[(i, k)] = (model(&shifted, xi) - model(params, xi)) / step;
            }
            shifted[k] = params[k];
        }
    }
    if let Some(pos) = j.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: pos % m,
            params: params.to_vec(),
        });
    }
    Ok(j)
}

/// Levenberg–Marquardt with Marquardt's diagonal scaling.
///
/// Steps are only accepted when they lower the sum of squared residuals, so
/// the cost is monotone over accepted iterations.
pub fn nlls_fit<M>(
    model: M,
    x: &[f64],
    y: &[f64],
    initial_params: &[f64],
    options: &NllsOptions,
) -> Result<FitResult>
where
    M: Fn(&[f64], f64) -> f64,
{
    if x.len() != y.len() {
        return Err(Error::invalid(
            "y",
            format!("length {} does not match x length {}", y.len(), x.len()),
        ));
    }
    if x.is_empty() {
        return Err(Error::Empty("fit data"));
    }
    if initial_params.is_empty() {
        return Err(Error::Empty("initial parameters"));
    }
    let n = initial_params.len();
    let mut params = initial_params.to_vec();
    let mut r = residuals(&model, &params, x, y)?;
    let mut cost = r.norm_squared();
    let mut damping = options.initial_damping;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let j = jacobian(&model, &params, x, options.jacobian)?;
        let jtj = j.transpose() * &j;
        let jtr = j.transpose() * &r;
        let diag: Vec<f64> = (0..n).map(|k| jtj[(k, k)].max(1e-300)).collect();

        let mut accepted = false;
        while damping <= MAX_DAMPING {
            let mut a = jtj.clone();
            for k in 0..n {
                a[(k, k)] += damping * diag[k];
            }
            let step = match a.clone().cholesky() {
                Some(ch) => ch.solve(&jtr),
                None => match a.lu().solve(&jtr) {
                    Some(s) => s,
                    None => {
                        damping *= options.damping_increase;
                        continue;
                    }
                },
            };
            let trial: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p + s).collect();
            let trial_r = match residuals(&model, &trial, x, y) {
                Ok(r) => r,
                Err(_) => {
                    damping *= options.damping_increase;
                    continue;
                }
            };
            let trial_cost = trial_r.norm_squared();
            if trial_cost < cost {
                let rel = (cost - trial_cost) / cost;
                params = trial;
                r = trial_r;
                cost = trial_cost;
                damping = (damping / options.damping_decrease).max(1e-15);
                accepted = true;
                if rel < options.tolerance {
                    converged = true;
                }
                break;
            }
            damping *= options.damping_increase;
        }
        if !accepted {
            // no descent direction left at machine precision
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }

    let m = x.len();
    let covariance = if m > n {
        let j = jacobian(&model, &params, x, options.jacobian)?;
        let jtj = j.transpose() * &j;
        jtj.try_inverse().map(|inv| {
            let s2 = cost / (m - n) as f64;
            (0..n)
                .map(|a| (0..n).map(|b| inv[(a, b)] * s2).collect())
                .collect()
        })
    } else {
        None
    };

    Ok(FitResult {
        params,
        covariance,
        residual_norm: cost.sqrt(),
        converged,
        iterations,
    })
}
