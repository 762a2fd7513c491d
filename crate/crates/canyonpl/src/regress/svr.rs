//! ε-insensitive support-vector regression with an RBF kernel.
//!
//! Solves the standard SVR dual by sequential minimal optimization over
//! the 2n stacked variables (α, α*): most-violating-pair selection,
//! two-variable closed-form updates, stop when the KKT violation
//! m(a) − M(a) drops to 1e-3. The kernel is K(x, z) = exp(−γ‖x − z‖²).
//!
//! The bias b comes from the free (strictly inside the box) variables,
//! or the violation midpoint when none are free.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const KKT_TOL: f64 = 1e-3;
const TAU: f64 = 1e-12;
const MAX_ITER: usize = 5_000_000;

/// Fitted SVR: support rows with nonzero dual coefficient β = α − α*.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SvrModel {
    /// Support vectors, one row per retained training sample.
    pub support: Vec<Vec<f64>>,
    /// β per support vector, each in [−C, C].
    pub coefs: Vec<f64>,
    pub bias: f64,
    pub gamma: f64,
    pub c: f64,
    pub epsilon: f64,
}

impl SvrModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut acc = self.bias;
        for (sv, &beta) in self.support.iter().zip(&self.coefs) {
            acc += beta * rbf(sv, row, self.gamma);
        }
        acc
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if let Some(sv) = self.support.first() {
            if sv.len() != x.cols() {
                return Err(Error::invalid(format!(
                    "model has {} features, matrix has {}",
                    sv.len(),
                    x.cols()
                )));
            }
        }
        Ok((0..x.rows()).map(|r| self.predict_row(x.row(r))).collect())
    }
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum();
    (-gamma * d2).exp()
}

/// Dense kernel matrix; n stays at desk scale.
fn kernel_matrix(x: &Matrix, gamma: f64) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in (i + 1)..n {
            let v = rbf(x.row(i), x.row(j), gamma);
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    k
}

/// Fits ε-SVR by SMO. Variables t < n carry sign +1 (α), t ≥ n sign −1
/// (α*); Q[t,u] = s_t s_u K[i,j] and the linear term is ε − s_t y_i.
pub fn fit_svr(x: &Matrix, y: &[f64], c: f64, gamma: f64, epsilon: f64) -> Result<SvrModel> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "feature rows ({}) and targets ({}) differ",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < 2 {
        return Err(Error::invalid("SVR needs at least 2 samples"));
    }
    if !(c > 0.0) || !(gamma > 0.0) {
        return Err(Error::invalid("SVR needs C > 0 and gamma > 0"));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid("SVR needs epsilon >= 0"));
    }

    let n = x.rows();
    let m2 = 2 * n;
    let k = kernel_matrix(x, gamma);
    let sign = |t: usize| -> f64 { if t < n { 1.0 } else { -1.0 } };
    let idx = |t: usize| -> usize { if t < n { t } else { t - n } };
    let q = |t: usize, u: usize| -> f64 { sign(t) * sign(u) * k[idx(t)][idx(u)] };

    let mut a = vec![0.0f64; m2];
    // G_t = Σ_u Q[t,u] a_u + (ε − s_t y_i); a = 0 keeps only the linear part.
    let mut g: Vec<f64> = (0..m2).map(|t| epsilon - sign(t) * y[idx(t)]).collect();

    let mut final_m = 0.0;
    let mut final_big_m = 0.0;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        // Most violating pair.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut big_val = f64::INFINITY;
        let mut big_idx = usize::MAX;
        for t in 0..m2 {
            let s = sign(t);
            let v = -s * g[t];
            let in_up = (s > 0.0 && a[t] < c) || (s < 0.0 && a[t] > 0.0);
            let in_low = (s > 0.0 && a[t] > 0.0) || (s < 0.0 && a[t] < c);
            if in_up && v > m_val {
                m_val = v;
                m_idx = t;
            }
            if in_low && v < big_val {
                big_val = v;
                big_idx = t;
            }
        }
        final_m = m_val;
        final_big_m = big_val;
        if m_val - big_val <= KKT_TOL {
            converged = true;
            break;
        }
        let (i, j) = (m_idx, big_idx);

        let old_ai = a[i];
        let old_aj = a[j];
        if sign(i) != sign(j) {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else {
                if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = -diff;
                }
                if a[j] > c {
                    a[j] = c;
                    a[i] = c + diff;
                }
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = sum;
                }
                if a[i] < 0.0 {
                    a[i] = 0.0;
                    a[j] = sum;
                }
            }
        }
        debug_assert!(
            (0.0..=c).contains(&a[i]) && (0.0..=c).contains(&a[j]),
            "box constraint violated: a[i]={}, a[j]={}",
            a[i],
            a[j]
        );

        let di = a[i] - old_ai;
        let dj = a[j] - old_aj;
        if di == 0.0 && dj == 0.0 {
            // Numerically stuck pair; treat as converged to avoid spinning.
            converged = true;
            break;
        }
        let (ki, kj) = (idx(i), idx(j));
        let (si, sj) = (sign(i), sign(j));
        for t in 0..m2 {
            let st = sign(t);
            let kt = idx(t);
            g[t] += st * si * k[kt][ki] * di + st * sj * k[kt][kj] * dj;
        }
    }
    if !converged {
        return Err(Error::invalid(format!(
            "SMO did not converge within {MAX_ITER} iterations (violation {})",
            final_m - final_big_m
        )));
    }

    // Bias from free variables; midpoint of the violation bracket otherwise.
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    for t in 0..m2 {
        if a[t] > 0.0 && a[t] < c {
            free_sum += -sign(t) * g[t];
            free_count += 1;
        }
    }
    let bias = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        0.5 * (final_m + final_big_m)
    };

    let mut support = Vec::new();
    let mut coefs = Vec::new();
    for i in 0..n {
        let beta = a[i] - a[i + n];
        if beta != 0.0 {
            support.push(x.row(i).to_vec());
            coefs.push(beta);
        }
    }
    Ok(SvrModel {
        support,
        coefs,
        bias,
        gamma,
        c,
        epsilon,
    })
}
