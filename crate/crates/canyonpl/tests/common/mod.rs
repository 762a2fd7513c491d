//! Independent reference implementations used only by the acceptance
//! suite. Each one re-derives a quantity the library also computes, by a
//! different algorithm, so agreement is evidence rather than tautology:
//! a bisection cover oracle for segment/grid intersection, a
//! normal-equations least-squares solver, and a projected-gradient
//! solver for the support-vector-regression dual.

use canyonpl::scene::Point3;
use std::collections::HashSet;

/// Cube holding `p` under the half-open floor convention.
pub fn floor_cube(p: Point3) -> (i64, i64, i64) {
    (p.x.floor() as i64, p.y.floor() as i64, p.z.floor() as i64)
}

/// Every unit cube the open segment (a, b) crosses with positive length,
/// found by interval bisection instead of incremental stepping.
///
/// Each coordinate of the segment is linear in the parameter t, so each
/// floor index is monotone in t; when an interval's endpoints land in
/// the same cube the whole interval lies in that cube and recursion can
/// stop. Intervals still split at width 1e-13 are corner grazes below
/// any positive-measure crossing; both endpoint cubes are kept so the
/// cover errs toward inclusion.
pub fn segment_cubes_oracle(a: Point3, b: Point3) -> HashSet<(i64, i64, i64)> {
    let at = |t: f64| {
        Point3::new(
            a.x + (b.x - a.x) * t,
            a.y + (b.y - a.y) * t,
            a.z + (b.z - a.z) * t,
        )
    };
    let mut cover = HashSet::new();
    let mut stack: Vec<(f64, f64)> = (0..64)
        .map(|i| (i as f64 / 64.0, (i + 1) as f64 / 64.0))
        .collect();
    while let Some((t0, t1)) = stack.pop() {
        let c0 = floor_cube(at(t0));
        let c1 = floor_cube(at(t1));
        if c0 == c1 {
            cover.insert(c0);
        } else if t1 - t0 < 1e-13 {
            cover.insert(c0);
            cover.insert(c1);
        } else {
            let tm = 0.5 * (t0 + t1);
            stack.push((t0, tm));
            stack.push((tm, t1));
        }
    }
    cover
}

/// Least squares by normal equations: returns `[intercept, w_0, ..]`
/// solving min ‖y − b − Xw‖² via Gaussian elimination with partial
/// pivoting. Panics on a singular system; fixtures must be full rank.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n > 0 && y.len() == n, "ols_fit needs aligned rows");
    let p = x[0].len() + 1;
    // Augmented design row: [1, x_0, .., x_{p-2}].
    let row = |i: usize| -> Vec<f64> {
        let mut r = Vec::with_capacity(p);
        r.push(1.0);
        r.extend_from_slice(&x[i]);
        r
    };
    // Normal equations: (XᵀX) w = Xᵀy.
    let mut ata = vec![vec![0.0; p]; p];
    let mut aty = vec![0.0; p];
    for i in 0..n {
        let r = row(i);
        for j in 0..p {
            aty[j] += r[j] * y[i];
            for k in 0..p {
                ata[j][k] += r[j] * r[k];
            }
        }
    }
    solve_linear(ata, aty)
}

/// Solves A x = b by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let p = b.len();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        assert!(a[pivot][col].abs() > 1e-12, "singular system in oracle");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for i in col + 1..p {
            let f = a[i][col] / a[col][col];
            for k in col..p {
                a[i][k] -= f * a[col][k];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; p];
    for col in (0..p).rev() {
        let mut acc = b[col];
        for k in col + 1..p {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    x
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
    (-gamma * sq).exp()
}

pub fn rbf_kernel_matrix(rows: &[Vec<f64>], gamma: f64) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = rbf(&rows[i], &rows[j], gamma);
        }
    }
    k
}

/// SVR dual objective D(β) = −½ βᵀKβ − ε‖β‖₁ + yᵀβ.
pub fn svr_dual_objective(k: &[Vec<f64>], y: &[f64], beta: &[f64], epsilon: f64) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += beta[i] * k[i][j] * beta[j];
        }
    }
    let l1: f64 = beta.iter().map(|b| b.abs()).sum();
    let lin: f64 = beta.iter().zip(y).map(|(b, yi)| b * yi).sum();
    -0.5 * quad - epsilon * l1 + lin
}

/// Largest KKT violation m − M of the dual at β = α − α*. In β space
/// the dual gradient is y − Kβ − ε·sign(β); the sign of β picks which
/// ε subgradient is active when a coordinate moves up or down.
pub fn svr_kkt_gap(kmat: &[Vec<f64>], y: &[f64], beta: &[f64], c: f64, epsilon: f64) -> f64 {
    let n = y.len();
    let mut up = f64::NEG_INFINITY;
    let mut down = f64::INFINITY;
    for i in 0..n {
        let kb: f64 = (0..n).map(|j| kmat[i][j] * beta[j]).sum();
        let g_plus = y[i] - kb - epsilon;
        let g_minus = y[i] - kb + epsilon;
        if beta[i] < c {
            up = up.max(if beta[i] >= 0.0 { g_plus } else { g_minus });
        }
        if beta[i] > -c {
            down = down.min(if beta[i] > 0.0 { g_plus } else { g_minus });
        }
    }
    up - down
}

/// Maximizes the SVR dual with an accelerated projected-gradient method
/// on the split variables (α, α*) ∈ [0, C]^{2n} with Σα = Σα*; the
/// projection shift is found by bisection. Returns the best dual value.
pub fn svr_dual_pg(
    kmat: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epsilon: f64,
    iterations: usize,
) -> f64 {
    let n = y.len();
    // Smooth objective to minimize over a = (α, α*):
    //   f(a) = ½ βᵀKβ + ε Σ(α + α*) − yᵀβ,  β = α − α*.
    let lipschitz = 2.0 * n as f64 + 1.0;
    let step = 1.0 / lipschitz;

    let project = |alpha: &mut [f64], astar: &mut [f64]| {
        // Find λ with Σ clip(α − λ) = Σ clip(α* + λ); the balance is
        // nonincreasing in λ, so bisection converges.
        let clip = |v: f64| v.clamp(0.0, c);
        let balance = |lam: f64, alpha: &[f64], astar: &[f64]| -> f64 {
            let sa: f64 = alpha.iter().map(|&v| clip(v - lam)).sum();
            let sb: f64 = astar.iter().map(|&v| clip(v + lam)).sum();
            sa - sb
        };
        let bound = c
            + alpha
                .iter()
                .chain(astar.iter())
                .fold(0.0f64, |m, &v| m.max(v.abs()));
        let (mut lo, mut hi) = (-bound, bound);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if balance(mid, alpha, astar) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        for v in alpha.iter_mut() {
            *v = clip(*v - lam);
        }
        for v in astar.iter_mut() {
            *v = clip(*v + lam);
        }
    };

    let f_val = |alpha: &[f64], astar: &[f64]| -> f64 {
        let beta: Vec<f64> = alpha.iter().zip(astar).map(|(a, s)| a - s).collect();
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += beta[i] * kmat[i][j] * beta[j];
            }
        }
        let lin: f64 = beta.iter().zip(y).map(|(b, yi)| b * yi).sum();
        let l1: f64 = alpha.iter().chain(astar.iter()).sum();
        0.5 * quad + epsilon * l1 - lin
    };

    let mut alpha = vec![0.0; n];
    let mut astar = vec![0.0; n];
    let mut va = alpha.clone();
    let mut vs = astar.clone();
    let mut t = 1.0f64;
    let mut best = f_val(&alpha, &astar);

    for _ in 0..iterations {
        // Gradient at the extrapolated point v.
        let beta: Vec<f64> = va.iter().zip(&vs).map(|(a, s)| a - s).collect();
        let mut kb = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += kmat[i][j] * beta[j];
            }
            kb[i] = acc;
        }
        let mut na: Vec<f64> = (0..n)
            .map(|i| va[i] - step * (kb[i] + epsilon - y[i]))
            .collect();
        let mut ns: Vec<f64> = (0..n)
            .map(|i| vs[i] - step * (-kb[i] + epsilon + y[i]))
            .collect();
        project(&mut na, &mut ns);

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        for i in 0..n {
            va[i] = na[i] + momentum * (na[i] - alpha[i]);
            vs[i] = ns[i] + momentum * (ns[i] - astar[i]);
        }
        let fv = f_val(&na, &ns);
        if fv > best {
            // Monotone restart: discard momentum when the step regressed.
            va.copy_from_slice(&na);
            vs.copy_from_slice(&ns);
            t = 1.0;
        } else {
            best = fv;
            t = t_next;
        }
        alpha = na;
        astar = ns;
    }
    -best
}
