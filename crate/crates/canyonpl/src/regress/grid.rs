//! Hyperparameter selection by 5-fold cross-validation over a fixed
//! logarithmic grid.
//!
//! Folds come from one seeded shuffle of the row indices, split into
//! five contiguous slices, so every candidate sees identical folds and
//! the winner is reproducible. Ties on mean validation RMSE prefer the
//! stronger regularizer: larger α for linear models, smaller C (then
//! smaller γ) for SVR. The winner is refit on all rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::regress::linear::{fit_elasticnet, LinearModel};
use crate::regress::svr::{fit_svr, SvrModel};

/// Candidate values for every searched hyperparameter: 10^−4 … 10^4.
pub const GRID_VALUES: [f64; 9] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4];

const FOLDS: usize = 5;

/// Validation index sets: one seeded shuffle, five contiguous slices.
fn five_folds(n: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    (0..FOLDS)
        .map(|f| indices[f * n / FOLDS..(f + 1) * n / FOLDS].to_vec())
        .collect()
}

fn gather(values: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| values[i]).collect()
}

fn rmse(pred: &[f64], truth: &[f64]) -> f64 {
    let n = truth.len() as f64;
    (pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
        .sqrt()
}

fn check_inputs(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::invalid(format!(
            "feature rows ({}) and targets ({}) differ",
            x.rows(),
            y.len()
        )));
    }
    if x.rows() < FOLDS {
        return Err(Error::invalid(format!(
            "grid search needs at least {FOLDS} samples, got {}",
            x.rows()
        )));
    }
    Ok(())
}

fn split(x: &Matrix, y: &[f64], val_idx: &[usize]) -> (Matrix, Vec<f64>, Matrix, Vec<f64>) {
    let in_val = {
        let mut mask = vec![false; x.rows()];
        for &i in val_idx {
            mask[i] = true;
        }
        mask
    };
    let train_idx: Vec<usize> = (0..x.rows()).filter(|&i| !in_val[i]).collect();
    (
        x.select_rows(&train_idx),
        gather(y, &train_idx),
        x.select_rows(val_idx),
        gather(y, val_idx),
    )
}

/// Searches α for an elastic-net model (δ fixed by the caller; δ = 1 is
/// the lasso). Returns the winning α and the model refit on all rows.
pub fn grid_search_linear(
    x: &Matrix,
    y: &[f64],
    delta: f64,
    seed: u64,
) -> Result<(f64, LinearModel)> {
    check_inputs(x, y)?;
    let folds = five_folds(x.rows(), seed);
    let mut best: Option<(f64, f64)> = None; // (mean rmse, alpha)
    for &alpha in &GRID_VALUES {
        let mut total = 0.0;
        for val_idx in &folds {
            let (xt, yt, xv, yv) = split(x, y, val_idx);
            let model = fit_elasticnet(&xt, &yt, alpha, delta)?;
            total += rmse(&model.predict(&xv)?, &yv);
        }
        let mean = total / FOLDS as f64;
        // Ascending sweep: replacing on ties hands them to the larger α.
        let better = match best {
            None => true,
            Some((best_rmse, _)) => mean <= best_rmse,
        };
        if better {
            best = Some((mean, alpha));
        }
    }
    let (_, alpha) = best.expect("grid is non-empty");
    let model = fit_elasticnet(x, y, alpha, delta)?;
    Ok((alpha, model))
}

/// Searches (C, γ) for an RBF SVR (ε fixed by the caller). Returns the
/// winning pair and the model refit on all rows.
pub fn grid_search_svr(
    x: &Matrix,
    y: &[f64],
    epsilon: f64,
    seed: u64,
) -> Result<((f64, f64), SvrModel)> {
    check_inputs(x, y)?;
    let folds = five_folds(x.rows(), seed);
    let mut best: Option<(f64, (f64, f64))> = None;
    for &c in &GRID_VALUES {
        for &gamma in &GRID_VALUES {
            let mut total = 0.0;
            for val_idx in &folds {
                let (xt, yt, xv, yv) = split(x, y, val_idx);
                let model = fit_svr(&xt, &yt, c, gamma, epsilon)?;
                total += rmse(&model.predict(&xv)?, &yv);
            }
            let mean = total / FOLDS as f64;
            // Strict improvement only: the ascending sweep then leaves
            // ties with the smallest C, then the smallest γ.
            let better = match best {
                None => true,
                Some((best_rmse, _)) => mean < best_rmse,
            };
            if better {
                best = Some((mean, (c, gamma)));
            }
        }
    }
    let (_, (c, gamma)) = best.expect("grid is non-empty");
    let model = fit_svr(x, y, c, gamma, epsilon)?;
    Ok(((c, gamma), model))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct TestRng(u64);
    impl TestRng {
        fn next(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn grid_is_nine_decades() {
        assert_eq!(GRID_VALUES.len(), 9);
        for w in GRID_VALUES.windows(2) {
            assert!((w[1] / w[0] - 10.0).abs() < 1e-12);
        }
        assert_eq!(GRID_VALUES[0], 1e-4);
        assert_eq!(GRID_VALUES[8], 1e4);
    }

    #[test]
    fn folds_partition_rows() {
        for n in [5usize, 7, 23, 100] {
            let folds = five_folds(n, 9);
            let mut seen = vec![false; n];
            for (f, fold) in folds.iter().enumerate() {
                assert_eq!(fold.len(), (f + 1) * n / 5 - f * n / 5);
                for &i in fold {
                    assert!(!seen[i], "index {i} in two folds");
                    seen[i] = true;
                }
            }
            assert!(seen.iter().all(|&s| s), "folds must cover every row");
        }
    }

    #[test]
    fn exact_linear_target_selects_weakest_penalty() {
        let mut rng = TestRng(77);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.next() * 2.0 - 1.0, rng.next() * 2.0 - 1.0])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| 3.0 * r[0] - 2.0 * r[1] + 0.5).collect();
        let (alpha, model) = grid_search_linear(&x, &y, 1.0, 3).unwrap();
        assert_eq!(alpha, GRID_VALUES[0], "noiseless target wants minimal shrinkage");
        let preds = model.predict(&x).unwrap();
        assert!(rmse(&preds, &y) < 1e-2);
    }

    #[test]
    fn pure_noise_selects_heavy_penalty() {
        let mut rng = TestRng(4242);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.next() * 2.0 - 1.0, rng.next() * 2.0 - 1.0, rng.next()])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..60).map(|_| rng.next() * 2.0 - 1.0).collect();
        let (alpha, model) = grid_search_linear(&x, &y, 1.0, 11).unwrap();
        // Every α that zeroes all weights scores the same RMSE; the tie
        // rule must hand the win to the largest of them.
        assert!(alpha >= 1e3, "noise target wants maximal shrinkage, got {alpha}");
        assert!(model.weights.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn linear_search_is_deterministic() {
        let mut rng = TestRng(99);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.next(), rng.next()])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| r[0] + 0.3 * rng.next()).collect();
        let (a1, m1) = grid_search_linear(&x, &y, 0.5, 21).unwrap();
        let (a2, m2) = grid_search_linear(&x, &y, 0.5, 21).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(m1.weights, m2.weights);
        assert_eq!(m1.intercept, m2.intercept);
    }

    #[test]
    fn svr_search_fits_smooth_curve() {
        let mut rng = TestRng(314);
        let rows: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.next() * 4.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| (r[0]).sin() * 3.0 + 10.0).collect();
        let ((c, gamma), model) = grid_search_svr(&x, &y, 0.1, 7).unwrap();
        assert!(GRID_VALUES.contains(&c) && GRID_VALUES.contains(&gamma));
        let preds = model.predict(&x).unwrap();
        assert!(
            rmse(&preds, &y) < 0.5,
            "searched SVR should track a smooth curve, rmse {}",
            rmse(&preds, &y)
        );
    }

    #[test]
    fn rejects_tiny_datasets() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let y = vec![0.0, 1.0, 2.0, 3.0];
        assert!(grid_search_linear(&x, &y, 1.0, 0).is_err());
        assert!(grid_search_svr(&x, &y, 0.5, 0).is_err());
    }
}
