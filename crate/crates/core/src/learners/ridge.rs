use serde::{Deserialize, Serialize};

use super::{solve_spd, sq_distance, KernelParams, TrainingSet};
use crate::error::{Error, Result};

/// Affine model `w[0] + w[1..] . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub l2: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.weights[0]
            + self.weights[1..]
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }
}

/// Locally weighted ridge regression around `center`.
pub fn fit_lwlr(set: &TrainingSet, center: &[f64], params: &KernelParams, l2: f64) -> Result<RidgeModel> {
    let inv = 1.0 / (params.sigma * params.sigma);
    let w: Vec<f64> = set
        .rows()
        .map(|x| (-sq_distance(x, center) * inv).exp())
        .collect();
    fit_ridge_weighted(set, &w, center, l2)
}

/// Minimises `sum_i w_i (f(x_i) - y_i)^2 + l2 |slopes|^2`.
///
/// The design is expressed relative to `origin`, which only affects
/// conditioning; the intercept is not penalised.
pub fn fit_ridge_weighted(set: &TrainingSet, w: &[f64], origin: &[f64], l2: f64) -> Result<RidgeModel> {
    if set.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let d = set.dim();
    if origin.len() != d {
        return Err(Error::DimMismatch {
            expected: d,
            actual: origin.len(),
        });
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularSystem);
    }
    let n = d + 1;
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for ((x, &y), &wi) in set.rows().zip(set.targets()).zip(w) {
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            z[j + 1] = x[j] - origin[j];
        }
        for r in 0..n {
            let wz = wi * z[r];
            b[r] += wz * y;
            for c in r..n {
                a[r * n + c] += wz * z[c];
            }
        }
    }
    for r in 0..n {
        for c in 0..r {
            a[r * n + c] = a[c * n + r];
        }
    }
    for j in 1..n {
        a[j * n + j] += l2;
    }
    let beta = solve_spd(&a, &b, n)?;
    let mut weights = beta.clone();
    weights[0] -= (0..d).map(|j| beta[j + 1] * origin[j]).sum::<f64>();
    Ok(RidgeModel { weights, l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_rows_give_weighted_mean() {
        let rows = vec![vec![1.0, 2.0]; 4];
        let set = TrainingSet::from_targets(&rows, &[1.0, 2.0, 3.0, 6.0]).unwrap();
        let m = fit_lwlr(&set, &[1.0, 2.0], &KernelParams { sigma: 1.0 }, 0.0).unwrap();
        assert!((m.predict(&[1.0, 2.0]) - 3.0).abs() < 1e-9);
    }

    #[test]
    fn wide_kernel_recovers_line() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = (0..10).map(|i| 2.0 * i as f64 + 1.0).collect();
        let set = TrainingSet::from_targets(&rows, &ys).unwrap();
        let m = fit_lwlr(&set, &[4.0], &KernelParams { sigma: 1e7 }, 0.0).unwrap();
        assert!((m.weights[1] - 2.0).abs() < 1e-6);
        assert!((m.weights[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_weight_is_singular() {
        let set = TrainingSet::from_targets(&[vec![0.0]], &[1.0]).unwrap();
        let err = fit_lwlr(&set, &[1e9], &KernelParams { sigma: 1.0 }, 0.0);
        assert!(matches!(err, Err(Error::SingularSystem)));
    }

    /// Weighted normal equations in original coordinates, solved by LU.
    fn oracle(rows: &[Vec<f64>], ys: &[f64], w: &[f64], l2: f64) -> Vec<f64> {
        let n = rows.len();
        let d = rows[0].len();
        let x = DMatrix::from_fn(n, d + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
        let wm = DMatrix::from_diagonal(&DVector::from_column_slice(w));
        let mut a = x.transpose() * &wm * &x;
        for j in 1..=d {
            a[(j, j)] += l2;
        }
        let b = x.transpose() * &wm * DVector::from_column_slice(ys);
        a.lu().solve(&b).unwrap().iter().copied().collect()
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let ys: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..8.0)).collect();
            let c: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = KernelParams { sigma: rng.gen_range(1.0..4.0) };
            let l2 = rng.gen_range(0.0..0.1);
            let set = TrainingSet::from_targets(&rows, &ys).unwrap();
            let w: Vec<f64> = rows
                .iter()
                .map(|r| super::super::gaussian_kernel(r, &c, &p).unwrap())
                .collect();
            let m = fit_lwlr(&set, &c, &p, l2).unwrap();
            for (a, b) in m.weights.iter().zip(oracle(&rows, &ys, &w, l2)) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn far_points_do_not_move_prediction() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut ys: Vec<f64> = (0..15).map(|_| rng.gen_range(1.0..5.0)).collect();
        rows.push(vec![50.0, 50.0]);
        ys.push(3.0);
        let p = KernelParams { sigma: 1.0 };
        let c = [0.1, -0.2];
        let a = fit_lwlr(&TrainingSet::from_targets(&rows, &ys).unwrap(), &c, &p, 1e-3).unwrap();
        rows[15] = vec![-60.0, 40.0];
        ys[15] = 100.0;
        let b = fit_lwlr(&TrainingSet::from_targets(&rows, &ys).unwrap(), &c, &p, 1e-3).unwrap();
        let (pa, pb) = (a.predict(&c), b.predict(&c));
        assert!((pa - pb).abs() <= 1e-6 * pa.abs());
        let again = fit_lwlr(&TrainingSet::from_targets(&rows, &ys).unwrap(), &c, &p, 1e-3).unwrap();
        assert_eq!(again, b);
    }
}
