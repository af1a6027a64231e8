use super::{KernelParams, TrainingSet};
use crate::error::{Error, Result};

/// Kernel-weighted mean of the targets; the plain mean when every weight
/// underflows.
pub fn predict_rbf_oneshot(set: &TrainingSet, center: &[f64], params: &KernelParams) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if center.len() != set.dim() {
        return Err(Error::DimMismatch {
            expected: set.dim(),
            actual: center.len(),
        });
    }
    let inv = 1.0 / (params.sigma * params.sigma);
    let (mut num, mut den) = (0.0, 0.0);
    for (x, &y) in set.rows().zip(set.targets()) {
        let k = (-super::sq_distance(x, center) * inv).exp();
        num += k * y;
        den += k;
    }
    if den > 0.0 && den.is_finite() {
        Ok(num / den)
    } else {
        Ok(set.targets().iter().sum::<f64>() / set.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::gaussian_kernel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_row_and_symmetry() {
        let p = KernelParams { sigma: 1.0 };
        let one = TrainingSet::from_targets(&[vec![3.0, 1.0]], &[2.5]).unwrap();
        assert_eq!(predict_rbf_oneshot(&one, &[-4.0, 9.0], &p).unwrap(), 2.5);
        let two = TrainingSet::from_targets(&[vec![-1.0], vec![1.0]], &[2.0, 6.0]).unwrap();
        assert!((predict_rbf_oneshot(&two, &[0.0], &p).unwrap() - 4.0).abs() < 1e-12);
        assert!(matches!(
            predict_rbf_oneshot(&TrainingSet::new(1), &[0.0], &p),
            Err(Error::EmptyHistory)
        ));
    }

    #[test]
    fn underflow_falls_back_to_mean() {
        let p = KernelParams { sigma: 1e-3 };
        let set = TrainingSet::from_targets(&[vec![0.0], vec![1.0]], &[1.0, 3.0]).unwrap();
        assert_eq!(predict_rbf_oneshot(&set, &[1e6], &p).unwrap(), 2.0);
    }

    #[test]
    fn matches_explicit_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let ys: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..10.0)).collect();
            let c: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let p = KernelParams { sigma: rng.gen_range(0.5..3.0) };
            let set = TrainingSet::from_targets(&rows, &ys).unwrap();
            let (mut z, mut s) = (0.0, 0.0);
            for i in 0..50 {
                let k = gaussian_kernel(&c, &rows[i], &p).unwrap();
                z += k;
                s += k * ys[i];
            }
            let got = predict_rbf_oneshot(&set, &c, &p).unwrap();
            assert!((got - s / z).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn prediction_is_convex_combination(
            rows in prop::collection::vec((-5.0f64..5.0, 0.0f64..20.0), 1..30),
            c in -8.0f64..8.0,
            sigma in 0.05f64..10.0,
        ) {
            let xs: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.0]).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let set = TrainingSet::from_targets(&xs, &ys).unwrap();
            let got = predict_rbf_oneshot(&set, &[c], &KernelParams { sigma }).unwrap();
            let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(got >= lo - 1e-9 && got <= hi + 1e-9);
        }
    }
}
