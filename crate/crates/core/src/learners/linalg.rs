use crate::error::{Error, Result};

/// Solves `A x = b` for symmetric positive semi-definite `A` (row-major,
/// `n x n`) by Cholesky factorisation.
///
/// Directions whose pivot vanishes are dropped and their coefficient set to
/// zero, which gives the minimum-support solution on rank-deficient systems.
pub fn solve_spd(a: &[f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n || b.len() != n {
        return Err(Error::DimMismatch {
            expected: n * n,
            actual: a.len(),
        });
    }
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularSystem);
    }
    let tol = scale * 1e-12;
    let mut l = vec![0.0; n * n];
    let mut live = vec![true; n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= tol {
            live[j] = false;
            continue;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        if !live[i] {
            continue;
        }
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        if !live[i] {
            continue;
        }
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let x = solve_spd(&a, &[2.0, 1.0], 2).unwrap();
        assert!((4.0 * x[0] + 2.0 * x[1] - 2.0).abs() < 1e-12);
        assert!((2.0 * x[0] + 3.0 * x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_drops_direction() {
        let a = [2.0, 0.0, 0.0, 0.0];
        let x = solve_spd(&a, &[4.0, 0.0], 2).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        assert!(matches!(solve_spd(&[0.0], &[1.0], 1), Err(Error::SingularSystem)));
    }
}
