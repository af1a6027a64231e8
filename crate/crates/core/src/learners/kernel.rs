use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurize::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma: f64,
}

impl KernelParams {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("kernel width must be positive, got {sigma}")));
        }
        Ok(KernelParams { sigma })
    }
}

pub fn sq_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// `exp(-|x - z|^2 / sigma^2)`.
pub fn gaussian_kernel(x: &[f64], z: &[f64], params: &KernelParams) -> Result<f64> {
    if x.len() != z.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            actual: z.len(),
        });
    }
    Ok((-sq_distance(x, z) / (params.sigma * params.sigma)).exp())
}

/// Zero across patterns, the Gaussian kernel within one.
pub fn composite_kernel(a: &FeatureVector, b: &FeatureVector, params: &KernelParams) -> f64 {
    if a.pattern != b.pattern || a.dim() != b.dim() {
        return 0.0;
    }
    (-sq_distance(&a.values, &b.values) / (params.sigma * params.sigma)).exp()
}
