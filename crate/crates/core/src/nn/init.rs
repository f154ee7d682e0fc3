use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::params::ParamSet;
use crate::autodiff::Tensor;
use crate::scalar::Scalar;

/// Standard deviation of a unit normal truncated to [-2, 2].
const TRUNCATED_STD: f64 = 0.879_625_661_034_239_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Truncated normal with variance `1 / fan_in`.
    Scaled { fan_in: usize },
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamShape {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitKind,
}

impl ParamShape {
    pub fn weight(name: impl Into<String>, fan_in: usize, fan_out: usize) -> Self {
        ParamShape {
            name: name.into(),
            shape: vec![fan_in, fan_out],
            init: InitKind::Scaled { fan_in },
        }
    }

    pub fn bias(name: impl Into<String>, width: usize) -> Self {
        ParamShape {
            name: name.into(),
            shape: vec![width],
            init: InitKind::Zeros,
        }
    }
}

/// Anything that can list the parameters it expects.
pub trait ParamSpec {
    fn param_shapes(&self) -> Vec<ParamShape>;
}

fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 2.0 {
            return z / TRUNCATED_STD;
        }
    }
}

pub fn init_params_with<T: Scalar, R: Rng>(spec: &impl ParamSpec, rng: &mut R) -> ParamSet<T> {
    spec.param_shapes()
        .into_iter()
        .map(|p| {
            let numel: usize = p.shape.iter().product();
            let data = match p.init {
                InitKind::Zeros => vec![T::zero(); numel],
                InitKind::Scaled { fan_in } => {
                    let scale = 1.0 / (fan_in.max(1) as f64).sqrt();
                    (0..numel)
                        .map(|_| T::lit(truncated_normal(rng) * scale))
                        .collect()
                }
            };
            let t = Tensor::new(p.shape, data).expect("shape and data agree");
            (p.name, t)
        })
        .collect()
}

/// Deterministic initialization from a seed.
pub fn init_params<T: Scalar>(spec: &impl ParamSpec, seed: u64) -> ParamSet<T> {
    init_params_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Same structure as `spec`, every entry zero.
pub fn zero_params<T: Scalar>(spec: &impl ParamSpec) -> ParamSet<T> {
    spec.param_shapes()
        .into_iter()
        .map(|p| (p.name, Tensor::zeros(&p.shape)))
        .collect()
}
