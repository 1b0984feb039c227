//! Gradient noise `ς_i^k`, annealing noise `ι_i^k ~ N(0, I_d)`, and the seed
//! discipline that keeps every random stream of a run independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named random streams of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Graph = 1,
    Init = 2,
    Gradient = 3,
    Annealing = 4,
    Replicate = 5,
}

/// SplitMix64 finaliser over `(base, stream, index)`.
pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let mut z = base
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(base: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, index))
}

/// Zero-mean gradient noise with a bounded second moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GradientNoise {
    None,
    Uniform { bound: f64 },
    Gaussian { sigma: f64 },
}

impl GradientNoise {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GradientNoise::None => Ok(()),
            GradientNoise::Uniform { bound } if bound > 0.0 && bound.is_finite() => Ok(()),
            GradientNoise::Gaussian { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            other => Err(Error::config("noise.gradient", format!("invalid parameters {other:?}"))),
        }
    }

    /// Per-coordinate standard deviation.
    pub fn std_dev(&self) -> f64 {
        match *self {
            GradientNoise::None => 0.0,
            GradientNoise::Uniform { bound } => bound / 3f64.sqrt(),
            GradientNoise::Gaussian { sigma } => sigma,
        }
    }

    /// The constant `C` bounding `E‖ς_i‖^2` for a `d`-dimensional agent.
    pub fn second_moment_bound(&self, d: usize) -> f64 {
        let sd = self.std_dev();
        d as f64 * sd * sd
    }

    pub fn sample_into(&self, rng: &mut impl Rng, out: &mut [f64]) {
        match *self {
            GradientNoise::None => out.iter_mut().for_each(|v| *v = 0.0),
            GradientNoise::Uniform { bound } => out.iter_mut().for_each(|v| *v = rng.random_range(-bound..=bound)),
            GradientNoise::Gaussian { sigma } => {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                out.iter_mut().for_each(|v| *v = normal.sample(rng));
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub gradient: GradientNoise,
    /// Whether the `γ^k ι^k` annealing term is active.
    #[serde(default = "yes")]
    pub annealing: bool,
}

fn yes() -> bool {
    true
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            gradient: GradientNoise::None,
            annealing: true,
        }
    }
}

impl NoiseModel {
    pub fn off() -> Self {
        Self {
            gradient: GradientNoise::None,
            annealing: false,
        }
    }
}

/// One independent generator per (agent, noise kind).
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    model: NoiseModel,
    gradient: Vec<ChaCha8Rng>,
    annealing: Vec<ChaCha8Rng>,
}

impl NoiseStreams {
    pub fn new(model: NoiseModel, agents: usize, seed: u64) -> Self {
        Self {
            model,
            gradient: (0..agents as u64).map(|i| stream_rng(seed, Stream::Gradient, i)).collect(),
            annealing: (0..agents as u64).map(|i| stream_rng(seed, Stream::Annealing, i)).collect(),
        }
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn gradient_into(&mut self, agent: usize, out: &mut [f64]) {
        self.model.gradient.sample_into(&mut self.gradient[agent], out);
    }

    pub fn annealing_into(&mut self, agent: usize, out: &mut [f64]) {
        if self.model.annealing {
            let rng = &mut self.annealing[agent];
            out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}
