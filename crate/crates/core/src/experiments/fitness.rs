use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::FitnessFunction;
use crate::parallel;
use crate::space::Partitioning;

/// Truncated draws are resampled outside this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    TruncatedNormal,
    /// Uniform on `f*(k) ± √3 σ`, which has standard deviation `σ`.
    UniformInterval,
}

/// Fitness drawn independently per genome from a low-variance distribution
/// `D_k` centred on `f*(k)` for the genome's theme `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchematicFitnessSpec {
    pub f_star: Vec<f64>,
    pub noise: NoiseKind,
    /// Per-theme standard deviation as a fraction of `f*(k)`.
    pub sigma_rel: f64,
    pub floor: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFitness {
    pub fitness: FitnessFunction,
    /// Genomes whose draw fell below the floor.
    pub clamped: usize,
}

impl SchematicFitnessSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_rel.is_finite() && self.sigma_rel >= 0.0) {
            return Err(Error::Config(format!("sigma_rel must be ≥ 0, got {}", self.sigma_rel)));
        }
        if !(self.floor.is_finite() && self.floor > 0.0) {
            return Err(Error::Config(format!("floor must be > 0, got {}", self.floor)));
        }
        for (k, &v) in self.f_star.iter().enumerate() {
            if !(v.is_finite() && v > self.floor) {
                return Err(Error::Config(format!(
                    "f_star[{k}] = {v} must exceed the floor {}",
                    self.floor
                )));
            }
        }
        Ok(())
    }

    pub fn f_star_function(&self) -> Result<FitnessFunction> {
        FitnessFunction::new(self.f_star.clone())
    }

    /// The fitness of genome `g` of theme `theme`, and whether it was
    /// clamped. Each genome has its own ChaCha stream, so values can be
    /// produced lazily in any order.
    pub fn value(&self, g: usize, theme: usize) -> (f64, bool) {
        let mean = self.f_star[theme];
        let sigma = self.sigma_rel * mean;
        if sigma == 0.0 {
            return (mean, false);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(g as u64);
        let draw = match self.noise {
            NoiseKind::TruncatedNormal => loop {
                let z: f64 = rng.sample(StandardNormal);
                if z.abs() <= TRUNCATION_SIGMAS {
                    break mean + sigma * z;
                }
            },
            NoiseKind::UniformInterval => {
                let u = 2.0 * rng.random::<f64>() - 1.0;
                mean + 3f64.sqrt() * sigma * u
            }
        };
        if draw < self.floor {
            (self.floor, true)
        } else {
            (draw, false)
        }
    }

    pub fn generate<P: Partitioning + ?Sized>(&self, beta: &P) -> Result<GeneratedFitness> {
        self.validate()?;
        if self.f_star.len() != beta.theme_count() {
            return Err(Error::ShapeMismatch {
                expected: beta.theme_count(),
                found: self.f_star.len(),
            });
        }
        let draws = parallel::map_indices(beta.genome_count(), |g| self.value(g, beta.theme_of(g)));
        let clamped = draws.iter().filter(|d| d.1).count();
        Ok(GeneratedFitness {
            fitness: FitnessFunction::new(draws.into_iter().map(|d| d.0).collect())?,
            clamped,
        })
    }
}

pub fn gen_schematic_fitness<P: Partitioning + ?Sized>(
    spec: &SchematicFitnessSpec,
    beta: &P,
) -> Result<FitnessFunction> {
    Ok(spec.generate(beta)?.fitness)
}
