use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::operators::{class_masses, MIN_CLASS_MASS};
use crate::parallel;
use crate::space::{Partitioning, SchemaPartitioning};

/// `p(g) = q(k) [(1 − η)/|⟨k⟩| + η r(g) / Σ_{⟨k⟩} r]` with `r(g)` uniform on
/// `(0, 1]`: a class-uniform population perturbed by a random within-class
/// component of weight `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSpec {
    pub theme_marginal: Distribution,
    pub eta: f64,
    pub seed: u64,
}

impl PopulationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.eta) {
            return Err(Error::Config(format!("eta must lie in [0, 1), got {}", self.eta)));
        }
        if self.theme_marginal.is_zero() {
            return Err(Error::Config("theme marginal is the zero function".into()));
        }
        Ok(())
    }
}

fn perturbation(seed: u64, g: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(g as u64);
    1.0 - rng.random::<f64>()
}

pub fn gen_population<P: Partitioning + ?Sized>(spec: &PopulationSpec, beta: &P) -> Result<Distribution> {
    spec.validate()?;
    if spec.theme_marginal.len() != beta.theme_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.theme_count(),
            found: spec.theme_marginal.len(),
        });
    }
    let n = beta.genome_count();
    let themes: Vec<usize> = parallel::map_indices(n, |g| beta.theme_of(g));
    let mut count = vec![0usize; beta.theme_count()];
    themes.iter().for_each(|&k| count[k] += 1);
    let q = spec.theme_marginal.weights();
    let weights = if spec.eta == 0.0 {
        themes.iter().map(|&k| q[k] / count[k] as f64).collect()
    } else {
        let r = parallel::map_indices(n, |g| perturbation(spec.seed, g));
        let r_sum = class_masses(beta, &r);
        themes
            .iter()
            .zip(&r)
            .map(|(&k, &rg)| q[k] * ((1.0 - spec.eta) / count[k] as f64 + spec.eta * rg / r_sum[k]))
            .collect()
    };
    Distribution::from_operator_output(weights)
}

/// Independent bits: `p(g) = Π_i π_i^{g_i} (1 − π_i)^{1 − g_i}` where `π_i`
/// is the probability that bit `i` is set.
pub fn product_population(bit_probabilities: &[f64]) -> Result<Distribution> {
    if bit_probabilities.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config("bit probabilities must lie in [0, 1]".into()));
    }
    let n = 1usize
        .checked_shl(bit_probabilities.len() as u32)
        .filter(|_| bit_probabilities.len() <= crate::space::MAX_GENOME_LENGTH as usize)
        .ok_or(Error::GenomeLength(bit_probabilities.len() as u32))?;
    let weights = parallel::map_indices(n, |g| {
        bit_probabilities
            .iter()
            .enumerate()
            .map(|(i, &pi)| if g >> i & 1 == 1 { pi } else { 1.0 - pi })
            .product()
    });
    Distribution::from_operator_output(weights)
}

/// Per theme, the probability that each free locus is set, conditioned on
/// the class. `None` for classes of mass below 1e-12.
pub fn within_class_bit_marginals(beta: &SchemaPartitioning, p: &Distribution) -> Result<Vec<Option<Vec<f64>>>> {
    if p.len() != beta.genome_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.genome_count(),
            found: p.len(),
        });
    }
    let free = beta.free_loci();
    let themes = beta.theme_count();
    let mut mass = vec![0.0; themes];
    let mut set = vec![vec![0.0; free.len()]; themes];
    for (g, &w) in p.weights().iter().enumerate() {
        let k = beta.apply(g);
        mass[k] += w;
        for (j, &locus) in free.iter().enumerate() {
            if g >> locus & 1 == 1 {
                set[k][j] += w;
            }
        }
    }
    Ok(mass
        .into_iter()
        .zip(set)
        .map(|(m, s)| (m >= MIN_CLASS_MASS).then(|| s.into_iter().map(|x| x / m).collect()))
        .collect())
}

/// Largest `|marginal − 1/2|` over all free loci of all populated classes.
pub fn max_marginal_departure(beta: &SchemaPartitioning, p: &Distribution) -> Result<f64> {
    Ok(within_class_bit_marginals(beta, p)?
        .into_iter()
        .flatten()
        .flatten()
        .map(|m| (m - 0.5).abs())
        .fold(0.0, f64::max))
}
