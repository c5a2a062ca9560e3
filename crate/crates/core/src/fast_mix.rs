//! Variation in the Walsh basis.
//!
//! Coefficients use the unnormalized ±1 characters,
//! `p̂(i) = Σ_x (−1)^{|i ∧ x|} p(x)`, so `p̂(0) = 1` for a distribution and
//! the inverse carries the `1/N`.
//!
//! For a child `y = (a ∧ ¬m) ∨ (b ∧ m)` of independent parents `a, b ~ p`
//! and a mask `m ~ χ`, the characters split across the two parents:
//!
//! ```text
//! ĉ(i) = Σ_m χ(m) p̂(i ∧ ¬m) p̂(i ∧ m)
//! ```
//!
//! and independent per-bit mutation at rate μ multiplies `ĉ(i)` by
//! `(1 − 2μ)^{|i|}`. For uniform crossover `χ` restricted to the bits of `i`
//! is uniform over its submasks, giving `2^{−|i|} Σ_{j ⊆ i} p̂(j) p̂(i ⊕ j)`:
//! `Σ_i 2^{|i|} = 3^ℓ` products per epoch. One-point crossover has only ℓ
//! masks and costs `O(ℓ 2^ℓ)`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::parallel;
use crate::transmission::{
    mutate_in_place, naive_feasible, popcount, vary_naive, Crossover, CrossoverKind, TransmissionSpec,
};

/// Walsh coefficients of a vector over `𝔅_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalshVector {
    coeffs: Vec<f64>,
}

impl WalshVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        check_power_of_two(coeffs.len())?;
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

fn check_power_of_two(n: usize) -> Result<()> {
    if !n.is_power_of_two() {
        return Err(Error::ShapeMismatch {
            expected: n.next_power_of_two(),
            found: n,
        });
    }
    Ok(())
}

/// In-place unnormalized Walsh-Hadamard butterfly. `data.len()` must be a
/// power of two.
pub fn fwht_in_place(data: &mut [f64]) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for base in (0..n).step_by(h << 1) {
            for i in base..base + h {
                let (x, y) = (data[i], data[i + h]);
                data[i] = x + y;
                data[i + h] = x - y;
            }
        }
        h <<= 1;
    }
}

pub fn walsh_transform(p: &Distribution) -> Result<WalshVector> {
    check_power_of_two(p.len())?;
    let mut coeffs = p.weights().to_vec();
    fwht_in_place(&mut coeffs);
    Ok(WalshVector { coeffs })
}

/// Inverse transform. The result is clamped and renormalized like any other
/// operator output, so `v` must be the transform of a distribution.
pub fn walsh_inverse(v: &WalshVector) -> Result<Distribution> {
    Distribution::from_operator_output(inverse_raw(v.coeffs.clone()))
}

fn inverse_raw(mut coeffs: Vec<f64>) -> Vec<f64> {
    fwht_in_place(&mut coeffs);
    let inv = 1.0 / coeffs.len() as f64;
    coeffs.iter_mut().for_each(|c| *c *= inv);
    coeffs
}

/// The variation operator of a mask-crossover + mutation spec, computed in
/// the Walsh basis. Agrees with [`vary_naive`] to within 1e-9.
pub fn vary_fast(spec: &TransmissionSpec, p: &Distribution) -> Result<Distribution> {
    if p.len() != spec.genome_space().size() {
        return Err(Error::ShapeMismatch {
            expected: spec.genome_space().size(),
            found: p.len(),
        });
    }
    if p.is_zero() {
        return Err(Error::InvalidDistribution(
            "variation applied to the zero function".into(),
        ));
    }
    let mu = spec.mutation_rate();
    let length = spec.length();

    if let Crossover::None = spec.crossover() {
        if mu == 0.0 {
            return Ok(p.clone());
        }
        let mut out = p.weights().to_vec();
        mutate_in_place(&mut out, length, mu);
        return Distribution::from_operator_output(out);
    }

    let hat = walsh_transform(p)?.coeffs;
    let damp: Vec<f64> = (0..=length).map(|h| (1.0 - 2.0 * mu).powi(h as i32)).collect();
    let mixed = match spec.crossover() {
        Crossover::Uniform => {
            let half: Vec<f64> = (0..=length).map(|h| 0.5f64.powi(h as i32)).collect();
            parallel::map_indices(hat.len(), |i| {
                let bits = popcount(i) as usize;
                // decreasing submask walk, fixed order for reproducibility
                let mut acc = 0.0;
                let mut j = i;
                loop {
                    acc += hat[j] * hat[i ^ j];
                    if j == 0 {
                        break;
                    }
                    j = (j - 1) & i;
                }
                acc * half[bits] * damp[bits]
            })
        }
        _ => {
            let masks = spec.explicit_masks();
            parallel::map_indices(hat.len(), |i| {
                let acc: f64 = masks.iter().map(|&(m, w)| w * hat[i & !m] * hat[i & m]).sum();
                acc * damp[popcount(i) as usize]
            })
        }
    };
    Distribution::from_operator_output(inverse_raw(mixed))
}

/// Inner products per fast epoch: `3^ℓ` for uniform crossover, `masks · 2^ℓ`
/// for explicit mask sets, `ℓ · 2^ℓ` for mutation only.
pub fn fast_work(spec: &TransmissionSpec) -> u128 {
    let n = spec.genome_space().size() as u128;
    let l = spec.length();
    match spec.crossover() {
        Crossover::None => n * l as u128,
        Crossover::Uniform => 3u128.pow(l),
        _ => n * spec.explicit_masks().len() as u128,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MixPath {
    Naive,
    Fast,
}

impl MixPath {
    pub fn as_str(self) -> &'static str {
        match self {
            MixPath::Naive => "naive",
            MixPath::Fast => "fast",
        }
    }
}

/// One row of a mixing benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub length: u32,
    pub kind: CrossoverKind,
    pub mutation_rate: f64,
    pub path: MixPath,
    pub mean_seconds: f64,
    pub stddev_seconds: f64,
}

pub fn kind_name(kind: CrossoverKind) -> &'static str {
    match kind {
        CrossoverKind::None => "none",
        CrossoverKind::Uniform => "uniform",
        CrossoverKind::OnePoint => "one_point",
        CrossoverKind::Masks => "masks",
    }
}

/// Times `repetitions` fast-path epochs (and naive ones when the naive guard
/// allows) on a random population drawn from `seed`.
pub fn mixing_benchmark(spec: &TransmissionSpec, repetitions: usize, seed: u64) -> Result<Vec<BenchRow>> {
    let repetitions = repetitions.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..spec.genome_space().size())
        .map(|_| rng.random::<f64>() + 1e-3)
        .collect();
    let total: f64 = raw.iter().sum();
    let p = Distribution::new(raw.into_iter().map(|w| w / total).collect())?;

    let mut rows = Vec::new();
    let mut time = |path: MixPath, run: &dyn Fn() -> Result<Distribution>| -> Result<()> {
        let mut samples = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let start = Instant::now();
            std::hint::black_box(run()?);
            samples.push(start.elapsed().as_secs_f64());
        }
        let (mean, sd) = mean_stddev(&samples);
        rows.push(BenchRow {
            length: spec.length(),
            kind: spec.crossover().kind(),
            mutation_rate: spec.mutation_rate(),
            path,
            mean_seconds: mean,
            stddev_seconds: sd,
        });
        Ok(())
    };
    if naive_feasible(spec) {
        time(MixPath::Naive, &|| vary_naive(spec, &p))?;
    }
    time(MixPath::Fast, &|| vary_fast(spec, &p))?;
    Ok(rows)
}

fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
