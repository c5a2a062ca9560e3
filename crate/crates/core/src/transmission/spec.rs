use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Transmission;
use crate::error::{Error, Result};
use crate::space::{extract_bits, GenomeSpace, SchemaPartitioning};

/// Parameter order of crossover and mutation. Only one order ships; for
/// mask crossover with independent per-bit mutation both orders give the
/// same transmission function.
pub const COMPOSITION: Composition = Composition::CrossoverThenMutation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    CrossoverThenMutation,
}

/// Named crossover kinds, as they appear in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    None,
    Uniform,
    OnePoint,
    Masks,
}

/// A probability distribution over crossover masks. A set mask bit takes the
/// child's bit from the second parent, a clear bit from the first.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskTable {
    entries: Vec<(usize, f64)>,
}

impl MaskTable {
    pub fn new(length: u32, entries: Vec<(usize, f64)>) -> Result<Self> {
        let genome = GenomeSpace::new(length)?;
        if entries.is_empty() {
            return Err(Error::InvalidTransmission("mask table is empty".into()));
        }
        let mut total = 0.0;
        for &(mask, prob) in &entries {
            if mask > genome.full_mask() {
                return Err(Error::InvalidTransmission(format!(
                    "mask {mask:#b} has bits beyond genome length {length}"
                )));
            }
            if !prob.is_finite() || prob < 0.0 {
                return Err(Error::InvalidTransmission(format!(
                    "mask {mask:#b} has probability {prob}"
                )));
            }
            total += prob;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTransmission(format!("mask probabilities sum to {total}")));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Crossover {
    /// No recombination: a one-parent, mutation-only transmission.
    None,
    /// Each mask bit an independent fair coin.
    Uniform,
    /// The ℓ cut masks `(1 << c) − 1` for `c in 0..ℓ`, equiprobable.
    OnePoint,
    Masks(MaskTable),
}

impl Crossover {
    pub fn kind(&self) -> CrossoverKind {
        match self {
            Crossover::None => CrossoverKind::None,
            Crossover::Uniform => CrossoverKind::Uniform,
            Crossover::OnePoint => CrossoverKind::OnePoint,
            Crossover::Masks(_) => CrossoverKind::Masks,
        }
    }
}

/// Mask-based crossover followed by independent per-bit mutation on `𝔅_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionSpec {
    genome: GenomeSpace,
    crossover: Crossover,
    mutation_rate: f64,
    masks: Vec<(usize, f64)>,
    mutation_pow: Vec<f64>,
    keep_pow: Vec<f64>,
    half_pow: Vec<f64>,
    // μ^h (1 − μ)^(ℓ − h), indexed by Hamming distance h
    mutation_factor: Vec<f64>,
}

impl TransmissionSpec {
    pub fn new(length: u32, crossover: Crossover, mutation_rate: f64) -> Result<Self> {
        let genome = GenomeSpace::new(length)?;
        if !(0.0..=0.5).contains(&mutation_rate) {
            return Err(Error::InvalidTransmission(format!(
                "mutation rate {mutation_rate} outside [0, 0.5]"
            )));
        }
        let l = length as usize;
        let masks = match &crossover {
            Crossover::None | Crossover::Uniform => Vec::new(),
            Crossover::OnePoint => (0..length).map(|c| ((1usize << c) - 1, 1.0 / length as f64)).collect(),
            Crossover::Masks(table) => table.entries().to_vec(),
        };
        let pow = |base: f64| -> Vec<f64> { (0..=l).map(|h| base.powi(h as i32)).collect() };
        let mutation_pow = pow(mutation_rate);
        let keep_pow = pow(1.0 - mutation_rate);
        let half_pow = pow(0.5);
        let mutation_factor = (0..=l).map(|h| mutation_pow[h] * keep_pow[l - h]).collect();
        Ok(Self {
            genome,
            crossover,
            mutation_rate,
            masks,
            mutation_pow,
            keep_pow,
            half_pow,
            mutation_factor,
        })
    }

    pub fn mutation_only(length: u32, mutation_rate: f64) -> Result<Self> {
        Self::new(length, Crossover::None, mutation_rate)
    }

    pub fn uniform(length: u32, mutation_rate: f64) -> Result<Self> {
        Self::new(length, Crossover::Uniform, mutation_rate)
    }

    pub fn one_point(length: u32, mutation_rate: f64) -> Result<Self> {
        Self::new(length, Crossover::OnePoint, mutation_rate)
    }

    pub fn genome_space(&self) -> GenomeSpace {
        self.genome
    }

    pub fn length(&self) -> u32 {
        self.genome.length()
    }

    pub fn crossover(&self) -> &Crossover {
        &self.crossover
    }

    pub fn mutation_rate(&self) -> f64 {
        self.mutation_rate
    }

    /// The explicit mask distribution. Uniform crossover expands to all
    /// `2^ℓ` masks.
    pub fn mask_distribution(&self) -> Vec<(usize, f64)> {
        match self.crossover {
            Crossover::None => vec![(0, 1.0)],
            Crossover::Uniform => {
                let w = self.half_pow[self.length() as usize];
                (0..self.genome.size()).map(|m| (m, w)).collect()
            }
            _ => self.masks.clone(),
        }
    }

    pub(crate) fn explicit_masks(&self) -> &[(usize, f64)] {
        &self.masks
    }

    pub(crate) fn mutation_factor(&self, hamming: u32) -> f64 {
        self.mutation_factor[hamming as usize]
    }

    /// Transmission probability by explicit enumeration of every mask, with
    /// no closed forms. Agrees with [`Transmission::prob`].
    pub fn prob_enumerated(&self, child: usize, parents: &[usize]) -> f64 {
        match self.crossover {
            Crossover::None => self.mutation_factor(popcount(child ^ parents[0])),
            _ => self
                .mask_distribution()
                .into_iter()
                .map(|(m, w)| {
                    let crossed = (parents[0] & !m) | (parents[1] & m);
                    w * self.mutation_factor(popcount(child ^ crossed))
                })
                .sum(),
        }
    }

    /// The same kind of operator acting on the theme space of `beta`: the
    /// mask distribution is pushed forward onto the defined loci and the
    /// mutation rate carries over.
    pub fn induced_on_schema(&self, beta: &SchemaPartitioning) -> Result<TransmissionSpec> {
        if beta.genome_space() != self.genome {
            return Err(Error::ShapeMismatch {
                expected: self.genome.size(),
                found: beta.genome_space().size(),
            });
        }
        let order = beta.order();
        let crossover = match &self.crossover {
            Crossover::None => Crossover::None,
            Crossover::Uniform => Crossover::Uniform,
            Crossover::OnePoint | Crossover::Masks(_) => {
                let mut pushed: BTreeMap<usize, f64> = BTreeMap::new();
                for &(m, w) in &self.masks {
                    *pushed.entry(extract_bits(m, beta.loci())).or_default() += w;
                }
                Crossover::Masks(MaskTable::new(order, pushed.into_iter().collect())?)
            }
        };
        TransmissionSpec::new(order, crossover, self.mutation_rate)
    }
}

#[inline]
pub(crate) fn popcount(x: usize) -> u32 {
    x.count_ones()
}

impl Transmission for TransmissionSpec {
    fn size(&self) -> usize {
        self.genome.size()
    }

    fn arity(&self) -> usize {
        match self.crossover {
            Crossover::None => 1,
            _ => 2,
        }
    }

    #[inline]
    fn prob(&self, child: usize, parents: &[usize]) -> f64 {
        match self.crossover {
            Crossover::None => self.mutation_factor(popcount(child ^ parents[0])),
            Crossover::Uniform => {
                // Factorizes per bit: where the parents disagree the child
                // bit is a fair coin whatever mutation does; where they
                // agree it is kept with probability 1 − μ.
                let (a, b) = (parents[0], parents[1]);
                let diff = a ^ b;
                let agree = self.genome.full_mask() & !diff;
                let flipped = popcount((child ^ a) & agree) as usize;
                let kept = popcount(agree) as usize - flipped;
                self.half_pow[popcount(diff) as usize] * self.mutation_pow[flipped] * self.keep_pow[kept]
            }
            Crossover::OnePoint | Crossover::Masks(_) => {
                let (a, b) = (parents[0], parents[1]);
                self.masks
                    .iter()
                    .map(|&(m, w)| w * self.mutation_factor(popcount(child ^ ((a & !m) | (b & m)))))
                    .sum()
            }
        }
    }

    fn child_distribution(&self, parents: &[usize]) -> Vec<f64> {
        match self.crossover {
            Crossover::Uniform => (0..self.size()).map(|x| self.prob(x, parents)).collect(),
            _ => {
                // crossover pushforward, then mutate bit by bit
                let mut out = vec![0.0; self.size()];
                match self.crossover {
                    Crossover::None => out[parents[0]] = 1.0,
                    _ => {
                        let (a, b) = (parents[0], parents[1]);
                        for &(m, w) in &self.masks {
                            out[(a & !m) | (b & m)] += w;
                        }
                    }
                }
                mutate_in_place(&mut out, self.length(), self.mutation_rate);
                out
            }
        }
    }
}

/// Applies independent per-bit flips with rate `mu` to a dense vector over
/// `𝔅_length`, one axis at a time. At `mu = 0` this is an exact no-op.
pub(crate) fn mutate_in_place(v: &mut [f64], length: u32, mu: f64) {
    if mu == 0.0 {
        return;
    }
    let keep = 1.0 - mu;
    for bit in 0..length {
        let stride = 1usize << bit;
        for base in (0..v.len()).step_by(stride << 1) {
            for i in base..base + stride {
                let (lo, hi) = (v[i], v[i + stride]);
                v[i] = keep * lo + mu * hi;
                v[i + stride] = mu * lo + keep * hi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_transmission() {
        let t = TransmissionSpec::mutation_only(3, 0.0).unwrap();
        assert_eq!(t.arity(), 1);
        for parent in 0..8 {
            for child in 0..8 {
                let want = if child == parent { 1.0 } else { 0.0 };
                assert_eq!(t.prob(child, &[parent]), want);
            }
        }
    }

    #[test]
    fn uniform_crossover_single_bit() {
        let t = TransmissionSpec::uniform(1, 0.0).unwrap();
        assert_eq!(t.prob(0, &[0, 1]), 0.5);
        assert_eq!(t.prob(1, &[0, 1]), 0.5);
        assert_eq!(t.prob_enumerated(0, &[0, 1]), 0.5);
    }

    #[test]
    fn crossing_clones_returns_the_clone() {
        let table = MaskTable::new(4, vec![(0b0101, 0.3), (0b1100, 0.7)]).unwrap();
        let specs = [
            TransmissionSpec::uniform(4, 0.0).unwrap(),
            TransmissionSpec::one_point(4, 0.0).unwrap(),
            TransmissionSpec::new(4, Crossover::Masks(table), 0.0).unwrap(),
        ];
        for t in &specs {
            for g in 0..16 {
                for child in 0..16 {
                    let want = if child == g { 1.0 } else { 0.0 };
                    assert_eq!(t.prob(child, &[g, g]), want);
                }
            }
        }
    }

    #[test]
    fn one_point_masks() {
        let t = TransmissionSpec::one_point(3, 0.0).unwrap();
        let masks: Vec<usize> = t.mask_distribution().iter().map(|m| m.0).collect();
        assert_eq!(masks, vec![0b000, 0b001, 0b011]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TransmissionSpec::uniform(4, 0.6).is_err());
        assert!(TransmissionSpec::uniform(4, -0.1).is_err());
        assert!(MaskTable::new(2, vec![(0b100, 1.0)]).is_err());
        assert!(MaskTable::new(2, vec![(0, 0.4)]).is_err());
    }

    #[test]
    fn induced_one_point_is_a_mask_table() {
        let t = TransmissionSpec::one_point(4, 0.1).unwrap();
        let beta = SchemaPartitioning::new(4, &[0, 2]).unwrap();
        let induced = t.induced_on_schema(&beta).unwrap();
        // cuts 0,1,2,3 restricted to loci {0,2}: 00, 01, 01, 11
        let mut masks = induced.mask_distribution();
        masks.sort_by_key(|m| m.0);
        assert_eq!(masks, vec![(0b00, 0.25), (0b01, 0.5), (0b11, 0.25)]);
        assert_eq!(induced.mutation_rate(), 0.1);
    }

    #[test]
    fn mutate_in_place_matches_factor_table() {
        let t = TransmissionSpec::mutation_only(4, 0.2).unwrap();
        for parent in 0..16 {
            let mut v = vec![0.0; 16];
            v[parent] = 1.0;
            mutate_in_place(&mut v, 4, 0.2);
            for (child, &w) in v.iter().enumerate() {
                assert!((w - t.prob(child, &[parent])).abs() < 1e-15);
            }
        }
    }

    fn spec_strategy() -> impl Strategy<Value = TransmissionSpec> {
        (1u32..=6, 0usize..4, 0.0f64..=0.5).prop_map(|(l, kind, mu)| match kind {
            0 => TransmissionSpec::mutation_only(l, mu).unwrap(),
            1 => TransmissionSpec::uniform(l, mu).unwrap(),
            2 => TransmissionSpec::one_point(l, mu).unwrap(),
            _ => {
                let n = 1usize << l;
                let entries = vec![(0, 0.2), (n - 1, 0.3), (n / 2, 0.5)];
                TransmissionSpec::new(l, Crossover::Masks(MaskTable::new(l, entries).unwrap()), mu).unwrap()
            }
        })
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(t in spec_strategy(), a in 0usize..64, b in 0usize..64) {
            let n = t.size();
            let parents = [a % n, b % n];
            let parents = &parents[..t.arity()];
            let total: f64 = (0..n).map(|x| t.prob(x, parents)).sum();
            prop_assert!((total - 1.0).abs() < 1e-10);
            let row = t.child_distribution(parents);
            for (x, w) in row.iter().enumerate() {
                prop_assert!((w - t.prob(x, parents)).abs() < 1e-14);
            }
        }

        #[test]
        fn closed_form_matches_enumeration(t in spec_strategy(), a in 0usize..64, b in 0usize..64, x in 0usize..64) {
            let n = t.size();
            let parents = [a % n, b % n];
            let parents = &parents[..t.arity()];
            let fast = t.prob(x % n, parents);
            let slow = t.prob_enumerated(x % n, parents);
            prop_assert!((fast - slow).abs() < 1e-14);
        }

        #[test]
        fn uniform_crossover_is_symmetric(l in 1u32..=8, mu in 0.0f64..=0.5, a in 0usize..256, b in 0usize..256, x in 0usize..256) {
            let t = TransmissionSpec::uniform(l, mu).unwrap();
            let n = t.size();
            let (a, b, x) = (a % n, b % n, x % n);
            prop_assert_eq!(t.prob(x, &[a, b]), t.prob(x, &[b, a]));
        }
    }
}
