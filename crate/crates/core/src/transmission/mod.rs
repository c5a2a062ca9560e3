//! Transmission functions, the variation operator they parameterize, and
//! their behaviour under a partitioning.
//!
//! A transmission function gives the distribution of a child genome given an
//! ordered tuple of parents. [`TransmissionSpec`] covers mask-based
//! crossover composed with per-bit mutation on bitstrings;
//! [`TransmissionTable`] holds an arbitrary one as a dense table.

mod ambivalence;
mod spec;
mod table;

pub use ambivalence::{
    check_ambivalence, AmbivalenceMode, AmbivalenceOptions, AmbivalenceReport, Witness, DEFAULT_AMBIVALENCE_TOLERANCE,
    EXHAUSTIVE_WORK_LIMIT,
};
pub(crate) use spec::{mutate_in_place, popcount};
pub use spec::{Composition, Crossover, CrossoverKind, MaskTable, TransmissionSpec, COMPOSITION};
pub use table::TransmissionTable;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::operators::class_masses;
use crate::parallel;
use crate::space::Partitioning;

/// An `m`-parent transmission function over a space of `size()` points.
pub trait Transmission: Sync {
    fn size(&self) -> usize;

    fn arity(&self) -> usize;

    /// `T(child | parents)`. Callers guarantee `parents.len() == arity()`.
    fn prob(&self, child: usize, parents: &[usize]) -> f64;

    /// The whole row `T(· | parents)`.
    fn child_distribution(&self, parents: &[usize]) -> Vec<f64> {
        (0..self.size()).map(|x| self.prob(x, parents)).collect()
    }
}

/// Checked form of [`Transmission::prob`].
pub fn transmission_prob<T: Transmission + ?Sized>(t: &T, child: usize, parents: &[usize]) -> Result<f64> {
    if parents.len() != t.arity() {
        return Err(Error::ArityMismatch {
            expected: t.arity(),
            found: parents.len(),
        });
    }
    if let Some(&g) = std::iter::once(&child).chain(parents).find(|&&g| g >= t.size()) {
        return Err(Error::ShapeMismatch {
            expected: t.size(),
            found: g,
        });
    }
    Ok(t.prob(child, parents))
}

/// Upper bound on `size^(arity + 1)` for direct-summation variation: 2^30,
/// i.e. ℓ ≤ 10 for two parents and ℓ ≤ 15 for one.
pub const NAIVE_WORK_LIMIT: u128 = 1 << 30;

pub fn naive_work<T: Transmission + ?Sized>(t: &T) -> u128 {
    (t.size() as u128).saturating_pow(t.arity() as u32 + 1)
}

pub fn naive_feasible<T: Transmission + ?Sized>(t: &T) -> bool {
    naive_work(t) <= NAIVE_WORK_LIMIT
}

/// The variation operator by direct summation over parent tuples:
/// `(V p)(x) = Σ T(x | x₁…x_m) Π p(x_i)`.
///
/// Work is `O(N^(m+1))`; refused beyond [`NAIVE_WORK_LIMIT`].
pub fn vary_naive<T: Transmission + ?Sized>(t: &T, p: &Distribution) -> Result<Distribution> {
    if p.len() != t.size() {
        return Err(Error::ShapeMismatch {
            expected: t.size(),
            found: p.len(),
        });
    }
    if p.is_zero() {
        return Err(Error::InvalidDistribution(
            "variation applied to the zero function".into(),
        ));
    }
    if !naive_feasible(t) {
        return Err(Error::Infeasible {
            what: "naive variation",
            detail: format!(
                "{}^{} inner terms exceeds 2^30; use the fast path",
                t.size(),
                t.arity() + 1
            ),
        });
    }
    let support: Vec<(usize, f64)> = p
        .weights()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let out = match t.arity() {
        1 => parallel::map_indices(t.size(), |x| support.iter().map(|&(a, pa)| pa * t.prob(x, &[a])).sum()),
        2 => parallel::map_indices(t.size(), |x| {
            let mut acc = 0.0;
            for &(a, pa) in &support {
                let mut inner = 0.0;
                for &(b, pb) in &support {
                    inner += pb * t.prob(x, &[a, b]);
                }
                acc += pa * inner;
            }
            acc
        }),
        m => parallel::map_indices(t.size(), |x| {
            let s = support.len();
            let mut idx = vec![0usize; m];
            let mut parents = vec![0usize; m];
            let mut acc = 0.0;
            loop {
                let mut weight = 1.0;
                for (slot, &i) in parents.iter_mut().zip(&idx) {
                    *slot = support[i].0;
                    weight *= support[i].1;
                }
                acc += weight * t.prob(x, &parents);
                // odometer over the support
                let mut pos = m;
                loop {
                    if pos == 0 {
                        return acc;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < s {
                        break;
                    }
                    idx[pos] = 0;
                }
            }
        }),
    };
    Distribution::from_operator_output(out)
}

/// The transmission function induced on a theme space:
/// `D(k | k₁…k_m) = Σ_{x ∈ ⟨k⟩} T(x | x₁…x_m)` for parents `x_i ∈ ⟨k_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThemeTransmission {
    table: TransmissionTable,
}

impl ThemeTransmission {
    pub fn table(&self) -> &TransmissionTable {
        &self.table
    }

    pub fn theme_count(&self) -> usize {
        self.table.size()
    }

    pub fn into_table(self) -> TransmissionTable {
        self.table
    }
}

impl Transmission for ThemeTransmission {
    fn size(&self) -> usize {
        self.table.size()
    }

    fn arity(&self) -> usize {
        self.table.arity()
    }

    #[inline]
    fn prob(&self, child: usize, parents: &[usize]) -> f64 {
        self.table.prob(child, parents)
    }

    fn child_distribution(&self, parents: &[usize]) -> Vec<f64> {
        self.table.child_distribution(parents)
    }
}

/// Derives the theme transmission function using the minimum genome of each
/// class as its representative. Only meaningful when `t` is ambivalent under
/// `beta`; see [`check_ambivalence`].
pub fn theme_transmission<T, P>(t: &T, beta: &P) -> Result<ThemeTransmission>
where
    T: Transmission + ?Sized,
    P: Partitioning + ?Sized,
{
    theme_transmission_with(t, beta, |k| beta.representative(k))
}

/// As [`theme_transmission`] with caller-chosen class representatives.
pub fn theme_transmission_with<T, P, F>(t: &T, beta: &P, representative: F) -> Result<ThemeTransmission>
where
    T: Transmission + ?Sized,
    P: Partitioning + ?Sized,
    F: Fn(usize) -> usize + Sync,
{
    if t.size() != beta.genome_count() {
        return Err(Error::ShapeMismatch {
            expected: beta.genome_count(),
            found: t.size(),
        });
    }
    let themes = beta.theme_count();
    let arity = t.arity();
    let tuples = themes.checked_pow(arity as u32).ok_or_else(|| Error::Infeasible {
        what: "theme transmission",
        detail: format!("{themes}^{arity} theme tuples"),
    })?;
    let rows = parallel::map_indices(tuples, |r| {
        let mut parents = vec![0usize; arity];
        table::decode_tuple(r, themes, &mut parents);
        parents.iter_mut().for_each(|k| *k = representative(*k));
        class_masses(beta, &t.child_distribution(&parents))
    });
    Ok(ThemeTransmission {
        table: TransmissionTable::from_raw(themes, arity, rows.concat()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::project;
    use crate::space::SchemaPartitioning;
    use proptest::prelude::*;

    /// Independent oracle: sums `T` over each child class for the chosen
    /// parents by scanning the whole genome space.
    fn brute_theme_row(t: &TransmissionSpec, beta: &SchemaPartitioning, parents: &[usize]) -> Vec<f64> {
        let mut row = vec![0.0; beta.theme_count()];
        for x in 0..t.size() {
            row[beta.apply(x)] += t.prob_enumerated(x, parents);
        }
        row
    }

    #[test]
    fn identity_variation() {
        let t = TransmissionSpec::mutation_only(4, 0.0).unwrap();
        let p = Distribution::new((1..=16).map(|i| i as f64 / 136.0).collect()).unwrap();
        let v = vary_naive(&t, &p).unwrap();
        assert!(v.manhattan(&p).unwrap() < 1e-15);
    }

    #[test]
    fn uniform_crossover_of_point_mass() {
        let t = TransmissionSpec::uniform(4, 0.0).unwrap();
        let p = Distribution::point_mass(16, 0b1011);
        assert_eq!(vary_naive(&t, &p).unwrap().weights(), p.weights());
    }

    #[test]
    fn half_mutation_randomizes() {
        for l in 1..=4 {
            let n = 1usize << l;
            let p = Distribution::new((0..n).map(|i| (i + 1) as f64 * 2.0 / (n * (n + 1)) as f64).collect()).unwrap();
            for t in [
                TransmissionSpec::mutation_only(l, 0.5).unwrap(),
                TransmissionSpec::uniform(l, 0.5).unwrap(),
                TransmissionSpec::one_point(l, 0.5).unwrap(),
            ] {
                let v = vary_naive(&t, &p).unwrap();
                assert!(v.manhattan(&Distribution::uniform(n)).unwrap() < 1e-14);
            }
        }
    }

    #[test]
    fn naive_guard() {
        assert!(naive_feasible(&TransmissionSpec::uniform(10, 0.0).unwrap()));
        let t = TransmissionSpec::uniform(11, 0.0).unwrap();
        let err = vary_naive(&t, &Distribution::uniform(1 << 11)).unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }));
        assert!(naive_feasible(&TransmissionSpec::mutation_only(15, 0.0).unwrap()));
    }

    #[test]
    fn prob_checks_arity() {
        let t = TransmissionSpec::uniform(3, 0.1).unwrap();
        assert!(matches!(
            transmission_prob(&t, 0, &[1]),
            Err(Error::ArityMismatch { expected: 2, found: 1 })
        ));
        assert!(transmission_prob(&t, 8, &[1, 2]).is_err());
        assert!(transmission_prob(&t, 7, &[1, 2]).is_ok());
    }

    #[test]
    fn three_parent_table_variation() {
        // child = majority of three bits
        let mut rows = Vec::new();
        for r in 0..8usize {
            let ones = r.count_ones();
            rows.push(if ones >= 2 { vec![0.0, 1.0] } else { vec![1.0, 0.0] });
        }
        let t = TransmissionTable::from_rows(2, 3, rows).unwrap();
        let p = Distribution::new(vec![0.4, 0.6]).unwrap();
        let v = vary_naive(&t, &p).unwrap();
        let want = 0.6f64.powi(3) + 3.0 * 0.6 * 0.6 * 0.4;
        assert!((v.get(1) - want).abs() < 1e-15);
    }

    #[test]
    fn theme_transmission_examples() {
        // identity partitioning: D is T itself
        let t = TransmissionSpec::one_point(3, 0.05).unwrap();
        let id = SchemaPartitioning::identity(3).unwrap();
        let d = theme_transmission(&t, &id).unwrap();
        let tab = TransmissionTable::tabulate(&t).unwrap();
        for (a, b) in d.table().probs().iter().zip(tab.probs()) {
            assert!((a - b).abs() < 1e-15);
        }

        // uniform crossover on loci [0, 2] is uniform crossover on 𝔅_2
        let t = TransmissionSpec::uniform(4, 0.0).unwrap();
        let beta = SchemaPartitioning::new(4, &[0, 2]).unwrap();
        let d = theme_transmission(&t, &beta).unwrap();
        let small = TransmissionSpec::uniform(2, 0.0).unwrap();
        for k in 0..4 {
            for k1 in 0..4 {
                for k2 in 0..4 {
                    let brute = brute_theme_row(&t, &beta, &[beta.embed_theme(k1), beta.embed_theme(k2)]);
                    assert!((d.prob(k, &[k1, k2]) - brute[k]).abs() < 1e-15);
                    assert!((d.prob(k, &[k1, k2]) - small.prob(k, &[k1, k2])).abs() < 1e-15);
                }
            }
        }

        // mutation-only on one locus
        let t = TransmissionSpec::mutation_only(3, 0.1).unwrap();
        let beta = SchemaPartitioning::new(3, &[1]).unwrap();
        let d = theme_transmission(&t, &beta).unwrap();
        assert!((d.prob(0, &[1]) - 0.1).abs() < 1e-15);
        assert!((d.prob(1, &[1]) - 0.9).abs() < 1e-15);
    }

    fn mask_spec(length: u32, kind: usize, mu: f64) -> TransmissionSpec {
        match kind {
            0 => TransmissionSpec::uniform(length, mu).unwrap(),
            1 => TransmissionSpec::one_point(length, mu).unwrap(),
            2 => TransmissionSpec::mutation_only(length, mu).unwrap(),
            _ => {
                let n = 1usize << length;
                let table = MaskTable::new(length, vec![(0b1, 0.25), (n - 2, 0.25), (n / 3, 0.5)]).unwrap();
                TransmissionSpec::new(length, Crossover::Masks(table), mu).unwrap()
            }
        }
    }

    fn case() -> impl Strategy<Value = (TransmissionSpec, SchemaPartitioning, Distribution)> {
        (2u32..=7, 0usize..4, prop::sample::select(vec![0.0, 0.01, 0.1, 0.3]))
            .prop_flat_map(|(l, kind, mu)| {
                let n = 1usize << l;
                (
                    Just(mask_spec(l, kind, mu)),
                    prop::sample::subsequence((0..l).collect::<Vec<_>>(), 1..=3.min(l as usize)),
                    prop::collection::vec(0.001f64..1.0, n),
                )
            })
            .prop_map(|(t, loci, w)| {
                let beta = SchemaPartitioning::new(t.length(), &loci).unwrap();
                let s: f64 = w.iter().sum();
                let p = Distribution::new(w.iter().map(|x| x / s).collect()).unwrap();
                (t, beta, p)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn variation_commutes_with_projection((t, beta, p) in case()) {
            let fine = project(&beta, &vary_naive(&t, &p).unwrap()).unwrap();
            let d = theme_transmission(&t, &beta).unwrap();
            let coarse = vary_naive(&d, &project(&beta, &p).unwrap()).unwrap();
            prop_assert!(fine.manhattan(&coarse).unwrap() <= 1e-10);
        }

        #[test]
        fn theme_transmission_is_the_induced_spec((t, beta, _p) in case()) {
            let d = theme_transmission(&t, &beta).unwrap();
            let induced = TransmissionTable::tabulate(&t.induced_on_schema(&beta).unwrap()).unwrap();
            for (a, b) in d.table().probs().iter().zip(induced.probs()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            for r in 0..d.table().probs().len() / d.size() {
                let row = &d.table().probs()[r * d.size()..(r + 1) * d.size()];
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn representatives_do_not_matter((t, beta, _p) in case()) {
            let lo = theme_transmission(&t, &beta).unwrap();
            let hi = theme_transmission_with(&t, &beta, |k| beta.theme_class(k).last().unwrap()).unwrap();
            let mid = theme_transmission_with(&t, &beta, |k| {
                let members: Vec<_> = beta.theme_class(k).collect();
                members[members.len() / 2]
            }).unwrap();
            for ((a, b), c) in lo.table().probs().iter().zip(hi.table().probs()).zip(mid.table().probs()) {
                prop_assert!((a - b).abs() < 1e-12);
                prop_assert!((a - c).abs() < 1e-12);
            }
        }
    }
}
