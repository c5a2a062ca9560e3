use crate::error::{Error, Result};

/// Tolerance on the total mass of a distribution at construction.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Drift beyond which operator outputs are renormalized.
pub const RENORMALIZE_DRIFT: f64 = 1e-12;

/// A probability vector over a finite space, or the all-zero function.
///
/// The zero function is a distinct, explicitly flagged value: it is what the
/// theme conditional of an empty class evaluates to.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: Vec<f64>,
    zero: bool,
}

impl Distribution {
    /// Validates non-negativity and unit mass (within 1e-9).
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "weight {i} is {w}; weights must be finite and non-negative"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights, zero: false })
    }

    /// The constant zero function over a space of `size` points.
    pub fn zero(size: usize) -> Self {
        Self {
            weights: vec![0.0; size],
            zero: true,
        }
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size >= 1, "uniform distribution needs a nonempty space");
        Self {
            weights: vec![1.0 / size as f64; size],
            zero: false,
        }
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        assert!(at < size, "point mass location {at} out of range {size}");
        let mut weights = vec![0.0; size];
        weights[at] = 1.0;
        Self { weights, zero: false }
    }

    /// Builds an operator output: clamps round-off negatives, then rescales
    /// when the mass has drifted from 1 by more than 1e-12.
    pub(crate) fn from_operator_output(mut weights: Vec<f64>) -> Result<Self> {
        let mut total = 0.0;
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "operator produced non-finite weight {w}"
                )));
            }
            if *w < 0.0 {
                debug_assert!(*w > -1e-9, "large negative weight {w}");
                *w = 0.0;
            }
            total += *w;
        }
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("operator output has no mass".into()));
        }
        if (total - 1.0).abs() > RENORMALIZE_DRIFT {
            let inv = 1.0 / total;
            weights.iter_mut().for_each(|w| *w *= inv);
        }
        Ok(Self { weights, zero: false })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn manhattan(&self, other: &Distribution) -> Result<f64> {
        manhattan_distance(&self.weights, &other.weights)
    }
}

/// `Σ |a_i − b_i|` over equal-length tables.
pub fn manhattan_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

pub fn uniform_distribution(size: usize) -> Distribution {
    Distribution::uniform(size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_distribution(4).weights(), &[0.25; 4]);
        assert_eq!(uniform_distribution(1).weights(), &[1.0]);
    }

    #[test]
    fn manhattan_examples() {
        let p = Distribution::new(vec![0.2, 0.8]).unwrap();
        let q = Distribution::new(vec![0.5, 0.5]).unwrap();
        assert!((p.manhattan(&q).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(p.manhattan(&p).unwrap(), 0.0);
        assert!(matches!(
            manhattan_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn construction_validates() {
        assert!(Distribution::new(vec![0.5, 0.6]).is_err());
        assert!(Distribution::new(vec![-0.1, 1.1]).is_err());
        assert!(Distribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Distribution::new(vec![]).is_err());
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-10]).is_ok());
        assert!(Distribution::new(vec![0.5, 0.5 + 5e-9]).is_err());
    }

    #[test]
    fn operator_output_renormalizes_drift() {
        let d = Distribution::from_operator_output(vec![0.5, 0.5 + 1e-10, -1e-17]).unwrap();
        assert!((d.total_mass() - 1.0).abs() < 1e-15);
        assert_eq!(d.get(2), 0.0);
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, n).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn manhattan_is_a_metric(a in simplex(8), b in simplex(8), c in simplex(8)) {
            let dab = manhattan_distance(&a, &b).unwrap();
            let dba = manhattan_distance(&b, &a).unwrap();
            let dbc = manhattan_distance(&b, &c).unwrap();
            let dac = manhattan_distance(&a, &c).unwrap();
            prop_assert_eq!(dab, dba);
            prop_assert!(dac <= dab + dbc + 1e-15);
            prop_assert!(dab <= 2.0 + 1e-12);
            prop_assert_eq!(manhattan_distance(&a, &a).unwrap(), 0.0);
            if a != b {
                prop_assert!(dab > 0.0);
            }
        }
    }
}
