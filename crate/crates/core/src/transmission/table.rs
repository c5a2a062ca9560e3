use super::Transmission;
use crate::error::{Error, Result};

/// A dense transmission function `T(x | x₁…x_m)` over a finite space of
/// `size` points. Rows are indexed by the parent tuple read as a base-`size`
/// number, first parent most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTable {
    size: usize,
    arity: usize,
    probs: Vec<f64>,
}

impl TransmissionTable {
    /// Builds a table from one child distribution per parent tuple.
    pub fn from_rows(size: usize, arity: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        if size == 0 || arity == 0 {
            return Err(Error::InvalidTransmission(
                "table needs a nonempty space and arity ≥ 1".into(),
            ));
        }
        let expected_rows = size
            .checked_pow(arity as u32)
            .filter(|r| r.checked_mul(size).is_some())
            .ok_or_else(|| Error::Infeasible {
                what: "explicit transmission table",
                detail: format!("{size}^{} entries", arity + 1),
            })?;
        if rows.len() != expected_rows {
            return Err(Error::ShapeMismatch {
                expected: expected_rows,
                found: rows.len(),
            });
        }
        let mut probs = Vec::with_capacity(expected_rows * size);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != size {
                return Err(Error::ShapeMismatch {
                    expected: size,
                    found: row.len(),
                });
            }
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(Error::InvalidTransmission(format!(
                    "row {r} has a negative or non-finite entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidTransmission(format!("row {r} sums to {total}")));
            }
            probs.extend(row);
        }
        Ok(Self { size, arity, probs })
    }

    /// Materializes any transmission function as a table.
    pub fn tabulate<T: Transmission + ?Sized>(t: &T) -> Result<Self> {
        let size = t.size();
        let rows = size.checked_pow(t.arity() as u32).ok_or_else(|| Error::Infeasible {
            what: "tabulation",
            detail: format!("{size}^{} rows", t.arity()),
        })?;
        let mut parents = vec![0usize; t.arity()];
        let rows = (0..rows)
            .map(|r| {
                decode_tuple(r, size, &mut parents);
                t.child_distribution(&parents)
            })
            .collect();
        Self::from_rows(size, t.arity(), rows)
    }

    pub(crate) fn from_raw(size: usize, arity: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), size.pow(arity as u32 + 1));
        Self { size, arity, probs }
    }

    pub fn row(&self, parents: &[usize]) -> &[f64] {
        let r = encode_tuple(parents, self.size);
        &self.probs[r * self.size..(r + 1) * self.size]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

pub(crate) fn encode_tuple(parents: &[usize], size: usize) -> usize {
    parents.iter().fold(0, |acc, &p| acc * size + p)
}

pub(crate) fn decode_tuple(mut index: usize, size: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = index % size;
        index /= size;
    }
}

impl Transmission for TransmissionTable {
    fn size(&self) -> usize {
        self.size
    }

    fn arity(&self) -> usize {
        self.arity
    }

    #[inline]
    fn prob(&self, child: usize, parents: &[usize]) -> f64 {
        self.probs[encode_tuple(parents, self.size) * self.size + child]
    }

    fn child_distribution(&self, parents: &[usize]) -> Vec<f64> {
        self.row(parents).to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tuple_coding_round_trips() {
        let mut out = [0usize; 3];
        for i in 0..64 {
            decode_tuple(i, 4, &mut out);
            assert_eq!(encode_tuple(&out, 4), i);
        }
        decode_tuple(0b01_10_11, 4, &mut out);
        assert_eq!(out, [1, 2, 3]);
    }

    #[test]
    fn validates_rows() {
        assert!(TransmissionTable::from_rows(2, 1, vec![vec![1.0, 0.0]]).is_err());
        assert!(TransmissionTable::from_rows(2, 1, vec![vec![1.0, 0.0], vec![0.5, 0.6]]).is_err());
        assert!(TransmissionTable::from_rows(2, 1, vec![vec![1.0, 0.0], vec![1.5, -0.5]]).is_err());
        let t = TransmissionTable::from_rows(2, 1, vec![vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        assert_eq!(t.prob(1, &[1]), 0.75);
        assert_eq!(t.row(&[0]), &[1.0, 0.0]);
    }
}
