use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::DenseMatrix;

/// Which `(query, key)` pairs may interact, decided from global token indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MaskSpec {
    #[default]
    None,
    /// Query `i` attends key `j` iff `i >= j`.
    Causal,
    /// Arbitrary 0/-inf pattern over global indices (reference path).
    Additive(AdditiveMask),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveMask {
    n: usize,
    blocked: Vec<bool>,
}

impl MaskSpec {
    /// Validates an `N x N` matrix holding only `0` and `-inf`.
    pub fn additive<T: Scalar>(x: &DenseMatrix<T>) -> Result<Self> {
        if x.rows() != x.cols() {
            return Err(Error::shape(
                "MaskSpec::additive",
                format!("mask must be square, got {:?}", x.shape()),
            ));
        }
        let mut blocked = Vec::with_capacity(x.len());
        for &e in x.data() {
            if e == T::zero() {
                blocked.push(false);
            } else if e == T::neg_infinity() {
                blocked.push(true);
            } else {
                return Err(Error::Config(format!(
                    "additive mask entries must be 0 or -inf, found {e}"
                )));
            }
        }
        Ok(MaskSpec::Additive(AdditiveMask {
            n: x.rows(),
            blocked,
        }))
    }

    #[inline]
    pub fn allows(&self, query: usize, key: usize) -> bool {
        match self {
            MaskSpec::None => true,
            MaskSpec::Causal => query >= key,
            MaskSpec::Additive(m) => !m.blocked[query * m.n + key],
        }
    }

    /// Checks that global indices up to `max_index` are addressable.
    pub(crate) fn check_extent(&self, max_index: Option<usize>) -> Result<()> {
        if let (MaskSpec::Additive(m), Some(mx)) = (self, max_index) {
            if mx >= m.n {
                return Err(Error::shape(
                    "mask",
                    format!("token index {mx} outside {}x{} additive mask", m.n, m.n),
                ));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            MaskSpec::None => "none",
            MaskSpec::Causal => "causal",
            MaskSpec::Additive(_) => "additive",
        }
    }
}

/// Number of `(query, key)` pairs the mask leaves unmasked.
pub fn count_unmasked(queries: &[usize], keys: &[usize], mask: &MaskSpec) -> u64 {
    let mut n = 0;
    for &i in queries {
        for &j in keys {
            if mask.allows(i, j) {
                n += 1;
            }
        }
    }
    n
}

/// Rows of a token matrix together with their global sequence positions.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenShard<T> {
    pub data: DenseMatrix<T>,
    pub global_indices: Vec<usize>,
}

impl<T: Scalar> TokenShard<T> {
    pub fn new(data: DenseMatrix<T>, global_indices: Vec<usize>) -> Result<Self> {
        if global_indices.len() != data.rows() {
            return Err(Error::shape(
                "TokenShard::new",
                format!(
                    "{} indices for {} rows",
                    global_indices.len(),
                    data.rows()
                ),
            ));
        }
        if global_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Layout(
                "token indices must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            data,
            global_indices,
        })
    }

    /// Shard holding tokens `0..rows`.
    pub fn contiguous(data: DenseMatrix<T>) -> Self {
        let global_indices = (0..data.rows()).collect();
        Self {
            data,
            global_indices,
        }
    }

    pub fn rows(&self) -> usize {
        self.data.rows()
    }

    /// Merges shards with disjoint index sets into one shard ordered by
    /// global index.
    pub fn merge_sorted(shards: Vec<TokenShard<T>>) -> Result<Self> {
        let cols = shards.first().map_or(0, |s| s.data.cols());
        let mut tagged: Vec<(usize, usize, usize)> = Vec::new();
        for (s, shard) in shards.iter().enumerate() {
            if shard.data.cols() != cols {
                return Err(Error::shape("merge_sorted", "column counts differ"));
            }
            for (row, &g) in shard.global_indices.iter().enumerate() {
                tagged.push((g, s, row));
            }
        }
        tagged.sort_unstable();
        let mut data = DenseMatrix::zeros(tagged.len(), cols);
        let mut indices = Vec::with_capacity(tagged.len());
        for (out_row, &(g, s, row)) in tagged.iter().enumerate() {
            data.row_mut(out_row).copy_from_slice(shards[s].data.row(row));
            indices.push(g);
        }
        TokenShard::new(data, indices)
    }

    /// Subset of rows by local position.
    pub fn select(&self, positions: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(positions),
            global_indices: positions.iter().map(|&p| self.global_indices[p]).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_mask_validation() {
        let ok = DenseMatrix::<f64>::from_rows(&[&[0.0, f64::NEG_INFINITY], &[0.0, 0.0]]);
        let mask = MaskSpec::additive(&ok).unwrap();
        assert!(mask.allows(0, 0));
        assert!(!mask.allows(0, 1));
        assert!(mask.allows(1, 1));

        let bad = DenseMatrix::<f64>::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(MaskSpec::additive(&bad).is_err());
        let rect = DenseMatrix::<f64>::zeros(2, 3);
        assert!(MaskSpec::additive(&rect).is_err());
    }

    #[test]
    fn shard_requires_increasing_indices() {
        let d = DenseMatrix::<f64>::zeros(2, 1);
        assert!(TokenShard::new(d.clone(), vec![3, 1]).is_err());
        assert!(TokenShard::new(d.clone(), vec![1]).is_err());
        assert!(TokenShard::new(d, vec![1, 3]).is_ok());
    }

    #[test]
    fn merge_sorted_interleaves() {
        let a = TokenShard::new(DenseMatrix::<f64>::from_rows(&[&[0.0], &[4.0]]), vec![0, 4]).unwrap();
        let b = TokenShard::new(DenseMatrix::<f64>::from_rows(&[&[2.0], &[6.0]]), vec![2, 6]).unwrap();
        let m = TokenShard::merge_sorted(vec![b, a]).unwrap();
        assert_eq!(m.global_indices, vec![0, 2, 4, 6]);
        assert_eq!(m.data.data(), &[0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn merge_sorted_rejects_duplicates() {
        let a = TokenShard::new(DenseMatrix::<f64>::zeros(1, 1), vec![3]).unwrap();
        assert!(TokenShard::merge_sorted(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn causal_count_small() {
        assert_eq!(count_unmasked(&[0, 2, 4, 6], &[1, 3, 5, 7], &MaskSpec::Causal), 6);
        assert_eq!(count_unmasked(&[0, 1], &[0, 1], &MaskSpec::None), 4);
    }
}
