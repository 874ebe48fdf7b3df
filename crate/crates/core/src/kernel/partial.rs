use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{diag_scale, DenseMatrix, RealVector};

/// Attention state over a subset of keys, mergeable with [`attn_fix`].
///
/// For each query row `i`: `m[i]` is the largest score seen, `n[i, :]` the
/// value rows weighted by `exp(s - m[i])`, and `d[i]` the sum of those
/// weights. A row that has seen no unmasked key is `(-inf, 0, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialAttn<T> {
    pub m: RealVector<T>,
    pub n: DenseMatrix<T>,
    pub d: RealVector<T>,
}

impl<T: Scalar> PartialAttn<T> {
    pub fn new(m: RealVector<T>, n: DenseMatrix<T>, d: RealVector<T>) -> Result<Self> {
        if m.len() != n.rows() || d.len() != n.rows() {
            return Err(Error::shape(
                "PartialAttn::new",
                format!("M={}, N rows={}, D={}", m.len(), n.rows(), d.len()),
            ));
        }
        Ok(Self { m, n, d })
    }

    /// The identity element: no keys seen for any row.
    pub fn empty(rows: usize, head_dim: usize) -> Self {
        Self {
            m: RealVector::filled(rows, T::neg_infinity()),
            n: DenseMatrix::zeros(rows, head_dim),
            d: RealVector::filled(rows, T::zero()),
        }
    }

    pub fn rows(&self) -> usize {
        self.n.rows()
    }

    pub fn head_dim(&self) -> usize {
        self.n.cols()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            m: self.m.select(idx),
            n: self.n.select_rows(idx),
            d: self.d.select(idx),
        }
    }

    /// Log-sum-exp form `L = M + ln D` of the softmax statistics.
    pub fn log_sum_exp(&self) -> RealVector<T> {
        RealVector::from_vec(
            self.m
                .data()
                .iter()
                .zip(self.d.data())
                .map(|(&m, &d)| m + d.ln())
                .collect(),
        )
    }

    /// `(M, D)` pair equivalent to a log-sum-exp vector: `M = L`, `D = 1`.
    pub fn stats_from_lse(lse: &RealVector<T>) -> (RealVector<T>, RealVector<T>) {
        (lse.clone(), RealVector::filled(lse.len(), T::one()))
    }
}

#[inline]
fn rescale<T: Scalar>(m_part: T, m_total: T) -> T {
    if m_part == T::neg_infinity() {
        T::zero()
    } else {
        (m_part - m_total).exp()
    }
}

/// Combines partials over disjoint key sets into the partial over their union.
///
/// A row whose rescale factor is exactly zero takes the other operand's row
/// unchanged, so the empty partial is a bitwise identity.
pub fn attn_fix<T: Scalar>(a: &PartialAttn<T>, b: &PartialAttn<T>) -> Result<PartialAttn<T>> {
    if a.n.shape() != b.n.shape() || a.m.len() != b.m.len() || a.d.len() != b.d.len() {
        return Err(Error::shape(
            "attn_fix",
            format!("{:?} vs {:?}", a.n.shape(), b.n.shape()),
        ));
    }
    let rows = a.rows();
    let mut m = Vec::with_capacity(rows);
    let mut d = Vec::with_capacity(rows);
    let mut n = DenseMatrix::zeros(rows, a.head_dim());
    for i in 0..rows {
        let (ma, mb) = (a.m.get(i), b.m.get(i));
        let mi = if ma >= mb { ma } else { mb };
        let ea = rescale(ma, mi);
        let eb = rescale(mb, mi);
        m.push(mi);
        let out = n.row_mut(i);
        if ea == T::zero() {
            for (o, &x) in out.iter_mut().zip(b.n.row(i)) {
                *o = eb * x;
            }
            d.push(eb * b.d.get(i));
        } else if eb == T::zero() {
            for (o, &x) in out.iter_mut().zip(a.n.row(i)) {
                *o = ea * x;
            }
            d.push(ea * a.d.get(i));
        } else {
            for ((o, &x), &y) in out.iter_mut().zip(a.n.row(i)).zip(b.n.row(i)) {
                *o = ea * x + eb * y;
            }
            d.push(ea * a.d.get(i) + eb * b.d.get(i));
        }
    }
    Ok(PartialAttn {
        m: RealVector::from_vec(m),
        n,
        d: RealVector::from_vec(d),
    })
}

/// `O = Diag(D)⁻¹ N`. A zero denominator means a query that attended nothing.
pub fn finalize<T: Scalar>(p: &PartialAttn<T>) -> Result<DenseMatrix<T>> {
    diag_scale(&p.d, &p.n).map_err(|e| match e {
        Error::DivisionByZero { row } => Error::FullyMaskedRow { row },
        other => other,
    })
}
