//! Blockwise attention that never holds more than one block of scores.

use crate::error::{Error, Result};
use crate::kernel::mask::{MaskSpec, TokenShard};
use crate::kernel::partial::PartialAttn;
use crate::kernel::reference::check_scale;
use crate::scalar::Scalar;
use crate::tensor::{DenseMatrix, RealVector};

/// Key block size used by the backward pass.
const BWD_BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct AttnGrads<T> {
    pub dq: DenseMatrix<T>,
    pub dk: DenseMatrix<T>,
    pub dv: DenseMatrix<T>,
}

impl<T: Scalar> AttnGrads<T> {
    pub fn zeros(q_rows: usize, kv_rows: usize, head_dim: usize) -> Self {
        Self {
            dq: DenseMatrix::zeros(q_rows, head_dim),
            dk: DenseMatrix::zeros(kv_rows, head_dim),
            dv: DenseMatrix::zeros(kv_rows, head_dim),
        }
    }
}

fn check_shards<T: Scalar>(
    op: &'static str,
    q: &TokenShard<T>,
    k: &TokenShard<T>,
    v: &TokenShard<T>,
    mask: &MaskSpec,
) -> Result<()> {
    let h = q.data.cols();
    if k.data.cols() != h || v.data.cols() != h {
        return Err(Error::shape(
            op,
            format!(
                "head dims q={h}, k={}, v={}",
                k.data.cols(),
                v.data.cols()
            ),
        ));
    }
    if k.global_indices != v.global_indices {
        return Err(Error::shape(op, "key and value shards hold different tokens"));
    }
    let max_index = q
        .global_indices
        .last()
        .copied()
        .max(k.global_indices.last().copied());
    mask.check_extent(max_index)
}

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Partial attention of `q` over exactly the tokens in `k`/`v`, processed
/// `block` keys at a time.
pub fn flash_attn_forward<T: Scalar>(
    q: &TokenShard<T>,
    k: &TokenShard<T>,
    v: &TokenShard<T>,
    mask: &MaskSpec,
    scale: T,
    block: usize,
) -> Result<PartialAttn<T>> {
    flash_attn_forward_counted(q, k, v, mask, scale, block).map(|(p, _)| p)
}

/// As [`flash_attn_forward`], also returning how many unmasked scores were
/// evaluated.
pub fn flash_attn_forward_counted<T: Scalar>(
    q: &TokenShard<T>,
    k: &TokenShard<T>,
    v: &TokenShard<T>,
    mask: &MaskSpec,
    scale: T,
    block: usize,
) -> Result<(PartialAttn<T>, u64)> {
    if block == 0 {
        return Err(Error::Config("block size must be at least 1".into()));
    }
    check_scale(scale)?;
    check_shards("flash_attn_forward", q, k, v, mask)?;

    let rows = q.rows();
    let h = q.data.cols();
    let nk = k.rows();
    let mut out = PartialAttn::empty(rows, h);
    let mut scores: Vec<Option<T>> = Vec::with_capacity(block.min(nk));
    let mut computed = 0u64;

    for i in 0..rows {
        let gi = q.global_indices[i];
        let qi = q.data.row(i);
        let mut m = T::neg_infinity();
        let mut d = T::zero();
        let mut acc = vec![T::zero(); h];

        for start in (0..nk).step_by(block) {
            let end = (start + block).min(nk);
            scores.clear();
            let mut block_max = T::neg_infinity();
            for j in start..end {
                if mask.allows(gi, k.global_indices[j]) {
                    let s = scale * dot(qi, k.data.row(j));
                    computed += 1;
                    if s > block_max {
                        block_max = s;
                    }
                    scores.push(Some(s));
                } else {
                    scores.push(None);
                }
            }
            if block_max == T::neg_infinity() {
                continue;
            }
            let m_new = if m >= block_max { m } else { block_max };
            let alpha = if m == T::neg_infinity() {
                T::zero()
            } else {
                (m - m_new).exp()
            };
            d = d * alpha;
            for a in acc.iter_mut() {
                *a = *a * alpha;
            }
            for (offset, s) in scores.iter().enumerate() {
                if let Some(s) = *s {
                    let p = (s - m_new).exp();
                    d = d + p;
                    for (a, &vj) in acc.iter_mut().zip(v.data.row(start + offset)) {
                        *a = *a + p * vj;
                    }
                }
            }
            m = m_new;
        }

        out.m.data_mut()[i] = m;
        out.d.data_mut()[i] = d;
        out.n.row_mut(i).copy_from_slice(&acc);
    }
    Ok((out, computed))
}

/// Gradients of attention restricted to the keys in `k`/`v`.
///
/// `m` and `d` must be the softmax statistics over *all* keys for these
/// query rows, and `o` the finished output, so that the recomputed
/// probabilities `exp(s - m)/d` are globally normalized. Gradients for
/// different key partitions then combine by plain summation of `dq`.
#[allow(clippy::too_many_arguments)]
pub fn flash_attn_backward<T: Scalar>(
    q: &TokenShard<T>,
    k: &TokenShard<T>,
    v: &TokenShard<T>,
    o: &DenseMatrix<T>,
    d_out: &DenseMatrix<T>,
    m: &RealVector<T>,
    d: &RealVector<T>,
    mask: &MaskSpec,
    scale: T,
) -> Result<AttnGrads<T>> {
    check_scale(scale)?;
    check_shards("flash_attn_backward", q, k, v, mask)?;
    let rows = q.rows();
    let h = q.data.cols();
    if o.shape() != (rows, h) || d_out.shape() != (rows, h) || m.len() != rows || d.len() != rows
    {
        return Err(Error::shape(
            "flash_attn_backward",
            format!(
                "{rows} query rows with O {:?}, dO {:?}, M {}, D {}",
                o.shape(),
                d_out.shape(),
                m.len(),
                d.len()
            ),
        ));
    }
    if let Some(row) = d.data().iter().position(|&x| x == T::zero()) {
        return Err(Error::DivisionByZero { row });
    }

    let nk = k.rows();
    let mut grads = AttnGrads::zeros(rows, nk, h);
    let delta: Vec<T> = (0..rows).map(|i| dot(d_out.row(i), o.row(i))).collect();

    for start in (0..nk).step_by(BWD_BLOCK) {
        let end = (start + BWD_BLOCK).min(nk);
        for (i, &delta_i) in delta.iter().enumerate() {
            let gi = q.global_indices[i];
            let qi = q.data.row(i);
            let doi = d_out.row(i);
            let (mi, di) = (m.get(i), d.get(i));
            for j in start..end {
                if !mask.allows(gi, k.global_indices[j]) {
                    continue;
                }
                let kj = k.data.row(j);
                let p = (scale * dot(qi, kj) - mi).exp() / di;
                let dp = dot(doi, v.data.row(j));
                let ds = p * (dp - delta_i);
                for (x, &g) in grads.dv.row_mut(j).iter_mut().zip(doi) {
                    *x = *x + p * g;
                }
                for (x, &kv) in grads.dq.row_mut(i).iter_mut().zip(kj) {
                    *x = *x + scale * ds * kv;
                }
                for (x, &qv) in grads.dk.row_mut(j).iter_mut().zip(qi) {
                    *x = *x + scale * ds * qv;
                }
            }
        }
    }
    Ok(grads)
}
