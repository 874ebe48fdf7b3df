//! Dense attention that materializes the full score matrix.

use crate::error::{Error, Result};
use crate::kernel::flash::AttnGrads;
use crate::kernel::mask::MaskSpec;
use crate::scalar::Scalar;
use crate::tensor::{diag_scale, matmul, row_max, row_sum, DenseMatrix};

pub(crate) fn check_scale<T: Scalar>(scale: T) -> Result<()> {
    if scale <= T::zero() || !scale.is_finite() {
        return Err(Error::Config(format!("scale must be positive, got {scale}")));
    }
    Ok(())
}

fn check_qkv<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    mask: &MaskSpec,
) -> Result<()> {
    if q.cols() != k.cols() || k.cols() != v.cols() || k.rows() != v.rows() {
        return Err(Error::shape(
            "reference_attention",
            format!("q {:?}, k {:?}, v {:?}", q.shape(), k.shape(), v.shape()),
        ));
    }
    mask.check_extent(q.rows().max(k.rows()).checked_sub(1))
}

/// Row-normalized attention probabilities `softmax(scale·QKᵀ + X)`.
fn probabilities<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    mask: &MaskSpec,
    scale: T,
) -> Result<DenseMatrix<T>> {
    let mut s = matmul(q, k, true)?.scale(scale);
    for i in 0..s.rows() {
        for j in 0..s.cols() {
            if !mask.allows(i, j) {
                s.set(i, j, T::neg_infinity());
            }
        }
    }
    let m = row_max(&s);
    if let Some(row) = m.data().iter().position(|&x| x == T::neg_infinity()) {
        return Err(Error::FullyMaskedRow { row });
    }
    let e = DenseMatrix::from_fn(s.rows(), s.cols(), |i, j| (s.get(i, j) - m.get(i)).exp());
    let d = row_sum(&e);
    diag_scale(&d, &e)
}

/// `O = softmax(scale·QKᵀ + X) V` with max-subtracted softmax.
pub fn reference_attention<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    mask: &MaskSpec,
    scale: T,
) -> Result<DenseMatrix<T>> {
    check_scale(scale)?;
    check_qkv(q, k, v, mask)?;
    let p = probabilities(q, k, mask, scale)?;
    matmul(&p, v, false)
}

/// Analytic gradients of `O` with respect to `Q`, `K`, `V` given `dO`.
pub fn reference_attention_grad<T: Scalar>(
    q: &DenseMatrix<T>,
    k: &DenseMatrix<T>,
    v: &DenseMatrix<T>,
    mask: &MaskSpec,
    scale: T,
    d_out: &DenseMatrix<T>,
) -> Result<AttnGrads<T>> {
    check_scale(scale)?;
    check_qkv(q, k, v, mask)?;
    if d_out.shape() != (q.rows(), v.cols()) {
        return Err(Error::shape(
            "reference_attention_grad",
            format!("dO {:?} for output {:?}", d_out.shape(), (q.rows(), v.cols())),
        ));
    }
    let p = probabilities(q, k, mask, scale)?;
    let o = matmul(&p, v, false)?;
    let dv = matmul(&p.transpose(), d_out, false)?;
    let dp = matmul(d_out, v, true)?;
    let delta = row_sum(&d_out.hadamard(&o)?);
    let ds = DenseMatrix::from_fn(p.rows(), p.cols(), |i, j| {
        p.get(i, j) * (dp.get(i, j) - delta.get(i))
    });
    let dq = matmul(&ds, k, false)?.scale(scale);
    let dk = matmul(&ds.transpose(), q, false)?.scale(scale);
    Ok(AttnGrads { dq, dk, dv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> DenseMatrix<f64> {
        DenseMatrix::from_rows(rows)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<f64> {
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn single_key() {
        let o = reference_attention(&m(&[&[1.0]]), &m(&[&[7.0]]), &m(&[&[3.0]]), &MaskSpec::None, 1.0)
            .unwrap();
        assert_eq!(o.data(), &[3.0]);
    }

    #[test]
    fn uniform_and_causal() {
        let z = m(&[&[0.0], &[0.0]]);
        let v = m(&[&[1.0], &[3.0]]);
        let o = reference_attention(&z, &z, &v, &MaskSpec::None, 1.0).unwrap();
        assert_eq!(o.data(), &[2.0, 2.0]);
        let oc = reference_attention(&z, &z, &v, &MaskSpec::Causal, 1.0).unwrap();
        assert_eq!(oc.data(), &[1.0, 2.0]);
    }

    #[test]
    fn fully_masked_row_is_an_error() {
        let x = m(&[&[f64::NEG_INFINITY, f64::NEG_INFINITY], &[0.0, 0.0]]);
        let mask = MaskSpec::additive(&x).unwrap();
        let z = m(&[&[0.0], &[0.0]]);
        assert_eq!(
            reference_attention(&z, &z, &z, &mask, 1.0),
            Err(Error::FullyMaskedRow { row: 0 })
        );
    }

    #[test]
    fn rejects_bad_scale() {
        let z = m(&[&[0.0]]);
        assert!(matches!(
            reference_attention(&z, &z, &z, &MaskSpec::None, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (q, k, v) = (random(4, 3, &mut rng), random(4, 3, &mut rng), random(4, 3, &mut rng));
        let g = reference_attention_grad(&q, &k, &v, &MaskSpec::Causal, 1.0, &DenseMatrix::zeros(4, 3))
            .unwrap();
        assert_eq!(g.dq.max_abs(), 0.0);
        assert_eq!(g.dk.max_abs(), 0.0);
        assert_eq!(g.dv.max_abs(), 0.0);
    }

    #[test]
    fn single_token_grads() {
        let g = reference_attention_grad(
            &m(&[&[0.4]]),
            &m(&[&[-1.2]]),
            &m(&[&[2.0]]),
            &MaskSpec::None,
            1.0,
            &m(&[&[0.9]]),
        )
        .unwrap();
        assert_eq!(g.dv.data(), &[0.9]);
        assert_eq!(g.dq.data(), &[0.0]);
        assert_eq!(g.dk.data(), &[0.0]);
    }

    /// Loss `sum(O ∘ dO)` evaluated at perturbed inputs.
    fn loss(q: &DenseMatrix<f64>, k: &DenseMatrix<f64>, v: &DenseMatrix<f64>, mask: &MaskSpec, scale: f64, d_out: &DenseMatrix<f64>) -> f64 {
        let o = reference_attention(q, k, v, mask, scale).unwrap();
        o.data().iter().zip(d_out.data()).map(|(a, b)| a * b).sum()
    }

    fn central_difference(
        which: usize,
        q: &DenseMatrix<f64>,
        k: &DenseMatrix<f64>,
        v: &DenseMatrix<f64>,
        mask: &MaskSpec,
        scale: f64,
        d_out: &DenseMatrix<f64>,
    ) -> DenseMatrix<f64> {
        let eps = 1e-4;
        let target = [q, k, v][which];
        DenseMatrix::from_fn(target.rows(), target.cols(), |i, j| {
            let mut inputs = [q.clone(), k.clone(), v.clone()];
            let x = inputs[which].get(i, j);
            inputs[which].set(i, j, x + eps);
            let up = loss(&inputs[0], &inputs[1], &inputs[2], mask, scale, d_out);
            inputs[which].set(i, j, x - eps);
            let down = loss(&inputs[0], &inputs[1], &inputs[2], mask, scale, d_out);
            (up - down) / (2.0 * eps)
        })
    }

    #[test]
    fn grads_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (n, h, mask, scale) in [
            (4, 3, MaskSpec::None, 1.0),
            (4, 3, MaskSpec::Causal, 1.0),
            (6, 4, MaskSpec::Causal, 0.5),
            (5, 2, MaskSpec::None, 1.0 / 2f64.sqrt()),
        ] {
            let (q, k, v, d_out) = (
                random(n, h, &mut rng),
                random(n, h, &mut rng),
                random(n, h, &mut rng),
                random(n, h, &mut rng),
            );
            let g = reference_attention_grad(&q, &k, &v, &mask, scale, &d_out).unwrap();
            for (which, analytic) in [&g.dq, &g.dk, &g.dv].into_iter().enumerate() {
                let fd = central_difference(which, &q, &k, &v, &mask, scale, &d_out);
                let err = analytic.max_rel_err(&fd).unwrap();
                assert!(err < 1e-5, "n={n} h={h} input {which}: rel err {err:e}");
            }
        }
    }
}
