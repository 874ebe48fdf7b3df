//! Shared inputs for the criterion benchmarks under `benches/`.

use attn2d_core::dist::GlobalInputs;
use attn2d_core::kernel::{finalize, flash_attn_forward, PartialAttn};
use attn2d_core::{DenseMatrix, MaskSpec, TokenShard};

/// Seeded `n x h` inputs as contiguous token shards.
pub struct KernelInputs {
    pub q: TokenShard<f64>,
    pub k: TokenShard<f64>,
    pub v: TokenShard<f64>,
    pub d_out: DenseMatrix<f64>,
    pub scale: f64,
}

impl KernelInputs {
    pub fn new(n: usize, h: usize) -> Self {
        let x = GlobalInputs::<f64>::random(n, h, 7);
        Self {
            q: TokenShard::contiguous(x.q),
            k: TokenShard::contiguous(x.k),
            v: TokenShard::contiguous(x.v),
            d_out: x.d_out,
            scale: 1.0 / (h as f64).sqrt(),
        }
    }

    pub fn forward(&self, mask: &MaskSpec, block: usize) -> PartialAttn<f64> {
        flash_attn_forward(&self.q, &self.k, &self.v, mask, self.scale, block)
            .expect("valid benchmark inputs")
    }

    /// Forward partial and finished output, as the backward kernel expects.
    pub fn saved(&self, mask: &MaskSpec) -> (PartialAttn<f64>, DenseMatrix<f64>) {
        let p = self.forward(mask, 64);
        let o = finalize(&p).expect("no fully masked rows");
        (p, o)
    }
}
