//! Single-processor exact attention.
//!
//! [`reference`] is the dense oracle that every distributed path is checked
//! against. [`flash`] holds the blockwise forward recurrence and the
//! recomputation-based backward pass; both consume [`TokenShard`]s so that
//! causal masking always follows global token positions. [`partial`] holds
//! the mergeable `(M, N, D)` state and its combination rule.

mod flash;
mod mask;
mod partial;
mod reference;

pub use flash::{
    flash_attn_backward, flash_attn_forward, flash_attn_forward_counted, AttnGrads,
};
pub use mask::{count_unmasked, MaskSpec, TokenShard};
pub use partial::{attn_fix, finalize, PartialAttn};
pub use reference::{reference_attention, reference_attention_grad};
