use std::fmt::Write as _;

use attn2d_core::cost::reconcile;
use attn2d_core::dist::{simulate, DistAttnConfig, GlobalInputs, Pass, Strategy};
use attn2d_core::kernel::{reference_attention, reference_attention_grad};
use attn2d_core::mesh::Phase;
use attn2d_core::{MaskSpec, Precision, ProcCoord, Scalar};
use clap::Args;

use crate::error::CliError;
use crate::opts::{emit, precision};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Only this strategy (attn2d_no, attn2d_o or ring).
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Skip sequence lengths above this.
    #[arg(long, default_value_t = 64)]
    max_n: usize,
    /// Only these processor counts, comma-separated.
    #[arg(long)]
    p: Option<String>,
    /// Seed for the random inputs.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturb one measured ledger count to exercise the failure path.
    #[arg(long, hide = true)]
    inject_fault: bool,
}

const P_SET: [usize; 3] = [1, 4, 16];
const N_SET: [usize; 4] = [8, 16, 32, 64];
const H_SET: [usize; 3] = [2, 4, 8];

/// Relative error bounds for the output and the gradients.
fn tolerances(p: Precision) -> (f64, f64) {
    match p {
        Precision::Double => (1e-9, 1e-8),
        Precision::Single => (1e-4, 1e-3),
    }
}

struct Case {
    strategy: Strategy,
    n: usize,
    h: usize,
    p: usize,
    mask: MaskSpec,
}

fn cases(args: &VerifyArgs) -> Result<Vec<Case>, CliError> {
    let p_set = match &args.p {
        Some(raw) => crate::opts::parse_list::<usize>(raw, "processor count")?,
        None => P_SET.to_vec(),
    };
    let mut out = Vec::new();
    for strategy in Strategy::ALL {
        if args.strategy.is_some_and(|s| s != strategy) {
            continue;
        }
        for &p in &p_set {
            for n in N_SET.into_iter().filter(|&n| n <= args.max_n) {
                for h in H_SET {
                    for mask in [MaskSpec::None, MaskSpec::Causal] {
                        let cfg = DistAttnConfig::new(strategy, n, h, p).with_mask(mask.clone());
                        if cfg.validate().is_ok() {
                            out.push(Case { strategy, n, h, p, mask });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

struct Outcome {
    fwd_err: f64,
    grad_err: f64,
    ledger_ok: bool,
}

fn check<T: Scalar>(case: &Case, seed: u64, inject: bool) -> Result<Outcome, CliError> {
    let scale = 1.0 / (case.h as f64).sqrt();
    let cfg = DistAttnConfig::new(case.strategy, case.n, case.h, case.p)
        .with_mask(case.mask.clone())
        .with_scale(scale)
        .with_precision(T::PRECISION);
    let x = GlobalInputs::<T>::random(case.n, case.h, seed);
    let r = simulate(&cfg, &x, Pass::ForwardBackward)?;

    // the oracle runs in double precision on the same (rounded) inputs
    let (q, k, v, d_out) = (x.q.cast::<f64>(), x.k.cast::<f64>(), x.v.cast::<f64>(), x.d_out.cast::<f64>());
    let o = reference_attention(&q, &k, &v, &case.mask, scale)?;
    let g = reference_attention_grad(&q, &k, &v, &case.mask, scale, &d_out)?;
    let got = r.grads.as_ref().expect("backward requested");
    let fwd_err = r.output.cast::<f64>().max_rel_err(&o)?;
    let grad_err = [
        got.dq.cast::<f64>().max_rel_err(&g.dq)?,
        got.dk.cast::<f64>().max_rel_err(&g.dk)?,
        got.dv.cast::<f64>().max_rel_err(&g.dv)?,
    ]
    .into_iter()
    .fold(0.0, f64::max);

    let mut ledger = r.ledger;
    if inject {
        let at = ProcCoord::new(0, 0);
        ledger.charge_send(at, Phase::AttentionFwd, "injected", 1);
    }
    let ledger_ok = ledger.is_conserved() && reconcile(&ledger, &cfg, Pass::ForwardBackward)?.all_match;
    Ok(Outcome {
        fwd_err,
        grad_err,
        ledger_ok,
    })
}

pub fn run(args: &VerifyArgs) -> Result<(), CliError> {
    let precision = precision()?;
    let (fwd_tol, grad_tol) = tolerances(precision);
    let cases = cases(args)?;
    let mut report = String::new();
    writeln!(
        report,
        "# attn2d verify: {} cases, {} precision, tolerances fwd {fwd_tol:e} grad {grad_tol:e}",
        cases.len(),
        precision.as_str()
    )
    .expect("write to string");
    writeln!(report, "{:<10} {:>4} {:>3} {:>4} {:<7} {:>10} {:>10} {:<6} status", "strategy", "n", "h", "p", "mask", "fwd_err", "grad_err", "ledger")
        .expect("write to string");
    let mut failures = Vec::new();
    for (i, case) in cases.iter().enumerate() {
        let inject = args.inject_fault && i == 0;
        let out = match precision {
            Precision::Double => check::<f64>(case, args.seed, inject)?,
            Precision::Single => check::<f32>(case, args.seed, inject)?,
        };
        let ok = out.fwd_err < fwd_tol && out.grad_err < grad_tol && out.ledger_ok;
        let label = format!("{} n={} h={} p={} {}", case.strategy, case.n, case.h, case.p, case.mask.name());
        writeln!(
            report,
            "{:<10} {:>4} {:>3} {:>4} {:<7} {:>10.2e} {:>10.2e} {:<6} {}",
            case.strategy.as_str(),
            case.n,
            case.h,
            case.p,
            case.mask.name(),
            out.fwd_err,
            out.grad_err,
            if out.ledger_ok { "exact" } else { "MISMATCH" },
            if ok { "ok" } else { "FAIL" }
        )
        .expect("write to string");
        if !ok {
            failures.push(label);
        }
    }
    writeln!(report, "# {} passed, {} failed", cases.len() - failures.len(), failures.len())
        .expect("write to string");
    emit(None, &report)?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failures.join("; ")))
    }
}
