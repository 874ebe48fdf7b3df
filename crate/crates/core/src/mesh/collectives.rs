//! Ring collectives within a group of processors.

use crate::error::{Error, Result};
use crate::mesh::grid::ProcCoord;
use crate::mesh::payload::Shardable;
use crate::mesh::spmd::Comm;
use crate::scalar::Scalar;

fn position(at: ProcCoord, group: &[ProcCoord]) -> Result<usize> {
    group
        .iter()
        .position(|&g| g == at)
        .ok_or_else(|| Error::Config(format!("{at} is not a member of the group {group:?}")))
}

/// Ring all-gather. Returns every member's shard, in group order.
///
/// Each member sends and receives `(g - 1)` shards.
pub async fn all_gather<T: Scalar, S: Shardable<T>>(
    comm: &Comm<T>,
    shard: S,
    group: &[ProcCoord],
    op: &str,
) -> Result<Vec<S>> {
    let g = group.len();
    let m = position(comm.coord(), group)?;
    let right = group[(m + 1) % g];
    let left = group[(m + g - 1) % g];
    let mut blocks: Vec<Option<S>> = vec![None; g];
    blocks[m] = Some(shard.clone());
    let mut current = shard;
    for step in 1..g {
        current = comm.send_recv(current, right, left, op).await?;
        blocks[(m + g - step) % g] = Some(current.clone());
    }
    Ok(blocks.into_iter().map(|b| b.expect("every slot filled")).collect())
}

/// Checks that `slices` partition `0..rows` into equally sized parts.
pub fn check_partition(slices: &[Vec<usize>], rows: usize) -> Result<()> {
    let mut seen = vec![false; rows];
    for s in slices {
        for &i in s {
            if i >= rows || seen[i] {
                return Err(Error::Layout(format!(
                    "row {i} is out of range or assigned twice"
                )));
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|&x| !x) {
        return Err(Error::Layout(format!("row {i} is not assigned to any member")));
    }
    if slices.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(Error::Layout("slices must have equal sizes".into()));
    }
    Ok(())
}

/// Ring reduce-scatter. Member `k` of `group` ends with `slices[k]` of the
/// reduction of every member's `data`.
///
/// At each of the `g - 1` steps a member passes its running slice to the
/// left and folds the slice arriving from the right into its own rows via
/// `reducer(local, incoming)`.
pub async fn reduce_scatter<T, S, R>(
    comm: &Comm<T>,
    data: &S,
    group: &[ProcCoord],
    slices: &[Vec<usize>],
    reducer: R,
    op: &str,
) -> Result<S>
where
    T: Scalar,
    S: Shardable<T>,
    R: Fn(&S, &S) -> Result<S>,
{
    let g = group.len();
    if slices.len() != g {
        return Err(Error::Layout(format!(
            "{} slices for a group of {g}",
            slices.len()
        )));
    }
    check_partition(slices, data.rows())?;
    let m = position(comm.coord(), group)?;
    let left = group[(m + g - 1) % g];
    let right = group[(m + 1) % g];
    let mut acc = data.select_rows(&slices[(m + 1) % g]);
    for i in 2..=g {
        let incoming = comm.send_recv(acc, left, right, op).await?;
        acc = reducer(&data.select_rows(&slices[(m + i) % g]), &incoming)?;
    }
    Ok(acc)
}

/// Cyclic slices `{k + j·g}` of `rows` rows for a group of `g`.
pub fn cyclic_slices(rows: usize, g: usize) -> Vec<Vec<usize>> {
    (0..g).map(|k| (k..rows).step_by(g).collect()).collect()
}
