//! Selection-bias correction for a selected sub-batch.
//!
//! Each (group, label) cell is brought to `round(p(s) p(z) N_b)` members:
//! over-full cells lose random members, under-full cells are topped up by
//! bootstrap draws from their own members. Observed labels stand in for the
//! clean ones.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::{Example, GroupStats};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellAction {
    Keep,
    Drop(usize),
    Bootstrap(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPlan {
    pub group: usize,
    pub label: usize,
    /// `C_{s,z}` in the sub-batch.
    pub present: usize,
    /// Largest-remainder rounding of `p(s) p(z) N_b` over all cells.
    pub expected: usize,
    /// Count after moving the quota of empty cells to the others.
    pub target: usize,
    pub action: CellAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RebalancePlan {
    pub size: usize,
    pub cells: Vec<CellPlan>,
}

impl RebalancePlan {
    pub fn cell(&self, group: usize, label: usize) -> Option<&CellPlan> {
        self.cells.iter().find(|c| c.group == group && c.label == label)
    }
}

/// Rounds `quotas` to integers summing to `total`, handing leftover units to
/// the largest fractional parts (ties to the lower index).
pub fn largest_remainder(quotas: &[f64], total: usize) -> Vec<usize> {
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.max(0.0).floor() as usize).collect();
    let frac = |i: usize| quotas[i].max(0.0) - counts[i] as f64;
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| frac(b).total_cmp(&frac(a)).then(a.cmp(&b)));
    let assigned: usize = counts.iter().sum();
    if assigned <= total {
        for &i in order.iter().cycle().take(total - assigned) {
            counts[i] += 1;
        }
    } else {
        let mut excess = assigned - total;
        for &i in order.iter().rev().cycle() {
            if excess == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                excess -= 1;
            }
        }
    }
    counts
}

/// Plans cell targets for a sub-batch described by `(group, label)` keys.
pub fn plan_rebalance(keys: &[(usize, usize)], group_probs: &[f64], label_probs: &[f64]) -> Result<RebalancePlan> {
    let n = keys.len();
    if n == 0 {
        return Err(Error::input("sub-batch is empty"));
    }
    let (ng, nk) = (group_probs.len(), label_probs.len());
    let mut present = vec![0usize; ng * nk];
    for &(s, z) in keys {
        if s >= ng || z >= nk {
            return Err(Error::input(format!(
                "cell ({s}, {z}) outside {ng} groups x {nk} labels"
            )));
        }
        present[s * nk + z] += 1;
    }
    let quotas: Vec<f64> = (0..ng * nk)
        .map(|c| group_probs[c / nk] * label_probs[c % nk] * n as f64)
        .collect();
    let expected = largest_remainder(&quotas, n);

    let live_quota: f64 = (0..quotas.len()).filter(|&c| present[c] > 0).map(|c| quotas[c]).sum();
    let targets = if (0..quotas.len()).all(|c| present[c] > 0 || expected[c] == 0) {
        expected.clone()
    } else if live_quota > 0.0 {
        let scaled: Vec<f64> = (0..quotas.len())
            .map(|c| if present[c] > 0 { quotas[c] * n as f64 / live_quota } else { 0.0 })
            .collect();
        largest_remainder(&scaled, n)
    } else {
        // no present cell has positive mass: keep the batch composition
        present.clone()
    };

    let cells = (0..ng * nk)
        .map(|c| {
            let (p, t) = (present[c], targets[c]);
            CellPlan {
                group: c / nk,
                label: c % nk,
                present: p,
                expected: expected[c],
                target: t,
                action: match p.cmp(&t) {
                    std::cmp::Ordering::Greater => CellAction::Drop(p - t),
                    std::cmp::Ordering::Less => CellAction::Bootstrap(t - p),
                    std::cmp::Ordering::Equal => CellAction::Keep,
                },
            }
        })
        .collect();
    Ok(RebalancePlan { size: n, cells })
}

/// Applies a plan, returning indices into the sub-batch. Surviving members
/// keep their input order; bootstrap copies follow in cell order.
pub fn rebalance_indices<R: Rng + ?Sized>(
    keys: &[(usize, usize)],
    group_probs: &[f64],
    label_probs: &[f64],
    rng: &mut R,
) -> Result<(Vec<usize>, RebalancePlan)> {
    let plan = plan_rebalance(keys, group_probs, label_probs)?;
    let nk = label_probs.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); plan.cells.len()];
    for (i, &(s, z)) in keys.iter().enumerate() {
        members[s * nk + z].push(i);
    }
    let mut keep = vec![true; keys.len()];
    let mut extra = Vec::new();
    for (cell, idx) in plan.cells.iter().zip(&members) {
        match cell.action {
            CellAction::Keep => {}
            CellAction::Drop(k) => {
                let mut pool = idx.clone();
                pool.shuffle(rng);
                for &i in &pool[..k] {
                    keep[i] = false;
                }
            }
            CellAction::Bootstrap(k) => {
                if idx.is_empty() {
                    continue;
                }
                extra.extend((0..k).map(|_| idx[rng.random_range(0..idx.len())]));
            }
        }
    }
    let mut out: Vec<usize> = (0..keys.len()).filter(|&i| keep[i]).collect();
    out.extend(extra);
    Ok((out, plan))
}

/// Rebalances `sub_batch` toward `p(s) p(z) N_b` using global statistics.
pub fn rebalance(sub_batch: &[Example], stats: &GroupStats, seed: u64) -> Result<(Vec<Example>, RebalancePlan)> {
    let keys: Vec<(usize, usize)> = sub_batch.iter().map(|e| (e.s, e.y)).collect();
    let mut rng = stream(seed, Stream::Rebalance);
    let (idx, plan) = rebalance_indices(&keys, &stats.group_probs, &stats.label_probs, &mut rng)?;
    Ok((idx.into_iter().map(|i| sub_batch[i].clone()).collect(), plan))
}
