//! Integer time-on-screen apportionment.
//!
//! Shares are computed with the largest-remainder (Hamilton) method in exact
//! integer arithmetic. Leftover seconds go to the largest remainders, ties to
//! the lowest ad id. Hamilton alone can give two different counts the same
//! number of seconds, so a repair pass then enforces:
//!
//! * larger count => strictly more seconds,
//! * equal counts => seconds differ by at most one,
//! * the seconds add up to the slot exactly.
//!
//! When the slot is too short to separate every distinct count, the
//! lowest-count entries are dropped until it is not.

use crate::domain::AdId;

/// Splits `slot` seconds over `(ad, count)` shares. Zero counts are ignored.
/// Returns `(ad, seconds)` in input order for every share that received time.
pub fn apportion(shares: &[(AdId, u64)], slot: u32) -> Vec<(AdId, u32)> {
    let mut kept: Vec<(AdId, u64)> = shares.iter().copied().filter(|s| s.1 > 0).collect();
    if kept.is_empty() {
        return Vec::new();
    }
    loop {
        let groups = Groups::new(&kept);
        if groups.staircase_minimum() <= slot as u64 {
            let seconds = allocate(&kept, &groups, slot);
            return kept.iter().map(|s| s.0).zip(seconds).filter(|s| s.1 > 0).collect();
        }
        let lowest = groups.counts[0];
        kept.retain(|s| s.1 != lowest);
    }
}

/// Entries grouped by equal count, ascending.
struct Groups {
    counts: Vec<u64>,
    /// Entry indices per group, sorted by ad id.
    members: Vec<Vec<usize>>,
}

impl Groups {
    fn new(shares: &[(AdId, u64)]) -> Self {
        let mut counts: Vec<u64> = shares.iter().map(|s| s.1).collect();
        counts.sort_unstable();
        counts.dedup();
        let members = counts
            .iter()
            .map(|&c| {
                let mut m: Vec<usize> = (0..shares.len()).filter(|&i| shares[i].1 == c).collect();
                m.sort_by_key(|&i| shares[i].0);
                m
            })
            .collect();
        Groups { counts, members }
    }

    fn size(&self, g: usize) -> u64 {
        self.members[g].len() as u64
    }

    /// Fewest seconds that keep groups strictly ordered: 0, 1, 2, ... per level.
    fn staircase_minimum(&self) -> u64 {
        (0..self.counts.len()).map(|g| self.size(g) * g as u64).sum()
    }
}

fn hamilton(shares: &[(AdId, u64)], slot: u32) -> Vec<u32> {
    let total: u128 = shares.iter().map(|s| s.1 as u128).sum();
    let exact: Vec<(u128, u128)> = shares
        .iter()
        .map(|s| {
            let scaled = s.1 as u128 * slot as u128;
            (scaled / total, scaled % total)
        })
        .collect();
    let mut out: Vec<u32> = exact.iter().map(|q| q.0 as u32).collect();
    let left = slot - out.iter().sum::<u32>();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| exact[b].1.cmp(&exact[a].1).then(shares[a].0.cmp(&shares[b].0)));
    for &i in order.iter().take(left as usize) {
        out[i] += 1;
    }
    out
}

fn strictly_ordered(shares: &[(AdId, u64)], seconds: &[u32]) -> bool {
    (0..shares.len()).all(|i| {
        (0..shares.len()).all(|j| match shares[i].1.cmp(&shares[j].1) {
            std::cmp::Ordering::Greater => seconds[i] > seconds[j],
            std::cmp::Ordering::Equal => seconds[i].abs_diff(seconds[j]) <= 1,
            std::cmp::Ordering::Less => true,
        })
    })
}

fn allocate(shares: &[(AdId, u64)], groups: &Groups, slot: u32) -> Vec<u32> {
    let first = hamilton(shares, slot);
    if strictly_ordered(shares, &first) {
        return first;
    }

    let levels = groups.counts.len();
    let desired: Vec<u64> = groups
        .members
        .iter()
        .map(|m| m.iter().map(|&i| first[i] as u64).sum())
        .collect();

    // Bottom-up: each level keeps as much of its Hamilton total as it can
    // while leaving room for every level above to sit strictly higher.
    let mut totals = vec![0u64; levels];
    let mut remaining = slot as u64;
    let mut floor = 0u64;
    for g in 0..levels - 1 {
        let size = groups.size(g);
        let needed = |t: u64| -> u64 {
            let top = t.div_ceil(size);
            t + (g + 1..levels)
                .map(|l| groups.size(l) * (top + (l - g) as u64))
                .sum::<u64>()
        };
        let lowest = size * floor;
        let mut lo = lowest;
        let mut hi = desired[g].max(lowest);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if needed(mid) <= remaining {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        debug_assert!(needed(lo) <= remaining);
        totals[g] = lo;
        remaining -= lo;
        floor = lo.div_ceil(size) + 1;
    }
    totals[levels - 1] = remaining;

    let mut out = vec![0u32; shares.len()];
    for (g, members) in groups.members.iter().enumerate() {
        let size = members.len() as u64;
        let (base, extra) = (totals[g] / size, totals[g] % size);
        for (rank, &i) in members.iter().enumerate() {
            out[i] = (base + u64::from((rank as u64) < extra)) as u32;
        }
    }
    out
}
