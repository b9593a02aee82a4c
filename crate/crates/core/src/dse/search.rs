use std::collections::HashSet;

use super::space::Region;
use super::EvaluatedPoint;
use crate::design::DirectiveConfig;

/// Midpoint of the working sequence between two Pareto neighbours.
/// Sampled positions are dropped from the working sequence and the midpoint
/// recomputed until an unsampled one is found or the gap is empty.
pub fn midpoint_candidate(lo: usize, hi: usize, is_sampled: impl Fn(usize) -> bool) -> Option<usize> {
    if hi <= lo + 1 {
        return None;
    }
    let mut working: Vec<usize> = (lo..=hi).collect();
    while working.len() > 2 {
        let m = (working.len() - 1) / 2;
        let pos = working[m];
        if !is_sampled(pos) {
            return Some(pos);
        }
        working.remove(m);
    }
    None
}

/// Next configurations to evaluate: one midpoint per pair of Pareto members
/// that are adjacent in their region's sequence. Regions take turns in the
/// output so that a truncated list still spreads over all of them.
pub fn select_candidates(
    front: &[EvaluatedPoint],
    regions: &[Region],
    sampled: &HashSet<DirectiveConfig>,
) -> Vec<DirectiveConfig> {
    let mut per_region: Vec<Vec<DirectiveConfig>> = Vec::with_capacity(regions.len());
    let mut seen: HashSet<DirectiveConfig> = HashSet::new();
    for region in regions {
        let mut positions: Vec<usize> = front.iter().filter_map(|p| region.position_of(&p.directives)).collect();
        positions.sort_unstable();
        positions.dedup();
        let mut picks = Vec::new();
        for pair in positions.windows(2) {
            let pick = midpoint_candidate(pair[0], pair[1], |i| sampled.contains(&region.members[i].config));
            if let Some(i) = pick {
                let cfg = region.members[i].config.clone();
                if seen.insert(cfg.clone()) {
                    picks.push(cfg);
                }
            }
        }
        per_region.push(picks);
    }
    let longest = per_region.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest).flat_map(|k| per_region.iter().filter_map(move |v| v.get(k).cloned())).collect()
}
