//! Design-space pruning, region split, ordered sequences and grid sampling.

use std::collections::{BTreeMap, BTreeSet};

use super::DseError;
use crate::design::DirectiveConfig;

/// Configuration with every loop inner to the pipelined loop unrolled by 1.
/// Pipelining a loop fully unrolls the loops it contains, so configurations
/// sharing this key produce the same hardware.
pub fn equivalence_key(cfg: &DirectiveConfig) -> DirectiveConfig {
    let mut key = cfg.clone();
    if let Some(k) = cfg.pipelined_loop() {
        for u in key.unroll_factors.iter_mut().skip(k + 1) {
            *u = 1;
        }
    }
    key
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrunedSpace {
    /// One configuration per equivalence class, ascending.
    pub representatives: Vec<DirectiveConfig>,
    /// Every input configuration, grouped under its representative.
    pub classes: BTreeMap<DirectiveConfig, Vec<DirectiveConfig>>,
}

/// Collapses configurations that differ only in unroll factors of loops
/// inner to the pipelined level. The representative is the member with the
/// smallest unroll factors.
pub fn prune_design_space(points: &[DirectiveConfig]) -> PrunedSpace {
    let mut by_key: BTreeMap<DirectiveConfig, BTreeSet<DirectiveConfig>> = BTreeMap::new();
    for p in points {
        by_key.entry(equivalence_key(p)).or_default().insert(p.clone());
    }
    let mut classes = BTreeMap::new();
    for (_, members) in by_key {
        let rep = members
            .iter()
            .min_by(|a, b| a.unroll_product().cmp(&b.unroll_product()).then_with(|| a.cmp(b)))
            .expect("class is non-empty")
            .clone();
        classes.insert(rep, members.into_iter().collect());
    }
    PrunedSpace { representatives: classes.keys().cloned().collect(), classes }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMember {
    pub config: DirectiveConfig,
    pub pipeline_ordinal: usize,
    pub unroll_ordinal: usize,
}

/// All configurations sharing one array partition factor, in sequence
/// order: pipeline level ascending, then unroll factors lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub partition_factor: u32,
    pub members: Vec<RegionMember>,
}

impl Region {
    pub fn new(partition_factor: u32, mut configs: Vec<DirectiveConfig>) -> Self {
        configs.sort_by(|a, b| {
            a.pipeline_level
                .cmp(&b.pipeline_level)
                .then_with(|| a.unroll_factors.cmp(&b.unroll_factors))
        });
        configs.dedup();
        let levels: BTreeSet<u32> = configs.iter().map(|c| c.pipeline_level).collect();
        let products: BTreeSet<u64> = configs.iter().map(|c| c.unroll_product()).collect();
        let rank = |set: &BTreeSet<u64>, v: u64| set.range(..v).count();
        let levels: BTreeSet<u64> = levels.into_iter().map(u64::from).collect();
        let members = configs
            .into_iter()
            .map(|c| RegionMember {
                pipeline_ordinal: rank(&levels, c.pipeline_level as u64),
                unroll_ordinal: rank(&products, c.unroll_product()),
                config: c,
            })
            .collect();
        Self { partition_factor, members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn position_of(&self, cfg: &DirectiveConfig) -> Option<usize> {
        self.members.iter().position(|m| &m.config == cfg)
    }

    fn grid_extent(&self) -> (usize, usize) {
        let np = self.members.iter().map(|m| m.pipeline_ordinal).max().map_or(0, |v| v + 1);
        let nu = self.members.iter().map(|m| m.unroll_ordinal).max().map_or(0, |v| v + 1);
        (np, nu)
    }

    /// Sequence position of the member closest (Manhattan distance in grid
    /// ordinals) to a grid cell; ties go to the earlier position.
    fn nearest(&self, p: usize, u: usize) -> usize {
        self.members
            .iter()
            .enumerate()
            .min_by_key(|(i, m)| (m.pipeline_ordinal.abs_diff(p) + m.unroll_ordinal.abs_diff(u), *i))
            .map(|(i, _)| i)
            .expect("region is non-empty")
    }
}

/// One region per distinct partition factor, ascending.
pub fn split_regions(points: &[DirectiveConfig]) -> Vec<Region> {
    let mut groups: BTreeMap<u32, Vec<DirectiveConfig>> = BTreeMap::new();
    for p in points {
        groups.entry(p.array_partition_factor).or_default().push(p.clone());
    }
    groups.into_iter().map(|(f, cfgs)| Region::new(f, cfgs)).collect()
}

/// Grid corners and center, topped up with evenly spaced sequence positions
/// when `ceil(rate * |region|)` asks for more. Returns ascending positions.
pub fn initial_sampling(region: &Region, rate: f64) -> Result<Vec<usize>, DseError> {
    if region.is_empty() {
        return Err(DseError::EmptyRegion(region.partition_factor));
    }
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(DseError::InvalidConfig(format!("sampling rate {rate} outside (0, 1]")));
    }
    let (np, nu) = region.grid_extent();
    let (pl, pm, ph) = (0, (np - 1) / 2, np - 1);
    let (ul, um, uh) = (0, (nu - 1) / 2, nu - 1);
    let mut picks: BTreeSet<usize> = [(pl, ul), (pl, uh), (ph, ul), (ph, uh), (pm, um)]
        .into_iter()
        .map(|(p, u)| region.nearest(p, u))
        .collect();

    let len = region.len();
    let target = ((rate * len as f64).ceil() as usize).min(len);
    let mut m = target;
    while picks.len() < target {
        for i in 0..m {
            if picks.len() >= target {
                break;
            }
            let pos = if m == 1 { 0 } else { (i * (len - 1) + (m - 1) / 2) / (m - 1) };
            picks.insert(pos);
        }
        m += 1;
    }
    Ok(picks.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: u32, l: u32, u: &[u32]) -> DirectiveConfig {
        DirectiveConfig { array_partition_factor: p, pipeline_level: l, unroll_factors: u.to_vec() }
    }

    fn full_space(depth: usize) -> Vec<DirectiveConfig> {
        let mut out = Vec::new();
        for p in [1, 2, 4, 8] {
            for l in 0..=depth as u32 {
                let mut idx = vec![0usize; depth];
                loop {
                    out.push(cfg(p, l, &idx.iter().map(|&i| [1, 2, 4, 8][i]).collect::<Vec<_>>()));
                    let mut d = depth;
                    loop {
                        if d == 0 {
                            break;
                        }
                        d -= 1;
                        idx[d] += 1;
                        if idx[d] < 4 {
                            break;
                        }
                        idx[d] = 0;
                    }
                    if idx.iter().all(|&i| i == 0) {
                        break;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn outer_pipelining_collapses_inner_unrolls() {
        let pts: Vec<_> = [1, 2, 4, 8].iter().map(|&u| cfg(1, 2, &[1, u])).collect();
        let pruned = prune_design_space(&pts);
        assert_eq!(pruned.representatives, vec![cfg(1, 2, &[1, 1])]);
        assert_eq!(pruned.classes[&cfg(1, 2, &[1, 1])].len(), 4);
    }

    #[test]
    fn no_pipelining_no_pruning() {
        let pts: Vec<_> = [1, 2, 4, 8].iter().map(|&u| cfg(1, 0, &[2, u])).collect();
        assert_eq!(prune_design_space(&pts).representatives, pts);
    }

    #[test]
    fn inner_pipelining_keeps_outer_unrolls() {
        let pts: Vec<_> = [1, 2, 4, 8].iter().map(|&u| cfg(1, 1, &[u, 1])).collect();
        assert_eq!(prune_design_space(&pts).representatives.len(), 4);
    }

    #[test]
    fn pruned_space_sizes() {
        assert_eq!(prune_design_space(&full_space(1)).representatives.len(), 32);
        assert_eq!(prune_design_space(&full_space(2)).representatives.len(), 4 * (16 + 16 + 4));
        assert_eq!(prune_design_space(&full_space(3)).representatives.len(), 4 * (64 + 64 + 16 + 4));
    }

    #[test]
    fn regions_by_partition() {
        assert_eq!(split_regions(&full_space(1)).len(), 4);
        let one: Vec<_> = full_space(1).into_iter().filter(|c| c.array_partition_factor == 2).collect();
        let r = split_regions(&one);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].len(), one.len());
        assert!(split_regions(&[]).is_empty());
    }

    #[test]
    fn sequence_order() {
        let r = Region::new(1, vec![cfg(1, 1, &[1]), cfg(1, 0, &[8]), cfg(1, 0, &[2]), cfg(1, 1, &[4])]);
        let seq: Vec<_> = r.members.iter().map(|m| m.config.clone()).collect();
        assert_eq!(seq, vec![cfg(1, 0, &[2]), cfg(1, 0, &[8]), cfg(1, 1, &[1]), cfg(1, 1, &[4])]);
    }

    #[test]
    fn three_by_four_grid_corners_and_center() {
        // Depth 2, inner loop pipelined or not, outer unroll varies: levels
        // {0,1,2} x products {1,2,4,8}.
        let mut cfgs = Vec::new();
        for l in 0..3 {
            for u in [1, 2, 4, 8] {
                cfgs.push(cfg(1, l, &[u, 1]));
            }
        }
        let r = Region::new(1, cfgs);
        let picks = initial_sampling(&r, 0.01).unwrap();
        let cells: BTreeSet<(usize, usize)> =
            picks.iter().map(|&i| (r.members[i].pipeline_ordinal, r.members[i].unroll_ordinal)).collect();
        assert_eq!(cells, BTreeSet::from([(0, 0), (0, 3), (2, 0), (2, 3), (1, 1)]));
    }

    #[test]
    fn single_point_region() {
        let r = Region::new(1, vec![cfg(1, 0, &[1])]);
        assert_eq!(initial_sampling(&r, 0.5).unwrap(), vec![0]);
    }

    #[test]
    fn one_row_grid_samples_endpoints_and_middle() {
        let r = Region::new(1, [1, 2, 4, 8].iter().map(|&u| cfg(1, 0, &[u])).collect());
        assert_eq!(initial_sampling(&r, 0.1).unwrap(), vec![0, 1, 3]);
        let r = Region::new(1, (0..7).map(|l| cfg(1, l, &[1, 1, 1, 1, 1, 1, 1])).collect());
        assert_eq!(initial_sampling(&r, 0.1).unwrap(), vec![0, 3, 6]);
    }

    #[test]
    fn larger_rate_fills_evenly() {
        let r = &split_regions(&prune_design_space(&full_space(3)).representatives)[0];
        assert_eq!(r.len(), 148);
        let picks = initial_sampling(r, 0.1).unwrap();
        assert_eq!(picks.len(), 15);
        let few = initial_sampling(r, 0.02).unwrap();
        assert_eq!(few.len(), 5);
    }

    #[test]
    fn empty_region_errors() {
        let r = Region::new(4, vec![]);
        assert_eq!(initial_sampling(&r, 0.1).unwrap_err(), DseError::EmptyRegion(4));
    }
}
