//! Regression trees grown greedily by variance reduction.
//!
//! Growth is level-wise over presorted feature columns, so one level costs a
//! single pass over every column regardless of how many nodes it holds.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf(f64),
    Split(Box<Split>),
}

/// Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: Node,
    pub right: Node,
}

impl Node {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split(s) => {
                    node = if x[s.feature] <= s.threshold { &s.left } else { &s.right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf(_) => 0,
            Node::Split(s) => 1 + s.left.depth().max(s.right.depth()),
        }
    }

    pub fn leaves(&self) -> usize {
        match self {
            Node::Leaf(_) => 1,
            Node::Split(s) => s.left.leaves() + s.right.leaves(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Minimum (weighted) number of samples per leaf.
    pub min_leaf: usize,
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    w: f64,
    sum: f64,
    min: f64,
    max: f64,
}

impl Stats {
    const EMPTY: Stats = Stats { w: 0.0, sum: 0.0, min: f64::INFINITY, max: f64::NEG_INFINITY };

    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.sum += w * y;
        self.min = self.min.min(y);
        self.max = self.max.max(y);
    }
}

struct BuildNode {
    stats: Stats,
    split: Option<(usize, f64, usize, usize)>,
}

#[derive(Clone, Copy)]
struct Scan {
    w: f64,
    sum: f64,
    last: f64,
}

const NONE: u32 = u32::MAX;

/// Presorted column-major training matrix, reusable across many fits.
pub struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    order: Vec<Vec<u32>>,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(columns: &'a [Vec<f64>]) -> Self {
        let order = columns
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { columns, order }
    }

    /// Fits one tree to `targets`; rows with weight 0 are ignored and leaf
    /// values are weighted means.
    pub fn fit(&self, targets: &[f64], weights: &[f64], params: TreeParams) -> Node {
        let n = targets.len();
        let min_leaf = params.min_leaf.max(1) as f64;
        let mut node_of = vec![NONE; n];
        let mut root = Stats::EMPTY;
        for i in 0..n {
            if weights[i] > 0.0 {
                node_of[i] = 0;
                root.add(weights[i], targets[i]);
            }
        }
        if root.w == 0.0 {
            return Node::Leaf(0.0);
        }
        let mut arena = vec![BuildNode { stats: root, split: None }];
        let mut frontier = vec![0usize];

        for _ in 0..params.max_depth {
            let mut slot = vec![usize::MAX; arena.len()];
            let mut candidates = Vec::new();
            for &id in &frontier {
                let s = arena[id].stats;
                if s.max > s.min && s.w >= 2.0 * min_leaf {
                    slot[id] = candidates.len();
                    candidates.push(id);
                }
            }
            if candidates.is_empty() {
                break;
            }
            let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; candidates.len()];
            let mut scan = vec![Scan { w: 0.0, sum: 0.0, last: 0.0 }; candidates.len()];
            for (f, col) in self.columns.iter().enumerate() {
                scan.iter_mut().for_each(|s| *s = Scan { w: 0.0, sum: 0.0, last: 0.0 });
                for &r in &self.order[f] {
                    let r = r as usize;
                    let node = node_of[r];
                    if node == NONE {
                        continue;
                    }
                    let s = slot[node as usize];
                    if s == usize::MAX {
                        continue;
                    }
                    let x = col[r];
                    let st = &mut scan[s];
                    if st.w > 0.0 && x != st.last {
                        let total = arena[candidates[s]].stats;
                        let rw = total.w - st.w;
                        if st.w >= min_leaf && rw >= min_leaf {
                            let rs = total.sum - st.sum;
                            let score = st.sum * st.sum / st.w + rs * rs / rw;
                            if best[s].map_or(true, |(b, _, _)| score > b) {
                                let mut thr = st.last + (x - st.last) / 2.0;
                                if thr >= x {
                                    thr = st.last;
                                }
                                best[s] = Some((score, f, thr));
                            }
                        }
                    }
                    st.w += weights[r];
                    st.sum += weights[r] * targets[r];
                    st.last = x;
                }
            }

            let mut children = vec![(NONE, NONE); candidates.len()];
            let mut next = Vec::new();
            for (s, &id) in candidates.iter().enumerate() {
                if let Some((_, f, thr)) = best[s] {
                    let l = arena.len();
                    arena.push(BuildNode { stats: Stats::EMPTY, split: None });
                    arena.push(BuildNode { stats: Stats::EMPTY, split: None });
                    arena[id].split = Some((f, thr, l, l + 1));
                    children[s] = (l as u32, l as u32 + 1);
                    next.extend([l, l + 1]);
                }
            }
            for r in 0..n {
                let node = node_of[r];
                if node == NONE {
                    continue;
                }
                let s = slot.get(node as usize).copied().unwrap_or(usize::MAX);
                if s == usize::MAX {
                    continue;
                }
                if let Some((_, f, thr)) = best[s] {
                    let (l, rt) = children[s];
                    let child = if self.columns[f][r] <= thr { l } else { rt };
                    node_of[r] = child;
                    arena[child as usize].stats.add(weights[r], targets[r]);
                }
            }
            frontier = next;
            if frontier.is_empty() {
                break;
            }
        }
        to_node(&arena, 0)
    }
}

fn to_node(arena: &[BuildNode], id: usize) -> Node {
    let n = &arena[id];
    match n.split {
        None => Node::Leaf(n.stats.sum / n.stats.w),
        Some((feature, threshold, l, r)) => Node::Split(Box::new(Split {
            feature,
            threshold,
            left: to_node(arena, l),
            right: to_node(arena, r),
        })),
    }
}
