//! Ultrametric dendrogram over network nodes.
//!
//! The hierarchical distance h(a, b) is the merge height of the lowest
//! common ancestor of leaves a and b. Keeping the hierarchy as a rooted
//! tree with strictly increasing heights toward the root makes the strong
//! triangle inequality `h(a,b) <= max(h(a,c), h(b,c))` hold by
//! construction, so every edit the fitter performs stays inside the valid
//! set.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Admissible merge heights: `levels` evenly spaced points i/(L+1),
/// i = 1..=L, all strictly inside (0, 1) so the deterrence f stays finite
/// and positive.
pub fn default_ladder(levels: usize) -> Vec<f64> {
    (1..=levels).map(|i| i as f64 / (levels + 1) as f64).collect()
}

pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.is_empty() {
        return Err(Error::Validation("level ladder must be non-empty".into()));
    }
    for &l in ladder {
        if !l.is_finite() || l <= 0.0 || l >= 1.0 {
            return Err(Error::Validation(format!(
                "ladder level {l} outside the open interval (0, 1)"
            )));
        }
    }
    if ladder.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("ladder levels must be strictly ascending".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Vertex {
    parent: Option<usize>,
    children: Vec<usize>,
    height: f64,
}

impl Vertex {
    fn leaf() -> Self {
        Vertex {
            parent: None,
            children: Vec::new(),
            height: 0.0,
        }
    }
}

/// Rooted dendrogram whose leaf set is the node index range `0..n`.
///
/// Arena slots `0..n` are the leaves; internal vertices live above and are
/// recycled through a free list as the fitter restructures the tree.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    n_leaves: usize,
    verts: Vec<Vertex>,
    root: usize,
    ladder: Vec<f64>,
    free: Vec<usize>,
}

impl Hierarchy {
    pub(crate) fn with_leaves(n: usize, ladder: Vec<f64>) -> Self {
        Hierarchy {
            n_leaves: n,
            verts: (0..n).map(|_| Vertex::leaf()).collect(),
            root: 0,
            ladder,
            free: Vec::new(),
        }
    }

    /// Single internal vertex at `level` holding every leaf (or a bare
    /// leaf for n = 1): the structureless hierarchy with h(a,b) = level
    /// for all pairs.
    pub fn flat(n: usize, level: f64, ladder: &[f64]) -> Result<Self> {
        validate_ladder(ladder)?;
        if n == 0 {
            return Err(Error::Validation("hierarchy needs at least one node".into()));
        }
        if !ladder.contains(&level) {
            return Err(Error::Validation(format!("level {level} is not on the ladder")));
        }
        let mut h = Self::with_leaves(n, ladder.to_vec());
        if n == 1 {
            return Ok(h);
        }
        let root = h.alloc_internal(level, (0..n).collect());
        h.root = root;
        Ok(h)
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        v < self.n_leaves
    }

    /// Merge height of an internal vertex; leaves sit at height 0.
    pub fn height(&self, v: usize) -> f64 {
        self.verts[v].height
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.verts[v].parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.verts[v].children
    }

    /// Live internal vertices, ascending slot order.
    pub fn internal_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        (self.n_leaves..self.verts.len()).filter(|&v| !self.verts[v].children.is_empty())
    }

    /// Hierarchical distance h(a, b): height of the lowest common
    /// ancestor, 0 when a = b.
    pub fn height_of_pair(&self, a: usize, b: usize) -> Result<f64> {
        if a >= self.n_leaves || b >= self.n_leaves {
            return Err(Error::Validation(format!(
                "unknown node index {} (network has {} nodes)",
                a.max(b),
                self.n_leaves
            )));
        }
        if a == b {
            return Ok(0.0);
        }
        let mut chain = Vec::new();
        let mut v = a;
        loop {
            chain.push(v);
            match self.verts[v].parent {
                Some(p) => v = p,
                None => break,
            }
        }
        let mut u = b;
        loop {
            if chain.contains(&u) {
                return Ok(self.verts[u].height);
            }
            u = self.verts[u].parent.ok_or_else(|| {
                Error::Validation("leaves do not share a root; hierarchy is corrupt".into())
            })?;
        }
    }

    /// All leaf indices in the subtree rooted at `v`.
    pub fn leaves_under(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(x) = stack.pop() {
            if self.is_leaf(x) {
                out.push(x);
            } else {
                stack.extend_from_slice(&self.verts[x].children);
            }
        }
        out
    }

    /// Dense n x n matrix of pairwise levels, zero diagonal.
    pub fn level_matrix(&self) -> Vec<f64> {
        let n = self.n_leaves;
        let mut m = vec![0.0; n * n];
        // post-order: children before parents, accumulating leaf lists
        let order = self.post_order();
        let mut leaf_sets: Vec<Vec<usize>> = vec![Vec::new(); self.verts.len()];
        for &v in &order {
            if self.is_leaf(v) {
                leaf_sets[v] = vec![v];
                continue;
            }
            let h = self.verts[v].height;
            let kids = &self.verts[v].children;
            for i in 0..kids.len() {
                for j in (i + 1)..kids.len() {
                    for &a in &leaf_sets[kids[i]] {
                        for &b in &leaf_sets[kids[j]] {
                            m[a * n + b] = h;
                            m[b * n + a] = h;
                        }
                    }
                }
            }
            let mut merged = Vec::new();
            for &k in kids {
                merged.append(&mut leaf_sets[k]);
            }
            leaf_sets[v] = merged;
        }
        m
    }

    fn post_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.verts.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend_from_slice(&self.verts[v].children);
        }
        order.reverse();
        order
    }

    /// Sorted distinct internal heights.
    pub fn distinct_heights(&self) -> Vec<f64> {
        let mut hs: Vec<f64> = self.internal_vertices().map(|v| self.verts[v].height).collect();
        hs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        hs.dedup();
        hs
    }

    /// Community partition at level `t`: a and b share a community iff
    /// h(a,b) <= t.
    pub fn cut_at_level(&self, t: f64) -> Result<Partition> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Validation(format!("cut level {t} outside [0, 1]")));
        }
        let mut communities: Vec<Vec<usize>> = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) {
                communities.push(vec![v]);
            } else if self.verts[v].height <= t {
                communities.push(self.leaves_under(v));
            } else {
                stack.extend_from_slice(&self.verts[v].children);
            }
        }
        let mut labels = vec![0u32; self.n_leaves];
        communities.sort_by_key(|c| *c.iter().min().unwrap());
        for (id, comm) in communities.iter().enumerate() {
            for &a in comm {
                labels[a] = id as u32;
            }
        }
        Ok(Partition { level: t, labels })
    }

    /// Cut yielding exactly `k` communities when some level does; when
    /// heights are tied so no level gives exactly k, returns the cut with
    /// the smallest community count above k and marks it inexact.
    pub fn cut_to_k(&self, k: usize) -> Result<CutResult> {
        let n = self.n_leaves;
        if k == 0 || k > n {
            return Err(Error::Validation(format!(
                "community count {k} out of range 1..={n}"
            )));
        }
        let mut candidates = vec![0.0];
        candidates.extend(self.distinct_heights());
        // community count is strictly decreasing across distinct heights,
        // so scan from the coarsest cut down
        let mut best_over: Option<(f64, usize)> = None;
        for &t in candidates.iter().rev() {
            let count = self.count_at_level(t);
            if count == k {
                return Ok(CutResult {
                    partition: self.cut_at_level(t)?,
                    exact: true,
                });
            }
            if count > k {
                best_over = Some((t, count));
                break; // counts only grow from here on down
            }
        }
        let (t, _) = best_over.expect("count at level 0 is n >= k");
        Ok(CutResult {
            partition: self.cut_at_level(t)?,
            exact: false,
        })
    }

    fn count_at_level(&self, t: f64) -> usize {
        let mut count = 0;
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) || self.verts[v].height <= t {
                count += 1;
            } else {
                stack.extend_from_slice(&self.verts[v].children);
            }
        }
        count
    }

    /// Structural soundness: tree shape, strict height monotonicity,
    /// ladder membership, every leaf reachable exactly once.
    pub fn validate(&self) -> Result<()> {
        let mut seen_leaves = vec![false; self.n_leaves];
        let mut visited = vec![false; self.verts.len()];
        if self.verts[self.root].parent.is_some() {
            return Err(Error::Validation("root has a parent".into()));
        }
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if visited[v] {
                return Err(Error::Validation(format!("vertex {v} visited twice")));
            }
            visited[v] = true;
            if self.is_leaf(v) {
                seen_leaves[v] = true;
                continue;
            }
            let vert = &self.verts[v];
            if vert.children.len() < 2 {
                return Err(Error::Validation(format!(
                    "internal vertex {v} has {} children",
                    vert.children.len()
                )));
            }
            if !self.ladder.contains(&vert.height) {
                return Err(Error::Validation(format!(
                    "height {} of vertex {v} is not on the ladder",
                    vert.height
                )));
            }
            for &c in &vert.children {
                if self.verts[c].parent != Some(v) {
                    return Err(Error::Validation(format!(
                        "child {c} of {v} has inconsistent parent pointer"
                    )));
                }
                if self.verts[c].height >= vert.height {
                    return Err(Error::Validation(format!(
                        "child {c} (height {}) not strictly below parent {v} (height {})",
                        self.verts[c].height, vert.height
                    )));
                }
                stack.push(c);
            }
        }
        if let Some(missing) = seen_leaves.iter().position(|s| !s) {
            return Err(Error::Validation(format!("leaf {missing} not in the tree")));
        }
        Ok(())
    }

    // ---- mutation primitives used by the fitter ----

    pub(crate) fn slot_count(&self) -> usize {
        self.verts.len()
    }

    pub(crate) fn set_root(&mut self, v: usize) {
        self.root = v;
    }

    pub(crate) fn alloc_internal(&mut self, height: f64, children: Vec<usize>) -> usize {
        debug_assert!(children.len() >= 2);
        let v = match self.free.pop() {
            Some(slot) => {
                self.verts[slot] = Vertex {
                    parent: None,
                    children: Vec::new(),
                    height,
                };
                slot
            }
            None => {
                self.verts.push(Vertex {
                    parent: None,
                    children: Vec::new(),
                    height,
                });
                self.verts.len() - 1
            }
        };
        for &c in &children {
            self.verts[c].parent = Some(v);
        }
        self.verts[v].children = children;
        v
    }

    fn release(&mut self, v: usize) {
        debug_assert!(!self.is_leaf(v));
        self.verts[v] = Vertex {
            parent: None,
            children: Vec::new(),
            height: f64::NAN,
        };
        self.free.push(v);
    }

    pub(crate) fn set_height(&mut self, v: usize, height: f64) {
        debug_assert!(!self.is_leaf(v));
        self.verts[v].height = height;
    }

    /// Detaches the subtree at `s` from its parent, splicing the parent
    /// out if it would be left with a single child.
    pub(crate) fn detach(&mut self, s: usize) {
        let v = self.verts[s].parent.expect("detach requires a parent");
        self.verts[v].children.retain(|&c| c != s);
        self.verts[s].parent = None;
        if self.verts[v].children.len() == 1 {
            let only = self.verts[v].children[0];
            match self.verts[v].parent {
                Some(p) => {
                    let pos = self.verts[p].children.iter().position(|&c| c == v).unwrap();
                    self.verts[p].children[pos] = only;
                    self.verts[only].parent = Some(p);
                }
                None => {
                    self.verts[only].parent = None;
                    self.root = only;
                }
            }
            self.release(v);
        }
    }

    /// Creates a new vertex at `level` holding `t` and the detached
    /// subtree `s`, occupying t's former position (or the root).
    pub(crate) fn merge_with(&mut self, s: usize, t: usize, level: f64) -> usize {
        debug_assert!(self.verts[s].parent.is_none());
        let t_parent = self.verts[t].parent;
        let w = self.alloc_internal(level, vec![t, s]);
        match t_parent {
            Some(p) => {
                let pos = self.verts[p].children.iter().position(|&c| c == t).unwrap();
                self.verts[p].children[pos] = w;
                self.verts[w].parent = Some(p);
            }
            None => {
                self.root = w;
            }
        }
        w
    }

    /// Attaches the detached subtree `s` as an extra child of the
    /// internal vertex `t`.
    pub(crate) fn merge_into(&mut self, s: usize, t: usize) {
        debug_assert!(self.verts[s].parent.is_none());
        debug_assert!(!self.is_leaf(t));
        self.verts[t].children.push(s);
        self.verts[s].parent = Some(t);
    }
}

/// Community assignment produced by cutting a hierarchy.
///
/// Labels are contiguous from 0, ordered by each community's smallest
/// node index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub level: f64,
    labels: Vec<u32>,
}

impl Partition {
    /// Builds a partition from raw labels, canonicalizing the label ids.
    pub fn from_labels(level: f64, raw: &[u32]) -> Self {
        let mut mapping: Vec<Option<u32>> = Vec::new();
        let mut next = 0u32;
        let mut labels = Vec::with_capacity(raw.len());
        for &l in raw {
            let idx = l as usize;
            if idx >= mapping.len() {
                mapping.resize(idx + 1, None);
            }
            let id = *mapping[idx].get_or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
            labels.push(id);
        }
        Partition { level, labels }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn community_count(&self) -> usize {
        self.labels.iter().map(|&l| l as usize).max().map_or(0, |m| m + 1)
    }

    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.community_count()];
        for (node, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(node);
        }
        out
    }

    /// True when every community of `self` lies inside a single community
    /// of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.labels.len() != coarser.labels.len() {
            return false;
        }
        let mut image: Vec<Option<u32>> = vec![None; self.community_count()];
        for (node, &l) in self.labels.iter().enumerate() {
            match image[l as usize] {
                None => image[l as usize] = Some(coarser.labels[node]),
                Some(t) if t == coarser.labels[node] => {}
                Some(_) => return false,
            }
        }
        true
    }
}

/// Result of [`Hierarchy::cut_to_k`]; `exact` is false when no level
/// yields exactly k communities and a finer cut was returned instead.
#[derive(Debug, Clone)]
pub struct CutResult {
    pub partition: Partition,
    pub exact: bool,
}

/// A triple or shape defect found in a pairwise level matrix.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UltrametricViolation {
    #[error("matrix is asymmetric at pair ({a}, {b})")]
    Asymmetric { a: usize, b: usize },
    #[error("diagonal entry {a} is nonzero")]
    NonzeroDiagonal { a: usize },
    #[error("off-diagonal entry ({a}, {b}) is not positive")]
    NonpositiveOffDiagonal { a: usize, b: usize },
    #[error("triple ({a}, {b}, {c}) violates the ultrametric triangle inequality")]
    Triangle { a: usize, b: usize, c: usize },
}

/// Checks that a full pairwise level matrix is a valid hierarchical
/// distance: symmetric, zero diagonal, positive off-diagonal, and
/// `h(a,b) <= max(h(a,c), h(b,c))` on every triple. Reports the first
/// violation in scan order.
pub fn validate_ultrametric(levels: &[f64], n: usize) -> std::result::Result<(), UltrametricViolation> {
    assert_eq!(levels.len(), n * n, "level matrix must be n x n");
    for a in 0..n {
        if levels[a * n + a] != 0.0 {
            return Err(UltrametricViolation::NonzeroDiagonal { a });
        }
        for b in (a + 1)..n {
            if levels[a * n + b] != levels[b * n + a] {
                return Err(UltrametricViolation::Asymmetric { a, b });
            }
            if !(levels[a * n + b] > 0.0) {
                return Err(UltrametricViolation::NonpositiveOffDiagonal { a, b });
            }
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                let x = levels[a * n + b];
                let y = levels[a * n + c];
                let z = levels[b * n + c];
                if x > y.max(z) || y > x.max(z) || z > x.max(y) {
                    return Err(UltrametricViolation::Triangle { a, b, c });
                }
            }
        }
    }
    Ok(())
}

/// Uniformly seeded random valid hierarchy: recursive random two-block
/// splits with heights drawn from the admissible ladder range, collapsing
/// to a flat merge at the lowest level.
pub fn random_hierarchy(n: usize, ladder: &[f64], seed: u64) -> Result<Hierarchy> {
    validate_ladder(ladder)?;
    if n == 0 {
        return Err(Error::Validation("hierarchy needs at least one node".into()));
    }
    let mut h = Hierarchy::with_leaves(n, ladder.to_vec());
    if n == 1 {
        return Ok(h);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..n).collect();
    let top = ladder.len() - 1;
    let root = build_random(&mut h, &all, top, &mut rng);
    h.root = root;
    Ok(h)
}

fn build_random(h: &mut Hierarchy, nodes: &[usize], hi_idx: usize, rng: &mut ChaCha8Rng) -> usize {
    if nodes.len() == 1 {
        return nodes[0];
    }
    let ladder = h.ladder.clone();
    let j = rng.random_range(0..=hi_idx);
    if j == 0 {
        return h.alloc_internal(ladder[0], nodes.to_vec());
    }
    loop {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for &x in nodes {
            if rng.random::<bool>() {
                left.push(x);
            } else {
                right.push(x);
            }
        }
        if !left.is_empty() && !right.is_empty() {
            let a = build_random(h, &left, j - 1, rng);
            let b = build_random(h, &right, j - 1, rng);
            return h.alloc_internal(ladder[j], vec![a, b]);
        }
    }
}

/// Adjusted Rand index between two partitions of the same node set:
/// 1 for identical partitions, 0 expected for independent random ones.
pub fn partition_agreement(p: &Partition, q: &Partition) -> Result<f64> {
    if p.labels.len() != q.labels.len() {
        return Err(Error::Validation(format!(
            "partitions cover different node sets ({} vs {} nodes)",
            p.labels.len(),
            q.labels.len()
        )));
    }
    let n = p.labels.len();
    if n == 0 {
        return Ok(1.0);
    }
    let kp = p.community_count();
    let kq = q.community_count();
    let mut joint = vec![0u64; kp * kq];
    let mut rows = vec![0u64; kp];
    let mut cols = vec![0u64; kq];
    for i in 0..n {
        let (a, b) = (p.labels[i] as usize, q.labels[i] as usize);
        joint[a * kq + b] += 1;
        rows[a] += 1;
        cols[b] += 1;
    }
    let c2 = |x: u64| (x * x.saturating_sub(1)) as f64 / 2.0;
    let sum_ij: f64 = joint.iter().map(|&x| c2(x)).sum();
    let sum_a: f64 = rows.iter().map(|&x| c2(x)).sum();
    let sum_b: f64 = cols.iter().map(|&x| c2(x)).sum();
    let total = c2(n as u64);
    let expected = sum_a * sum_b / total;
    let denom = 0.5 * (sum_a + sum_b) - expected;
    if denom == 0.0 {
        // both trivial in the same way (all singletons or all one block)
        return Ok(if p.labels == q.labels { 1.0 } else { 0.0 });
    }
    Ok((sum_ij - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 3-leaf tree: {a, b} merged at 0.3, c joining at 0.7.
    fn three_leaf() -> Hierarchy {
        let ladder = vec![0.3, 0.5, 0.7];
        let mut h = Hierarchy::with_leaves(3, ladder);
        let ab = h.alloc_internal(0.3, vec![0, 1]);
        let root = h.alloc_internal(0.7, vec![ab, 2]);
        h.root = root;
        h
    }

    #[test]
    fn lca_heights() {
        let h = three_leaf();
        assert_eq!(h.height_of_pair(0, 0).unwrap(), 0.0);
        assert_eq!(h.height_of_pair(0, 1).unwrap(), 0.3);
        assert_eq!(h.height_of_pair(0, 2).unwrap(), 0.7);
        // two-largest-equal rule
        assert_eq!(h.height_of_pair(1, 2).unwrap(), 0.7);
    }

    #[test]
    fn unknown_node_rejected() {
        let h = three_leaf();
        assert!(h.height_of_pair(0, 9).is_err());
    }

    #[test]
    fn level_matrix_matches_pairwise() {
        let h = three_leaf();
        let m = h.level_matrix();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(m[a * 3 + b], h.height_of_pair(a, b).unwrap());
            }
        }
    }

    #[test]
    fn validate_accepts_two_largest_equal() {
        let m = vec![0.0, 0.2, 0.5, 0.2, 0.0, 0.5, 0.5, 0.5, 0.0];
        assert!(validate_ultrametric(&m, 3).is_ok());
    }

    #[test]
    fn validate_rejects_all_different_triple() {
        let m = vec![0.0, 0.2, 0.5, 0.2, 0.0, 0.3, 0.5, 0.3, 0.0];
        assert_eq!(
            validate_ultrametric(&m, 3),
            Err(UltrametricViolation::Triangle { a: 0, b: 1, c: 2 })
        );
    }

    #[test]
    fn validate_single_pair_ok() {
        let m = vec![0.0, 0.4, 0.4, 0.0];
        assert!(validate_ultrametric(&m, 2).is_ok());
    }

    #[test]
    fn cut_extremes() {
        let h = three_leaf();
        let top = h.cut_at_level(1.0).unwrap();
        assert_eq!(top.community_count(), 1);
        let bottom = h.cut_at_level(0.0).unwrap();
        assert_eq!(bottom.community_count(), 3);
    }

    #[test]
    fn cut_middle() {
        let h = three_leaf();
        let p = h.cut_at_level(0.5).unwrap();
        assert_eq!(p.labels(), &[0, 0, 1]);
    }

    #[test]
    fn cut_to_k_exact_and_extremes() {
        let h = three_leaf();
        assert_eq!(h.cut_to_k(1).unwrap().partition.community_count(), 1);
        let two = h.cut_to_k(2).unwrap();
        assert!(two.exact);
        assert_eq!(two.partition.labels(), &[0, 0, 1]);
        assert_eq!(h.cut_to_k(3).unwrap().partition.community_count(), 3);
        assert!(h.cut_to_k(0).is_err());
        assert!(h.cut_to_k(4).is_err());
    }

    #[test]
    fn cut_to_k_inexact_prefers_smallest_count_above_k() {
        // flat 4-leaf tree: only counts 1 and 4 are reachable
        let ladder = default_ladder(10);
        let h = Hierarchy::flat(4, ladder[4], &ladder).unwrap();
        let res = h.cut_to_k(2).unwrap();
        assert!(!res.exact);
        assert_eq!(res.partition.community_count(), 4);
    }

    #[test]
    fn random_hierarchy_is_deterministic_and_valid() {
        let ladder = default_ladder(10);
        for seed in 0..20 {
            let a = random_hierarchy(7, &ladder, seed).unwrap();
            let b = random_hierarchy(7, &ladder, seed).unwrap();
            a.validate().unwrap();
            assert_eq!(a.level_matrix(), b.level_matrix());
            validate_ultrametric(&a.level_matrix(), 7).unwrap();
        }
    }

    #[test]
    fn random_hierarchy_small_counts() {
        let ladder = default_ladder(10);
        let h1 = random_hierarchy(1, &ladder, 3).unwrap();
        assert_eq!(h1.internal_vertices().count(), 0);
        let h2 = random_hierarchy(2, &ladder, 3).unwrap();
        assert_eq!(h2.internal_vertices().count(), 1);
        assert!(ladder.contains(&h2.height_of_pair(0, 1).unwrap()));
        assert!(random_hierarchy(3, &[], 0).is_err());
    }

    #[test]
    fn random_hierarchy_uses_every_ladder_level() {
        let ladder = default_ladder(5);
        let mut seen = vec![false; ladder.len()];
        for seed in 0..400 {
            let h = random_hierarchy(6, &ladder, seed).unwrap();
            for v in h.internal_vertices() {
                let idx = ladder.iter().position(|&l| l == h.height(v)).unwrap();
                seen[idx] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "levels seen: {seen:?}");
    }

    #[test]
    fn agreement_identity_and_permutation() {
        let p = Partition::from_labels(0.5, &[0, 0, 1, 1, 2]);
        assert_eq!(partition_agreement(&p, &p).unwrap(), 1.0);
        let q = Partition::from_labels(0.5, &[2, 2, 0, 0, 1]);
        assert_eq!(partition_agreement(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn agreement_singletons_vs_single_block() {
        // frozen from an independent adjusted-Rand computation
        let p = Partition::from_labels(0.0, &[0, 1, 2, 3]);
        let q = Partition::from_labels(1.0, &[0, 0, 0, 0]);
        assert_eq!(partition_agreement(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn agreement_partial_overlap_oracle_values() {
        // frozen from an independent adjusted-Rand computation
        let p = Partition::from_labels(0.5, &[0, 0, 1, 1]);
        let q = Partition::from_labels(0.5, &[0, 0, 1, 2]);
        let got = partition_agreement(&p, &q).unwrap();
        assert!((got - 0.5714285714285715).abs() < 1e-12, "got {got}");

        let p = Partition::from_labels(0.5, &[0, 0, 0, 1, 1, 1]);
        let q = Partition::from_labels(0.5, &[0, 0, 1, 1, 2, 2]);
        let got = partition_agreement(&p, &q).unwrap();
        assert!((got - 0.24242424242424246).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn agreement_mismatched_sets_rejected() {
        let p = Partition::from_labels(0.5, &[0, 1]);
        let q = Partition::from_labels(0.5, &[0, 1, 2]);
        assert!(partition_agreement(&p, &q).is_err());
    }

    #[test]
    fn refinement() {
        let fine = Partition::from_labels(0.2, &[0, 1, 2, 2]);
        let coarse = Partition::from_labels(0.8, &[0, 0, 1, 1]);
        assert!(fine.refines(&coarse));
        assert!(!coarse.refines(&fine));
    }
}
