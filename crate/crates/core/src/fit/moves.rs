//! Hierarchy edit moves.
//!
//! Adjusting a single pairwise level drags every related pair with it if
//! the strong triangle inequality is to survive, so the move vocabulary
//! works on the dendrogram directly: each move maps a valid hierarchy to
//! a valid hierarchy.
//!
//! At a pivot vertex V of height H the candidates are:
//! - `Reheight`: refit V's height between its children and parent;
//! - `MergeSiblings`: split two child subtrees of V off into a new lower
//!   merge (lowers their cross level below H);
//! - `JoinCluster`: push a child subtree inside an existing sibling or
//!   aunt cluster at that cluster's own height;
//! - `Hoist`: lift a child subtree up beside V (raises its cross levels
//!   from H to the grandparent height);
//! - `MergeWithAunt`: lift a child subtree out of V and pair it with an
//!   aunt subtree at a refit level.

use super::FitState;
use crate::error::Result;
use crate::model::ObjectiveKind;

use super::updates::optimal_level_value;

/// One candidate hierarchy edit. `s` and `t` are arena vertex ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Move {
    Reheight { vertex: usize, new_level: f64 },
    MergeSiblings { s: usize, t: usize, level: f64 },
    JoinCluster { s: usize, t: usize },
    Hoist { s: usize },
    MergeWithAunt { s: usize, t: usize, level: f64 },
}

impl Move {
    pub fn kind(&self) -> &'static str {
        match self {
            Move::Reheight { .. } => "reheight",
            Move::MergeSiblings { .. } => "merge-siblings",
            Move::JoinCluster { .. } => "join-cluster",
            Move::Hoist { .. } => "hoist",
            Move::MergeWithAunt { .. } => "merge-with-aunt",
        }
    }
}

/// Subtree leaf sets and ordering keys, rebuilt once per greedy step.
pub(crate) struct MoveCtx {
    pub leaf_sets: Vec<Vec<usize>>,
    pub min_leaf: Vec<usize>,
}

impl MoveCtx {
    pub(crate) fn build(state: &FitState<'_>) -> Self {
        let hier = &state.hier;
        let slots = hier.slot_count();
        let mut leaf_sets: Vec<Vec<usize>> = vec![Vec::new(); slots];
        let mut min_leaf = vec![usize::MAX; slots];
        for v in 0..hier.n_leaves() {
            leaf_sets[v] = vec![v];
            min_leaf[v] = v;
        }
        for v in hier.internal_vertices() {
            let mut leaves = hier.leaves_under(v);
            leaves.sort_unstable();
            min_leaf[v] = leaves[0];
            leaf_sets[v] = leaves;
        }
        MoveCtx { leaf_sets, min_leaf }
    }
}

/// Smallest ladder level strictly above `lo_excl` and largest strictly
/// below `hi_excl` (or the ladder top when unbounded); `None` when the
/// range holds no ladder level.
fn ladder_window(ladder: &[f64], lo_excl: f64, hi_excl: Option<f64>) -> Option<(f64, f64)> {
    let lo_idx = ladder.partition_point(|&l| l <= lo_excl);
    if lo_idx == ladder.len() {
        return None;
    }
    let hi_idx = match hi_excl {
        Some(h) => {
            let i = ladder.partition_point(|&l| l < h);
            if i == 0 {
                return None;
            }
            i - 1
        }
        None => ladder.len() - 1,
    };
    if lo_idx > hi_idx {
        return None;
    }
    Some((ladder[lo_idx], ladder[hi_idx]))
}

fn cross_pairs(sa: &[usize], sb: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sa.len() * sb.len() * 2);
    for &a in sa {
        for &b in sb {
            out.push((a, b));
            out.push((b, a));
        }
    }
    out
}

fn fitted_level(
    state: &FitState<'_>,
    pairs: &[(usize, usize)],
    bounds: (f64, f64),
    kind: ObjectiveKind,
) -> Result<Option<f64>> {
    let choice = optimal_level_value(
        state.net,
        &state.params,
        state.dist,
        pairs,
        bounds,
        state.hier.ladder(),
        kind,
    )?;
    Ok(choice.snapped)
}

/// Enumerates every candidate move pivoted at vertices of height `level`,
/// in a deterministic order keyed by smallest contained node index.
pub(crate) fn enumerate_at(
    state: &FitState<'_>,
    ctx: &MoveCtx,
    level: f64,
    kind: ObjectiveKind,
) -> Result<Vec<Move>> {
    let hier = &state.hier;
    let ladder = hier.ladder();
    let mut pivots: Vec<usize> = hier
        .internal_vertices()
        .filter(|&v| hier.height(v) == level)
        .collect();
    pivots.sort_by_key(|&v| ctx.min_leaf[v]);

    let mut moves = Vec::new();
    for v in pivots {
        let h = hier.height(v);
        let parent = hier.parent(v);
        let parent_height = parent.map(|p| hier.height(p));
        let mut kids: Vec<usize> = hier.children(v).to_vec();
        kids.sort_by_key(|&c| ctx.min_leaf[c]);

        // height refit within (max child height, parent height)
        let max_child = kids.iter().map(|&c| hier.height(c)).fold(0.0, f64::max);
        if let Some(bounds) = ladder_window(ladder, max_child, parent_height) {
            let mut pairs = Vec::new();
            for i in 0..kids.len() {
                for j in (i + 1)..kids.len() {
                    pairs.extend(cross_pairs(&ctx.leaf_sets[kids[i]], &ctx.leaf_sets[kids[j]]));
                }
            }
            if let Some(t) = fitted_level(state, &pairs, bounds, kind)? {
                if t != h {
                    moves.push(Move::Reheight { vertex: v, new_level: t });
                }
            }
        }

        // sibling splits (a binary pivot's split duplicates its reheight)
        if kids.len() >= 3 {
            for i in 0..kids.len() {
                for j in (i + 1)..kids.len() {
                    let (s, t) = (kids[i], kids[j]);
                    let floor = hier.height(s).max(hier.height(t));
                    if let Some(bounds) = ladder_window(ladder, floor, Some(h)) {
                        let pairs = cross_pairs(&ctx.leaf_sets[s], &ctx.leaf_sets[t]);
                        if let Some(lvl) = fitted_level(state, &pairs, bounds, kind)? {
                            moves.push(Move::MergeSiblings { s, t, level: lvl });
                        }
                    }
                }
            }
        }

        // joining an internal sibling at its own height
        for &s in &kids {
            for &t in &kids {
                if s == t || hier.is_leaf(t) {
                    continue;
                }
                if hier.height(s) < hier.height(t) {
                    moves.push(Move::JoinCluster { s, t });
                }
            }
        }

        // moves that lift a child out of V
        if let (Some(p), Some(ph)) = (parent, parent_height) {
            let mut aunts: Vec<usize> = hier.children(p).iter().copied().filter(|&c| c != v).collect();
            aunts.sort_by_key(|&c| ctx.min_leaf[c]);
            for &s in &kids {
                moves.push(Move::Hoist { s });
                for &t in &aunts {
                    let floor = hier.height(s).max(hier.height(t));
                    if let Some(bounds) = ladder_window(ladder, floor, Some(ph)) {
                        let pairs = cross_pairs(&ctx.leaf_sets[s], &ctx.leaf_sets[t]);
                        if let Some(lvl) = fitted_level(state, &pairs, bounds, kind)? {
                            moves.push(Move::MergeWithAunt { s, t, level: lvl });
                        }
                    }
                    if !hier.is_leaf(t) && hier.height(s) < hier.height(t) {
                        moves.push(Move::JoinCluster { s, t });
                    }
                }
            }
        }
    }
    Ok(moves)
}

/// The pairwise level changes a move would cause, as (a, b, old, new)
/// with each unordered pair listed once.
pub(crate) fn move_changes(
    state: &FitState<'_>,
    ctx: &MoveCtx,
    mv: &Move,
) -> Vec<(usize, usize, f64, f64)> {
    let hier = &state.hier;
    let mut out = Vec::new();
    let push_cross = |sa: &[usize], sb: &[usize], old: f64, new: f64, out: &mut Vec<_>| {
        if old == new {
            return;
        }
        for &a in sa {
            for &b in sb {
                out.push((a, b, old, new));
            }
        }
    };
    match *mv {
        Move::Reheight { vertex, new_level } => {
            let h = hier.height(vertex);
            let kids = hier.children(vertex);
            for i in 0..kids.len() {
                for j in (i + 1)..kids.len() {
                    push_cross(
                        &ctx.leaf_sets[kids[i]],
                        &ctx.leaf_sets[kids[j]],
                        h,
                        new_level,
                        &mut out,
                    );
                }
            }
        }
        Move::MergeSiblings { s, t, level } => {
            let h = hier.height(hier.parent(s).unwrap());
            push_cross(&ctx.leaf_sets[s], &ctx.leaf_sets[t], h, level, &mut out);
        }
        Move::JoinCluster { s, t } => {
            let v = hier.parent(s).unwrap();
            let h = hier.height(v);
            if hier.parent(t) == Some(v) {
                push_cross(&ctx.leaf_sets[s], &ctx.leaf_sets[t], h, hier.height(t), &mut out);
            } else {
                // aunt join: s leaves V entirely, then dives into t
                let p = hier.parent(v).expect("aunt join needs a grandparent");
                let ph = hier.height(p);
                let rest = v_rest(ctx, v, s);
                push_cross(&ctx.leaf_sets[s], &rest, h, ph, &mut out);
                push_cross(&ctx.leaf_sets[s], &ctx.leaf_sets[t], ph, hier.height(t), &mut out);
            }
        }
        Move::Hoist { s } => {
            let v = hier.parent(s).unwrap();
            let p = hier.parent(v).expect("hoist needs a grandparent");
            let rest = v_rest(ctx, v, s);
            push_cross(&ctx.leaf_sets[s], &rest, hier.height(v), hier.height(p), &mut out);
        }
        Move::MergeWithAunt { s, t, level } => {
            let v = hier.parent(s).unwrap();
            let p = hier.parent(v).expect("aunt merge needs a grandparent");
            let ph = hier.height(p);
            let rest = v_rest(ctx, v, s);
            push_cross(&ctx.leaf_sets[s], &rest, hier.height(v), ph, &mut out);
            push_cross(&ctx.leaf_sets[s], &ctx.leaf_sets[t], ph, level, &mut out);
        }
    }
    out
}

/// Leaves of v excluding those of the child subtree s.
fn v_rest(ctx: &MoveCtx, v: usize, s: usize) -> Vec<usize> {
    let inside = &ctx.leaf_sets[s];
    ctx.leaf_sets[v]
        .iter()
        .copied()
        .filter(|x| inside.binary_search(x).is_err())
        .collect()
}

/// Applies a move to the hierarchy. Levels snapshot must be refreshed by
/// the caller afterwards.
pub(crate) fn apply_move(state: &mut FitState<'_>, mv: &Move) {
    match *mv {
        Move::Reheight { vertex, new_level } => {
            state.hier.set_height(vertex, new_level);
        }
        Move::MergeSiblings { s, t, level } | Move::MergeWithAunt { s, t, level } => {
            state.hier.detach(s);
            state.hier.merge_with(s, t, level);
        }
        Move::JoinCluster { s, t } => {
            state.hier.detach(s);
            state.hier.merge_into(s, t);
        }
        Move::Hoist { s } => {
            let v = state.hier.parent(s).unwrap();
            let p = state.hier.parent(v).expect("hoist needs a grandparent");
            state.hier.detach(s);
            state.hier.merge_into(s, p);
        }
    }
}

/// Enumerates candidate moves at one pivot level (spec operation
/// surface). Each returned move maps a valid hierarchy to a valid one.
pub fn enumerate_moves(
    net: &crate::graph::FlowNetwork,
    params: &crate::model::ModelParams,
    hier: &crate::hierarchy::Hierarchy,
    dist: &crate::graph::DistanceMatrix,
    level: f64,
    kind: ObjectiveKind,
) -> Result<Vec<Move>> {
    let state = FitState::snapshot(net, dist, params.clone(), hier.clone(), kind);
    let ctx = MoveCtx::build(&state);
    enumerate_at(&state, &ctx, level, kind)
}
