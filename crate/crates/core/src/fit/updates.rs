//! Closed-form single-block updates derived from the stationarity of the
//! poisson-normal objective, with weighted least-squares counterparts for
//! the least-squares objective. Each update is the exact minimizer of the
//! objective over its block with everything else held fixed.

use crate::error::{Error, Result};
use crate::graph::{DistanceMatrix, FlowNetwork};
use crate::hierarchy::Hierarchy;
use crate::model::{deterrence, level_for_deterrence, ModelParams, ObjectiveKind, WEIGHT_FLOOR};

fn floored(w: f64) -> f64 {
    if w < WEIGHT_FLOOR {
        WEIGHT_FLOOR
    } else {
        w
    }
}

fn block_value(num: f64, den: f64, kind: ObjectiveKind) -> f64 {
    match kind {
        ObjectiveKind::PoissonNormal => (num / den).sqrt(),
        ObjectiveKind::LeastSquares => num / den,
    }
}

pub(crate) fn updated_w_out_values(
    net: &FlowNetwork,
    dist: &DistanceMatrix,
    levels: &[f64],
    params: &ModelParams,
    kind: ObjectiveKind,
) -> Result<Vec<f64>> {
    let n = net.node_count();
    let mut out = Vec::with_capacity(n);
    for a in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for b in 0..n {
            if a == b {
                continue;
            }
            let x = params.w_in[b] * params.g[dist.bin(a, b)] * deterrence(levels[a * n + b]);
            let e = net.flow(a, b);
            match kind {
                ObjectiveKind::PoissonNormal => {
                    if x > 0.0 {
                        num += e * e / x;
                    }
                    den += x;
                }
                ObjectiveKind::LeastSquares => {
                    num += e * x;
                    den += x * x;
                }
            }
        }
        if !den.is_finite() || den <= 0.0 {
            return Err(Error::DegenerateNode {
                id: net.node(a).id.clone(),
                role: "w_out",
            });
        }
        out.push(floored(block_value(num, den, kind)));
    }
    Ok(out)
}

pub(crate) fn updated_w_in_values(
    net: &FlowNetwork,
    dist: &DistanceMatrix,
    levels: &[f64],
    params: &ModelParams,
    kind: ObjectiveKind,
) -> Result<Vec<f64>> {
    let n = net.node_count();
    let mut out = Vec::with_capacity(n);
    for b in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for a in 0..n {
            if a == b {
                continue;
            }
            let x = params.w_out[a] * params.g[dist.bin(a, b)] * deterrence(levels[a * n + b]);
            let e = net.flow(a, b);
            match kind {
                ObjectiveKind::PoissonNormal => {
                    if x > 0.0 {
                        num += e * e / x;
                    }
                    den += x;
                }
                ObjectiveKind::LeastSquares => {
                    num += e * x;
                    den += x * x;
                }
            }
        }
        if !den.is_finite() || den <= 0.0 {
            return Err(Error::DegenerateNode {
                id: net.node(b).id.clone(),
                role: "w_in",
            });
        }
        out.push(floored(block_value(num, den, kind)));
    }
    Ok(out)
}

/// New per-bin g values plus the bins that kept their previous value
/// because they are empty or fully degenerate.
pub(crate) fn updated_g_values(
    net: &FlowNetwork,
    dist: &DistanceMatrix,
    levels: &[f64],
    params: &ModelParams,
    kind: ObjectiveKind,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let n = net.node_count();
    let bins = params.g.len();
    let mut num = vec![0.0; bins];
    let mut den = vec![0.0; bins];
    let mut seen = vec![false; bins];
    for a in 0..n {
        for b in 0..n {
            if a == b {
                continue;
            }
            let d = dist.bin(a, b);
            seen[d] = true;
            let y = params.w_out[a] * params.w_in[b] * deterrence(levels[a * n + b]);
            let e = net.flow(a, b);
            match kind {
                ObjectiveKind::PoissonNormal => {
                    if y > 0.0 {
                        num[d] += e * e / y;
                    }
                    den[d] += y;
                }
                ObjectiveKind::LeastSquares => {
                    num[d] += e * y;
                    den[d] += y * y;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(bins);
    let mut flagged = Vec::new();
    for d in 0..bins {
        if !seen[d] || !den[d].is_finite() || den[d] <= 0.0 {
            out.push(params.g[d]);
            flagged.push(d);
        } else {
            out.push(floored(block_value(num[d], den[d], kind)));
        }
    }
    Ok((out, flagged))
}

/// Public closed-form update of every w_out (spec operation surface).
pub fn update_w_out(
    net: &FlowNetwork,
    params: &ModelParams,
    hier: &Hierarchy,
    dist: &DistanceMatrix,
    kind: ObjectiveKind,
) -> Result<Vec<f64>> {
    updated_w_out_values(net, dist, &hier.level_matrix(), params, kind)
}

/// Public closed-form update of every w_in.
pub fn update_w_in(
    net: &FlowNetwork,
    params: &ModelParams,
    hier: &Hierarchy,
    dist: &DistanceMatrix,
    kind: ObjectiveKind,
) -> Result<Vec<f64>> {
    updated_w_in_values(net, dist, &hier.level_matrix(), params, kind)
}

/// Per-bin deterrence update; flagged bins keep their previous value.
#[derive(Debug, Clone)]
pub struct GUpdate {
    pub values: Vec<f64>,
    pub flagged_bins: Vec<usize>,
}

/// Public closed-form update of g per distance bin.
pub fn update_g(
    net: &FlowNetwork,
    params: &ModelParams,
    hier: &Hierarchy,
    dist: &DistanceMatrix,
    kind: ObjectiveKind,
) -> Result<GUpdate> {
    let (values, flagged_bins) = updated_g_values(net, dist, &hier.level_matrix(), params, kind)?;
    Ok(GUpdate { values, flagged_bins })
}

/// Outcome of [`optimal_level_value`]: the unconstrained fitted level,
/// its clamped value, and the nearest admissible ladder level inside the
/// bounds (`None` signals a no-op: no ladder level lies inside).
#[derive(Debug, Clone, Copy)]
pub struct LevelChoice {
    pub raw: f64,
    pub clamped: f64,
    pub snapped: Option<f64>,
}

/// Fits the common level of a pair set: the deterrence value minimizing
/// the restricted objective is converted back to a level via
/// h = 1/(1 + f), clamped into `[lo, hi]`, then snapped to the nearest
/// ladder level inside the bounds.
pub fn optimal_level_value(
    net: &FlowNetwork,
    params: &ModelParams,
    dist: &DistanceMatrix,
    pairs: &[(usize, usize)],
    bounds: (f64, f64),
    ladder: &[f64],
    kind: ObjectiveKind,
) -> Result<LevelChoice> {
    if pairs.is_empty() {
        return Err(Error::Validation("optimal_level_value needs at least one pair".into()));
    }
    let (lo, hi) = bounds;
    if !(lo > 0.0 && hi < 1.0 && lo <= hi) {
        return Err(Error::Validation(format!(
            "level bounds [{lo}, {hi}] must satisfy 0 < lo <= hi < 1"
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for &(a, b) in pairs {
        let c = params.w_out[a] * params.w_in[b] * params.g[dist.bin(a, b)];
        let e = net.flow(a, b);
        match kind {
            ObjectiveKind::PoissonNormal => {
                if c > 0.0 {
                    num += e * e / c;
                }
                den += c;
            }
            ObjectiveKind::LeastSquares => {
                num += e * c;
                den += c * c;
            }
        }
    }
    if !den.is_finite() || den <= 0.0 {
        return Err(Error::Validation(
            "every pair has zero model weight; level update undefined".into(),
        ));
    }
    let f_star = match kind {
        ObjectiveKind::PoissonNormal => (num / den).sqrt(),
        ObjectiveKind::LeastSquares => (num / den).max(0.0),
    };
    let raw = level_for_deterrence(f_star);
    let clamped = raw.clamp(lo, hi);
    let mut snapped: Option<f64> = None;
    let mut best = f64::INFINITY;
    for &l in ladder {
        if l < lo || l > hi {
            continue;
        }
        let d = (l - clamped).abs();
        if d < best {
            best = d;
            snapped = Some(l);
        }
    }
    Ok(LevelChoice { raw, clamped, snapped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeRecord;
    use crate::hierarchy::default_ladder;

    fn pair_net(e_ab: f64, e_ba: f64) -> FlowNetwork {
        let nodes = vec![NodeRecord::new("a"), NodeRecord::new("b")];
        FlowNetwork::new(nodes, vec![0.0, e_ab, e_ba, 0.0]).unwrap()
    }

    #[test]
    fn w_out_single_counterpart_exact_fit() {
        // A = 6, w_in = 3, g = 1, f = 1 (level 0.5) -> w_out = 2, m = 6 = A
        let net = pair_net(6.0, 0.0);
        let hier = Hierarchy::flat(2, 0.5, &[0.5]).unwrap();
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::new(vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0]).unwrap();
        let w = update_w_out(&net, &params, &hier, &dist, ObjectiveKind::PoissonNormal).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12, "got {}", w[0]);
        assert_eq!(w[0] * params.w_in[1] * 1.0 * 1.0, 6.0);
    }

    #[test]
    fn w_out_zero_flows_floor_clamped() {
        let net = pair_net(0.0, 0.0);
        let hier = Hierarchy::flat(2, 0.5, &[0.5]).unwrap();
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::uniform(2, 1);
        let w = update_w_out(&net, &params, &hier, &dist, ObjectiveKind::PoissonNormal).unwrap();
        assert_eq!(w[0], WEIGHT_FLOOR);
        assert_eq!(w[1], WEIGHT_FLOOR);
    }

    #[test]
    fn w_in_mirror_of_w_out_example() {
        // solving for w_in with w_out = 2 fixed reproduces 3
        let net = pair_net(6.0, 0.0);
        let hier = Hierarchy::flat(2, 0.5, &[0.5]).unwrap();
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::new(vec![2.0, 1.0], vec![1.0, 1.0], vec![1.0]).unwrap();
        let w = update_w_in(&net, &params, &hier, &dist, ObjectiveKind::PoissonNormal).unwrap();
        assert!((w[1] - 3.0).abs() < 1e-12, "got {}", w[1]);
        // no incoming flow at node a
        assert_eq!(w[0], WEIGHT_FLOOR);
    }

    #[test]
    fn g_single_pair_exact_fit() {
        // A = 6, w_out = 2, w_in = 3, f = 1 -> g = sqrt((36/6)/6) = 1
        let net = pair_net(6.0, 0.0);
        let hier = Hierarchy::flat(2, 0.5, &[0.5]).unwrap();
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::new(vec![2.0, 0.0], vec![0.0, 3.0], vec![2.5]).unwrap();
        let upd = update_g(&net, &params, &hier, &dist, ObjectiveKind::PoissonNormal).unwrap();
        // the b->a term has zero weight product, so only A(a,b) contributes
        assert!((upd.values[0] - 1.0).abs() < 1e-12, "got {}", upd.values[0]);
        assert!(upd.flagged_bins.is_empty());
    }

    #[test]
    fn g_all_zero_flows_floor_clamped() {
        let net = pair_net(0.0, 0.0);
        let hier = Hierarchy::flat(2, 0.5, &[0.5]).unwrap();
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::uniform(2, 1);
        let upd = update_g(&net, &params, &hier, &dist, ObjectiveKind::PoissonNormal).unwrap();
        assert_eq!(upd.values[0], WEIGHT_FLOOR);
    }

    #[test]
    fn level_value_single_pair_exact_fit() {
        // A = 6, w_out = 2, w_in = 3, g = 1 -> f* = 1, h* = 0.5
        let net = pair_net(6.0, 0.0);
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::new(vec![2.0, 1.0], vec![1.0, 3.0], vec![1.0]).unwrap();
        let ladder = default_ladder(10);
        let choice = optimal_level_value(
            &net,
            &params,
            &dist,
            &[(0, 1)],
            (ladder[0], ladder[9]),
            &ladder,
            ObjectiveKind::PoissonNormal,
        )
        .unwrap();
        assert!((choice.raw - 0.5).abs() < 1e-12, "got {}", choice.raw);
        // 6/11 sits a hair closer to 0.5 than 5/11 in f64
        assert_eq!(choice.snapped, Some(ladder[5]));
    }

    #[test]
    fn level_value_zero_flows_pushed_to_top() {
        let net = pair_net(0.0, 0.0);
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::uniform(2, 1);
        let ladder = default_ladder(10);
        let choice = optimal_level_value(
            &net,
            &params,
            &dist,
            &[(0, 1), (1, 0)],
            (ladder[0], ladder[9]),
            &ladder,
            ObjectiveKind::PoissonNormal,
        )
        .unwrap();
        assert_eq!(choice.raw, 1.0);
        assert_eq!(choice.clamped, ladder[9]);
        assert_eq!(choice.snapped, Some(ladder[9]));
    }

    #[test]
    fn level_value_no_ladder_level_in_bounds() {
        let net = pair_net(1.0, 1.0);
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::uniform(2, 1);
        let ladder = vec![0.2, 0.8];
        let choice = optimal_level_value(
            &net,
            &params,
            &dist,
            &[(0, 1)],
            (0.4, 0.6),
            &ladder,
            ObjectiveKind::PoissonNormal,
        )
        .unwrap();
        assert!(choice.snapped.is_none());
    }

    #[test]
    fn least_squares_updates_are_weighted_ratios() {
        // single counterpart: LS optimum w = (A x)/(x^2) = A/x, exact fit too
        let net = pair_net(6.0, 0.0);
        let hier = Hierarchy::flat(2, 0.5, &[0.5]).unwrap();
        let dist = DistanceMatrix::unit(2);
        let params = ModelParams::new(vec![1.0, 1.0], vec![1.0, 3.0], vec![1.0]).unwrap();
        let w = update_w_out(&net, &params, &hier, &dist, ObjectiveKind::LeastSquares).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12, "got {}", w[0]);
    }
}
