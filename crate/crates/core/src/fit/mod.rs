//! Parameter estimation and greedy hierarchy search.
//!
//! The fit alternates two mechanisms: closed-form fixed-point refits of
//! the weights and per-bin deterrence (exact block minimizers of the
//! selected objective), and a greedy search over hierarchy edits that
//! applies the single best improving move per sweep, walking pivot
//! levels from lower to higher. The recorded objective trajectory is
//! non-increasing by construction: any step that fails to improve under
//! floating point is rolled back.

mod moves;
mod updates;

pub use moves::{enumerate_moves, Move};
pub use updates::{optimal_level_value, update_g, update_w_in, update_w_out, GUpdate, LevelChoice};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{BinSpec, DistanceMatrix, FlowNetwork};
use crate::hierarchy::{random_hierarchy, validate_ladder, validate_ultrametric, default_ladder, Hierarchy};
use crate::model::{
    deterrence, mean_at, objective_from_levels, pair_term, ModelParams, ObjectiveKind,
    ObjectiveSpec,
};

use self::moves::{apply_move, enumerate_at, move_changes, MoveCtx};
use self::updates::{updated_g_values, updated_w_in_values, updated_w_out_values};

/// Which model family is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMode {
    /// No geography: unit distances, single bin, g reported as 1.
    Generic,
    /// Hierarchy and per-bin g fitted jointly.
    Spatial,
    /// Gravity-only pre-fit with h fixed at 0.5 (f = 1), then the
    /// hierarchy is fitted with g frozen at the pre-fit values.
    GravityPrefit,
}

impl FitMode {
    fn fits_g_jointly(self) -> bool {
        matches!(self, FitMode::Generic | FitMode::Spatial)
    }
}

/// Everything the fitter needs beyond the data itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub objective: ObjectiveSpec,
    pub ladder: Vec<f64>,
    pub bins: BinSpec,
    /// Relative objective improvement below which the weight loop stops.
    pub weight_loop_tol: f64,
    pub weight_loop_max_iter: usize,
    /// Cap on greedy sweeps (one accepted move per sweep).
    pub outer_max_sweeps: usize,
    /// Smallest absolute objective decrease that justifies a move.
    pub min_move_gain: f64,
    pub seed: u64,
    pub mode: FitMode,
    /// Re-validate the hierarchy after every accepted move (used by the
    /// acceptance suite; costs an extra O(n^3) scan per move).
    #[serde(default)]
    pub validate_each_move: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            objective: ObjectiveSpec::default(),
            ladder: default_ladder(10),
            bins: BinSpec::default(),
            weight_loop_tol: 1e-8,
            weight_loop_max_iter: 200,
            outer_max_sweeps: 100,
            min_move_gain: 1e-10,
            seed: 0,
            mode: FitMode::Generic,
            validate_each_move: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        validate_ladder(&self.ladder)?;
        self.bins.validate()?;
        if !(self.weight_loop_tol > 0.0) || !(self.min_move_gain > 0.0) {
            return Err(Error::Validation("tolerances must be positive".into()));
        }
        if self.weight_loop_max_iter == 0 || self.outer_max_sweeps == 0 {
            return Err(Error::Validation("iteration caps must be positive".into()));
        }
        Ok(())
    }
}

/// One accepted hierarchy edit, for the audit log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MoveRecord {
    pub sweep: usize,
    pub kind: String,
    /// Node indices of the moved (or reheighted) subtree.
    pub subtree: Vec<usize>,
    /// Node indices of the target cluster, empty when not applicable.
    pub target: Vec<usize>,
    pub old_level: f64,
    pub new_level: f64,
    /// Realized objective decrease including the follow-up weight refit.
    pub gain: f64,
}

/// Fit outcome: trajectory, accepted moves, final parameters and
/// hierarchy.
#[derive(Debug, Clone)]
pub struct FitReport {
    /// Objective after the initial weight fit and after every accepted
    /// sweep; non-increasing.
    pub trajectory: Vec<f64>,
    pub moves: Vec<MoveRecord>,
    pub params: ModelParams,
    pub hierarchy: Hierarchy,
    pub converged: bool,
    pub final_objective: f64,
    /// Objective of the gravity-only pre-fit, when the mode ran one.
    pub prefit_objective: Option<f64>,
    pub sweeps: usize,
    /// Bins that kept a stale g because no usable pair ever hit them.
    pub flagged_bins: Vec<usize>,
}

/// Outcome of one full weight-loop invocation.
#[derive(Debug, Clone)]
pub struct WeightFitOutcome {
    pub objective: f64,
    pub rounds: usize,
    pub converged: bool,
    pub flagged_bins: Vec<usize>,
    /// Rounds rolled back because floating point failed to improve;
    /// expected to be 0 or the final round only.
    pub reverted_rounds: usize,
}

/// Mutable fitting state over immutable inputs.
pub(crate) struct FitState<'a> {
    pub net: &'a FlowNetwork,
    pub dist: &'a DistanceMatrix,
    pub kind: ObjectiveKind,
    pub params: ModelParams,
    pub hier: Hierarchy,
    pub levels: Vec<f64>,
}

impl<'a> FitState<'a> {
    pub(crate) fn snapshot(
        net: &'a FlowNetwork,
        dist: &'a DistanceMatrix,
        params: ModelParams,
        hier: Hierarchy,
        kind: ObjectiveKind,
    ) -> Self {
        let levels = hier.level_matrix();
        FitState {
            net,
            dist,
            kind,
            params,
            hier,
            levels,
        }
    }

    fn refresh_levels(&mut self) {
        self.levels = self.hier.level_matrix();
    }

    fn objective(&self) -> Result<f64> {
        objective_from_levels(self.net, &self.params, self.dist, &self.levels, self.kind)
    }

    /// Objective decrease if the unordered pair (a, b) moved from level
    /// `old` to `new`; covers both flow orientations.
    fn pair_swap_gain(&self, a: usize, b: usize, old: f64, new: f64) -> f64 {
        let mut gain = 0.0;
        for (x, y) in [(a, b), (b, a)] {
            let e = self.net.flow(x, y);
            let bin = self.dist.bin(x, y);
            let m_old = mean_at(&self.params, x, y, old, bin);
            let m_new = mean_at(&self.params, x, y, new, bin);
            gain += pair_term(e, m_old, self.kind) - pair_term(e, m_new, self.kind);
        }
        gain
    }

    fn move_gain(&self, ctx: &MoveCtx, mv: &Move) -> f64 {
        move_changes(self, ctx, mv)
            .iter()
            .map(|&(a, b, old, new)| self.pair_swap_gain(a, b, old, new))
            .sum()
    }
}

fn weight_round(
    state: &mut FitState<'_>,
    kind: ObjectiveKind,
    update_g: bool,
) -> Result<Vec<usize>> {
    let w_in = updated_w_in_values(state.net, state.dist, &state.levels, &state.params, kind)?;
    state.params.w_in = w_in;
    let w_out = updated_w_out_values(state.net, state.dist, &state.levels, &state.params, kind)?;
    state.params.w_out = w_out;
    let mut flagged = Vec::new();
    if update_g {
        let (g, flags) = updated_g_values(state.net, state.dist, &state.levels, &state.params, kind)?;
        state.params.g = g;
        flagged = flags;
    }
    state.params.rebalance();
    Ok(flagged)
}

fn fit_weights_state(
    state: &mut FitState<'_>,
    kind: ObjectiveKind,
    tol: f64,
    max_iter: usize,
    update_g: bool,
) -> Result<WeightFitOutcome> {
    let mut objective = state.objective()?;
    let mut outcome = WeightFitOutcome {
        objective,
        rounds: 0,
        converged: false,
        flagged_bins: Vec::new(),
        reverted_rounds: 0,
    };
    for _ in 0..max_iter {
        let before = state.params.clone();
        let flagged = weight_round(state, kind, update_g)?;
        outcome.rounds += 1;
        outcome.flagged_bins = flagged;
        let new_objective = state.objective()?;
        if new_objective > objective {
            // exact block minimizers cannot increase the objective; only
            // the weight floor or float noise can, so roll back and stop
            state.params = before;
            outcome.reverted_rounds += 1;
            outcome.converged = true;
            break;
        }
        let improvement = (objective - new_objective) / objective.max(f64::MIN_POSITIVE);
        objective = new_objective;
        if improvement < tol {
            outcome.converged = true;
            break;
        }
    }
    outcome.objective = objective;
    Ok(outcome)
}

/// Iterates [w_in sweep; w_out sweep; per-bin g; gauge rebalance] until
/// the relative improvement drops below `cfg.weight_loop_tol`. In
/// gravity-prefit mode g stays frozen. The objective never increases
/// across rounds.
pub fn fit_weights(
    net: &FlowNetwork,
    params: &mut ModelParams,
    hier: &Hierarchy,
    dist: &DistanceMatrix,
    cfg: &FitConfig,
) -> Result<WeightFitOutcome> {
    let mut state = FitState::snapshot(net, dist, params.clone(), hier.clone(), cfg.objective.kind);
    let outcome = fit_weights_state(
        &mut state,
        cfg.objective.kind,
        cfg.weight_loop_tol,
        cfg.weight_loop_max_iter,
        cfg.mode.fits_g_jointly(),
    )?;
    *params = state.params;
    Ok(outcome)
}

struct StepOutcome {
    record: MoveRecord,
    objective: f64,
}

fn greedy_step_state(
    state: &mut FitState<'_>,
    cfg: &FitConfig,
    sweep: usize,
    update_g: bool,
) -> Result<Option<StepOutcome>> {
    let objective_before = state.objective()?;
    let ctx = MoveCtx::build(state);
    let kind = state.kind;
    let mut candidates = Vec::new();
    for &level in state.hier.ladder().iter() {
        candidates.extend(enumerate_at(state, &ctx, level, kind)?);
    }
    if candidates.is_empty() {
        return Ok(None);
    }
    // order-preserving parallel evaluation keeps tie-breaking identical
    // to the serial scan
    let shared: &FitState<'_> = state;
    let gains: Vec<f64> = candidates
        .par_iter()
        .map(|mv| shared.move_gain(&ctx, mv))
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, &g) in gains.iter().enumerate() {
        if g.is_finite() && best.map_or(true, |(_, bg)| g > bg) {
            best = Some((i, g));
        }
    }
    let (best_idx, best_gain) = best.unwrap();
    if best_gain < cfg.min_move_gain {
        return Ok(None);
    }
    let mv = candidates[best_idx];

    let saved_params = state.params.clone();
    let saved_hier = state.hier.clone();
    let saved_levels = state.levels.clone();

    let old_level = match mv {
        Move::Reheight { vertex, .. } => state.hier.height(vertex),
        Move::MergeSiblings { s, .. }
        | Move::JoinCluster { s, .. }
        | Move::Hoist { s }
        | Move::MergeWithAunt { s, .. } => state.hier.height(state.hier.parent(s).unwrap()),
    };
    let (subtree, target) = match mv {
        Move::Reheight { vertex, .. } => (ctx.leaf_sets[vertex].clone(), Vec::new()),
        Move::MergeSiblings { s, t, .. }
        | Move::JoinCluster { s, t }
        | Move::MergeWithAunt { s, t, .. } => (ctx.leaf_sets[s].clone(), ctx.leaf_sets[t].clone()),
        Move::Hoist { s } => (ctx.leaf_sets[s].clone(), Vec::new()),
    };
    let new_level = match mv {
        Move::Reheight { new_level, .. } => new_level,
        Move::MergeSiblings { level, .. } | Move::MergeWithAunt { level, .. } => level,
        Move::JoinCluster { t, .. } => state.hier.height(t),
        Move::Hoist { s } => {
            let v = state.hier.parent(s).unwrap();
            state.hier.height(state.hier.parent(v).unwrap())
        }
    };

    apply_move(state, &mv);
    state.refresh_levels();
    if cfg.validate_each_move {
        state.hier.validate()?;
        validate_ultrametric(&state.levels, state.net.node_count())
            .map_err(|e| Error::Validation(format!("move broke the hierarchy: {e}")))?;
    }
    fit_weights_state(state, kind, cfg.weight_loop_tol, cfg.weight_loop_max_iter, update_g)?;
    let objective_after = state.objective()?;
    if objective_after >= objective_before {
        state.params = saved_params;
        state.hier = saved_hier;
        state.levels = saved_levels;
        return Ok(None);
    }
    Ok(Some(StepOutcome {
        record: MoveRecord {
            sweep,
            kind: mv.kind().to_string(),
            subtree,
            target,
            old_level,
            new_level,
            gain: objective_before - objective_after,
        },
        objective: objective_after,
    }))
}

/// Evaluates every candidate move across pivot levels from lower to
/// higher, applies the single best one when its gain clears
/// `cfg.min_move_gain`, then refits the weights. Returns the realized
/// gain (0 when no improving move exists) alongside the updated state.
pub fn greedy_step(
    net: &FlowNetwork,
    params: &mut ModelParams,
    hier: &mut Hierarchy,
    dist: &DistanceMatrix,
    cfg: &FitConfig,
) -> Result<f64> {
    let mut state = FitState::snapshot(net, dist, params.clone(), hier.clone(), cfg.objective.kind);
    let outcome = greedy_step_state(&mut state, cfg, 0, cfg.mode.fits_g_jointly())?;
    *params = state.params;
    *hier = state.hier;
    Ok(outcome.map_or(0.0, |o| o.record.gain))
}

fn prefit_levels(n: usize) -> Vec<f64> {
    let mut levels = vec![0.5; n * n];
    for i in 0..n {
        levels[i * n + i] = 0.0;
    }
    levels
}

fn ladder_level_nearest(ladder: &[f64], target: f64) -> f64 {
    let mut best = ladder[0];
    let mut best_d = (ladder[0] - target).abs();
    for &l in &ladder[1..] {
        let d = (l - target).abs();
        if d < best_d {
            best = l;
            best_d = d;
        }
    }
    best
}

/// Full inference strategy: seeded random initial hierarchy (or the
/// gravity pre-fit in that mode), then greedy move sweeps alternating
/// with weight refits until no move improves the objective or the sweep
/// cap is reached. Deterministic for a fixed seed.
pub fn fit(net: &FlowNetwork, dist: &DistanceMatrix, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    if cfg.objective.include_loops {
        return Err(Error::Unsupported(
            "loop-edge objectives need a finite f(h(a,a)); the ladder keeps h(a,a) = 0".into(),
        ));
    }
    let n = net.node_count();
    if n == 0 {
        return Err(Error::Validation("cannot fit an empty network".into()));
    }
    if dist.n() != n {
        return Err(Error::Validation(format!(
            "distance matrix covers {} nodes, network has {n}",
            dist.n()
        )));
    }
    if n == 1 {
        return Ok(FitReport {
            trajectory: vec![0.0],
            moves: Vec::new(),
            params: ModelParams::uniform(1, dist.bin_count()),
            hierarchy: random_hierarchy(1, &cfg.ladder, cfg.seed)?,
            converged: true,
            final_objective: 0.0,
            prefit_objective: None,
            sweeps: 0,
            flagged_bins: Vec::new(),
        });
    }

    let kind = cfg.objective.kind;
    let mut prefit_objective = None;
    let (params, hier) = match cfg.mode {
        FitMode::GravityPrefit => {
            // gravity-only: h = 0.5 everywhere so f = 1, leaving pure
            // weights x deterrence; no hierarchy enters this phase
            let mut params = ModelParams::uniform(n, dist.bin_count());
            let levels = prefit_levels(n);
            let flat_stub = Hierarchy::flat(n, ladder_level_nearest(&cfg.ladder, 0.5), &cfg.ladder)?;
            let mut gravity = FitState {
                net,
                dist,
                kind,
                params: params.clone(),
                hier: flat_stub,
                levels,
            };
            fit_weights_state(&mut gravity, kind, cfg.weight_loop_tol, cfg.weight_loop_max_iter, true)?;
            prefit_objective = Some(gravity.objective()?);
            params = gravity.params;
            // hand the greedy phase an equivalent starting point: a flat
            // hierarchy at the ladder level nearest 0.5, with the f(h0)
            // factor absorbed into the weights so every model value (and
            // the objective) carries over unchanged
            let h0 = ladder_level_nearest(&cfg.ladder, 0.5);
            let scale = (deterrence(0.5) / deterrence(h0)).sqrt();
            for w in params.w_out.iter_mut().chain(params.w_in.iter_mut()) {
                *w *= scale;
            }
            (params, Hierarchy::flat(n, h0, &cfg.ladder)?)
        }
        FitMode::Generic | FitMode::Spatial => (
            ModelParams::uniform(n, dist.bin_count()),
            random_hierarchy(n, &cfg.ladder, cfg.seed)?,
        ),
    };

    let update_g = cfg.mode.fits_g_jointly();
    let mut state = FitState::snapshot(net, dist, params, hier, kind);
    let initial = fit_weights_state(&mut state, kind, cfg.weight_loop_tol, cfg.weight_loop_max_iter, update_g)?;
    let flagged_bins = initial.flagged_bins;
    let mut trajectory = vec![initial.objective];
    let mut moves = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < cfg.outer_max_sweeps {
        match greedy_step_state(&mut state, cfg, sweeps + 1, update_g)? {
            Some(outcome) => {
                sweeps += 1;
                trajectory.push(outcome.objective);
                moves.push(outcome.record);
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    if cfg.mode == FitMode::Generic && state.params.g.len() == 1 {
        // the single redundant bin is pure gauge; report the generic
        // model with g = 1 by folding it into the weights
        let g0 = state.params.g[0];
        if g0 > 0.0 && g0 != 1.0 {
            let s = g0.sqrt();
            for w in state.params.w_out.iter_mut().chain(state.params.w_in.iter_mut()) {
                *w *= s;
            }
            state.params.g[0] = 1.0;
        }
    }
    let final_objective = *trajectory.last().unwrap();
    Ok(FitReport {
        trajectory,
        moves,
        params: state.params,
        hierarchy: state.hier,
        converged,
        final_objective,
        prefit_objective,
        sweeps,
        flagged_bins,
    })
}
