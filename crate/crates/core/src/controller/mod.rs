//! Per-slot drift-plus-penalty controller.
//!
//! Each slot splits into three independent decisions: auxiliary variables,
//! threshold admission and the joint association / RB / power subproblem.
//! The last one is relaxed and solved in the Lagrange dual over the per-node
//! power budgets: water-filling gives candidate powers, per-RB scores pick the
//! owners, and projected subgradient steps move the multipliers. Every distinct
//! assignment visited by the dual loop is re-solved exactly for its powers and
//! the best feasible one is kept.

pub mod dual;
pub mod power;
pub mod scores;
pub mod waterfill;

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{rates, ChannelState, ControlDecision, ModelError, NetworkConfig, Ue, UtilityKind};
use crate::queues::QueueState;
use crate::scalar::Scalar;

pub use dual::{update_duals, DualState};
pub use power::{optimize_powers, PowerSolution};
pub use scores::{assign_rbs, score_rbs, Assignment, Candidates, RbScores};
pub use waterfill::{waterfill_budget, waterfill_coupled, waterfill_single};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControllerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Shape(String),
}

/// Queue-derived weights of the resource subproblem, in data units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftWeights<T> {
    /// `B_m = Q_m tau + w Z`, `w` the weight of `Z`
    pub b_hue: Vec<T>,
    /// `B_j = Q_j tau + w Z`
    pub b_rue: Vec<T>,
    /// `Y_R = W eta_req phi_eff^R w Z` (per data unit)
    pub y_r: T,
    pub y_h: T,
}

impl<T: Scalar> DriftWeights<T> {
    pub fn from_queues(cfg: &NetworkConfig<T>, qs: &QueueState<T>) -> Self {
        let tau = cfg.slot_duration;
        let z = qs.z * cfg.z_weight();
        let y = cfg.ee_rate_coeff() * cfg.ee_required * z;
        Self {
            b_hue: qs.q_hue.iter().map(|&q| q * tau + z).collect(),
            b_rue: qs.q_rue.iter().map(|&q| q * tau + z).collect(),
            y_r: y * cfg.drain_eff_rrh,
            y_h: y * cfg.drain_eff_hpn,
        }
    }

    /// Every UE weighted by `b`, power priced at `price` per watt of consumption.
    pub fn uniform(cfg: &NetworkConfig<T>, b: T, price: T) -> Self {
        Self {
            b_hue: vec![b; cfg.num_hue],
            b_rue: vec![b; cfg.num_rue],
            y_r: price * cfg.drain_eff_rrh,
            y_h: price * cfg.drain_eff_hpn,
        }
    }

    fn max_b(&self) -> T {
        self.b_hue.iter().chain(&self.b_rue).fold(T::zero(), |a, &b| a.max(b))
    }
}

/// `V * price * g(gamma) - H * gamma`, the per-UE auxiliary objective.
pub fn auxiliary_value<T: Scalar>(cfg: &NetworkConfig<T>, price: T, h: T, gamma: T) -> T {
    cfg.control_v * price * cfg.utility_fn(gamma) - h * gamma
}

fn best_auxiliary<T: Scalar>(cfg: &NetworkConfig<T>, price: T, h: T, cap: T) -> T {
    let vp = cfg.control_v * price;
    match cfg.utility_kind {
        UtilityKind::Linear => {
            if h < vp {
                cap
            } else {
                T::zero()
            }
        }
        UtilityKind::Logarithmic => {
            if h <= T::zero() {
                return cap;
            }
            let r0 = cfg.to_units(cfg.log_utility_offset_bits);
            (vp / h - r0).pos().min(cap)
        }
    }
}

/// Maximizes the auxiliary objective per UE over `[0, A_max]`. Returns `(HUE, RUE)`.
pub fn select_auxiliary<T: Scalar>(cfg: &NetworkConfig<T>, qs: &QueueState<T>) -> (Vec<T>, Vec<T>) {
    let hue = qs
        .h_hue
        .iter()
        .map(|&h| best_auxiliary(cfg, cfg.price_hue, h, cfg.a_max_hue_units()))
        .collect();
    let rue = qs
        .h_rue
        .iter()
        .map(|&h| best_auxiliary(cfg, cfg.price_rue, h, cfg.a_max_rue_units()))
        .collect();
    (hue, rue)
}

/// Threshold admission: everything that arrived when `H - Q > 0`, nothing otherwise.
pub fn admit_traffic<T: Scalar>(qs: &QueueState<T>, arrivals_hue: &[T], arrivals_rue: &[T]) -> (Vec<T>, Vec<T>) {
    let admit = |h: &[T], q: &[T], a: &[T]| -> Vec<T> {
        h.iter()
            .zip(q)
            .zip(a)
            .map(|((&h, &q), &a)| if h - q > T::zero() { a } else { T::zero() })
            .collect()
    };
    (
        admit(&qs.h_hue, &qs.q_hue, arrivals_hue),
        admit(&qs.h_rue, &qs.q_rue, arrivals_rue),
    )
}

/// Knobs of the dual loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Base step `xi_0`; the actual step is normalized per node.
    pub xi0: f64,
    pub max_iterations: usize,
    /// Stop when every multiplier moves less than this, relative to its scale.
    pub theta_tol: f64,
    /// Stop when the relative gap between best primal and best dual value drops below this.
    pub gap_tol: f64,
    /// Stop when the best dual bound improved by less than `stall_tol` (relative)
    /// over the last `stall_window` iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Start each slot from the previous slot's multipliers.
    pub warm_start: bool,
    /// Neighbourhood size of the assignment polish: moves touching up to `k`
    /// RBs are tried for the largest `k` whose move count stays within this.
    pub local_search_limit: usize,
    /// When even single-RB moves exceed that limit, moves are drawn from this
    /// many best-scoring owners per RB instead (0 disables).
    pub candidates_per_rb: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            xi0: 0.1,
            max_iterations: 500,
            theta_tol: 1e-4,
            gap_tol: 1e-4,
            stall_window: 50,
            stall_tol: 1e-3,
            warm_start: true,
            local_search_limit: 128,
            candidates_per_rb: 3,
        }
    }
}

/// Outcome of the resource subproblem.
#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution<T> {
    pub assignment: Assignment,
    pub pw_rrh: Vec<T>,
    pub pw_hpn: Vec<T>,
    /// `-sum B mu + Y_R sum p_i + Y_H p_H` of the returned allocation.
    pub objective: T,
    /// Best Lagrangian lower bound seen.
    pub dual_bound: T,
    pub iterations: usize,
    /// Stopped on the multiplier, gap or stall rule rather than the iteration cap.
    pub converged: bool,
    /// Every coupled water-filling met its tolerance.
    pub waterfill_converged: bool,
    /// Multipliers of the returned allocation's power budgets.
    pub theta: Vec<T>,
}

/// Runs the dual loop for the given weights. `ds` supplies and receives the
/// multiplier warm start.
pub fn solve_subproblem<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    ch: &ChannelState<T>,
    ds: &mut DualState<T>,
    opts: &SolverOptions,
) -> SubproblemSolution<T> {
    let (n, kr, kh) = (cfg.num_rrh, cfg.num_rb_rrh, cfg.num_rb_hpn);
    if ds.theta.len() != n + 1 {
        *ds = DualState::new(n, T::lit(opts.xi0));
    }
    if w.max_b() <= T::zero() {
        // Nothing to gain from any transmission.
        return SubproblemSolution {
            assignment: Assignment::empty(kr, kh),
            pw_rrh: vec![T::zero(); n * kr],
            pw_hpn: vec![T::zero(); kh],
            objective: T::zero(),
            dual_bound: T::zero(),
            iterations: 0,
            converged: true,
            waterfill_converged: true,
            theta: vec![T::zero(); n + 1],
        };
    }
    let mut cand = Candidates::new(cfg);
    let mut scores = RbScores::new(cfg);

    // theta of node i is of order a_max * K / p_max: the price at which the
    // strongest UE's water level spreads the budget over all RBs.
    let a_max = scores::level_weight(w.max_b(), cfg.rate_scale());
    let mut theta_scale = vec![a_max * T::from_count(kh.max(1)) / cfg.p_max_hpn];
    theta_scale.extend((0..n).map(|_| a_max * T::from_count(kr.max(1)) / cfg.p_max_rrh));
    let budgets: Vec<T> = std::iter::once(cfg.p_max_hpn)
        .chain((0..n).map(|_| cfg.p_max_rrh))
        .collect();
    if !opts.warm_start {
        ds.theta.iter_mut().for_each(|t| *t = T::zero());
    }
    ds.restart();
    ds.xi0 = T::lit(opts.xi0);
    for i in 0..=n {
        ds.scale[i] = theta_scale[i] / budgets[i];
    }

    let mut best = PowerSolution {
        pw_rrh: vec![T::zero(); n * kr],
        pw_hpn: vec![T::zero(); kh],
        theta: vec![T::zero(); n + 1],
        objective: T::zero(),
        assignment: Assignment::empty(kr, kh),
        converged: true,
    };
    let mut seen: HashSet<Assignment> = HashSet::new();
    let mut best_dual = T::neg_infinity();
    let mut converged = false;
    let mut wf_converged = true;
    let mut iterations = 0;
    let mut grad = vec![T::zero(); n + 1];
    let gap_tol = T::lit(opts.gap_tol);
    let theta_tol = T::lit(opts.theta_tol);
    let stall_tol = T::lit(opts.stall_tol);
    let mut dual_history: VecDeque<T> = VecDeque::with_capacity(opts.stall_window + 1);

    while iterations < opts.max_iterations {
        iterations += 1;
        score_rbs(cfg, w, &ds.theta, ch, &mut cand, &mut scores);
        wf_converged &= cand.converged;
        let penalty = ds
            .theta
            .iter()
            .zip(&budgets)
            .fold(T::zero(), |acc, (&t, &p)| acc + t * p);
        best_dual = best_dual.max(scores.relaxed_minimum() - penalty);

        let asg = assign_rbs(&scores);
        if !asg.is_empty() && !seen.contains(&asg) {
            let sol = optimize_powers(cfg, w, ch, &asg);
            seen.insert(asg.clone());
            if sol.objective < best.objective {
                best = sol;
            }
        }

        let gap = best.objective - best_dual;
        if gap <= gap_tol * best.objective.abs().max(best_dual.abs()) {
            converged = true;
            break;
        }
        dual_history.push_back(best_dual);
        if opts.stall_window > 0 && dual_history.len() > opts.stall_window {
            let old = dual_history.pop_front().unwrap();
            if old.is_finite() && best_dual - old <= stall_tol * best_dual.abs() {
                converged = true;
                break;
            }
        }

        grad[0] = -budgets[0];
        for (l, owner) in asg.hpn.iter().enumerate() {
            if let Some(m) = owner {
                grad[0] = grad[0] + cand.hpn[m * kh + l];
            }
        }
        for i in 0..n {
            grad[i + 1] = -budgets[i + 1];
        }
        for (k, owner) in asg.rrh.iter().enumerate() {
            if let Some(ue) = owner {
                for (i, &p) in cand.rrh(n, kr, *ue, k).iter().enumerate() {
                    grad[i + 1] = grad[i + 1] + p;
                }
            }
        }
        let delta = update_duals(ds, &grad);
        let settled = delta.iter().zip(&theta_scale).all(|(&d, &s)| d.abs() <= theta_tol * s);
        if settled {
            converged = true;
            break;
        }
    }

    let rrh_options: Vec<Option<Ue>> = std::iter::once(None)
        .chain((0..cfg.num_rue).map(|j| Some(Ue::Rue(j))))
        .chain((0..cfg.num_hue).map(|m| Some(Ue::Hue(m))))
        .collect();
    let hpn_options: Vec<Option<Ue>> = std::iter::once(None)
        .chain((0..cfg.num_hue).map(|m| Some(Ue::Hue(m))))
        .collect();
    let counts: Vec<usize> = (0..kr)
        .map(|_| rrh_options.len())
        .chain((0..kh).map(|_| hpn_options.len()))
        .collect();
    let depth = move_depth(&counts, opts.local_search_limit);
    if depth > 0 {
        let slots: Vec<(Slot, &[Option<Ue>])> = (0..kr)
            .map(|k| (Slot::Rrh(k), rrh_options.as_slice()))
            .chain((0..kh).map(|l| (Slot::Hpn(l), hpn_options.as_slice())))
            .collect();
        best = local_search(cfg, w, ch, best, &mut seen, &slots, depth);
    } else if opts.candidates_per_rb > 0 {
        // Too many full moves: keep the best few owners of each RB under the
        // final multipliers.
        let score = |slot: Slot, o: Option<Ue>| match (slot, o) {
            (_, None) => T::zero(),
            (Slot::Rrh(k), Some(Ue::Rue(j))) => scores.lambda[j * kr + k],
            (Slot::Rrh(k), Some(Ue::Hue(m))) => scores.phi[m * kr + k],
            (Slot::Hpn(l), Some(Ue::Hue(m))) => scores.gamma[m * kh + l],
            (Slot::Hpn(_), Some(Ue::Rue(_))) => T::infinity(),
        };
        let ranked: Vec<(Slot, Vec<Option<Ue>>)> = (0..kr)
            .map(|k| (Slot::Rrh(k), &rrh_options))
            .chain((0..kh).map(|l| (Slot::Hpn(l), &hpn_options)))
            .map(|(slot, options)| {
                let mut o = options.clone();
                o.sort_by(|&a, &b| {
                    score(slot, a)
                        .partial_cmp(&score(slot, b))
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                o.truncate(opts.candidates_per_rb);
                (slot, o)
            })
            .collect();
        let slots: Vec<(Slot, &[Option<Ue>])> = ranked.iter().map(|(s, o)| (*s, o.as_slice())).collect();
        let counts: Vec<usize> = slots.iter().map(|(_, o)| o.len()).collect();
        let depth = move_depth(&counts, opts.local_search_limit).max(1);
        best = local_search(cfg, w, ch, best, &mut seen, &slots, depth);
    }
    if opts.warm_start && !best.assignment.is_empty() {
        ds.theta.clone_from(&best.theta);
    }
    SubproblemSolution {
        assignment: best.assignment,
        pw_rrh: best.pw_rrh,
        pw_hpn: best.pw_hpn,
        objective: best.objective,
        dual_bound: best_dual,
        iterations,
        converged,
        waterfill_converged: wf_converged,
        theta: best.theta,
    }
}

/// One RB, identified by tier and index.
#[derive(Clone, Copy)]
enum Slot {
    Rrh(usize),
    Hpn(usize),
}

/// Gives `slot` to `owner`. An HUE taking an RB on one tier releases its RBs
/// on the other tier, so the result always satisfies the association rule.
fn reassign(a: &mut Assignment, slot: Slot, owner: Option<Ue>) {
    match slot {
        Slot::Rrh(k) => {
            a.rrh[k] = owner;
            if let Some(Ue::Hue(m)) = owner {
                a.hpn.iter_mut().filter(|x| **x == Some(m)).for_each(|x| *x = None);
            }
        }
        Slot::Hpn(l) => {
            let m = match owner {
                Some(Ue::Hue(m)) => Some(m),
                _ => None,
            };
            a.hpn[l] = m;
            if let Some(m) = m {
                a.rrh
                    .iter_mut()
                    .filter(|x| **x == Some(Ue::Hue(m)))
                    .for_each(|x| *x = None);
            }
        }
    }
}

/// Largest `k` such that all moves touching at most `k` RBs number at most
/// `limit`. Option counts per RB are `counts`.
fn move_depth(counts: &[usize], limit: usize) -> usize {
    // e[j] = elementary symmetric polynomial of degree j of the counts
    let mut e = vec![0u128; counts.len() + 1];
    e[0] = 1;
    for &c in counts {
        for j in (1..e.len()).rev() {
            e[j] += e[j - 1] * c as u128;
        }
    }
    let mut total = 0u128;
    let mut depth = 0;
    for (j, &ej) in e.iter().enumerate().skip(1) {
        total += ej;
        if total > limit as u128 {
            break;
        }
        depth = j;
    }
    depth
}

fn push_moves(a: &Assignment, slots: &[(Slot, &[Option<Ue>])], depth: usize, out: &mut Vec<Assignment>) {
    if depth == 0 {
        return;
    }
    for (s, &(slot, opts)) in slots.iter().enumerate() {
        for &o in opts {
            let mut b = a.clone();
            reassign(&mut b, slot, o);
            push_moves(&b, &slots[s + 1..], depth - 1, out);
            out.push(b);
        }
    }
}

/// Reassigns up to `depth` RBs at once, keeping the best improvement of each
/// round, until no move improves the objective.
fn local_search<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    ch: &ChannelState<T>,
    mut best: PowerSolution<T>,
    seen: &mut HashSet<Assignment>,
    slots: &[(Slot, &[Option<Ue>])],
    depth: usize,
) -> PowerSolution<T> {
    let mut moves = Vec::new();
    for _ in 0..100 {
        moves.clear();
        push_moves(&best.assignment, slots, depth, &mut moves);
        let mut improved = false;
        for a in moves.drain(..) {
            if a.is_empty() || !seen.insert(a.clone()) {
                continue;
            }
            let sol = optimize_powers(cfg, w, ch, &a);
            if sol.objective < best.objective {
                best = sol;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
    best
}

/// Subproblem objective `-sum_u B_u mu_u + Y_R sum_i p_i + Y_H p_H` of a decision,
/// with rates in data units per second.
pub fn scheduling_objective<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    ch: &ChannelState<T>,
    d: &ControlDecision<T>,
) -> Result<T, ModelError> {
    let r = rates(cfg, ch, d)?;
    let totals = crate::model::power_totals(cfg, d)?;
    let reward = r
        .hue
        .iter()
        .zip(&w.b_hue)
        .chain(r.rue.iter().zip(&w.b_rue))
        .fold(T::zero(), |acc, (&mu, &b)| acc + b * cfg.to_units(mu));
    let p_rrh = totals.per_rrh.iter().fold(T::zero(), |a, &p| a + p);
    Ok(w.y_r * p_rrh + w.y_h * totals.hpn - reward)
}

/// Builds the decision for a solved subproblem.
pub fn decision_from<T: Scalar>(
    cfg: &NetworkConfig<T>,
    sol: &SubproblemSolution<T>,
    admit: (Vec<T>, Vec<T>),
    aux: (Vec<T>, Vec<T>),
) -> ControlDecision<T> {
    ControlDecision {
        admit_hue: admit.0,
        admit_rue: admit.1,
        aux_hue: aux.0,
        aux_rue: aux.1,
        assoc: sol.assignment.assoc(cfg.num_hue),
        rrh_rb_owner: sol.assignment.rrh.clone(),
        hpn_rb_owner: sol.assignment.hpn.clone(),
        pw_rrh: sol.pw_rrh.clone(),
        pw_hpn: sol.pw_hpn.clone(),
    }
}

/// Per-slot solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotDiagnostics<T> {
    pub iterations: usize,
    pub converged: bool,
    pub waterfill_converged: bool,
    pub theta: Vec<T>,
    pub objective: T,
    pub dual_bound: T,
}

/// One slot of the controller. Arrivals are in data units.
pub fn solve_slot<T: Scalar>(
    cfg: &NetworkConfig<T>,
    qs: &QueueState<T>,
    ch: &ChannelState<T>,
    arrivals_hue: &[T],
    arrivals_rue: &[T],
    ds: &mut DualState<T>,
    opts: &SolverOptions,
) -> Result<(ControlDecision<T>, SlotDiagnostics<T>), ControllerError> {
    if !ch.matches(cfg) {
        return Err(ControllerError::Shape(
            "channel state does not match configuration".into(),
        ));
    }
    if qs.num_hue() != cfg.num_hue
        || qs.num_rue() != cfg.num_rue
        || arrivals_hue.len() != cfg.num_hue
        || arrivals_rue.len() != cfg.num_rue
    {
        return Err(ControllerError::Shape("queue or arrival vector length".into()));
    }
    let aux = select_auxiliary(cfg, qs);
    let admit = admit_traffic(qs, arrivals_hue, arrivals_rue);
    let w = DriftWeights::from_queues(cfg, qs);
    let sol = solve_subproblem(cfg, &w, ch, ds, opts);
    let d = decision_from(cfg, &sol, admit, aux);
    d.validate(cfg, Some((arrivals_hue, arrivals_rue)))?;
    let diag = SlotDiagnostics {
        iterations: sol.iterations,
        converged: sol.converged,
        waterfill_converged: sol.waterfill_converged,
        theta: sol.theta,
        objective: sol.objective,
        dual_bound: sol.dual_bound,
    };
    Ok((d, diag))
}
