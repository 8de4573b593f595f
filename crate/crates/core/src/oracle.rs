//! Brute-force reference solver for tiny instances and the maximum-sum-rate
//! (MSR) baseline.

use rand::Rng;
use thiserror::Error;

use crate::controller::{decision_from, solve_subproblem, Assignment, DriftWeights, DualState, SolverOptions};
use crate::model::{power_totals, rates, ChannelState, ControlDecision, NetworkConfig, Ue};
use crate::scalar::Scalar;

/// Largest number of (assignment, power point) combinations the enumerator accepts.
pub const ENUMERATION_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("enumeration needs {needed} combinations, budget is {budget}")]
    BudgetExceeded { needed: u64, budget: u64 },
    #[error("EE requirement {required} unreachable; best achievable is {achieved}")]
    Infeasible { required: f64, achieved: f64 },
}

/// A small subproblem instance: configuration, weights and one channel draw.
#[derive(Clone, Debug, PartialEq)]
pub struct TinyInstance<T> {
    pub cfg: NetworkConfig<T>,
    pub weights: DriftWeights<T>,
    pub channel: ChannelState<T>,
    /// Power grid points per node budget, excluding zero (step `p_max / grid_steps`).
    pub grid_steps: usize,
}

/// Enumerated optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct Enumerated<T> {
    pub assignment: Assignment,
    pub pw_rrh: Vec<T>,
    pub pw_hpn: Vec<T>,
    pub objective: T,
    pub combinations: u64,
}

fn binom(n: u64, k: u64) -> u64 {
    (1..=k).fold(1u64, |acc, i| acc.saturating_mul(n - k + i) / i)
}

/// All assignments satisfying the non-reuse and association constraints.
pub fn all_assignments(num_hue: usize, num_rue: usize, kr: usize, kh: usize) -> Vec<Assignment> {
    let rrh_opts: Vec<Option<Ue>> = std::iter::once(None)
        .chain((0..num_rue).map(|j| Some(Ue::Rue(j))))
        .chain((0..num_hue).map(|m| Some(Ue::Hue(m))))
        .collect();
    let hpn_opts: Vec<Option<usize>> = std::iter::once(None).chain((0..num_hue).map(Some)).collect();
    let mut out = vec![Assignment::empty(kr, kh)];
    for k in 0..kr {
        out = out
            .into_iter()
            .flat_map(|a| {
                rrh_opts.iter().map(move |&o| {
                    let mut b = a.clone();
                    b.rrh[k] = o;
                    b
                })
            })
            .collect();
    }
    for l in 0..kh {
        out = out
            .into_iter()
            .flat_map(|a| {
                hpn_opts.iter().map(move |&o| {
                    let mut b = a.clone();
                    b.hpn[l] = o;
                    b
                })
            })
            .collect();
    }
    out.retain(|a| a.is_consistent(num_hue));
    out
}

/// Grid tuples of `r` nonnegative step counts with sum at most `steps`.
fn simplex_points(r: usize, steps: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; r];
    fn rec(idx: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx == cur.len() {
            out.push(cur.clone());
            return;
        }
        for s in 0..=left {
            cur[idx] = s;
            rec(idx + 1, left - s, cur, out);
        }
    }
    rec(0, steps, &mut cur, &mut out);
    out
}

/// Subproblem objective evaluated straight from the rate formula, kept apart
/// from the controller's own bookkeeping.
fn oracle_objective<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    ch: &ChannelState<T>,
    asg: &Assignment,
    pw_rrh: &[T],
    pw_hpn: &[T],
) -> T {
    let kr = cfg.num_rb_rrh;
    let per_rb = cfg.bandwidth_rb / cfg.data_unit_bits;
    let mut value = T::zero();
    for (k, owner) in asg.rrh.iter().enumerate() {
        if let Some(ue) = *owner {
            let (b, snr) = match ue {
                Ue::Rue(j) => (
                    w.b_rue[j],
                    (0..cfg.num_rrh).fold(T::zero(), |s, i| s + pw_rrh[i * kr + k] * ch.g_rrh_rue(i, j, k)),
                ),
                Ue::Hue(m) => (
                    w.b_hue[m],
                    (0..cfg.num_rrh).fold(T::zero(), |s, i| s + pw_rrh[i * kr + k] * ch.g_rrh_hue(i, m, k)),
                ),
            };
            value = value - b * per_rb * (T::one() + snr).log2();
            for i in 0..cfg.num_rrh {
                value = value + w.y_r * pw_rrh[i * kr + k];
            }
        }
    }
    for (l, owner) in asg.hpn.iter().enumerate() {
        if let Some(m) = *owner {
            let p = pw_hpn[l];
            value = value + w.y_h * p - w.b_hue[m] * per_rb * (T::one() + p * ch.g_hpn_hue(m, l)).log2();
        }
    }
    value
}

/// Number of power points the enumerator visits for `asg`.
fn combinations(asg: &Assignment, num_rrh: usize, steps: usize) -> u64 {
    let r = asg.rrh.iter().flatten().count() as u64;
    let h = asg.hpn.iter().flatten().count() as u64;
    let s = steps as u64;
    binom(s + r, r).saturating_pow(num_rrh as u32) + binom(s + h, h)
}

/// Exhaustive minimizer of `-sum B mu + Y_R sum p_i + Y_H p_H` over every
/// binary assignment and every grid power allocation within the node budgets.
///
/// Given an assignment the two tiers share no variables, so each tier's grid
/// is searched on its own.
pub fn enumerate_subproblem3<T: Scalar>(inst: &TinyInstance<T>) -> Result<Enumerated<T>, OracleError> {
    let cfg = &inst.cfg;
    let (n, kr, kh) = (cfg.num_rrh, cfg.num_rb_rrh, cfg.num_rb_hpn);
    let steps = inst.grid_steps.max(1);
    let assignments = all_assignments(cfg.num_hue, cfg.num_rue, kr, kh);
    let needed = assignments
        .iter()
        .fold(0u64, |acc, a| acc.saturating_add(combinations(a, n, steps)));
    if needed > ENUMERATION_BUDGET {
        return Err(OracleError::BudgetExceeded {
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }
    let w = &inst.weights;
    let ch = &inst.channel;
    let d_rrh = cfg.p_max_rrh / T::from_count(steps);
    let d_hpn = cfg.p_max_hpn / T::from_count(steps);
    let mut best = Enumerated {
        assignment: Assignment::empty(kr, kh),
        pw_rrh: vec![T::zero(); n * kr],
        pw_hpn: vec![T::zero(); kh],
        objective: T::zero(),
        combinations: needed,
    };
    for asg in &assignments {
        // RRH tier
        let owned: Vec<usize> = (0..kr).filter(|&k| asg.rrh[k].is_some()).collect();
        let pts = simplex_points(owned.len(), steps);
        let mut best_rrh = (T::infinity(), vec![T::zero(); n * kr]);
        let mut idx = vec![0usize; n];
        let mut pw = vec![T::zero(); n * kr];
        let zero_hpn = vec![T::zero(); kh];
        let zero_rrh = vec![T::zero(); n * kr];
        let rrh_only = Assignment {
            rrh: asg.rrh.clone(),
            hpn: vec![None; kh],
        };
        'outer: loop {
            for i in 0..n {
                for (pos, &k) in owned.iter().enumerate() {
                    pw[i * kr + k] = T::from_count(pts[idx[i]][pos]) * d_rrh;
                }
            }
            let v = oracle_objective(cfg, w, ch, &rrh_only, &pw, &zero_hpn);
            if v < best_rrh.0 {
                best_rrh = (v, pw.clone());
            }
            for i in 0..n {
                idx[i] += 1;
                if idx[i] < pts.len() {
                    continue 'outer;
                }
                idx[i] = 0;
            }
            break;
        }
        // HPN tier
        let owned_h: Vec<usize> = (0..kh).filter(|&l| asg.hpn[l].is_some()).collect();
        let hpn_only = Assignment {
            rrh: vec![None; kr],
            hpn: asg.hpn.clone(),
        };
        let mut best_hpn = (T::infinity(), vec![T::zero(); kh]);
        for pt in simplex_points(owned_h.len(), steps) {
            let mut ph = vec![T::zero(); kh];
            for (pos, &l) in owned_h.iter().enumerate() {
                ph[l] = T::from_count(pt[pos]) * d_hpn;
            }
            let v = oracle_objective(cfg, w, ch, &hpn_only, &zero_rrh, &ph);
            if v < best_hpn.0 {
                best_hpn = (v, ph);
            }
        }
        let total = best_rrh.0 + best_hpn.0;
        if total < best.objective {
            best.objective = total;
            best.assignment = asg.clone();
            best.pw_rrh = best_rrh.1;
            best.pw_hpn = best_hpn.1;
        }
    }
    Ok(best)
}

/// Shapes whose enumeration always fits the budget at 40 grid steps:
/// `(num_rrh, num_hue, num_rue, num_rb_rrh, num_rb_hpn)`.
pub const TINY_SHAPES: &[(usize, usize, usize, usize, usize)] = &[
    (1, 1, 1, 1, 1),
    (1, 1, 2, 2, 0),
    (1, 2, 1, 2, 1),
    (1, 1, 1, 2, 1),
    (1, 2, 1, 1, 2),
    (1, 1, 2, 3, 0),
    (2, 1, 1, 1, 1),
    (2, 2, 1, 1, 2),
    (2, 1, 2, 1, 0),
    (2, 1, 1, 2, 0),
];

/// Random tiny instance with gains spanning several orders of magnitude and
/// weights that make both silence and full power plausible optima.
pub fn random_tiny_instance<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> TinyInstance<T> {
    let (n, nh, nr, kr, kh) = TINY_SHAPES[rng.random_range(0..TINY_SHAPES.len())];
    let base = NetworkConfig::<T>::reference_defaults();
    let cfg = NetworkConfig {
        num_rrh: n,
        num_hue: nh,
        num_rue: nr,
        num_rb_rrh: kr,
        num_rb_hpn: kh,
        bandwidth_total: base.bandwidth_rb * T::from_count(kr + kh),
        ..base
    };
    let gain = |rng: &mut R| T::lit(10f64.powf(rng.random_range(-1.0..2.5)));
    let rrh_rue = (0..n * nr * kr).map(|_| gain(rng)).collect();
    let rrh_hue = (0..n * nh * kr).map(|_| gain(rng)).collect();
    let hpn_hue = (0..nh * kh).map(|_| gain(rng)).collect();
    let channel = ChannelState::from_parts(&cfg, rrh_rue, rrh_hue, hpn_hue).expect("shape");
    let weight = |rng: &mut R| {
        if rng.random_bool(0.15) {
            T::zero()
        } else {
            T::lit(rng.random_range(0.05..2.0))
        }
    };
    let b_hue = (0..nh).map(|_| weight(rng)).collect();
    let b_rue = (0..nr).map(|_| weight(rng)).collect();
    let y = if rng.random_bool(0.3) {
        T::zero()
    } else {
        T::lit(rng.random_range(0.0..15.0))
    };
    let weights = DriftWeights {
        b_hue,
        b_rue,
        y_r: y * cfg.drain_eff_rrh,
        y_h: y * cfg.drain_eff_hpn,
    };
    TinyInstance {
        cfg,
        weights,
        channel,
        grid_steps: 40,
    }
}

/// MSR decision for one slot together with the power price that enforced the EE floor.
#[derive(Clone, Debug, PartialEq)]
pub struct MsrOutcome<T> {
    pub decision: ControlDecision<T>,
    /// EE level `q` pricing power as `W q` per watt; zero when the floor is slack.
    pub price: T,
    /// Slot EE in bits/Hz/J.
    pub ee: T,
    pub solves: usize,
}

fn msr_at<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    q: T,
    ds: &mut DualState<T>,
    opts: &SolverOptions,
) -> (ControlDecision<T>, T) {
    let w = DriftWeights::uniform(cfg, T::one(), cfg.ee_rate_coeff() * q);
    let sol = solve_subproblem(cfg, &w, ch, ds, opts);
    let zeros = || (vec![T::zero(); cfg.num_hue], vec![T::zero(); cfg.num_rue]);
    let d = decision_from(cfg, &sol, zeros(), zeros());
    let mu = rates(cfg, ch, &d).expect("shapes match").total();
    let p = power_totals(cfg, &d).expect("shapes match").sum;
    (d, mu / (cfg.bandwidth_total * p))
}

/// Maximum-sum-rate allocation under full buffers.
///
/// Every UE gets unit weight. When the slot EE at zero power price falls short
/// of `ee_required`, the power price `W q` is bisected over `q in [0, eta_req]`
/// for the smallest `q` meeting the floor (tolerance `1e-3` relative on `q`).
pub fn msr_solve<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    ds: &mut DualState<T>,
    opts: &SolverOptions,
) -> Result<MsrOutcome<T>, OracleError> {
    let eta = cfg.ee_required;
    let (d0, ee0) = msr_at(cfg, ch, T::zero(), ds, opts);
    if ee0 >= eta {
        return Ok(MsrOutcome {
            decision: d0,
            price: T::zero(),
            ee: ee0,
            solves: 1,
        });
    }
    let (d_hi, ee_hi) = msr_at(cfg, ch, eta, ds, opts);
    let mut solves = 2;
    if ee_hi < eta {
        return Err(OracleError::Infeasible {
            required: eta.as_f64(),
            achieved: ee_hi.as_f64(),
        });
    }
    let (mut lo, mut hi) = (T::zero(), eta);
    let mut best = (d_hi, ee_hi);
    while hi - lo > T::lit(1e-3) * eta {
        let mid = T::lit(0.5) * (lo + hi);
        let (d, ee) = msr_at(cfg, ch, mid, ds, opts);
        solves += 1;
        if ee >= eta {
            hi = mid;
            best = (d, ee);
        } else {
            lo = mid;
        }
    }
    Ok(MsrOutcome {
        decision: best.0,
        price: hi,
        ee: best.1,
        solves,
    })
}
