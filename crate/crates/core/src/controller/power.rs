//! Exact power allocation for a fixed RB assignment.
//!
//! With ownership fixed the subproblem is concave in the powers. The HPN tier
//! is a single budget-constrained water-filling; the RRH tier is solved by
//! block coordinate ascent over RRHs, each block being a water-filling whose
//! floors include the SNR the other RRHs already deliver on that RB.

use crate::model::{ChannelState, NetworkConfig, Ue};
use crate::scalar::Scalar;

use super::scores::{level_weight, Assignment};
use super::waterfill::waterfill_budget;
use super::DriftWeights;

const BLOCK_SWEEPS: usize = 100;
const BLOCK_TOL: f64 = 1e-10;

/// Optimal powers for one assignment.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerSolution<T> {
    /// `[i * K_R + k]`
    pub pw_rrh: Vec<T>,
    pub pw_hpn: Vec<T>,
    /// Budget multipliers at the optimum, `theta[0]` for the HPN.
    pub theta: Vec<T>,
    /// Subproblem objective `-sum B mu + Y_R sum p_i + Y_H p_H`.
    pub objective: T,
    /// Assignment with zero-power RBs released.
    pub assignment: Assignment,
    pub converged: bool,
}

fn ue_weight<T: Scalar>(w: &DriftWeights<T>, ue: Ue) -> T {
    match ue {
        Ue::Rue(j) => w.b_rue[j],
        Ue::Hue(m) => w.b_hue[m],
    }
}

/// Objective of a power allocation under `asg`.
pub(crate) fn objective_of<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    ch: &ChannelState<T>,
    asg: &Assignment,
    pw_rrh: &[T],
    pw_hpn: &[T],
) -> T {
    let (n, kr) = (cfg.num_rrh, cfg.num_rb_rrh);
    let rs = cfg.rate_scale();
    let mut reward = T::zero();
    let mut p_rrh = T::zero();
    for (k, owner) in asg.rrh.iter().enumerate() {
        let Some(ue) = *owner else { continue };
        let mut snr = T::zero();
        for i in 0..n {
            let p = pw_rrh[i * kr + k];
            snr = snr + p * ch.g_rrh(i, ue, k);
            p_rrh = p_rrh + p;
        }
        reward = reward + ue_weight(w, ue) * snr.ln_1p();
    }
    let mut p_hpn = T::zero();
    for (l, owner) in asg.hpn.iter().enumerate() {
        let Some(m) = *owner else { continue };
        let p = pw_hpn[l];
        reward = reward + w.b_hue[m] * (p * ch.g_hpn_hue(m, l)).ln_1p();
        p_hpn = p_hpn + p;
    }
    w.y_r * p_rrh + w.y_h * p_hpn - rs * reward / T::LN_2()
}

/// Solves the power subproblem for `asg` and releases RBs left without power.
pub fn optimize_powers<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    ch: &ChannelState<T>,
    asg: &Assignment,
) -> PowerSolution<T> {
    let (n, kr, kh) = (cfg.num_rrh, cfg.num_rb_rrh, cfg.num_rb_hpn);
    let rs = cfg.rate_scale();
    let mut theta = vec![T::zero(); n + 1];
    let mut order = Vec::new();

    let mut pw_hpn = vec![T::zero(); kh];
    {
        let owned: Vec<usize> = (0..kh).filter(|&l| asg.hpn[l].is_some()).collect();
        let a: Vec<T> = owned
            .iter()
            .map(|&l| level_weight(w.b_hue[asg.hpn[l].unwrap()], rs))
            .collect();
        let d: Vec<T> = owned
            .iter()
            .map(|&l| ch.g_hpn_hue(asg.hpn[l].unwrap(), l).recip())
            .collect();
        let mut out = vec![T::zero(); owned.len()];
        let fill = waterfill_budget(&a, &d, w.y_h, cfg.p_max_hpn, &mut out, &mut order);
        theta[0] = fill.theta;
        for (&l, &p) in owned.iter().zip(&out) {
            pw_hpn[l] = p;
        }
    }

    let mut pw_rrh = vec![T::zero(); n * kr];
    let owned: Vec<(usize, Ue)> = asg
        .rrh
        .iter()
        .enumerate()
        .filter_map(|(k, o)| o.map(|ue| (k, ue)))
        .collect();
    let a: Vec<T> = owned
        .iter()
        .map(|&(_, ue)| level_weight(ue_weight(w, ue), rs))
        .collect();
    // snr[k] over all RRHs, kept in sync with pw_rrh.
    let mut snr = vec![T::zero(); owned.len()];
    let mut d = vec![T::zero(); owned.len()];
    let mut out = vec![T::zero(); owned.len()];
    let mut converged = owned.is_empty();
    let tol = T::lit(BLOCK_TOL) * cfg.p_max_rrh;
    for _ in 0..if owned.is_empty() { 0 } else { BLOCK_SWEEPS } {
        let mut change = T::zero();
        for i in 0..n {
            for (idx, &(k, ue)) in owned.iter().enumerate() {
                let g = ch.g_rrh(i, ue, k);
                let other = snr[idx] - pw_rrh[i * kr + k] * g;
                d[idx] = if g > T::zero() {
                    (T::one() + other.pos()) / g
                } else {
                    T::infinity()
                };
            }
            let fill = waterfill_budget(&a, &d, w.y_r, cfg.p_max_rrh, &mut out, &mut order);
            theta[i + 1] = fill.theta;
            for (idx, &(k, ue)) in owned.iter().enumerate() {
                let g = ch.g_rrh(i, ue, k);
                let old = pw_rrh[i * kr + k];
                change = change.max((out[idx] - old).abs());
                snr[idx] = snr[idx] + (out[idx] - old) * g;
                pw_rrh[i * kr + k] = out[idx];
            }
        }
        if change <= tol {
            converged = true;
            break;
        }
    }

    let mut pruned = asg.clone();
    for &(k, _) in &owned {
        if (0..n).all(|i| pw_rrh[i * kr + k] <= T::zero()) {
            pruned.rrh[k] = None;
            (0..n).for_each(|i| pw_rrh[i * kr + k] = T::zero());
        }
    }
    for l in 0..kh {
        if pw_hpn[l] <= T::zero() {
            pruned.hpn[l] = None;
            pw_hpn[l] = T::zero();
        }
    }
    let objective = objective_of(cfg, w, ch, &pruned, &pw_rrh, &pw_hpn);
    PowerSolution {
        pw_rrh,
        pw_hpn,
        theta,
        objective,
        assignment: pruned,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> NetworkConfig<f64> {
        NetworkConfig {
            num_rrh: 2,
            num_hue: 1,
            num_rue: 1,
            num_rb_rrh: 2,
            num_rb_hpn: 1,
            bandwidth_total: 45e3,
            ..NetworkConfig::reference_defaults()
        }
    }

    fn weights(b: f64, y: f64) -> DriftWeights<f64> {
        DriftWeights {
            b_hue: vec![b],
            b_rue: vec![b],
            y_r: y,
            y_h: y,
        }
    }

    #[test]
    fn budget_binds_with_zero_price() {
        let cfg = cfg();
        let mut ch = ChannelState::zeros(&cfg);
        for i in 0..2 {
            for k in 0..2 {
                ch.set_rrh_rue(i, 0, k, 1.0 + i as f64 + k as f64);
            }
        }
        ch.set_hpn_hue(0, 0, 2.0);
        let asg = Assignment {
            rrh: vec![Some(Ue::Rue(0)), Some(Ue::Rue(0))],
            hpn: vec![Some(0)],
        };
        let sol = optimize_powers(&cfg, &weights(1.0, 0.0), &ch, &asg);
        assert!(sol.converged);
        for i in 0..2 {
            let p: f64 = sol.pw_rrh[i * 2..i * 2 + 2].iter().sum();
            assert!((p - 3.0).abs() < 1e-9);
            assert!(sol.theta[i + 1] > 0.0);
        }
        assert!((sol.pw_hpn[0] - 10.0).abs() < 1e-9);
        assert!(sol.objective < 0.0);
    }

    #[test]
    fn zero_weight_releases_rbs() {
        let cfg = cfg();
        let mut ch = ChannelState::zeros(&cfg);
        ch.set_rrh_hue(0, 0, 0, 5.0);
        ch.set_hpn_hue(0, 0, 5.0);
        let asg = Assignment {
            rrh: vec![Some(Ue::Hue(0)), None],
            hpn: vec![None],
        };
        let sol = optimize_powers(&cfg, &weights(0.0, 1.0), &ch, &asg);
        assert_eq!(sol.assignment, Assignment::empty(2, 1));
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn block_ascent_beats_grid() {
        let cfg = NetworkConfig {
            p_max_rrh: 1.0,
            ..cfg()
        };
        let mut ch = ChannelState::zeros(&cfg);
        let g = [[3.0, 0.4], [1.0, 2.5]];
        for i in 0..2 {
            for k in 0..2 {
                ch.set_rrh_rue(i, 0, k, g[i][k]);
            }
        }
        let asg = Assignment {
            rrh: vec![Some(Ue::Rue(0)), Some(Ue::Rue(0))],
            hpn: vec![None],
        };
        let w = weights(0.01, 0.05);
        let sol = optimize_powers(&cfg, &w, &ch, &asg);
        let n = 60;
        let mut best = f64::INFINITY;
        for a in 0..=n {
            for b in 0..=(n - a) {
                for c in 0..=n {
                    for d in 0..=(n - c) {
                        let h = |x: usize| x as f64 / n as f64;
                        let pw = [h(a), h(b), h(c), h(d)];
                        best = best.min(objective_of(&cfg, &w, &ch, &asg, &pw, &[0.0]));
                    }
                }
            }
        }
        assert!(sol.objective <= best + 1e-9, "{} vs {best}", sol.objective);
    }
}
