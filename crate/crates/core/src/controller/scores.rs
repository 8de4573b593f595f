//! Candidate powers, RB scores and extreme-point RB assignment.

use crate::model::{ChannelState, NetworkConfig, Ue};
use crate::scalar::Scalar;

use super::waterfill::{pair_value, waterfill_coupled, waterfill_single};
use super::DriftWeights;

/// Candidate powers of every (UE, RB) pair under the current multipliers.
///
/// RRH-tier entries are stored `[(ue * K_R + k) * N + i]`, HPN entries `[m * K_H + l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Candidates<T> {
    pub rue: Vec<T>,
    pub hue_rrh: Vec<T>,
    pub hpn: Vec<T>,
    /// False when some coupled water-filling hit its sweep limit.
    pub converged: bool,
}

impl<T: Scalar> Candidates<T> {
    pub fn new<U>(cfg: &NetworkConfig<U>) -> Self {
        let (n, kr) = (cfg.num_rrh, cfg.num_rb_rrh);
        Self {
            rue: vec![T::zero(); cfg.num_rue * kr * n],
            hue_rrh: vec![T::zero(); cfg.num_hue * kr * n],
            hpn: vec![T::zero(); cfg.num_hue * cfg.num_rb_hpn],
            converged: true,
        }
    }

    /// Powers of RRH-tier pair `(ue, k)` over all RRHs.
    pub fn rrh(&self, n: usize, kr: usize, ue: Ue, k: usize) -> &[T] {
        let (buf, idx) = match ue {
            Ue::Rue(j) => (&self.rue, j * kr + k),
            Ue::Hue(m) => (&self.hue_rrh, m * kr + k),
        };
        &buf[idx * n..(idx + 1) * n]
    }
}

/// `Phi_mk` (HUE on RRH tier), `Lambda_jk` (RUE) and `Gamma_ml` (HUE on HPN tier).
///
/// Each score is `sum_i (Y + theta_i) p_i - B * rate_scale * log2(1 + sum_i p_i g_i)`
/// at the candidate powers; negative scores mean serving the pair pays off.
#[derive(Clone, Debug, PartialEq)]
pub struct RbScores<T> {
    /// `[m * K_R + k]`
    pub phi: Vec<T>,
    /// `[j * K_R + k]`
    pub lambda: Vec<T>,
    /// `[m * K_H + l]`
    pub gamma: Vec<T>,
    pub num_rb_rrh: usize,
    pub num_rb_hpn: usize,
}

impl<T: Scalar> RbScores<T> {
    pub fn new<U>(cfg: &NetworkConfig<U>) -> Self {
        Self {
            phi: vec![T::zero(); cfg.num_hue * cfg.num_rb_rrh],
            lambda: vec![T::zero(); cfg.num_rue * cfg.num_rb_rrh],
            gamma: vec![T::zero(); cfg.num_hue * cfg.num_rb_hpn],
            num_rb_rrh: cfg.num_rb_rrh,
            num_rb_hpn: cfg.num_rb_hpn,
        }
    }

    pub fn num_hue(&self) -> usize {
        if self.num_rb_rrh > 0 {
            self.phi.len() / self.num_rb_rrh
        } else if self.num_rb_hpn > 0 {
            self.gamma.len() / self.num_rb_hpn
        } else {
            0
        }
    }

    pub fn num_rue(&self) -> usize {
        if self.num_rb_rrh > 0 {
            self.lambda.len() / self.num_rb_rrh
        } else {
            0
        }
    }

    /// Lagrangian value at the current multipliers, without the `-theta * p_max` terms:
    /// every RB takes its most negative score, ignoring the association coupling.
    pub fn relaxed_minimum(&self) -> T {
        let (kr, kh) = (self.num_rb_rrh, self.num_rb_hpn);
        let mut total = T::zero();
        for k in 0..kr {
            let best = self
                .phi
                .iter()
                .skip(k)
                .step_by(kr)
                .chain(self.lambda.iter().skip(k).step_by(kr))
                .fold(T::zero(), |b, &s| b.min(s));
            total = total + best;
        }
        for l in 0..kh {
            let best = self.gamma.iter().skip(l).step_by(kh).fold(T::zero(), |b, &s| b.min(s));
            total = total + best;
        }
        total
    }
}

/// Per-node power prices `(Y_H + theta_0, [Y_R + theta_i])`.
pub(crate) fn prices<T: Scalar>(w: &DriftWeights<T>, theta: &[T], out: &mut Vec<T>) -> T {
    out.clear();
    out.extend(theta[1..].iter().map(|&t| w.y_r + t));
    w.y_h + theta[0]
}

/// Water-filling level numerator `a = B * rate_scale / ln 2`.
#[inline]
pub(crate) fn level_weight<T: Scalar>(b: T, rate_scale: T) -> T {
    b * rate_scale / T::LN_2()
}

/// Computes candidate powers and scores for every pair. `theta[0]` prices the
/// HPN, `theta[1 + i]` RRH `i`.
pub fn score_rbs<T: Scalar>(
    cfg: &NetworkConfig<T>,
    w: &DriftWeights<T>,
    theta: &[T],
    ch: &ChannelState<T>,
    cand: &mut Candidates<T>,
    scores: &mut RbScores<T>,
) {
    let (n, kr, kh) = (cfg.num_rrh, cfg.num_rb_rrh, cfg.num_rb_hpn);
    let rs = cfg.rate_scale();
    let mut pr = Vec::with_capacity(n);
    let price_h = prices(w, theta, &mut pr);
    let mut gains = vec![T::zero(); n];
    cand.converged = true;
    for j in 0..cfg.num_rue {
        let a = level_weight(w.b_rue[j], rs);
        for k in 0..kr {
            for (i, g) in gains.iter_mut().enumerate() {
                *g = ch.g_rrh_rue(i, j, k);
            }
            let idx = j * kr + k;
            let out = &mut cand.rue[idx * n..(idx + 1) * n];
            cand.converged &= waterfill_coupled(a, &pr, &gains, cfg.p_max_rrh, out);
            scores.lambda[idx] = -pair_value(a, &pr, &gains, out);
        }
    }
    for m in 0..cfg.num_hue {
        let a = level_weight(w.b_hue[m], rs);
        for k in 0..kr {
            for (i, g) in gains.iter_mut().enumerate() {
                *g = ch.g_rrh_hue(i, m, k);
            }
            let idx = m * kr + k;
            let out = &mut cand.hue_rrh[idx * n..(idx + 1) * n];
            cand.converged &= waterfill_coupled(a, &pr, &gains, cfg.p_max_rrh, out);
            scores.phi[idx] = -pair_value(a, &pr, &gains, out);
        }
        for l in 0..kh {
            let g = ch.g_hpn_hue(m, l);
            let p = waterfill_single(a, price_h, g, cfg.p_max_hpn);
            cand.hpn[m * kh + l] = p;
            scores.gamma[m * kh + l] = price_h * p - a * (p * g).ln_1p();
        }
    }
}

/// Binary RB ownership on both tiers. HUE association follows from it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assignment {
    pub rrh: Vec<Option<Ue>>,
    pub hpn: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(num_rb_rrh: usize, num_rb_hpn: usize) -> Self {
        Self {
            rrh: vec![None; num_rb_rrh],
            hpn: vec![None; num_rb_hpn],
        }
    }

    /// `s_m = 1` iff HUE `m` owns at least one RRH-tier RB.
    pub fn assoc(&self, num_hue: usize) -> Vec<bool> {
        let mut s = vec![false; num_hue];
        for owner in self.rrh.iter().flatten() {
            if let Ue::Hue(m) = owner {
                s[*m] = true;
            }
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.rrh.iter().all(Option::is_none) && self.hpn.iter().all(Option::is_none)
    }

    /// True when no HUE holds RBs on both tiers.
    pub fn is_consistent(&self, num_hue: usize) -> bool {
        let s = self.assoc(num_hue);
        self.hpn.iter().flatten().all(|&m| !s[m])
    }
}

/// Extreme-point recovery from the scores.
///
/// RRH-tier RB `k`: the best HUE `m*` (lowest `Phi`) takes it when `Phi* < 0`,
/// `Phi*` is strictly below every `Lambda_jk` and strictly below `min_l Gamma_m*l`
/// (vacuous without HPN RBs). Otherwise the best RUE takes it if its score is
/// negative. HPN RB `l` goes to the HUE with the lowest negative `Gamma_ml`
/// among those not associated with the RRH tier. Ties go to the lowest index.
pub fn assign_rbs<T: Scalar>(scores: &RbScores<T>) -> Assignment {
    let (kr, kh) = (scores.num_rb_rrh, scores.num_rb_hpn);
    let (nh, nr) = (scores.num_hue(), scores.num_rue());
    let mut asg = Assignment::empty(kr, kh);
    let argmin = |it: &mut dyn Iterator<Item = T>| -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for (idx, s) in it.enumerate() {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((idx, s));
            }
        }
        best
    };
    let min_gamma: Vec<T> = (0..nh)
        .map(|m| {
            scores.gamma[m * kh..(m + 1) * kh]
                .iter()
                .fold(T::infinity(), |b, &s| b.min(s))
        })
        .collect();
    for k in 0..kr {
        let hue = argmin(&mut (0..nh).map(|m| scores.phi[m * kr + k]));
        let rue = argmin(&mut (0..nr).map(|j| scores.lambda[j * kr + k]));
        let rue_best = rue.map_or(T::infinity(), |(_, s)| s);
        asg.rrh[k] = match hue {
            Some((m, phi)) if phi < T::zero() && phi < rue_best && phi < min_gamma[m] => Some(Ue::Hue(m)),
            _ => rue.filter(|&(_, s)| s < T::zero()).map(|(j, _)| Ue::Rue(j)),
        };
    }
    let s = asg.assoc(nh);
    for l in 0..kh {
        let best = argmin(&mut (0..nh).map(|m| if s[m] { T::infinity() } else { scores.gamma[m * kh + l] }));
        asg.hpn[l] = best.filter(|&(_, g)| g < T::zero()).map(|(m, _)| m);
    }
    asg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(phi: Vec<f64>, lambda: Vec<f64>, gamma: Vec<f64>, kr: usize, kh: usize) -> RbScores<f64> {
        RbScores {
            phi,
            lambda,
            gamma,
            num_rb_rrh: kr,
            num_rb_hpn: kh,
        }
    }

    #[test]
    fn nonnegative_scores_assign_nothing() {
        let s = scores(vec![0.0, 1.0], vec![2.0, 0.0], vec![0.5, 0.0], 2, 1);
        let a = assign_rbs(&s);
        assert_eq!(a, Assignment::empty(2, 1));
    }

    #[test]
    fn one_negative_lambda_wins() {
        // 1 HUE, 2 RUEs, 2 RRH RBs, no HPN RBs
        let s = scores(vec![0.0, 0.0], vec![0.0, 0.0, 0.0, -1.0], vec![], 2, 0);
        let a = assign_rbs(&s);
        assert_eq!(a.rrh, vec![None, Some(Ue::Rue(1))]);
    }

    #[test]
    fn ties_favor_rue_then_lowest_index() {
        let s = scores(vec![-1.0], vec![-1.0, -1.0], vec![], 1, 0);
        assert_eq!(assign_rbs(&s).rrh, vec![Some(Ue::Rue(0))]);
        let s = scores(vec![-2.0, -2.0], vec![-1.0], vec![], 1, 0);
        assert_eq!(assign_rbs(&s).rrh, vec![Some(Ue::Hue(0))]);
    }

    #[test]
    fn hpn_guard_and_association() {
        // HUE 0 prefers its HPN RB (Gamma -5 < Phi -3): RRH RB falls to RUE,
        // HUE 1 wins its RRH RB and is excluded from the HPN tier.
        let s = scores(vec![-3.0, -4.0], vec![-1.0], vec![-5.0, -2.0], 1, 1);
        let a = assign_rbs(&s);
        assert_eq!(a.rrh, vec![Some(Ue::Hue(1))]);
        assert_eq!(a.hpn, vec![Some(0)]);
        assert!(a.is_consistent(2));
        assert_eq!(a.assoc(2), vec![false, true]);
    }

    #[test]
    fn hue_blocked_by_guard_leaves_rb_to_rue() {
        let s = scores(vec![-3.0], vec![-1.0], vec![-5.0], 1, 1);
        let a = assign_rbs(&s);
        assert_eq!(a.rrh, vec![Some(Ue::Rue(0))]);
        assert_eq!(a.hpn, vec![Some(0)]);
    }

    #[test]
    fn relaxed_minimum_sums_best_negative_scores() {
        let s = scores(vec![-3.0, 1.0], vec![-1.0, -2.0], vec![-5.0, 2.0], 2, 1);
        assert_eq!(s.relaxed_minimum(), -3.0 - 2.0 - 5.0);
    }
}
