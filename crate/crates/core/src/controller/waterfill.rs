//! Per-pair water-filling candidates and the budget-constrained water-filling
//! used when the RB assignment is fixed.
//!
//! All routines maximize `a * ln(1 + sum_i p_i g_i) - sum_i c_i p_i`, where
//! `a = B * rate_scale / ln 2` turns the natural log into the weighted rate and
//! `c_i = Y + theta_i` is the price of power at node `i`.

use crate::scalar::Scalar;

/// Sweep limit and tolerance of the cyclic coordinate iteration.
pub const MAX_SWEEPS: usize = 200;
pub const SWEEP_TOL: f64 = 1e-8;

/// Optimal power on one HPN-tier pair, clipped to `[0, p_max]`.
///
/// `level = B * rate_scale / ((Y_H + theta_0) ln 2)`; the result is
/// `[level - 1/g]^+`. A zero price makes the level infinite, so the power goes
/// to `p_max` whenever the pair carries any weight.
#[inline]
pub fn waterfill_single<T: Scalar>(a: T, price: T, g: T, p_max: T) -> T {
    if !(a > T::zero() && g > T::zero()) {
        return T::zero();
    }
    if price <= T::zero() {
        return p_max;
    }
    (a / price - g.recip()).pos().min(p_max)
}

/// Cyclic coordinate ascent over the RRHs of one RRH-tier pair.
///
/// `prices[i] = Y_R + theta_i`. Each coordinate step solves its stationarity
/// condition `[a / c_i - (1 + sum_{i' != i} p_i' g_i') / g_i]^+` and clips it to
/// `[0, p_max]`. Returns whether successive sweeps settled within tolerance.
pub fn waterfill_coupled<T: Scalar>(a: T, prices: &[T], gains: &[T], p_max: T, out: &mut [T]) -> bool {
    debug_assert_eq!(prices.len(), gains.len());
    out.iter_mut().for_each(|p| *p = T::zero());
    if !(a > T::zero()) {
        return true;
    }
    // Start from the single best node: with linear prices the optimum uses the
    // node with the largest g_i / c_i unless its budget clips.
    let mut best: Option<usize> = None;
    for i in 0..gains.len() {
        if gains[i] <= T::zero() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                // g_i / c_i > g_b / c_b, written without divisions by zero prices
                let lhs = gains[i] * prices[b];
                let rhs = gains[b] * prices[i];
                if lhs > rhs || (lhs == rhs && gains[i] > gains[b]) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    let Some(b) = best else {
        return true;
    };
    out[b] = waterfill_single(a, prices[b], gains[b], p_max);
    let mut snr: T = out[b] * gains[b];
    let tol = T::lit(SWEEP_TOL) * p_max.max(T::one());
    for _ in 0..MAX_SWEEPS {
        let mut change = T::zero();
        for i in 0..gains.len() {
            let g = gains[i];
            if g <= T::zero() {
                continue;
            }
            let rest = snr - out[i] * g;
            let p = if prices[i] <= T::zero() {
                p_max
            } else {
                (a / prices[i] - (T::one() + rest) / g).pos().min(p_max)
            };
            change = change.max((p - out[i]).abs());
            out[i] = p;
            snr = rest + p * g;
        }
        if change <= tol {
            return true;
        }
    }
    false
}

/// Weighted objective `a ln(1 + sum p g) - sum c p` of one pair (negated score).
#[inline]
pub fn pair_value<T: Scalar>(a: T, prices: &[T], gains: &[T], powers: &[T]) -> T {
    let mut snr = T::zero();
    let mut cost = T::zero();
    for ((&c, &g), &p) in prices.iter().zip(gains).zip(powers) {
        snr = snr + p * g;
        cost = cost + c * p;
    }
    a * snr.ln_1p() - cost
}

/// Result of [`waterfill_budget`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BudgetFill<T> {
    /// Budget multiplier; zero when the budget is slack.
    pub theta: T,
}

/// Maximizes `sum_k a_k ln(d_k + p_k) - price * sum_k p_k` subject to
/// `sum_k p_k <= budget`.
///
/// `d_k = (1 + o_k) / g_k` is the floor of RB `k`, where `o_k` is the SNR
/// already contributed by other nodes. Entries with `a_k <= 0` or non-finite `d_k` get zero power.
/// The solution is exact: `p_k = [a_k / (price + theta) - d_k]^+` with the active
/// set found by sorting on `a_k / d_k`.
pub fn waterfill_budget<T: Scalar>(
    a: &[T],
    d: &[T],
    price: T,
    budget: T,
    out: &mut [T],
    order: &mut Vec<usize>,
) -> BudgetFill<T> {
    let n = a.len();
    out.iter_mut().for_each(|p| *p = T::zero());
    let usable = |k: usize| a[k] > T::zero() && d[k].is_finite() && d[k] > T::zero();
    if price > T::zero() {
        let mut total = T::zero();
        for k in 0..n {
            if usable(k) {
                out[k] = (a[k] / price - d[k]).pos();
                total = total + out[k];
            }
        }
        if total <= budget {
            return BudgetFill { theta: T::zero() };
        }
    }
    order.clear();
    order.extend((0..n).filter(|&k| usable(k)));
    if order.is_empty() || budget <= T::zero() {
        out.iter_mut().for_each(|p| *p = T::zero());
        return BudgetFill {
            theta: if order.is_empty() { T::zero() } else { T::infinity() },
        };
    }
    // Descending "water depth" a_k / d_k; ties by index for determinism.
    order.sort_by(|&x, &y| {
        (a[y] / d[y])
            .partial_cmp(&(a[x] / d[x]))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.cmp(&y))
    });
    let (mut sa, mut sd) = (T::zero(), T::zero());
    let mut level = T::zero();
    for (n_act, &k) in order.iter().enumerate() {
        sa = sa + a[k];
        sd = sd + d[k];
        level = sa / (budget + sd);
        let next_open = order.get(n_act + 1).is_some_and(|&nk| level < a[nk] / d[nk]);
        if !next_open {
            break;
        }
    }
    let mut total = T::zero();
    out.iter_mut().for_each(|p| *p = T::zero());
    for &k in order.iter() {
        let p = (a[k] / level - d[k]).pos();
        out[k] = p;
        total = total + p;
    }
    // Remove rounding excess so the budget holds exactly.
    if total > budget && total > T::zero() {
        let s = budget / total;
        out.iter_mut().for_each(|p| *p = *p * s);
    }
    BudgetFill {
        theta: (level - price).pos(),
    }
}
