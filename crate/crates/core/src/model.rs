//! Static network configuration and the physical-layer formulas.
//!
//! The downlink has one high power node (HPN) and `num_rrh` remote radio
//! heads (RRHs). RBs are split into an RRH-tier set and an HPN-tier set so the
//! tiers never interfere. RUEs are served by the RRH tier only; each HUE is
//! associated per slot either with the HPN (`assoc = false`) or with the RRH
//! tier (`assoc = true`). On the RRH tier every RRH may radiate towards the
//! owner of an RB and the receiver combines the contributions (MRC), so the
//! spectral efficiency of RRH-tier RB `k` owned by UE `u` is
//! `log2(1 + sum_i p_ik * g_iuk)`.
//!
//! Channel gains already include noise, so `log2(1 + p * g)` is the spectral
//! efficiency of one RB.
//!
//! Queue-side quantities (backlogs, admitted traffic, utility) are measured in
//! *data units* of `data_unit_bits` bits. Rates returned by this module are in
//! bits/s; [`NetworkConfig::rate_scale`] converts spectral efficiency to data
//! units per second for the controller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{sum, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("decision violates constraint {constraint}: {detail}")]
    Constraint { constraint: &'static str, detail: String },
    #[error("total power must be positive, got {0}")]
    NonPositivePower(f64),
}

/// Shape of the utility functions `g_R` and `g_H`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    /// `g(r) = r`
    #[default]
    Linear,
    /// `g(r) = ln(1 + r / r0)` with `r0 = log_utility_offset_bits`.
    Logarithmic,
}

/// Time base of the EE virtual queue `Z` inside the drift weights.
///
/// `Z` itself is kept in data units per second. With `Slot` its drift term is
/// weighted by `tau^2`, i.e. `Z` is counted in data units per slot like `Q`, so
/// `B = tau (Q + tau Z)` and `Y = tau^2 W eta phi Z`. `Second` uses `Z` as is.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EeQueueTimebase {
    #[default]
    Slot,
    Second,
}

/// Static topology, radio budget and control knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig<T> {
    pub num_rrh: usize,
    pub num_hue: usize,
    pub num_rue: usize,
    pub num_rb_rrh: usize,
    pub num_rb_hpn: usize,
    /// System bandwidth `W` in Hz.
    pub bandwidth_total: T,
    /// Per-RB bandwidth `W0` in Hz.
    pub bandwidth_rb: T,
    /// Slot length `tau` in seconds.
    pub slot_duration: T,
    pub p_max_rrh: T,
    pub p_max_hpn: T,
    pub drain_eff_rrh: T,
    pub drain_eff_hpn: T,
    /// Static power of the whole RRH tier (counted once, not per RRH).
    pub static_power_rrh: T,
    pub static_power_hpn: T,
    /// Required energy efficiency in bits/Hz/J.
    pub ee_required: T,
    /// Utility weight `V`.
    pub control_v: T,
    pub price_rue: T,
    pub price_hue: T,
    pub utility_kind: UtilityKind,
    /// Offset `r0` of the logarithmic utility, in bits per slot.
    pub log_utility_offset_bits: T,
    /// Peak arrivals per slot in bits.
    pub a_max_hue: T,
    pub a_max_rue: T,
    pub data_unit_bits: T,
    #[serde(default)]
    pub ee_queue_timebase: EeQueueTimebase,
}

impl<T: Scalar> NetworkConfig<T> {
    /// One HPN, 4 RRHs, 12 HUEs, 10 RUEs, 12 + 8 RBs of 15 kHz, 10 ms slots.
    pub fn reference_defaults() -> Self {
        Self {
            num_rrh: 4,
            num_hue: 12,
            num_rue: 10,
            num_rb_rrh: 12,
            num_rb_hpn: 8,
            bandwidth_total: T::lit(300e3),
            bandwidth_rb: T::lit(15e3),
            slot_duration: T::lit(0.01),
            p_max_rrh: T::lit(3.0),
            p_max_hpn: T::lit(10.0),
            drain_eff_rrh: T::one(),
            drain_eff_hpn: T::one(),
            static_power_rrh: T::one(),
            static_power_hpn: T::lit(2.0),
            ee_required: T::zero(),
            control_v: T::lit(1000.0),
            price_rue: T::one(),
            price_hue: T::one(),
            utility_kind: UtilityKind::Linear,
            log_utility_offset_bits: T::lit(1000.0),
            a_max_hue: T::lit(6000.0),
            a_max_rue: T::lit(12000.0),
            data_unit_bits: T::lit(1000.0),
            ee_queue_timebase: EeQueueTimebase::Slot,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.num_rrh == 0 || self.num_hue + self.num_rue == 0 {
            return bad("need at least one RRH and one UE".into());
        }
        if self.num_rb_rrh + self.num_rb_hpn == 0 {
            return bad("need at least one RB".into());
        }
        let positive = [
            ("bandwidth_total", self.bandwidth_total),
            ("bandwidth_rb", self.bandwidth_rb),
            ("slot_duration", self.slot_duration),
            ("p_max_rrh", self.p_max_rrh),
            ("p_max_hpn", self.p_max_hpn),
            ("drain_eff_rrh", self.drain_eff_rrh),
            ("drain_eff_hpn", self.drain_eff_hpn),
            ("price_rue", self.price_rue),
            ("price_hue", self.price_hue),
            ("log_utility_offset_bits", self.log_utility_offset_bits),
            ("a_max_hue", self.a_max_hue),
            ("a_max_rue", self.a_max_rue),
            ("data_unit_bits", self.data_unit_bits),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > T::zero()) {
                return bad(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        let non_negative = [
            ("static_power_rrh", self.static_power_rrh),
            ("static_power_hpn", self.static_power_hpn),
            ("ee_required", self.ee_required),
            ("control_v", self.control_v),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= T::zero()) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.static_power_rrh + self.static_power_hpn <= T::zero() {
            return bad("total static power must be positive".into());
        }
        let split = T::from_count(self.num_rb_rrh + self.num_rb_hpn) * self.bandwidth_rb;
        if (split - self.bandwidth_total).abs() > T::lit(1e-6) * self.bandwidth_total {
            return bad(format!(
                "RB split covers {split} Hz but bandwidth_total is {}",
                self.bandwidth_total
            ));
        }
        Ok(())
    }

    /// Weight of `Z` in the Lyapunov function: `tau^2` or 1, see [`EeQueueTimebase`].
    pub fn z_weight(&self) -> T {
        match self.ee_queue_timebase {
            EeQueueTimebase::Slot => self.slot_duration * self.slot_duration,
            EeQueueTimebase::Second => T::one(),
        }
    }

    /// Converts spectral efficiency (bits/s/Hz) on one RB to data units per second.
    #[inline]
    pub fn rate_scale(&self) -> T {
        self.bandwidth_rb / self.data_unit_bits
    }

    /// `W` expressed per data unit; multiplies `eta * p` in the EE virtual queue.
    #[inline]
    pub fn ee_rate_coeff(&self) -> T {
        self.bandwidth_total / self.data_unit_bits
    }

    #[inline]
    pub fn to_units(&self, bits: T) -> T {
        bits / self.data_unit_bits
    }

    #[inline]
    pub fn to_bits(&self, units: T) -> T {
        units * self.data_unit_bits
    }

    pub fn a_max_rue_units(&self) -> T {
        self.to_units(self.a_max_rue)
    }

    pub fn a_max_hue_units(&self) -> T {
        self.to_units(self.a_max_hue)
    }

    fn log_offset_units(&self) -> T {
        self.to_units(self.log_utility_offset_bits)
    }

    /// `g(r)` for `r` in data units per slot.
    pub fn utility_fn(&self, r: T) -> T {
        match self.utility_kind {
            UtilityKind::Linear => r,
            UtilityKind::Logarithmic => (r / self.log_offset_units()).ln_1p(),
        }
    }

    /// Largest right-derivative of `g` (attained at zero), per data unit.
    pub fn phi(&self) -> T {
        match self.utility_kind {
            UtilityKind::Linear => T::one(),
            UtilityKind::Logarithmic => self.log_offset_units().recip(),
        }
    }

    pub fn phi_r(&self) -> T {
        self.phi()
    }

    pub fn phi_h(&self) -> T {
        self.phi()
    }

    /// `U(r) = alpha * sum g_R(r_j) + beta * sum g_H(r_m)`, throughputs in data units per slot.
    pub fn utility(&self, r_hue: &[T], r_rue: &[T]) -> T {
        let rue = r_rue.iter().fold(T::zero(), |a, &r| a + self.utility_fn(r));
        let hue = r_hue.iter().fold(T::zero(), |a, &r| a + self.utility_fn(r));
        self.price_rue * rue + self.price_hue * hue
    }

    pub fn static_power(&self) -> T {
        self.static_power_rrh + self.static_power_hpn
    }
}

/// A UE as seen by the RRH tier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Ue {
    Rue(usize),
    Hue(usize),
}

/// Per-slot channel gains (linear, noise-normalized).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelState<T> {
    num_rrh: usize,
    num_hue: usize,
    num_rue: usize,
    num_rb_rrh: usize,
    num_rb_hpn: usize,
    rrh_rue: Vec<T>,
    rrh_hue: Vec<T>,
    hpn_hue: Vec<T>,
}

impl<T: Scalar> ChannelState<T> {
    pub fn zeros<U>(cfg: &NetworkConfig<U>) -> Self {
        let (n, m, j, kr, kh) = (cfg.num_rrh, cfg.num_hue, cfg.num_rue, cfg.num_rb_rrh, cfg.num_rb_hpn);
        Self {
            num_rrh: n,
            num_hue: m,
            num_rue: j,
            num_rb_rrh: kr,
            num_rb_hpn: kh,
            rrh_rue: vec![T::zero(); n * j * kr],
            rrh_hue: vec![T::zero(); n * m * kr],
            hpn_hue: vec![T::zero(); m * kh],
        }
    }

    /// Builds a state from flattened `[i][j][k]`, `[i][m][k]` and `[m][l]` arrays.
    pub fn from_parts<U>(
        cfg: &NetworkConfig<U>,
        rrh_rue: Vec<T>,
        rrh_hue: Vec<T>,
        hpn_hue: Vec<T>,
    ) -> Result<Self, ModelError> {
        let mut ch = Self::zeros(cfg);
        if rrh_rue.len() != ch.rrh_rue.len() || rrh_hue.len() != ch.rrh_hue.len() || hpn_hue.len() != ch.hpn_hue.len() {
            return Err(ModelError::Shape(format!(
                "expected gain arrays of length {}/{}/{}, got {}/{}/{}",
                ch.rrh_rue.len(),
                ch.rrh_hue.len(),
                ch.hpn_hue.len(),
                rrh_rue.len(),
                rrh_hue.len(),
                hpn_hue.len()
            )));
        }
        if rrh_rue
            .iter()
            .chain(&rrh_hue)
            .chain(&hpn_hue)
            .any(|g| !(g.is_finite() && *g >= T::zero()))
        {
            return Err(ModelError::InvalidConfig(
                "channel gains must be finite and >= 0".into(),
            ));
        }
        ch.rrh_rue = rrh_rue;
        ch.rrh_hue = rrh_hue;
        ch.hpn_hue = hpn_hue;
        Ok(ch)
    }

    pub fn matches<U>(&self, cfg: &NetworkConfig<U>) -> bool {
        self.num_rrh == cfg.num_rrh
            && self.num_hue == cfg.num_hue
            && self.num_rue == cfg.num_rue
            && self.num_rb_rrh == cfg.num_rb_rrh
            && self.num_rb_hpn == cfg.num_rb_hpn
    }

    #[inline]
    pub fn g_rrh_rue(&self, i: usize, j: usize, k: usize) -> T {
        self.rrh_rue[(i * self.num_rue + j) * self.num_rb_rrh + k]
    }

    #[inline]
    pub fn g_rrh_hue(&self, i: usize, m: usize, k: usize) -> T {
        self.rrh_hue[(i * self.num_hue + m) * self.num_rb_rrh + k]
    }

    #[inline]
    pub fn g_hpn_hue(&self, m: usize, l: usize) -> T {
        self.hpn_hue[m * self.num_rb_hpn + l]
    }

    #[inline]
    pub fn g_rrh(&self, i: usize, ue: Ue, k: usize) -> T {
        match ue {
            Ue::Rue(j) => self.g_rrh_rue(i, j, k),
            Ue::Hue(m) => self.g_rrh_hue(i, m, k),
        }
    }

    pub fn set_rrh_rue(&mut self, i: usize, j: usize, k: usize, g: T) {
        self.rrh_rue[(i * self.num_rue + j) * self.num_rb_rrh + k] = g;
    }

    pub fn set_rrh_hue(&mut self, i: usize, m: usize, k: usize, g: T) {
        self.rrh_hue[(i * self.num_hue + m) * self.num_rb_rrh + k] = g;
    }

    pub fn set_hpn_hue(&mut self, m: usize, l: usize, g: T) {
        self.hpn_hue[m * self.num_rb_hpn + l] = g;
    }

    pub fn all_gains(&self) -> impl Iterator<Item = &T> {
        self.rrh_rue.iter().chain(&self.rrh_hue).chain(&self.hpn_hue)
    }
}

/// One slot's control action.
///
/// RB ownership is stored per RB, so the non-reuse constraints hold by
/// construction. `pw_rrh[i * num_rb_rrh + k]` is the power RRH `i` radiates on
/// RRH-tier RB `k` towards the owner of that RB; `pw_hpn[l]` is the HPN power on
/// HPN RB `l`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlDecision<T> {
    pub admit_hue: Vec<T>,
    pub admit_rue: Vec<T>,
    pub aux_hue: Vec<T>,
    pub aux_rue: Vec<T>,
    /// `s_m`: true when HUE `m` is served by the RRH tier.
    pub assoc: Vec<bool>,
    pub rrh_rb_owner: Vec<Option<Ue>>,
    pub hpn_rb_owner: Vec<Option<usize>>,
    pub pw_rrh: Vec<T>,
    pub pw_hpn: Vec<T>,
}

impl<T: Scalar> ControlDecision<T> {
    /// Nothing admitted, nothing allocated.
    pub fn idle<U>(cfg: &NetworkConfig<U>) -> Self {
        Self {
            admit_hue: vec![T::zero(); cfg.num_hue],
            admit_rue: vec![T::zero(); cfg.num_rue],
            aux_hue: vec![T::zero(); cfg.num_hue],
            aux_rue: vec![T::zero(); cfg.num_rue],
            assoc: vec![false; cfg.num_hue],
            rrh_rb_owner: vec![None; cfg.num_rb_rrh],
            hpn_rb_owner: vec![None; cfg.num_rb_hpn],
            pw_rrh: vec![T::zero(); cfg.num_rrh * cfg.num_rb_rrh],
            pw_hpn: vec![T::zero(); cfg.num_rb_hpn],
        }
    }

    #[inline]
    pub fn pw(&self, num_rb_rrh: usize, i: usize, k: usize) -> T {
        self.pw_rrh[i * num_rb_rrh + k]
    }

    /// `a_jk`
    pub fn a_rue(&self, j: usize, k: usize) -> bool {
        self.rrh_rb_owner[k] == Some(Ue::Rue(j))
    }

    /// `s_m * a_mk`
    pub fn a_hue(&self, m: usize, k: usize) -> bool {
        self.rrh_rb_owner[k] == Some(Ue::Hue(m))
    }

    /// `(1 - s_m) * b_ml`
    pub fn b_hue(&self, m: usize, l: usize) -> bool {
        self.hpn_rb_owner[l] == Some(m)
    }

    /// `p_ijk`, zero unless RUE `j` owns RB `k`.
    pub fn p_rue(&self, num_rb_rrh: usize, i: usize, j: usize, k: usize) -> T {
        if self.a_rue(j, k) {
            self.pw(num_rb_rrh, i, k)
        } else {
            T::zero()
        }
    }

    /// `p_imk`, zero unless HUE `m` owns RRH-tier RB `k`.
    pub fn p_hue_rrh(&self, num_rb_rrh: usize, i: usize, m: usize, k: usize) -> T {
        if self.a_hue(m, k) {
            self.pw(num_rb_rrh, i, k)
        } else {
            T::zero()
        }
    }

    /// `p_ml`, zero unless HUE `m` owns HPN RB `l`.
    pub fn p_hue_hpn(&self, m: usize, l: usize) -> T {
        if self.b_hue(m, l) {
            self.pw_hpn[l]
        } else {
            T::zero()
        }
    }

    pub fn check_shape<U>(&self, cfg: &NetworkConfig<U>) -> Result<(), ModelError> {
        let checks = [
            ("admit_hue", self.admit_hue.len(), cfg.num_hue),
            ("admit_rue", self.admit_rue.len(), cfg.num_rue),
            ("aux_hue", self.aux_hue.len(), cfg.num_hue),
            ("aux_rue", self.aux_rue.len(), cfg.num_rue),
            ("assoc", self.assoc.len(), cfg.num_hue),
            ("rrh_rb_owner", self.rrh_rb_owner.len(), cfg.num_rb_rrh),
            ("hpn_rb_owner", self.hpn_rb_owner.len(), cfg.num_rb_hpn),
            ("pw_rrh", self.pw_rrh.len(), cfg.num_rrh * cfg.num_rb_rrh),
            ("pw_hpn", self.pw_hpn.len(), cfg.num_rb_hpn),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(ModelError::Shape(format!("{name} has length {got}, expected {want}")));
            }
        }
        for owner in self.rrh_rb_owner.iter().flatten() {
            let ok = match *owner {
                Ue::Rue(j) => j < cfg.num_rue,
                Ue::Hue(m) => m < cfg.num_hue,
            };
            if !ok {
                return Err(ModelError::Index(format!("RB owner {owner:?}")));
            }
        }
        if let Some(m) = self.hpn_rb_owner.iter().flatten().find(|&&m| m >= cfg.num_hue) {
            return Err(ModelError::Index(format!("HPN RB owner HUE {m}")));
        }
        Ok(())
    }

    /// Checks C1-C4, C8 and the sign/zero-power conventions. When `arrivals`
    /// (in data units, HUE then RUE) is given, C7 and C9 are checked as well.
    pub fn validate(&self, cfg: &NetworkConfig<T>, arrivals: Option<(&[T], &[T])>) -> Result<(), ModelError> {
        self.check_shape(cfg)?;
        let violation = |constraint, detail: String| Err(ModelError::Constraint { constraint, detail });
        for (k, owner) in self.rrh_rb_owner.iter().enumerate() {
            if let Some(Ue::Hue(m)) = owner {
                if !self.assoc[*m] {
                    return violation("C1", format!("HUE {m} owns RRH RB {k} but s_m = 0"));
                }
            }
        }
        for (l, owner) in self.hpn_rb_owner.iter().enumerate() {
            if let Some(m) = owner {
                if self.assoc[*m] {
                    return violation("C2", format!("HUE {m} owns HPN RB {l} but s_m = 1"));
                }
            }
        }
        let kr = cfg.num_rb_rrh;
        for i in 0..cfg.num_rrh {
            for k in 0..kr {
                let p = self.pw(kr, i, k);
                if !(p.is_finite() && p >= T::zero()) {
                    return violation("C3", format!("power {p} at RRH {i}, RB {k}"));
                }
                if self.rrh_rb_owner[k].is_none() && p > T::zero() {
                    return violation("C8", format!("power on unallocated RRH RB {k}"));
                }
            }
        }
        for (l, &p) in self.pw_hpn.iter().enumerate() {
            if !(p.is_finite() && p >= T::zero()) {
                return violation("C4", format!("power {p} on HPN RB {l}"));
            }
            if self.hpn_rb_owner[l].is_none() && p > T::zero() {
                return violation("C8", format!("power on unallocated HPN RB {l}"));
            }
        }
        let slack = T::lit(1e-9);
        let totals = power_totals(cfg, self)?;
        for (i, &p) in totals.per_rrh.iter().enumerate() {
            if p > cfg.p_max_rrh * (T::one() + slack) {
                return violation("C3", format!("RRH {i} radiates {p} W"));
            }
        }
        if totals.hpn > cfg.p_max_hpn * (T::one() + slack) {
            return violation("C4", format!("HPN radiates {} W", totals.hpn));
        }
        let in_range = |xs: &[T], cap: &dyn Fn(usize) -> T| {
            xs.iter()
                .enumerate()
                .all(|(n, &x)| x >= T::zero() && x <= cap(n) * (T::one() + slack))
        };
        if !in_range(&self.aux_hue, &|_| cfg.a_max_hue_units()) || !in_range(&self.aux_rue, &|_| cfg.a_max_rue_units())
        {
            return violation("C9", "auxiliary variable outside [0, A_max]".into());
        }
        if let Some((a_hue, a_rue)) = arrivals {
            if a_hue.len() != cfg.num_hue || a_rue.len() != cfg.num_rue {
                return Err(ModelError::Shape("arrival vectors".into()));
            }
            if !in_range(&self.admit_hue, &|m| a_hue[m]) || !in_range(&self.admit_rue, &|j| a_rue[j]) {
                return violation("C7", "admitted traffic outside [0, A(t)]".into());
            }
        }
        Ok(())
    }
}

fn check_inputs<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    d: &ControlDecision<T>,
) -> Result<(), ModelError> {
    if !ch.matches(cfg) {
        return Err(ModelError::Shape("channel state does not match configuration".into()));
    }
    d.check_shape(cfg)
}

/// Spectral efficiency of RRH-tier RB `k` as allocated in `d`.
fn rrh_rb_efficiency<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    d: &ControlDecision<T>,
    ue: Ue,
    k: usize,
) -> T {
    let snr = (0..cfg.num_rrh).fold(T::zero(), |acc, i| {
        acc + d.pw(cfg.num_rb_rrh, i, k) * ch.g_rrh(i, ue, k)
    });
    snr.ln_1p() / T::LN_2()
}

/// Transmit rate of RUE `j` in bits/s.
pub fn rate_rue<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    d: &ControlDecision<T>,
    j: usize,
) -> Result<T, ModelError> {
    check_inputs(cfg, ch, d)?;
    if j >= cfg.num_rue {
        return Err(ModelError::Index(format!("RUE {j}")));
    }
    Ok(rate_rue_unchecked(cfg, ch, d, j))
}

fn rate_rue_unchecked<T: Scalar>(cfg: &NetworkConfig<T>, ch: &ChannelState<T>, d: &ControlDecision<T>, j: usize) -> T {
    (0..cfg.num_rb_rrh)
        .filter(|&k| d.a_rue(j, k))
        .fold(T::zero(), |acc, k| {
            acc + cfg.bandwidth_rb * rrh_rb_efficiency(cfg, ch, d, Ue::Rue(j), k)
        })
}

/// Transmit rate of HUE `m` in bits/s, through whichever tier it is associated with.
pub fn rate_hue<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    d: &ControlDecision<T>,
    m: usize,
) -> Result<T, ModelError> {
    check_inputs(cfg, ch, d)?;
    if m >= cfg.num_hue {
        return Err(ModelError::Index(format!("HUE {m}")));
    }
    Ok(rate_hue_unchecked(cfg, ch, d, m))
}

fn rate_hue_unchecked<T: Scalar>(cfg: &NetworkConfig<T>, ch: &ChannelState<T>, d: &ControlDecision<T>, m: usize) -> T {
    if d.assoc[m] {
        (0..cfg.num_rb_rrh)
            .filter(|&k| d.a_hue(m, k))
            .fold(T::zero(), |acc, k| {
                acc + cfg.bandwidth_rb * rrh_rb_efficiency(cfg, ch, d, Ue::Hue(m), k)
            })
    } else {
        (0..cfg.num_rb_hpn)
            .filter(|&l| d.b_hue(m, l))
            .fold(T::zero(), |acc, l| {
                acc + cfg.bandwidth_rb * (d.pw_hpn[l] * ch.g_hpn_hue(m, l)).ln_1p() / T::LN_2()
            })
    }
}

/// Per-UE rates in bits/s.
#[derive(Clone, Debug, PartialEq)]
pub struct Rates<T> {
    pub hue: Vec<T>,
    pub rue: Vec<T>,
}

impl<T: Scalar> Rates<T> {
    /// `mu_sum`
    pub fn total(&self) -> T {
        sum(&self.hue) + sum(&self.rue)
    }
}

pub fn rates<T: Scalar>(
    cfg: &NetworkConfig<T>,
    ch: &ChannelState<T>,
    d: &ControlDecision<T>,
) -> Result<Rates<T>, ModelError> {
    check_inputs(cfg, ch, d)?;
    Ok(Rates {
        hue: (0..cfg.num_hue).map(|m| rate_hue_unchecked(cfg, ch, d, m)).collect(),
        rue: (0..cfg.num_rue).map(|j| rate_rue_unchecked(cfg, ch, d, j)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerTotals<T> {
    /// `p_i` per RRH.
    pub per_rrh: Vec<T>,
    /// `p_H`
    pub hpn: T,
    /// `p_sum`, including drain efficiency and static power.
    pub sum: T,
}

pub fn power_totals<T: Scalar>(cfg: &NetworkConfig<T>, d: &ControlDecision<T>) -> Result<PowerTotals<T>, ModelError> {
    d.check_shape(cfg)?;
    let kr = cfg.num_rb_rrh;
    let per_rrh: Vec<T> = (0..cfg.num_rrh)
        .map(|i| {
            (0..kr)
                .filter(|&k| d.rrh_rb_owner[k].is_some())
                .fold(T::zero(), |acc, k| acc + d.pw(kr, i, k))
        })
        .collect();
    let hpn = (0..cfg.num_rb_hpn)
        .filter(|&l| d.hpn_rb_owner[l].is_some())
        .fold(T::zero(), |acc, l| acc + d.pw_hpn[l]);
    let sum = cfg.drain_eff_rrh * sum(&per_rrh) + cfg.static_power_rrh + cfg.drain_eff_hpn * hpn + cfg.static_power_hpn;
    Ok(PowerTotals { per_rrh, hpn, sum })
}

/// `mu_sum / (W * p_sum)` in bits/Hz/J.
pub fn instantaneous_ee<T: Scalar>(mu_sum: T, p_sum: T, cfg: &NetworkConfig<T>) -> Result<T, ModelError> {
    if !(p_sum > T::zero()) {
        return Err(ModelError::NonPositivePower(p_sum.as_f64()));
    }
    Ok(mu_sum / (cfg.bandwidth_total * p_sum))
}
