//! Random traffic arrivals and channel realizations.
//!
//! Every random quantity comes from a [`SimStreams`] built from a single seed.
//! Topology, fading and arrivals use separate ChaCha streams, so changing the
//! traffic load never perturbs the channel sequence of a run.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ChannelState, NetworkConfig};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("invalid arrival spec: {0}")]
    Arrival(String),
    #[error("invalid channel spec: {0}")]
    Channel(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    #[default]
    Poisson,
    /// On/off bursts of `cap` bits with probability `mean / cap`.
    Bernoulli,
    /// Poisson with a sinusoidally modulated mean; i.i.d. only in the ergodic sense.
    TimeVaryingErgodic,
}

/// Per-slot arrival law. Amounts are in bits per slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalSpec {
    #[serde(default)]
    pub kind: ArrivalKind,
    pub mean_rue: f64,
    pub mean_hue: f64,
    pub cap_rue: f64,
    pub cap_hue: f64,
    /// Arrivals are a Poisson number of packets of this size.
    #[serde(default = "default_packet_bits")]
    pub packet_bits: f64,
    #[serde(default = "default_depth")]
    pub modulation_depth: f64,
    #[serde(default = "default_period")]
    pub modulation_period: f64,
}

fn default_packet_bits() -> f64 {
    1.0
}
fn default_depth() -> f64 {
    0.5
}
fn default_period() -> f64 {
    200.0
}

impl ArrivalSpec {
    /// Poisson arrivals with RUE mean `lambda` and HUE mean `lambda / 2`.
    pub fn poisson(lambda: f64, cap_rue: f64, cap_hue: f64) -> Self {
        Self {
            kind: ArrivalKind::Poisson,
            mean_rue: lambda,
            mean_hue: 0.5 * lambda,
            cap_rue,
            cap_hue,
            packet_bits: default_packet_bits(),
            modulation_depth: default_depth(),
            modulation_period: default_period(),
        }
    }

    /// Sets both means from the RUE rate, keeping the 2:1 RUE/HUE ratio.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.mean_rue = lambda;
        self.mean_hue = 0.5 * lambda;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let err = |s: &str| Err(SpecError::Arrival(s.into()));
        if !(self.mean_rue >= 0.0 && self.mean_hue >= 0.0) {
            return err("means must be >= 0");
        }
        if !(self.cap_rue > 0.0 && self.cap_hue > 0.0) {
            return err("caps must be > 0");
        }
        if !(self.packet_bits > 0.0) {
            return err("packet_bits must be > 0");
        }
        if self.kind == ArrivalKind::TimeVaryingErgodic
            && !(self.modulation_period > 0.0 && (0.0..=1.0).contains(&self.modulation_depth))
        {
            return err("modulation needs period > 0 and depth in [0, 1]");
        }
        Ok(())
    }
}

/// Pathloss law `intercept + slope * log10(d)` in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossLaw {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl PathlossLaw {
    pub fn db(&self, distance_m: f64) -> f64 {
        self.intercept_db + self.slope_db * distance_m.log10()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub pathloss_rrh: PathlossLaw,
    pub pathloss_hpn: PathlossLaw,
    pub noise_power_dbm: f64,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            pathloss_rrh: PathlossLaw {
                intercept_db: 31.5,
                slope_db: 40.0,
            },
            pathloss_hpn: PathlossLaw {
                intercept_db: 31.5,
                slope_db: 35.0,
            },
            noise_power_dbm: -102.0,
            cell_radius_m: 500.0,
            min_distance_m: 10.0,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<(), SpecError> {
        if !(self.cell_radius_m > 0.0 && self.min_distance_m > 0.0) {
            return Err(SpecError::Channel(
                "cell radius and minimum distance must be > 0".into(),
            ));
        }
        if !self.noise_power_dbm.is_finite() {
            return Err(SpecError::Channel("noise power must be finite".into()));
        }
        Ok(())
    }

    fn noise_watts(&self) -> f64 {
        10f64.powf((self.noise_power_dbm - 30.0) / 10.0)
    }

    /// Noise-normalized linear gain per watt for a link of the given pathloss.
    pub fn gain_per_watt(&self, pathloss_db: f64) -> f64 {
        10f64.powf(-pathloss_db / 10.0) / self.noise_watts()
    }
}

/// Independent random streams of one run.
#[derive(Clone, Debug)]
pub struct SimStreams {
    pub topology: ChaCha8Rng,
    pub fading: ChaCha8Rng,
    pub arrivals: ChaCha8Rng,
}

impl SimStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |n: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(n);
            rng
        };
        Self {
            topology: stream(1),
            fading: stream(2),
            arrivals: stream(3),
        }
    }
}

/// Arrivals of one slot, in bits.
#[derive(Clone, Debug, PartialEq)]
pub struct Arrivals<T> {
    pub hue: Vec<T>,
    pub rue: Vec<T>,
}

fn draw_amount<R: Rng + ?Sized>(
    kind: ArrivalKind,
    mean: f64,
    cap: f64,
    spec: &ArrivalSpec,
    slot: u64,
    rng: &mut R,
) -> f64 {
    let packets_cap = (cap / spec.packet_bits).floor();
    let packets = match kind {
        ArrivalKind::Poisson | ArrivalKind::TimeVaryingErgodic => {
            let mut m = mean / spec.packet_bits;
            if kind == ArrivalKind::TimeVaryingErgodic {
                let phase = 2.0 * std::f64::consts::PI * slot as f64 / spec.modulation_period;
                m *= 1.0 + spec.modulation_depth * phase.sin();
            }
            if m <= 0.0 {
                0.0
            } else {
                Poisson::new(m).expect("positive finite mean").sample(rng)
            }
        }
        ArrivalKind::Bernoulli => {
            let p = (mean / (packets_cap * spec.packet_bits)).min(1.0);
            if p > 0.0 && rng.random_bool(p) {
                packets_cap
            } else {
                0.0
            }
        }
    };
    packets.min(packets_cap) * spec.packet_bits
}

/// Draws the arrivals of slot `slot`. Each amount is truncated at its cap.
pub fn draw_arrivals<T: Scalar, R: Rng + ?Sized>(
    spec: &ArrivalSpec,
    num_hue: usize,
    num_rue: usize,
    slot: u64,
    rng: &mut R,
) -> Arrivals<T> {
    let hue = (0..num_hue)
        .map(|_| T::lit(draw_amount(spec.kind, spec.mean_hue, spec.cap_hue, spec, slot, rng)))
        .collect();
    let rue = (0..num_rue)
        .map(|_| T::lit(draw_amount(spec.kind, spec.mean_rue, spec.cap_rue, spec, slot, rng)))
        .collect();
    Arrivals { hue, rue }
}

type Point = (f64, f64);

/// Node and UE positions; the HPN sits at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub rrh: Vec<Point>,
    pub hue: Vec<Point>,
    pub rue: Vec<Point>,
}

fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    let r = radius * rng.random::<f64>().sqrt();
    let a = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    (r * a.cos(), r * a.sin())
}

impl Topology {
    pub fn random<R: Rng + ?Sized, U>(cfg: &NetworkConfig<U>, spec: &ChannelSpec, rng: &mut R) -> Self {
        let mut place = |n: usize| {
            (0..n)
                .map(|_| uniform_in_disc(spec.cell_radius_m, rng))
                .collect::<Vec<_>>()
        };
        let rrh = place(cfg.num_rrh);
        let hue = place(cfg.num_hue);
        let rue = place(cfg.num_rue);
        Self { rrh, hue, rue }
    }
}

fn distance(a: Point, b: Point, min: f64) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt().max(min)
}

/// Fixed pathloss of every link plus the per-slot Rayleigh fading generator.
#[derive(Clone, Debug)]
pub struct ChannelModel {
    num_rrh: usize,
    num_hue: usize,
    num_rue: usize,
    num_rb_rrh: usize,
    num_rb_hpn: usize,
    /// `[i][j]`
    large_rrh_rue: Vec<f64>,
    /// `[i][m]`
    large_rrh_hue: Vec<f64>,
    /// `[m]`
    large_hpn_hue: Vec<f64>,
}

impl ChannelModel {
    pub fn new<U>(cfg: &NetworkConfig<U>, spec: &ChannelSpec, topo: &Topology) -> Self {
        let d = |a, b| distance(a, b, spec.min_distance_m);
        let rrh_gain = |a, b| spec.gain_per_watt(spec.pathloss_rrh.db(d(a, b)));
        let large_rrh_rue = topo
            .rrh
            .iter()
            .flat_map(|&r| topo.rue.iter().map(move |&u| (r, u)))
            .map(|(r, u)| rrh_gain(r, u))
            .collect();
        let large_rrh_hue = topo
            .rrh
            .iter()
            .flat_map(|&r| topo.hue.iter().map(move |&u| (r, u)))
            .map(|(r, u)| rrh_gain(r, u))
            .collect();
        let large_hpn_hue = topo
            .hue
            .iter()
            .map(|&u| spec.gain_per_watt(spec.pathloss_hpn.db(d((0.0, 0.0), u))))
            .collect();
        Self {
            num_rrh: cfg.num_rrh,
            num_hue: cfg.num_hue,
            num_rue: cfg.num_rue,
            num_rb_rrh: cfg.num_rb_rrh,
            num_rb_hpn: cfg.num_rb_hpn,
            large_rrh_rue,
            large_rrh_hue,
            large_hpn_hue,
        }
    }

    /// Mean (fading-averaged) gain from RRH `i` to RUE `j`.
    pub fn mean_rrh_rue(&self, i: usize, j: usize) -> f64 {
        self.large_rrh_rue[i * self.num_rue + j]
    }

    pub fn mean_hpn_hue(&self, m: usize) -> f64 {
        self.large_hpn_hue[m]
    }

    /// One slot of i.i.d. unit-mean exponential power fading on every link and RB.
    pub fn draw_channel<T: Scalar, R: Rng + ?Sized>(&self, cfg: &NetworkConfig<T>, rng: &mut R) -> ChannelState<T> {
        let mut fade = |g: f64| {
            let h2: f64 = Exp1.sample(rng);
            T::lit(g * h2)
        };
        let kr = self.num_rb_rrh;
        let rrh_rue = (0..self.num_rrh * self.num_rue * kr)
            .map(|idx| fade(self.large_rrh_rue[idx / kr]))
            .collect();
        let rrh_hue = (0..self.num_rrh * self.num_hue * kr)
            .map(|idx| fade(self.large_rrh_hue[idx / kr]))
            .collect();
        let hpn_hue = (0..self.num_hue * self.num_rb_hpn)
            .map(|idx| fade(self.large_hpn_hue[idx / self.num_rb_hpn]))
            .collect();
        ChannelState::from_parts(cfg, rrh_rue, rrh_hue, hpn_hue).expect("channel model built for this configuration")
    }
}
