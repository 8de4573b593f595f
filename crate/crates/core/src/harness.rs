//! Slotted simulation loop, long-run metrics and online bound checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{solve_slot, ControllerError, DualState, SolverOptions};
use crate::model::{power_totals, rates, ControlDecision, ModelError, NetworkConfig};
use crate::oracle::{msr_solve, OracleError};
use crate::queues::{backlog_bounds, QueueError, QueueState};
use crate::scalar::{sum, Scalar};
use crate::stochastic::{draw_arrivals, ArrivalSpec, ChannelModel, ChannelSpec, SimStreams, SpecError, Topology};

/// Fraction of non-converged slots above which a run is flagged.
pub const NONCONVERGENCE_FLAG: f64 = 0.05;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Queue(#[from] QueueError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error("invalid run: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Jccro,
    Msr,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Jccro => "jccro",
            Scheme::Msr => "msr",
        }
    }
}

/// Everything one run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec<T> {
    pub network: NetworkConfig<T>,
    pub arrivals: ArrivalSpec,
    pub channel: ChannelSpec,
    pub slots: usize,
    /// Slots excluded from the averages (bounds are checked on every slot).
    pub warmup: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub solver: SolverOptions,
    /// Keep one [`SlotRecord`] per slot.
    pub trace: bool,
}

impl<T: Scalar> RunSpec<T> {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.network.validate()?;
        self.arrivals.validate()?;
        self.channel.validate()?;
        if self.slots == 0 {
            return Err(HarnessError::Invalid("slots must be >= 1".into()));
        }
        if self.warmup >= self.slots {
            return Err(HarnessError::Invalid("warmup must be shorter than the run".into()));
        }
        Ok(())
    }
}

/// One row of the per-slot trace. Queue contents are in bits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlotRecord {
    pub t: usize,
    pub q_hue: Vec<f64>,
    pub q_rue: Vec<f64>,
    pub h_hue: Vec<f64>,
    pub h_rue: Vec<f64>,
    /// `Z` in data units.
    pub z: f64,
    /// bits/s
    pub mu_sum: f64,
    /// W
    pub p_sum: f64,
    /// bits
    pub arrived: f64,
    pub admitted: f64,
    pub served: f64,
    pub dual_iterations: usize,
    pub converged: bool,
    pub objective: f64,
}

/// Long-run results of one run. Throughputs are per slot, rates per second.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetrics {
    pub scheme: Scheme,
    pub slots: usize,
    pub warmup: usize,
    /// Mean admitted bits per slot, per HUE.
    pub avg_throughput_hue: Vec<f64>,
    pub avg_throughput_rue: Vec<f64>,
    /// `U(r)` of the mean admitted throughputs in data units per slot.
    pub utility: f64,
    /// Little's law: mean total backlog over mean total admitted, in slots.
    pub avg_delay: f64,
    /// Mean `mu_sum`, bits/s.
    pub avg_rate: f64,
    /// Mean `p_sum`, W.
    pub avg_power: f64,
    /// `avg_rate / (W * avg_power)`, bits/Hz/J.
    pub achieved_ee: f64,
    /// Mean of the per-slot EE, for comparison only.
    pub mean_slot_ee: f64,
    /// Mean bits per slot actually drained from the traffic queues.
    pub served_throughput: f64,
    /// Mean bits per slot offered by the arrival process.
    pub offered_throughput: f64,
    /// Mean total traffic backlog, bits.
    pub avg_backlog: f64,
    /// Mean total backlog over `[T/2, 3T/4)` and `[3T/4, T)`, bits.
    pub backlog_window_early: f64,
    pub backlog_window_late: f64,
    /// Smallest slack of the deterministic backlog bounds over all slots, bits.
    pub bound_slack_q: f64,
    pub bound_violations: usize,
    /// Largest per-slot second-moment term of the drift bound, data units squared.
    pub drift_const_c: f64,
    pub nonconverged_fraction: f64,
    pub avg_dual_iterations: f64,
    /// Mean of `(objective - dual bound) / |objective|` over slots that transmit.
    pub mean_relative_gap: f64,
    /// Slots where the MSR EE floor could not be met.
    pub infeasible_slots: usize,
    pub flagged: bool,
}

/// Metrics plus the optional trace.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub trace: Vec<SlotRecord>,
}

#[derive(Default)]
struct Accum {
    n: usize,
    admitted_hue: Vec<f64>,
    admitted_rue: Vec<f64>,
    backlog: f64,
    rate: f64,
    power: f64,
    slot_ee: f64,
    served: f64,
    offered: f64,
    iterations: f64,
    gap: f64,
    gap_n: usize,
}

/// Runs one simulation.
pub fn run<T: Scalar>(spec: &RunSpec<T>) -> Result<RunOutput, HarnessError> {
    spec.validate()?;
    let cfg = &spec.network;
    let mut streams = SimStreams::new(spec.seed);
    let topo = Topology::random(cfg, &spec.channel, &mut streams.topology);
    let chan = ChannelModel::new(cfg, &spec.channel, &topo);
    let mut qs = QueueState::<T>::for_config(cfg);
    let mut ds = DualState::new(cfg.num_rrh, T::lit(spec.solver.xi0));
    let (bound_hue, bound_rue) = backlog_bounds(cfg);
    let (bound_hue, bound_rue) = (bound_hue.as_f64(), bound_rue.as_f64());
    let unit = cfg.data_unit_bits.as_f64();
    let tau = cfg.slot_duration;
    let w_total = cfg.bandwidth_total.as_f64();

    let mut acc = Accum {
        admitted_hue: vec![0.0; cfg.num_hue],
        admitted_rue: vec![0.0; cfg.num_rue],
        ..Default::default()
    };
    let mut trace = Vec::new();
    let (mut slack, mut violations) = (f64::INFINITY, 0usize);
    let mut drift_c = 0.0f64;
    let (mut nonconverged, mut infeasible) = (0usize, 0usize);
    let mut windows = [0.0f64; 2];
    let mut window_n = [0usize; 2];

    for t in 0..spec.slots {
        let ch = chan.draw_channel(cfg, &mut streams.fading);
        let arr = draw_arrivals::<T, _>(
            &spec.arrivals,
            cfg.num_hue,
            cfg.num_rue,
            t as u64,
            &mut streams.arrivals,
        );
        let a_hue: Vec<T> = arr.hue.iter().map(|&a| cfg.to_units(a)).collect();
        let a_rue: Vec<T> = arr.rue.iter().map(|&a| cfg.to_units(a)).collect();

        let mut gap = None;
        let (d, iterations, converged, objective) = match spec.scheme {
            Scheme::Jccro => {
                let (d, diag) = solve_slot(cfg, &qs, &ch, &a_hue, &a_rue, &mut ds, &spec.solver)?;
                let obj = diag.objective.as_f64();
                if obj < 0.0 {
                    gap = Some((obj - diag.dual_bound.as_f64()) / obj.abs());
                }
                (d, diag.iterations, diag.converged, obj)
            }
            Scheme::Msr => match msr_solve(cfg, &ch, &mut ds, &spec.solver) {
                Ok(out) => {
                    let mut d = out.decision;
                    d.admit_hue.clone_from(&a_hue);
                    d.admit_rue.clone_from(&a_rue);
                    (d, out.solves, true, f64::NAN)
                }
                Err(OracleError::Infeasible { .. }) => {
                    infeasible += 1;
                    let mut d = ControlDecision::idle(cfg);
                    d.admit_hue.clone_from(&a_hue);
                    d.admit_rue.clone_from(&a_rue);
                    (d, 0, true, f64::NAN)
                }
                Err(e) => return Err(HarnessError::Invalid(e.to_string())),
            },
        };
        if !converged {
            nonconverged += 1;
        }

        let r = rates(cfg, &ch, &d)?;
        let totals = power_totals(cfg, &d)?;
        let mu_sum = r.total();
        let service_hue: Vec<T> = r.hue.iter().map(|&mu| cfg.to_units(mu) * tau).collect();
        let service_rue: Vec<T> = r.rue.iter().map(|&mu| cfg.to_units(mu) * tau).collect();
        let served: f64 = qs
            .q_hue
            .iter()
            .zip(&service_hue)
            .chain(qs.q_rue.iter().zip(&service_rue))
            .map(|(&q, &s)| q.min(s).as_f64())
            .sum::<f64>()
            * unit;

        // second-moment terms of the one-slot drift
        let sq = |xs: &[T]| xs.iter().map(|x| x.as_f64().powi(2)).sum::<f64>();
        let ee_in = (cfg.ee_rate_coeff() * cfg.ee_required * totals.sum).as_f64();
        let c_t = 0.5
            * (sq(&service_hue)
                + sq(&service_rue)
                + 2.0 * sq(&d.admit_hue)
                + 2.0 * sq(&d.admit_rue)
                + sq(&d.aux_hue)
                + sq(&d.aux_rue)
                + cfg.z_weight().as_f64() * (cfg.to_units(mu_sum).as_f64().powi(2) + ee_in.powi(2)));
        drift_c = drift_c.max(c_t);

        let admitted = (sum(&d.admit_hue) + sum(&d.admit_rue)).as_f64() * unit;
        qs.update_traffic(&service_hue, &service_rue, &d.admit_hue, &d.admit_rue)?;
        qs.update_virtual_h(&d.admit_hue, &d.admit_rue, &d.aux_hue, &d.aux_rue)?;
        qs.update_virtual_z(mu_sum, totals.sum, cfg)?;
        qs.slot += 1;

        for &q in &qs.q_hue {
            let s = bound_hue - q.as_f64();
            slack = slack.min(s);
            if s < -1e-9 * bound_hue {
                violations += 1;
            }
        }
        for &q in &qs.q_rue {
            let s = bound_rue - q.as_f64();
            slack = slack.min(s);
            if s < -1e-9 * bound_rue {
                violations += 1;
            }
        }

        let backlog = qs.total_backlog().as_f64() * unit;
        let mu = mu_sum.as_f64();
        let p = totals.sum.as_f64();
        for (w, &start) in [spec.slots / 2, 3 * spec.slots / 4].iter().enumerate() {
            let end = if w == 0 { 3 * spec.slots / 4 } else { spec.slots };
            if t >= start && t < end {
                windows[w] += backlog;
                window_n[w] += 1;
            }
        }
        if t >= spec.warmup {
            acc.n += 1;
            for (s, a) in acc.admitted_hue.iter_mut().zip(&d.admit_hue) {
                *s += a.as_f64() * unit;
            }
            for (s, a) in acc.admitted_rue.iter_mut().zip(&d.admit_rue) {
                *s += a.as_f64() * unit;
            }
            acc.backlog += backlog;
            acc.rate += mu;
            acc.power += p;
            acc.slot_ee += mu / (w_total * p);
            acc.served += served;
            acc.offered += (sum(&arr.hue) + sum(&arr.rue)).as_f64();
            acc.iterations += iterations as f64;
            if let Some(g) = gap {
                acc.gap += g;
                acc.gap_n += 1;
            }
        }
        if spec.trace {
            let bits = |xs: &[T]| xs.iter().map(|x| x.as_f64() * unit).collect::<Vec<_>>();
            trace.push(SlotRecord {
                t,
                q_hue: bits(&qs.q_hue),
                q_rue: bits(&qs.q_rue),
                h_hue: bits(&qs.h_hue),
                h_rue: bits(&qs.h_rue),
                z: qs.z.as_f64(),
                mu_sum: mu,
                p_sum: p,
                arrived: (sum(&arr.hue) + sum(&arr.rue)).as_f64(),
                admitted,
                served,
                dual_iterations: iterations,
                converged,
                objective,
            });
        }
    }

    let n = acc.n as f64;
    let avg_hue: Vec<f64> = acc.admitted_hue.iter().map(|s| s / n).collect();
    let avg_rue: Vec<f64> = acc.admitted_rue.iter().map(|s| s / n).collect();
    let to_units = |xs: &[f64]| xs.iter().map(|&x| T::lit(x / unit)).collect::<Vec<T>>();
    let utility = cfg.utility(&to_units(&avg_hue), &to_units(&avg_rue)).as_f64();
    let admitted_total: f64 = avg_hue.iter().chain(&avg_rue).sum();
    let avg_backlog = acc.backlog / n;
    let avg_rate = acc.rate / n;
    let avg_power = acc.power / n;
    let nonconverged_fraction = nonconverged as f64 / spec.slots as f64;
    let metrics = RunMetrics {
        scheme: spec.scheme,
        slots: spec.slots,
        warmup: spec.warmup,
        avg_throughput_hue: avg_hue,
        avg_throughput_rue: avg_rue,
        utility,
        avg_delay: if admitted_total > 0.0 {
            avg_backlog / admitted_total
        } else {
            0.0
        },
        avg_rate,
        avg_power,
        achieved_ee: avg_rate / (w_total * avg_power),
        mean_slot_ee: acc.slot_ee / n,
        served_throughput: acc.served / n,
        offered_throughput: acc.offered / n,
        avg_backlog,
        backlog_window_early: windows[0] / window_n[0].max(1) as f64,
        backlog_window_late: windows[1] / window_n[1].max(1) as f64,
        bound_slack_q: slack * unit,
        bound_violations: violations,
        drift_const_c: drift_c,
        nonconverged_fraction,
        avg_dual_iterations: acc.iterations / n,
        mean_relative_gap: acc.gap / acc.gap_n.max(1) as f64,
        infeasible_slots: infeasible,
        flagged: nonconverged_fraction > NONCONVERGENCE_FLAG || infeasible > 0,
    };
    Ok(RunOutput { metrics, trace })
}

/// Parameter varied by a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    #[serde(rename = "V")]
    V,
    Lambda,
    EeReq,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::V => "V",
            SweepAxis::Lambda => "lambda",
            SweepAxis::EeReq => "ee_req",
        }
    }

    /// Applies `value` to a copy of `spec`. `Lambda` sets the RUE mean in bits
    /// per slot and the HUE mean to half of it.
    pub fn apply<T: Scalar>(self, spec: &RunSpec<T>, value: f64) -> RunSpec<T> {
        let mut s = spec.clone();
        match self {
            SweepAxis::V => s.network.control_v = T::lit(value),
            SweepAxis::Lambda => s.arrivals = s.arrivals.clone().with_lambda(value),
            SweepAxis::EeReq => s.network.ee_required = T::lit(value),
        }
        s
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "v" => Ok(SweepAxis::V),
            "lambda" => Ok(SweepAxis::Lambda),
            "ee_req" | "ee" | "eta" => Ok(SweepAxis::EeReq),
            other => Err(format!("unknown sweep axis '{other}' (expected V, lambda or ee_req)")),
        }
    }
}

/// One run per value, all with the template's seed, in parallel. Results keep
/// the order of `values`.
pub fn sweep<T: Scalar>(
    template: &RunSpec<T>,
    axis: SweepAxis,
    values: &[f64],
) -> Result<Vec<RunOutput>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Invalid("sweep needs at least one value".into()));
    }
    values.par_iter().map(|&v| run(&axis.apply(template, v))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(lambda: f64) -> RunSpec<f64> {
        RunSpec {
            network: NetworkConfig::reference_defaults(),
            arrivals: ArrivalSpec::poisson(lambda, 12000.0, 6000.0),
            channel: ChannelSpec::default(),
            slots: 60,
            warmup: 0,
            seed: 3,
            scheme: Scheme::Jccro,
            solver: SolverOptions::default(),
            trace: true,
        }
    }

    #[test]
    fn zero_arrivals_idle_network() {
        let out = run(&small_spec(0.0)).unwrap();
        let m = &out.metrics;
        assert_eq!(m.utility, 0.0);
        assert_eq!(m.avg_rate, 0.0);
        assert_eq!(m.achieved_ee, 0.0);
        assert!((m.avg_power - 3.0).abs() < 1e-12);
        assert_eq!(m.avg_delay, 0.0);
    }

    #[test]
    fn metrics_are_consistent() {
        let out = run(&small_spec(2000.0)).unwrap();
        let m = &out.metrics;
        assert_eq!(out.trace.len(), 60);
        assert!((m.achieved_ee - m.avg_rate / (300e3 * m.avg_power)).abs() < 1e-15);
        assert_eq!(m.bound_violations, 0);
        assert!(m.bound_slack_q >= 0.0);
        assert!(m.avg_delay >= 0.0);
        let admitted: f64 = out.trace.iter().map(|r| r.admitted).sum::<f64>() / 60.0;
        let tput: f64 = m.avg_throughput_hue.iter().chain(&m.avg_throughput_rue).sum();
        assert!((admitted - tput).abs() < 1e-6 * admitted.max(1.0));
    }

    #[test]
    fn single_value_sweep_equals_run() {
        let spec = small_spec(1000.0);
        let swept = sweep(&spec, SweepAxis::Lambda, &[500.0]).unwrap();
        let direct = run(&SweepAxis::Lambda.apply(&spec, 500.0)).unwrap();
        assert_eq!(swept.len(), 1);
        assert_eq!(swept[0], direct);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = small_spec(10.0);
        spec.slots = 0;
        assert!(run(&spec).is_err());
        let mut spec = small_spec(10.0);
        spec.warmup = 60;
        assert!(run(&spec).is_err());
        assert!(sweep(&small_spec(1.0), SweepAxis::V, &[]).is_err());
    }
}
