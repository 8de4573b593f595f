//! CSV outputs.
//!
//! Floats are written as `{:.8e}` (9 significant digits, independent of the
//! locale); counts as integers, flags as `true` / `false`.
//!
//! - `run_summary.csv`: one row per run. Columns `run, scheme, sweep_axis,
//!   sweep_value, seed`, then the scalar metrics in [`METRIC_COLUMNS`] order,
//!   then `avg_throughput_hue_<m>` and `avg_throughput_rue_<j>` (bits per slot).
//! - `trace_<run>.csv`: one row per slot: `t`, `q_hue_<m>`, `q_rue_<j>`,
//!   `h_hue_<m>`, `h_rue_<j>` (bits after the slot's update), `z` (data units
//!   per second), `mu_sum` (bits/s), `p_sum` (W), `arrived`, `admitted`,
//!   `served` (bits), `dual_iterations`, `converged`, `objective`.
//! - `figdata_<metric>_vs_<axis>.csv` for sweeps: the axis value followed by
//!   one column per scheme. V and ee_req sweeps give utility, delay and EE;
//!   lambda sweeps give rate, delay and power.

use std::fs::File;
use std::path::Path;

use hcran_core::harness::SlotRecord;
use hcran_core::{RunMetrics, SweepAxis};

pub const METRIC_COLUMNS: [&str; 21] = [
    "slots",
    "warmup",
    "utility",
    "avg_delay",
    "avg_rate",
    "avg_power",
    "achieved_ee",
    "mean_slot_ee",
    "served_throughput",
    "offered_throughput",
    "avg_backlog",
    "backlog_window_early",
    "backlog_window_late",
    "bound_slack_q",
    "bound_violations",
    "drift_const_c",
    "nonconverged_fraction",
    "avg_dual_iterations",
    "mean_relative_gap",
    "infeasible_slots",
    "flagged",
];

pub fn fmt_f(x: f64) -> String {
    format!("{x:.8e}")
}

/// One finished run.
pub struct RunRecord {
    pub name: String,
    pub sweep: Option<(SweepAxis, f64)>,
    pub seed: u64,
    pub metrics: RunMetrics,
}

fn metric_values(m: &RunMetrics) -> Vec<String> {
    vec![
        m.slots.to_string(),
        m.warmup.to_string(),
        fmt_f(m.utility),
        fmt_f(m.avg_delay),
        fmt_f(m.avg_rate),
        fmt_f(m.avg_power),
        fmt_f(m.achieved_ee),
        fmt_f(m.mean_slot_ee),
        fmt_f(m.served_throughput),
        fmt_f(m.offered_throughput),
        fmt_f(m.avg_backlog),
        fmt_f(m.backlog_window_early),
        fmt_f(m.backlog_window_late),
        fmt_f(m.bound_slack_q),
        m.bound_violations.to_string(),
        fmt_f(m.drift_const_c),
        fmt_f(m.nonconverged_fraction),
        fmt_f(m.avg_dual_iterations),
        fmt_f(m.mean_relative_gap),
        m.infeasible_slots.to_string(),
        m.flagged.to_string(),
    ]
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}_{i}"))
}

pub fn write_summary(path: &Path, runs: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let (nh, nr) = runs.first().map_or((0, 0), |r| {
        (r.metrics.avg_throughput_hue.len(), r.metrics.avg_throughput_rue.len())
    });
    let mut header: Vec<String> = ["run", "scheme", "sweep_axis", "sweep_value", "seed"]
        .iter()
        .chain(METRIC_COLUMNS.iter())
        .map(|s| s.to_string())
        .collect();
    header.extend(indexed("avg_throughput_hue", nh));
    header.extend(indexed("avg_throughput_rue", nr));
    w.write_record(&header)?;
    for r in runs {
        let (axis, value) = match r.sweep {
            Some((a, v)) => (a.name().to_string(), fmt_f(v)),
            None => (String::new(), String::new()),
        };
        let mut row = vec![
            r.name.clone(),
            r.metrics.scheme.name().to_string(),
            axis,
            value,
            r.seed.to_string(),
        ];
        row.extend(metric_values(&r.metrics));
        row.extend(r.metrics.avg_throughput_hue.iter().map(|&x| fmt_f(x)));
        row.extend(r.metrics.avg_throughput_rue.iter().map(|&x| fmt_f(x)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, trace: &[SlotRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    let (nh, nr) = trace.first().map_or((0, 0), |r| (r.q_hue.len(), r.q_rue.len()));
    let mut header = vec!["t".to_string()];
    header.extend(indexed("q_hue", nh));
    header.extend(indexed("q_rue", nr));
    header.extend(indexed("h_hue", nh));
    header.extend(indexed("h_rue", nr));
    header.extend(
        [
            "z",
            "mu_sum",
            "p_sum",
            "arrived",
            "admitted",
            "served",
            "dual_iterations",
            "converged",
            "objective",
        ]
        .map(String::from),
    );
    w.write_record(&header)?;
    for r in trace {
        let mut row = vec![r.t.to_string()];
        for xs in [&r.q_hue, &r.q_rue, &r.h_hue, &r.h_rue] {
            row.extend(xs.iter().map(|&x| fmt_f(x)));
        }
        row.extend([r.z, r.mu_sum, r.p_sum, r.arrived, r.admitted, r.served].map(fmt_f));
        row.push(r.dual_iterations.to_string());
        row.push(r.converged.to_string());
        row.push(fmt_f(r.objective));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Figure data of a sweep. `runs` holds every run of every scheme. Returns the
/// file names written.
pub fn write_figdata(dir: &Path, axis: SweepAxis, runs: &[RunRecord]) -> csv::Result<Vec<String>> {
    type Pick = fn(&RunMetrics) -> f64;
    let metrics: [(&str, Pick); 3] = match axis {
        SweepAxis::V | SweepAxis::EeReq => [
            ("utility", |m| m.utility),
            ("delay", |m| m.avg_delay),
            ("ee", |m| m.achieved_ee),
        ],
        SweepAxis::Lambda => [
            ("rate", |m| m.avg_rate),
            ("delay", |m| m.avg_delay),
            ("power", |m| m.avg_power),
        ],
    };
    let mut schemes: Vec<&str> = Vec::new();
    for r in runs {
        let s = r.metrics.scheme.name();
        if !schemes.contains(&s) {
            schemes.push(s);
        }
    }
    let mut xs: Vec<f64> = Vec::new();
    for r in runs {
        if let Some((_, v)) = r.sweep {
            if !xs.contains(&v) {
                xs.push(v);
            }
        }
    }
    let mut names = Vec::new();
    for (metric, pick) in metrics {
        let name = format!("figdata_{metric}_vs_{}.csv", axis.name());
        let mut w = csv::Writer::from_writer(File::create(dir.join(&name))?);
        let mut header = vec![axis.name().to_string()];
        header.extend(schemes.iter().map(|s| s.to_string()));
        w.write_record(&header)?;
        for &x in &xs {
            let mut row = vec![fmt_f(x)];
            for s in &schemes {
                let cell = runs
                    .iter()
                    .find(|r| r.sweep.map(|(_, v)| v) == Some(x) && r.metrics.scheme.name() == *s)
                    .map_or(String::new(), |r| fmt_f(pick(&r.metrics)));
                row.push(cell);
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        names.push(name);
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_f(1.0), "1.00000000e0");
        assert_eq!(fmt_f(-0.000123456789), "-1.23456789e-4");
        assert_eq!(fmt_f(22.705123456), "2.27051235e1");
    }
}
