//! Traffic queues `Q`, auxiliary virtual queues `H` and the EE virtual queue `Z`.
//!
//! Every entry is measured in data units (see [`NetworkConfig::data_unit_bits`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NetworkConfig;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("{what} must be finite and >= 0, got {value}")]
    Negative { what: &'static str, value: f64 },
    #[error("expected {expected} entries for {what}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueueState<T> {
    pub q_hue: Vec<T>,
    pub q_rue: Vec<T>,
    pub h_hue: Vec<T>,
    pub h_rue: Vec<T>,
    pub z: T,
    pub slot: u64,
}

fn check<T: Scalar>(what: &'static str, xs: &[T], expected: usize) -> Result<(), QueueError> {
    if xs.len() != expected {
        return Err(QueueError::Shape {
            what,
            expected,
            got: xs.len(),
        });
    }
    match xs.iter().find(|x| !(x.is_finite() && **x >= T::zero())) {
        Some(&x) => Err(QueueError::Negative {
            what,
            value: x.as_f64(),
        }),
        None => Ok(()),
    }
}

fn check_scalar<T: Scalar>(what: &'static str, x: T) -> Result<(), QueueError> {
    check(what, &[x], 1)
}

/// `max(x - out, 0) + inp` applied elementwise.
fn recurse<T: Scalar>(xs: &mut [T], out: &[T], inp: &[T]) {
    for ((x, &o), &a) in xs.iter_mut().zip(out).zip(inp) {
        *x = (*x - o).pos() + a;
    }
}

impl<T: Scalar> QueueState<T> {
    /// All queues empty at slot 0.
    pub fn new(num_hue: usize, num_rue: usize) -> Self {
        Self {
            q_hue: vec![T::zero(); num_hue],
            q_rue: vec![T::zero(); num_rue],
            h_hue: vec![T::zero(); num_hue],
            h_rue: vec![T::zero(); num_rue],
            z: T::zero(),
            slot: 0,
        }
    }

    pub fn for_config<U>(cfg: &NetworkConfig<U>) -> Self {
        Self::new(cfg.num_hue, cfg.num_rue)
    }

    pub fn num_hue(&self) -> usize {
        self.q_hue.len()
    }

    pub fn num_rue(&self) -> usize {
        self.q_rue.len()
    }

    /// `Q' = max(Q - service, 0) + admit`. Service is the per-slot amount `mu * tau`.
    pub fn update_traffic(
        &mut self,
        service_hue: &[T],
        service_rue: &[T],
        admit_hue: &[T],
        admit_rue: &[T],
    ) -> Result<(), QueueError> {
        let (nh, nr) = (self.num_hue(), self.num_rue());
        check("service_hue", service_hue, nh)?;
        check("service_rue", service_rue, nr)?;
        check("admit_hue", admit_hue, nh)?;
        check("admit_rue", admit_rue, nr)?;
        recurse(&mut self.q_hue, service_hue, admit_hue);
        recurse(&mut self.q_rue, service_rue, admit_rue);
        Ok(())
    }

    /// `H' = max(H - R, 0) + gamma`.
    pub fn update_virtual_h(
        &mut self,
        admit_hue: &[T],
        admit_rue: &[T],
        aux_hue: &[T],
        aux_rue: &[T],
    ) -> Result<(), QueueError> {
        let (nh, nr) = (self.num_hue(), self.num_rue());
        check("admit_hue", admit_hue, nh)?;
        check("admit_rue", admit_rue, nr)?;
        check("aux_hue", aux_hue, nh)?;
        check("aux_rue", aux_rue, nr)?;
        recurse(&mut self.h_hue, admit_hue, aux_hue);
        recurse(&mut self.h_rue, admit_rue, aux_rue);
        Ok(())
    }

    /// `Z' = max(Z - mu_sum, 0) + W * eta_req * p_sum`, with `mu_sum` in bits/s and
    /// both terms converted to data units.
    pub fn update_virtual_z(&mut self, mu_sum: T, p_sum: T, cfg: &NetworkConfig<T>) -> Result<(), QueueError> {
        check_scalar("mu_sum", mu_sum)?;
        check_scalar("p_sum", p_sum)?;
        self.z = (self.z - cfg.to_units(mu_sum)).pos() + cfg.ee_rate_coeff() * cfg.ee_required * p_sum;
        Ok(())
    }

    /// `L = (sum Q^2 + sum H^2 + w Z^2) / 2` with `w` the weight of `Z`.
    pub fn lyapunov_value(&self, z_weight: T) -> T {
        let sq = |xs: &[T]| xs.iter().fold(T::zero(), |a, &x| a + x * x);
        T::lit(0.5)
            * (sq(&self.q_hue) + sq(&self.h_hue) + sq(&self.q_rue) + sq(&self.h_rue) + z_weight * self.z * self.z)
    }

    pub fn total_backlog(&self) -> T {
        crate::scalar::sum(&self.q_hue) + crate::scalar::sum(&self.q_rue)
    }

    /// Smallest slack of the backlog bounds; negative when a bound is violated.
    pub fn backlog_bound_slack(&self, cfg: &NetworkConfig<T>) -> T {
        let (bh, br) = backlog_bounds(cfg);
        let slack = |qs: &[T], b: T| qs.iter().fold(T::infinity(), |s, &q| s.min(b - q));
        slack(&self.q_hue, bh).min(slack(&self.q_rue, br))
    }
}

/// Deterministic backlog bounds `(HUE, RUE)`: `V beta phi_H + 2 A_m^max` and
/// `V alpha phi_R + 2 A_j^max`, in data units.
pub fn backlog_bounds<T: Scalar>(cfg: &NetworkConfig<T>) -> (T, T) {
    let two = T::lit(2.0);
    (
        cfg.control_v * cfg.price_hue * cfg.phi_h() + two * cfg.a_max_hue_units(),
        cfg.control_v * cfg.price_rue * cfg.phi_r() + two * cfg.a_max_rue_units(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg() -> NetworkConfig<f64> {
        NetworkConfig {
            data_unit_bits: 1.0,
            ..NetworkConfig::reference_defaults()
        }
    }

    #[test]
    fn traffic_recursion_examples() {
        let mut q = QueueState::<f64>::new(1, 1);
        q.q_rue[0] = 5000.0;
        q.q_hue[0] = 1000.0;
        q.update_traffic(&[3000.0], &[3000.0], &[500.0], &[2000.0]).unwrap();
        assert_eq!(q.q_rue[0], 4000.0);
        assert_eq!(q.q_hue[0], 500.0);
    }

    #[test]
    fn rejects_negative_and_misshapen_input() {
        let mut q = QueueState::<f64>::new(1, 1);
        assert!(matches!(
            q.update_traffic(&[-1.0], &[0.0], &[0.0], &[0.0]),
            Err(QueueError::Negative { .. })
        ));
        assert!(matches!(
            q.update_virtual_h(&[0.0], &[0.0, 1.0], &[0.0], &[0.0]),
            Err(QueueError::Shape { .. })
        ));
        assert!(q.update_virtual_z(-1.0, 1.0, &unit_cfg()).is_err());
        assert_eq!(q, QueueState::new(1, 1));
    }

    #[test]
    fn virtual_h_examples() {
        let mut q = QueueState::<f64>::new(1, 1);
        q.h_rue[0] = 6000.0;
        q.update_virtual_h(&[0.0], &[6000.0], &[4000.0], &[0.0]).unwrap();
        assert_eq!(q.h_hue[0], 4000.0);
        assert_eq!(q.h_rue[0], 0.0);
    }

    #[test]
    fn virtual_z_examples() {
        // W * eta * p_sum = 12 with W = 300e3, p_sum = 1
        let cfg = NetworkConfig {
            ee_required: 12.0 / 300e3,
            ..unit_cfg()
        };
        let mut q = QueueState::<f64>::new(0, 0);
        q.update_virtual_z(10.0, 1.0, &cfg).unwrap();
        assert!((q.z - 12.0).abs() < 1e-9);

        let mut q = QueueState::<f64>::new(0, 0);
        q.z = 100.0;
        q.update_virtual_z(100.0, 5.0, &unit_cfg()).unwrap();
        assert_eq!(q.z, 0.0);
    }

    #[test]
    fn zero_requirement_keeps_z_empty() {
        let cfg = unit_cfg();
        let mut q = QueueState::<f64>::new(0, 0);
        for t in 0..100 {
            q.update_virtual_z(t as f64, 3.0 + t as f64, &cfg).unwrap();
            assert_eq!(q.z, 0.0);
        }
    }

    #[test]
    fn z_uses_data_units() {
        let cfg = NetworkConfig::<f64> {
            ee_required: 1.0,
            ..NetworkConfig::reference_defaults()
        };
        let mut q = QueueState::new(0, 0);
        q.z = 10.0;
        // 4000 bits/s served = 4 units; W/u * eta * p = 300 * 1 * 3
        q.update_virtual_z(4000.0, 3.0, &cfg).unwrap();
        assert!((q.z - 906.0).abs() < 1e-9);
    }

    #[test]
    fn lyapunov_examples() {
        let mut q = QueueState::<f64>::new(2, 2);
        assert_eq!(q.lyapunov_value(1.0), 0.0);
        q.q_rue[1] = 4.0;
        assert_eq!(q.lyapunov_value(1.0), 8.0);
        q.z = 2.0;
        q.h_hue[0] = 1.0;
        assert_eq!(q.lyapunov_value(1.0), 10.5);
    }

    #[test]
    fn service_scales_with_slot_duration() {
        let rate = 300_000.0;
        let drained = |tau: f64| {
            let mut q = QueueState::<f64>::new(0, 1);
            q.q_rue[0] = 10_000.0;
            q.update_traffic(&[], &[rate * tau], &[], &[0.0]).unwrap();
            10_000.0 - q.q_rue[0]
        };
        assert_eq!(drained(0.01), 3000.0);
        assert_eq!(drained(0.005), 1500.0);
    }

    #[test]
    fn ten_slot_trace_matches_recursion() {
        let service = [3.0, 0.0, 7.5, 1.0, 2.0, 9.0, 0.5, 4.0, 4.0, 0.0];
        let admit = [2.0, 6.0, 0.0, 3.5, 1.0, 0.0, 8.0, 2.5, 0.0, 1.0];
        let aux = [5.0, 5.0, 0.0, 0.0, 5.0, 5.0, 0.0, 5.0, 0.0, 5.0];
        let mut q = QueueState::<f64>::new(1, 0);
        let (mut qq, mut hh) = (0.0_f64, 0.0_f64);
        for t in 0..10 {
            q.update_traffic(&[service[t]], &[], &[admit[t]], &[]).unwrap();
            q.update_virtual_h(&[admit[t]], &[], &[aux[t]], &[]).unwrap();
            qq = if qq > service[t] { qq - service[t] } else { 0.0 } + admit[t];
            hh = if hh > admit[t] { hh - admit[t] } else { 0.0 } + aux[t];
            assert_eq!(q.q_hue[0], qq);
            assert_eq!(q.h_hue[0], hh);
        }
        assert_eq!((qq, hh), (3.5, 9.0));
    }

    #[test]
    fn bounds_in_data_units() {
        let cfg = NetworkConfig::<f64>::reference_defaults();
        let (bh, br) = backlog_bounds(&cfg);
        assert_eq!(bh, 1000.0 + 12.0);
        assert_eq!(br, 1000.0 + 24.0);
        let mut q = QueueState::for_config(&cfg);
        assert_eq!(q.backlog_bound_slack(&cfg), 1012.0);
        q.q_rue[3] = 1030.0;
        assert_eq!(q.backlog_bound_slack(&cfg), -6.0);
    }
}
