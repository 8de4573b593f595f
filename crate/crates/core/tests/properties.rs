use hcran_core::controller::{solve_slot, solve_subproblem, waterfill_single, DriftWeights, DualState, SolverOptions};
use hcran_core::model::{instantaneous_ee, power_totals, rates};
use hcran_core::oracle::{enumerate_subproblem3, random_tiny_instance};
use hcran_core::queues::backlog_bounds;
use hcran_core::{
    run, ArrivalSpec, ChannelSpec, ChannelState, ControlDecision, NetworkConfig, QueueState, RunSpec, Scheme, Ue,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_cfg() -> NetworkConfig<f64> {
    NetworkConfig {
        num_rrh: 2,
        num_hue: 2,
        num_rue: 2,
        num_rb_rrh: 3,
        num_rb_hpn: 2,
        bandwidth_total: 75e3,
        ..NetworkConfig::reference_defaults()
    }
}

fn gains(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-1.0f64..3.0).prop_map(|e| 10f64.powf(e)), n)
}

fn channel() -> impl Strategy<Value = ChannelState<f64>> {
    let cfg = small_cfg();
    (gains(2 * 2 * 3), gains(2 * 2 * 3), gains(2 * 2))
        .prop_map(move |(a, b, c)| ChannelState::from_parts(&cfg, a, b, c).unwrap())
}

fn queues() -> impl Strategy<Value = QueueState<f64>> {
    (prop::collection::vec(0.0f64..400.0, 8), 0.0f64..2000.0).prop_map(|(v, z)| QueueState {
        q_hue: v[0..2].to_vec(),
        q_rue: v[2..4].to_vec(),
        h_hue: v[4..6].to_vec(),
        h_rue: v[6..8].to_vec(),
        z,
        slot: 0,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn queue_updates_stay_nonnegative(
        q in prop::collection::vec(0.0f64..100.0, 4),
        s in prop::collection::vec(0.0f64..100.0, 4),
        a in prop::collection::vec(0.0f64..100.0, 4),
    ) {
        let mut qs = QueueState::<f64>::new(2, 2);
        qs.q_hue = q[..2].to_vec();
        qs.q_rue = q[2..].to_vec();
        qs.update_traffic(&s[..2], &s[2..], &a[..2], &a[2..]).unwrap();
        for (i, &x) in qs.q_hue.iter().chain(&qs.q_rue).enumerate() {
            prop_assert!(x >= 0.0);
            prop_assert_eq!(x, (q[i] - s[i]).max(0.0) + a[i]);
        }
        prop_assert!(qs.lyapunov_value(1.0) >= 0.0);
    }

    #[test]
    fn z_grows_only_with_power(z in 0.0f64..1e4, mu in 0.0f64..1e7, p in 0.0f64..40.0, eta in 0.0f64..2.0) {
        let cfg = NetworkConfig { ee_required: eta, ..NetworkConfig::reference_defaults() };
        let mut qs = QueueState::<f64>::for_config(&cfg);
        qs.z = z;
        qs.update_virtual_z(mu, p, &cfg).unwrap();
        prop_assert!(qs.z >= 0.0);
        prop_assert!(qs.z <= z + cfg.ee_rate_coeff() * eta * p + 1e-9);
    }

    #[test]
    fn rates_grow_with_power(ch in channel(), p in 0.0f64..3.0, extra in 0.0f64..1.0) {
        let cfg = small_cfg();
        let mut d = ControlDecision::idle(&cfg);
        d.rrh_rb_owner = vec![Some(Ue::Rue(0)), Some(Ue::Hue(1)), Some(Ue::Rue(1))];
        d.assoc = vec![false, true];
        d.hpn_rb_owner = vec![Some(0), None];
        let fill = |d: &mut ControlDecision<f64>, p: f64| {
            d.pw_rrh.iter_mut().for_each(|x| *x = p / 3.0);
            d.pw_hpn[0] = p;
        };
        fill(&mut d, p);
        let r0 = rates(&cfg, &ch, &d).unwrap();
        fill(&mut d, p + extra);
        let r1 = rates(&cfg, &ch, &d).unwrap();
        for (a, b) in r0.hue.iter().chain(&r0.rue).zip(r1.hue.iter().chain(&r1.rue)) {
            prop_assert!(*a >= 0.0 && b >= a);
        }
        // the unserved HPN RB adds nothing, the idle RB carries no power
        let t = power_totals(&cfg, &d).unwrap();
        let expected = 3.0 + 2.0 * (p + extra) + (p + extra);
        prop_assert!((t.sum - expected).abs() < 1e-9);
        let ee = instantaneous_ee(r1.total(), t.sum, &cfg).unwrap();
        prop_assert!((ee * cfg.bandwidth_total * t.sum - r1.total()).abs() <= 1e-9 * r1.total().max(1.0));
    }

    #[test]
    fn single_waterfill_is_optimal(a in 0.0f64..50.0, price in 0.01f64..20.0, g in 0.01f64..100.0) {
        let p = waterfill_single(a, price, g, 3.0);
        prop_assert!((0.0..=3.0).contains(&p));
        let f = |x: f64| a * (1.0 + g * x).ln() - price * x;
        for k in 0..=300 {
            prop_assert!(f(p) >= f(3.0 * k as f64 / 300.0) - 1e-9);
        }
    }

    #[test]
    fn controller_decisions_are_feasible(ch in channel(), qs in queues(), eta in 0.0f64..1.0) {
        let cfg = NetworkConfig { ee_required: eta, ..small_cfg() };
        let a_hue = vec![4.0, 0.0];
        let a_rue = vec![3.0, 11.0];
        let mut ds = DualState::new(cfg.num_rrh, 0.1);
        let (d, diag) = solve_slot(&cfg, &qs, &ch, &a_hue, &a_rue, &mut ds, &SolverOptions::default()).unwrap();
        d.validate(&cfg, Some((&a_hue, &a_rue))).unwrap();
        prop_assert!(diag.objective <= 0.0);
        prop_assert!(diag.dual_bound <= diag.objective + 1e-9 * diag.objective.abs().max(1.0));
        let t = power_totals(&cfg, &d).unwrap();
        prop_assert!(t.hpn <= cfg.p_max_hpn * (1.0 + 1e-12));
        prop_assert!(t.per_rrh.iter().all(|&p| p <= cfg.p_max_rrh * (1.0 + 1e-12)));
        for (m, (&adm, &arr)) in d.admit_hue.iter().zip(&a_hue).enumerate() {
            prop_assert_eq!(adm, if qs.h_hue[m] > qs.q_hue[m] { arr } else { 0.0 });
        }
    }

    #[test]
    fn uniform_weights_scale_the_objective(ch in channel(), b in 0.1f64..5.0) {
        let cfg = small_cfg();
        let opts = SolverOptions { warm_start: false, ..SolverOptions::default() };
        let w1 = DriftWeights::uniform(&cfg, b, 0.5);
        let w2 = DriftWeights::uniform(&cfg, 2.0 * b, 1.0);
        let s1 = solve_subproblem(&cfg, &w1, &ch, &mut DualState::new(2, 0.1), &opts);
        let s2 = solve_subproblem(&cfg, &w2, &ch, &mut DualState::new(2, 0.1), &opts);
        prop_assert!((2.0 * s1.objective - s2.objective).abs() <= 1e-6 * s2.objective.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn controller_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_tiny_instance::<f64, _>(&mut rng);
        let opt = enumerate_subproblem3(&inst).unwrap().objective;
        let mut ds = DualState::new(inst.cfg.num_rrh, 0.1);
        let sol = solve_subproblem(&inst.cfg, &inst.weights, &inst.channel, &mut ds, &SolverOptions::default());
        prop_assert!(sol.objective <= opt + 1e-3 * opt.abs(), "controller {} vs grid optimum {}", sol.objective, opt);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn backlog_never_exceeds_bound(v in 1.0f64..5000.0, lambda in 0.0f64..12000.0, eta in 0.0f64..0.5, seed in any::<u64>()) {
        let spec = RunSpec {
            network: NetworkConfig { control_v: v, ee_required: eta, ..small_cfg() },
            arrivals: ArrivalSpec::poisson(lambda, 12000.0, 6000.0),
            channel: ChannelSpec::default(),
            slots: 150,
            warmup: 0,
            seed,
            scheme: Scheme::Jccro,
            solver: SolverOptions::default(),
            trace: true,
        };
        let out = run(&spec).unwrap();
        let (bh, br) = backlog_bounds(&spec.network);
        let unit = spec.network.data_unit_bits;
        prop_assert_eq!(out.metrics.bound_violations, 0);
        for r in &out.trace {
            prop_assert!(r.q_hue.iter().all(|&q| (0.0..=bh * unit).contains(&q)));
            prop_assert!(r.q_rue.iter().all(|&q| (0.0..=br * unit).contains(&q)));
            prop_assert!(r.served <= r.mu_sum * spec.network.slot_duration + 1e-6);
        }
        let m = &out.metrics;
        prop_assert!(m.avg_delay >= 0.0);
        prop_assert!((m.achieved_ee * spec.network.bandwidth_total * m.avg_power - m.avg_rate).abs() <= 1e-9 * m.avg_rate.max(1.0));
    }
}
