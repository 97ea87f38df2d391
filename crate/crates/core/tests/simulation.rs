use nimbus::agent::DqnParams;
use nimbus::harness::{
    compare, run_with_models, summarize, timeline_csv, Autoscaler, ExperimentConfig, HarnessError,
    Models,
};
use nimbus::loadgen::PhaseSpec;
use nimbus::simcore::{ClusterState, ResourceSpec, WorkloadModel};
use proptest::prelude::*;

fn short_config(autoscaler: Autoscaler, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        autoscaler,
        seed,
        phase_duration: 60,
        ..Default::default()
    }
}

fn zero_agent() -> Models {
    Models {
        forecaster: None,
        agent: DqnParams::zeros(64),
    }
}

// Straight-line reimplementation used as the oracle for `summarize`.
fn summary_oracle(replicas: &[u32], dt: u64) -> (f64, u64, u32) {
    let mut integral = 0u64;
    let mut events = 0u32;
    let mut prev = None;
    for &r in replicas {
        integral += r as u64 * dt;
        if let Some(p) = prev {
            if p != r {
                events += 1;
            }
        }
        prev = Some(r);
    }
    let avg = integral as f64 / (replicas.len() as u64 * dt) as f64;
    (avg, integral, events)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jobs_are_conserved_under_arbitrary_scaling(
        initial in 1u32..6,
        arrivals in prop::collection::vec(0u32..4, 60..200),
        targets in prop::collection::vec(1u32..12, 1..20),
        work in 200.0f64..5000.0,
    ) {
        let workload = WorkloadModel { work_per_request: work, ..Default::default() };
        let mut c = ClusterState::new(ResourceSpec::default(), workload, 1, 10, initial);
        let mut id = 0;
        for (t, &n) in arrivals.iter().enumerate() {
            for _ in 0..n {
                let job = c.make_job(id, t as f64);
                c.route_request(job);
                id += 1;
            }
            if t % 10 == 0 {
                c.set_desired_replicas(targets[(t / 10) % targets.len()]);
            }
            c.tick(1);
            prop_assert!(c.conservation_holds());
            prop_assert_eq!(c.injected, id);
            for p in &c.pods {
                prop_assert!(p.mem_used() <= c.resources.mem_limit + 1e-9);
            }
            prop_assert!(c.desired_replicas >= 1 && c.desired_replicas <= 10);
        }
    }

    #[test]
    fn summarize_matches_straight_line_oracle(
        replicas in prop::collection::vec(1u32..11, 1..64),
        dt in 1u64..60,
    ) {
        let s = summarize(&replicas, dt).unwrap();
        let (avg, integral, events) = summary_oracle(&replicas, dt);
        prop_assert_eq!(s.resource_integral, integral);
        prop_assert_eq!(s.scaling_events, events);
        prop_assert!((s.avg_replicas - avg).abs() < 1e-12);
        prop_assert!(s.avg_replicas >= 1.0 && s.avg_replicas <= 10.0);
    }

    #[test]
    fn baseline_runs_are_deterministic(seed in 0u64..1000, keda in any::<bool>()) {
        let a = if keda { Autoscaler::Keda } else { Autoscaler::Hpa };
        let cfg = short_config(a, seed);
        let r1 = run_with_models(&cfg, None).unwrap();
        let r2 = run_with_models(&cfg, None).unwrap();
        prop_assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
        prop_assert_eq!(timeline_csv(&r1), timeline_csv(&r2));
        prop_assert_eq!(r1.requests_injected, r1.plan.total_requests());
    }
}

#[test]
fn default_runs_inject_every_request_and_check_every_tick() {
    for a in [Autoscaler::Hpa, Autoscaler::Keda] {
        let r = run_with_models(&short_config(a, 42), None).unwrap();
        // Request counts belong to the phases, not to their durations.
        assert_eq!(r.requests_injected, 220);
        assert_eq!(r.conservation_checks, r.total_duration);
        assert!(r.requests_completed <= r.requests_injected);
    }
    let full = run_with_models(&ExperimentConfig::default(), None).unwrap();
    assert_eq!(full.requests_injected, 220);
    assert_eq!(full.timeline.len(), 32);
    assert_eq!(full.per_phase.len(), 4);
    let phase_integral: u64 = full
        .per_phase
        .iter()
        .map(|p| p.summary.resource_integral)
        .sum();
    assert_eq!(phase_integral, full.resource_integral);
}

#[test]
fn nimbus_run_has_sixteen_six_node_cycles() {
    let cfg = ExperimentConfig {
        autoscaler: Autoscaler::Nimbus,
        ..Default::default()
    };
    let r = run_with_models(&cfg, Some(&zero_agent())).unwrap();
    assert_eq!(r.decisions.len(), 16);
    let times: Vec<u64> = r.decisions.iter().map(|c| c.t).collect();
    assert_eq!(times, (1..=16).map(|k| k * 30).collect::<Vec<_>>());
    for c in &r.decisions {
        assert_eq!(c.node_names(), nimbus::graph::NODES);
    }
}

#[test]
fn nimbus_requires_models() {
    let cfg = ExperimentConfig {
        autoscaler: Autoscaler::Nimbus,
        ..Default::default()
    };
    assert!(matches!(
        run_with_models(&cfg, None),
        Err(HarnessError::MissingModel(_))
    ));
}

#[test]
fn compare_orders_rows_and_flags_extremes() {
    let reports: Vec<_> = [Autoscaler::Keda, Autoscaler::Hpa]
        .into_iter()
        .map(|a| run_with_models(&short_config(a, 3), None).unwrap())
        .collect();
    let table = compare(&reports).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].autoscaler, Autoscaler::Hpa);
    let hpa = table.row(Autoscaler::Hpa).unwrap();
    let keda = table.row(Autoscaler::Keda).unwrap();
    // With two rows each delta is the difference to the other row.
    assert!((hpa.delta_avg_replicas + keda.delta_avg_replicas).abs() < 1e-12);
    assert!((hpa.delta_avg_replicas - (hpa.avg_replicas - keda.avg_replicas)).abs() < 1e-12);
    assert_eq!(
        hpa.highest_avg_replicas,
        hpa.avg_replicas >= keda.avg_replicas
    );
    let text = table.to_text();
    assert!(text.contains("hpa") && text.contains("keda"));
}

#[test]
fn compare_rejects_mismatched_plans_and_single_reports() {
    let a = run_with_models(&short_config(Autoscaler::Hpa, 1), None).unwrap();
    let b = run_with_models(&short_config(Autoscaler::Keda, 2), None).unwrap();
    assert!(matches!(
        compare(&[a.clone(), b]),
        Err(HarnessError::MismatchedPlans)
    ));
    assert!(matches!(
        compare(&[a]),
        Err(HarnessError::NotEnoughReports(_))
    ));
}

#[test]
fn custom_phases_from_toml() {
    let cfg = ExperimentConfig::from_toml(
        r#"
        autoscaler = "keda"
        seed = 9
        [[phases]]
        name = "burst"
        concurrent_users = 10
        total_requests = 50
        duration = 90
        "#,
    )
    .unwrap();
    assert_eq!(cfg.plan().phases, vec![PhaseSpec::new("burst", 10, 50, 90)]);
    let r = run_with_models(&cfg, None).unwrap();
    assert_eq!(r.timeline.len(), 6);
    assert_eq!(r.requests_injected, 50);
}
