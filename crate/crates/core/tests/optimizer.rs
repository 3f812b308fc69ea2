use mimo_noma::network::{build_topology, pair_users, sample_channels, Channels, ClusterPlan, NetworkConfig};
use mimo_noma::optimizer::{
    initialize, kkt_gap, project_power, run_baseline, run_path_following, Algorithm, IterationTrace,
    OptimizerSettings, RunStatus, QOS_SLACK,
};
use mimo_noma::throughput::PrecoderSet;

fn instance(config: &NetworkConfig, seed: u64) -> (Channels, ClusterPlan) {
    let topo = build_topology(config, seed).unwrap();
    let channels = sample_channels(&topo, config, seed).unwrap();
    let plan = pair_users(&topo, config, 2, seed).unwrap();
    (channels, plan)
}

fn small_mimo() -> NetworkConfig {
    NetworkConfig { n_cells: 2, pairs_per_cell: 1, tx_antennas: 3, rx_antennas: 2, streams: 1, ..Default::default() }
}

fn small_miso() -> NetworkConfig {
    NetworkConfig { n_cells: 2, pairs_per_cell: 1, qos_threshold_bps_hz: 0.5, ..NetworkConfig::miso(3) }
}

fn check_trace(trace: &IterationTrace, config: &NetworkConfig) {
    let r = config.qos_threshold_nats();
    for w in trace.iterates.windows(2) {
        assert!(w[1].objective_nats >= w[0].objective_nats, "{:?}", trace.objectives());
    }
    for rec in &trace.iterates {
        assert!(rec.min_rate_nats >= r - QOS_SLACK, "{} < {r}", rec.min_rate_nats);
        assert!(rec.max_power_fraction <= 1.0 + 1e-12);
    }
    let p = config.power_budget_w();
    for i in 0..config.n_cells {
        assert!(trace.precoders.cell_power(i) <= p * (1.0 + 1e-9));
    }
    let last = trace.iterates.last().unwrap();
    assert!((trace.final_objective() - last.objective_nats).abs() <= 1e-6 * last.objective_nats.abs());
}

#[test]
fn qp_ascends_and_stays_feasible() {
    let config = small_mimo();
    let (ch, plan) = instance(&config, 3);
    let trace = run_path_following(&ch, &plan, &config, &OptimizerSettings::default()).unwrap();
    assert!(trace.status.is_feasible(), "{:?}", trace.status);
    check_trace(&trace, &config);
    assert!(trace.iterations() >= 1);
}

#[test]
fn converged_run_meets_tolerance() {
    let config = small_mimo();
    let (ch, plan) = instance(&config, 5);
    let settings = OptimizerSettings { epsilon: 1e-3, max_iterations: 200, ..Default::default() };
    let trace = run_path_following(&ch, &plan, &config, &settings).unwrap();
    assert_eq!(trace.status, RunStatus::Converged);
    let obj = trace.objectives();
    let n = obj.len();
    assert!((obj[n - 1] - obj[n - 2]) / obj[n - 2] <= settings.epsilon);
    assert!(kkt_gap(&trace).is_finite());
}

#[test]
fn sdp_ascends_and_stays_feasible() {
    let config = small_mimo();
    let (ch, plan) = instance(&config, 7);
    let settings = OptimizerSettings { max_iterations: 15, ..OptimizerSettings::for_algorithm(Algorithm::Sdp) };
    let trace = run_path_following(&ch, &plan, &config, &settings).unwrap();
    assert!(trace.status.is_feasible(), "{:?}", trace.status);
    check_trace(&trace, &config);
}

#[test]
fn qp_and_soc_end_feasible_on_miso() {
    let config = small_miso();
    let (ch, plan) = instance(&config, 11);
    let qp = run_path_following(&ch, &plan, &config, &OptimizerSettings::default()).unwrap();
    let soc = run_path_following(&ch, &plan, &config, &OptimizerSettings::for_algorithm(Algorithm::Soc)).unwrap();
    check_trace(&qp, &config);
    check_trace(&soc, &config);
    assert!(qp.status.is_feasible() && soc.status.is_feasible());
    // Both are KKT points; the gap is reported, not bounded.
    let (a, b) = (qp.final_objective(), soc.final_objective());
    println!("qp {a:.4} soc {b:.4} relative gap {:.3e}", (a - b).abs() / a.max(b));
}

#[test]
fn soc_rejects_mimo() {
    let config = small_mimo();
    let (ch, plan) = instance(&config, 1);
    assert!(run_path_following(&ch, &plan, &config, &OptimizerSettings::for_algorithm(Algorithm::Soc)).is_err());
}

#[test]
fn zero_threshold_starts_at_seed() {
    let config = NetworkConfig { qos_threshold_bps_hz: 0.0, ..small_mimo() };
    let (ch, plan) = instance(&config, 2);
    let start = initialize(&ch, &plan, &config, &OptimizerSettings::default()).unwrap().unwrap();
    let seed = PrecoderSet::seed(&ch, config.streams, config.power_budget_w());
    assert!(start.distance(&seed) <= 1e-9 * seed.cell_power(0).sqrt());
    let trace = run_path_following(&ch, &plan, &config, &OptimizerSettings::default()).unwrap();
    assert!(trace.init_tau.is_empty());
}

#[test]
fn tiny_power_fails_initialization() {
    let config = NetworkConfig { power_budget_dbm: -60.0, qos_threshold_bps_hz: 4.0, ..small_mimo() };
    let (ch, plan) = instance(&config, 4);
    let settings = OptimizerSettings { max_init_iterations: 10, ..Default::default() };
    let trace = run_path_following(&ch, &plan, &config, &settings).unwrap();
    match trace.status {
        RunStatus::InitFailed { best_tau } => assert!(best_tau < 1.0),
        s => panic!("expected init failure, got {s:?}"),
    }
    assert!(initialize(&ch, &plan, &config, &settings).unwrap().is_err());
}

#[test]
fn init_tau_reaches_one_when_it_succeeds() {
    let config = NetworkConfig { qos_threshold_bps_hz: 2.0, ..small_mimo() };
    let (ch, plan) = instance(&config, 9);
    let trace = run_path_following(&ch, &plan, &config, &OptimizerSettings::default()).unwrap();
    if trace.status.is_feasible() {
        assert!(trace.init_tau.last().is_none_or(|&t| t >= 1.0));
        check_trace(&trace, &config);
    }
}

#[test]
fn baselines_run_and_validate_algorithm() {
    let config = small_mimo();
    let (ch, plan) = instance(&config, 6);
    for alg in [Algorithm::CompQp, Algorithm::DpcQp] {
        let trace = run_baseline(&ch, &plan, &config, &OptimizerSettings::for_algorithm(alg)).unwrap();
        assert_eq!(trace.report.scheme, alg.scheme());
        if trace.status.is_feasible() {
            check_trace(&trace, &config);
        }
    }
    assert!(run_baseline(&ch, &plan, &config, &OptimizerSettings::default()).is_err());
}

#[test]
fn large_clusters_need_opt_in() {
    let config = NetworkConfig { n_cells: 1, pairs_per_cell: 1, ..small_mimo() };
    let topo = build_topology(&config, 0).unwrap();
    let ch = sample_channels(&topo, &config, 0).unwrap();
    let plan = ClusterPlan::new(2, vec![vec![vec![0, 1]]]).unwrap();
    assert!(run_path_following(&ch, &plan, &config, &OptimizerSettings::default()).is_ok());
    let config3 = NetworkConfig { pairs_per_cell: 2, ..config };
    let topo = build_topology(&config3, 0).unwrap();
    let ch = sample_channels(&topo, &config3, 0).unwrap();
    let plan = ClusterPlan::new(4, vec![vec![vec![0, 1, 2], vec![3]]]).unwrap();
    assert!(run_path_following(&ch, &plan, &config3, &OptimizerSettings::default()).is_err());
    let settings = OptimizerSettings { cluster_generalization: true, max_iterations: 5, ..Default::default() };
    let trace = run_path_following(&ch, &plan, &config3, &settings).unwrap();
    if trace.status.is_feasible() {
        check_trace(&trace, &config3);
    }
}

#[test]
fn projection_respects_budget() {
    let config = small_mimo();
    let (ch, _) = instance(&config, 0);
    let v = PrecoderSet::seed(&ch, 1, 4.0);
    let p = project_power(&v, 1.0);
    for i in 0..2 {
        assert!(p.cell_power(i) <= 1.0);
        assert!(p.cell_power(i) > 1.0 - 1e-9);
    }
}

#[test]
fn trace_json_round_trips() {
    let config = small_mimo();
    let (ch, plan) = instance(&config, 8);
    let settings = OptimizerSettings { max_iterations: 3, ..Default::default() };
    let trace = run_path_following(&ch, &plan, &config, &settings).unwrap();
    let back: IterationTrace = serde_json::from_str(&trace.to_json().unwrap()).unwrap();
    assert_eq!(back.status, trace.status);
    assert_eq!(back.objectives(), trace.objectives());
    assert!("dpc-qp".parse::<Algorithm>().unwrap() == Algorithm::DpcQp);
}
