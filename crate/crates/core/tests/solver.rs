mod common;

use common::{random_channels, random_precoders, rng};
use mimo_noma::network::{Channels, ClusterPlan, NetworkConfig};
use mimo_noma::solver::{
    constructed_dims, lower_feasibility_subproblem, lower_qp_subproblem, lower_sdp_subproblem,
    lower_soc_subproblem, problem_dims, solve, AffineExpr, ClarabelBackend, Cone, ConeBlock, ConicProgram,
    LoweringParams, MinorantSet, ProblemDims, ProgramMetadata, SolveStatus, VariableLayout,
};
use mimo_noma::surrogate::{qp_minorants, sdp_minorants, soc_minorants, MinorantKind};
use mimo_noma::throughput::{evaluate, rotate_phases, DecodeStructure, PrecoderSet};
use rand::Rng;

fn scalar_program(blocks: Vec<ConeBlock>) -> ConicProgram {
    let mut layout = VariableLayout::new(0, 0, 1, 1);
    let t = layout.add_slack("t");
    ConicProgram {
        layout,
        objective: AffineExpr::var(t),
        blocks,
        metadata: ProgramMetadata {
            kind: MinorantKind::Qp,
            feasibility: false,
            n_complex: 0,
            n_min_slacks: 0,
            n_real_variables: 1,
            m_power: 0,
            m_rate: 0,
            m_trust: 0,
        },
    }
}

/// `c + s·t`.
fn row(c: f64, s: f64) -> AffineExpr {
    AffineExpr { terms: vec![(0, s)], constant: c }
}

#[test]
fn trivial_program_maximizes_to_bound() {
    let p = scalar_program(vec![ConeBlock::new(Cone::Nonneg, "t <= 5", vec![row(5.0, -1.0)])]);
    let s = solve(&p, &ClarabelBackend::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective - 5.0).abs() < 1e-7, "{}", s.objective);
}

#[test]
fn infeasible_toy_is_reported() {
    let p = scalar_program(vec![ConeBlock::new(Cone::Nonneg, "box", vec![row(-1.0, 1.0), row(0.0, -1.0)])]);
    let s = solve(&p, &ClarabelBackend::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Infeasible);
}

#[test]
fn every_cone_type_reaches_backend() {
    // [[1, t], [t, 4]] ⪰ 0 caps t at 2; |t| ≤ 3 and a constant zero row are inactive.
    let psd = vec![AffineExpr::constant(1.0), row(0.0, 1.0), AffineExpr::constant(4.0)];
    let soc = vec![AffineExpr::constant(3.0), row(0.0, 1.0)];
    let p = scalar_program(vec![
        ConeBlock::new(Cone::Psd { dim: 2 }, "psd", psd),
        ConeBlock::new(Cone::SecondOrder, "soc", soc),
        ConeBlock::new(Cone::Zero, "zero", vec![AffineExpr::constant(0.0)]),
    ]);
    let s = solve(&p, &ClarabelBackend::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective - 2.0).abs() < 1e-6, "{}", s.objective);
    assert!(p.max_violation(&s.x) < 1e-7);
}

struct Instance {
    channels: Channels,
    anchor: PrecoderSet,
    structure: DecodeStructure,
}

fn instance(seed: u64, nr: usize, l: usize) -> Instance {
    let mut r = rng(seed);
    let (n, k, nt) = (2, 2, 4);
    let channels = random_channels(&mut r, n, 2 * k, nr, nt);
    let mut anchor = random_precoders(&mut r, n, 2 * k, nt, l, 1.0);
    if nr == 1 {
        anchor = rotate_phases(&channels, &anchor).unwrap();
    }
    Instance { channels, anchor, structure: DecodeStructure::noma(&ClusterPlan::identity_pairs(n, k)).unwrap() }
}

fn exact_objective(inst: &Instance, v: &PrecoderSet) -> f64 {
    evaluate(&inst.channels, v, &inst.structure).unwrap().total_nats()
}

fn min_rate(inst: &Instance, v: &PrecoderSet) -> f64 {
    evaluate(&inst.channels, v, &inst.structure).unwrap().min_rate_nats()
}

/// The anchor with every epigraph slack at its exact rate and `U = I`.
fn anchor_point(p: &ConicProgram, inst: &Instance) -> Vec<f64> {
    let mut x = p.pack(&inst.anchor);
    let report = evaluate(&inst.channels, &inst.anchor, &inst.structure).unwrap();
    for ue in inst.anchor.ues() {
        x[p.slack(&format!("t{ue}")).unwrap()] = report.ue(ue).rate_nats;
    }
    for (k, name) in p.layout.slacks.iter().enumerate() {
        if name.starts_with('U') && !name.ends_with(".re") && !name.ends_with(".im") {
            let tail = &name[name.rfind('(').unwrap()..];
            let (a, b) = tail.trim_matches(|c| c == '(' || c == ')').split_once(',').unwrap();
            if a == b {
                x[p.layout.n_precoder() + k] = 1.0;
            }
        }
    }
    x
}

fn params(inst: &Instance, fraction: f64) -> LoweringParams {
    LoweringParams { power: 1.0, qos_nats: fraction * min_rate(inst, &inst.anchor) }
}

fn lowered(inst: &Instance, kind: MinorantKind, params: LoweringParams) -> (ConicProgram, Box<dyn Fn(&PrecoderSet) -> f64 + '_>) {
    let (c, a, s) = (&inst.channels, &inst.anchor, &inst.structure);
    match kind {
        MinorantKind::Qp => {
            let set = qp_minorants(a, c, s).unwrap();
            (lower_qp_subproblem(&set, params), Box::new(move |v| set.objective(v)))
        }
        MinorantKind::Sdp => {
            let set = sdp_minorants(a, c, s).unwrap();
            (lower_sdp_subproblem(&set, params), Box::new(move |v| set.objective(v).unwrap()))
        }
        MinorantKind::Soc => {
            let set = soc_minorants(a, c, s).unwrap();
            (lower_soc_subproblem(&set, params), Box::new(move |v| set.objective(v).unwrap()))
        }
    }
}

fn shapes(kind: MinorantKind) -> (usize, usize) {
    if kind == MinorantKind::Soc { (1, 1) } else { (2, 2) }
}

const KINDS: [MinorantKind; 3] = [MinorantKind::Qp, MinorantKind::Sdp, MinorantKind::Soc];

#[test]
fn anchor_is_feasible_for_every_lowering() {
    for kind in KINDS {
        let (nr, l) = shapes(kind);
        for seed in 0..5 {
            let inst = instance(100 + seed, nr, l);
            for fraction in [0.0, 0.9] {
                let (p, _) = lowered(&inst, kind, params(&inst, fraction));
                p.validate().unwrap();
                let x = anchor_point(&p, &inst);
                let viol = p.max_violation(&x);
                assert!(viol <= 1e-9, "{kind:?} r-fraction {fraction}: violation {viol}");
                assert!(p.blocks.iter().any(|b| b.label == "qos" || b.label.starts_with("rate")));
                assert!((p.objective.eval(&x) - exact_objective(&inst, &inst.anchor)).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn solved_subproblems_improve_on_anchor_and_round_trip() {
    let backend = ClarabelBackend::default();
    for kind in KINDS {
        let (nr, l) = shapes(kind);
        for seed in 0..3 {
            let inst = instance(200 + seed, nr, l);
            let (p, minorant) = lowered(&inst, kind, params(&inst, 0.5));
            let s = solve(&p, &backend).unwrap();
            assert!(s.status.has_solution(), "{kind:?}: {:?}", s.status);
            assert!(p.max_violation(&s.x) < 1e-6, "{kind:?}: violation {}", p.max_violation(&s.x));
            let anchor_value = exact_objective(&inst, &inst.anchor);
            assert!(s.objective >= anchor_value - 1e-6, "{kind:?}: {} < {anchor_value}", s.objective);
            let v = p.unpack(&s.x).unwrap();
            let m = minorant(&v);
            assert!((m - s.objective).abs() <= 1e-6 * (1.0 + m.abs()), "{kind:?}: {m} vs {}", s.objective);
            // Minorants are lower bounds, so the exact objective improves too.
            assert!(exact_objective(&inst, &v) >= m - 1e-9);
        }
    }
}

#[test]
fn zero_threshold_soc_rows_reduce_to_nonnegative_real_part() {
    let inst = instance(300, 1, 1);
    let (p, _) = lowered(&inst, MinorantKind::Soc, LoweringParams { power: 1.0, qos_nats: 0.0 });
    for b in p.blocks.iter().filter(|b| b.label.starts_with("rate")) {
        if b.rows.len() > 1 && b.rows[1..].iter().all(|r| r.terms.is_empty() && r.constant == 0.0) {
            assert!(b.rows[0].constant == 0.0);
        } else {
            // Cross terms: φ ≥ 0 as a rotated cone with an empty tail.
            assert!(b.rows[2..].iter().all(|r| r.terms.is_empty() && r.constant == 0.0), "{}", b.label);
        }
    }
}

#[test]
fn feasibility_subproblem_certifies_and_detects_trivial_case() {
    let backend = ClarabelBackend::default();
    let inst = instance(400, 2, 2);
    let set = qp_minorants(&inst.anchor, &inst.channels, &inst.structure).unwrap();
    let r = min_rate(&inst, &inst.anchor);
    let p = lower_feasibility_subproblem(MinorantSet::Qp(&set), LoweringParams { power: 1.0, qos_nats: r });
    let s = solve(&p, &backend).unwrap();
    assert!(s.status.has_solution());
    assert!(s.objective >= 1.0 - 1e-7, "anchor meets r, so τ ≥ 1: {}", s.objective);

    let zero = lower_feasibility_subproblem(MinorantSet::Qp(&set), LoweringParams { power: 1.0, qos_nats: 0.0 });
    assert_eq!(solve(&zero, &backend).unwrap().status, SolveStatus::Unbounded);
}

#[test]
fn feasibility_ratio_shrinks_with_power() {
    let backend = ClarabelBackend::default();
    let inst = instance(500, 2, 2);
    // Anchor at the smallest budget, so it is feasible for every budget tried.
    let small: f64 = 1e-2;
    let anchor = inst.anchor.scaled(small.sqrt());
    let set = sdp_minorants(&anchor, &inst.channels, &inst.structure).unwrap();
    let mut last = f64::INFINITY;
    for power in [1.0, 0.3, 0.1, 0.03, small] {
        let p = lower_feasibility_subproblem(MinorantSet::Sdp(&set), LoweringParams { power, qos_nats: 1.0 });
        let s = solve(&p, &backend).unwrap();
        assert!(s.status.has_solution());
        assert!(s.objective <= last + 1e-6, "τ({power}) = {} > {last}", s.objective);
        last = s.objective;
    }
    assert!(last > 0.0);
}

#[test]
fn dimension_formulas_match_worked_examples() {
    let c = NetworkConfig::default();
    assert_eq!(problem_dims(&c, MinorantKind::Qp), ProblemDims { n: 102, m: 21 });
    assert_eq!(problem_dims(&c, MinorantKind::Sdp).m, 21 + 3 * 3 * 2 * 2);
    let one = NetworkConfig { n_cells: 1, pairs_per_cell: 1, ..NetworkConfig::default() };
    assert_eq!(problem_dims(&one, MinorantKind::Qp).n, 2 * 4 * 2 + 1);
    for kind in [MinorantKind::Qp, MinorantKind::Sdp] {
        assert_eq!(constructed_dims(&c, kind, 1).unwrap(), problem_dims(&c, kind));
        assert_eq!(constructed_dims(&one, kind, 1).unwrap(), problem_dims(&one, kind));
    }
    let miso = NetworkConfig::miso(4);
    assert_eq!(problem_dims(&miso, MinorantKind::Soc).m, 3 * 13);
    assert_eq!(constructed_dims(&miso, MinorantKind::Soc, 1).unwrap(), problem_dims(&miso, MinorantKind::Soc));
    assert!(constructed_dims(&c, MinorantKind::Soc, 1).is_err());
}

#[test]
fn dimension_formulas_hold_on_random_configs() {
    let mut r = rng(600);
    for _ in 0..20 {
        let nt = r.random_range(1..5);
        let nr = r.random_range(1..4);
        let c = NetworkConfig {
            n_cells: r.random_range(1..4),
            pairs_per_cell: r.random_range(1..3),
            tx_antennas: nt,
            rx_antennas: nr,
            streams: r.random_range(1..=nt.min(nr)),
            ..NetworkConfig::default()
        };
        for kind in [MinorantKind::Qp, MinorantKind::Sdp] {
            assert_eq!(constructed_dims(&c, kind, 7).unwrap(), problem_dims(&c, kind), "{kind:?} {c:?}");
        }
        let m = NetworkConfig { rx_antennas: 1, streams: 1, ..c.clone() };
        assert_eq!(constructed_dims(&m, MinorantKind::Soc, 7).unwrap(), problem_dims(&m, MinorantKind::Soc));
    }
}

#[test]
fn program_dump_round_trips() {
    let inst = instance(700, 2, 2);
    let (p, _) = lowered(&inst, MinorantKind::Sdp, params(&inst, 0.5));
    let mut buf = Vec::new();
    p.write_json(&mut buf).unwrap();
    let back: ConicProgram = serde_json::from_slice(&buf).unwrap();
    assert_eq!(back.layout, p.layout);
    assert_eq!(back.metadata, p.metadata);
    assert_eq!(back.blocks.len(), p.blocks.len());
    let x = anchor_point(&p, &inst);
    assert_eq!(back.max_violation(&x), p.max_violation(&x));
}
