mod common;

use common::*;
use mimo_noma::linalg::{complex_gaussian, hermitize, scaled_identity, CMatrix, C64};
use mimo_noma::network::{Channels, ClusterPlan, NetworkConfig, UeId};
use mimo_noma::throughput::{
    cluster_rates, comp_rates, covariance_bundle, dpc_rates, evaluate, miso_rates, noma_rates,
    rotate_phases, sum_power, DecodeStructure, PrecoderSet,
};
use nalgebra::SymmetricEigen;
use proptest::prelude::*;

/// `σ²I + Σ_{(s,l) ∉ excluded} H_{s,d} V_{s,l} V_{s,l}ᴴ H_{s,d}ᴴ` by explicit
/// entrywise summation.
fn oracle_covariance(h: &Channels, v: &PrecoderSet, d: UeId, excluded: &[UeId]) -> CMatrix {
    let nr = h.rx_antennas();
    let mut m = CMatrix::zeros(nr, nr);
    for s in 0..h.n_cells() {
        for l in 0..h.users_per_cell() {
            let f = UeId::new(s, l);
            if excluded.contains(&f) {
                continue;
            }
            let hs = h.link(s, d);
            let vf = v.get(f);
            for a in 0..nr {
                for b in 0..nr {
                    let mut acc = C64::new(0.0, 0.0);
                    for k in 0..v.streams() {
                        let mut x = C64::new(0.0, 0.0);
                        let mut y = C64::new(0.0, 0.0);
                        for t in 0..h.tx_antennas() {
                            x += hs[(a, t)] * vf[(t, k)];
                            y += hs[(b, t)] * vf[(t, k)];
                        }
                        acc += x * y.conj();
                    }
                    m[(a, b)] += acc;
                }
            }
        }
    }
    for a in 0..nr {
        m[(a, a)] += C64::new(h.noise_power(), 0.0);
    }
    m
}

/// `Σ ln(1 + λ)` over the eigenvalues of `Bᴴ M⁻¹ B`, with `M⁻¹` from LU.
fn oracle_rate(b: &CMatrix, m: &CMatrix) -> f64 {
    let inv = m.clone().try_inverse().unwrap();
    let q = hermitize(&(b.adjoint() * inv * b));
    SymmetricEigen::new(q).eigenvalues.iter().map(|l| l.ln_1p()).sum()
}

fn max_entry_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn zero_precoders_leave_only_noise() {
    let mut r = rng(1);
    let h = random_channels_noise(&mut r, 2, 2, 2, 3, 0.7);
    let v = PrecoderSet::zeros(2, 2, 3, 2);
    let plan = ClusterPlan::identity_pairs(2, 1);
    let noise = scaled_identity(2, 0.7);
    for ue in h.ues() {
        let b = covariance_bundle(&h, &v, &plan, ue).unwrap();
        assert_eq!(b.m_full, noise);
        assert_eq!(b.m_comp, noise);
        assert_eq!(b.m_dpc, noise);
        let p = b.pair.unwrap();
        assert_eq!(p.strong_minus_both, noise);
        assert_eq!(p.strong_minus_weak, noise);
        assert_eq!(p.weak_minus_weak, noise);
    }
    for report in [
        noma_rates(&h, &v, &plan).unwrap(),
        comp_rates(&h, &v, &plan).unwrap(),
        dpc_rates(&h, &v, &plan).unwrap(),
    ] {
        assert_eq!(report.total_nats(), 0.0);
        assert!(report.rates.iter().all(|x| x.rate_nats == 0.0));
    }
    assert_eq!(sum_power(&v), vec![0.0, 0.0]);
}

#[test]
fn single_pair_strong_covariance_is_noise_only() {
    let mut r = rng(2);
    let h = random_channels(&mut r, 1, 2, 2, 2);
    let v = random_precoders(&mut r, 1, 2, 2, 2, 1.0);
    let plan = ClusterPlan::identity_pairs(1, 1);
    let b = covariance_bundle(&h, &v, &plan, UeId::new(0, 0)).unwrap();
    assert!(max_entry_diff(&b.pair.unwrap().strong_minus_both, &scaled_identity(2, 1.0)) < 1e-15);
}

#[test]
fn bundle_matches_direct_sum_oracle() {
    let mut r = rng(3);
    for _ in 0..20 {
        let h = random_channels(&mut r, 2, 2, 2, 2);
        let v = random_precoders(&mut r, 2, 2, 2, 2, 1.0);
        // Center j = 0 is paired with edge p(j) = 1.
        let plan = ClusterPlan::identity_pairs(2, 1);
        for i in 0..2 {
            let c = UeId::new(i, 0);
            let e = UeId::new(i, 1);
            for ue in [c, e] {
                let b = covariance_bundle(&h, &v, &plan, ue).unwrap();
                assert!(max_entry_diff(&b.m_full, &oracle_covariance(&h, &v, ue, &[])) < 1e-12);
                assert!(max_entry_diff(&b.m_comp, &oracle_covariance(&h, &v, ue, &[ue])) < 1e-12);
                let dpc_ex: Vec<_> = (ue.ue..2).map(|k| UeId::new(i, k)).collect();
                assert!(max_entry_diff(&b.m_dpc, &oracle_covariance(&h, &v, ue, &dpc_ex)) < 1e-12);
                let p = b.pair.unwrap();
                assert_eq!((p.weak, p.strong), (e, c));
                assert!(max_entry_diff(&p.strong_minus_weak, &oracle_covariance(&h, &v, c, &[e])) < 1e-12);
                assert!(max_entry_diff(&p.weak_minus_weak, &oracle_covariance(&h, &v, e, &[e])) < 1e-12);
                assert!(
                    max_entry_diff(&p.strong_minus_both, &oracle_covariance(&h, &v, c, &[c, e])) < 1e-12
                );
            }
        }
    }
}

#[test]
fn covariance_chain_is_ordered() {
    let mut r = rng(4);
    let h = random_channels(&mut r, 2, 4, 2, 3);
    let v = random_precoders(&mut r, 2, 4, 3, 2, 2.0);
    let plan = ClusterPlan::identity_pairs(2, 2);
    for ue in h.ues() {
        let b = covariance_bundle(&h, &v, &plan, ue).unwrap();
        let p = b.pair.unwrap();
        if ue != p.strong {
            continue;
        }
        let lo = mimo_noma::linalg::min_eigenvalue(&(&p.strong_minus_weak - &p.strong_minus_both));
        let hi = mimo_noma::linalg::min_eigenvalue(&(&b.m_full - &p.strong_minus_weak));
        assert!(lo >= -1e-12 && hi >= -1e-12);
        let noise = mimo_noma::linalg::min_eigenvalue(&(&p.strong_minus_both - scaled_identity(2, 1.0)));
        assert!(noise >= -1e-12);
    }
}

#[test]
fn identity_link_rate_is_two_bits() {
    // One cell, one UE, H = I, V = I: VᴴHᴴHV = I₂ and σ² = 1.
    let h = Channels::from_parts(1, 1, 1.0, vec![CMatrix::identity(2, 2)]).unwrap();
    let v = PrecoderSet::from_matrices(1, 1, vec![CMatrix::identity(2, 2)]).unwrap();
    let plan = ClusterPlan::singletons(1, 1);
    let rep = noma_rates(&h, &v, &plan).unwrap();
    assert!((rep.total_nats() - 2.0 * 2f64.ln()).abs() < 1e-14);
    assert!((rep.total_bps_hz() - 2.0).abs() < 1e-14);
}

#[test]
fn noma_rates_match_eigenvalue_oracle() {
    let mut r = rng(5);
    for _ in 0..20 {
        let h = random_channels(&mut r, 3, 4, 2, 4);
        let v = random_precoders(&mut r, 3, 4, 4, 2, 3.0);
        let plan = ClusterPlan::identity_pairs(3, 2);
        let rep = noma_rates(&h, &v, &plan).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let c = UeId::new(i, j);
                let e = UeId::new(i, j + 2);
                let hc = h.link(i, c);
                let he = h.link(i, e);
                let r_edge_at_edge = oracle_rate(&(he * v.get(e)), &oracle_covariance(&h, &v, e, &[e]));
                let r_edge_at_center = oracle_rate(&(hc * v.get(e)), &oracle_covariance(&h, &v, c, &[e]));
                let r_center = oracle_rate(&(hc * v.get(c)), &oracle_covariance(&h, &v, c, &[c, e]));
                assert!((rep.rate_nats(c) - r_center).abs() < 1e-10);
                assert!((rep.rate_nats(e) - r_edge_at_edge.min(r_edge_at_center)).abs() < 1e-10);
                let d = &rep.ue(e).decoders;
                assert!((d[0].rate_nats - r_edge_at_edge).abs() < 1e-10);
                assert!((d[1].rate_nats - r_edge_at_center).abs() < 1e-10);
            }
        }
        assert!((rep.total_bps_hz() * 2f64.ln() - rep.total_nats()).abs() < 1e-12);
    }
}

#[test]
fn comp_edge_rate_equals_edge_self_decoding() {
    let mut r = rng(6);
    for _ in 0..50 {
        let h = random_channels(&mut r, 2, 4, 2, 3);
        let v = random_precoders(&mut r, 2, 4, 3, 2, 1.5);
        let plan = ClusterPlan::identity_pairs(2, 2);
        let noma = noma_rates(&h, &v, &plan).unwrap();
        let comp = comp_rates(&h, &v, &plan).unwrap();
        for i in 0..2 {
            for j in 2..4 {
                let e = UeId::new(i, j);
                assert_eq!(comp.rate_nats(e), noma.ue(e).decoders[0].rate_nats);
                assert!(comp.rate_nats(e) >= noma.rate_nats(e));
            }
        }
    }
}

#[test]
fn comp_center_rate_never_exceeds_noma() {
    let mut r = rng(7);
    let h = random_channels(&mut r, 3, 4, 2, 4);
    let plan = ClusterPlan::identity_pairs(3, 2);
    for _ in 0..1000 {
        let v = random_precoders_within(&mut r, 3, 4, 4, 2, 2.0);
        let noma = noma_rates(&h, &v, &plan).unwrap();
        let comp = comp_rates(&h, &v, &plan).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let c = UeId::new(i, j);
                assert!(comp.rate_nats(c) <= noma.rate_nats(c) + 1e-12);
            }
        }
    }
}

#[test]
fn dpc_last_ue_sees_only_lower_indices() {
    let mut r = rng(8);
    let h = random_channels(&mut r, 1, 4, 2, 4);
    let v = random_precoders(&mut r, 1, 4, 4, 2, 1.0);
    let plan = ClusterPlan::identity_pairs(1, 2);
    let last = UeId::new(0, 3);
    let b = covariance_bundle(&h, &v, &plan, last).unwrap();
    let mut expected = scaled_identity(2, 1.0);
    for k in 0..3 {
        let g = h.link(0, last) * v.get(UeId::new(0, k));
        expected += &g * g.adjoint();
    }
    assert!(max_entry_diff(&b.m_dpc, &expected) < 1e-13);
    let first = covariance_bundle(&h, &v, &plan, UeId::new(0, 0)).unwrap();
    assert!(max_entry_diff(&first.m_dpc, &scaled_identity(2, 1.0)) < 1e-15);
}

#[test]
fn generic_evaluator_agrees_with_dedicated_paths() {
    let mut r = rng(9);
    for _ in 0..20 {
        let h = random_channels(&mut r, 3, 4, 2, 4);
        let v = random_precoders(&mut r, 3, 4, 4, 2, 1.0);
        let plan = ClusterPlan::identity_pairs(3, 2);
        let comp = comp_rates(&h, &v, &plan).unwrap();
        let comp_g = evaluate(&h, &v, &DecodeStructure::comp(3, 4)).unwrap();
        let dpc = dpc_rates(&h, &v, &plan).unwrap();
        let dpc_g = evaluate(&h, &v, &DecodeStructure::dpc(3, 4)).unwrap();
        for ue in h.ues() {
            assert!((comp.rate_nats(ue) - comp_g.rate_nats(ue)).abs() < 1e-12);
            assert!((dpc.rate_nats(ue) - dpc_g.rate_nats(ue)).abs() < 1e-12);
        }
    }
}

#[test]
fn cluster_rates_reduce_to_pairs_and_singletons() {
    let mut r = rng(10);
    for _ in 0..20 {
        let h = random_channels(&mut r, 3, 4, 2, 4);
        let v = random_precoders(&mut r, 3, 4, 4, 2, 1.0);
        let pairs = ClusterPlan::identity_pairs(3, 2);
        let a = cluster_rates(&h, &v, &pairs).unwrap();
        let b = noma_rates(&h, &v, &pairs).unwrap();
        let single = ClusterPlan::singletons(3, 4);
        let c = cluster_rates(&h, &v, &single).unwrap();
        let d = comp_rates(&h, &v, &single).unwrap();
        for ue in h.ues() {
            assert!((a.rate_nats(ue) - b.rate_nats(ue)).abs() <= 1e-12);
            assert!((c.rate_nats(ue) - d.rate_nats(ue)).abs() <= 1e-12);
        }
    }
}

#[test]
fn three_user_cluster_matches_stagewise_oracle() {
    let mut r = rng(11);
    for _ in 0..20 {
        let h = random_channels(&mut r, 2, 6, 2, 4);
        let v = random_precoders(&mut r, 2, 6, 4, 2, 1.0);
        // Decode order (weakest first): [5, 3, 1] and [4, 2, 0].
        let cell = vec![vec![5, 3, 1], vec![4, 2, 0]];
        let plan = ClusterPlan::new(6, vec![cell.clone(), cell]).unwrap();
        let rep = cluster_rates(&h, &v, &plan).unwrap();
        for i in 0..2 {
            for order in [[5, 3, 1], [4, 2, 0]] {
                let [u1, u2, u3] = order.map(|j| UeId::new(i, j));
                let rate = |msg: UeId, at: UeId, ex: &[UeId]| {
                    oracle_rate(&(h.link(i, at) * v.get(msg)), &oracle_covariance(&h, &v, at, ex))
                };
                // Stage 1: u1 decoded everywhere with u2, u3 as interference.
                let r1 = rate(u1, u1, &[u1]).min(rate(u1, u2, &[u1])).min(rate(u1, u3, &[u1]));
                // Stage 2: u1 canceled at u2 and u3.
                let r2 = rate(u2, u2, &[u1, u2]).min(rate(u2, u3, &[u1, u2]));
                // Stage 3: everything in-cluster canceled.
                let r3 = rate(u3, u3, &[u1, u2, u3]);
                assert!((rep.rate_nats(u1) - r1).abs() < 1e-10);
                assert!((rep.rate_nats(u2) - r2).abs() < 1e-10);
                assert!((rep.rate_nats(u3) - r3).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn empty_cluster_is_rejected() {
    assert!(ClusterPlan::new(2, vec![vec![vec![0, 1], vec![]]]).is_err());
}

#[test]
fn sum_power_matches_entrywise_oracle() {
    let mut r = rng(12);
    let v = random_precoders_within(&mut r, 3, 4, 4, 2, 5.0);
    let p = sum_power(&v);
    for i in 0..3 {
        let mut acc = 0.0;
        for j in 0..4 {
            for z in v.get(UeId::new(i, j)).iter() {
                acc += z.re * z.re + z.im * z.im;
            }
        }
        assert!((p[i] - acc).abs() < 1e-12);
    }
    let mut unit = PrecoderSet::zeros(1, 1, 3, 1);
    unit.get_mut(UeId::new(0, 0))[(1, 0)] = C64::new(0.6, 0.8);
    assert!((sum_power(&unit)[0] - 1.0).abs() < 1e-15);
}

#[test]
fn rotation_makes_direct_gain_real_nonnegative() {
    let mut r = rng(13);
    let h = random_channels(&mut r, 2, 4, 1, 4);
    let v = random_precoders(&mut r, 2, 4, 4, 1, 1.0);
    let rot = rotate_phases(&h, &v).unwrap();
    for ue in h.ues() {
        let z = (h.direct(ue) * rot.get(ue))[(0, 0)];
        assert!(z.im.abs() < 1e-12 * z.norm().max(1.0));
        assert!(z.re >= 0.0);
    }
}

#[test]
fn miso_rates_match_matrix_evaluation() {
    let mut r = rng(14);
    for _ in 0..100 {
        let h = random_channels(&mut r, 3, 4, 1, 4);
        let v = random_precoders_within(&mut r, 3, 4, 4, 1, 1.0);
        let plan = ClusterPlan::identity_pairs(3, 2);
        let a = miso_rates(&h, &v, &plan).unwrap();
        let b = noma_rates(&h, &v, &plan).unwrap();
        for ue in h.ues() {
            assert!((a.rate_nats(ue) - b.rate_nats(ue)).abs() <= 1e-9);
        }
    }
    let h = random_channels(&mut r, 1, 2, 1, 2);
    let zero = PrecoderSet::zeros(1, 2, 2, 1);
    assert_eq!(miso_rates(&h, &zero, &ClusterPlan::identity_pairs(1, 1)).unwrap().total_nats(), 0.0);
    let mimo = random_channels(&mut r, 1, 2, 2, 2);
    assert!(miso_rates(&mimo, &zero, &ClusterPlan::identity_pairs(1, 1)).is_err());
}

#[test]
fn removing_interference_never_lowers_rate() {
    let mut r = rng(15);
    for _ in 0..50 {
        let h = random_channels(&mut r, 2, 4, 2, 3);
        let v = random_precoders(&mut r, 2, 4, 3, 2, 1.0);
        let d = UeId::new(0, 1);
        let b = h.link(0, d) * v.get(d);
        let mut excluded = vec![d];
        let mut prev = oracle_rate(&b, &oracle_covariance(&h, &v, d, &excluded));
        for f in all_ues(2, 4) {
            if f == d {
                continue;
            }
            excluded.push(f);
            let m = mimo_noma::throughput::interference_covariance(&h, &v, d, &excluded);
            let next = mimo_noma::linalg::rate_log_det(&b, &m).unwrap();
            assert!(next >= prev - 1e-12);
            prev = next;
        }
    }
}

#[test]
fn rates_grow_as_noise_vanishes() {
    let mut r = rng(16);
    let h = random_channels(&mut r, 1, 2, 2, 2);
    let v = random_precoders(&mut r, 1, 2, 2, 2, 1.0);
    let plan = ClusterPlan::identity_pairs(1, 1);
    let strong = UeId::new(0, 0);
    let mut prev = 0.0;
    for k in 0..12 {
        let sigma2 = 10f64.powi(-k);
        let hk = h.rescaled(1.0, sigma2);
        let rate = noma_rates(&hk, &v, &plan).unwrap().rate_nats(strong);
        assert!(rate > prev);
        prev = rate;
    }
    assert!(prev > 40.0);
}

#[test]
fn report_rows_and_summary() {
    let mut r = rng(17);
    let h = random_channels(&mut r, 3, 4, 2, 4);
    let v = random_precoders(&mut r, 3, 4, 4, 2, 1.0);
    let plan = ClusterPlan::identity_pairs(3, 2);
    let rep = noma_rates(&h, &v, &plan).unwrap();
    let config = NetworkConfig::default();
    let rows = rep.rows(&config);
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0].class, "center");
    assert_eq!(rows[3].class, "edge");
    let mut buf = Vec::new();
    rep.write_csv(&config, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("cell,ue,class,rate_bps_hz\n"));
    assert_eq!(text.lines().count(), 13);
    let s = rep.summary();
    assert!((s.per_cell_bps_hz.iter().sum::<f64>() - s.total_bps_hz).abs() < 1e-10);
    let json = serde_json::to_string(&s).unwrap();
    assert!(json.contains("\"total_bps_hz\""));
    assert!(rep.bwr() >= 1.0);
}

fn random_unitary(r: &mut rand_chacha::ChaCha8Rng, l: usize) -> CMatrix {
    let a = complex_gaussian(r, l, l);
    a.qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rates_are_nonnegative_and_unitary_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let h = random_channels(&mut r, 2, 4, 2, 3);
        let v = random_precoders_within(&mut r, 2, 4, 3, 2, 2.0);
        let plan = ClusterPlan::identity_pairs(2, 2);
        let base = noma_rates(&h, &v, &plan).unwrap();
        let mut w = v.clone();
        for ue in h.ues() {
            let q = random_unitary(&mut r, 2);
            *w.get_mut(ue) = v.get(ue) * q;
        }
        let turned = noma_rates(&h, &w, &plan).unwrap();
        for ue in h.ues() {
            prop_assert!(base.rate_nats(ue) >= 0.0);
            prop_assert!((base.rate_nats(ue) - turned.rate_nats(ue)).abs() < 1e-10);
        }
        let dpc = dpc_rates(&h, &v, &plan).unwrap();
        let comp = comp_rates(&h, &v, &plan).unwrap();
        for ue in h.ues() {
            prop_assert!(dpc.rate_nats(ue) >= comp.rate_nats(ue) - 1e-12);
        }
    }
}
