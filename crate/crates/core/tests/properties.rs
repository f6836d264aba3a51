use std::collections::BTreeSet;

use proptest::prelude::*;

use mgdm_spp::fmt::{GroupSelector, ReachEntry, ReachTable, ScenarioKind};
use mgdm_spp::oracle::{exhaustive_backup_option, sorted_simple_paths, verify_sharing_legality};
use mgdm_spp::provision::{
    provision_request, provision_working, read_assignment_log, write_assignment_log, Planner, Request,
};
use mgdm_spp::spp::{best_option, ProtectionMode};
use mgdm_spp::topology::{NodeId, Topology};
use mgdm_spp::traffic::{generate, TrafficConfig, RATES_GBPS};

/// Connected graph: a random spanning tree plus extra edges.
fn graph(max_nodes: usize) -> impl Strategy<Value = Topology> {
    (2..=max_nodes)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
                proptest::collection::vec((0..n, 0..n), 0..2 * n),
                proptest::collection::vec(1u32..20, 3 * n),
            )
        })
        .prop_map(|(n, parents, extra, lengths)| {
            let mut edges = BTreeSet::new();
            for (v, p) in (1..n).zip(parents) {
                edges.insert((p.index(v), v));
            }
            for (a, b) in extra {
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            let links = edges
                .into_iter()
                .zip(lengths.into_iter().cycle())
                .map(|((a, b), l)| (a, b, l as f64))
                .collect();
            Topology::new((0..n).map(|i| format!("n{i}")).collect(), links).unwrap()
        })
}

fn requests(nodes: usize, count: usize) -> impl Strategy<Value = Vec<Request>> {
    proptest::collection::vec((0..nodes, 1..nodes, 0..3usize), 1..=count).prop_map(move |v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (s, off, r))| Request {
                id: i as u32,
                src: NodeId(s),
                dst: NodeId((s + off) % nodes),
                rate_gbps: RATES_GBPS[r],
            })
            .collect()
    })
}

fn scenario() -> impl Strategy<Value = ScenarioKind> {
    prop::sample::select(ScenarioKind::ALL.to_vec())
}

fn mode() -> impl Strategy<Value = ProtectionMode> {
    prop_oneof![Just(ProtectionMode::Spp), Just(ProtectionMode::Dpp)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn yen_matches_brute_force(t in graph(8), s in 0usize..8, d in 0usize..8, k in 1usize..6) {
        let n = t.node_count();
        let (s, d) = (s % n, d % n);
        prop_assume!(s != d);
        let ours = t.k_shortest_paths(NodeId(s), NodeId(d), k).unwrap();
        let all = sorted_simple_paths(&t, NodeId(s), NodeId(d), &BTreeSet::new());
        let expect: Vec<Vec<usize>> = all.into_iter().take(k).map(|p| p.1).collect();
        let got: Vec<Vec<usize>> = ours.into_iter().map(|r| r.links).collect();
        prop_assert_eq!(got, expect);
    }

    #[test]
    fn scaling_preserves_ratios(t in graph(8), target in 0.5f64..1000.0) {
        let s = t.scale_link_lengths(target).unwrap();
        prop_assert!((s.max_link_km() - target).abs() <= 1e-9 * target);
        let r0 = t.links()[0].length_km / s.links()[0].length_km;
        for (a, b) in t.links().iter().zip(s.links()) {
            prop_assert!((a.length_km / b.length_km - r0).abs() <= 1e-9 * r0);
        }
    }

    #[test]
    fn modulation_choice_is_monotone(
        caps in proptest::collection::btree_set(1u32..500, 1..5),
        reach_steps in proptest::collection::vec(1u32..1000, 5),
        a in 0.0f64..5000.0,
        b in 0.0f64..5000.0,
    ) {
        // Higher capacity gets strictly shorter reach.
        let caps: Vec<u32> = caps.into_iter().rev().collect();
        let mut reach = 0.0;
        let entries: Vec<ReachEntry> = caps
            .iter()
            .zip(&reach_steps)
            .map(|(&c, &step)| {
                reach += step as f64;
                ReachEntry {
                    scenario: "smt".into(),
                    group: "single".into(),
                    modulation: format!("m{c}"),
                    reach_km: reach,
                    gbps_per_mode: c as f64,
                }
            })
            .collect();
        let table = ReachTable::from_entries(&entries).unwrap();
        let (short, long) = if a <= b { (a, b) } else { (b, a) };
        let sel = GroupSelector::Single;
        let cap = |l| table.select_modulation(ScenarioKind::Smt, sel, l).map(|m| m.gbps_per_mode);
        match (cap(short), cap(long)) {
            (Some(x), Some(y)) => prop_assert!(x >= y),
            (None, Some(_)) => prop_assert!(false, "shorter route lost reach"),
            _ => {}
        }
        if let Some(m) = table.select_modulation(ScenarioKind::Smt, sel, long) {
            prop_assert!(m.reach_km >= long);
        }
    }

    #[test]
    fn invariants_survive_provision_and_release(
        (t, reqs) in graph(7).prop_flat_map(|t| { let n = t.node_count(); (Just(t), requests(n, 12)) }),
        sc in scenario(),
        m in mode(),
        w in 1usize..4,
        release_mask in proptest::collection::vec(any::<bool>(), 12),
    ) {
        let table = ReachTable::default_table();
        let planner = Planner::new(&t, &table, sc, 3);
        let mut state = planner.new_state(w);
        let mut accepted = Vec::new();
        let mut assignments = Vec::new();
        for r in &reqs {
            if let Some((wk, bk)) = provision_request(&mut state, &planner, r, m) {
                prop_assert!(wk.route.is_link_disjoint(&bk.route));
                accepted.push(r.id);
                assignments.push(wk);
                assignments.push(bk);
            }
            prop_assert_eq!(state.check_invariants(), Ok(()));
        }
        let mut log = Vec::new();
        write_assignment_log(&mut log, &assignments).unwrap();
        prop_assert!(verify_sharing_legality(&read_assignment_log(log.as_slice()).unwrap()).unwrap());
        for (id, release) in accepted.iter().zip(&release_mask) {
            if *release {
                state.release(*id).unwrap();
                prop_assert_eq!(state.check_invariants(), Ok(()));
            }
        }
        for (id, release) in accepted.iter().zip(&release_mask) {
            if !*release {
                state.release(*id).unwrap();
            }
        }
        prop_assert!(state.release(0).is_err());
        prop_assert_eq!(state.dump().lines().count(), 1);
    }

    #[test]
    fn unbounded_routes_match_oracle(
        (t, reqs) in graph(6).prop_flat_map(|t| { let n = t.node_count(); (Just(t), requests(n, 3)) }),
        sc in scenario(),
        m in mode(),
        w in 1usize..4,
    ) {
        let table = ReachTable::default_table();
        // Large enough k to enumerate every simple path of a 6-node graph.
        let planner = Planner::new(&t, &table, sc, 1000);
        let mut state = planner.new_state(w);
        let (last, earlier) = reqs.split_last().unwrap();
        for r in earlier {
            provision_request(&mut state, &planner, r, m);
        }
        if let Some(working) = provision_working(&mut state, &planner, last) {
            let ours = best_option(&state, &planner, last, &working, m);
            let oracle = exhaustive_backup_option(&state, &t, &table, m, last, &working, None).unwrap();
            prop_assert_eq!(ours.as_ref().map(|o| (o.route.links.clone(), o.wavelength, o.selectors())),
                oracle.as_ref().map(|o| (o.links.clone(), o.wavelength, o.groups.clone())));
        }
    }

    #[test]
    fn traffic_prefix_stable(seed in any::<u64>(), a in 0usize..200, b in 0usize..200) {
        let t = Topology::german17();
        let (a, b) = (a.min(b), a.max(b));
        let long = generate(&TrafficConfig { seed, count: b }, &t);
        let short = generate(&TrafficConfig { seed, count: a }, &t);
        prop_assert_eq!(&long[..a], &short[..]);
    }
}

#[test]
fn rate_histogram_is_uniform() {
    let t = Topology::german17();
    let reqs = generate(&TrafficConfig { seed: 11, count: 10_000 }, &t);
    let n = reqs.len() as f64;
    let p = 1.0 / 3.0;
    let sigma = (n * p * (1.0 - p)).sqrt();
    for rate in RATES_GBPS {
        let c = reqs.iter().filter(|r| r.rate_gbps == rate).count() as f64;
        assert!((c - n * p).abs() <= 3.0 * sigma, "rate {rate}: {c}");
    }
    // Sources also spread evenly across the 17 nodes.
    let q = 1.0 / 17.0;
    let sigma = (n * q * (1.0 - q)).sqrt();
    for v in 0..17 {
        let c = reqs.iter().filter(|r| r.src.0 == v).count() as f64;
        assert!((c - n * q).abs() <= 4.0 * sigma, "node {v}: {c}");
    }
}
