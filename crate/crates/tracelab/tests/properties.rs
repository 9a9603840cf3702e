mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tracelab::belief::{bf_step, BeliefConfig, BeliefState, EvidencePolicy, ProbVector};
use tracelab::config::{ExperimentConfig, NetworkKind};
use tracelab::experiments::{run_episode, stream_rng, NETWORK_STREAM};
use tracelab::graph::{self, ContactNetwork, LoadOptions, SbmVariant};
use tracelab::objective::{complement, expected_infections, reward, rewards, BeliefSnapshot};
use tracelab::policies::{PolicyContext, PolicySpec};
use tracelab::spread::{self, DiseaseState, ModelParams, Observation};

fn generated(kind: u8, seed: u64) -> ContactNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind % 4 {
        0 => graph::watts_strogatz(60, 4, 0.1, &mut rng).unwrap(),
        1 => graph::scale_free(60, 2.3, &mut rng).unwrap(),
        2 => graph::sbm(60, 5, 0.3, 0.02, SbmVariant::Standard, &mut rng).unwrap(),
        _ => graph::sbm(60, 5, 0.3, 0.02, SbmVariant::Chain, &mut rng).unwrap(),
    }
}

fn symmetric(net: &ContactNetwork, t: usize) -> bool {
    (0..net.n()).all(|i| net.neighbors(i, t).all(|j| j != i && net.neighbors(j, t).any(|k| k == i)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjacency_is_symmetric(kind in 0u8..4, seed in any::<u64>()) {
        let net = generated(kind, seed);
        prop_assert!(symmetric(&net, 0));
        let loaded = graph::read_temporal_edges(net.to_edge_list().as_bytes(), LoadOptions::identity()).unwrap();
        prop_assert!(symmetric(&loaded, 0));
        prop_assert_eq!(loaded.edges(0), net.edges(0));
    }

    #[test]
    fn generators_are_deterministic(kind in 0u8..4, seed in any::<u64>()) {
        prop_assert_eq!(generated(kind, seed).edges(0), generated(kind, seed).edges(0));
    }

    #[test]
    fn removed_nodes_never_reappear(seed in any::<u64>(), removals in prop::collection::vec((0usize..30, 0usize..10), 1..10)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = graph::watts_strogatz(30, 4, 0.2, &mut rng).unwrap();
        for &(i, t) in &removals {
            if net.removal_day(i).is_none() {
                net.remove_node(i, t);
            }
        }
        for i in 0..30 {
            if let Some(d) = net.removal_day(i) {
                for t in d..d + 5 {
                    prop_assert!(!net.is_active(i, t));
                    prop_assert_eq!(net.neighbors(i, t).count(), 0);
                    for j in 0..30 {
                        prop_assert!(net.neighbors(j, t).all(|k| k != i));
                    }
                }
            }
        }
    }

    #[test]
    fn only_legal_transitions(seed in any::<u64>(), latent in any::<bool>(), beta in 0.0f64..1.0, lambda in 0.0f64..1.0, gamma in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = graph::watts_strogatz(40, 4, 0.1, &mut rng).unwrap();
        let params = ModelParams { beta, lambda, gamma, latent_enabled: latent };
        let mut state = spread::init_state(&net, 3, false, &mut rng).unwrap();
        for _ in 0..30 {
            let before = state.clone();
            spread::step(&mut state, &net, &params, &mut rng);
            for i in 0..40 {
                use DiseaseState::*;
                let ok = match (before.sigma[i], state.sigma[i]) {
                    (a, b) if a == b => true,
                    (S, L) => latent,
                    (S, I) => !latent,
                    (L, I) | (I, R) => true,
                    _ => false,
                };
                prop_assert!(ok, "{:?} -> {:?}", before.sigma[i], state.sigma[i]);
                prop_assert!(!before.ever_infected[i] || state.ever_infected[i]);
            }
        }
    }

    #[test]
    fn beliefs_stay_normalized(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_graph(&mut rng, 8, 0.4);
        let params = ModelParams::new(rng.gen_range(0.05..1.0), rng.gen_range(0.05..1.0), rng.gen_range(0.0..1.0), rng.gen_bool(0.5)).unwrap();
        let cfg = BeliefConfig { evidence: EvidencePolicy::Reset, ..BeliefConfig::default() };
        let mut beliefs = BeliefState::from_prior(0, (0..8).map(|_| random_vector(&mut rng, 0.3)).collect());
        for t in 0..30 {
            let mut obs = Vec::new();
            for node in 0..8 {
                if rng.gen_bool(0.3) {
                    obs.push(Observation { node, day: t, positive: rng.gen_bool(0.3) });
                }
            }
            bf_step(&mut beliefs, &obs, &net, &params, &cfg, &mut rng).unwrap();
            let all = beliefs.u.iter().chain(beliefs.w.iter().flatten()).chain(beliefs.e.iter().flatten());
            for v in all {
                prop_assert!((v.sum() - 1.0).abs() < 1e-9);
                prop_assert!(v.0.iter().all(|&x| (0.0..=1.0).contains(&x)));
            }
        }
    }

    #[test]
    fn objective_is_supermodular_and_monotone(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snap = random_snapshot(&mut rng, n);
        let b: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
        let a: Vec<usize> = b.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        let outside: Vec<usize> = (0..n).filter(|x| !b.contains(x)).collect();
        prop_assume!(!outside.is_empty());
        let x = outside[rng.gen_range(0..outside.len())];
        let s = |d: &[usize]| expected_infections(&snap, d);
        let with = |d: &[usize]| { let mut v = d.to_vec(); v.push(x); v };
        prop_assert!(s(&with(&a)) - s(&a) <= s(&with(&b)) - s(&b) + 1e-9);
        prop_assert!(s(&a) <= s(&b) + 1e-9);
    }

    #[test]
    fn tested_set_bound(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snap = random_snapshot(&mut rng, n);
        let k: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
        let all: Vec<usize> = (0..n).collect();
        let bound = expected_infections(&snap, &all) - k.iter().map(|&i| reward(&snap, i)).sum::<f64>();
        prop_assert!(expected_infections(&snap, &complement(&snap, &k)) <= bound + 1e-9);
    }

    #[test]
    fn objective_matches_enumeration(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snap = random_snapshot(&mut rng, n);
        let d: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        prop_assert!((expected_infections(&snap, &d) - oracle_s(&snap, &d)).abs() < 1e-12);
    }

    #[test]
    fn objective_is_local(seed in any::<u64>(), n in 3usize..9) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snap = random_snapshot(&mut rng, n);
        let d = vec![rng.gen_range(0..n)];
        let mut touched = vec![false; n];
        for &j in &d {
            touched[j] = true;
            for &k in snap.graph.neighbors(j) {
                touched[k] = true;
                for &m in snap.graph.neighbors(k) {
                    touched[m] = true;
                }
            }
        }
        let mut probs = snap.probs.clone();
        for (i, p) in probs.iter_mut().enumerate() {
            if !touched[i] {
                *p = random_vector(&mut rng, 0.3);
            }
        }
        let other = BeliefSnapshot { probs, ..snap.clone() };
        prop_assert!((expected_infections(&snap, &d) - expected_infections(&other, &d)).abs() < 1e-12);
    }

    #[test]
    fn rewards_are_non_negative_and_zero_when_isolated(seed in any::<u64>(), n in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = random_graph(&mut rng, n, 0.5);
        let gone = rng.gen_range(0..n);
        net.remove_node(gone, 0);
        let probs = (0..n).map(|_| random_vector(&mut rng, 0.3)).collect();
        let r = rewards(&BeliefSnapshot::new(&net, 0, probs, 0.7));
        prop_assert!(r.iter().all(|&x| x >= 0.0));
        prop_assert_eq!(r[gone], 0.0);
    }

    #[test]
    fn policies_pick_active_nodes_within_budget(seed in any::<u64>(), b in 0usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = random_graph(&mut rng, 12, 0.3);
        for i in 0..12 {
            if rng.gen_bool(0.2) {
                net.remove_node(i, 0);
            }
        }
        let priors: Vec<ProbVector> = (0..12).map(|_| random_vector(&mut rng, 0.3)).collect();
        let params = ModelParams::new(0.5, 0.5, 0.1, true).unwrap();
        let positives = [(0, 0)];
        let ctx = PolicyContext { day: 1, net: &net, priors: &priors, params: &params, positives: &positives };
        for name in tracelab::policies::POLICY_NAMES {
            let spec = PolicySpec::parse(name, 0.5, 1).unwrap();
            let mut policy = spec.build(12);
            let sel = policy.select(&ctx, b, &mut rng);
            prop_assert!(sel.iter().all(|&i| net.is_active(i, 1)), "{name}");
            let mut dedup = sel.clone();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), sel.len());
            if !matches!(spec, PolicySpec::Reer) {
                prop_assert!(sel.len() <= b, "{name}");
            }
        }
    }

    #[test]
    fn reward_policies_agree_when_everything_is_tested(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_graph(&mut rng, 10, 0.3);
        let priors: Vec<ProbVector> = (0..10).map(|_| random_vector(&mut rng, 0.3)).collect();
        let params = ModelParams::new(0.5, 0.5, 0.1, true).unwrap();
        let ctx = PolicyContext { day: 0, net: &net, priors: &priors, params: &params, positives: &[] };
        let everyone: Vec<usize> = (0..10).collect();
        for spec in [PolicySpec::Rbex, PolicySpec::Greedy, PolicySpec::Reer] {
            prop_assert_eq!(spec.build(10).select(&ctx, 10, &mut rng), everyone.clone());
        }
    }

    #[test]
    fn episodes_respect_budget_and_conservation(seed in any::<u64>(), policy in 0usize..4) {
        let mut c = ExperimentConfig::default();
        c.network.kind = NetworkKind::WattsStrogatz;
        c.network.n = 40;
        c.horizon = 20;
        c.policy = ["rbex", "reer", "random", "none"][policy].into();
        c.dump_beliefs = true;
        let rec = run_episode(&c, 0, seed).unwrap();
        prop_assert_eq!(rec.rows.len(), c.horizon);
        for (t, row) in rec.rows.iter().enumerate() {
            prop_assert_eq!(row.day, t);
            prop_assert!(row.positives.len() <= row.selected.len());
            if c.policy != "reer" {
                prop_assert!(row.selected.len() <= row.budget);
            }
        }
        prop_assert!(rec.rows.windows(2).all(|w| w[0].cumulative <= w[1].cumulative));
        for states in rec.states.as_ref().unwrap() {
            let never = states.iter().filter(|&&s| s == DiseaseState::S).count();
            prop_assert!(never <= 40);
        }
    }
}

#[test]
fn reer_expected_size_matches_inclusion_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let net = random_graph(&mut rng, 12, 0.4);
    let priors: Vec<ProbVector> = (0..12).map(|_| random_vector(&mut rng, 0.2)).collect();
    let params = ModelParams::new(0.6, 0.5, 0.1, true).unwrap();
    let ctx = PolicyContext { day: 0, net: &net, priors: &priors, params: &params, positives: &[] };
    let b = 4;
    let (p, unused) = tracelab::policies::reer_probabilities(&ctx.rewards(), b);
    let expected: f64 = p.iter().sum::<f64>() + unused;
    let draws = 10_000;
    let sizes: Vec<f64> = (0..draws).map(|_| tracelab::policies::reer_select(&ctx, b, &mut rng).len() as f64).collect();
    let mean = sizes.iter().sum::<f64>() / draws as f64;
    let var = sizes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
    let se = (var / draws as f64).sqrt();
    assert!((mean - expected).abs() <= 3.0 * se.max(1e-3), "mean {mean}, expected {expected}");
}

#[test]
fn sbm_edge_counts_match_expectation() {
    for (variant, p1, p2) in [(SbmVariant::Standard, 0.274, 0.02), (SbmVariant::Chain, 0.418, 0.02)] {
        let expected = graph::expected_edges(300, 10, p1, p2, variant).unwrap();
        let counts: Vec<f64> = (0..100)
            .map(|s| graph::sbm(300, 10, p1, p2, variant, &mut stream_rng(s, NETWORK_STREAM)).unwrap().edge_count(0) as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / 100.0;
        let sd = (counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((mean - expected).abs() <= 3.0 * sd / 10.0, "{variant:?}: mean {mean}, expected {expected}");
    }
}

#[test]
fn conservation_partitions_every_node() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut net = graph::watts_strogatz(80, 4, 0.1, &mut rng).unwrap();
    let params = ModelParams::new(0.5, 0.5, 0.2, true).unwrap();
    let mut state = spread::init_state(&net, 4, false, &mut rng).unwrap();
    for _ in 0..40 {
        spread::step(&mut state, &net, &params, &mut rng);
        let pick: Vec<usize> = net.active_nodes(state.day).into_iter().filter(|_| rng.gen_bool(0.1)).collect();
        let obs = spread::test(&state, &net, &pick).unwrap();
        spread::isolate_positives(&mut net, &mut state, &obs);
        let (mut active, mut isolated_sick, mut recovered, mut never) = (0, 0, 0, 0);
        for i in 0..80 {
            match (state.sigma[i], state.isolated[i]) {
                (DiseaseState::R, _) => recovered += 1,
                (DiseaseState::S, false) => never += 1,
                (_, true) => isolated_sick += 1,
                _ => active += 1,
            }
        }
        assert_eq!(active + isolated_sick + recovered + never, 80);
        assert_eq!(never + state.ever_infected.iter().filter(|&&e| e).count(), 80);
    }
}
