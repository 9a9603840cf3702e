use tracelab::config::{ExperimentConfig, NetworkKind};
use tracelab::experiments::{compare, run_replications, write_runs_csv, TREND_POLICIES};

fn config(kind: NetworkKind) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.network.kind = kind;
    c.network.n = 60;
    c.horizon = 25;
    c.reps = 6;
    c.seed = 42;
    c.policy = "reer".into();
    c
}

fn runs_csv(c: &ExperimentConfig, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let cmp = compare(c, &TREND_POLICIES).unwrap();
        let mut out = Vec::new();
        write_runs_csv(&mut out, cmp.all_records()).unwrap();
        out
    })
}

#[test]
fn runs_csv_is_identical_across_reruns_and_thread_counts() {
    for kind in [NetworkKind::WattsStrogatz, NetworkKind::ScaleFree, NetworkKind::Sbm] {
        let c = config(kind);
        let first = runs_csv(&c, 1);
        assert_eq!(first, runs_csv(&c, 1), "{kind:?} rerun");
        assert_eq!(first, runs_csv(&c, 4), "{kind:?} four threads");
        assert!(first.ends_with(b"\n") && !first.contains(&b'\r'));
    }
}

#[test]
fn different_master_seeds_give_different_runs() {
    let mut c = config(NetworkKind::WattsStrogatz);
    let a = runs_csv(&c, 2);
    c.seed = 43;
    assert_ne!(a, runs_csv(&c, 2));
}

#[test]
fn replication_order_does_not_depend_on_scheduling() {
    let c = config(NetworkKind::WattsStrogatz);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let records = pool.install(|| run_replications(&c).unwrap());
    for (k, r) in records.iter().enumerate() {
        assert_eq!(r.rep, k);
        assert_eq!(r.seed, c.seed + k as u64);
    }
}
