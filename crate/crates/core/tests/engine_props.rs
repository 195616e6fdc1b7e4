use crowdspec::arbitrary::arb_crowd;
use crowdspec::engine::{compile_rules, run, step, EngineConfig, Trace};
use crowdspec::parser::parse_spec;
use crowdspec::scenarios::{build_find_nemo, build_testers, FindNemoConfig, TestersConfig, Topology};
use proptest::prelude::*;

fn check_monotone(t: &Trace) -> Result<(), TestCaseError> {
    for w in t.states.windows(2) {
        for (id, a) in &w[0].agents {
            let b = &w[1].agents[id];
            prop_assert!(a.bel.is_subset(&b.bel) && a.goal.is_subset(&b.goal));
            prop_assert!(a.int.is_subset(&b.int) && a.ablt.is_subset(&b.ablt));
            prop_assert!(b.com.starts_with(&a.com), "{} forgot a message", id);
        }
    }
    Ok(())
}

/// A random topology where one agent starts a tell that relays spread.
fn seeded(src: &str) -> String {
    src.replacen("agent n0 {\n", "agent n0 {\n  send M[up, CX, tell] B news;\n", 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relaying_runs_are_deterministic_monotone_and_settle(c in arb_crowd(8)) {
        let sys = compile_rules(&parse_spec(&seeded(&c.source())).unwrap()).unwrap();
        let cfg = EngineConfig::default();
        let t1 = run(&sys, &cfg).unwrap();
        let t2 = run(&sys, &cfg).unwrap();
        prop_assert_eq!(&t1, &t2);
        prop_assert!(t1.quiescent);
        check_monotone(&t1)?;
        let (next, _) = step(t1.last(), &cfg).unwrap();
        prop_assert_eq!(&next.agents, &t1.last().agents);
    }

    #[test]
    fn scenario_runs_are_monotone(n in 1usize..12, able in 0usize..12, topo in 0usize..3) {
        let topology = [Topology::Single, Topology::Chained, Topology::Isolated][topo];
        let cfg = FindNemoConfig::new(n, [able % n], topology);
        let t = run(&compile_rules(&build_find_nemo(&cfg).unwrap()).unwrap(), &EngineConfig::default()).unwrap();
        prop_assert!(t.quiescent);
        check_monotone(&t)?;
    }
}

#[test]
fn testers_runs_are_monotone() {
    for n in 1..=4 {
        let cfg = TestersConfig::new(n, 3 * n);
        let t = run(&compile_rules(&build_testers(&cfg).unwrap()).unwrap(), &EngineConfig::default()).unwrap();
        assert!(t.quiescent);
        check_monotone(&t).unwrap();
    }
}
