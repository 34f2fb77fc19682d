mod common;

use proptest::prelude::*;
use tilemux::cli::{prepare, run_prepared, Settings};
use tilemux::engine::{Ablation, MagicMode, Policy};

use common::{audit_trace, definition_one_case};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn partitions_follow_growth_order(seed in any::<u64>()) {
        if let Err(e) = definition_one_case(seed) {
            prop_assert!(false, "{}", e);
        }
    }
}

fn small_settings(policy: Policy, mode: MagicMode, ablation: Option<Ablation>, count: u32) -> Settings {
    let mut s = Settings::load(None, &[]).unwrap();
    s.rows = 10;
    s.cols = 8;
    s.num_ports = 8;
    s.count = count;
    s.t_depth_max = 40;
    s.policy = policy;
    s.mode = mode;
    s.ablation = ablation;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn small_runs_pass_audit(
        policy in prop_oneof![Just(Policy::Proposed), Just(Policy::Naive), Just(Policy::Random)],
        mode in prop_oneof![Just(MagicMode::Ports), Just(MagicMode::Cultivation)],
        ablation in prop_oneof![
            Just(None),
            Just(Some(Ablation::C0)),
            Just(Some(Ablation::C1)),
            Just(Some(Ablation::C2)),
        ],
        count in 2u32..12,
        seed in 0u64..1000,
    ) {
        let s = small_settings(policy, mode, ablation, count);
        let prep = prepare(&s, seed).unwrap();
        let run = run_prepared("prop", &s, seed, &prep).unwrap();
        prop_assert!(!run.trace.horizon_reached);
        let bad = audit_trace(&run.trace, &prep.solo);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}

#[test]
fn traces_are_byte_identical() {
    for (policy, mode) in [
        (Policy::Proposed, MagicMode::Ports),
        (Policy::Random, MagicMode::Ports),
        (Policy::Proposed, MagicMode::Cultivation),
    ] {
        let s = small_settings(policy, mode, None, 8);
        let once = || {
            let prep = prepare(&s, 11).unwrap();
            let run = run_prepared("det", &s, 11, &prep).unwrap();
            (run.trace.to_csv(), serde_json::to_string(&run.summary).unwrap())
        };
        assert_eq!(once(), once());
    }
}
