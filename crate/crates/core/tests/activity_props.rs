mod common;

use proptest::prelude::*;

use common::{explicit_activity, keep, random_case, reference_signals};
use hlspower_core::activity::{execute_trace, switching_activity, ValueTrace};
use hlspower_core::design::Opcode;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn matches_explicit_xor_popcount(seed in any::<u64>()) {
        let case = random_case(seed);
        let traces = execute_trace(&case.design, &case.stimuli).unwrap();
        let reference = reference_signals(&case);
        prop_assert_eq!(traces.len(), reference.len());
        for (id, signals) in &reference {
            let t = &traces[id];
            prop_assert_eq!(&t.signals, signals);
            prop_assert_eq!(switching_activity(t), explicit_activity(signals));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn activity_is_bounded_by_width(
        signals in prop::collection::vec(prop::collection::vec(any::<u64>(), 5), 1..5),
        width in 1u8..=64,
    ) {
        let signals: Vec<Vec<u64>> = signals.into_iter().map(|s| s.into_iter().map(|v| keep(v, width)).collect()).collect();
        let t = ValueTrace { rtl_id: 0, opcode: Opcode::Add, widths: vec![width; signals.len()], signals };
        let sa = switching_activity(&t);
        prop_assert!((0.0..=f64::from(width)).contains(&sa));
    }

    #[test]
    fn signal_order_does_not_matter(
        signals in prop::collection::vec(prop::collection::vec(any::<u64>(), 4), 2..6),
        rotate in 0usize..6,
    ) {
        let t = ValueTrace { rtl_id: 0, opcode: Opcode::Mul, widths: vec![64; signals.len()], signals: signals.clone() };
        let mut shuffled = signals;
        let len = shuffled.len();
        shuffled.rotate_left(rotate % len);
        shuffled.reverse();
        let u = ValueTrace { signals: shuffled, ..t.clone() };
        prop_assert_eq!(switching_activity(&t), switching_activity(&u));
    }

    #[test]
    fn traces_do_not_depend_on_thread_count(seed in any::<u64>()) {
        let case = random_case(seed);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| execute_trace(&case.design, &case.stimuli).unwrap())
        };
        prop_assert_eq!(run(1), run(3));
    }
}
