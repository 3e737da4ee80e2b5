use pglearn_core::dataset::{sample_split, synthetic::uniform_cloud};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn split_is_a_valid_partition(seed in any::<u64>(), frac in 0.1f64..0.6) {
        let ds = uniform_cloud(200, 2, 10, 3).unwrap();
        let s = sample_split(&ds, frac, 0.5, seed).unwrap();
        prop_assert!(s.validate(&ds).is_ok());
        prop_assert_eq!(s.labeled.len() + s.unlabeled.len(), 200);
        prop_assert!(s.validation.iter().all(|v| s.labeled.binary_search(v).is_ok()));
        // every class keeps a diffusion source outside V
        let sources = s.sources();
        for c in 0..10 {
            prop_assert!(sources.iter().any(|&i| ds.label(i) == Some(c)));
        }
        // V covers every class
        for c in 0..10 {
            prop_assert!(s.validation.iter().any(|&i| ds.label(i) == Some(c)));
        }
        prop_assert_eq!(sample_split(&ds, frac, 0.5, seed).unwrap(), s);
    }
}
