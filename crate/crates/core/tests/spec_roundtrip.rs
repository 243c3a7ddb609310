mod common;

use common::*;
use proptest::prelude::*;
use spinbath::{HamiltonianSpec, TopologyKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toml_round_trip(seed in any::<u64>(), fs in 0usize..6, fe in 0usize..6, fi in 0usize..6,
                       n_env in 0usize..7, j in -5.0f64..5.0, o in -1.0f64..1.0, d in -1.0f64..1.0) {
        let spec = random_spec(
            seed,
            (TopologyKind::Ring, 2, FAMILIES[fs], j),
            (TopologyKind::SpinGlass, n_env, FAMILIES[fe], o),
            (FAMILIES[fi], d),
        );
        let text = spec.to_toml().unwrap();
        let back = HamiltonianSpec::from_toml(&text).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn same_seed_same_couplings(seed in any::<u64>(), fe in 0usize..6) {
        let make = || random_spec(
            seed,
            (TopologyKind::Ring, 2, FAMILIES[2], 1.0),
            (TopologyKind::Ring, 5, FAMILIES[fe], 1.0),
            (FAMILIES[4], 0.5),
        );
        prop_assert_eq!(make(), make());
    }
}
