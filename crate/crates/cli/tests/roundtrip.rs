use std::path::Path;

use proptest::prelude::*;
use spinbath::{Complex64, StateVector};
use spinbath_cli::checkpoint::Checkpoint;
use spinbath_cli::{CliError, RunConfig};

const TOPOLOGIES: [&str; 3] = ["ring", "spin_glass", "none"];
const FAMILIES: [&str; 6] = [
    "XY",
    "Heisenberg",
    "HeisenbergType",
    "Ising",
    "IsingType",
    "IsingPM",
];
const STATES: [&str; 7] = [
    "GROUND",
    "NEAR_GROUND",
    "UU",
    "UD",
    "NEAR_UD",
    "RR",
    "RANDOM",
];
const METRICS: [&str; 9] = [
    "sigma", "gamma", "delta", "b", "S_quad", "echo", "E_S", "rho", "pair",
];

prop_compose! {
    fn config_text()(
        topo in (0..3usize, 0..3usize),
        fam in (0..6usize, 0..6usize, 0..6usize),
        st in (0..7usize, 0..7usize),
        n_s in 1..=4usize,
        n in 1..=12usize,
        couplings in (-10.0..10.0f64, -2.0..2.0f64, -1.0..1.0f64),
        steps in 0..5000usize,
        seed in any::<u64>(),
        metrics in proptest::sample::subsequence(METRICS.to_vec(), 1..=9),
        lanczos in any::<bool>(),
        fit in any::<bool>(),
    ) -> String {
        let metrics: Vec<String> = metrics.iter().map(|m| format!("\"{m}\"")).collect();
        format!(
            "[system]\ntopology = \"{}\"\nfamily = \"{}\"\nJ = {:?}\nn_S = {n_s}\ninitial_state = \"{}\"\n\n\
             [environment]\ntopology = \"{}\"\nfamily = \"{}\"\nOmega = {:?}\nn = {n}\ninitial_state = \"{}\"\n\n\
             [interaction]\nfamily = \"{}\"\nDelta = {:?}\n\n\
             [run]\nn_steps = {steps}\nseed = {seed}\nmetrics = [{}]\nbounds = \"{}\"\nfit = {fit}\n",
            TOPOLOGIES[topo.0], FAMILIES[fam.0], couplings.0, STATES[st.0],
            TOPOLOGIES[topo.1], FAMILIES[fam.1], couplings.1, STATES[st.1],
            FAMILIES[fam.2], couplings.2,
            metrics.join(", "),
            if lanczos { "lanczos" } else { "gershgorin" },
        )
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_survives_serialization(text in config_text()) {
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&cfg, &again);
        prop_assert_eq!(cfg.build_spec(cfg.run.seed).unwrap(), again.build_spec(again.run.seed).unwrap());
    }

    #[test]
    fn checkpoint_survives_serialization(
        n in 0..=6usize,
        step in any::<u64>(),
        config in "[ -~\n]{0,200}",
        raw in proptest::collection::vec(-1.0..1.0f64, 128),
    ) {
        let amps = (0..1usize << n).map(|k| Complex64::new(raw[2 * k], raw[2 * k + 1])).collect();
        let state = StateVector::from_amplitudes(n, amps).unwrap();
        let ck = Checkpoint { step, config, state };
        let bytes = ck.to_bytes();
        prop_assert_eq!(&Checkpoint::from_bytes(&bytes, Path::new("ck")).unwrap(), &ck);
        let cut = bytes.len() / 2;
        let truncated = Checkpoint::from_bytes(&bytes[..cut], Path::new("ck"));
        prop_assert!(matches!(truncated, Err(CliError::Config { .. })), "truncated checkpoint accepted");
    }
}
