use optit::config::{preset, ExperimentConfig, PRESETS};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn overrides_survive_a_toml_round_trip(
        p in 0..PRESETS.len(),
        lr in 1e-6f64..1e-1,
        beta in 1e-3f64..10.0,
        batch in 1usize..512,
        units in 1usize..1024,
        g in 0.0f64..32.0,
        seeds in proptest::collection::vec(any::<u32>(), 1..6),
    ) {
        let text = format!(
            "preset = {:?}\nseeds = {:?}\n[search]\nbeta = {beta:?}\n[train]\nstep_size = {lr:?}\nbatch_size = {batch}\nhidden_units = {units}\ngrad_updates_per_env_step = {g:?}\n",
            PRESETS[p], seeds,
        );
        let c = ExperimentConfig::from_toml(&text).unwrap();
        prop_assert_eq!(c.train.step_size, lr);
        prop_assert_eq!(c.search.beta, beta);
        prop_assert_eq!(c.train.batch_size, batch);
        prop_assert_eq!(c.seeds.len(), seeds.len());
        let base = preset(PRESETS[p]).unwrap();
        prop_assert_eq!(&c.env, &base.env);
        prop_assert_eq!(c.train.num_options, base.train.num_options);
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        prop_assert_eq!(again, c);
    }

    #[test]
    fn single_option_losses_need_one_option(n in 2usize..8) {
        for loss in ["exit_sampled_seq", "exit_sampled_indep", "exit_exact_indep"] {
            let bad = format!("preset = \"compass\"\n[train]\nloss = {loss:?}\nnum_options = {n}\n");
            prop_assert!(ExperimentConfig::from_toml(&bad).is_err());
            let ok = format!("preset = \"compass\"\n[train]\nloss = {loss:?}\nnum_options = 1\n");
            prop_assert!(ExperimentConfig::from_toml(&ok).is_ok());
        }
    }
}
