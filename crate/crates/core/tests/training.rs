use qram_core::agent::{train, TrainConfig};

fn decile_means(rewards: &[f64]) -> (f64, f64) {
    let d = rewards.len() / 10;
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    (mean(&rewards[..d]), mean(&rewards[rewards.len() - d..]))
}

#[test]
fn episode_reward_rises_over_a_desk_scale_run() {
    for seed in [1, 2, 3] {
        let out = train(&TrainConfig { seed, ..TrainConfig::default() }).unwrap();
        let (first, last) = decile_means(&out.episode_rewards);
        println!("seed {seed}: first decile {first:.4}, last decile {last:.4}");
        assert!(last > first, "seed {seed}: {first} -> {last}");
    }
}
