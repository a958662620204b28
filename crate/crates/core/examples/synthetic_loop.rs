//! Runs the whole synthetic loop and prints the headline numbers.
//!
//! `SEED` picks the world and indicator, `RUNS` the number of editor seeds.

use std::time::Instant;

use docg_core::dataset::{LabelRules, SplitRatio};
use docg_core::editor::{train_editor, EditorConfig, PolicyShape, RewardKind};
use docg_core::evaluation::{evaluate, Strategy};
use docg_core::indicator::{EstimatorShape, ScoreMode, TrainConfig};
use docg_core::pipeline::{self, EditorSetup};
use docg_core::synthetic::{SyntheticWorld, WorldConfig};

fn env<T: std::str::FromStr>(k: &str, d: T) -> T {
    std::env::var(k).ok().and_then(|v| v.parse().ok()).unwrap_or(d)
}

fn main() -> docg_core::Result<()> {
    let seed: u64 = env("SEED", 1);
    let runs: u64 = env("RUNS", 1);
    let mode = ScoreMode::ExcludeSelf;
    let t0 = Instant::now();
    let world = SyntheticWorld::generate(&WorldConfig::default(), seed)?;
    let embedder = world.embedder(seed);
    let build = pipeline::build_dataset(&world.records, SplitRatio::default(), LabelRules::default(), seed)?;
    let data = pipeline::indicator_data(&build, &embedder)?;
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        learning_rate: 1e-4,
        seed,
    };
    let (est, m) = pipeline::fit_indicator(&data, EstimatorShape::default(), &cfg)?;
    println!("indicator: {} train / {} test quadruples", m.train_examples, m.test_examples);
    println!("  test auc={:.4} f1={:.4} ({:.1?})", m.test.auc, m.test.f1, t0.elapsed());

    let records: Vec<_> = build.split.train.iter().chain(&build.split.test).cloned().collect();
    let perm = pipeline::record_permutation_study(&est, &data.store, &records, seed, mode)?;
    println!(
        "permutation: n={} observed={:.4} permuted={:.4} p={:.2e}",
        perm.observed.len(),
        perm.mean_observed,
        perm.mean_permuted,
        perm.test.p_value
    );

    let group_id = world.target_audience(&build.split.test).expect("target audience");
    let group = build.split.test.iter().find(|r| r.content_id == group_id).unwrap().audience();
    for run in 0..runs {
        let rs = seed + run;
        let setup = EditorSetup {
            step_size: 0.25,
            n_pool: 50,
            n_test: 10,
            agent_seed: rs,
            mode,
        };
        let ws = pipeline::synthetic_editor_workspace(&world, seed, &est, &data.store, &group, &setup)?;
        let test = &ws.messages.test;
        println!("editor seed {rs}:");
        for s in [Strategy::Random { seed: rs }, Strategy::Greedy { k: 8, seed: rs }] {
            let r = evaluate(s, test, &ws.agent, &ws.scorer, &ws.space, 3)?;
            println!("  {:>10}: gain={:.4} consistency={:.4}", r.method, r.mean_gain, r.mean_consistency);
        }
        for kind in [RewardKind::Full, RewardKind::GainOnly] {
            let t1 = Instant::now();
            let mut policy = pipeline::new_policy(world.config.dim, ws.space.clone(), PolicyShape::default(), rs)?;
            let ecfg = EditorConfig {
                learning_rate: 3e-3,
                use_baseline: true,
                batch_size: 32,
                reward: kind,
                seed: rs,
                ..Default::default()
            };
            let rep = train_editor(&mut policy, &ws.agent, &ws.scorer, &ws.messages.train, &ecfg, |_, _| Ok(()))?;
            let r = evaluate(Strategy::Policy(&policy), test, &ws.agent, &ws.scorer, &ws.space, 3)?;
            println!(
                "  {:>10}: gain={:.4} consistency={:.4} return first50={:.4} last50={:.4} ({:.1?})",
                format!("{kind:?}"),
                r.mean_gain,
                r.mean_consistency,
                rep.mean_return(0..50),
                rep.mean_return(300..350),
                t1.elapsed()
            );
        }
    }
    Ok(())
}
