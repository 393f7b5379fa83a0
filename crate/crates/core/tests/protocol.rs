use std::f64::consts::FRAC_1_SQRT_2;

use adascal::bilevel::{outer_alg, run_expix, RunStreams};
use adascal::harness::scenario::{equilibrium_labels, record_run, simulate_run};
use adascal::harness::{run_scenario, ExperimentConfig};
use adascal::{
    BilevelParams, BilevelState, BlockSchedule, Environment, LearnerState, Opponent, SimplexPoint,
    VectorGame, WeightVector,
};

fn objective() -> WeightVector {
    WeightVector::normalize(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0, 0.0]).unwrap()
}

fn env(seed: u64) -> Environment {
    let opponent = Opponent::ExpIx {
        learner: LearnerState::new(SimplexPoint::uniform(2).unwrap(), 0.1, 0.2).unwrap(),
        weight: WeightVector::normalize(&[0.0, 0.0, 1.0, 1.0]).unwrap(),
    };
    Environment::new(
        VectorGame::bos4d(),
        opponent,
        RunStreams::from_seed(seed).opponent,
    )
    .unwrap()
}

#[test]
fn single_candidate_matches_plain_expix() {
    for seed in [1, 2, 3] {
        let params = BilevelParams {
            eta_p: 0.3,
            eta_q: 0.07,
            gamma_p: 0.1,
            gamma_q: 0.25,
        };
        let mut state = BilevelState::new(vec![objective()], objective(), 2, params).unwrap();
        let schedule = BlockSchedule::new(3000, 250).unwrap();
        let mut streams = RunStreams::from_seed(seed);
        let bilevel = outer_alg(&mut state, &schedule, &mut env(seed), &mut streams).unwrap();

        let learner = LearnerState::new(SimplexPoint::uniform(2).unwrap(), 0.07, 0.25).unwrap();
        let mut focal = RunStreams::from_seed(seed).focal;
        let plain = run_expix(learner, &objective(), 3000, &mut env(seed), &mut focal).unwrap();

        assert_eq!(bilevel.rounds.len(), plain.rounds.len());
        for (a, b) in bilevel.rounds.iter().zip(&plain.rounds) {
            assert_eq!(a.focal_action, b.focal_action);
            assert_eq!(a.opponent_action, b.opponent_action);
            assert_eq!(a.focal_dist, b.focal_dist);
            assert_eq!(a.estimate, b.estimate);
        }
        assert_eq!(bilevel.final_policies[0], plain.final_policies[0]);
        assert_eq!(bilevel.final_outer, vec![1.0]);
    }
}

#[test]
fn rows_other_than_the_deployed_one_stay_fixed() {
    let h = 0.5;
    let candidates = vec![
        objective(),
        WeightVector::normalize(&[h; 4]).unwrap(),
        WeightVector::normalize(&[h, h, -h, -h]).unwrap(),
    ];
    let mut state =
        BilevelState::new(candidates, objective(), 2, BilevelParams::default()).unwrap();
    let schedule = BlockSchedule::new(4000, 400).unwrap();
    let mut streams = RunStreams::from_seed(11);
    let history = outer_alg(&mut state, &schedule, &mut env(11), &mut streams).unwrap();

    // replay row snapshots from the round logs
    let mut rows = vec![vec![0.5, 0.5]; 3];
    for block in 0..history.blocks.len() {
        let j = history.blocks[block].deployed;
        let logged: Vec<_> = history.rounds.iter().filter(|r| r.block == block).collect();
        assert_eq!(
            logged[0].focal_dist, rows[j],
            "block {block} starts from row {j}"
        );
        let before = rows.clone();
        let last = logged.last().unwrap();
        let next = adascal::bandit::omd_entropy_step(
            &SimplexPoint::new(last.focal_dist.clone()).unwrap(),
            &last.estimate,
            history.params.eta_q,
        )
        .unwrap();
        rows[j] = next.into_inner();
        for i in (0..3).filter(|&i| i != j) {
            assert_eq!(rows[i], before[i]);
        }
    }
    assert_eq!(rows, history.final_policies);
}

#[test]
fn reruns_reproduce_records() {
    let cfg = ExperimentConfig {
        runs: 20,
        rounds: 2000,
        window: 500,
        ..Default::default()
    };
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.histogram, b.histogram);

    let resolved = cfg.resolve().unwrap();
    let labels = equilibrium_labels(&resolved).unwrap();
    for rec in &a.records {
        let h = simulate_run(&cfg, &resolved, rec.run_id).unwrap();
        let again = record_run(&cfg, &resolved, &labels, rec.run_id, &h, false).unwrap();
        assert_eq!(again.outcome, rec.outcome);
        assert_eq!(again.mean_obj_reward, rec.mean_obj_reward);
    }
}

#[test]
fn bilevel_focal_earns_more_than_opponent_on_bb_runs() {
    let cfg = ExperimentConfig {
        runs: 200,
        ..Default::default()
    };
    let out = run_scenario(&cfg).unwrap();
    let bb = &out.trajectories["BB"];
    let n = bb.len();
    let tail = n - 1000..n;
    assert!(bb.mean_focal()[tail.clone()]
        .iter()
        .zip(&bb.mean_opponent()[tail])
        .all(|(f, o)| f > o));
}
