use elomix::elo::{elo_step, run_chain, ChainState, Draw, EloConfig};
use elomix::{ComparisonGraph, EloError, MatchupDistribution, RatingVector, RngStream, StepSize};
use proptest::prelude::*;

fn config(n: usize, cap: f64, eta: f64) -> EloConfig {
    let q = MatchupDistribution::uniform(ComparisonGraph::complete(n));
    EloConfig::sequential(q, cap, StepSize::new(eta).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn step_moves_winner_up_and_loser_down(
        a in -0.9f64..0.9, b in -0.9f64..0.9, eta in 0.01f64..0.249
    ) {
        let cfg = config(3, f64::INFINITY, eta);
        let start = RatingVector::centered(vec![a, b, 0.0], f64::INFINITY).unwrap();
        let before = start.values().to_vec();
        let mut s = ChainState::new(start, 0);
        s.apply(&cfg, &Draw::from_games(vec![(0, 1)])).unwrap();
        let after = s.values();
        prop_assert!(after[0] > before[0]);
        prop_assert!(after[1] < before[1]);
        prop_assert_eq!(after[2], before[2]);
        prop_assert!((after[0] - before[0]) <= eta);
        prop_assert!(after.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn step_size_follows_the_rating_gap(
        a in -0.5f64..0.5, shift in -2.0f64..2.0
    ) {
        let cfg = config(2, f64::INFINITY, 0.1);
        let mut s1 = ChainState::new(RatingVector::uncapped(vec![a, -a]).unwrap(), 0);
        let mut s2 = ChainState::new(RatingVector::uncapped(vec![a + shift, -a - shift]).unwrap(), 0);
        s1.apply(&cfg, &Draw::from_games(vec![(1, 0)])).unwrap();
        s2.apply(&cfg, &Draw::from_games(vec![(1, 0)])).unwrap();
        let d1 = s1.values()[1] - (-a);
        let d2 = s2.values()[1] - (-a - shift);
        let expected = 0.1 * elomix::sigmoid(2.0 * a);
        prop_assert!((d1 - expected).abs() < 1e-12);
        prop_assert!((d2 - 0.1 * elomix::sigmoid(2.0 * (a + shift))).abs() < 1e-12);
    }

    #[test]
    fn capped_chain_stays_feasible(seed in any::<u64>(), eta in 0.05f64..0.249) {
        let cfg = config(5, 0.6, eta);
        let skills = RatingVector::new(vec![0.5, 0.25, 0.0, -0.25, -0.5], 0.6).unwrap();
        let mut s = ChainState::zeros(5, 0.6, 0);
        let mut rng = RngStream::new(seed, 0);
        for _ in 0..200 {
            elo_step(&mut s, &cfg, &skills, &mut rng).unwrap();
            prop_assert!(s.values().iter().all(|v| v.abs() <= 0.6 + 1e-12));
            prop_assert!(s.values().iter().sum::<f64>().abs() < 1e-9);
        }
    }
}

#[test]
fn same_seed_same_trajectory() {
    let cfg = config(6, 1.0, 0.1);
    let skills = RatingVector::new(vec![0.5, 0.3, 0.1, -0.1, -0.3, -0.5], 1.0).unwrap();
    let a = run_chain(&cfg, &skills, 100, 5_000, &mut RngStream::new(9, 3), &mut []).unwrap();
    let b = run_chain(&cfg, &skills, 100, 5_000, &mut RngStream::new(9, 3), &mut []).unwrap();
    let c = run_chain(&cfg, &skills, 100, 5_000, &mut RngStream::new(9, 4), &mut []).unwrap();
    assert_eq!(a.time_average, b.time_average);
    assert_ne!(a.time_average, c.time_average);
}

#[test]
fn time_average_approaches_skills() {
    let cfg = config(4, f64::INFINITY, 0.02);
    let skills = RatingVector::uncapped(vec![0.6, 0.2, -0.2, -0.6]).unwrap();
    let out = run_chain(&cfg, &skills, 20_000, 400_000, &mut RngStream::new(1, 1), &mut []).unwrap();
    for (a, r) in out.time_average.iter().zip(skills.values()) {
        assert!((a - r).abs() < 0.05, "{a} vs {r}");
    }
}

#[test]
fn rejects_skills_over_the_cap() {
    let cfg = config(2, 0.5, 0.1);
    let skills = RatingVector::uncapped(vec![0.8, -0.8]).unwrap();
    let mut s = ChainState::zeros(2, 0.5, 0);
    let err = elo_step(&mut s, &cfg, &skills, &mut RngStream::new(0, 0)).unwrap_err();
    assert!(matches!(err, EloError::SkillsExceedCap { .. }), "{err:?}");
}
