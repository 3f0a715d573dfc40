use evr_core::game::{
    check_bounds, cpne_certify, decentralization_check, default_strategy, lemma_scenarios, Game, GameError, Instance,
    Pledge, PledgeTarget, Predicate, Route, SearchSpace, Stage0, Stage2Action, Strategy as Plan, ZModel,
};
use evr_core::protocol::{player_account, Protocol, Setup};
use evr_core::{SmallGame, SmallGroup};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn game(a: &[u64], e: &[u64]) -> SmallGame {
    Game::new(Instance::new(a, e), SmallGroup::tiny(), 7).unwrap()
}

#[test]
fn default_payoff_equals_deposit() {
    for (a, e) in [
        (vec![1, 1, 1], vec![0, 0, 0]),
        (vec![2, 2, 2], vec![0, 0, 0]),
        (vec![3, 2, 1], vec![0, 0, 1]),
        (vec![1, 1, 1, 1], vec![0; 4]),
    ] {
        let g = game(&a, &e);
        for z in ZModel::ALL {
            let o = g.play(&default_strategy(a.len()), z).unwrap();
            assert!(o.sec && o.rob && !o.inf);
            assert_eq!(o.u, a.iter().map(|&x| x as i64).collect::<Vec<_>>());
        }
    }
}

#[test]
fn informant_gets_ell_after_full_pooling() {
    let g = game(&[2, 2, 2], &[1, 0, 0]);
    let mut sv = default_strategy(3);
    sv[1].stage1 = Some(0);
    assert!(g.play(&sv, ZModel::ZeroZ).unwrap().sec, "4 shares stay below t + 1 = 5");
    sv[2].stage1 = Some(0);
    sv[0].stage2 = Stage2Action::Inform;
    sv[0].stage0.pledge = Pledge::All { to: PledgeTarget::Burn, when: Predicate::Inf };
    let o = g.play(&sv, ZModel::StealSplit).unwrap();
    assert!(o.inf && !o.sec && !o.rob);
    // u_1 = ell + z_1 + y_1 >= ell - e_1
    assert_eq!(o.u[0], 6 - 1);
    assert_eq!(o.w, vec![6, 0, 0]);
}

#[test]
fn lowest_id_informant_wins_the_race() {
    let g = game(&[1, 1, 4], &[0, 0, 0]);
    let mut sv = default_strategy(3);
    sv[0].stage1 = Some(2);
    sv[2].stage1 = Some(1);
    assert_eq!(g.holdings(&sv), vec![1, 5, 5]);
    let o = g.play(&sv, ZModel::ZeroZ).unwrap();
    assert_eq!(o.informant, Some(1));
    assert_eq!(o.w, vec![0, 6, 0]);

    sv[1].stage2 = Stage2Action::Comply;
    assert_eq!(g.play(&sv, ZModel::ZeroZ).unwrap().informant, Some(2));
}

#[test]
fn withholding_blocking_set_confiscates_deposits() {
    let g = game(&[2, 2, 2], &[0, 0, 0]);
    let mut sv = default_strategy(3);
    sv[1].stage2 = Stage2Action::Withhold;
    sv[2].stage2 = Stage2Action::Withhold;
    for z in ZModel::ALL {
        let o = g.play(&sv, z).unwrap();
        assert!(!o.rob && !o.inf);
        assert_eq!(o.w, vec![0, 0, 0]);
        for i in 0..3 {
            assert_eq!(o.u[i], o.z[i] + o.y[i]);
        }
    }
}

/// The arithmetic routing of returned deposits matches a run where the side
/// contract really owns the slots and forwards the coins.
#[test]
fn redirect_routing_matches_the_chain() {
    let a = [2u64, 1, 3];
    let g = game(&a, &[0, 0, 0]);
    let mut sv = default_strategy(3);
    sv[0].stage0.route = Route::ViaContract { beneficiary: 2 };
    sv[1].stage0.route = Route::ViaContract { beneficiary: 0 };
    let o = g.play(&sv, ZModel::ZeroZ).unwrap();
    assert_eq!(o.w, vec![1, 0, 5]);

    let mut setup = Setup::new(SmallGroup::tiny(), a.to_vec());
    setup.redirect = vec![Some(2), Some(0), None];
    setup.seed = 7;
    let mut run = Protocol::start(setup).unwrap();
    assert_eq!(run.view().accounts.iter().filter(|acc| Some(**acc) == run.redirectors[0]).count(), 2);
    run.run_honest().unwrap();
    let balances: Vec<i64> = (0..3).map(|i| run.chain.balance(player_account(i)) as i64).collect();
    assert_eq!(balances, o.w);
    assert!(run.check_invariants().is_empty());
    for side in run.redirectors.iter().flatten() {
        assert_eq!(run.chain.balance(*side), 0);
    }
}

#[test]
fn bounds_hold_over_the_whole_space_for_three_players() {
    let g = game(&[1, 2, 1], &[1, 0, 2]);
    let space = SearchSpace::default();
    let per: Vec<Vec<Plan>> = (0..3).map(|i| space.strategies(&g.instance, i)).collect();
    let mut count = 0;
    for s0 in &per[0] {
        for s1 in &per[1] {
            for s2 in &per[2] {
                let sv = [*s0, *s1, *s2];
                for z in ZModel::ALL {
                    let o = g.evaluate(&sv, z).unwrap();
                    assert!(check_bounds(&o, &g.instance).is_empty());
                    assert!(!o.inf || (!o.sec && !o.rob));
                    count += 1;
                }
            }
        }
    }
    assert!(count > 1_000_000);
}

#[test]
fn bounds_hold_on_sampled_four_player_profiles() {
    let g = game(&[1, 1, 2, 1], &[0, 1, 0, 1]);
    let space = SearchSpace::default();
    let per: Vec<Vec<Plan>> = (0..4).map(|i| space.strategies(&g.instance, i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..20_000 {
        let sv: Vec<Plan> = per.iter().map(|s| s[rng.gen_range(0..s.len())]).collect();
        let z = ZModel::ALL[rng.gen_range(0..3)];
        let o = g.evaluate(&sv, z).unwrap();
        assert!(check_bounds(&o, &g.instance).is_empty());
    }
}

#[test]
fn certify_refuses_five_players() {
    let g = game(&[1, 1, 1, 1, 1], &[0; 5]);
    assert!(matches!(
        cpne_certify(&g, &SearchSpace::default()),
        Err(GameError::SearchBudgetExceeded { players: 5, .. })
    ));
}

#[test]
fn stealing_coalition_is_undone_by_the_holder_informing() {
    // a coalition pools t + 1 shares and steals; the holder does better informing
    let g = game(&[2, 2, 2], &[0, 0, 0]);
    let mut sv = default_strategy(3);
    sv[1].stage1 = Some(0);
    sv[2].stage1 = Some(0);
    sv[0].stage2 = Stage2Action::Steal;
    let stolen = g.play(&sv, ZModel::StealSplit).unwrap();
    assert!(!stolen.sec && stolen.rob && !stolen.inf);
    // z_1 = P - 1 = 1 on top of the returned deposit
    assert_eq!(stolen.u, vec![3, 2, 2]);
    sv[0].stage2 = Stage2Action::Inform;
    let informed = g.play(&sv, ZModel::StealSplit).unwrap();
    // ell - e_1 = 6 > a_1 + P = 4 >= u_1 under stealing
    assert_eq!(informed.u, vec![6, 0, 0]);
}

#[test]
fn lemma_scenarios_on_decentralized_instances() {
    for (a, space) in [
        (vec![1, 1, 1], SearchSpace::default()),
        (vec![2, 2, 2], SearchSpace { routes: false, ..SearchSpace::default() }),
    ] {
        let g = game(&a, &[0, 0, 0]);
        assert!(decentralization_check(&g.instance));
        let checks = lemma_scenarios(&g, &space).unwrap();
        assert_eq!(checks.len(), 4);
        for c in &checks {
            assert!(c.holds(), "{} failed on a={a:?}: {c:?}", c.name);
        }
        let l2 = &checks[1];
        let profits = l2.cases.iter().find(|(k, _)| k == "informant_profits").unwrap().1;
        assert_eq!(profits, l2.family_size, "the informant always gains");
    }
}

#[test]
fn certification_with_full_redeviation_scope() {
    let g = game(&[1, 1, 1], &[0, 0, 0]);
    let space = SearchSpace { redeviation: evr_core::game::RedeviationScope::Full, ..SearchSpace::default() };
    let r = cpne_certify(&g, &space).unwrap();
    assert!(r.certified());
}

fn arb_strategy(players: usize) -> impl Strategy<Value = Plan> {
    let route = prop_oneof![Just(None), (0..players).prop_map(Some)];
    let pledge = prop_oneof![
        Just(Pledge::None),
        (0..players + 1, 0..6usize).prop_map(move |(to, w)| Pledge::All {
            to: if to == players { PledgeTarget::Burn } else { PledgeTarget::Player(to) },
            when: Predicate::ALL[w],
        })
    ];
    let send = prop_oneof![Just(None), (0..players).prop_map(Some)];
    (route, pledge, send, 0..5usize).prop_map(|(r, pledge, stage1, a)| Plan {
        stage0: Stage0 { route: r.map_or(Route::Eoa, |j| Route::ViaContract { beneficiary: j }), pledge },
        stage1,
        stage2: Stage2Action::ALL[a],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Random endowments and profiles: every valid profile meets the bounds and
    /// the sum rule, and self-targets are rejected rather than mis-scored.
    #[test]
    fn random_profiles_meet_the_bounds(
        a in proptest::collection::vec(1u64..3, 3),
        e in proptest::collection::vec(0u64..4, 3),
        sv in proptest::collection::vec(arb_strategy(3), 3),
        z in 0..3usize,
    ) {
        let g = game(&a, &e);
        let self_target = sv.iter().enumerate().any(|(i, s)| {
            s.stage1 == Some(i)
                || s.stage0.route == Route::ViaContract { beneficiary: i }
                || s.stage0.pledge == Pledge::All { to: PledgeTarget::Player(i), when: match s.stage0.pledge {
                    Pledge::All { when, .. } => when,
                    Pledge::None => Predicate::Sec,
                } }
        });
        match g.evaluate(&sv, ZModel::ALL[z]) {
            Ok(o) => {
                prop_assert!(!self_target);
                prop_assert!(check_bounds(&o, &g.instance).is_empty());
                prop_assert!(o.u.iter().sum::<i64>() < g.instance.n() as i64 + g.instance.p() as i64);
            }
            Err(GameError::InvalidStrategy { .. }) => prop_assert!(self_target),
            Err(other) => prop_assert!(false, "unexpected {}", other),
        }
    }
}
