mod common;

use common::check_random_executions;
use ltlplan::dynamics::DynamicsParams;
use ltlplan::options::{
    available_options, check_termination, low_level_action, option_features, run_option,
    target_lane, EpisodeState, FeatureVector, OptionId, OptionMemory, Outcome, SimContext, NO_GAP,
};
use ltlplan::world::{
    sample_initial_state, Driver, Lane, RoadGeometry, Route, ScenarioConfig, Vehicle, WorldState,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn state(vehicles: Vec<Vehicle>, ctx: &SimContext) -> EpisodeState {
    EpisodeState::new(WorldState::new(vehicles, RoadGeometry::default()), ctx).unwrap()
}

fn ego_at(p: f64, lane: Lane, v: f64) -> Vehicle {
    Vehicle::on_route(
        Route::Horizontal,
        p,
        RoadGeometry::default().lane_center(lane),
        v,
        None,
    )
}

#[test]
fn open_road_offers_keep_lane_stop_and_change_lane() {
    let ctx = SimContext::default();
    let s = state(vec![ego_at(-50.0, Lane::Right, 6.0)], &ctx);
    assert_eq!(
        available_options(&s, &ctx).unwrap(),
        vec![OptionId::KeepLane, OptionId::Stop, OptionId::ChangeLane]
    );
}

#[test]
fn preconditions_filter_options() {
    let ctx = SimContext::default();
    let mut stopped = ego_at(-11.0, Lane::Right, 0.0);
    stopped.disc.has_entered_stop_region = true;
    stopped.disc.has_stopped_in_stop_region = true;
    stopped.disc.waited = 3;
    let avail = available_options(&state(vec![stopped], &ctx), &ctx).unwrap();
    assert!(!avail.contains(&OptionId::Stop));
    assert!(!avail.contains(&OptionId::ChangeLane));
    assert!(avail.contains(&OptionId::Wait));

    let inside = ego_at(0.0, Lane::Right, 5.0);
    assert!(!available_options(&state(vec![inside], &ctx), &ctx)
        .unwrap()
        .contains(&OptionId::ChangeLane));

    let lead = Vehicle::on_route(
        Route::Horizontal,
        -35.0,
        -2.0,
        5.0,
        Some(Driver {
            desired_speed: 5.0,
            runs_stop: false,
        }),
    );
    let avail = available_options(
        &state(vec![ego_at(-50.0, Lane::Right, 6.0), lead], &ctx),
        &ctx,
    )
    .unwrap();
    assert!(avail.contains(&OptionId::Follow));
}

#[test]
fn features_on_centerline_at_reference_speed() {
    let ctx = SimContext::default();
    let g = RoadGeometry::default();
    let s = state(vec![ego_at(-50.0, Lane::Right, g.speed_limit)], &ctx);
    let lane = target_lane(OptionId::KeepLane, &s.world);
    let mem = OptionMemory::default();
    let phi = option_features(OptionId::KeepLane, &s.world, lane, lane, &mem, &ctx);
    assert_eq!(phi.speed_error, 0.0);
    assert!(phi.lateral_error.abs() < 1e-12);
    assert_eq!(phi.gap_ahead, NO_GAP);
    assert_eq!(phi.rel_speed_ahead, 0.0);
    assert_eq!(phi.dist_to_intersection, 50.0 - g.intersection_half);
    let mut mem = OptionMemory::default();
    let a = low_level_action(
        OptionId::KeepLane,
        &phi,
        &mut mem,
        &ctx.options,
        &ctx.limits(&g),
    );
    assert!(a.accel.abs() < 1e-9 && a.steer_rate.abs() < 1e-9);

    let off = Vehicle::on_route(
        Route::Horizontal,
        -50.0,
        g.lane_center(Lane::Right) + 1.0,
        5.0,
        None,
    );
    let s = state(vec![off], &ctx);
    let phi = option_features(
        OptionId::KeepLane,
        &s.world,
        Lane::Right,
        Lane::Right,
        &mem,
        &ctx,
    );
    assert!((phi.lateral_error - 1.0).abs() < 1e-9);
}

#[test]
fn features_are_finite_except_the_gap_sentinel() {
    let ctx = SimContext::default();
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = sample_initial_state(
            &ScenarioConfig::default(),
            &RoadGeometry::default(),
            &mut rng,
        )
        .unwrap();
        let s = EpisodeState::new(w, &ctx).unwrap();
        let mem = OptionMemory::default();
        for id in OptionId::ALL {
            let lane = target_lane(id, &s.world);
            let phi = option_features(
                id,
                &s.world,
                lane,
                target_lane(OptionId::KeepLane, &s.world),
                &mem,
                &ctx,
            );
            assert_eq!(phi.to_array().len(), FeatureVector::LEN);
            assert!(phi.gap_ahead == NO_GAP || phi.gap_ahead.is_finite());
            let mut rest = phi;
            rest.gap_ahead = 0.0;
            assert!(
                rest.to_array().iter().all(|x| x.is_finite()),
                "seed {seed}: {phi:?}"
            );
        }
    }
}

#[test]
fn stop_from_thirty_metres_out_at_eight() {
    let ctx = SimContext::default();
    let g = RoadGeometry::default();
    let p0 = -g.intersection_half - g.stop_region_depth - 30.0;
    let s = state(vec![ego_at(p0, Lane::Right, 8.0)], &ctx);
    let run = run_option(&s, OptionId::Stop, &ctx, true).unwrap();
    assert_eq!(run.outcome, Outcome::Success);
    let end = &run.final_state;
    assert!(
        end.props.in_stop_region && end.props.stopped_now && end.props.has_stopped_in_stop_region
    );
    assert!(end.terminal.is_none());
    let d = DynamicsParams::default();
    for step in &run.steps {
        assert!(step.action.accel.abs() <= d.a_max + 1e-12);
    }
    assert_eq!(run.costs.len(), run.steps.len());
}

#[test]
fn wait_holds_without_priority() {
    let ctx = SimContext::default();
    let mut ego = ego_at(-11.0, Lane::Right, 0.0);
    ego.disc.has_entered_stop_region = true;
    ego.disc.has_stopped_in_stop_region = true;
    ego.disc.waited = 5;
    let mut other = Vehicle::on_route(
        Route::Vertical,
        -11.0,
        2.0,
        0.0,
        Some(Driver {
            desired_speed: 8.0,
            runs_stop: false,
        }),
    );
    other.disc.has_entered_stop_region = true;
    other.disc.has_stopped_in_stop_region = true;
    other.disc.waited = 50;
    let s = state(vec![ego, other], &ctx);
    assert!(!s.props.highest_priority);
    let run = run_option(&s, OptionId::Wait, &ctx, true).unwrap();
    let mut held = 0;
    for step in &run.steps {
        if !step.valuation.highest_priority {
            held += 1;
            assert!(step.action.accel <= 0.0);
            assert!(step.vehicles[0].state.cont.v < 1e-9);
        }
    }
    assert!(
        held > 10,
        "the other vehicle should keep priority for a while"
    );
    assert_eq!(run.outcome, Outcome::Success);
}

#[test]
fn termination_causes_resolve_in_fixed_order() {
    assert_eq!(
        check_termination(None, true, false, 300, 300),
        Some(Outcome::Collision)
    );
    assert_eq!(
        check_termination(None, true, true, 300, 300),
        Some(Outcome::Collision)
    );
    assert_eq!(
        check_termination(Some("G(x)"), true, true, 300, 300),
        Some(Outcome::LtlViolation("G(x)".into()))
    );
    assert_eq!(
        check_termination(None, false, true, 300, 300),
        Some(Outcome::Success)
    );
    assert_eq!(
        check_termination(None, false, false, 300, 300),
        Some(Outcome::Timeout)
    );
    assert_eq!(check_termination(None, false, false, 299, 300), None);
}

#[test]
fn option_runs_are_deterministic() {
    let ctx = SimContext::default();
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = sample_initial_state(
            &ScenarioConfig::default(),
            &RoadGeometry::default(),
            &mut rng,
        )
        .unwrap();
        let s = EpisodeState::new(w, &ctx).unwrap();
        for id in available_options(&s, &ctx).unwrap() {
            let a = run_option(&s, id, &ctx, true).unwrap();
            let b = run_option(&s, id, &ctx, true).unwrap();
            assert_eq!(a.steps, b.steps);
            assert_eq!(a.outcome, b.outcome);
            assert_eq!(a.final_state, b.final_state);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn option_executions_are_sound(seed in any::<u64>()) {
        check_random_executions(seed, 40).map_err(TestCaseError::fail)?;
    }
}
