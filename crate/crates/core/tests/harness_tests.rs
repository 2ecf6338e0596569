mod common;

use std::process::Command;

use common::{oracle, props_val, Tri};
use ltlplan::harness::{
    episode_rng, evaluate, metrics_csv, render, render_ascii_frame, reset, run_episode, run_from,
    trace_initial_world, verify_trace, Canvas, EpisodeId, EpisodeTrace, HarnessError, OutcomeClass,
    PlannerMode, RenderStyle, RunConfig, TraceRecord,
};
use ltlplan::ltl::{parse, Verdict, PRIORITY_RULE, STOP_RULE};
use ltlplan::options::{run_option, EpisodeState, OptionId, Outcome, EPISODE_RULES};
use ltlplan::world::{Driver, Lane, RoadGeometry, Route, Vehicle, WorldState};

fn ego_alone() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.scenario.max_non_ego = 0;
    cfg
}

fn id(episode: usize) -> EpisodeId {
    EpisodeId {
        seed: 0,
        trial: 0,
        episode,
    }
}

fn rule_on_trace(rule: &str, trace: &EpisodeTrace) -> Tri {
    let vals: Vec<_> = trace.valuations().iter().map(props_val).collect();
    oracle(&parse(rule).unwrap(), &vals, 0)
}

#[test]
fn reset_is_seeded_and_starts_undetermined() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    let a = reset(&cfg, &ctx, &mut episode_rng(5, 1, 2)).unwrap();
    let b = reset(&cfg, &ctx, &mut episode_rng(5, 1, 2)).unwrap();
    assert_eq!(a, b);
    assert_ne!(
        a.world,
        reset(&cfg, &ctx, &mut episode_rng(5, 1, 3)).unwrap().world
    );
    assert_eq!(a.monitors.len(), EPISODE_RULES.len());
    assert!(a
        .monitors
        .iter()
        .all(|m| m.verdict() == Verdict::Undetermined));
    assert!(a.terminal.is_none());

    let solo = ego_alone();
    let s = reset(&solo, &ctx, &mut episode_rng(0, 0, 0)).unwrap();
    assert_eq!(s.world.vehicles.len(), 1);
}

#[test]
fn ego_alone_manual_reaches_the_goal() {
    let cfg = ego_alone();
    let ctx = cfg.sim_context().unwrap();
    for e in 0..20 {
        let r = run_episode(&cfg, &ctx, PlannerMode::Manual, id(e), true).unwrap();
        assert_eq!(r.outcome, Outcome::Success, "episode {e}");
        let g = cfg.geometry;
        let (p, _) = r.final_state.world.local_position(0);
        assert!(p >= g.route_half_length - g.goal_length, "final p = {p}");
        assert!(r.final_state.world.ego().state.cont.v <= g.speed_limit);
        let trace = r.trace.unwrap();
        assert_ne!(rule_on_trace(STOP_RULE, &trace), Tri::F);
        assert!(trace
            .valuations()
            .iter()
            .any(|v| v.has_stopped_in_stop_region));
    }
}

#[test]
fn forced_violations_are_reported_with_their_formula() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    let g = RoadGeometry::default();

    // Too fast to stop before the stop region ends.
    let fast = Vehicle::on_route(
        Route::Horizontal,
        -18.0,
        g.lane_center(Lane::Right),
        11.0,
        None,
    );
    let s = EpisodeState::new(WorldState::new(vec![fast], g), &ctx).unwrap();
    let r = run_from(
        s,
        &cfg,
        &ctx,
        PlannerMode::Manual,
        id(0),
        true,
        &mut episode_rng(0, 0, 0),
    )
    .unwrap();
    assert_eq!(r.outcome, Outcome::LtlViolation(STOP_RULE.to_string()));
    let trace = r.trace.unwrap();
    match trace.terminal() {
        Some(TraceRecord::Terminal {
            outcome, formula, ..
        }) => {
            assert_eq!(*outcome, OutcomeClass::Violation);
            assert_eq!(formula.as_deref(), Some(STOP_RULE));
        }
        other => panic!("bad terminal record {other:?}"),
    }
    assert_eq!(rule_on_trace(STOP_RULE, &trace), Tri::F);

    // Driving into the box while another vehicle holds priority.
    let mut ego = Vehicle::on_route(
        Route::Horizontal,
        -9.0,
        g.lane_center(Lane::Right),
        0.0,
        None,
    );
    ego.disc.has_entered_stop_region = true;
    ego.disc.has_stopped_in_stop_region = true;
    ego.disc.waited = 3;
    let mut waiting = Vehicle::on_route(
        Route::Vertical,
        -9.0,
        g.lane_center(Lane::Right),
        0.0,
        Some(Driver {
            desired_speed: 0.0,
            runs_stop: false,
        }),
    );
    waiting.disc.has_entered_stop_region = true;
    waiting.disc.has_stopped_in_stop_region = true;
    waiting.disc.waited = 80;
    let s = EpisodeState::new(WorldState::new(vec![ego, waiting], g), &ctx).unwrap();
    assert!(!s.props.highest_priority);
    let run = run_option(&s, OptionId::KeepLane, &ctx, true).unwrap();
    assert_eq!(
        run.episode_outcome(),
        Some(&Outcome::LtlViolation(PRIORITY_RULE.to_string()))
    );
    let mut vals: Vec<_> = run
        .steps
        .iter()
        .map(|st| props_val(&st.valuation))
        .collect();
    vals.push(props_val(&run.final_state.props));
    assert_eq!(oracle(&parse(PRIORITY_RULE).unwrap(), &vals, 0), Tri::F);
}

#[test]
fn traces_are_byte_identical_across_runs() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    for mode in [PlannerMode::Manual, PlannerMode::Mcts] {
        for e in 0..3 {
            let a = run_episode(&cfg, &ctx, mode, id(e), true)
                .unwrap()
                .trace
                .unwrap()
                .to_jsonl();
            let b = run_episode(&cfg, &ctx, mode, id(e), true)
                .unwrap()
                .trace
                .unwrap()
                .to_jsonl();
            assert_eq!(a, b);
            let parsed = EpisodeTrace::from_jsonl(a.as_bytes()).unwrap();
            assert_eq!(parsed.to_jsonl(), a);
        }
    }
}

#[test]
fn trace_layout_invariants() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    for e in 0..10 {
        let r = run_episode(&cfg, &ctx, PlannerMode::Manual, id(e), true).unwrap();
        let trace = r.trace.unwrap();
        assert!(matches!(
            trace.records.first(),
            Some(TraceRecord::Start { .. })
        ));
        let terminals = trace
            .records
            .iter()
            .filter(|r| matches!(r, TraceRecord::Terminal { .. }))
            .count();
        assert_eq!(terminals, 1);
        assert!(matches!(
            trace.records.last(),
            Some(TraceRecord::Terminal { .. })
        ));
        let times: Vec<f64> = trace
            .steps()
            .map(|r| match r {
                TraceRecord::Step { time, .. } => *time,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(times.len(), r.steps);
        for (k, w) in times.windows(2).enumerate() {
            assert!(w[1] > w[0], "step {k}");
            assert!((w[1] - w[0] - ctx.dynamics.dt).abs() < 1e-9);
        }
        let decisions = trace
            .records
            .iter()
            .filter(|r| matches!(r, TraceRecord::Decision { .. }))
            .count();
        assert_eq!(decisions, r.decision_times.len());
    }
}

#[test]
fn replaying_a_trace_reproduces_every_state() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    for mode in [PlannerMode::Manual, PlannerMode::Mcts] {
        for e in 0..3 {
            let original = run_episode(&cfg, &ctx, mode, id(e), true)
                .unwrap()
                .trace
                .unwrap();
            let parsed = EpisodeTrace::from_jsonl(original.to_jsonl().as_bytes()).unwrap();
            let world = trace_initial_world(&parsed).unwrap();
            let mut rng = episode_rng(0, 0, e);
            let sampled = reset(&cfg, &ctx, &mut rng).unwrap();
            assert_eq!(sampled.world, world);
            let state = EpisodeState::new(world, &ctx).unwrap();
            let replay = run_from(state, &cfg, &ctx, mode, id(e), true, &mut rng)
                .unwrap()
                .trace
                .unwrap();
            assert_eq!(replay, original);
        }
    }
}

#[test]
fn successful_episodes_never_violate_the_traffic_rules() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    let mut successes = 0;
    for (mode, n) in [(PlannerMode::Manual, 60), (PlannerMode::Mcts, 8)] {
        for e in 0..n {
            let r = run_episode(&cfg, &ctx, mode, id(e), true).unwrap();
            if r.outcome != Outcome::Success {
                continue;
            }
            successes += 1;
            let trace = r.trace.unwrap();
            for rule in EPISODE_RULES {
                assert_ne!(rule_on_trace(rule, &trace), Tri::F, "{rule} on episode {e}");
                let report = verify_trace(rule, trace.to_jsonl().as_bytes()).unwrap();
                assert_ne!(report.verdict, Verdict::Violated);
                assert_eq!(report.steps, r.steps + 1);
            }
        }
    }
    assert!(successes > 50);
}

#[test]
fn evaluate_accounts_every_episode_once() {
    let mut cfg = ego_alone();
    cfg.trials = 1;
    cfg.episodes = 1;
    let m = evaluate(&cfg, PlannerMode::Manual).unwrap();
    assert_eq!(m.mean, [100.0, 0.0, 0.0, 0.0]);
    assert_eq!(m.std, [0.0; 4]);

    cfg.trials = 2;
    cfg.episodes = 3;
    let m = evaluate(&cfg, PlannerMode::Manual).unwrap();
    assert_eq!(m.std, [0.0; 4]);
    let csv = metrics_csv(&m);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "trial,success_pct,violation_pct,collision_pct,timeout_pct"
    );
    assert_eq!(lines[1], "0,100.0000,0.0000,0.0000,0.0000");
    assert_eq!(lines[3], "mean,100.0000,0.0000,0.0000,0.0000");
    assert_eq!(lines[4], "std,0.0000,0.0000,0.0000,0.0000");

    let cfg = RunConfig {
        trials: 3,
        episodes: 20,
        ..Default::default()
    };
    let m = evaluate(&cfg, PlannerMode::Manual).unwrap();
    assert_eq!(m.episodes.len(), 60);
    for t in &m.trials {
        assert!((t.as_array().iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }
    let total: usize = OutcomeClass::ALL.iter().map(|&c| m.count(c)).sum();
    assert_eq!(total, 60);
}

#[test]
fn render_frames_follow_the_trace() {
    let cfg = RunConfig::default();
    let ctx = cfg.sim_context().unwrap();
    let r = run_episode(&cfg, &ctx, PlannerMode::Manual, id(4), true).unwrap();
    let trace = r.trace.unwrap();
    for style in [RenderStyle::Ascii, RenderStyle::Svg] {
        let frames = render(&trace, style).unwrap();
        assert_eq!(frames.len(), trace.step_count());
        assert_eq!(frames, render(&trace, style).unwrap());
    }
    let svg = &render(&trace, RenderStyle::Svg).unwrap()[0];
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    assert!(svg.contains("option="));

    let g = RoadGeometry::default();
    let canvas = Canvas::ascii(&g);
    let empty = render_ascii_frame(&g, &[], "empty", &canvas);
    let grid: String = empty.lines().skip(1).collect();
    assert!(
        grid.chars().all(|c| " .+s".contains(c)),
        "unexpected glyph in {grid}"
    );
    assert!(grid.contains('+') && grid.contains('s') && grid.contains('.'));

    let (ax, ay) = canvas.to_canvas(-g.route_half_length, g.route_half_length);
    let (bx, by) = canvas.to_canvas(g.route_half_length, -g.route_half_length);
    assert_eq!((ax, ay, bx, by), (0.0, 0.0, canvas.width, canvas.height));
    let (mx, my) = canvas.to_canvas(13.0, -7.0);
    let (ux, uy) = canvas.to_canvas(-13.0, 7.0);
    assert!(((mx + ux) / 2.0 - canvas.width / 2.0).abs() < 1e-12);
    assert!(((my + uy) / 2.0 - canvas.height / 2.0).abs() < 1e-12);

    let ego = Vehicle::on_route(Route::Horizontal, 20.0, -2.0, 5.0, None);
    let frame = render_ascii_frame(&g, &[ego], "", &canvas);
    let (cx, cy) = canvas.to_canvas(ego.state.cont.x, ego.state.cont.y);
    let row: Vec<char> = frame
        .lines()
        .nth(1 + cy as usize)
        .unwrap()
        .chars()
        .collect();
    assert_eq!(row[cx as usize], 'E');
}

#[test]
fn config_rejects_unknown_keys_and_learned_planner() {
    assert!(matches!(
        RunConfig::from_json(r#"{"episodes": 3, "bogus": 1}"#),
        Err(HarnessError::ConfigParse(_))
    ));
    assert!(RunConfig::from_json(r#"{"reward": {"gamma": 0.9, "extra": 0}}"#).is_err());
    let cfg = RunConfig::from_json(r#"{"episodes": 3, "planner": {"mode": "manual"}}"#).unwrap();
    assert_eq!(
        (cfg.episodes, cfg.planner.mode, cfg.trials),
        (3, PlannerMode::Manual, 10)
    );
    assert!(RunConfig::from_json(r#"{"reward": {"gamma": 1.5}}"#).is_err());

    let err = "rl".parse::<PlannerMode>().map(|m| {
        let cfg = RunConfig::default();
        let ctx = cfg.sim_context().unwrap();
        run_episode(&cfg, &ctx, m, id(0), false)
    });
    match err {
        Ok(Err(e)) => assert!(e.to_string().contains("rl"), "{e}"),
        Err(e) => assert!(e.contains("rl")),
        Ok(Ok(_)) => panic!("learned planner accepted"),
    }
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ltlplan"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"scenario": {"max_non_ego": 2}}"#).unwrap();
    let out = dir.path().join("t");
    let (code, stdout, _) = cli(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--seed",
        "7",
        "--planner",
        "mcts",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("outcome="));
    let trace_path = out.join("trace.jsonl");
    assert!(trace_path.exists());

    let (code, stdout, _) = cli(&["render", "--trace", trace_path.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains('E'));

    let (code, _, stderr) = cli(&["run", "--bogus"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("--bogus") && stderr.contains("Usage"));

    let all_true = dir.path().join("a.jsonl");
    std::fs::write(&all_true, "{\"a\": true}\n{\"a\": true}\n{\"a\": true}\n").unwrap();
    let (code, stdout, _) = cli(&[
        "verify",
        "--property",
        "G(a)",
        "--trace",
        all_true.to_str().unwrap(),
    ]);
    assert_eq!((code, stdout.trim()), (0, "Undetermined"));
    let (code, stdout, _) = cli(&[
        "verify",
        "--property",
        "G(not in_goal_region)",
        "--trace",
        trace_path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.starts_with("Violated at step") || stdout.trim() == "Undetermined");

    let missing = dir.path().join("missing.jsonl");
    let (code, _, stderr) = cli(&[
        "verify",
        "--property",
        "G(a)",
        "--trace",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("missing.jsonl"));

    let (code, _, stderr) = cli(&[
        "evaluate",
        "--planner",
        "rl",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(stderr.contains("rl"));

    let (code, _, _) = cli(&["run", "--planner", "dqn"]);
    assert_eq!(code, 1);
}
