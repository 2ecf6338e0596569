//! Test-only helpers shared by the integration suites.
//!
//! The oracle here evaluates formulas directly on a finite trace with
//! Kleene three-valued logic. It never rewrites formulas, so it shares no
//! code path with the progression monitor it checks.

#![allow(dead_code)]

use std::collections::BTreeMap;

use ltlplan::ltl::{Formula, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    T,
    F,
    U,
}

impl Tri {
    pub fn not(self) -> Tri {
        match self {
            Tri::T => Tri::F,
            Tri::F => Tri::T,
            Tri::U => Tri::U,
        }
    }

    pub fn and(self, o: Tri) -> Tri {
        match (self, o) {
            (Tri::F, _) | (_, Tri::F) => Tri::F,
            (Tri::T, Tri::T) => Tri::T,
            _ => Tri::U,
        }
    }

    pub fn or(self, o: Tri) -> Tri {
        self.not().and(o.not()).not()
    }

    pub fn verdict(self) -> Verdict {
        match self {
            Tri::T => Verdict::Satisfied,
            Tri::F => Verdict::Violated,
            Tri::U => Verdict::Undetermined,
        }
    }
}

pub type Val = BTreeMap<String, bool>;

/// Kleene evaluation of `f` at position `i` of `trace`. Propositions at or
/// beyond the end of the trace are unknown, and so are temporal
/// obligations about the unseen suffix.
pub fn oracle(f: &Formula, trace: &[Val], i: usize) -> Tri {
    let n = trace.len();
    match f {
        Formula::True => Tri::T,
        Formula::False => Tri::F,
        Formula::Atom(_) if i >= n => Tri::U,
        Formula::Atom(name) => {
            if *trace[i]
                .get(&**name)
                .expect("oracle: atom missing from valuation")
            {
                Tri::T
            } else {
                Tri::F
            }
        }
        Formula::Not(a) => oracle(a, trace, i).not(),
        Formula::And(a, b) => oracle(a, trace, i).and(oracle(b, trace, i)),
        Formula::Or(a, b) => oracle(a, trace, i).or(oracle(b, trace, i)),
        Formula::Implies(a, b) => oracle(a, trace, i).not().or(oracle(b, trace, i)),
        Formula::Next(a) => oracle(a, trace, i + 1),
        Formula::Eventually(a) => {
            let mut acc = Tri::U;
            for j in (i..n).rev() {
                acc = oracle(a, trace, j).or(acc);
            }
            acc
        }
        Formula::Always(a) => {
            let mut acc = Tri::U;
            for j in (i..n).rev() {
                acc = oracle(a, trace, j).and(acc);
            }
            acc
        }
        Formula::Until(a, b) => {
            let mut acc = Tri::U;
            for j in (i..n).rev() {
                acc = oracle(b, trace, j).or(oracle(a, trace, j).and(acc));
            }
            acc
        }
    }
}

pub fn oracle_verdict(f: &Formula, trace: &[Val]) -> Verdict {
    oracle(f, trace, 0).verdict()
}

pub fn val(pairs: &[(&str, bool)]) -> Val {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// All formulas over `atoms` whose depth (leaves = 1) is at most `depth`,
/// using every operator of the property grammar.
pub fn enumerate_formulas(atoms: &[&str], depth: usize) -> Vec<Formula> {
    let leaves: Vec<Formula> = atoms.iter().map(|a| Formula::atom(a).unwrap()).collect();
    let mut all = leaves.clone();
    for _ in 1..depth {
        let prev = all.clone();
        let mut next = leaves.clone();
        for f in &prev {
            next.push(Formula::not(f.clone()));
            next.push(Formula::next(f.clone()));
            next.push(Formula::eventually(f.clone()));
            next.push(Formula::always(f.clone()));
        }
        for l in &prev {
            for r in &prev {
                next.push(Formula::and(l.clone(), r.clone()));
                next.push(Formula::or(l.clone(), r.clone()));
                next.push(Formula::implies(l.clone(), r.clone()));
                next.push(Formula::until(l.clone(), r.clone()));
            }
        }
        all = next;
    }
    all
}

/// The four valuations over atoms `a` and `b`.
pub fn two_atom_valuations() -> Vec<Val> {
    let mut out = Vec::new();
    for a in [false, true] {
        for b in [false, true] {
            out.push(val(&[("a", a), ("b", b)]));
        }
    }
    out
}

/// Independent fixed-step RK4 for the kinematic bicycle with compass heading
/// and yaw rate `v tan(psi / L)`; state is `[x, y, theta, v, psi]`.
pub fn reference_rk4(
    state: [f64; 5],
    accel: f64,
    rate: f64,
    wheel_base: f64,
    h: f64,
    steps: usize,
) -> [f64; 5] {
    let f = |s: [f64; 5]| -> [f64; 5] {
        [
            s[3] * s[2].sin(),
            s[3] * s[2].cos(),
            s[3] * (s[4] / wheel_base).tan(),
            accel,
            rate,
        ]
    };
    let add = |s: [f64; 5], k: [f64; 5], c: f64| -> [f64; 5] {
        let mut o = s;
        for i in 0..5 {
            o[i] += c * k[i];
        }
        o
    };
    let mut s = state;
    for _ in 0..steps {
        let k1 = f(s);
        let k2 = f(add(s, k1, h / 2.0));
        let k3 = f(add(s, k2, h / 2.0));
        let k4 = f(add(s, k3, h));
        for i in 0..5 {
            s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    s
}

/// Piecewise-constant `(accel, steer_rate)` segments of `segment_s` seconds
/// that keep speed in `[1, 10]` m/s and `|psi| <= 0.4` rad exactly, so no
/// saturation ever acts.
pub fn bounded_inputs(
    seed: u64,
    v0: f64,
    segments: usize,
    segment_s: f64,
    a_max: f64,
    rho_max: f64,
) -> Vec<(f64, f64)> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut v, mut psi) = (v0, 0.0);
    let mut out = Vec::with_capacity(segments);
    for _ in 0..segments {
        let a_lo = ((1.0 - v) / segment_s).max(-a_max);
        let a_hi = ((10.0 - v) / segment_s).min(a_max);
        let r_lo = ((-0.4 - psi) / segment_s).max(-rho_max);
        let r_hi = ((0.4 - psi) / segment_s).min(rho_max);
        let a = rng.gen_range(a_lo..=a_hi);
        let r = rng.gen_range(r_lo..=r_hi);
        v += a * segment_s;
        psi += r * segment_s;
        out.push((a, r));
    }
    out
}

/// Ego stopped at the stop line holding priority while a stop-sign runner
/// approaches on the crossing route: proceeding now fails, waiting succeeds.
pub fn safety_fixture(
    runner_p: f64,
    runner_v: f64,
    runner_lane: ltlplan::world::Lane,
) -> ltlplan::world::WorldState {
    use ltlplan::world::{Driver, Lane, RoadGeometry, Route, Vehicle, WorldState};
    let g = RoadGeometry::default();
    let mut ego = Vehicle::on_route(
        Route::Horizontal,
        -11.0,
        g.lane_center(Lane::Right),
        0.0,
        None,
    );
    ego.disc.has_entered_stop_region = true;
    ego.disc.has_stopped_in_stop_region = true;
    ego.disc.waited = 10;
    let runner = Vehicle::on_route(
        Route::Vertical,
        runner_p,
        g.lane_center(runner_lane),
        runner_v,
        Some(Driver {
            desired_speed: runner_v,
            runs_stop: true,
        }),
    );
    WorldState::new(vec![ego, runner], g)
}

/// Corners of a vehicle footprint centred at `(x, y)` with compass heading `theta`.
pub fn footprint_corners(x: f64, y: f64, theta: f64, len: f64, wid: f64) -> [(f64, f64); 4] {
    let (fx, fy) = (theta.sin(), theta.cos());
    let (rx, ry) = (theta.cos(), -theta.sin());
    let (hl, hw) = (len / 2.0, wid / 2.0);
    [
        (x + hl * fx + hw * rx, y + hl * fy + hw * ry),
        (x + hl * fx - hw * rx, y + hl * fy - hw * ry),
        (x - hl * fx - hw * rx, y - hl * fy - hw * ry),
        (x - hl * fx + hw * rx, y - hl * fy + hw * ry),
    ]
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn inside_convex(p: (f64, f64), poly: &[(f64, f64); 4]) -> bool {
    let signs: Vec<f64> = (0..4)
        .map(|i| cross(poly[i], poly[(i + 1) % 4], p))
        .collect();
    signs.iter().all(|&s| s >= -1e-9) || signs.iter().all(|&s| s <= 1e-9)
}

fn segments_cross(a: (f64, f64), b: (f64, f64), c: (f64, f64), d: (f64, f64)) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Polygon-geometry overlap test independent of the separating-axis code.
pub fn polygons_overlap(a: &[(f64, f64); 4], b: &[(f64, f64); 4]) -> bool {
    a.iter().any(|&p| inside_convex(p, b))
        || b.iter().any(|&p| inside_convex(p, a))
        || (0..4)
            .any(|i| (0..4).any(|j| segments_cross(a[i], a[(i + 1) % 4], b[j], b[(j + 1) % 4])))
}

/// Valuation map of an ego proposition record.
pub fn props_val(p: &ltlplan::world::Props) -> Val {
    ltlplan::world::PROPOSITIONS
        .iter()
        .map(|&n| (n.to_string(), p.get(n).expect("known proposition")))
        .collect()
}

fn ensure(ok: bool, msg: &str) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.to_string())
    }
}

/// Random option sequences over sampled scenarios; every execution is checked.
pub fn check_random_executions(seed: u64, max_options: usize) -> Result<usize, String> {
    use ltlplan::options::{
        available_options, run_option, EpisodeState, OptionId, Outcome, SimContext,
    };
    use ltlplan::world::{sample_initial_state, RoadGeometry, ScenarioConfig};
    use rand::{Rng, SeedableRng};
    let ctx = SimContext::default();
    let d = ctx.dynamics;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w = sample_initial_state(
        &ScenarioConfig::default(),
        &RoadGeometry::default(),
        &mut rng,
    )
    .unwrap();
    let mut s = EpisodeState::new(w, &ctx).unwrap();
    let mut executed = 0;
    while s.terminal.is_none() && executed < max_options {
        let avail = available_options(&s, &ctx).unwrap();
        ensure(avail.contains(&OptionId::KeepLane), "KeepLane unavailable")?;
        let id = avail[rng.gen_range(0..avail.len())];
        let spec = ctx.spec(id);
        let run = run_option(&s, id, &ctx, true).unwrap();
        executed += 1;
        ensure(
            !run.is_empty(),
            "available option ended before its first step",
        )?;
        ensure(
            run.len() <= spec.timeout_steps,
            "option exceeded its timeout",
        )?;
        let mut u_prev = s.world.ego().state.u_prev;
        for step in &run.steps {
            let a = step.action;
            ensure(
                a.accel.abs() <= d.a_max + 1e-12 && a.steer_rate.abs() <= d.rho_max + 1e-12,
                "action out of bounds",
            )?;
            let psi = step.vehicles[0].state.cont.psi;
            ensure(
                psi.abs() <= d.psi_max + 1e-12,
                "steering angle out of bounds",
            )?;
            ensure(
                step.vehicles[0].state.u_prev == u_prev,
                "logged action not applied",
            )?;
            u_prev = a;
        }
        let own_violation = run.outcome == Outcome::LtlViolation(spec.precondition_text.clone());
        if !own_violation {
            let vals: Vec<_> = run
                .steps
                .iter()
                .map(|st| props_val(&st.valuation))
                .collect();
            let f = ltlplan::ltl::parse(&spec.precondition_text).unwrap();
            ensure(
                oracle(&f, &vals, 0) != Tri::F,
                &format!("{id} precondition violated during execution"),
            )?;
        }
        s = run.final_state;
    }
    Ok(executed)
}

/// Episode outcomes of every option sequence from `state`, explored
/// depth-first until each branch ends the episode.
pub fn all_leaf_outcomes(
    state: &ltlplan::options::EpisodeState,
    ctx: &ltlplan::options::SimContext,
) -> Vec<ltlplan::options::Outcome> {
    if let Some(o) = &state.terminal {
        return vec![o.clone()];
    }
    let mut out = Vec::new();
    for id in ltlplan::options::available_options(state, ctx).unwrap() {
        let run = ltlplan::options::run_option(state, id, ctx, false).unwrap();
        out.extend(all_leaf_outcomes(&run.final_state, ctx));
    }
    out
}
