use paysuade_core::analysis::{
    benefits_from_dynamics, effectiveness_region_check, ergodic_bound, feasibly_optimal_set, is_incentivizable_static,
    is_nontrivial,
};
use paysuade_core::dynamic::{playout, solve, verify_backloading, Solution, SolverConfig};
use paysuade_core::game::{bayes_plausible, ergodic_distribution, Belief, DiscountedGame, GameSpec};
use paysuade_core::loyalty::{pareto_frontier, simulate_loyalty, tier_schedule, RideGame};
use paysuade_core::static_solver::{envelope_table, k_cavify, persuasion_only_value};
use serde_json::{json, Value};

use crate::output::{num, Check, OutDir};
use crate::{Command, Common, Failure};

type Outcome = Result<(Value, Vec<Check>), Failure>;

const DEFAULT_PROMISE_POINTS: usize = 48;
const SHAPE_TOL: f64 = 1e-6;

pub fn run(command: Command, opts: &Common, input: Option<&str>, out: &OutDir) -> Outcome {
    if command == Command::Loyalty {
        return loyalty(opts, input, out);
    }
    let text = input.ok_or_else(|| Failure::Parse("--input is required".into()))?;
    let game = load_game(text, opts)?;
    match command {
        Command::StaticSolve => static_solve(&game, opts, out),
        Command::DynamicSolve => dynamic_solve(&game, opts, out),
        Command::Analyze => analyze(&game, opts, out),
        Command::ErgodicBound => ergodic(&game, out),
        Command::VerifyBackloading => backloading(&game, opts, out),
        Command::Playout => simulate(&game, opts, out),
        Command::Loyalty => unreachable!(),
    }
}

fn load_game(text: &str, opts: &Common) -> Result<DiscountedGame, Failure> {
    let mut game = GameSpec::from_json(text)?.into_game()?;
    if let Some(k) = opts.k {
        game = game.with_stage(game.stage.with_k(k)?)?;
    }
    if let Some(d) = opts.delta {
        game = game.with_discount(d)?;
    }
    Ok(game)
}

fn solver_config(game: &DiscountedGame, opts: &Common) -> Result<SolverConfig, Failure> {
    let divisions = opts.belief_grid.unwrap_or(match game.stage.num_states() {
        2 => 8,
        3 => 3,
        _ => 1,
    });
    let mut config = SolverConfig::new(game, divisions, opts.promise_grid.unwrap_or(DEFAULT_PROMISE_POINTS))?;
    if let Some(tol) = opts.tol {
        config.tolerance = tol;
    }
    if let Some(it) = opts.max_iter {
        config.max_iterations = it;
    }
    Ok(config)
}

fn belief_columns(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("p{s}")).collect()
}

fn static_solve(game: &DiscountedGame, opts: &Common, out: &OutDir) -> Outcome {
    let stage = &game.stage;
    let sol = k_cavify(stage, &game.prior)?;
    let persuasion = persuasion_only_value(stage, &game.prior)?;
    out.json("static.json", &sol)?;

    let n = stage.num_states();
    let mut header = belief_columns(n);
    header.extend(["v0", "vt", "cav_v0", "cav_vt"].map(String::from));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = envelope_table(stage, opts.belief_grid.unwrap_or(if n == 2 { 100 } else { 20 }))?;
    out.csv(
        "envelope.csv",
        &header,
        rows.iter().map(|r| {
            let mut row: Vec<String> = r.belief.probs().iter().map(|p| num(*p)).collect();
            row.extend([r.v0, r.vt, r.cav_v0, r.cav_vt].map(num));
            row
        }),
    )?;

    let worst_obedience = sol
        .atoms
        .iter()
        .map(|a| {
            let eu = |b: usize| (0..n).map(|s| a.belief.probs()[s] * stage.u()[b][s]).sum::<f64>();
            let best = (0..stage.num_actions()).map(eu).fold(f64::NEG_INFINITY, f64::max);
            eu(a.action) + a.transfer - best
        })
        .fold(f64::INFINITY, f64::min);
    let checks = vec![
        Check::new("bayes_plausible", bayes_plausible(&sol.experiment, &game.prior)),
        Check::with_detail("obedience", worst_obedience >= -1e-9, format!("min slack {worst_obedience:e}")),
        Check::new("transfers_weakly_help", sol.value >= persuasion - 1e-9),
    ];
    Ok((json!({ "value": sol.value, "persuasion_only_value": persuasion, "atoms": sol.atoms.len() }), checks))
}

fn solve_game(game: &DiscountedGame, opts: &Common) -> Result<(SolverConfig, Solution), Failure> {
    let config = solver_config(game, opts)?;
    let sol = solve(game, &config)?;
    Ok((config, sol))
}

fn shape_checks(game: &DiscountedGame, sol: &Solution) -> Vec<Check> {
    let shape = sol.surface.shape();
    vec![
        Check::with_detail(
            "surface_shape",
            shape.is_valid(game.stage.k(), SHAPE_TOL),
            format!("slopes in [{}, {}], max convexity {:e}", shape.min_slope, shape.max_slope, shape.max_convexity),
        ),
        Check::with_detail(
            "contraction",
            sol.report.contraction_ratio <= game.discount + 1e-3,
            format!("ratio {}", sol.report.contraction_ratio),
        ),
    ]
}

fn dynamic_solve(game: &DiscountedGame, opts: &Common, out: &OutDir) -> Outcome {
    let (config, sol) = solve_game(game, opts)?;
    let s = &sol.surface;
    out.csv(
        "surface.csv",
        &["belief_id", "promise", "value"],
        s.values.iter().enumerate().flat_map(|(i, row)| {
            s.promises.iter().zip(row).map(move |(u, v)| vec![i.to_string(), num(*u), num(*v)])
        }),
    )?;
    let points: Vec<Value> = sol
        .policy
        .rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().enumerate().map(move |(m, atoms)| json!({ "belief_id": i, "promise_id": m, "atoms": atoms }))
        })
        .collect();
    out.json(
        "policy.json",
        &json!({ "beliefs": sol.policy.beliefs, "promises": sol.policy.promises, "points": points }),
    )?;
    out.csv(
        "convergence.csv",
        &["iteration", "delta"],
        sol.report.deltas.iter().enumerate().map(|(i, d)| vec![(i + 1).to_string(), num(*d)]),
    )?;
    let headline = json!({
        "value_at_prior": sol.value_at_prior(game, 0.0)?,
        "iterations": sol.report.iterations,
        "contraction_ratio": sol.report.contraction_ratio,
        "interpolation_error": sol.report.interpolation_error,
        "belief_grid": config.belief_grid.len(),
        "promise_grid": config.promise_grid.len(),
    });
    Ok((headline, shape_checks(game, &sol)))
}

fn ergodic_json(game: &DiscountedGame) -> Result<Value, Failure> {
    let b = ergodic_bound(game)?;
    Ok(json!({ "value": b.value, "gamma": b.gamma, "m": b.payment }))
}

fn analyze(game: &DiscountedGame, opts: &Common, out: &OutDir) -> Outcome {
    let stage = &game.stage;
    let k = stage.k();
    let (_, sol) = solve_game(game, opts)?;
    let region = effectiveness_region_check(stage, &[0.5 * k, k, 2.0 * k], 1000, opts.seed);
    let ergodic = ergodic_json(game).unwrap_or(Value::Null);
    let report = json!({
        "feasibly_optimal": feasibly_optimal_set(stage),
        "nontrivial": is_nontrivial(game, &sol.surface)?,
        "incentivizable_static": is_incentivizable_static(stage, &game.prior)?,
        "benefits_from_dynamics": benefits_from_dynamics(stage, &game.prior)?,
        "ergodic_bound": ergodic,
        "effectiveness_region": { "k": region.k_values, "violations": region.violations() },
    });
    out.json("analysis.json", &report)?;
    let checks = vec![Check::with_detail(
        "effectiveness_region",
        region.violations() == 0,
        format!("{} violations", region.violations()),
    )];
    Ok((report, checks))
}

fn ergodic(game: &DiscountedGame, out: &OutDir) -> Outcome {
    let report = ergodic_json(game)?;
    out.json("ergodic.json", &report)?;
    let pi = ergodic_distribution(&game.chain)?;
    let static_value = k_cavify(&game.stage, &pi)?.value;
    let value = report["value"].as_f64().unwrap_or(f64::NAN);
    let checks = vec![Check::with_detail(
        "beats_static_at_stationarity",
        value >= static_value - 1e-9,
        format!("bound {value}, static {static_value}"),
    )];
    Ok((json!({ "value": value, "static_value": static_value, "m": report["m"] }), checks))
}

fn backloading(game: &DiscountedGame, opts: &Common, out: &OutDir) -> Outcome {
    let (_, sol) = solve_game(game, opts)?;
    let report = verify_backloading(game, &sol.surface, &sol.policy)?;
    out.json("backloading.json", &report)?;
    let headline = json!({
        "paying_points": report.points.len(),
        "max_slope_residual": report.max_slope_residual,
        "max_value_residual": report.max_value_residual,
    });
    let checks = vec![Check::new("backloading", report.passed)];
    Ok((headline, checks))
}

fn simulate(game: &DiscountedGame, opts: &Common, out: &OutDir) -> Outcome {
    let (_, sol) = solve_game(game, opts)?;
    let h = playout(game, &sol.policy, opts.seed, opts.horizon)?;
    let belief = |b: &Belief| b.probs().iter().map(|p| num(*p)).collect::<Vec<_>>().join(" ");
    out.csv(
        "history.csv",
        &[
            "period",
            "belief",
            "promise",
            "state",
            "action",
            "transfer",
            "next_promise",
            "sender_flow",
            "receiver_flow",
            "sender_cumulative",
            "receiver_cumulative",
            "obedience_residual",
        ],
        h.records.iter().map(|r| {
            vec![
                r.period.to_string(),
                belief(&r.prior),
                num(r.promise),
                r.state.to_string(),
                game.stage.actions()[r.atom.action].clone(),
                num(r.atom.transfer),
                num(r.atom.promise),
                num(r.sender_flow),
                num(r.receiver_flow),
                num(r.sender_cumulative),
                num(r.receiver_cumulative),
                num(r.obedience_residual),
            ]
        }),
    )?;
    let min_residual = if h.is_empty() { 0.0 } else { h.min_obedience_residual() };
    let report = json!({
        "periods": h.len(),
        "mean_sender_flow": if h.is_empty() { 0.0 } else { h.mean_sender_flow() },
        "mean_receiver_flow": if h.is_empty() { 0.0 } else { h.mean_receiver_flow() },
        "sender_total": h.sender_total(),
        "receiver_total": h.receiver_total(),
        "min_obedience_residual": min_residual,
        "max_snap_error": h.max_snap_error(),
    });
    out.json("playout.json", &report)?;
    let checks = vec![Check::with_detail("obedience", min_residual >= -1e-6, format!("min residual {min_residual:e}"))];
    Ok((report, checks))
}

fn load_ride(opts: &Common, input: Option<&str>) -> Result<RideGame, Failure> {
    let mut ride = match input {
        Some(text) => serde_json::from_str::<RideGame>(text).map_err(|e| Failure::Parse(e.to_string()))?,
        None => {
            let c = opts.c.clone().ok_or_else(|| Failure::Parse("loyalty needs --input or --c".into()))?;
            let mu0 = opts.mu0.clone().ok_or_else(|| Failure::Parse("loyalty needs --mu0".into()))?;
            RideGame { n: c.len(), c, mu0, k: 1.0, discount: 0.9 }
        }
    };
    if let Some(c) = &opts.c {
        ride.c = c.clone();
    }
    if let Some(mu0) = &opts.mu0 {
        ride.mu0 = mu0.clone();
    }
    if let Some(k) = opts.k {
        ride.k = k;
    }
    if let Some(d) = opts.delta {
        ride.discount = d;
    }
    ride.n = opts.n.unwrap_or(ride.c.len());
    ride.validate()?;
    Ok(ride)
}

fn loyalty(opts: &Common, input: Option<&str>, out: &OutDir) -> Outcome {
    let ride = load_ride(opts, input)?;
    let frontier = pareto_frontier(&ride);
    out.csv(
        "frontier.csv",
        &["surplus", "value", "slope"],
        frontier.knots().iter().map(|(x, y)| vec![num(*x), num(*y), num(frontier.slope(*x))]),
    )?;
    let schedule = tier_schedule(&ride);
    out.json("schedule.json", &json!({ "frontier": frontier, "schedule": schedule }))?;

    let mut checks = Vec::new();
    let mut headline = json!({
        "origin": frontier.origin,
        "slopes": frontier.segments.iter().map(|s| s.slope).collect::<Vec<_>>(),
        "knots": frontier.knots().len(),
        "thresholds": schedule.thresholds,
        "no_dynamic_incentives": schedule.no_dynamic_incentives,
    });
    if ride.c.iter().any(|c| *c > ride.k) {
        let h = simulate_loyalty(&ride, opts.seed, opts.horizon)?;
        let mut header = vec!["period".to_string(), "ledger".to_string()];
        for i in 0..ride.n {
            for col in ["good", "belief", "accepted", "transfer", "promoted"] {
                header.push(format!("{col}_{i}"));
            }
        }
        header.extend(["promotions", "sender_flow", "receiver_flow"].map(String::from));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        out.csv(
            "history.csv",
            &header,
            h.records.iter().map(|r| {
                let mut row = vec![r.period.to_string(), num(r.ledger)];
                for i in 0..ride.n {
                    row.extend([
                        u8::from(r.good[i]).to_string(),
                        num(r.beliefs[i]),
                        u8::from(r.accepted[i]).to_string(),
                        num(r.transfers[i]),
                        u8::from(r.promoted[i]).to_string(),
                    ]);
                }
                let promoted_now: Vec<String> = (0..ride.n)
                    .filter(|&i| h.promotion_times[i] == Some(r.period))
                    .map(|i| i.to_string())
                    .collect();
                row.extend([promoted_now.join(" "), num(r.sender_flow), num(r.receiver_flow)]);
                row
            }),
        )?;
        headline["promotion_times"] = json!(h.promotion_times);
        checks.push(Check::new("good_rides_accepted", h.good_rides_declined() == 0));
        checks.push(Check::new("promotions_monotone", h.promotions_monotone(&ride)));
        checks.push(Check::new("transfers_after_promotion", h.transfers_before_promotion() == 0));
    }
    Ok((headline, checks))
}
