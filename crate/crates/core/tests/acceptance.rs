//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line and
//! the process exits non-zero if any fails.

use std::time::{Duration, Instant};

use paysuade_core::analysis::*;
use paysuade_core::dynamic::*;
use paysuade_core::examples::{appendix_d, appendix_d_stage, random_belief, random_stage};
use paysuade_core::game::*;
use paysuade_core::loyalty::*;
use paysuade_core::lp::{LinearProgram, Relation};
use paysuade_core::static_solver::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn run(id: usize, title: &str, budget: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let over = budget.is_some_and(|b| elapsed > b);
    let (pass, detail) = match outcome {
        Ok(d) if !over => (true, d),
        Ok(d) => (false, format!("{d}; over budget {:?}", budget.unwrap())),
        Err(e) => (false, e),
    };
    println!(
        "criterion {id} [{}] {title}: {detail} ({:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

struct Instance {
    name: String,
    game: DiscountedGame,
    solution: Solution,
}

// Criterion 1

fn appendix_d_golden() -> Check {
    let g = appendix_d_stage(1.0);
    let prior = Belief::binary(1.0 / 6.0);
    let sol = k_cavify(&g, &prior).map_err(|e| e.to_string())?;
    ensure((sol.value - 0.75).abs() <= 1e-9, format!("value {}", sol.value))?;
    let mut atoms: Vec<_> = sol.atoms.iter().filter(|a| a.weight > 1e-12).collect();
    atoms.sort_by(|a, b| a.belief.probs()[1].partial_cmp(&b.belief.probs()[1]).unwrap());
    ensure(atoms.len() == 2, format!("{} atoms", atoms.len()))?;
    ensure(atoms[0].belief.probs()[1].abs() <= 1e-12, "first atom not at 0")?;
    ensure((atoms[1].belief.probs()[1] - 1.0 / 3.0).abs() <= 1e-12, "second atom not at 1/3")?;
    ensure(atoms.iter().all(|a| (a.weight - 0.5).abs() <= 1e-9), "weights not 1/2")?;
    ensure(atoms[1].action == 1 && (atoms[1].transfer - 1.0).abs() <= 1e-9, "transfer at 1/3")?;
    let po = persuasion_only_value(&g, &prior).map_err(|e| e.to_string())?;
    ensure((po - 0.625).abs() <= 1e-9, format!("persuasion-only {po}"))?;
    let k: Vec<f64> = extremal_beliefs(&g).beliefs.iter().map(|b| b.probs()[1]).collect();
    let want = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
    ensure(
        k.len() == 4 && k.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12),
        format!("extremal set {k:?}"),
    )?;
    Ok(format!("value {:.12}, persuasion-only {po:.12}, K = {k:?}", sol.value))
}

// Criterion 2

fn vt_oracle(g: &StageGame, p: &[f64]) -> f64 {
    let (u, v, k) = (g.u(), g.v(), g.k());
    let e = |m: &[f64]| p.iter().zip(m).map(|(a, b)| a * b).sum::<f64>();
    let best = (0..g.num_actions()).map(|a| e(&v[a]) + k * e(&u[a])).fold(f64::NEG_INFINITY, f64::max);
    let outside = (0..g.num_actions()).map(|a| e(&u[a])).fold(f64::NEG_INFINITY, f64::max);
    best - k * outside
}

fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    let h = 1.0 / steps as f64;
    match n {
        2 => (0..=steps).map(|i| vec![1.0 - i as f64 * h, i as f64 * h]).collect(),
        3 => {
            let mut out = Vec::new();
            for i in 0..=steps {
                for j in 0..=steps - i {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    out.push(vec![(1.0 - a - b).max(0.0), a, b]);
                }
            }
            out
        }
        _ => unreachable!(),
    }
}

/// Concave envelope of sampled values at `prior`, as the lowest affine
/// majorant found by cutting planes.
fn grid_envelope(points: &[Vec<f64>], values: &[f64], prior: &[f64]) -> Result<f64, String> {
    let n = prior.len();
    let shift = values.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
    let mut rows: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.contains(&1.0))
        .map(|(i, _)| i)
        .collect();
    for _ in 0..500 {
        let mut lp = LinearProgram::new(prior.to_vec());
        for &i in &rows {
            lp.add_row(points[i].clone(), Relation::Ge, values[i] + shift);
        }
        let h = lp.minimize().map_err(|e| format!("oracle lp: {e:?}"))?;
        let (worst, gap) = points
            .iter()
            .zip(values)
            .enumerate()
            .map(|(i, (p, v))| (i, v + shift - (0..n).map(|s| p[s] * h.x[s]).sum::<f64>()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if gap <= 1e-12 {
            return Ok(h.value - shift);
        }
        rows.push(worst);
    }
    Err("oracle did not converge".into())
}

fn prop7_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut compared = 0;
    for i in 0..200 {
        let n = 2 + i % 2;
        let na = 2 + (i / 2) % 4;
        let k = [0.3, 1.0, 3.0][i % 3];
        let g = random_stage(&mut rng, n, na, k);
        let points = simplex_grid(n, 1000);
        let values: Vec<f64> = points.iter().map(|p| vt_oracle(&g, p)).collect();
        for _ in 0..20 {
            let prior = random_belief(&mut rng, n, 0.0);
            let want = grid_envelope(&points, &values, prior.probs())?;
            let got = k_cavify(&g, &prior).map_err(|e| e.to_string())?.value;
            worst = worst.max((got - want).abs());
            compared += 1;
        }
    }
    ensure(worst <= 5e-3, format!("max deviation {worst:.3e}"))?;
    Ok(format!("{compared} priors on 200 games, max deviation {worst:.3e}"))
}

// Criteria 3 and 4

/// Random i.i.d. game with Receiver's outside option at the prior set to 0,
/// so that promise 0 is the participation constraint.
fn random_suite_game(rng: &mut ChaCha8Rng, i: usize, discount: f64) -> DiscountedGame {
    let n = if i % 5 == 4 { 3 } else { 2 };
    let na = if n == 3 { 2 + i % 2 } else { 2 + i % 3 };
    let k = [0.3, 1.0, 3.0][i % 3];
    let stage = random_stage(rng, n, na, k);
    let prior = random_belief(rng, n, 0.05);
    let stage = normalize_outside_option(&stage, &prior).expect("valid game");
    DiscountedGame::iid(stage, prior, discount).expect("valid game")
}

fn suite_config(g: &DiscountedGame) -> SolverConfig {
    let divisions = if g.stage.num_states() == 2 { 4 } else { 2 };
    let mut config = SolverConfig::new(g, divisions, 48).expect("valid config");
    if config.belief_grid.len() > 15 {
        config = SolverConfig::new(g, 1, 48).expect("valid config");
    }
    config
}

fn check_surface(g: &DiscountedGame, s: &ValueSurface) -> Result<(), String> {
    let k = g.stage.k();
    for (i, row) in s.values.iter().enumerate() {
        let finite: Vec<(f64, f64)> =
            s.promises.iter().zip(row).filter(|(_, v)| v.is_finite()).map(|(u, v)| (*u, *v)).collect();
        let first_inf = row.iter().position(|v| !v.is_finite()).unwrap_or(row.len());
        ensure(row[first_inf..].iter().all(|v| !v.is_finite()), format!("row {i}: infeasible promises not a suffix"))?;
        let slopes: Vec<f64> = finite.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        for w in slopes.windows(2) {
            ensure(w[1] <= w[0] + 1e-7, format!("row {i}: not concave ({} then {})", w[0], w[1]))?;
        }
        for sl in &slopes {
            ensure(*sl <= 1e-6, format!("row {i}: increasing slope {sl}"))?;
            ensure(*sl >= -k - 1e-6, format!("row {i}: slope {sl} below -k"))?;
        }
    }
    Ok(())
}

fn fe_invariants(suite: &mut Vec<Instance>) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_ratio_gap = f64::NEG_INFINITY;
    let mut largest_grid = 0;
    for i in 0..50 {
        let discount = [0.5, 0.7, 0.85][i % 3];
        let g = random_suite_game(&mut rng, i, discount);
        let config = suite_config(&g);
        largest_grid = largest_grid.max(config.belief_grid.len());
        ensure(config.belief_grid.len() <= 15 && config.promise_grid.len() <= 64, "grid too large")?;
        let sol = solve(&g, &config).map_err(|e| format!("game {i}: {e}"))?;
        check_surface(&g, &sol.surface).map_err(|e| format!("game {i}: {e}"))?;
        let gap = sol.report.contraction_ratio - discount;
        worst_ratio_gap = worst_ratio_gap.max(gap);
        ensure(gap <= 1e-3, format!("game {i}: contraction ratio {} at discount {discount}", sol.report.contraction_ratio))?;
        suite.push(Instance { name: format!("random {i}"), game: g, solution: sol });
    }
    Ok(format!("50 games, belief grid <= {largest_grid}, max ratio - discount {worst_ratio_gap:.2e}"))
}

fn delta_zero(suite: &mut Vec<Instance>) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let g = random_suite_game(&mut rng, i, 0.0);
        let config = suite_config(&g);
        let sol = solve(&g, &config).map_err(|e| format!("game {i}: {e}"))?;
        let got = sol.value_at_prior(&g, 0.0).map_err(|e| e.to_string())?;
        let want = k_cavify(&g.stage, &g.prior).map_err(|e| e.to_string())?.value;
        worst = worst.max((got - want).abs());
        suite.push(Instance { name: format!("random {i} at discount 0"), game: g, solution: sol });
    }
    ensure(worst <= 1e-6, format!("max deviation {worst:.3e}"))?;
    Ok(format!("50 games, max deviation {worst:.3e}"))
}

// Criterion 5

fn extra_instances(suite: &mut Vec<Instance>) -> Result<(), String> {
    for d in [0.0, 0.5, 0.9] {
        let g = appendix_d(d);
        let config = SolverConfig::new(&g, 6, 48).map_err(|e| e.to_string())?;
        let sol = solve(&g, &config).map_err(|e| e.to_string())?;
        suite.push(Instance { name: format!("appendix D at {d}"), game: g, solution: sol });
    }
    for c in [0.5, 2.0] {
        let ride = RideGame::new(vec![c], vec![0.25], 1.0, 0.9).map_err(|e| e.to_string())?;
        let g = build_ride_game(&ride).map_err(|e| e.to_string())?;
        let config = crosscheck_config(&ride, 8, 48).map_err(|e| e.to_string())?;
        let sol = solve(&g, &config).map_err(|e| e.to_string())?;
        suite.push(Instance { name: format!("single ride c = {c}"), game: g, solution: sol });
    }
    Ok(())
}

fn backloading(suite: &[Instance]) -> Check {
    let mut paying = 0;
    let (mut slope, mut value) = (0.0f64, 0.0f64);
    for inst in suite {
        let r = verify_backloading(&inst.game, &inst.solution.surface, &inst.solution.policy)
            .map_err(|e| format!("{}: {e}", inst.name))?;
        paying += r.points.len();
        slope = slope.max(r.max_slope_residual);
        value = value.max(r.max_value_residual);
        ensure(r.passed, format!("{}: slope {:.2e}, value {:.2e}", inst.name, r.max_slope_residual, r.max_value_residual))?;
    }
    ensure(paying > 0, "no paying grid points to audit")?;
    let g = appendix_d(0.5);
    let config = SolverConfig::new(&g, 6, 48).map_err(|e| e.to_string())?;
    let sol = solve(&g, &config).map_err(|e| e.to_string())?;
    let mut bad = sol.surface.clone();
    for row in &mut bad.values {
        for (v, u) in row.iter_mut().zip(&sol.surface.promises) {
            *v -= 2.0 * u;
        }
    }
    let control = verify_backloading(&g, &bad, &sol.policy).map_err(|e| e.to_string())?;
    ensure(!control.passed, "corrupted surface passed the audit")?;
    Ok(format!(
        "{} instances, {paying} paying points, max slope residual {slope:.2e}, max value residual {value:.2e}, negative control rejected",
        suite.len()
    ))
}

// Criterion 6

fn discounted(discount: f64, flows: &[f64]) -> f64 {
    let last = flows.len() - 1;
    let head: f64 = flows[..last].iter().enumerate().map(|(t, f)| (1.0 - discount) * discount.powi(t as i32) * f).sum();
    head + discount.powi(last as i32) * flows[last]
}

fn pullback_accounting() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_cost = 0.0f64;
    let mut cases = 0;
    for case in 0..20 {
        let n = 2 + case % 2;
        let na = 2 + case % 3;
        let k = rng.random_range(0.3..3.0);
        let stage = random_stage(&mut rng, n, na, k);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect();
        let chain = MarkovChain::new(rows).map_err(|e| e.to_string())?;
        let pi = ergodic_distribution(&chain).map_err(|e| e.to_string())?;
        let g = DiscountedGame::new(stage, chain, pi.clone(), 0.8, None).map_err(|e| e.to_string())?;
        let periods = 1 + case % 4;
        let target: Vec<Vec<Vec<f64>>> = (0..periods)
            .map(|_| {
                (0..n)
                    .map(|s| {
                        let raw: Vec<f64> = (0..na).map(|_| rng.random::<f64>()).collect();
                        let t: f64 = raw.iter().sum();
                        raw.iter().map(|x| pi.probs()[s] * x / t).collect()
                    })
                    .collect()
            })
            .collect();
        let flow = |q: &Vec<Vec<f64>>, f: &dyn Fn(usize, usize) -> f64| -> f64 {
            (0..n).map(|s| (0..na).map(|a| q[s][a] * f(s, a)).sum::<f64>()).sum()
        };
        let u = g.stage.u().to_vec();
        let base = discounted(0.8, &target.iter().map(|q| flow(q, &|s, a| u[a][s])).collect::<Vec<_>>());
        let regret = |s: usize, a: usize| (0..na).map(|b| u[b][s]).fold(f64::NEG_INFINITY, f64::max) - u[a][s];
        let oracle = g.stage.k() * discounted(0.8, &target.iter().map(|q| flow(q, &regret)).collect::<Vec<_>>());
        let (strategy, cost) = pullback(&g, &target, base).map_err(|e| e.to_string())?;
        for (t, q) in target.iter().enumerate() {
            let p = strategy.period(t);
            for s in 0..n {
                for a in 0..na {
                    ensure(p.marginal[s][a] == q[s][a], "stored marginal differs")?;
                    let implied = pi.probs()[s] * p.recommendation[s][a];
                    ensure((implied - q[s][a]).abs() <= 1e-15, format!("implied marginal off by {:e}", implied - q[s][a]))?;
                }
            }
        }
        let rfi = full_info_value(&g, &g.prior);
        worst_cost = worst_cost.max((cost - g.stage.k() * (rfi - base)).abs()).max((cost - oracle).abs());
        cases += 1;
    }
    ensure(worst_cost <= 1e-9, format!("cost deviation {worst_cost:.3e}"))?;

    let g = appendix_d(0.7);
    let target = vec![vec![vec![0.5, 1.0 / 3.0, 0.0], vec![0.0, 1.0 / 6.0, 0.0]]];
    let base = 0.5 - 2.0 / 3.0 + 1.0 / 6.0;
    let (strategy, _) = pullback(&g, &target, base).map_err(|e| e.to_string())?;
    let horizon = 100_000;
    let h = pullback_playout(&g, &strategy, 11, horizon).map_err(|e| e.to_string())?;
    let mut worst_z = 0.0f64;
    for s in 0..2 {
        for a in 0..3 {
            let p = target[0][s][a];
            let freq = h.records.iter().filter(|r| r.state == s && r.atom.action == a).count() as f64 / horizon as f64;
            let sigma = (p * (1.0 - p) / horizon as f64).sqrt();
            if sigma > 0.0 {
                worst_z = worst_z.max((freq - p).abs() / sigma);
            } else {
                ensure(freq == p, "zero-probability cell observed")?;
            }
        }
    }
    ensure(worst_z <= 3.0, format!("playout frequency {worst_z:.2} sigma from target"))?;
    Ok(format!("{cases} strategies, cost deviation {worst_cost:.2e}, playout max |z| {worst_z:.2}"))
}

// Criterion 7

fn loyalty_reproduction() -> Check {
    let fig = RideGame::new(vec![0.5, 0.75, 1.25], vec![0.1, 0.2, 0.3], 1.0, 0.9).map_err(|e| e.to_string())?;
    let slopes: Vec<f64> = pareto_frontier(&fig).segments.iter().map(|s| s.slope).collect();
    ensure(slopes == [-0.5, -0.75, -1.0], format!("frontier slopes {slopes:?}"))?;

    let cheap = RideGame::new(vec![0.5], vec![0.25], 1.0, 0.9).map_err(|e| e.to_string())?;
    let config = crosscheck_config(&cheap, 8, 48).map_err(|e| e.to_string())?;
    let r = crosscheck(&cheap, &config).map_err(|e| e.to_string())?;
    ensure(r.max_slope_deviation <= 1e-2, format!("cheap ride slope deviation {:.3e}", r.max_slope_deviation))?;
    let value_dev = r.value_deviation.unwrap_or(f64::INFINITY);
    ensure(value_dev <= 1e-4, format!("cheap ride value deviation {value_dev:.3e}"))?;
    let dear = RideGame::new(vec![2.0], vec![0.25], 1.0, 0.9).map_err(|e| e.to_string())?;
    let config = crosscheck_config(&dear, 8, 48).map_err(|e| e.to_string())?;
    let rd = crosscheck(&dear, &config).map_err(|e| e.to_string())?;
    ensure(rd.max_slope_deviation <= 1e-2, format!("dear ride slope deviation {:.3e}", rd.max_slope_deviation))?;

    let mut periods = 0;
    for (ride, horizon) in [(&fig, 20_000), (&dear, 100_000)] {
        for seed in 0..5 {
            let h = simulate_loyalty(ride, seed, horizon).map_err(|e| e.to_string())?;
            ensure(h.good_rides_declined() == 0, "good ride declined")?;
            ensure(h.promotions_monotone(ride), "promotion times out of order")?;
            ensure(h.transfers_before_promotion() == 0, "transfer before promotion")?;
            periods += h.len();
        }
    }
    Ok(format!(
        "slopes {slopes:?}, crosscheck slope deviation {:.2e}/{:.2e}, value deviation {value_dev:.2e}, {periods} simulated periods clean",
        r.max_slope_deviation, rd.max_slope_deviation
    ))
}

// Criterion 8

fn structural_properties(suite: &[Instance]) -> Check {
    let mut audited = 0;
    let mut boundary = 0;
    let mut capped = 0;
    for inst in suite {
        let f = audit_feasible_actions(&inst.game, &inst.solution.policy);
        ensure(f.passed(), format!("{}: {:?}", inst.name, f.violations.first()))?;
        let e = audit_effectiveness(&inst.game, &inst.solution.policy);
        ensure(e.passed(), format!("{}: {:?}", inst.name, e.violations.first()))?;
        audited += f.checked + e.checked;
        boundary += e.boundary_hits;
        capped += f.capped;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut midpoints, mut violations) = (0usize, 0usize);
    let mut game_index = 0u64;
    while midpoints < 10_000 {
        let n = 2 + (game_index % 2) as usize;
        let g = random_stage(&mut rng, n, 2 + (game_index % 4) as usize, 1.0);
        let r = effectiveness_region_check(&g, &[0.3, 1.0, 3.0], 400, game_index);
        midpoints += r.midpoints.iter().sum::<usize>();
        violations += r.violations();
        game_index += 1;
        ensure(game_index < 500, "regions too sparse to sample")?;
    }
    ensure(violations == 0, format!("{violations} region violations"))?;

    let mut worst_static = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.random_range(2..4);
        let k = [0.3, 1.0, 3.0][rng.random_range(0..3)];
        let na = rng.random_range(2..6);
        let stage = random_stage(&mut rng, n, na, k);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|x| x / s).collect()
            })
            .collect();
        let chain = MarkovChain::new(rows).map_err(|e| e.to_string())?;
        let pi = ergodic_distribution(&chain).map_err(|e| e.to_string())?;
        let g = DiscountedGame::new(stage.clone(), chain, pi.clone(), 0.9, None).map_err(|e| e.to_string())?;
        let b = ergodic_bound(&g).map_err(|e| e.to_string())?;
        worst_static = worst_static.min(b.value - k_cavify(&stage, &pi).map_err(|e| e.to_string())?.value);
    }
    ensure(worst_static >= -1e-9, format!("ergodic bound below static value by {:.3e}", -worst_static))?;

    let mut worst_gap = f64::NEG_INFINITY;
    for i in 0..5 {
        let prior = random_belief(&mut rng, 2, 0.05);
        let stage = random_stage(&mut rng, 2, 2 + i % 2, [0.3, 1.0, 3.0][i % 3]);
        let stage = normalize_outside_option(&stage, &prior).map_err(|e| e.to_string())?;
        let g = DiscountedGame::iid(stage, prior, 0.99).map_err(|e| e.to_string())?;
        let mut config = SolverConfig::new(&g, 2, 32).map_err(|e| e.to_string())?;
        config.tolerance = 1e-7;
        config.max_iterations = 10_000;
        let sol = solve(&g, &config).map_err(|e| e.to_string())?;
        let v = sol.value_at_prior(&g, 0.0).map_err(|e| e.to_string())?;
        let bound = ergodic_bound(&g).map_err(|e| e.to_string())?.value;
        let flat: Vec<f64> = g.stage.v().iter().flatten().copied().collect();
        let range = flat.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b)) - flat.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        let gap = (bound - v) / range;
        worst_gap = worst_gap.max(gap);
        ensure(gap <= 0.05, format!("instance {i}: bound {bound} exceeds V {v} by {:.1}% of range", 100.0 * gap))?;
    }
    Ok(format!(
        "{audited} audited atoms ({boundary} boundary hits, {capped} capped points skipped), {midpoints} region midpoints, ergodic - static >= {worst_static:.2e}, (bound - V)/range <= {worst_gap:.2e}"
    ))
}

fn main() {
    let mut results = Vec::new();
    results.push(run(1, "appendix D golden values", Some(Duration::from_secs(1)), appendix_d_golden));
    results.push(run(2, "transfer-augmented concavification oracle", Some(Duration::from_secs(120)), prop7_oracle));
    let mut suite = Vec::new();
    results.push(run(3, "value iteration invariants", Some(Duration::from_secs(300)), || fe_invariants(&mut suite)));
    results.push(run(4, "myopic reduction", None, || delta_zero(&mut suite)));
    let extra = extra_instances(&mut suite);
    results.push(run(5, "backloading audit", None, || {
        extra.clone()?;
        backloading(&suite)
    }));
    results.push(run(6, "pullback accounting", None, pullback_accounting));
    results.push(run(7, "loyalty reproduction", Some(Duration::from_secs(120)), loyalty_reproduction));
    results.push(run(8, "structural property suite", None, || structural_properties(&suite)));
    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
