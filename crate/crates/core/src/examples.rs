//! Small named games used by tests, benches and the command line.

use rand::Rng;

use crate::game::{Belief, DiscountedGame, StageGame};

/// Two states, three actions: `a0` matches `θ0`, `a1` is Sender's favorite,
/// `a2` is a safe middle option.
pub fn appendix_d_stage(k: f64) -> StageGame {
    StageGame::new(
        vec!["theta0".into(), "theta1".into()],
        vec!["a0".into(), "a1".into(), "a2".into()],
        vec![vec![1.0, -2.0], vec![-2.0, 1.0], vec![0.0, 0.0]],
        vec![vec![0.0, 0.0], vec![2.5, 2.5], vec![-0.5, -0.5]],
        k,
    )
    .expect("valid game")
}

/// [`appendix_d_stage`] with `k = 1`, i.i.d. states and `P(θ1) = 1/6`.
pub fn appendix_d(discount: f64) -> DiscountedGame {
    DiscountedGame::iid(appendix_d_stage(1.0), Belief::binary(1.0 / 6.0), discount).expect("valid game")
}

/// `u(a,θ) = v(a,θ) = 1{a = θ}` on two states.
pub fn aligned_binary(k: f64) -> StageGame {
    let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    StageGame::from_matrices(eye.clone(), eye, k).expect("valid game")
}

/// Prosecutor and judge: the judge wants to match the state, the prosecutor
/// always wants a conviction.
pub fn prosecutor_judge(k: f64) -> StageGame {
    StageGame::new(
        vec!["innocent".into(), "guilty".into()],
        vec!["acquit".into(), "convict".into()],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.0, 0.0], vec![1.0, 1.0]],
        k,
    )
    .expect("valid game")
}

/// Random game with payoffs uniform in `[-2, 2]`.
pub fn random_stage<R: Rng>(rng: &mut R, states: usize, actions: usize, k: f64) -> StageGame {
    let draw = |rng: &mut R| -> Vec<Vec<f64>> {
        (0..actions)
            .map(|_| (0..states).map(|_| rng.random_range(-2.0..=2.0)).collect())
            .collect()
    };
    let u = draw(rng);
    let v = draw(rng);
    StageGame::from_matrices(u, v, k).expect("valid game")
}

/// Random interior belief, bounded away from the faces by `margin`.
pub fn random_belief<R: Rng>(rng: &mut R, states: usize, margin: f64) -> Belief {
    let raw: Vec<f64> = (0..states).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = raw.iter().sum();
    let n = states as f64;
    Belief::normalized(raw.iter().map(|x| margin + (1.0 - n * margin) * x / s).collect())
}
