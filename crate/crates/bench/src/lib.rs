//! Deterministic inputs shared by the benchmarks in `benches/`.

use paysuade_core::analysis::normalize_outside_option;
use paysuade_core::examples::{random_belief, random_stage};
use paysuade_core::game::{Belief, DiscountedGame, StageGame};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `count` random stage games with interior priors.
pub fn random_games(seed: u64, count: usize, states: usize, actions: usize) -> Vec<(StageGame, Belief)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g = random_stage(&mut rng, states, actions, 1.0);
            let b = random_belief(&mut rng, states, 0.05);
            (g, b)
        })
        .collect()
}

/// A random i.i.d. game whose outside option at the prior is 0.
pub fn random_iid_game(seed: u64, states: usize, actions: usize, discount: f64) -> DiscountedGame {
    let (g, b) = random_games(seed, 1, states, actions).remove(0);
    let g = normalize_outside_option(&g, &b).expect("valid game");
    DiscountedGame::iid(g, b, discount).expect("valid game")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_deterministic() {
        assert_eq!(random_games(1, 3, 2, 3), random_games(1, 3, 2, 3));
        let g = random_iid_game(2, 3, 4, 0.5);
        assert_eq!(g.stage.num_states(), 3);
    }
}
