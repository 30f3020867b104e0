use std::collections::HashMap;

use rand::seq::SliceRandom;

use super::exact::{members_of, shapley_exact, ShapleyMatrix};
use super::game::{CoalitionGame, UtilityVector};
use crate::error::{Error, Result};
use crate::rng::seeded;

pub const DEFAULT_PERMUTATIONS: usize = 2000;
pub const SAMPLED_PLAYER_CAP: usize = 128;

/// Monte Carlo Shapley estimate: mean marginal contribution over uniformly
/// drawn orderings. Coalition utilities are memoized by bitmask.
pub fn shapley_sampled<G: CoalitionGame + ?Sized>(
    game: &G,
    permutations: usize,
    seed: u64,
) -> Result<ShapleyMatrix> {
    let n = game.players();
    if permutations == 0 {
        return Err(Error::Config("permutation count must be >= 1".into()));
    }
    if n > SAMPLED_PLAYER_CAP {
        return Err(Error::TooManyPlayers {
            players: n,
            cap: SAMPLED_PLAYER_CAP,
        });
    }
    if n <= 1 {
        return shapley_exact(game, 1);
    }
    let mut memo: HashMap<u128, UtilityVector> = HashMap::new();
    let mut sums = vec![[0.0; 3]; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = seeded(seed);
    for _ in 0..permutations {
        order.shuffle(&mut rng);
        let mut mask = 0u128;
        let mut prev = UtilityVector::ZERO.to_array();
        for &i in &order {
            mask |= 1u128 << i;
            let u = match memo.get(&mask) {
                Some(u) => *u,
                None => {
                    let u = game.utility(&members_of(mask, n))?;
                    memo.insert(mask, u);
                    u
                }
            }
            .to_array();
            for d in 0..3 {
                sums[i][d] += u[d] - prev[d];
            }
            prev = u;
        }
    }
    let p = permutations as f64;
    Ok(ShapleyMatrix {
        rows: sums.into_iter().map(|r| r.map(|v| v / p)).collect(),
    })
}
