use serde::{Deserialize, Serialize};

use super::game::{CoalitionGame, UtilityVector};
use crate::error::{Error, Result};

pub const DEFAULT_EXACT_CAP: usize = 12;

/// Per-node Shapley 3-vectors; row `i` belongs to node `i`, columns are the
/// accuracy, energy and bandwidth axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShapleyMatrix {
    pub rows: Vec<[f64; 3]>,
}

impl ShapleyMatrix {
    pub fn zeros(n: usize) -> Self {
        ShapleyMatrix {
            rows: vec![[0.0; 3]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[d]).collect()
    }

    pub fn max_abs_diff(&self, other: &ShapleyMatrix) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn members_of(mask: u128, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask >> i & 1 == 1).collect()
}

/// `1 / (n * C(n-1, s))`, the weight of a coalition of size `s` in the
/// Shapley sum over `n` players.
pub(crate) fn coalition_weight(n: usize, s: usize) -> f64 {
    let k = s.min(n - 1 - s);
    let mut binom = 1.0f64;
    for j in 0..k {
        binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
    }
    1.0 / (n as f64 * binom.round())
}

/// Exact Shapley values by enumerating all `2^n` coalitions once.
///
/// Each node's weighted marginal terms are summed in ascending order, so
/// players with interchangeable utilities get bitwise-identical rows.
pub fn shapley_exact<G: CoalitionGame + ?Sized>(game: &G, cap: usize) -> Result<ShapleyMatrix> {
    let n = game.players();
    if n > cap || n > 30 {
        return Err(Error::TooManyPlayers {
            players: n,
            cap: cap.min(30),
        });
    }
    if n == 0 {
        return Ok(ShapleyMatrix::zeros(0));
    }
    let full = 1usize << n;
    let mut table = Vec::with_capacity(full);
    for mask in 0..full {
        table.push(if mask == 0 {
            UtilityVector::ZERO
        } else {
            game.utility(&members_of(mask as u128, n))?
        });
    }
    let weights: Vec<f64> = (0..n).map(|s| coalition_weight(n, s)).collect();
    let mut rows = Vec::with_capacity(n);
    let mut terms: [Vec<f64>; 3] = Default::default();
    for i in 0..n {
        let bit = 1usize << i;
        terms.iter_mut().for_each(Vec::clear);
        for mask in (0..full).filter(|m| m & bit == 0) {
            let w = weights[mask.count_ones() as usize];
            let (with, without) = (table[mask | bit].to_array(), table[mask].to_array());
            for d in 0..3 {
                terms[d].push(w * (with[d] - without[d]));
            }
        }
        let mut row = [0.0; 3];
        for d in 0..3 {
            terms[d].sort_unstable_by(f64::total_cmp);
            row[d] = terms[d].iter().sum();
        }
        rows.push(row);
    }
    Ok(ShapleyMatrix { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::CoalitionInputs;

    #[test]
    fn weights_sum_to_one_over_coalitions() {
        for n in 1..10usize {
            let mut total = 0.0;
            for s in 0..n {
                let count = (0..s).fold(1.0, |c, j| c * (n - 1 - j) as f64 / (j + 1) as f64);
                total += count * coalition_weight(n, s);
            }
            assert!((total - 1.0).abs() < 1e-12, "{n}: {total}");
        }
    }

    #[test]
    fn additive_bandwidth_gives_singletons() {
        let g = CoalitionInputs {
            accuracy: None,
            energy_j: vec![1.0; 3],
            bandwidth_kbps: vec![10.0, 20.0, 70.0],
        };
        let m = shapley_exact(&g, DEFAULT_EXACT_CAP).unwrap();
        assert_eq!(m.column(2), vec![10.0, 20.0, 70.0]);
        assert_eq!(m.column(1), vec![1.0, 1.0, 1.0]);
        assert_eq!(m.column(0), vec![0.0; 3]);
    }

    #[test]
    fn dummy_node_gets_zero() {
        let g = CoalitionInputs {
            accuracy: None,
            energy_j: vec![2.0, f64::INFINITY, 5.0],
            bandwidth_kbps: vec![3.0, 0.0, 9.0],
        };
        assert_eq!(shapley_exact(&g, 12).unwrap().rows[1], [0.0; 3]);
    }

    #[test]
    fn cap_is_enforced() {
        let g = CoalitionInputs {
            accuracy: None,
            energy_j: vec![1.0; 13],
            bandwidth_kbps: vec![1.0; 13],
        };
        assert!(matches!(
            shapley_exact(&g, 12),
            Err(Error::TooManyPlayers {
                players: 13,
                cap: 12
            })
        ));
    }
}
