use std::io::Write;

use serde::{Deserialize, Serialize};

use super::exact::{shapley_exact, ShapleyMatrix, DEFAULT_EXACT_CAP};
use super::game::{CoalitionGame, DimensionMask};
use super::sampled::{shapley_sampled, DEFAULT_PERMUTATIONS};
use crate::error::{Error, Result};

/// How evaluator matrices are merged when they may disagree.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsensusOrder {
    /// Each evaluator normalizes and collapses its own matrix; the scalars
    /// are then averaged.
    #[default]
    NormalizeFirst,
    /// Raw matrices are averaged first, then normalized and collapsed once.
    AverageRawFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapleyConfig {
    pub exact_cap: usize,
    /// Orderings drawn when the player count exceeds `exact_cap`.
    pub permutations: usize,
    pub order: ConsensusOrder,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        ShapleyConfig {
            exact_cap: DEFAULT_EXACT_CAP,
            permutations: DEFAULT_PERMUTATIONS,
            order: ConsensusOrder::default(),
        }
    }
}

impl ShapleyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::Config("shapley.permutations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exact enumeration up to the cap, sampled estimate beyond it.
pub fn shapley_auto<G: CoalitionGame + ?Sized>(
    game: &G,
    cfg: &ShapleyConfig,
    seed: u64,
) -> Result<ShapleyMatrix> {
    if game.players() <= cfg.exact_cap {
        shapley_exact(game, cfg.exact_cap)
    } else {
        shapley_sampled(game, cfg.permutations, seed)
    }
}

/// Divides each column by its l1 norm; all-zero columns stay zero.
pub fn normalize(m: &ShapleyMatrix) -> ShapleyMatrix {
    let mut out = m.clone();
    for d in 0..3 {
        let l1: f64 = m.rows.iter().map(|r| r[d].abs()).sum();
        if l1 > 0.0 {
            out.rows.iter_mut().for_each(|r| r[d] /= l1);
        }
    }
    out
}

/// Mean of the included axes per node.
pub fn collapse(m: &ShapleyMatrix, mask: DimensionMask) -> Result<Vec<f64>> {
    mask.validate()?;
    let on = mask.as_array();
    let k = mask.count() as f64;
    Ok(m.rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(on)
                .filter(|(_, o)| *o)
                .map(|(v, _)| v)
                .sum::<f64>()
                / k
        })
        .collect())
}

/// Row means of a square matrix given as evaluator columns.
pub fn consensus_average(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = columns
        .first()
        .ok_or(Error::Empty("evaluator columns"))?
        .len();
    if columns.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: columns.len(),
        });
    }
    if let Some(c) = columns.iter().find(|c| c.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: c.len(),
        });
    }
    let k = columns.len() as f64;
    // Offsetting by the first column keeps the mean of agreeing evaluators exact.
    Ok((0..n)
        .map(|i| {
            let base = columns[0][i];
            base + columns.iter().map(|c| c[i] - base).sum::<f64>() / k
        })
        .collect())
}

fn mean_matrix(ms: &[ShapleyMatrix]) -> ShapleyMatrix {
    let n = ms[0].len();
    let k = ms.len() as f64;
    let rows = (0..n)
        .map(|i| std::array::from_fn(|d| ms.iter().map(|m| m.rows[i][d]).sum::<f64>() / k))
        .collect();
    ShapleyMatrix { rows }
}

/// Every stage of the contribution pipeline for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyReport {
    /// One raw matrix per evaluator.
    pub raw: Vec<ShapleyMatrix>,
    pub normalized: Vec<ShapleyMatrix>,
    /// Collapsed scalars per evaluator.
    pub collapsed: Vec<Vec<f64>>,
    /// Square matrix, `consensus[i][j]` is evaluator `j`'s score of node `i`.
    pub consensus: Vec<Vec<f64>>,
    /// Final contribution of each node.
    pub contribution: Vec<f64>,
    pub order: ConsensusOrder,
    pub mask: DimensionMask,
}

impl ShapleyReport {
    /// Builds the report from each evaluator's raw matrix.
    pub fn from_evaluators(
        raw: Vec<ShapleyMatrix>,
        mask: DimensionMask,
        order: ConsensusOrder,
    ) -> Result<Self> {
        let n = raw.first().ok_or(Error::Empty("evaluator matrices"))?.len();
        if raw.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: raw.len(),
            });
        }
        if let Some(m) = raw.iter().find(|m| m.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: m.len(),
            });
        }
        let normalized: Vec<ShapleyMatrix> = raw.iter().map(normalize).collect();
        let collapsed = normalized
            .iter()
            .map(|m| collapse(m, mask))
            .collect::<Result<Vec<_>>>()?;
        let columns = match order {
            ConsensusOrder::NormalizeFirst => collapsed.clone(),
            ConsensusOrder::AverageRawFirst => {
                vec![collapse(&normalize(&mean_matrix(&raw)), mask)?; n]
            }
        };
        let contribution = consensus_average(&columns)?;
        let consensus = (0..n)
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        Ok(ShapleyReport {
            raw,
            normalized,
            collapsed,
            consensus,
            contribution,
            order,
            mask,
        })
    }

    /// Honest evaluators all see identical inputs, so the matrix is
    /// computed once and shared by every evaluator.
    pub fn honest<G: CoalitionGame + ?Sized>(
        game: &G,
        cfg: &ShapleyConfig,
        mask: DimensionMask,
        seed: u64,
    ) -> Result<Self> {
        let n = game.players();
        if n == 0 {
            return Err(Error::Empty("node set"));
        }
        let m = shapley_auto(game, cfg, seed)?;
        Self::from_evaluators(vec![m; n], mask, cfg.order)
    }

    pub fn nodes(&self) -> usize {
        self.contribution.len()
    }

    /// Contribution vector recomputed with a different axis mask.
    pub fn contribution_with_mask(&self, mask: DimensionMask) -> Result<Vec<f64>> {
        match self.order {
            ConsensusOrder::NormalizeFirst => {
                let cols = self
                    .normalized
                    .iter()
                    .map(|m| collapse(m, mask))
                    .collect::<Result<Vec<_>>>()?;
                consensus_average(&cols)
            }
            ConsensusOrder::AverageRawFirst => collapse(&normalize(&mean_matrix(&self.raw)), mask),
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }

    /// `node_id,contribution` rows.
    pub fn write_contribution_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["node_id", "contribution"])?;
        for (i, s) in self.contribution.iter().enumerate() {
            csv.write_record([i.to_string(), s.to_string()])?;
        }
        csv.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapley::CoalitionInputs;

    fn mat(rows: &[[f64; 3]]) -> ShapleyMatrix {
        ShapleyMatrix {
            rows: rows.to_vec(),
        }
    }

    #[test]
    fn normalize_examples() {
        let n = normalize(&mat(&[[1.0, 0.0, -1.0], [3.0, 0.0, 3.0]]));
        assert_eq!(n.column(0), vec![0.25, 0.75]);
        assert_eq!(n.column(1), vec![0.0, 0.0]);
        assert_eq!(n.column(2), vec![-0.25, 0.75]);
        assert_eq!(n.column(2).iter().map(|v| v.abs()).sum::<f64>(), 1.0);
    }

    #[test]
    fn collapse_examples() {
        let c = collapse(
            &mat(&[[0.3, 0.6, 0.9], [0.0, 0.0, 0.0]]),
            DimensionMask::FULL,
        )
        .unwrap();
        assert!((c[0] - 0.6).abs() < 1e-15);
        assert_eq!(c[1], 0.0);
        let c = collapse(&mat(&[[0.3, 0.6, 0.9]]), DimensionMask::ACCURACY_BANDWIDTH).unwrap();
        assert!((c[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn consensus_examples() {
        let s = consensus_average(&[vec![0.2, 0.8], vec![0.4, 0.6]]).unwrap();
        assert!((s[0] - 0.3).abs() < 1e-15 && (s[1] - 0.7).abs() < 1e-15);
        assert_eq!(
            consensus_average(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(consensus_average(&[vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn honest_report_matches_single_evaluator() {
        let g = CoalitionInputs {
            accuracy: None,
            energy_j: vec![1.0, 2.0, 4.0],
            bandwidth_kbps: vec![5.0, 3.0, 2.0],
        };
        let r = ShapleyReport::honest(
            &g,
            &ShapleyConfig::default(),
            DimensionMask::ENERGY_BANDWIDTH,
            0,
        )
        .unwrap();
        let single = collapse(
            &normalize(&shapley_exact(&g, 12).unwrap()),
            DimensionMask::ENERGY_BANDWIDTH,
        )
        .unwrap();
        assert_eq!(r.contribution, single);
        assert!((r.contribution.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.consensus.len(), 3);
        let raw_first =
            ShapleyReport::from_evaluators(r.raw.clone(), r.mask, ConsensusOrder::AverageRawFirst)
                .unwrap();
        assert_eq!(raw_first.contribution, r.contribution);
    }

    #[test]
    fn csv_export() {
        let g = CoalitionInputs {
            accuracy: None,
            energy_j: vec![1.0, 1.0],
            bandwidth_kbps: vec![1.0, 1.0],
        };
        let r = ShapleyReport::honest(
            &g,
            &ShapleyConfig::default(),
            DimensionMask::ENERGY_BANDWIDTH,
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        r.write_contribution_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "node_id,contribution\n0,0.5\n1,0.5\n"
        );
    }
}
