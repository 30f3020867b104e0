use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recommender::{accuracy, fedavg, EvalSet, ModelParams};

/// Floor applied to node energy before taking its reciprocal.
pub const ENERGY_EPSILON_J: f64 = 1e-9;

/// Coalition value along the accuracy, energy-thrift and bandwidth axes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityVector {
    pub a: f64,
    pub e: f64,
    pub b: f64,
}

impl UtilityVector {
    pub const ZERO: UtilityVector = UtilityVector {
        a: 0.0,
        e: 0.0,
        b: 0.0,
    };

    pub fn to_array(self) -> [f64; 3] {
        [self.a, self.e, self.b]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        UtilityVector {
            a: v[0],
            e: v[1],
            b: v[2],
        }
    }
}

/// A cooperative game over players `0..players()` with vector-valued utility.
pub trait CoalitionGame {
    fn players(&self) -> usize;

    /// Utility of the coalition whose members are listed in ascending order.
    fn utility(&self, members: &[usize]) -> Result<UtilityVector>;
}

/// Models plus the shared test set used for the accuracy axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyInputs {
    pub models: Vec<ModelParams>,
    pub eval: EvalSet,
}

/// Per-node inputs of the contribution game. Without `accuracy` the
/// accuracy axis is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionInputs {
    pub accuracy: Option<AccuracyInputs>,
    pub energy_j: Vec<f64>,
    pub bandwidth_kbps: Vec<f64>,
}

impl CoalitionInputs {
    pub fn validate(&self) -> Result<()> {
        let n = self.energy_j.len();
        if self.bandwidth_kbps.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.bandwidth_kbps.len(),
            });
        }
        if let Some(acc) = &self.accuracy {
            if acc.models.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: acc.models.len(),
                });
            }
            acc.eval.validate()?;
        }
        for (i, &e) in self.energy_j.iter().enumerate() {
            if e.is_nan() || e < 0.0 {
                return Err(Error::Domain(format!("energy of node {i} is {e}")));
            }
        }
        for (i, &b) in self.bandwidth_kbps.iter().enumerate() {
            if !(b.is_finite() && b >= 0.0) {
                return Err(Error::Domain(format!("bandwidth of node {i} is {b}")));
            }
        }
        Ok(())
    }
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    v.iter().sum()
}

/// `e = Σ 1/e_k` with energies floored at [`ENERGY_EPSILON_J`]; an infinite
/// energy contributes nothing.
pub fn energy_score(energies: impl IntoIterator<Item = f64>) -> f64 {
    sorted_sum(
        energies
            .into_iter()
            .map(|e| 1.0 / e.max(ENERGY_EPSILON_J))
            .collect(),
    )
}

pub fn bandwidth_score(bandwidths: impl IntoIterator<Item = f64>) -> f64 {
    sorted_sum(bandwidths.into_iter().collect())
}

/// Coalition utility; the empty coalition is worth zero on every axis.
pub fn utility(members: &[usize], inputs: &CoalitionInputs) -> Result<UtilityVector> {
    if members.is_empty() {
        return Ok(UtilityVector::ZERO);
    }
    let n = inputs.energy_j.len();
    if let Some(&bad) = members.iter().find(|&&k| k >= n) {
        return Err(Error::Domain(format!(
            "coalition member {bad} outside 0..{n}"
        )));
    }
    let a = match &inputs.accuracy {
        Some(acc) => {
            let models: Vec<ModelParams> = members.iter().map(|&k| acc.models[k].clone()).collect();
            accuracy(&fedavg(&models)?, &acc.eval)?
        }
        None => 0.0,
    };
    Ok(UtilityVector {
        a,
        e: energy_score(members.iter().map(|&k| inputs.energy_j[k])),
        b: bandwidth_score(members.iter().map(|&k| inputs.bandwidth_kbps[k])),
    })
}

impl CoalitionGame for CoalitionInputs {
    fn players(&self) -> usize {
        self.energy_j.len()
    }

    fn utility(&self, members: &[usize]) -> Result<UtilityVector> {
        utility(members, self)
    }
}

/// Energy drawn by a node: TDP times CPU time. Zero is allowed here; the
/// utility floors it before taking the reciprocal.
pub fn energy_of_node(tdp_w: f64, cpu_time_s: f64) -> Result<f64> {
    if !(tdp_w.is_finite() && tdp_w > 0.0) {
        return Err(Error::Domain(format!("cpu_tdp_w must be > 0, got {tdp_w}")));
    }
    if !(cpu_time_s.is_finite() && cpu_time_s >= 0.0) {
        return Err(Error::Domain(format!(
            "cpu_time_s must be >= 0, got {cpu_time_s}"
        )));
    }
    Ok(tdp_w * cpu_time_s)
}

/// Which utility axes take part in collapsing a Shapley matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DimensionMask {
    pub include_accuracy: bool,
    pub include_energy: bool,
    pub include_bandwidth: bool,
}

impl DimensionMask {
    pub const FULL: DimensionMask = DimensionMask {
        include_accuracy: true,
        include_energy: true,
        include_bandwidth: true,
    };
    pub const ACCURACY: DimensionMask = DimensionMask {
        include_accuracy: true,
        include_energy: false,
        include_bandwidth: false,
    };
    pub const ACCURACY_ENERGY: DimensionMask = DimensionMask {
        include_accuracy: true,
        include_energy: true,
        include_bandwidth: false,
    };
    pub const ACCURACY_BANDWIDTH: DimensionMask = DimensionMask {
        include_accuracy: true,
        include_energy: false,
        include_bandwidth: true,
    };
    pub const ENERGY_BANDWIDTH: DimensionMask = DimensionMask {
        include_accuracy: false,
        include_energy: true,
        include_bandwidth: true,
    };

    pub fn as_array(self) -> [bool; 3] {
        [
            self.include_accuracy,
            self.include_energy,
            self.include_bandwidth,
        ]
    }

    pub fn count(self) -> usize {
        self.as_array().iter().filter(|&&x| x).count()
    }

    pub fn validate(self) -> Result<()> {
        if self.count() == 0 {
            return Err(Error::Config(
                "dimension mask must include at least one axis".into(),
            ));
        }
        Ok(())
    }

    /// Short label such as `acc+energy`.
    pub fn label(self) -> String {
        if self == Self::FULL {
            return "full".into();
        }
        let names = ["acc", "energy", "bandwidth"];
        names
            .iter()
            .zip(self.as_array())
            .filter(|(_, on)| *on)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join("+")
    }
}

impl std::str::FromStr for DimensionMask {
    type Err = Error;

    /// Parses `full` or a `+`-joined subset of `acc`, `energy`, `bandwidth`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "full" {
            return Ok(Self::FULL);
        }
        let mut m = DimensionMask {
            include_accuracy: false,
            include_energy: false,
            include_bandwidth: false,
        };
        for part in s.split('+') {
            match part {
                "acc" | "accuracy" => m.include_accuracy = true,
                "energy" => m.include_energy = true,
                "bandwidth" | "bw" => m.include_bandwidth = true,
                _ => return Err(Error::Config(format!("unknown Shapley dimension {part:?}"))),
            }
        }
        m.validate()?;
        Ok(m)
    }
}

impl Default for DimensionMask {
    fn default() -> Self {
        Self::FULL
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(e: &[f64], b: &[f64]) -> CoalitionInputs {
        CoalitionInputs {
            accuracy: None,
            energy_j: e.to_vec(),
            bandwidth_kbps: b.to_vec(),
        }
    }

    #[test]
    fn empty_coalition_is_zero() {
        assert_eq!(
            utility(&[], &inputs(&[1.0], &[1.0])).unwrap(),
            UtilityVector::ZERO
        );
    }

    #[test]
    fn additive_axes() {
        let u = utility(&[0], &inputs(&[2.0], &[100.0])).unwrap();
        assert_eq!((u.e, u.b), (0.5, 100.0));
        let u = utility(&[0, 1], &inputs(&[4.0, 4.0], &[0.0, 0.0])).unwrap();
        assert_eq!(u.e, 0.5);
        assert!(utility(&[3], &inputs(&[4.0], &[0.0])).is_err());
    }

    #[test]
    fn energy_floor_and_infinite_proxy() {
        assert!((energy_score([0.0]) - 1e9).abs() < 1e-3);
        assert_eq!(energy_score([f64::INFINITY]), 0.0);
    }

    #[test]
    fn energy_of_node_examples() {
        assert_eq!(energy_of_node(65.0, 2.0).unwrap(), 130.0);
        assert_eq!(energy_of_node(95.0, 10.0).unwrap(), 950.0);
        assert_eq!(energy_of_node(35.0, 0.0).unwrap(), 0.0);
        assert!(energy_of_node(0.0, 1.0).is_err());
        assert!(energy_of_node(65.0, -1.0).is_err());
    }

    #[test]
    fn input_validation() {
        assert!(inputs(&[1.0], &[1.0, 2.0]).validate().is_err());
        assert!(inputs(&[-1.0], &[1.0]).validate().is_err());
        assert!(inputs(&[f64::INFINITY], &[1.0]).validate().is_ok());
        assert!(inputs(&[1.0], &[f64::NAN]).validate().is_err());
    }

    #[test]
    fn mask_labels_and_validation() {
        assert_eq!(DimensionMask::FULL.label(), "full");
        assert_eq!(DimensionMask::ACCURACY_ENERGY.label(), "acc+energy");
        assert_eq!(DimensionMask::ACCURACY.count(), 1);
        let none = DimensionMask {
            include_accuracy: false,
            include_energy: false,
            include_bandwidth: false,
        };
        assert!(none.validate().is_err());
    }

    #[test]
    fn mask_parse_round_trips_labels() {
        for m in [
            DimensionMask::FULL,
            DimensionMask::ACCURACY,
            DimensionMask::ACCURACY_BANDWIDTH,
            DimensionMask::ENERGY_BANDWIDTH,
        ] {
            assert_eq!(m.label().parse::<DimensionMask>().unwrap(), m);
        }
        assert!("acc+speed".parse::<DimensionMask>().is_err());
        assert!("".parse::<DimensionMask>().is_err());
    }
}
