//! File formats: spaces and measures, cost matrices, rate-function specs,
//! potential-family specs and experiment frames, all as JSON.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::duality::{PotentialFamily, PotentialPair, TransportFunctional};
use crate::measures::{FiniteSpace, ProbMeasure};
use crate::ratefn::{RateFunction, Tail};
use crate::transport::{CostKind, CostMatrix};
use crate::{Error, Result};

/// Space/measure file: point count, optional labels, optional embedded
/// coordinates, and weights when the file carries a measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceFile {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl SpaceFile {
    pub fn to_space(&self) -> Result<Arc<FiniteSpace>> {
        FiniteSpace::with_parts(self.n, self.labels.clone(), self.coords.clone(), None)
    }

    pub fn to_measure(&self) -> Result<ProbMeasure> {
        let w = self
            .weights
            .clone()
            .ok_or_else(|| Error::Config("measure file needs a weights field".into()))?;
        ProbMeasure::new(self.to_space()?, w)
    }

    pub fn from_measure(mu: &ProbMeasure) -> Self {
        SpaceFile {
            n: mu.len(),
            labels: mu.space().labels().map(|l| l.to_vec()),
            coords: mu.space().coords().map(|c| c.to_vec()),
            weights: Some(mu.weights().to_vec()),
        }
    }
}

/// Cost file: row-major matrix plus the kind flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostFile {
    pub matrix: Vec<Vec<f64>>,
    pub kind: String,
}

impl CostFile {
    pub fn to_cost(&self) -> Result<CostMatrix> {
        let kind = match self.kind.as_str() {
            "metric" => CostKind::Metric,
            "general-cost" => CostKind::GeneralCost,
            other => {
                return Err(Error::Config(format!(
                    "unknown cost kind {other:?}; expected \"metric\" or \"general-cost\""
                )))
            }
        };
        CostMatrix::from_rows(self.matrix.clone(), kind)
    }

    pub fn from_cost(c: &CostMatrix) -> Self {
        let rows = (0..c.rows())
            .map(|i| (0..c.cols()).map(|j| c.at(i, j)).collect())
            .collect();
        CostFile {
            matrix: rows,
            kind: match c.kind() {
                CostKind::Metric => "metric".into(),
                CostKind::GeneralCost => "general-cost".into(),
            },
        }
    }
}

/// Rate-function spec, tagged by `form`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum RateSpec {
    Zero,
    Pinsker,
    Linear {
        a: f64,
    },
    Quadratic {
        a: f64,
    },
    Sqrt {
        #[serde(rename = "M")]
        m: f64,
    },
    Bernstein {
        #[serde(rename = "M")]
        m: f64,
    },
    Threshold {
        a: f64,
    },
    Sampled {
        t: Vec<f64>,
        v: Vec<f64>,
        /// Slope continuing past the last knot; omitted means the function
        /// is `+∞` beyond it.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tail_slope: Option<f64>,
    },
    Max {
        of: Vec<RateSpec>,
    },
    Scaled {
        out: f64,
        #[serde(rename = "in")]
        inner_scale: f64,
        inner: Box<RateSpec>,
    },
}

impl RateSpec {
    pub fn to_rate(&self) -> Result<RateFunction> {
        match self {
            RateSpec::Zero => Ok(RateFunction::zero()),
            RateSpec::Pinsker => Ok(RateFunction::pinsker()),
            RateSpec::Linear { a } => RateFunction::linear(*a),
            RateSpec::Quadratic { a } => RateFunction::quadratic(*a),
            RateSpec::Sqrt { m } => RateFunction::sqrt_form(*m),
            RateSpec::Bernstein { m } => RateFunction::bernstein(*m),
            RateSpec::Threshold { a } => RateFunction::threshold(*a),
            RateSpec::Sampled { t, v, tail_slope } => {
                let tail = match tail_slope {
                    Some(m) => Tail::Linear(*m),
                    None => Tail::Infinite,
                };
                RateFunction::from_samples(t.clone(), v.clone(), tail)
            }
            RateSpec::Max { of } => {
                let items = of.iter().map(|s| s.to_rate()).collect::<Result<Vec<_>>>()?;
                Ok(RateFunction::max_of(items))
            }
            RateSpec::Scaled { out, inner_scale, inner } => {
                RateFunction::scaled(*out, *inner_scale, inner.to_rate()?)
            }
        }
    }

    /// Sampled spec of an arbitrary rate function (used to persist
    /// computed rates).
    pub fn sampled_from(rate: &RateFunction, t_hi: Option<f64>) -> Result<Self> {
        let pl = rate.sample(t_hi)?;
        let (t, v) = pl.knots();
        Ok(RateSpec::Sampled {
            t: t.to_vec(),
            v: v.to_vec(),
            tail_slope: match pl.tail() {
                Tail::Infinite => None,
                Tail::Linear(m) => Some(m),
            },
        })
    }
}

/// Potential-family spec, tagged by `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FamilySpec {
    LipschitzBall,
    UnitSupBall,
    ChiBall { chi: Vec<f64> },
    Explicit { pairs: Vec<PairSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSpec {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl FamilySpec {
    /// Builds the family for a measure; the Lipschitz ball and explicit
    /// transport families need the cost matrix.
    pub fn build(&self, mu: &ProbMeasure, cost: Option<&CostMatrix>) -> Result<PotentialFamily> {
        match self {
            FamilySpec::LipschitzBall => {
                let d = cost.ok_or_else(|| {
                    Error::Config("lipschitz-ball family needs a cost file".into())
                })?;
                PotentialFamily::lipschitz_ball(d, mu)
            }
            FamilySpec::UnitSupBall => PotentialFamily::unit_sup_ball(mu.len()),
            FamilySpec::ChiBall { chi } => PotentialFamily::chi_ball(chi),
            FamilySpec::Explicit { pairs } => {
                let functional = match cost {
                    Some(c) => TransportFunctional::Cost(c.clone()),
                    None => TransportFunctional::SupNorm,
                };
                let pairs = pairs
                    .iter()
                    .map(|p| PotentialPair { psi: p.psi.clone(), phi: p.phi.clone() })
                    .collect();
                PotentialFamily::explicit(mu.len(), pairs, functional, false)
            }
        }
    }
}
