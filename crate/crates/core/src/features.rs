//! Feature-point pairs and their matching terms.
//!
//! A pair `(θ0, θ1)` asks the warp to send the feature at `θ0` on the first
//! curve close to the feature at `θ1` on the second. Quadratic terms act on
//! parameter values, `|φ(θ0) - θ1|²`. Hard bounds and custom terms act on
//! positions: they compare `c1(φ(θ0))` with `c1(θ1)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve::{dist_sq, PARAM_LENGTH};
use crate::error::{Error, Result};

pub type PositionalFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Matching term of one pair.
#[derive(Clone, Default)]
pub enum FeatureKind {
    /// `|φ(θ0) - θ1|²`.
    #[default]
    Quadratic,
    /// `0` if `‖c1(φ(θ0)) - c1(θ1)‖ ≤ bound`, `+∞` otherwise.
    Hard { bound: f64 },
    /// Any non-negative function of `(c1(φ(θ0)), c1(θ1))`.
    Positional(Arc<PositionalFn>),
}

impl fmt::Debug for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKind::Quadratic => write!(f, "Quadratic"),
            FeatureKind::Hard { bound } => write!(f, "Hard {{ bound: {bound} }}"),
            FeatureKind::Positional(_) => write!(f, "Positional(..)"),
        }
    }
}

impl FeatureKind {
    /// True when the term depends only on parameter values.
    pub fn is_parametric(&self) -> bool {
        matches!(self, FeatureKind::Quadratic)
    }
}

#[derive(Debug, Clone)]
pub struct FeaturePair {
    pub theta0: f64,
    pub theta1: f64,
    pub kind: FeatureKind,
}

impl FeaturePair {
    pub fn quadratic(theta0: f64, theta1: f64) -> Self {
        Self {
            theta0,
            theta1,
            kind: FeatureKind::Quadratic,
        }
    }

    pub fn hard(theta0: f64, theta1: f64, bound: f64) -> Self {
        Self {
            theta0,
            theta1,
            kind: FeatureKind::Hard { bound },
        }
    }

    /// Term value given the matched parameter `φ(θ0)`. `eval1` evaluates the
    /// second curve; it is only called by positional kinds.
    pub fn term<F: Fn(f64) -> Vec<f64>>(&self, matched: f64, eval1: F) -> f64 {
        match &self.kind {
            FeatureKind::Quadratic => (matched - self.theta1).powi(2),
            FeatureKind::Hard { bound } => {
                let d = dist_sq(&eval1(matched), &eval1(self.theta1)).sqrt();
                if d > *bound {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            FeatureKind::Positional(f) => f(&eval1(matched), &eval1(self.theta1)),
        }
    }

    /// The same pair seen from the second curve.
    pub fn mirrored(&self) -> Self {
        Self {
            theta0: self.theta1,
            theta1: self.theta0,
            kind: self.kind.clone(),
        }
    }
}

/// Feature pairs with their weight.
#[derive(Debug, Clone)]
pub struct FeatureSpec {
    pub pairs: Vec<FeaturePair>,
    pub lambda: f64,
    pub symmetric: bool,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self::none()
    }
}

impl FeatureSpec {
    pub fn none() -> Self {
        Self {
            pairs: Vec::new(),
            lambda: 1.0,
            symmetric: false,
        }
    }

    pub fn quadratic(pairs: &[(f64, f64)], lambda: f64) -> Self {
        Self {
            pairs: pairs
                .iter()
                .map(|&(a, b)| FeaturePair::quadratic(a, b))
                .collect(),
            lambda,
            symmetric: false,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs swapped, for matching the curves in the opposite order.
    pub fn mirrored(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(FeaturePair::mirrored).collect(),
            lambda: self.lambda,
            symmetric: self.symmetric,
        }
    }

    pub fn all_parametric(&self) -> bool {
        self.pairs.iter().all(|p| p.kind.is_parametric())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput("lambda must be finite and non-negative".into()));
        }
        for p in &self.pairs {
            for t in [p.theta0, p.theta1] {
                if !(0.0..=PARAM_LENGTH).contains(&t) {
                    return Err(Error::InvalidInput(format!(
                        "feature parameter {t} outside [0, 2π]"
                    )));
                }
            }
            if let FeatureKind::Hard { bound } = p.kind {
                if !(bound >= 0.0) {
                    return Err(Error::InvalidInput("hard bounds must be non-negative".into()));
                }
            }
        }
        Ok(())
    }

    /// Unweighted feature term `Σ FM_i` for a warp given as a function.
    pub fn evaluate<W, F>(&self, warp: W, eval1: F) -> f64
    where
        W: Fn(f64) -> f64,
        F: Fn(f64) -> Vec<f64>,
    {
        self.pairs
            .iter()
            .map(|p| p.term(warp(p.theta0), &eval1))
            .sum()
    }

    /// Largest `|φ(θ0) - θ1|` over all pairs.
    pub fn max_deviation<W: Fn(f64) -> f64>(&self, warp: W) -> f64 {
        self.pairs
            .iter()
            .map(|p| (warp(p.theta0) - p.theta1).abs())
            .fold(0.0, f64::max)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: FeatureFile = serde_json::from_str(text)?;
        let spec = file.try_into()?;
        Ok(spec)
    }

    /// JSON form; positional callbacks have no file representation.
    pub fn to_json(&self) -> Result<String> {
        let file = FeatureFile::try_from(self)?;
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureFile {
    #[serde(default = "default_lambda")]
    lambda: f64,
    #[serde(default)]
    symmetric: bool,
    #[serde(default)]
    pairs: Vec<PairFile>,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairFile {
    theta0: f64,
    theta1: f64,
    #[serde(default = "default_kind")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bound: Option<f64>,
}

fn default_kind() -> String {
    "quadratic".into()
}

impl TryFrom<FeatureFile> for FeatureSpec {
    type Error = Error;

    fn try_from(f: FeatureFile) -> Result<Self> {
        let pairs = f
            .pairs
            .into_iter()
            .map(|p| {
                let kind = match (p.kind.as_str(), p.bound) {
                    ("quadratic", None) => FeatureKind::Quadratic,
                    ("hard", Some(bound)) => FeatureKind::Hard { bound },
                    ("hard", None) => {
                        return Err(Error::InvalidInput("hard feature needs a bound".into()))
                    }
                    ("quadratic", Some(_)) => {
                        return Err(Error::InvalidInput(
                            "bound is only valid for hard features".into(),
                        ))
                    }
                    (other, _) => {
                        return Err(Error::InvalidInput(format!("unknown feature kind `{other}`")))
                    }
                };
                Ok(FeaturePair {
                    theta0: p.theta0,
                    theta1: p.theta1,
                    kind,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let spec = FeatureSpec {
            pairs,
            lambda: f.lambda,
            symmetric: f.symmetric,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<&FeatureSpec> for FeatureFile {
    type Error = Error;

    fn try_from(s: &FeatureSpec) -> Result<Self> {
        let pairs = s
            .pairs
            .iter()
            .map(|p| {
                let (kind, bound) = match &p.kind {
                    FeatureKind::Quadratic => ("quadratic", None),
                    FeatureKind::Hard { bound } => ("hard", Some(*bound)),
                    FeatureKind::Positional(_) => {
                        return Err(Error::InvalidInput(
                            "positional feature terms cannot be serialized".into(),
                        ))
                    }
                };
                Ok(PairFile {
                    theta0: p.theta0,
                    theta1: p.theta1,
                    kind: kind.into(),
                    bound,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureFile {
            lambda: s.lambda,
            symmetric: s.symmetric,
            pairs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_term() {
        let p = FeaturePair::quadratic(1.0, 1.5);
        assert!((p.term(1.6, |_| vec![]) - 0.01).abs() < 1e-15);
        assert_eq!(p.term(1.5, |_| vec![]), 0.0);
    }

    #[test]
    fn hard_term_uses_positions() {
        let line = |t: f64| vec![t, 0.0];
        let p = FeaturePair::hard(1.0, 2.0, 0.5);
        assert_eq!(p.term(1.8, line), 0.0);
        assert_eq!(p.term(1.2, line), f64::INFINITY);
        let exact = FeaturePair::hard(1.0, 2.0, 0.0);
        assert_eq!(exact.term(2.0, line), 0.0);
        let inf = FeaturePair::hard(1.0, 2.0, f64::INFINITY);
        assert_eq!(inf.term(0.0, line), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"lambda": 2.5, "symmetric": true,
            "pairs": [{"theta0": 1.0, "theta1": 1.2, "kind": "quadratic"},
                      {"theta0": 3.0, "theta1": 2.9, "kind": "hard", "bound": 0.1}]}"#;
        let spec = FeatureSpec::from_json(text).unwrap();
        assert_eq!(spec.lambda, 2.5);
        assert!(spec.symmetric);
        assert!(matches!(spec.pairs[1].kind, FeatureKind::Hard { bound } if bound == 0.1));
        let back = FeatureSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back.pairs.len(), 2);
        assert_eq!(back.pairs[1].theta1, 2.9);
    }

    #[test]
    fn json_rejects_bad_input() {
        assert!(FeatureSpec::from_json(r#"{"lambda": -1, "pairs": []}"#).is_err());
        assert!(FeatureSpec::from_json(r#"{"pairs": [{"theta0": 9, "theta1": 1}]}"#).is_err());
        assert!(FeatureSpec::from_json(r#"{"pairs": [{"theta0": 1, "theta1": 1, "kind": "hard"}]}"#).is_err());
        assert!(FeatureSpec::from_json(r#"{"lambda": 1, "extra": 0}"#).is_err());
    }

    #[test]
    fn mirroring_swaps_parameters() {
        let spec = FeatureSpec::quadratic(&[(1.0, 2.0)], 3.0);
        let m = spec.mirrored();
        assert_eq!((m.pairs[0].theta0, m.pairs[0].theta1), (2.0, 1.0));
        assert_eq!(m.mirrored().pairs[0].theta0, 1.0);
    }
}
