//! Monotone reparametrizations `φ: [0, 2π] → [0, 2π]`.

use serde::{Deserialize, Serialize};

use crate::curve::{Topology, PARAM_LENGTH};
use crate::error::{Error, Result};

/// Piecewise-linear non-decreasing warp with `φ(0) = 0` and `φ(2π) = 2π`.
///
/// Warps produced from a `ψ`-field also carry node derivatives `φ'(x_r)`; the
/// derivative of a purely piecewise-linear warp is the slope of the segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WarpRepr", into = "WarpRepr")]
pub struct Warp {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct WarpRepr {
    vertices: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slopes: Option<Vec<f64>>,
}

impl TryFrom<WarpRepr> for Warp {
    type Error = Error;

    fn try_from(r: WarpRepr) -> Result<Self> {
        let (xs, ys) = r.vertices.iter().map(|v| (v[0], v[1])).unzip();
        let w = Warp::from_vertices(xs, ys)?;
        match r.slopes {
            Some(s) => w.with_slopes(s),
            None => Ok(w),
        }
    }
}

impl From<Warp> for WarpRepr {
    fn from(w: Warp) -> Self {
        WarpRepr {
            vertices: w.xs.iter().zip(&w.ys).map(|(x, y)| [*x, *y]).collect(),
            slopes: w.slopes,
        }
    }
}

const ENDPOINT_TOL: f64 = 1e-9;

impl Warp {
    pub fn identity() -> Self {
        Self {
            xs: vec![0.0, PARAM_LENGTH],
            ys: vec![0.0, PARAM_LENGTH],
            slopes: Some(vec![1.0, 1.0]),
        }
    }

    pub fn from_vertices(xs: Vec<f64>, mut ys: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(Error::InvalidInput("a warp needs matching vertex lists".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("warp abscissae must increase strictly".into()));
        }
        if ys.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidInput("warp must be non-decreasing".into()));
        }
        let n = xs.len();
        let ends = [xs[0], ys[0], xs[n - 1] - PARAM_LENGTH, ys[n - 1] - PARAM_LENGTH];
        if ends.iter().any(|e| e.abs() > ENDPOINT_TOL) {
            return Err(Error::InvalidInput("warp must fix 0 and 2π".into()));
        }
        ys[0] = 0.0;
        ys[n - 1] = PARAM_LENGTH;
        let mut xs = xs;
        xs[0] = 0.0;
        xs[n - 1] = PARAM_LENGTH;
        Ok(Self {
            xs,
            ys,
            slopes: None,
        })
    }

    /// Attaches node derivatives (one per vertex, non-negative).
    pub fn with_slopes(mut self, slopes: Vec<f64>) -> Result<Self> {
        if slopes.len() != self.xs.len() || slopes.iter().any(|s| *s < 0.0 || !s.is_finite()) {
            return Err(Error::InvalidInput("invalid warp node derivatives".into()));
        }
        self.slopes = Some(slopes);
        Ok(self)
    }

    /// Samples a smooth warp and its derivative on the open grid of `n` nodes.
    pub fn from_fn<F, D>(n: usize, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64,
        D: Fn(f64) -> f64,
    {
        let xs = Topology::Open.params(n);
        let ys = xs.iter().map(|&x| f(x)).collect();
        let slopes = xs.iter().map(|&x| df(x)).collect();
        Self::from_vertices(xs, ys)
            .and_then(|w| w.with_slopes(slopes))
            .expect("from_fn needs a monotone warp fixing the endpoints")
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn slopes(&self) -> Option<&[f64]> {
        self.slopes.as_deref()
    }

    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        let i = self.xs.partition_point(|&v| v <= x);
        i.clamp(1, self.xs.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, PARAM_LENGTH);
        let i = self.segment(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.ys[i] + t * (self.ys[i + 1] - self.ys[i])
    }

    /// `φ'(x)`; node derivatives are interpolated linearly when present.
    pub fn derivative(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, PARAM_LENGTH);
        let i = self.segment(x);
        match &self.slopes {
            Some(s) => {
                let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
                s[i] + t * (s[i + 1] - s[i])
            }
            None => (self.ys[i + 1] - self.ys[i]) / (self.xs[i + 1] - self.xs[i]),
        }
    }

    /// Smallest `x` with `φ(x) = y`.
    pub fn inverse_eval(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, PARAM_LENGTH);
        let i = self.ys.partition_point(|&v| v < y);
        if i == 0 {
            return 0.0;
        }
        let i = i.min(self.ys.len() - 1);
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        if y1 <= y0 {
            return self.xs[i];
        }
        self.xs[i - 1] + (y - y0) / (y1 - y0) * (self.xs[i] - self.xs[i - 1])
    }

    /// The inverse warp; requires strictly increasing values.
    pub fn inverse(&self) -> Result<Self> {
        if self.ys.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("warp is not invertible".into()));
        }
        let inv = Self::from_vertices(self.ys.clone(), self.xs.clone())?;
        match &self.slopes {
            Some(s) if s.iter().all(|v| *v > 0.0) => {
                inv.with_slopes(s.iter().map(|v| 1.0 / v).collect())
            }
            _ => Ok(inv),
        }
    }

    /// `self ∘ inner` sampled on the open grid of `n` nodes.
    pub fn compose(&self, inner: &Warp, n: usize) -> Self {
        let xs = Topology::Open.params(n);
        let ys: Vec<f64> = xs.iter().map(|&x| self.eval(inner.eval(x))).collect();
        let slopes = xs
            .iter()
            .map(|&x| self.derivative(inner.eval(x)) * inner.derivative(x))
            .collect();
        Self {
            xs,
            ys,
            slopes: Some(slopes),
        }
    }

    /// Values on the given parameters.
    pub fn sample(&self, params: &[f64]) -> Vec<f64> {
        params.iter().map(|&x| self.eval(x)).collect()
    }

    /// Largest `|φ(x) - other(x)|` over the open grid of `n` nodes.
    pub fn max_diff(&self, other: &Warp, n: usize) -> f64 {
        Topology::Open
            .params(n)
            .into_iter()
            .map(|x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Drops node derivatives, leaving the piecewise-linear interpolant.
    pub fn piecewise_linear(&self) -> Self {
        Self {
            xs: self.xs.clone(),
            ys: self.ys.clone(),
            slopes: None,
        }
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.vertices().all(|(x, y)| (x - y).abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn identity_evaluates_to_itself() {
        let w = Warp::identity();
        for x in [0.0, 1.0, 3.3, TAU] {
            assert_eq!(w.eval(x), x);
            assert_eq!(w.derivative(x), 1.0);
        }
    }

    #[test]
    fn rejects_bad_vertices() {
        assert!(Warp::from_vertices(vec![0.0, 1.0, TAU], vec![0.0, 2.0, 1.0]).is_err());
        assert!(Warp::from_vertices(vec![0.0, 1.0, TAU], vec![0.1, 2.0, TAU]).is_err());
        assert!(Warp::from_vertices(vec![0.0, 0.0, TAU], vec![0.0, 2.0, TAU]).is_err());
    }

    #[test]
    fn inverse_round_trip() {
        let w = Warp::from_vertices(vec![0.0, 1.0, 4.0, TAU], vec![0.0, 2.0, 3.0, TAU]).unwrap();
        let inv = w.inverse().unwrap();
        for x in [0.0, 0.5, 2.5, 5.0, TAU] {
            assert!((inv.eval(w.eval(x)) - x).abs() < 1e-12);
            assert!((w.inverse_eval(w.eval(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_warps_have_left_inverse() {
        let w = Warp::from_vertices(vec![0.0, 1.0, 2.0, TAU], vec![0.0, 1.0, 1.0, TAU]).unwrap();
        assert_eq!(w.inverse_eval(1.0), 1.0);
        assert!(w.inverse().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let w = Warp::from_fn(9, |t| t * t / TAU, |t| 2.0 * t / TAU);
        let s = serde_json::to_string(&w).unwrap();
        let back: Warp = serde_json::from_str(&s).unwrap();
        assert_eq!(w, back);
    }
}
