//! Uniformly sampled curves, their square-root-velocity transform and the
//! inverse transform.
//!
//! Parameters live on `[0, 2π]`. An open curve with `N` samples has nodes
//! `θ_k = 2πk/(N-1)`; a closed curve has nodes `θ_k = 2πk/N` and the point at
//! `2π` is identified with sample 0.
//!
//! Node derivatives come from the fourth-order compact scheme
//! `v_{k-1} + 4 v_k + v_{k+1} = 3 (c_{k+1} - c_{k-1}) / h` (third-order closures
//! at open ends, cyclic for closed curves). The inverse transform integrates
//! `|q|q` with the Simpson recurrence
//! `c_{k+1} = c_{k-1} + h/3 (v_{k-1} + 4 v_k + v_{k+1})`, the exact inverse of
//! that scheme, so `srvt_inverse(srvt(c))`
//! reproduces `c - c(0)` to rounding error. For closed curves the free offset
//! of the odd sublattice is chosen to remove the alternating (Nyquist)
//! component.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::{solve_cyclic, solve_tridiagonal, Interpolant, Interpolation};
use crate::warp::Warp;

/// Parameter domain length.
pub const PARAM_LENGTH: f64 = TAU;

/// Regularity threshold for `|c'|`, relative to the curve diameter.
pub const EPS_REG: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Open,
    Closed,
}

impl Topology {
    pub fn is_closed(self) -> bool {
        self == Topology::Closed
    }

    /// Grid spacing for `n` samples.
    pub fn step(self, n: usize) -> f64 {
        match self {
            Topology::Open => PARAM_LENGTH / (n - 1) as f64,
            Topology::Closed => PARAM_LENGTH / n as f64,
        }
    }

    pub fn params(self, n: usize) -> Vec<f64> {
        let h = self.step(n);
        let mut p: Vec<f64> = (0..n).map(|k| k as f64 * h).collect();
        if self == Topology::Open {
            p[n - 1] = PARAM_LENGTH;
        }
        p
    }

    /// Trapezoid quadrature weights on the grid.
    pub fn weights(self, n: usize) -> Vec<f64> {
        let h = self.step(n);
        let mut w = vec![h; n];
        if self == Topology::Open {
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
        }
        w
    }
}

/// A parametrized curve in `R^d` sampled on the uniform grid of its topology.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    samples: Vec<f64>,
    dim: usize,
    topology: Topology,
}

impl DiscreteCurve {
    /// Builds a curve from row-major samples and checks regularity.
    pub fn from_flat(samples: Vec<f64>, dim: usize, topology: Topology) -> Result<Self> {
        let curve = Self::from_flat_unchecked(samples, dim, topology)?;
        curve.check_regular()?;
        Ok(curve)
    }

    /// Shape checks only; regularity is not verified.
    pub fn from_flat_unchecked(samples: Vec<f64>, dim: usize, topology: Topology) -> Result<Self> {
        if dim == 0 || !samples.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} values cannot form points of dimension {dim}",
                samples.len()
            )));
        }
        if samples.len() / dim < 3 {
            return Err(Error::InvalidInput("a curve needs at least 3 samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite sample value".into()));
        }
        Ok(Self {
            samples,
            dim,
            topology,
        })
    }

    pub fn from_points(points: &[Vec<f64>], topology: Topology) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput("points have mixed dimensions".into()));
        }
        Self::from_flat(points.concat(), dim, topology)
    }

    /// Samples `f` on the grid of `n` points.
    pub fn from_fn<F>(n: usize, topology: Topology, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let pts: Vec<Vec<f64>> = topology.params(n).into_iter().map(f).collect();
        Self::from_points(&pts, topology)
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.samples[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn params(&self) -> Vec<f64> {
        self.topology.params(self.len())
    }

    pub fn step(&self) -> f64 {
        self.topology.step(self.len())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.topology.weights(self.len())
    }

    /// Largest distance between two samples.
    pub fn diameter(&self) -> f64 {
        let pts: Vec<&[f64]> = self.points().collect();
        let mut best = 0.0f64;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                best = best.max(dist_sq(a, b));
            }
        }
        best.sqrt()
    }

    pub fn interpolant(&self, kind: Interpolation) -> Interpolant {
        Interpolant::new(
            &self.samples,
            self.dim,
            PARAM_LENGTH,
            self.topology.is_closed(),
            kind,
        )
    }

    /// The same curve shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Self {
        let mut samples = self.samples.clone();
        for p in samples.chunks_exact_mut(self.dim) {
            for (x, o) in p.iter_mut().zip(offset) {
                *x += o;
            }
        }
        Self {
            samples,
            dim: self.dim,
            topology: self.topology,
        }
    }

    /// The curve translated so that its first sample is the origin.
    pub fn anchored(&self) -> Self {
        let neg: Vec<f64> = self.point(0).iter().map(|x| -x).collect();
        self.translated(&neg)
    }

    /// Largest coordinate-wise difference to `other` (same grid).
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Node derivatives, row-major.
    pub fn derivative(&self) -> Vec<f64> {
        node_derivative(&self.samples, self.dim, self.topology)
    }

    pub(crate) fn check_regular(&self) -> Result<()> {
        let threshold = EPS_REG * self.diameter().max(f64::MIN_POSITIVE);
        let h = self.step();
        let n = self.len();
        let chords = if self.topology.is_closed() { n } else { n - 1 };
        for k in 0..chords {
            let m = dist_sq(self.point(k), self.point((k + 1) % n)).sqrt() / h;
            if m <= threshold {
                return Err(Error::RegularityViolation {
                    index: k,
                    magnitude: m,
                });
            }
        }
        let d = self.derivative();
        for (k, v) in d.chunks_exact(self.dim).enumerate() {
            let m = norm(v);
            if m <= threshold {
                return Err(Error::RegularityViolation {
                    index: k,
                    magnitude: m,
                });
            }
        }
        Ok(())
    }
}

/// Square-root-velocity representation `q = c'/sqrt|c'|` of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct SrvCurve {
    values: Vec<f64>,
    dim: usize,
    topology: Topology,
}

impl SrvCurve {
    pub fn from_flat(values: Vec<f64>, dim: usize, topology: Topology) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) || values.len() / dim < 3 {
            return Err(Error::InvalidInput("malformed SRV samples".into()));
        }
        Ok(Self {
            values,
            dim,
            topology,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn params(&self) -> Vec<f64> {
        self.topology.params(self.len())
    }

    pub fn weights(&self) -> Vec<f64> {
        self.topology.weights(self.len())
    }

    pub fn interpolant(&self, kind: Interpolation) -> Interpolant {
        Interpolant::new(
            &self.values,
            self.dim,
            PARAM_LENGTH,
            self.topology.is_closed(),
            kind,
        )
    }

    /// Trapezoid-rule `L²` inner product with another SRV curve on the same grid.
    pub fn dot(&self, other: &Self) -> f64 {
        weighted_dot(&self.values, &other.values, self.dim, &self.weights())
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `(1-t) self + t other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Self {
            values,
            dim: self.dim,
            topology: self.topology,
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
            dim: self.dim,
            topology: self.topology,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `|q| q` at every node, the velocity of the curve this SRV represents.
    pub fn velocity(&self) -> Vec<f64> {
        let mut out = self.values.clone();
        for v in out.chunks_exact_mut(self.dim) {
            let m = norm(v);
            v.iter_mut().for_each(|x| *x *= m);
        }
        out
    }

    /// `∫ |q| q dθ` over the whole parameter circle; zero exactly for SRVs of
    /// closed curves.
    pub fn closure_defect(&self) -> Vec<f64> {
        let vel = self.velocity();
        let w = Topology::Closed.weights(self.len());
        let mut f = vec![0.0; self.dim];
        for (v, wk) in vel.chunks_exact(self.dim).zip(&w) {
            for (fi, vi) in f.iter_mut().zip(v) {
                *fi += wk * vi;
            }
        }
        f
    }
}

/// Square-root-velocity transform.
pub fn srvt(c: &DiscreteCurve) -> Result<SrvCurve> {
    let threshold = EPS_REG * c.diameter().max(f64::MIN_POSITIVE);
    srvt_with_threshold(c, threshold)
}

pub(crate) fn srvt_with_threshold(c: &DiscreteCurve, threshold: f64) -> Result<SrvCurve> {
    let mut v = c.derivative();
    for (k, p) in v.chunks_exact_mut(c.dim).enumerate() {
        let m = norm(p);
        if m <= threshold {
            return Err(Error::RegularityViolation {
                index: k,
                magnitude: m,
            });
        }
        let s = 1.0 / m.sqrt();
        p.iter_mut().for_each(|x| *x *= s);
    }
    Ok(SrvCurve {
        values: v,
        dim: c.dim,
        topology: c.topology,
    })
}

/// Inverse transform: integrates `|q|q` so that the node derivative of the
/// result is `|q|q` again. Anchored at `c(0) = 0`.
pub fn srvt_inverse(q: &SrvCurve) -> DiscreteCurve {
    let vel = q.velocity();
    let dim = q.dim;
    let n = q.len();
    let h = q.topology.step(n);
    let mut samples = vec![0.0; n * dim];
    let mut col = vec![0.0; n];
    for c in 0..dim {
        let v = |k: usize| vel[k * dim + c];
        let simpson = |k: usize| h / 3.0 * (v(k - 1) + 4.0 * v(k) + v(k + 1));
        col[0] = 0.0;
        match q.topology {
            Topology::Open => {
                col[2] = simpson(1);
                col[1] = (2.0 * h * (v(0) + 2.0 * v(1)) - col[2]) / 4.0;
            }
            Topology::Closed => {
                col[1] = 0.0;
                col[2] = simpson(1);
            }
        }
        for k in 2..n - 1 {
            col[k + 1] = col[k - 1] + simpson(k);
        }
        if q.topology.is_closed() {
            let shift = if n % 2 == 1 {
                // the wrap-around row links both sublattices
                let wrap = h / 3.0 * (v(n - 2) + 4.0 * v(n - 1) + v(0));
                -(col[n - 2] + wrap)
            } else {
                // free offset of the odd sublattice: no alternating component
                let a: f64 = col.iter().enumerate().map(|(k, x)| alt(k) * x).sum();
                a / (n / 2) as f64
            };
            for (k, x) in col.iter_mut().enumerate() {
                if k % 2 == 1 {
                    *x += shift;
                }
            }
        }
        for k in 0..n {
            samples[k * dim + c] = col[k];
        }
    }
    DiscreteCurve {
        samples,
        dim,
        topology: q.topology,
    }
}

/// Resamples onto a uniform grid of `n` points. Returns the input unchanged
/// when it already has `n` samples.
pub fn resample(c: &DiscreteCurve, n: usize, kind: Interpolation) -> Result<DiscreteCurve> {
    if n < 3 {
        return Err(Error::InvalidInput("resample needs n >= 3".into()));
    }
    if n == c.len() {
        return Ok(c.clone());
    }
    let it = c.interpolant(kind);
    let mut samples = vec![0.0; n * c.dim];
    for (k, t) in c.topology.params(n).into_iter().enumerate() {
        it.eval_into(t, &mut samples[k * c.dim..(k + 1) * c.dim]);
    }
    DiscreteCurve::from_flat(samples, c.dim, c.topology)
}

/// `c ∘ φ` sampled on the grid of `c`.
pub fn apply_warp(c: &DiscreteCurve, w: &Warp) -> Result<DiscreteCurve> {
    let (out, degenerate) = apply_warp_flagged(c, w);
    if degenerate {
        out.check_regular()?;
    }
    Ok(out)
}

/// `c ∘ φ` without the regularity check; the flag reports whether the warp
/// collapsed a span of the curve (φ' ≈ 0).
pub fn apply_warp_flagged(c: &DiscreteCurve, w: &Warp) -> (DiscreteCurve, bool) {
    let it = c.interpolant(Interpolation::Cubic);
    let mut samples = vec![0.0; c.samples.len()];
    for (k, t) in c.params().into_iter().enumerate() {
        it.eval_into(w.eval(t), &mut samples[k * c.dim..(k + 1) * c.dim]);
    }
    let out = DiscreteCurve {
        samples,
        dim: c.dim,
        topology: c.topology,
    };
    let degenerate = out.check_regular().is_err();
    (out, degenerate)
}

fn alt(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Fourth-order compact derivative of row-major node values.
pub(crate) fn node_derivative(values: &[f64], dim: usize, topology: Topology) -> Vec<f64> {
    let n = values.len() / dim;
    let h = topology.step(n);
    let mut out = vec![0.0; values.len()];
    let mut rhs = vec![0.0; n];
    for c in 0..dim {
        let y = |k: usize| values[k * dim + c];
        let col = match topology {
            Topology::Closed => {
                for (k, r) in rhs.iter_mut().enumerate() {
                    *r = 3.0 * (y((k + 1) % n) - y((k + n - 1) % n)) / h;
                }
                solve_cyclic(1.0, 4.0, 1.0, &rhs)
            }
            Topology::Open => {
                let mut sub = vec![1.0; n];
                let mut diag = vec![4.0; n];
                let mut sup = vec![1.0; n];
                for k in 1..n - 1 {
                    rhs[k] = 3.0 * (y(k + 1) - y(k - 1)) / h;
                }
                diag[0] = 1.0;
                sup[0] = 2.0;
                rhs[0] = (-5.0 * y(0) + 4.0 * y(1) + y(2)) / (2.0 * h);
                sub[n - 1] = 2.0;
                diag[n - 1] = 1.0;
                rhs[n - 1] = (5.0 * y(n - 1) - 4.0 * y(n - 2) - y(n - 3)) / (2.0 * h);
                solve_tridiagonal(&sub, &diag, &sup, &rhs)
            }
        };
        for (k, v) in col.into_iter().enumerate() {
            out[k * dim + c] = v;
        }
    }
    out
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn weighted_dot(a: &[f64], b: &[f64], dim: usize, w: &[f64]) -> f64 {
    a.chunks_exact(dim)
        .zip(b.chunks_exact(dim))
        .zip(w)
        .map(|((x, y), wk)| wk * dot(x, y))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(n: usize, speed: f64) -> DiscreteCurve {
        DiscreteCurve::from_fn(n, Topology::Open, |t| vec![speed * t, 0.0]).unwrap()
    }

    #[test]
    fn srvt_of_straight_segments() {
        let q = srvt(&line(64, 1.0)).unwrap();
        for v in q.values().chunks(2) {
            assert!((v[0] - 1.0).abs() < 1e-12 && v[1].abs() < 1e-12);
        }
        let q = srvt(&line(64, 4.0)).unwrap();
        for v in q.values().chunks(2) {
            assert!((v[0] - 2.0).abs() < 1e-12 && v[1].abs() < 1e-12);
        }
    }

    #[test]
    fn srvt_of_unit_circle_has_unit_norm() {
        let c = DiscreteCurve::from_fn(256, Topology::Closed, |t| vec![t.cos(), t.sin()]).unwrap();
        let q = srvt(&c).unwrap();
        let dev = q
            .values()
            .chunks(2)
            .map(|v| (norm(v) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-6, "deviation {dev}");
    }

    #[test]
    fn inverse_of_constant_srvs() {
        let q = SrvCurve::from_flat([1.0, 0.0].repeat(32), 2, Topology::Open).unwrap();
        let c = srvt_inverse(&q);
        for (p, t) in c.points().zip(c.params()) {
            assert!((p[0] - t).abs() < 1e-12 && p[1].abs() < 1e-15);
        }
        let q = SrvCurve::from_flat([0.0, 2.0].repeat(32), 2, Topology::Open).unwrap();
        let c = srvt_inverse(&q);
        for (p, t) in c.points().zip(c.params()) {
            assert!(p[0].abs() < 1e-15 && (p[1] - 4.0 * t).abs() < 1e-11);
        }
    }

    #[test]
    fn round_trip_is_exact_for_open_and_closed_curves() {
        let open = DiscreteCurve::from_fn(512, Topology::Open, |t| {
            vec![t, (3.0 * t).sin(), 0.2 * t * t]
        })
        .unwrap();
        let closed = DiscreteCurve::from_fn(511, Topology::Closed, |t| {
            vec![(1.0 + 0.2 * (3.0 * t).cos()) * t.cos(), t.sin()]
        })
        .unwrap();
        for c in [open, closed] {
            let back = srvt_inverse(&srvt(&c).unwrap());
            assert!(back.max_abs_diff(&c.anchored()) < 1e-10 * c.diameter());
        }
    }

    #[test]
    fn zero_length_derivative_is_rejected() {
        let mut pts: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64, 0.0]).collect();
        pts[5] = pts[4].clone();
        pts[6] = pts[4].clone();
        let err = DiscreteCurve::from_points(&pts, Topology::Open).unwrap_err();
        assert!(matches!(err, Error::RegularityViolation { .. }));
    }

    #[test]
    fn resample_line_and_identity() {
        let c = line(64, 1.0);
        let r = resample(&c, 128, Interpolation::Linear).unwrap();
        assert!(r.max_abs_diff(&line(128, 1.0)) < 1e-12);
        assert_eq!(resample(&c, 64, Interpolation::Cubic).unwrap(), c);
    }

    #[test]
    fn resample_circle_stays_on_circle() {
        let c = DiscreteCurve::from_fn(32, Topology::Closed, |t| vec![t.cos(), t.sin()]).unwrap();
        for kind in [Interpolation::Linear, Interpolation::Cubic] {
            let r = resample(&c, 256, kind).unwrap();
            let dev = r.points().map(|p| (norm(p) - 1.0).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-2, "{kind:?}: {dev}");
        }
    }

    #[test]
    fn warp_composition_on_a_line() {
        let c = line(65, 1.0);
        let w = Warp::from_fn(65, |t| t * t / TAU, |t| 2.0 * t / TAU);
        let cw = apply_warp_flagged(&c, &w).0;
        for (p, t) in cw.points().zip(c.params()) {
            assert!((p[0] - t * t / TAU).abs() < 1e-12);
        }
        let id = apply_warp(&c, &Warp::identity()).unwrap();
        assert!(id.max_abs_diff(&c) < 1e-12);
    }

    #[test]
    fn collapsing_warp_is_flagged() {
        let c = line(65, 1.0);
        // flat on the middle half
        let w = Warp::from_vertices(
            vec![0.0, TAU / 4.0, 3.0 * TAU / 4.0, TAU],
            vec![0.0, TAU / 2.0, TAU / 2.0, TAU],
        )
        .unwrap();
        let (_, flagged) = apply_warp_flagged(&c, &w);
        assert!(flagged);
        assert!(matches!(
            apply_warp(&c, &w),
            Err(Error::RegularityViolation { .. })
        ));
    }

    proptest! {
        #[test]
        fn resample_is_idempotent(n in 5usize..80, amp in 0.0f64..0.8) {
            let c = DiscreteCurve::from_fn(40, Topology::Open, |t| vec![t, amp * (2.0 * t).sin()]).unwrap();
            let once = resample(&c, n, Interpolation::Cubic).unwrap();
            let twice = resample(&once, n, Interpolation::Cubic).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn round_trip_holds_for_random_smooth_curves(a in -1.0f64..1.0, b in -1.0f64..1.0, k in 1u32..4) {
            let c = DiscreteCurve::from_fn(200, Topology::Open, |t| {
                vec![t + a * (k as f64 * t).sin() * 0.3, b * (t * 0.5).cos()]
            }).unwrap();
            let back = srvt_inverse(&srvt(&c).unwrap());
            prop_assert!(back.max_abs_diff(&c.anchored()) < 1e-9);
        }
    }
}
