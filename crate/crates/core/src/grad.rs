//! Gradient descent on the matching energy in the `ψ = sqrt(φ')`
//! representation.
//!
//! `ψ` is sampled on a uniform grid of `[0, 2π]` that includes both ends (for
//! closed curves the seam node is duplicated at `2π`). The warp is the
//! cumulative trapezoid integral `φ_k = Σ h (ψ_j² + ψ_{j+1}²) / 2`, and the
//! discrete energy is
//!
//! `E(ψ) = Σ_k w_k |q0_k - ψ_k Q(φ_k)|² + λ Σ_i (φ(θ0ⁱ) - θ1ⁱ)²`
//!
//! with `Q` the cubic spline of `q1` and `φ(θ0ⁱ)` interpolated linearly
//! between nodes. Its gradient is assembled exactly, term by term.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::curve::{
    dot, node_derivative, srvt, DiscreteCurve, SrvCurve, Topology, EPS_REG, PARAM_LENGTH,
};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::geometry::closed_basis;
use crate::interp::{Interpolant, Interpolation};
use crate::warp::Warp;

/// Non-negative samples of `ψ = sqrt(φ')` on the open grid of `[0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiField {
    values: Vec<f64>,
}

impl PsiField {
    pub fn identity(n: usize) -> Self {
        Self {
            values: vec![1.0; n],
        }
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::InvalidInput("ψ needs at least 3 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput("ψ must be finite and non-negative".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        PARAM_LENGTH / (self.len() - 1) as f64
    }

    pub fn params(&self) -> Vec<f64> {
        Topology::Open.params(self.len())
    }

    pub fn weights(&self) -> Vec<f64> {
        Topology::Open.weights(self.len())
    }

    /// Trapezoid `∫ ψ² dθ`.
    pub fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .zip(self.weights())
            .map(|(v, w)| w * v * v)
            .sum()
    }

    /// Rescaled so that `∫ ψ² dθ = 2π`.
    pub fn normalized(&self) -> Self {
        let s = (PARAM_LENGTH / self.norm_sq()).sqrt();
        Self {
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// Node values of `φ`, unscaled.
    pub fn cumulative(&self) -> Vec<f64> {
        cumulative(&self.values, self.step())
    }
}

fn cumulative(psi: &[f64], h: f64) -> Vec<f64> {
    let mut phi = vec![0.0; psi.len()];
    for k in 1..psi.len() {
        phi[k] = phi[k - 1] + 0.5 * h * (psi[k - 1] * psi[k - 1] + psi[k] * psi[k]);
    }
    phi
}

/// The warp `φ(θ) = ∫_0^θ ψ²`, rescaled to end exactly at `2π`, with node
/// derivatives `ψ²`.
pub fn psi_to_warp(psi: &PsiField) -> Result<Warp> {
    let phi = psi.cumulative();
    let end = *phi.last().expect("non-empty");
    if !(end > 0.0) {
        return Err(Error::InvalidInput("ψ vanishes identically".into()));
    }
    let s = PARAM_LENGTH / end;
    let ys = phi.iter().map(|p| p * s).collect();
    let slopes = psi.values.iter().map(|v| v * v * s).collect();
    Warp::from_vertices(psi.params(), ys)?.with_slopes(slopes)
}

/// `ψ` on the open grid of `n` nodes. Warps carrying node derivatives are
/// sampled directly; for purely piecewise-linear warps `ψ²` is the slope
/// averaged over the dual cell of each node, which keeps kinks local.
pub fn warp_to_psi(w: &Warp, n: usize) -> PsiField {
    let params = Topology::Open.params(n);
    let h = PARAM_LENGTH / (n - 1) as f64;
    let sq: Vec<f64> = if w.slopes().is_some() {
        params.iter().map(|&t| w.derivative(t)).collect()
    } else {
        params
            .iter()
            .map(|&t| {
                let a = (t - 0.5 * h).max(0.0);
                let b = (t + 0.5 * h).min(PARAM_LENGTH);
                (w.eval(b) - w.eval(a)) / (b - a)
            })
            .collect()
    };
    PsiField {
        values: sq.into_iter().map(|v| v.max(0.0).sqrt()).collect(),
    }
    .normalized()
}

/// Three parts of the `L²` gradient of `E(ψ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiGradient {
    /// From varying `ψ` in front of `Q(φ)`.
    pub pointwise: Vec<f64>,
    /// From varying `φ = ∫ψ²` inside `Q`.
    pub cumulative: Vec<f64>,
    /// From the feature term.
    pub feature: Vec<f64>,
}

impl PsiGradient {
    pub fn total(&self) -> Vec<f64> {
        self.pointwise
            .iter()
            .zip(&self.cumulative)
            .zip(&self.feature)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    Identity,
    Dp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient norm falls below this fraction of its
    /// initial value.
    pub tol_grad: f64,
    pub armijo_c: f64,
    pub init: Init,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            tol_grad: 1e-6,
            armijo_c: 1e-4,
            init: Init::Identity,
        }
    }
}

const MAX_HALVINGS: usize = 40;

/// Result of [`GradProblem::descend`].
#[derive(Debug, Clone)]
pub struct Descent {
    pub psi: PsiField,
    pub warp: Warp,
    pub energy: f64,
    /// Energy before the first step and after every accepted step.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl Descent {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Quantities of one energy evaluation.
struct Eval {
    q: Vec<f64>,
    dq: Vec<f64>,
    r: Vec<f64>,
    elastic: f64,
    /// `(node, t, φ(θ0) - θ1)` per feature pair.
    feats: Vec<(usize, f64, f64)>,
}

/// Matching problem between two curves, discretized for gradient methods.
pub struct GradProblem {
    topology: Topology,
    dim: usize,
    n: usize,
    h: f64,
    w: Vec<f64>,
    /// `q0` on the ψ grid (seam duplicated for closed curves).
    q0: Vec<f64>,
    dq0: Vec<f64>,
    q1: Interpolant,
    pairs: Vec<(f64, f64)>,
    lambda: f64,
}

fn extend(values: &[f64], dim: usize, topology: Topology) -> Vec<f64> {
    let mut v = values.to_vec();
    if topology.is_closed() {
        v.extend_from_slice(&values[..dim]);
    }
    v
}

impl GradProblem {
    /// Only parameter-space quadratic feature terms are differentiable.
    pub fn new(c0: &DiscreteCurve, c1: &DiscreteCurve, features: &FeatureSpec) -> Result<Self> {
        if c0.dim() != c1.dim() || c0.len() != c1.len() || c0.topology() != c1.topology() {
            return Err(Error::InvalidInput(
                "curves must share dimension, grid and topology".into(),
            ));
        }
        Self::from_srv(&srvt(c0)?, &srvt(c1)?, features)
    }

    pub fn from_srv(q0: &SrvCurve, q1: &SrvCurve, features: &FeatureSpec) -> Result<Self> {
        features.validate()?;
        if !features.all_parametric() {
            return Err(Error::MethodUnavailable(
                "gradient methods support quadratic feature terms only".into(),
            ));
        }
        if features.symmetric {
            return Err(Error::MethodUnavailable(
                "symmetric energies are minimized by dynamic programming only".into(),
            ));
        }
        let topology = q0.topology();
        let dim = q0.dim();
        let q0v = extend(q0.values(), dim, topology);
        let n = q0v.len() / dim;
        // same spline derivative as for q1, so both sides agree at φ = id
        let q0i = q0.interpolant(Interpolation::Cubic);
        let dq0 = (0..n)
            .flat_map(|k| q0i.derivative(k as f64 * PARAM_LENGTH / (n - 1) as f64))
            .collect();
        Ok(Self {
            topology,
            dim,
            n,
            h: PARAM_LENGTH / (n - 1) as f64,
            w: Topology::Open.weights(n),
            q0: q0v,
            dq0,
            q1: q1.interpolant(Interpolation::Cubic),
            pairs: features.pairs.iter().map(|p| (p.theta0, p.theta1)).collect(),
            lambda: features.lambda,
        })
    }

    /// Number of ψ samples.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    fn locate(&self, theta: f64) -> (usize, f64) {
        let u = theta / self.h;
        let a = (u.floor().max(0.0) as usize).min(self.n - 2);
        (a, u - a as f64)
    }

    fn evaluate(&self, psi: &[f64]) -> Eval {
        let dim = self.dim;
        let phi = cumulative(psi, self.h);
        let mut q = vec![0.0; self.n * dim];
        let mut dq = vec![0.0; self.n * dim];
        let mut r = vec![0.0; self.n * dim];
        let mut elastic = 0.0;
        for k in 0..self.n {
            let rg = k * dim..(k + 1) * dim;
            self.q1.eval_into(phi[k], &mut q[rg.clone()]);
            self.q1.derivative_into(phi[k], &mut dq[rg.clone()]);
            let mut s = 0.0;
            for c in rg {
                r[c] = self.q0[c] - psi[k] * q[c];
                s += r[c] * r[c];
            }
            elastic += self.w[k] * s;
        }
        let feats = self
            .pairs
            .iter()
            .map(|&(t0, t1)| {
                let (a, t) = self.locate(t0);
                (a, t, (1.0 - t) * phi[a] + t * phi[a + 1] - t1)
            })
            .collect();
        Eval {
            q,
            dq,
            r,
            elastic,
            feats,
        }
    }

    fn feature_raw(e: &Eval) -> f64 {
        e.feats.iter().map(|f| f.2 * f.2).sum()
    }

    /// `(elastic, unweighted feature)` parts of `E(ψ)`.
    pub fn energy_parts(&self, psi: &PsiField) -> (f64, f64) {
        let e = self.evaluate(&psi.values);
        (e.elastic, Self::feature_raw(&e))
    }

    pub fn energy(&self, psi: &PsiField) -> f64 {
        self.energy_values(&psi.values)
    }

    fn energy_values(&self, psi: &[f64]) -> f64 {
        let e = self.evaluate(psi);
        e.elastic + self.lambda * Self::feature_raw(&e)
    }

    /// `Σ_m a_m ∂φ_k/∂ψ_m` contracted with node weights `a_k`, divided by
    /// the quadrature weight: the `L²` representer of `δ Σ_k a_k φ_k`.
    fn through_phi(&self, psi: &[f64], a: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        let mut tail = 0.0;
        for m in (1..n).rev() {
            out[m] = 2.0 * self.h * psi[m] * (0.5 * a[m] + tail) / self.w[m];
            tail += a[m];
        }
        out[0] = 2.0 * self.h * psi[0] * (0.5 * tail) / self.w[0];
        out
    }

    fn gradient_from(&self, psi: &[f64], e: &Eval) -> PsiGradient {
        let dim = self.dim;
        let n = self.n;
        let mut pointwise = vec![0.0; n];
        let mut adj = vec![0.0; n];
        for k in 0..n {
            let rg = k * dim..(k + 1) * dim;
            pointwise[k] = -2.0 * dot(&e.r[rg.clone()], &e.q[rg.clone()]);
            adj[k] = -2.0 * self.w[k] * psi[k] * dot(&e.r[rg.clone()], &e.dq[rg]);
        }
        let mut fadj = vec![0.0; n];
        for &(a, t, d) in &e.feats {
            let g = 2.0 * self.lambda * d;
            fadj[a] += g * (1.0 - t);
            fadj[a + 1] += g * t;
        }
        PsiGradient {
            pointwise,
            cumulative: self.through_phi(psi, &adj),
            feature: self.through_phi(psi, &fadj),
        }
    }

    /// `L²` gradient of `E(ψ)`, split into its three terms.
    pub fn grad_psi(&self, psi: &PsiField) -> PsiGradient {
        let e = self.evaluate(&psi.values);
        self.gradient_from(&psi.values, &e)
    }

    /// `L²` representers of `δψ ↦ ⟨U_i(q1⋆φ), δ(q1⋆φ)⟩`, the closure normals
    /// pulled back to ψ.
    pub fn pulled_back_normals(&self, psi: &PsiField) -> Result<Vec<Vec<f64>>> {
        let e = self.evaluate(&psi.values);
        self.normals_from(&psi.values, &e)
    }

    fn normals_from(&self, psi: &[f64], e: &Eval) -> Result<Vec<Vec<f64>>> {
        let dim = self.dim;
        let n = self.n;
        // q1⋆φ without the duplicated seam node
        let acted: Vec<f64> = (0..(n - 1) * dim)
            .map(|c| psi[c / dim] * e.q[c])
            .collect();
        let sq = SrvCurve::from_flat(acted, dim, Topology::Closed)?;
        let basis = closed_basis(&sq)?;
        Ok(basis
            .iter()
            .map(|u| {
                let v = extend(u.vectors(), dim, Topology::Closed);
                let mut point = vec![0.0; n];
                let mut adj = vec![0.0; n];
                for k in 0..n {
                    let rg = k * dim..(k + 1) * dim;
                    point[k] = dot(&v[rg.clone()], &e.q[rg.clone()]);
                    adj[k] = self.w[k] * psi[k] * dot(&v[rg.clone()], &e.dq[rg]);
                }
                let cum = self.through_phi(psi, &adj);
                point.iter().zip(cum).map(|(a, b)| a + b).collect()
            })
            .collect())
    }

    /// Gradient with the components along the pulled-back closure normals
    /// removed.
    pub fn grad_closed(&self, psi: &PsiField) -> Result<Vec<f64>> {
        let e = self.evaluate(&psi.values);
        let g = self.gradient_from(&psi.values, &e).total();
        let normals = self.normals_from(&psi.values, &e)?;
        Ok(self.project_out(&g, &normals))
    }

    /// `w`-orthogonal projection of `g` onto the complement of `span(dirs)`.
    pub fn project_out(&self, g: &[f64], dirs: &[Vec<f64>]) -> Vec<f64> {
        let d = dirs.len();
        if d == 0 {
            return g.to_vec();
        }
        let ip = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(&self.w).map(|((x, y), w)| w * x * y).sum()
        };
        let gram = DMatrix::from_fn(d, d, |i, j| ip(&dirs[i], &dirs[j]));
        let rhs = DVector::from_iterator(d, dirs.iter().map(|v| ip(v, g)));
        let beta = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => gram
                .pseudo_inverse(1e-14)
                .map(|p| p * rhs)
                .unwrap_or_else(|_| DVector::zeros(d)),
        };
        let mut out = g.to_vec();
        for (i, v) in dirs.iter().enumerate() {
            for (o, x) in out.iter_mut().zip(v) {
                *o -= beta[i] * x;
            }
        }
        out
    }

    /// Matching energy of an arbitrary warp on the ψ grid nodes: node values
    /// and node derivatives come from the warp, feature terms use `φ(θ0)`.
    pub fn energy_warp(&self, warp: &Warp) -> f64 {
        let (e, f) = self.energy_warp_parts(warp);
        e + self.lambda * f
    }

    pub fn energy_warp_parts(&self, warp: &Warp) -> (f64, f64) {
        let dim = self.dim;
        let mut buf = vec![0.0; dim];
        let mut elastic = 0.0;
        for k in 0..self.n {
            let t = self.node(k);
            self.q1.eval_into(warp.eval(t), &mut buf);
            let s = warp.derivative(t).max(0.0).sqrt();
            let d: f64 = (0..dim)
                .map(|c| (self.q0[k * dim + c] - s * buf[c]).powi(2))
                .sum();
            elastic += self.w[k] * d;
        }
        let feat = self
            .pairs
            .iter()
            .map(|&(t0, t1)| (warp.eval(t0) - t1).powi(2))
            .sum();
        (elastic, feat)
    }

    fn node(&self, k: usize) -> f64 {
        if k == self.n - 1 {
            PARAM_LENGTH
        } else {
            k as f64 * self.h
        }
    }

    /// `L²` gradient of the energy with respect to `φ` at the grid nodes:
    /// `-⟨q0, (q1⋆φ)'⟩/φ' + ⟨q0', q1⋆φ⟩/φ'` plus feature deltas spread over
    /// the two neighbouring nodes.
    pub fn grad_phi(&self, warp: &Warp) -> Result<Vec<f64>> {
        let dim = self.dim;
        let n = self.n;
        let slopes: Vec<f64> = (0..n).map(|k| warp.derivative(self.node(k))).collect();
        if let Some(k) = slopes.iter().position(|s| *s <= EPS_REG) {
            return Err(Error::RegularityViolation {
                index: k,
                magnitude: slopes[k],
            });
        }
        let dslopes = node_derivative(&slopes, 1, Topology::Open);
        let mut g = vec![0.0; n];
        let mut q = vec![0.0; dim];
        let mut dq = vec![0.0; dim];
        for k in 0..n {
            let phi = warp.eval(self.node(k));
            self.q1.eval_into(phi, &mut q);
            self.q1.derivative_into(phi, &mut dq);
            let s = slopes[k];
            let rs = s.sqrt();
            let mut acc = 0.0;
            for c in 0..dim {
                let p = rs * q[c];
                let dp = dslopes[k] / (2.0 * rs) * q[c] + s * rs * dq[c];
                acc += -self.q0[k * dim + c] * dp + self.dq0[k * dim + c] * p;
            }
            g[k] = acc / s;
        }
        // variations vanish at the fixed endpoints
        g[0] = 0.0;
        g[n - 1] = 0.0;
        for &(t0, t1) in &self.pairs {
            let (a, t) = self.locate(t0);
            let d = 2.0 * self.lambda * (warp.eval(t0) - t1);
            g[a] += d * (1.0 - t) / self.w[a];
            g[a + 1] += d * t / self.w[a + 1];
        }
        Ok(g)
    }

    /// Projected gradient descent in ψ with Armijo backtracking.
    ///
    /// Each step removes the gradient components that would change `∫ψ²`
    /// (and, for closed curves, the pulled-back closure normals), clips at
    /// zero and renormalizes.
    pub fn descend(&self, init: &PsiField, opts: &DescentOptions) -> Result<Descent> {
        if init.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "initial ψ has {} samples, expected {}",
                init.len(),
                self.n
            )));
        }
        let scale: f64 = self
            .q0
            .chunks_exact(self.dim)
            .zip(&self.w)
            .map(|(v, w)| w * dot(v, v))
            .sum::<f64>()
            .max(f64::MIN_POSITIVE);
        let floor = 1e-10 * scale.sqrt();
        let mut psi = init.normalized().values;
        let mut eval = self.evaluate(&psi);
        let mut energy = eval.elastic + self.lambda * Self::feature_raw(&eval);
        let mut trace = vec![energy];
        let mut g0 = None;
        let mut converged = false;
        for iteration in 0..opts.max_iters {
            let mut g = self.gradient_from(&psi, &eval).total();
            let mut dirs = vec![psi.clone()];
            if self.topology.is_closed() {
                dirs.extend(self.normals_from(&psi, &eval)?);
            }
            // bound-active nodes cannot move further down
            for (gk, pk) in g.iter_mut().zip(&psi) {
                if *pk == 0.0 && *gk > 0.0 {
                    *gk = 0.0;
                }
            }
            let d = self.project_out(&g, &dirs);
            let slope: f64 = d
                .iter()
                .zip(&g)
                .zip(&self.w)
                .map(|((a, b), w)| w * a * b)
                .sum();
            let norm = slope.max(0.0).sqrt();
            let g0 = *g0.get_or_insert(norm);
            if norm <= opts.tol_grad * g0 || norm <= floor || slope <= 1e-15 * energy {
                converged = true;
                break;
            }
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let trial: Vec<f64> = psi
                    .iter()
                    .zip(&d)
                    .map(|(p, v)| (p - step * v).max(0.0))
                    .collect();
                let trial = PsiField { values: trial };
                if trial.norm_sq() > 0.0 {
                    let trial = trial.normalized().values;
                    let e = self.evaluate(&trial);
                    let te = e.elastic + self.lambda * Self::feature_raw(&e);
                    if te <= energy - opts.armijo_c * step * slope {
                        accepted = Some((trial, e, te));
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some((p, e, te)) => {
                    psi = p;
                    eval = e;
                    energy = te;
                    trace.push(te);
                }
                None => return Err(Error::LineSearchFailed { iteration }),
            }
        }
        let psi = PsiField { values: psi };
        Ok(Descent {
            warp: psi_to_warp(&psi)?,
            psi,
            energy,
            trace,
            converged,
        })
    }
}

/// `E(ψ)` for open curves.
pub fn energy_open(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    psi: &PsiField,
    features: &FeatureSpec,
) -> Result<f64> {
    Ok(GradProblem::new(c0, c1, features)?.energy(psi))
}

pub fn grad_psi(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    psi: &PsiField,
    features: &FeatureSpec,
) -> Result<PsiGradient> {
    Ok(GradProblem::new(c0, c1, features)?.grad_psi(psi))
}

pub fn grad_phi(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    warp: &Warp,
    features: &FeatureSpec,
) -> Result<Vec<f64>> {
    GradProblem::new(c0, c1, features)?.grad_phi(warp)
}

pub fn grad_closed(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    psi: &PsiField,
    features: &FeatureSpec,
) -> Result<Vec<f64>> {
    GradProblem::new(c0, c1, features)?.grad_closed(psi)
}

pub fn descend(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    features: &FeatureSpec,
    init: &PsiField,
    opts: &DescentOptions,
) -> Result<Descent> {
    GradProblem::new(c0, c1, features)?.descend(init, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::apply_warp;
    use std::f64::consts::TAU;

    fn wave(n: usize, a: f64, f: f64) -> DiscreteCurve {
        DiscreteCurve::from_fn(n, Topology::Open, |t| vec![t, a * (f * t).sin()]).unwrap()
    }

    fn smooth_warp(n: usize, eps: f64) -> Warp {
        Warp::from_fn(
            n,
            |t| t - eps * t.sin(),
            |t| 1.0 - eps * t.cos(),
        )
    }

    fn wiggle(n: usize, seed: u64) -> Vec<f64> {
        let params = Topology::Open.params(n);
        let a = (seed as f64 * 0.7).sin();
        let b = (seed as f64 * 1.3).cos();
        params
            .iter()
            .map(|t| a * (t * (1 + seed % 3) as f64).sin() + b * (0.5 * t).cos())
            .collect()
    }

    #[test]
    fn identity_psi_gives_identity_warp() {
        let w = psi_to_warp(&PsiField::identity(33)).unwrap();
        assert!(w.is_identity(1e-12));
    }

    #[test]
    fn half_support_psi() {
        let n = 65;
        let vals: Vec<f64> = Topology::Open
            .params(n)
            .iter()
            .map(|&t| if t <= PI_HALF_TAU { 2f64.sqrt() } else { 0.0 })
            .collect();
        let w = psi_to_warp(&PsiField::from_values(vals).unwrap()).unwrap();
        // everything happens on the first half, then φ stays at 2π
        assert!((w.eval(TAU * 0.55) - TAU).abs() < 1e-12);
        assert!((w.eval(TAU * 0.25) - TAU * 0.5).abs() < 0.05);
    }

    const PI_HALF_TAU: f64 = std::f64::consts::PI;

    #[test]
    fn warp_psi_round_trip() {
        let n = 129;
        let psi = warp_to_psi(&smooth_warp(n, 0.4), n);
        let w = psi_to_warp(&psi).unwrap();
        let back = psi_to_warp(&warp_to_psi(&w, n)).unwrap();
        for (a, b) in w.ys().iter().zip(back.ys()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_matches_warp_energy() {
        let (c0, c1) = (wave(129, 0.5, 2.0), wave(129, 0.8, 3.0));
        let f = FeatureSpec::quadratic(&[(1.0, 1.4), (4.0, 3.7)], 2.0);
        let p = GradProblem::new(&c0, &c1, &f).unwrap();
        let psi = warp_to_psi(&smooth_warp(129, 0.3), 129);
        let w = psi_to_warp(&psi).unwrap();
        assert!((p.energy(&psi) - p.energy_warp(&w)).abs() < 1e-10);
        let plain = GradProblem::new(&c0, &c1, &FeatureSpec::none().with_lambda(0.0)).unwrap();
        let q0 = srvt(&c0).unwrap();
        let q1w = crate::geometry::star_action(&srvt(&c1).unwrap(), &w);
        let direct = crate::geometry::srv_distance(&q0, &q1w).powi(2);
        assert!((plain.energy(&psi) - direct).abs() < 1e-10);
    }

    #[test]
    fn minimum_is_stationary() {
        let c = wave(129, 0.5, 2.0);
        let f = FeatureSpec::quadratic(&[(1.0, 1.0), (3.0, 3.0)], 5.0);
        let p = GradProblem::new(&c, &c, &f).unwrap();
        let psi = PsiField::identity(129);
        assert!(p.energy(&psi) < 1e-25);
        let g = p.grad_psi(&psi).total();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
        let gp = p.grad_phi(&Warp::identity()).unwrap();
        assert!(gp.iter().all(|v| v.abs() < 1e-6), "{gp:?}");
    }

    #[test]
    fn psi_gradient_matches_finite_differences() {
        let (c0, c1) = (wave(97, 0.5, 2.0), wave(97, 0.8, 3.0));
        let f = FeatureSpec::quadratic(&[(1.0, 1.4), (4.0, 3.7)], 2.0);
        let p = GradProblem::new(&c0, &c1, &f).unwrap();
        let psi = warp_to_psi(&smooth_warp(97, 0.3), 97);
        let g = p.grad_psi(&psi).total();
        for seed in 0..6 {
            let dir = wiggle(97, seed);
            let eps = 1e-5;
            let shift = |s: f64| -> f64 {
                let v: Vec<f64> = psi.values().iter().zip(&dir).map(|(a, b)| a + s * b).collect();
                p.energy_values(&v)
            };
            let fd = (shift(eps) - shift(-eps)) / (2.0 * eps);
            let an: f64 = g.iter().zip(&dir).zip(p.weights()).map(|((a, b), w)| a * b * w).sum();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "fd {fd} an {an}");
        }
    }

    #[test]
    fn feature_gradient_is_linear_in_lambda() {
        let (c0, c1) = (wave(65, 0.5, 2.0), wave(65, 0.8, 3.0));
        let psi = warp_to_psi(&smooth_warp(65, 0.3), 65);
        let f1 = FeatureSpec::quadratic(&[(1.0, 1.4)], 1.5);
        let f2 = f1.clone().with_lambda(3.0);
        let g1 = GradProblem::new(&c0, &c1, &f1).unwrap().grad_psi(&psi);
        let g2 = GradProblem::new(&c0, &c1, &f2).unwrap().grad_psi(&psi);
        for (a, b) in g1.feature.iter().zip(&g2.feature) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn phi_gradient_matches_finite_differences() {
        let n = 257;
        let (c0, c1) = (wave(n, 0.5, 2.0), wave(n, 0.8, 3.0));
        let f = FeatureSpec::quadratic(&[(1.0, 1.4)], 2.0);
        let p = GradProblem::new(&c0, &c1, &f).unwrap();
        let g = p.grad_phi(&smooth_warp(n, 0.3)).unwrap();
        for j in 1..4 {
            let j = j as f64;
            let perturbed = |s: f64| {
                Warp::from_fn(
                    n,
                    |t| t - 0.3 * t.sin() + s * (j * t / 2.0).sin().powi(2) * t.sin(),
                    |t| {
                        1.0 - 0.3 * t.cos()
                            + s * (j * (j * t / 2.0).sin() * (j * t / 2.0).cos() * t.sin()
                                + (j * t / 2.0).sin().powi(2) * t.cos())
                    },
                )
            };
            let dir: Vec<f64> = Topology::Open
                .params(n)
                .iter()
                .map(|&t| (j * t / 2.0).sin().powi(2) * t.sin())
                .collect();
            let eps = 1e-5;
            let fd = (p.energy_warp(&perturbed(eps)) - p.energy_warp(&perturbed(-eps))) / (2.0 * eps);
            let an: f64 = g.iter().zip(&dir).zip(p.weights()).map(|((a, b), w)| a * b * w).sum();
            assert!((fd - an).abs() < 1e-3 * an.abs(), "fd {fd} an {an}");
        }
    }

    #[test]
    fn descent_recovers_smooth_warp() {
        let n = 129;
        let c0 = wave(n, 0.6, 2.0);
        let truth = smooth_warp(n, 0.35);
        let c1 = apply_warp(&c0, &truth.inverse().unwrap()).unwrap();
        let f = FeatureSpec::none().with_lambda(0.0);
        let p = GradProblem::new(&c0, &c1, &f).unwrap();
        let init = PsiField::identity(n);
        let e0 = p.energy(&init);
        let d = p.descend(&init, &DescentOptions::default()).unwrap();
        assert!(d.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(d.energy < 1e-3 * e0, "{} vs {}", d.energy, e0);
        assert!(d.warp.max_diff(&truth, n) < 0.05 * TAU);
    }

    #[test]
    fn optimal_start_stops_immediately() {
        let c = wave(65, 0.5, 2.0);
        let p = GradProblem::new(&c, &c, &FeatureSpec::none()).unwrap();
        let d = p.descend(&PsiField::identity(65), &DescentOptions::default()).unwrap();
        assert!(d.iterations() <= 1);
        assert!(d.energy <= d.trace[0]);
    }

    #[test]
    fn closed_projection_properties() {
        let n = 96;
        let c0 = DiscreteCurve::from_fn(n, Topology::Closed, |t| vec![t.cos(), t.sin()]).unwrap();
        let c1 = DiscreteCurve::from_fn(n, Topology::Closed, |t| {
            vec![1.4 * t.cos(), 0.7 * (t + 0.3 * t.sin()).sin()]
        })
        .unwrap();
        let p = GradProblem::new(&c0, &c1, &FeatureSpec::none()).unwrap();
        let psi = warp_to_psi(&smooth_warp(n + 1, 0.2), n + 1);
        let g = p.grad_closed(&psi).unwrap();
        let normals = p.pulled_back_normals(&psi).unwrap();
        let ip = |a: &[f64], b: &[f64]| -> f64 {
            a.iter().zip(b).zip(p.weights()).map(|((x, y), w)| w * x * y).sum()
        };
        for nv in &normals {
            assert!(ip(&g, nv).abs() < 1e-10 * ip(nv, nv).sqrt().max(1.0));
        }
        let again = p.project_out(&g, &normals);
        for (a, b) in g.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = p
            .descend(&PsiField::identity(n + 1), &DescentOptions { max_iters: 50, ..Default::default() })
            .unwrap();
        assert!(d.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn rejects_positional_features() {
        let c = wave(33, 0.5, 2.0);
        let mut f = FeatureSpec::none();
        f.pairs.push(crate::features::FeaturePair::hard(1.0, 1.0, 0.1));
        assert!(matches!(
            GradProblem::new(&c, &c, &f),
            Err(Error::MethodUnavailable(_))
        ));
    }
}
