//! Elastic metric, the reparametrization action on SRV functions, and
//! geodesics between open and closed curves.
//!
//! For open curves the SRV map is an isometry onto an open subset of a flat
//! space, so geodesics are straight lines in SRV space. Closed curves form the
//! codimension-`d` submanifold `{q : ∫|q|q dθ = 0}`; geodesics between them are
//! approximated by straight SRV paths whose snapshots are projected back onto
//! that submanifold.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::curve::{
    dot, norm, node_derivative, srvt, srvt_inverse, srvt_with_threshold, DiscreteCurve, SrvCurve,
    Topology, EPS_REG,
};
use crate::error::{Error, Result};
use crate::interp::Interpolation;
use crate::warp::Warp;

/// Angular distance from exact anti-parallelism that counts as antipodal.
pub const TAU_ANTI: f64 = 1e-6;

/// Number of path snapshots used by [`distance_closed`].
pub const T_DIST: usize = 32;

/// Vector field along a curve, one vector per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    vectors: Vec<f64>,
    dim: usize,
}

impl TangentField {
    pub fn from_flat(vectors: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && vectors.len().is_multiple_of(dim));
        Self { vectors, dim }
    }

    pub fn from_fn<F: Fn(f64) -> Vec<f64>>(base: &DiscreteCurve, f: F) -> Self {
        let vectors = base.params().into_iter().flat_map(f).collect();
        Self::from_flat(vectors, base.dim())
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Elastic metric `G^{a,b}_c(h, k)` by trapezoid quadrature.
pub fn elastic_metric(
    c: &DiscreteCurve,
    h: &TangentField,
    k: &TangentField,
    a: f64,
    b: f64,
) -> Result<f64> {
    let dim = c.dim();
    if h.len() != c.len() || k.len() != c.len() || h.dim != dim || k.dim != dim {
        return Err(Error::InvalidInput("tangent fields must share the curve grid".into()));
    }
    let threshold = EPS_REG * c.diameter().max(f64::MIN_POSITIVE);
    let cd = c.derivative();
    let hd = node_derivative(&h.vectors, dim, c.topology());
    let kd = node_derivative(&k.vectors, dim, c.topology());
    let w = c.weights();
    let mut total = 0.0;
    let mut nh = vec![0.0; dim];
    let mut nk = vec![0.0; dim];
    for (idx, wk) in w.iter().enumerate() {
        let range = idx * dim..(idx + 1) * dim;
        let cv = &cd[range.clone()];
        let speed = norm(cv);
        if speed <= threshold {
            return Err(Error::RegularityViolation {
                index: idx,
                magnitude: speed,
            });
        }
        let th = dot(&hd[range.clone()], cv) / (speed * speed);
        let tk = dot(&kd[range.clone()], cv) / (speed * speed);
        for i in 0..dim {
            let unit = cv[i] / speed;
            nh[i] = hd[idx * dim + i] / speed - th * unit;
            nk[i] = kd[idx * dim + i] / speed - tk * unit;
        }
        total += wk * (a * a * dot(&nh, &nk) + b * b * th * tk) * speed;
    }
    Ok(total)
}

/// `q ⋆ φ = sqrt(φ') (q ∘ φ)` on the grid of `q`.
pub fn star_action(q: &SrvCurve, w: &Warp) -> SrvCurve {
    let it = q.interpolant(Interpolation::Cubic);
    let dim = q.dim();
    let mut values = vec![0.0; q.values().len()];
    for (k, t) in q.params().into_iter().enumerate() {
        let out = &mut values[k * dim..(k + 1) * dim];
        it.eval_into(w.eval(t), out);
        let s = w.derivative(t).max(0.0).sqrt();
        out.iter_mut().for_each(|x| *x *= s);
    }
    SrvCurve::from_flat(values, dim, q.topology()).expect("same shape as input")
}

/// Sampled path between two curves.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicPath {
    pub steps: Vec<DiscreteCurve>,
    /// Energy of each of the `T - 1` path segments.
    pub step_energies: Vec<f64>,
    pub energy: f64,
}

impl GeodesicPath {
    pub fn times(&self) -> Vec<f64> {
        let n = self.steps.len();
        (0..n).map(|s| s as f64 / (n - 1) as f64).collect()
    }
}

fn check_pair(c0: &DiscreteCurve, c1: &DiscreteCurve, topology: Topology) -> Result<()> {
    if c0.topology() != topology || c1.topology() != topology {
        return Err(Error::InvalidInput(format!(
            "expected two {topology:?} curves"
        )));
    }
    if c0.len() != c1.len() || c0.dim() != c1.dim() {
        return Err(Error::InvalidInput(
            "curves must share dimension and grid".into(),
        ));
    }
    Ok(())
}

fn base_point(c0: &DiscreteCurve, c1: &DiscreteCurve, t: f64) -> Vec<f64> {
    c0.point(0)
        .iter()
        .zip(c1.point(0))
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect()
}

/// Path energy `∫ ‖∂_t R(c)‖² dt` of sampled snapshots, midpoint in `t`.
/// Snapshots whose derivative vanishes somewhere (possible after a
/// non-diffeomorphic warp) fall back to the SRV values they came from.
fn path_energy(steps: &[DiscreteCurve], srvs: &[SrvCurve]) -> (Vec<f64>, f64) {
    let resampled: Vec<SrvCurve> = steps
        .iter()
        .zip(srvs)
        .map(|(c, q)| srvt_with_threshold(c, 0.0).unwrap_or_else(|_| q.clone()))
        .collect();
    let dt = 1.0 / (steps.len() - 1) as f64;
    let per: Vec<f64> = resampled
        .windows(2)
        .map(|p| srv_distance(&p[0], &p[1]).powi(2) / dt)
        .collect();
    let total = per.iter().sum();
    (per, total)
}

/// `L²` distance between the SRV representations of two open curves.
pub fn distance_open(c0: &DiscreteCurve, c1: &DiscreteCurve) -> Result<f64> {
    check_pair(c0, c1, Topology::Open)?;
    let q0 = srvt(c0)?;
    let q1 = srvt(c1)?;
    Ok(srv_distance(&q0, &q1))
}

pub(crate) fn srv_distance(q0: &SrvCurve, q1: &SrvCurve) -> f64 {
    let d: Vec<f64> = q0.values().iter().zip(q1.values()).map(|(a, b)| a - b).collect();
    SrvCurve::from_flat(d, q0.dim(), q0.topology())
        .expect("shape")
        .norm_sq()
        .sqrt()
}

/// Checks that no `θ` has `c0'(θ) = -λ c1'(θ)` with `λ > 0`.
pub fn check_connectable(q0: &SrvCurve, q1: &SrvCurve) -> Result<()> {
    for k in 0..q0.len() {
        let (a, b) = (q0.value(k), q1.value(k));
        let (na, nb) = (norm(a), norm(b));
        if na == 0.0 || nb == 0.0 {
            continue;
        }
        let angle = (dot(a, b) / (na * nb)).clamp(-1.0, 1.0).acos();
        if angle > PI - TAU_ANTI {
            return Err(Error::NotConnectable { index: k, angle });
        }
    }
    Ok(())
}

/// Closed-form geodesic `R⁻¹((1-t) R(c0) + t R(c1))` between open curves,
/// sampled at `t_steps` uniform times. Snapshots are anchored at the linear
/// blend of the two starting points.
pub fn geodesic_open(c0: &DiscreteCurve, c1: &DiscreteCurve, t_steps: usize) -> Result<GeodesicPath> {
    check_pair(c0, c1, Topology::Open)?;
    geodesic_open_srv(&srvt(c0)?, &srvt(c1)?, c0.point(0), c1.point(0), t_steps)
}

/// Open geodesic between SRV functions, with the curves anchored at `p0`
/// and `p1`.
pub fn geodesic_open_srv(
    q0: &SrvCurve,
    q1: &SrvCurve,
    p0: &[f64],
    p1: &[f64],
    t_steps: usize,
) -> Result<GeodesicPath> {
    if t_steps < 2 {
        return Err(Error::InvalidInput("a path needs at least 2 steps".into()));
    }
    check_connectable(q0, q1)?;
    let srvs: Vec<SrvCurve> = (0..t_steps)
        .map(|s| q0.lerp(q1, s as f64 / (t_steps - 1) as f64))
        .collect();
    Ok(assemble(srvs, p0, p1, false))
}

fn blend(p0: &[f64], p1: &[f64], t: f64) -> Vec<f64> {
    p0.iter().zip(p1).map(|(a, b)| (1.0 - t) * a + t * b).collect()
}

fn assemble(srvs: Vec<SrvCurve>, p0: &[f64], p1: &[f64], closed: bool) -> GeodesicPath {
    let t_steps = srvs.len();
    let steps: Vec<DiscreteCurve> = srvs
        .iter()
        .enumerate()
        .map(|(s, q)| {
            let t = s as f64 / (t_steps - 1) as f64;
            srvt_inverse(q).translated(&blend(p0, p1, t))
        })
        .collect();
    let (step_energies, energy) = if closed {
        let dt = 1.0 / (t_steps - 1) as f64;
        let per: Vec<f64> = srvs
            .windows(2)
            .map(|p| srv_distance(&p[0], &p[1]).powi(2) / dt)
            .collect();
        let total = per.iter().sum();
        (per, total)
    } else {
        path_energy(&steps, &srvs)
    };
    GeodesicPath {
        steps,
        step_energies,
        energy,
    }
}

/// The curve at time `t` on the open geodesic, without sampling a full path.
pub fn geodesic_open_point(c0: &DiscreteCurve, c1: &DiscreteCurve, t: f64) -> Result<DiscreteCurve> {
    check_pair(c0, c1, Topology::Open)?;
    let q0 = srvt(c0)?;
    let q1 = srvt(c1)?;
    check_connectable(&q0, &q1)?;
    Ok(srvt_inverse(&q0.lerp(&q1, t)).translated(&base_point(c0, c1, t)))
}

/// The curve at time `t` on the open geodesic between SRV functions.
pub fn geodesic_open_point_srv(
    q0: &SrvCurve,
    q1: &SrvCurve,
    p0: &[f64],
    p1: &[f64],
    t: f64,
) -> Result<DiscreteCurve> {
    check_connectable(q0, q1)?;
    Ok(srvt_inverse(&q0.lerp(q1, t)).translated(&blend(p0, p1, t)))
}

/// Normal fields `U_i(q) = (q_i q + |q|² e_i) / |q|` of the closed-curve
/// submanifold at `q`.
pub fn closed_basis(q: &SrvCurve) -> Result<Vec<TangentField>> {
    let dim = q.dim();
    let n = q.len();
    let mut fields = vec![vec![0.0; n * dim]; dim];
    for k in 0..n {
        let v = q.value(k);
        let m = norm(v);
        if m == 0.0 {
            // Both terms are O(|q|), so the fields extend continuously by 0.
            continue;
        }
        for (i, field) in fields.iter_mut().enumerate() {
            for j in 0..dim {
                let diag = if i == j { m * m } else { 0.0 };
                field[k * dim + j] = (v[i] * v[j] + diag) / m;
            }
        }
    }
    Ok(fields
        .into_iter()
        .map(|f| TangentField::from_flat(f, dim))
        .collect())
}

#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    /// Closure tolerance relative to the curve diameter.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iter: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionReport {
    /// `‖∫|q|q dθ‖` before each iteration and after the last one.
    pub defects: Vec<f64>,
    pub tolerance: f64,
}

impl ProjectionReport {
    pub fn iterations(&self) -> usize {
        self.defects.len() - 1
    }
}

/// Newton projection onto `{q : ∫|q|q dθ = 0}` along the normal fields.
pub fn project_to_closed(q: &SrvCurve) -> Result<SrvCurve> {
    project_to_closed_with(q, ProjectionOptions::default()).map(|(q, _)| q)
}

pub fn project_to_closed_with(
    q: &SrvCurve,
    opts: ProjectionOptions,
) -> Result<(SrvCurve, ProjectionReport)> {
    let q = SrvCurve::from_flat(q.values().to_vec(), q.dim(), Topology::Closed)?;
    let dim = q.dim();
    let diameter = srvt_inverse(&q).diameter();
    let tol = opts.rel_tol * diameter.max(f64::MIN_POSITIVE);
    let w = Topology::Closed.weights(q.len());
    let mut current = q;
    let mut defect = norm(&current.closure_defect());
    let mut defects = vec![defect];
    for _ in 0..opts.max_iter {
        if defect < tol {
            return Ok((
                current,
                ProjectionReport {
                    defects,
                    tolerance: tol,
                },
            ));
        }
        let f = current.closure_defect();
        let basis = closed_basis(&current)?;
        let gram = DMatrix::from_fn(dim, dim, |i, j| {
            weighted(&basis[i].vectors, &basis[j].vectors, dim, &w)
        });
        let rhs = DVector::from_iterator(dim, f.iter().map(|x| -x));
        let beta = gram
            .lu()
            .solve(&rhs)
            .ok_or(Error::ProjectionDiverged {
                iterations: defects.len() - 1,
                defect,
            })?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut values = current.values().to_vec();
            for (i, field) in basis.iter().enumerate() {
                for (x, u) in values.iter_mut().zip(&field.vectors) {
                    *x += step * beta[i] * u;
                }
            }
            let trial = SrvCurve::from_flat(values, dim, Topology::Closed)?;
            let d = norm(&trial.closure_defect());
            if d < defect {
                accepted = Some((trial, d));
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some((trial, d)) => {
                current = trial;
                defect = d;
                defects.push(d);
            }
            None => break,
        }
    }
    if defect < tol {
        return Ok((
            current,
            ProjectionReport {
                defects,
                tolerance: tol,
            },
        ));
    }
    Err(Error::ProjectionDiverged {
        iterations: defects.len() - 1,
        defect,
    })
}

fn weighted(a: &[f64], b: &[f64], dim: usize, w: &[f64]) -> f64 {
    crate::curve::weighted_dot(a, b, dim, w)
}

/// Straight SRV path between closed curves with every interior snapshot
/// projected onto the closed-curve submanifold.
pub fn geodesic_closed(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    t_steps: usize,
) -> Result<GeodesicPath> {
    check_pair(c0, c1, Topology::Closed)?;
    geodesic_closed_srv(&srvt(c0)?, &srvt(c1)?, c0.point(0), c1.point(0), t_steps)
}

/// Closed-curve path between SRV functions of closed curves, anchored at
/// `p0` and `p1`.
pub fn geodesic_closed_srv(
    q0: &SrvCurve,
    q1: &SrvCurve,
    p0: &[f64],
    p1: &[f64],
    t_steps: usize,
) -> Result<GeodesicPath> {
    if t_steps < 2 {
        return Err(Error::InvalidInput("a path needs at least 2 steps".into()));
    }
    let srvs = (0..t_steps)
        .map(|s| {
            if s == 0 {
                return Ok(q0.clone());
            }
            if s == t_steps - 1 {
                return Ok(q1.clone());
            }
            project_to_closed(&q0.lerp(q1, s as f64 / (t_steps - 1) as f64))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(srvs, p0, p1, true))
}

/// Distance between closed curves estimated from the projected path; an
/// approximation from above of the submanifold geodesic distance.
pub fn distance_closed(c0: &DiscreteCurve, c1: &DiscreteCurve) -> Result<f64> {
    distance_closed_with_steps(c0, c1, T_DIST)
}

pub fn distance_closed_with_steps(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    t_steps: usize,
) -> Result<f64> {
    Ok(geodesic_closed(c0, c1, t_steps)?.energy.sqrt())
}
