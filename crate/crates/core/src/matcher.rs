//! Matching of curves with feature points: reparametrization search followed
//! by the geodesic between `c0` and `c1 ∘ φ`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curve::{apply_warp, apply_warp_flagged, srvt, DiscreteCurve, SrvCurve, Topology, PARAM_LENGTH};
use crate::dp::{dp_match, DpGrid};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::geometry::{
    geodesic_closed_srv, geodesic_open_srv, project_to_closed, srv_distance, star_action,
    GeodesicPath,
};
use crate::grad::{warp_to_psi, DescentOptions, GradProblem, Init, PsiField};
use crate::interp::Interpolation;
use crate::warp::Warp;

pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_GEODESIC_STEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "dp")]
    Dp,
    #[serde(rename = "grad")]
    Grad,
    #[default]
    #[serde(rename = "dp+grad")]
    DpGrad,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dp" => Ok(Method::Dp),
            "grad" => Ok(Method::Grad),
            "dp+grad" => Ok(Method::DpGrad),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dp => "dp",
            Method::Grad => "grad",
            Method::DpGrad => "dp+grad",
        })
    }
}

#[derive(Debug, Clone)]
pub struct MatchOptions {
    pub method: Method,
    pub grid: DpGrid,
    pub descent: DescentOptions,
    pub geodesic_steps: usize,
}

impl Default for MatchOptions {
    fn default() -> Self {
        Self {
            method: Method::DpGrad,
            grid: DpGrid::default(),
            descent: DescentOptions::default(),
            geodesic_steps: DEFAULT_GEODESIC_STEPS,
        }
    }
}

impl MatchOptions {
    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

/// Optimizer bookkeeping.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub method: String,
    /// `H(M, M)` of the lattice search, when it ran.
    pub dp_energy: Option<f64>,
    /// Energy of the lattice warp under the reported discretization.
    pub dp_reported: Option<f64>,
    pub descent_trace: Vec<f64>,
    pub descent_converged: Option<bool>,
    /// True when gradient refinement improved on the lattice warp.
    pub refined: bool,
    /// True when `c1 ∘ φ` has a vanishing derivative somewhere.
    pub warp_flagged: bool,
}

#[derive(Debug, Clone)]
pub struct MatchResult {
    pub warp: Warp,
    pub elastic_energy: f64,
    /// Unweighted feature term `Σ FM_i`.
    pub feature_energy: f64,
    pub lambda: f64,
    /// `elastic_energy + lambda * feature_energy`.
    pub total: f64,
    pub geodesic: GeodesicPath,
    pub diagnostics: Diagnostics,
}

/// Energies of a warp under the reporting discretization shared by all
/// methods: node values and node derivatives of the warp on the curve grid.
struct Reporter {
    elastic: GradProblem,
    c1: DiscreteCurve,
}

impl Reporter {
    fn new(c0: &DiscreteCurve, c1: &DiscreteCurve) -> Result<Self> {
        Ok(Self {
            elastic: GradProblem::new(c0, c1, &FeatureSpec::none())?,
            c1: c1.clone(),
        })
    }

    fn parts(&self, warp: &Warp, features: &FeatureSpec) -> (f64, f64) {
        let (elastic, _) = self.elastic.energy_warp_parts(warp);
        (elastic, feature_value(&self.c1, warp, features))
    }

    fn total(&self, warp: &Warp, features: &FeatureSpec) -> f64 {
        let (e, f) = self.parts(warp, features);
        combine(e, f, features.lambda)
    }
}

fn combine(elastic: f64, feature: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        elastic
    } else {
        elastic + lambda * feature
    }
}

/// `Σ FM_i` for a warp; positional kinds evaluate `c1` by cubic splines.
pub fn feature_value(c1: &DiscreteCurve, warp: &Warp, features: &FeatureSpec) -> f64 {
    if features.is_empty() {
        return 0.0;
    }
    let it = c1.interpolant(Interpolation::Cubic);
    features.evaluate(|t| warp.eval(t), |t| it.eval(t))
}

struct Search {
    warp: Warp,
    diagnostics: Diagnostics,
}

fn search(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    features: &FeatureSpec,
    opts: &MatchOptions,
    reporter: &Reporter,
) -> Result<Search> {
    let mut diag = Diagnostics {
        method: opts.method.to_string(),
        ..Default::default()
    };
    let want_dp = opts.method != Method::Grad || opts.descent.init == Init::Dp;
    let dp = if want_dp {
        let r = dp_match(c0, c1, &opts.grid, features)?;
        diag.dp_energy = Some(r.energy);
        diag.dp_reported = Some(reporter.total(&r.warp, features));
        Some(r.warp)
    } else {
        None
    };
    if opts.method == Method::Dp {
        return Ok(Search {
            warp: dp.expect("lattice search ran"),
            diagnostics: diag,
        });
    }
    let problem = GradProblem::new(c0, c1, features)?;
    let init = match &dp {
        Some(w) => warp_to_psi(w, problem.len()),
        None => PsiField::identity(problem.len()),
    };
    let descent = problem.descend(&init, &opts.descent)?;
    diag.descent_trace = descent.trace.clone();
    diag.descent_converged = Some(descent.converged);
    let refined = reporter.total(&descent.warp, features);
    let warp = match (dp, diag.dp_reported) {
        (Some(w), Some(e)) if opts.method == Method::DpGrad && e <= refined => w,
        _ => {
            diag.refined = true;
            descent.warp
        }
    };
    Ok(Search {
        warp,
        diagnostics: diag,
    })
}

fn check_pair(c0: &DiscreteCurve, c1: &DiscreteCurve, topology: Topology) -> Result<()> {
    if c0.topology() != topology || c1.topology() != topology {
        return Err(Error::InvalidInput(format!("expected two {topology:?} curves")));
    }
    if c0.len() != c1.len() || c0.dim() != c1.dim() {
        return Err(Error::InvalidInput("curves must share dimension and grid".into()));
    }
    Ok(())
}

/// Minimizes the open-curve matching energy and builds the geodesic from
/// `c0` to `c1 ∘ φ`.
pub fn match_open(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    features: &FeatureSpec,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    check_pair(c0, c1, Topology::Open)?;
    if features.symmetric {
        return match_symmetric(c0, c1, features, opts);
    }
    let reporter = Reporter::new(c0, c1)?;
    let Search {
        warp,
        mut diagnostics,
    } = search(c0, c1, features, opts, &reporter)?;
    let (elastic, feature) = reporter.parts(&warp, features);
    let q0 = srvt(c0)?;
    let q1w = star_action(&srvt(c1)?, &warp);
    diagnostics.warp_flagged = apply_warp_flagged(c1, &warp).1;
    let geodesic = geodesic_open_srv(&q0, &q1w, c0.point(0), c1.point(0), opts.geodesic_steps)?;
    Ok(MatchResult {
        warp,
        elastic_energy: elastic,
        feature_energy: feature,
        lambda: features.lambda,
        total: combine(elastic, feature, features.lambda),
        geodesic,
        diagnostics,
    })
}

/// Closed curves: the search minimizes the ambient SRV distance, the
/// reported elastic energy is the energy of the projected path to `c1 ∘ φ`.
pub fn match_closed(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    features: &FeatureSpec,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    check_pair(c0, c1, Topology::Closed)?;
    if features.symmetric {
        return match_symmetric(c0, c1, features, opts);
    }
    let reporter = Reporter::new(c0, c1)?;
    let Search {
        warp,
        mut diagnostics,
    } = search(c0, c1, features, opts, &reporter)?;
    diagnostics.warp_flagged = apply_warp_flagged(c1, &warp).1;
    let geodesic = closed_path(c0, c1, &warp, opts.geodesic_steps)?;
    let feature = feature_value(c1, &warp, features);
    Ok(MatchResult {
        warp,
        elastic_energy: geodesic.energy,
        feature_energy: feature,
        lambda: features.lambda,
        total: combine(geodesic.energy, feature, features.lambda),
        geodesic,
        diagnostics,
    })
}

fn closed_path(c0: &DiscreteCurve, c1: &DiscreteCurve, warp: &Warp, t_steps: usize) -> Result<GeodesicPath> {
    let q0 = srvt(c0)?;
    let q1w = project_to_closed(&star_action(&srvt(c1)?, warp))?;
    geodesic_closed_srv(&q0, &q1w, c0.point(0), c1.point(0), t_steps)
}

/// Symmetrized matching, minimized by dynamic programming only.
pub fn match_symmetric(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    features: &FeatureSpec,
    opts: &MatchOptions,
) -> Result<MatchResult> {
    if opts.method != Method::Dp {
        return Err(Error::MethodUnavailable(format!(
            "symmetric matching supports the dp method only, got `{}`",
            opts.method
        )));
    }
    check_pair(c0, c1, c0.topology())?;
    let features = features.clone().with_symmetric(true);
    let r = dp_match(c0, c1, &opts.grid, &features)?;
    let warp = r.warp;
    let (elastic, feature) = symmetric_parts(c0, c1, &warp, &features)?;
    let diagnostics = Diagnostics {
        method: "dp (symmetric)".into(),
        dp_energy: Some(r.energy),
        dp_reported: Some(combine(elastic, feature, features.lambda)),
        warp_flagged: apply_warp_flagged(c1, &warp).1,
        ..Default::default()
    };
    let geodesic = match c0.topology() {
        Topology::Open => geodesic_open_srv(
            &srvt(c0)?,
            &star_action(&srvt(c1)?, &warp),
            c0.point(0),
            c1.point(0),
            opts.geodesic_steps,
        )?,
        Topology::Closed => closed_path(c0, c1, &warp, opts.geodesic_steps)?,
    };
    Ok(MatchResult {
        warp,
        elastic_energy: elastic,
        feature_energy: feature,
        lambda: features.lambda,
        total: combine(elastic, feature, features.lambda),
        geodesic,
        diagnostics,
    })
}

/// `(½(‖q0 - q1⋆φ‖² + ‖q1 - q0⋆φ⁻¹‖²), forward + mirrored feature terms)`.
fn symmetric_parts(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    warp: &Warp,
    features: &FeatureSpec,
) -> Result<(f64, f64)> {
    let inv = warp.inverse()?;
    let forward = Reporter::new(c0, c1)?;
    let backward = Reporter::new(c1, c0)?;
    let mirrored = features.mirrored();
    let (e0, f0) = forward.parts(warp, features);
    let (e1, f1) = backward.parts(&inv, &mirrored);
    Ok((0.5 * (e0 + e1), f0 + f1))
}

/// Affine map from a reference parametrization (for instance time in
/// seconds) onto `[0, 2π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceParam {
    pub origin: f64,
    pub length: f64,
}

impl ReferenceParam {
    pub fn new(origin: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidInput("reference length must be positive".into()));
        }
        Ok(Self { origin, length })
    }

    pub fn to_param(&self, x: f64) -> f64 {
        PARAM_LENGTH * (x - self.origin) / self.length
    }

    pub fn from_param(&self, theta: f64) -> f64 {
        self.origin + theta * self.length / PARAM_LENGTH
    }
}

/// Quadratic parameter-space feature term for features given in the
/// reference parametrizations of the two curves.
pub fn feature_term_reference(
    ref0: &ReferenceParam,
    ref1: &ReferenceParam,
    pairs: &[(f64, f64)],
    lambda: f64,
) -> Result<FeatureSpec> {
    let mapped: Vec<(f64, f64)> = pairs
        .iter()
        .map(|&(a, b)| (ref0.to_param(a), ref1.to_param(b)))
        .collect();
    let spec = FeatureSpec::quadratic(&mapped, lambda);
    spec.validate()?;
    Ok(spec)
}

/// Weighted feature term `λ Σ FM_i` of a warp.
pub fn feature_term(c1: &DiscreteCurve, warp: &Warp, features: &FeatureSpec) -> f64 {
    let f = feature_value(c1, warp, features);
    combine(0.0, f, features.lambda)
}

/// Energies compared by [`invariance_check`].
#[derive(Debug, Clone, Serialize)]
pub struct InvarianceReport {
    /// Path energy plus feature term of the geodesic from `c0` to `c1`,
    /// before and after reparametrizing every snapshot by the test warp.
    pub path_energy: [f64; 2],
    /// Matching energy of `(c0, θ0)` against `c1` at the identity, and of
    /// `(c0 ∘ ψ, ψ⁻¹(θ0))` against `c1` at `ψ`.
    pub match_energy: [f64; 2],
    pub discrepancy: f64,
}

/// Checks that energies do not change when the curves and the feature
/// parameters are reparametrized together.
pub fn invariance_check(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    features: &FeatureSpec,
    psi_test: &Warp,
) -> Result<InvarianceReport> {
    if !features.all_parametric() {
        return Err(Error::MethodUnavailable(
            "invariance check uses quadratic feature terms".into(),
        ));
    }
    let inv = psi_test.inverse()?;
    let pulled = |f: &FeatureSpec| -> FeatureSpec {
        let mut g = f.clone();
        for p in &mut g.pairs {
            p.theta0 = inv.eval(p.theta0);
        }
        g
    };
    let t_steps = 8;
    let (q0, q1) = (srvt(c0)?, srvt(c1)?);
    let path = match c0.topology() {
        Topology::Open => geodesic_open_srv(&q0, &q1, c0.point(0), c1.point(0), t_steps)?,
        Topology::Closed => geodesic_closed_srv(&q0, &q1, c0.point(0), c1.point(0), t_steps)?,
    };
    let end = path.steps.last().expect("non-empty path");
    let warped: Vec<DiscreteCurve> = path
        .steps
        .iter()
        .map(|c| apply_warp(c, psi_test))
        .collect::<Result<_>>()?;
    let warped_end = warped.last().expect("non-empty path");
    let position_term = |curve: &DiscreteCurve, f: &FeatureSpec| -> f64 {
        let a = curve.interpolant(Interpolation::Cubic);
        let b = c1.interpolant(Interpolation::Cubic);
        f.pairs
            .iter()
            .map(|p| crate::curve::dist_sq(&a.eval(p.theta0), &b.eval(p.theta1)))
            .sum()
    };
    let energy_of = |steps: &[DiscreteCurve]| -> Result<f64> {
        let srvs: Vec<SrvCurve> = steps.iter().map(srvt).collect::<Result<_>>()?;
        let dt = 1.0 / (steps.len() - 1) as f64;
        Ok(srvs
            .windows(2)
            .map(|p| srv_distance(&p[0], &p[1]).powi(2) / dt)
            .sum())
    };
    let lambda = features.lambda;
    let path_a = energy_of(&path.steps)? + lambda * position_term(end, features);
    let path_b = energy_of(&warped)? + lambda * position_term(warped_end, &pulled(features));

    let c0w = apply_warp(c0, psi_test)?;
    let match_a = Reporter::new(c0, c1)?.total(&Warp::identity(), features);
    let match_b = Reporter::new(&c0w, c1)?.total(psi_test, &pulled(features));

    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
    Ok(InvarianceReport {
        path_energy: [path_a, path_b],
        match_energy: [match_a, match_b],
        discrepancy: rel(path_a, path_b).max(rel(match_a, match_b)),
    })
}
