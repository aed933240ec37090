//! Interpolation between two animations of the same skeleton.
//!
//! The joint-space curve of the result is a point on a path between the two
//! input curves. Its timing blends the timings of the inputs: the pose at
//! parameter `θ` is shown at `(1-s) θ D0/2π + s φ(θ) D1/2π`, so features
//! matched by the warp are shown at the blend of their input times.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Animation, Channel};
use crate::curve::{resample, srvt, DiscreteCurve, Topology, PARAM_LENGTH};
use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::geometry::{geodesic_open_point_srv, star_action};
use crate::interp::Interpolation;
use crate::matcher::{feature_term_reference, match_open, MatchOptions, ReferenceParam};
use crate::warp::Warp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    LinearEuler,
    ElasticNoreparam,
    ElasticReparam,
    ElasticFeatures,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::LinearEuler,
        Scheme::ElasticNoreparam,
        Scheme::ElasticReparam,
        Scheme::ElasticFeatures,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::LinearEuler => "linear-euler",
            Scheme::ElasticNoreparam => "elastic-noreparam",
            Scheme::ElasticReparam => "elastic-reparam",
            Scheme::ElasticFeatures => "elastic-features",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct InterpolateOptions {
    pub matching: MatchOptions,
    /// Weight of feature pairs for the feature scheme.
    pub lambda: f64,
    /// Scale applied to root translation coordinates while matching.
    pub translation_weight: f64,
}

impl Default for InterpolateOptions {
    fn default() -> Self {
        Self {
            matching: MatchOptions::default(),
            lambda: 1.0,
            translation_weight: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Interpolated {
    pub animation: Animation,
    /// Warp applied to the second animation (identity for unwarped schemes).
    pub warp: Warp,
}

/// Interpolates at blend parameter `s`. `feature_times` pairs times in
/// seconds of the first and second animation; only the feature scheme
/// uses them.
pub fn interpolate(
    a0: &Animation,
    a1: &Animation,
    feature_times: &[(f64, f64)],
    scheme: Scheme,
    s: f64,
    opts: &InterpolateOptions,
) -> Result<Interpolated> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidInput(format!("blend parameter {s} outside [0, 1]")));
    }
    let channels: Vec<Channel> = a0.skeleton.channels().collect();
    if channels != a1.skeleton.channels().collect::<Vec<_>>() {
        return Err(Error::InvalidInput("animations use different skeletons".into()));
    }
    if !(opts.translation_weight > 0.0) {
        return Err(Error::InvalidInput("translation weight must be positive".into()));
    }
    let n = a0.frames().max(a1.frames());
    let scale: Vec<f64> = channels
        .iter()
        .map(|c| if c.is_rotation() { 1.0 } else { opts.translation_weight })
        .collect();
    let c0 = scaled(&common_grid(a0.curve(), n)?, &scale, false)?;
    let c1 = scaled(&common_grid(a1.curve(), n)?, &scale, false)?;

    let (gamma, warp) = match scheme {
        Scheme::LinearEuler => {
            let flat = c0
                .samples()
                .iter()
                .zip(c1.samples())
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect();
            (DiscreteCurve::from_flat_unchecked(flat, c0.dim(), Topology::Open)?, Warp::identity())
        }
        Scheme::ElasticNoreparam => {
            let p = geodesic_open_point_srv(&srvt(&c0)?, &srvt(&c1)?, c0.point(0), c1.point(0), s)?;
            (p, Warp::identity())
        }
        Scheme::ElasticReparam | Scheme::ElasticFeatures => {
            let features = if scheme == Scheme::ElasticFeatures {
                let r0 = ReferenceParam::new(0.0, a0.duration())?;
                let r1 = ReferenceParam::new(0.0, a1.duration())?;
                feature_term_reference(&r0, &r1, feature_times, opts.lambda)?
            } else {
                FeatureSpec::none().with_lambda(0.0)
            };
            let m = match_open(&c0, &c1, &features, &opts.matching)?;
            let q1w = star_action(&srvt(&c1)?, &m.warp);
            let p = geodesic_open_point_srv(&srvt(&c0)?, &q1w, c0.point(0), c1.point(0), s)?;
            (p, m.warp)
        }
    };
    let gamma = scaled(&gamma, &scale, true)?;
    // The path starts at the first animation; skip the round trip through the common grid.
    let animation = if s == 0.0 { a0.clone() } else { retime(&gamma, a0, a1, &warp, s)? };
    Ok(Interpolated { animation, warp })
}

fn common_grid(c: &DiscreteCurve, n: usize) -> Result<DiscreteCurve> {
    if c.len() == n {
        Ok(c.clone())
    } else {
        resample(c, n, Interpolation::Cubic)
    }
}

fn scaled(c: &DiscreteCurve, scale: &[f64], invert: bool) -> Result<DiscreteCurve> {
    if scale.iter().all(|&w| w == 1.0) {
        return Ok(c.clone());
    }
    let d = c.dim();
    let flat = c
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| if invert { v / scale[i % d] } else { v * scale[i % d] })
        .collect();
    DiscreteCurve::from_flat_unchecked(flat, d, Topology::Open)
}

/// Samples `gamma` at uniform output frames through the blended time map.
fn retime(gamma: &DiscreteCurve, a0: &Animation, a1: &Animation, warp: &Warp, s: f64) -> Result<Animation> {
    let (d0, d1) = (a0.duration(), a1.duration());
    let thetas = gamma.params();
    let tau: Vec<f64> = thetas
        .iter()
        .map(|&th| ((1.0 - s) * th * d0 + s * warp.eval(th) * d1) / PARAM_LENGTH)
        .collect();
    let duration = (1.0 - s) * d0 + s * d1;
    let fps = (1.0 - s) * a0.frame_rate + s * a1.frame_rate;
    let frames = (duration * fps).round() as usize + 1;
    let it = gamma.interpolant(Interpolation::Cubic);
    let mut flat = Vec::with_capacity(frames * gamma.dim());
    let mut k = 0;
    for j in 0..frames {
        let t = (j as f64 / fps).min(duration);
        while k + 2 < tau.len() && tau[k + 1] < t {
            k += 1;
        }
        let span = tau[k + 1] - tau[k];
        let u = if span > 0.0 { ((t - tau[k]) / span).clamp(0.0, 1.0) } else { 0.0 };
        if u == 0.0 {
            flat.extend_from_slice(gamma.point(k));
        } else if u == 1.0 {
            flat.extend_from_slice(gamma.point(k + 1));
        } else {
            flat.extend(it.eval(thetas[k] + u * (thetas[k + 1] - thetas[k])));
        }
    }
    let curve = DiscreteCurve::from_flat_unchecked(flat, gamma.dim(), Topology::Open)?;
    Animation::from_curve(a0.skeleton.clone(), fps, curve)
}
