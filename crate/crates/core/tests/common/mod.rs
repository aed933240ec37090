#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use srvmatch::{DiscreteCurve, Topology, Warp};

pub fn line(n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Open, |t| vec![t, 0.5 * t]).unwrap()
}

pub fn arc(n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Open, |t| vec![(0.4 * t).cos(), (0.4 * t).sin()]).unwrap()
}

pub fn circle(n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Closed, |t| vec![t.cos(), t.sin()]).unwrap()
}

pub fn ellipse(n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Closed, |t| vec![1.5 * t.cos(), 0.7 * t.sin()]).unwrap()
}

/// `x = θ`, `y = a sin(kθ)`: the waves of the correspondence figures.
pub fn wave(n: usize, amplitude: f64, k: f64) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Open, |t| vec![t, amplitude * (k * t).sin()]).unwrap()
}

/// Smooth closed outline with a palm and five finger lobes.
pub fn hand(n: usize, spread: f64) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Closed, |t| {
        let fingers: f64 = (0..5)
            .map(|i| {
                let centre = 0.25 * PI + i as f64 * spread;
                let d = (t - centre).sin();
                0.9 * (-d * d / 0.012).exp()
            })
            .sum();
        let r = 1.0 + fingers + 0.1 * (2.0 * t).cos();
        vec![r * t.cos(), 0.8 * r * t.sin()]
    })
    .unwrap()
}

pub fn space_curve(n: usize) -> DiscreteCurve {
    DiscreteCurve::from_fn(n, Topology::Open, |t| vec![t.cos(), t.sin(), 0.3 * t]).unwrap()
}

/// `φ(θ) = θ + a sin(kθ) / k`, a diffeomorphism for `|a| < 1` and integer `k`.
pub fn sine_warp(a: f64, k: f64) -> Warp {
    Warp::from_fn(65537, move |t| t + a * (k * t).sin() / k, move |t| 1.0 + a * (k * t).cos())
}

/// `φ(θ) = θ + a θ (2π - θ) / 2π`, with `φ'(0) = 1 + a`.
pub fn quadratic_warp(a: f64) -> Warp {
    Warp::from_fn(
        65537,
        move |t| t + a * t * (TAU - t) / TAU,
        move |t| 1.0 + a * (TAU - 2.0 * t) / TAU,
    )
}
