//! Synthetic walking animations with known knee-crossing times.
//!
//! The hips swing with angle `a(t) = A sin(2π (t - t0) / T)`, left and right
//! in opposition, so the left knee passes the right exactly when `a`
//! crosses zero upwards: at `t0 + kT`. Each knee flexes while its leg swings
//! forward, and the root moves forward at constant speed.

use std::f64::consts::TAU;

use super::{Animation, Channel, Joint, Skeleton};
use crate::error::Result;

const HIP_SWING: f64 = 0.4;
const KNEE_FLEX: f64 = 0.6;
const THIGH: f64 = 0.45;
const SHIN: f64 = 0.45;

/// Parameters of one synthetic walk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gait {
    pub period: f64,
    pub first_crossing: f64,
    pub duration: f64,
    pub speed: f64,
    pub frame_rate: f64,
}

impl Gait {
    /// Knee-crossing times inside the animation.
    pub fn crossings(&self) -> Vec<f64> {
        (0..)
            .map(|k| self.first_crossing + k as f64 * self.period)
            .take_while(|&t| t <= self.duration)
            .collect()
    }

    pub fn animation(&self) -> Result<Animation> {
        let frames = (self.duration * self.frame_rate).round() as usize + 1;
        let rows: Vec<Vec<f64>> = (0..frames)
            .map(|k| self.pose(k as f64 / self.frame_rate))
            .collect();
        Animation::new(skeleton(), self.frame_rate, &rows)
    }

    fn pose(&self, t: f64) -> Vec<f64> {
        let phase = TAU * (t - self.first_crossing) / self.period;
        let a = HIP_SWING * phase.sin();
        let flex_l = KNEE_FLEX * 0.5 * (1.0 + phase.cos());
        let flex_r = KNEE_FLEX * 0.5 * (1.0 - phase.cos());
        let bob = 0.9 + 0.01 * (2.0 * phase).cos();
        let mut p = vec![0.0, bob, self.speed * t, 0.0, 0.0, 0.0];
        for (hip, knee) in [(-a, flex_l), (a, flex_r)] {
            p.extend([0.0, hip, 0.0, 0.0, knee, 0.0, 0.0, 0.0, 0.0]);
        }
        p
    }
}

/// The two-step walk: crossings at 0.9 s and 1.9 s, 2.6 s long.
pub fn walk2() -> Gait {
    Gait {
        period: 1.0,
        first_crossing: 0.9,
        duration: 2.6,
        speed: 1.2,
        frame_rate: 30.0,
    }
}

/// The three-step walk: crossings at 0.7 s, 1.5 s and 2.3 s, 2.8 s long.
pub fn walk3() -> Gait {
    Gait {
        period: 0.8,
        first_crossing: 0.7,
        duration: 2.8,
        speed: 1.0,
        frame_rate: 30.0,
    }
}

/// Hips with two legs of thigh, shin and foot; all joints use `Z X Y`.
pub fn skeleton() -> Skeleton {
    let zxy = vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation];
    let mut root_channels = vec![Channel::Xposition, Channel::Yposition, Channel::Zposition];
    root_channels.extend(&zxy);
    let mut joints = vec![Joint {
        name: "Hips".into(),
        parent: None,
        offset: [0.0; 3],
        channels: root_channels,
        end_site: false,
    }];
    for (side, x) in [("Left", 0.1), ("Right", -0.1)] {
        let base = joints.len();
        let chain = [
            (format!("{side}UpLeg"), [x, 0.0, 0.0], Some(0)),
            (format!("{side}Leg"), [0.0, -THIGH, 0.0], Some(base)),
            (format!("{side}Foot"), [0.0, -SHIN, 0.0], Some(base + 1)),
        ];
        for (name, offset, parent) in chain {
            joints.push(Joint {
                name,
                parent,
                offset,
                channels: zxy.clone(),
                end_site: false,
            });
        }
        joints.push(Joint {
            name: format!("{side}Foot_End"),
            parent: Some(base + 2),
            offset: [0.0, -0.05, 0.15],
            channels: vec![],
            end_site: true,
        });
    }
    Skeleton::new(joints).expect("valid skeleton")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::animation::{detect_knee_crossings, KneeConfig};

    #[test]
    fn crossings_match_construction() {
        for g in [walk2(), walk3()] {
            let a = g.animation().unwrap();
            let want = g.crossings();
            let got = detect_knee_crossings(&a, &KneeConfig::default(), want.len()).unwrap();
            for (w, t) in want.iter().zip(&got) {
                assert!((w - t).abs() < 1.0 / g.frame_rate, "{w} vs {t}");
            }
            assert!(detect_knee_crossings(&a, &KneeConfig::default(), want.len() + 1).is_err());
        }
    }
}
