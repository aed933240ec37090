//! Skeletal animations as open curves in joint space.
//!
//! An animation with `F` frames becomes a curve with `F` samples on the open
//! parameter grid, one coordinate per channel. Rotation channels are stored
//! in radians and unrolled so that consecutive samples never jump by `π` or
//! more; root translation channels are carried along unchanged.

mod bvh;
mod interpolate;
pub mod synthetic;

use std::fs;
use std::path::Path;

use nalgebra::{Matrix4, Rotation3, Translation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::curve::{DiscreteCurve, Topology, PARAM_LENGTH};
use crate::error::{Error, Result};

pub use bvh::{parse_bvh, write_bvh};
pub use interpolate::{interpolate, InterpolateOptions, Interpolated, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Xposition,
    Yposition,
    Zposition,
    Xrotation,
    Yrotation,
    Zrotation,
}

impl Channel {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "Xposition" => Channel::Xposition,
            "Yposition" => Channel::Yposition,
            "Zposition" => Channel::Zposition,
            "Xrotation" => Channel::Xrotation,
            "Yrotation" => Channel::Yrotation,
            "Zrotation" => Channel::Zrotation,
            other => return Err(Error::UnsupportedChannel(other.into())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Xposition => "Xposition",
            Channel::Yposition => "Yposition",
            Channel::Zposition => "Zposition",
            Channel::Xrotation => "Xrotation",
            Channel::Yrotation => "Yrotation",
            Channel::Zrotation => "Zrotation",
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, Channel::Xrotation | Channel::Yrotation | Channel::Zrotation)
    }

    fn axis(self) -> usize {
        match self {
            Channel::Xposition | Channel::Xrotation => 0,
            Channel::Yposition | Channel::Yrotation => 1,
            Channel::Zposition | Channel::Zrotation => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub offset: [f64; 3],
    #[serde(default)]
    pub channels: Vec<Channel>,
    /// BVH `End Site` leaves carry no channels and no name of their own.
    #[serde(default)]
    pub end_site: bool,
}

/// Joints in parent-before-child order; joint 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Joint>", into = "Vec<Joint>")]
pub struct Skeleton {
    joints: Vec<Joint>,
    /// Index of each joint's first channel in a pose vector.
    channel_start: Vec<usize>,
}

impl TryFrom<Vec<Joint>> for Skeleton {
    type Error = Error;

    fn try_from(joints: Vec<Joint>) -> Result<Self> {
        Skeleton::new(joints)
    }
}

impl From<Skeleton> for Vec<Joint> {
    fn from(s: Skeleton) -> Self {
        s.joints
    }
}

impl Skeleton {
    pub fn new(joints: Vec<Joint>) -> Result<Self> {
        if joints.is_empty() {
            return Err(Error::InvalidInput("skeleton has no joints".into()));
        }
        for (i, j) in joints.iter().enumerate() {
            match (i, j.parent) {
                (0, None) => {}
                (0, Some(_)) => return Err(Error::InvalidInput("root joint has a parent".into())),
                (_, None) => {
                    return Err(Error::InvalidInput(format!("joint `{}` has no parent", j.name)))
                }
                (_, Some(p)) if p >= i => {
                    return Err(Error::InvalidInput(format!(
                        "joint `{}` precedes its parent",
                        j.name
                    )))
                }
                _ => {}
            }
            let rotations = j.channels.iter().filter(|c| c.is_rotation()).count();
            if rotations > 3 || (i > 0 && rotations < j.channels.len()) {
                return Err(Error::InvalidInput(format!(
                    "joint `{}` has unsupported channels",
                    j.name
                )));
            }
        }
        let mut channel_start = Vec::with_capacity(joints.len());
        let mut acc = 0;
        for j in &joints {
            channel_start.push(acc);
            acc += j.channels.len();
        }
        Ok(Self {
            joints,
            channel_start,
        })
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    /// Number of channels, the dimension of joint space.
    pub fn dof(&self) -> usize {
        self.joints.iter().map(|j| j.channels.len()).sum()
    }

    /// Channels in pose-vector order.
    pub fn channels(&self) -> impl Iterator<Item = Channel> + '_ {
        self.joints.iter().flat_map(|j| j.channels.iter().copied())
    }

    pub fn find(&self, name: &str) -> Result<usize> {
        self.joints
            .iter()
            .position(|j| j.name == name && !j.end_site)
            .ok_or_else(|| Error::InvalidInput(format!("no joint named `{name}`")))
    }

    /// World positions of all joints for one pose. Translation channels are
    /// added to the joint offset; rotations are applied in channel order, so
    /// channels `Z X Y` give `Rz · Rx · Ry`.
    pub fn forward_kinematics(&self, pose: &[f64]) -> Vec<[f64; 3]> {
        assert_eq!(pose.len(), self.dof(), "pose length");
        let mut world: Vec<Matrix4<f64>> = Vec::with_capacity(self.joints.len());
        for (i, j) in self.joints.iter().enumerate() {
            let mut t = Vector3::from(j.offset);
            let mut r = Rotation3::identity();
            let values = &pose[self.channel_start[i]..self.channel_start[i] + j.channels.len()];
            for (c, &v) in j.channels.iter().zip(values) {
                if c.is_rotation() {
                    r *= Rotation3::from_axis_angle(&axis(c.axis()), v);
                } else {
                    t[c.axis()] += v;
                }
            }
            let local = Translation3::from(t).to_homogeneous() * r.to_homogeneous();
            world.push(match j.parent {
                Some(p) => world[p] * local,
                None => local,
            });
        }
        world.iter().map(|m| [m[(0, 3)], m[(1, 3)], m[(2, 3)]]).collect()
    }
}

fn axis(i: usize) -> nalgebra::Unit<Vector3<f64>> {
    match i {
        0 => Vector3::x_axis(),
        1 => Vector3::y_axis(),
        _ => Vector3::z_axis(),
    }
}

/// An animation: skeleton, frame rate and the joint-space curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Animation {
    pub skeleton: Skeleton,
    pub frame_rate: f64,
    curve: DiscreteCurve,
}

impl Animation {
    /// Builds an animation from raw frames; rotation channels are unrolled.
    pub fn new(skeleton: Skeleton, frame_rate: f64, frames: &[Vec<f64>]) -> Result<Self> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::InvalidInput("frame rate must be positive".into()));
        }
        if frames.len() < 2 {
            return Err(Error::InvalidInput("an animation needs at least 2 frames".into()));
        }
        let d = skeleton.dof();
        if let Some(bad) = frames.iter().position(|f| f.len() != d) {
            return Err(Error::InvalidInput(format!(
                "frame {bad} has {} values, expected {d}",
                frames[bad].len()
            )));
        }
        let rotations: Vec<bool> = skeleton.channels().map(Channel::is_rotation).collect();
        let mut flat: Vec<f64> = frames.concat();
        unroll(&mut flat, &rotations);
        let curve = DiscreteCurve::from_flat_unchecked(flat, d.max(1), Topology::Open)?;
        Ok(Self {
            skeleton,
            frame_rate,
            curve,
        })
    }

    /// Wraps an already unrolled joint-space curve.
    pub fn from_curve(skeleton: Skeleton, frame_rate: f64, curve: DiscreteCurve) -> Result<Self> {
        if curve.dim() != skeleton.dof() || curve.topology() != Topology::Open {
            return Err(Error::InvalidInput("curve does not fit the skeleton".into()));
        }
        Ok(Self {
            skeleton,
            frame_rate,
            curve,
        })
    }

    pub fn curve(&self) -> &DiscreteCurve {
        &self.curve
    }

    pub fn frames(&self) -> usize {
        self.curve.len()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        self.curve.point(k)
    }

    /// Duration in seconds, first to last frame.
    pub fn duration(&self) -> f64 {
        (self.frames() - 1) as f64 / self.frame_rate
    }

    pub fn time_to_param(&self, t: f64) -> f64 {
        PARAM_LENGTH * t / self.duration()
    }

    pub fn param_to_time(&self, theta: f64) -> f64 {
        theta * self.duration() / PARAM_LENGTH
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        if extension_is(path, "bvh") {
            parse_bvh(&text)
        } else {
            Self::from_json(&text)
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = if extension_is(path, "bvh") {
            write_bvh(self)
        } else {
            self.to_json()?
        };
        fs::write(path, text)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: AnimationFile = serde_json::from_str(text)?;
        Self::new(f.skeleton, f.frame_rate, &f.frames)
    }

    pub fn to_json(&self) -> Result<String> {
        let f = AnimationFile {
            frame_rate: self.frame_rate,
            skeleton: self.skeleton.clone(),
            frames: self.curve.points().map(<[f64]>::to_vec).collect(),
        };
        Ok(serde_json::to_string_pretty(&f)?)
    }

    /// World positions of one joint over all frames.
    pub fn joint_track(&self, joint: usize) -> Vec<[f64; 3]> {
        self.curve
            .points()
            .map(|p| self.skeleton.forward_kinematics(p)[joint])
            .collect()
    }
}

fn extension_is(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnimationFile {
    frame_rate: f64,
    skeleton: Skeleton,
    frames: Vec<Vec<f64>>,
}

/// Adds multiples of `2π` to rotation coordinates so that consecutive
/// samples differ by less than `π`.
pub fn unroll(flat: &mut [f64], rotations: &[bool]) {
    let d = rotations.len();
    if d == 0 {
        return;
    }
    let frames = flat.len() / d;
    for (i, _) in rotations.iter().enumerate().filter(|(_, r)| **r) {
        let mut shift = 0.0;
        for k in 1..frames {
            let prev = flat[(k - 1) * d + i];
            let raw = flat[k * d + i] + shift;
            let jump = ((raw - prev) / PARAM_LENGTH).round() * PARAM_LENGTH;
            shift -= jump;
            flat[k * d + i] = raw - jump;
        }
    }
}

/// Joint names and axis used to detect the left knee passing the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KneeConfig {
    pub left: String,
    pub right: String,
    pub forward: [f64; 3],
}

impl Default for KneeConfig {
    fn default() -> Self {
        Self {
            left: "LeftLeg".into(),
            right: "RightLeg".into(),
            forward: [0.0, 0.0, 1.0],
        }
    }
}

/// Signed forward distance of the left knee ahead of the right, per frame.
pub fn knee_signal(anim: &Animation, cfg: &KneeConfig) -> Result<Vec<f64>> {
    let (l, r) = (anim.skeleton.find(&cfg.left)?, anim.skeleton.find(&cfg.right)?);
    let f = cfg.forward;
    Ok(anim
        .curve
        .points()
        .map(|p| {
            let x = anim.skeleton.forward_kinematics(p);
            (0..3).map(|i| (x[l][i] - x[r][i]) * f[i]).sum()
        })
        .collect())
}

/// Times in seconds where a sampled signal crosses zero upwards, located by
/// linear interpolation between frames.
pub fn upward_crossings(signal: &[f64], frame_rate: f64) -> Vec<f64> {
    signal
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
        .map(|(k, w)| (k as f64 + w[0] / (w[0] - w[1])) / frame_rate)
        .collect()
}

/// The first `count` times the left knee moves forward past the right knee.
pub fn detect_knee_crossings(anim: &Animation, cfg: &KneeConfig, count: usize) -> Result<Vec<f64>> {
    let all = upward_crossings(&knee_signal(anim, cfg)?, anim.frame_rate);
    if all.len() < count {
        return Err(Error::InsufficientCrossings {
            found: all.len(),
            requested: count,
        });
    }
    Ok(all[..count].to_vec())
}

/// World trajectories of the two feet.
pub fn foot_trajectories(anim: &Animation, left: &str, right: &str) -> Result<[Vec<[f64; 3]>; 2]> {
    let (l, r) = (anim.skeleton.find(left)?, anim.skeleton.find(right)?);
    Ok([anim.joint_track(l), anim.joint_track(r)])
}

/// Trajectories as CSV rows `t, left_x, left_y, left_z, right_x, right_y, right_z`.
pub fn trajectories_csv(anim: &Animation, feet: &[Vec<[f64; 3]>; 2]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "left_x", "left_y", "left_z", "right_x", "right_y", "right_z"])?;
    for k in 0..feet[0].len() {
        let mut row = vec![(k as f64 / anim.frame_rate).to_string()];
        row.extend(feet[0][k].iter().chain(&feet[1][k]).map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    crate::io::finish_csv(w)
}

/// Side view (forward axis horizontal, height vertical) of foot trajectories.
pub fn trajectories_svg(sets: &[(&str, &[Vec<[f64; 3]>; 2])]) -> String {
    use crate::io::Svg;
    let project = |p: &[f64; 3]| vec![p[2], p[1]];
    let rows: Vec<Vec<Vec<Vec<f64>>>> = sets
        .iter()
        .enumerate()
        .map(|(row, (_, feet))| {
            feet.iter()
                .map(|track| {
                    track
                        .iter()
                        .map(|p| {
                            let mut q = project(p);
                            q[1] -= row as f64;
                            q
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let all = rows.iter().flatten().flatten().map(Vec::as_slice);
    let mut svg = Svg::fit(all, 640.0, 120.0 * sets.len().max(1) as f64);
    for feet in &rows {
        svg.polyline(feet[0].iter().map(Vec::as_slice), "#1f77b4", false);
        svg.polyline(feet[1].iter().map(Vec::as_slice), "#d62728", false);
    }
    svg.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn arm() -> Skeleton {
        Skeleton::new(vec![
            Joint {
                name: "Shoulder".into(),
                parent: None,
                offset: [0.0; 3],
                channels: vec![Channel::Zrotation],
                end_site: false,
            },
            Joint {
                name: "Elbow".into(),
                parent: Some(0),
                offset: [1.0, 0.0, 0.0],
                channels: vec![Channel::Zrotation],
                end_site: false,
            },
            Joint {
                name: "Hand".into(),
                parent: Some(1),
                offset: [1.0, 0.0, 0.0],
                channels: vec![],
                end_site: true,
            },
        ])
        .unwrap()
    }

    #[test]
    fn rest_pose_is_cumulative_offsets() {
        let x = arm().forward_kinematics(&[0.0, 0.0]);
        assert_eq!(x, vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
    }

    #[test]
    fn elbow_quarter_turn() {
        let x = arm().forward_kinematics(&[0.0, FRAC_PI_2]);
        assert!((x[2][0] - 1.0).abs() < 1e-15 && (x[2][1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unrolling_removes_wraps() {
        let deg = [359.0f64, 1.0, 3.0, -179.0, 179.0];
        let mut v: Vec<f64> = deg.iter().map(|d| d.to_radians()).collect();
        unroll(&mut v, &[true]);
        assert!((v[1].to_degrees() - 361.0).abs() < 1e-9);
        assert!(v.windows(2).all(|w| (w[1] - w[0]).abs() < std::f64::consts::PI));
        for (a, d) in v.iter().zip(deg) {
            let wrapped = (a - d.to_radians()) / PARAM_LENGTH;
            assert!((wrapped - wrapped.round()).abs() < 1e-12);
        }
    }

    #[test]
    fn crossings_interpolate_between_frames() {
        let s = [-1.0, 1.0, 2.0, -2.0, -1.0, 3.0];
        let t = upward_crossings(&s, 10.0);
        assert_eq!(t.len(), 2);
        assert!((t[0] - 0.05).abs() < 1e-15 && (t[1] - 0.425).abs() < 1e-15);
    }

    #[test]
    fn skeleton_validation() {
        let mut j = arm().joints().to_vec();
        j[2].parent = Some(2);
        assert!(Skeleton::new(j).is_err());
        assert!(Channel::parse("Wrotation").is_err());
    }
}
