use srvmatch::animation::synthetic::{skeleton, walk2, walk3};
use srvmatch::animation::{
    detect_knee_crossings, foot_trajectories, interpolate, knee_signal, parse_bvh, upward_crossings,
    write_bvh, Animation, Channel, InterpolateOptions, Joint, KneeConfig, Scheme, Skeleton,
};
use srvmatch::curve::srvt;
use srvmatch::geometry::star_action;
use srvmatch::{Error, Warp};
use tempfile::TempDir;

const CONSTANT: &str = "HIERARCHY
ROOT Hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Shin
  {
    OFFSET 0 -1 0
    CHANNELS 3 Zrotation Xrotation Yrotation
    End Site
    {
      OFFSET 0 -1 0
    }
  }
}
MOTION
Frames: 10
Frame Time: 0.04
";

#[test]
fn constant_pose_gives_constant_samples() {
    let row = "0.5 1 0 10 20 30 -5 15 45\n";
    let text = format!("{CONSTANT}{}", row.repeat(10));
    let a = parse_bvh(&text).unwrap();
    assert_eq!(a.frames(), 10);
    for k in 1..10 {
        assert_eq!(a.frame(k), a.frame(0));
    }
    assert!((a.frame(0)[5] - 30f64.to_radians()).abs() < 1e-15);
}

#[test]
fn files_round_trip() {
    let d = TempDir::new().unwrap();
    let a = walk3().animation().unwrap();
    for name in ["w.bvh", "w.json"] {
        let p = d.path().join(name);
        a.save(&p).unwrap();
        let b = Animation::load(&p).unwrap();
        assert_eq!(b.skeleton, a.skeleton);
        assert!(b.curve().max_abs_diff(a.curve()) < 1e-9, "{name}");
        assert!((b.frame_rate - a.frame_rate).abs() < 1e-9);
    }
    let again = parse_bvh(&write_bvh(&parse_bvh(&write_bvh(&a)).unwrap())).unwrap();
    assert!(again.curve().max_abs_diff(a.curve()) < 1e-12);
}

fn rot(axis: usize, a: f64) -> [[f64; 3]; 3] {
    let (s, c) = a.sin_cos();
    match axis {
        0 => [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        1 => [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        _ => [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
    }
}

fn mul(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut r = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            r[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    r
}

fn apply(m: [[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| m[i][k] * v[k]).sum())
}

fn chain() -> Skeleton {
    let zxy = vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation];
    Skeleton::new(vec![
        Joint { name: "Root".into(), parent: None, offset: [0.0; 3], channels: zxy.clone(), end_site: false },
        Joint { name: "Mid".into(), parent: Some(0), offset: [0.3, 1.0, -0.2], channels: zxy, end_site: false },
        Joint { name: "Tip".into(), parent: Some(1), offset: [0.0, 0.5, 0.4], channels: vec![], end_site: true },
    ])
    .unwrap()
}

#[test]
fn euler_order_matches_matrix_oracle() {
    let s = chain();
    let pose = [0.3, -0.7, 1.1, 0.4, 0.2, -0.9];
    let x = s.forward_kinematics(&pose);
    let r0 = mul(mul(rot(2, pose[0]), rot(0, pose[1])), rot(1, pose[2]));
    let r1 = mul(mul(rot(2, pose[3]), rot(0, pose[4])), rot(1, pose[5]));
    let mid = apply(r0, [0.3, 1.0, -0.2]);
    let tip_local = apply(mul(r0, r1), [0.0, 0.5, 0.4]);
    for i in 0..3 {
        assert!((x[1][i] - mid[i]).abs() < 1e-14);
        assert!((x[2][i] - (mid[i] + tip_local[i])).abs() < 1e-14);
    }
    // (α, 0, 0) followed by (0, β, 0) is the same as the pose (α, β, 0).
    let (a, b) = (0.8, -0.5);
    let composed = mul(rot(2, a), rot(0, b));
    let x = s.forward_kinematics(&[a, b, 0.0, 0.0, 0.0, 0.0]);
    let want = apply(composed, [0.3, 1.0, -0.2]);
    for i in 0..3 {
        assert!((x[1][i] - want[i]).abs() < 1e-14);
    }
}

#[test]
fn fk_is_deterministic_and_mirror_symmetric() {
    let s = skeleton();
    let a = walk2().animation().unwrap();
    let pose = a.frame(17).to_vec();
    assert_eq!(s.forward_kinematics(&pose), s.forward_kinematics(&pose));
    // Mirror in x: swap legs, negate rotations about y and z.
    let mut mirrored = pose.clone();
    mirrored[0] = -pose[0];
    let leg = 9;
    for j in 0..leg {
        mirrored[6 + j] = pose[6 + leg + j];
        mirrored[6 + leg + j] = pose[6 + j];
    }
    for (i, c) in s.channels().enumerate().filter(|(i, _)| *i >= 3) {
        if matches!(c, Channel::Yrotation | Channel::Zrotation) {
            mirrored[i] = -mirrored[i];
        }
    }
    let x = s.forward_kinematics(&pose);
    let y = s.forward_kinematics(&mirrored);
    let left = s.find("LeftFoot").unwrap();
    let right = s.find("RightFoot").unwrap();
    assert!((x[left][0] + y[right][0]).abs() < 1e-14);
    assert!((x[left][1] - y[right][1]).abs() < 1e-14);
    assert!((x[left][2] - y[right][2]).abs() < 1e-14);
}

#[test]
fn knee_crossings() {
    let g = walk2();
    let a = g.animation().unwrap();
    let cfg = KneeConfig::default();
    let t = detect_knee_crossings(&a, &cfg, 2).unwrap();
    for (got, want) in t.iter().zip(g.crossings()) {
        assert!((got - want).abs() < 1.0 / g.frame_rate);
    }
    let still: Vec<Vec<f64>> = (0..20).map(|_| a.frame(0).to_vec()).collect();
    let still = Animation::new(a.skeleton.clone(), 30.0, &still).unwrap();
    assert!(matches!(
        detect_knee_crossings(&still, &cfg, 1),
        Err(Error::InsufficientCrossings { found: 0, requested: 1 })
    ));
    // Swapping the knees finds the downward crossings of the original.
    let swapped = KneeConfig { left: cfg.right.clone(), right: cfg.left.clone(), ..cfg.clone() };
    let sig = knee_signal(&a, &cfg).unwrap();
    let neg: Vec<f64> = sig.iter().map(|v| -v).collect();
    let down = upward_crossings(&neg, a.frame_rate);
    let got = detect_knee_crossings(&a, &swapped, down.len()).unwrap();
    for (x, y) in got.iter().zip(&down) {
        assert!((x - y).abs() < 1e-12);
    }
}

fn walks() -> (Animation, Animation, Vec<(f64, f64)>) {
    let (g0, g1) = (walk2(), walk3());
    let pairs = g0.crossings().into_iter().zip(g1.crossings()).collect();
    (g0.animation().unwrap(), g1.animation().unwrap(), pairs)
}

#[test]
fn endpoints_of_the_blend() {
    let (a0, a1, pairs) = walks();
    let opts = InterpolateOptions::default();
    for scheme in Scheme::ALL {
        let r = interpolate(&a0, &a1, &pairs, scheme, 0.0, &opts).unwrap();
        assert_eq!(r.animation.frames(), a0.frames());
        assert!(r.animation.curve().max_abs_diff(a0.curve()) < 1e-9, "{scheme}");
    }
    let r = interpolate(&a0, &a1, &pairs, Scheme::LinearEuler, 1.0, &opts).unwrap();
    assert_eq!(r.animation.frames(), a1.frames());
    assert!(r.animation.curve().max_abs_diff(a1.curve()) < 1e-9);
}

#[test]
fn identical_inputs_are_fixed_points() {
    let a = walk3().animation().unwrap();
    let times = [(0.7, 0.7), (1.5, 1.5)];
    for scheme in Scheme::ALL {
        for s in [0.25, 0.5, 1.0] {
            let r = interpolate(&a, &a, &times, scheme, s, &InterpolateOptions::default()).unwrap();
            assert_eq!(r.animation.frames(), a.frames());
            assert!(r.animation.curve().max_abs_diff(a.curve()) < 1e-6, "{scheme} {s}");
        }
    }
}

#[test]
fn identity_warp_reduces_to_unwarped_scheme() {
    let a = walk2().animation().unwrap();
    let q = srvt(a.curve()).unwrap();
    assert!(star_action(&q, &Warp::identity()).max_abs_diff(&q) < 1e-10);
}

#[test]
fn feature_interpolation_keeps_the_gait() {
    let (a0, a1, pairs) = walks();
    let opts = InterpolateOptions::default();
    for s in [0.25, 0.5, 0.75] {
        let r = interpolate(&a0, &a1, &pairs, Scheme::ElasticFeatures, s, &opts).unwrap();
        let t = upward_crossings(&knee_signal(&r.animation, &KneeConfig::default()).unwrap(), r.animation.frame_rate);
        assert!((2..=3).contains(&t.len()), "s = {s}: {t:?}");
        for (&(t0, t1), got) in pairs.iter().zip(&t) {
            assert!(((1.0 - s) * t0 + s * t1 - got).abs() <= 2.0 / r.animation.frame_rate, "s = {s}: {t:?}");
        }
    }
}

/// Local height maxima in the upper half of the height range: one per swing.
fn height_maxima(track: &[[f64; 3]]) -> usize {
    let lo = track.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let hi = track.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    track
        .windows(3)
        .filter(|w| w[1][1] > mid && w[1][1] > w[0][1] && w[1][1] >= w[2][1])
        .count()
}

#[test]
fn foot_trajectories_follow_the_steps() {
    for g in [walk2(), walk3()] {
        let a = g.animation().unwrap();
        let [left, _] = foot_trajectories(&a, "LeftFoot", "RightFoot").unwrap();
        assert_eq!(height_maxima(&left), g.crossings().len());
    }
    let a = walk2().animation().unwrap();
    let rest = Animation::new(a.skeleton.clone(), 30.0, &vec![vec![0.0; a.skeleton.dof()]; 5]).unwrap();
    let [l, r] = foot_trajectories(&rest, "LeftFoot", "RightFoot").unwrap();
    assert!(l.iter().all(|p| *p == [0.1, -0.9, 0.0]));
    assert!(r.iter().all(|p| *p == [-0.1, -0.9, 0.0]));
}

#[test]
fn blend_start_keeps_foot_paths() {
    let (a0, a1, pairs) = walks();
    let r = interpolate(&a0, &a1, &pairs, Scheme::ElasticFeatures, 0.0, &InterpolateOptions::default()).unwrap();
    let x = foot_trajectories(&a0, "LeftFoot", "RightFoot").unwrap();
    let y = foot_trajectories(&r.animation, "LeftFoot", "RightFoot").unwrap();
    for (p, q) in x[0].iter().zip(&y[0]) {
        assert!((0..3).all(|i| (p[i] - q[i]).abs() < 1e-9));
    }
}
