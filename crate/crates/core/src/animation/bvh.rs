//! BVH subset: `HIERARCHY` with `ROOT`, `JOINT`, `OFFSET`, `CHANNELS` and
//! `End Site`, followed by `MOTION` with `Frames`, `Frame Time` and rows.

use std::fmt::Write as _;

use super::{Animation, Channel, Joint, Skeleton};
use crate::error::{Error, Result};

struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
            .collect();
        Self { items, pos: 0 }
    }

    fn line(&self) -> usize {
        self.items
            .get(self.pos)
            .or(self.items.last())
            .map_or(0, |t| t.0)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line: self.line(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|t| t.1)
    }

    fn next(&mut self) -> Result<&'a str> {
        match self.items.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.1)
            }
            None => self.err("unexpected end of file"),
        }
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let line = self.line();
        let got = self.next()?;
        if got != word {
            return Err(Error::Parse {
                line,
                message: format!("expected `{word}`, found `{got}`"),
            });
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let line = self.line();
        let t = self.next()?;
        t.parse().map_err(|_| Error::Parse {
            line,
            message: format!("expected a number, found `{t}`"),
        })
    }
}

pub fn parse_bvh(text: &str) -> Result<Animation> {
    let mut t = Tokens::new(text);
    t.expect("HIERARCHY")?;
    t.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut t, &mut joints, None)?;
    t.expect("MOTION")?;
    t.expect("Frames:")?;
    let frames: usize = t.number()?;
    t.expect("Frame")?;
    t.expect("Time:")?;
    let dt: f64 = t.number()?;
    if !(dt > 0.0) {
        return t.err("frame time must be positive");
    }
    let skeleton = Skeleton::new(joints)?;
    let channels: Vec<Channel> = skeleton.channels().collect();
    let mut rows = Vec::with_capacity(frames);
    for _ in 0..frames {
        let row = channels
            .iter()
            .map(|c| {
                let v: f64 = t.number()?;
                Ok(if c.is_rotation() { v.to_radians() } else { v })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if t.peek().is_some() {
        return t.err("trailing data after the last frame");
    }
    Animation::new(skeleton, 1.0 / dt, &rows)
}

fn parse_joint(t: &mut Tokens, joints: &mut Vec<Joint>, parent: Option<usize>) -> Result<()> {
    let name = t.next()?.to_string();
    t.expect("{")?;
    t.expect("OFFSET")?;
    let offset = [t.number()?, t.number()?, t.number()?];
    t.expect("CHANNELS")?;
    let n: usize = t.number()?;
    let channels = (0..n)
        .map(|_| Channel::parse(t.next()?))
        .collect::<Result<Vec<_>>>()?;
    let index = joints.len();
    joints.push(Joint {
        name,
        parent,
        offset,
        channels,
        end_site: false,
    });
    loop {
        match t.next()? {
            "JOINT" => parse_joint(t, joints, Some(index))?,
            "End" => {
                t.expect("Site")?;
                t.expect("{")?;
                t.expect("OFFSET")?;
                let offset = [t.number()?, t.number()?, t.number()?];
                t.expect("}")?;
                let name = format!("{}_End", joints[index].name);
                joints.push(Joint {
                    name,
                    parent: Some(index),
                    offset,
                    channels: vec![],
                    end_site: true,
                });
            }
            "}" => return Ok(()),
            other => {
                t.pos -= 1;
                return t.err(format!("unexpected `{other}` in joint block"));
            }
        }
    }
}

/// Writes rotations in degrees; angles stay unrolled.
pub fn write_bvh(anim: &Animation) -> String {
    let skel = &anim.skeleton;
    let mut out = String::from("HIERARCHY\n");
    write_joint(&mut out, skel.joints(), 0, 0);
    let _ = writeln!(out, "MOTION\nFrames: {}", anim.frames());
    let _ = writeln!(out, "Frame Time: {}", 1.0 / anim.frame_rate);
    let channels: Vec<Channel> = skel.channels().collect();
    for k in 0..anim.frames() {
        let row: Vec<String> = anim
            .frame(k)
            .iter()
            .zip(&channels)
            .map(|(v, c)| if c.is_rotation() { v.to_degrees() } else { *v }.to_string())
            .collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

fn write_joint(out: &mut String, joints: &[Joint], i: usize, depth: usize) {
    let pad = "  ".repeat(depth);
    let j = &joints[i];
    let [x, y, z] = j.offset;
    if j.end_site {
        let _ = writeln!(out, "{pad}End Site\n{pad}{{\n{pad}  OFFSET {x} {y} {z}\n{pad}}}");
        return;
    }
    let kw = if j.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{kw} {}\n{pad}{{\n{pad}  OFFSET {x} {y} {z}", j.name);
    let names: Vec<&str> = j.channels.iter().map(|c| c.name()).collect();
    let _ = writeln!(out, "{pad}  CHANNELS {} {}", names.len(), names.join(" "));
    for (c, _) in joints.iter().enumerate().filter(|(_, c)| c.parent == Some(i)) {
        write_joint(out, joints, c, depth + 1);
    }
    let _ = writeln!(out, "{pad}}}");
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_BONES: &str = "HIERARCHY
ROOT Hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
  JOINT Knee
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
Frames: 3
Frame Time: 0.1
0 1 0 359 0 0 10 20 30
0 1 0 1 0 0 10 20 30
0 1 0 3 0 0 10 20 30
";

    #[test]
    fn parses_and_unrolls() {
        let a = parse_bvh(TWO_BONES).unwrap();
        assert_eq!(a.skeleton.dof(), 9);
        assert_eq!(a.skeleton.joints().len(), 3);
        assert!((a.frame_rate - 10.0).abs() < 1e-12);
        assert!((a.frame(1)[3] - 361f64.to_radians()).abs() < 1e-12);
        assert!((a.frame(0)[6] - 10f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn round_trip() {
        let a = parse_bvh(TWO_BONES).unwrap();
        let b = parse_bvh(&write_bvh(&a)).unwrap();
        assert_eq!(a.skeleton, b.skeleton);
        assert!(a.curve().max_abs_diff(b.curve()) < 1e-9);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = TWO_BONES.replace("CHANNELS 3 Zrotation", "CHANNELS 3 Wrotation");
        assert!(matches!(parse_bvh(&bad), Err(Error::UnsupportedChannel(_))));
        let bad = TWO_BONES.replace("OFFSET 0 -1 0\n    CHANNELS", "OFFSET 0 x 0\n    CHANNELS");
        assert!(matches!(parse_bvh(&bad), Err(Error::Parse { line: 8, .. })));
        let short = TWO_BONES.replace("0 1 0 3 0 0 10 20 30\n", "");
        assert!(matches!(parse_bvh(&short), Err(Error::Parse { .. })));
    }
}
