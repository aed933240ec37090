//! File formats for curves, paths and match results, plus SVG plots.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every sample bit for bit and repeated runs produce identical
//! bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::{DiscreteCurve, Topology};
use crate::error::{Error, Result};
use crate::geometry::GeodesicPath;
use crate::matcher::{Diagnostics, MatchResult};
use crate::warp::Warp;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveFile {
    topology: Topology,
    points: Vec<Vec<f64>>,
}

impl From<&DiscreteCurve> for CurveFile {
    fn from(c: &DiscreteCurve) -> Self {
        CurveFile {
            topology: c.topology(),
            points: c.points().map(<[f64]>::to_vec).collect(),
        }
    }
}

pub fn curve_from_json(text: &str) -> Result<DiscreteCurve> {
    let f: CurveFile = serde_json::from_str(text)?;
    DiscreteCurve::from_points(&f.points, f.topology)
}

pub fn curve_to_json(c: &DiscreteCurve) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CurveFile::from(c))?)
}

/// CSV with one point per row; a non-numeric first row is taken as header.
pub fn curve_from_csv(text: &str, topology: Topology) -> Result<DiscreteCurve> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse).collect();
        match row {
            Ok(p) => points.push(p),
            Err(_) if i == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })
            }
        }
    }
    DiscreteCurve::from_points(&points, topology)
}

pub fn curve_to_csv(c: &DiscreteCurve) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..c.dim()).map(|i| format!("x{i}")))?;
    for p in c.points() {
        w.write_record(p.iter().map(|v| v.to_string()))?;
    }
    finish_csv(w)
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Reads a curve, choosing the format by extension. CSV files carry no
/// topology, so `topology` must be supplied for them.
pub fn read_curve(path: &Path, topology: Option<Topology>) -> Result<DiscreteCurve> {
    let text = fs::read_to_string(path)?;
    match extension(path).as_str() {
        "csv" => curve_from_csv(&text, topology.unwrap_or(Topology::Open)),
        _ => {
            let c = curve_from_json(&text)?;
            match topology {
                Some(t) if t != c.topology() => DiscreteCurve::from_flat(c.samples().to_vec(), c.dim(), t),
                _ => Ok(c),
            }
        }
    }
}

pub fn write_curve(path: &Path, c: &DiscreteCurve) -> Result<()> {
    let text = match extension(path).as_str() {
        "csv" => curve_to_csv(c)?,
        _ => curve_to_json(c)?,
    };
    fs::write(path, text)?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

#[derive(Debug, Serialize)]
struct PathFile<'a> {
    energy: f64,
    step_energies: &'a [f64],
    times: Vec<f64>,
    steps: Vec<CurveFile>,
}

pub fn path_to_json(p: &GeodesicPath) -> Result<String> {
    let file = PathFile {
        energy: p.energy,
        step_energies: &p.step_energies,
        times: p.times(),
        steps: p.steps.iter().map(CurveFile::from).collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

#[derive(Debug, Serialize)]
struct MatchFile<'a> {
    warp: &'a Warp,
    elastic_energy: f64,
    feature_energy: f64,
    lambda: f64,
    total_energy: f64,
    geodesic_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    geodesic_file: Option<&'a str>,
    diagnostics: &'a Diagnostics,
}

/// Match result as JSON; the geodesic itself is referenced by file name.
pub fn match_to_json(r: &MatchResult, geodesic_file: Option<&str>) -> Result<String> {
    let file = MatchFile {
        warp: &r.warp,
        elastic_energy: r.elastic_energy,
        feature_energy: r.feature_energy,
        lambda: r.lambda,
        total_energy: r.total,
        geodesic_energy: r.geodesic.energy,
        geodesic_file,
        diagnostics: &r.diagnostics,
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Minimal SVG canvas with a fixed data-to-pixel map.
pub struct Svg {
    width: f64,
    height: f64,
    min: [f64; 2],
    scale: f64,
    body: String,
}

impl Svg {
    /// Canvas fitting the bounding box of `points` with a margin.
    pub fn fit<'a, I: IntoIterator<Item = &'a [f64]>>(points: I, width: f64, height: f64) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for i in 0..2 {
                let v = p.get(i).copied().unwrap_or(0.0);
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        if !lo[0].is_finite() {
            lo = [0.0; 2];
            hi = [1.0; 2];
        }
        let margin = 10.0;
        let span = [(hi[0] - lo[0]).max(1e-12), (hi[1] - lo[1]).max(1e-12)];
        let scale = ((width - 2.0 * margin) / span[0]).min((height - 2.0 * margin) / span[1]);
        Self {
            width,
            height,
            min: [lo[0] - margin / scale, lo[1] - margin / scale],
            scale,
            body: String::new(),
        }
    }

    fn map(&self, p: &[f64]) -> (f64, f64) {
        let x = (p[0] - self.min[0]) * self.scale;
        let y = (p.get(1).copied().unwrap_or(0.0) - self.min[1]) * self.scale;
        (x, self.height - y)
    }

    pub fn polyline<'a, I: IntoIterator<Item = &'a [f64]>>(&mut self, points: I, color: &str, closed: bool) {
        let mut coords = String::new();
        for p in points {
            let (x, y) = self.map(p);
            let _ = write!(coords, "{x:.3},{y:.3} ");
        }
        let tag = if closed { "polygon" } else { "polyline" };
        let _ = writeln!(
            self.body,
            r#"<{tag} points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.trim_end()
        );
    }

    pub fn marker(&mut self, p: &[f64], color: &str) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, r#"<circle cx="{x:.3}" cy="{y:.3}" r="3" fill="{color}"/>"#);
    }

    pub fn segment(&mut self, a: &[f64], b: &[f64], color: &str) {
        let (x0, y0) = self.map(a);
        let (x1, y1) = self.map(b);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x0:.3}" y1="{y0:.3}" x2="{x1:.3}" y2="{y1:.3}" stroke="{color}" stroke-width="0.5"/>"#
        );
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n{}</svg>\n",
            self.body,
            w = self.width,
            h = self.height
        )
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Both curves with lines joining `c0(θ)` to `(c1 ∘ φ)(θ)` at a few
/// parameters, and marker pairs for each feature.
pub fn correspondence_svg(
    c0: &DiscreteCurve,
    c1: &DiscreteCurve,
    warp: &Warp,
    features: &[(f64, f64)],
) -> String {
    let i0 = c0.interpolant(crate::interp::Interpolation::Cubic);
    let i1 = c1.interpolant(crate::interp::Interpolation::Cubic);
    let mut svg = Svg::fit(c0.points().chain(c1.points()), 480.0, 360.0);
    let closed = c0.topology().is_closed();
    svg.polyline(c0.points(), PALETTE[0], closed);
    svg.polyline(c1.points(), PALETTE[1], closed);
    let lines = 24;
    for k in 0..=lines {
        let t = crate::curve::PARAM_LENGTH * k as f64 / lines as f64;
        svg.segment(&i0.eval(t), &i1.eval(warp.eval(t)), "#999999");
    }
    for (i, &(a, b)) in features.iter().enumerate() {
        let color = PALETTE[2 + i % (PALETTE.len() - 2)];
        svg.marker(&i0.eval(a), color);
        svg.marker(&i1.eval(b), color);
    }
    svg.finish()
}

/// All snapshots of a path side by side.
pub fn filmstrip_svg(p: &GeodesicPath) -> String {
    let Some(first) = p.steps.first() else {
        return Svg::fit(std::iter::empty(), 10.0, 10.0).finish();
    };
    let (lo, hi) = bounds(p.steps.iter().flat_map(|c| c.points()));
    let gap = 0.2 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let pitch = hi[0] - lo[0] + gap;
    let shifted: Vec<Vec<Vec<f64>>> = p
        .steps
        .iter()
        .enumerate()
        .map(|(s, c)| {
            c.points()
                .map(|q| vec![q[0] + s as f64 * pitch, q.get(1).copied().unwrap_or(0.0)])
                .collect()
        })
        .collect();
    let width = 140.0 * p.steps.len() as f64;
    let mut svg = Svg::fit(shifted.iter().flatten().map(Vec::as_slice), width, 160.0);
    let closed = first.topology().is_closed();
    for (s, pts) in shifted.iter().enumerate() {
        svg.polyline(pts.iter().map(Vec::as_slice), PALETTE[s % PALETTE.len()], closed);
    }
    svg.finish()
}

fn bounds<'a, I: IntoIterator<Item = &'a [f64]>>(points: I) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for i in 0..2 {
            let v = p.get(i).copied().unwrap_or(0.0);
            lo[i] = lo[i].min(v);
            hi[i] = hi[i].max(v);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DiscreteCurve {
        DiscreteCurve::from_fn(17, Topology::Open, |t| vec![t.cos() / 3.0, (2.0 * t).sin() * 0.1]).unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let c = sample();
        let back = curve_from_json(&curve_to_json(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(curve_to_json(&back).unwrap(), curve_to_json(&c).unwrap());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let c = sample();
        let text = curve_to_csv(&c).unwrap();
        assert!(text.starts_with("x0,x1\n"));
        assert_eq!(curve_from_csv(&text, Topology::Open).unwrap(), c);
    }

    #[test]
    fn csv_reports_bad_rows() {
        let err = curve_from_csv("x,y\n0,0\n1,a\n", Topology::Open).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn json_rejects_unknown_fields() {
        let text = r#"{"topology": "open", "points": [[0,0],[1,0]], "extra": 1}"#;
        assert!(curve_from_json(text).is_err());
    }

    #[test]
    fn svg_is_well_formed() {
        let c = sample();
        let s = correspondence_svg(&c, &c, &Warp::identity(), &[(1.0, 1.0)]);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 2);
    }
}
