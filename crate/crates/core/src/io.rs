//! Partition files, SVG rendering and run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::grid::AnnealSchedule;
use crate::network::{ArcEdge, ArcPartition, Curve, FarField, Measure, Region, StationarityTolerances, Vertex, VertexKind};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the default directory for relative outputs.
pub const OUT_DIR_ENV: &str = "ISOPART_OUT_DIR";

/// Prescribed measure as stored on disk: a number, `"inf"`, or `0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FileMeasure(pub Measure);

impl Serialize for FileMeasure {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Measure::Infinite => s.serialize_str("inf"),
            Measure::Zero => s.serialize_f64(0.0),
            Measure::Finite(m) => s.serialize_f64(m),
        }
    }
}

impl<'de> Deserialize<'de> for FileMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) if t == "inf" => Ok(FileMeasure(Measure::Infinite)),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("measure must be a number or \"inf\", got {t:?}"))),
            Raw::Number(m) if m == 0.0 => Ok(FileMeasure(Measure::Zero)),
            Raw::Number(m) if m > 0.0 && m.is_finite() => Ok(FileMeasure(Measure::Finite(m))),
            Raw::Number(m) => Err(serde::de::Error::custom(format!("measure must be non-negative, got {m}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRegion {
    pub label: String,
    pub measure: FileMeasure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FileVertex {
    Interior { id: usize, position: [f64; 2] },
    Infinity { id: usize, anchor: [f64; 2], direction: [f64; 2] },
}

impl FileVertex {
    fn id(&self) -> usize {
        match *self {
            FileVertex::Interior { id, .. } | FileVertex::Infinity { id, .. } => id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEdge {
    pub start: usize,
    pub end: usize,
    pub kappa: f64,
    pub left: usize,
    pub right: usize,
    pub major: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FileFarField {
    Cluster,
    Line,
    TripleRays { directions: [[f64; 2]; 3] },
}

/// On-disk form of an [`ArcPartition`]. Vertex ids are referenced by edges;
/// region labels are positional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionFile {
    pub schema_version: u32,
    pub regions: Vec<FileRegion>,
    pub vertices: Vec<FileVertex>,
    pub edges: Vec<FileEdge>,
    pub window_radius: f64,
    pub far_field: FileFarField,
}

fn pt(p: Point) -> [f64; 2] {
    [p.x, p.y]
}

fn unpt(a: [f64; 2]) -> Point {
    Point::new(a[0], a[1])
}

impl PartitionFile {
    pub fn from_partition(p: &ArcPartition) -> Self {
        PartitionFile {
            schema_version: SCHEMA_VERSION,
            regions: p.regions.iter().map(|r| FileRegion { label: r.name.clone(), measure: FileMeasure(r.measure) }).collect(),
            vertices: p
                .vertices
                .iter()
                .enumerate()
                .map(|(id, v)| match v.kind {
                    VertexKind::Interior { position } => FileVertex::Interior { id, position: pt(position) },
                    VertexKind::AtInfinity { anchor, direction } => {
                        FileVertex::Infinity { id, anchor: pt(anchor), direction: pt(direction) }
                    }
                })
                .collect(),
            edges: p
                .edges
                .iter()
                .map(|e| FileEdge { start: e.start, end: e.end, kappa: e.kappa, left: e.left, right: e.right, major: e.major })
                .collect(),
            window_radius: p.window_radius,
            far_field: match p.far_field {
                FarField::Cluster => FileFarField::Cluster,
                FarField::Line => FileFarField::Line,
                FarField::TripleRays(d) => FileFarField::TripleRays { directions: [pt(d[0]), pt(d[1]), pt(d[2])] },
            },
        }
    }

    /// Builds the partition and checks its topology.
    pub fn to_partition(&self) -> Result<ArcPartition> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion { found: self.schema_version, expected: SCHEMA_VERSION });
        }
        let n = self.vertices.len();
        let mut slot = vec![None; n];
        for (k, v) in self.vertices.iter().enumerate() {
            let id = v.id();
            if id >= n {
                return Err(Error::Validation(format!("vertex id {id} out of range 0..{n}")));
            }
            if slot[id].replace(k).is_some() {
                return Err(Error::Validation(format!("duplicate vertex id {id}")));
            }
        }
        let vertices = slot
            .iter()
            .map(|k| match self.vertices[k.unwrap()] {
                FileVertex::Interior { position, .. } => Vertex::interior(unpt(position)),
                FileVertex::Infinity { anchor, direction, .. } => Vertex {
                    kind: VertexKind::AtInfinity { anchor: unpt(anchor), direction: unpt(direction) },
                },
            })
            .collect();
        let partition = ArcPartition {
            regions: self.regions.iter().map(|r| Region::new(r.label.clone(), r.measure.0)).collect(),
            vertices,
            edges: self
                .edges
                .iter()
                .map(|e| ArcEdge { start: e.start, end: e.end, kappa: e.kappa, major: e.major, left: e.left, right: e.right })
                .collect(),
            window_radius: self.window_radius,
            far_field: match &self.far_field {
                FileFarField::Cluster => FarField::Cluster,
                FileFarField::Line => FarField::Line,
                FileFarField::TripleRays { directions: d } => FarField::TripleRays([unpt(d[0]), unpt(d[1]), unpt(d[2])]),
            },
        };
        let report = partition.validate_topology();
        if !report.valid {
            let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Validation(msgs.join("; ")));
        }
        Ok(partition)
    }
}

/// Canonical JSON: sorted keys, two-space indent, shortest round-trip floats,
/// trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::Validation(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Validation(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

pub fn partition_to_json(p: &ArcPartition) -> Result<String> {
    to_canonical_json(&PartitionFile::from_partition(p))
}

pub fn partition_from_json(text: &str) -> Result<ArcPartition> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(parse_error)?;
    // Check the version before the shape, so old files get a clear error.
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v != SCHEMA_VERSION as u64 => {
            return Err(Error::SchemaVersion { found: v as u32, expected: SCHEMA_VERSION });
        }
        _ => {}
    }
    let file: PartitionFile = serde_json::from_str(text).map_err(parse_error)?;
    file.to_partition()
}

pub fn save_partition(p: &ArcPartition, path: &Path) -> Result<()> {
    std::fs::write(path, partition_to_json(p)?)?;
    Ok(())
}

pub fn load_partition(path: &Path) -> Result<ArcPartition> {
    partition_from_json(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    /// Image side in pixels.
    pub size: f64,
    /// Half side of the drawn square in model units; `None` picks
    /// `max(1.5 * extent, 1)`.
    pub view_half: Option<f64>,
    pub stroke_width: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle { size: 600.0, view_half: None, stroke_width: 2.0 }
    }
}

/// Clips the segment `p + t d`, `t in [t0, t1]`, to the square `|x|, |y| <= half`.
fn clip_to_square(p: Point, d: Point, mut t0: f64, mut t1: f64, half: f64) -> Option<(Point, Point)> {
    for (pc, dc) in [(p.x, d.x), (p.y, d.y)] {
        if dc == 0.0 {
            if pc.abs() > half {
                return None;
            }
            continue;
        }
        let (a, b) = ((-half - pc) / dc, (half - pc) / dc);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 < t1).then(|| (p + d * t0, p + d * t1))
}

/// SVG 1.1 drawing: circular arcs as exact `A` path segments, straight
/// pieces as `L` segments clipped to the view square.
pub fn render_svg(p: &ArcPartition, style: &SvgStyle) -> String {
    let half = style.view_half.unwrap_or((1.5 * p.extent()).max(1.0));
    let scale = style.size / (2.0 * half);
    let map = |q: Point| ((q.x + half) * scale, (half - q.y) * scale);
    let num = |v: f64| {
        let s = format!("{v:.4}");
        if s == "-0.0000" {
            "0.0000".to_string()
        } else {
            s
        }
    };
    let mut out = String::new();
    let size = num(style.size);
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<g fill="none" stroke="black" stroke-width="{}" stroke-linecap="round">"#,
        num(style.stroke_width)
    );
    for id in 0..p.edges.len() {
        let reach = 4.0 * half + 1.0;
        let (class, d) = match p.curve(id) {
            Curve::Arc(a) if !a.is_straight() => {
                let (x0, y0) = map(a.start);
                let (x1, y1) = map(a.end);
                let r = a.radius() * scale;
                let large = (a.half_angle().abs() > std::f64::consts::FRAC_PI_2) as u8;
                // A left bulge is a clockwise traversal; the y flip makes it run
                // in the positive-angle (sweep 1) direction on screen.
                let sweep = (a.kappa > 0.0) as u8;
                ("arc", format!("M {} {} A {} {} 0 {large} {sweep} {} {}", num(x0), num(y0), num(r), num(r), num(x1), num(y1)))
            }
            Curve::Arc(a) => {
                let Some((s, e)) = clip_to_square(a.start, a.end - a.start, 0.0, 1.0, half) else { continue };
                ("line", seg_path(map(s), map(e), &num))
            }
            Curve::Ray { origin, direction, .. } => {
                let Some((s, e)) = clip_to_square(origin, direction, 0.0, reach + origin.norm(), half) else { continue };
                ("line", seg_path(map(s), map(e), &num))
            }
            Curve::Line { point, direction } => {
                let l = reach + point.norm();
                let Some((s, e)) = clip_to_square(point, direction, -l, l, half) else { continue };
                ("line", seg_path(map(s), map(e), &num))
            }
        };
        let _ = writeln!(out, r#"<path class="{class}" d="{d}"/>"#);
    }
    out.push_str("</g>\n</svg>\n");
    out
}

fn seg_path(a: (f64, f64), b: (f64, f64), num: &dyn Fn(f64) -> String) -> String {
    format!("M {} {} L {} {}", num(a.0), num(a.1), num(b.0), num(b.1))
}

/// Settings shared by every CLI run. Identical configurations give
/// byte-identical outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub tolerances: StationarityTolerances,
    /// Cells per side for lattice runs.
    pub grid_size: usize,
    pub schedule: AnnealSchedule,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            tolerances: StationarityTolerances::default(),
            grid_size: 256,
            schedule: AnnealSchedule::default(),
            out_dir: std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".")),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|s| {
                    let before = &text[..s.start.min(text.len())];
                    let line = before.matches('\n').count() + 1;
                    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                    (line, column)
                })
                .unwrap_or((0, 0));
            Error::Parse { line, column, message: e.message().to_string() }
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// `path` itself when absolute, otherwise relative to `out_dir`.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.out_dir.join(path)
        }
    }
}
