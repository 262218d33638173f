//! Planar partitions represented as networks of circular arcs.
//!
//! Regions are indexed by position in [`ArcPartition::regions`]. Every edge
//! carries the labels of the regions on its left and right (relative to the
//! traversal from `start` to `end`) and a signed curvature in the
//! [`CircularArc`] convention. The pressure law used throughout the crate is
//! `kappa = p(right) - p(left)`: the higher-pressure region sits on the
//! concave side of the arc.

mod measure;
mod pressure;
mod stationarity;
mod topology;
mod variation;

pub use measure::{Locator, MeasureReport};
pub use pressure::Pressures;
pub use stationarity::{
    classify_rays, FarFieldClass, FarFieldRay, StationarityReport, StationarityTolerances, VertexResidual,
};
pub use topology::{TopologyReport, Violation};
pub use variation::PerturbationResponse;

use serde::{Deserialize, Serialize};

use crate::geom::{CircularArc, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VertexKind {
    Interior { position: Point },
    /// Endpoint of an unbounded edge. `anchor` is a point on the edge's support
    /// line and `direction` the unit direction pointing to infinity.
    AtInfinity { anchor: Point, direction: Point },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vertex {
    pub kind: VertexKind,
}

impl Vertex {
    pub fn interior(position: Point) -> Self {
        Vertex { kind: VertexKind::Interior { position } }
    }

    pub fn at_infinity(anchor: Point, direction: Point) -> Self {
        Vertex { kind: VertexKind::AtInfinity { anchor, direction: direction.normalized() } }
    }

    pub fn is_interior(&self) -> bool {
        matches!(self.kind, VertexKind::Interior { .. })
    }

    pub fn position(&self) -> Option<Point> {
        match self.kind {
            VertexKind::Interior { position } => Some(position),
            VertexKind::AtInfinity { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcEdge {
    pub start: usize,
    pub end: usize,
    pub kappa: f64,
    pub major: bool,
    pub left: usize,
    pub right: usize,
}

impl ArcEdge {
    pub fn new(start: usize, end: usize, kappa: f64, left: usize, right: usize) -> Self {
        ArcEdge { start, end, kappa, major: false, left, right }
    }

    pub fn other(&self, v: usize) -> usize {
        if self.start == v {
            self.end
        } else {
            self.start
        }
    }

    /// (left, right) regions as seen when leaving vertex `v` along this edge.
    pub fn sides_from(&self, v: usize) -> (usize, usize) {
        if self.start == v {
            (self.left, self.right)
        } else {
            (self.right, self.left)
        }
    }

    pub fn separates(&self, region: usize) -> bool {
        self.left == region || self.right == region
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Measure {
    Finite(f64),
    Infinite,
    /// Improper region of zero measure (limit objects).
    Zero,
}

impl Measure {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Measure::Infinite)
    }

    pub fn value(&self) -> Option<f64> {
        match *self {
            Measure::Finite(m) => Some(m),
            Measure::Zero => Some(0.0),
            Measure::Infinite => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub measure: Measure,
}

impl Region {
    pub fn new(name: impl Into<String>, measure: Measure) -> Self {
        Region { name: name.into(), measure }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum FarField {
    Cluster,
    Line,
    TripleRays([Point; 3]),
}

/// Geometry of an edge in the plane, oriented along the edge traversal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Curve {
    Arc(CircularArc),
    /// Half-line from `origin`; `outward` is false when the traversal runs from infinity to `origin`.
    Ray { origin: Point, direction: Point, outward: bool },
    /// Full line through `point`, traversed along `direction`.
    Line { point: Point, direction: Point },
}

impl Curve {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Curve::Arc(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcPartition {
    pub regions: Vec<Region>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<ArcEdge>,
    pub window_radius: f64,
    pub far_field: FarField,
}

impl ArcPartition {
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    pub fn is_infinite(&self, region: usize) -> bool {
        self.regions[region].measure.is_infinite()
    }

    pub fn finite_regions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.regions.len()).filter(move |&k| !self.is_infinite(k))
    }

    pub fn infinite_regions(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.regions.len()).filter(move |&k| self.is_infinite(k))
    }

    pub fn curve(&self, edge: usize) -> Curve {
        let e = &self.edges[edge];
        let (a, b) = (&self.vertices[e.start].kind, &self.vertices[e.end].kind);
        match (*a, *b) {
            (VertexKind::Interior { position: p }, VertexKind::Interior { position: q }) => {
                Curve::Arc(CircularArc::new(p, q, e.kappa, e.major))
            }
            (VertexKind::Interior { position }, VertexKind::AtInfinity { direction, .. }) => {
                Curve::Ray { origin: position, direction, outward: true }
            }
            (VertexKind::AtInfinity { direction, .. }, VertexKind::Interior { position }) => {
                Curve::Ray { origin: position, direction, outward: false }
            }
            (VertexKind::AtInfinity { anchor, .. }, VertexKind::AtInfinity { direction, .. }) => {
                Curve::Line { point: anchor, direction }
            }
        }
    }

    pub fn arc(&self, edge: usize) -> Option<CircularArc> {
        match self.curve(edge) {
            Curve::Arc(a) => Some(a),
            _ => None,
        }
    }

    /// Edge ids incident to each vertex.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertices.len()];
        for (i, e) in self.edges.iter().enumerate() {
            if e.start < inc.len() {
                inc[e.start].push(i);
            }
            if e.end < inc.len() && e.end != e.start {
                inc[e.end].push(i);
            }
        }
        inc
    }

    /// Outgoing unit tangent of `edge` at vertex `v`.
    pub fn outgoing_tangent(&self, edge: usize, v: usize) -> Option<Point> {
        let e = &self.edges[edge];
        match self.curve(edge) {
            Curve::Arc(arc) => {
                let (t0, t1) = arc.endpoint_tangents().ok()?;
                Some(if e.start == v { t0 } else { -t1 })
            }
            Curve::Ray { direction, .. } => Some(direction),
            Curve::Line { .. } => None,
        }
    }

    /// Signed curvature of `edge` when traversed away from `v`.
    pub fn outgoing_curvature(&self, edge: usize, v: usize) -> f64 {
        let e = &self.edges[edge];
        if e.start == v {
            e.kappa
        } else {
            -e.kappa
        }
    }

    /// Applies `p -> scale * R(angle) p + shift` to every vertex.
    pub fn transformed(&self, scale: f64, angle: f64, shift: Point) -> ArcPartition {
        let map = |p: Point| p.rotate(angle) * scale + shift;
        let mut out = self.clone();
        for v in &mut out.vertices {
            v.kind = match v.kind {
                VertexKind::Interior { position } => VertexKind::Interior { position: map(position) },
                VertexKind::AtInfinity { anchor, direction } => {
                    VertexKind::AtInfinity { anchor: map(anchor), direction: direction.rotate(angle) }
                }
            };
        }
        for e in &mut out.edges {
            e.kappa /= scale;
        }
        for r in &mut out.regions {
            if let Measure::Finite(m) = r.measure {
                r.measure = Measure::Finite(m * scale * scale);
            }
        }
        out.window_radius *= scale;
        if let FarField::TripleRays(d) = out.far_field {
            out.far_field = FarField::TripleRays(d.map(|x| x.rotate(angle)));
        }
        out
    }

    pub fn scaled(&self, scale: f64) -> ArcPartition {
        self.transformed(scale, 0.0, Point::ORIGIN)
    }

    /// Largest distance of an interior vertex or finite arc point from the origin.
    pub fn extent(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (i, _) in self.edges.iter().enumerate() {
            if let Curve::Arc(a) = self.curve(i) {
                for k in 0..=16 {
                    r = r.max(a.point_at(k as f64 / 16.0).norm());
                }
            }
        }
        for v in &self.vertices {
            if let Some(p) = v.position() {
                r = r.max(p.norm());
            }
        }
        r
    }
}
