//! Structural checks on an arc network.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ArcPartition, Curve, Measure, VertexKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DanglingReference { edge: usize, detail: String },
    VertexOrder { vertex: usize, degree: usize },
    SameRegionBothSides { edge: usize, region: usize },
    CurvedUnboundedEdge { edge: usize, kappa: f64 },
    InfeasibleArc { edge: usize },
    DuplicateEdge { first: usize, second: usize },
    InconsistentRegionsAtVertex { vertex: usize },
    OpenRegionBoundary { region: usize, detail: String },
    NonPositiveArea { region: usize, area: f64 },
    IsolatedRegion { region: usize },
    NoRegions,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DanglingReference { edge, detail } => write!(f, "edge {edge}: {detail}"),
            Violation::VertexOrder { vertex, degree } => write!(f, "vertex {vertex}: vertex order {degree} != 3"),
            Violation::SameRegionBothSides { edge, region } => {
                write!(f, "edge {edge}: region {region} on both sides")
            }
            Violation::CurvedUnboundedEdge { edge, kappa } => {
                write!(f, "edge {edge}: unbounded edge with curvature {kappa}")
            }
            Violation::InfeasibleArc { edge } => write!(f, "edge {edge}: |kappa| * chord / 2 > 1"),
            Violation::DuplicateEdge { first, second } => write!(f, "edges {first} and {second} coincide"),
            Violation::InconsistentRegionsAtVertex { vertex } => {
                write!(f, "vertex {vertex}: region labels do not match around the vertex")
            }
            Violation::OpenRegionBoundary { region, detail } => write!(f, "region {region}: open boundary ({detail})"),
            Violation::NonPositiveArea { region, area } => write!(f, "region {region}: enclosed area {area} <= 0"),
            Violation::IsolatedRegion { region } => write!(f, "region {region}: touches no edge"),
            Violation::NoRegions => write!(f, "partition has no regions"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ArcPartition {
    pub fn validate_topology(&self) -> TopologyReport {
        let mut v = Vec::new();
        if self.regions.is_empty() {
            v.push(Violation::NoRegions);
            return TopologyReport { valid: false, violations: v };
        }
        let nv = self.vertices.len();
        let nr = self.regions.len();
        let mut dangling = false;
        for (i, e) in self.edges.iter().enumerate() {
            if e.start >= nv || e.end >= nv {
                v.push(Violation::DanglingReference { edge: i, detail: "unknown vertex".into() });
                dangling = true;
            }
            if e.left >= nr || e.right >= nr {
                v.push(Violation::DanglingReference { edge: i, detail: "unknown region".into() });
                dangling = true;
            }
            if e.start == e.end {
                v.push(Violation::DanglingReference { edge: i, detail: "loop edge".into() });
                dangling = true;
            }
        }
        if dangling {
            return TopologyReport { valid: false, violations: v };
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.left == e.right {
                v.push(Violation::SameRegionBothSides { edge: i, region: e.left });
            }
            match self.curve(i) {
                Curve::Arc(a) => {
                    if !a.is_feasible() || a.chord() == 0.0 {
                        v.push(Violation::InfeasibleArc { edge: i });
                    }
                }
                _ => {
                    if e.kappa != 0.0 {
                        v.push(Violation::CurvedUnboundedEdge { edge: i, kappa: e.kappa });
                    }
                }
            }
        }
        for i in 0..self.edges.len() {
            for j in i + 1..self.edges.len() {
                let (a, b) = (&self.edges[i], &self.edges[j]);
                let same = (a.start == b.start && a.end == b.end && a.kappa == b.kappa && a.major == b.major)
                    || (a.start == b.end && a.end == b.start && a.kappa == -b.kappa && a.major == b.major);
                if same {
                    v.push(Violation::DuplicateEdge { first: i, second: j });
                }
            }
        }
        let inc = self.incidence();
        for (vi, edges) in inc.iter().enumerate() {
            let deg = edges.len();
            match self.vertices[vi].kind {
                VertexKind::AtInfinity { .. } => {
                    if deg != 1 {
                        v.push(Violation::VertexOrder { vertex: vi, degree: deg });
                    }
                }
                VertexKind::Interior { .. } => {
                    if deg != 3 && deg != 2 {
                        v.push(Violation::VertexOrder { vertex: vi, degree: deg });
                    } else if !self.regions_consistent_at(vi, edges) {
                        v.push(Violation::InconsistentRegionsAtVertex { vertex: vi });
                    }
                }
            }
        }
        let areas = self.finite_areas();
        for k in 0..nr {
            let touching: Vec<usize> = (0..self.edges.len()).filter(|&i| self.edges[i].separates(k)).collect();
            if touching.is_empty() {
                if nr > 1 && self.regions[k].measure != Measure::Zero {
                    v.push(Violation::IsolatedRegion { region: k });
                }
                continue;
            }
            if self.is_infinite(k) {
                continue;
            }
            let mut ends: BTreeMap<usize, usize> = BTreeMap::new();
            for &i in &touching {
                *ends.entry(self.edges[i].start).or_default() += 1;
                *ends.entry(self.edges[i].end).or_default() += 1;
            }
            if let Some((&vx, _)) = ends.iter().find(|(&vx, _)| !self.vertices[vx].is_interior()) {
                v.push(Violation::OpenRegionBoundary { region: k, detail: format!("reaches vertex {vx} at infinity") });
                continue;
            }
            if let Some((&vx, _)) = ends.iter().find(|(_, &c)| c % 2 == 1) {
                v.push(Violation::OpenRegionBoundary { region: k, detail: format!("boundary ends at vertex {vx}") });
                continue;
            }
            if let Some(a) = areas[k] {
                if a <= 0.0 && self.regions[k].measure != Measure::Zero {
                    v.push(Violation::NonPositiveArea { region: k, area: a });
                }
            }
        }
        TopologyReport { valid: v.is_empty(), violations: v }
    }

    /// Outgoing edges sorted counter-clockwise by tangent angle at `vertex`.
    pub(crate) fn sorted_outgoing(&self, vertex: usize, edges: &[usize]) -> Option<Vec<(f64, usize)>> {
        let mut out = Vec::with_capacity(edges.len());
        for &e in edges {
            out.push((self.outgoing_tangent(e, vertex)?.angle(), e));
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(out)
    }

    fn regions_consistent_at(&self, vertex: usize, edges: &[usize]) -> bool {
        let Some(sorted) = self.sorted_outgoing(vertex, edges) else {
            return false;
        };
        let n = sorted.len();
        (0..n).all(|i| {
            let (l, _) = self.edges[sorted[i].1].sides_from(vertex);
            let (_, r) = self.edges[sorted[(i + 1) % n].1].sides_from(vertex);
            l == r
        })
    }
}
