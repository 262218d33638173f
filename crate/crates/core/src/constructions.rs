//! Standard planar partitions with prescribed areas.
//!
//! Canonical placement: the symmetry axis is the x axis and the centroid of
//! the bounded regions sits at the origin. Bounded regions are listed after
//! the unbounded ones.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{gauss_legendre_16, segment_factor, segment_factor_deriv, CircularArc, Point};
use crate::network::{ArcEdge, ArcPartition, Curve, FarField, Measure, Region, Vertex};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    HalfPlane,
    TripleJunction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructionKind {
    Halfplane,
    TripleJunction,
    Lens,
    Peanut,
    Reuleaux,
    DoubleBubble,
    Disk,
}

impl ConstructionKind {
    pub fn area_count(self) -> usize {
        match self {
            ConstructionKind::Halfplane | ConstructionKind::TripleJunction => 0,
            ConstructionKind::Lens | ConstructionKind::Reuleaux | ConstructionKind::Disk => 1,
            ConstructionKind::Peanut | ConstructionKind::DoubleBubble => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionSpec {
    pub kind: ConstructionKind,
    pub areas: Vec<f64>,
    /// Defaults to `max(10, 4 * extent)`.
    pub window_radius: Option<f64>,
}

impl ConstructionSpec {
    pub fn build(&self) -> Result<ArcPartition> {
        let need = self.kind.area_count();
        if self.areas.len() != need {
            return Err(Error::InvalidArgument(format!(
                "{:?} takes {need} area(s), got {}",
                self.kind,
                self.areas.len()
            )));
        }
        let a = &self.areas;
        let mut p = match self.kind {
            ConstructionKind::Halfplane => make_cone(ConeKind::HalfPlane, self.window_radius.unwrap_or(10.0)),
            ConstructionKind::TripleJunction => {
                make_cone(ConeKind::TripleJunction, self.window_radius.unwrap_or(10.0))
            }
            ConstructionKind::Lens => make_lens(a[0])?,
            ConstructionKind::Peanut => make_peanut(a[0], a[1])?,
            ConstructionKind::Reuleaux => make_reuleaux(a[0])?,
            ConstructionKind::DoubleBubble => make_double_bubble(a[0], a[1])?,
            ConstructionKind::Disk => make_disk(a[0])?,
        };
        if let Some(r) = self.window_radius {
            if !(r > 0.0) || r < 2.0 * p.extent() {
                return Err(Error::InvalidArgument(format!(
                    "window radius {r} must be at least twice the extent {}",
                    p.extent()
                )));
            }
            p.window_radius = r;
        }
        Ok(p)
    }
}

fn check_area(m: f64) -> Result<()> {
    if m > 0.0 && m.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("area must be positive and finite, got {m}")))
    }
}

fn default_window(p: &ArcPartition) -> f64 {
    (4.0 * p.extent()).max(10.0)
}

fn infinite(name: &str) -> Region {
    Region::new(name, Measure::Infinite)
}

pub fn make_cone(kind: ConeKind, window_radius: f64) -> ArcPartition {
    match kind {
        ConeKind::HalfPlane => ArcPartition {
            regions: vec![infinite("upper"), infinite("lower")],
            vertices: vec![
                Vertex::at_infinity(Point::ORIGIN, Point::new(-1.0, 0.0)),
                Vertex::at_infinity(Point::ORIGIN, Point::new(1.0, 0.0)),
            ],
            edges: vec![ArcEdge::new(0, 1, 0.0, 0, 1)],
            window_radius,
            far_field: FarField::Line,
        },
        ConeKind::TripleJunction => {
            let dirs = [90.0f64, 210.0, 330.0].map(|a| Point::from_angle(a.to_radians()));
            let mut vertices = vec![Vertex::interior(Point::ORIGIN)];
            vertices.extend(dirs.iter().map(|&d| Vertex::at_infinity(Point::ORIGIN, d)));
            // Region k lies counter-clockwise of ray k.
            let edges = (0..3).map(|k| ArcEdge::new(0, k + 1, 0.0, k, (k + 2) % 3)).collect();
            ArcPartition {
                regions: vec![infinite("a"), infinite("b"), infinite("c")],
                vertices,
                edges,
                window_radius,
                far_field: FarField::TripleRays(dirs),
            }
        }
    }
}

/// Symmetric lens of area `m` on the x axis between two half-planes.
pub fn make_lens(m: f64) -> Result<ArcPartition> {
    check_area(m)?;
    let r = (m / (2.0 * (FRAC_PI_3 - 3f64.sqrt() / 4.0))).sqrt();
    let x = r * 3f64.sqrt() / 2.0;
    let (a, b) = (Point::new(-x, 0.0), Point::new(x, 0.0));
    let upper = CircularArc::from_half_angle(a, b, FRAC_PI_3);
    let lower = CircularArc::from_half_angle(a, b, -FRAC_PI_3);
    let mut p = ArcPartition {
        regions: vec![infinite("upper"), infinite("lower"), Region::new("lens", Measure::Finite(m))],
        vertices: vec![
            Vertex::interior(a),
            Vertex::interior(b),
            Vertex::at_infinity(a, Point::new(-1.0, 0.0)),
            Vertex::at_infinity(b, Point::new(1.0, 0.0)),
        ],
        edges: vec![
            ArcEdge::new(0, 1, upper.kappa, 0, 2),
            ArcEdge::new(0, 1, lower.kappa, 2, 1),
            ArcEdge::new(2, 0, 0.0, 0, 1),
            ArcEdge::new(1, 3, 0.0, 0, 1),
        ],
        window_radius: 0.0,
        far_field: FarField::Line,
    };
    p.window_radius = default_window(&p);
    Ok(p)
}

/// Round disk of area `m`, drawn as two semicircles joined at smooth degree-2 vertices.
pub fn make_disk(m: f64) -> Result<ArcPartition> {
    check_area(m)?;
    let a = (m / PI).sqrt();
    let (e, w) = (Point::new(a, 0.0), Point::new(-a, 0.0));
    let k = CircularArc::from_half_angle(e, w, -FRAC_PI_2).kappa;
    let mut p = ArcPartition {
        regions: vec![infinite("outside"), Region::new("disk", Measure::Finite(m))],
        vertices: vec![Vertex::interior(e), Vertex::interior(w)],
        edges: vec![ArcEdge::new(0, 1, k, 1, 0), ArcEdge::new(1, 0, k, 1, 0)],
        window_radius: 0.0,
        far_field: FarField::Cluster,
    };
    p.window_radius = default_window(&p);
    Ok(p)
}

/// Curved triangle of area `m` with three rays leaving its corners radially.
pub fn make_reuleaux(m: f64) -> Result<ArcPartition> {
    check_area(m)?;
    let s = (2.0 * m / (PI - 3f64.sqrt())).sqrt();
    let rho = s / 3f64.sqrt();
    let dirs = [90.0f64, 210.0, 330.0].map(|a| Point::from_angle(a.to_radians()));
    let corners = dirs.map(|d| d * rho);
    let mut vertices: Vec<Vertex> = corners.iter().map(|&c| Vertex::interior(c)).collect();
    vertices.extend((0..3).map(|k| Vertex::at_infinity(corners[k], dirs[k])));
    let mut edges = Vec::new();
    for k in 0..3 {
        let arc = CircularArc::from_half_angle(corners[k], corners[(k + 1) % 3], -FRAC_PI_6);
        edges.push(ArcEdge::new(k, (k + 1) % 3, arc.kappa, 3, k));
    }
    for k in 0..3 {
        edges.push(ArcEdge::new(k, k + 3, 0.0, k, (k + 2) % 3));
    }
    let mut p = ArcPartition {
        regions: vec![infinite("a"), infinite("b"), infinite("c"), Region::new("triangle", Measure::Finite(m))],
        vertices,
        edges,
        window_radius: 0.0,
        far_field: FarField::TripleRays(dirs),
    };
    p.window_radius = default_window(&p);
    Ok(p)
}

/// Safeguarded Newton for a strictly monotone `f` on `(lo, hi)` with a sign change.
fn solve_monotone(f: impl Fn(f64) -> (f64, f64), mut lo: f64, mut hi: f64) -> Result<f64> {
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo.signum() == fhi.signum() {
        return Err(Error::NoConvergence { residual: flo.abs().min(fhi.abs()), iterations: 0 });
    }
    let increasing = fhi > flo;
    let mut x = 0.5 * (lo + hi);
    let mut last = f64::INFINITY;
    for it in 0..200 {
        let (fx, dfx) = f(x);
        last = fx.abs();
        if fx == 0.0 || (hi - lo) < 1e-15 * (1.0 + x.abs()) {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx.is_finite() && dfx != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() < 1e-16 * (1.0 + x.abs()) && it > 2 {
            return Ok(next);
        }
        x = next;
    }
    if last < 1e-13 {
        Ok(x)
    } else {
        Err(Error::NoConvergence { residual: last, iterations: 200 })
    }
}

/// First moments `(int x dA, int y dA)` and area of the union of bounded regions.
fn bounded_moments(p: &ArcPartition) -> (f64, f64, f64) {
    let (xs, ws) = gauss_legendre_16();
    let (mut mx, mut my, mut area) = (0.0, 0.0, 0.0);
    for (i, e) in p.edges.iter().enumerate() {
        let Curve::Arc(arc) = p.curve(i) else { continue };
        let sign = match (p.is_infinite(e.left), p.is_infinite(e.right)) {
            (false, true) => 1.0,
            (true, false) => -1.0,
            _ => continue,
        };
        let len = arc.length();
        const PIECES: usize = 8;
        for piece in 0..PIECES {
            for (x, w) in xs.iter().zip(&ws) {
                let t = (piece as f64 + 0.5 * (x + 1.0)) / PIECES as f64;
                let q = arc.point_at(t);
                let d = arc.tangent_at(t) * (len / PIECES as f64 * 0.5 * w);
                // x dA = d(x^2/2 dy), y dA = -d(y^2/2 dx).
                mx += sign * 0.5 * q.x * q.x * d.y;
                my -= sign * 0.5 * q.y * q.y * d.x;
            }
        }
        area += sign * arc.area_moment();
    }
    (mx, my, area)
}

fn centered(p: ArcPartition) -> ArcPartition {
    let (mx, my, a) = bounded_moments(&p);
    let shift = Point::new(-mx / a, -my / a);
    p.transformed(1.0, 0.0, shift)
}

/// Standard double bubble with areas `m1` (left) and `m2` (right).
pub fn make_double_bubble(m1: f64, m2: f64) -> Result<ArcPartition> {
    check_area(m1)?;
    check_area(m2)?;
    const SHIFT: f64 = 2.0 * FRAC_PI_3;
    // All three arcs run from the top to the bottom vertex over a common vertical chord;
    // their half-apertures differ by 2pi/3, so only the middle one is free.
    let areas = |t: f64| (segment_factor(t) - segment_factor(t - SHIFT), segment_factor(t + SHIFT) - segment_factor(t));
    let target = (m1 / m2).ln();
    let f = |t: f64| {
        let (a1, a2) = areas(t);
        let d1 = segment_factor_deriv(t) - segment_factor_deriv(t - SHIFT);
        let d2 = segment_factor_deriv(t + SHIFT) - segment_factor_deriv(t);
        ((a1 / a2).ln() - target, d1 / a1 - d2 / a2)
    };
    let eps = 1e-9;
    let theta = solve_monotone(f, -FRAC_PI_3 + eps, FRAC_PI_3 - eps)?;
    let (g1, _) = areas(theta);
    let c = (4.0 * m1 / g1).sqrt();
    let top = Point::new(0.0, c / 2.0);
    let bottom = Point::new(0.0, -c / 2.0);
    let arc = |t: f64| CircularArc::from_half_angle(top, bottom, t);
    let (left, mid, right) = (arc(theta - SHIFT), arc(theta), arc(theta + SHIFT));
    let e = |a: CircularArc, l: usize, r: usize| ArcEdge { major: a.major, ..ArcEdge::new(0, 1, a.kappa, l, r) };
    let mut p = ArcPartition {
        regions: vec![infinite("outside"), Region::new("left", Measure::Finite(m1)), Region::new("right", Measure::Finite(m2))],
        vertices: vec![Vertex::interior(top), Vertex::interior(bottom)],
        edges: vec![e(left, 1, 0), e(mid, 2, 1), e(right, 0, 2)],
        window_radius: 0.0,
        far_field: FarField::Cluster,
    };
    p = centered(p);
    p.window_radius = default_window(&p);
    Ok(p)
}

/// Peanut geometry for middle half-aperture `theta` and half-height `h`.
fn peanut_geometry(theta: f64, h: f64) -> ArcPartition {
    let deg = |x: f64| x.to_radians();
    let r3 = h / ((theta - deg(30.0)).cos() - 0.5);
    let r4 = h / ((theta + deg(30.0)).cos() - 0.5);
    let xa = 0.0;
    let xb = xa + r3 * (deg(60.0).sin() - (theta - deg(30.0)).sin());
    let xd = xb + r4 * ((deg(30.0) + theta).sin() + deg(60.0).sin());
    let a = Point::new(xa, 0.0);
    let b = Point::new(xb, h);
    let c = Point::new(xb, -h);
    let d = Point::new(xd, 0.0);
    let t_left = (deg(90.0) - theta) / 2.0;
    let t_right = (deg(90.0) + theta) / 2.0;
    let ab = CircularArc::from_half_angle(a, b, t_left);
    let ac = CircularArc::from_half_angle(a, c, -t_left);
    let bc = CircularArc::from_half_angle(b, c, theta);
    let bd = CircularArc::from_half_angle(b, d, t_right);
    let cd = CircularArc::from_half_angle(c, d, -t_right);
    let (u, dn, l, r) = (0, 1, 2, 3);
    ArcPartition {
        regions: vec![
            infinite("upper"),
            infinite("lower"),
            Region::new("left", Measure::Finite(1.0)),
            Region::new("right", Measure::Finite(1.0)),
        ],
        vertices: vec![
            Vertex::interior(a),
            Vertex::interior(b),
            Vertex::interior(c),
            Vertex::interior(d),
            Vertex::at_infinity(a, Point::new(-1.0, 0.0)),
            Vertex::at_infinity(d, Point::new(1.0, 0.0)),
        ],
        edges: vec![
            ArcEdge::new(4, 0, 0.0, u, dn),
            ArcEdge::new(0, 1, ab.kappa, u, l),
            ArcEdge::new(0, 2, ac.kappa, l, dn),
            ArcEdge::new(1, 2, bc.kappa, r, l),
            ArcEdge::new(1, 3, bd.kappa, u, r),
            ArcEdge::new(2, 3, cd.kappa, r, dn),
            ArcEdge::new(3, 5, 0.0, u, dn),
        ],
        window_radius: 1.0,
        far_field: FarField::Line,
    }
}

/// Two bounded regions side by side on the x axis (areas `m3` left, `m4`
/// right) between the upper and lower half-planes.
pub fn make_peanut(m3: f64, m4: f64) -> Result<ArcPartition> {
    check_area(m3)?;
    check_area(m4)?;
    let target = (m3 / m4).ln();
    let ratio = |t: f64| {
        let a = peanut_geometry(t, 1.0).finite_areas();
        (a[2].unwrap() / a[3].unwrap()).ln() - target
    };
    let f = |t: f64| {
        let step = 1e-6;
        (ratio(t), (ratio(t + step) - ratio(t - step)) / (2.0 * step))
    };
    let lim = 30f64.to_radians() - 1e-6;
    let theta = if m3 == m4 { 0.0 } else { solve_monotone(f, -lim, lim)? };
    let unit = peanut_geometry(theta, 1.0);
    let a3 = unit.finite_areas()[2].unwrap();
    let mut p = peanut_geometry(theta, (m3 / a3).sqrt());
    p.regions[2].measure = Measure::Finite(m3);
    p.regions[3].measure = Measure::Finite(m4);
    p = centered(p);
    p.window_radius = default_window(&p);
    Ok(p)
}
