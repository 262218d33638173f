//! Exact clipping of arc networks against disks: areas, interface lengths and
//! point location.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use super::{ArcPartition, Curve};
use crate::error::{Error, Result};
use crate::geom::{circle_arc_moment, CircularArc, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub center: Point,
    pub radius: f64,
    /// Area of each region inside the disk.
    pub areas: Vec<f64>,
    /// Length of each edge inside the disk.
    pub interface_lengths: Vec<f64>,
    /// Boundary length of each region inside the disk.
    pub region_perimeters: Vec<f64>,
    /// Total interface length, each interface counted once.
    pub perimeter: f64,
}

/// Where an edge meets the clipping circle.
#[derive(Clone, Copy, Debug)]
struct CircleEvent {
    point: Point,
    angle: f64,
    /// Region found immediately counter-clockwise of the event along the circle.
    ccw_region: usize,
    cw_region: usize,
}

/// Edge pieces inside a disk plus the circle arcs assigned to each region.
pub(crate) struct Clip {
    /// (edge id, piece) for every edge piece inside the disk.
    pub pieces: Vec<(usize, CircularArc)>,
    /// (region, start point, end point, start angle, end angle) counter-clockwise.
    pub window_arcs: Vec<(usize, Point, Point, f64, f64)>,
}

fn inside(p: Point, center: Point, radius: f64) -> bool {
    (p - center).norm() < radius
}

fn on_circle(p: Point, center: Point, radius: f64) -> bool {
    ((p - center).norm() - radius).abs() <= 1e-9 * radius.max(1.0)
}

/// Parameter interval of `origin + s * dir` inside the disk.
fn line_disk_interval(origin: Point, dir: Point, center: Point, radius: f64) -> Option<(f64, f64)> {
    let f = origin - center;
    let b = f.dot(dir);
    let c = f.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Stable quadratic roots.
    let q = -b - b.signum() * sq;
    let (mut s0, mut s1) = if q != 0.0 { (q, c / q) } else { (-sq, sq) };
    if s0 > s1 {
        std::mem::swap(&mut s0, &mut s1);
    }
    Some((s0, s1))
}

impl ArcPartition {
    pub(crate) fn clip_to_disk(&self, center: Point, radius: f64) -> Result<Clip> {
        let mut pieces = Vec::new();
        let mut events: Vec<CircleEvent> = Vec::new();
        let tau = |p: Point| (p - center).perp();
        let mut push_event = |p: Point, t: Point, left: usize, right: usize| {
            let ccw_left = t.cross(tau(p)) > 0.0;
            let (ccw, cw) = if ccw_left { (left, right) } else { (right, left) };
            events.push(CircleEvent { point: p, angle: (p - center).angle(), ccw_region: ccw, cw_region: cw });
        };
        for (id, e) in self.edges.iter().enumerate() {
            match self.curve(id) {
                Curve::Arc(arc) => {
                    if arc.is_degenerate() {
                        continue;
                    }
                    let mut ts = vec![0.0];
                    ts.extend(arc.circle_crossings(center, radius));
                    ts.push(1.0);
                    for w in ts.windows(2) {
                        let (t0, t1) = (w[0], w[1]);
                        if t1 - t0 <= 1e-14 {
                            continue;
                        }
                        if !inside(arc.point_at(0.5 * (t0 + t1)), center, radius) {
                            continue;
                        }
                        let piece = arc.sub_arc(t0, t1);
                        if on_circle(piece.start, center, radius) && t0 > 0.0 {
                            push_event(piece.start, arc.tangent_at(t0), e.left, e.right);
                        }
                        if on_circle(piece.end, center, radius) && t1 < 1.0 {
                            push_event(piece.end, arc.tangent_at(t1), e.left, e.right);
                        }
                        pieces.push((id, piece));
                    }
                }
                Curve::Ray { origin, direction, outward } => {
                    if let Some((s0, s1)) = line_disk_interval(origin, direction, center, radius) {
                        let s0c = s0.max(0.0);
                        if s1 > s0c {
                            let a = origin + direction * s0c;
                            let b = origin + direction * s1;
                            let travel = if outward { direction } else { -direction };
                            if s0 > 0.0 {
                                push_event(a, travel, e.left, e.right);
                            }
                            push_event(b, travel, e.left, e.right);
                            let seg = if outward { CircularArc::segment(a, b) } else { CircularArc::segment(b, a) };
                            pieces.push((id, seg));
                        }
                    }
                }
                Curve::Line { point, direction } => {
                    if let Some((s0, s1)) = line_disk_interval(point, direction, center, radius) {
                        let a = point + direction * s0;
                        let b = point + direction * s1;
                        push_event(a, direction, e.left, e.right);
                        push_event(b, direction, e.left, e.right);
                        pieces.push((id, CircularArc::segment(a, b)));
                    }
                }
            }
        }
        let mut window_arcs = Vec::new();
        if events.is_empty() {
            let region = self.region_of_empty_circle(center, radius)?;
            let p = center + Point::new(radius, 0.0);
            window_arcs.push((region, p, p, 0.0, 2.0 * PI));
        } else {
            events.sort_by(|a, b| a.angle.total_cmp(&b.angle));
            let n = events.len();
            for i in 0..n {
                let a = events[i];
                let b = events[(i + 1) % n];
                let mut a1 = b.angle;
                if i + 1 == n || a1 <= a.angle {
                    a1 += 2.0 * PI;
                }
                if a.ccw_region != b.cw_region {
                    return Err(Error::Topology(format!(
                        "inconsistent region labels along circle of radius {radius} at angle {:.6}",
                        a.angle
                    )));
                }
                window_arcs.push((a.ccw_region, a.point, b.point, a.angle, a1));
            }
        }
        Ok(Clip { pieces, window_arcs })
    }

    fn region_of_empty_circle(&self, center: Point, radius: f64) -> Result<usize> {
        let probe = center + Point::new(radius, 0.0);
        let lr = self.window_radius.max(probe.norm() * 1.5 + 1.0);
        if center == Point::ORIGIN && radius >= self.extent() {
            // A circle enclosing everything without crossings: the unique unbounded region.
            let inf: Vec<usize> = self.infinite_regions().collect();
            return match inf.as_slice() {
                [k] => Ok(*k),
                _ => Err(Error::Topology("circle meets no edge but the partition has no unique unbounded region".into())),
            };
        }
        let loc = Locator::new(self, lr)?;
        loc.locate(probe)
            .ok_or_else(|| Error::Topology("could not locate region on clipping circle".into()))
    }

    /// Areas and interface lengths inside the disk `B(center, radius)`.
    pub fn measures_in_disk(&self, center: Point, radius: f64) -> Result<MeasureReport> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        let clip = self.clip_to_disk(center, radius)?;
        let n = self.regions.len();
        let mut areas = vec![0.0; n];
        let mut lengths = vec![0.0; self.edges.len()];
        let mut region_perimeters = vec![0.0; n];
        for (id, piece) in &clip.pieces {
            let e = &self.edges[*id];
            let m = piece.area_moment();
            let l = piece.length();
            areas[e.left] += m;
            areas[e.right] -= m;
            lengths[*id] += l;
            region_perimeters[e.left] += l;
            region_perimeters[e.right] += l;
        }
        for &(region, _, _, a0, a1) in &clip.window_arcs {
            areas[region] += circle_arc_moment(center, radius, a0, a1);
        }
        let perimeter = lengths.iter().sum();
        Ok(MeasureReport { center, radius, areas, interface_lengths: lengths, region_perimeters, perimeter })
    }

    /// Measures inside `B(0, radius)`; the radius may not exceed the window.
    pub fn region_measures(&self, radius: f64) -> Result<MeasureReport> {
        if radius > self.window_radius * (1.0 + 1e-12) {
            return Err(Error::RadiusExceedsWindow { radius, window: self.window_radius });
        }
        self.measures_in_disk(Point::ORIGIN, radius)
    }

    /// Exact area of each finite region from its boundary arcs.
    pub fn finite_areas(&self) -> Vec<Option<f64>> {
        let mut areas = vec![0.0; self.regions.len()];
        for (id, e) in self.edges.iter().enumerate() {
            if let Curve::Arc(a) = self.curve(id) {
                let m = a.area_moment();
                areas[e.left] += m;
                areas[e.right] -= m;
            }
        }
        (0..self.regions.len()).map(|k| if self.is_infinite(k) { None } else { Some(areas[k]) }).collect()
    }

    /// Total length of finite edges.
    pub fn finite_perimeter(&self) -> f64 {
        (0..self.edges.len()).filter_map(|i| self.arc(i)).map(|a| a.length()).sum()
    }

    /// Interface length inside the axis-aligned square `[-half, half]^2`.
    pub fn length_in_square(&self, half: f64) -> f64 {
        let inside_sq = |p: Point| p.x.abs() <= half && p.y.abs() <= half;
        let mut total = 0.0;
        for id in 0..self.edges.len() {
            match self.curve(id) {
                Curve::Arc(arc) => {
                    const N: usize = 2048;
                    let mut t_prev = 0.0;
                    let mut in_prev = inside_sq(arc.point_at(0.0));
                    let mut start = if in_prev { Some(0.0) } else { None };
                    for k in 1..=N {
                        let t = k as f64 / N as f64;
                        let inn = inside_sq(arc.point_at(t));
                        if inn != in_prev {
                            let (mut lo, mut hi) = (t_prev, t);
                            for _ in 0..60 {
                                let mid = 0.5 * (lo + hi);
                                if inside_sq(arc.point_at(mid)) == in_prev {
                                    lo = mid;
                                } else {
                                    hi = mid;
                                }
                            }
                            let tc = 0.5 * (lo + hi);
                            if inn {
                                start = Some(tc);
                            } else if let Some(s) = start.take() {
                                total += arc.sub_arc(s, tc).length();
                            }
                        }
                        in_prev = inn;
                        t_prev = t;
                    }
                    if let Some(s) = start {
                        total += arc.sub_arc(s, 1.0).length();
                    }
                }
                Curve::Ray { origin, direction, .. } => {
                    total += segment_in_square(origin, direction, 0.0, f64::INFINITY, half);
                }
                Curve::Line { point, direction } => {
                    total += segment_in_square(point, direction, f64::NEG_INFINITY, f64::INFINITY, half);
                }
            }
        }
        total
    }
}

/// Liang-Barsky clip of `origin + s dir`, `s in [s0, s1]`, against the square.
fn segment_in_square(origin: Point, dir: Point, s0: f64, s1: f64, half: f64) -> f64 {
    let (mut lo, mut hi) = (s0, s1);
    for (p, q) in [
        (-dir.x, origin.x + half),
        (dir.x, half - origin.x),
        (-dir.y, origin.y + half),
        (dir.y, half - origin.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return 0.0;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
    }
    if hi > lo {
        (hi - lo) * dir.norm()
    } else {
        0.0
    }
}

/// A y-monotone boundary piece used for ray-casting parity.
#[derive(Clone, Copy, Debug)]
struct MonotonePiece {
    arc: CircularArc,
    y0: f64,
    y1: f64,
    /// Center and radius when the piece is visibly curved.
    circle: Option<(Point, f64, f64)>,
}

impl MonotonePiece {
    fn x_at(&self, y: f64) -> f64 {
        match self.circle {
            Some((c, r, side)) => {
                let dy = y - c.y;
                c.x + side * (r * r - dy * dy).max(0.0).sqrt()
            }
            None => {
                let (a, b) = (self.arc.start, self.arc.end);
                a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y)
            }
        }
    }
}

fn split_monotone(arc: &CircularArc, out: &mut Vec<MonotonePiece>) {
    let theta = arc.half_angle();
    let mut cuts = vec![0.0];
    if theta.abs() > 1e-12 {
        let psi0 = (arc.end - arc.start).angle() + theta;
        // Tangent angle psi(t) = psi0 - 2 theta t; horizontal where psi = k pi.
        let (lo, hi) = if theta > 0.0 { (psi0 - 2.0 * theta, psi0) } else { (psi0, psi0 - 2.0 * theta) };
        let kmin = (lo / PI).ceil() as i64;
        let kmax = (hi / PI).floor() as i64;
        for k in kmin..=kmax {
            let t = (psi0 - k as f64 * PI) / (2.0 * theta);
            if t > 1e-12 && t < 1.0 - 1e-12 {
                cuts.push(t);
            }
        }
    }
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    for w in cuts.windows(2) {
        let piece = if w[0] == 0.0 && w[1] == 1.0 { *arc } else { arc.sub_arc(w[0], w[1]) };
        let piece = CircularArc {
            start: if w[0] == 0.0 { arc.start } else { piece.start },
            end: if w[1] == 1.0 { arc.end } else { piece.end },
            ..piece
        };
        let circle = if piece.half_angle().abs() > 1e-7 {
            piece.center().map(|c| {
                let mid = piece.point_at(0.5);
                (c, piece.radius(), if mid.x >= c.x { 1.0 } else { -1.0 })
            })
        } else {
            None
        };
        out.push(MonotonePiece { arc: piece, y0: piece.start.y, y1: piece.end.y, circle });
    }
}

/// Point-location oracle for an arc partition inside a disk around the origin.
#[derive(Clone, Debug)]
pub struct Locator {
    radius: f64,
    boundaries: Vec<Vec<MonotonePiece>>,
}

impl Locator {
    pub fn new(partition: &ArcPartition, radius: f64) -> Result<Self> {
        let clip = partition.clip_to_disk(Point::ORIGIN, radius)?;
        let mut boundaries = vec![Vec::new(); partition.regions.len()];
        for (id, piece) in &clip.pieces {
            let e = &partition.edges[*id];
            split_monotone(piece, &mut boundaries[e.left]);
            split_monotone(piece, &mut boundaries[e.right]);
        }
        for &(region, p0, p1, a0, a1) in &clip.window_arcs {
            let n = ((a1 - a0) / FRAC_PI_2).ceil().max(1.0) as usize;
            for k in 0..n {
                let b0 = a0 + (a1 - a0) * k as f64 / n as f64;
                let b1 = a0 + (a1 - a0) * (k + 1) as f64 / n as f64;
                let s = if k == 0 { p0 } else { Point::from_angle(b0) * radius };
                let t = if k + 1 == n { p1 } else { Point::from_angle(b1) * radius };
                let arc = CircularArc::from_half_angle(s, t, -(b1 - b0) / 2.0);
                split_monotone(&arc, &mut boundaries[region]);
            }
        }
        Ok(Locator { radius, boundaries })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Region containing `p`, or `None` outside the disk or on a boundary.
    pub fn locate(&self, p: Point) -> Option<usize> {
        if p.norm() >= self.radius {
            return None;
        }
        self.boundaries.iter().position(|pieces| {
            let mut odd = false;
            for piece in pieces {
                if (piece.y0 > p.y) != (piece.y1 > p.y) && piece.x_at(p.y) > p.x {
                    odd = !odd;
                }
            }
            odd
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_cone, make_lens, ConeKind};

    #[test]
    fn line_partition_half_disks() {
        let p = make_cone(ConeKind::HalfPlane, 10.0);
        let m = p.region_measures(2.0).unwrap();
        assert!((m.perimeter - 4.0).abs() < 1e-14);
        for a in &m.areas {
            assert!((a - 2.0 * PI).abs() < 1e-12);
        }
    }

    #[test]
    fn triple_junction_unit_ball() {
        let p = make_cone(ConeKind::TripleJunction, 10.0);
        let m = p.region_measures(1.0).unwrap();
        assert!((m.perimeter - 3.0).abs() < 1e-14);
        for a in &m.areas {
            assert!((a - PI / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn radius_beyond_window_is_an_error() {
        let p = make_cone(ConeKind::HalfPlane, 3.0);
        assert!(matches!(p.region_measures(3.5), Err(Error::RadiusExceedsWindow { .. })));
    }

    #[test]
    fn lens_measures() {
        let p = make_lens(1.0).unwrap();
        let m = p.region_measures(5.0).unwrap();
        assert!((m.areas[2] - 1.0).abs() < 1e-10);
        let total: f64 = m.areas.iter().sum();
        assert!((total - 25.0 * PI).abs() < 1e-10);
        let arcs: f64 = (0..p.edges.len()).filter_map(|i| p.arc(i)).map(|a| a.length()).sum();
        assert!((arcs - 3.779_410_47).abs() < 1e-8);
    }

    #[test]
    fn small_disk_inside_one_region() {
        let p = make_lens(1.0).unwrap();
        let m = p.measures_in_disk(Point::new(0.0, 3.0), 0.5).unwrap();
        assert!((m.areas[0] - PI * 0.25).abs() < 1e-12);
        assert_eq!(m.perimeter, 0.0);
    }

    #[test]
    fn locator_finds_regions() {
        let p = make_lens(1.0).unwrap();
        let loc = Locator::new(&p, p.window_radius).unwrap();
        assert_eq!(loc.locate(Point::new(0.0, 0.1)), Some(2));
        assert_eq!(loc.locate(Point::new(0.0, 2.0)), Some(0));
        assert_eq!(loc.locate(Point::new(0.0, -2.0)), Some(1));
        assert_eq!(loc.locate(Point::new(3.0, 0.01)), Some(0));
        assert_eq!(loc.locate(Point::new(-3.0, -0.01)), Some(1));
        assert_eq!(loc.locate(Point::new(100.0, 0.0)), None);
    }

    #[test]
    fn square_clipping_of_line() {
        let p = make_cone(ConeKind::HalfPlane, 10.0);
        assert!((p.length_in_square(1.5) - 3.0).abs() < 1e-14);
    }
}
