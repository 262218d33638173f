//! Planar primitives for straight segments and circular arcs.
//!
//! An arc is stored as `(start, end, kappa, major)`. Traversal runs from
//! `start` to `end`; `kappa > 0` means the arc bulges to the left of the chord
//! (its center lies on the right). The signed half-aperture `theta` satisfies
//! `kappa = 2 sin(theta) / chord` and `|theta| > pi/2` exactly for major arcs.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this |theta| lengths and areas use their Taylor expansions.
const SERIES_THETA: f64 = 1e-4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Point::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn normalized(self) -> Point {
        self / self.norm()
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn distance(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point {
    type Output = Point;
    fn div(self, s: f64) -> Point {
        Point::new(self.x / s, self.y / s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t >= 2.0 * PI {
        0.0
    } else {
        t
    }
}

/// `theta / sin(theta)`, the ratio of arc length to chord.
pub fn length_ratio(theta: f64) -> f64 {
    if theta.abs() < SERIES_THETA {
        let t2 = theta * theta;
        1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
    } else {
        theta / theta.sin()
    }
}

/// Derivative of [`length_ratio`].
pub fn length_ratio_deriv(theta: f64) -> f64 {
    if theta.abs() < SERIES_THETA {
        theta / 3.0 + 7.0 * theta.powi(3) / 90.0
    } else {
        let s = theta.sin();
        (s - theta * theta.cos()) / (s * s)
    }
}

/// `(theta - sin cos) / sin^2`; the circular segment area is `chord^2 / 4` times this.
pub fn segment_factor(theta: f64) -> f64 {
    if theta.abs() < SERIES_THETA {
        2.0 * theta / 3.0 + 4.0 * theta.powi(3) / 45.0
    } else {
        let (s, c) = theta.sin_cos();
        (theta - s * c) / (s * s)
    }
}

/// Derivative of [`segment_factor`].
pub fn segment_factor_deriv(theta: f64) -> f64 {
    if theta.abs() < SERIES_THETA {
        2.0 / 3.0 + 4.0 * theta * theta / 15.0
    } else {
        let (s, c) = theta.sin_cos();
        2.0 - 2.0 * c * (theta - s * c) / (s * s * s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularArc {
    pub start: Point,
    pub end: Point,
    pub kappa: f64,
    #[serde(default)]
    pub major: bool,
}

impl CircularArc {
    pub fn segment(start: Point, end: Point) -> Self {
        CircularArc { start, end, kappa: 0.0, major: false }
    }

    pub fn new(start: Point, end: Point, kappa: f64, major: bool) -> Self {
        CircularArc { start, end, kappa, major }
    }

    /// Builds the arc through `start`, `end` with signed half-aperture `theta`.
    pub fn from_half_angle(start: Point, end: Point, theta: f64) -> Self {
        let chord = start.distance(end);
        let kappa = if chord > 0.0 { 2.0 * theta.sin() / chord } else { 0.0 };
        CircularArc { start, end, kappa, major: theta.abs() > FRAC_PI_2 }
    }

    pub fn chord(&self) -> f64 {
        self.start.distance(self.end)
    }

    pub fn is_straight(&self) -> bool {
        self.kappa == 0.0
    }

    /// Zero chord with no curvature: a point, not a curve.
    pub fn is_degenerate(&self) -> bool {
        self.chord() == 0.0 && (self.kappa == 0.0 || !self.major)
    }

    /// Whether `|kappa| * chord / 2 <= 1` (up to rounding).
    pub fn is_feasible(&self) -> bool {
        self.kappa.is_finite()
            && self.start.is_finite()
            && self.end.is_finite()
            && (self.kappa.abs() * self.chord() / 2.0) <= 1.0 + 1e-12
    }

    /// Signed half-aperture in `(-pi, pi]`.
    pub fn half_angle(&self) -> f64 {
        if self.kappa == 0.0 {
            return 0.0;
        }
        let s = (self.kappa * self.chord() / 2.0).clamp(-1.0, 1.0);
        let minor = s.asin();
        if self.major {
            self.kappa.signum() * PI - minor
        } else {
            minor
        }
    }

    pub fn length(&self) -> f64 {
        let theta = self.half_angle();
        if theta.abs() < SERIES_THETA {
            self.chord() * length_ratio(theta)
        } else {
            2.0 * theta / self.kappa
        }
    }

    /// `1/2 * integral (x dy - y dx)` along the arc.
    pub fn area_moment(&self) -> f64 {
        let theta = self.half_angle();
        let chord_term = 0.5 * self.start.cross(self.end);
        let bulge = if theta.abs() < SERIES_THETA {
            let c = self.chord();
            c * c / 4.0 * segment_factor(theta)
        } else {
            let (s, co) = theta.sin_cos();
            (theta - s * co) / (self.kappa * self.kappa)
        };
        chord_term - bulge
    }

    fn chord_dir(&self) -> Point {
        (self.end - self.start).normalized()
    }

    /// Unit tangents of the start-to-end traversal at both endpoints.
    pub fn endpoint_tangents(&self) -> Result<(Point, Point)> {
        if self.chord() == 0.0 {
            return Err(Error::Degenerate("arc with coincident endpoints".into()));
        }
        let u = self.chord_dir();
        let theta = self.half_angle();
        Ok((u.rotate(theta), u.rotate(-theta)))
    }

    /// Point at fraction `t` of the arc length.
    pub fn point_at(&self, t: f64) -> Point {
        let theta = self.half_angle();
        let c = self.chord();
        if c == 0.0 {
            return self.start;
        }
        let u = self.chord_dir();
        let ratio = if theta.abs() < 1e-8 { t } else { (theta * t).sin() / theta.sin() };
        self.start + u.rotate(theta * (1.0 - t)) * (c * ratio)
    }

    pub fn tangent_at(&self, t: f64) -> Point {
        let theta = self.half_angle();
        self.chord_dir().rotate(theta * (1.0 - 2.0 * t))
    }

    pub fn center(&self) -> Option<Point> {
        if self.kappa == 0.0 {
            return None;
        }
        let mid = (self.start + self.end) * 0.5;
        let theta = self.half_angle();
        let c = self.chord();
        if c == 0.0 {
            return None;
        }
        Some(mid - self.chord_dir().perp() * (theta.cos() / self.kappa))
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.kappa.abs()
    }

    /// Sub-arc between fractions `t0 < t1` of the arc length.
    pub fn sub_arc(&self, t0: f64, t1: f64) -> CircularArc {
        let theta = self.half_angle() * (t1 - t0);
        let a = self.point_at(t0);
        let b = self.point_at(t1);
        CircularArc { start: a, end: b, kappa: self.kappa, major: theta.abs() > FRAC_PI_2 }
    }

    pub fn reversed(&self) -> CircularArc {
        CircularArc { start: self.end, end: self.start, kappa: -self.kappa, major: self.major }
    }

    /// Arc-length fractions where this arc meets the circle `|p - center| = radius`,
    /// sorted and restricted to `[0, 1]`.
    pub fn circle_crossings(&self, center: Point, radius: f64) -> Vec<f64> {
        let mut out = Vec::new();
        if self.kappa == 0.0 || self.half_angle().abs() < 1e-7 {
            let d = self.end - self.start;
            let f = self.start - center;
            let a = d.norm_sq();
            if a == 0.0 {
                return out;
            }
            // Exact for segments; near-flat arcs are refined below.
            let b = 2.0 * f.dot(d);
            let c = f.norm_sq() - radius * radius;
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return out;
            }
            let sq = disc.sqrt();
            for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if (0.0..=1.0).contains(&t) {
                    out.push(t);
                }
            }
            if self.kappa != 0.0 {
                out = out.into_iter().map(|t| self.refine_crossing(t, center, radius)).collect();
            }
            out.sort_by(f64::total_cmp);
            out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            return out;
        }
        let c0 = self.center().expect("curved arc has a center");
        let r0 = self.radius();
        let dvec = center - c0;
        let dist = dvec.norm();
        if dist == 0.0 || dist > r0 + radius || dist < (r0 - radius).abs() {
            return out;
        }
        let a = (r0 * r0 - radius * radius + dist * dist) / (2.0 * dist);
        let hh = (r0 * r0 - a * a).max(0.0).sqrt();
        let base = c0 + dvec * (a / dist);
        let off = dvec.perp() * (hh / dist);
        let phi0 = (self.start - c0).angle();
        let sweep = 2.0 * self.half_angle();
        for p in [base + off, base - off] {
            let phi = (p - c0).angle();
            // Arc angle decreases for theta > 0 (clockwise around the center).
            let delta = if sweep > 0.0 { wrap_angle(phi0 - phi) } else { wrap_angle(phi - phi0) };
            let mut t = delta / sweep.abs();
            if t > 1.0 && (2.0 * PI - delta) < 1e-12 {
                t = 0.0;
            }
            if (0.0..=1.0 + 1e-12).contains(&t) {
                out.push(self.refine_crossing(t.min(1.0), center, radius));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        out
    }

    fn refine_crossing(&self, t: f64, center: Point, radius: f64) -> f64 {
        // A couple of Newton steps on |p(t) - c|^2 - r^2 in the arc parameter.
        let mut t = t;
        let len = self.length();
        for _ in 0..3 {
            let p = self.point_at(t);
            let g = (p - center).norm_sq() - radius * radius;
            let dg = 2.0 * (p - center).dot(self.tangent_at(t)) * len;
            if dg.abs() < 1e-300 {
                break;
            }
            let nt = (t - g / dg).clamp(0.0, 1.0);
            if (nt - t).abs() < 1e-17 {
                t = nt;
                break;
            }
            t = nt;
        }
        t
    }
}

/// `1/2 * integral (x dy - y dx)` over the counter-clockwise circle arc from angle `a0` to `a1`.
pub fn circle_arc_moment(center: Point, radius: f64, a0: f64, a1: f64) -> f64 {
    0.5 * (radius * center.x * (a1.sin() - a0.sin()) - radius * center.y * (a1.cos() - a0.cos())
        + radius * radius * (a1 - a0))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (16 points).
pub fn gauss_legendre_16() -> ([f64; 16], [f64; 16]) {
    const X: [f64; 8] = [
        0.095_012_509_837_637_44,
        0.281_603_550_779_258_9,
        0.458_016_777_657_227_4,
        0.617_876_244_402_643_7,
        0.755_404_408_355_003,
        0.865_631_202_387_831_8,
        0.944_575_023_073_232_6,
        0.989_400_934_991_649_9,
    ];
    const W: [f64; 8] = [
        0.189_450_610_455_068_5,
        0.182_603_415_044_923_6,
        0.169_156_519_395_002_5,
        0.149_595_988_816_576_7,
        0.124_628_971_255_533_9,
        0.095_158_511_682_492_78,
        0.062_253_523_938_647_89,
        0.027_152_459_411_754_09,
    ];
    let mut x = [0.0; 16];
    let mut w = [0.0; 16];
    for i in 0..8 {
        x[i] = -X[7 - i];
        w[i] = W[7 - i];
        x[8 + i] = X[i];
        w[8 + i] = W[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn polyline_length(arc: &CircularArc, n: usize) -> f64 {
        (0..n).map(|i| arc.point_at(i as f64 / n as f64).distance(arc.point_at((i + 1) as f64 / n as f64))).sum()
    }

    #[test]
    fn straight_segment_length() {
        let a = CircularArc::segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        assert_eq!(a.length(), 1.0);
    }

    #[test]
    fn semicircle_length_is_pi() {
        let a = CircularArc::new(Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1.0, false);
        assert!((a.length() - PI).abs() < 1e-14);
    }

    #[test]
    fn sixty_degree_arc_matches_dense_polyline() {
        let a = CircularArc::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0, false);
        // Oracle: polyline length converges quadratically to the arc length.
        let coarse = polyline_length(&a, 20_000);
        assert!((coarse - PI / 3.0).abs() < 1e-8);
        assert!((a.length() - 1.047_197_551_196_597_7).abs() < 1e-14);
    }

    #[test]
    fn unit_circle_from_two_semicircles() {
        // Counter-clockwise: each half bulges to the right of its chord.
        let top = CircularArc::new(Point::new(1.0, 0.0), Point::new(-1.0, 0.0), -1.0, false);
        let bottom = CircularArc::new(Point::new(-1.0, 0.0), Point::new(1.0, 0.0), -1.0, false);
        assert!((top.area_moment() + bottom.area_moment() - PI).abs() < 1e-14);
    }

    #[test]
    fn unit_square_area() {
        let p = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(1.0, 1.0), Point::new(0.0, 1.0)];
        let total: f64 = (0..4).map(|i| CircularArc::segment(p[i], p[(i + 1) % 4]).area_moment()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_lens_area_closed_form_and_quadrature() {
        let chord = 2.0 * (PI / 3.0).sin();
        let l = Point::new(-chord / 2.0, 0.0);
        let r = Point::new(chord / 2.0, 0.0);
        // Counter-clockwise: lower arc l -> r bulging down (right), upper arc r -> l bulging up (right).
        let lower = CircularArc::new(l, r, -1.0, false);
        let upper = CircularArc::new(r, l, -1.0, false);
        let area = lower.area_moment() + upper.area_moment();
        let closed = 2.0 * (PI / 3.0 - 3f64.sqrt() / 4.0);
        assert!((area - closed).abs() < 1e-14);
        assert!((area - 1.228_369_698_608_757).abs() < 1e-12);
        // Independent check: midpoint quadrature of the lens height profile.
        let n = 200_000;
        let mut q = 0.0;
        for i in 0..n {
            let x = -chord / 2.0 + (i as f64 + 0.5) * chord / n as f64;
            let half = (1.0 - x * x).sqrt() - 0.5;
            q += 2.0 * half * chord / n as f64;
        }
        assert!((q - closed).abs() < 1e-8);
    }

    #[test]
    fn tangents_of_basic_arcs() {
        let s = CircularArc::segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        let (t0, t1) = s.endpoint_tangents().unwrap();
        assert_eq!((t0, t1), (Point::new(1.0, 0.0), Point::new(1.0, 0.0)));

        let semi = CircularArc::new(Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1.0, false);
        let (t0, t1) = semi.endpoint_tangents().unwrap();
        assert!((t0 - Point::new(0.0, 1.0)).norm() < 1e-15);
        assert!((t1 - Point::new(0.0, -1.0)).norm() < 1e-15);
        assert!(semi.point_at(0.5).y > 0.99);

        let a = CircularArc::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0, false);
        let (t0, t1) = a.endpoint_tangents().unwrap();
        assert!((t0.angle() - PI / 6.0).abs() < 1e-14);
        assert!((t1.angle() + PI / 6.0).abs() < 1e-14);
        // Finite-difference check along the parameterization.
        let h = 1e-7;
        let fd0 = (a.point_at(h) - a.point_at(0.0)).normalized();
        let fd1 = (a.point_at(1.0) - a.point_at(1.0 - h)).normalized();
        assert!((fd0 - t0).norm() < 1e-6);
        assert!((fd1 - t1).norm() < 1e-6);
    }

    #[test]
    fn degenerate_arc_is_flagged() {
        let a = CircularArc::segment(Point::new(1.0, 1.0), Point::new(1.0, 1.0));
        assert!(a.is_degenerate());
        assert_eq!(a.length(), 0.0);
        assert!(a.endpoint_tangents().is_err());
    }

    #[test]
    fn major_arc_flag_resolves_ambiguity() {
        let minor = CircularArc::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0, false);
        let major = CircularArc::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0), 1.0, true);
        assert!((minor.length() + major.length() - 2.0 * PI).abs() < 1e-13);
        assert!(major.point_at(0.5).y > 1.0);
        assert!((major.half_angle() - 5.0 * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn near_flat_arc_is_continuous_in_kappa() {
        let p0 = Point::new(0.3, -0.2);
        let p1 = Point::new(2.1, 0.7);
        let flat = CircularArc::segment(p0, p1);
        let bent = CircularArc::new(p0, p1, 1e-9, false);
        assert!((flat.length() - bent.length()).abs() < 1e-8);
        assert!((flat.area_moment() - bent.area_moment()).abs() < 1e-8);
    }

    #[test]
    fn series_and_closed_forms_agree_at_the_switch() {
        for th in [0.99e-4, 1.01e-4] {
            let direct_ratio = th / f64::sin(th);
            assert!((length_ratio(th) - direct_ratio).abs() < 1e-15);
            let (s, c) = f64::sin_cos(th);
            let direct_seg = (th - s * c) / (s * s);
            assert!((segment_factor(th) - direct_seg).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_crossings_of_segment_and_arc() {
        let s = CircularArc::segment(Point::new(-3.0, 0.0), Point::new(3.0, 0.0));
        let t = s.circle_crossings(Point::ORIGIN, 2.0);
        assert_eq!(t.len(), 2);
        assert!((t[0] - 1.0 / 6.0).abs() < 1e-15 && (t[1] - 5.0 / 6.0).abs() < 1e-15);

        let semi = CircularArc::new(Point::new(-1.0, 0.0), Point::new(1.0, 0.0), 1.0, false);
        let t = semi.circle_crossings(Point::new(0.0, 1.0), 1.0);
        assert_eq!(t.len(), 2);
        for ti in t {
            assert!(((semi.point_at(ti) - Point::new(0.0, 1.0)).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre_16();
        let i: f64 = x.iter().zip(w.iter()).map(|(x, w)| w * x.powi(30)).sum();
        assert!((i - 2.0 / 31.0).abs() < 1e-13);
    }
}
