//! First-order optimality checks: 120 degree junctions, curvature sums,
//! pressure consistency and far-field shape.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ArcPartition, Curve, FarField, VertexKind};
use crate::geom::Point;

const TWO_THIRDS_PI: f64 = 2.0 * PI / 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StationarityTolerances {
    /// Radians.
    pub angle: f64,
    /// 1/length.
    pub curvature: f64,
    /// 1/length.
    pub pressure: f64,
}

impl Default for StationarityTolerances {
    fn default() -> Self {
        StationarityTolerances { angle: 1e-9, curvature: 1e-9, pressure: 1e-10 }
    }
}

impl StationarityTolerances {
    /// Preset for numerically minimized networks.
    pub fn relaxed() -> Self {
        StationarityTolerances { angle: 1e-5, curvature: 1e-5, pressure: 1e-5 }
    }

    pub fn uniform(tol: f64) -> Self {
        StationarityTolerances { angle: tol, curvature: tol, pressure: tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexResidual {
    pub vertex: usize,
    pub degree: usize,
    /// Largest deviation of a tangent gap from 2pi/3 (pi at smooth degree-2 points).
    pub angle_residual: f64,
    /// Sum of outgoing signed curvatures.
    pub curvature_sum: f64,
}

/// An unbounded edge seen from far away: a half-line from `anchor` along `direction`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FarFieldRay {
    pub anchor: Point,
    pub direction: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FarFieldClass {
    Cluster,
    Line,
    TripleRays { directions: [Point; 3] },
    Invalid { reason: String },
}

impl FarFieldClass {
    pub fn is_valid(&self) -> bool {
        !matches!(self, FarFieldClass::Invalid { .. })
    }

    pub fn matches(&self, declared: &FarField) -> bool {
        matches!(
            (self, declared),
            (FarFieldClass::Cluster, FarField::Cluster)
                | (FarFieldClass::Line, FarField::Line)
                | (FarFieldClass::TripleRays { .. }, FarField::TripleRays(_))
        )
    }
}

fn angle_between(a: Point, b: Point) -> f64 {
    a.cross(b).atan2(a.dot(b)).abs()
}

/// Classifies a set of unbounded rays. `angle_tol` is the slack on the
/// collinearity and 120 degree tests; offsets are compared against `angle_tol * radius`.
pub fn classify_rays(rays: &[FarFieldRay], radius: f64, angle_tol: f64) -> FarFieldClass {
    match rays.len() {
        0 => FarFieldClass::Cluster,
        2 => {
            let (a, b) = (rays[0], rays[1]);
            let (da, db) = (a.direction.normalized(), b.direction.normalized());
            if (angle_between(da, db) - PI).abs() > angle_tol {
                return FarFieldClass::Invalid {
                    reason: format!("two rays at angle {:.12} rad are not opposite", angle_between(da, db)),
                };
            }
            let offset = da.cross(b.anchor - a.anchor).abs();
            if offset > angle_tol * radius.max(1.0) {
                return FarFieldClass::Invalid { reason: format!("opposite rays offset by {offset:e}") };
            }
            FarFieldClass::Line
        }
        3 => {
            let d: Vec<Point> = rays.iter().map(|r| r.direction.normalized()).collect();
            for i in 0..3 {
                for j in i + 1..3 {
                    let ang = angle_between(d[i], d[j]);
                    if (ang - TWO_THIRDS_PI).abs() > angle_tol {
                        return FarFieldClass::Invalid {
                            reason: format!("rays {i} and {j} meet at {:.12} rad, not 2pi/3", ang),
                        };
                    }
                }
            }
            FarFieldClass::TripleRays { directions: [d[0], d[1], d[2]] }
        }
        1 => FarFieldClass::Invalid { reason: "a single unbounded ray".into() },
        n => FarFieldClass::Invalid { reason: format!("{n} unbounded rays; at most 3 are possible") },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub vertices: Vec<VertexResidual>,
    pub max_angle_residual: f64,
    pub max_curvature_sum: f64,
    /// max |kappa| over edges separating two unbounded regions.
    pub infinite_interface_curvature: f64,
    pub eventually_flat: bool,
    pub far_field: FarFieldClass,
    pub far_field_matches_declared: bool,
    pub pressure_residual: f64,
    pub tolerances: StationarityTolerances,
    pub failures: Vec<String>,
    pub pass: bool,
}

impl ArcPartition {
    pub fn far_field_rays(&self) -> Vec<FarFieldRay> {
        let mut rays = Vec::new();
        for i in 0..self.edges.len() {
            match self.curve(i) {
                Curve::Ray { origin, direction, .. } => rays.push(FarFieldRay { anchor: origin, direction }),
                Curve::Line { point, direction } => {
                    rays.push(FarFieldRay { anchor: point, direction });
                    rays.push(FarFieldRay { anchor: point, direction: -direction });
                }
                Curve::Arc(_) => {}
            }
        }
        rays
    }

    pub fn classify_far_field(&self) -> FarFieldClass {
        classify_rays(&self.far_field_rays(), self.window_radius, 1e-9)
    }

    pub fn check_stationarity(&self, tol: &StationarityTolerances) -> StationarityReport {
        let mut failures = Vec::new();
        let inc = self.incidence();
        let mut vertices = Vec::new();
        for (vi, edges) in inc.iter().enumerate() {
            if !matches!(self.vertices[vi].kind, VertexKind::Interior { .. }) {
                continue;
            }
            let degree = edges.len();
            let curvature_sum: f64 = edges.iter().map(|&e| self.outgoing_curvature(e, vi)).sum();
            let angle_residual = match self.sorted_outgoing(vi, edges) {
                Some(sorted) if degree == 2 || degree == 3 => {
                    let target = if degree == 3 { TWO_THIRDS_PI } else { PI };
                    (0..degree)
                        .map(|i| {
                            let a = sorted[i].0;
                            let mut b = sorted[(i + 1) % degree].0;
                            if i + 1 == degree {
                                b += 2.0 * PI;
                            }
                            ((b - a) - target).abs()
                        })
                        .fold(0.0, f64::max)
                }
                _ => PI,
            };
            vertices.push(VertexResidual { vertex: vi, degree, angle_residual, curvature_sum });
        }
        let max_angle_residual = vertices.iter().map(|v| v.angle_residual).fold(0.0, f64::max);
        let max_curvature_sum = vertices.iter().map(|v| v.curvature_sum.abs()).fold(0.0, f64::max);
        if max_angle_residual > tol.angle {
            failures.push(format!("angle residual {max_angle_residual:e} exceeds {:e}", tol.angle));
        }
        if max_curvature_sum > tol.curvature {
            failures.push(format!("curvature-sum residual {max_curvature_sum:e} exceeds {:e}", tol.curvature));
        }

        let mut infinite_interface_curvature: f64 = 0.0;
        let mut pairs: Vec<((usize, usize), bool)> = Vec::new();
        for (i, e) in self.edges.iter().enumerate() {
            if self.is_infinite(e.left) && self.is_infinite(e.right) {
                infinite_interface_curvature = infinite_interface_curvature.max(e.kappa.abs());
                let key = (e.left.min(e.right), e.left.max(e.right));
                let unbounded = !self.curve(i).is_bounded();
                match pairs.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, u)) => *u |= unbounded,
                    None => pairs.push((key, unbounded)),
                }
            }
        }
        if infinite_interface_curvature > tol.curvature {
            failures.push(format!("interface between unbounded regions has curvature {infinite_interface_curvature:e}"));
        }
        let eventually_flat = pairs.iter().all(|(_, u)| *u) && infinite_interface_curvature <= tol.curvature;
        if let Some(((a, b), _)) = pairs.iter().find(|(_, u)| !*u) {
            failures.push(format!("interface between unbounded regions {a} and {b} contains no half-line"));
        }

        let far_field = self.classify_far_field();
        if let FarFieldClass::Invalid { reason } = &far_field {
            failures.push(format!("far field invalid: {reason}"));
        }
        let far_field_matches_declared = far_field.matches(&self.far_field);
        if far_field.is_valid() && !far_field_matches_declared {
            failures.push("far field differs from the declared far-field model".into());
        }

        let pressure_residual = self.solve_pressures().residual;
        if pressure_residual > tol.pressure {
            failures.push(format!("pressure residual {pressure_residual:e} exceeds {:e}", tol.pressure));
        }
        StationarityReport {
            vertices,
            max_angle_residual,
            max_curvature_sum,
            infinite_interface_curvature,
            eventually_flat,
            far_field,
            far_field_matches_declared,
            pressure_residual,
            tolerances: *tol,
            pass: failures.is_empty(),
            failures,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_cone, make_double_bubble, make_lens, make_reuleaux, ConeKind};

    fn ray(ax: f64, ay: f64, angle: f64) -> FarFieldRay {
        FarFieldRay { anchor: Point::new(ax, ay), direction: Point::from_angle(angle) }
    }

    #[test]
    fn lens_is_stationary() {
        let r = make_lens(1.0).unwrap().check_stationarity(&StationarityTolerances::default());
        assert!(r.pass, "{:?}", r.failures);
        assert!(r.max_angle_residual < 1e-9);
        assert_eq!(r.far_field, FarFieldClass::Line);
    }

    #[test]
    fn perturbed_lens_fails_on_curvature_sum() {
        let mut p = make_lens(1.0).unwrap();
        p.edges[0].kappa += 0.1;
        let r = p.check_stationarity(&StationarityTolerances::default());
        assert!(!r.pass);
        assert!((r.max_curvature_sum - 0.1).abs() < 1e-12);
    }

    #[test]
    fn parallel_rays_are_invalid() {
        let c = classify_rays(&[ray(0.0, 0.0, 0.0), ray(0.0, 1.0, 0.0)], 10.0, 1e-9);
        assert!(!c.is_valid());
    }

    #[test]
    fn offset_opposite_rays_are_not_a_line() {
        let c = classify_rays(&[ray(0.0, 0.0, 0.0), ray(0.0, 1e-3, PI)], 10.0, 1e-9);
        assert!(!c.is_valid());
    }

    #[test]
    fn four_rays_are_invalid() {
        let rays: Vec<_> = (0..4).map(|k| ray(0.0, 0.0, k as f64 * PI / 2.0)).collect();
        match classify_rays(&rays, 10.0, 1e-9) {
            FarFieldClass::Invalid { reason } => assert!(reason.contains("at most 3")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn classification_of_constructions() {
        assert_eq!(make_double_bubble(1.0, 1.0).unwrap().classify_far_field(), FarFieldClass::Cluster);
        assert_eq!(make_cone(ConeKind::HalfPlane, 3.0).classify_far_field(), FarFieldClass::Line);
        assert!(matches!(make_reuleaux(1.0).unwrap().classify_far_field(), FarFieldClass::TripleRays { .. }));
        assert!(matches!(
            make_cone(ConeKind::TripleJunction, 3.0).classify_far_field(),
            FarFieldClass::TripleRays { .. }
        ));
    }

    #[test]
    fn reuleaux_rays_are_not_concurrent() {
        let p = make_reuleaux(1.0).unwrap();
        let rays = p.far_field_rays();
        let off = rays[0].direction.cross(rays[1].anchor - rays[0].anchor).abs();
        assert!(off > 0.1);
    }
}
