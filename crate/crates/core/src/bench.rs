//! Numerical checks of the quantitative lemmas: the Steiner expansion, the
//! glueing (coarea) identity, perimeter growth and cluster bounds, density
//! estimates and the volume-fixing cost bound.

use std::f64::consts::{PI, TAU};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geom::{circle_arc_moment, CircularArc, Point};
use crate::grid::{grid_energy, random_variation_instance, volume_fixing_variation, GridPartition};
use crate::network::{ArcPartition, Curve, FarField, Locator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub lemma: String,
    pub inputs: Value,
    pub measured: Value,
    pub targets: Value,
    pub pass: bool,
    /// Wall-clock seconds; left out of reports that must be reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl BenchReport {
    fn new(lemma: &str, inputs: Value, measured: Value, targets: Value, pass: bool) -> Self {
        BenchReport { lemma: lemma.into(), inputs, measured, targets, pass, runtime_seconds: None }
    }

    fn timed(mut self, start: Instant) -> Self {
        self.runtime_seconds = Some(start.elapsed().as_secs_f64());
        self
    }
}

fn steiner_sum(rho: f64, phi: f64) -> f64 {
    let p = Point::from_angle(phi) * rho;
    (0..3).map(|k| p.distance(Point::from_angle(k as f64 * TAU / 3.0))).sum()
}

/// `inf { sum_i |P - V_i| : |P| = rho }` for the vertices `V_i` of an
/// equilateral triangle inscribed in the unit circle.
pub fn steiner_ell(rho: f64) -> f64 {
    if rho == 0.0 {
        return 3.0;
    }
    const SCAN: usize = 3600;
    let step = TAU / SCAN as f64;
    let best = (0..SCAN)
        .map(|k| k as f64 * step)
        .min_by(|&a, &b| steiner_sum(rho, a).total_cmp(&steiner_sum(rho, b)))
        .unwrap();
    // Golden-section refinement inside the bracketing cells.
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if steiner_sum(rho, c) < steiner_sum(rho, d) {
            b = d;
        } else {
            a = c;
        }
        if b - a < 1e-15 {
            break;
        }
    }
    let refined = steiner_sum(rho, (a + b) / 2.0);
    refined.min(steiner_sum(rho, best))
}

/// Mean of `sum_i |P - V_i|` over the circle `|P| = rho` (diagnostic only).
pub fn steiner_circle_average(rho: f64) -> f64 {
    const N: usize = 4096;
    (0..N).map(|k| steiner_sum(rho, (k as f64 + 0.5) * TAU / N as f64)).sum::<f64>() / N as f64
}

/// Passes when `ell(rho) >= 3` and the quadratic coefficient
/// `(ell - 3) / rho^2` is within `rho` of `3/4`.
pub fn steiner_report(rho: f64) -> Result<BenchReport> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1), got {rho}")));
    }
    let start = Instant::now();
    let ell = steiner_ell(rho);
    let (ratio, pass) = if rho == 0.0 {
        (Value::Null, ell == 3.0)
    } else {
        let r = (ell - 3.0) / (rho * rho);
        (json!(r), ell >= 3.0 && (r - 0.75).abs() <= rho)
    };
    Ok(BenchReport::new(
        "steiner",
        json!({ "rho": rho }),
        json!({ "ell": ell, "quadratic_coefficient": ratio, "circle_average": steiner_circle_average(rho) }),
        json!({ "ell_at_least": 3.0, "quadratic_coefficient": 0.75, "coefficient_tolerance": rho }),
        pass,
    )
    .timed(start))
}

/// A set entering the glueing identity.
#[derive(Clone, Debug)]
pub enum GlueingShape {
    Disk { center: Point, radius: f64 },
    /// `{x : x . normal < offset}` with a unit normal.
    HalfPlane { normal: Point, offset: f64 },
    /// One region of an arc partition.
    Region { partition: ArcPartition, region: usize },
}

/// Boundary piece: a counter-clockwise circle arc or a segment.
#[derive(Clone, Copy, Debug)]
enum Prim {
    Arc { c: Point, s: f64, a0: f64, a1: f64 },
    Seg { p: Point, q: Point },
}

impl Prim {
    fn point(&self, t: f64) -> Point {
        match *self {
            Prim::Arc { c, s, a0, a1 } => c + Point::from_angle(a0 + t * (a1 - a0)) * s,
            Prim::Seg { p, q } => p + (q - p) * t,
        }
    }

    fn tangent(&self, t: f64) -> Point {
        match *self {
            Prim::Arc { a0, a1, .. } => Point::from_angle(a0 + t * (a1 - a0)).perp(),
            Prim::Seg { p, q } => (q - p).normalized(),
        }
    }

    fn param_of(&self, x: Point) -> Option<f64> {
        let eps = 1e-12;
        match *self {
            Prim::Arc { c, a0, a1, .. } => {
                let mut a = (x - c).angle();
                while a < a0 - eps {
                    a += TAU;
                }
                while a > a0 + TAU {
                    a -= TAU;
                }
                let t = (a - a0) / (a1 - a0);
                (t <= 1.0 + eps).then(|| t.clamp(0.0, 1.0))
            }
            Prim::Seg { p, q } => {
                let d = q - p;
                let t = (x - p).dot(d) / d.norm_sq();
                (-eps..=1.0 + eps).contains(&t).then(|| t.clamp(0.0, 1.0))
            }
        }
    }

    /// Points of this primitive's carrier (full circle or line) on `other`.
    fn meet(&self, other: &Prim) -> Vec<Point> {
        let pts = match (*self, *other) {
            (Prim::Arc { c, s, .. }, Prim::Arc { c: c2, s: s2, .. }) => circle_circle(c, s, c2, s2),
            (Prim::Arc { c, s, .. }, Prim::Seg { p, q }) | (Prim::Seg { p, q }, Prim::Arc { c, s, .. }) => {
                line_circle(p, q - p, c, s)
            }
            (Prim::Seg { p, q }, Prim::Seg { p: p2, q: q2 }) => {
                let (d, e) = (q - p, q2 - p2);
                let den = d.cross(e);
                if den.abs() < 1e-300 {
                    Vec::new()
                } else {
                    vec![p + d * ((p2 - p).cross(e) / den)]
                }
            }
        };
        pts.into_iter().filter(|&x| self.param_of(x).is_some() && other.param_of(x).is_some()).collect()
    }

    fn moment(&self, t0: f64, t1: f64) -> f64 {
        match *self {
            Prim::Arc { c, s, a0, a1 } => circle_arc_moment(c, s, a0 + t0 * (a1 - a0), a0 + t1 * (a1 - a0)),
            Prim::Seg { .. } => 0.5 * self.point(t0).cross(self.point(t1)),
        }
    }
}

fn circle_circle(c1: Point, s1: f64, c2: Point, s2: f64) -> Vec<Point> {
    let d = c2 - c1;
    let l = d.norm();
    if l == 0.0 || l > s1 + s2 || l < (s1 - s2).abs() {
        return Vec::new();
    }
    let a = (s1 * s1 - s2 * s2 + l * l) / (2.0 * l);
    let h = (s1 * s1 - a * a).max(0.0).sqrt();
    let u = d / l;
    let m = c1 + u * a;
    vec![m + u.perp() * h, m - u.perp() * h]
}

fn line_circle(p: Point, d: Point, c: Point, s: f64) -> Vec<Point> {
    let a = d.norm_sq();
    let f = p - c;
    let b = f.dot(d);
    let disc = b * b - a * (f.norm_sq() - s * s);
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    vec![p + d * ((-b - sq) / a), p + d * ((-b + sq) / a)]
}

fn full_circle(c: Point, s: f64) -> Prim {
    Prim::Arc { c, s, a0: 0.0, a1: TAU }
}

fn arc_prim(arc: &CircularArc) -> Prim {
    match arc.center() {
        None => Prim::Seg { p: arc.start, q: arc.end },
        Some(c) => {
            let s = arc.radius();
            let (a_s, a_e, a_m) = ((arc.start - c).angle(), (arc.end - c).angle(), (arc.point_at(0.5) - c).angle());
            let ccw = |from: f64, to: f64| {
                let mut to = to;
                while to <= from {
                    to += TAU;
                }
                to
            };
            let e = ccw(a_s, a_e);
            let m = ccw(a_s, a_m);
            if m < e {
                Prim::Arc { c, s, a0: a_s, a1: e }
            } else {
                Prim::Arc { c, s, a0: a_e, a1: ccw(a_e, a_s) }
            }
        }
    }
}

struct PreparedShape {
    shape: GlueingShape,
    locator: Option<Locator>,
    prims: Vec<Prim>,
}

impl PreparedShape {
    fn new(shape: &GlueingShape, reach: f64) -> Result<Self> {
        let (locator, prims) = match shape {
            GlueingShape::Disk { center, radius } => (None, vec![full_circle(*center, *radius)]),
            GlueingShape::HalfPlane { normal, offset } => {
                let base = *normal * *offset;
                let along = normal.perp() * (reach + offset.abs());
                (None, vec![Prim::Seg { p: base - along, q: base + along }])
            }
            GlueingShape::Region { partition, region } => {
                if *region >= partition.region_count() {
                    return Err(Error::InvalidArgument(format!("no region {region}")));
                }
                let mut prims = Vec::new();
                for id in 0..partition.edges.len() {
                    let e = &partition.edges[id];
                    if e.left != *region && e.right != *region {
                        continue;
                    }
                    prims.push(match partition.curve(id) {
                        Curve::Arc(a) => arc_prim(&a),
                        Curve::Ray { origin, direction, .. } => {
                            Prim::Seg { p: origin, q: origin + direction * (reach + origin.norm()) }
                        }
                        Curve::Line { point, direction } => {
                            let l = reach + point.norm();
                            Prim::Seg { p: point - direction * l, q: point + direction * l }
                        }
                    });
                }
                (Some(Locator::new(partition, reach)?), prims)
            }
        };
        Ok(PreparedShape { shape: shape.clone(), locator, prims })
    }

    fn contains(&self, x: Point) -> bool {
        match &self.shape {
            GlueingShape::Disk { center, radius } => x.distance(*center) < *radius,
            GlueingShape::HalfPlane { normal, offset } => x.dot(*normal) < *offset,
            GlueingShape::Region { region, .. } => self.locator.as_ref().unwrap().locate(x) == Some(*region),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlueingResult {
    /// `int_r^R H^1((E sym F) on the circle of radius rho) d rho`.
    pub lhs: f64,
    /// `|(E sym F) in the annulus r < |x| < R|` from boundary integrals.
    pub rhs: f64,
    pub discrepancy: f64,
    pub evaluations: usize,
}

/// Evaluates both sides of the coarea identity for `E` and `F` on the
/// annulus `r < |x| < R`. The left side integrates circle-trace lengths by
/// adaptive Simpson with at most `budget` integrand evaluations; the right
/// side is the exact area of the symmetric difference from Green's formula
/// over its boundary arcs and segments.
pub fn glueing_check(e: &GlueingShape, f: &GlueingShape, r: f64, big_r: f64, budget: usize) -> Result<GlueingResult> {
    if !(0.0 < r && r < big_r) {
        return Err(Error::InvalidArgument(format!("need 0 < r < R, got r = {r}, R = {big_r}")));
    }
    let reach = 2.0 * big_r + 1.0;
    let (pe, pf) = (PreparedShape::new(e, reach)?, PreparedShape::new(f, reach)?);
    let differ = |x: Point| pe.contains(x) != pf.contains(x);

    let trace = |rho: f64| -> f64 {
        let circle = full_circle(Point::ORIGIN, rho);
        let mut cuts = vec![0.0, 1.0];
        for p in pe.prims.iter().chain(&pf.prims) {
            cuts.extend(circle.meet(p).into_iter().filter_map(|x| circle.param_of(x)));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.windows(2)
            .filter(|w| w[1] > w[0] && differ(circle.point((w[0] + w[1]) / 2.0)))
            .map(|w| (w[1] - w[0]) * TAU * rho)
            .sum()
    };
    let mut evaluations = 0usize;
    let lhs = adaptive_simpson(&trace, r, big_r, 1e-11, budget, &mut evaluations);

    let inside = |x: Point| {
        let n = x.norm();
        n > r && n < big_r && differ(x)
    };
    let mut prims: Vec<Prim> = pe.prims.iter().chain(&pf.prims).copied().collect();
    prims.push(full_circle(Point::ORIGIN, r));
    prims.push(full_circle(Point::ORIGIN, big_r));
    let delta = 1e-9 * (1.0 + big_r);
    let mut rhs = 0.0;
    for (i, p) in prims.iter().enumerate() {
        let mut cuts = vec![0.0, 1.0];
        for (j, q) in prims.iter().enumerate() {
            if i != j {
                cuts.extend(p.meet(q).into_iter().filter_map(|x| p.param_of(x)));
            }
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            if w[1] - w[0] < 1e-14 {
                continue;
            }
            let t = (w[0] + w[1]) / 2.0;
            let (m, n) = (p.point(t), p.tangent(t).perp());
            match (inside(m + n * delta), inside(m - n * delta)) {
                (true, false) => rhs += p.moment(w[0], w[1]),
                (false, true) => rhs -= p.moment(w[0], w[1]),
                _ => {}
            }
        }
    }
    Ok(GlueingResult { lhs, rhs, discrepancy: lhs - rhs, evaluations })
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, budget: usize, evals: &mut usize) -> f64 {
    fn rec(
        f: &dyn Fn(f64) -> f64,
        (a, fa): (f64, f64),
        (m, fm): (f64, f64),
        (b, fb): (f64, f64),
        whole: f64,
        tol: f64,
        depth: usize,
        budget: usize,
        evals: &mut usize,
    ) -> f64 {
        let (lm, rm) = ((a + m) / 2.0, (m + b) / 2.0);
        let (flm, frm) = (f(lm), f(rm));
        *evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let err = left + right - whole;
        if depth == 0 || *evals >= budget || err.abs() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        rec(f, (a, fa), (lm, flm), (m, fm), left, tol / 2.0, depth - 1, budget, evals)
            + rec(f, (m, fm), (rm, frm), (b, fb), right, tol / 2.0, depth - 1, budget, evals)
    }
    let m = (a + b) / 2.0;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    *evals += 3;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, (a, fa), (m, fm), (b, fb), whole, tol, 48, budget, evals)
}

/// A random pair of disks and annulus radii for the glueing suite.
pub fn random_disk_pair(rng: &mut impl Rng) -> (GlueingShape, GlueingShape, f64, f64) {
    let mut disk = || GlueingShape::Disk {
        center: Point::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
        radius: rng.random_range(0.2..1.5),
    };
    let (e, f) = (disk(), disk());
    let r = rng.random_range(0.05..0.5);
    let big_r = rng.random_range(1.0..3.0);
    (e, f, r, big_r)
}

/// Glueing identity over `count` random disk pairs; passes when every pair
/// has `|lhs - rhs| <= max(1e-6, 1e-3 rhs)`.
pub fn glueing_suite(count: usize, seed: u64) -> Result<BenchReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut pass = true;
    for _ in 0..count {
        let (e, f, r, big_r) = random_disk_pair(&mut rng);
        let g = glueing_check(&e, &f, r, big_r, 400_000)?;
        let allowed = (1e-3 * g.rhs).max(1e-6);
        worst = worst.max(g.discrepancy.abs() / allowed);
        pass &= g.discrepancy.abs() <= allowed;
    }
    Ok(BenchReport::new(
        "glueing",
        json!({ "pairs": count, "seed": seed }),
        json!({ "worst_discrepancy_over_allowed": worst }),
        json!({ "absolute": 1e-6, "relative": 1e-3 }),
        pass,
    )
    .timed(start))
}

/// `2 pi + 4 N` for `N` regions in the plane.
pub fn growth_constant(n: usize) -> f64 {
    TAU + 4.0 * n as f64
}

/// Checks `P(E, B_R) < C_0 R` at each radius.
pub fn perimeter_growth_check(partition: &ArcPartition, radii: &[f64]) -> Result<BenchReport> {
    let start = Instant::now();
    let c0 = growth_constant(partition.region_count());
    let mut perimeters = Vec::new();
    for &r in radii {
        perimeters.push(partition.measures_in_disk(Point::ORIGIN, r)?.perimeter);
    }
    let pass = perimeters.iter().zip(radii).all(|(p, r)| *p < c0 * r);
    Ok(BenchReport::new(
        "perimeter_growth",
        json!({ "regions": partition.region_count(), "radii": radii }),
        json!({ "perimeters": perimeters }),
        json!({ "c0": c0, "bounds": radii.iter().map(|r| c0 * r).collect::<Vec<_>>() }),
        pass,
    )
    .timed(start))
}

/// Same check for a lattice partition, with `P(E, B_R)` the stencil energy
/// of the cells whose centres lie in `B_R`.
pub fn perimeter_growth_check_grid(grid: &GridPartition, radii: &[f64]) -> BenchReport {
    let start = Instant::now();
    let c0 = growth_constant(grid.label_count());
    let perimeters: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let mut inner = grid.clone();
            let outside = inner.label_count() as u16;
            inner.targets.push(None);
            for c in 0..grid.n * grid.n {
                if grid.cell_center(c % grid.n, c / grid.n).norm() >= r {
                    inner.labels[c] = outside;
                }
            }
            // Pairs touching the outside label are not interior interfaces.
            grid_energy(&inner) - outside_energy(&inner, outside)
        })
        .collect();
    let pass = perimeters.iter().zip(radii).all(|(p, r)| *p < c0 * r);
    BenchReport::new(
        "perimeter_growth",
        json!({ "regions": grid.label_count(), "radii": radii, "n": grid.n, "h": grid.h }),
        json!({ "perimeters": perimeters }),
        json!({ "c0": c0, "bounds": radii.iter().map(|r| c0 * r).collect::<Vec<_>>() }),
        pass,
    )
    .timed(start)
}

fn outside_energy(grid: &GridPartition, outside: u16) -> f64 {
    let mut merged = grid.clone();
    // Energy of the boundary of the outside set alone.
    for l in merged.labels.iter_mut() {
        if *l != outside {
            *l = 0;
        }
    }
    grid_energy(&merged)
}

/// Checks `P(E) <= C_2 N sqrt(m)` with `C_2 = 2 sqrt(pi)`, `N` the number of
/// finite regions and `m` their total area.
pub fn cluster_bound_check(cluster: &ArcPartition) -> Result<BenchReport> {
    if cluster.far_field != FarField::Cluster {
        return Err(Error::Precondition("cluster bound needs a cluster far field".into()));
    }
    let start = Instant::now();
    let areas: Vec<f64> = cluster.finite_areas().into_iter().flatten().collect();
    let n = areas.len();
    let m: f64 = areas.iter().sum();
    let perimeter = cluster.finite_perimeter();
    let c2 = 2.0 * PI.sqrt();
    let bound = c2 * n as f64 * m.sqrt();
    Ok(BenchReport::new(
        "cluster_bound",
        json!({ "finite_regions": n, "total_area": m }),
        json!({ "perimeter": perimeter }),
        json!({ "c2": c2, "bound": bound }),
        perimeter <= bound,
    )
    .timed(start))
}

/// `|E_k cap B(x, r)| / (pi r^2)` for every region.
pub fn density_at(partition: &ArcPartition, x: Point, r: f64) -> Result<Vec<f64>> {
    let m = partition.measures_in_disk(x, r)?;
    Ok(m.areas.iter().map(|a| a / (PI * r * r)).collect())
}

/// Samples `samples` points evenly along the interfaces (rays up to the
/// partition's extent plus one) and reports the extreme densities of the two
/// regions meeting at each point. Radii below `r0`, the diameter of a disk
/// with the smallest finite area, must give densities in `(0, 1)`; larger
/// radii are reported only.
pub fn density_check(partition: &ArcPartition, samples: usize, radii: &[f64]) -> Result<BenchReport> {
    let start = Instant::now();
    let reach = partition.extent() + 1.0;
    let r0 = partition
        .finite_areas()
        .into_iter()
        .flatten()
        .map(|m| 2.0 * (m / PI).sqrt())
        .fold(f64::INFINITY, f64::min);
    let mut pieces: Vec<(usize, Prim, f64)> = Vec::new();
    for id in 0..partition.edges.len() {
        let prim = match partition.curve(id) {
            Curve::Arc(a) => arc_prim(&a),
            Curve::Ray { origin, direction, .. } => Prim::Seg { p: origin, q: origin + direction * reach },
            Curve::Line { point, direction } => Prim::Seg { p: point - direction * reach, q: point + direction * reach },
        };
        let len = match prim {
            Prim::Arc { s, a0, a1, .. } => s * (a1 - a0),
            Prim::Seg { p, q } => p.distance(q),
        };
        pieces.push((id, prim, len));
    }
    let total: f64 = pieces.iter().map(|p| p.2).sum();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_far, mut hi_far) = (f64::INFINITY, f64::NEG_INFINITY);
    if total > 0.0 {
        for k in 0..samples {
            let mut s = (k as f64 + 0.5) / samples as f64 * total;
            let &(id, prim, len) = pieces
                .iter()
                .find(|p| {
                    if s <= p.2 {
                        true
                    } else {
                        s -= p.2;
                        false
                    }
                })
                .unwrap_or(pieces.last().unwrap());
            let x = prim.point((s / len).clamp(0.0, 1.0));
            let e = &partition.edges[id];
            for &r in radii {
                let d = density_at(partition, x, r)?;
                for k in [e.left, e.right] {
                    if r < r0 {
                        lo = lo.min(d[k]);
                        hi = hi.max(d[k]);
                    } else {
                        lo_far = lo_far.min(d[k]);
                        hi_far = hi_far.max(d[k]);
                    }
                }
            }
        }
    }
    let finite = |v: f64| if v.is_finite() { json!(v) } else { Value::Null };
    let pass = !lo.is_finite() || (lo > 0.0 && hi < 1.0);
    Ok(BenchReport::new(
        "density",
        json!({ "samples": samples, "radii": radii, "r0": finite(r0) }),
        json!({ "min": finite(lo), "max": finite(hi), "min_at_or_above_r0": finite(lo_far), "max_at_or_above_r0": finite(hi_far) }),
        json!({ "min_above": 0.0, "max_below": 1.0 }),
        pass,
    )
    .timed(start))
}

/// Volume-fixing variations on `count` random lattice instances of size `n`.
pub fn volume_fixing_suite(count: usize, n: usize, seed: u64) -> Result<BenchReport> {
    let start = Instant::now();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for k in 0..count as u64 {
        let labels = 2 + (k % 4) as usize;
        let (g, a, balls) = random_variation_instance(n, labels, seed.wrapping_add(k));
        let out = volume_fixing_variation(&g, &a, &balls)?;
        worst = worst.max(out.delta_perimeter / out.bound);
        pass &= out.within_bound;
    }
    Ok(BenchReport::new(
        "volume_fixing",
        json!({ "instances": count, "n": n, "h": 2.0 / n as f64, "seed": seed }),
        json!({ "worst_cost_over_bound": worst }),
        json!({ "cost_over_bound_at_most": 1.0 }),
        pass,
    )
    .timed(start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_cone, make_disk, make_double_bubble, make_lens, ConeKind};

    #[test]
    fn steiner_values() {
        assert_eq!(steiner_ell(0.0), 3.0);
        // Minimum sits with P pointing at a vertex: 0.9 + 2 sqrt(1.11).
        let direct = 0.9 + 2.0 * 1.11f64.sqrt();
        assert!((steiner_ell(0.1) - direct).abs() < 1e-13);
        let mut prev = 3.0;
        for k in 1..=90 {
            let v = steiner_ell(k as f64 / 100.0);
            assert!(v > prev);
            prev = v;
        }
        let ratios: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&r| (steiner_ell(r) - 3.0) / (r * r)).collect();
        for (r, q) in [0.2, 0.1, 0.05].iter().zip(&ratios) {
            assert!((q - 0.75).abs() <= r / 2.0, "{r}: {q}");
        }
        assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2]);
        assert!(steiner_report(0.1).unwrap().pass);
    }

    #[test]
    fn glueing_examples() {
        let d = |x: f64| GlueingShape::Disk { center: Point::new(x, 0.0), radius: 1.0 };
        let same = glueing_check(&d(0.0), &d(0.0), 0.2, 2.0, 10_000).unwrap();
        assert_eq!((same.lhs, same.rhs), (0.0, 0.0));
        let g = glueing_check(&d(0.0), &d(0.5), 0.2, 2.0, 400_000).unwrap();
        // Both disks contain B_0.2 and lie inside B_2, so the annulus sees the
        // whole symmetric difference: twice (disk - lens of the two circles).
        let lens = 2.0 * (0.25f64).acos() - 0.25 * 3.75f64.sqrt();
        let expected = 2.0 * (PI - lens);
        assert!((g.rhs - expected).abs() < 1e-12, "{} vs {expected}", g.rhs);
        assert!((g.lhs - g.rhs).abs() < 1e-6, "{:?}", g);
        let up = GlueingShape::HalfPlane { normal: Point::new(0.0, 1.0), offset: 0.0 };
        let down = GlueingShape::HalfPlane { normal: Point::new(0.0, -1.0), offset: 0.0 };
        let h = glueing_check(&up, &down, 1.0, 2.0, 10_000).unwrap();
        assert!((h.rhs - 3.0 * PI).abs() < 1e-12 && (h.lhs - 3.0 * PI).abs() < 1e-9, "{h:?}");
    }

    #[test]
    fn glueing_with_network_regions() {
        let lens = make_lens(1.0).unwrap();
        let e = GlueingShape::Region { partition: lens.clone(), region: 2 };
        let f = GlueingShape::Region { partition: lens, region: 0 };
        let g = glueing_check(&e, &f, 0.1, 3.0, 400_000).unwrap();
        // Lens plus the upper half-plane minus B_0.1, all inside B_3.
        assert!((g.lhs - g.rhs).abs() < 1e-6, "{g:?}");
    }

    #[test]
    fn growth_and_cluster_bounds() {
        let tj = make_cone(ConeKind::TripleJunction, 20.0);
        let r = perimeter_growth_check(&tj, &[1.0, 7.0]).unwrap();
        assert!(r.pass);
        assert!((r.measured["perimeters"][1].as_f64().unwrap() - 21.0).abs() < 1e-12);
        assert!(perimeter_growth_check(&make_lens(1.0).unwrap(), &[2.0, 5.0, 10.0]).unwrap().pass);

        let disk = make_disk(2.0).unwrap();
        let c = cluster_bound_check(&disk).unwrap();
        let (p, b) = (c.measured["perimeter"].as_f64().unwrap(), c.targets["bound"].as_f64().unwrap());
        assert!((p - b).abs() < 1e-12 * b);
        let bubble = cluster_bound_check(&make_double_bubble(1.0, 1.0).unwrap()).unwrap();
        assert!(bubble.pass);
        assert!((bubble.targets["bound"].as_f64().unwrap() - 2.0 * PI.sqrt() * 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!(cluster_bound_check(&make_double_bubble(1.0, 2.0).unwrap()).unwrap().pass);
        assert!(cluster_bound_check(&make_lens(1.0).unwrap()).is_err());
    }

    #[test]
    fn striped_raster_breaks_growth_bound() {
        let n = 128;
        let mut g = GridPartition::uniform(n, 4.0 / n as f64, 2);
        for c in 0..n * n {
            g.labels[c] = ((c % n) % 2) as u16;
        }
        let r = perimeter_growth_check_grid(&g, &[1.0, 1.5]);
        assert!(!r.pass);
        let mut flat = GridPartition::uniform(n, 4.0 / n as f64, 2);
        for c in 0..n * n {
            flat.labels[c] = (c / n >= n / 2) as u16;
        }
        let r = perimeter_growth_check_grid(&flat, &[1.0, 1.5]);
        assert!(r.pass);
        let p = r.measured["perimeters"][0].as_f64().unwrap();
        assert!((p / 2.0 - 1.0).abs() < 0.05, "{p}");
    }

    #[test]
    fn density_examples() {
        let line = make_cone(ConeKind::HalfPlane, 10.0);
        for r in [0.1, 0.5, 2.0] {
            let d = density_at(&line, Point::new(0.3, 0.0), r).unwrap();
            assert!((d[0] - 0.5).abs() < 1e-12 && (d[1] - 0.5).abs() < 1e-12);
        }
        let lens = make_lens(1.0).unwrap();
        let tip = lens.vertices.iter().find_map(|v| v.position()).unwrap();
        let d = density_at(&lens, tip, 1e-3).unwrap();
        assert!(d.iter().all(|&x| x >= 1.0 / 6.0 - 1e-3), "{d:?}");
        let rep = density_check(&lens, 64, &[0.01, 0.1, 0.5, 2.0]).unwrap();
        assert!(rep.pass);
        assert!(rep.measured["max_at_or_above_r0"].is_number());
    }

    #[test]
    fn volume_fixing_suite_passes() {
        assert!(volume_fixing_suite(12, 64, 5).unwrap().pass);
    }
}
