//! Voronoi partitions of equidistant points on the unit sphere `S^d` and their
//! stereographic images in `R^d`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::network::{classify_rays, FarFieldClass, FarFieldRay};

/// `N` unit vectors in `R^{d+1}` with pairwise inner product `-1/(N-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSites {
    pub d: usize,
    pub sites: Vec<DVector<f64>>,
}

impl SimplexSites {
    pub fn n(&self) -> usize {
        self.sites.len()
    }

    /// Largest deviation of the Gram matrix from the regular-simplex Gram matrix.
    pub fn gram_defect(&self) -> f64 {
        let n = self.n();
        let off = -1.0 / (n as f64 - 1.0);
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { off };
                worst = worst.max((self.sites[i].dot(&self.sites[j]) - want).abs());
            }
        }
        worst
    }
}

/// Regular simplex with `n` vertices in the first `n - 1` coordinates of `R^{d+1}`.
pub fn make_equidistant_sites(n: usize, d: usize) -> Result<SimplexSites> {
    if d < 1 {
        return Err(Error::InvalidArgument("dimension d must be at least 1".into()));
    }
    if n < 2 || n > d + 2 {
        return Err(Error::InvalidArgument(format!(
            "standard partitions with {n} regions exist only for 2 <= N <= d + 2 = {}",
            d + 2
        )));
    }
    // Coordinates of e_i - centroid in the Helmert basis of the sum-zero hyperplane.
    let scale = ((n - 1) as f64 / n as f64).sqrt();
    let sites = (0..n)
        .map(|i| {
            let mut v = DVector::zeros(d + 1);
            for k in 1..n {
                let norm = ((k * (k + 1)) as f64).sqrt();
                let c = if i < k {
                    1.0
                } else if i == k {
                    -(k as f64)
                } else {
                    0.0
                };
                v[k - 1] = c / norm / scale;
            }
            v
        })
        .collect();
    Ok(SimplexSites { d, sites })
}

/// Stereographic projection from the north pole `e_{d+1}`; `None` at the pole.
pub fn project_to_plane(x: &DVector<f64>) -> Option<DVector<f64>> {
    let d = x.len() - 1;
    let denom = 1.0 - x[d];
    if denom <= 1e-15 {
        return None;
    }
    Some(x.rows(0, d).into_owned() / denom)
}

/// Inverse of [`project_to_plane`].
pub fn lift(y: &DVector<f64>) -> DVector<f64> {
    let d = y.len();
    let s = y.norm_squared();
    let mut x = DVector::zeros(d + 1);
    for i in 0..d {
        x[i] = 2.0 * y[i] / (1.0 + s);
    }
    x[d] = (s - 1.0) / (s + 1.0);
    x
}

/// Rotation taking unit vector `a` to unit vector `b` (identity on their orthogonal complement).
fn rotation_between(a: &DVector<f64>, b: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = a.len();
    let c = a.dot(b);
    if c <= -1.0 + 1e-12 {
        return Err(Error::Degenerate("antipodal vectors have no unique minimal rotation".into()));
    }
    let s = a + b;
    Ok(DMatrix::identity(n, n) - &s * s.transpose() / (1.0 + c) + 2.0 * b * a.transpose())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleDomain {
    /// Uniform samples on the sphere itself.
    Sphere,
    /// Uniform samples in the planar ball of this radius (stereographic side).
    Window { radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub samples: usize,
    pub seed: u64,
    pub total_volume: f64,
    pub volumes: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// A projected interface between two cells, sampled exactly on its great circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPolyline {
    pub regions: (usize, usize),
    pub points: Vec<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurveFit {
    Circle { center: Point, radius: f64 },
    Line { point: Point, direction: Point },
}

impl CurveFit {
    /// Circle (or line, for collinear input) through three points.
    pub fn through(a: Point, b: Point, c: Point) -> CurveFit {
        let d = 2.0 * (b - a).cross(c - a);
        let scale = (b - a).norm().max((c - a).norm());
        if d.abs() <= 1e-12 * scale * scale {
            return CurveFit::Line { point: a, direction: (c - a).normalized() };
        }
        let (ba, ca) = (b - a, c - a);
        let ux = (ca.y * ba.norm_sq() - ba.y * ca.norm_sq()) / d;
        let uy = (ba.x * ca.norm_sq() - ca.x * ba.norm_sq()) / d;
        let center = a + Point::new(ux, uy);
        CurveFit::Circle { center, radius: center.distance(a) }
    }

    pub fn distance(&self, p: Point) -> f64 {
        match *self {
            CurveFit::Circle { center, radius } => (center.distance(p) - radius).abs(),
            CurveFit::Line { point, direction } => direction.cross(p - point).abs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpherePartition {
    pub sites: SimplexSites,
    pub rotation: DMatrix<f64>,
}

impl SpherePartition {
    pub fn new(sites: SimplexSites) -> Self {
        let m = sites.d + 1;
        SpherePartition { sites, rotation: DMatrix::identity(m, m) }
    }

    pub fn dim(&self) -> usize {
        self.sites.d
    }

    pub fn with_rotation(mut self, rotation: DMatrix<f64>) -> Result<Self> {
        let m = self.sites.d + 1;
        if rotation.shape() != (m, m) {
            return Err(Error::InvalidArgument(format!("rotation must be {m}x{m}")));
        }
        self.rotation = rotation;
        let defect = self.orthogonality_defect();
        if defect > 1e-12 {
            return Err(Error::InvalidArgument(format!("rotation is not orthogonal (defect {defect:e})")));
        }
        Ok(self)
    }

    /// Composes the current rotation with a rotation by `angle` in the `(i, k)` coordinate plane.
    pub fn rotated_in_plane(mut self, i: usize, k: usize, angle: f64) -> Self {
        let m = self.sites.d + 1;
        let mut g = DMatrix::identity(m, m);
        let (s, c) = angle.sin_cos();
        g[(i, i)] = c;
        g[(k, k)] = c;
        g[(i, k)] = -s;
        g[(k, i)] = s;
        self.rotation = g * self.rotation;
        self
    }

    /// Rotation placing the pole inside cell `j`, at angular distance `angle`
    /// from its site (0 puts the site at the pole).
    pub fn pole_in_region(sites: SimplexSites, j: usize, angle: f64) -> Result<Self> {
        if j >= sites.n() {
            return Err(Error::InvalidArgument(format!("no region {j}")));
        }
        let m = sites.d + 1;
        let v = sites.sites[j].clone();
        // Direction orthogonal to v along which to tilt: the first basis vector not parallel to v.
        let mut w = DVector::zeros(m);
        for k in 0..m {
            let mut e = DVector::zeros(m);
            e[k] = 1.0;
            let cand = &e - &v * v.dot(&e);
            if cand.norm() > 0.5 {
                w = cand.normalize();
                break;
            }
        }
        let mut pole = DVector::zeros(m);
        pole[m - 1] = 1.0;
        // First send v to the pole, then tilt by `angle`.
        let to_pole = rotation_between(&v, &pole).or_else(|_| {
            let mut mid = DVector::zeros(m);
            mid[0] = 1.0;
            let r1 = rotation_between(&v, &mid)?;
            Ok::<_, Error>(rotation_between(&mid, &pole)? * r1)
        })?;
        let tilt_dir = (&to_pole * &w).normalize();
        let target = &pole * angle.cos() + &tilt_dir * angle.sin();
        let tilt = rotation_between(&pole, &target)?;
        // Q v = target means the pole sits at angle `angle` from the rotated site.
        Self::new(sites).with_rotation(tilt * to_pole)
    }

    pub fn orthogonality_defect(&self) -> f64 {
        let m = self.rotation.nrows();
        (self.rotation.transpose() * &self.rotation - DMatrix::<f64>::identity(m, m)).abs().max()
    }

    pub fn rotated_site(&self, k: usize) -> DVector<f64> {
        &self.rotation * &self.sites.sites[k]
    }

    fn scores(&self, x: &DVector<f64>) -> Vec<f64> {
        let qx = self.rotation.transpose() * x;
        self.sites.sites.iter().map(|v| v.dot(&qx)).collect()
    }

    /// Cell of `x` on the sphere and whether the top two scores tie within 1e-12.
    pub fn voronoi_label_with_tie(&self, x: &DVector<f64>) -> (usize, bool) {
        let s = self.scores(x);
        let mut best = 0;
        for k in 1..s.len() {
            if s[k] > s[best] {
                best = k;
            }
        }
        let tie = s.iter().enumerate().any(|(k, &v)| k != best && (s[best] - v).abs() <= 1e-12);
        (best, tie)
    }

    pub fn voronoi_label(&self, x: &DVector<f64>) -> usize {
        self.voronoi_label_with_tie(x).0
    }

    /// Cell of the stereographic image point `y`.
    pub fn planar_label(&self, y: &DVector<f64>) -> usize {
        self.voronoi_label(&lift(y))
    }

    pub fn planar_label_2d(&self, p: Point) -> usize {
        self.planar_label(&DVector::from_vec(vec![p.x, p.y]))
    }

    pub fn monte_carlo_measures(&self, domain: SampleDomain, n: usize, seed: u64) -> Result<MonteCarloEstimate> {
        if n == 0 {
            return Err(Error::InvalidArgument("sample count must be at least 1".into()));
        }
        let d = self.sites.d;
        let total_volume = match domain {
            SampleDomain::Sphere => sphere_area(d),
            SampleDomain::Window { radius } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("window radius must be positive, got {radius}")));
                }
                ball_volume(d) * radius.powi(d as i32)
            }
        };
        const SHARDS: usize = 32;
        let k = self.sites.n();
        let counts: Vec<Vec<u64>> = (0..SHARDS)
            .into_par_iter()
            .map(|shard| {
                let len = n / SHARDS + usize::from(shard < n % SHARDS);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(shard as u64);
                let mut c = vec![0u64; k];
                for _ in 0..len {
                    let label = match domain {
                        SampleDomain::Sphere => self.voronoi_label(&random_unit(&mut rng, d + 1)),
                        SampleDomain::Window { radius } => {
                            let dir = random_unit(&mut rng, d);
                            let u: f64 = rng.random();
                            self.planar_label(&(dir * (radius * u.powf(1.0 / d as f64))))
                        }
                    };
                    c[label] += 1;
                }
                c
            })
            .collect();
        let mut total = vec![0u64; k];
        for c in &counts {
            for (t, x) in total.iter_mut().zip(c) {
                *t += x;
            }
        }
        let nf = n as f64;
        let volumes = total.iter().map(|&c| total_volume * c as f64 / nf).collect();
        let std_errors = total
            .iter()
            .map(|&c| {
                let f = c as f64 / nf;
                total_volume * (f * (1.0 - f) / nf).sqrt()
            })
            .collect();
        Ok(MonteCarloEstimate { samples: n, seed, total_volume, volumes, std_errors })
    }

    /// Points on the sphere where cells `i` and `j` meet, found by bisection
    /// along great-circle arcs between random samples labelled `i` and `j`.
    pub fn sample_boundary(&self, i: usize, j: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let d = self.sites.d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let mut tries = 0;
        while out.len() < count && tries < 200 * count.max(1) {
            tries += 1;
            let a = random_unit(&mut rng, d + 1);
            let b = random_unit(&mut rng, d + 1);
            let (la, lb) = (self.voronoi_label(&a), self.voronoi_label(&b));
            if !((la == i && lb == j) || (la == j && lb == i)) {
                continue;
            }
            let omega = a.dot(&b).clamp(-1.0, 1.0).acos();
            if omega < 1e-6 || omega > std::f64::consts::PI - 1e-6 {
                continue;
            }
            let slerp = |t: f64| (&a * ((1.0 - t) * omega).sin() + &b * (t * omega).sin()) / omega.sin();
            let (mut lo, mut hi) = (0.0, 1.0);
            while (hi - lo) * omega > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if self.voronoi_label(&slerp(mid)) == la {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = slerp(0.5 * (lo + hi));
            // Keep only points on the i-j interface, not at a junction with a third cell.
            let s = self.scores(&x);
            let top = s[i].max(s[j]);
            if s.iter().enumerate().all(|(k, &v)| k == i || k == j || v < top - 1e-9) {
                out.push(x);
            }
        }
        out
    }

    fn check_planar(&self) -> Result<()> {
        if self.sites.d != 2 {
            return Err(Error::InvalidArgument("planar boundary curves need d = 2".into()));
        }
        Ok(())
    }

    /// Projected interfaces (d = 2), traced along the great circles
    /// `<x, Q(v_i - v_j)> = 0` and clipped to the disk of radius `window`.
    pub fn boundary_polylines(&self, window: f64, samples: usize) -> Result<Vec<BoundaryPolyline>> {
        self.check_planar()?;
        let n = self.sites.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = (self.rotated_site(i) - self.rotated_site(j)).normalize();
                // Orthonormal basis (e1, e2) of the plane orthogonal to w.
                let mut e1 = DVector::zeros(3);
                let k = if w[0].abs() < 0.9 { 0 } else { 1 };
                e1[k] = 1.0;
                e1 = (&e1 - &w * w.dot(&e1)).normalize();
                let e2 = w.cross(&e1);
                // Runs of consecutive valid samples; the seam at phi = 0 is rejoined below.
                let mut runs: Vec<Vec<Point>> = vec![Vec::new()];
                let (mut first_open, mut last_open) = (false, false);
                for s in 0..=samples {
                    let phi = 2.0 * std::f64::consts::PI * s as f64 / samples as f64;
                    let x = &e1 * phi.cos() + &e2 * phi.sin();
                    let sc = self.scores(&x);
                    let ok = sc.iter().enumerate().all(|(k, &v)| k == i || k == j || v <= sc[i] + 1e-12);
                    let y = project_to_plane(&x).map(|y| Point::new(y[0], y[1]));
                    match y {
                        Some(p) if ok && p.norm() <= window => {
                            if s == 0 {
                                first_open = true;
                            }
                            if s == samples {
                                last_open = true;
                            }
                            runs.last_mut().unwrap().push(p);
                        }
                        _ => {
                            if !runs.last().unwrap().is_empty() {
                                runs.push(Vec::new());
                            }
                        }
                    }
                }
                runs.retain(|r| !r.is_empty());
                if first_open && last_open && runs.len() >= 2 {
                    let head = runs.remove(0);
                    runs.last_mut().unwrap().extend(head.into_iter().skip(1));
                }
                for points in runs {
                    if points.len() >= 2 {
                        out.push(BoundaryPolyline { regions: (i, j), points });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Rays of the projected partition (d = 2): one for every pair of cells
    /// that both contain the pole, fitted from bisection samples far from the origin.
    pub fn projected_rays(&self, far: f64, samples: usize, seed: u64) -> Result<Vec<FarFieldRay>> {
        self.check_planar()?;
        let pole = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let s = self.scores(&pole);
        let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let at_pole: Vec<usize> = (0..s.len()).filter(|&k| s[k] >= top - 1e-12).collect();
        let mut rays = Vec::new();
        for (a, &i) in at_pole.iter().enumerate() {
            for &j in &at_pole[a + 1..] {
                let pts: Vec<Point> = self
                    .sample_boundary(i, j, samples, seed ^ ((i * 31 + j) as u64))
                    .iter()
                    .filter_map(project_to_plane)
                    .map(|y| Point::new(y[0], y[1]))
                    .filter(|p| p.norm() >= far)
                    .collect();
                if pts.len() < 2 {
                    continue;
                }
                let n = pts.len() as f64;
                let mean = pts.iter().fold(Point::ORIGIN, |acc, &p| acc + p) / n;
                let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
                for p in &pts {
                    let q = *p - mean;
                    sxx += q.x * q.x;
                    sxy += q.x * q.y;
                    syy += q.y * q.y;
                }
                let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
                let mut dir = Point::from_angle(angle);
                if dir.dot(mean) < 0.0 {
                    dir = -dir;
                }
                rays.push(FarFieldRay { anchor: mean, direction: dir });
            }
        }
        Ok(rays)
    }

    pub fn classify_projected(&self, far: f64, samples: usize, seed: u64, angle_tol: f64) -> Result<FarFieldClass> {
        let rays = self.projected_rays(far, samples, seed)?;
        Ok(classify_rays(&rays, far, angle_tol))
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// `Gamma(k / 2)` for a positive integer `k`.
fn gamma_half(k: usize) -> f64 {
    match k {
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d + 2)
}

/// Surface area of the unit sphere `S^d` in `R^{d+1}`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf((d + 1) as f64 / 2.0) / gamma_half(d + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn site_examples() {
        let s = make_equidistant_sites(2, 2).unwrap();
        assert!((s.sites[0].dot(&s.sites[1]) + 1.0).abs() < 1e-15);
        let s = make_equidistant_sites(3, 2).unwrap();
        assert!((s.sites[0].dot(&s.sites[2]) + 0.5).abs() < 1e-15);
        assert!(make_equidistant_sites(5, 2).is_err());
        for d in 1..=10 {
            for n in 2..=d + 2 {
                assert!(make_equidistant_sites(n, d).unwrap().gram_defect() <= 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let eq = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(project_to_plane(&eq).unwrap(), DVector::from_vec(vec![1.0, 0.0]));
        let south = DVector::from_vec(vec![0.0, 0.0, -1.0]);
        assert_eq!(project_to_plane(&south).unwrap().norm(), 0.0);
        assert!(project_to_plane(&DVector::from_vec(vec![0.0, 0.0, 1.0])).is_none());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = random_unit(&mut rng, 4);
            let back = lift(&project_to_plane(&x).unwrap());
            assert!((back - &x).norm() <= 1e-12);
        }
    }

    #[test]
    fn labels() {
        let p = SpherePartition::new(make_equidistant_sites(3, 2).unwrap()).rotated_in_plane(0, 2, 0.3);
        for k in 0..3 {
            assert_eq!(p.voronoi_label(&p.rotated_site(k)), k);
        }
        let two = SpherePartition::new(make_equidistant_sites(2, 2).unwrap()).rotated_in_plane(1, 2, 0.7);
        let x = DVector::from_vec(vec![0.3, 0.5, 0.2]).normalize();
        assert_eq!(two.voronoi_label(&x) == 0, x.dot(&two.rotated_site(0)) > 0.0);
        // Origin of the plane is the south pole.
        let south = DVector::from_vec(vec![0.0, 0.0, -1.0]);
        assert_eq!(p.planar_label(&DVector::zeros(2)), p.voronoi_label(&south));
    }

    #[test]
    fn label_invariant_under_joint_rotation() {
        let base = SpherePartition::new(make_equidistant_sites(4, 3).unwrap());
        let rot = base.clone().rotated_in_plane(0, 3, 0.4).rotated_in_plane(1, 2, -1.1);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let x = random_unit(&mut rng, 4);
            assert_eq!(base.voronoi_label(&x), rot.voronoi_label(&(&rot.rotation * &x)));
        }
    }

    #[test]
    fn equal_cells_on_sphere() {
        let p = SpherePartition::new(make_equidistant_sites(3, 2).unwrap());
        let mc = p.monte_carlo_measures(SampleDomain::Sphere, 200_000, 1).unwrap();
        for (v, e) in mc.volumes.iter().zip(&mc.std_errors) {
            assert!((v - 4.0 * PI / 3.0).abs() <= 3.0 * e);
        }
        assert!(p.monte_carlo_measures(SampleDomain::Sphere, 0, 1).is_err());
        let again = p.monte_carlo_measures(SampleDomain::Sphere, 200_000, 1).unwrap();
        assert_eq!(mc, again);
    }

    #[test]
    fn pole_inside_cell_gives_disk() {
        let p = SpherePartition::pole_in_region(make_equidistant_sites(2, 2).unwrap(), 0, 0.4).unwrap();
        assert!(p.orthogonality_defect() <= 1e-12);
        let pole = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert!((p.rotated_site(0).dot(&pole) - 0.4f64.cos()).abs() < 1e-12);
        let pts: Vec<Point> = p
            .sample_boundary(0, 1, 4, 5)
            .iter()
            .map(|x| project_to_plane(x).unwrap())
            .map(|y| Point::new(y[0], y[1]))
            .collect();
        let fit = CurveFit::through(pts[0], pts[1], pts[2]);
        assert!(fit.distance(pts[3]) <= 1e-6);
        let CurveFit::Circle { center, radius } = fit else { panic!("expected a circle") };
        // The bounded cell is the disk; compare membership away from the circle.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let q = Point::new(rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0));
            let dist = q.distance(center) - radius;
            if dist.abs() < 1e-6 {
                continue;
            }
            assert_eq!(p.planar_label_2d(q) == 1, dist < 0.0);
        }
    }

    #[test]
    fn pole_on_triple_point_gives_triple_rays() {
        let p = SpherePartition::new(make_equidistant_sites(3, 2).unwrap());
        let class = p.classify_projected(5.0, 60, 11, 1e-6).unwrap();
        assert!(matches!(class, FarFieldClass::TripleRays { .. }), "{class:?}");
        let polylines = p.boundary_polylines(10.0, 720).unwrap();
        assert_eq!(polylines.len(), 3);
    }

    #[test]
    fn ball_and_sphere_volumes() {
        assert!((ball_volume(2) - PI).abs() < 1e-15);
        assert!((ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-14);
    }
}
