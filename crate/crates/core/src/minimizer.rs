//! Area-constrained perimeter minimization of arc networks inside a window
//! with the far field pinned.
//!
//! Unknowns are the interior vertex positions and one signed half-aperture
//! per edge. Unbounded edges are replaced by segments ending at pins where
//! their far-field lines cross the circle of radius `0.9 R`; beyond the pins
//! the far field is frozen.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{length_ratio, length_ratio_deriv, segment_factor, segment_factor_deriv, CircularArc, Point};
use crate::network::{ArcEdge, ArcPartition, Curve, Measure, VertexKind};

pub const PIN_FRACTION: f64 = 0.9;

/// Regions whose areas are held fixed. `all_finite` gives the fully
/// constrained (locally isoperimetric) problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMode {
    pub constrained: Vec<usize>,
}

impl ConstraintMode {
    pub fn all_finite(p: &ArcPartition) -> Self {
        ConstraintMode { constrained: p.finite_regions().collect() }
    }

    pub fn none() -> Self {
        ConstraintMode { constrained: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub max_iterations: usize,
    /// Initial trust radius on the step norm (length units).
    pub trust_radius: f64,
    /// Max |area - target| accepted after projection (area units).
    pub constraint_tol: f64,
    /// Stop when an accepted step lowers the energy by less than this (length units).
    pub energy_tol: f64,
    /// Stop when the Lagrangian gradient falls below this.
    pub gradient_tol: f64,
    /// Edges shorter than this are candidates for collapse (length units).
    pub topology_threshold: f64,
    /// Additional randomized starts; 0 runs the given initial network only.
    pub restarts: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iterations: 200,
            trust_radius: 0.25,
            constraint_tol: 1e-11,
            energy_tol: 1e-14,
            gradient_tol: 1e-10,
            topology_threshold: 1e-3,
            restarts: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub energy: f64,
    pub max_area_violation: f64,
    pub step_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub partition: ArcPartition,
    pub energy: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Lagrange multipliers per region (zero for unconstrained regions).
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub trace: Vec<TraceEntry>,
}

/// Interface length inside the closed window `B_R`.
pub fn energy(p: &ArcPartition) -> Result<f64> {
    if p.edges.is_empty() {
        return Ok(0.0);
    }
    Ok(p.region_measures(p.window_radius)?.perimeter)
}

#[derive(Clone, Copy, Debug)]
enum End {
    Vertex(usize),
    Pin(Point),
}

#[derive(Clone, Copy, Debug)]
struct WorkEdge {
    a: End,
    b: End,
    left: usize,
    right: usize,
}

/// Farthest and nearest parameters where `anchor + s dir` meets the circle of radius `r`.
fn line_circle(anchor: Point, dir: Point, r: f64) -> Option<(f64, f64)> {
    let b = anchor.dot(dir);
    let c = anchor.norm_sq() - r * r;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some((-b - sq, -b + sq))
}

struct Problem {
    base: ArcPartition,
    /// Interior vertex ids in DOF order; vertex `movable[i]` owns x[2i], x[2i+1].
    movable: Vec<usize>,
    slot: Vec<Option<usize>>,
    edges: Vec<WorkEdge>,
    constrained: Vec<usize>,
    targets: Vec<f64>,
    offsets: Vec<f64>,
    fixed_energy: f64,
}

impl Problem {
    fn new(p: &ArcPartition, mode: &ConstraintMode) -> Result<(Problem, DVector<f64>)> {
        let topo = p.validate_topology();
        if !topo.valid {
            return Err(Error::Topology(
                topo.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
            ));
        }
        for &k in &mode.constrained {
            if k >= p.regions.len() {
                return Err(Error::InvalidArgument(format!("constrained region {k} does not exist")));
            }
        }
        let rp = PIN_FRACTION * p.window_radius;
        let movable: Vec<usize> = (0..p.vertices.len()).filter(|&v| p.vertices[v].is_interior()).collect();
        let mut slot = vec![None; p.vertices.len()];
        for (i, &v) in movable.iter().enumerate() {
            if p.vertices[v].position().unwrap().norm() >= rp {
                return Err(Error::InvalidArgument(format!("vertex {v} lies outside the pin radius {rp}")));
            }
            slot[v] = Some(i);
        }
        let mut edges = Vec::new();
        let mut fixed_energy = 0.0;
        let mut thetas = Vec::new();
        for (i, e) in p.edges.iter().enumerate() {
            let kind = |v: usize| p.vertices[v].kind;
            let pin_of = |v: usize, outward: bool| -> Result<(Point, f64)> {
                let VertexKind::AtInfinity { anchor, direction } = kind(v) else { unreachable!() };
                let (lo, hi) = line_circle(anchor, direction, rp)
                    .ok_or_else(|| Error::InvalidArgument(format!("far-field line of edge {i} misses the pin circle")))?;
                let (rlo, rhi) = line_circle(anchor, direction, p.window_radius).unwrap();
                Ok(if outward { (anchor + direction * hi, rhi - hi) } else { (anchor + direction * lo, lo - rlo) })
            };
            let (a, b, theta) = match (kind(e.start), kind(e.end)) {
                (VertexKind::Interior { .. }, VertexKind::Interior { .. }) => {
                    let arc = p.arc(i).unwrap();
                    (End::Vertex(e.start), End::Vertex(e.end), arc.half_angle())
                }
                (VertexKind::Interior { .. }, VertexKind::AtInfinity { .. }) => {
                    let (pin, extra) = pin_of(e.end, true)?;
                    fixed_energy += extra;
                    (End::Vertex(e.start), End::Pin(pin), 0.0)
                }
                (VertexKind::AtInfinity { .. }, VertexKind::Interior { .. }) => {
                    let (pin, extra) = pin_of(e.start, true)?;
                    fixed_energy += extra;
                    (End::Pin(pin), End::Vertex(e.end), 0.0)
                }
                (VertexKind::AtInfinity { .. }, VertexKind::AtInfinity { .. }) => {
                    let (p0, x0) = pin_of(e.end, false)?;
                    let (p1, x1) = pin_of(e.end, true)?;
                    fixed_energy += x0 + x1;
                    (End::Pin(p0), End::Pin(p1), 0.0)
                }
            };
            edges.push(WorkEdge { a, b, left: e.left, right: e.right });
            thetas.push(theta);
        }
        let mut x = DVector::zeros(2 * movable.len() + edges.len());
        for (i, &v) in movable.iter().enumerate() {
            let q = p.vertices[v].position().unwrap();
            x[2 * i] = q.x;
            x[2 * i + 1] = q.y;
        }
        for (i, t) in thetas.iter().enumerate() {
            x[2 * movable.len() + i] = *t;
        }
        let mut prob = Problem {
            base: p.clone(),
            movable,
            slot,
            edges,
            constrained: mode.constrained.clone(),
            targets: Vec::new(),
            offsets: Vec::new(),
            fixed_energy,
        };
        // Constant parts of constrained areas: circle arcs between pins.
        let start = prob.to_partition(&x);
        let clipped = start.measures_in_disk(Point::ORIGIN, rp)?;
        let moments = prob.region_moments(&x);
        for &k in &mode.constrained {
            prob.offsets.push(clipped.areas[k] - moments[k]);
            prob.targets.push(match p.regions[k].measure {
                Measure::Finite(m) => m,
                Measure::Zero => 0.0,
                Measure::Infinite => clipped.areas[k],
            });
        }
        Ok((prob, x))
    }

    fn theta_index(&self, e: usize) -> usize {
        2 * self.movable.len() + e
    }

    fn point(&self, x: &DVector<f64>, end: End) -> Point {
        match end {
            End::Pin(p) => p,
            End::Vertex(v) => {
                let i = self.slot[v].unwrap();
                Point::new(x[2 * i], x[2 * i + 1])
            }
        }
    }

    fn arc(&self, x: &DVector<f64>, e: usize) -> CircularArc {
        let w = &self.edges[e];
        CircularArc::from_half_angle(self.point(x, w.a), self.point(x, w.b), x[self.theta_index(e)])
    }

    fn feasible(&self, x: &DVector<f64>) -> bool {
        (0..self.edges.len()).all(|e| {
            let t = x[self.theta_index(e)];
            let w = &self.edges[e];
            t.abs() < std::f64::consts::PI - 1e-6 && self.point(x, w.a).distance(self.point(x, w.b)) > 1e-12
        }) && x.iter().all(|v| v.is_finite())
    }

    fn region_moments(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut m = vec![0.0; self.base.regions.len()];
        for (e, w) in self.edges.iter().enumerate() {
            let a = self.arc(x, e).area_moment();
            m[w.left] += a;
            m[w.right] -= a;
        }
        m
    }

    fn energy(&self, x: &DVector<f64>) -> f64 {
        self.fixed_energy + (0..self.edges.len()).map(|e| self.arc(x, e).length()).sum::<f64>()
    }

    /// `energy(xn) - energy(x)` summed edge by edge, which keeps small
    /// decreases visible next to long clipped rays.
    fn energy_change(&self, x: &DVector<f64>, xn: &DVector<f64>) -> f64 {
        (0..self.edges.len()).map(|e| self.arc(xn, e).length() - self.arc(x, e).length()).sum()
    }

    fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.region_moments(x);
        DVector::from_iterator(
            self.constrained.len(),
            self.constrained.iter().enumerate().map(|(i, &k)| m[k] + self.offsets[i] - self.targets[i]),
        )
    }

    fn add_point_grad(&self, g: &mut DVector<f64>, end: End, d: Point) {
        if let End::Vertex(v) = end {
            let i = self.slot[v].unwrap();
            g[2 * i] += d.x;
            g[2 * i + 1] += d.y;
        }
    }

    fn energy_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for (e, w) in self.edges.iter().enumerate() {
            let (a, b) = (self.point(x, w.a), self.point(x, w.b));
            let t = x[self.theta_index(e)];
            let c = a.distance(b);
            let u = (b - a) / c;
            let f = length_ratio(t);
            self.add_point_grad(&mut g, w.a, -u * f);
            self.add_point_grad(&mut g, w.b, u * f);
            g[self.theta_index(e)] += c * length_ratio_deriv(t);
        }
        g
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(self.constrained.len(), x.len());
        for (e, w) in self.edges.iter().enumerate() {
            let (a, b) = (self.point(x, w.a), self.point(x, w.b));
            let t = x[self.theta_index(e)];
            let c2 = (b - a).norm_sq();
            let g = segment_factor(t);
            let da = Point::new(b.y, -b.x) * 0.5 - (a - b) * (g / 2.0);
            let db = Point::new(-a.y, a.x) * 0.5 - (b - a) * (g / 2.0);
            let dt = -c2 / 4.0 * segment_factor_deriv(t);
            for (row, &k) in self.constrained.iter().enumerate() {
                let s = if w.left == k {
                    1.0
                } else if w.right == k {
                    -1.0
                } else {
                    continue;
                };
                let mut grad = DVector::zeros(x.len());
                self.add_point_grad(&mut grad, w.a, da * s);
                self.add_point_grad(&mut grad, w.b, db * s);
                grad[self.theta_index(e)] += dt * s;
                let mut r = jac.row_mut(row);
                r += grad.transpose();
            }
        }
        jac
    }

    fn multipliers(&self, g: &DVector<f64>, jac: &DMatrix<f64>) -> DVector<f64> {
        if jac.nrows() == 0 {
            return DVector::zeros(0);
        }
        jac.transpose().svd(true, true).solve(g, 1e-13).unwrap_or_else(|_| DVector::zeros(jac.nrows()))
    }

    fn project(&self, x: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
        let mut x = x.clone();
        if self.constrained.is_empty() {
            return Ok(x);
        }
        let mut last = f64::INFINITY;
        for _ in 0..40 {
            if !self.feasible(&x) {
                return Err(Error::Projection("an arc degenerated during projection".into()));
            }
            let c = self.residuals(&x);
            let viol = c.amax();
            if viol <= tol {
                return Ok(self.polish(x, viol));
            }
            x -= self.newton_correction(&x, &c)?;
            last = viol;
        }
        Err(Error::Projection(format!("area residual {last:e} after 40 Newton steps")))
    }

    fn newton_correction(&self, x: &DVector<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
        let jac = self.jacobian(x);
        let ggt = &jac * jac.transpose();
        let svd = ggt.svd(true, true);
        let smax = svd.singular_values.max();
        if svd.singular_values.min() <= 1e-14 * smax.max(1e-300) {
            return Err(Error::Projection(format!(
                "singular constraint Jacobian (singular values {:?})",
                svd.singular_values.as_slice()
            )));
        }
        let y = svd.solve(c, 0.0).map_err(|e| Error::Projection(e.to_string()))?;
        Ok(jac.transpose() * y)
    }

    /// Extra Newton steps below the tolerance, kept while they halve the
    /// residual. Leftover violation of size `v` shifts the energy by about
    /// `p v`, which otherwise masks the last descent steps.
    fn polish(&self, mut x: DVector<f64>, mut viol: f64) -> DVector<f64> {
        for _ in 0..3 {
            let c = self.residuals(&x);
            let Ok(dx) = self.newton_correction(&x, &c) else { break };
            let xn = &x - dx;
            if !self.feasible(&xn) {
                break;
            }
            let vn = self.residuals(&xn).amax();
            if vn >= 0.5 * viol {
                break;
            }
            x = xn;
            viol = vn;
        }
        x
    }

    fn lagrangian_grad(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DVector<f64> {
        let g = self.energy_grad(x);
        if lambda.is_empty() {
            return g;
        }
        g - self.jacobian(x).transpose() * lambda
    }

    fn hessian(&self, x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for j in 0..n {
            let step = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += step;
            xm[j] -= step;
            let d = (self.lagrangian_grad(&xp, lambda) - self.lagrangian_grad(&xm, lambda)) / (2.0 * step);
            h.set_column(j, &d);
        }
        (&h + h.transpose()) * 0.5
    }

    fn to_partition(&self, x: &DVector<f64>) -> ArcPartition {
        let mut p = self.base.clone();
        for &v in &self.movable {
            p.vertices[v].kind = VertexKind::Interior { position: self.point(x, End::Vertex(v)) };
        }
        for (e, w) in self.edges.iter().enumerate() {
            let edge = &mut p.edges[e];
            match (w.a, w.b) {
                (End::Vertex(_), End::Vertex(_)) => {
                    let arc = self.arc(x, e);
                    edge.kappa = arc.kappa;
                    edge.major = arc.major;
                }
                (End::Vertex(v), End::Pin(pin)) | (End::Pin(pin), End::Vertex(v)) => {
                    let q = self.point(x, End::Vertex(v));
                    let inf = if edge.start == v { edge.end } else { edge.start };
                    p.vertices[inf].kind =
                        VertexKind::AtInfinity { anchor: q, direction: (pin - q).normalized() };
                }
                (End::Pin(_), End::Pin(_)) => {}
            }
        }
        p
    }
}

fn solve_kkt(h: &DMatrix<f64>, mu: f64, g: &DVector<f64>, jac: &DMatrix<f64>, c: &DVector<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let m = c.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for i in 0..n {
        k[(i, i)] += mu;
    }
    if m > 0 {
        k.view_mut((0, n), (n, m)).copy_from(&(-jac.transpose()));
        k.view_mut((n, 0), (m, n)).copy_from(jac);
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-g));
    if m > 0 {
        rhs.rows_mut(n, m).copy_from(&(-c));
    }
    let sol = k.clone().lu().solve(&rhs).or_else(|| k.svd(true, true).solve(&rhs, 1e-14).ok())?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.rows(0, n).into_owned())
}

fn run(prob: &Problem, x0: DVector<f64>, opts: &DescentOptions) -> Result<MinimizeResult> {
    let mut x = prob.project(&x0, opts.constraint_tol)?;
    let mut e = prob.energy(&x);
    let mut trace =
        vec![TraceEntry { iteration: 0, energy: e, max_area_violation: prob.residuals(&x).amax(), step_norm: 0.0 }];
    let mut mu = 1e-10;
    let mut radius = opts.trust_radius;
    let mut converged = false;
    let mut kkt = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=opts.max_iterations {
        iterations = it;
        let g = prob.energy_grad(&x);
        let jac = prob.jacobian(&x);
        let lambda = prob.multipliers(&g, &jac);
        kkt = if lambda.is_empty() { g.amax() } else { (&g - jac.transpose() * &lambda).amax() };
        if kkt <= opts.gradient_tol {
            converged = true;
            break;
        }
        let h = prob.hessian(&x, &lambda);
        let c = prob.residuals(&x);
        let mut accepted = None;
        for _ in 0..40 {
            let Some(mut dx) = solve_kkt(&h, mu, &g, &jac, &c) else {
                mu = (mu * 10.0).max(1e-8);
                continue;
            };
            let norm = dx.norm();
            if norm > radius {
                dx *= radius / norm;
            }
            let trial = &x + &dx;
            let projected = if prob.feasible(&trial) { prob.project(&trial, opts.constraint_tol).ok() } else { None };
            if let Some(xn) = projected {
                let de = prob.energy_change(&x, &xn);
                if de <= 0.0 {
                    let step = (&xn - &x).norm();
                    accepted = Some((xn, e + de, step));
                    mu = (mu * 0.1).max(1e-12);
                    radius = (radius * 2.0).min(opts.trust_radius * 4.0);
                    break;
                }
            }
            mu = (mu * 10.0).max(1e-8);
            radius *= 0.5;
            if radius < 1e-15 {
                break;
            }
        }
        let Some((xn, en, step)) = accepted else {
            // No descent direction left at working precision.
            converged = kkt <= 1e-6;
            break;
        };
        let de = e - en;
        x = xn;
        e = en;
        trace.push(TraceEntry {
            iteration: it,
            energy: e,
            max_area_violation: prob.residuals(&x).amax(),
            step_norm: step,
        });
        if de <= opts.energy_tol && step <= 1e-9 {
            converged = kkt <= 1e-6;
            break;
        }
    }
    let g = prob.energy_grad(&x);
    let jac = prob.jacobian(&x);
    let lambda = prob.multipliers(&g, &jac);
    let mut multipliers = vec![0.0; prob.base.regions.len()];
    for (i, &k) in prob.constrained.iter().enumerate() {
        multipliers[k] = lambda[i];
    }
    let partition = prob.to_partition(&x);
    Ok(MinimizeResult {
        energy: energy(&partition)?,
        partition,
        converged,
        iterations,
        multipliers,
        kkt_residual: kkt,
        trace,
    })
}

/// Constrained local minimization from `initial`. `seed` drives the optional
/// randomized restarts; a run without restarts is independent of it.
pub fn minimize(
    initial: &ArcPartition,
    mode: &ConstraintMode,
    opts: &DescentOptions,
    seed: u64,
) -> Result<MinimizeResult> {
    let (prob, x0) = Problem::new(initial, mode)?;
    let mut best = run(&prob, x0.clone(), opts)?;
    for r in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let mut x = x0.clone();
        for i in 0..2 * prob.movable.len() {
            x[i] += rng.random_range(-0.01..0.01);
        }
        if let Ok(res) = run(&prob, x, opts) {
            if res.energy < best.energy {
                best = res;
            }
        }
    }
    Ok(best)
}

/// Smallest energy change over `samples` random constraint-preserving
/// perturbations (vertex moves of size `amplitude`, areas re-projected).
pub fn local_minimality_gap(
    result: &ArcPartition,
    mode: &ConstraintMode,
    samples: usize,
    amplitude: f64,
    seed: u64,
) -> Result<f64> {
    let (prob, x0) = Problem::new(result, mode)?;
    let e0 = prob.energy(&x0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut done = 0;
    let mut tries = 0;
    while done < samples && tries < 10 * samples {
        tries += 1;
        let mut x = x0.clone();
        for v in x.iter_mut() {
            *v += rng.random_range(-amplitude..amplitude);
        }
        if let Ok(xp) = prob.project(&x, 1e-12) {
            worst = worst.min(prob.energy(&xp) - e0);
            done += 1;
        }
    }
    Ok(worst)
}

/// Moves every interior vertex by a uniform random offset in the disk of
/// radius `amount`, keeping each arc's half-aperture. Far-field lines are unchanged.
pub fn jitter(p: &ArcPartition, amount: f64, seed: u64) -> ArcPartition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = p.clone();
    let thetas: Vec<Option<f64>> = (0..p.edges.len()).map(|e| p.arc(e).map(|a| a.half_angle())).collect();
    for v in &mut out.vertices {
        if let VertexKind::Interior { position } = v.kind {
            let r = amount * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            v.kind = VertexKind::Interior { position: position + Point::from_angle(a) * r };
        }
    }
    for (e, t) in thetas.iter().enumerate() {
        if let Some(t) = t {
            let arc = out.arc(e).unwrap();
            let fresh = CircularArc::from_half_angle(arc.start, arc.end, *t);
            out.edges[e].kappa = fresh.kappa;
            out.edges[e].major = fresh.major;
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologyMove {
    /// Shrink a short edge to a point and re-split the resulting four-fold
    /// point into two triple points joined by a short edge (a T1 move).
    CollapseEdge { edge: usize, threshold: f64 },
    /// Fuse the two endpoints of an edge into one vertex.
    MergeVertices { edge: usize },
    /// Delete a vanishing bounded region bounded by two or three edges.
    RemoveRegion { region: usize },
}

fn edge_length(p: &ArcPartition, e: usize) -> f64 {
    match p.curve(e) {
        Curve::Arc(a) => a.length(),
        _ => f64::INFINITY,
    }
}

/// Drops the vertices in `dead_vertices`, the edges in `dead_edges` and the
/// region `dead_region`, renumbering the rest.
fn compact(
    mut p: ArcPartition,
    dead_vertices: &[usize],
    dead_edges: &[usize],
    dead_region: Option<usize>,
) -> ArcPartition {
    let vmap: Vec<Option<usize>> = {
        let mut next = 0;
        (0..p.vertices.len())
            .map(|v| {
                if dead_vertices.contains(&v) {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect()
    };
    let rmap = |r: usize| match dead_region {
        Some(d) if r > d => r - 1,
        _ => r,
    };
    p.vertices = p.vertices.iter().enumerate().filter(|(v, _)| vmap[*v].is_some()).map(|(_, v)| *v).collect();
    p.edges = p
        .edges
        .iter()
        .enumerate()
        .filter(|(i, _)| !dead_edges.contains(i))
        .map(|(_, e)| ArcEdge {
            start: vmap[e.start].expect("edge references a removed vertex"),
            end: vmap[e.end].expect("edge references a removed vertex"),
            left: rmap(e.left),
            right: rmap(e.right),
            ..*e
        })
        .collect();
    if let Some(d) = dead_region {
        p.regions.remove(d);
    }
    p
}

pub fn apply_topology_move(p: &ArcPartition, mv: TopologyMove) -> Result<ArcPartition> {
    let inc = p.incidence();
    match mv {
        TopologyMove::CollapseEdge { edge, threshold } => {
            let len = edge_length(p, edge);
            if !(len < threshold) {
                return Err(Error::MoveRejected(format!("edge {edge} has length {len} >= threshold {threshold}")));
            }
            let e = p.edges[edge];
            let (u, v) = (e.start, e.end);
            if inc[u].len() != 3 || inc[v].len() != 3 {
                return Err(Error::MoveRejected("collapse needs two triple points".into()));
            }
            let m = (p.vertices[u].position().unwrap() + p.vertices[v].position().unwrap()) * 0.5;
            let mut spokes: Vec<(f64, usize, usize)> = Vec::new();
            for &(vert, ref list) in &[(u, &inc[u]), (v, &inc[v])] {
                for &f in list.iter() {
                    if f != edge {
                        let t = p.outgoing_tangent(f, vert).unwrap();
                        spokes.push((t.angle(), f, vert));
                    }
                }
            }
            if spokes.iter().any(|s| {
                let o = p.edges[s.1].other(s.2);
                o == u || o == v
            }) {
                return Err(Error::MoveRejected("edge endpoints share another edge".into()));
            }
            spokes.sort_by(|a, b| a.0.total_cmp(&b.0));
            // Current pairing groups spokes by their old vertex; rotate so the new pairs differ.
            let shift = if spokes[0].2 == spokes[1].2 { 1 } else { 0 };
            let pair = |i: usize| spokes[(i + shift) % 4];
            let (s0, s1, s2, s3) = (pair(0), pair(1), pair(2), pair(3));
            let delta = threshold.max(len) / 2.0;
            let dir = |a: f64, b: f64| (Point::from_angle(a) + Point::from_angle(b)).normalized();
            let nu = m + dir(s0.0, s1.0) * delta;
            let nv = m + dir(s2.0, s3.0) * delta;
            let mut out = p.clone();
            out.vertices[u].kind = VertexKind::Interior { position: nu };
            out.vertices[v].kind = VertexKind::Interior { position: nv };
            for (s, target) in [(s0, u), (s1, u), (s2, v), (s3, v)] {
                let f = &mut out.edges[s.1];
                if f.start == s.2 && f.start != target {
                    f.start = target;
                } else if f.end == s.2 && f.end != target {
                    f.end = target;
                }
            }
            // Regions in the wedges (s0, s1) and (s2, s3) now meet along the new edge.
            let r01 = out.edges[s0.1].sides_from(u).0;
            let r23 = out.edges[s2.1].sides_from(v).0;
            let t = nv - nu;
            let b01 = dir(s0.0, s1.0);
            let (left, right) = if t.cross(b01) > 0.0 { (r01, r23) } else { (r23, r01) };
            out.edges[edge] = ArcEdge::new(u, v, 0.0, left, right);
            for i in 0..out.edges.len() {
                if let Some(a) = out.arc(i) {
                    if !a.is_feasible() {
                        out.edges[i].kappa = 0.0;
                        out.edges[i].major = false;
                    }
                }
            }
            check_move(out)
        }
        TopologyMove::MergeVertices { edge } => {
            let e = p.edges[edge];
            let (u, v) = (e.start, e.end);
            let (Some(pu), Some(pv)) = (p.vertices[u].position(), p.vertices[v].position()) else {
                return Err(Error::MoveRejected("cannot merge a vertex at infinity".into()));
            };
            let degree = inc[u].len() + inc[v].len() - 2;
            if degree > 3 {
                return Err(Error::MoveRejected(format!("merged vertex would have order {degree}")));
            }
            let mut out = p.clone();
            out.vertices[u].kind = VertexKind::Interior { position: (pu + pv) * 0.5 };
            for f in out.edges.iter_mut() {
                if f.start == v {
                    f.start = u;
                }
                if f.end == v {
                    f.end = u;
                }
            }
            check_move(compact(out, &[v], &[edge], None))
        }
        TopologyMove::RemoveRegion { region } => {
            if p.is_infinite(region) {
                return Err(Error::MoveRejected("unbounded regions cannot be removed".into()));
            }
            let own: Vec<usize> = (0..p.edges.len()).filter(|&i| p.edges[i].separates(region)).collect();
            let mut corners: Vec<usize> = own.iter().flat_map(|&i| [p.edges[i].start, p.edges[i].end]).collect();
            corners.sort();
            corners.dedup();
            let outer: Vec<(usize, usize)> = corners
                .iter()
                .map(|&c| {
                    let f = inc[c].iter().copied().find(|f| !own.contains(f));
                    f.map(|f| (c, f))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::MoveRejected("region corner without an outer edge".into()))?;
            if corners.iter().any(|&c| inc[c].len() != 3) {
                return Err(Error::MoveRejected("region corners must be triple points".into()));
            }
            let mut out = p.clone();
            match (own.len(), corners.len()) {
                (2, 2) => {
                    let (c0, f0) = outer[0];
                    let (c1, f1) = outer[1];
                    let x = p.edges[f0].other(c0);
                    let y = p.edges[f1].other(c1);
                    let (left, right) = p.edges[f0].sides_from(x);
                    out.edges[f0] = ArcEdge::new(x, y, 0.0, left, right);
                    check_move(compact(out, &[c0, c1], &[own[0], own[1], f1], Some(region)))
                }
                (3, 3) => {
                    let centroid =
                        corners.iter().map(|&c| p.vertices[c].position().unwrap()).fold(Point::ORIGIN, |a, b| a + b)
                            / 3.0;
                    let keep = corners[0];
                    out.vertices[keep].kind = VertexKind::Interior { position: centroid };
                    for &(c, f) in &outer {
                        let edge = &mut out.edges[f];
                        if edge.start == c {
                            edge.start = keep;
                        }
                        if edge.end == c {
                            edge.end = keep;
                        }
                    }
                    for &(_, f) in &outer {
                        if let Some(a) = out.arc(f) {
                            if !a.is_feasible() || a.chord() == 0.0 {
                                out.edges[f].kappa = 0.0;
                                out.edges[f].major = false;
                            }
                        }
                    }
                    check_move(compact(out, &corners[1..], &own, Some(region)))
                }
                _ => Err(Error::MoveRejected(format!(
                    "region {region} has {} boundary edges; only 2- and 3-sided regions can be removed",
                    own.len()
                ))),
            }
        }
    }
}

fn check_move(p: ArcPartition) -> Result<ArcPartition> {
    let topo = p.validate_topology();
    if topo.valid {
        Ok(p)
    } else {
        Err(Error::MoveRejected(
            topo.violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "),
        ))
    }
}

/// Applies edge collapses to every bounded edge shorter than `threshold`.
pub fn collapse_short_edges(p: &ArcPartition, threshold: f64) -> ArcPartition {
    let mut out = p.clone();
    for e in 0..p.edges.len() {
        if edge_length(&out, e) < threshold {
            if let Ok(next) = apply_topology_move(&out, TopologyMove::CollapseEdge { edge: e, threshold }) {
                out = next;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_cone, make_lens, make_peanut, make_reuleaux, ConeKind};
    use std::f64::consts::PI;
    use crate::network::{FarField, Region, StationarityTolerances, Vertex};

    fn fd_check(p: &ArcPartition) {
        let (prob, x) = Problem::new(p, &ConstraintMode::all_finite(p)).unwrap();
        let g = prob.energy_grad(&x);
        let jac = prob.jacobian(&x);
        for j in 0..x.len() {
            let h = 1e-6;
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (prob.energy(&xp) - prob.energy(&xm)) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "energy dof {j}: {fd} vs {}", g[j]);
            let fr = (prob.residuals(&xp) - prob.residuals(&xm)) / (2.0 * h);
            for r in 0..jac.nrows() {
                assert!((fr[r] - jac[(r, j)]).abs() < 1e-7, "area row {r} dof {j}");
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        fd_check(&make_lens(1.0).unwrap());
        fd_check(&jitter(&make_reuleaux(1.0).unwrap(), 0.05, 4));
    }

    #[test]
    fn energy_examples() {
        assert!((energy(&make_cone(ConeKind::TripleJunction, 1.0)).unwrap() - 3.0).abs() < 1e-14);
        let lens = make_lens(1.0).unwrap();
        let r = lens.window_radius;
        let chord = lens.arc(0).unwrap().chord();
        let want = 2.0 * r - chord + 4.0 * std::f64::consts::PI / 3.0 * lens.arc(0).unwrap().radius();
        assert!((energy(&lens).unwrap() - want).abs() < 1e-10);
        let single = ArcPartition {
            regions: vec![Region::new("plane", Measure::Infinite)],
            vertices: vec![],
            edges: vec![],
            window_radius: 1.0,
            far_field: FarField::Cluster,
        };
        assert_eq!(energy(&single).unwrap(), 0.0);
    }

    #[test]
    fn straight_line_is_a_fixed_point() {
        let line = make_cone(ConeKind::HalfPlane, 5.0);
        let res = minimize(&line, &ConstraintMode::none(), &DescentOptions::default(), 0).unwrap();
        assert!(res.converged);
        assert!((res.energy - 10.0).abs() < 1e-12);
    }

    #[test]
    fn kinked_interface_straightens() {
        let p = ArcPartition {
            regions: vec![Region::new("up", Measure::Infinite), Region::new("down", Measure::Infinite)],
            vertices: vec![
                Vertex::interior(Point::new(0.3, 0.4)),
                Vertex::at_infinity(Point::ORIGIN, Point::new(-1.0, 0.0)),
                Vertex::at_infinity(Point::ORIGIN, Point::new(1.0, 0.0)),
            ],
            edges: vec![ArcEdge::new(1, 0, 0.0, 0, 1), ArcEdge::new(0, 2, 0.0, 0, 1)],
            window_radius: 5.0,
            far_field: FarField::Line,
        };
        let res = minimize(&p, &ConstraintMode::none(), &DescentOptions::default(), 0).unwrap();
        assert!(res.converged);
        assert!((res.energy - 10.0).abs() < 1e-8, "{}", res.energy);
        assert!(res.partition.vertices[0].position().unwrap().y.abs() < 1e-6);
    }

    #[test]
    fn jittered_lens_recovers() {
        let lens = make_lens(1.0).unwrap();
        let target = energy(&lens).unwrap();
        let p = lens.solve_pressures().p[2];
        let res = minimize(&jitter(&lens, 0.05, 1), &ConstraintMode::all_finite(&lens), &DescentOptions::default(), 0)
            .unwrap();
        assert!(res.converged);
        assert!((res.energy / target - 1.0).abs() < 1e-4);
        assert!((res.multipliers[2] / p - 1.0).abs() < 1e-3);
        for w in res.trace.windows(2) {
            assert!(w[1].energy <= w[0].energy);
        }
        for t in &res.trace {
            assert!(t.max_area_violation <= DescentOptions::default().constraint_tol);
        }
        let st = res.partition.check_stationarity(&StationarityTolerances::relaxed());
        assert!(st.pass, "{:?}", st.failures);
        let gap = local_minimality_gap(&res.partition, &ConstraintMode::all_finite(&lens), 50, 1e-3, 2).unwrap();
        assert!(gap >= -1e-9, "{gap}");
    }

    #[test]
    fn short_edges_only() {
        let lens = make_lens(1.0).unwrap();
        assert_eq!(collapse_short_edges(&lens, 1e-3), lens);
        let err = apply_topology_move(&lens, TopologyMove::CollapseEdge { edge: 0, threshold: 1e-3 });
        assert!(matches!(err, Err(Error::MoveRejected(_))));
        let err = apply_topology_move(&lens, TopologyMove::MergeVertices { edge: 0 });
        assert!(matches!(err, Err(Error::MoveRejected(m)) if m.contains("order 4")));
    }

    #[test]
    fn jittered_reuleaux_recovers() {
        let r = make_reuleaux(1.0).unwrap();
        let target = energy(&r).unwrap();
        let mode = ConstraintMode::all_finite(&r);
        let res = minimize(&jitter(&r, 0.05, 3), &mode, &DescentOptions::default(), 0).unwrap();
        assert!(res.converged);
        assert!((res.energy / target - 1.0).abs() < 1e-4, "{} vs {target}", res.energy);
    }

    #[test]
    fn shrinking_peanut_region_becomes_lens() {
        let mut p = make_peanut(1.0, 1.0).unwrap();
        let mode = ConstraintMode::all_finite(&p);
        let opts = DescentOptions { max_iterations: 400, ..DescentOptions::default() };
        for m4 in [0.5, 0.25, 0.1, 0.03, 0.01] {
            p.regions[3].measure = Measure::Finite(m4);
            p = minimize(&p, &mode, &opts, 0).unwrap().partition;
        }
        let shrunk = energy(&p).unwrap();
        let merged = apply_topology_move(&p, TopologyMove::RemoveRegion { region: 3 }).unwrap();
        let res = minimize(&merged, &ConstraintMode::all_finite(&merged), &opts, 0).unwrap();
        assert!(res.converged);
        let lens = make_lens(1.0).unwrap();
        let lens_energy = energy(&ArcPartition { window_radius: p.window_radius, ..lens }).unwrap();
        assert!((res.energy / lens_energy - 1.0).abs() < 1e-6, "{} vs {lens_energy}", res.energy);
        // A region of area 0.01 costs at most the perimeter of a disk of that area.
        assert!(shrunk - lens_energy < 2.0 * (PI * 0.01).sqrt() + 1e-6);
    }

    #[test]
    fn removing_a_lens_leaves_a_line() {
        let lens = make_lens(1.0).unwrap();
        let out = apply_topology_move(&lens, TopologyMove::RemoveRegion { region: 2 }).unwrap();
        assert_eq!(out.regions.len(), 2);
        assert_eq!(out.edges.len(), 1);
        assert_eq!(out.classify_far_field(), crate::network::FarFieldClass::Line);
    }
}
