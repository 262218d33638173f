use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ArcPartition;

/// Region pressures fitted to the edge curvatures by least squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pressures {
    pub p: Vec<f64>,
    /// max over edges of `|kappa - (p(right) - p(left))|`.
    pub residual: f64,
    /// True when no region is unbounded and the gauge was fixed by `p[0] = 0`.
    pub gauge_fixed_first: bool,
}

impl Pressures {
    /// Pressure-weighted sum `sum_k p_k a_k`.
    pub fn dot(&self, a: &[f64]) -> f64 {
        self.p.iter().zip(a).map(|(p, a)| p * a).sum()
    }
}

impl ArcPartition {
    pub fn solve_pressures(&self) -> Pressures {
        let n = self.regions.len();
        let gauge_fixed_first = self.infinite_regions().next().is_none();
        // Unknowns are the pressures of bounded regions (and of region 0 when
        // every region is bounded, pinned to zero by an extra equation).
        let mut col = vec![None; n];
        let mut m = 0;
        for k in 0..n {
            if !self.is_infinite(k) {
                col[k] = Some(m);
                m += 1;
            }
        }
        let rows = self.edges.len() + usize::from(gauge_fixed_first);
        let mut p = vec![0.0; n];
        if m > 0 && rows > 0 {
            let mut a = DMatrix::<f64>::zeros(rows, m);
            let mut b = DVector::<f64>::zeros(rows);
            for (i, e) in self.edges.iter().enumerate() {
                if let Some(c) = col[e.right] {
                    a[(i, c)] += 1.0;
                }
                if let Some(c) = col[e.left] {
                    a[(i, c)] -= 1.0;
                }
                b[i] = e.kappa;
            }
            if gauge_fixed_first {
                a[(rows - 1, 0)] = 1.0;
            }
            let svd = a.svd(true, true);
            let eps = 1e-12 * svd.singular_values.max().max(1.0);
            if let Ok(x) = svd.solve(&b, eps) {
                for k in 0..n {
                    if let Some(c) = col[k] {
                        p[k] = x[c];
                    }
                }
            }
        }
        let residual = self
            .edges
            .iter()
            .map(|e| (e.kappa - (p[e.right] - p[e.left])).abs())
            .fold(0.0, f64::max);
        Pressures { p, residual, gauge_fixed_first }
    }
}

#[cfg(test)]
mod tests {
    use crate::constructions::{make_cone, make_double_bubble, make_lens, ConeKind};

    #[test]
    fn line_has_zero_pressures() {
        let p = make_cone(ConeKind::HalfPlane, 3.0).solve_pressures();
        assert_eq!(p.p, vec![0.0, 0.0]);
        assert_eq!(p.residual, 0.0);
        assert!(!p.gauge_fixed_first);
    }

    #[test]
    fn lens_pressure_is_inverse_radius() {
        let lens = make_lens(1.0).unwrap();
        let r = lens.arc(0).unwrap().radius();
        let p = lens.solve_pressures();
        assert!((p.p[2] - 1.0 / r).abs() < 1e-12);
        assert_eq!((p.p[0], p.p[1]), (0.0, 0.0));
        assert!(p.residual <= 1e-12);
    }

    #[test]
    fn double_bubble_middle_curvature_is_pressure_difference() {
        let db = make_double_bubble(1.0, 2.0).unwrap();
        let p = db.solve_pressures();
        assert!(p.residual <= 1e-10);
        let mid = db.edges.iter().find(|e| !db.is_infinite(e.left) && !db.is_infinite(e.right)).unwrap();
        assert!((mid.kappa - (p.p[mid.right] - p.p[mid.left])).abs() < 1e-10);
    }
}
