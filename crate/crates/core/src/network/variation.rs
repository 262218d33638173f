use serde::{Deserialize, Serialize};

use super::ArcPartition;
use crate::error::{Error, Result};
use crate::geom::CircularArc;

/// Central differences of perimeter and areas when one arc's curvature is varied
/// with its endpoints held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationResponse {
    pub edge: usize,
    pub dkappa: f64,
    /// `[P(kappa + dk) - P(kappa - dk)] / 2`.
    pub d_perimeter: f64,
    /// Same central difference of every region's area.
    pub d_areas: Vec<f64>,
    /// `sum_k p_k dA_k` with pressures from the unperturbed network.
    pub pressure_work: f64,
    /// `d_perimeter - pressure_work`.
    pub defect: f64,
}

impl ArcPartition {
    pub fn perturbation_response(&self, edge: usize, dkappa: f64) -> Result<PerturbationResponse> {
        if edge >= self.edges.len() {
            return Err(Error::InvalidArgument(format!("no edge {edge}")));
        }
        let base = self
            .arc(edge)
            .ok_or_else(|| Error::InvalidArgument(format!("edge {edge} is unbounded; its curvature is fixed at 0")))?;
        let varied = |k: f64| -> Result<CircularArc> {
            let a = CircularArc { kappa: k, ..base };
            let s = k.abs() * a.chord() / 2.0;
            if s > 1.0 {
                return Err(Error::InfeasibleArc(s));
            }
            Ok(a)
        };
        let plus = varied(base.kappa + dkappa)?;
        let minus = varied(base.kappa - dkappa)?;
        // Only this edge changes, so the differences are local to it.
        let d_perimeter = (plus.length() - minus.length()) / 2.0;
        let dm = (plus.area_moment() - minus.area_moment()) / 2.0;
        let e = &self.edges[edge];
        let mut d_areas = vec![0.0; self.regions.len()];
        d_areas[e.left] += dm;
        d_areas[e.right] -= dm;
        let pressure_work = self.solve_pressures().dot(&d_areas);
        Ok(PerturbationResponse {
            edge,
            dkappa,
            d_perimeter,
            d_areas,
            pressure_work,
            defect: d_perimeter - pressure_work,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{make_cone, make_lens, make_reuleaux, ConeKind};

    #[test]
    fn line_has_zero_response() {
        let p = make_cone(ConeKind::HalfPlane, 3.0);
        assert!(p.perturbation_response(0, 0.0).is_err());
    }

    #[test]
    fn lens_response_matches_pressure() {
        let lens = make_lens(1.0).unwrap();
        let p = lens.solve_pressures();
        let r = lens.perturbation_response(0, 1e-4).unwrap();
        let ratio = r.d_perimeter / r.d_areas[2];
        assert!((ratio / p.p[2] - 1.0).abs() < 1e-3);
        let zero = lens.perturbation_response(0, 0.0).unwrap();
        assert_eq!(zero.d_perimeter, 0.0);
        assert!(zero.d_areas.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn reuleaux_defect_is_second_order() {
        let p = make_reuleaux(1.0).unwrap();
        let big = p.perturbation_response(0, 1e-3).unwrap().defect.abs();
        let small = p.perturbation_response(0, 1e-4).unwrap().defect.abs();
        assert!(big <= 10.0 * 1e-6 && small <= 10.0 * 1e-8);
    }

    #[test]
    fn infeasible_perturbation_errors() {
        let lens = make_lens(1.0).unwrap();
        let k = lens.edges[0].kappa;
        assert!(matches!(lens.perturbation_response(0, 10.0 * k), Err(Error::InfeasibleArc(_))));
    }
}
