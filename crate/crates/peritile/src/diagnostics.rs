//! Structural checks on computed states: junction angles, arc fits,
//! curvature sums, pressure consistency, diameter bounds and local
//! minimality probes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::{evaluate_poly, fit_arc, fit_pressures, ArcFit, EnergyModel, Mode};
use crate::error::{Error, Result};
use crate::functionals::lambda_constant_parts;
use crate::geom::{diameter, shoelace, Vec2};
use crate::poly::PolyPartition;

/// Angles at a degree-3 junction, from arc-fitted tangents, and their
/// worst deviation from 120 degrees.
#[derive(Debug, Clone)]
pub struct JunctionCheck {
    pub vertex: usize,
    pub angles_deg: [f64; 3],
    pub max_dev_deg: f64,
}

#[derive(Debug, Clone)]
pub struct JunctionReport {
    pub checks: Vec<JunctionCheck>,
    /// Junctions of degree != 3: (vertex, degree). A regularity violation,
    /// not an error.
    pub degree_violations: Vec<(usize, usize)>,
    pub max_dev_deg: f64,
}

/// Outgoing unit tangent of an edge end, taken from the fitted arc when one
/// is available and from the first polyline segment otherwise.
fn end_tangent(state: &PolyPartition, eid: usize, at_tail: bool) -> Result<Vec2> {
    let chain = state.edge_chain_cart(eid);
    let (end, secant) = if at_tail {
        (chain[0], chain[1] - chain[0])
    } else {
        (chain[chain.len() - 1], chain[chain.len() - 2] - chain[chain.len() - 1])
    };
    let fit = fit_arc(state, eid)?;
    let t = match fit.center {
        Some(c) => {
            let t = (end - c).perp();
            if t.dot(secant) < 0.0 {
                -t
            } else {
                t
            }
        }
        None => secant,
    };
    Ok(t.normalized())
}

pub fn check_junctions(state: &PolyPartition) -> Result<JunctionReport> {
    let mut checks = Vec::new();
    let mut degree_violations = Vec::new();
    let mut max_dev: f64 = 0.0;
    for j in state.junction_list() {
        if j.ends.len() != 3 {
            degree_violations.push((j.vertex, j.ends.len()));
            continue;
        }
        let mut tangents = [Vec2::ZERO; 3];
        for (k, &(eid, at_tail, _)) in j.ends.iter().enumerate() {
            tangents[k] = end_tangent(state, eid, at_tail)?;
        }
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by(|&a, &b| tangents[a].angle().partial_cmp(&tangents[b].angle()).unwrap());
        let mut angles = [0.0; 3];
        for k in 0..3 {
            let a = tangents[order[k]].angle();
            let b = tangents[order[(k + 1) % 3]].angle();
            let mut d = (b - a).to_degrees();
            if d <= 0.0 {
                d += 360.0;
            }
            angles[k] = d;
        }
        let dev = angles.iter().map(|a| (a - 120.0).abs()).fold(0.0, f64::max);
        max_dev = max_dev.max(dev);
        checks.push(JunctionCheck { vertex: j.vertex, angles_deg: angles, max_dev_deg: dev });
    }
    Ok(JunctionReport { checks, degree_violations, max_dev_deg: max_dev })
}

pub fn fit_arcs(state: &PolyPartition) -> Result<Vec<ArcFit>> {
    (0..state.edges.len()).map(|e| fit_arc(state, e)).collect()
}

/// Per-junction |kappa_1 + kappa_2 + kappa_3| with orientation-consistent
/// signs: each end contributes +kappa when the edge leaves from its tail
/// here and -kappa otherwise, so every term reads rho(left) - rho(right) of
/// the outgoing direction and the cyclic sum telescopes for exact pressures.
pub fn check_curvature_sums(state: &PolyPartition) -> Result<Vec<f64>> {
    let arcs = fit_arcs(state)?;
    let mut out = Vec::new();
    for j in state.junction_list() {
        if j.ends.len() != 3 {
            return Err(Error::InvalidPartition(format!(
                "curvature sums need degree-3 junctions; vertex {} has degree {}",
                j.vertex,
                j.ends.len()
            )));
        }
        let sum: f64 = j
            .ends
            .iter()
            .map(|&(eid, at_tail, _)| if at_tail { arcs[eid].kappa } else { -arcs[eid].kappa })
            .sum();
        out.push(sum.abs());
    }
    Ok(out)
}

// ---- minimality probe --------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct ProbeResult {
    pub trials: usize,
    /// min over proposals of E(F) - E(state) + Lambda * |state Delta F|;
    /// non-negative (within tolerance) certifies the probe passed.
    pub worst_decrease: f64,
    /// No proposal was evaluated.
    pub vacuous: bool,
}

/// Estimate of |E Delta F| for two states with identical topology: twice the
/// area swept by every interface polyline (each interface bounds two cells).
fn symdiff_estimate(a: &PolyPartition, b: &PolyPartition) -> f64 {
    let mut total = 0.0;
    for e in 0..a.edges.len() {
        let ca = a.edge_chain_cart(e);
        let cb = b.edge_chain_cart(e);
        for k in 0..ca.len() - 1 {
            total += shoelace(&[ca[k], ca[k + 1], cb[k + 1], cb[k]]).abs();
        }
    }
    2.0 * total
}

pub fn minimality_probe(
    state: &PolyPartition,
    model: &EnergyModel,
    trials: usize,
    seed: u64,
) -> Result<ProbeResult> {
    state.validate()?;
    let e0 = evaluate_poly(state, model)?.total;
    let rho = state.lattice.packing_radius()?;
    let penalization = match model.mode {
        Mode::Penalized { lambda } => Some(lambda),
        Mode::Constrained => None,
    };
    let volume_preserving = penalization.is_none();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut evaluated = 0usize;
    for _ in 0..trials {
        let center = state.frac_to_cart(Vec2::new(rng.gen::<f64>(), rng.gen::<f64>()));
        let radius = rho * (0.15 + 0.3 * rng.gen::<f64>());
        let ang = std::f64::consts::TAU * rng.gen::<f64>();
        let dir = Vec2::new(ang.cos(), ang.sin());
        let amp = 0.2 * radius * rng.gen::<f64>();
        let field = move |x: Vec2| {
            let d = (x - center).norm();
            if d >= radius {
                Vec2::ZERO
            } else {
                let t = d / radius;
                dir * (amp * (1.0 - t * t).powi(2))
            }
        };
        let Ok(perturbed) = state.local_perturbation(center, radius, field, volume_preserving)
        else {
            continue; // area restoration failed; trial discarded
        };
        let e1 = evaluate_poly(&perturbed, model)?.total;
        let lam = lambda_constant_parts(None, penalization, rho, radius)?;
        let dec = e1 - e0 + lam * symdiff_estimate(state, &perturbed);
        worst = worst.min(dec);
        evaluated += 1;
    }
    // A degree >= 4 junction admits epsilon-split descent directions that no
    // smooth field sees; propose them explicitly.
    let d = state.lattice.volume();
    for j in state.junction_list() {
        if j.ends.len() < 4 {
            continue;
        }
        let mut ends = j.ends.clone();
        ends.sort_by(|a, b| a.2.angle().partial_cmp(&b.2.angle()).unwrap());
        let deg = ends.len();
        for k in 0..deg {
            let a = ends[k];
            let b = ends[(k + 1) % deg];
            let mut dir = a.2 + b.2;
            if dir.norm() < 1e-9 {
                dir = a.2.perp();
            }
            for eps_scale in [1e-3, 3e-3] {
                let eps = eps_scale * d.sqrt();
                let Ok(split) = crate::optimizer::split_junction(
                    state,
                    j.vertex,
                    [(a.0, a.1), (b.0, b.1)],
                    dir.normalized(),
                    eps,
                ) else {
                    continue;
                };
                let e1 = evaluate_poly(&split, model)?.total;
                worst = worst.min(e1 - e0);
                evaluated += 1;
            }
        }
    }
    if evaluated == 0 {
        return Ok(ProbeResult { trials, worst_decrease: 0.0, vacuous: true });
    }
    Ok(ProbeResult { trials, worst_decrease: worst, vacuous: false })
}

// ---- diameter bounds ---------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DiameterCheck {
    /// Per cell: (unwrapped diameter, perimeter, diameter/perimeter).
    pub per_cell: Vec<(f64, f64, f64)>,
    pub diameter_ratio_max: f64,
    /// Diameter of the canonical fundamental-domain realization.
    pub domain_diameter: f64,
    pub two_r_g: f64,
    /// domain_diameter - 2 r_G: the measured additive constant.
    pub c_measured: f64,
}

pub fn diameter_bound_check(state: &PolyPartition) -> Result<DiameterCheck> {
    let mut per_cell = Vec::new();
    let mut ratio_max: f64 = 0.0;
    let mut cloud = Vec::new();
    let (offsets, _) = state.realization()?;
    for ci in 0..state.cell_count() {
        let poly = state.cell_polygon(ci)?;
        let dia = diameter(&poly);
        let per = state.cell_perimeter(ci, &crate::functionals::Anisotropy::Euclidean)?;
        let ratio = dia / per;
        ratio_max = ratio_max.max(ratio);
        per_cell.push((dia, per, ratio));
        let off = state.wrap_cart(offsets[ci]);
        cloud.extend(poly.into_iter().map(|p| p + off));
    }
    let domain_diameter = diameter(&cloud);
    let two_r_g = 2.0 * state.lattice.covering_radius()?;
    Ok(DiameterCheck {
        per_cell,
        diameter_ratio_max: ratio_max,
        domain_diameter,
        two_r_g,
        c_measured: domain_diameter - two_r_g,
    })
}

// ---- combined report ---------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub junctions: JunctionReport,
    pub arc_fits: Vec<ArcFit>,
    pub arc_rms_max: f64,
    /// None when a degree violation makes the sums undefined.
    pub curvature_sum_max: Option<f64>,
    pub pressures: Option<Vec<f64>>,
    pub pressure_residual: Option<f64>,
    pub diameter: DiameterCheck,
    pub hausdorff_to_reference: Option<f64>,
    pub probe: ProbeResult,
}

pub fn report(
    state: &PolyPartition,
    model: &EnergyModel,
    trials: usize,
    seed: u64,
) -> Result<DiagnosticsReport> {
    let junctions = check_junctions(state)?;
    let arc_fits = fit_arcs(state)?;
    let arc_rms_max = arc_fits.iter().map(|a| a.rms).fold(0.0, f64::max);
    let curvature_sum_max = if junctions.degree_violations.is_empty() {
        Some(check_curvature_sums(state)?.into_iter().fold(0.0, f64::max))
    } else {
        None
    };
    let (pressures, pressure_residual) = match fit_pressures(state) {
        Ok((p, r)) => (Some(p.pressures), Some(r)),
        Err(_) => (None, None),
    };
    let diameter = diameter_bound_check(state)?;
    let probe = minimality_probe(state, model, trials, seed)?;
    Ok(DiagnosticsReport {
        junctions,
        arc_fits,
        arc_rms_max,
        curvature_sum_max,
        pressures,
        pressure_residual,
        diameter,
        hausdorff_to_reference: None,
        probe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{honeycomb, perturb, rect_grid, stretched_hex_domain};
    use crate::energy::PerimeterKind;
    use crate::lattice::Lattice;
    use crate::optimizer::{minimize_poly, OptimizerConfig};
    use approx::assert_abs_diff_eq;

    fn classical(v: Vec<f64>) -> EnergyModel {
        EnergyModel::constrained(PerimeterKind::Classical, 0.0, v).unwrap()
    }

    fn unit_square_grid() -> PolyPartition {
        rect_grid(2.0, 2.0, &[0.0, 0.5], &[0.0, 0.5], &[1.0; 4]).unwrap()
    }

    #[test]
    fn honeycomb_junctions_exact() {
        let hc = honeycomb(4).unwrap();
        let rep = check_junctions(&hc).unwrap();
        assert!(rep.degree_violations.is_empty());
        assert!(!rep.checks.is_empty());
        assert!(rep.max_dev_deg < 1e-9, "max dev {}", rep.max_dev_deg);
    }

    #[test]
    fn square_grid_flags_degree_four() {
        let p = unit_square_grid();
        let rep = check_junctions(&p).unwrap();
        assert!(!rep.degree_violations.is_empty());
        assert!(rep.degree_violations.iter().all(|&(_, d)| d == 4));
        assert!(check_curvature_sums(&p).is_err());
    }

    #[test]
    fn honeycomb_arcs_are_lines() {
        let hc = honeycomb(2).unwrap();
        for fit in fit_arcs(&hc).unwrap() {
            assert!(fit.is_line);
            assert_eq!(fit.kappa, 0.0);
            assert!(fit.rms < 1e-12);
        }
        let sums = check_curvature_sums(&hc).unwrap();
        assert!(sums.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn synthetic_arc_recovery_range() {
        // A free-standing chain is enough for fit_arc; cells are not consulted.
        let lat = Lattice::square(100.0);
        for kappa in [0.1, 0.5, 2.0, 10.0] {
            for ccw in [true, false] {
                let r = 1.0 / kappa;
                let center = Vec2::new(30.0, 40.0);
                let n = 24;
                let span = 1.2;
                let pts: Vec<Vec2> = (0..=n)
                    .map(|k| {
                        let t = span * k as f64 / n as f64;
                        let a = if ccw { t } else { -t };
                        center + Vec2::new(a.cos(), a.sin()) * r
                    })
                    .collect();
                let mut p = PolyPartition {
                    lattice: lat.clone(),
                    vertices: vec![Vec2::ZERO, Vec2::ZERO],
                    edges: vec![crate::poly::Edge {
                        tail: 0,
                        head: 1,
                        wrap: [0, 0],
                        samples: Vec::new(),
                    }],
                    cells: Vec::new(),
                };
                p.vertices[0] = p.cart_to_frac(pts[0]);
                p.vertices[1] = p.cart_to_frac(pts[n]);
                p.edges[0].samples = pts[1..n].iter().map(|&q| p.cart_to_frac(q)).collect();
                let fit = fit_arc(&p, 0).unwrap();
                assert!(!fit.is_line);
                assert_abs_diff_eq!(fit.kappa.abs(), kappa, epsilon = 1e-8);
                // Sign convention: positive when the center lies right of the
                // traversal direction.
                let mid = pts[n / 2];
                let dir = pts[n] - pts[0];
                let expect_pos = dir.cross(center - mid) < 0.0;
                assert_eq!(fit.kappa > 0.0, expect_pos);
            }
        }
    }

    #[test]
    fn curvature_sums_rotation_invariant() {
        // Bend a honeycomb slightly so the fitted curvatures are nonzero.
        let state = perturb(&honeycomb(2).unwrap(), 0.02, 3).unwrap();
        let sums = check_curvature_sums(&state).unwrap();
        let th: f64 = 0.53;
        let rot = nalgebra::DMatrix::from_row_slice(
            2,
            2,
            &[th.cos(), -th.sin(), th.sin(), th.cos()],
        );
        let mut rotated = state.clone();
        rotated.lattice = Lattice::new(rot * state.lattice.basis().clone()).unwrap();
        let sums_r = check_curvature_sums(&rotated).unwrap();
        for (a, b) in sums.iter().zip(&sums_r) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn converged_state_audit() {
        let init = perturb(&stretched_hex_domain(&[1.2, 0.8]).unwrap(), 0.02, 4).unwrap();
        let model = classical(vec![1.2, 0.8]);
        let (s, _) = minimize_poly(&init, &model, &OptimizerConfig::default()).unwrap();
        let rep = check_junctions(&s).unwrap();
        assert!(rep.degree_violations.is_empty());
        assert!(rep.max_dev_deg < 0.01, "angle dev {}", rep.max_dev_deg);
        let sums = check_curvature_sums(&s).unwrap();
        assert!(sums.iter().all(|&x| x < 1e-3));
        let (_, residual) = fit_pressures(&s).unwrap();
        assert!(residual < 1e-3, "pressure residual {residual}");
    }

    #[test]
    fn probe_honeycomb_passes() {
        let hc = honeycomb(2).unwrap();
        let model = classical(vec![1.0, 1.0]);
        let res = minimality_probe(&hc, &model, 25, 7).unwrap();
        assert!(!res.vacuous);
        assert!(res.worst_decrease > -1e-9, "worst {}", res.worst_decrease);
    }

    #[test]
    fn probe_square_grid_finds_decrease() {
        let p = unit_square_grid();
        let model = classical(vec![1.0; 4]);
        let res = minimality_probe(&p, &model, 10, 1).unwrap();
        assert!(res.worst_decrease < -1e-5, "worst {}", res.worst_decrease);
    }

    #[test]
    fn probe_zero_trials_vacuous() {
        let hc = honeycomb(1).unwrap();
        let model = classical(vec![1.0]);
        let res = minimality_probe(&hc, &model, 0, 0).unwrap();
        assert!(res.vacuous);
        assert_eq!(res.worst_decrease, 0.0);
    }

    #[test]
    fn diameter_ratios() {
        let hc = honeycomb(1).unwrap();
        let d = diameter_bound_check(&hc).unwrap();
        // Regular hexagon: diameter 2l, perimeter 6l.
        assert_abs_diff_eq!(d.per_cell[0].2, 1.0 / 3.0, epsilon = 1e-12);
        assert!(d.diameter_ratio_max < 0.5);
        assert!(d.c_measured.is_finite());

        let sq = unit_square_grid();
        let ds = diameter_bound_check(&sq).unwrap();
        for &(_, _, r) in &ds.per_cell {
            assert_abs_diff_eq!(r, 2f64.sqrt() / 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn report_is_deterministic() {
        let hc = honeycomb(2).unwrap();
        let model = classical(vec![1.0, 1.0]);
        let r1 = report(&hc, &model, 5, 9).unwrap();
        let r2 = report(&hc, &model, 5, 9).unwrap();
        assert_eq!(r1.probe.worst_decrease, r2.probe.worst_decrease);
        assert_eq!(r1.junctions.max_dev_deg, r2.junctions.max_dev_deg);
        assert_eq!(r1.curvature_sum_max, r2.curvature_sum_max);
    }
}
