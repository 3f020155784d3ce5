//! The objective functionals: mu Per(D) + 1/2 sum_i Per(E_i), optionally
//! with the volume penalization lambda sum_i ||E_i| - v_i|, over both the
//! polygonal and the grid representation, plus arc fitting and pressure
//! extraction on converged planar states.

use crate::error::{Error, Result};
use crate::functionals::{Anisotropy, Kernel};
use crate::geom::{fit_circle, fit_line, Vec2};
use crate::grid::GridPartition;
use crate::poly::PolyPartition;

#[derive(Debug, Clone, PartialEq)]
pub enum PerimeterKind {
    Classical,
    Anisotropic(Anisotropy),
    Nonlocal(Kernel),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Constrained,
    Penalized { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub kind: PerimeterKind,
    pub mu: f64,
    pub mode: Mode,
    pub target_volumes: Vec<f64>,
}

/// Smoothing width for the penalty kink: within this band of the target the
/// subgradient is taken to be zero.
pub const EPS_PEN: f64 = 1e-7;

impl EnergyModel {
    pub fn new(kind: PerimeterKind, mu: f64, mode: Mode, target_volumes: Vec<f64>) -> Result<Self> {
        if mu < 0.0 {
            return Err(Error::InvalidParameter("mu must be >= 0".into()));
        }
        if let Mode::Penalized { lambda } = mode {
            if lambda <= 0.0 {
                return Err(Error::InvalidParameter("lambda must be > 0 in penalized mode".into()));
            }
        }
        // Penalized runs may target zero volume (a cell meant to vanish).
        let min_ok = if matches!(mode, Mode::Penalized { .. }) { 0.0 } else { f64::MIN_POSITIVE };
        if target_volumes.is_empty() || target_volumes.iter().any(|&v| v < min_ok) {
            return Err(Error::InvalidParameter("target volumes must be non-negative".into()));
        }
        Ok(EnergyModel { kind, mu, mode, target_volumes })
    }

    pub fn constrained(kind: PerimeterKind, mu: f64, v: Vec<f64>) -> Result<Self> {
        Self::new(kind, mu, Mode::Constrained, v)
    }

    /// The anisotropy used for boundary integrals; the classical perimeter
    /// is the euclidean one.
    pub fn anisotropy(&self) -> Result<Anisotropy> {
        match &self.kind {
            PerimeterKind::Classical => Ok(Anisotropy::Euclidean),
            PerimeterKind::Anisotropic(a) => Ok(a.clone()),
            PerimeterKind::Nonlocal(_) => Err(Error::InvalidParameter(
                "non-local perimeter requires the grid representation".into(),
            )),
        }
    }

    fn check_targets(&self, n: usize, volume: f64) -> Result<()> {
        if self.target_volumes.len() != n {
            return Err(Error::InvalidParameter(format!(
                "model has {} target volumes, state has {n} cells",
                self.target_volumes.len()
            )));
        }
        if matches!(self.mode, Mode::Constrained) {
            let sum: f64 = self.target_volumes.iter().sum();
            if (sum - volume).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "constrained targets sum to {sum}, lattice volume is {volume}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnergyBreakdown {
    pub total: f64,
    pub mu_term: f64,
    pub half_sum_perimeters: f64,
    pub penalty_term: f64,
    pub per_cell: Vec<(f64, f64, f64)>,
    /// max_i ||E_i| - v_i| (reported, not enforced, in constrained mode).
    pub constraint_residual: f64,
}

fn assemble(
    areas: Vec<f64>,
    perimeters: Vec<f64>,
    mu_term: f64,
    mode: Mode,
    targets: &[f64],
) -> EnergyBreakdown {
    let mut penalty_term = 0.0;
    let mut residual: f64 = 0.0;
    let mut per_cell = Vec::with_capacity(areas.len());
    for i in 0..areas.len() {
        let dev = (areas[i] - targets[i]).abs();
        residual = residual.max(dev);
        let pen = match mode {
            Mode::Constrained => 0.0,
            Mode::Penalized { lambda } => lambda * dev,
        };
        penalty_term += pen;
        per_cell.push((areas[i], perimeters[i], pen));
    }
    let half_sum_perimeters = 0.5 * perimeters.iter().sum::<f64>();
    EnergyBreakdown {
        total: mu_term + half_sum_perimeters + penalty_term,
        mu_term,
        half_sum_perimeters,
        penalty_term,
        per_cell,
        constraint_residual: residual,
    }
}

pub fn evaluate_poly(state: &PolyPartition, model: &EnergyModel) -> Result<EnergyBreakdown> {
    model.check_targets(state.cell_count(), state.lattice.volume())?;
    let a = model.anisotropy()?;
    let areas = state.cell_areas()?;
    let perimeters: Vec<f64> = (0..state.cell_count())
        .map(|i| state.cell_perimeter(i, &a))
        .collect::<Result<_>>()?;
    let mu_term = if model.mu > 0.0 { model.mu * state.domain_perimeter()? } else { 0.0 };
    Ok(assemble(areas, perimeters, mu_term, model.mode, &model.target_volumes))
}

pub fn evaluate_grid(state: &GridPartition, model: &EnergyModel) -> Result<EnergyBreakdown> {
    model.check_targets(state.num_labels, state.lattice.volume())?;
    let perimeters: Vec<f64> = match &model.kind {
        PerimeterKind::Classical => (1..=state.num_labels as u32)
            .map(|l| state.grid_perimeter(l))
            .collect::<Result<_>>()?,
        PerimeterKind::Nonlocal(k) => (1..=state.num_labels as u32)
            .map(|l| state.nonlocal_perimeter(l, k).map(|(v, _)| v))
            .collect::<Result<_>>()?,
        PerimeterKind::Anisotropic(_) => {
            return Err(Error::InvalidParameter(
                "anisotropic perimeters use the polygonal representation".into(),
            ))
        }
    };
    let mu_term = if model.mu > 0.0 {
        // The grid's fundamental domain is the parallelepiped itself.
        let (b1, b2) = state.lattice.basis2();
        model.mu * 2.0 * (b1.norm() + b2.norm())
    } else {
        0.0
    };
    Ok(assemble(state.volumes(), perimeters, mu_term, model.mode, &model.target_volumes))
}

/// Rotation by +90 degrees (inverse of Vec2::perp).
fn rot90(v: Vec2) -> Vec2 {
    Vec2::new(-v.y, v.x)
}

/// Cartesian gradient of the energy with respect to every DOF (vertices then
/// edge samples). Local perimeter kinds only; the penalty uses subgradient 0
/// inside the EPS_PEN band.
pub fn gradient(state: &PolyPartition, model: &EnergyModel) -> Result<Vec<Vec2>> {
    model.check_targets(state.cell_count(), state.lattice.volume())?;
    let a = model.anisotropy()?;
    let np = state.point_count();
    let mut grad = vec![Vec2::ZERO; np];
    // Half-sum of anisotropic perimeters, cell by cell.
    for ci in 0..state.cell_count() {
        let chain = state.cell_chain(ci)?;
        let n = chain.len();
        for s in 0..n {
            let (p, dp) = chain[s];
            let (q, dq) = chain[(s + 1) % n];
            let seg = q - p;
            if seg.norm_sq() == 0.0 {
                continue;
            }
            let g = rot90(a.grad(seg.perp())) * 0.5;
            grad[dq] += g;
            grad[dp] -= g;
        }
    }
    // Penalty subgradient.
    if let Mode::Penalized { lambda } = model.mode {
        let areas = state.cell_areas()?;
        let agrads = state.area_gradients()?;
        for ci in 0..state.cell_count() {
            let dev = areas[ci] - model.target_volumes[ci];
            if dev.abs() <= EPS_PEN {
                continue;
            }
            let s = lambda * dev.signum();
            for (g, ag) in grad.iter_mut().zip(&agrads[ci]) {
                *g += *ag * s;
            }
        }
    }
    // mu-term: only realization-boundary edges move it.
    if model.mu > 0.0 {
        let (_, broken) = state.realization()?;
        for eid in broken {
            let chain = state.edge_chain_cart(eid);
            let edge = &state.edges[eid];
            let mut dofs = vec![edge.tail];
            for k in 0..edge.samples.len() {
                dofs.push(state.sample_dof(eid, k));
            }
            dofs.push(edge.head);
            for w in 0..chain.len() - 1 {
                let seg = chain[w + 1] - chain[w];
                if seg.norm_sq() == 0.0 {
                    continue;
                }
                let dir = seg.normalized() * (2.0 * model.mu);
                grad[dofs[w + 1]] += dir;
                grad[dofs[w]] -= dir;
            }
        }
    }
    Ok(grad)
}

/// Per-edge circle/line fit with the signed-curvature convention: writing i
/// for the cell traversing the edge forward and j for the other one, kappa
/// is positive when the fitted center lies on the j side (the right of the
/// forward direction; cell loops are CCW so i lies left).
#[derive(Debug, Clone, Copy)]
pub struct ArcFit {
    pub kappa: f64,
    pub rms: f64,
    pub is_line: bool,
    /// Fitted circle center in the edge's tail frame (None for lines).
    pub center: Option<Vec2>,
}

/// Edges classified as lines below this curvature magnitude.
pub const LINE_KAPPA_THRESHOLD: f64 = 1e-6;

pub fn fit_arc(state: &PolyPartition, edge: usize) -> Result<ArcFit> {
    let chain = state.edge_chain_cart(edge);
    let len: f64 = chain.windows(2).map(|w| (w[1] - w[0]).norm()).sum();
    if len < 1e-12 {
        return Err(Error::InvalidParameter(format!("edge {edge} is degenerate")));
    }
    if chain.len() < 4 {
        // Two or three points carry no curvature information; treat as line.
        return Ok(ArcFit { kappa: 0.0, rms: 0.0, is_line: true, center: None });
    }
    let line = fit_line(&chain).ok_or_else(|| Error::Numerical("line fit failed".into()))?;
    if let Some((center, radius, rms)) = fit_circle(&chain) {
        let kappa = 1.0 / radius;
        if kappa.abs() >= LINE_KAPPA_THRESHOLD && rms <= line.2 {
            let mid = chain[chain.len() / 2];
            let dir = chain[chain.len() - 1] - chain[0];
            let side = dir.cross(center - mid);
            let signed = if side < 0.0 { kappa } else { -kappa };
            return Ok(ArcFit { kappa: signed, rms, is_line: false, center: Some(center) });
        }
    }
    Ok(ArcFit { kappa: 0.0, rms: line.2, is_line: true, center: None })
}

#[derive(Debug, Clone)]
pub struct PressureVector {
    pub pressures: Vec<f64>,
}

/// For every edge, the labels of the forward- and backward-traversing cells.
pub fn edge_sides(state: &PolyPartition) -> Vec<(usize, usize)> {
    let mut fwd = vec![usize::MAX; state.edges.len()];
    let mut bwd = vec![usize::MAX; state.edges.len()];
    for (ci, cell) in state.cells.iter().enumerate() {
        for se in &cell.loop_edges {
            if se.forward {
                fwd[se.edge] = ci;
            } else {
                bwd[se.edge] = ci;
            }
        }
    }
    fwd.into_iter().zip(bwd).collect()
}

/// Least-squares pressures: kappa_e = rho_i - rho_j over all interfaces
/// between distinct cells, gauge sum rho = 0. Returns the pressures and the
/// worst equation residual.
pub fn fit_pressures(state: &PolyPartition) -> Result<(PressureVector, f64)> {
    use nalgebra::{DMatrix, DVector};
    let n = state.cell_count();
    let sides = edge_sides(state);
    let mut rows: Vec<(usize, usize, f64)> = Vec::new();
    for (eid, &(i, j)) in sides.iter().enumerate() {
        if i == j {
            continue;
        }
        let arc = fit_arc(state, eid)?;
        rows.push((i, j, arc.kappa));
    }
    // Interfaces must connect all cells or the system is under-determined.
    let mut comp: Vec<usize> = (0..n).collect();
    fn find(comp: &mut Vec<usize>, x: usize) -> usize {
        if comp[x] != x {
            let r = find(comp, comp[x]);
            comp[x] = r;
        }
        comp[x]
    }
    for &(i, j, _) in &rows {
        let (a, b) = (find(&mut comp, i), find(&mut comp, j));
        comp[a] = b;
    }
    let roots: std::collections::HashSet<usize> = (0..n).map(|x| find(&mut comp, x)).collect();
    if roots.len() > 1 {
        return Err(Error::Numerical(
            "pressure system under-determined: interface graph is disconnected".into(),
        ));
    }
    let mut m = DMatrix::zeros(rows.len() + 1, n);
    let mut rhs = DVector::zeros(rows.len() + 1);
    for (r, &(i, j, kappa)) in rows.iter().enumerate() {
        m[(r, i)] = 1.0;
        m[(r, j)] = -1.0;
        rhs[r] = kappa;
    }
    for c in 0..n {
        m[(rows.len(), c)] = 1.0;
    }
    let svd = m.svd(true, true);
    let rho = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::Numerical(format!("pressure solve failed: {e}")))?;
    let mut residual: f64 = 0.0;
    for &(i, j, kappa) in &rows {
        residual = residual.max((kappa - (rho[i] - rho[j])).abs());
    }
    Ok((PressureVector { pressures: rho.iter().copied().collect() }, residual))
}
