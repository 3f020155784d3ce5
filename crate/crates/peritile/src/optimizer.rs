//! Numerical minimization: projected/penalized gradient descent on polygonal
//! states with topology surgery, greedy label-flip descent on grids, and
//! coordinate descent on the lattice basis.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constructions::slab_partition;
use crate::energy::{evaluate_poly, gradient, EnergyModel, evaluate_grid};
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::grid::GridPartition;
use crate::lattice::Lattice;
use crate::poly::{PolyPartition, SignedEdge};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// Backtracking line search with the given Armijo constant and initial step.
    Backtracking { armijo: f64, initial: f64 },
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// Projected-gradient norm threshold.
    pub tol_grad: f64,
    pub tol_volume: f64,
    /// Edge length below which an edge collapses; None means 1e-3 * sqrt(d(G)).
    pub surgery_edge_min: Option<f64>,
    /// Re-sample polylines to uniform arc length every this many iterations
    /// (0 disables periodic resampling).
    pub resample_interval: usize,
    /// Interior samples per edge used when resampling.
    pub resample_points: usize,
    /// Initial simulated-annealing temperature for grid runs (0 = greedy only).
    pub anneal_temperature: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 2000,
            step_rule: StepRule::Backtracking { armijo: 1e-4, initial: 0.5 },
            tol_grad: 1e-8,
            tol_volume: 1e-10,
            surgery_edge_min: None,
            resample_interval: 25,
            resample_points: 8,
            anneal_temperature: 0.0,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_grad > 0.0 && self.tol_volume > 0.0;
        let ok = ok
            && match self.step_rule {
                StepRule::Fixed(h) => h > 0.0,
                StepRule::Backtracking { armijo, initial } => armijo > 0.0 && initial > 0.0,
            };
        if !ok {
            return Err(Error::InvalidParameter("optimizer tolerances/steps must be positive".into()));
        }
        Ok(())
    }

    fn edge_min(&self, lattice: &Lattice) -> f64 {
        self.surgery_edge_min.unwrap_or(1e-3 * lattice.volume().sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct TraceEntry {
    pub iter: usize,
    pub energy: f64,
    pub volume_residual: f64,
    pub grad_norm: f64,
    /// Non-descent event at this iterate (surgery / resample), if any.
    pub event: Option<String>,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub entries: Vec<TraceEntry>,
    pub surgery_events: Vec<String>,
    /// Energy non-increasing across accepted descent steps.
    pub monotone: bool,
    pub converged: bool,
    pub termination: String,
}

impl RunTrace {
    fn new() -> Self {
        RunTrace {
            entries: Vec::new(),
            surgery_events: Vec::new(),
            monotone: true,
            converged: false,
            termination: String::new(),
        }
    }

    pub fn final_energy(&self) -> f64 {
        self.entries.last().map(|t| t.energy).unwrap_or(f64::NAN)
    }
}

// ---- displacement / projection helpers -------------------------------------

/// Move every DOF by `scale * d[i]` in cartesian coordinates.
pub fn apply_displacement(p: &mut PolyPartition, d: &[Vec2], scale: f64) {
    let mut pts = p.points();
    for (i, q) in pts.iter_mut().enumerate() {
        let cart = p.frac_to_cart(*q) + d[i] * scale;
        *q = p.cart_to_frac(cart);
    }
    p.set_points(&pts);
}

pub fn volume_residual(p: &PolyPartition, targets: &[f64]) -> Result<f64> {
    let areas = p.cell_areas()?;
    Ok(areas.iter().zip(targets).map(|(a, v)| (a - v).abs()).fold(0.0, f64::max))
}

fn gram_solve(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let gram = a * a.transpose();
    let svd = gram.svd(true, true);
    svd.solve(rhs, 1e-12).map_err(|e| Error::Numerical(format!("gram solve: {e}")))
}

fn area_matrix(p: &PolyPartition) -> Result<DMatrix<f64>> {
    let grads = p.area_gradients()?;
    let np = p.point_count();
    let mut a = DMatrix::zeros(p.cell_count(), 2 * np);
    for (i, g) in grads.iter().enumerate() {
        for (j, v) in g.iter().enumerate() {
            a[(i, 2 * j)] = v.x;
            a[(i, 2 * j + 1)] = v.y;
        }
    }
    Ok(a)
}

/// Newton projection of the cell areas onto the target volumes, moving DOFs
/// along the span of the area gradients (minimum-norm correction).
pub fn project_volumes(p: &mut PolyPartition, targets: &[f64], tol: f64) -> Result<f64> {
    for _ in 0..40 {
        let areas = p.cell_areas()?;
        let res = areas.iter().zip(targets).map(|(a, v)| (a - v).abs()).fold(0.0, f64::max);
        if res <= tol {
            return Ok(res);
        }
        let a = area_matrix(p)?;
        let rhs = DVector::from_iterator(
            targets.len(),
            targets.iter().zip(&areas).map(|(v, ar)| v - ar),
        );
        let c = gram_solve(&a, &rhs)?;
        let d = a.transpose() * c;
        let disp: Vec<Vec2> =
            (0..p.point_count()).map(|j| Vec2::new(d[2 * j], d[2 * j + 1])).collect();
        apply_displacement(p, &disp, 1.0);
    }
    let res = volume_residual(p, targets)?;
    if res <= tol {
        Ok(res)
    } else {
        Err(Error::Numerical(format!("volume projection stalled at residual {res:.3e}")))
    }
}

/// Remove the component of g along the cell-area gradients.
fn project_tangent(p: &PolyPartition, g: &mut [Vec2]) -> Result<()> {
    let a = area_matrix(p)?;
    let gv = DVector::from_iterator(2 * g.len(), g.iter().flat_map(|v| [v.x, v.y]));
    let rhs = &a * &gv;
    let c = gram_solve(&a, &rhs)?;
    let corr = a.transpose() * c;
    for (j, v) in g.iter_mut().enumerate() {
        v.x -= corr[2 * j];
        v.y -= corr[2 * j + 1];
    }
    Ok(())
}

fn grad_norm(g: &[Vec2]) -> f64 {
    g.iter().map(|v| v.norm_sq()).sum::<f64>().sqrt()
}

// ---- surgery ----------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct SurgeryOutcome {
    pub events: Vec<String>,
    /// A collapse was requested but would have produced a degenerate cell.
    pub rejected: bool,
}

/// Collapse the (non-loop) edge `eid` to the midpoint of its endpoints,
/// merging the head vertex into the tail vertex.
fn collapse_edge(p: &PolyPartition, eid: usize) -> Result<PolyPartition> {
    let e = p.edges[eid].clone();
    let (t, h, w) = (e.tail, e.head, e.wrap);
    if t == h {
        return Err(Error::InvalidPartition("cannot collapse a loop edge".into()));
    }
    let mut q = p.clone();
    let m = (p.frac_to_cart(p.vertices[t]) + p.frac_to_cart(p.vertices[h]) + p.wrap_cart(w)) * 0.5;
    q.vertices[t] = p.cart_to_frac(m);
    let wf = Vec2::new(w[0] as f64, w[1] as f64);
    for (fid, f) in q.edges.iter_mut().enumerate() {
        if fid == eid {
            continue;
        }
        if f.tail == h {
            // Re-express the chain in the merged vertex's frame.
            f.tail = t;
            for s in &mut f.samples {
                *s += wf;
            }
            f.wrap = [f.wrap[0] + w[0], f.wrap[1] + w[1]];
        }
        if f.head == h {
            f.head = t;
            f.wrap = [f.wrap[0] - w[0], f.wrap[1] - w[1]];
        }
    }
    for c in &mut q.cells {
        c.loop_edges.retain(|se| se.edge != eid);
        if c.loop_edges.len() < 2 {
            return Err(Error::InvalidPartition("collapse would degenerate a cell".into()));
        }
    }
    // Drop edge eid and vertex h, compacting indices.
    q.edges.remove(eid);
    for c in &mut q.cells {
        for se in &mut c.loop_edges {
            if se.edge > eid {
                se.edge -= 1;
            }
        }
    }
    q.vertices.remove(h);
    for f in &mut q.edges {
        if f.tail > h {
            f.tail -= 1;
        }
        if f.head > h {
            f.head -= 1;
        }
    }
    q.validate()?;
    Ok(q)
}

/// Split junction `vertex`, moving the two edge ends in `moved` (edge id,
/// leaves-from-tail) onto a new vertex at distance eps along `dir`.
pub(crate) fn split_junction(
    p: &PolyPartition,
    vertex: usize,
    moved: [(usize, bool); 2],
    dir: Vec2,
    eps: f64,
) -> Result<PolyPartition> {
    let mut q = p.clone();
    let v2 = q.vertices.len();
    let pos = p.frac_to_cart(p.vertices[vertex]) + dir * eps;
    q.vertices.push(p.cart_to_frac(pos));
    for &(eid, at_tail) in &moved {
        if at_tail {
            q.edges[eid].tail = v2;
        } else {
            q.edges[eid].head = v2;
        }
    }
    let enew = q.edges.len();
    q.edges.push(crate::poly::Edge { tail: vertex, head: v2, wrap: [0, 0], samples: Vec::new() });
    let in_moved = |end: (usize, bool)| moved.contains(&end);
    for ci in 0..q.cells.len() {
        let lp = p.cells[ci].loop_edges.clone();
        let n = lp.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let prev = lp[i];
            let next = lp[(i + 1) % n];
            out.push(prev);
            // Vertex between prev and next in the original state.
            let junction = if prev.forward { p.edges[prev.edge].head } else { p.edges[prev.edge].tail };
            if junction != vertex {
                continue;
            }
            let in_end = (prev.edge, !prev.forward);
            let out_end = (next.edge, next.forward);
            match (in_moved(in_end), in_moved(out_end)) {
                (true, false) => out.push(SignedEdge { edge: enew, forward: false }),
                (false, true) => out.push(SignedEdge { edge: enew, forward: true }),
                _ => {}
            }
        }
        // Rotate so the loop still starts where it used to.
        q.cells[ci].loop_edges = out;
    }
    q.validate()?;
    Ok(q)
}

/// Collapse short edges and split junctions of degree >= 4, choosing the
/// energetically best contiguous pairing per junction.
pub fn surgery(
    state: &PolyPartition,
    model: &EnergyModel,
    cfg: &OptimizerConfig,
) -> Result<(PolyPartition, SurgeryOutcome)> {
    let mut p = state.clone();
    let mut outcome = SurgeryOutcome::default();
    let min_len = cfg.edge_min(&p.lattice);
    // Collapse pass.
    let mut skip = std::collections::HashSet::new();
    loop {
        let mut target: Option<(usize, f64)> = None;
        for (eid, e) in p.edges.iter().enumerate() {
            if e.tail == e.head || skip.contains(&eid) {
                continue;
            }
            let len = crate::geom::polyline_length(&p.edge_chain_cart(eid));
            if len < min_len && target.map_or(true, |(_, l)| len < l) {
                target = Some((eid, len));
            }
        }
        let Some((eid, len)) = target else { break };
        match collapse_edge(&p, eid) {
            Ok(q) => {
                p = q;
                skip.clear();
                outcome.events.push(format!("collapse edge {eid} (length {len:.3e})"));
            }
            Err(_) => {
                outcome.rejected = true;
                skip.insert(eid);
            }
        }
    }
    // Split pass.
    let rho = p.lattice.packing_radius()?;
    let eps = (3.0 * min_len).min(0.2 * rho);
    loop {
        let Some(j) = p.junction_list().into_iter().find(|j| j.ends.len() >= 4) else { break };
        let mut ends = j.ends.clone();
        ends.sort_by(|a, b| a.2.angle().partial_cmp(&b.2.angle()).unwrap());
        let deg = ends.len();
        let mut best: Option<(f64, [(usize, bool); 2], PolyPartition)> = None;
        for k in 0..deg {
            let a = ends[k];
            let b = ends[(k + 1) % deg];
            let moved = [(a.0, a.1), (b.0, b.1)];
            let mut dir = a.2 + b.2;
            if dir.norm() < 1e-9 {
                dir = a.2.perp();
            }
            let Ok(q) = split_junction(&p, j.vertex, moved, dir.normalized(), eps) else {
                continue;
            };
            let Ok(e) = evaluate_poly(&q, model) else { continue };
            let mut key = [moved[0], moved[1]];
            key.sort();
            let better = match &best {
                None => true,
                Some((be, bm, _)) => {
                    e.total < be - 1e-12 || ((e.total - be).abs() <= 1e-12 && key < *bm)
                }
            };
            if better {
                best = Some((e.total, key, q));
            }
        }
        let Some((_, key, q)) = best else {
            outcome.rejected = true;
            break;
        };
        p = q;
        outcome.events.push(format!(
            "split degree-{deg} junction at vertex {} (moved edges {},{})",
            j.vertex, key[0].0, key[1].0
        ));
    }
    Ok((p, outcome))
}

// ---- polygonal descent -------------------------------------------------------

pub fn minimize_poly(
    init: &PolyPartition,
    model: &EnergyModel,
    cfg: &OptimizerConfig,
) -> Result<(PolyPartition, RunTrace)> {
    cfg.validate()?;
    init.validate()?;
    let mut state = init.clone();
    let targets = model.target_volumes.clone();
    let constrained = matches!(model.mode, crate::energy::Mode::Constrained);
    let mut trace = RunTrace::new();
    let mut last_energy = f64::INFINITY;
    let mut last_stall_energy = f64::INFINITY;

    if constrained {
        project_volumes(&mut state, &targets, cfg.tol_volume)?;
    }

    let mut iter = 0;
    while iter < cfg.max_iters {
        let e = evaluate_poly(&state, model)?;
        let mut g = gradient(&state, model)?;
        if constrained {
            project_tangent(&state, &mut g)?;
        }
        let gn = grad_norm(&g);
        let vres = volume_residual(&state, &targets)?;
        trace.entries.push(TraceEntry {
            iter,
            energy: e.total,
            volume_residual: vres,
            grad_norm: gn,
            event: None,
        });
        if e.total > last_energy + 1e-12 {
            trace.monotone = false;
        }
        last_energy = e.total;

        if gn < cfg.tol_grad {
            // Stalled at a critical point: attempt surgery once per energy level.
            let (q, out) = surgery(&state, model, cfg)?;
            if !out.events.is_empty() && e.total < last_stall_energy - 1e-12 {
                last_stall_energy = e.total;
                state = q;
                state.resample(cfg.resample_points);
                if constrained {
                    project_volumes(&mut state, &targets, cfg.tol_volume)?;
                }
                for ev in out.events {
                    trace.surgery_events.push(ev.clone());
                    trace.entries.push(TraceEntry {
                        iter,
                        energy: evaluate_poly(&state, model)?.total,
                        volume_residual: volume_residual(&state, &targets)?,
                        grad_norm: f64::NAN,
                        event: Some(ev),
                    });
                }
                last_energy = f64::INFINITY;
                iter += 1;
                continue;
            }
            trace.converged = true;
            trace.termination = "tol_grad".into();
            return Ok((state, trace));
        }

        // Line search along -g.
        let (armijo, mut step) = match cfg.step_rule {
            StepRule::Fixed(h) => (0.0, h),
            StepRule::Backtracking { armijo, initial } => (armijo, initial),
        };
        let mut accepted = false;
        while step > 1e-16 {
            let mut cand = state.clone();
            apply_displacement(&mut cand, &g, -step);
            if constrained && project_volumes(&mut cand, &targets, cfg.tol_volume).is_err() {
                step *= 0.5;
                continue;
            }
            match evaluate_poly(&cand, model) {
                Ok(ec) if ec.total <= e.total - armijo * step * gn * gn => {
                    state = cand;
                    accepted = true;
                    break;
                }
                _ => step *= 0.5,
            }
            if matches!(cfg.step_rule, StepRule::Fixed(_)) {
                break;
            }
        }
        if !accepted {
            trace.termination = "line_search_failure".into();
            return Ok((state, trace));
        }

        iter += 1;
        if cfg.resample_interval > 0 && iter % cfg.resample_interval == 0 {
            state.resample(cfg.resample_points);
            if constrained {
                project_volumes(&mut state, &targets, cfg.tol_volume)?;
            }
            trace.entries.push(TraceEntry {
                iter,
                energy: evaluate_poly(&state, model)?.total,
                volume_residual: volume_residual(&state, &targets)?,
                grad_norm: f64::NAN,
                event: Some("resample".into()),
            });
            last_energy = f64::INFINITY;
        }
    }
    trace.termination = "max_iters".into();
    Ok((state, trace))
}

// ---- grid descent ------------------------------------------------------------

fn grid_objective(g: &GridPartition, model: &EnergyModel, constrained_lambda: f64) -> Result<f64> {
    let e = evaluate_grid(g, model)?;
    Ok(e.total + constrained_lambda * e.constraint_residual)
}

/// Greedy label-flip descent over boundary pixels, deterministic given the seed.
pub fn minimize_grid(
    init: &GridPartition,
    model: &EnergyModel,
    cfg: &OptimizerConfig,
) -> Result<(GridPartition, RunTrace)> {
    cfg.validate()?;
    let mut state = init.clone();
    let mut trace = RunTrace::new();
    // Constrained mode has no exact volume-preserving single flip; volume
    // drift is discouraged by a stiff penalty on the residual instead.
    let constrained_lambda = if matches!(model.mode, crate::energy::Mode::Constrained) {
        1e3 * (state.total_perimeter() + 1.0)
    } else {
        0.0
    };
    let mut energy = grid_objective(&state, model, constrained_lambda)?;
    let n = state.resolution;
    let mut temperature = cfg.anneal_temperature;
    for pass in 0..cfg.max_iters {
        let mut boundary: Vec<usize> = (0..n * n)
            .filter(|&i| {
                state.neighbors(i).iter().any(|&(j, _)| state.labels[j] != state.labels[i])
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(pass as u64));
        boundary.shuffle(&mut rng);
        let mut improved = false;
        for idx in boundary {
            let cur = state.labels[idx];
            let mut cands: Vec<u32> =
                state.neighbors(idx).iter().map(|&(j, _)| state.labels[j]).filter(|&l| l != cur).collect();
            cands.sort_unstable();
            cands.dedup();
            for lab in cands {
                let mut cand = state.clone();
                cand.labels[idx] = lab;
                let ec = grid_objective(&cand, model, constrained_lambda)?;
                let accept = if ec < energy - 1e-12 {
                    improved = true;
                    true
                } else if temperature > 0.0 {
                    let u: f64 = rand::Rng::gen(&mut rng);
                    let take = u < (-(ec - energy) / temperature).exp();
                    if take {
                        trace.monotone = false;
                    }
                    take
                } else {
                    false
                };
                if accept {
                    state = cand;
                    energy = ec;
                    break;
                }
            }
        }
        let vres = {
            let vols = state.volumes();
            vols.iter()
                .zip(&model.target_volumes)
                .map(|(a, v)| (a - v).abs())
                .fold(0.0, f64::max)
        };
        trace.entries.push(TraceEntry {
            iter: pass,
            energy,
            volume_residual: vres,
            grad_norm: 0.0,
            event: None,
        });
        if temperature > 0.0 {
            temperature *= 0.9;
            if temperature < 1e-4 {
                temperature = 0.0;
            }
        } else if !improved {
            trace.converged = true;
            trace.termination = "no_improving_flip".into();
            return Ok((state, trace));
        }
    }
    trace.termination = "max_iters".into();
    Ok((state, trace))
}

// ---- lattice descent ---------------------------------------------------------

/// Coordinate descent over the volume-normalized basis ((t, 0), (p, d/t)),
/// with an inner polygonal minimization (from a slab start) per evaluation.
pub fn minimize_lattice(
    init: &Lattice,
    model: &EnergyModel,
    cfg: &OptimizerConfig,
) -> Result<(Lattice, PolyPartition, RunTrace)> {
    cfg.validate()?;
    let d = init.volume();
    let reduced = init.reduce()?;
    let (b1, b2) = reduced.basis2();
    let mut t = b1.norm();
    let mut p = b1.dot(b2) / t;
    let mut trace = RunTrace::new();

    let inner = |t: f64, p: f64| -> Result<(f64, PolyPartition, Lattice)> {
        let lat = Lattice::from_cols_2d(Vec2::new(t, 0.0), Vec2::new(p, d / t))?;
        let start = slab_partition(&lat, &model.target_volumes)?;
        let (state, _) = minimize_poly(&start, model, cfg)?;
        let e = evaluate_poly(&state, model)?;
        Ok((e.total, state, lat))
    };

    let (mut best_e, mut best_state, mut best_lat) = inner(t, p)?;
    trace.entries.push(TraceEntry {
        iter: 0,
        energy: best_e,
        volume_residual: 0.0,
        grad_norm: f64::NAN,
        event: Some(format!("lattice eval t={t:.6} p={p:.6}")),
    });
    let mut h = 0.1 * d.sqrt();
    let t_min = 0.2 * d.sqrt();
    let mut evals = 1usize;
    while h > 1e-4 * d.sqrt() && evals < 400 {
        let mut improved = false;
        for (dt, dp) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
            let tn = t + dt;
            let pn = p + dp;
            if tn < t_min {
                continue;
            }
            let (e, state, lat) = inner(tn, pn)?;
            evals += 1;
            trace.entries.push(TraceEntry {
                iter: evals,
                energy: e,
                volume_residual: 0.0,
                grad_norm: f64::NAN,
                event: Some(format!("lattice eval t={tn:.6} p={pn:.6}")),
            });
            if e < best_e - 1e-10 {
                best_e = e;
                best_state = state;
                best_lat = lat;
                t = tn;
                p = pn;
                improved = true;
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    trace.converged = true;
    trace.termination = "step_below_tol".into();
    trace.entries.push(TraceEntry {
        iter: evals,
        energy: best_e,
        volume_residual: 0.0,
        grad_norm: f64::NAN,
        event: Some("best".into()),
    });
    Ok((best_lat, best_state, trace))
}
