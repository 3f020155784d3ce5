//! Periodic polygonal partitions of the plane: a fundamental domain cut into
//! cells, represented as a vertex/edge/loop complex on the torus R^2 / G.
//!
//! Vertex and sample coordinates are stored in fractional (basis) coordinates
//! so that file round-trips are bit-exact; all geometry is evaluated after
//! mapping to cartesian coordinates.

use crate::error::{Error, Result};
use crate::functionals::Anisotropy;
use crate::geom::{polyline_length, shoelace, Vec2};
use crate::lattice::Lattice;

/// Polyline edge of the skeleton. `samples` are interior subdivision points
/// in fractional coordinates, expressed in the frame of the tail vertex; the
/// head vertex is reached after adding `wrap` lattice steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub wrap: [i64; 2],
    pub samples: Vec<Vec2>,
}

/// Directed reference to an edge inside a cell loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignedEdge {
    pub edge: usize,
    pub forward: bool,
}

/// Cell: an oriented (CCW) loop of directed edges plus its target volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub loop_edges: Vec<SignedEdge>,
    pub target_volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyPartition {
    pub lattice: Lattice,
    pub vertices: Vec<Vec2>,
    pub edges: Vec<Edge>,
    pub cells: Vec<Cell>,
}

/// Per-cell areas and perimeters plus the total skeleton length on the torus.
#[derive(Debug, Clone)]
pub struct CellMetrics {
    pub areas: Vec<f64>,
    pub perimeters: Vec<f64>,
    pub interface_length: f64,
}

/// A junction: a topological vertex of degree >= 3 with, per incident edge
/// end, the edge id, whether the edge leaves from its tail here, and the
/// outgoing unit tangent.
#[derive(Debug, Clone)]
pub struct Junction {
    pub vertex: usize,
    pub ends: Vec<(usize, bool, Vec2)>,
}

impl PolyPartition {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn target_volumes(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.target_volume).collect()
    }

    pub fn frac_to_cart(&self, p: Vec2) -> Vec2 {
        self.lattice.to_cartesian(p)
    }

    pub fn cart_to_frac(&self, p: Vec2) -> Vec2 {
        self.lattice.to_fractional(p)
    }

    pub fn wrap_cart(&self, w: [i64; 2]) -> Vec2 {
        let (b1, b2) = self.lattice.basis2();
        b1 * w[0] as f64 + b2 * w[1] as f64
    }

    /// Cartesian polyline of an edge in the frame of its tail vertex:
    /// tail point, interior samples, head point (shifted by the wrap).
    pub fn edge_chain_cart(&self, e: usize) -> Vec<Vec2> {
        let edge = &self.edges[e];
        let mut out = Vec::with_capacity(edge.samples.len() + 2);
        out.push(self.frac_to_cart(self.vertices[edge.tail]));
        for &s in &edge.samples {
            out.push(self.frac_to_cart(s));
        }
        out.push(self.frac_to_cart(self.vertices[edge.head]) + self.wrap_cart(edge.wrap));
        out
    }

    /// Walk a cell loop, unwrapping across periodic boundaries. Returns the
    /// closed cartesian chain (without repeating the first point) together
    /// with the point index (DOF id) of every chain entry, and checks that
    /// the loop closes combinatorially with zero total wrap.
    pub fn cell_chain(&self, cell: usize) -> Result<Vec<(Vec2, usize)>> {
        let lp = &self.cells[cell].loop_edges;
        if lp.is_empty() {
            return Err(Error::InvalidPartition(format!("cell {cell}: empty loop")));
        }
        let first = lp[0];
        let mut cur = if first.forward { self.edges[first.edge].tail } else { self.edges[first.edge].head };
        let start = cur;
        let mut w = [0i64; 2];
        let mut chain = Vec::new();
        for se in lp {
            let e = &self.edges[se.edge];
            if se.forward {
                if e.tail != cur {
                    return Err(Error::InvalidPartition(format!(
                        "cell {cell}: edge {} tail {} does not continue from vertex {cur}",
                        se.edge, e.tail
                    )));
                }
                let off = self.wrap_cart(w);
                chain.push((self.frac_to_cart(self.vertices[e.tail]) + off, e.tail));
                for (k, &s) in e.samples.iter().enumerate() {
                    chain.push((self.frac_to_cart(s) + off, self.sample_dof(se.edge, k)));
                }
                cur = e.head;
                w = [w[0] + e.wrap[0], w[1] + e.wrap[1]];
            } else {
                if e.head != cur {
                    return Err(Error::InvalidPartition(format!(
                        "cell {cell}: edge {} head {} does not continue from vertex {cur}",
                        se.edge, e.head
                    )));
                }
                let off_head = self.wrap_cart(w);
                chain.push((self.frac_to_cart(self.vertices[e.head]) + off_head, e.head));
                let wt = [w[0] - e.wrap[0], w[1] - e.wrap[1]];
                let off = self.wrap_cart(wt);
                for (k, &s) in e.samples.iter().enumerate().rev() {
                    chain.push((self.frac_to_cart(s) + off, self.sample_dof(se.edge, k)));
                }
                cur = e.tail;
                w = wt;
            }
        }
        if cur != start || w != [0, 0] {
            return Err(Error::InvalidPartition(format!(
                "cell {cell}: loop does not close (ends at vertex {cur}, wrap {w:?})"
            )));
        }
        Ok(chain)
    }

    pub fn cell_polygon(&self, cell: usize) -> Result<Vec<Vec2>> {
        Ok(self.cell_chain(cell)?.into_iter().map(|(p, _)| p).collect())
    }

    pub fn cell_area(&self, cell: usize) -> Result<f64> {
        Ok(shoelace(&self.cell_polygon(cell)?))
    }

    pub fn cell_areas(&self) -> Result<Vec<f64>> {
        (0..self.cells.len()).map(|i| self.cell_area(i)).collect()
    }

    /// Anisotropic boundary length of a cell: for a polygon the integral of
    /// phi over the boundary is the sum of phi at the (unnormalized) outer
    /// edge normals, by 1-homogeneity.
    pub fn cell_perimeter(&self, cell: usize, a: &Anisotropy) -> Result<f64> {
        let poly = self.cell_polygon(cell)?;
        let n = poly.len();
        let mut acc = 0.0;
        for i in 0..n {
            let seg = poly[(i + 1) % n] - poly[i];
            if seg.norm_sq() > 0.0 {
                acc += a.eval(seg.perp())?;
            }
        }
        Ok(acc)
    }

    /// Total length of the edge skeleton on the torus (each edge once).
    pub fn interface_length(&self) -> f64 {
        (0..self.edges.len()).map(|e| polyline_length(&self.edge_chain_cart(e))).sum()
    }

    pub fn metrics(&self, a: &Anisotropy) -> Result<CellMetrics> {
        Ok(CellMetrics {
            areas: self.cell_areas()?,
            perimeters: (0..self.cells.len())
                .map(|i| self.cell_perimeter(i, a))
                .collect::<Result<_>>()?,
            interface_length: self.interface_length(),
        })
    }

    /// Check all structural invariants; returns an error describing the first
    /// violation found.
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidPartition("no cells".into()));
        }
        for (i, e) in self.edges.iter().enumerate() {
            if e.tail >= self.vertices.len() || e.head >= self.vertices.len() {
                return Err(Error::InvalidPartition(format!("edge {i}: vertex id out of range")));
            }
        }
        let mut fwd = vec![0usize; self.edges.len()];
        let mut bwd = vec![0usize; self.edges.len()];
        for c in &self.cells {
            for se in &c.loop_edges {
                if se.edge >= self.edges.len() {
                    return Err(Error::InvalidPartition("edge id out of range in loop".into()));
                }
                if se.forward {
                    fwd[se.edge] += 1;
                } else {
                    bwd[se.edge] += 1;
                }
            }
        }
        for e in 0..self.edges.len() {
            if fwd[e] != 1 || bwd[e] != 1 {
                return Err(Error::InvalidPartition(format!(
                    "edge {e}: used {} forward / {} backward times (expected 1/1)",
                    fwd[e], bwd[e]
                )));
            }
        }
        let mut total = 0.0;
        for i in 0..self.cells.len() {
            let poly = self.cell_polygon(i)?;
            if poly.len() < 3 {
                return Err(Error::InvalidPartition(format!("cell {i}: fewer than 3 boundary points")));
            }
            let area = shoelace(&poly);
            if area <= 1e-8 {
                return Err(Error::InvalidPartition(format!(
                    "cell {i}: area {area:.3e} not positive (CCW loops required, degenerate cells rejected)"
                )));
            }
            if self.cells[i].target_volume <= 0.0 {
                return Err(Error::InvalidPartition(format!("cell {i}: target volume must be positive")));
            }
            total += area;
        }
        let vol = self.lattice.volume();
        if (total - vol).abs() > 1e-9 {
            return Err(Error::InvalidPartition(format!(
                "cell areas sum to {total} but lattice volume is {vol}"
            )));
        }
        Ok(())
    }

    // ---- point (DOF) indexing: vertices first, then edge samples in order --

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    fn sample_base(&self, edge: usize) -> usize {
        let mut base = self.vertices.len();
        for e in &self.edges[..edge] {
            base += e.samples.len();
        }
        base
    }

    pub fn sample_dof(&self, edge: usize, k: usize) -> usize {
        self.sample_base(edge) + k
    }

    pub fn point_count(&self) -> usize {
        self.vertices.len() + self.edges.iter().map(|e| e.samples.len()).sum::<usize>()
    }

    /// All point positions (fractional), in DOF order.
    pub fn points(&self) -> Vec<Vec2> {
        let mut out = self.vertices.clone();
        for e in &self.edges {
            out.extend_from_slice(&e.samples);
        }
        out
    }

    pub fn set_points(&mut self, pts: &[Vec2]) {
        assert_eq!(pts.len(), self.point_count());
        let nv = self.vertices.len();
        self.vertices.copy_from_slice(&pts[..nv]);
        let mut k = nv;
        for e in &mut self.edges {
            let n = e.samples.len();
            e.samples.copy_from_slice(&pts[k..k + n]);
            k += n;
        }
    }

    /// Gradient of each cell area with respect to the cartesian position of
    /// each DOF (summed over all periodic copies appearing in the loop).
    pub fn area_gradients(&self) -> Result<Vec<Vec<Vec2>>> {
        let np = self.point_count();
        let mut out = vec![vec![Vec2::ZERO; np]; self.cells.len()];
        for (ci, grad) in out.iter_mut().enumerate() {
            let chain = self.cell_chain(ci)?;
            let n = chain.len();
            for i in 0..n {
                let prev = chain[(i + n - 1) % n].0;
                let next = chain[(i + 1) % n].0;
                grad[chain[i].1] += (next - prev).perp() * 0.5;
            }
        }
        Ok(out)
    }

    // ---- canonical realization of the fundamental domain -------------------

    /// Deterministic BFS assignment of an integer lattice offset to every
    /// cell so that the translated cells form one connected realization of
    /// the fundamental domain. Edges whose two incident cell copies do not
    /// meet in this realization lie on the realization boundary.
    pub fn realization(&self) -> Result<(Vec<[i64; 2]>, Vec<usize>)> {
        // Record for every edge its two directed uses: (cell, tail-frame wrap).
        let mut uses: Vec<Vec<(usize, [i64; 2])>> = vec![Vec::new(); self.edges.len()];
        for ci in 0..self.cells.len() {
            let lp = &self.cells[ci].loop_edges;
            let first = lp[0];
            let mut cur = if first.forward { self.edges[first.edge].tail } else { self.edges[first.edge].head };
            let mut w = [0i64; 2];
            for se in lp {
                let e = &self.edges[se.edge];
                if se.forward {
                    debug_assert_eq!(e.tail, cur);
                    uses[se.edge].push((ci, w));
                    cur = e.head;
                    w = [w[0] + e.wrap[0], w[1] + e.wrap[1]];
                } else {
                    debug_assert_eq!(e.head, cur);
                    let wt = [w[0] - e.wrap[0], w[1] - e.wrap[1]];
                    uses[se.edge].push((ci, wt));
                    cur = e.tail;
                    w = wt;
                }
            }
        }
        let n = self.cells.len();
        let mut offset: Vec<Option<[i64; 2]>> = vec![None; n];
        offset[0] = Some([0, 0]);
        let mut queue = std::collections::VecDeque::from([0usize]);
        // Cell adjacency through shared edges, scanned in edge-id order.
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (eid, u) in uses.iter().enumerate() {
            for &(c, _) in u {
                incident[c].push(eid);
            }
        }
        while let Some(c) = queue.pop_front() {
            let oc = offset[c].unwrap();
            for &eid in &incident[c] {
                let u = &uses[eid];
                debug_assert_eq!(u.len(), 2);
                let (c1, w1) = u[0];
                let (c2, w2) = u[1];
                let (other, wo, ws) = if c1 == c { (c2, w2, w1) } else { (c1, w1, w2) };
                if offset[other].is_none() {
                    offset[other] =
                        Some([oc[0] + ws[0] - wo[0], oc[1] + ws[1] - wo[1]]);
                    queue.push_back(other);
                }
            }
        }
        let offsets: Vec<[i64; 2]> = offset
            .into_iter()
            .enumerate()
            .map(|(c, o)| o.ok_or_else(|| Error::InvalidPartition(format!("cell {c} unreachable in adjacency graph"))))
            .collect::<Result<_>>()?;
        let mut broken = Vec::new();
        for (eid, u) in uses.iter().enumerate() {
            let (c1, w1) = u[0];
            let (c2, w2) = u[1];
            let p1 = [offsets[c1][0] + w1[0], offsets[c1][1] + w1[1]];
            let p2 = [offsets[c2][0] + w2[0], offsets[c2][1] + w2[1]];
            if p1 != p2 {
                broken.push(eid);
            }
        }
        Ok((offsets, broken))
    }

    /// Perimeter of the canonical fundamental-domain realization: every edge
    /// on the realization boundary appears on both sides, so contributes
    /// twice its length.
    pub fn domain_perimeter(&self) -> Result<f64> {
        let (_, broken) = self.realization()?;
        Ok(2.0 * broken.iter().map(|&e| polyline_length(&self.edge_chain_cart(e))).sum::<f64>())
    }

    // ---- junctions ---------------------------------------------------------

    /// Topological vertices of degree >= 3 with outgoing unit tangents taken
    /// from the first polyline segment of each incident edge end.
    pub fn junction_list(&self) -> Vec<Junction> {
        let mut ends: Vec<Vec<(usize, bool)>> = vec![Vec::new(); self.vertices.len()];
        for (eid, e) in self.edges.iter().enumerate() {
            ends[e.tail].push((eid, true));
            ends[e.head].push((eid, false));
        }
        let mut out = Vec::new();
        for (v, list) in ends.iter().enumerate() {
            if list.len() < 3 {
                continue;
            }
            let ends = list
                .iter()
                .map(|&(eid, at_tail)| {
                    let chain = self.edge_chain_cart(eid);
                    let t = if at_tail {
                        chain[1] - chain[0]
                    } else {
                        chain[chain.len() - 2] - chain[chain.len() - 1]
                    };
                    (eid, at_tail, t.normalized())
                })
                .collect();
            out.push(Junction { vertex: v, ends });
        }
        out
    }

    // ---- resampling and scaling -------------------------------------------

    /// Redistribute every edge's interior samples to `k` points at uniform
    /// arc length along the current polyline.
    pub fn resample(&mut self, k: usize) {
        for e in 0..self.edges.len() {
            let chain = self.edge_chain_cart(e);
            let mut cum = vec![0.0];
            for w in chain.windows(2) {
                cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
            }
            let total = *cum.last().unwrap();
            let mut samples = Vec::with_capacity(k);
            for j in 1..=k {
                let target = total * j as f64 / (k + 1) as f64;
                let idx = match cum.binary_search_by(|c| c.partial_cmp(&target).unwrap()) {
                    Ok(i) => i.min(chain.len() - 2),
                    Err(i) => i.saturating_sub(1).min(chain.len() - 2),
                };
                let seg = cum[idx + 1] - cum[idx];
                let t = if seg > 0.0 { (target - cum[idx]) / seg } else { 0.0 };
                let p = chain[idx] + (chain[idx + 1] - chain[idx]) * t;
                samples.push(self.cart_to_frac(p));
            }
            self.edges[e].samples = samples;
        }
    }

    /// Scale the whole configuration (lattice and geometry) by t > 0;
    /// fractional coordinates are unchanged, target volumes scale by t^2.
    pub fn scaled(&self, t: f64) -> PolyPartition {
        let mut out = self.clone();
        out.lattice = Lattice::new(self.lattice.basis().map(|x| x * t)).unwrap();
        for c in &mut out.cells {
            c.target_volume *= t * t;
        }
        out
    }

    // ---- local perturbations ----------------------------------------------

    /// Torus distance from a point (canonical cartesian position) to a
    /// center, together with the nearest periodic representative.
    pub fn torus_nearest(&self, p: Vec2, center: Vec2) -> (f64, Vec2) {
        let mut best = (f64::INFINITY, p);
        for i in -2..=2i64 {
            for j in -2..=2i64 {
                let q = p + self.wrap_cart([i, j]);
                let d = (q - center).norm();
                if d < best.0 {
                    best = (d, q);
                }
            }
        }
        best
    }

    /// Apply a displacement field supported strictly inside the ball
    /// B_radius(center); if `volume_preserving`, a corrective in-ball
    /// displacement restores all cell areas to their prior values.
    pub fn local_perturbation<F>(
        &self,
        center: Vec2,
        radius: f64,
        field: F,
        volume_preserving: bool,
    ) -> Result<PolyPartition>
    where
        F: Fn(Vec2) -> Vec2,
    {
        let rho = self.lattice.packing_radius()?;
        if radius >= rho / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "perturbation radius {radius} must be < rho_G/2 = {}",
                rho / 2.0
            )));
        }
        let pts = self.points();
        let mut moved = self.clone();
        let mut new_pts = pts.clone();
        let mut movable = Vec::new();
        for (i, &pf) in pts.iter().enumerate() {
            let p = self.frac_to_cart(pf);
            let (d, rep) = self.torus_nearest(p, center);
            let disp = field(rep);
            if d >= radius {
                if disp.norm() > 1e-14 {
                    return Err(Error::InvalidParameter(
                        "displacement field not supported inside the ball".into(),
                    ));
                }
                continue;
            }
            movable.push((i, d, rep));
            new_pts[i] = pf + self.cart_to_frac(disp);
        }
        moved.set_points(&new_pts);
        if volume_preserving {
            let targets = self.cell_areas()?;
            moved.restore_areas(&targets, &movable, radius, center)?;
        }
        moved.validate()?;
        Ok(moved)
    }

    /// Newton iteration pushing cell areas back to `targets` by a minimum
    /// norm displacement of the listed points, weighted to vanish at the
    /// ball boundary.
    fn restore_areas(
        &mut self,
        targets: &[f64],
        movable: &[(usize, f64, Vec2)],
        radius: f64,
        center: Vec2,
    ) -> Result<()> {
        use nalgebra::{DMatrix, DVector};
        let n = self.cells.len();
        for _ in 0..60 {
            let areas = self.cell_areas()?;
            let resid: Vec<f64> = (0..n).map(|i| targets[i] - areas[i]).collect();
            if resid.iter().all(|r| r.abs() < 1e-13) {
                return Ok(());
            }
            let grads = self.area_gradients()?;
            // Weight (1 - (d/r)^2)^2 so corrections stay supported in the ball.
            let weights: Vec<f64> = movable
                .iter()
                .map(|&(i, _, _)| {
                    let p = self.frac_to_cart(self.points()[i]);
                    let (d, _) = self.torus_nearest(p, center);
                    let t = (d / radius).min(1.0);
                    (1.0 - t * t).powi(2)
                })
                .collect();
            let m = movable.len();
            let mut j = DMatrix::zeros(n, 2 * m);
            for (row, grad) in grads.iter().enumerate() {
                for (col, (&(i, _, _), &w)) in movable.iter().zip(weights.iter()).enumerate() {
                    j[(row, 2 * col)] = grad[i].x * w;
                    j[(row, 2 * col + 1)] = grad[i].y * w;
                }
            }
            let jt = j.transpose();
            let gram = &j * &jt;
            let rhs = DVector::from_vec(resid);
            let svd = gram.svd(true, true);
            let y = svd
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Numerical(format!("area restoration solve failed: {e}")))?;
            let step = jt * y;
            let mut pts = self.points();
            for (col, (&(i, _, _), &w)) in movable.iter().zip(weights.iter()).enumerate() {
                let dc = Vec2::new(step[2 * col], step[2 * col + 1]) * w;
                pts[i] += self.cart_to_frac(dc);
            }
            self.set_points(&pts);
        }
        let areas = self.cell_areas()?;
        let worst = (0..n).map(|i| (targets[i] - areas[i]).abs()).fold(0.0, f64::max);
        if worst > 1e-10 {
            return Err(Error::Numerical(format!(
                "volume correction did not converge (residual {worst:.3e})"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
pub mod testutil {
    use super::*;

    /// Single square cell covering the Z^2 torus: one vertex, two wrap loops.
    pub fn square_torus() -> PolyPartition {
        let lattice = Lattice::square(1.0);
        PolyPartition {
            lattice,
            vertices: vec![Vec2::ZERO],
            edges: vec![
                Edge { tail: 0, head: 0, wrap: [1, 0], samples: vec![] },
                Edge { tail: 0, head: 0, wrap: [0, 1], samples: vec![] },
            ],
            cells: vec![Cell {
                loop_edges: vec![
                    SignedEdge { edge: 0, forward: true },
                    SignedEdge { edge: 1, forward: true },
                    SignedEdge { edge: 0, forward: false },
                    SignedEdge { edge: 1, forward: false },
                ],
                target_volume: 1.0,
            }],
        }
    }

    /// Edge length of the unit-area regular hexagon.
    pub fn hex_edge() -> f64 {
        (2.0 / (3.0 * 3f64.sqrt())).sqrt()
    }

    /// Single regular unit-area hexagon cell on the hexagon-center lattice
    /// (flat-top hexagon; two vertex classes, three edge classes).
    pub fn hex_torus() -> PolyPartition {
        let l = hex_edge();
        let h = l * 3f64.sqrt() / 2.0;
        let lattice =
            Lattice::from_cols_2d(Vec2::new(1.5 * l, h), Vec2::new(0.0, 3f64.sqrt() * l)).unwrap();
        let a = Vec2::new(l, 0.0);
        let b = Vec2::new(0.5 * l, h);
        let mut p = PolyPartition {
            lattice,
            vertices: vec![Vec2::ZERO; 2],
            edges: vec![
                Edge { tail: 0, head: 1, wrap: [0, 0], samples: vec![] },
                Edge { tail: 1, head: 0, wrap: [-1, 1], samples: vec![] },
                Edge { tail: 0, head: 1, wrap: [0, -1], samples: vec![] },
            ],
            cells: vec![Cell {
                loop_edges: vec![
                    SignedEdge { edge: 0, forward: true },
                    SignedEdge { edge: 1, forward: true },
                    SignedEdge { edge: 2, forward: true },
                    SignedEdge { edge: 0, forward: false },
                    SignedEdge { edge: 1, forward: false },
                    SignedEdge { edge: 2, forward: false },
                ],
                target_volume: 1.0,
            }],
        };
        p.vertices[0] = p.cart_to_frac(a);
        p.vertices[1] = p.cart_to_frac(b);
        p
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn square_torus_metrics() {
        let p = square_torus();
        p.validate().unwrap();
        assert_abs_diff_eq!(p.cell_area(0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            p.cell_perimeter(0, &Anisotropy::Euclidean).unwrap(),
            4.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(p.cell_perimeter(0, &Anisotropy::Ell1).unwrap(), 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.interface_length(), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.domain_perimeter().unwrap(), 4.0, epsilon = 1e-15);
        // The single vertex is a degree-4 crossing of the two wrap loops.
        let js = p.junction_list();
        assert_eq!(js.len(), 1);
        assert_eq!(js[0].ends.len(), 4);
    }

    #[test]
    fn hex_torus_metrics() {
        let p = hex_torus();
        p.validate().unwrap();
        let l = hex_edge();
        assert_abs_diff_eq!(p.cell_area(0).unwrap(), 1.0, epsilon = 1e-12);
        let per = p.cell_perimeter(0, &Anisotropy::Euclidean).unwrap();
        assert_abs_diff_eq!(per, 6.0 * l, epsilon = 1e-12);
        assert_abs_diff_eq!(per, 2.0 * 12f64.powf(0.25), epsilon = 1e-12);
        assert_abs_diff_eq!(p.interface_length(), 3.0 * l, epsilon = 1e-12);
        // The realization is the hexagon itself: all three edges on its boundary.
        assert_abs_diff_eq!(p.domain_perimeter().unwrap(), 6.0 * l, epsilon = 1e-12);
        // Two degree-3 junctions with pairwise 120 degree tangents.
        let js = p.junction_list();
        assert_eq!(js.len(), 2);
        for j in &js {
            assert_eq!(j.ends.len(), 3);
            let mut angles: Vec<f64> = j.ends.iter().map(|(_, _, t)| t.angle()).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for k in 0..3 {
                let d = if k == 2 {
                    angles[0] + 2.0 * std::f64::consts::PI - angles[2]
                } else {
                    angles[k + 1] - angles[k]
                };
                assert_abs_diff_eq!(d, 2.0 * std::f64::consts::PI / 3.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn homogeneity_under_scaling() {
        let p = hex_torus();
        let q = p.scaled(2.5);
        q.validate().unwrap();
        assert_abs_diff_eq!(q.cell_area(0).unwrap(), 2.5 * 2.5, epsilon = 1e-11);
        assert_abs_diff_eq!(
            q.cell_perimeter(0, &Anisotropy::Euclidean).unwrap(),
            2.5 * p.cell_perimeter(0, &Anisotropy::Euclidean).unwrap(),
            epsilon = 1e-11
        );
    }

    #[test]
    fn resample_preserves_straight_edges() {
        let mut p = hex_torus();
        p.resample(7);
        p.validate().unwrap();
        assert_abs_diff_eq!(p.cell_area(0).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            p.cell_perimeter(0, &Anisotropy::Euclidean).unwrap(),
            6.0 * hex_edge(),
            epsilon = 1e-12
        );
        // Samples are evenly spaced along each (straight) edge.
        for e in 0..p.edges.len() {
            let chain = p.edge_chain_cart(e);
            assert_eq!(chain.len(), 9);
            let first = (chain[1] - chain[0]).norm();
            for w in chain.windows(2) {
                assert_abs_diff_eq!((w[1] - w[0]).norm(), first, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn validate_catches_bad_usage() {
        let mut p = square_torus();
        p.cells[0].loop_edges[2] = SignedEdge { edge: 0, forward: true };
        assert!(p.validate().is_err());
    }

    #[test]
    fn area_gradient_matches_finite_differences() {
        let mut p = hex_torus();
        p.resample(3);
        let grads = p.area_gradients().unwrap();
        let pts = p.points();
        let eps = 1e-6;
        for dof in 0..p.point_count() {
            for axis in 0..2 {
                // Perturb the fractional coordinate corresponding to a
                // cartesian unit step along the axis.
                let dc = if axis == 0 { Vec2::new(eps, 0.0) } else { Vec2::new(0.0, eps) };
                let df = p.cart_to_frac(dc);
                let mut plus = pts.clone();
                plus[dof] += df;
                let mut minus = pts.clone();
                minus[dof] -= df;
                let mut q = p.clone();
                q.set_points(&plus);
                let ap = q.cell_area(0).unwrap();
                q.set_points(&minus);
                let am = q.cell_area(0).unwrap();
                let fd = (ap - am) / (2.0 * eps);
                let an = if axis == 0 { grads[0][dof].x } else { grads[0][dof].y };
                assert_abs_diff_eq!(fd, an, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn local_perturbation_identity_and_support() {
        let p = hex_torus();
        let center = p.frac_to_cart(Vec2::new(0.3, 0.3));
        let q = p.local_perturbation(center, 0.2, |_| Vec2::ZERO, false).unwrap();
        assert_eq!(p, q);
        // A field that does not vanish outside the ball is rejected.
        assert!(p
            .local_perturbation(center, 0.2, |_| Vec2::new(0.01, 0.0), false)
            .is_err());
    }

    #[test]
    fn volume_preserving_bump_restores_area() {
        let mut p = hex_torus();
        p.resample(12);
        // Center a small ball on the midpoint of edge 0.
        let chain = p.edge_chain_cart(0);
        let center = chain[chain.len() / 2];
        let r = 0.2;
        let bump = move |x: Vec2| {
            let d = (x - center).norm();
            if d >= r {
                Vec2::ZERO
            } else {
                let w = (1.0 - (d / r).powi(2)).powi(2);
                Vec2::new(0.0, 0.03) * w
            }
        };
        let q = p.local_perturbation(center, r, bump, true).unwrap();
        assert_abs_diff_eq!(q.cell_area(0).unwrap(), 1.0, epsilon = 1e-10);
        // The bump lengthens the boundary: a strict perimeter increase.
        assert!(
            q.cell_perimeter(0, &Anisotropy::Euclidean).unwrap()
                > p.cell_perimeter(0, &Anisotropy::Euclidean).unwrap() + 1e-8
        );
    }

    #[test]
    fn tiling_closure_samples_covered_once() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let p = hex_torus();
        let poly = p.cell_polygon(0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        for _ in 0..4000 {
            let f = Vec2::new(rng.gen_range(-1.0..2.0), rng.gen_range(-1.0..2.0));
            let x = p.frac_to_cart(f);
            let mut count = 0;
            let mut near_boundary = false;
            for i in -2..=2i64 {
                for j in -2..=2i64 {
                    let shifted: Vec<Vec2> =
                        poly.iter().map(|&q| q + p.wrap_cart([i, j])).collect();
                    let n = shifted.len();
                    for k in 0..n {
                        let a = shifted[k];
                        let b = shifted[(k + 1) % n];
                        let t = ((x - a).dot(b - a) / (b - a).norm_sq()).clamp(0.0, 1.0);
                        if (x - (a + (b - a) * t)).norm() < 1e-6 {
                            near_boundary = true;
                        }
                    }
                    if crate::geom::point_in_polygon(x, &shifted) {
                        count += 1;
                    }
                }
            }
            if !near_boundary {
                assert_eq!(count, 1, "point {x:?} covered {count} times");
                tested += 1;
            }
        }
        assert!(tested > 3000);
    }
}
