//! Reference configurations: honeycomb rows, stretched-hexagon domains,
//! square/Wulff tilings, slab partitions of the parallelepiped, the two-block
//! competitor, and a seeded perturbation generator.

use crate::error::{Error, Result};
use crate::functionals::Anisotropy;
use crate::geom::Vec2;
use crate::lattice::Lattice;
use crate::poly::{Cell, Edge, PolyPartition, SignedEdge};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Edge length of the unit-area regular hexagon: (2 / (3 sqrt 3))^(1/2).
pub fn hex_edge() -> f64 {
    (2.0 / (3.0 * 3f64.sqrt())).sqrt()
}

/// Perimeter of the unit-area regular hexagon, 6 l = 2 * 12^(1/4).
pub fn hex_perimeter() -> f64 {
    6.0 * hex_edge()
}

/// Horizontal stretch turning the unit hexagon into one of area v:
/// v = 1 + sqrt(3) l x, so x = (v - 1) / (sqrt(3) l).
pub fn stretch_of_volume(v: f64) -> f64 {
    (v - 1.0) / (3f64.sqrt() * hex_edge())
}

/// Row of N area-v_i stretched hexagons sharing oblique edges, closed
/// periodically. The regular honeycomb is the special case v_i = 1.
///
/// Combinatorics per hexagon i (flat-top, center c_i, half-width stretch
/// x_i): two vertex classes P_i (right vertex) and Q_i (upper-right vertex),
/// three edge classes: upper-right oblique P_i -> Q_i, top edge
/// Q_i -> P_{i-1} (one step up), lower-right oblique P_i -> Q_i (one step
/// down). Each is used once per orientation, giving the usual hexagonal
/// tiling on the torus.
fn hex_row(volumes: &[f64]) -> Result<PolyPartition> {
    let n = volumes.len();
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one volume".into()));
    }
    for &v in volumes {
        if !(0.5 < v && v < 1.5) {
            return Err(Error::InvalidParameter(format!(
                "stretched-hexagon volume {v} outside (1/2, 3/2)"
            )));
        }
    }
    let sum: f64 = volumes.iter().sum();
    if (sum - n as f64).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "volumes must sum to N = {n}, got {sum}"
        )));
    }
    let l = hex_edge();
    let h = l * 3f64.sqrt() / 2.0;
    let xs: Vec<f64> = volumes.iter().map(|&v| stretch_of_volume(v)).collect();
    let lattice = Lattice::from_cols_2d(
        Vec2::new(1.5 * l * n as f64, n as f64 * h),
        Vec2::new(0.0, 2.0 * h),
    )?;
    // Centers: c_{i+1} - c_i = (3l/2 + (x_i + x_{i+1})/2, h).
    let mut centers = vec![Vec2::ZERO];
    for i in 0..n - 1 {
        let step = Vec2::new(1.5 * l + 0.5 * (xs[i] + xs[i + 1]), h);
        centers.push(centers[i] + step);
    }
    let mut part = PolyPartition {
        lattice,
        vertices: Vec::with_capacity(2 * n),
        edges: Vec::with_capacity(3 * n),
        cells: Vec::with_capacity(n),
    };
    // Vertex ids: P_i = 2i, Q_i = 2i + 1.
    for i in 0..n {
        let p = centers[i] + Vec2::new(l + 0.5 * xs[i], 0.0);
        let q = centers[i] + Vec2::new(0.5 * l + 0.5 * xs[i], h);
        part.vertices.push(part.cart_to_frac(p));
        part.vertices.push(part.cart_to_frac(q));
    }
    // Edge ids: e1_i = 3i (upper-right oblique), e2_i = 3i+1 (top),
    // e3_i = 3i+2 (lower-right oblique).
    for i in 0..n {
        let prev_wrap = if i == 0 { -1 } else { 0 };
        let prev = (i + n - 1) % n;
        part.edges.push(Edge { tail: 2 * i, head: 2 * i + 1, wrap: [0, 0], samples: vec![] });
        part.edges.push(Edge { tail: 2 * i + 1, head: 2 * prev, wrap: [prev_wrap, 1], samples: vec![] });
        part.edges.push(Edge { tail: 2 * i, head: 2 * i + 1, wrap: [0, -1], samples: vec![] });
    }
    for i in 0..n {
        let prev = (i + n - 1) % n;
        part.cells.push(Cell {
            loop_edges: vec![
                SignedEdge { edge: 3 * i, forward: true },
                SignedEdge { edge: 3 * i + 1, forward: true },
                SignedEdge { edge: 3 * prev + 2, forward: true },
                SignedEdge { edge: 3 * prev, forward: false },
                SignedEdge { edge: 3 * i + 1, forward: false },
                SignedEdge { edge: 3 * i + 2, forward: false },
            ],
            target_volume: volumes[i],
        });
    }
    part.validate()?;
    Ok(part)
}

/// N unit regular hexagons in a row on the hexagonal chain lattice.
pub fn honeycomb(n: usize) -> Result<PolyPartition> {
    hex_row(&vec![1.0; n])
}

/// Stretched-hexagon domain with prescribed areas v_i in (1/2, 3/2),
/// sum v_i = N; the half-perimeter sum is volume-independent.
pub fn stretched_hex_domain(volumes: &[f64]) -> Result<PolyPartition> {
    hex_row(volumes)
}

/// Product grid on the rectangle lattice (width, 0), (0, height):
/// column cuts `xcuts` and row cuts `ycuts` are strictly increasing fractions
/// starting at 0 (the end 1 is implicit). Cells labeled row-major bottom-up
/// with the given target volumes.
pub fn rect_grid(
    width: f64,
    height: f64,
    xcuts: &[f64],
    ycuts: &[f64],
    targets: &[f64],
) -> Result<PolyPartition> {
    let c = xcuts.len();
    let r = ycuts.len();
    if c == 0 || r == 0 || targets.len() != r * c {
        return Err(Error::InvalidParameter("rect_grid: bad cut/target sizes".into()));
    }
    let lattice = Lattice::from_cols_2d(Vec2::new(width, 0.0), Vec2::new(0.0, height))?;
    let vid = |i: usize, j: usize| i * c + j;
    let mut part = PolyPartition {
        lattice,
        vertices: Vec::with_capacity(r * c),
        edges: Vec::with_capacity(2 * r * c),
        cells: Vec::with_capacity(r * c),
    };
    for i in 0..r {
        for j in 0..c {
            part.vertices.push(Vec2::new(xcuts[j], ycuts[i]));
        }
    }
    // Horizontal edges h_{i,j} = i*c + j, vertical u_{i,j} = r*c + i*c + j.
    for i in 0..r {
        for j in 0..c {
            let wrap = if j + 1 == c { 1 } else { 0 };
            part.edges.push(Edge { tail: vid(i, j), head: vid(i, (j + 1) % c), wrap: [wrap, 0], samples: vec![] });
        }
    }
    for i in 0..r {
        for j in 0..c {
            let wrap = if i + 1 == r { 1 } else { 0 };
            part.edges.push(Edge { tail: vid(i, j), head: vid((i + 1) % r, j), wrap: [0, wrap], samples: vec![] });
        }
    }
    let h = |i: usize, j: usize| i * c + j;
    let u = |i: usize, j: usize| r * c + i * c + j;
    for i in 0..r {
        for j in 0..c {
            part.cells.push(Cell {
                loop_edges: vec![
                    SignedEdge { edge: h(i, j), forward: true },
                    SignedEdge { edge: u(i, (j + 1) % c), forward: true },
                    SignedEdge { edge: h((i + 1) % r, j), forward: false },
                    SignedEdge { edge: u(i, j), forward: false },
                ],
                target_volume: targets[i * c + j],
            });
        }
    }
    part.validate()?;
    Ok(part)
}

/// Square/Wulff tiling for the ell-1 anisotropy. Supported inputs: equal
/// volumes (laid out as a near-square grid of squares) and volume vectors
/// made of constant runs whose rows tile a common width; anything else is
/// reported infeasible.
pub fn wulff_tiling(a: &Anisotropy, volumes: &[f64]) -> Result<PolyPartition> {
    if *a != Anisotropy::Ell1 {
        return Err(Error::InvalidParameter(
            "wulff_tiling: only the ell-1 anisotropy has a certified square tiling".into(),
        ));
    }
    let n = volumes.len();
    if n == 0 || volumes.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("volumes must be positive".into()));
    }
    let equal = volumes.iter().all(|&v| (v - volumes[0]).abs() < 1e-12);
    if equal {
        let side = volumes[0].sqrt();
        // Largest divisor of n not exceeding sqrt(n), for a compact grid.
        let mut rows = 1;
        for d in 1..=n {
            if d * d <= n && n % d == 0 {
                rows = d;
            }
        }
        let cols = n / rows;
        let xcuts: Vec<f64> = (0..cols).map(|j| j as f64 / cols as f64).collect();
        let ycuts: Vec<f64> = (0..rows).map(|i| i as f64 / rows as f64).collect();
        return rect_grid(cols as f64 * side, rows as f64 * side, &xcuts, &ycuts, volumes);
    }
    // Constant runs become rows of equal squares; all rows must share the
    // total width.
    let mut runs: Vec<(f64, usize)> = Vec::new();
    for &v in volumes {
        match runs.last_mut() {
            Some((rv, k)) if (*rv - v).abs() < 1e-12 => *k += 1,
            _ => runs.push((v, 1)),
        }
    }
    let width = runs[0].0.sqrt() * runs[0].1 as f64;
    let mut heights = Vec::new();
    for &(v, k) in &runs {
        let s = v.sqrt();
        if (s * k as f64 - width).abs() > 1e-9 {
            return Err(Error::Infeasible(format!(
                "row of {k} squares with side {s} does not tile width {width}"
            )));
        }
        heights.push(s);
    }
    let total_h: f64 = heights.iter().sum();
    // Non-uniform rows would need T-junction vertices; restrict to rows with
    // a common column count (then the cuts align into a product grid).
    let cols = runs[0].1;
    if runs.iter().any(|&(_, k)| k != cols) {
        return Err(Error::Infeasible(
            "rows with different square counts do not align into a grid".into(),
        ));
    }
    let xcuts: Vec<f64> = (0..cols).map(|j| j as f64 / cols as f64).collect();
    let mut ycuts = vec![0.0];
    let mut acc = 0.0;
    for hgt in &heights[..heights.len() - 1] {
        acc += hgt / total_h;
        ycuts.push(acc);
    }
    rect_grid(width, total_h, &xcuts, &ycuts, volumes)
}

/// Slab partition of the fundamental parallelepiped: cells are the bands
/// between cuts at constant second-basis fraction, with volumes prescribed
/// exactly (band volume is linear in the cut height).
pub fn slab_partition(lattice: &Lattice, volumes: &[f64]) -> Result<PolyPartition> {
    let m = volumes.len();
    if m == 0 || volumes.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidParameter("volumes must be positive".into()));
    }
    let vol = lattice.volume();
    let sum: f64 = volumes.iter().sum();
    if (sum - vol).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "volumes sum to {sum}, lattice volume is {vol}"
        )));
    }
    let (b1, b2) = lattice.basis2();
    // Ensure a positively oriented basis so band loops are CCW.
    let lattice = if b1.cross(b2) < 0.0 {
        Lattice::from_cols_2d(b2, b1)?
    } else {
        lattice.clone()
    };
    let mut cuts = vec![0.0];
    for &v in &volumes[..m - 1] {
        let last = *cuts.last().unwrap();
        cuts.push(last + v / vol);
    }
    let mut part = PolyPartition {
        lattice,
        vertices: (0..m).map(|i| Vec2::new(0.0, cuts[i])).collect(),
        edges: Vec::with_capacity(2 * m),
        cells: Vec::with_capacity(m),
    };
    // h_i: full wrap line at cut i; u_i: seam from cut i up to cut i+1.
    for i in 0..m {
        part.edges.push(Edge { tail: i, head: i, wrap: [1, 0], samples: vec![] });
    }
    for i in 0..m {
        let wrap = if i + 1 == m { 1 } else { 0 };
        part.edges.push(Edge { tail: i, head: (i + 1) % m, wrap: [0, wrap], samples: vec![] });
    }
    for i in 0..m {
        part.cells.push(Cell {
            loop_edges: vec![
                SignedEdge { edge: i, forward: true },
                SignedEdge { edge: m + i, forward: true },
                SignedEdge { edge: (i + 1) % m, forward: false },
                SignedEdge { edge: m + i, forward: false },
            ],
            target_volume: volumes[i],
        });
    }
    part.validate()?;
    Ok(part)
}

/// Two-block competitor on the lattice N Z^2 (N even, delta in (0, 1/2)):
/// N^2/2 bricks of area 1-delta fill [0, (1-delta)N/2] x [0, N], N^2/2
/// bricks of area 1+delta fill the rest. Returns the partition, its measured
/// energy (mu = 0), and the analytic bound
/// (sqrt(1-delta)+sqrt(1+delta)) P(H) N^2/4 + C N with C measured from the
/// construction itself.
pub struct TwoBlock {
    pub partition: PolyPartition,
    pub measured_energy: f64,
    pub leading_term: f64,
    pub c_measured: f64,
    pub upper_bound: f64,
}

pub fn twoblock_competitor(n: usize, delta: f64) -> Result<TwoBlock> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParameter("N must be a positive even integer".into()));
    }
    if !(0.0 < delta && delta < 0.5) {
        return Err(Error::InvalidParameter("delta must lie in (0, 1/2)".into()));
    }
    let nf = n as f64;
    let half = n / 2;
    // Column cuts: N/2 bricks of width 1-delta, then N/2 of width 1+delta;
    // rows of height 1.
    let mut xcuts = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut targets_row = Vec::with_capacity(n);
    for _ in 0..half {
        xcuts.push(acc / nf);
        acc += 1.0 - delta;
        targets_row.push(1.0 - delta);
    }
    for _ in 0..half {
        xcuts.push(acc / nf);
        acc += 1.0 + delta;
        targets_row.push(1.0 + delta);
    }
    let ycuts: Vec<f64> = (0..n).map(|i| i as f64 / nf).collect();
    let mut targets = Vec::with_capacity(n * n);
    for _ in 0..n {
        targets.extend_from_slice(&targets_row);
    }
    let partition = rect_grid(nf, nf, &xcuts, &ycuts, &targets)?;
    let metrics = partition.metrics(&Anisotropy::Euclidean)?;
    let measured_energy = 0.5 * metrics.perimeters.iter().sum::<f64>();
    let leading_term =
        ((1.0 - delta).sqrt() + (1.0 + delta).sqrt()) * hex_perimeter() * nf * nf / 4.0;
    let c_measured = (measured_energy - leading_term) / nf;
    Ok(TwoBlock {
        partition,
        measured_energy,
        leading_term,
        c_measured,
        upper_bound: leading_term + c_measured * nf,
    })
}

/// Deterministic random displacement of all vertices and samples, clamped to
/// 30% of the shortest incident polyline segment so edges cannot cross.
pub fn perturb(p: &PolyPartition, amplitude: f64, seed: u64) -> Result<PolyPartition> {
    if amplitude < 0.0 {
        return Err(Error::InvalidParameter("amplitude must be >= 0".into()));
    }
    if amplitude == 0.0 {
        return Ok(p.clone());
    }
    // Shortest incident segment per DOF, over all edge chains.
    let mut min_seg = vec![f64::INFINITY; p.point_count()];
    for (eid, edge) in p.edges.iter().enumerate() {
        let chain = p.edge_chain_cart(eid);
        let mut dofs = vec![edge.tail];
        for k in 0..edge.samples.len() {
            dofs.push(p.sample_dof(eid, k));
        }
        dofs.push(edge.head);
        for w in 0..chain.len() - 1 {
            let len = (chain[w + 1] - chain[w]).norm();
            min_seg[dofs[w]] = min_seg[dofs[w]].min(len);
            min_seg[dofs[w + 1]] = min_seg[dofs[w + 1]].min(len);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = p.clone();
    let mut pts = p.points();
    for (i, pt) in pts.iter_mut().enumerate() {
        let theta: f64 = rng.gen_range(0.0..2.0 * std::f64::consts::PI);
        let mag: f64 = rng.gen_range(0.0..1.0) * amplitude;
        let mag = mag.min(0.3 * min_seg[i]);
        let d = Vec2::new(theta.cos(), theta.sin()) * mag;
        *pt += p.cart_to_frac(d);
    }
    out.set_points(&pts);
    out.validate().map_err(|e| {
        Error::InvalidParameter(format!("perturbation produced an invalid partition: {e}"))
    })?;
    Ok(out)
}
