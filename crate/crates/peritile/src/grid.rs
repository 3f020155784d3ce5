//! Label-grid partitions of the fundamental cell: discrete perimeters
//! (classical and non-local), indecomposable components, saturation and the
//! merge surgery, plus diameter and Hausdorff diagnostics.

use crate::error::{Error, Result};
use crate::functionals::Kernel;
use crate::geom::{pairwise_sum, point_in_polygon, Vec2};
use crate::lattice::Lattice;

/// Integer label field on the n x n pixel grid over the fundamental
/// parallelepiped; pixel (row, col) is the image of the square
/// [col/n, (col+1)/n) x [row/n, (row+1)/n) under the basis map, stored
/// row-major. Labels run 1..=num_labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPartition {
    pub lattice: Lattice,
    pub resolution: usize,
    pub labels: Vec<u32>,
    pub num_labels: usize,
}

/// Indecomposable 4-connected components per label, largest first.
#[derive(Debug, Clone)]
pub struct ComponentDecomposition {
    pub components: Vec<Vec<usize>>,
}

impl GridPartition {
    pub fn new(lattice: Lattice, resolution: usize, labels: Vec<u32>, num_labels: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidParameter("resolution must be positive".into()));
        }
        if labels.len() != resolution * resolution {
            return Err(Error::InvalidParameter(format!(
                "expected {} labels, got {}",
                resolution * resolution,
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l == 0 || l as usize > num_labels) {
            return Err(Error::InvalidParameter(format!(
                "labels must lie in 1..={num_labels}"
            )));
        }
        Ok(GridPartition { lattice, resolution, labels, num_labels })
    }

    pub fn pixel_volume(&self) -> f64 {
        self.lattice.volume() / (self.resolution * self.resolution) as f64
    }

    pub fn volume(&self, label: u32) -> f64 {
        self.labels.iter().filter(|&&l| l == label).count() as f64 * self.pixel_volume()
    }

    pub fn volumes(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.num_labels];
        for &l in &self.labels {
            counts[l as usize - 1] += 1;
        }
        counts.into_iter().map(|c| c as f64 * self.pixel_volume()).collect()
    }

    fn basis_cols(&self) -> (Vec2, Vec2) {
        self.lattice.basis2()
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.resolution + col
    }

    pub fn pixel_center(&self, idx: usize) -> Vec2 {
        let n = self.resolution;
        let (b1, b2) = self.basis_cols();
        let (row, col) = (idx / n, idx % n);
        b1 * ((col as f64 + 0.5) / n as f64) + b2 * ((row as f64 + 0.5) / n as f64)
    }

    /// The four torus neighbors of a pixel: (index, face length).
    /// Horizontal steps cross a face parallel to b2, vertical steps one
    /// parallel to b1.
    pub fn neighbors(&self, idx: usize) -> [(usize, f64); 4] {
        let n = self.resolution;
        let (row, col) = (idx / n, idx % n);
        let (b1, b2) = self.basis_cols();
        let (fh, fv) = (b2.norm() / n as f64, b1.norm() / n as f64);
        [
            (self.index(row, (col + 1) % n), fh),
            (self.index(row, (col + n - 1) % n), fh),
            (self.index((row + 1) % n, col), fv),
            (self.index((row + n - 1) % n, col), fv),
        ]
    }

    /// Discrete classical perimeter of a label: total length of pixel faces
    /// separating it from other labels (periodic wrap).
    pub fn grid_perimeter(&self, label: u32) -> Result<f64> {
        self.check_label(label)?;
        Ok(self.pixel_set_perimeter(|idx| self.labels[idx] == label))
    }

    fn pixel_set_perimeter<F: Fn(usize) -> bool>(&self, inside: F) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.labels.len() {
            if !inside(idx) {
                continue;
            }
            for (nb, face) in self.neighbors(idx) {
                if !inside(nb) {
                    acc += face;
                }
            }
        }
        acc
    }

    /// Sum of the discrete perimeters of all labels (each interface counted
    /// twice, once per side).
    pub fn total_perimeter(&self) -> f64 {
        (1..=self.num_labels as u32).map(|l| self.grid_perimeter(l).unwrap()).sum()
    }

    fn check_label(&self, label: u32) -> Result<()> {
        if label == 0 || label as usize > self.num_labels {
            return Err(Error::InvalidParameter(format!("unknown label {label}")));
        }
        Ok(())
    }

    /// Diameter of the fundamental parallelepiped.
    pub fn cell_diameter(&self) -> f64 {
        let (b1, b2) = self.basis_cols();
        (b1 + b2).norm().max((b1 - b2).norm())
    }

    /// Periodized kernel table K_per(dz) = sum over |g| <= R of K(dz + g),
    /// indexed by raw pixel differences (drow, dcol) in (-n, n)^2. Evenness
    /// K_per(-dz) = K_per(dz) holds bitwise: values are computed on a
    /// canonical half and mirrored.
    fn kernel_table(&self, k: &Kernel) -> Result<Vec<f64>> {
        let n = self.resolution as i64;
        let side = 2 * n - 1;
        let (b1, b2) = self.basis_cols();
        let shifts: Vec<Vec2> = self
            .lattice
            .points_in_ball(k.truncation_radius)?
            .into_iter()
            .map(|g| b1 * g.coeffs[0] as f64 + b2 * g.coeffs[1] as f64)
            .collect();
        let mut table = vec![0.0; (side * side) as usize];
        let at = |dr: i64, dc: i64| ((dr + n - 1) * side + (dc + n - 1)) as usize;
        for dr in 0..n {
            for dc in -(n - 1)..n {
                if dr == 0 && dc < 0 {
                    continue;
                }
                if dr == 0 && dc == 0 {
                    continue;
                }
                let dz = b1 * (dc as f64 / n as f64) + b2 * (dr as f64 / n as f64);
                let terms: Vec<f64> = shifts
                    .iter()
                    .map(|&g| {
                        let x = dz + g;
                        if x.norm_sq() == 0.0 {
                            0.0
                        } else {
                            k.eval(x)
                        }
                    })
                    .collect();
                let v = pairwise_sum(&terms);
                table[at(dr, dc)] = v;
                table[at(-dr, -dc)] = v;
            }
        }
        Ok(table)
    }

    /// Non-local perimeter of a label: midpoint-rule double sum of the
    /// periodized kernel over (inside, outside) pixel pairs, with a reported
    /// tail-error certificate |E| * kernel_tail(R - diam(cell)).
    pub fn nonlocal_perimeter(&self, label: u32, k: &Kernel) -> Result<(f64, f64)> {
        self.check_label(label)?;
        let diam = self.cell_diameter();
        if k.truncation_radius <= diam {
            return Err(Error::InvalidParameter(format!(
                "truncation radius {} must exceed the cell diameter {diam}",
                k.truncation_radius
            )));
        }
        let n = self.resolution as i64;
        let side = 2 * n - 1;
        let table = self.kernel_table(k)?;
        let inside: Vec<usize> =
            (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect();
        let outside: Vec<usize> =
            (0..self.labels.len()).filter(|&i| self.labels[i] != label).collect();
        let h4 = self.pixel_volume() * self.pixel_volume();
        let mut rows = Vec::with_capacity(inside.len());
        for &p in &inside {
            let (pr, pc) = ((p as i64) / n, (p as i64) % n);
            let terms: Vec<f64> = outside
                .iter()
                .map(|&q| {
                    let (qr, qc) = ((q as i64) / n, (q as i64) % n);
                    table[((pr - qr + n - 1) * side + (pc - qc + n - 1)) as usize]
                })
                .collect();
            rows.push(pairwise_sum(&terms));
        }
        let value = pairwise_sum(&rows) * h4;
        let tail = self.volume(label) * k.tail(k.truncation_radius - diam)?;
        Ok((value, tail))
    }

    /// 4-connected components of a label on the torus, sorted by decreasing
    /// pixel count, ties by smallest contained pixel index.
    pub fn decompose(&self, label: u32) -> Result<ComponentDecomposition> {
        self.check_label(label)?;
        let comps = self.components(|idx| self.labels[idx] == label, false);
        Ok(ComponentDecomposition { components: comps })
    }

    /// Connected components of an arbitrary pixel predicate; 4-connectivity
    /// by default, 8-connectivity when `diag` is set (used for complements).
    fn components<F: Fn(usize) -> bool>(&self, inside: F, diag: bool) -> Vec<Vec<usize>> {
        let n = self.resolution;
        let total = n * n;
        let mut seen = vec![false; total];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for start in 0..total {
            if seen[start] || !inside(start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(idx) = stack.pop() {
                comp.push(idx);
                let (row, col) = (idx / n, idx % n);
                let push = |r: usize, c: usize, stack: &mut Vec<usize>, seen: &mut Vec<bool>| {
                    let j = self.index(r % n, c % n);
                    if !seen[j] && inside(j) {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                push(row, col + 1, &mut stack, &mut seen);
                push(row, col + n - 1, &mut stack, &mut seen);
                push(row + 1, col, &mut stack, &mut seen);
                push(row + n - 1, col, &mut stack, &mut seen);
                if diag {
                    push(row + 1, col + 1, &mut stack, &mut seen);
                    push(row + 1, col + n - 1, &mut stack, &mut seen);
                    push(row + n - 1, col + 1, &mut stack, &mut seen);
                    push(row + n - 1, col + n - 1, &mut stack, &mut seen);
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
        comps
    }

    /// Saturation: the component plus all of its holes (8-connected
    /// complement components other than the largest one).
    pub fn saturate(&self, component: &[usize]) -> Result<Vec<usize>> {
        let total = self.resolution * self.resolution;
        let mut inside = vec![false; total];
        for &idx in component {
            inside[idx] = true;
        }
        if component.len() == total {
            return Err(Error::InvalidParameter("component covers the whole torus".into()));
        }
        let comp_of_complement = self.components(|i| !inside[i], true);
        let mut out: Vec<usize> = component.to_vec();
        for hole in comp_of_complement.iter().skip(1) {
            out.extend_from_slice(hole);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Is a label simple (one component, no holes)?
    pub fn is_simple(&self, label: u32) -> Result<bool> {
        let dec = self.decompose(label)?;
        if dec.components.len() != 1 {
            return Ok(false);
        }
        let sat = self.saturate(&dec.components[0])?;
        Ok(sat.len() == dec.components[0].len())
    }

    /// One merge step: a secondary component of some label adjacent to the
    /// primary component of another label is relabeled into the latter,
    /// subject to the saturation side condition; the total discrete
    /// perimeter strictly decreases. Returns the (possibly unchanged) grid
    /// and whether a merge was applied.
    pub fn modify_merge(&self) -> Result<(GridPartition, bool)> {
        let decs: Vec<ComponentDecomposition> =
            (1..=self.num_labels as u32).map(|l| self.decompose(l)).collect::<Result<_>>()?;
        // Nothing to do if every label is simple.
        if (1..=self.num_labels as u32).all(|l| self.is_simple(l).unwrap_or(false)) {
            return Ok((self.clone(), false));
        }
        let mut membership = vec![false; self.labels.len()];
        for (j, dec) in decs.iter().enumerate() {
            if dec.components.len() < 2 {
                continue;
            }
            for comp in dec.components.iter().skip(1) {
                // Labels whose primary component shares a face with this one.
                for m in membership.iter_mut() {
                    *m = false;
                }
                for &idx in comp {
                    membership[idx] = true;
                }
                let mut adjacent: Vec<usize> = Vec::new();
                for &idx in comp {
                    for (nb, _) in self.neighbors(idx) {
                        if membership[nb] {
                            continue;
                        }
                        let li = self.labels[nb] as usize - 1;
                        if li == j || adjacent.contains(&li) {
                            continue;
                        }
                        if decs[li].components[0].binary_search(&nb).is_ok() {
                            adjacent.push(li);
                        }
                    }
                }
                adjacent.sort_unstable();
                for i in adjacent {
                    // Side condition: the primary component of label j must
                    // not meet the saturation of label i's primary component.
                    let sat = self.saturate(&decs[i].components[0])?;
                    let primary_j = &decs[j].components[0];
                    let overlap = primary_j.iter().any(|p| sat.binary_search(p).is_ok());
                    if overlap {
                        continue;
                    }
                    let mut out = self.clone();
                    for &idx in comp {
                        out.labels[idx] = (i + 1) as u32;
                    }
                    return Ok((out, true));
                }
            }
        }
        Ok((self.clone(), false))
    }

    /// Iterate merges to a fixed point; returns the final grid and the
    /// number of merges applied.
    pub fn merge_to_simple(&self) -> Result<(GridPartition, usize)> {
        let mut g = self.clone();
        let mut count = 0;
        loop {
            let (next, applied) = g.modify_merge()?;
            if !applied {
                return Ok((next, count));
            }
            g = next;
            count += 1;
        }
    }

    /// Unwrap a connected component: integer (row, col) coordinates in a
    /// covering plane, consistent across periodic wraps.
    fn unwrap_component(&self, component: &[usize]) -> Vec<(i64, i64)> {
        let n = self.resolution;
        let mut inside = vec![false; self.labels.len()];
        for &idx in component {
            inside[idx] = true;
        }
        let mut coord: Vec<Option<(i64, i64)>> = vec![None; self.labels.len()];
        let start = component[0];
        coord[start] = Some(((start / n) as i64, (start % n) as i64));
        let mut stack = vec![start];
        while let Some(idx) = stack.pop() {
            let (r, c) = coord[idx].unwrap();
            let (row, col) = (idx / n, idx % n);
            let steps = [
                (self.index(row, (col + 1) % n), (r, c + 1)),
                (self.index(row, (col + n - 1) % n), (r, c - 1)),
                (self.index((row + 1) % n, col), (r + 1, c)),
                (self.index((row + n - 1) % n, col), (r - 1, c)),
            ];
            for (nb, rc) in steps {
                if inside[nb] && coord[nb].is_none() {
                    coord[nb] = Some(rc);
                    stack.push(nb);
                }
            }
        }
        component.iter().map(|&idx| coord[idx].unwrap()).collect()
    }

    /// Per-component (diameter, perimeter, ratio) of a label; the diameter is
    /// measured over unwrapped pixel corners, the classical bound being
    /// diam <= perimeter / 2.
    pub fn diameter_check(&self, label: u32) -> Result<Vec<(f64, f64, f64)>> {
        let dec = self.decompose(label)?;
        let n = self.resolution as f64;
        let (b1, b2) = self.basis_cols();
        let mut out = Vec::new();
        for comp in &dec.components {
            let coords = self.unwrap_component(comp);
            let mut corners = Vec::with_capacity(4 * comp.len());
            for &(r, c) in &coords {
                for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    corners.push(
                        b1 * ((c + dc) as f64 / n) + b2 * ((r + dr) as f64 / n),
                    );
                }
            }
            let diam = crate::geom::diameter(&corners);
            let mut inside = vec![false; self.labels.len()];
            for &idx in comp {
                inside[idx] = true;
            }
            let per = self.pixel_set_perimeter(|i| inside[i]);
            out.push((diam, per, diam / per));
        }
        Ok(out)
    }

    /// Torus distance between two cartesian points.
    pub fn torus_distance(&self, a: Vec2, b: Vec2) -> f64 {
        let (b1, b2) = self.basis_cols();
        let mut best = f64::INFINITY;
        for i in -1..=1i64 {
            for j in -1..=1i64 {
                let d = (a - b + b1 * i as f64 + b2 * j as f64).norm();
                best = best.min(d);
            }
        }
        best
    }

    /// Rasterize a cartesian polygon: pixel indices whose center (under some
    /// periodic representative) lies inside.
    pub fn rasterize(&self, polygon: &[Vec2]) -> Vec<usize> {
        let (b1, b2) = self.basis_cols();
        let mut out = Vec::new();
        for idx in 0..self.labels.len() {
            let c = self.pixel_center(idx);
            'reps: for i in -1..=1i64 {
                for j in -1..=1i64 {
                    if point_in_polygon(c + b1 * i as f64 + b2 * j as f64, polygon) {
                        out.push(idx);
                        break 'reps;
                    }
                }
            }
        }
        out
    }

    /// Symmetric Hausdorff distance (torus metric) between a pixel set and a
    /// polygon rasterized at this grid's resolution, both as pixel-center
    /// point sets.
    pub fn hausdorff_distance(&self, a: &[usize], polygon: &[Vec2]) -> Result<f64> {
        let b = self.rasterize(polygon);
        if a.is_empty() || b.is_empty() {
            return Err(Error::InvalidParameter("hausdorff_distance: empty input".into()));
        }
        let pa: Vec<Vec2> = a.iter().map(|&i| self.pixel_center(i)).collect();
        let pb: Vec<Vec2> = b.iter().map(|&i| self.pixel_center(i)).collect();
        let one_sided = |xs: &[Vec2], ys: &[Vec2]| {
            xs.iter()
                .map(|&x| {
                    ys.iter()
                        .map(|&y| self.torus_distance(x, y))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(0.0, f64::max)
        };
        Ok(one_sided(&pa, &pb).max(one_sided(&pb, &pa)))
    }
}
