//! Lattice algebra: bases, volume, reduction, packing/covering radii,
//! point enumeration and the canonical parallelepiped fundamental domain.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geom::{circumradius, Vec2};

/// A rank-d lattice given by the columns of its basis matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    basis: DMatrix<f64>,
    dim: usize,
}

/// A lattice element, stored as integer coefficients in the basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LatticeVector {
    pub coeffs: Vec<i64>,
}

impl Lattice {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let dim = basis.nrows();
        if dim == 0 || basis.ncols() != dim {
            return Err(Error::SingularBasis);
        }
        let det = basis.clone().determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SingularBasis);
        }
        Ok(Lattice { basis, dim })
    }

    /// 2D lattice from two column generators.
    pub fn from_cols_2d(b1: Vec2, b2: Vec2) -> Result<Self> {
        Lattice::new(DMatrix::from_column_slice(2, 2, &[b1.x, b1.y, b2.x, b2.y]))
    }

    /// Square lattice a * Z^2.
    pub fn square(a: f64) -> Self {
        Lattice::from_cols_2d(Vec2::new(a, 0.0), Vec2::new(0.0, a)).expect("a != 0")
    }

    /// Hexagonal lattice scaled to the requested volume:
    /// basis (a, 0), (a/2, a*sqrt(3)/2) with a^2 * sqrt(3)/2 = volume.
    pub fn hexagonal(volume: f64) -> Self {
        let a = (2.0 * volume / 3f64.sqrt()).sqrt();
        Lattice::from_cols_2d(Vec2::new(a, 0.0), Vec2::new(a / 2.0, a * 3f64.sqrt() / 2.0))
            .expect("volume > 0")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The two generators of a planar lattice.
    pub fn basis2(&self) -> (Vec2, Vec2) {
        assert_eq!(self.dim, 2);
        (
            Vec2::new(self.basis[(0, 0)], self.basis[(1, 0)]),
            Vec2::new(self.basis[(0, 1)], self.basis[(1, 1)]),
        )
    }

    /// d(G) = |det(e_i)|.
    pub fn volume(&self) -> f64 {
        self.basis.clone().determinant().abs()
    }

    pub fn to_cartesian(&self, frac: Vec2) -> Vec2 {
        let (b1, b2) = self.basis2();
        b1 * frac.x + b2 * frac.y
    }

    pub fn to_fractional(&self, cart: Vec2) -> Vec2 {
        let (b1, b2) = self.basis2();
        let det = b1.cross(b2);
        Vec2::new(cart.cross(b2) / det, b1.cross(cart) / det)
    }

    pub fn vector_cartesian_2d(&self, coeffs: [i64; 2]) -> Vec2 {
        self.to_cartesian(Vec2::new(coeffs[0] as f64, coeffs[1] as f64))
    }

    /// Basis with shortest-vector-first ordering generating the same group.
    /// Fully supported for d = 2 (Lagrange-Gauss); d = 3 uses greedy pairwise
    /// size reduction; d > 3 is rejected.
    pub fn reduce(&self) -> Result<Lattice> {
        match self.dim {
            1 => Ok(self.clone()),
            2 => Ok(self.reduce_2d()),
            3 => Ok(self.reduce_greedy_3d()),
            d => Err(Error::DimensionUnsupported { dim: d, what: "reduce" }),
        }
    }

    fn reduce_2d(&self) -> Lattice {
        let (mut b1, mut b2) = self.basis2();
        loop {
            if b2.norm_sq() < b1.norm_sq() {
                std::mem::swap(&mut b1, &mut b2);
            }
            let mu = (b2.dot(b1) / b1.norm_sq()).round();
            if mu == 0.0 {
                break;
            }
            let t = b2 - b1 * mu;
            // Half-integer projections round to +-1 without shortening; stop
            // unless the step strictly improves, or the loop oscillates.
            if t.norm_sq() >= b2.norm_sq() {
                break;
            }
            b2 = t;
        }
        if shorter(b2, b1) {
            std::mem::swap(&mut b1, &mut b2);
        }
        b1 = canonical_sign(b1);
        b2 = canonical_sign(b2);
        if (b1.norm() - b2.norm()).abs() < 1e-12 && lex_gt(b1, b2) {
            std::mem::swap(&mut b1, &mut b2);
        }
        Lattice::from_cols_2d(b1, b2).expect("reduction preserves rank")
    }

    fn reduce_greedy_3d(&self) -> Lattice {
        let mut b: Vec<nalgebra::DVector<f64>> =
            (0..3).map(|j| self.basis.column(j).into_owned()).collect();
        for _ in 0..100 {
            b.sort_by(|u, v| u.norm().total_cmp(&v.norm()));
            let mut changed = false;
            for i in 1..3 {
                for j in 0..i {
                    let mu = (b[i].dot(&b[j]) / b[j].norm_squared()).round();
                    if mu != 0.0 {
                        let upd = &b[i] - &b[j] * mu;
                        b[i] = upd;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        b.sort_by(|u, v| u.norm().total_cmp(&v.norm()));
        let mut m = DMatrix::zeros(3, 3);
        for (j, col) in b.iter().enumerate() {
            m.set_column(j, col);
        }
        Lattice { basis: m, dim: 3 }
    }

    /// rho_G: half the length of the shortest nonzero lattice vector.
    pub fn packing_radius(&self) -> Result<f64> {
        if self.dim > 3 {
            return Err(Error::DimensionUnsupported { dim: self.dim, what: "packing_radius" });
        }
        let reduced = self.reduce()?;
        let shortest = reduced.basis.column(0).norm();
        // The reduced first vector is shortest in d = 2; in d = 3 confirm by
        // brute force over a window covering the candidate ball.
        let min = reduced
            .points_in_ball(shortest * (1.0 + 1e-12))?
            .iter()
            .filter(|v| v.coeffs.iter().any(|&k| k != 0))
            .map(|v| reduced.point_norm(v))
            .fold(f64::INFINITY, f64::min);
        Ok(min / 2.0)
    }

    /// r_G in d = 2, as the maximal circumradius of the Delaunay triangles of
    /// the reduced basis.
    pub fn covering_radius(&self) -> Result<f64> {
        if self.dim != 2 {
            return Err(Error::DimensionUnsupported { dim: self.dim, what: "covering_radius" });
        }
        let reduced = self.reduce_2d();
        let (b1, mut b2) = reduced.basis2();
        if b1.dot(b2) < 0.0 {
            b2 = -b2;
        }
        // With a reduced basis and acute angle both candidate Delaunay
        // triangles are non-obtuse; the covering radius is the larger
        // circumradius.
        let r1 = circumradius(Vec2::ZERO, b1, b2);
        let r2 = circumradius(b1, b2, b1 + b2);
        Ok(r1.max(r2))
    }

    /// Vertices of the half-open parallelepiped { t1 e1 + t2 e2 : t in [0,1) }.
    pub fn fundamental_parallelepiped(&self) -> Result<Vec<Vec2>> {
        if self.dim != 2 {
            return Err(Error::DimensionUnsupported {
                dim: self.dim,
                what: "fundamental_parallelepiped (planar polygon)",
            });
        }
        let (b1, b2) = self.basis2();
        let mut pts = vec![Vec2::ZERO, b1, b1 + b2, b2];
        if b1.cross(b2) < 0.0 {
            pts.reverse();
            pts.rotate_left(3);
        }
        Ok(pts)
    }

    fn point_norm(&self, v: &LatticeVector) -> f64 {
        let mut acc = vec![0.0; self.dim];
        for (j, &k) in v.coeffs.iter().enumerate() {
            for i in 0..self.dim {
                acc[i] += self.basis[(i, j)] * k as f64;
            }
        }
        acc.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// All g in G with |g| <= radius, in lexicographic coefficient order.
    pub fn points_in_ball(&self, radius: f64) -> Result<Vec<LatticeVector>> {
        if radius < 0.0 {
            return Err(Error::InvalidParameter("points_in_ball: radius < 0".into()));
        }
        let inv = self
            .basis
            .clone()
            .try_inverse()
            .ok_or(Error::SingularBasis)?;
        // |k_i| = |row_i(B^-1) g| <= |row_i| * radius.
        let bounds: Vec<i64> = (0..self.dim)
            .map(|i| (inv.row(i).norm() * radius).floor() as i64)
            .collect();
        let mut out = Vec::new();
        let mut coeffs = vec![0i64; self.dim];
        self.enumerate_box(&bounds, 0, &mut coeffs, radius, &mut out);
        Ok(out)
    }

    fn enumerate_box(
        &self,
        bounds: &[i64],
        axis: usize,
        coeffs: &mut Vec<i64>,
        radius: f64,
        out: &mut Vec<LatticeVector>,
    ) {
        if axis == self.dim {
            let v = LatticeVector { coeffs: coeffs.clone() };
            if self.point_norm(&v) <= radius * (1.0 + 1e-14) {
                out.push(v);
            }
            return;
        }
        for k in -bounds[axis]..=bounds[axis] {
            coeffs[axis] = k;
            self.enumerate_box(bounds, axis + 1, coeffs, radius, out);
        }
    }
}

fn shorter(a: Vec2, b: Vec2) -> bool {
    let (na, nb) = (a.norm(), b.norm());
    if (na - nb).abs() < 1e-12 {
        lex_gt(b, a)
    } else {
        na < nb
    }
}

fn lex_gt(a: Vec2, b: Vec2) -> bool {
    (a.x, a.y) > (b.x, b.y)
}

fn canonical_sign(v: Vec2) -> Vec2 {
    if v.x < 0.0 || (v.x == 0.0 && v.y < 0.0) {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hex_unit() -> Lattice {
        Lattice::hexagonal(1.0)
    }

    fn unimodular_scramble(l: &Lattice, rng: &mut ChaCha8Rng) -> Lattice {
        // Random product of elementary integer shears and swaps (det +-1).
        let (mut b1, mut b2) = l.basis2();
        for _ in 0..8 {
            match rng.gen_range(0..3) {
                0 => b2 += b1 * rng.gen_range(-3..=3) as f64,
                1 => b1 += b2 * rng.gen_range(-3..=3) as f64,
                _ => std::mem::swap(&mut b1, &mut b2),
            }
        }
        Lattice::from_cols_2d(b1, b2).unwrap()
    }

    #[test]
    fn volume_examples() {
        assert_abs_diff_eq!(Lattice::square(1.0).volume(), 1.0, epsilon = 1e-15);
        let l = Lattice::from_cols_2d(Vec2::new(2.0, 0.0), Vec2::new(0.0, 3.0)).unwrap();
        assert_abs_diff_eq!(l.volume(), 6.0, epsilon = 1e-15);
        // Hexagonal basis with a = (2/sqrt 3)^(1/2): closed-form determinant a^2 sqrt(3)/2 = 1.
        assert_abs_diff_eq!(hex_unit().volume(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn volume_invariant_under_unimodular_change() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let l = unimodular_scramble(&hex_unit(), &mut rng);
            assert_abs_diff_eq!(l.volume(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn reduce_recovers_z2() {
        let l = Lattice::from_cols_2d(Vec2::new(1.0, 0.0), Vec2::new(5.0, 1.0)).unwrap();
        let r = l.reduce().unwrap();
        let (b1, b2) = r.basis2();
        assert_abs_diff_eq!(b1.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b1.y, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b2.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b2.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn reduce_keeps_already_reduced_basis() {
        let l = Lattice::from_cols_2d(Vec2::new(1.0, 0.0), Vec2::new(0.5, 0.9)).unwrap();
        let r = l.reduce().unwrap();
        let (b1, b2) = r.basis2();
        // Brute-force check over |k| <= 3: no nontrivial combination is shorter.
        for k1 in -3i64..=3 {
            for k2 in -3i64..=3 {
                if (k1, k2) == (0, 0) {
                    continue;
                }
                let v = b1 * k1 as f64 + b2 * k2 as f64;
                assert!(v.norm() >= b1.norm() - 1e-12);
                if (k1, k2) != (1, 0) && (k1, k2) != (-1, 0) {
                    assert!(v.norm() >= b2.norm() - 1e-12);
                }
            }
        }
        assert_abs_diff_eq!(b1.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn reduce_scrambled_hexagonal() {
        let a = (2.0 / 3f64.sqrt()).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let l = unimodular_scramble(&hex_unit(), &mut rng);
            let r = l.reduce().unwrap();
            let (b1, b2) = r.basis2();
            assert_abs_diff_eq!(b1.norm(), a, epsilon = 1e-9);
            assert_abs_diff_eq!(b2.norm(), a, epsilon = 1e-9);
            assert_abs_diff_eq!(r.volume(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn packing_radius_examples() {
        assert_abs_diff_eq!(Lattice::square(1.0).packing_radius().unwrap(), 0.5, epsilon = 1e-12);
        let a = (2.0 / 3f64.sqrt()).sqrt();
        assert_abs_diff_eq!(hex_unit().packing_radius().unwrap(), a / 2.0, epsilon = 1e-12);
        // Brute force over |k| <= 5.
        let (b1, b2) = hex_unit().basis2();
        let mut best = f64::INFINITY;
        for k1 in -5i64..=5 {
            for k2 in -5i64..=5 {
                if (k1, k2) != (0, 0) {
                    best = best.min((b1 * k1 as f64 + b2 * k2 as f64).norm());
                }
            }
        }
        assert_abs_diff_eq!(hex_unit().packing_radius().unwrap(), best / 2.0, epsilon = 1e-12);
        // Homogeneity under scaling.
        let scaled = Lattice::square(3.5);
        assert_abs_diff_eq!(scaled.packing_radius().unwrap(), 3.5 * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn covering_radius_examples() {
        assert_abs_diff_eq!(
            Lattice::square(1.0).covering_radius().unwrap(),
            2f64.sqrt() / 2.0,
            epsilon = 1e-12
        );
        let a = (2.0 / 3f64.sqrt()).sqrt();
        assert_abs_diff_eq!(hex_unit().covering_radius().unwrap(), a / 3f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn covering_radius_dense_sampling_oracle() {
        // Every point of the fundamental cell is within r_G of a lattice point,
        // and some sampled point gets arbitrarily close to that bound.
        let l = hex_unit();
        let r = l.covering_radius().unwrap();
        let pts = l.points_in_ball(4.0).unwrap();
        let mut worst: f64 = 0.0;
        let n = 120;
        for i in 0..n {
            for j in 0..n {
                let p = l.to_cartesian(Vec2::new(i as f64 / n as f64, j as f64 / n as f64));
                let d = pts
                    .iter()
                    .map(|v| (p - l.vector_cartesian_2d([v.coeffs[0], v.coeffs[1]])).norm())
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(d);
            }
        }
        assert!(worst <= r + 1e-9, "worst {worst} > r {r}");
        assert!(worst >= r - 0.02, "sampling should approach r: {worst} vs {r}");
    }

    #[test]
    fn packing_le_covering() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let l = unimodular_scramble(&Lattice::square(1.0), &mut rng);
            assert!(l.packing_radius().unwrap() <= l.covering_radius().unwrap() + 1e-12);
        }
    }

    #[test]
    fn radii_invariant_under_scramble() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = hex_unit();
        let (rho, rc) = (base.packing_radius().unwrap(), base.covering_radius().unwrap());
        for _ in 0..20 {
            let l = unimodular_scramble(&base, &mut rng);
            assert_abs_diff_eq!(l.packing_radius().unwrap(), rho, epsilon = 1e-9);
            assert_abs_diff_eq!(l.covering_radius().unwrap(), rc, epsilon = 1e-9);
        }
    }

    #[test]
    fn parallelepiped_examples() {
        let sq = Lattice::square(1.0).fundamental_parallelepiped().unwrap();
        assert_abs_diff_eq!(crate::geom::shoelace(&sq), 1.0, epsilon = 1e-15);
        let hexp = hex_unit().fundamental_parallelepiped().unwrap();
        assert_abs_diff_eq!(crate::geom::shoelace(&hexp), 1.0, epsilon = 1e-12);
        let rect = Lattice::from_cols_2d(Vec2::new(2.0, 0.0), Vec2::new(0.0, 3.0))
            .unwrap()
            .fundamental_parallelepiped()
            .unwrap();
        assert_abs_diff_eq!(crate::geom::shoelace(&rect), 6.0, epsilon = 1e-15);
    }

    #[test]
    fn points_in_ball_examples() {
        let z2 = Lattice::square(1.0);
        assert_eq!(z2.points_in_ball(1.0).unwrap().len(), 5);
        assert_eq!(z2.points_in_ball(1.5).unwrap().len(), 9);
        assert_eq!(z2.points_in_ball(0.0).unwrap().len(), 1);
    }

    #[test]
    fn points_in_ball_complete_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let l = unimodular_scramble(&hex_unit(), &mut rng);
            let radius = 2.3;
            let pts = l.points_in_ball(radius).unwrap();
            let coeff_list: Vec<_> = pts.iter().map(|p| p.coeffs.clone()).collect();
            let mut sorted = coeff_list.clone();
            sorted.sort();
            assert_eq!(coeff_list, sorted);
            for p in &pts {
                assert!(l.point_norm(p) <= radius * (1.0 + 1e-12));
            }
            // Brute count in the reduced basis, where a small coefficient
            // window is guaranteed to cover the ball.
            let (b1, b2) = l.reduce().unwrap().basis2();
            let mut count = 0;
            for k1 in -40i64..=40 {
                for k2 in -40i64..=40 {
                    if (b1 * k1 as f64 + b2 * k2 as f64).norm() <= radius {
                        count += 1;
                    }
                }
            }
            assert_eq!(count, pts.len());
        }
    }

    #[test]
    fn reduce_rejects_high_dim() {
        let m = DMatrix::<f64>::identity(4, 4);
        let l = Lattice::new(m).unwrap();
        assert!(matches!(l.reduce(), Err(Error::DimensionUnsupported { .. })));
    }
}
