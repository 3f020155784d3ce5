//! Small planar geometry helpers shared across the crate.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    /// Rotation by -90 degrees: maps a tangent to the right-hand normal.
    pub fn perp(self) -> Vec2 {
        Vec2::new(self.y, -self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}
impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}
impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}
impl Div<f64> for Vec2 {
    type Output = Vec2;
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x / s, self.y / s)
    }
}
impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}
impl SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

/// Signed area of a closed polygon (positive for counter-clockwise loops).
pub fn shoelace(points: &[Vec2]) -> f64 {
    let n = points.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        acc += a.cross(b);
    }
    0.5 * acc
}

/// Total length of a closed polygon boundary.
pub fn polygon_perimeter(points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n).map(|i| (points[(i + 1) % n] - points[i]).norm()).sum()
}

/// Length of an open polyline.
pub fn polyline_length(points: &[Vec2]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Maximum pairwise distance between the given points.
pub fn diameter(points: &[Vec2]) -> f64 {
    let mut best: f64 = 0.0;
    for (i, &p) in points.iter().enumerate() {
        for &q in &points[i + 1..] {
            best = best.max((q - p).norm());
        }
    }
    best
}

/// Circumradius of the triangle (a, b, c).
pub fn circumradius(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let la = (b - c).norm();
    let lb = (a - c).norm();
    let lc = (a - b).norm();
    let area2 = (b - a).cross(c - a).abs();
    la * lb * lc / (2.0 * area2)
}

/// Point-in-polygon test (even-odd rule); boundary points are unspecified.
pub fn point_in_polygon(p: Vec2, poly: &[Vec2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let xint = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < xint {
                inside = !inside;
            }
        }
    }
    inside
}

/// Least-squares circle fit (Kasa). Returns (center, radius, rms residual).
/// For nearly collinear input the radius is huge; callers classify that as a line.
pub fn fit_circle(points: &[Vec2]) -> Option<(Vec2, f64, f64)> {
    let n = points.len();
    if n < 3 {
        return None;
    }
    // Solve [2x 2y 1] [a b c]^T = x^2 + y^2 in least squares via normal equations.
    let cx: f64 = points.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let cy: f64 = points.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for p in points {
        let x = p.x - cx;
        let y = p.y - cy;
        let z = x * x + y * y;
        let row = [2.0 * x, 2.0 * y, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * z;
        }
    }
    let sol = solve3(m, rhs)?;
    let center = Vec2::new(sol[0] + cx, sol[1] + cy);
    let r2 = sol[2] + sol[0] * sol[0] + sol[1] * sol[1];
    if r2 <= 0.0 {
        return None;
    }
    let radius = r2.sqrt();
    let rms = (points
        .iter()
        .map(|p| {
            let d = (*p - center).norm() - radius;
            d * d
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Some((center, radius, rms))
}

/// Orthogonal-distance line fit. Returns (point on line, unit direction, rms residual).
pub fn fit_line(points: &[Vec2]) -> Option<(Vec2, Vec2, f64)> {
    let n = points.len();
    if n < 2 {
        return None;
    }
    let mean = points.iter().fold(Vec2::ZERO, |a, &p| a + p) / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - mean;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // Principal eigenvector of the 2x2 scatter matrix.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let lam = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let dir = if sxy.abs() > 1e-300 {
        Vec2::new(lam - syy, sxy).normalized()
    } else if sxx >= syy {
        Vec2::new(1.0, 0.0)
    } else {
        Vec2::new(0.0, 1.0)
    };
    let rms = (points
        .iter()
        .map(|p| {
            let d = (*p - mean).cross(dir);
            d * d
        })
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Some((mean, dir, rms))
}

fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in 0..3 {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..3 {
                    m[row][k] -= f * m[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    Some([b[0] / m[0][0], b[1] / m[1][1], b[2] / m[2][2]])
}

/// Pairwise (cascade) summation for order-stable accumulation of long sums.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn shoelace_unit_square() {
        let sq = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        assert_abs_diff_eq!(shoelace(&sq), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(polygon_perimeter(&sq), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn circle_fit_recovers_radius() {
        let pts: Vec<Vec2> = (0..12)
            .map(|k| {
                let t = 0.3 + 0.1 * k as f64;
                Vec2::new(1.5 + 2.0 * t.cos(), -0.5 + 2.0 * t.sin())
            })
            .collect();
        let (c, r, rms) = fit_circle(&pts).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(c.x, 1.5, epsilon = 1e-9);
        assert_abs_diff_eq!(c.y, -0.5, epsilon = 1e-9);
        assert!(rms < 1e-10);
    }

    #[test]
    fn line_fit_straight() {
        let pts: Vec<Vec2> = (0..10).map(|k| Vec2::new(k as f64, 2.0 * k as f64)).collect();
        let (_, dir, rms) = fit_line(&pts).unwrap();
        assert!(rms < 1e-12);
        assert_abs_diff_eq!(dir.cross(Vec2::new(1.0, 2.0).normalized()).abs(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn circumradius_equilateral() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(1.0, 0.0);
        let c = Vec2::new(0.5, 3f64.sqrt() / 2.0);
        assert_abs_diff_eq!(circumradius(a, b, c), 1.0 / 3f64.sqrt(), epsilon = 1e-12);
    }
}
