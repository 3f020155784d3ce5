//! Perimeter integrands: anisotropic norms with their Wulff shapes, the
//! fractional interaction kernel with its tail function, and the almost
//! subadditivity constants.

use crate::error::{Error, Result};
use crate::geom::{shoelace, Vec2};

/// An even, positively 1-homogeneous convex integrand evaluated on normals.
#[derive(Debug, Clone, PartialEq)]
pub enum Anisotropy {
    Euclidean,
    Ell1,
    /// Support function of a regular hexagon with horizontal top/bottom edges
    /// (inradius 1), so the Wulff shape is that hexagon.
    Hexagonal,
    /// phi(nu) = max_j w_j |d_j . nu| for unit directions d_j, weights w_j > 0.
    /// The Wulff shape is conv{ +- w_j d_j }.
    CustomPolyhedral(Vec<(Vec2, f64)>),
}

impl Anisotropy {
    /// Evaluate phi at a (not necessarily unit) normal vector.
    pub fn eval(&self, normal: Vec2) -> Result<f64> {
        if normal.norm_sq() == 0.0 {
            return Err(Error::InvalidParameter("phi_eval: zero normal".into()));
        }
        Ok(match self {
            Anisotropy::Euclidean => normal.norm(),
            Anisotropy::Ell1 => normal.x.abs() + normal.y.abs(),
            Anisotropy::Hexagonal => hexagon_vertices()
                .iter()
                .map(|v| v.dot(normal).abs())
                .fold(0.0, f64::max),
            Anisotropy::CustomPolyhedral(dirs) => dirs
                .iter()
                .map(|(d, w)| (*d * *w).dot(normal).abs())
                .fold(0.0, f64::max),
        })
    }

    /// Subgradient of phi at a nonzero normal (the maximizing dual vertex for
    /// polyhedral integrands; exact gradient in the euclidean case).
    pub fn grad(&self, normal: Vec2) -> Vec2 {
        match self {
            Anisotropy::Euclidean => normal.normalized(),
            Anisotropy::Ell1 => Vec2::new(sign0(normal.x), sign0(normal.y)),
            Anisotropy::Hexagonal => polyhedral_grad(&hexagon_vertices(), normal),
            Anisotropy::CustomPolyhedral(dirs) => {
                let verts: Vec<Vec2> = dirs.iter().map(|(d, w)| *d * *w).collect();
                polyhedral_grad(&verts, normal)
            }
        }
    }

    /// The Wulff shape scaled to the requested area, as a CCW polygon
    /// (regular 64-gon approximation in the euclidean case).
    pub fn wulff_shape(&self, volume: f64) -> Result<Vec<Vec2>> {
        if volume <= 0.0 {
            return Err(Error::InvalidParameter("wulff_shape: volume <= 0".into()));
        }
        let base: Vec<Vec2> = match self {
            Anisotropy::Euclidean => (0..64)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                    Vec2::new(t.cos(), t.sin())
                })
                .collect(),
            Anisotropy::Ell1 => vec![
                Vec2::new(1.0, 1.0),
                Vec2::new(-1.0, 1.0),
                Vec2::new(-1.0, -1.0),
                Vec2::new(1.0, -1.0),
            ],
            Anisotropy::Hexagonal => hexagon_vertices().to_vec(),
            Anisotropy::CustomPolyhedral(dirs) => {
                let mut pts: Vec<Vec2> = dirs
                    .iter()
                    .flat_map(|(d, w)| [*d * *w, -(*d * *w)])
                    .collect();
                pts = convex_hull(&mut pts);
                if pts.len() < 3 {
                    return Err(Error::InvalidParameter(
                        "wulff_shape: degenerate polyhedral data".into(),
                    ));
                }
                pts
            }
        };
        let area = shoelace(&base);
        let s = (volume / area).sqrt();
        Ok(base.into_iter().map(|p| p * s).collect())
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn polyhedral_grad(verts: &[Vec2], normal: Vec2) -> Vec2 {
    let mut best = Vec2::ZERO;
    let mut best_val = f64::NEG_INFINITY;
    for &v in verts {
        for cand in [v, -v] {
            let val = cand.dot(normal);
            if val > best_val {
                best_val = val;
                best = cand;
            }
        }
    }
    best
}

/// Vertices of the regular hexagon with horizontal top and bottom edges and
/// inradius 1 (circumradius 2/sqrt 3), in CCW order.
fn hexagon_vertices() -> [Vec2; 6] {
    let r = 2.0 / 3f64.sqrt();
    let mut out = [Vec2::ZERO; 6];
    for (k, slot) in out.iter_mut().enumerate() {
        let t = std::f64::consts::PI / 3.0 * k as f64;
        *slot = Vec2::new(r * t.cos(), r * t.sin());
    }
    out
}

/// Monotone-chain convex hull, CCW.
fn convex_hull(pts: &mut Vec<Vec2>) -> Vec<Vec2> {
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-14);
    let n = pts.len();
    if n < 3 {
        return pts.clone();
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * n);
    for &p in pts.iter() {
        while hull.len() >= 2
            && (hull[hull.len() - 1] - hull[hull.len() - 2]).cross(p - hull[hull.len() - 1]) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev() {
        while hull.len() >= lower
            && (hull[hull.len() - 1] - hull[hull.len() - 2]).cross(p - hull[hull.len() - 1]) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// The fractional interaction kernel K(x) = |x|^{-(d+s)} in d = 2, truncated
/// for periodization at `truncation_radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub s: f64,
    pub truncation_radius: f64,
}

impl Kernel {
    pub fn new(s: f64, truncation_radius: f64) -> Result<Self> {
        if !(0.0 < s && s < 1.0) {
            return Err(Error::InvalidParameter(format!("kernel exponent s = {s} not in (0,1)")));
        }
        if truncation_radius <= 0.0 {
            return Err(Error::InvalidParameter("truncation_radius <= 0".into()));
        }
        Ok(Kernel { s, truncation_radius })
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        let r = x.norm();
        r.powf(-(2.0 + self.s))
    }

    /// Tail phi(t) = integral of K outside B_t(0); in d = 2 this is
    /// 2 pi t^{-s} / s.
    pub fn tail(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(Error::InvalidParameter("kernel_tail: t <= 0".into()));
        }
        Ok(2.0 * std::f64::consts::PI * t.powf(-self.s) / self.s)
    }
}

/// Almost-subadditivity data: c = 1 with zero tail for local perimeters,
/// c = 2 with the kernel tail for the non-local one.
#[derive(Debug, Clone)]
pub struct SubadditivityConstants {
    pub c: f64,
    kernel: Option<Kernel>,
}

impl SubadditivityConstants {
    pub fn local() -> Self {
        SubadditivityConstants { c: 1.0, kernel: None }
    }

    pub fn nonlocal(kernel: Kernel) -> Self {
        SubadditivityConstants { c: 2.0, kernel: Some(kernel) }
    }

    pub fn tail(&self, t: f64) -> Result<f64> {
        match &self.kernel {
            None => Ok(0.0),
            Some(k) => k.tail(t),
        }
    }
}

/// Lambda of Lemmas 4.x assembled from the pieces: zero for the local
/// constrained problem, lambda for the local penalized one, the kernel tail
/// at rho_G - 2r for the non-local constrained one, and their sum in the
/// non-local penalized case. Requires r < rho_G / 2.
pub fn lambda_constant_parts(
    kernel: Option<&Kernel>,
    penalization: Option<f64>,
    rho_g: f64,
    r: f64,
) -> Result<f64> {
    if r >= rho_g / 2.0 {
        return Err(Error::InvalidParameter(format!(
            "lambda_constant: r = {r} must be < rho_G/2 = {}",
            rho_g / 2.0
        )));
    }
    let tail = match kernel {
        None => 0.0,
        Some(k) => k.tail(rho_g - 2.0 * r)?,
    };
    Ok(penalization.unwrap_or(0.0) + tail)
}
