//! Plane geometry: vectors, 2x2 matrices, simple polygons, and exact
//! polygon/disk clipping.
//!
//! The clipping routine is the workhorse behind annulus averages of
//! piecewise-constant strain fields: `polygon_disk_area` evaluates
//! |P ∩ B_r(c)| exactly (circular segments included) by accumulating
//! per-edge Green's-theorem contributions, so area weights carry no
//! quadrature noise beyond roundoff.

use crate::error::{Error, Result};

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

    /// z-component of the wedge product `self ∧ o`.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Counter-clockwise quarter turn.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Polar angle in [0, 2π), branch cut on the positive x-axis.
    pub fn angle_in_2pi(self) -> f64 {
        let a = self.y.atan2(self.x);
        if a < 0.0 {
            a + 2.0 * std::f64::consts::PI
        } else {
            a
        }
    }

    pub fn from_polar(rho: f64, theta: f64) -> Vec2 {
        Vec2::new(rho * theta.cos(), rho * theta.sin())
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl std::ops::SubAssign for Vec2 {
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

/// Row-major 2x2 matrix; `m[i][j]` is row i, column j.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0; 2]; 2]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    /// Counter-clockwise rotation by `theta`.
    pub fn rotation(theta: f64) -> Mat2 {
        let (s, c) = theta.sin_cos();
        Mat2([[c, -s], [s, c]])
    }

    pub fn from_cols(c0: Vec2, c1: Vec2) -> Mat2 {
        Mat2([[c0.x, c1.x], [c0.y, c1.y]])
    }

    pub fn outer(u: Vec2, v: Vec2) -> Mat2 {
        Mat2([[u.x * v.x, u.x * v.y], [u.y * v.x, u.y * v.y]])
    }

    pub fn col(&self, j: usize) -> Vec2 {
        Vec2::new(self.0[0][j], self.0[1][j])
    }

    pub fn row(&self, i: usize) -> Vec2 {
        Vec2::new(self.0[i][0], self.0[i][1])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    pub fn sym(&self) -> Mat2 {
        let off = 0.5 * (self.0[0][1] + self.0[1][0]);
        Mat2([[self.0[0][0], off], [off, self.0[1][1]]])
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.0[0][0] * v.x + self.0[0][1] * v.y,
            self.0[1][0] * v.x + self.0[1][1] * v.y,
        )
    }

    pub fn mul_mat(&self, o: &Mat2) -> Mat2 {
        let mut r = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                r[i][j] = self.0[i][0] * o.0[0][j] + self.0[i][1] * o.0[1][j];
            }
        }
        Mat2(r)
    }

    /// Frobenius inner product.
    pub fn contract(&self, o: &Mat2) -> f64 {
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += self.0[i][j] * o.0[i][j];
            }
        }
        s
    }

    pub fn inverse(&self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 {
            return None;
        }
        Some(Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ]))
    }
}

impl std::ops::Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] += o.0[i][j];
            }
        }
        r
    }
}

impl std::ops::Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] -= o.0[i][j];
            }
        }
        r
    }
}

impl std::ops::Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        let mut r = self;
        for i in 0..2 {
            for j in 0..2 {
                r.0[i][j] *= s;
            }
        }
        r
    }
}

impl std::ops::AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        for i in 0..2 {
            for j in 0..2 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

/// Squared Frobenius distance of `f` to SO(2).
///
/// For det f >= 0 both singular values sit at distance |σ_i - 1|; the
/// closed form avoids an SVD: σ1+σ2 = sqrt(|f|² + 2 det f).
pub fn dist_sq_to_rotations(f: &Mat2) -> f64 {
    let n2 = f.norm_sq();
    let d = f.det();
    if d >= 0.0 {
        let s = (n2 + 2.0 * d).max(0.0).sqrt();
        (n2 - 2.0 * s + 2.0).max(0.0)
    } else {
        // one reflected singular value: sigma1 - sigma2 = sqrt(|f|^2 - 2 det f)
        let diff = (n2 - 2.0 * d).max(0.0).sqrt();
        let sum = (n2 + 2.0 * d).max(0.0).sqrt();
        let s1 = 0.5 * (diff + sum);
        let s2 = 0.5 * (diff - sum);
        (s1 - 1.0).powi(2) + (s2 + 1.0).powi(2)
    }
}

/// A simple polygon given by its vertices in counter-clockwise order.
#[derive(Debug, Clone)]
pub struct Polygon {
    vertices: Vec<Vec2>,
}

impl Polygon {
    /// Validates simplicity (no self-intersections), orientation and
    /// non-degeneracy; reverses clockwise input.
    pub fn new(mut vertices: Vec<Vec2>) -> Result<Polygon> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let area = signed_area(&vertices);
        if area == 0.0 {
            return Err(Error::InvalidPolygon("degenerate (zero area)".into()));
        }
        if area < 0.0 {
            vertices.reverse();
        }
        if let Some((i, j)) = first_self_intersection(&vertices) {
            return Err(Error::InvalidPolygon(format!(
                "edges {i} and {j} intersect; polygon must be simple"
            )));
        }
        Ok(Polygon { vertices })
    }

    pub fn regular(center: Vec2, radius: f64, sides: usize) -> Polygon {
        let pts = (0..sides)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / sides as f64;
                center + Vec2::from_polar(radius, t)
            })
            .collect();
        Polygon { vertices: pts }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((*a - *b).norm());
            }
        }
        d
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    pub fn distance_to_boundary(&self, p: Vec2) -> f64 {
        let n = self.vertices.len();
        let mut d = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            d = d.min(point_segment_distance(p, a, b));
        }
        d
    }

    /// Membership with a symmetric tolerance band: points within `tol` of the
    /// boundary count as inside, so boundary-grazing lattice triangles are
    /// classified deterministically.
    pub fn contains(&self, p: Vec2, tol: f64) -> bool {
        if self.distance_to_boundary(p) <= tol {
            return true;
        }
        self.winding_contains(p)
    }

    fn winding_contains(&self, p: Vec2) -> bool {
        // even-odd ray casting along +x
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x_cross > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }
}

fn signed_area(pts: &[Vec2]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        a += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * a
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = if ab.norm_sq() == 0.0 {
        0.0
    } else {
        ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0)
    };
    (p - (a + ab * t)).norm()
}

fn segments_properly_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

fn first_self_intersection(pts: &[Vec2]) -> Option<(usize, usize)> {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            // skip shared-endpoint neighbors
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if segments_properly_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Exact area of `polygon ∩ B_radius(center)`.
///
/// Per-edge Green's theorem: segments inside the disk contribute triangle
/// areas with respect to the center, excursions outside contribute circular
/// sectors. Valid for any simple polygon; the sign follows the polygon's
/// orientation (positive for CCW).
pub fn polygon_disk_area(polygon: &[Vec2], center: Vec2, radius: f64) -> f64 {
    if radius <= 0.0 {
        return 0.0;
    }
    let n = polygon.len();
    let mut area = 0.0;
    for i in 0..n {
        let a = polygon[i] - center;
        let b = polygon[(i + 1) % n] - center;
        area += edge_disk_contribution(a, b, radius);
    }
    area
}

fn sector(u: Vec2, v: Vec2, r: f64) -> f64 {
    0.5 * r * r * u.cross(v).atan2(u.dot(v))
}

fn edge_disk_contribution(a: Vec2, b: Vec2, r: f64) -> f64 {
    let r2 = r * r;
    let a_in = a.norm_sq() <= r2;
    let b_in = b.norm_sq() <= r2;
    if a_in && b_in {
        return 0.5 * a.cross(b);
    }
    // segment/circle intersections: |a + t(b-a)|^2 = r^2
    let d = b - a;
    let qa = d.norm_sq();
    let qb = 2.0 * a.dot(d);
    let qc = a.norm_sq() - r2;
    let disc = qb * qb - 4.0 * qa * qc;
    if a_in {
        // exits once
        let t = (-qb + disc.max(0.0).sqrt()) / (2.0 * qa);
        let e = a + d * t;
        return 0.5 * a.cross(e) + sector(e, b, r);
    }
    if b_in {
        let t = (-qb - disc.max(0.0).sqrt()) / (2.0 * qa);
        let e = a + d * t;
        return sector(a, e, r) + 0.5 * e.cross(b);
    }
    // both endpoints outside: either a clean miss or a chord
    if disc > 0.0 {
        let sq = disc.sqrt();
        let t1 = (-qb - sq) / (2.0 * qa);
        let t2 = (-qb + sq) / (2.0 * qa);
        if t1 > 0.0 && t2 < 1.0 && t1 < t2 {
            let e1 = a + d * t1;
            let e2 = a + d * t2;
            return sector(a, e1, r) + 0.5 * e1.cross(e2) + sector(e2, b, r);
        }
    }
    sector(a, b, r)
}

/// Area of `polygon ∩ A_{r,R}(center)` for an annulus.
pub fn polygon_annulus_area(polygon: &[Vec2], center: Vec2, r: f64, big_r: f64) -> f64 {
    polygon_disk_area(polygon, center, big_r) - polygon_disk_area(polygon, center, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn disk_inside_polygon() {
        let sq = unit_square();
        let a = polygon_disk_area(&sq, Vec2::new(0.5, 0.5), 0.25);
        let exact = std::f64::consts::PI * 0.25 * 0.25;
        assert!((a - exact).abs() < 1e-14, "{a} vs {exact}");
    }

    #[test]
    fn polygon_inside_disk() {
        let sq = unit_square();
        let a = polygon_disk_area(&sq, Vec2::new(0.5, 0.5), 5.0);
        assert!((a - 1.0).abs() < 1e-14);
    }

    #[test]
    fn half_disk_through_center() {
        // disk centered on the square's edge: exactly half the disk inside
        let sq = unit_square();
        let a = polygon_disk_area(&sq, Vec2::new(0.5, 0.0), 0.3);
        let exact = 0.5 * std::f64::consts::PI * 0.09;
        assert!((a - exact).abs() < 1e-14, "{a} vs {exact}");
    }

    #[test]
    fn disk_outside_polygon() {
        let sq = unit_square();
        let a = polygon_disk_area(&sq, Vec2::new(5.0, 5.0), 0.5);
        assert!(a.abs() < 1e-14);
    }

    #[test]
    fn chord_case_monte_carlo() {
        // A triangle cut by a disk in general position, MC as independent oracle.
        let tri = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.2),
            Vec2::new(0.7, 1.7),
        ];
        let c = Vec2::new(1.2, 0.4);
        let r = 0.55;
        let exact = polygon_disk_area(&tri, c, r);
        // deterministic lattice sampling
        let n = 1200;
        let mut hits = 0usize;
        let (lo, hi) = (Vec2::new(-0.1, -0.1), Vec2::new(2.1, 1.9));
        let poly = Polygon::new(tri.clone()).unwrap();
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new(
                    lo.x + (hi.x - lo.x) * (i as f64 + 0.5) / n as f64,
                    lo.y + (hi.y - lo.y) * (j as f64 + 0.5) / n as f64,
                );
                if (p - c).norm() <= r && poly.contains(p, 0.0) {
                    hits += 1;
                }
            }
        }
        let cell = (hi.x - lo.x) * (hi.y - lo.y) / (n * n) as f64;
        let approx = hits as f64 * cell;
        assert!(
            (approx - exact).abs() < 3e-3,
            "mc {approx} vs exact {exact}"
        );
    }

    #[test]
    fn annulus_area_full_containment() {
        let sq = vec![
            Vec2::new(-2.0, -2.0),
            Vec2::new(2.0, -2.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(-2.0, 2.0),
        ];
        let a = polygon_annulus_area(&sq, Vec2::ZERO, 0.5, 1.0);
        let exact = std::f64::consts::PI * (1.0 - 0.25);
        assert!((a - exact).abs() < 1e-13);
    }

    #[test]
    fn polygon_validation() {
        assert!(Polygon::new(vec![Vec2::ZERO, Vec2::new(1.0, 0.0)]).is_err());
        // bow-tie
        let bad = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        ]);
        assert!(bad.is_err());
        // clockwise input is re-oriented
        let cw = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(1.0, 0.0),
        ])
        .unwrap();
        assert!(cw.area() > 0.0);
    }

    #[test]
    fn containment_tolerance_band() {
        let p = Polygon::new(unit_square()).unwrap();
        assert!(p.contains(Vec2::new(0.5, 0.5), 0.0));
        assert!(!p.contains(Vec2::new(1.5, 0.5), 0.0));
        // on the boundary: in only thanks to the tolerance
        assert!(p.contains(Vec2::new(1.0, 0.5), 1e-12));
        assert!(p.contains(Vec2::new(1.0 + 1e-13, 0.5), 1e-12));
        assert!(!p.contains(Vec2::new(1.0 + 1e-11, 0.5), 1e-12));
    }

    #[test]
    fn rotation_distance() {
        let r = Mat2::rotation(0.7);
        assert!(dist_sq_to_rotations(&r) < 1e-28);
        let m = Mat2([[2.0, 0.0], [0.0, 2.0]]);
        // distance (sigma-1)^2 * 2 = 2
        assert!((dist_sq_to_rotations(&m) - 2.0).abs() < 1e-14);
    }
}
