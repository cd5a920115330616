//! Discrete strain fields on lattice bonds and the objects derived from
//! them: circulations, Burgers measures, per-cell strain matrices, the
//! piecewise-constant reconstruction and its annulus averages, and the
//! admissibility report.
//!
//! A strain is an antisymmetric bond field β(i,j) = -β(j,i) with values in
//! R². Antisymmetry is structural: one value is stored per canonical bond
//! (lexicographically smaller node first) and the sign is applied on
//! access, so the invariant cannot be violated by construction.

use crate::error::{Error, Result};
use crate::geometry::{polygon_disk_area, Mat2, Polygon, Vec2};
use crate::lattice::{LatticeDomain, NodeId, NEIGHBOR_STEPS, SQRT3};

/// Default circulation tolerance, relative to the lattice spacing.
pub const TOL_CIRC_REL: f64 = 1e-10;
/// Burgers weights within this distance (relative to ε) of an ε𝕋-vector
/// are snapped onto the lattice.
pub const TOL_SNAP_REL: f64 = 1e-6;

/// Antisymmetric bond field; one stored value per canonical bond.
#[derive(Debug, Clone)]
pub struct DiscreteStrain {
    values: Vec<Vec2>,
}

impl DiscreteStrain {
    pub fn zeros(dom: &LatticeDomain) -> Self {
        DiscreteStrain {
            values: vec![Vec2::ZERO; dom.num_bonds()],
        }
    }

    /// Builds a strain by evaluating `f` on every canonical bond (i, j).
    pub fn from_fn(dom: &LatticeDomain, mut f: impl FnMut(NodeId, NodeId) -> Vec2) -> Self {
        let values = dom
            .bonds()
            .iter()
            .map(|&(a, b)| {
                let (na, nb) = (dom.nodes()[a as usize], dom.nodes()[b as usize]);
                f(na, nb)
            })
            .collect();
        DiscreteStrain { values }
    }

    /// The gradient-type strain β(i,j) = u(j) - u(i) of a node field.
    pub fn from_displacement(dom: &LatticeDomain, u: &[Vec2]) -> Self {
        assert_eq!(u.len(), dom.num_nodes());
        let values = dom
            .bonds()
            .iter()
            .map(|&(a, b)| u[b as usize] - u[a as usize])
            .collect();
        DiscreteStrain { values }
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vec2] {
        &mut self.values
    }

    /// Value on the canonical orientation of bond `bond`.
    #[inline]
    pub fn bond_value(&self, bond: u32) -> Vec2 {
        self.values[bond as usize]
    }

    /// β oriented from node index `from` along bond `bond`.
    #[inline]
    pub fn oriented(&self, dom: &LatticeDomain, bond: u32, from: u32) -> Vec2 {
        let (a, _) = dom.bonds()[bond as usize];
        let v = self.values[bond as usize];
        if from == a {
            v
        } else {
            -v
        }
    }

    /// β(i, j) for adjacent nodes given by id.
    pub fn get(&self, dom: &LatticeDomain, i: NodeId, j: NodeId) -> Option<Vec2> {
        let ii = dom.node_idx(i)?;
        let d = (j.p - i.p, j.q - i.q);
        let dir = NEIGHBOR_STEPS.iter().position(|&s| s == d)?;
        let b = dom.bond_at(ii, dir)?;
        Some(self.oriented(dom, b, ii))
    }

    pub fn set(&mut self, dom: &LatticeDomain, i: NodeId, j: NodeId, v: Vec2) -> Result<()> {
        let ii = dom
            .node_idx(i)
            .ok_or_else(|| Error::InvalidArgument(format!("node {i:?} not in domain")))?;
        let d = (j.p - i.p, j.q - i.q);
        let dir = NEIGHBOR_STEPS
            .iter()
            .position(|&s| s == d)
            .ok_or_else(|| Error::InvalidArgument(format!("{i:?} and {j:?} are not neighbors")))?;
        let b = dom
            .bond_at(ii, dir)
            .ok_or_else(|| Error::InvalidArgument(format!("bond {i:?}-{j:?} not in domain")))?;
        let (a, _) = dom.bonds()[b as usize];
        self.values[b as usize] = if ii == a { v } else { -v };
        Ok(())
    }
}

/// Discrete circulation dβ(T) = β(i,j) + β(j,k) + β(k,i) over the CCW
/// vertex triple of cell `ti`.
pub fn circulation(dom: &LatticeDomain, beta: &DiscreteStrain, ti: u32) -> Vec2 {
    let vs = dom.triangle_vertex_indices(ti);
    let mut c = Vec2::ZERO;
    for k in 0..3 {
        let (i, j) = (vs[k], vs[(k + 1) % 3]);
        let bond = bond_between(dom, i, j);
        c += beta.oriented(dom, bond, i);
    }
    c
}

#[inline]
fn bond_between(dom: &LatticeDomain, i: u32, j: u32) -> u32 {
    let (ni, nj) = (dom.nodes()[i as usize], dom.nodes()[j as usize]);
    let d = (nj.p - ni.p, nj.q - ni.q);
    let dir = NEIGHBOR_STEPS
        .iter()
        .position(|&s| s == d)
        .expect("triangle edge is a neighbor step");
    dom.bond_at(i, dir).expect("triangle edge is a domain bond")
}

/// One atom of the measure μ[β].
#[derive(Debug, Clone, Copy)]
pub struct RawAtom {
    pub triangle: u32,
    pub position: Vec2,
    /// Circulation, snapped onto ε𝕋 when within the snap tolerance.
    pub weight: Vec2,
    /// Lattice coordinates of weight/ε when snapping succeeded.
    pub lattice_coords: Option<(i32, i32)>,
}

/// μ[β]: barycenters and circulations of all cells with |dβ| above the
/// circulation tolerance (default 1e-10 ε).
pub fn burgers_measure(
    dom: &LatticeDomain,
    beta: &DiscreteStrain,
    tol_circ: Option<f64>,
) -> Vec<RawAtom> {
    let eps = dom.epsilon();
    let tol = tol_circ.unwrap_or(TOL_CIRC_REL * eps);
    let tol_snap = TOL_SNAP_REL * eps;
    let mut atoms = Vec::new();
    for ti in 0..dom.num_triangles() as u32 {
        let c = circulation(dom, beta, ti);
        if c.norm() > tol {
            let snapped = snap_to_lattice(c, eps, tol_snap);
            atoms.push(RawAtom {
                triangle: ti,
                position: dom.barycenter(ti),
                weight: snapped.map_or(c, |(p, q)| lattice_vector(p, q) * eps),
                lattice_coords: snapped,
            });
        }
    }
    atoms
}

/// The lattice vector p e1 + q ν.
pub fn lattice_vector(p: i32, q: i32) -> Vec2 {
    Vec2::new(p as f64 + 0.5 * q as f64, SQRT3 / 2.0 * q as f64)
}

fn snap_to_lattice(w: Vec2, eps: f64, tol: f64) -> Option<(i32, i32)> {
    let qf = w.y / (eps * SQRT3 / 2.0);
    let pf = w.x / eps - 0.5 * qf;
    let (p, q) = (pf.round(), qf.round());
    if p.abs() > i32::MAX as f64 || q.abs() > i32::MAX as f64 {
        return None;
    }
    let (p, q) = (p as i32, q as i32);
    ((w - lattice_vector(p, q) * eps).norm() <= tol).then_some((p, q))
}

/// The unique matrix M with β(i,j) = M (j-i) on the edges of a
/// zero-circulation cell.
pub fn triangle_matrix(dom: &LatticeDomain, beta: &DiscreteStrain, ti: u32) -> Result<Mat2> {
    let eps = dom.epsilon();
    let c = circulation(dom, beta, ti);
    if c.norm() > TOL_CIRC_REL * eps {
        return Err(Error::NotCompatible {
            triangle: dom.triangles()[ti as usize],
            circ_norm: c.norm(),
        });
    }
    let vs = dom.triangle_vertex_indices(ti);
    let x0 = dom.node_position(vs[0]);
    let e = Mat2::from_cols(dom.node_position(vs[1]) - x0, dom.node_position(vs[2]) - x0);
    let b01 = beta.oriented(dom, bond_between(dom, vs[0], vs[1]), vs[0]);
    let b02 = beta.oriented(dom, bond_between(dom, vs[0], vs[2]), vs[0]);
    let b = Mat2::from_cols(b01, b02);
    let inv = e.inverse().expect("lattice cell is nondegenerate");
    Ok(b.mul_mat(&inv))
}

/// A dislocation: position, Burgers vector in lattice coordinates, and the
/// frame rotation attached to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dislocation {
    pub position: Vec2,
    /// Burgers vector b = b1 e1 + b2 ν in lattice coordinates.
    pub burgers: (i32, i32),
    /// Angle θ of the frame rotation Rⁿ.
    pub frame_angle: f64,
}

impl Dislocation {
    pub fn frame(&self) -> Mat2 {
        Mat2::rotation(self.frame_angle)
    }

    /// The measure weight ε Rⁿ bⁿ.
    pub fn weight(&self, epsilon: f64) -> Vec2 {
        self.frame()
            .mul_vec(lattice_vector(self.burgers.0, self.burgers.1))
            * epsilon
    }
}

/// A finite edge-dislocation measure with its admissibility scales.
#[derive(Debug, Clone)]
pub struct DislocationMeasure {
    pub entries: Vec<Dislocation>,
    pub epsilon: f64,
    pub gamma: f64,
}

impl DislocationMeasure {
    pub fn new(entries: Vec<Dislocation>, epsilon: f64, gamma: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        Ok(DislocationMeasure {
            entries,
            epsilon,
            gamma,
        })
    }

    /// Separation scale ε^γ.
    pub fn scale(&self) -> f64 {
        self.epsilon.powf(self.gamma)
    }

    /// Checks the well-separation constraints: pairwise distance at least
    /// 4 ε^γ and boundary margin at least 2 ε^γ.
    pub fn validate(&self, domain: &Polygon) -> Result<()> {
        let s = self.scale();
        for (n, d) in self.entries.iter().enumerate() {
            if d.burgers == (0, 0) {
                return Err(Error::InvalidArgument(format!(
                    "dislocation {n} has zero Burgers vector"
                )));
            }
            if !domain.contains(d.position, 0.0) {
                return Err(Error::BoundaryMarginViolation {
                    n,
                    dist: 0.0,
                    required: 2.0 * s,
                });
            }
            let dist = domain.distance_to_boundary(d.position);
            if dist < 2.0 * s {
                return Err(Error::BoundaryMarginViolation {
                    n,
                    dist,
                    required: 2.0 * s,
                });
            }
        }
        for i in 0..self.entries.len() {
            for j in i + 1..self.entries.len() {
                let dist = (self.entries[i].position - self.entries[j].position).norm();
                if dist < 4.0 * s {
                    return Err(Error::SeparationViolation {
                        n1: i,
                        n2: j,
                        dist,
                        required: 4.0 * s,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Piecewise-constant reconstruction of a strain: the cell matrix on every
/// zero-circulation cell, zero on the ε-cores of the measure and on
/// incompatible cells.
#[derive(Debug, Clone)]
pub struct PiecewiseField {
    matrices: Vec<Option<Mat2>>,
    cores: Vec<Vec2>,
    core_radius: f64,
}

/// Builds the reconstruction, requiring μ[β] to agree with `mu`: every
/// incompatible cell must be an atom of the measure.
pub fn piecewise_field(
    dom: &LatticeDomain,
    beta: &DiscreteStrain,
    mu: &DislocationMeasure,
) -> Result<PiecewiseField> {
    let eps = dom.epsilon();
    let tol = TOL_CIRC_REL * eps;
    let mut matrices = Vec::with_capacity(dom.num_triangles());
    for ti in 0..dom.num_triangles() as u32 {
        let c = circulation(dom, beta, ti);
        if c.norm() > tol {
            let bary = dom.barycenter(ti);
            let is_atom = mu
                .entries
                .iter()
                .any(|d| (d.position - bary).norm() <= 1e-9 * eps);
            if !is_atom {
                return Err(Error::NotCompatible {
                    triangle: dom.triangles()[ti as usize],
                    circ_norm: c.norm(),
                });
            }
            matrices.push(None);
        } else {
            matrices.push(Some(triangle_matrix(dom, beta, ti)?));
        }
    }
    Ok(PiecewiseField {
        matrices,
        cores: mu.entries.iter().map(|d| d.position).collect(),
        core_radius: eps,
    })
}

impl PiecewiseField {
    /// Field without core excision, for defect-free strains.
    pub fn without_cores(dom: &LatticeDomain, beta: &DiscreteStrain) -> Result<Self> {
        let empty = DislocationMeasure::new(Vec::new(), dom.epsilon(), 0.5)?;
        piecewise_field(dom, beta, &empty)
    }

    pub fn matrix(&self, ti: u32) -> Option<Mat2> {
        self.matrices[ti as usize]
    }

    /// Area of cell `tri_pts` ∩ A_{r,R}(center), with the ε-cores removed.
    fn clipped_area(&self, tri_pts: &[Vec2; 3], center: Vec2, r: f64, big_r: f64) -> f64 {
        let outer = polygon_disk_area(tri_pts, center, big_r);
        if outer <= 0.0 {
            return 0.0;
        }
        let mut area = outer - polygon_disk_area(tri_pts, center, r);
        for &c in &self.cores {
            if c == center {
                // the annulus around a core already excludes it when r >= core radius
                if r >= self.core_radius {
                    continue;
                }
            }
            let d = (c - center).norm();
            if d - self.core_radius >= big_r || d + self.core_radius <= r {
                continue;
            }
            // core overlaps the annulus: clip the cell against a fine
            // polygonal core and subtract its annulus-clipped area
            let core_poly = Polygon::regular(c, self.core_radius, 1024);
            let clipped = clip_convex(tri_pts, core_poly.vertices());
            if clipped.len() >= 3 {
                area -= polygon_disk_area(&clipped, center, big_r)
                    - polygon_disk_area(&clipped, center, r);
            }
        }
        area.max(0.0)
    }

    /// ∫_{A_{r,R}(center)} field dx together with the covered area.
    pub fn integrate_annulus(
        &self,
        dom: &LatticeDomain,
        center: Vec2,
        r: f64,
        big_r: f64,
    ) -> Result<(Mat2, f64)> {
        if !(0.0 <= r && r < big_r) {
            return Err(Error::BadAnnulus { r, big_r });
        }
        let mut total = Mat2::ZERO;
        let mut covered = 0.0;
        for ti in 0..dom.num_triangles() as u32 {
            let bary = dom.barycenter(ti);
            let d = (bary - center).norm();
            // cells are within 1/sqrt(3) ε of their barycenter
            let reach = dom.epsilon();
            if d - reach > big_r || d + reach < r {
                continue;
            }
            let vs = dom.triangle_vertex_indices(ti);
            let tri = [
                dom.node_position(vs[0]),
                dom.node_position(vs[1]),
                dom.node_position(vs[2]),
            ];
            let a = self.clipped_area(&tri, center, r, big_r);
            if a > 0.0 {
                covered += a;
                if let Some(m) = self.matrices[ti as usize] {
                    total += m * a;
                }
            }
        }
        Ok((total, covered))
    }

    /// Area-weighted average over the annulus. The denominator is the part
    /// of the annulus covered by lattice cells (cores count as covered with
    /// value zero), so constant fields average to themselves exactly even
    /// on partially covered annuli.
    pub fn annulus_average(
        &self,
        dom: &LatticeDomain,
        center: Vec2,
        r: f64,
        big_r: f64,
    ) -> Result<Mat2> {
        let (total, covered) = self.integrate_annulus(dom, center, r, big_r)?;
        if covered <= 0.0 {
            return Err(Error::EmptyIntersection);
        }
        Ok(total * (1.0 / covered))
    }
}

/// Sutherland-Hodgman clip of a convex subject polygon against a convex
/// CCW clip polygon.
fn clip_convex(subject: &[Vec2], clip: &[Vec2]) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if out.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let dir = b - a;
        let input = std::mem::take(&mut out);
        let m = input.len();
        for k in 0..m {
            let p = input[k];
            let q = input[(k + 1) % m];
            let pin = dir.cross(p - a) >= 0.0;
            let qin = dir.cross(q - a) >= 0.0;
            if pin {
                out.push(p);
            }
            if pin != qin {
                let dp = dir.cross(p - a);
                let dq = dir.cross(q - a);
                let t = dp / (dp - dq);
                out.push(p + (q - p) * t);
            }
        }
    }
    out
}

/// The six lattice rotations R(kπ/3) that map 𝕋 onto itself.
pub fn lattice_rotations() -> [Mat2; 6] {
    std::array::from_fn(|k| Mat2::rotation(k as f64 * std::f64::consts::PI / 3.0))
}

/// Frobenius distance of `m` to the coset Rⁿ·ℐ(𝕋).
pub fn distance_to_rotated_lattice_group(m: &Mat2, frame: &Mat2) -> f64 {
    lattice_rotations()
        .iter()
        .map(|r| (*m - frame.mul_mat(r)).norm())
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone)]
pub struct AtomCheck {
    pub dislocation: usize,
    pub matched_triangle: Option<u32>,
    pub weight_error: f64,
}

#[derive(Debug, Clone)]
pub struct AnnulusCheck {
    pub dislocation: usize,
    pub average: Mat2,
    /// dist(average, Rⁿ ℐ(𝕋)) in Frobenius norm.
    pub distance: f64,
}

/// Admissibility report: exact atom matching of μ[β] against μ plus the
/// annulus-average distances, judged at the tolerance δ.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub atoms_match: bool,
    pub spurious_atoms: usize,
    pub atom_checks: Vec<AtomCheck>,
    pub annulus_checks: Vec<AnnulusCheck>,
    pub delta: f64,
    pub pass: bool,
}

/// Default annulus tolerance δ_ε = ε^(1-γ) |log ε| (vanishing as ε → 0).
pub fn default_delta(epsilon: f64, gamma: f64) -> f64 {
    epsilon.powf(1.0 - gamma) * epsilon.ln().abs()
}

/// Checks whether β is admissible for μ: (a) μ[β] = μ atom by atom, and
/// (b) the average of the reconstruction over A_{ε,ε^γ}(xⁿ) lies within δ
/// of Rⁿ ℐ(𝕋) for every dislocation.
pub fn check_admissible(
    dom: &LatticeDomain,
    beta: &DiscreteStrain,
    mu: &DislocationMeasure,
    delta: Option<f64>,
) -> AdmissibilityReport {
    let eps = dom.epsilon();
    let delta = delta.unwrap_or_else(|| default_delta(eps, mu.gamma));
    let atoms = burgers_measure(dom, beta, None);
    let weight_tol = TOL_CIRC_REL * eps;

    let mut used = vec![false; atoms.len()];
    let mut atom_checks = Vec::new();
    let mut atoms_match = true;
    for (n, d) in mu.entries.iter().enumerate() {
        let matched = atoms
            .iter()
            .enumerate()
            .find(|(k, a)| !used[*k] && (a.position - d.position).norm() <= 1e-9 * eps);
        match matched {
            Some((k, a)) => {
                used[k] = true;
                let werr = (a.weight - d.weight(eps)).norm();
                if werr > weight_tol {
                    atoms_match = false;
                }
                atom_checks.push(AtomCheck {
                    dislocation: n,
                    matched_triangle: Some(a.triangle),
                    weight_error: werr,
                });
            }
            None => {
                atoms_match = false;
                atom_checks.push(AtomCheck {
                    dislocation: n,
                    matched_triangle: None,
                    weight_error: f64::INFINITY,
                });
            }
        }
    }
    let spurious = used.iter().filter(|u| !**u).count();
    if spurious > 0 {
        atoms_match = false;
    }

    let mut annulus_checks = Vec::new();
    let mut annuli_ok = true;
    if let Ok(field) = piecewise_field(dom, beta, mu) {
        for (n, d) in mu.entries.iter().enumerate() {
            let avg = field.annulus_average(dom, d.position, eps, mu.scale());
            match avg {
                Ok(average) => {
                    let distance = distance_to_rotated_lattice_group(&average, &d.frame());
                    if distance > delta {
                        annuli_ok = false;
                    }
                    annulus_checks.push(AnnulusCheck {
                        dislocation: n,
                        average,
                        distance,
                    });
                }
                Err(_) => {
                    annuli_ok = false;
                }
            }
        }
    } else {
        annuli_ok = atoms_match; // unmatched incompatible cells already flagged
    }

    AdmissibilityReport {
        atoms_match,
        spurious_atoms: spurious,
        atom_checks,
        annulus_checks,
        delta,
        pass: atoms_match && annuli_ok,
    }
}

// ---------------------------------------------------------------------------
// CSV serialization
// ---------------------------------------------------------------------------

use crate::io::fmt_f64;

/// Strain rows `p1,q1,p2,q2,bx,by`, one per canonical bond, in bond order.
pub fn strain_to_csv(dom: &LatticeDomain, beta: &DiscreteStrain) -> String {
    let mut out = String::from("p1,q1,p2,q2,bx,by\n");
    for (bi, &(a, b)) in dom.bonds().iter().enumerate() {
        let (na, nb) = (dom.nodes()[a as usize], dom.nodes()[b as usize]);
        let v = beta.values()[bi];
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            na.p,
            na.q,
            nb.p,
            nb.q,
            fmt_f64(v.x),
            fmt_f64(v.y)
        ));
    }
    out
}

pub fn strain_from_csv(dom: &LatticeDomain, text: &str) -> Result<DiscreteStrain> {
    let mut beta = DiscreteStrain::zeros(dom);
    let mut seen = vec![false; dom.num_bonds()];
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.starts_with("p1") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!(
                "line {}: expected 6 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_i = |s: &str| -> Result<i32> {
            s.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let parse_f = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let i = NodeId::new(parse_i(fields[0])?, parse_i(fields[1])?);
        let j = NodeId::new(parse_i(fields[2])?, parse_i(fields[3])?);
        let v = Vec2::new(parse_f(fields[4])?, parse_f(fields[5])?);
        beta.set(dom, i, j, v)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        let ii = dom.node_idx(i).unwrap();
        let d = (j.p - i.p, j.q - i.q);
        let dir = NEIGHBOR_STEPS.iter().position(|&s| s == d).unwrap();
        seen[dom.bond_at(ii, dir).unwrap() as usize] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (a, b) = dom.bond_nodes(missing as u32);
        return Err(Error::Parse(format!(
            "missing strain value for bond {a:?}-{b:?}"
        )));
    }
    Ok(beta)
}

/// Measure rows `x,y,b1,b2,theta`.
pub fn measure_to_csv(mu: &DislocationMeasure) -> String {
    let mut out = String::from("x,y,b1,b2,theta\n");
    for d in &mu.entries {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(d.position.x),
            fmt_f64(d.position.y),
            d.burgers.0,
            d.burgers.1,
            fmt_f64(d.frame_angle)
        ));
    }
    out
}

pub fn measure_from_csv(text: &str, epsilon: f64, gamma: f64) -> Result<DislocationMeasure> {
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.starts_with('x') {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse(format!(
                "line {}: expected 5 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let pf = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        let pi = |s: &str| -> Result<i32> {
            s.trim()
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
        };
        entries.push(Dislocation {
            position: Vec2::new(pf(fields[0])?, pf(fields[1])?),
            burgers: (pi(fields[2])?, pi(fields[3])?),
            frame_angle: pf(fields[4])?,
        });
    }
    DislocationMeasure::new(entries, epsilon, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_domain, LatticeSpec, TriangleId};

    fn square_domain(side: f64, eps: f64) -> LatticeDomain {
        let poly = Polygon::new(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(side, 0.0),
            Vec2::new(side, side),
            Vec2::new(0.0, side),
        ])
        .unwrap();
        build_domain(LatticeSpec::new(eps, poly).unwrap()).unwrap()
    }

    fn linear_strain(dom: &LatticeDomain, m: Mat2) -> DiscreteStrain {
        let eps = dom.epsilon();
        DiscreteStrain::from_fn(dom, |i, j| m.mul_vec(j.position(eps) - i.position(eps)))
    }

    #[test]
    fn linear_strains_have_zero_circulation() {
        let dom = square_domain(6.0, 1.0);
        let m = Mat2([[1.3, -0.2], [0.4, 0.9]]);
        let beta = linear_strain(&dom, m);
        for ti in 0..dom.num_triangles() as u32 {
            assert!(circulation(&dom, &beta, ti).norm() < 1e-13);
        }
        assert!(burgers_measure(&dom, &beta, None).is_empty());
    }

    #[test]
    fn triangle_matrix_recovers_linear_maps() {
        let dom = square_domain(6.0, 0.5);
        for m in [
            Mat2::IDENTITY,
            Mat2::rotation(0.9),
            Mat2([[2.0, 0.3], [0.0, 1.1]]),
        ] {
            let beta = linear_strain(&dom, m);
            for ti in (0..dom.num_triangles() as u32).step_by(7) {
                let rec = triangle_matrix(&dom, &beta, ti).unwrap();
                assert!((rec - m).norm() < 1e-12, "{rec:?} vs {m:?}");
            }
        }
    }

    #[test]
    fn incompatible_triangle_is_rejected() {
        let dom = square_domain(6.0, 1.0);
        let mut beta = linear_strain(&dom, Mat2::IDENTITY);
        // corrupt a single bond in the bulk
        let (i, j) = (NodeId::new(2, 2), NodeId::new(3, 2));
        let old = beta.get(&dom, i, j).unwrap();
        beta.set(&dom, i, j, old + Vec2::new(1.0, 0.0)).unwrap();
        let t = dom.triangle_idx(TriangleId::up(2, 2)).unwrap();
        assert!(matches!(
            triangle_matrix(&dom, &beta, t),
            Err(Error::NotCompatible { .. })
        ));
    }

    #[test]
    fn single_bond_slip_creates_a_dipole() {
        // adding +ε e1 to one interior bond flips the circulations of the
        // two cells sharing it by opposite amounts
        let dom = square_domain(8.0, 1.0);
        let mut beta = linear_strain(&dom, Mat2::rotation(0.3));
        let (i, j) = (NodeId::new(3, 3), NodeId::new(4, 3));
        let old = beta.get(&dom, i, j).unwrap();
        beta.set(&dom, i, j, old + Vec2::new(1.0, 0.0)).unwrap();
        let atoms = burgers_measure(&dom, &beta, None);
        assert_eq!(atoms.len(), 2);
        let total = atoms[0].weight + atoms[1].weight;
        assert!(total.norm() < 1e-12);
        assert!((atoms[0].weight.norm() - 1.0).abs() < 1e-12);
        assert_eq!(
            atoms.iter().filter(|a| a.lattice_coords.is_some()).count(),
            2
        );
    }

    #[test]
    fn rhombus_circulation_telescopes() {
        // circulation over the two cells of a rhombus equals the boundary
        // circulation: interior-bond contributions cancel
        let dom = square_domain(8.0, 1.0);
        // deterministic pseudo-random antisymmetric strain
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let beta = DiscreteStrain::from_fn(&dom, |_, _| Vec2::new(rnd(), rnd()));
        let up = dom.triangle_idx(TriangleId::up(3, 3)).unwrap();
        let down = dom.triangle_idx(TriangleId::down(3, 4)).unwrap();
        // up(3,3) = {(3,3),(4,3),(3,4)} and down(3,4) = {(3,4),(4,3),(4,4)}
        // share the bond (4,3)-(3,4); their circulations sum to the rhombus
        // boundary circulation
        let two_cells = circulation(&dom, &beta, up) + circulation(&dom, &beta, down);
        let ring = [
            NodeId::new(3, 3),
            NodeId::new(4, 3),
            NodeId::new(4, 4),
            NodeId::new(3, 4),
        ];
        let mut boundary = Vec2::ZERO;
        for k in 0..4 {
            boundary += beta.get(&dom, ring[k], ring[(k + 1) % 4]).unwrap();
        }
        assert!((two_cells - boundary).norm() < 1e-14);
    }

    #[test]
    fn discrete_stokes_on_random_strain() {
        // sum of all circulations = circulation along the domain boundary;
        // test the weaker consequence that gradient strains sum to zero and
        // adding a gradient leaves the measure invariant
        let dom = square_domain(6.0, 1.0);
        let mut state = 17u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let beta = DiscreteStrain::from_fn(&dom, |_, _| Vec2::new(rnd(), rnd()));
        let u: Vec<Vec2> = (0..dom.num_nodes())
            .map(|_| Vec2::new(rnd(), rnd()))
            .collect();
        let grad = DiscreteStrain::from_displacement(&dom, &u);
        let mut shifted = beta.clone();
        for (v, g) in shifted.values_mut().iter_mut().zip(grad.values()) {
            *v += *g;
        }
        let a1 = burgers_measure(&dom, &beta, Some(1e-30));
        let a2 = burgers_measure(&dom, &shifted, Some(1e-30));
        assert_eq!(a1.len(), a2.len());
        for (x, y) in a1.iter().zip(&a2) {
            assert_eq!(x.triangle, y.triangle);
            assert!((x.weight - y.weight).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_field_averages_exactly() {
        let dom = square_domain(10.0, 1.0);
        let m = Mat2([[0.7, 0.1], [-0.3, 1.2]]);
        let beta = linear_strain(&dom, m);
        let field = PiecewiseField::without_cores(&dom, &beta).unwrap();
        let avg = field
            .annulus_average(&dom, Vec2::new(5.0, 4.0), 0.8, 2.9)
            .unwrap();
        assert!((avg - m).norm() < 1e-12, "{avg:?}");
        // partially covered annulus still averages exactly for constants
        let avg2 = field
            .annulus_average(&dom, Vec2::new(0.0, 0.0), 0.5, 3.0)
            .unwrap();
        assert!((avg2 - m).norm() < 1e-12);
        // linearity in the field
        let beta2 = linear_strain(&dom, m * 2.0);
        let field2 = PiecewiseField::without_cores(&dom, &beta2).unwrap();
        let avg3 = field2
            .annulus_average(&dom, Vec2::new(5.0, 4.0), 0.8, 2.9)
            .unwrap();
        assert!((avg3 - m * 2.0).norm() < 1e-12);
    }

    #[test]
    fn empty_annulus_is_an_error() {
        let dom = square_domain(6.0, 1.0);
        let beta = linear_strain(&dom, Mat2::IDENTITY);
        let field = PiecewiseField::without_cores(&dom, &beta).unwrap();
        assert!(matches!(
            field.annulus_average(&dom, Vec2::new(100.0, 100.0), 0.5, 1.0),
            Err(Error::EmptyIntersection)
        ));
        assert!(matches!(
            field.annulus_average(&dom, Vec2::ZERO, 2.0, 1.0),
            Err(Error::BadAnnulus { .. })
        ));
    }

    #[test]
    fn zero_strain_with_nonempty_measure_fails_admissibility() {
        let dom = square_domain(10.0, 0.25);
        let beta = DiscreteStrain::zeros(&dom);
        let mu = DislocationMeasure::new(
            vec![Dislocation {
                position: dom.barycenter(dom.nearest_barycenter(Vec2::new(5.0, 5.0))),
                burgers: (1, 0),
                frame_angle: 0.0,
            }],
            0.25,
            0.5,
        )
        .unwrap();
        let rep = check_admissible(&dom, &beta, &mu, None);
        assert!(!rep.atoms_match);
        assert!(!rep.pass);
    }

    #[test]
    fn separation_validation() {
        let poly = Polygon::regular(Vec2::ZERO, 1.0, 6);
        let eps: f64 = 1.0 / 64.0;
        let gamma = 0.5;
        let s = eps.powf(gamma);
        let near = |x: f64| Dislocation {
            position: Vec2::new(x, 0.0),
            burgers: (1, 0),
            frame_angle: 0.0,
        };
        // distance 3 eps^gamma < 4 eps^gamma: rejected
        let mu = DislocationMeasure::new(vec![near(0.0), near(3.0 * s)], eps, gamma).unwrap();
        assert!(matches!(
            mu.validate(&poly),
            Err(Error::SeparationViolation { .. })
        ));
        // boundary margin
        let mu2 = DislocationMeasure::new(vec![near(1.0 - s)], eps, gamma).unwrap();
        assert!(matches!(
            mu2.validate(&poly),
            Err(Error::BoundaryMarginViolation { .. })
        ));
        let mu3 = DislocationMeasure::new(vec![near(0.0), near(5.0 * s)], eps, gamma).unwrap();
        assert!(mu3.validate(&poly).is_ok());
    }

    #[test]
    fn strain_csv_round_trip() {
        let dom = square_domain(4.0, 1.0);
        let m = Mat2([[0.9, 0.2], [-0.1, 1.1]]);
        let beta = linear_strain(&dom, m);
        let csv = strain_to_csv(&dom, &beta);
        let back = strain_from_csv(&dom, &csv).unwrap();
        for (a, b) in beta.values().iter().zip(back.values()) {
            assert_eq!(a, b);
        }
        // missing bond detected
        let truncated: String = csv.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(strain_from_csv(&dom, &truncated).is_err());
    }

    #[test]
    fn measure_csv_round_trip() {
        let mu = DislocationMeasure::new(
            vec![Dislocation {
                position: Vec2::new(0.125, -0.25),
                burgers: (2, -1),
                frame_angle: 0.5,
            }],
            1.0 / 64.0,
            0.5,
        )
        .unwrap();
        let txt = measure_to_csv(&mu);
        let back = measure_from_csv(&txt, mu.epsilon, mu.gamma).unwrap();
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back.entries[0], mu.entries[0]);
    }
}
