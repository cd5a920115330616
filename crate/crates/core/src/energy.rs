//! The nonlinear lattice energy and its continuum limits.
//!
//! The energy of a strain β is a two-body term over bonds plus a three-body
//! term over counter-clockwise wedges (pairs of bonds 60° apart at a node):
//!
//!   E(β) = Σ_bonds ε² ψ1(|β(i,j)|/ε)
//!        + Σ_wedges ε² ψ2( 2/(√3 ε²) ⟨β(i,j) ∧ β(i,k), e3⟩ )
//!
//! Each unordered bond and each wedge counts once. On a compatible cell the
//! per-cell energy equals (√3/4) ε² W(M) with M the cell matrix and W the
//! continuum density below; localized energies split cell terms and
//! half-weighted boundary bonds.

use crate::error::{Error, Result};
use crate::geometry::{Mat2, Polygon, Vec2};
use crate::lattice::{LatticeDomain, SQRT3};
use crate::strain::DiscreteStrain;

/// A scalar interaction potential with its well at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// ψ(t) = (α/2)(t-1)², so ψ''(1) = α.
    Quadratic { alpha: f64 },
}

impl Potential {
    pub fn quadratic(alpha: f64) -> Self {
        Potential::Quadratic { alpha }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Potential::Quadratic { alpha } => 0.5 * alpha * (t - 1.0) * (t - 1.0),
        }
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            Potential::Quadratic { alpha } => alpha * (t - 1.0),
        }
    }

    /// Curvature at the well.
    pub fn curvature(&self) -> f64 {
        match self {
            Potential::Quadratic { alpha } => *alpha,
        }
    }
}

/// The potential pair (ψ1, ψ2): bond stretching and wedge area change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialPair {
    pub psi1: Potential,
    pub psi2: Potential,
}

impl Default for PotentialPair {
    /// ψ1(t) = ψ2(t) = (t-1)², i.e. α1 = α2 = 2.
    fn default() -> Self {
        PotentialPair {
            psi1: Potential::quadratic(2.0),
            psi2: Potential::quadratic(2.0),
        }
    }
}

impl PotentialPair {
    pub fn quadratic(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "potential curvatures must be positive, got alpha1={alpha1}, alpha2={alpha2}"
            )));
        }
        Ok(PotentialPair {
            psi1: Potential::quadratic(alpha1),
            psi2: Potential::quadratic(alpha2),
        })
    }

    pub fn alpha1(&self) -> f64 {
        self.psi1.curvature()
    }

    pub fn alpha2(&self) -> f64 {
        self.psi2.curvature()
    }
}

/// Isotropic linearized elasticity tensor, acting as the Hessian form
/// 𝐂δ:δ = λ (tr δ)² + 2μ |δ_sym|².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicTensor {
    pub lambda: f64,
    pub mu: f64,
}

impl IsotropicTensor {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && lambda + mu > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "need mu > 0 and lambda + mu > 0, got lambda={lambda}, mu={mu}"
            )));
        }
        Ok(IsotropicTensor { lambda, mu })
    }

    /// 𝐂δ = λ (tr δ) Id + 2μ δ_sym.
    pub fn apply(&self, d: &Mat2) -> Mat2 {
        let mut out = d.sym() * (2.0 * self.mu);
        let t = self.lambda * d.trace();
        out.0[0][0] += t;
        out.0[1][1] += t;
        out
    }

    /// 𝐂δ:δ.
    pub fn quadratic_form(&self, d: &Mat2) -> f64 {
        let tr = d.trace();
        self.lambda * tr * tr + 2.0 * self.mu * d.sym().norm_sq()
    }

    /// Plane-strain Poisson ratio λ / (2(λ+μ)).
    pub fn poisson(&self) -> f64 {
        self.lambda / (2.0 * (self.lambda + self.mu))
    }
}

/// Lamé moduli induced by the potential curvatures:
/// λ = (√3/4) α1 + 4√3 α2 and μ = (√3/4) α1.
pub fn linearized_tensor(pot: &PotentialPair) -> IsotropicTensor {
    let a1 = pot.alpha1();
    let a2 = pot.alpha2();
    IsotropicTensor {
        lambda: SQRT3 / 4.0 * a1 + 4.0 * SQRT3 * a2,
        mu: SQRT3 / 4.0 * a1,
    }
}

const NU: Vec2 = Vec2 {
    x: 0.5,
    y: SQRT3 / 2.0,
};
const ETA: Vec2 = Vec2 {
    x: -0.5,
    y: SQRT3 / 2.0,
};

/// Continuum energy density
/// W(M) = 4/√3 [ ½(ψ1(|M e1|) + ψ1(|M ν|) + ψ1(|M η|)) + 3 ψ2(det M) ].
pub fn continuum_density(m: &Mat2, pot: &PotentialPair) -> f64 {
    let e1 = Vec2::new(1.0, 0.0);
    let stretch = pot.psi1.eval(m.mul_vec(e1).norm())
        + pot.psi1.eval(m.mul_vec(NU).norm())
        + pot.psi1.eval(m.mul_vec(ETA).norm());
    4.0 / SQRT3 * (0.5 * stretch + 3.0 * pot.psi2.eval(m.det()))
}

#[inline]
fn wedge_argument(b1: Vec2, b2: Vec2, eps: f64) -> f64 {
    2.0 / (SQRT3 * eps * eps) * b1.cross(b2)
}

pub(crate) const ENERGY_CHUNK: usize = 8192;

#[inline]
pub(crate) fn oriented_value(bonds: &[(u32, u32)], values: &[Vec2], bond: u32, from: u32) -> Vec2 {
    let (a, _) = bonds[bond as usize];
    let v = values[bond as usize];
    if from == a {
        v
    } else {
        -v
    }
}

/// Energy of a bond-value array. Partial sums are taken over fixed-size
/// chunks (computed in parallel) and folded in index order, so the result
/// is bit-stable at any worker count and shared by every energy path.
pub(crate) fn energy_of_values(dom: &LatticeDomain, values: &[Vec2], pot: &PotentialPair) -> f64 {
    use rayon::prelude::*;
    let eps = dom.epsilon();
    let eps2 = eps * eps;
    let bond_chunk = |chunk: &[Vec2]| -> f64 {
        let mut s = 0.0;
        for v in chunk {
            s += eps2 * pot.psi1.eval(v.norm() / eps);
        }
        s
    };
    let nb = dom.neighbor_table();
    let bonds = dom.bonds();
    let wedge_chunk = |ci: usize, chunk: &[[i32; 6]]| -> f64 {
        let base = ci * ENERGY_CHUNK;
        let mut s = 0.0;
        for (off, row) in chunk.iter().enumerate() {
            let n = (base + off) as u32;
            for d in 0..6 {
                let (b1, b2) = (row[d], row[(d + 1) % 6]);
                if b1 >= 0 && b2 >= 0 {
                    let v1 = oriented_value(bonds, values, b1 as u32, n);
                    let v2 = oriented_value(bonds, values, b2 as u32, n);
                    s += eps2 * pot.psi2.eval(wedge_argument(v1, v2, eps));
                }
            }
        }
        s
    };
    // small problems skip the thread pool; the chunked partial sums are
    // identical either way
    let (bond_e, wedge_e) = if values.len() <= 2 * ENERGY_CHUNK {
        (
            values.chunks(ENERGY_CHUNK).map(bond_chunk).sum::<f64>(),
            nb.chunks(ENERGY_CHUNK)
                .enumerate()
                .map(|(ci, c)| wedge_chunk(ci, c))
                .sum::<f64>(),
        )
    } else {
        let bp: Vec<f64> = values.par_chunks(ENERGY_CHUNK).map(bond_chunk).collect();
        let wp: Vec<f64> = nb
            .par_chunks(ENERGY_CHUNK)
            .enumerate()
            .map(|(ci, c)| wedge_chunk(ci, c))
            .collect();
        (bp.iter().sum::<f64>(), wp.iter().sum::<f64>())
    };
    bond_e + wedge_e
}

/// Total lattice energy of a strain over the whole domain.
pub fn total_energy(dom: &LatticeDomain, beta: &DiscreteStrain, pot: &PotentialPair) -> f64 {
    energy_of_values(dom, beta.values(), pot)
}

/// Per-cell energy: half the bond terms of the cell's three edges plus its
/// three wedge terms. Works on incompatible cells too (raw bond sums).
pub fn triangle_energy(
    dom: &LatticeDomain,
    beta: &DiscreteStrain,
    ti: u32,
    pot: &PotentialPair,
) -> f64 {
    let eps = dom.epsilon();
    let eps2 = eps * eps;
    let vs = dom.triangle_vertex_indices(ti);
    let mut vals = [Vec2::ZERO; 3]; // beta along edge k: vs[k] -> vs[k+1]
    for k in 0..3 {
        let (i, j) = (vs[k], vs[(k + 1) % 3]);
        let ni = dom.nodes()[i as usize];
        let nj = dom.nodes()[j as usize];
        let d = (nj.p - ni.p, nj.q - ni.q);
        let dir = crate::lattice::NEIGHBOR_STEPS
            .iter()
            .position(|&s| s == d)
            .expect("edge step");
        let b = dom.bond_at(i, dir).expect("edge bond");
        vals[k] = beta.oriented(dom, b, i);
    }
    let mut e = 0.0;
    for v in vals {
        e += 0.5 * eps2 * pot.psi1.eval(v.norm() / eps);
    }
    // wedge at vertex k: bonds to the other two vertices in CCW order
    // at vs[0]: (v0->v1, v0->v2) = (vals[0], -vals[2])
    // at vs[1]: (v1->v2, v1->v0) = (vals[1], -vals[0])
    // at vs[2]: (v2->v0, v2->v1) = (vals[2], -vals[1])
    for k in 0..3 {
        let b1 = vals[k];
        let b2 = -vals[(k + 2) % 3];
        e += eps2 * pot.psi2.eval(wedge_argument(b1, b2, eps));
    }
    e
}

/// Localized energy over a subregion A: full per-cell energies for cells
/// contained in A plus half-weighted bond terms on bonds belonging to
/// exactly one included cell.
pub fn localized_energy(
    dom: &LatticeDomain,
    beta: &DiscreteStrain,
    pot: &PotentialPair,
    region: &Polygon,
) -> f64 {
    let eps = dom.epsilon();
    let eps2 = eps * eps;
    let tol = dom.spec().tolerance();
    let inside = |ti: u32| -> bool {
        let t = dom.triangles()[ti as usize];
        t.vertices()
            .iter()
            .all(|v| region.contains(v.position(eps), tol))
            && region.contains(t.barycenter(eps), tol)
    };
    let mut bond_count = vec![0u8; dom.num_bonds()];
    let mut e = 0.0;
    for ti in 0..dom.num_triangles() as u32 {
        if !inside(ti) {
            continue;
        }
        e += triangle_energy(dom, beta, ti, pot);
        let vs = dom.triangle_vertex_indices(ti);
        for k in 0..3 {
            let (i, j) = (vs[k], vs[(k + 1) % 3]);
            let ni = dom.nodes()[i as usize];
            let nj = dom.nodes()[j as usize];
            let d = (nj.p - ni.p, nj.q - ni.q);
            let dir = crate::lattice::NEIGHBOR_STEPS
                .iter()
                .position(|&s| s == d)
                .unwrap();
            bond_count[dom.bond_at(i, dir).unwrap() as usize] += 1;
        }
    }
    for (bi, &count) in bond_count.iter().enumerate() {
        if count == 1 {
            let v = beta.values()[bi];
            e += 0.5 * eps2 * pot.psi1.eval(v.norm() / eps);
        }
    }
    e
}

/// Outcome of the finite-difference linearization check of W at the
/// identity.
#[derive(Debug, Clone)]
pub struct HessianCheck {
    pub max_rel_err: f64,
    pub worst_direction: Mat2,
    pub directions: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the finite-difference Hessian of W at Id against the
/// linearized form λ|tr δ|² + (√3/2) α1 |δ_sym|² on random directions
/// (central differences, step 1e-5, relative tolerance 1e-4).
pub fn density_hessian_check(pot: &PotentialPair, directions: usize) -> HessianCheck {
    let tensor = linearized_tensor(pot);
    let h = 1e-5;
    let tol = 1e-4;
    let mut state = 0x853c49e6748fea9bu64;
    let mut rnd = || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let mut worst = Mat2::ZERO;
    let mut max_rel = 0.0f64;
    for _ in 0..directions {
        let mut d = Mat2([[rnd(), rnd()], [rnd(), rnd()]]);
        let n = d.norm();
        d = d * (1.0 / n);
        let wp = continuum_density(&(Mat2::IDENTITY + d * h), pot);
        let wm = continuum_density(&(Mat2::IDENTITY - d * h), pot);
        let w0 = continuum_density(&Mat2::IDENTITY, pot);
        let fd = (wp - 2.0 * w0 + wm) / (h * h);
        let quad = tensor.quadratic_form(&d);
        let rel = (fd - quad).abs() / quad.abs().max(1e-12);
        if rel > max_rel {
            max_rel = rel;
            worst = d;
        }
    }
    HessianCheck {
        max_rel_err: max_rel,
        worst_direction: worst,
        directions,
        tol,
        pass: max_rel <= tol,
    }
}
