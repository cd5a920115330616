//! Construction of near-optimal discrete strains for a prescribed
//! dislocation measure.
//!
//! Given dislocations ξ^k = R b^k at lattice-snapped positions x^k, the
//! strain is assembled as
//!
//!   β(i,j) = R (j-i) + ε ( u(j) - u(i) - σ(i,j) ),
//!
//! where u blends the rotated Volterra displacements of the individual
//! dislocations (near each core) into their superposition plus a scaled
//! far-field potential (away from all cores), and σ is a slip field
//! supported on the bonds crossing the horizontal cut rays from the
//! dislocation points. Circulations then telescope: dβ(T) = -ε Σ σ over
//! the cell boundary, so the Burgers measure of the output equals the
//! prescribed measure exactly, independent of floating-point details of u.

use crate::elasticity::isotropic_edge_displacement;
use crate::energy::IsotropicTensor;
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::lattice::LatticeDomain;
use crate::strain::{lattice_vector, DiscreteStrain, DislocationMeasure};

/// C¹ cutoff: 1 on (-∞, 1], cubic smoothstep down to 0 on [1, 2], 0 on
/// [2, ∞).
pub fn cutoff(s: f64) -> f64 {
    if s <= 1.0 {
        1.0
    } else if s >= 2.0 {
        0.0
    } else {
        let t = s - 1.0;
        1.0 - t * t * (3.0 - 2.0 * t)
    }
}

/// Slip variable: an ℝ²-valued bond field supported on cut-crossing bonds,
/// stored per canonical bond (value for the canonical orientation).
#[derive(Debug, Clone)]
pub struct SlipField {
    values: Vec<Vec2>,
}

impl SlipField {
    pub fn zeros(dom: &LatticeDomain) -> Self {
        SlipField {
            values: vec![Vec2::ZERO; dom.num_bonds()],
        }
    }

    pub fn values(&self) -> &[Vec2] {
        &self.values
    }

    #[inline]
    pub fn bond_value(&self, bond: u32) -> Vec2 {
        self.values[bond as usize]
    }

    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|v| v.norm_sq() > 0.0).count()
    }
}

/// Far-field strain together with a Lipschitz potential.
#[derive(Debug, Clone, Copy)]
pub enum FarField {
    Zero,
    /// Constant strain M with potential u(x) = M x.
    Constant(Mat2),
}

impl FarField {
    pub fn potential(&self, x: Vec2) -> Vec2 {
        match self {
            FarField::Zero => Vec2::ZERO,
            FarField::Constant(m) => m.mul_vec(x),
        }
    }

    pub fn gradient(&self) -> Mat2 {
        match self {
            FarField::Zero => Mat2::ZERO,
            FarField::Constant(m) => *m,
        }
    }
}

/// Inputs of the recovery construction: the (snapped) measure, the global
/// frame rotation shared by all dislocations, the far field, and the
/// linearized tensor driving the Volterra displacements.
#[derive(Debug, Clone)]
pub struct RecoveryInput {
    pub mu: DislocationMeasure,
    pub rotation_angle: f64,
    pub far_field: FarField,
    pub tensor: IsotropicTensor,
}

/// Output: the strain, the displacement it was built from, and the slip.
#[derive(Debug, Clone)]
pub struct RecoveryOutput {
    pub beta: DiscreteStrain,
    pub displacement: Vec<Vec2>,
    pub slip: SlipField,
}

/// Moves every dislocation to the nearest cell barycenter (ties broken by
/// the smallest triangle id) and re-checks the separation constraints.
pub fn snap_positions(mu: &DislocationMeasure, dom: &LatticeDomain) -> Result<DislocationMeasure> {
    let s = mu.scale();
    for (n, d) in mu.entries.iter().enumerate() {
        let dist = dom.polygon().distance_to_boundary(d.position);
        if !dom.polygon().contains(d.position, 0.0) || dist < 2.0 * s {
            return Err(Error::BoundaryMarginViolation {
                n,
                dist,
                required: 2.0 * s,
            });
        }
    }
    let mut snapped = mu.clone();
    for d in &mut snapped.entries {
        let ti = dom.nearest_barycenter(d.position);
        d.position = dom.barycenter(ti);
    }
    for i in 0..snapped.entries.len() {
        for j in i + 1..snapped.entries.len() {
            let dist = (snapped.entries[i].position - snapped.entries[j].position).norm();
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
    Ok(snapped)
}

/// Builds the slip field of a snapped measure: for each dislocation, the
/// horizontal cut ray x^k + {(t, 0) : t ≥ 0} selects the bonds it crosses;
/// a crossing bond (i,j) picks up -ξ^k when i lies below the cut and +ξ^k
/// when i lies above, summed over dislocations.
pub fn build_slip(mu: &DislocationMeasure, dom: &LatticeDomain) -> Result<SlipField> {
    let eps = dom.epsilon();
    let mut slip = SlipField::zeros(dom);
    for d in &mu.entries {
        let xi = d.frame().mul_vec(lattice_vector(d.burgers.0, d.burgers.1));
        let (xc, yc) = (d.position.x, d.position.y);
        for (bi, &(a, b)) in dom.bonds().iter().enumerate() {
            let pa = dom.node_position(a);
            let pb = dom.node_position(b);
            // barycenter rows are offset by a third of the node row spacing
            if (pa.y - yc).abs() < 1e-9 * eps || (pb.y - yc).abs() < 1e-9 * eps {
                return Err(Error::PreconditionViolation(format!(
                    "cut through a lattice node at height {yc}"
                )));
            }
            if (pa.y > yc) == (pb.y > yc) {
                continue;
            }
            let x_cross = pa.x + (yc - pa.y) * (pb.x - pa.x) / (pb.y - pa.y);
            if x_cross <= xc {
                continue;
            }
            // canonical orientation is a -> b; a below the cut means σ(a,b) = -ξ
            let sign = if pa.y < yc { -1.0 } else { 1.0 };
            slip.values[bi] += xi * sign;
        }
    }
    Ok(slip)
}

/// Assembles the recovery strain for a snapped measure.
///
/// The displacement at a node x is chosen by distance to the nearest
/// dislocation x^k (zones: within ε^γ+ε the single rotated Volterra field,
/// within 2(ε^γ+ε) the cutoff blend, beyond that the superposition plus
/// the √|log ε|-scaled far-field potential). Preconditions: blend disks
/// pairwise disjoint and inside the domain, and no cut ray of one
/// dislocation entering another's blend disk.
pub fn build_recovery(input: &RecoveryInput, dom: &LatticeDomain) -> Result<RecoveryOutput> {
    let mu = &input.mu;
    let eps = dom.epsilon();
    let log_factor = eps.ln().abs().sqrt();
    let r_near = mu.scale() + eps;
    let r_blend = 2.0 * r_near;
    let rot = Mat2::rotation(input.rotation_angle);

    for (n, d) in mu.entries.iter().enumerate() {
        if (d.frame_angle - input.rotation_angle).abs() > 1e-12 {
            return Err(Error::PreconditionViolation(format!(
                "dislocation {n} carries frame angle {} but the construction uses {}",
                d.frame_angle, input.rotation_angle
            )));
        }
        let ti = dom.nearest_barycenter(d.position);
        if (dom.barycenter(ti) - d.position).norm() > 1e-9 * eps {
            return Err(Error::PreconditionViolation(format!(
                "dislocation {n} is not at a cell barycenter; snap positions first"
            )));
        }
        let margin = dom.polygon().distance_to_boundary(d.position);
        if margin < r_blend {
            return Err(Error::PreconditionViolation(format!(
                "blend disk of dislocation {n} leaves the domain (margin {margin:.3e} < {r_blend:.3e})"
            )));
        }
    }
    for i in 0..mu.entries.len() {
        for j in 0..mu.entries.len() {
            if i == j {
                continue;
            }
            let (xi, xj) = (mu.entries[i].position, mu.entries[j].position);
            if i < j && (xi - xj).norm() < 2.0 * r_blend {
                return Err(Error::PreconditionViolation(format!(
                    "blend disks of dislocations {i} and {j} overlap"
                )));
            }
            // the cut ray of i must stay clear of j's blend disk
            if xj.x + r_blend > xi.x && (xj.y - xi.y).abs() < r_blend {
                return Err(Error::PreconditionViolation(format!(
                    "cut ray of dislocation {i} crosses the blend disk of dislocation {j}"
                )));
            }
        }
    }

    // u^{R,k}(x) = R u_iso^{b_k}(x - x^k): since ξ^k = R b^k, the Volterra
    // displacement is evaluated with the raw lattice Burgers vector and
    // rotated; its jump across the cut is then exactly -ξ^k, matched by σ.
    let volterra = |k: usize, x: Vec2| -> Vec2 {
        let d = &mu.entries[k];
        let b = lattice_vector(d.burgers.0, d.burgers.1);
        let y = x - d.position;
        debug_assert!(y.norm() > 0.4 * eps, "node inside the core");
        rot.mul_vec(isotropic_edge_displacement(b, &input.tensor, y).expect("off-core node"))
    };
    let far = |x: Vec2| -> Vec2 {
        let mut u = input.far_field.potential(x) * log_factor;
        for k in 0..mu.entries.len() {
            u += volterra(k, x);
        }
        u
    };

    let mut u = vec![Vec2::ZERO; dom.num_nodes()];
    for (ni, &x) in dom.node_positions().iter().enumerate() {
        let mut nearest = usize::MAX;
        let mut dist = f64::INFINITY;
        for (k, d) in mu.entries.iter().enumerate() {
            let dk = (x - d.position).norm();
            if dk < dist {
                dist = dk;
                nearest = k;
            }
        }
        u[ni] = if nearest == usize::MAX || dist > r_blend {
            far(x)
        } else if dist <= r_near {
            volterra(nearest, x)
                + input.far_field.potential(mu.entries[nearest].position) * log_factor
        } else {
            let near_val = volterra(nearest, x)
                + input.far_field.potential(mu.entries[nearest].position) * log_factor;
            let phi = cutoff(dist / r_near);
            near_val * phi + far(x) * (1.0 - phi)
        };
    }

    let slip = build_slip(mu, dom)?;
    let values: Vec<Vec2> = dom
        .bonds()
        .iter()
        .enumerate()
        .map(|(bi, &(a, b))| {
            let step = dom.node_position(b) - dom.node_position(a);
            rot.mul_vec(step) + (u[b as usize] - u[a as usize] - slip.bond_value(bi as u32)) * eps
        })
        .collect();
    let mut beta = DiscreteStrain::zeros(dom);
    beta.values_mut().copy_from_slice(&values);

    Ok(RecoveryOutput {
        beta,
        displacement: u,
        slip,
    })
}
