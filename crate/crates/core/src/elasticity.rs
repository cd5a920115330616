//! Continuum linear-elastic objects attached to an edge dislocation: the
//! plane strain field β^{ζ,𝐂}, the optimal angular profile Γ^{ζ,𝐂}, the
//! self-energy prefactors ψ^𝐂 and their finite-annulus counterparts, and
//! the integer relaxation φ^𝐂 over lattice decompositions.
//!
//! Conventions. Elastic tensors act in the Hessian form
//! 𝐂δ:δ = λ(tr δ)² + 2μ|δ_sym|² (isotropic case). The self-energy is
//! normalized as ψ(ζ) = ¼ ∫ 𝐂Γ:Γ dθ over the optimal profile, which for
//! isotropic moduli evaluates to the closed form
//!
//!   ψ(ζ) = μ(λ+μ) / (4π(λ+2μ)) · |ζ|²,
//!
//! and the finite-annulus minimization carries the same normalization so
//! that ψ_{r1,r2} → ψ as r2/r1 → ∞ (at rate 1/log(r2/r1)).

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::energy::IsotropicTensor;
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Vec2};
use crate::linalg::{BandedSym, DenseSym};
use crate::strain::lattice_vector;

/// Default Fourier truncation for angular profiles. Isotropic minimizers
/// occupy modes <= 2; the margin covers anisotropic tensors.
pub const DEFAULT_PROFILE_MODES: usize = 8;

/// Default radial grid resolution (points per decade) for the annulus
/// minimization.
pub const DEFAULT_POINTS_PER_DECADE: usize = 64;

/// A constant linearized elasticity tensor, used through its action
/// δ ↦ 𝐂δ; only major symmetry (𝐂a : b = a : 𝐂b) is assumed.
pub trait ElasticTensor {
    fn apply(&self, d: &Mat2) -> Mat2;

    fn quadratic(&self, d: &Mat2) -> f64 {
        self.apply(d).contract(d)
    }

    /// The Lamé moduli when the tensor is isotropic; enables closed-form
    /// shortcuts.
    fn as_isotropic(&self) -> Option<IsotropicTensor> {
        None
    }
}

impl ElasticTensor for IsotropicTensor {
    fn apply(&self, d: &Mat2) -> Mat2 {
        IsotropicTensor::apply(self, d)
    }

    fn quadratic(&self, d: &Mat2) -> f64 {
        self.quadratic_form(d)
    }

    fn as_isotropic(&self) -> Option<IsotropicTensor> {
        Some(*self)
    }
}

/// Fully general constant tensor c[i][j][k][l] with major symmetry.
#[derive(Debug, Clone)]
pub struct GeneralTensor {
    c: [[[[f64; 2]; 2]; 2]; 2],
}

impl GeneralTensor {
    pub fn new(c: [[[[f64; 2]; 2]; 2]; 2]) -> Result<Self> {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        if (c[i][j][k][l] - c[k][l][i][j]).abs() > 1e-12 {
                            return Err(Error::InvalidArgument(
                                "tensor lacks major symmetry".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(GeneralTensor { c })
    }

    pub fn from_isotropic(t: &IsotropicTensor) -> Self {
        let mut c = [[[[0.0; 2]; 2]; 2]; 2];
        let id = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        c[i][j][k][l] = t.lambda * id(i, j) * id(k, l)
                            + t.mu * (id(i, k) * id(j, l) + id(i, l) * id(j, k));
                    }
                }
            }
        }
        GeneralTensor { c }
    }
}

impl ElasticTensor for GeneralTensor {
    fn apply(&self, d: &Mat2) -> Mat2 {
        let mut out = Mat2::ZERO;
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += self.c[i][j][k][l] * d.0[k][l];
                    }
                }
                out.0[i][j] = s;
            }
        }
        out
    }
}

/// Closed-form isotropic self-energy prefactor μ(λ+μ)/(4π(λ+2μ)).
pub fn isotropic_prefactor(t: &IsotropicTensor) -> f64 {
    t.mu * (t.lambda + t.mu) / (4.0 * PI * (t.lambda + 2.0 * t.mu))
}

// ---------------------------------------------------------------------------
// Closed-form plane fields (isotropic)
// ---------------------------------------------------------------------------

/// Distortion of an edge dislocation with Burgers vector e1 at the origin
/// (plane strain, Poisson ratio ν); β_ij = ∂u_i/∂x_j.
fn edge_strain_e1(x: Vec2, nu: f64) -> Mat2 {
    let (xx, yy) = (x.x, x.y);
    let r2 = x.norm_sq();
    let r4 = r2 * r2;
    let k = 1.0 / (2.0 * PI);
    let a = 1.0 / (2.0 * (1.0 - nu));
    Mat2([
        [
            k * (-yy / r2 + a * yy * (yy * yy - xx * xx) / r4),
            k * (xx / r2 + a * xx * (xx * xx - yy * yy) / r4),
        ],
        [
            -k * a * xx * ((1.0 - 2.0 * nu) * r2 + 2.0 * yy * yy) / r4,
            -k * a * yy * ((1.0 - 2.0 * nu) * r2 - 2.0 * xx * xx) / r4,
        ],
    ])
}

/// β^{ζ,𝐂}(x): curl-free away from the origin, Div 𝐂β = 0, circulation ζ
/// on every loop around the origin, and positively (-1)-homogeneous.
pub fn isotropic_edge_strain(zeta: Vec2, tensor: &IsotropicTensor, x: Vec2) -> Result<Mat2> {
    if x.norm_sq() == 0.0 {
        return Err(Error::Singularity);
    }
    let nu = tensor.poisson();
    let b1 = edge_strain_e1(x, nu);
    // Burgers e2 by rotation equivariance: Q β(Qᵀx) Qᵀ with Q = R(π/2)
    let q = Mat2::rotation(PI / 2.0);
    let qx = q.transpose().mul_vec(x);
    let b2 = q.mul_mat(&edge_strain_e1(qx, nu)).mul_mat(&q.transpose());
    Ok(b1 * zeta.x + b2 * zeta.y)
}

/// Displacement whose gradient is `isotropic_edge_strain`, with branch cut
/// along the positive x-axis: the multivalued part is ζ·φ/2π with
/// φ ∈ [0, 2π), so crossing the cut upward decreases u by ζ.
pub fn isotropic_edge_displacement(zeta: Vec2, tensor: &IsotropicTensor, x: Vec2) -> Result<Vec2> {
    if x.norm_sq() == 0.0 {
        return Err(Error::Singularity);
    }
    let nu = tensor.poisson();
    let k = 1.0 / (2.0 * PI);
    let a = 1.0 / (2.0 * (1.0 - nu));
    let (xx, yy) = (x.x, x.y);
    let r2 = x.norm_sq();
    let lnr2 = r2.ln();
    let v1 = Vec2::new(
        k * a * xx * yy / r2,
        -k * 0.5 * a * ((1.0 - 2.0 * nu) * lnr2 + (xx * xx - yy * yy) / r2),
    );
    let v2 = Vec2::new(
        k * 0.5 * a * ((1.0 - 2.0 * nu) * lnr2 + (yy * yy - xx * xx) / r2),
        -k * a * xx * yy / r2,
    );
    let phi = x.angle_in_2pi();
    Ok(zeta * (phi / (2.0 * PI)) + v1 * zeta.x + v2 * zeta.y)
}

// ---------------------------------------------------------------------------
// Angular profile minimization
// ---------------------------------------------------------------------------

/// Angular profile Γ(θ) = f(θ)⊗(-sin θ, cos θ) + g⊗(cos θ, sin θ) with f
/// in truncated Fourier form; the zeroth Fourier coefficient of f is
/// pinned so that ∫ f dθ = ζ.
#[derive(Debug, Clone)]
pub struct AngularProfile {
    pub zeta: Vec2,
    pub g: Vec2,
    /// cos(mθ) coefficients of f, m = 1..=N.
    pub cos_coeffs: Vec<Vec2>,
    /// sin(mθ) coefficients of f, m = 1..=N.
    pub sin_coeffs: Vec<Vec2>,
}

impl AngularProfile {
    pub fn modes(&self) -> usize {
        self.cos_coeffs.len()
    }

    pub fn f(&self, theta: f64) -> Vec2 {
        let mut v = self.zeta * (1.0 / (2.0 * PI));
        for (m, (a, b)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let w = (m + 1) as f64 * theta;
            v += *a * w.cos() + *b * w.sin();
        }
        v
    }

    pub fn evaluate(&self, theta: f64) -> Mat2 {
        let tau = Vec2::new(-theta.sin(), theta.cos());
        let rho = Vec2::new(theta.cos(), theta.sin());
        Mat2::outer(self.f(theta), tau) + Mat2::outer(self.g, rho)
    }
}

/// The plane strain β(ρ,θ) = Γ(θ)/ρ induced by a profile.
#[derive(Debug, Clone)]
pub struct PlanarStrain {
    pub profile: AngularProfile,
}

impl PlanarStrain {
    pub fn evaluate(&self, x: Vec2) -> Result<Mat2> {
        let rho = x.norm();
        if rho == 0.0 {
            return Err(Error::Singularity);
        }
        Ok(self.profile.evaluate(x.angle_in_2pi()) * (1.0 / rho))
    }

    /// Circulation on the circle of radius `rho` by the trapezoid rule.
    pub fn circulation(&self, rho: f64, points: usize) -> Vec2 {
        let mut c = Vec2::ZERO;
        for k in 0..points {
            let t = 2.0 * PI * k as f64 / points as f64;
            let tau = Vec2::new(-t.sin(), t.cos());
            let b = self.profile.evaluate(t) * (1.0 / rho);
            c += b.mul_vec(tau) * (rho * 2.0 * PI / points as f64);
        }
        c
    }
}

fn profile_basis(p: usize, theta: f64) -> Mat2 {
    let tau = Vec2::new(-theta.sin(), theta.cos());
    let rho = Vec2::new(theta.cos(), theta.sin());
    if p < 2 {
        let mut g = Vec2::ZERO;
        if p == 0 {
            g.x = 1.0;
        } else {
            g.y = 1.0;
        }
        return Mat2::outer(g, rho);
    }
    let p = p - 2;
    let m = (p / 4 + 1) as f64;
    let rem = p % 4;
    let mut f = Vec2::ZERO;
    if rem % 2 == 0 {
        f.x = 1.0;
    } else {
        f.y = 1.0;
    }
    let w = if rem < 2 {
        (m * theta).cos()
    } else {
        (m * theta).sin()
    };
    Mat2::outer(f, tau) * w
}

/// Minimizes ∫ 𝐂Γ:Γ dθ over the Fourier-parameterized profile class with
/// ∫ f dθ = ζ. One symmetric positive-definite solve; the trapezoid
/// quadrature is exact for the trigonometric integrand.
pub fn minimize_angular_profile(
    zeta: Vec2,
    tensor: &dyn ElasticTensor,
    n_modes: usize,
) -> Result<AngularProfile> {
    let n_modes = n_modes.max(2);
    let nunk = 2 + 4 * n_modes;
    let quad_pts = 8 * n_modes + 32;
    let mut a = DenseSym::zeros(nunk);
    let mut b = vec![0.0; nunk];
    let w = 2.0 * PI / quad_pts as f64;
    let mut basis = vec![Mat2::ZERO; nunk];
    for k in 0..quad_pts {
        let theta = 2.0 * PI * k as f64 / quad_pts as f64;
        for (p, bp) in basis.iter_mut().enumerate() {
            *bp = profile_basis(p, theta);
        }
        let tau = Vec2::new(-theta.sin(), theta.cos());
        let gamma0 = Mat2::outer(zeta * (1.0 / (2.0 * PI)), tau);
        let c_gamma0 = tensor.apply(&gamma0);
        for p in 0..nunk {
            let cbp = tensor.apply(&basis[p]);
            b[p] += w * c_gamma0.contract(&basis[p]);
            for q in 0..nunk {
                a.add_at(p, q, w * cbp.contract(&basis[q]));
            }
        }
    }
    let rhs: Vec<f64> = b.iter().map(|v| -v).collect();
    let x = a.cholesky_solve(&rhs)?;
    let g = Vec2::new(x[0], x[1]);
    let mut cos_coeffs = Vec::with_capacity(n_modes);
    let mut sin_coeffs = Vec::with_capacity(n_modes);
    for m in 0..n_modes {
        let base = 2 + 4 * m;
        cos_coeffs.push(Vec2::new(x[base], x[base + 1]));
        sin_coeffs.push(Vec2::new(x[base + 2], x[base + 3]));
    }
    Ok(AngularProfile {
        zeta,
        g,
        cos_coeffs,
        sin_coeffs,
    })
}

/// ¼ ∫ 𝐂Γ:Γ dθ for a given profile (the ψ normalization).
pub fn profile_energy(profile: &AngularProfile, tensor: &dyn ElasticTensor) -> f64 {
    let quad_pts = 8 * profile.modes() + 48;
    let w = 2.0 * PI / quad_pts as f64;
    let mut total = 0.0;
    for k in 0..quad_pts {
        let theta = 2.0 * PI * k as f64 / quad_pts as f64;
        let g = profile.evaluate(theta);
        total += w * tensor.quadratic(&g);
    }
    0.25 * total
}

/// Self-energy prefactor ψ^𝐂(ζ): the minimum of ¼ ∫ 𝐂Γ:Γ dθ over
/// admissible profiles; ψ(0) = 0 by convention. For isotropic tensors this
/// equals μ(λ+μ)/(4π(λ+2μ)) |ζ|².
pub fn psi(zeta: Vec2, tensor: &dyn ElasticTensor, n_modes: usize) -> Result<f64> {
    if zeta.norm_sq() == 0.0 {
        return Ok(0.0);
    }
    let profile = minimize_angular_profile(zeta, tensor, n_modes)?;
    Ok(profile_energy(&profile, tensor))
}

// ---------------------------------------------------------------------------
// Finite-annulus minimization
// ---------------------------------------------------------------------------

/// ψ^𝐂_{r1,r2}(ζ): minimum of (1/log(r2/r1)) ∫_{A_{r1,r2}} ¼𝐂β:β dx over
/// curl-free fields with circulation ζ.
///
/// Isotropy decouples the problem into rotating-frame Fourier modes; only
/// the mode forced by the circulation survives, leaving four radial
/// functions. These are discretized with quadratic elements on a uniform
/// grid in log ρ (`points_per_decade` nodes per decade, default 64) and the
/// resulting banded SPD system is solved directly. Free boundaries; the
/// two rigid-translation null modes are pinned at the inner radius.
pub fn psi_annulus(
    zeta: Vec2,
    tensor: &IsotropicTensor,
    r1: f64,
    r2: f64,
    points_per_decade: Option<usize>,
) -> Result<f64> {
    if !(r1 > 0.0 && r1 < r2) {
        return Err(Error::BadAnnulus { r: r1, big_r: r2 });
    }
    if zeta.norm_sq() == 0.0 {
        return Ok(0.0);
    }
    let ppd = points_per_decade
        .unwrap_or(DEFAULT_POINTS_PER_DECADE)
        .max(8);
    let span = (r2 / r1).ln();
    let decades = span / std::f64::consts::LN_10;
    let nel = ((ppd as f64 * decades / 2.0).ceil() as usize).max(2);
    let h = span / nel as f64;
    let n_nodes = 2 * nel + 1;
    let n_unk = 4 * n_nodes;
    const BW: usize = 11;

    let sigma = 1.0 / (2.0 * PI);
    let (lam, mu) = (tensor.lambda, tensor.mu);
    // quadratic_form(m) = λ(m00+m11)² + 2μ m00² + 2μ m11² + μ(m01+m10)²

    let mut hmat = BandedSym::zeros(n_unk, BW);
    let mut rhs = vec![0.0; n_unk];
    let mut const_term = 0.0;

    // 3-point Gauss on [0,1]
    let gauss = [
        (0.5 - 15f64.sqrt() / 10.0, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + 15f64.sqrt() / 10.0, 5.0 / 18.0),
    ];
    // component layout per node: AC, AS, BC, BS
    const AC: usize = 0;
    const AS: usize = 1;
    const BC: usize = 2;
    const BS: usize = 3;

    // affine form in the unknowns: (index, coeff) pairs plus a constant
    type Form = (Form6, f64);
    #[derive(Clone, Copy, Default)]
    struct Form6 {
        len: usize,
        idx: [usize; 12],
        val: [f64; 12],
    }
    impl Form6 {
        fn push(&mut self, i: usize, v: f64) {
            self.idx[self.len] = i;
            self.val[self.len] = v;
            self.len += 1;
        }
        fn merged(a: &Form6, sa: f64, b: &Form6, sb: f64) -> Form6 {
            let mut out = Form6::default();
            for k in 0..a.len {
                out.push(a.idx[k], sa * a.val[k]);
            }
            for k in 0..b.len {
                out.push(b.idx[k], sb * b.val[k]);
            }
            out
        }
    }

    for e in 0..nel {
        let base_node = 2 * e;
        for (g, wq) in gauss {
            let w = wq * h;
            // P2 shapes at g and their s-derivatives
            let nv = [
                2.0 * (g - 0.5) * (g - 1.0),
                -4.0 * g * (g - 1.0),
                2.0 * g * (g - 0.5),
            ];
            let nd = [
                (4.0 * g - 3.0) / h,
                (-8.0 * g + 4.0) / h,
                (4.0 * g - 1.0) / h,
            ];
            let form = |field: usize, deriv: bool| -> Form6 {
                let mut f = Form6::default();
                for k in 0..3 {
                    f.push(
                        4 * (base_node + k) + field,
                        if deriv { nd[k] } else { nv[k] },
                    );
                }
                f
            };
            let x_form = Form6::merged(&form(AS, false), 1.0, &form(BC, false), -1.0);
            let y_form = Form6::merged(&form(BS, false), 1.0, &form(AC, false), 1.0);
            let neg_y = Form6::merged(&form(BS, false), -1.0, &form(AC, false), -1.0);

            let mc: [Form; 4] = [
                (form(AC, true), 0.0),
                (x_form, sigma * zeta.x),
                (form(BC, true), 0.0),
                (y_form, sigma * zeta.y),
            ];
            let ms: [Form; 4] = [
                (form(AS, true), 0.0),
                (neg_y, sigma * zeta.y),
                (form(BS, true), 0.0),
                (x_form, -sigma * zeta.x),
            ];
            for m in [&mc, &ms] {
                let (m00, m01, m10, m11) = (&m[0], &m[1], &m[2], &m[3]);
                let terms: [(Form6, f64, f64); 4] = [
                    (Form6::merged(&m00.0, 1.0, &m11.0, 1.0), m00.1 + m11.1, lam),
                    (m00.0, m00.1, 2.0 * mu),
                    (m11.0, m11.1, 2.0 * mu),
                    (Form6::merged(&m01.0, 1.0, &m10.0, 1.0), m01.1 + m10.1, mu),
                ];
                for (cf, c0, wgt) in terms {
                    let fa = PI * wgt * w;
                    for i in 0..cf.len {
                        rhs[cf.idx[i]] -= 2.0 * fa * cf.val[i] * c0;
                        for j in 0..cf.len {
                            if cf.idx[i] <= cf.idx[j] {
                                hmat.add_at(cf.idx[i], cf.idx[j], 2.0 * fa * cf.val[i] * cf.val[j]);
                            }
                        }
                    }
                    const_term += fa * c0 * c0;
                }
            }
        }
    }
    // pin the rigid translations: a_c = a_s = 0 at the inner radius
    hmat.pin_unknown(AC, &mut rhs, 0.0);
    hmat.pin_unknown(AS, &mut rhs, 0.0);
    let x = hmat.cholesky_solve(&rhs)?;
    // F(x*) = const + ½ b·x* with b = -rhs
    let bx: f64 = x.iter().zip(&rhs).map(|(xi, ri)| xi * (-ri)).sum();
    let fmin = const_term + 0.5 * bx;
    Ok(0.25 * fmin / span)
}

// ---------------------------------------------------------------------------
// Integer relaxation φ^𝐂
// ---------------------------------------------------------------------------

/// One step of a decomposition: multiplicity and lattice vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhiStep {
    pub count: i32,
    pub vector: (i32, i32),
}

#[derive(Debug, Clone)]
pub struct PhiResult {
    pub value: f64,
    /// Optimal decomposition b = Σ count·vector with value Σ |count| ψ(vector).
    pub certificate: Vec<PhiStep>,
    pub bound: u32,
}

/// φ^𝐂(b): cheapest realization of the lattice vector b as an integer
/// combination Σ z_i b_i of lattice vectors, each step weighted by its
/// self-energy: min Σ |z_i| ψ^𝐂(b_i). Candidates are restricted to
/// |b_i| ≤ |b| and the total step count to `bound` (default
/// ⌈ψ(b)/min_unit ψ⌉); depth-first search with branch-and-bound pruning.
/// φ(0) = 0 with an empty certificate.
pub fn phi(
    b: (i32, i32),
    tensor: &dyn ElasticTensor,
    bound: Option<u32>,
    n_modes: usize,
) -> Result<PhiResult> {
    if b == (0, 0) {
        return Ok(PhiResult {
            value: 0.0,
            certificate: Vec::new(),
            bound: 0,
        });
    }
    let target = lattice_vector(b.0, b.1);
    let norm_b = target.norm();

    // candidate lattice vectors with 0 < |v| <= |b|, one per ± pair
    let range = norm_b.ceil() as i32 + 1;
    let mut cands: Vec<((i32, i32), Vec2)> = Vec::new();
    for p in -range..=range {
        for q in -range..=range {
            if (p, q) == (0, 0) || (p, q) < (-p, -q) {
                continue; // keep one representative per ± pair
            }
            let v = lattice_vector(p, q);
            if v.norm() <= norm_b + 1e-12 {
                cands.push(((p, q), v));
            }
        }
    }
    cands.sort_by(|a, b| a.0.cmp(&b.0));

    let mut psi_cache: HashMap<(i32, i32), f64> = HashMap::new();
    let mut psi_of = |pq: (i32, i32)| -> Result<f64> {
        if let Some(v) = psi_cache.get(&pq) {
            return Ok(*v);
        }
        let val = psi(lattice_vector(pq.0, pq.1), tensor, n_modes)?;
        psi_cache.insert(pq, val);
        Ok(val)
    };

    let costs: Vec<f64> = cands
        .iter()
        .map(|(pq, _)| psi_of(*pq))
        .collect::<Result<_>>()?;
    let min_unit_psi = cands
        .iter()
        .zip(&costs)
        .filter(|((_, v), _)| (v.norm() - 1.0).abs() < 1e-9)
        .map(|(_, c)| *c)
        .fold(f64::INFINITY, f64::min);
    let min_cost = costs.iter().copied().fold(f64::INFINITY, f64::min);
    // cost >= min_ratio |remaining| for any completion
    let min_ratio = cands
        .iter()
        .zip(&costs)
        .map(|((_, v), c)| c / v.norm())
        .fold(f64::INFINITY, f64::min);

    let trivial = psi_of(b)?;
    let bound = bound.unwrap_or_else(|| (trivial / min_unit_psi).ceil() as u32);
    if bound == 0 {
        return Err(Error::BoundTooSmall {
            bound,
            found: trivial,
            certified_below: 0.0,
        });
    }

    struct Search<'a> {
        cands: &'a [((i32, i32), Vec2)],
        costs: &'a [f64],
        min_ratio: f64,
        best: f64,
        best_steps: Vec<(usize, i32)>,
        stack: Vec<(usize, i32)>,
    }
    impl Search<'_> {
        fn dfs(&mut self, remaining: Vec2, max_cand: usize, cost: f64, steps_left: u32) {
            if remaining.norm() < 1e-9 {
                if cost < self.best {
                    self.best = cost;
                    self.best_steps = self.stack.clone();
                }
                return;
            }
            if steps_left == 0 {
                return;
            }
            for ci in (0..=max_cand).rev() {
                let step_cost = self.costs[ci];
                for sign in [1i32, -1] {
                    let r = remaining - self.cands[ci].1 * sign as f64;
                    let lower = cost + step_cost + self.min_ratio * r.norm();
                    if lower >= self.best - 1e-15 {
                        continue;
                    }
                    self.stack.push((ci, sign));
                    self.dfs(r, ci, cost + step_cost, steps_left - 1);
                    self.stack.pop();
                }
            }
        }
    }
    let mut search = Search {
        cands: &cands,
        costs: &costs,
        min_ratio,
        best: trivial,
        best_steps: cands
            .iter()
            .position(|(pq, _)| *pq == b || (-pq.0, -pq.1) == b)
            .map(|ci| vec![(ci, if cands[ci].0 == b { 1 } else { -1 })])
            .unwrap_or_default(),
        stack: Vec::new(),
    };
    search.dfs(target, cands.len() - 1, 0.0, bound);

    // certify: any decomposition with more than `bound` steps costs at
    // least (bound+1) * min_cost
    let certified_below = (bound as f64 + 1.0) * min_cost;
    if search.best > certified_below {
        return Err(Error::BoundTooSmall {
            bound,
            found: search.best,
            certified_below,
        });
    }

    // aggregate repeated steps into multiplicities
    let mut counts: HashMap<(i32, i32), i32> = HashMap::new();
    for (ci, sign) in &search.best_steps {
        *counts.entry(cands[*ci].0).or_insert(0) += sign;
    }
    let mut certificate: Vec<PhiStep> = counts
        .into_iter()
        .filter(|(_, z)| *z != 0)
        .map(|(vector, count)| PhiStep { count, vector })
        .collect();
    certificate.sort_by_key(|s| s.vector);
    Ok(PhiResult {
        value: search.best,
        certificate,
        bound,
    })
}

/// Exhaustive reference for φ in the unit basis {e1, ν, η}: minimizes
/// Σ|z_i| ψ(u_i) over all |z|_1 ≤ max_l1 with z1 e1 + z2 ν + z3 η = b.
pub fn phi_exhaustive_units(
    b: (i32, i32),
    tensor: &dyn ElasticTensor,
    max_l1: i32,
    n_modes: usize,
) -> Result<Option<(f64, [i32; 3])>> {
    // e1 = (1,0), ν = (0,1), η = ν - e1 = (-1,1) in lattice coordinates
    let psi_e1 = psi(lattice_vector(1, 0), tensor, n_modes)?;
    let psi_nu = psi(lattice_vector(0, 1), tensor, n_modes)?;
    let psi_eta = psi(lattice_vector(-1, 1), tensor, n_modes)?;
    let mut best: Option<(f64, [i32; 3])> = None;
    for z1 in -max_l1..=max_l1 {
        for z2 in -max_l1..=max_l1 {
            for z3 in -max_l1..=max_l1 {
                if z1.abs() + z2.abs() + z3.abs() > max_l1 {
                    continue;
                }
                if (z1 - z3, z2 + z3) != b {
                    continue;
                }
                let cost =
                    z1.abs() as f64 * psi_e1 + z2.abs() as f64 * psi_nu + z3.abs() as f64 * psi_eta;
                if best.map_or(true, |(c, _)| cost < c) {
                    best = Some((cost, [z1, z2, z3]));
                }
            }
        }
    }
    Ok(best)
}
