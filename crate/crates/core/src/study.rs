//! Scaling experiments: lattice energies across an ε-ladder against the
//! continuum reference, convergence of the finite-annulus self-energy, and
//! the thin-annulus rotating-ramp diagnostic.

use crate::elasticity::{phi, psi_annulus, DEFAULT_PROFILE_MODES};
use crate::energy::{linearized_tensor, total_energy, IsotropicTensor, PotentialPair};
use crate::error::{Error, Result};
use crate::geometry::{Mat2, Polygon, Vec2};
use crate::io::{fmt_f64, CsvTable};
use crate::lattice::{build_domain, LatticeSpec};
use crate::minimize::{minimize, MinimizeProblem};
use crate::recovery::{build_recovery, snap_positions, FarField, RecoveryInput};
use crate::strain::{Dislocation, DislocationMeasure};

#[derive(Debug, Clone, Copy)]
pub struct SolverSettings {
    /// Gradient tolerance relative to ε.
    pub grad_tol_rel: f64,
    pub max_iter: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            grad_tol_rel: 1e-8,
            max_iter: 20_000,
        }
    }
}

/// A scaling study: fixed layout and far field, swept over an ε-ladder.
#[derive(Debug, Clone)]
pub struct ScalingStudy {
    pub domain: Polygon,
    /// Dislocation layout: positions and Burgers vectors in lattice
    /// coordinates, all carrying the same frame rotation.
    pub layout: Vec<(Vec2, (i32, i32))>,
    pub rotation_angle: f64,
    pub far_field: FarField,
    pub epsilons: Vec<f64>,
    pub gamma: f64,
    pub pot: PotentialPair,
    pub solver: SolverSettings,
}

impl ScalingStudy {
    pub fn measure_at(&self, epsilon: f64) -> Result<DislocationMeasure> {
        let entries = self
            .layout
            .iter()
            .map(|&(position, burgers)| Dislocation {
                position,
                burgers,
                frame_angle: self.rotation_angle,
            })
            .collect();
        let mu = DislocationMeasure::new(entries, epsilon, self.gamma)?;
        mu.validate(&self.domain)?;
        Ok(mu)
    }
}

#[derive(Debug, Clone)]
pub struct StudyRow {
    pub epsilon: f64,
    pub nodes: usize,
    pub recovery_energy: f64,
    pub minimized_energy: f64,
    pub normalized_recovery: f64,
    pub normalized_minimized: f64,
    pub gamma_limit_reference: f64,
    pub max_annulus_distance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// The continuum reference value: Σ_k φ(b^k) plus the elastic energy of
/// the far field, ∫_Ω ½ 𝐂(RᵀM):(RᵀM) dx. Addends are sorted before
/// summation so the value is exactly layout-permutation invariant.
pub fn gamma_limit_reference(
    layout: &[(Vec2, (i32, i32))],
    rotation_angle: f64,
    far_field: &FarField,
    tensor: &IsotropicTensor,
    domain_area: f64,
) -> Result<f64> {
    let mut phis: Vec<(i32, i32)> = layout.iter().map(|&(_, b)| b).collect();
    phis.sort_unstable();
    let mut cache: std::collections::HashMap<(i32, i32), f64> = std::collections::HashMap::new();
    let mut sum = 0.0;
    for b in phis {
        let v = match cache.get(&b) {
            Some(v) => *v,
            None => {
                let v = phi(b, tensor, None, DEFAULT_PROFILE_MODES)?.value;
                cache.insert(b, v);
                v
            }
        };
        sum += v;
    }
    let far = match far_field {
        FarField::Zero => 0.0,
        FarField::Constant(m) => {
            let rt = Mat2::rotation(rotation_angle).transpose();
            let n = rt.mul_mat(m);
            0.5 * tensor.quadratic_form(&n) * domain_area
        }
    };
    Ok(sum + far)
}

/// Runs the study: for each ε, build the snapped measure, the recovery
/// strain, minimize from it, and record normalized energies alongside the
/// continuum reference. Rows are emitted in ladder order.
pub fn run_scaling(study: &ScalingStudy) -> Result<Vec<StudyRow>> {
    let tensor = linearized_tensor(&study.pot);
    let reference = gamma_limit_reference(
        &study.layout,
        study.rotation_angle,
        &study.far_field,
        &tensor,
        study.domain.area(),
    )?;
    let mut rows = Vec::with_capacity(study.epsilons.len());
    for &eps in &study.epsilons {
        let dom = build_domain(LatticeSpec::new(eps, study.domain.clone())?)?;
        let mu = snap_positions(&study.measure_at(eps)?, &dom)?;
        let out = build_recovery(
            &RecoveryInput {
                mu: mu.clone(),
                rotation_angle: study.rotation_angle,
                far_field: study.far_field,
                tensor,
            },
            &dom,
        )?;
        let recovery_energy = total_energy(&dom, &out.beta, &study.pot);
        let mut problem = MinimizeProblem::new(
            &dom,
            study.pot,
            out.slip,
            study.rotation_angle,
            out.displacement,
        );
        problem.grad_tol = study.solver.grad_tol_rel * eps;
        problem.max_iter = study.solver.max_iter;
        problem.mu = Some(mu.clone());
        let res = minimize(&problem)?;
        let norm = eps * eps * eps.ln().abs();
        let max_dist = res
            .admissibility
            .as_ref()
            .map(|r| {
                r.annulus_checks
                    .iter()
                    .map(|c| c.distance)
                    .fold(0.0f64, f64::max)
            })
            .unwrap_or(0.0);
        rows.push(StudyRow {
            epsilon: eps,
            nodes: dom.num_nodes(),
            recovery_energy,
            minimized_energy: res.energy,
            normalized_recovery: recovery_energy / norm,
            normalized_minimized: res.energy / norm,
            gamma_limit_reference: reference,
            max_annulus_distance: max_dist,
            iterations: res.iterations,
            converged: res.converged,
        });
    }
    Ok(rows)
}

pub fn scaling_rows_to_csv(rows: &[StudyRow]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "epsilon",
        "nodes",
        "recovery_energy",
        "minimized_energy",
        "normalized_recovery",
        "normalized_minimized",
        "gamma_limit_reference",
        "max_annulus_distance",
        "iterations",
        "converged",
    ]);
    for r in rows {
        t.push_row(vec![
            fmt_f64(r.epsilon),
            r.nodes.to_string(),
            fmt_f64(r.recovery_energy),
            fmt_f64(r.minimized_energy),
            fmt_f64(r.normalized_recovery),
            fmt_f64(r.normalized_minimized),
            fmt_f64(r.gamma_limit_reference),
            fmt_f64(r.max_annulus_distance),
            r.iterations.to_string(),
            r.converged.to_string(),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// Thin-annulus rotating-ramp diagnostic
// ---------------------------------------------------------------------------

/// Per-ε measurements of the rotating-ramp deformation u(x) = R(θ(|x|)) x
/// with θ ramping from 0 to 1 across [Mε, 2Mε].
#[derive(Debug, Clone)]
pub struct DemoRow {
    pub epsilon: f64,
    /// ∫_{A_{ε,1}} dist²(∇u, SO(2)) dx.
    pub misfit_energy: f64,
    /// ‖avg_{A_{ε,Mε}} ∇u − Id‖_F: the thin annulus sees the identity.
    pub thin_average_distance: f64,
    /// ‖avg_{A_{ε,ε^γ}} ∇u − Id‖_F: the thick annulus does not.
    pub thick_average_distance: f64,
    /// Relative L² distance ‖∇u − R(1)‖ / ‖R(1)‖ over A_{ε,1}: global
    /// convergence to the rotated state.
    pub l2_distance_to_limit: f64,
}

#[derive(Debug, Clone)]
pub struct ThinAnnulusDemo {
    pub m_factor: f64,
    pub rows: Vec<DemoRow>,
    /// Least-squares slope of log misfit_energy against log ε.
    pub energy_exponent: f64,
}

// the ramp construction uses the clockwise rotation convention
fn r_cw(t: f64) -> Mat2 {
    let (s, c) = t.sin_cos();
    Mat2([[c, s], [-s, c]])
}

fn r_cw_prime(t: f64) -> Mat2 {
    let (s, c) = t.sin_cos();
    Mat2([[-s, c], [-c, -s]])
}

fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Builds the demo table. All quantities reduce to radial quadratures:
/// the angular dependence of ∇u integrates out exactly.
pub fn thin_annulus_demo(m_factor: f64, epsilons: &[f64], gamma: f64) -> Result<ThinAnnulusDemo> {
    if !(m_factor > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "the ramp factor must exceed 1, got {m_factor}"
        )));
    }
    let mut rows = Vec::new();
    for &eps in epsilons {
        let ramp_lo = m_factor * eps;
        let ramp_hi = 2.0 * m_factor * eps;
        if ramp_hi >= 1.0 {
            return Err(Error::InvalidArgument(format!(
                "ramp [{ramp_lo}, {ramp_hi}] leaves the unit disk at eps = {eps}"
            )));
        }
        let slope = 1.0 / (m_factor * eps);
        let theta = |rho: f64| -> f64 {
            if rho < ramp_lo {
                0.0
            } else if rho < ramp_hi {
                rho * slope - 1.0
            } else {
                1.0
            }
        };
        // dist²(∇u, SO(2)) at radius ρ is θ-independent: a + 4 - 2√(4+a)
        // with a = (θ'ρ)²; nonzero only across the ramp
        let misfit = 2.0
            * std::f64::consts::PI
            * simpson(ramp_lo, ramp_hi, 2000, |rho| {
                let a = (slope * rho).powi(2);
                (a + 4.0 - 2.0 * (4.0 + a).sqrt()) * rho
            });

        // annulus average of ∇u over A_{r1,r2}: radial quadrature of
        // 2πρ R(θ) + πθ'ρ² R'(θ), divided by the annulus area
        let average = |r1: f64, r2: f64| -> Mat2 {
            let seg = |a: f64, b: f64| -> Mat2 {
                if b <= a {
                    return Mat2::ZERO;
                }
                let n = 2000;
                let h = (b - a) / n as f64;
                let f = |rho: f64| -> Mat2 {
                    let t = theta(rho);
                    let tp = if rho >= ramp_lo && rho < ramp_hi {
                        slope
                    } else {
                        0.0
                    };
                    r_cw(t) * (2.0 * std::f64::consts::PI * rho)
                        + r_cw_prime(t) * (std::f64::consts::PI * tp * rho * rho)
                };
                let mut s = f(a) + f(b);
                for k in 1..n {
                    let w = if k % 2 == 1 { 4.0 } else { 2.0 };
                    s += f(a + k as f64 * h) * w;
                }
                s * (h / 3.0)
            };
            let total = seg(r1, r2.min(ramp_lo))
                + seg(r1.max(ramp_lo), r2.min(ramp_hi))
                + seg(r1.max(ramp_hi), r2);
            total * (1.0 / (std::f64::consts::PI * (r2 * r2 - r1 * r1)))
        };
        let thin_avg = average(eps, m_factor * eps);
        let thick_avg = average(eps, eps.powf(gamma));

        // mean over θ of |∇u − R(1)|²: |R(θ)−R(1)|² + (θ'ρ)² + cross term
        let r1m = r_cw(1.0);
        let mean_sq = |rho: f64| -> f64 {
            let t = theta(rho);
            let tp = if rho >= ramp_lo && rho < ramp_hi {
                slope
            } else {
                0.0
            };
            let base = (r_cw(t) - r1m).norm_sq();
            let cross = tp * rho * r_cw_prime(t).transpose().mul_mat(&(r_cw(t) - r1m)).trace();
            base + (tp * rho).powi(2) + cross
        };
        let l2_sq = 2.0
            * std::f64::consts::PI
            * (simpson(eps, ramp_lo, 400, |rho| mean_sq(rho) * rho)
                + simpson(ramp_lo, ramp_hi, 2000, |rho| mean_sq(rho) * rho));
        // |R(1)|² = 2 over the annulus
        let limit_norm_sq = 2.0 * std::f64::consts::PI * (1.0 - eps * eps);
        rows.push(DemoRow {
            epsilon: eps,
            misfit_energy: misfit,
            thin_average_distance: (thin_avg - Mat2::IDENTITY).norm(),
            thick_average_distance: (thick_avg - Mat2::IDENTITY).norm(),
            l2_distance_to_limit: (l2_sq.max(0.0) / limit_norm_sq).sqrt(),
        });
    }
    // least-squares exponent of misfit_energy vs ε
    let n = rows.len() as f64;
    let exponent = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.misfit_energy.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(ThinAnnulusDemo {
        m_factor,
        rows,
        energy_exponent: exponent,
    })
}

pub fn demo_rows_to_csv(demo: &ThinAnnulusDemo) -> CsvTable {
    let mut t = CsvTable::new(&[
        "epsilon",
        "misfit_energy",
        "thin_average_distance",
        "thick_average_distance",
        "l2_distance_to_limit",
    ]);
    for r in &demo.rows {
        t.push_row(vec![
            fmt_f64(r.epsilon),
            fmt_f64(r.misfit_energy),
            fmt_f64(r.thin_average_distance),
            fmt_f64(r.thick_average_distance),
            fmt_f64(r.l2_distance_to_limit),
        ]);
    }
    t
}

// ---------------------------------------------------------------------------
// ψ annulus convergence study
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PsiConvergenceRow {
    pub ratio: f64,
    pub value: f64,
    pub reference: f64,
    pub residual: f64,
}

/// ψ_{1,r} for increasing outer radii against the whole-space value.
pub fn psi_convergence_study(
    zeta: Vec2,
    tensor: &IsotropicTensor,
    ratios: &[f64],
) -> Result<Vec<PsiConvergenceRow>> {
    let reference = crate::elasticity::psi(zeta, tensor, DEFAULT_PROFILE_MODES)?;
    let mut rows = Vec::new();
    let mut prev = 0.0;
    for &r in ratios {
        if r <= prev {
            return Err(Error::InvalidArgument(
                "annulus ratios must be strictly increasing".into(),
            ));
        }
        prev = r;
        let value = psi_annulus(zeta, tensor, 1.0, r, None)?;
        rows.push(PsiConvergenceRow {
            ratio: r,
            value,
            reference,
            residual: reference - value,
        });
    }
    Ok(rows)
}

pub fn psi_rows_to_csv(rows: &[PsiConvergenceRow]) -> CsvTable {
    let mut t = CsvTable::new(&["ratio", "psi_annulus", "psi_reference", "residual"]);
    for r in rows {
        t.push_row(vec![
            fmt_f64(r.ratio),
            fmt_f64(r.value),
            fmt_f64(r.reference),
            fmt_f64(r.residual),
        ]);
    }
    t
}
