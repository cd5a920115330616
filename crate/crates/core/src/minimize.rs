//! Energy minimization at fixed dislocation content.
//!
//! The strain is parameterized as β(i,j) = R(j-i) + ε(u(j) - u(i) - σ(i,j))
//! with the slip σ frozen, so every iterate carries exactly the prescribed
//! Burgers measure: circulations depend on σ alone. The displacement (and
//! optionally a global frame angle) is driven to a stationary point by
//! L-BFGS with Armijo backtracking. One designated node is pinned to its
//! initial displacement to remove translation invariance.
//!
//! Assembly is deterministic at any worker count: values are produced per
//! slot in parallel, and scalar reductions sum fixed-size chunks that are
//! folded in index order.

use rayon::prelude::*;

use crate::energy::{
    energy_of_values, oriented_value as oriented, PotentialPair, ENERGY_CHUNK as CHUNK,
};
use crate::error::Result;
use crate::geometry::{Mat2, Vec2};
use crate::lattice::{LatticeDomain, SQRT3};
use crate::recovery::SlipField;
use crate::strain::{check_admissible, AdmissibilityReport, DiscreteStrain, DislocationMeasure};

/// A minimization problem over displacements at fixed slip.
pub struct MinimizeProblem<'a> {
    pub dom: &'a LatticeDomain,
    pub pot: PotentialPair,
    pub slip: SlipField,
    pub rotation_angle: f64,
    pub u0: Vec<Vec2>,
    /// Convergence threshold on the max-norm of the gradient
    /// (default 1e-8 ε).
    pub grad_tol: f64,
    pub max_iter: usize,
    /// When set, additionally optimizes the global frame angle.
    pub optimize_frame: bool,
    /// Reference measure for the a-posteriori admissibility report.
    pub mu: Option<DislocationMeasure>,
}

impl<'a> MinimizeProblem<'a> {
    pub fn new(
        dom: &'a LatticeDomain,
        pot: PotentialPair,
        slip: SlipField,
        rotation_angle: f64,
        u0: Vec<Vec2>,
    ) -> Self {
        assert_eq!(u0.len(), dom.num_nodes());
        MinimizeProblem {
            dom,
            pot,
            slip,
            rotation_angle,
            u0,
            grad_tol: 1e-8 * dom.epsilon(),
            max_iter: 20_000,
            optimize_frame: false,
            mu: None,
        }
    }

    /// Energy and its exact gradient with respect to the displacement.
    pub fn energy_and_gradient(&self, u: &[Vec2]) -> (f64, Vec<Vec2>) {
        let mut beta = vec![Vec2::ZERO; self.dom.num_bonds()];
        assemble_beta(
            self.dom,
            &Mat2::rotation(self.rotation_angle),
            u,
            &self.slip,
            &mut beta,
        );
        let e = energy_of_values(self.dom, &beta, &self.pot);
        let mut grad = vec![Vec2::ZERO; self.dom.num_nodes()];
        gradient_of_values(self.dom, &beta, &self.pot, &mut grad);
        (e, grad)
    }

    pub fn beta_for(&self, u: &[Vec2], rotation_angle: f64) -> DiscreteStrain {
        let mut beta = DiscreteStrain::zeros(self.dom);
        let mut vals = vec![Vec2::ZERO; self.dom.num_bonds()];
        assemble_beta(
            self.dom,
            &Mat2::rotation(rotation_angle),
            u,
            &self.slip,
            &mut vals,
        );
        beta.values_mut().copy_from_slice(&vals);
        beta
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub u: Vec<Vec2>,
    pub rotation_angle: f64,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub admissibility: Option<AdmissibilityReport>,
    /// (iteration, energy, grad max-norm) per accepted step.
    pub trace: Vec<(usize, f64, f64)>,
}

/// β(i,j) = R(j-i) + ε(u(j) - u(i) - σ(i,j)) on canonical bonds.
pub fn assemble_beta(
    dom: &LatticeDomain,
    rot: &Mat2,
    u: &[Vec2],
    slip: &SlipField,
    out: &mut [Vec2],
) {
    let eps = dom.epsilon();
    let positions = dom.node_positions();
    let bonds = dom.bonds();
    let slip_vals = slip.values();
    let fill = |bi: usize, val: &mut Vec2| {
        let (a, b) = bonds[bi];
        let step = positions[b as usize] - positions[a as usize];
        *val = rot.mul_vec(step) + (u[b as usize] - u[a as usize] - slip_vals[bi]) * eps;
    };
    if out.len() <= 2 * CHUNK {
        for (bi, val) in out.iter_mut().enumerate() {
            fill(bi, val);
        }
    } else {
        out.par_iter_mut()
            .enumerate()
            .for_each(|(bi, val)| fill(bi, val));
    }
}

/// Gradient of the energy with respect to u, gathered per node (each node
/// collects its bond terms, its centered wedges, and its appearances as a
/// wedge arm at neighboring centers). Embarrassingly parallel and
/// bit-stable at any worker count.
pub(crate) fn gradient_of_values(
    dom: &LatticeDomain,
    values: &[Vec2],
    pot: &PotentialPair,
    grad: &mut [Vec2],
) {
    let eps = dom.epsilon();
    let eps2 = eps * eps;
    let floor = 1e-14 * eps;
    let c0 = 2.0 / (SQRT3 * eps2);
    let wedge_scale = 2.0 / SQRT3 * eps;
    let nb = dom.neighbor_table();
    let bonds = dom.bonds();
    let node_grad = |ni: usize, g: &mut Vec2| {
        let n = ni as u32;
        let mut acc = Vec2::ZERO;
        let row = &nb[ni];
        for d in 0..6 {
            let b1 = row[d];
            if b1 < 0 {
                continue;
            }
            let beta1 = oriented(bonds, values, b1 as u32, n);
            let norm = beta1.norm();
            if norm > floor {
                // d/du_n of ε² ψ1(|β|/ε) with ∂β/∂u_n = -ε Id
                acc -= beta1 * (eps2 * pot.psi1.deriv(norm / eps) / norm);
            }
            // wedge centered at n with arms (d, d+1)
            let b2 = row[(d + 1) % 6];
            if b2 >= 0 {
                let beta2 = oriented(bonds, values, b2 as u32, n);
                let s = c0 * beta1.cross(beta2);
                acc += (beta2 - beta1).perp() * (wedge_scale * pot.psi2.deriv(s));
            }
            // wedges centered at the neighbor m where n is an arm
            let (pa, pb) = bonds[b1 as usize];
            let m = if pa == n { pb } else { pa };
            let dm = (d + 3) % 6;
            let mrow = &nb[m as usize];
            let bj = mrow[(dm + 1) % 6];
            if bj >= 0 {
                // n is the first arm: wedge (m; dm, dm+1)
                let beta2p = oriented(bonds, values, bj as u32, m);
                let s = c0 * (-beta1).cross(beta2p);
                acc -= beta2p.perp() * (wedge_scale * pot.psi2.deriv(s));
            }
            let bk = mrow[(dm + 5) % 6];
            if bk >= 0 {
                // n is the second arm: wedge (m; dm-1, dm)
                let beta1p = oriented(bonds, values, bk as u32, m);
                let s = c0 * beta1p.cross(-beta1);
                acc += beta1p.perp() * (wedge_scale * pot.psi2.deriv(s));
            }
        }
        *g = acc;
    };
    if grad.len() <= CHUNK {
        for (ni, g) in grad.iter_mut().enumerate() {
            node_grad(ni, g);
        }
    } else {
        grad.par_iter_mut()
            .enumerate()
            .for_each(|(ni, g)| node_grad(ni, g));
    }
}

/// dE/dθ for the global frame angle.
fn frame_gradient(dom: &LatticeDomain, values: &[Vec2], pot: &PotentialPair, theta: f64) -> f64 {
    let eps = dom.epsilon();
    let eps2 = eps * eps;
    let floor = 1e-14 * eps;
    let c0 = 2.0 / (SQRT3 * eps2);
    let positions = dom.node_positions();
    let bonds = dom.bonds();
    let (s, c) = theta.sin_cos();
    let rot_prime = Mat2([[-s, -c], [c, -s]]);
    let bond_part: Vec<f64> = bonds
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let base = ci * CHUNK;
            let mut acc = 0.0;
            for (off, &(a, b)) in chunk.iter().enumerate() {
                let v = values[base + off];
                let norm = v.norm();
                if norm > floor {
                    let step = positions[b as usize] - positions[a as usize];
                    acc += eps * pot.psi1.deriv(norm / eps) * v.dot(rot_prime.mul_vec(step)) / norm;
                }
            }
            acc
        })
        .collect();
    let nb = dom.neighbor_table();
    let wedge_part: Vec<f64> = nb
        .par_chunks(CHUNK)
        .enumerate()
        .map(|(ci, chunk)| {
            let base = ci * CHUNK;
            let mut acc = 0.0;
            for (off, row) in chunk.iter().enumerate() {
                let n = (base + off) as u32;
                let xn = positions[base + off];
                for d in 0..6 {
                    let (b1, b2) = (row[d], row[(d + 1) % 6]);
                    if b1 >= 0 && b2 >= 0 {
                        let v1 = oriented(bonds, values, b1 as u32, n);
                        let v2 = oriented(bonds, values, b2 as u32, n);
                        let sarg = c0 * v1.cross(v2);
                        let w = 2.0 / SQRT3 * pot.psi2.deriv(sarg);
                        let m1 = other_end(bonds, b1 as u32, n);
                        let m2 = other_end(bonds, b2 as u32, n);
                        let step1 = positions[m1 as usize] - xn;
                        let step2 = positions[m2 as usize] - xn;
                        acc += w
                            * ((-v2.perp()).dot(rot_prime.mul_vec(step1))
                                + v1.perp().dot(rot_prime.mul_vec(step2)));
                    }
                }
            }
            acc
        })
        .collect();
    bond_part.iter().sum::<f64>() + wedge_part.iter().sum::<f64>()
}

#[inline]
fn other_end(bonds: &[(u32, u32)], bond: u32, n: u32) -> u32 {
    let (a, b) = bonds[bond as usize];
    if a == n {
        b
    } else {
        a
    }
}

struct LbfgsHistory {
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    rho: Vec<f64>,
    memory: usize,
}

impl LbfgsHistory {
    fn new(memory: usize) -> Self {
        LbfgsHistory {
            s: Vec::new(),
            y: Vec::new(),
            rho: Vec::new(),
            memory,
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        let ss: f64 = dot(&s, &s).sqrt();
        let yy: f64 = dot(&y, &y).sqrt();
        if sy <= 1e-12 * ss * yy {
            return; // curvature too weak; skip the pair
        }
        if self.s.len() == self.memory {
            self.s.remove(0);
            self.y.remove(0);
            self.rho.remove(0);
        }
        self.rho.push(1.0 / sy);
        self.s.push(s);
        self.y.push(y);
    }

    /// Two-loop recursion: d = -H g.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q: Vec<f64> = g.to_vec();
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], &q);
            axpy(&mut q, -alpha[i], &self.y[i]);
        }
        if k > 0 {
            let i = k - 1;
            let gamma = dot(&self.s[i], &self.y[i]) / dot(&self.y[i], &self.y[i]);
            for v in q.iter_mut() {
                *v *= gamma;
            }
        }
        for i in 0..k {
            let beta = self.rho[i] * dot(&self.y[i], &q);
            axpy(&mut q, alpha[i] - beta, &self.s[i]);
        }
        for v in q.iter_mut() {
            *v = -*v;
        }
        q
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(out: &mut [f64], s: f64, x: &[f64]) {
    for (o, v) in out.iter_mut().zip(x) {
        *o += s * v;
    }
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Minimizes the energy over displacements (and optionally the frame).
/// Descent is enforced by Armijo backtracking; the result carries a
/// non-converged flag when the iteration or line-search budget runs out.
pub fn minimize(problem: &MinimizeProblem) -> Result<MinimizeResult> {
    let dom = problem.dom;
    let n_nodes = dom.num_nodes();
    let with_theta = problem.optimize_frame;
    let dim = 2 * n_nodes + usize::from(with_theta);

    let mut beta_buf = vec![Vec2::ZERO; dom.num_bonds()];
    let mut grad_buf = vec![Vec2::ZERO; n_nodes];

    let flatten_grad = |gv: &[Vec2], dtheta: f64, out: &mut Vec<f64>| {
        out.clear();
        for g in gv {
            out.push(g.x);
            out.push(g.y);
        }
        if with_theta {
            out.push(dtheta);
        }
    };
    let unpack = |x: &[f64]| -> (Vec<Vec2>, f64) {
        let u: Vec<Vec2> = (0..n_nodes)
            .map(|i| Vec2::new(x[2 * i], x[2 * i + 1]))
            .collect();
        let theta = if with_theta {
            x[dim - 1]
        } else {
            problem.rotation_angle
        };
        (u, theta)
    };

    let mut x = Vec::with_capacity(dim);
    for v in &problem.u0 {
        x.push(v.x);
        x.push(v.y);
    }
    if with_theta {
        x.push(problem.rotation_angle);
    }

    let eval_energy = |x: &[f64], beta_buf: &mut Vec<Vec2>| -> f64 {
        let (u, theta) = unpack(x);
        assemble_beta(dom, &Mat2::rotation(theta), &u, &problem.slip, beta_buf);
        energy_of_values(dom, beta_buf, &problem.pot)
    };
    let eval_full = |x: &[f64],
                     beta_buf: &mut Vec<Vec2>,
                     grad_buf: &mut Vec<Vec2>,
                     gflat: &mut Vec<f64>|
     -> f64 {
        let (u, theta) = unpack(x);
        assemble_beta(dom, &Mat2::rotation(theta), &u, &problem.slip, beta_buf);
        let e = energy_of_values(dom, beta_buf, &problem.pot);
        gradient_of_values(dom, beta_buf, &problem.pot, grad_buf);
        let dtheta = if with_theta {
            frame_gradient(dom, beta_buf, &problem.pot, theta)
        } else {
            0.0
        };
        flatten_grad(grad_buf, dtheta, gflat);
        // gauge: node 0 is pinned
        gflat[0] = 0.0;
        gflat[1] = 0.0;
        e
    };

    #[cfg(debug_assertions)]
    let reference_atoms = {
        let (u, theta) = unpack(&x);
        let beta = problem.beta_for(&u, theta);
        crate::strain::burgers_measure(dom, &beta, None)
    };
    #[cfg(debug_assertions)]
    let check_atoms = |x: &[f64]| {
        let (u, theta) = unpack(x);
        let beta = problem.beta_for(&u, theta);
        let atoms = crate::strain::burgers_measure(dom, &beta, None);
        assert_eq!(
            atoms.len(),
            reference_atoms.len(),
            "Burgers content changed"
        );
        for (a, b) in atoms.iter().zip(&reference_atoms) {
            assert_eq!(a.triangle, b.triangle, "Burgers atom moved");
            assert!(
                (a.weight - b.weight).norm() <= 1e-9 * dom.epsilon(),
                "Burgers weight drifted"
            );
        }
    };

    let mut g = Vec::with_capacity(dim);
    let mut energy = eval_full(&x, &mut beta_buf, &mut grad_buf, &mut g);
    let mut history = LbfgsHistory::new(10);
    let mut trace = vec![(0usize, energy, inf_norm(&g))];
    let mut converged = inf_norm(&g) <= problem.grad_tol;
    let mut iter = 0;

    while !converged && iter < problem.max_iter {
        iter += 1;
        let mut dir = history.direction(&g);
        let mut slope = dot(&dir, &g);
        if !(slope < 0.0) {
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
            if !(slope < 0.0) {
                break; // zero gradient direction; numerically stationary
            }
        }
        // backtracking Armijo line search
        let mut t = 1.0;
        let c1 = 1e-4;
        let mut accepted = false;
        let mut x_new = vec![0.0; dim];
        for _ in 0..60 {
            for i in 0..dim {
                x_new[i] = x[i] + t * dir[i];
            }
            let e_new = eval_energy(&x_new, &mut beta_buf);
            if e_new <= energy + c1 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break; // no descent representable at this precision
        }
        let mut g_new = Vec::with_capacity(dim);
        let e_new = eval_full(&x_new, &mut beta_buf, &mut grad_buf, &mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        history.push(s, yv);
        x = x_new;
        energy = e_new;
        g = g_new;
        let gn = inf_norm(&g);
        if trace.len() < 10_000 {
            trace.push((iter, energy, gn));
        }
        converged = gn <= problem.grad_tol;

        #[cfg(debug_assertions)]
        if iter == 1 || iter % 500 == 0 || converged {
            check_atoms(&x);
        }
    }

    let (u, theta) = unpack(&x);
    let admissibility = problem.mu.as_ref().map(|mu| {
        let beta = problem.beta_for(&u, theta);
        check_admissible(dom, &beta, mu, None)
    });
    Ok(MinimizeResult {
        u,
        rotation_angle: theta,
        energy,
        grad_norm: inf_norm(&g),
        iterations: iter,
        converged,
        admissibility,
        trace,
    })
}
