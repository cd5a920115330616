//! Acceptance suite: one pass/fail line per criterion, every tolerance
//! pinned in code. Criteria run sequentially inside a single test so the
//! stated runtime budgets are measured without interference.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use tridis::elasticity::{
    isotropic_prefactor, phi, phi_exhaustive_units, psi, psi_annulus, DEFAULT_PROFILE_MODES,
};
use tridis::energy::{
    continuum_density, density_hessian_check, linearized_tensor, total_energy, triangle_energy,
    PotentialPair,
};
use tridis::geometry::{Mat2, Polygon, Vec2};
use tridis::lattice::{build_domain, LatticeDomain, LatticeSpec, SQRT3};
use tridis::minimize::MinimizeProblem;
use tridis::recovery::{build_recovery, snap_positions, FarField, RecoveryInput, SlipField};
use tridis::strain::{
    burgers_measure, lattice_vector, DiscreteStrain, Dislocation, DislocationMeasure,
};
use tridis::study::{run_scaling, thin_annulus_demo, ScalingStudy, SolverSettings};

fn hexagon() -> Polygon {
    Polygon::regular(Vec2::ZERO, 1.0, 6)
}

fn hex_domain(eps: f64) -> LatticeDomain {
    build_domain(LatticeSpec::new(eps, hexagon()).unwrap()).unwrap()
}

fn pseudo_random(state: &mut u64) -> f64 {
    *state = state
        .wrapping_mul(6364136223846793005)
        .wrapping_add(1442695040888963407);
    ((*state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
}

// --------------------------------------------------------------------------
// criteria
// --------------------------------------------------------------------------

/// ψ(e1) from angular-profile minimization equals the isotropic closed
/// form μ(λ+μ)/(4π(λ+2μ)) within 1e-8 relative, in under a second.
fn cell_formula_exactness() -> String {
    let t0 = Instant::now();
    let tensor = linearized_tensor(&PotentialPair::default());
    let value = psi(Vec2::new(1.0, 0.0), &tensor, DEFAULT_PROFILE_MODES).unwrap();
    let exact = isotropic_prefactor(&tensor);
    let rel = (value - exact).abs() / exact;
    let elapsed = t0.elapsed();
    assert!(rel <= 1e-8, "relative error {rel:.3e}");
    assert!(
        elapsed.as_secs_f64() < 1.0,
        "runtime {elapsed:?} exceeds 1 s"
    );
    format!("psi = {value:.12e}, closed form {exact:.12e}, rel {rel:.2e}")
}

/// Branch-and-bound φ matches the exhaustive ‖z‖₁ ≤ 6 search in the unit
/// basis for every lattice vector with |b| ≤ 3, exactly.
fn phi_oracle_equivalence() -> String {
    let t0 = Instant::now();
    let tensor = linearized_tensor(&PotentialPair::default());
    let mut checked = 0;
    for p in -3i32..=3 {
        for q in -3i32..=3 {
            let b = lattice_vector(p, q);
            if b.norm() > 3.0 + 1e-12 {
                continue;
            }
            let bb = phi((p, q), &tensor, None, 4).unwrap();
            let ex = phi_exhaustive_units((p, q), &tensor, 6, 4)
                .unwrap()
                .expect("exhaustive search covers |b| <= 3");
            assert!(
                (bb.value - ex.0).abs() <= 1e-12 * ex.0.max(1.0),
                "b = ({p},{q}): {} vs {}",
                bb.value,
                ex.0
            );
            // the certificate must reproduce b
            let mut sum = (0, 0);
            for s in &bb.certificate {
                sum.0 += s.count * s.vector.0;
                sum.1 += s.count * s.vector.1;
            }
            assert_eq!(sum, (p, q), "certificate sums to {sum:?}");
            checked += 1;
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "runtime {elapsed:?} exceeds 10 s"
    );
    format!("{checked} lattice vectors, runtime {elapsed:.2?}")
}

/// Every recovery construction over the test layouts reproduces its
/// prescribed measure atom-by-atom with weight error ≤ 1e-10 ε.
fn burgers_quantization() -> String {
    let t0 = Instant::now();
    let eps = 0.5f64.powi(7);
    let gamma = 0.5;
    let pot = PotentialPair::default();
    let tensor = linearized_tensor(&pot);
    let dom = hex_domain(eps);
    let layouts: Vec<(f64, Vec<(Vec2, (i32, i32))>)> = vec![
        (0.0, vec![(Vec2::new(0.0, 0.001), (1, 0))]),
        (
            0.15,
            vec![
                (Vec2::new(-0.3, 0.21), (0, 1)),
                (Vec2::new(0.25, -0.2), (1, -1)),
            ],
        ),
        (
            0.0,
            vec![
                (Vec2::new(-0.3, 0.21), (1, 0)),
                (Vec2::new(0.25, -0.2), (0, 1)),
                (Vec2::new(0.05, 0.5), (2, 0)),
            ],
        ),
    ];
    let mut total_atoms = 0;
    for (angle, layout) in &layouts {
        let entries: Vec<Dislocation> = layout
            .iter()
            .map(|&(position, burgers)| Dislocation {
                position,
                burgers,
                frame_angle: *angle,
            })
            .collect();
        let mu = DislocationMeasure::new(entries, eps, gamma).unwrap();
        mu.validate(dom.polygon()).unwrap();
        let mu = snap_positions(&mu, &dom).unwrap();
        let out = build_recovery(
            &RecoveryInput {
                mu: mu.clone(),
                rotation_angle: *angle,
                far_field: FarField::Zero,
                tensor,
            },
            &dom,
        )
        .unwrap();
        let atoms = burgers_measure(&dom, &out.beta, None);
        assert_eq!(
            atoms.len(),
            mu.entries.len(),
            "expected {} atoms, found {}",
            mu.entries.len(),
            atoms.len()
        );
        for d in &mu.entries {
            let atom = atoms
                .iter()
                .find(|a| (a.position - d.position).norm() <= 1e-9 * eps)
                .expect("atom at the prescribed position");
            let err = (atom.weight - d.weight(eps)).norm();
            assert!(
                err <= 1e-10 * eps,
                "weight error {err:.3e} exceeds {:.3e}",
                1e-10 * eps
            );
            total_atoms += 1;
        }
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 30.0,
        "runtime {elapsed:?} exceeds 30 s"
    );
    format!(
        "{total_atoms} atoms across {} layouts, runtime {elapsed:.2?}",
        layouts.len()
    )
}

/// On ≥ 1000 random compatible cells the bond-sum energy equals
/// (√3/4) ε² W(M) within 1e-12 relative.
fn energy_identity() -> String {
    let poly = Polygon::new(vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(5.0, 0.0),
        Vec2::new(5.0, 5.0),
        Vec2::new(0.0, 5.0),
    ])
    .unwrap();
    let dom = build_domain(LatticeSpec::new(1.0, poly).unwrap()).unwrap();
    let pot = PotentialPair::default();
    let mut state = 0xfeedface_u64;
    let mut max_rel = 0.0f64;
    for trial in 0..1000 {
        let theta = pseudo_random(&mut state) * 3.0;
        let stretch = Mat2([
            [
                1.0 + 0.4 * pseudo_random(&mut state),
                0.4 * pseudo_random(&mut state),
            ],
            [
                0.4 * pseudo_random(&mut state),
                1.0 + 0.4 * pseudo_random(&mut state),
            ],
        ]);
        let m = Mat2::rotation(theta).mul_mat(&stretch);
        let beta =
            DiscreteStrain::from_fn(&dom, |i, j| m.mul_vec(j.position(1.0) - i.position(1.0)));
        let ti = (pseudo_random(&mut state).abs() * dom.num_triangles() as f64) as u32
            % dom.num_triangles() as u32;
        let bond_sum = triangle_energy(&dom, &beta, ti, &pot);
        let density = SQRT3 / 4.0 * continuum_density(&m, &pot);
        let rel = (bond_sum - density).abs() / density.abs().max(1e-300);
        assert!(
            rel <= 1e-12,
            "trial {trial}, cell {ti}: {bond_sum} vs {density} (rel {rel:.3e})"
        );
        max_rel = max_rel.max(rel);
    }
    format!("1000 cells, worst relative deviation {max_rel:.2e}")
}

/// Analytic gradient vs central finite differences: relative error ≤ 1e-6
/// on ≥ 10 random states of a ~200-node problem.
fn gradient_check() -> String {
    let dom = hex_domain(0.125);
    assert!(
        dom.num_nodes() >= 180,
        "domain has {} nodes",
        dom.num_nodes()
    );
    let problem = MinimizeProblem::new(
        &dom,
        PotentialPair::default(),
        SlipField::zeros(&dom),
        0.3,
        vec![Vec2::ZERO; dom.num_nodes()],
    );
    let mut state = 2024u64;
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let u: Vec<Vec2> = (0..dom.num_nodes())
            .map(|_| {
                Vec2::new(
                    0.25 * pseudo_random(&mut state),
                    0.25 * pseudo_random(&mut state),
                )
            })
            .collect();
        let (_, grad) = problem.energy_and_gradient(&u);
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.norm()));
        for _ in 0..8 {
            let ni = (pseudo_random(&mut state).abs() * dom.num_nodes() as f64) as usize
                % dom.num_nodes();
            for comp in 0..2 {
                let mut up = u.clone();
                let mut dn = u.clone();
                if comp == 0 {
                    up[ni].x += h;
                    dn[ni].x -= h;
                } else {
                    up[ni].y += h;
                    dn[ni].y -= h;
                }
                let (ep, _) = problem.energy_and_gradient(&up);
                let (em, _) = problem.energy_and_gradient(&dn);
                let fd = (ep - em) / (2.0 * h);
                let an = if comp == 0 { grad[ni].x } else { grad[ni].y };
                let rel = (fd - an).abs() / an.abs().max(1e-3 * gmax);
                assert!(
                    rel <= 1e-6,
                    "node {ni} comp {comp}: fd {fd} vs {an} (rel {rel:.3e})"
                );
                worst = worst.max(rel);
            }
        }
    }
    format!("10 states x 16 components, worst rel {worst:.2e}")
}

/// Finite-difference Hessian of W at Id matches λ|tr δ|² + (√3/2)α1|δ_sym|²
/// within 1e-4 relative on 20 directions.
fn hessian_linearization() -> String {
    let report = density_hessian_check(&PotentialPair::default(), 20);
    assert!(
        report.pass,
        "max relative error {:.3e} (worst direction {:?})",
        report.max_rel_err, report.worst_direction
    );
    format!("20 directions, worst rel {:.2e}", report.max_rel_err)
}

/// ψ_{1,r}(e1) residual decreases from r = 10² to 10³ and residual·log r
/// varies by < 50%.
fn annulus_convergence() -> String {
    let t0 = Instant::now();
    let tensor = linearized_tensor(&PotentialPair::default());
    let e1 = Vec2::new(1.0, 0.0);
    let exact = isotropic_prefactor(&tensor);
    let p100 = psi_annulus(e1, &tensor, 1.0, 100.0, None).unwrap();
    let p1000 = psi_annulus(e1, &tensor, 1.0, 1000.0, None).unwrap();
    let (r100, r1000) = (exact - p100, exact - p1000);
    assert!(
        r100 > 0.0 && r1000 > 0.0,
        "residuals {r100:.3e}, {r1000:.3e}"
    );
    assert!(
        r1000 < r100,
        "residual did not decrease: {r100:.3e} -> {r1000:.3e}"
    );
    let (c100, c1000) = (r100 * 100f64.ln(), r1000 * 1000f64.ln());
    let variation = (c100 - c1000).abs() / c100.abs();
    assert!(variation < 0.5, "residual*log r varies by {variation:.2}");
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "runtime {elapsed:?} exceeds 60 s"
    );
    format!(
        "residuals {r100:.3e} -> {r1000:.3e}, residual*log(r) varies {:.1}%, runtime {elapsed:.2?}",
        100.0 * variation
    )
}

/// Scaling trend for a single ξ = e1 dislocation, no far field: the
/// normalized recovery energy stays bounded along the ladder, the
/// normalized minimized energy is nonincreasing in ε on at least 3 of 4
/// steps, and it exceeds the continuum reference (one-sided, 5% slack) at
/// every ε in 2^-5..2^-8.
fn scaling_trend() -> String {
    let t0 = Instant::now();
    let study = ScalingStudy {
        domain: hexagon(),
        // this position snaps onto a core of the same cell orientation at
        // every dyadic ε, keeping the core environment comparable along
        // the ladder (a generic point alternates orientations)
        layout: vec![(Vec2::new(0.0, 0.001), (1, 0))],
        rotation_angle: 0.0,
        far_field: FarField::Zero,
        epsilons: vec![
            0.5f64.powi(4),
            0.5f64.powi(5),
            0.5f64.powi(6),
            0.5f64.powi(7),
            0.5f64.powi(8),
        ],
        gamma: 0.5,
        pot: PotentialPair::default(),
        solver: SolverSettings {
            grad_tol_rel: 1e-5,
            max_iter: 30_000,
        },
    };
    let rows = run_scaling(&study).unwrap();
    // (a) uniform bound on the normalized recovery energies
    let first = rows[0].normalized_recovery;
    for r in &rows {
        assert!(
            r.normalized_recovery <= first * 1.05 && r.normalized_recovery <= 1.0,
            "normalized recovery {:.4} at eps {} breaks the uniform bound",
            r.normalized_recovery,
            r.epsilon
        );
        assert!(
            r.minimized_energy <= r.recovery_energy + 1e-12,
            "minimized exceeds recovery at eps {}",
            r.epsilon
        );
        assert!(
            r.converged,
            "minimization did not converge at eps {}",
            r.epsilon
        );
    }
    // (b) minimized energies: monotone majority + one-sided liminf bound
    let vals: Vec<f64> = rows.iter().map(|r| r.normalized_minimized).collect();
    let steps = vals.len() - 1;
    let decreasing = vals.windows(2).filter(|w| w[1] <= w[0]).count();
    assert!(
        decreasing >= 3 && steps == 4,
        "nonincreasing on {decreasing} of {steps} steps: {vals:?}"
    );
    let reference = rows[0].gamma_limit_reference;
    for r in rows.iter().skip(1) {
        assert!(
            r.normalized_minimized >= 0.95 * reference,
            "normalized minimized {:.4} at eps {} falls below 0.95 x reference {:.4}",
            r.normalized_minimized,
            r.epsilon,
            reference
        );
    }
    let elapsed = t0.elapsed();
    assert!(
        elapsed.as_secs_f64() <= 900.0,
        "runtime {elapsed:?} exceeds 15 min"
    );
    format!(
        "minimized {:?}, reference {reference:.4}, {decreasing}/4 steps nonincreasing, runtime {elapsed:.2?}",
        vals.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
    )
}

/// Thin-annulus rotating ramp: energy exponent in [1.9, 2.1], thin-annulus
/// average within 1e-3 of Id, global relative L² distance to R(1) below
/// 0.05 at ε = 2^-8.
fn thin_annulus() -> String {
    let ladder = [
        0.5f64.powi(5),
        0.5f64.powi(6),
        0.5f64.powi(7),
        0.5f64.powi(8),
    ];
    let demo = thin_annulus_demo(4.0, &ladder, 0.5).unwrap();
    assert!(
        (1.9..=2.1).contains(&demo.energy_exponent),
        "energy exponent {}",
        demo.energy_exponent
    );
    let last = demo.rows.last().unwrap();
    assert!(
        last.thin_average_distance <= 1e-3,
        "thin annulus average distance {:.3e}",
        last.thin_average_distance
    );
    assert!(
        last.l2_distance_to_limit < 0.05,
        "relative L2 distance {:.4}",
        last.l2_distance_to_limit
    );
    format!(
        "exponent {:.4}, thin avg dist {:.1e}, L2 to limit {:.4}",
        demo.energy_exponent, last.thin_average_distance, last.l2_distance_to_limit
    )
}

/// Frame indifference of the lattice energy under a global left rotation
/// and lattice symmetry of W under the right π/3 rotation, both at 1e-12.
fn frame_and_lattice_symmetry() -> String {
    let dom = hex_domain(0.25);
    let pot = PotentialPair::default();
    let mut state = 31337u64;
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let beta = DiscreteStrain::from_fn(&dom, |i, j| {
            (j.position(dom.epsilon()) - i.position(dom.epsilon()))
                + Vec2::new(
                    0.05 * dom.epsilon() * pseudo_random(&mut state),
                    0.05 * dom.epsilon() * pseudo_random(&mut state),
                )
        });
        let e0 = total_energy(&dom, &beta, &pot);
        for theta in [0.3, 1.7, 4.4] {
            let q = Mat2::rotation(theta);
            let mut rotated = beta.clone();
            for v in rotated.values_mut() {
                *v = q.mul_vec(*v);
            }
            let e1 = total_energy(&dom, &rotated, &pot);
            let rel = (e0 - e1).abs() / (1.0 + e0.abs());
            assert!(rel <= 1e-12, "trial {trial}, theta {theta}: {e0} vs {e1}");
            worst = worst.max(rel);
        }
    }
    let r6 = Mat2::rotation(std::f64::consts::PI / 3.0);
    for _ in 0..50 {
        let m = Mat2([
            [
                pseudo_random(&mut state) * 2.0,
                pseudo_random(&mut state) * 2.0,
            ],
            [
                pseudo_random(&mut state) * 2.0,
                pseudo_random(&mut state) * 2.0,
            ],
        ]);
        let w1 = continuum_density(&m, &pot);
        let w2 = continuum_density(&m.mul_mat(&r6), &pot);
        let rel = (w1 - w2).abs() / (1.0 + w1.abs());
        assert!(rel <= 1e-12, "W({m:?}): {w1} vs {w2}");
        worst = worst.max(rel);
    }
    format!("worst relative deviation {worst:.2e}")
}

// --------------------------------------------------------------------------

#[test]
fn acceptance() {
    let criteria: Vec<(&str, fn() -> String)> = vec![
        ("cell-formula exactness", cell_formula_exactness),
        ("phi oracle equivalence", phi_oracle_equivalence),
        ("Burgers quantization", burgers_quantization),
        ("energy identity", energy_identity),
        ("gradient check", gradient_check),
        ("Hessian linearization", hessian_linearization),
        ("annulus convergence", annulus_convergence),
        ("scaling trend", scaling_trend),
        ("thin-annulus demo", thin_annulus),
        (
            "frame indifference & lattice symmetry",
            frame_and_lattice_symmetry,
        ),
    ];
    let mut failures = Vec::new();
    for (name, run) in criteria {
        let t0 = Instant::now();
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => {
                println!("acceptance: {name}: PASS [{:.2?}] {detail}", t0.elapsed());
            }
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                println!("acceptance: {name}: FAIL [{:.2?}] {msg}", t0.elapsed());
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
