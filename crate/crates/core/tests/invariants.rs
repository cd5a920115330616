//! Property tests for the structural invariants of the lattice model.

use proptest::prelude::*;

use tridis::energy::{continuum_density, total_energy, PotentialPair};
use tridis::geometry::{Mat2, Polygon, Vec2};
use tridis::lattice::{build_domain, LatticeDomain, LatticeSpec, NodeId};
use tridis::recovery::cutoff;
use tridis::strain::{burgers_measure, circulation, DiscreteStrain};

fn small_domain() -> LatticeDomain {
    let poly = Polygon::new(vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(5.0, 0.0),
        Vec2::new(5.0, 5.0),
        Vec2::new(0.0, 5.0),
    ])
    .unwrap();
    build_domain(LatticeSpec::new(1.0, poly).unwrap()).unwrap()
}

fn strain_from_seed(dom: &LatticeDomain, seed: u64, amplitude: f64) -> DiscreteStrain {
    let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
    let mut rnd = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    DiscreteStrain::from_fn(dom, |i, j| {
        (j.position(1.0) - i.position(1.0)) + Vec2::new(amplitude * rnd(), amplitude * rnd())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bond_antisymmetry_is_structural(seed in any::<u64>()) {
        let dom = small_domain();
        let beta = strain_from_seed(&dom, seed, 0.5);
        for &(a, b) in dom.bonds().iter().step_by(3) {
            let (na, nb) = (dom.nodes()[a as usize], dom.nodes()[b as usize]);
            let fwd = beta.get(&dom, na, nb).unwrap();
            let bwd = beta.get(&dom, nb, na).unwrap();
            prop_assert_eq!(fwd, -bwd);
        }
    }

    #[test]
    fn burgers_measure_ignores_gradients(seed in any::<u64>(), scale in 0.0f64..2.0) {
        let dom = small_domain();
        let beta = strain_from_seed(&dom, seed, 0.4);
        let mut state = seed ^ 0xdeadbeef;
        let mut rnd = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(97);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let u: Vec<Vec2> = (0..dom.num_nodes())
            .map(|_| Vec2::new(scale * rnd(), scale * rnd()))
            .collect();
        let grad = DiscreteStrain::from_displacement(&dom, &u);
        let mut shifted = beta.clone();
        for (v, g) in shifted.values_mut().iter_mut().zip(grad.values()) {
            *v += *g;
        }
        let a = burgers_measure(&dom, &beta, Some(1e-30));
        let b = burgers_measure(&dom, &shifted, Some(1e-30));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x.triangle, y.triangle);
            prop_assert!((x.weight - y.weight).norm() < 1e-11);
        }
    }

    #[test]
    fn constant_matrix_strains_are_compatible(m00 in -2.0f64..2.0, m01 in -2.0f64..2.0,
                                              m10 in -2.0f64..2.0, m11 in -2.0f64..2.0) {
        let dom = small_domain();
        let m = Mat2([[m00, m01], [m10, m11]]);
        let beta = DiscreteStrain::from_fn(&dom, |i: NodeId, j: NodeId| {
            m.mul_vec(j.position(1.0) - i.position(1.0))
        });
        for ti in (0..dom.num_triangles() as u32).step_by(5) {
            prop_assert!(circulation(&dom, &beta, ti).norm() < 1e-12);
        }
    }

    #[test]
    fn density_is_invariant_under_lattice_rotations(m00 in -2.0f64..2.0, m01 in -2.0f64..2.0,
                                                    m10 in -2.0f64..2.0, m11 in -2.0f64..2.0,
                                                    k in 1usize..6) {
        let pot = PotentialPair::default();
        let m = Mat2([[m00, m01], [m10, m11]]);
        let r = Mat2::rotation(k as f64 * std::f64::consts::PI / 3.0);
        let w1 = continuum_density(&m, &pot);
        let w2 = continuum_density(&m.mul_mat(&r), &pot);
        prop_assert!((w1 - w2).abs() <= 1e-11 * (1.0 + w1.abs()));
    }

    #[test]
    fn energy_is_frame_indifferent(seed in any::<u64>(), theta in 0.0f64..6.28) {
        let dom = small_domain();
        let pot = PotentialPair::default();
        let beta = strain_from_seed(&dom, seed, 0.3);
        let q = Mat2::rotation(theta);
        let mut rotated = beta.clone();
        for v in rotated.values_mut() {
            *v = q.mul_vec(*v);
        }
        let e0 = total_energy(&dom, &beta, &pot);
        let e1 = total_energy(&dom, &rotated, &pot);
        prop_assert!((e0 - e1).abs() <= 1e-12 * (1.0 + e0));
    }

    #[test]
    fn cutoff_is_a_monotone_bridge(s in -1.0f64..4.0, t in -1.0f64..4.0) {
        let (a, b) = (cutoff(s), cutoff(t));
        prop_assert!((0.0..=1.0).contains(&a));
        if s <= t {
            prop_assert!(a >= b);
        }
    }
}
