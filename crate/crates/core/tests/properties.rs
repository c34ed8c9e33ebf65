mod common;

use common::*;
use matcons::design::{self, TimescaleBox, WeightBox};
use matcons::edge::{self, EdgeSpace};
use matcons::graph::{self, MatrixWeightedGraph};
use matcons::h2::{self, NoiseModel};
use matcons::linalg::{self, Mat};
use matcons::{io, Tolerances};
use proptest::prelude::*;

fn instance(seed: u64) -> MatrixWeightedGraph {
    random_instance(&mut rng(seed), 9, 3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn incidence_reconstructs(seed in any::<u64>()) {
        let g = instance(seed);
        let d = graph::incidence(&g);
        prop_assert!(d.reconstruction_error() <= 1e-12);
        prop_assert_eq!(d.tree_edges.len(), g.n() - 1);
        prop_assert!(d.t_tau_c.iter().all(|v| *v == -1.0 || *v == 0.0 || *v == 1.0));
    }

    #[test]
    fn laplacian_has_k_dimensional_kernel(seed in any::<u64>()) {
        let g = instance(seed);
        let l = graph::weighted_laplacian(&g);
        prop_assert!(linalg::asymmetry(&l) <= 1e-12 * (1.0 + l.amax()));
        let ev = linalg::sym_eigenvalues(&l);
        let scale = 1e-9 * (1.0 + ev[ev.len() - 1]);
        prop_assert_eq!(ev.iter().filter(|v| v.abs() <= scale).count(), g.k());
        prop_assert!(ev[0] >= -scale);
        let ones = linalg::kron_eye(&Mat::from_element(g.n(), 1, 1.0), g.k());
        prop_assert!((&l * ones).amax() <= 1e-12 * (1.0 + l.amax()));
    }

    #[test]
    fn cut_gram_and_edge_laplacian_are_spd(seed in any::<u64>()) {
        let space = EdgeSpace::new(&instance(seed));
        prop_assert!(linalg::is_spd(&space.cut_gram));
        prop_assert!(linalg::is_spd(&space.edge_laplacian));
    }

    #[test]
    fn similarity_holds(seed in any::<u64>()) {
        let g = instance(seed);
        let t = edge::transformed_laplacian(&g, &Tolerances::default()).unwrap();
        let space = EdgeSpace::new(&g);
        let m = space.dim();
        let reduced = &space.edge_laplacian * &space.cut_gram;
        let expect = linalg::block_diag(&[&reduced, &Mat::zeros(g.k(), g.k())]);
        prop_assert_eq!(t.shape(), (m + g.k(), m + g.k()));
        prop_assert!((t - expect).amax() <= 1e-8 * (1.0 + reduced.amax()));
    }

    #[test]
    fn tree_model_is_hurwitz(seed in any::<u64>()) {
        let model = edge::tree_model(&instance(seed), &Tolerances::default()).unwrap();
        prop_assert!(linalg::max_real_eig(&model.a) < 0.0);
    }

    #[test]
    fn h2_scales_quadratically(seed in any::<u64>(), c in 0.1f64..5.0) {
        let g = instance(seed);
        let tol = Tolerances::default();
        let mut r = rng(seed ^ 0x5eed);
        let omega = random_spd(g.n() * g.k(), &mut r);
        let gamma = random_spd(g.edge_count() * g.k(), &mut r);
        let base = h2::h2_general(&g, &NoiseModel::General { omega: omega.clone(), gamma: gamma.clone() }, &tol).unwrap().h2;
        let scaled = h2::h2_general(&g, &NoiseModel::General { omega: omega * c, gamma: gamma * c }, &tol).unwrap().h2;
        prop_assert!(rel_err(scaled, c * c * base) <= 1e-8);
    }

    #[test]
    fn performance_dominates_gramian_trace(seed in any::<u64>()) {
        let g = instance(seed);
        let r = h2::h2_closed_form(&g, 1.0, 1.0, &Tolerances::default()).unwrap();
        let tr = r.x.trace();
        prop_assert!(r.h2 >= tr * (1.0 - 1e-12));
        if g.is_tree() {
            prop_assert!(rel_err(r.h2, tr) <= 1e-12);
        }
    }

    #[test]
    fn factor_bounds_are_ordered(seed in any::<u64>()) {
        let g = instance(seed);
        let tol = Tolerances::default();
        let mut r = rng(seed ^ 0xfac);
        let omega = random_spd(g.n() * g.k(), &mut r);
        let gamma = random_spd(g.edge_count() * g.k(), &mut r);
        let suff = h2::sufficient_factors(&omega, &gamma, &g, &tol).unwrap();
        let tight = h2::tight_factors(&omega, &gamma, &g, &tol).unwrap();
        for b in [suff, tight] {
            prop_assert!(0.0 <= b.alpha_lo && b.alpha_lo <= b.alpha_hi);
            prop_assert!(0.0 <= b.beta_lo && b.beta_lo <= b.beta_hi);
            prop_assert!(b.gap >= 0.0);
        }
        prop_assert!(tight.gap <= suff.gap * (1.0 + 1e-10));
    }

    #[test]
    fn projection_is_feasible_and_idempotent(seed in any::<u64>(), k in 1usize..4) {
        let mut r = rng(seed);
        let lo = random_spd(k, &mut r) * 0.3;
        let hi = &lo + random_spd(k, &mut r) * 2.0;
        let b = WeightBox::new(lo, hi).unwrap();
        let tol = Tolerances::default();
        let p = design::project_weight_box(&(random_symmetric(k, &mut r) * 5.0), &b, &tol).unwrap();
        prop_assert!(b.contains(&p, 1e-8));
        let again = design::project_weight_box(&p, &b, &tol).unwrap();
        prop_assert!((&again - &p).amax() <= 1e-8);
    }

    #[test]
    fn descent_iterates_stay_feasible(seed in any::<u64>()) {
        let g = random_instance(&mut rng(seed), 6, 2);
        let mut r = rng(seed ^ 1);
        let b = WeightBox::random(0.05, 10.0, g.k(), &mut r).unwrap();
        let tol = Tolerances::default();
        let rep = design::optimize_weights(&g, &b, 0.05, 30, &tol).unwrap();
        prop_assert_eq!(rep.costs.len(), rep.iterates.len());
        for it in &rep.iterates[1..] {
            for w in it {
                prop_assert!(b.contains(w, 1e-8));
            }
        }
    }

    #[test]
    fn timescales_uniform_per_node_and_boxed(seed in any::<u64>(), h in 0.001f64..1.0, r in 1u32..4) {
        let g = instance(seed);
        let tsbox = TimescaleBox::new(0.5, 20.0, h, r).unwrap();
        let eps = design::assign_timescales(&g, &tsbox).unwrap();
        for row in eps {
            prop_assert!(row.iter().all(|&e| e == row[0]));
            prop_assert!((0.5..=20.0).contains(&row[0]));
        }
    }

    #[test]
    fn graph_file_round_trip(seed in any::<u64>()) {
        let g = instance(seed);
        prop_assert_eq!(io::parse_graph(&io::graph_to_json(&g)).unwrap(), g);
    }
}

#[test]
fn first_order_model_cross_check_with_special_noise() {
    let tol = Tolerances::default();
    let mut r = rng(3);
    for _ in 0..20 {
        let g = random_instance(&mut r, 8, 3);
        let cf = h2::h2_closed_form(&g, 1.3, 0.7, &tol).unwrap();
        let gen = h2::h2_general(&g, &NoiseModel::Special { sigma_w: 1.3, sigma_v: 0.7 }, &tol).unwrap();
        assert!(rel_err(cf.h2, gen.h2) <= 1e-8);
    }
}
