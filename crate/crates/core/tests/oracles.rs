//! Cross-checks against independent numerical oracles.

mod common;

use common::*;
use matcons::design::{self, TimescaleBox, WeightBox};
use matcons::h2::{self, Direction, NoiseModel};
use matcons::linalg::{self, Mat};
use matcons::{lyapunov, MatrixWeightedGraph, Tolerances};
use rand::Rng;

/// Integrates `Ẋ = AX + XAᵀ + Q` from zero with classical RK4.
fn lyapunov_by_integration(a: &Mat, q: &Mat, horizon: f64, steps: usize) -> Mat {
    let f = |x: &Mat| a * x + x * a.transpose() + q;
    let h = horizon / steps as f64;
    let mut x = Mat::zeros(a.nrows(), a.ncols());
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (h / 2.0)));
        let k3 = f(&(&x + &k2 * (h / 2.0)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

#[test]
fn lyapunov_matches_time_integral() {
    let mut rng = rng(11);
    for _ in 0..5 {
        let m = 6;
        let u = random_symmetric(m, &mut rng).upper_triangle();
        // Negative definite symmetric part plus a skew part keeps A stable but non-normal.
        let a = -(random_spd(m, &mut rng) + Mat::identity(m, m)) + (&u - u.transpose());
        assert!(linalg::max_real_eig(&a) < 0.0);
        let q = random_spd(m, &mut rng);
        let x = lyapunov::solve_lyapunov(&a, &q, &Tolerances::default()).unwrap();
        let decay = -linalg::max_real_eig(&a);
        let horizon = 40.0 / decay;
        let oracle = lyapunov_by_integration(&a, &q, horizon, 40_000);
        assert!((&x - &oracle).norm() <= 1e-8 * (1.0 + oracle.norm()), "{}", (&x - &oracle).norm());
    }
}

#[test]
fn schur_and_kronecker_solvers_agree() {
    let mut rng = rng(12);
    for m in [3, 8, 20] {
        let a = -(random_spd(m, &mut rng) * 2.0 + Mat::identity(m, m)) + random_symmetric(m, &mut rng).upper_triangle();
        if linalg::max_real_eig(&a) >= 0.0 {
            continue;
        }
        let q = random_spd(m, &mut rng);
        let bs = lyapunov::bartels_stewart(&a, &q).unwrap();
        let kr = lyapunov::solve_lyapunov_kron(&a, &q).unwrap();
        assert!((&bs - &kr).norm() <= 1e-9 * (1.0 + kr.norm()));
    }
}

fn sym_fd_gradient(graph: &MatrixWeightedGraph, edge: usize, h: f64, step: f64, tol: &Tolerances) -> Mat {
    let k = graph.k();
    let mut g = Mat::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let cost_at = |delta: f64| {
                let mut w = graph.weights().to_vec();
                w[edge][(i, j)] += delta;
                if i != j {
                    w[edge][(j, i)] += delta;
                }
                design::p1_cost(&graph.with_weights(w).unwrap(), h, tol).unwrap()
            };
            let d = (cost_at(step) - cost_at(-step)) / (2.0 * step);
            // A symmetric perturbation of an off-diagonal pair moves G_ij + G_ji.
            if i == j {
                g[(i, i)] = d;
            } else {
                g[(i, j)] = d / 2.0;
                g[(j, i)] = d / 2.0;
            }
        }
    }
    g
}

#[test]
fn p1_gradient_matches_finite_differences() {
    let tol = Tolerances::default();
    let mut rng = rng(13);
    for _ in 0..20 {
        let g = random_instance(&mut rng, 7, 3);
        let h = rng.random_range(0.0..0.5);
        for e in 0..g.edge_count() {
            let analytic = design::p1_gradient(&g, e, h, &tol).unwrap();
            let numeric = sym_fd_gradient(&g, e, h, 1e-6, &tol);
            let err = (&analytic - &numeric).norm() / analytic.norm().max(1e-12);
            assert!(err <= 1e-5, "edge {e}: relative error {err}");
        }
    }
}

#[test]
fn tree_gradient_is_explicit() {
    let tol = Tolerances::default();
    let mut rng = rng(14);
    for _ in 0..20 {
        let g = random_tree(&mut rng, 10, 1);
        let h = 0.01;
        for e in 0..g.edge_count() {
            let w = g.weights()[e][(0, 0)];
            let expect = -1.0 / (w * w) + h * w;
            let got = design::p1_gradient(&g, e, h, &tol).unwrap()[(0, 0)];
            assert!((got - expect).abs() <= 1e-8 * expect.abs().max(1.0));
        }
    }
}

/// Largest `α` with `αP ⪯ M` (or smallest with `M ⪯ αP`) by bisection on PSD feasibility.
fn bisect_factor(m: &Mat, p: &Mat, direction: Direction) -> f64 {
    let feasible = |a: f64| match direction {
        Direction::Lower => linalg::min_eig(&(m - p * a)) >= 0.0,
        Direction::Upper => linalg::min_eig(&(p * a - m)) >= 0.0,
    };
    let (mut lo, mut hi) = (-1e3, 1e3);
    for _ in 0..51 {
        let mid = 0.5 * (lo + hi);
        let go_up = match direction {
            Direction::Lower => feasible(mid),
            Direction::Upper => !feasible(mid),
        };
        if go_up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn tight_factor_matches_bisection() {
    let mut rng = rng(15);
    for _ in 0..20 {
        let m_dim = rng.random_range(1..=6);
        let m = random_spd(m_dim, &mut rng);
        let p = random_spd(m_dim, &mut rng);
        for dir in [Direction::Lower, Direction::Upper] {
            let a = h2::tight_factor(&m, &p, dir).unwrap();
            let b = bisect_factor(&m, &p, dir);
            // 51 halvings of a width-2000 bracket leave about 1e-12.
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{dir:?}: {a} vs {b}");
        }
    }
}

#[test]
fn gap_matches_two_lyapunov_solves_on_path() {
    let tol = Tolerances::default();
    let g = MatrixWeightedGraph::new(2, 1, vec![(0, 1)], vec![Mat::from_element(1, 1, 1.7)], vec![vec![0.5], vec![2.0]]).unwrap();
    let omega_t = Mat::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.8]);
    let gamma_t = Mat::from_element(1, 1, 0.6);
    let b = h2::tight_factors(&omega_t, &gamma_t, &g, &tol).unwrap();
    let (e_half, w_half) = (
        Mat::from_diagonal(&g.timescale_diagonal().map(f64::sqrt)),
        g.weight_blocks().sqrt().assemble(),
    );
    let solve = |a: f64, bb: f64| {
        h2::h2_general(&g, &NoiseModel::General { omega: &e_half * a, gamma: &w_half * bb }, &tol).unwrap().h2
    };
    let spread = solve(b.alpha_hi, b.beta_hi) - solve(b.alpha_lo, b.beta_lo);
    assert!(rel_err(b.gap, spread) < 1e-10);
}

#[test]
fn timescales_beat_random_assignments() {
    let mut rng = rng(16);
    for _ in 0..20 {
        let g = random_instance(&mut rng, 10, 3);
        let tsbox = TimescaleBox::new(rng.random_range(0.1..2.0), rng.random_range(5.0..50.0), rng.random_range(0.01..1.0), rng.random_range(1..=3)).unwrap();
        let best = g.with_timescales(design::assign_timescales(&g, &tsbox).unwrap()).unwrap();
        let best_cost = design::p2_cost(&best, &tsbox);
        for _ in 0..100 {
            let eps = (0..g.n()).map(|_| (0..g.k()).map(|_| rng.random_range(tsbox.eps_min..=tsbox.eps_max)).collect()).collect();
            let cost = design::p2_cost(&g.with_timescales(eps).unwrap(), &tsbox);
            assert!(best_cost <= cost);
        }
    }
}

/// Stationary point of `½ deg/ε + (h/2) ε^r` by bisection on the derivative.
fn node_minimizer(deg: f64, h: f64, r: u32) -> f64 {
    let d = |e: f64| -0.5 * deg / (e * e) + 0.5 * h * r as f64 * e.powi(r as i32 - 1);
    let (mut lo, mut hi) = (1e-6_f64, 1e6_f64);
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if d(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo * hi).sqrt()
}

#[test]
fn timescale_matches_one_dimensional_minimizer() {
    for deg in 1..=8 {
        for r in 1..=3 {
            for h in [0.01, 0.1, 1.0] {
                let tsbox = TimescaleBox::new(1e-6, 1e6, h, r).unwrap();
                let (eps, active) = design::timescale_target(deg, &tsbox);
                assert!(!active);
                assert!(rel_err(eps, node_minimizer(deg as f64, h, r)) <= 1e-8);
            }
        }
    }
}

#[test]
fn projection_is_nearest_feasible_point() {
    let tol = Tolerances::default();
    let mut rng = rng(17);
    for _ in 0..20 {
        let k = rng.random_range(1..=3);
        let lo = random_spd(k, &mut rng) * 0.2;
        let hi = &lo + random_spd(k, &mut rng) * 3.0;
        let b = WeightBox::new(lo.clone(), hi.clone()).unwrap();
        let w = random_symmetric(k, &mut rng) * 4.0;
        let p = design::project_weight_box(&w, &b, &tol).unwrap();
        assert!(b.contains(&p, 1e-8));
        let d = (&w - &p).norm();
        for _ in 0..200 {
            let t: f64 = rng.random_range(0.0..1.0);
            let cand = &lo * (1.0 - t) + &hi * t + random_symmetric(k, &mut rng) * rng.random_range(0.0..0.5);
            if b.contains(&cand, 0.0) {
                assert!(d <= (&w - &cand).norm() + 1e-7, "{} > {}", d, (&w - &cand).norm());
                // Variational inequality of the nearest point.
                assert!((&w - &p).dot(&(&cand - &p)) <= 1e-6 * (1.0 + d));
            }
        }
    }
}
