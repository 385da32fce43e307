use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nonconvex_ot::costs::{check_a1, log_grid, Assumption, CostFunction};
use nonconvex_ot::ensembles::{oracle_min_path, Objective};
use nonconvex_ot::measures::{
    marginals, random_measure, random_uniform_measure, validate_measure, Coupling, DiscreteMeasure,
};
use nonconvex_ot::mk_solver::{brute_force_mk, max_arc_length, solve_mk};
use nonconvex_ot::paths::{detour_path, random_path_between, NIndex, Piece, SteppedPath};
use nonconvex_ot::ExecMode;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn point(r: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| r.random_range(-2.0..2.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn validation_is_idempotent(seed in any::<u64>(), n in 1usize..6, d in 1usize..4) {
        let m = random_measure(seed, n, d, 3.0);
        let raw = m.atoms().iter().map(|a| (a.point.clone(), a.weight)).collect();
        prop_assert_eq!(validate_measure(raw, d).unwrap(), m);
    }

    #[test]
    fn product_coupling_has_input_marginals(seed in any::<u64>(), n in 1usize..6, m in 1usize..6) {
        let a = random_measure(seed, n, 2, 1.0);
        let b = random_measure(seed.wrapping_add(1), m, 2, 1.0);
        let (p0, p1) = marginals(&Coupling::product(a.clone(), b.clone()));
        prop_assert!(p0.approx_eq(&a, 1e-12));
        prop_assert!(p1.approx_eq(&b, 1e-12));
    }

    #[test]
    fn sublinear_powers_pass_a1(p in 0.05f64..=1.0) {
        let cost = CostFunction::power(p).unwrap();
        let rep = check_a1(&cost, &log_grid(1e-3, 0.999, 50), &log_grid(1e-3, 1e3, 50));
        prop_assert_eq!(rep.verdict(Assumption::A1i), Some(true));
        prop_assert_eq!(rep.verdict(Assumption::A1iii), Some(true));
    }

    #[test]
    fn path_norm_invariants(seed in any::<u64>(), d in 1usize..4, k in 1usize..8) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (point(&mut r, d), point(&mut r, d));
        let p = random_path_between(&mut r, &x, &y, k, 3.0);
        let disp = norm(&p.displacement());
        prop_assert!(p.l1_norm() >= disp - 1e-12);
        prop_assert!(p.sup_norm() >= p.l1_norm() - 1e-12);
        prop_assert!(p.n1() >= p.n2() - 1e-12);
        prop_assert!(p.n2() >= 1.0 - 1e-12);
    }

    #[test]
    fn modified_lagrangian_bounds(seed in any::<u64>(), d in 1usize..4, k in 1usize..8, pe in 0.1f64..1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (point(&mut r, d), point(&mut r, d));
        let p = random_path_between(&mut r, &x, &y, k, 3.0);
        let delta = norm(&p.displacement());
        for cost in [CostFunction::power(pe).unwrap(), CostFunction::remark_iii()] {
            let l1 = p.cost_li(&cost, NIndex::One).unwrap();
            let l2 = p.cost_li(&cost, NIndex::Two).unwrap();
            prop_assert!(l1 >= l2 - 1e-12);
            prop_assert!(l1 >= cost.eval(delta) - 1e-12);
        }
        // The lower bound for N₂ needs a non-decreasing cost.
        let cost = CostFunction::power(pe).unwrap();
        prop_assert!(p.cost_li(&cost, NIndex::Two).unwrap() >= cost.eval(delta) - 1e-12);
    }

    #[test]
    fn time_change_roundtrip(seed in any::<u64>(), k in 1usize..8) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (point(&mut r, 2), point(&mut r, 2));
        let p = random_path_between(&mut r, &x, &y, k, 3.0);
        let cost = CostFunction::power(0.5).unwrap();
        let s = p.stretch(p.n1()).unwrap();
        prop_assert!((s.cost_plain(&cost) - p.cost_li(&cost, NIndex::One).unwrap()).abs() < 1e-12);
        prop_assert!((s.horizon() - p.n1()).abs() < 1e-15);
    }

    #[test]
    fn solver_equals_brute_force(seed in any::<u64>(), n in 1usize..=6, d in 1usize..=3, c in 0usize..4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let a = random_uniform_measure(&mut r, n, d, 2.0);
        let b = random_uniform_measure(&mut r, n, d, 2.0);
        let cost = [
            CostFunction::power(0.5).unwrap(),
            CostFunction::remark_iii(),
            CostFunction::linear(),
            CostFunction::square(),
        ][c].clone();
        let lp = solve_mk(&a, &b, &cost, None).unwrap().value;
        let bf = brute_force_mk(&a, &b, &cost).unwrap().value;
        prop_assert!((lp - bf).abs() <= 1e-9, "lp {} brute {}", lp, bf);
    }

    #[test]
    fn forbidding_arcs_never_helps(seed in any::<u64>(), n in 1usize..=5, frac in 0.3f64..1.5) {
        let a = random_measure(seed, n, 2, 2.0);
        let b = random_measure(seed ^ 0xabcd, n, 2, 2.0);
        let cost = CostFunction::power(0.5).unwrap();
        let free = solve_mk(&a, &b, &cost, None).unwrap().value;
        let r = frac * a.cross_diameter(&b);
        let forbid = max_arc_length(&a, &b, r);
        let constrained = solve_mk(&a, &b, &cost, Some(&forbid)).map(|s| s.value);
        if let Ok(v) = constrained {
            prop_assert!(v >= free - 1e-12);
        }
    }

    #[test]
    fn power_cost_scales(seed in any::<u64>(), n in 1usize..=5, s in 0.1f64..10.0, p in 0.1f64..=1.0) {
        let a = random_measure(seed, n, 2, 2.0);
        let b = random_measure(seed ^ 0x77, n, 2, 2.0);
        let scale = |m: &DiscreteMeasure| {
            validate_measure(m.atoms().iter().map(|at| (at.point.iter().map(|x| x * s).collect(), at.weight)).collect(), 2).unwrap()
        };
        let cost = CostFunction::power(p).unwrap();
        let base = solve_mk(&a, &b, &cost, None).unwrap().value;
        let scaled = solve_mk(&scale(&a), &scale(&b), &cost, None).unwrap().value;
        prop_assert!((scaled - s.powf(p) * base).abs() <= 1e-9 * (1.0 + scaled));
    }

    /// A planar path and its collinear rearrangement (same speed profile,
    /// forward until the right distance is covered, then backward) have
    /// identical objectives, which is why the oracle only searches the line.
    #[test]
    fn collinear_rearrangement_preserves_objectives(seed in any::<u64>(), k in 1usize..6, pe in 0.1f64..1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = (point(&mut r, 2), point(&mut r, 2));
        let p = random_path_between(&mut r, &x, &y, k, 3.0);
        let delta = norm(&p.displacement());
        prop_assume!(delta > 1e-6);
        let forward = 0.5 * (p.l1_norm() + delta);
        let mut covered = 0.0;
        let mut pieces = Vec::new();
        for q in p.pieces() {
            let speed = norm(&q.velocity);
            let ahead = ((forward - covered) / speed).clamp(0.0, q.duration);
            if ahead > 0.0 {
                pieces.push(Piece { duration: ahead, velocity: vec![speed] });
                covered += ahead * speed;
            }
            if q.duration - ahead > 0.0 {
                pieces.push(Piece { duration: q.duration - ahead, velocity: vec![-speed] });
            }
        }
        let line = SteppedPath::new(vec![0.0], pieces).unwrap();
        prop_assert!((line.displacement()[0] - delta).abs() < 1e-12);
        for cost in [CostFunction::power(pe).unwrap(), CostFunction::remark_iii()] {
            prop_assert!((line.cost_plain(&cost) - p.cost_plain(&cost)).abs() < 1e-12);
            for i in [NIndex::One, NIndex::Two] {
                prop_assert!((line.cost_li(&cost, i).unwrap() - p.cost_li(&cost, i).unwrap()).abs() < 1e-12);
                prop_assert!((line.cost_rescaled(&cost, i).unwrap() - p.cost_rescaled(&cost, i).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oracle_modes_agree(delta in 0.1f64..4.0, obj in 0usize..5) {
        let objective = [Objective::Plain, Objective::L1, Objective::L2, Objective::Rescaled1, Objective::Rescaled2][obj];
        let cost = CostFunction::remark_iii();
        let speeds = [0.0, 0.5, 1.0, 2.0, 3.0];
        let a = oracle_min_path(0.0, delta, &cost, objective, 5, &speeds, None, ExecMode::Sequential).unwrap();
        let b = oracle_min_path(0.0, delta, &cost, objective, 5, &speeds, None, ExecMode::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn detour_violates_lower_bound_for_decreasing_tail() {
    let cost = CostFunction::remark_iii();
    for len in [1.5, 2.0, 3.0, 5.0] {
        let x = vec![0.3, -0.2];
        let y = vec![0.3 + len, -0.2];
        let p = detour_path(&x, &y).unwrap();
        let l2 = p.cost_li(&cost, NIndex::Two).unwrap();
        assert!(l2 < cost.eval(len) - 1e-3, "len {len}: {l2}");
        // N₁ keeps the bound.
        assert!(p.cost_li(&cost, NIndex::One).unwrap() >= cost.eval(len) - 1e-12);
    }
}

#[test]
fn collinear_oracle_matches_planar_search_on_a_grid() {
    // Every planar 2-piece path with velocities on a small lattice that
    // reaches (1, 0) costs at least the collinear oracle's minimum.
    let cost = CostFunction::power(0.5).unwrap();
    let collinear = oracle_min_path(
        0.0,
        1.0,
        &cost,
        Objective::L1,
        2,
        &[0.0, 1.0, 2.0],
        None,
        ExecMode::Sequential,
    )
    .unwrap()
    .value;
    let lattice = [-2.0, -1.0, 0.0, 1.0, 2.0];
    for &a in &lattice {
        for &b in &lattice {
            // Second piece closes the gap to (1, 0) in time ½.
            let v1 = vec![a, b];
            let v2 = vec![2.0 - a, -b];
            let p = SteppedPath::new(
                vec![0.0, 0.0],
                vec![
                    Piece {
                        duration: 0.5,
                        velocity: v1,
                    },
                    Piece {
                        duration: 0.5,
                        velocity: v2,
                    },
                ],
            )
            .unwrap();
            assert!(p.cost_li(&cost, NIndex::One).unwrap() >= collinear - 1e-12);
        }
    }
}
