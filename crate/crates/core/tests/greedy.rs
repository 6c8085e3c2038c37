mod common;

use common::{golden_max, is_monotone, leave_one_out_oracle, noiseless_problem, seeded_problem, true_support};
use gstg_sbl::cubic::{Cubic, RootClass};
use gstg_sbl::prelude::*;
use gstg_sbl::solver::greedy::{
    check_selection_condition, classify_scenario, optimal_alpha_for_basis, run_greedy, selection_cubic,
    single_basis_objective, verify_bookkeeping, ActionKind, GreedyState, Scenario,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn hp(tau: f64, eps: f64, eta: f64) -> Hyperparams {
    Hyperparams::new(tau, eps, eta, 1.0).unwrap()
}

fn random_system(m: usize, n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal) / (m as f64).sqrt());
    let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    (a, y, 0.05)
}

/// Applies a random add, re-estimate or delete.
fn random_action(state: &mut GreedyState, rng: &mut ChaCha8Rng, max_active: usize) {
    let n = state.n();
    let active = state.active().to_vec();
    let alpha = 10f64.powf(rng.random_range(-2.0..1.0));
    let roll: f64 = rng.random();
    if active.is_empty() || (roll < 0.4 && active.len() < max_active) {
        let j = loop {
            let j = rng.random_range(0..n);
            if state.alpha()[j] == 0.0 {
                break j;
            }
        };
        state.set_alpha(j, alpha).unwrap();
    } else if roll < 0.75 {
        let j = active[rng.random_range(0..active.len())];
        state.set_alpha(j, alpha).unwrap();
    } else {
        let j = active[rng.random_range(0..active.len())];
        state.set_alpha(j, 0.0).unwrap();
    }
}

#[test]
fn objective_examples() {
    for (s, q) in [(1.0, 3.0), (0.2, -1.0), (5.0, 0.0)] {
        assert_eq!(single_basis_objective(0.0, s, q, &hp(0.3, 0.2, 1.0)).unwrap(), 0.0);
    }
    let (lo, hi) = (
        single_basis_objective(1.0, 1.0, 3.0, &hp(0.1, 0.5, 1.0)).unwrap(),
        single_basis_objective(1.0, 1.0, 3.0, &hp(1.0, 0.5, 1.0)).unwrap(),
    );
    assert!(lo < hi);
    // eps = 1 leaves the Laplace objective for any tau.
    let laplace = |alpha: f64| -0.5 * (1.0 + alpha * 2.0f64).ln() + 1.5f64.powi(2) / (2.0 * (1.0 / alpha + 2.0)) - 0.7 * alpha;
    for tau in [1e-6, 0.3, 40.0] {
        let v = single_basis_objective(0.8, 2.0, 1.5, &hp(tau, 1.0, 0.7)).unwrap();
        assert!((v - laplace(0.8)).abs() < 1e-14);
    }
    assert!(single_basis_objective(-1.0, 1.0, 1.0, &hp(0.1, 0.5, 1.0)).is_err());
}

/// Coarse log grid to locate the global maximum, then golden section around it.
fn brute_force_max(s: f64, q: f64, h: &Hyperparams) -> (f64, f64, f64) {
    let l = |a: f64| single_basis_objective(a, s, q, h).unwrap();
    let grid: Vec<f64> = (0..=600).map(|i| 10f64.powf(-10.0 + 16.0 * i as f64 / 600.0)).collect();
    let (mut best_i, mut best_v) = (0, l(grid[0]));
    for (i, &a) in grid.iter().enumerate() {
        let v = l(a);
        if v > best_v {
            best_i = i;
            best_v = v;
        }
    }
    let grid_max = best_v.max(0.0);
    let lo = if best_i == 0 { 0.0 } else { grid[best_i - 1] };
    let hi = grid[(best_i + 1).min(grid.len() - 1)];
    let a = golden_max(&l, lo, hi, 200);
    let v = l(a);
    if v > 0.0 { (a, v, grid_max) } else { (0.0, 0.0, grid_max) }
}

#[test]
fn optimal_alpha_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut positive = 0;
    for _ in 0..10_000 {
        let s = 10f64.powf(rng.random_range(-2.0..2.0));
        let q = rng.random_range(-1.0..1.0) * 4.0 * s.sqrt() * 10f64.powf(rng.random_range(-1.0..1.0));
        let h = hp(10f64.powf(rng.random_range(-4.0..1.0)), rng.random_range(0.0..1.0), 10f64.powf(rng.random_range(-3.0..1.0)));
        let (alpha, gain) = optimal_alpha_for_basis(s, q, &h).unwrap();
        let (a_ref, v_ref, grid_max) = brute_force_max(s, q, &h);
        assert!(gain >= grid_max - 1e-12 * grid_max.abs().max(1.0), "s={s} q={q} {h:?}");
        assert!((gain - v_ref).abs() <= 1e-9 * v_ref.max(1.0), "gain {gain} vs {v_ref}");
        if v_ref > 1e-6 {
            positive += 1;
            assert!((alpha - a_ref).abs() <= 1e-6 * a_ref.max(1.0), "alpha {alpha} vs {a_ref} s={s} q={q} {h:?}");
        }
    }
    assert!(positive > 1_000, "only {positive} nonzero maximizers");
}

#[test]
fn scenario_follows_sign_pattern() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..10_000 {
        let s = 10f64.powf(rng.random_range(-2.0..2.0));
        let q = rng.random_range(-10.0..10.0);
        let (tau, eps, eta) = (10f64.powf(rng.random_range(-4.0..1.0)), rng.random_range(0.0..1.0), 10f64.powf(rng.random_range(-3.0..1.0)));
        let q2 = q * q;
        let c3 = (5.0 - 4.0 * eps) * s + 2.0 * eta - q2 + tau * (4.0 * eta * s + s * s);
        let c4 = 2.0 - 2.0 * eps + tau * (s + 2.0 * eta - q2);
        let c1 = 2.0 * eta * s * s;
        let c2 = (3.0 - 2.0 * eps) * s * s + 4.0 * eta * s + 2.0 * eta * tau * s * s;
        let cubic = selection_cubic(s, q, &hp(tau, eps, eta));
        for (got, want) in [(cubic.l1, c1), (cubic.l2, c2), (cubic.l3, c3), (cubic.l4, c4)] {
            assert!((got - want).abs() <= 1e-14 * want.abs().max(1.0));
        }
        let scale = [c1, c2, c3, c4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (n1, n2, n3, n4) = (c1 / scale, c2 / scale, c3 / scale, c4 / scale);
        let delta = 18.0 * n1 * n2 * n3 * n4 - 4.0 * n2.powi(3) * n4 + n2 * n2 * n3 * n3 - 4.0 * n1 * n3.powi(3) - 27.0 * n1 * n1 * n4 * n4;
        let want = if c4 < 0.0 {
            Scenario::UniqueRoot
        } else if c3 < 0.0 && delta > 0.0 {
            Scenario::LargestRoot
        } else {
            Scenario::Zero
        };
        if delta.abs() > 1e-12 {
            assert_eq!(classify_scenario(&cubic), want, "s={s} q={q} tau={tau} eps={eps} eta={eta}");
        }
    }
    // A double positive root counts as no ascent.
    assert_eq!(Cubic::new(1.0, -2.0, 1.0, 0.0).classify(), RootClass::Multiple);
    assert_eq!(classify_scenario(&Cubic::new(1.0, -2.0, -0.5, 1.0)), Scenario::LargestRoot);
}

#[test]
fn laplace_selection_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..5_000 {
        let s = 10f64.powf(rng.random_range(-2.0..2.0));
        let eta = 10f64.powf(rng.random_range(-3.0..1.0));
        let q = rng.random_range(-3.0..3.0) * (s + 2.0 * eta).sqrt();
        let margin = q * q - (s + 2.0 * eta);
        if margin.abs() < 1e-9 * (s + 2.0 * eta) {
            continue;
        }
        let (alpha, _) = optimal_alpha_for_basis(s, q, &hp(10f64.powf(rng.random_range(-4.0..2.0)), 1.0, eta)).unwrap();
        assert_eq!(alpha > 0.0, margin > 0.0, "s={s} q={q} eta={eta}");
    }
}

#[test]
fn vanishing_threshold_gives_zero_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for _ in 0..2_000 {
        // The prior penalty grows like (1 - eps) log(1/tau), so the limit is
        // reached in double precision only for bounded q^2/s.
        let s = 10f64.powf(rng.random_range(-1.0..1.0));
        let q = rng.random_range(-1.0..1.0) * (100.0 * s).sqrt();
        let eps = rng.random_range(0.0..0.8);
        let eta = 10f64.powf(rng.random_range(-3.0..1.0));
        assert_eq!(optimal_alpha_for_basis(s, q, &hp(1e-300, eps, eta)).unwrap().0, 0.0);
        assert_eq!(optimal_alpha_for_basis(s, q, &hp(0.0, eps, eta)).unwrap(), (0.0, 0.0));
    }
}

#[test]
fn empty_state_statistics_are_exact() {
    let (a, y, sigma2) = random_system(16, 40, 1);
    let state = GreedyState::new(&a, &y, sigma2).unwrap();
    for m in 0..40 {
        let (s, q) = (a.column(m).norm_squared() / sigma2, a.column(m).dot(&y) / sigma2);
        assert!((state.big_s()[m] - s).abs() <= 4.0 * f64::EPSILON * s);
        assert!((state.big_q()[m] - q).abs() <= 1e-14 * (a.column(m).norm() * y.norm() / sigma2));
    }
    assert!(verify_bookkeeping(&state, &a, &y, sigma2) <= 1e-15);
    assert!(check_selection_condition(&state, &hp(0.1, 0.5, 1.0)).is_empty());
}

#[test]
fn leave_one_out_matches_dense_oracle() {
    let (a, y, sigma2) = random_system(24, 48, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = GreedyState::new(&a, &y, sigma2).unwrap();
    for _ in 0..40 {
        random_action(&mut state, &mut rng, 16);
    }
    assert!(!state.active().is_empty());
    for j in 0..48 {
        let (s, q) = state.leave_one_out(j);
        let (s_ref, q_ref) = leave_one_out_oracle(&a, &y, state.alpha(), sigma2, j);
        assert!((s - s_ref).abs() <= 1e-8 * s_ref.abs().max(1.0), "j {j}: s {s} vs {s_ref}");
        assert!((q - q_ref).abs() <= 1e-8 * q_ref.abs().max(1.0), "j {j}: q {q} vs {q_ref}");
    }
}

#[test]
fn bookkeeping_after_random_actions() {
    for seed in 0..5 {
        let (a, y, sigma2) = random_system(32, 64, 10 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = GreedyState::new(&a, &y, sigma2).unwrap();
        for _ in 0..50 {
            random_action(&mut state, &mut rng, 24);
        }
        let dev = verify_bookkeeping(&state, &a, &y, sigma2);
        assert!(dev <= 1e-8, "seed {seed}: {dev}");
        let refreshed = state.refresh().unwrap();
        assert!((refreshed - dev).abs() <= 1e-12);
        assert!(verify_bookkeeping(&state, &a, &y, sigma2) <= 1e-13);
    }
}

#[test]
fn drift_with_and_without_refresh() {
    let (a, y, sigma2) = random_system(32, 64, 77);
    let mut worst_refreshed = 0.0f64;
    let mut plain = GreedyState::new(&a, &y, sigma2).unwrap();
    let mut refreshed = plain.clone();
    let (mut rng_a, mut rng_b) = (ChaCha8Rng::seed_from_u64(5), ChaCha8Rng::seed_from_u64(5));
    let mut early = 0.0;
    for step in 1..=1000 {
        random_action(&mut plain, &mut rng_a, 24);
        random_action(&mut refreshed, &mut rng_b, 24);
        if step == 50 {
            early = verify_bookkeeping(&plain, &a, &y, sigma2);
        }
        if step % 50 == 0 {
            worst_refreshed = worst_refreshed.max(refreshed.refresh().unwrap());
        }
    }
    let late = verify_bookkeeping(&plain, &a, &y, sigma2);
    eprintln!("drift without refresh: {early:.3e} after 50, {late:.3e} after 1000; with refresh: {worst_refreshed:.3e}");
    assert!(worst_refreshed <= 1e-8);
    assert!(late > early);
    assert_eq!(plain.active(), refreshed.active());
}

#[test]
fn converged_runs_satisfy_necessary_condition() {
    for seed in 0..10 {
        let p = seeded_problem(48, 128, 6, 25.0, 500 + seed);
        let h = Hyperparams::recommended(&p, 0.01).unwrap();
        let run = run_greedy(&p, &h, &EmOptions::default()).unwrap();
        assert!(run.result.converged);
        assert!(is_monotone(&run.result.logl_trace, 1e-9), "seed {seed}");
        assert!(run.state.active().len() <= 48);
        assert!(check_selection_condition(&run.state, &run.hyper).iter().all(|ok| *ok), "seed {seed}");
        for act in &run.actions {
            assert!(act.delta_l >= 0.0);
            assert_eq!(act.kind == ActionKind::Delete, act.alpha_new == 0.0);
        }
        let x = &run.result.x_hat;
        let off: Vec<usize> = (0..128).filter(|i| !run.state.active().contains(i)).collect();
        assert!(off.iter().all(|&i| x[i] == 0.0));
        assert!(run.result.drift_checks.iter().all(|d| *d <= 1e-6));
    }
}

#[test]
fn zero_measurements_give_empty_model() {
    let mut p = seeded_problem(20, 50, 3, 20.0, 8);
    p.y.fill(0.0);
    let h = Hyperparams::new(0.01, 0.01, 1e-6, p.sigma2).unwrap();
    let r = recover_greedy(&p, &h, &EmOptions::default()).unwrap();
    assert!(r.support.is_empty());
    assert_eq!(r.iterations, 0);
    assert!(r.x_hat.iter().all(|v| *v == 0.0));
}

#[test]
fn greedy_is_deterministic() {
    let p = seeded_problem(40, 100, 5, 20.0, 9);
    let h = Hyperparams::recommended(&p, 0.01).unwrap();
    let a = recover_greedy(&p, &h, &EmOptions::default()).unwrap();
    let b = recover_greedy(&p, &h, &EmOptions::default()).unwrap();
    assert_eq!(a.support, b.support);
    assert_eq!(a.iterations, b.iterations);
    assert!(a.x_hat.iter().zip(b.x_hat.iter()).all(|(u, v)| u.to_bits() == v.to_bits()));
}

#[test]
fn exact_recovery_noise_free_small() {
    let mut hits = 0;
    for seed in 0..20 {
        let p = noiseless_problem(60, 128, 6, 1e-10, 900 + seed);
        let h = Hyperparams::recommended(&p, 0.01).unwrap();
        let r = recover_greedy(&p, &h, &EmOptions::default()).unwrap();
        if r.support == true_support(&p) && rmse(&r.x_hat, p.x_true.as_ref().unwrap()).unwrap() < 1e-6 {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn zero_threshold_yields_zero_solution() {
    let p = seeded_problem(30, 60, 4, 30.0, 10);
    let h = Hyperparams::new(0.0, 0.5, 1e-6, p.sigma2).unwrap();
    let r = recover_greedy(&p, &h, &EmOptions::default()).unwrap();
    assert!(r.support.is_empty());
}
