mod common;

use common::{random_instance, rng, simulate_lab, AdviceKind};
use matchkit::baselines::balance_run;
use matchkit::instance::validate_fractional_matching;
use matchkit::lab::{lab_run, lab_run_with, Inversion};
use matchkit::offline::{brute_force_opt, opt_matching};
use rand::Rng;

#[test]
fn lab_matches_step_simulation() {
    let mut r = rng(11);
    for case in 0..12 {
        let weighted = case % 2 == 0;
        let kind = if case % 3 == 0 { AdviceKind::Integral } else { AdviceKind::Fractional };
        let g = random_instance(&mut r, 4, 5, 0.6, weighted, kind);
        let lambda = [0.0, 0.2, 0.5, 0.8, 1.0][case % 5];
        let run = lab_run(&g, lambda).unwrap();
        let sim = simulate_lab(&g, lambda, 1e-5);
        for (v, row) in run.allocation.x.iter().enumerate() {
            for (k, &(_, x)) in row.iter().enumerate() {
                assert!(
                    (x - sim[v][k]).abs() < 1e-4,
                    "case {case} lambda {lambda}: x[{v}][{k}] = {x} vs {}",
                    sim[v][k]
                );
            }
        }
    }
}

#[test]
fn lab_at_zero_is_balance() {
    let mut r = rng(12);
    for case in 0..40 {
        let g = random_instance(&mut r, 6, 8, 0.4, case % 2 == 0, AdviceKind::Fractional);
        let lab = lab_run(&g, 0.0).unwrap();
        let bal = balance_run(&g).unwrap();
        for (a, b) in lab.allocation.x.iter().zip(&bal.allocation.x) {
            for (&(_, p), &(_, q)) in a.iter().zip(b) {
                assert!((p - q).abs() < 1e-9, "{p} vs {q}");
            }
        }
    }
}

#[test]
fn inversions_agree() {
    let mut r = rng(13);
    for case in 0..30 {
        let g = random_instance(&mut r, 8, 10, 0.4, true, AdviceKind::Fractional);
        let lambda = r.gen_range(0.0..=1.0);
        let a = lab_run_with(&g, lambda, Inversion::Closed).unwrap();
        let b = lab_run_with(&g, lambda, Inversion::Bisection).unwrap();
        assert!((a.value - b.value).abs() < 1e-8 * a.value.max(1.0), "case {case}");
    }
}

#[test]
fn opt_matches_enumeration() {
    let mut r = rng(14);
    for _ in 0..150 {
        let (n, m, weighted) = (r.gen_range(1..=6), r.gen_range(1..=6), r.gen_bool(0.5));
        let g = random_instance(&mut r, n, m, 0.5, weighted, AdviceKind::None);
        assert!((opt_matching(&g).value - brute_force_opt(&g)).abs() < 1e-9);
    }
}

#[test]
fn allocations_are_fractional_matchings() {
    let mut r = rng(15);
    for _ in 0..40 {
        let g = random_instance(&mut r, 10, 14, 0.3, true, AdviceKind::Fractional);
        let lambda = r.gen_range(0.0..=1.0);
        let run = lab_run(&g, lambda).unwrap();
        validate_fractional_matching(&g, &run.allocation, 1e-9).unwrap();
        assert!(run.value <= opt_matching(&g).value + 1e-9);
    }
}
