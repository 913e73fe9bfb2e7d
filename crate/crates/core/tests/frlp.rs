use matchkit::frlp::{c_star_n1, export_lp, parse_lp, solve_dense, solve_frlp_embedded, FrlpModel};

#[test]
fn dense_tableau_agrees_with_embedded_solver() {
    for (n, r) in [(10, 0.55), (20, 0.6)] {
        let embedded = solve_frlp_embedded(n, r).unwrap().c_star;
        let lp = parse_lp(&export_lp(&FrlpModel::build(n, r).unwrap().lp)).unwrap();
        let (dense, x) = solve_dense(&lp).unwrap();
        assert!((embedded - dense).abs() <= 1e-5, "n={n} r={r}: {embedded} vs {dense}");
        assert!(lp.max_violation(&x) < 1e-7);
    }
}

#[test]
fn single_arrival_closed_form() {
    for k in 0..=10 {
        let r = 0.5 + 0.05 * k as f64;
        let c = solve_frlp_embedded(1, r).unwrap().c_star;
        assert!((c - c_star_n1(r)).abs() < 1e-7, "r={r}: {c}");
    }
}
