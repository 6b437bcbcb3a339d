mod common;

use common::*;

#[test]
fn solvers_match_brute_force_picks() {
    let s = oracle_suite(4);
    assert!(s.instances > 800);
    assert!(s.mismatches.is_empty(), "{} mismatches, first: {}", s.mismatches.len(), s.mismatches[0]);
    // ties come from neighbours at equal lag; they must stay rare
    assert!(s.ties * 20 < s.steps_compared, "{} ties in {} steps", s.ties, s.steps_compared);
}

#[test]
fn random_measurements_have_unique_picks() {
    let dict = small_dictionary(7);
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
    for _ in 0..50 {
        let y: Vec<_> = (0..8).map(|_| random_c(&mut rng)).collect();
        let sol = hrrp_core::omp(&y, &dict, &hrrp_core::SolverOptions::new(0.0, 5)).unwrap();
        assert_eq!(replay(&dict, &y, &sol.support, Rule::Full), Ok(0));
    }
}

#[test]
fn replay_rejects_a_wrong_pick() {
    let dict = small_dictionary(0);
    let y: Vec<_> = dict.atom(3).to_vec();
    assert_eq!(replay(&dict, &y, &[3], Rule::Full), Ok(0));
    assert!(replay(&dict, &y, &[4], Rule::Full).is_err());
    assert!(replay(&dict, &y, &[13], Rule::Block(0)).is_err());
}

#[test]
fn mip_and_bounds_match_explicit_loops() {
    let s = oracle_suite(2);
    assert!(s.mip_max_dev <= 1e-12, "{}", s.mip_max_dev);
    assert!(s.bounds_max_dev <= 1e-12, "{}", s.bounds_max_dev);
}

#[test]
fn normal_equation_oracle_reproduces_a_known_solve() {
    // columns e1, e1 + e2 in C^3; y = 2 e1 + 3 e2 + 5 e3
    let one = hrrp_core::C64::new(1.0, 0.0);
    let z = zero();
    let a = vec![one, z, z];
    let b = vec![one, one, z];
    let y = vec![one * 2.0, one * 3.0, one * 5.0];
    let x = normal_equations(&[&a, &b], &y);
    assert!((x[0] - one * -1.0).norm() < 1e-14 && (x[1] - one * 3.0).norm() < 1e-14);
    let r = residual(&[&a, &b], &y);
    assert!((r[2] - one * 5.0).norm() < 1e-14 && r[0].norm() < 1e-14 && r[1].norm() < 1e-14);
}

#[test]
fn first_argmax_prefers_the_lowest_index() {
    assert_eq!(first_argmax(&[0.5, 2.0, 2.0, 1.0]), 1);
}
