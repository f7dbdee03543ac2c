mod common;

use common::{enumerate_vertices, random_lp, rng};
use invex_core::lp::{solve, LinearProgram, Row, Status};
use proptest::prelude::*;
use rand::Rng;

fn check_against_oracle(lp: &LinearProgram) {
    let sol = solve(lp).unwrap();
    match enumerate_vertices(lp) {
        Some((best, _)) => {
            assert_eq!(sol.status, Status::Optimal, "{lp:?}");
            assert!((sol.objective_value - best).abs() <= 1e-8, "{} vs {best}: {lp:?}", sol.objective_value);
            assert!(lp.max_violation(&sol.values) <= 1e-8);
            assert!((lp.objective_at(&sol.values) - sol.objective_value).abs() <= 1e-9);
        }
        None => assert_eq!(sol.status, Status::Infeasible, "{lp:?}"),
    }
}

#[test]
fn matches_vertex_enumeration_on_grid_programs() {
    let mut r = rng(21);
    for _ in 0..500 {
        check_against_oracle(&random_lp(&mut r));
    }
}

#[test]
fn matches_vertex_enumeration_on_generic_programs() {
    let mut r = rng(23);
    for _ in 0..300 {
        let mut lp = random_lp(&mut r);
        for c in lp.objective.iter_mut() {
            *c += r.random_range(-0.1..0.1);
        }
        for row in lp.rows.iter_mut() {
            row.coeffs.iter_mut().for_each(|a| *a += r.random_range(-0.1..0.1));
            row.rhs += r.random_range(-0.1..0.1);
        }
        check_against_oracle(&lp);
    }
}

#[test]
fn handles_degenerate_and_redundant_rows() {
    // duplicated rows, a zero row and a row implied by the bounds
    let lp = LinearProgram {
        objective: vec![1.0, 1.0, 1.0],
        var_lower: vec![0.0; 3],
        var_upper: vec![1.0; 3],
        rows: vec![
            Row::new(vec![1.0, 1.0, 0.0], 1.0),
            Row::new(vec![1.0, 1.0, 0.0], 1.0),
            Row::new(vec![0.0, 0.0, 0.0], 0.0),
            Row::new(vec![0.0, 0.0, 1.0], 5.0),
        ],
    };
    check_against_oracle(&lp);
    assert!((solve(&lp).unwrap().objective_value - 2.0).abs() < 1e-12);
}

#[test]
fn unbounded_direction_is_reported() {
    let lp = LinearProgram {
        objective: vec![1.0, 0.0],
        var_lower: vec![0.0, 0.0],
        var_upper: vec![f64::INFINITY, 1.0],
        rows: vec![Row::new(vec![-1.0, 1.0], 1.0)],
    };
    let sol = solve(&lp).unwrap();
    assert_eq!(sol.status, Status::Unbounded);
    assert!(sol.objective_value.is_nan());
}

#[test]
fn solving_is_deterministic() {
    let mut r = rng(22);
    for _ in 0..50 {
        let lp = random_lp(&mut r);
        let a = solve(&lp).unwrap();
        let b = solve(&lp).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.values, b.values);
        assert_eq!(a.objective_value.to_bits(), b.objective_value.to_bits());
    }
}

#[test]
fn json_round_trip_keeps_infinite_bounds() {
    let lp = LinearProgram {
        objective: vec![1.0, -1.0],
        var_lower: vec![f64::NEG_INFINITY, 0.0],
        var_upper: vec![2.0, f64::INFINITY],
        rows: vec![Row::new(vec![1.0, 1.0], 3.0)],
    };
    let text = serde_json::to_string(&lp).unwrap();
    assert!(text.contains("null"));
    let back: LinearProgram = serde_json::from_str(&text).unwrap();
    assert_eq!(back, lp);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn positive_objective_scaling_scales_the_optimum(seed in any::<u64>(), scale in 0.25f64..8.0) {
        let lp = random_lp(&mut rng(seed));
        let base = solve(&lp).unwrap();
        let mut scaled = lp.clone();
        scaled.objective.iter_mut().for_each(|c| *c *= scale);
        let sol = solve(&scaled).unwrap();
        prop_assert_eq!(base.status, sol.status);
        if base.status == Status::Optimal {
            prop_assert!((sol.objective_value - scale * base.objective_value).abs() <= 1e-8 * (1.0 + scale));
        }
    }

    #[test]
    fn optimum_beats_every_feasible_vertex(seed in any::<u64>()) {
        let lp = random_lp(&mut rng(seed));
        let sol = solve(&lp).unwrap();
        if let Some((best, z)) = enumerate_vertices(&lp) {
            prop_assert!(lp.max_violation(&z) <= 1e-9);
            prop_assert!(sol.objective_value >= best - 1e-8);
        }
    }
}
