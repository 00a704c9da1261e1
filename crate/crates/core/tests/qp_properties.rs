use bernstein_copula::datasets::storm_flood_counts;
use bernstein_copula::fit::{shift_normalize, uniformize_closed_form, ContingencyTensor};
use bernstein_copula::qp::{equality_projection, kkt_residual, solve, solve_frequencies, KKT_TOL};
use bernstein_copula::{Error, RandomSource, Tensor};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

/// Brute-force optimum: for every zero pattern, project the target onto the
/// margin constraints restricted to the free cells (SVD pseudo-inverse) and
/// keep the best nonnegative candidate.
fn enumeration_oracle(target: &[f64], m: usize) -> Vec<f64> {
    let cells = m * m;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << cells) {
        let free: Vec<usize> = (0..cells).filter(|&c| mask & (1 << c) == 0).collect();
        if free.is_empty() {
            continue;
        }
        let mut a = DMatrix::<f64>::zeros(2 * m, free.len());
        for (col, &c) in free.iter().enumerate() {
            a[(c / m, col)] = 1.0;
            a[(m + c % m, col)] = 1.0;
        }
        let b = DVector::from_element(2 * m, 1.0 / m as f64);
        let t = DVector::from_iterator(free.len(), free.iter().map(|&c| target[c]));
        let pinv = a.clone().pseudo_inverse(1e-12).unwrap();
        let xf = &t + &pinv * (&b - &a * &t);
        if (&a * &xf - &b).amax() > 1e-10 || xf.min() < -1e-12 {
            continue;
        }
        let mut x = vec![0.0; cells];
        for (k, &c) in free.iter().enumerate() {
            x[c] = xf[k].max(0.0);
        }
        let obj: f64 = x.iter().zip(target).map(|(x, t)| (x - t).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best.unwrap().1
}

fn random_counts(rng: &mut RandomSource, m: usize, zero_prob: f64) -> Vec<Vec<u64>> {
    loop {
        let rows: Vec<Vec<u64>> = (0..m)
            .map(|_| {
                (0..m)
                    .map(|_| {
                        if rng.uniform() < zero_prob {
                            0
                        } else {
                            rng.index(20) as u64 + 1
                        }
                    })
                    .collect()
            })
            .collect();
        if rows.iter().flatten().any(|&c| c > 0) {
            return rows;
        }
    }
}

/// Uniform-margin starting point built from a mixture of permutation tables.
fn permutation_mixture(rng: &mut RandomSource, m: usize) -> Tensor {
    let mut t = Tensor::zeros(vec![m, m]).unwrap();
    let parts = 1 + rng.index(3);
    for _ in 0..parts {
        let mut perm: Vec<usize> = (0..m).collect();
        for i in (1..m).rev() {
            perm.swap(i, rng.index(i + 1));
        }
        for (i, &j) in perm.iter().enumerate() {
            let v = t.get(&[i, j]) + 1.0 / (m * parts) as f64;
            t.set(&[i, j], v);
        }
    }
    t
}

#[test]
fn matches_enumeration_oracle_on_3x3() {
    let mut rng = RandomSource::new(303);
    for _ in 0..25 {
        let counts = random_counts(&mut rng, 3, 0.5);
        let table = ContingencyTensor::from_count_rows(&counts).unwrap();
        let sol = solve(&table, None).unwrap();
        let oracle = enumeration_oracle(table.frequencies().data(), 3);
        for (x, o) in sol.x.data().iter().zip(&oracle) {
            assert!(
                (x - o).abs() < 1e-9,
                "{counts:?}: {:?} vs {oracle:?}",
                sol.x.data()
            );
        }
        assert!(kkt_residual(&sol, &table).unwrap().passed);
    }
}

#[test]
fn solution_is_unique_across_starts() {
    let table = ContingencyTensor::from_count_rows(&storm_flood_counts()).unwrap();
    let reference = solve(&table, None).unwrap();
    let mut rng = RandomSource::new(5);
    let closed = shift_normalize(&uniformize_closed_form(&table).unwrap()).y;
    let mut starts = vec![Tensor::filled(vec![10, 10], 0.01).unwrap(), closed.clone()];
    for _ in 0..3 {
        starts.push(permutation_mixture(&mut rng, 10));
    }
    for start in &starts {
        let sol = solve(&table, Some(start)).unwrap();
        let diff = sol
            .x
            .data()
            .iter()
            .zip(reference.x.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10, "start changed the optimum by {diff}");
        assert!(kkt_residual(&sol, &table).unwrap().passed);
    }
}

#[test]
fn perturbed_solution_fails_kkt() {
    let table = ContingencyTensor::from_count_rows(&storm_flood_counts()).unwrap();
    let sol = solve(&table, None).unwrap();
    let mut perturbed = sol.clone();
    // A 2×2 cycle keeps every margin but moves mass off the optimum.
    let (i, j) = (0..10)
        .flat_map(|i| (0..10).map(move |j| (i, j)))
        .find(|&(i, j)| {
            i < 9 && j < 9 && sol.x.get(&[i, j + 1]) > 1e-3 && sol.x.get(&[i + 1, j]) > 1e-3
        })
        .unwrap();
    let eps = 1e-3;
    for (idx, delta) in [
        ([i, j], eps),
        ([i, j + 1], -eps),
        ([i + 1, j], -eps),
        ([i + 1, j + 1], eps),
    ] {
        let v = perturbed.x.get(&idx) + delta;
        perturbed.x.set(&idx, v);
    }
    let report = kkt_residual(&perturbed, &table).unwrap();
    assert!(report.primal_feasibility < 1e-12);
    assert!(report.stationarity > 1e-4, "{report:?}");
    assert!(!report.passed);
}

#[test]
fn nonnegative_closed_form_is_optimal() {
    // No negative entries means the sign constraints are inactive.
    let table =
        ContingencyTensor::from_count_rows(&[vec![5, 3, 2], vec![3, 4, 3], vec![2, 3, 5]]).unwrap();
    let closed = uniformize_closed_form(&table).unwrap();
    assert!(closed.min() >= 0.0);
    let sol = solve(&table, None).unwrap();
    for (a, b) in sol.x.data().iter().zip(closed.data()) {
        assert!((a - b).abs() < 1e-10);
    }
    assert!(sol.active.is_empty());
    let projected = equality_projection(&table.frequencies()).unwrap();
    for (a, b) in projected.data().iter().zip(closed.data()) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn storm_flood_optimum_is_sparse_and_feasible() {
    let table = ContingencyTensor::from_count_rows(&storm_flood_counts()).unwrap();
    let sol = solve(&table, None).unwrap();
    let report = kkt_residual(&sol, &table).unwrap();
    assert!(report.passed);
    assert!(report.stationarity <= KKT_TOL);
    assert!(sol.x.min() >= 0.0);
    assert!(!sol.active.is_empty());
    for &c in &sol.active {
        assert_eq!(sol.x.data()[c], 0.0);
    }
    for margin in sol.x.margins() {
        for v in margin {
            assert!((v - 0.1).abs() < 1e-12);
        }
    }
    let closed = shift_normalize(&uniformize_closed_form(&table).unwrap()).y;
    let closed_obj: f64 = closed
        .data()
        .iter()
        .zip(table.frequencies().data())
        .map(|(x, a)| (x - a).powi(2))
        .sum();
    assert!(sol.objective <= closed_obj);
}

#[test]
fn unequal_sizes_are_unsupported() {
    let table = ContingencyTensor::from_counts(vec![3, 4], vec![1; 12]).unwrap();
    assert!(matches!(solve(&table, None), Err(Error::Unsupported(_))));
    assert!(matches!(
        uniformize_closed_form(&table),
        Err(Error::Unsupported(_))
    ));
}

fn frequency_tensor(m: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(0u32..10, m * m)
        .prop_filter("empty", |v| v.iter().any(|&c| c > 0))
        .prop_map(move |v| {
            let total: u32 = v.iter().sum();
            Tensor::new(
                vec![m, m],
                v.iter().map(|&c| c as f64 / total as f64).collect(),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solution_satisfies_kkt(target in frequency_tensor(6)) {
        let sol = solve_frequencies(&target, None).unwrap();
        let report = bernstein_copula::qp::kkt_residual_frequencies(&sol, &target).unwrap();
        prop_assert!(report.passed, "{:?}", report);
        prop_assert!(sol.x.min() >= 0.0);
    }

    #[test]
    fn projection_preserves_margins_on_three_axes(v in prop::collection::vec(0u32..10, 27)) {
        prop_assume!(v.iter().any(|&c| c > 0));
        let total: u32 = v.iter().sum();
        let target = Tensor::new(vec![3, 3, 3], v.iter().map(|&c| c as f64 / total as f64).collect()).unwrap();
        let sol = solve_frequencies(&target, None).unwrap();
        for margin in sol.x.margins() {
            for m in margin {
                prop_assert!((m - 1.0 / 3.0).abs() < 1e-12);
            }
        }
        let report = bernstein_copula::qp::kkt_residual_frequencies(&sol, &target).unwrap();
        prop_assert!(report.passed, "{:?}", report);
    }
}
