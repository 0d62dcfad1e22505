use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpcert::certificate::{alpha_closed_form, alpha_lp, CertificateQuery};
use mpcert::sim::{solve_finite_horizon, LqModel, ShootingProblem, SolverSettings, SystemModel};
use mpcert::{
    check_submultiplicative, constant_gamma, gamma_from_exponential, ExpBound, GammaSequence,
};

fn cf(g: &GammaSequence, n: usize, m: usize) -> f64 {
    alpha_closed_form(&CertificateQuery::new(g, n, m).unwrap())
        .unwrap()
        .alpha
}

fn lp(g: &GammaSequence, n: usize, m: usize) -> f64 {
    alpha_lp(&CertificateQuery::new(g, n, m).unwrap())
        .unwrap()
        .alpha
}

/// Rows `a . x <= b` over `x = (lambda_0..lambda_{N-1}, nu)`, written from the
/// inequalities directly, plus the normalization row.
fn inequality_rows(g: &GammaSequence, n: usize, m: usize) -> (Vec<(Vec<f64>, f64)>, Vec<f64>) {
    let mut rows = Vec::new();
    for k in 0..n - 1 {
        // sum_{i=k}^{N-1} lambda_i - gamma_{N-k} lambda_k <= 0
        let a: Vec<f64> = (0..=n)
            .map(|i| {
                let mut v = if i >= k && i < n { 1.0 } else { 0.0 };
                if i == k {
                    v -= g.get(n - k);
                }
                v
            })
            .collect();
        rows.push((a, 0.0));
    }
    for j in 0..n - m {
        // nu <= sum_{i<j} lambda_{i+m} + gamma_{N-j} lambda_{j+m}
        let mut a = vec![0.0; n + 1];
        a[n] = 1.0;
        for i in 0..j {
            a[i + m] -= 1.0;
        }
        a[j + m] -= g.get(n - j);
        rows.push((a, 0.0));
    }
    for i in 0..=n {
        let mut a = vec![0.0; n + 1];
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    let eq: Vec<f64> = (0..=n).map(|i| if i < m { 1.0 } else { 0.0 }).collect();
    (rows, eq)
}

/// Minimum of `sum lambda - nu` over all feasible vertices.
fn vertex_minimum(g: &GammaSequence, n: usize, m: usize) -> Option<f64> {
    let (rows, eq) = inequality_rows(g, n, m);
    let dim = n + 1;
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << rows.len()) {
        if mask.count_ones() as usize != dim - 1 {
            continue;
        }
        let active: Vec<usize> = (0..rows.len()).filter(|i| mask & (1 << i) != 0).collect();
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DVector::zeros(dim);
        for (r, &idx) in active.iter().enumerate() {
            for c in 0..dim {
                a[(r, c)] = rows[idx].0[c];
            }
            b[r] = rows[idx].1;
        }
        for c in 0..dim {
            a[(dim - 1, c)] = eq[c];
        }
        b[dim - 1] = 1.0;
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(x) = lu.solve(&b) else { continue };
        let feasible = rows.iter().all(|(row, rhs)| {
            row.iter().zip(x.iter()).map(|(p, q)| p * q).sum::<f64>() <= rhs + 1e-9
        });
        if feasible {
            let value = x.iter().take(n).sum::<f64>() - x[n];
            best = Some(best.map_or(value, |v: f64| v.min(value)));
        }
    }
    best
}

fn monotone_gamma(rng: &mut ChaCha8Rng, n: usize) -> GammaSequence {
    let mut v = Vec::with_capacity(n);
    let mut g = rng.random_range(1.0..3.0);
    for _ in 0..n {
        v.push(g);
        g += rng.random_range(0.0..2.0);
    }
    GammaSequence::new(v).unwrap()
}

#[test]
fn lp_matches_vertex_enumeration_for_short_horizons() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..60 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..n);
        let g = monotone_gamma(&mut rng, n);
        let oracle = vertex_minimum(&g, n, m).expect("bounded feasible program");
        let got = lp(&g, n, m);
        assert!(
            (got - oracle).abs() <= 1e-8,
            "gamma {:?} N={n} m={m}: lp {got} vs vertices {oracle}",
            g.values()
        );
    }
}

#[test]
fn non_submultiplicative_example_only_relaxes() {
    let g = GammaSequence::new(vec![2.0, 2.1, 4.0]).unwrap();
    assert!(!check_submultiplicative(&g));
    let (exact, closed) = (lp(&g, 3, 1), cf(&g, 3, 1));
    assert!(exact >= closed - 1e-12, "{exact} < {closed}");
    assert!((exact - vertex_minimum(&g, 3, 1).unwrap()).abs() <= 1e-9);
}

#[test]
fn unit_gamma_gives_one() {
    for n in 2..=12 {
        let g = constant_gamma(1.0, n).unwrap();
        for m in 1..n {
            assert_eq!(cf(&g, n, m), 1.0);
            assert!((lp(&g, n, m) - 1.0).abs() <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lp_never_below_closed_form(seed in any::<u64>(), n in 2usize..14) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = monotone_gamma(&mut rng, n);
        for m in 1..n {
            let (exact, closed) = (lp(&g, n, m), cf(&g, n, m));
            prop_assert!(exact >= closed - 1e-8, "m={} lp {} cf {}", m, exact, closed);
            prop_assert!(exact <= 1.0 + 1e-9 && closed <= 1.0);
        }
    }

    #[test]
    fn exponential_alpha_symmetric_and_rising_to_the_middle(c in 1.0f64..8.0, s in 0.01f64..0.99, n in 2usize..60) {
        let g = gamma_from_exponential(ExpBound::new(c, s).unwrap(), n).unwrap();
        let a: Vec<f64> = (1..n).map(|m| cf(&g, n, m)).collect();
        for m in 1..n {
            prop_assert!((a[m - 1] - a[n - m - 1]).abs() <= 1e-10);
        }
        for m in 1..n / 2 {
            prop_assert!(a[m - 1] <= a[m] + 1e-10);
        }
    }
}

fn shoot(model: &dyn SystemModel, x: &[f64], n: usize) -> (f64, Vec<f64>) {
    let sol = solve_finite_horizon(&ShootingProblem {
        model,
        x0: x.to_vec(),
        horizon: n,
        guess: vec![0.0; n * model.control_dim()],
        settings: SolverSettings::default(),
    })
    .unwrap();
    assert!(sol.converged);
    (sol.value, sol.controls)
}

#[test]
fn double_integrator_shooting_matches_riccati() {
    let lq = LqModel::double_integrator(0.5, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        for n in [1, 3, 6, 10] {
            let exact = lq.riccati_value(n, &x).unwrap();
            let (v, _) = shoot(&lq, &x, n);
            assert!(
                (v - exact).abs() <= 1e-6 * (1.0 + exact),
                "N={n} x={x:?}: {v} vs {exact}"
            );
        }
    }
}

#[test]
fn riccati_value_nondecreasing_in_horizon() {
    let models = [
        LqModel::scalar(2.0, 1.0, 1.0, 1.0).unwrap(),
        LqModel::double_integrator(0.5, 0.1).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for lq in &models {
        for _ in 0..20 {
            let x: Vec<f64> = (0..lq.state_dim())
                .map(|_| rng.random_range(-3.0..3.0))
                .collect();
            let v: Vec<f64> = (1..=25).map(|n| lq.riccati_value(n, &x).unwrap()).collect();
            for w in v.windows(2) {
                assert!(w[1] >= w[0] - 1e-12 * w[1].abs(), "{x:?}: {w:?}");
            }
        }
    }
}

#[test]
fn bellman_consistency_at_random_states() {
    let lq = LqModel::double_integrator(0.5, 0.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let n = rng.random_range(2..=8);
        let (v, u) = shoot(&lq, &x, n);
        let (next, stage) = lq.step(&x, &u[..1]).unwrap();
        let (tail, _) = shoot(&lq, &next, n - 1);
        assert!(
            (v - (stage + tail)).abs() <= 1e-6 * (1.0 + v),
            "N={n}: {v} vs {}",
            stage + tail
        );
    }
}
