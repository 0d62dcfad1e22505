//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so every line is printed.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mpcert::analysis::{horizon_row, linspace};
use mpcert::certificate::{alpha_closed_form, alpha_lp, CertificateQuery};
use mpcert::netcheck::{certify_up_to, ExperimentSpec, NetworkExperiment};
use mpcert::sim::integrate::{integrate_sampled, ContinuousDynamics};
use mpcert::sim::{
    measured_alpha_over, mpc_run, solve_finite_horizon, LqModel, MpcSettings, Pendulum, Schedule,
    ShootingProblem, SolverSettings,
};
use mpcert::{
    check_submultiplicative, constant_gamma, gamma_from_exponential, minimal_horizon,
    run_network_experiment, stability_region, ExpBound, GammaSequence, HorizonPolicy,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn alpha_cf(g: &GammaSequence, n: usize, m: usize) -> f64 {
    alpha_closed_form(&CertificateQuery::new(g, n, m).unwrap())
        .unwrap()
        .alpha
}

fn alpha_exact(g: &GammaSequence, n: usize, m: usize) -> f64 {
    alpha_lp(&CertificateQuery::new(g, n, m).unwrap())
        .unwrap()
        .alpha
}

fn exp_gamma(c: f64, s: f64, n: usize) -> GammaSequence {
    gamma_from_exponential(ExpBound::new(c, s).unwrap(), n).unwrap()
}

fn criterion_1() -> Outcome {
    let gen = |n: usize| gamma_from_exponential(ExpBound::new(3.0, 2.0 / 3.0)?, n);
    let best = minimal_horizon(gen, HorizonPolicy::BestM, 100).unwrap();
    let m1 = minimal_horizon(gen, HorizonPolicy::Fixed(1), 100).unwrap();
    outcome(
        best.n_hat == 12 && m1.n_hat == 18,
        format!(
            "N_hat(best m) = {} (m = {}), N_hat(m = 1) = {}",
            best.n_hat, best.m_used, m1.n_hat
        ),
    )
}

fn random_monotone(rng: &mut ChaCha8Rng, n: usize) -> GammaSequence {
    let mut v = Vec::with_capacity(n);
    let mut g = 1.0 + rng.random_range(0.0..2.0);
    for _ in 0..n {
        v.push(g);
        // occasional large jumps break submultiplicativity
        g += if rng.random_bool(0.3) {
            rng.random_range(0.0..4.0)
        } else {
            rng.random_range(0.0..0.3)
        };
    }
    GammaSequence::new(v).unwrap()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_gap, mut flagged, mut flagged_ok) = (0.0f64, 0, true);
    for _ in 0..200 {
        let n = rng.random_range(2..=25);
        let m = rng.random_range(1..n);
        let g = exp_gamma(rng.random_range(1.0..6.0), rng.random_range(0.02..0.98), n);
        let gap = (alpha_exact(&g, n, m) - alpha_cf(&g, n, m)).abs();
        worst_gap = worst_gap.max(gap);
        if check_submultiplicative(&g) {
            flagged += 1;
            flagged_ok &= gap <= 1e-8;
        }
    }
    let (mut produced, mut worst_slack) = (0, f64::INFINITY);
    while produced < 200 {
        let n = rng.random_range(3..=12);
        let g = random_monotone(&mut rng, n);
        if check_submultiplicative(&g) {
            continue;
        }
        produced += 1;
        let m = rng.random_range(1..n);
        worst_slack = worst_slack.min(alpha_exact(&g, n, m) - alpha_cf(&g, n, m));
    }
    outcome(
        flagged_ok && worst_slack >= -1e-8,
        format!(
            "exponential: max |lp - cf| = {worst_gap:.2e} over 200 ({flagged} flagged submultiplicative); \
             non-submultiplicative: min(lp - cf) = {worst_slack:.2e} over 200"
        ),
    )
}

fn criterion_3() -> Outcome {
    let (mut sym, mut mono) = (0.0f64, 0.0f64);
    for c in [1.2, 2.0, 3.0, 4.5, 7.0] {
        for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let g = exp_gamma(c, s, 40);
            for n in 2..=40 {
                let a: Vec<f64> = (1..n).map(|m| alpha_cf(&g, n, m)).collect();
                for m in 1..n {
                    sym = sym.max((a[m - 1] - a[n - m - 1]).abs());
                }
                for m in 1..n / 2 {
                    mono = mono.max(a[m - 1] - a[m]);
                }
            }
        }
    }
    outcome(
        sym <= 1e-10 && mono <= 1e-10,
        format!("max |a(N,m) - a(N,N-m)| = {sym:.2e}, max decrease below N/2 = {mono:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let cs = linspace(1.0, 6.0, 200).unwrap();
    let ss = linspace(0.005, 0.995, 200).unwrap();
    let dc = cs[1] - cs[0];
    let grids: Vec<_> = [2, 4, 8, 16]
        .iter()
        .map(|&n| stability_region(n, &cs, &ss, 1).unwrap())
        .collect();
    let mut worst_cells = 0.0f64;
    for (si, s) in ss.iter().enumerate() {
        // last stable C in this sigma column
        let edge = (0..cs.len())
            .rev()
            .find(|&ci| grids[0].is_stable(ci, si))
            .map_or(cs[0] - dc, |ci| cs[ci]);
        worst_cells = worst_cells.max((edge - 2.0 / (1.0 + s)).abs() / dc);
    }
    let mut nested = true;
    for pair in grids.windows(2) {
        nested &= pair[0]
            .mask
            .iter()
            .zip(&pair[1].mask)
            .all(|(a, b)| !a || *b);
    }
    let counts: Vec<usize> = grids
        .iter()
        .map(|g| g.mask.iter().filter(|&&b| b).count())
        .collect();
    outcome(
        worst_cells <= 1.0 && nested,
        format!("N=2 boundary off by at most {worst_cells:.3} cells; nested = {nested}; stable cells {counts:?}"),
    )
}

fn n_hat(level: f64, policy: HorizonPolicy) -> usize {
    minimal_horizon(|n| constant_gamma(level, n), policy, 5000)
        .unwrap()
        .n_hat
}

fn criterion_5() -> Outcome {
    let levels: Vec<f64> = (1..=396).map(|k| 1.0 + 0.25 * k as f64).collect();
    let mut bound_fail = Vec::new();
    let mut order_fail = Vec::new();
    for &level in &levels {
        let row = horizon_row(level, 5000).unwrap();
        if row.n_hat_m1 as f64 > row.bound_m1.ceil() + 1.0
            || row.n_hat_half as f64 > row.bound_half.ceil() + 1.0
        {
            bound_fail.push(level);
        }
        if level >= 3.0 && row.n_hat_half >= row.n_hat_m1 {
            order_fail.push(format!("M={level}: {} vs {}", row.n_hat_half, row.n_hat_m1));
        }
    }
    let mut growth = Vec::new();
    let mut growth_ok = true;
    for level in [10.0f64, 20.0, 40.0, 80.0] {
        let r1 = n_hat(level, HorizonPolicy::Fixed(1)) as f64 / (level * level.ln());
        let rh = n_hat(level, HorizonPolicy::Half) as f64 / (2.0 * LN_2 * level);
        growth_ok &= (0.5..=1.5).contains(&r1) && (0.5..=1.5).contains(&rh);
        growth.push(format!("{level}: {r1:.3}/{rh:.3}"));
    }
    let shown: Vec<&String> = order_fail.iter().take(4).collect();
    outcome(
        bound_fail.is_empty() && order_fail.is_empty() && growth_ok,
        format!(
            "bounds violated at {} of {} levels; growth ratios m1/half {}; \
             N_hat(half) < N_hat(m=1) fails at {} levels >= 3, e.g. {shown:?}",
            bound_fail.len(),
            levels.len(),
            growth.join(", "),
            order_fail.len()
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = constant_gamma(2.0, 100).unwrap();
    let alphas: Vec<f64> = (2..=100).map(|n| alpha_cf(&g, n, 1)).collect();
    let first_099 = alphas.iter().position(|&a| a >= 0.99).map(|i| i + 2);
    let start = alphas
        .iter()
        .position(|&a| a >= 0.0)
        .unwrap_or(alphas.len());
    let worst_drop = alphas[start..]
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0f64, f64::max);
    outcome(
        first_099.is_some() && worst_drop <= 1e-12,
        format!("alpha(N,1) >= 0.99 first at N = {first_099:?}; max decrease past N_hat = {worst_drop:.2e}"),
    )
}

fn criterion_7() -> Outcome {
    let lq = LqModel::scalar(2.0, 1.0, 1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = rng.random_range(-3.0..3.0);
        for n in 1..=10 {
            let sol = solve_finite_horizon(&ShootingProblem {
                model: &lq,
                x0: vec![x],
                horizon: n,
                guess: vec![0.0; n],
                settings: SolverSettings::default(),
            })
            .unwrap();
            worst = worst.max((sol.value - lq.riccati_value(n, &[x]).unwrap()).abs());
        }
    }
    let mut chain_fail = Vec::new();
    let mut pairs = 0;
    for n in 3..=8 {
        let g = lq.riccati_gamma(n).unwrap();
        for m in 1..n {
            pairs += 1;
            let s = Schedule::constant_covering(m, 30).unwrap();
            let traces: Vec<_> = [1.0, -2.5, 0.7]
                .iter()
                .map(|&x0| mpc_run(&lq, n, &s, &[x0], 30, &MpcSettings::default()).unwrap())
                .collect();
            let measured = measured_alpha_over(&traces, m, 0.0).unwrap();
            let cert = alpha_cf(&g, n, m);
            if measured < cert - 1e-6 {
                chain_fail.push(format!("N={n} m={m}: {measured:.6} < {cert:.6}"));
            }
        }
    }
    outcome(
        worst <= 1e-6 && chain_fail.is_empty(),
        format!(
            "max |V_shoot - V_riccati| = {worst:.2e} over 1000 solves; measured >= certified on {}/{pairs} (N,m) {chain_fail:?}",
            pairs - chain_fail.len()
        ),
    )
}

fn criterion_8() -> Outcome {
    let lq = LqModel::scalar(2.0, 1.0, 1.0, 1.0).unwrap();
    let g = lq.riccati_gamma(6).unwrap();
    let spec = ExperimentSpec {
        horizon: 6,
        m_star: 3,
        dropout: 0.3,
        seeds: 10,
        steps: 30,
        x0: vec![1.0],
        base_seed: 0,
        settings: MpcSettings::default(),
    };
    let e = NetworkExperiment::new(&lq, &g, spec.clone()).unwrap();
    let report = run_network_experiment(&e).unwrap();
    let probe = NetworkExperiment::new(&lq, &g, spec)
        .unwrap()
        .with_alpha(1.0)
        .unwrap();
    let probe_report = run_network_experiment(&probe).unwrap();
    let ratio = report.cost_ratio_max.unwrap_or(f64::NAN);
    outcome(
        report.violations.is_empty() && report.failures == 0 && ratio <= 1.0 && !probe_report.violations.is_empty(),
        format!(
            "alpha_star = {:.6} (= {:.6} from certify_up_to); violations {}, max realized/bound {ratio:.4}; probe at alpha 1: {} violations",
            report.alpha_star,
            certify_up_to(&g, 6, 3).unwrap(),
            report.violations.len(),
            probe_report.violations.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let p = Pendulum::default();
    let x0 = [PI + 1.4, 0.0, 0.0, 0.0];
    let mut ok = true;
    let mut notes = Vec::new();
    for m in [1, 2] {
        let settings = MpcSettings {
            startup_steps: 20,
            ..MpcSettings::default()
        };
        let s = Schedule::constant_covering(m, 40).unwrap();
        let t = mpc_run(&p, 10, &s, &x0, 40, &settings).unwrap();
        let finite = t.updates.iter().all(|u| u.value.is_finite())
            && t.final_value.is_some_and(f64::is_finite);
        let nonneg = t.steps.iter().all(|s| s.stage_cost >= 0.0);
        let done = t.failure.is_none() && t.steps.len() == 60;
        ok &= finite && nonneg && done;
        let measured = mpcert::sim::measured_alpha(&t, m, 1e-5).map_or(f64::NAN, |a| a);
        notes.push(format!("m={m}: complete {done}, finite {finite}, lambda >= 0 {nonneg}, measured alpha {measured:.3}"));
    }
    let mut dx = [0.0; 4];
    p.derivative(&[PI, 0.0, 0.0, 0.0], &[0.0], &mut dx);
    let residual = dx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let upright = integrate_sampled(&p, &[0.0; 4], &[0.0], p.sample_time).unwrap();
    let drift = upright.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let hanging = integrate_sampled(&p, &[PI, 0.0, 0.0, 0.0], &[0.0], p.sample_time).unwrap();
    let chatter = hanging
        .iter()
        .zip([PI, 0.0, 0.0, 0.0])
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    ok &= residual <= 1e-8 && drift <= 1e-8;
    notes.push(format!(
        "|f(hanging)| = {residual:.1e}, upright flow drift {drift:.1e}, hanging flow drift {chatter:.1e}"
    ));
    outcome(ok, notes.join("; "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        ("1", criterion_1, Duration::from_secs(1)),
        ("2", criterion_2, Duration::from_secs(30)),
        ("3", criterion_3, Duration::from_secs(10)),
        ("4", criterion_4, Duration::MAX),
        ("5", criterion_5, Duration::MAX),
        ("6", criterion_6, Duration::MAX),
        ("7", criterion_7, Duration::from_secs(120)),
        ("8", criterion_8, Duration::from_secs(60)),
        ("9", criterion_9, Duration::MAX),
    ];
    let mut failed = 0;
    for (id, run, limit) in criteria {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        let budget = if limit == Duration::MAX {
            String::new()
        } else {
            format!(" (limit {} s)", limit.as_secs())
        };
        println!(
            "criterion {id}: {} [{:.2} s{budget}] {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            out.detail
        );
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
