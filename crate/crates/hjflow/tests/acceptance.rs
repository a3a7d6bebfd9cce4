//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (`cargo test --test acceptance -- --nocapture` to see them all).

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hjflow::asymptotics::{comparison_check, estimate_c, fit_decay, standard_verdicts, CMethod};
use hjflow::config::parse_config;
use hjflow::experiment::run_experiment;
use hjflow::field::Field;
use hjflow::grid::{build_interval, build_rectangle, build_union_rectangles, Grid, Rect};
use hjflow::nonlinearity::NonlinearitySpec;
use hjflow::operators::{laplacian_apply, solve_helmholtz};
use hjflow::spectral::{picard_mild_solve, second_neumann_eigenvalue, semigroup_estimate_report};
use hjflow::stepper::{build_initial, run, InitialDatum, RunConfig, RunResult, RunStatus};

struct Fixture {
    grid: Grid,
    cfg: RunConfig,
    result: RunResult,
    lambda: f64,
    elapsed_s: f64,
}

fn make_fixture(grid: Grid, cfg: RunConfig) -> Fixture {
    let lambda = second_neumann_eigenvalue(&grid).expect("eigenvalue").lambda;
    let start = Instant::now();
    let result = run(&grid, &cfg).expect("run");
    let elapsed_s = start.elapsed().as_secs_f64();
    Fixture {
        grid,
        cfg,
        result,
        lambda,
        elapsed_s,
    }
}

fn empirical_limit(fx: &Fixture) -> f64 {
    fx.result.state.u.weighted_mean(&fx.grid).unwrap()
}

fn report(criterion: &str, detail: &str, pass: bool) {
    println!(
        "[acceptance] {criterion}: {detail} -> {}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn heat_fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| {
        let grid = build_interval(1.0, 401).unwrap();
        let cfg = RunConfig {
            dt_max: 1e-4,
            save_stride: 25,
            ..RunConfig::new(
                NonlinearitySpec::zero(),
                InitialDatum::Cosine { amplitude: 1.0 },
                1.0,
            )
        };
        make_fixture(grid, cfg)
    })
}

fn colehopf_fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| {
        let grid = build_interval(1.0, 401).unwrap();
        let cfg = RunConfig {
            dt_max: 1e-4,
            save_stride: 10,
            ..RunConfig::new(
                NonlinearitySpec::power(2.0),
                InitialDatum::Cosine { amplitude: 0.5 },
                3.0,
            )
        };
        make_fixture(grid, cfg)
    })
}

fn cubic_fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| {
        let grid = build_interval(1.0, 401).unwrap();
        let cfg = RunConfig {
            dt_max: 2e-4,
            save_stride: 10,
            ..RunConfig::new(
                NonlinearitySpec::power(3.0),
                InitialDatum::Cosine { amplitude: 0.2 },
                3.0,
            )
        };
        make_fixture(grid, cfg)
    })
}

fn lshape_fixture() -> &'static Fixture {
    static FX: OnceLock<Fixture> = OnceLock::new();
    FX.get_or_init(|| {
        let grid = build_union_rectangles(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.0, 0.0, 2.0, 0.5)],
            0.025,
        )
        .unwrap();
        let cfg = RunConfig {
            dt_max: 2e-3,
            save_stride: 2,
            ..RunConfig::new(
                NonlinearitySpec::power(3.0),
                InitialDatum::Cosine { amplitude: 0.1 },
                4.0,
            )
        };
        make_fixture(grid, cfg)
    })
}

#[test]
fn c01_heat_oracle_rate() {
    let fx = heat_fixture();
    let h = fx.grid.h();
    let lambda_formula = 2.0 * (1.0 - (PI * h).cos()) / (h * h);
    assert!((lambda_formula - PI * PI).abs() <= 1e-3 * PI * PI);
    assert!((fx.lambda - lambda_formula).abs() <= 1e-8 * lambda_formula);

    let c = empirical_limit(fx);
    let fit = fit_decay(&fx.result.series, c, None).expect("fit");
    let rel = (fit.rate - lambda_formula).abs() / lambda_formula;
    let pass = rel <= 5e-3 && fx.elapsed_s < 5.0 && fx.result.status == RunStatus::Completed;
    report(
        "C01 heat-oracle rate",
        &format!(
            "rate={:.6} lambda_h={lambda_formula:.6} rel_err={rel:.2e} (tol 5e-3), runtime={:.2}s (max 5s)",
            fit.rate, fx.elapsed_s
        ),
        pass,
    );
    assert!(
        rel <= 5e-3,
        "rate {} vs {lambda_formula}, rel {rel}",
        fit.rate
    );
    assert!(
        fx.elapsed_s < 5.0,
        "heat-oracle run took {:.2}s",
        fx.elapsed_s
    );
    assert_eq!(fx.result.status, RunStatus::Completed);
}

#[test]
fn c02_cole_hopf_constant() {
    let fx = colehopf_fixture();
    let c_est = estimate_c(
        &fx.result.series,
        fx.result.u0_mean,
        fx.lambda,
        CMethod::TailExtrapolate,
    )
    .expect("estimate_c");
    let u0 = build_initial(&fx.grid, &fx.cfg.initial).unwrap();
    let transformed: Vec<f64> = u0.values().iter().map(|v| v.exp()).collect();
    let c_oracle = fx.grid.mean_w(&transformed).ln();
    let c_err = (c_est - c_oracle).abs();

    let final_dev = fx
        .result
        .state
        .u
        .values()
        .iter()
        .map(|v| (v - c_oracle).abs())
        .fold(0.0f64, f64::max);

    let pass = c_err <= 1e-3 && final_dev <= 2e-3 && fx.result.status == RunStatus::Completed;
    report(
        "C02 Cole-Hopf constant",
        &format!(
            "|c_est-c_oracle|={c_err:.2e} (tol 1e-3), |u(T)-c|_inf={final_dev:.2e} (tol 2e-3)"
        ),
        pass,
    );
    assert!(c_err <= 1e-3, "c error {c_err}");
    assert!(final_dev <= 2e-3, "final deviation {final_dev}");
    assert_eq!(fx.result.status, RunStatus::Completed);
}

#[test]
fn c03_decay_rate_cubic() {
    let fx = cubic_fixture();
    assert_eq!(fx.result.status, RunStatus::Completed);
    let sup_grad = fx
        .result
        .series
        .records
        .iter()
        .map(|r| r.grad_sup)
        .fold(0.0f64, f64::max);
    assert!(sup_grad.is_finite() && sup_grad > 0.0);

    let c = empirical_limit(fx);
    let fit = fit_decay(&fx.result.series, c, None).expect("fit");
    let rel = (fit.rate - fx.lambda).abs() / fx.lambda;
    let pass = rel <= 0.10;
    report(
        "C03 decay rate (cubic gradient source)",
        &format!(
            "rate={:.5} lambda={:.5} rel_err={rel:.2e} (tol 0.1), sup_t|grad u|={sup_grad:.4}",
            fit.rate, fx.lambda
        ),
        pass,
    );
    assert!(pass, "rate {} vs lambda {}, rel {rel}", fit.rate, fx.lambda);
}

#[test]
fn c04_monotone_liapunov_suite() {
    let cases = [
        ("heat", heat_fixture()),
        ("colehopf", colehopf_fixture()),
        ("cubic", cubic_fixture()),
        ("lshape", lshape_fixture()),
    ];
    let mut all = true;
    for (name, fx) in cases {
        let verdicts = standard_verdicts(&fx.result.series, fx.result.u0_sup, fx.cfg.dt_max, 0.05);
        for v in &verdicts {
            if !v.pass {
                all = false;
                println!(
                    "[acceptance]   {name}/{}: measured={:.3e} threshold={:.3e}",
                    v.name, v.measured, v.threshold
                );
            }
        }
        let monotone: Vec<&str> = verdicts
            .iter()
            .filter(|v| !v.pass)
            .map(|v| v.name.as_str())
            .collect();
        assert!(
            monotone.is_empty(),
            "{name}: failed invariants {monotone:?}"
        );
    }
    report(
        "C04 monotone Liapunov suite",
        "max/min envelopes, sup bound, |u_t| decay on runs C01-C03 and C06",
        all,
    );
    assert!(all);
}

#[test]
fn c05_comparison_principle() {
    let grid = build_interval(1.0, 401).unwrap();
    let base = RunConfig {
        dt_max: 2e-4,
        save_stride: 10,
        ..RunConfig::new(
            NonlinearitySpec::power(3.0),
            InitialDatum::Cosine { amplitude: 0.2 },
            2.0,
        )
    };
    let res_b = run(&grid, &base).unwrap();
    let u0_b = build_initial(&grid, &base.initial).unwrap();
    let clipped = RunConfig {
        initial: InitialDatum::Custom {
            values: u0_b.values().iter().map(|v| v.min(0.0)).collect(),
        },
        ..base
    };
    let res_a = run(&grid, &clipped).unwrap();
    assert_eq!(res_a.status, RunStatus::Completed);
    assert_eq!(res_b.status, RunStatus::Completed);

    let rep = comparison_check(
        &res_a.series,
        &res_b.series,
        &res_a.snapshots,
        &res_b.snapshots,
        1e-8,
    )
    .expect("matched runs");
    report(
        "C05 comparison principle",
        &format!(
            "max nodewise (u_a - u_b) = {:.2e} over {} snapshots (tol 1e-8)",
            rep.max_violation,
            res_a.snapshots.len()
        ),
        rep.pass,
    );
    assert!(rep.pass, "order violated by {}", rep.max_violation);
}

#[test]
fn c06_nonconvex_domain() {
    let fx = lshape_fixture();
    assert_eq!(fx.result.status, RunStatus::Completed);

    let verdicts = standard_verdicts(&fx.result.series, fx.result.u0_sup, fx.cfg.dt_max, 0.05);
    let bern = verdicts
        .iter()
        .find(|v| v.name == "bernstein_running_max")
        .unwrap();

    let c = empirical_limit(fx);
    let fit = fit_decay(&fx.result.series, c, None).expect("fit");
    let rel = (fit.rate - fx.lambda).abs() / fx.lambda;
    let pass = bern.pass && rel <= 0.15;
    report(
        "C06 non-convex (L-shape) domain",
        &format!(
            "rate={:.5} lambda={:.5} rel_err={rel:.2e} (tol 0.15), gradient-diagnostic plateau excess={:.2e}",
            fit.rate, fx.lambda, bern.measured
        ),
        pass,
    );
    assert!(bern.pass, "gradient diagnostic grew: {}", bern.measured);
    assert!(
        rel <= 0.15,
        "rate {} vs lambda {}, rel {rel}",
        fit.rate,
        fx.lambda
    );
}

fn sign_fields(grid: &Grid, count: usize, seed: u64) -> Vec<Field> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let values: Vec<f64> = (0..grid.node_count())
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            Field::from_values(grid, values).unwrap()
        })
        .collect()
}

#[test]
fn c07_semigroup_estimates() {
    let times = [1e-4, 1e-3, 1e-2, 0.1, 1.0];
    let mut reports = Vec::new();
    for n in [201usize, 401] {
        let grid = build_interval(1.0, n).unwrap();
        let mut fields = sign_fields(&grid, 20, 7);
        let eig = second_neumann_eigenvalue(&grid).unwrap();
        let eigen_index = fields.len();
        fields.push(eig.eigenvector);
        let rep = semigroup_estimate_report(&grid, &fields, &times).unwrap();
        assert!(
            rep.contraction_pass,
            "contraction {} on n={n}",
            rep.contraction_max
        );
        assert!(rep.c1_hat.is_finite() && rep.c2_hat.is_finite());
        let sat = rep
            .samples
            .iter()
            .filter(|s| s.field_index == eigen_index)
            .map(|s| (s.c2_ratio - 1.0).abs())
            .fold(0.0f64, f64::max);
        assert!(sat <= 1e-6, "eigenfunction saturation {sat} on n={n}");
        reports.push(rep);
    }
    let r1 = (reports[0].c1_hat / reports[1].c1_hat).max(reports[1].c1_hat / reports[0].c1_hat);
    let r2 = (reports[0].c2_hat / reports[1].c2_hat).max(reports[1].c2_hat / reports[0].c2_hat);
    let pass = r1 < 2.0 && r2 < 2.0;
    report(
        "C07 semigroup estimates",
        &format!(
            "contraction<=1+1e-10 on both grids, C1_hat {:.4}/{:.4} (x{r1:.3}), C2_hat {:.6}/{:.6} (x{r2:.3}), eigen saturation <=1e-6",
            reports[0].c1_hat, reports[1].c1_hat, reports[0].c2_hat, reports[1].c2_hat
        ),
        pass,
    );
    assert!(r1 < 2.0, "C1_hat unstable under refinement: x{r1}");
    assert!(r2 < 2.0, "C2_hat unstable under refinement: x{r2}");
}

#[test]
fn c08_mild_vs_marching() {
    let grid = build_interval(1.0, 201).unwrap();
    let spec = NonlinearitySpec::power(3.0);
    let cfg = RunConfig {
        dt_max: 1e-4,
        save_stride: 50,
        ..RunConfig::new(spec.clone(), InitialDatum::Cosine { amplitude: 0.1 }, 0.05)
    };
    let march = run(&grid, &cfg).unwrap();
    assert_eq!(march.status, RunStatus::Completed);
    let u0 = build_initial(&grid, &cfg.initial).unwrap();
    let picard = picard_mild_solve(&grid, &spec, &u0, 0.05, 16, 20).expect("contraction");
    let diff = picard.u.sup_diff(&march.state.u);
    let pass = diff <= 5e-3 && picard.iterations <= 20;
    report(
        "C08 mild vs marching",
        &format!(
            "sup|picard - imex| = {diff:.2e} (tol 5e-3), contraction in {} iterations (max 20)",
            picard.iterations
        ),
        pass,
    );
    assert!(diff <= 5e-3, "methods disagree by {diff}");
    assert!(picard.iterations <= 20);
}

#[test]
fn c09_uniformity_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config_text = format!(
        "experiment = sweep-kappa\noutput_dir = {}\nseed = 3\n\
         grid.kind = interval\ngrid.length = 1.0\ngrid.n = 401\n\
         F.kind = power\nF.p = 3\n\
         u0.kind = cosine\n\
         run.t_end = 3.0\nrun.dt_max = 2e-4\nrun.save_stride = 10\n\
         sweep.amplitudes = 0.05, 0.1, 0.2, 0.4\n",
        dir.path().join("sweep").display()
    );
    let manifest = parse_config(&config_text).unwrap();
    let outcome = run_experiment(&manifest).unwrap();
    assert_eq!(outcome.summary.len(), 4);
    for row in &outcome.summary {
        assert_eq!(row.status, "completed", "{} did not complete", row.run_id);
        assert!(row.prefactor.is_finite() && row.prefactor > 0.0);
    }
    let prefs: Vec<f64> = outcome.summary.iter().map(|r| r.prefactor).collect();
    let max = prefs.iter().cloned().fold(f64::MIN, f64::max);
    let min = prefs.iter().cloned().fold(f64::MAX, f64::min);
    let ratio = max / min;
    let pass = outcome.all_pass && ratio <= 100.0;
    report(
        "C09 uniformity sweep",
        &format!(
            "4/4 completed, prefactors [{:.3}, {:.3}, {:.3}, {:.3}], envelope ratio {ratio:.2} (tol 100)",
            prefs[0], prefs[1], prefs[2], prefs[3]
        ),
        pass,
    );
    assert!(ratio <= 100.0, "envelope ratio {ratio}");
    assert!(outcome.all_pass, "sweep verdicts failed");
}

#[test]
fn c10_operator_algebra() {
    let grids = [
        build_interval(1.0, 401).unwrap(),
        build_rectangle(2.0, 1.0, 81, 41).unwrap(),
        build_union_rectangles(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.0, 0.0, 2.0, 0.5)],
            0.025,
        )
        .unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for grid in &grids {
        for _ in 0..3 {
            let f = Field::from_values(
                grid,
                (0..grid.node_count())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let g = Field::from_values(
                grid,
                (0..grid.node_count())
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
            )
            .unwrap();
            let lf = laplacian_apply(grid, &f).unwrap();
            let lg = laplacian_apply(grid, &g).unwrap();

            let total: f64 = (0..grid.node_count())
                .map(|a| grid.weight(a) * lf.values()[a])
                .sum();
            let cons_bound = 1e-12 * f.sup_norm() * grid.measure() / (grid.h() * grid.h());
            assert!(
                total.abs() <= cons_bound,
                "conservation {total:.3e} vs {cons_bound:.3e}"
            );
            worst.0 = worst.0.max(total.abs() / cons_bound);

            let a1 = grid.dot_w(lf.values(), g.values());
            let a2 = grid.dot_w(f.values(), lg.values());
            let sym = (a1 - a2).abs() / (a1.abs() + a2.abs() + 1.0);
            assert!(sym <= 1e-12, "symmetry {sym:.3e}");
            worst.1 = worst.1.max(sym / 1e-12);

            let quad = grid.dot_w(lf.values(), f.values());
            assert!(quad <= 1e-12, "semidefiniteness {quad:.3e}");
            worst.2 = worst.2.max(quad / 1e-12);

            let alpha = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let v = solve_helmholtz(grid, alpha, &f).unwrap();
            let lv = laplacian_apply(grid, &v).unwrap();
            let mut res = 0.0f64;
            for a in 0..grid.node_count() {
                res = res.max((v.values()[a] - alpha * lv.values()[a] - f.values()[a]).abs());
            }
            let tol = 1e-10 * (1.0 + f.sup_norm());
            assert!(res <= tol, "roundtrip residual {res:.3e} vs {tol:.3e}");
            worst.3 = worst.3.max(res / tol);
        }
    }
    report(
        "C10 operator algebra",
        &format!(
            "conservation/symmetry/semidefiniteness/roundtrip within tolerance on interval, rectangle, L-shape (worst fractions {:.2e}, {:.2e}, {:.2e}, {:.2e})",
            worst.0, worst.1, worst.2, worst.3
        ),
        true,
    );
}
