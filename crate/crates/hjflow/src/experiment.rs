//! Experiment orchestration: expand a manifest into runs, execute them in a
//! bounded worker pool, and persist artifacts.
//!
//! Per run: `series.csv`, `final.snap`, `verdicts.csv`, `meta.txt` inside
//! its own subdirectory. Per experiment: `summary.csv`, `plots.gp`, and an
//! experiment-level `verdicts.csv` when the kind carries extra checks
//! (uniformity sweeps, oracle comparisons, semigroup reports). A fixed seed
//! and config reproduce every CSV byte for byte. `HJFLOW_THREADS` bounds
//! the pool; each run touches only its own subdirectory and the summary is
//! written once after all workers finish.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asymptotics::{
    decay_prefactor, deviation, estimate_c, fit_decay, CMethod, DecayFit, Verdict,
};
use crate::config::{ExperimentKind, ExperimentManifest, RunEntry};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::io::{
    fmt_float, meta_f64, read_meta, read_series_csv, write_meta, write_plots_script,
    write_series_csv, write_snapshot, write_summary, write_verdicts, SummaryRow,
};
use crate::spectral::{
    closed_form_second_eigenvalue, picard_mild_solve, second_neumann_eigenvalue,
    semigroup_estimate_report, EigenResult, SemigroupReport,
};
use crate::stepper::{build_initial, run, RunResult, RunStatus};

/// Default start of the window for the gradient-diagnostic plateau check.
pub const BERNSTEIN_T0: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct EigLine {
    pub lambda: f64,
    pub lambda_analytic: Option<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl EigLine {
    pub fn render(&self) -> String {
        format!(
            "{} {} {} {}",
            fmt_float(self.lambda),
            self.lambda_analytic
                .map_or_else(|| "-".to_string(), fmt_float),
            fmt_float(self.residual),
            self.iterations
        )
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub all_pass: bool,
    pub summary: Vec<SummaryRow>,
    pub output_dir: PathBuf,
    pub eig: Option<EigLine>,
}

struct RunOutput {
    row: SummaryRow,
    pass: bool,
    result: Option<RunResult>,
}

fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("HJFLOW_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::invalid(format!("HJFLOW_THREADS must be an integer, got `{v}`")))?;
        builder = builder.num_threads(n.max(1));
    }
    builder
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))
}

/// Execute a manifest and write all artifacts under its output directory.
pub fn run_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    fs::create_dir_all(&manifest.output_dir)?;
    match manifest.kind {
        ExperimentKind::Eig => eig_experiment(manifest),
        ExperimentKind::Semigroup => semigroup_experiment(manifest),
        _ => run_based_experiment(manifest),
    }
}

fn run_based_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    let grid = manifest.grid_spec.build()?;
    let lambda = second_neumann_eigenvalue(&grid)?.lambda;
    let pool = worker_pool()?;
    let outputs: Vec<Result<RunOutput>> = pool.install(|| {
        manifest
            .runs
            .par_iter()
            .map(|entry| execute_run(&grid, entry, lambda, manifest))
            .collect()
    });

    let mut rows = Vec::new();
    let mut all_pass = true;
    let mut results = Vec::new();
    for (entry, out) in manifest.runs.iter().zip(outputs) {
        match out {
            Ok(o) => {
                all_pass &= o.pass;
                rows.push(o.row.clone());
                results.push((entry.id.clone(), o));
            }
            Err(e) => {
                all_pass = false;
                rows.push(SummaryRow {
                    run_id: entry.id.clone(),
                    status: "error".to_string(),
                    lambda,
                    rate: f64::NAN,
                    rate_rel_err: f64::NAN,
                    c: f64::NAN,
                    prefactor: f64::NAN,
                    sup_grad_max: f64::NAN,
                });
                eprintln!("run {} failed: {e}", entry.id);
            }
        }
    }

    let mut extra = Vec::new();
    match manifest.kind {
        ExperimentKind::SweepKappa => extra.extend(sweep_verdicts(&rows)),
        ExperimentKind::OracleColeHopf => {
            extra.extend(colehopf_verdicts(&grid, manifest, &results)?)
        }
        ExperimentKind::PicardCrosscheck => {
            extra.extend(picard_verdicts(&grid, manifest, &results)?)
        }
        _ => {}
    }
    if !extra.is_empty() {
        all_pass &= extra.iter().all(|v| v.pass);
        write_verdicts(&manifest.output_dir.join("verdicts.csv"), &extra)?;
    }

    write_summary(&manifest.output_dir.join("summary.csv"), &rows)?;
    let ids: Vec<String> = manifest.runs.iter().map(|r| r.id.clone()).collect();
    write_plots_script(&manifest.output_dir.join("plots.gp"), &ids)?;
    Ok(ExperimentOutcome {
        all_pass,
        summary: rows,
        output_dir: manifest.output_dir.clone(),
        eig: None,
    })
}

fn execute_run(
    grid: &Grid,
    entry: &RunEntry,
    lambda: f64,
    manifest: &ExperimentManifest,
) -> Result<RunOutput> {
    let dir = manifest.output_dir.join(&entry.id);
    fs::create_dir_all(&dir)?;
    let result = run(grid, &entry.config)?;

    let method = if manifest.tail_extrapolate {
        CMethod::TailExtrapolate
    } else {
        CMethod::Truncate
    };
    let c_est = estimate_c(&result.series, result.u0_mean, lambda, method)?;
    // the fit measures deviation from the run's own empirical limit; the
    // integral estimate carries an O(dt) quadrature bias that would plateau
    // the log fit
    let c_fit = result.state.u.weighted_mean(grid)?;
    let fit = fit_decay(&result.series, c_fit, manifest.fit.band).ok();
    let prefactor = decay_prefactor(&result.series, c_fit, lambda);
    let sup_grad_max = result
        .series
        .records
        .iter()
        .map(|r| r.grad_sup)
        .fold(0.0f64, f64::max);

    let mut verdicts = crate::asymptotics::standard_verdicts(
        &result.series,
        result.u0_sup,
        entry.config.dt_max,
        BERNSTEIN_T0,
    );
    verdicts.push(Verdict::flag(
        "status_completed",
        result.status == RunStatus::Completed,
    ));
    let rate = fit.as_ref().map_or(f64::NAN, |f| f.rate);
    let rate_rel_err = (rate - lambda).abs() / lambda;
    if let Some(tol) = manifest.fit.rate_tol_rel {
        let mut v = Verdict::leq("rate_matches_lambda", rate_rel_err, tol);
        if rate.is_nan() {
            v.pass = false;
        }
        verdicts.push(v);
    }

    write_series_csv(&dir.join("series.csv"), &result.series)?;
    write_snapshot(&dir.join("final.snap"), grid, &result.state.u)?;
    write_verdicts(&dir.join("verdicts.csv"), &verdicts)?;
    write_run_meta(
        &dir.join("meta.txt"),
        entry,
        &result,
        lambda,
        c_est,
        c_fit,
        &fit,
        manifest,
    )?;

    let pass = verdicts.iter().all(|v| v.pass);
    Ok(RunOutput {
        row: SummaryRow {
            run_id: entry.id.clone(),
            status: result.status.as_str().to_string(),
            lambda,
            rate,
            rate_rel_err,
            c: c_est,
            prefactor,
            sup_grad_max,
        },
        pass,
        result: Some(result),
    })
}

#[allow(clippy::too_many_arguments)]
fn write_run_meta(
    path: &Path,
    entry: &RunEntry,
    result: &RunResult,
    lambda: f64,
    c_est: f64,
    c_fit: f64,
    fit: &Option<DecayFit>,
    manifest: &ExperimentManifest,
) -> Result<()> {
    let mut pairs: Vec<(&str, String)> = vec![
        ("run_id", entry.id.clone()),
        ("status", result.status.as_str().to_string()),
        ("u0_sup", fmt_float(result.u0_sup)),
        ("u0_mean", fmt_float(result.u0_mean)),
        ("dt_max", fmt_float(entry.config.dt_max)),
        ("robin_k", fmt_float(entry.config.robin_k)),
        ("t0_bernstein", fmt_float(BERNSTEIN_T0)),
        ("lambda", fmt_float(lambda)),
        ("c_estimate", fmt_float(c_est)),
        ("c_fit", fmt_float(c_fit)),
        ("rate", fmt_float(fit.as_ref().map_or(f64::NAN, |f| f.rate))),
        (
            "prefactor",
            fmt_float(fit.as_ref().map_or(f64::NAN, |f| f.prefactor)),
        ),
        ("config_hash", result.series.config_hash.to_string()),
        ("grid_id", result.series.grid_id.to_string()),
    ];
    if let Some(tol) = manifest.fit.rate_tol_rel {
        pairs.push(("rate_tol_rel", fmt_float(tol)));
    }
    write_meta(path, &pairs)
}

fn sweep_verdicts(rows: &[SummaryRow]) -> Vec<Verdict> {
    let all_completed = rows.iter().all(|r| r.status == "completed");
    let finite = rows.iter().all(|r| r.prefactor.is_finite());
    let positive: Vec<f64> = rows
        .iter()
        .map(|r| r.prefactor)
        .filter(|&p| p > 0.0)
        .collect();
    let envelope = if positive.is_empty() {
        0.0
    } else {
        let max = positive.iter().cloned().fold(f64::MIN, f64::max);
        let min = positive.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    };
    vec![
        Verdict::flag("sweep_all_completed", all_completed),
        Verdict::flag("sweep_prefactors_finite", finite),
        Verdict::leq("sweep_envelope_ratio", envelope, 100.0),
    ]
}

fn colehopf_verdicts(
    grid: &Grid,
    manifest: &ExperimentManifest,
    results: &[(String, RunOutput)],
) -> Result<Vec<Verdict>> {
    let (_, out) = results
        .first()
        .ok_or_else(|| Error::invalid("oracle run missing"))?;
    let result = out
        .result
        .as_ref()
        .ok_or_else(|| Error::invalid("oracle run missing"))?;
    let entry = &manifest.runs[0];
    let u0 = build_initial(grid, &entry.config.initial)?;
    let transformed: Vec<f64> = u0.values().iter().map(|v| v.exp()).collect();
    let c_oracle = grid.mean_w(&transformed).ln();
    let c_err = (out.row.c - c_oracle).abs();
    let final_dev = result
        .state
        .u
        .values()
        .iter()
        .map(|v| (v - c_oracle).abs())
        .fold(0.0f64, f64::max);
    Ok(vec![
        Verdict::leq("colehopf_c_error", c_err, manifest.colehopf.tol_c),
        Verdict::leq("colehopf_final_dev", final_dev, manifest.colehopf.tol_u),
    ])
}

fn picard_verdicts(
    grid: &Grid,
    manifest: &ExperimentManifest,
    results: &[(String, RunOutput)],
) -> Result<Vec<Verdict>> {
    let (_, out) = results
        .first()
        .ok_or_else(|| Error::invalid("march run missing"))?;
    let result = out
        .result
        .as_ref()
        .ok_or_else(|| Error::invalid("march run missing"))?;
    let entry = &manifest.runs[0];
    let u0 = build_initial(grid, &entry.config.initial)?;
    let picard = picard_mild_solve(
        grid,
        &entry.config.nonlinearity,
        &u0,
        entry.config.t_end,
        manifest.picard.time_nodes,
        manifest.picard.max_iters,
    )?;
    let diff = picard.u.sup_diff(&result.state.u);
    Ok(vec![
        Verdict::leq("picard_vs_march", diff, manifest.picard.tol),
        Verdict::leq(
            "picard_iterations",
            picard.iterations as f64,
            manifest.picard.max_iters as f64,
        ),
    ])
}

fn seeded_sign_fields(grid: &Grid, count: usize, seed: u64) -> Result<Vec<Field>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let values = (0..grid.node_count())
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect();
            Field::from_values(grid, values)
        })
        .collect()
}

fn semigroup_report_for(
    grid: &Grid,
    manifest: &ExperimentManifest,
) -> Result<(SemigroupReport, usize)> {
    let mut fields = seeded_sign_fields(grid, manifest.semigroup.n_samples, manifest.seed)?;
    let eig = second_neumann_eigenvalue(grid)?;
    let eigen_index = fields.len();
    fields.push(eig.eigenvector);
    let report = semigroup_estimate_report(grid, &fields, &manifest.semigroup.times)?;
    Ok((report, eigen_index))
}

fn semigroup_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    let grid = manifest.grid_spec.build()?;
    let (report, eigen_index) = semigroup_report_for(&grid, manifest)?;

    let mut verdicts = vec![
        Verdict::leq("sg_contraction", report.contraction_max, 1.0 + 1e-10),
        Verdict::flag("sg_c1_finite", report.c1_hat.is_finite()),
        Verdict::flag("sg_c2_finite", report.c2_hat.is_finite()),
    ];
    let eigen_sat = report
        .samples
        .iter()
        .filter(|s| s.field_index == eigen_index)
        .map(|s| (s.c2_ratio - 1.0).abs())
        .fold(0.0f64, f64::max);
    verdicts.push(Verdict::leq("sg_eigen_saturation", eigen_sat, 1e-6));

    let mut csv = String::from("grid,field,t,contraction,c1_ratio,c2_ratio\n");
    for s in &report.samples {
        csv.push_str(&format!(
            "coarse,{},{},{},{},{}\n",
            s.field_index,
            fmt_float(s.t),
            fmt_float(s.contraction),
            fmt_float(s.c1_ratio),
            fmt_float(s.c2_ratio)
        ));
    }

    if manifest.semigroup.refine {
        let fine = grid.refined()?;
        let (report2, _) = semigroup_report_for(&fine, manifest)?;
        let ratio = |a: f64, b: f64| (a / b).max(b / a);
        verdicts.push(Verdict::leq(
            "sg_c1_stable_under_refinement",
            ratio(report.c1_hat, report2.c1_hat),
            2.0,
        ));
        verdicts.push(Verdict::leq(
            "sg_c2_stable_under_refinement",
            ratio(report.c2_hat, report2.c2_hat),
            2.0,
        ));
        for s in &report2.samples {
            csv.push_str(&format!(
                "fine,{},{},{},{},{}\n",
                s.field_index,
                fmt_float(s.t),
                fmt_float(s.contraction),
                fmt_float(s.c1_ratio),
                fmt_float(s.c2_ratio)
            ));
        }
    }

    fs::write(manifest.output_dir.join("semigroup.csv"), csv)?;
    write_verdicts(&manifest.output_dir.join("verdicts.csv"), &verdicts)?;
    write_summary(&manifest.output_dir.join("summary.csv"), &[])?;
    Ok(ExperimentOutcome {
        all_pass: verdicts.iter().all(|v| v.pass),
        summary: Vec::new(),
        output_dir: manifest.output_dir.clone(),
        eig: None,
    })
}

fn eig_experiment(manifest: &ExperimentManifest) -> Result<ExperimentOutcome> {
    let grid = manifest.grid_spec.build()?;
    let res: EigenResult = second_neumann_eigenvalue(&grid)?;
    let analytic = closed_form_second_eigenvalue(&grid);
    let ones = vec![1.0; grid.node_count()];
    let mean = grid.dot_w(res.eigenvector.values(), &ones).abs();
    let mut verdicts = vec![
        Verdict::leq("eig_residual", res.residual_norm, 1e-8),
        Verdict::leq("eig_mean_zero", mean, 1e-10),
    ];
    if let Some(exact) = analytic {
        verdicts.push(Verdict::leq(
            "eig_matches_closed_form",
            (res.lambda - exact).abs() / exact,
            1e-8,
        ));
    }
    let line = EigLine {
        lambda: res.lambda,
        lambda_analytic: analytic,
        residual: res.residual_norm,
        iterations: res.iterations,
    };
    fs::write(
        manifest.output_dir.join("eig.txt"),
        format!("{}\n", line.render()),
    )?;
    write_verdicts(&manifest.output_dir.join("verdicts.csv"), &verdicts)?;
    write_summary(&manifest.output_dir.join("summary.csv"), &[])?;
    Ok(ExperimentOutcome {
        all_pass: verdicts.iter().all(|v| v.pass),
        summary: Vec::new(),
        output_dir: manifest.output_dir.clone(),
        eig: Some(line),
    })
}

/// Recompute and rewrite the invariant verdicts for saved run directories.
/// Accepts either one run directory or an experiment directory whose
/// children hold runs; returns true when every row passes.
pub fn verify_directory(dir: &Path) -> Result<bool> {
    let mut run_dirs = Vec::new();
    if dir.join("series.csv").exists() {
        run_dirs.push(dir.to_path_buf());
    } else {
        let mut children: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("series.csv").exists())
            .collect();
        children.sort();
        run_dirs.extend(children);
    }
    if run_dirs.is_empty() {
        return Err(Error::invalid(format!(
            "{}: no series.csv found here or in subdirectories",
            dir.display()
        )));
    }
    let mut all_pass = true;
    for rd in run_dirs {
        let series = read_series_csv(&rd.join("series.csv"))?;
        let meta = read_meta(&rd.join("meta.txt"))?;
        let u0_sup = meta_f64(&meta, "u0_sup")?;
        let dt_max = meta_f64(&meta, "dt_max")?;
        let t0 = meta_f64(&meta, "t0_bernstein").unwrap_or(BERNSTEIN_T0);
        let mut verdicts = crate::asymptotics::standard_verdicts(&series, u0_sup, dt_max, t0);
        let status_ok = meta
            .get("status")
            .map(|s| s == "completed")
            .unwrap_or(false);
        verdicts.push(Verdict::flag("status_completed", status_ok));
        if let (Ok(tol), Ok(lambda), Ok(rate)) = (
            meta_f64(&meta, "rate_tol_rel"),
            meta_f64(&meta, "lambda"),
            meta_f64(&meta, "rate"),
        ) {
            let rel = (rate - lambda).abs() / lambda;
            let mut v = Verdict::leq("rate_matches_lambda", rel, tol);
            if rate.is_nan() {
                v.pass = false;
            }
            verdicts.push(v);
        }
        write_verdicts(&rd.join("verdicts.csv"), &verdicts)?;
        for v in &verdicts {
            println!(
                "{}: {} pass={} measured={:.6e} threshold={:.6e}",
                rd.file_name().and_then(|s| s.to_str()).unwrap_or("run"),
                v.name,
                v.pass,
                v.measured,
                v.threshold
            );
            all_pass &= v.pass;
        }
    }
    Ok(all_pass)
}

/// Dev(t) of a saved series against the fitted limit; used by reports.
pub fn series_deviation(series: &crate::asymptotics::TimeSeries, c: f64) -> Vec<(f64, f64)> {
    series
        .records
        .iter()
        .map(|r| (r.t, deviation(r, c)))
        .collect()
}
