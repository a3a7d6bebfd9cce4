//! Run monitors and post-processing: monotone extremal bounds, the limit
//! constant from the source-average integral, log-linear decay-rate fits,
//! the weighted gradient diagnostic, and order-preservation checks between
//! runs.
//!
//! The deviation from the limit constant is measured throughout by the one
//! nodal surrogate `dev(t) = max(|max u - c|, |min u - c|) + |grad u|_inf`,
//! so every rate check in the crate compares like with like.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::nonlinearity::NonlinearitySpec;
use crate::operators::gradient;

/// One saved monitor row.
#[derive(Debug, Clone, Copy)]
pub struct Record {
    pub t: f64,
    pub max_u: f64,
    pub min_u: f64,
    /// Backward-difference surrogate of |u_t|_inf over the last step.
    pub lut: f64,
    pub grad_sup: f64,
    /// |u - mean(u)|_inf + grad_sup.
    pub xnorm_dev: f64,
    pub mean_f: f64,
    /// max over nodes of psi * |grad u|^2.
    pub sup_h: f64,
    pub dt: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub records: Vec<Record>,
    pub config_hash: u64,
    pub grid_id: u64,
}

impl TimeSeries {
    pub fn push(&mut self, rec: Record) -> Result<()> {
        let fields = [
            rec.t,
            rec.max_u,
            rec.min_u,
            rec.lut,
            rec.grad_sup,
            rec.xnorm_dev,
            rec.mean_f,
            rec.sup_h,
            rec.dt,
        ];
        if !fields.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("time series record"));
        }
        if let Some(last) = self.records.last() {
            if rec.t <= last.t {
                return Err(Error::invalid(format!(
                    "time must increase strictly: {} after {}",
                    rec.t, last.t
                )));
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn last_t(&self) -> Option<f64> {
        self.records.last().map(|r| r.t)
    }
}

/// Monitor row for the state `cur`, with `prev` the state one accepted step
/// earlier (`dt = 0` marks the initial record).
pub fn monitors(
    grid: &Grid,
    prev: &Field,
    cur: &Field,
    t: f64,
    dt: f64,
    spec: &NonlinearitySpec,
    psi: &Field,
) -> Result<Record> {
    cur.check_grid(grid)?;
    prev.check_grid(grid)?;
    psi.check_grid(grid)?;
    let g = gradient(grid, cur)?;
    let grad_sup = g.sup_norm();
    let mean = grid.mean_w(cur.values());
    let mut dev_from_mean = 0.0f64;
    for v in cur.values() {
        dev_from_mean = dev_from_mean.max((v - mean).abs());
    }
    let lut = if dt > 0.0 {
        cur.sup_diff(prev) / dt
    } else {
        0.0
    };
    let mean_f = grid.mean_w(spec.eval(grid, &g)?.values());
    let mut sup_h = 0.0f64;
    for a in 0..grid.node_count() {
        let gn = g.norm_at(a);
        sup_h = sup_h.max(psi.values()[a] * gn * gn);
    }
    Ok(Record {
        t,
        max_u: cur.max_value(),
        min_u: cur.min_value(),
        lut,
        grad_sup,
        xnorm_dev: dev_from_mean + grad_sup,
        mean_f,
        sup_h,
        dt,
    })
}

/// Weighted gradient diagnostic `max psi |grad u|^2`; `psi` must be
/// strictly positive.
pub fn bernstein_h(grid: &Grid, u: &Field, psi: &Field) -> Result<f64> {
    u.check_grid(grid)?;
    psi.check_grid(grid)?;
    let min_psi = psi.min_value();
    if !(min_psi > 0.0) {
        return Err(Error::NonPositiveWeight(min_psi));
    }
    let g = gradient(grid, u)?;
    let mut sup = 0.0f64;
    for a in 0..grid.node_count() {
        let gn = g.norm_at(a);
        sup = sup.max(psi.values()[a] * gn * gn);
    }
    Ok(sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CMethod {
    /// Trapezoid quadrature of the recorded source means over [0, t_end].
    Truncate,
    /// Truncation plus a fitted exponential tail beyond t_end.
    TailExtrapolate,
}

/// Limit constant `c = mean(u0) + integral of mean F(grad u)`.
pub fn estimate_c(series: &TimeSeries, u0_mean: f64, lambda: f64, method: CMethod) -> Result<f64> {
    if series.records.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    let mut integral = 0.0;
    for w in series.records.windows(2) {
        integral += 0.5 * (w[1].t - w[0].t) * (w[0].mean_f + w[1].mean_f);
    }
    let mut c = u0_mean + integral;
    if method == CMethod::TailExtrapolate {
        c += tail_beyond_horizon(series, lambda);
    }
    if !c.is_finite() {
        return Err(Error::NonFinite("limit constant"));
    }
    Ok(c)
}

/// Tail `int_{t_end}^inf mean F dt` under an exponential model fitted on the
/// last magnitude decade of |mean F|; falls back to rate `lambda` when the
/// tail is too short to fit.
fn tail_beyond_horizon(series: &TimeSeries, lambda: f64) -> f64 {
    let recs = &series.records;
    let last = recs[recs.len() - 1];
    let f_end = last.mean_f;
    if f_end == 0.0 || f_end.abs() < 1e-300 {
        return 0.0;
    }
    let cutoff = 10.0 * f_end.abs();
    let pts: Vec<(f64, f64)> = recs
        .iter()
        .rev()
        .take_while(|r| r.mean_f.abs() <= cutoff && r.mean_f.abs() > 0.0)
        .map(|r| (r.t, r.mean_f.abs().ln()))
        .collect();
    let rate = if pts.len() >= 4 {
        let (slope, _, _) = least_squares_line(&pts);
        if slope < 0.0 && slope.is_finite() {
            -slope
        } else {
            lambda
        }
    } else {
        lambda
    };
    f_end / rate
}

/// Fitted exponential decay of the deviation from the limit constant.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    /// Constant the deviation was measured against.
    pub c_limit: f64,
    pub rate: f64,
    pub prefactor: f64,
    pub window: (f64, f64),
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub n_points: usize,
}

/// Deviation surrogate of one record against a limit constant.
pub fn deviation(rec: &Record, c: f64) -> f64 {
    (rec.max_u - c).abs().max((rec.min_u - c).abs()) + rec.grad_sup
}

/// Least-squares line on `(t, log dev)` over the band where the deviation
/// sits between the noise floor and the transient top. `band` is
/// `(high, low)` in deviation units; defaults dodge the nonlinear transient
/// (1e-2 of the initial deviation) and the round-off plateau.
pub fn fit_decay(series: &TimeSeries, c: f64, band: Option<(f64, f64)>) -> Result<DecayFit> {
    if series.records.is_empty() {
        return Err(Error::invalid("empty series"));
    }
    let dev0 = deviation(&series.records[0], c);
    let (hi, lo) =
        band.unwrap_or_else(|| (1e-2 * dev0, 1e3 * f64::EPSILON * (1.0 + c.abs() + dev0)));
    let mut pts = Vec::new();
    let mut any_above_floor = false;
    for rec in &series.records {
        let d = deviation(rec, c);
        if d >= lo {
            any_above_floor = true;
        }
        if d >= lo && d <= hi {
            pts.push((rec.t, d.ln()));
        }
    }
    if !any_above_floor {
        return Err(Error::BelowNoiseFloor);
    }
    if pts.len() < 8 {
        return Err(Error::FitWindow {
            found: pts.len(),
            needed: 8,
        });
    }
    let (slope, intercept, residual) = least_squares_line(&pts);
    Ok(DecayFit {
        c_limit: c,
        rate: -slope,
        prefactor: intercept.exp(),
        window: (pts[0].0, pts[pts.len() - 1].0),
        residual,
        n_points: pts.len(),
    })
}

/// Empirical decay prefactor `max_t e^{lambda t} dev(t)` over records above
/// the round-off floor. Zero for a run that never leaves the floor.
pub fn decay_prefactor(series: &TimeSeries, c: f64, lambda: f64) -> f64 {
    if series.records.is_empty() {
        return 0.0;
    }
    let dev0 = deviation(&series.records[0], c);
    let floor = 1e3 * f64::EPSILON * (1.0 + c.abs() + dev0);
    let mut best = 0.0f64;
    for rec in &series.records {
        let d = deviation(rec, c);
        if d >= floor {
            best = best.max((lambda * rec.t).exp() * d);
        }
    }
    best
}

fn least_squares_line(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut ss = 0.0;
    for (x, y) in pts {
        let r = y - (intercept + slope * x);
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

#[derive(Debug, Clone, Copy)]
pub struct ComparisonReport {
    pub pass: bool,
    /// Max over snapshots and nodes of (u_a - u_b).
    pub max_violation: f64,
    pub tol: f64,
}

/// Nodewise order preservation between two runs saved on the same grid at
/// the same times: passes when `u_a <= u_b + tol` everywhere.
pub fn comparison_check(
    series_a: &TimeSeries,
    series_b: &TimeSeries,
    snapshots_a: &[(f64, Field)],
    snapshots_b: &[(f64, Field)],
    tol: f64,
) -> Result<ComparisonReport> {
    if series_a.records.len() != series_b.records.len() || snapshots_a.len() != snapshots_b.len() {
        return Err(Error::MismatchedRuns(
            "different numbers of saved states".into(),
        ));
    }
    let mut violation = f64::NEG_INFINITY;
    for ((ta, ua), (tb, ub)) in snapshots_a.iter().zip(snapshots_b) {
        if (ta - tb).abs() > 1e-9 * (1.0 + ta.abs()) {
            return Err(Error::MismatchedRuns(format!(
                "saved times differ: {ta} vs {tb}"
            )));
        }
        if ua.len() != ub.len() {
            return Err(Error::MismatchedRuns("snapshot sizes differ".into()));
        }
        for (va, vb) in ua.values().iter().zip(ub.values()) {
            violation = violation.max(va - vb);
        }
    }
    Ok(ComparisonReport {
        pass: violation <= tol,
        max_violation: violation,
        tol,
    })
}

/// One named pass/fail row, as written to `verdicts.csv`.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

impl Verdict {
    pub fn leq(name: &str, measured: f64, threshold: f64) -> Verdict {
        Verdict {
            name: name.to_string(),
            pass: measured <= threshold,
            measured,
            threshold,
        }
    }

    pub fn flag(name: &str, pass: bool) -> Verdict {
        Verdict {
            name: name.to_string(),
            pass,
            measured: if pass { 1.0 } else { 0.0 },
            threshold: 1.0,
        }
    }
}

/// Invariant verdicts every saved run must satisfy: the max nonincreasing
/// and the min nondecreasing up to `1e-8 (1 + |u0|_inf)`, the sup norm
/// bounded by the initial one, the discrete |u_t| surrogate nonincreasing
/// (5% slack plus a round-off floor) after the transient `t >= 10 dt_max`,
/// and the running max of the weighted gradient diagnostic flat after `t0`.
pub fn standard_verdicts(
    series: &TimeSeries,
    u0_sup: f64,
    dt_max: f64,
    bernstein_t0: f64,
) -> Vec<Verdict> {
    let tol = 1e-8 * (1.0 + u0_sup);
    let recs = &series.records;
    let mut out = Vec::new();

    let mut max_rise = f64::NEG_INFINITY;
    let mut min_drop = f64::NEG_INFINITY;
    for w in recs.windows(2) {
        max_rise = max_rise.max(w[1].max_u - w[0].max_u);
        min_drop = min_drop.max(w[0].min_u - w[1].min_u);
    }
    if recs.len() < 2 {
        max_rise = 0.0;
        min_drop = 0.0;
    }
    out.push(Verdict::leq("max_nonincreasing", max_rise, tol));
    out.push(Verdict::leq("min_nondecreasing", min_drop, tol));

    let sup_excess = recs
        .iter()
        .map(|r| r.max_u.abs().max(r.min_u.abs()) - u0_sup)
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(Verdict::leq("sup_norm_bounded", sup_excess, tol));

    let mut lut_excess = 0.0f64;
    for w in recs.windows(2) {
        if w[0].t < 10.0 * dt_max || w[0].lut == 0.0 {
            continue;
        }
        let floor = 1e3 * f64::EPSILON * (1.0 + u0_sup) / w[1].dt.max(1e-300);
        lut_excess = lut_excess.max(w[1].lut - 1.05 * w[0].lut - floor);
    }
    out.push(Verdict::leq("ut_nonincreasing", lut_excess, 0.0));

    let tail: Vec<&Record> = recs.iter().filter(|r| r.t >= bernstein_t0).collect();
    let bern = if tail.len() >= 3 {
        let t_mid = bernstein_t0 + 0.5 * (tail[tail.len() - 1].t - bernstein_t0);
        let run_max_all = tail.iter().map(|r| r.sup_h).fold(0.0f64, f64::max);
        let run_max_half = tail
            .iter()
            .filter(|r| r.t <= t_mid)
            .map(|r| r.sup_h)
            .fold(0.0f64, f64::max);
        run_max_all - 1.05 * run_max_half
    } else {
        0.0
    };
    out.push(Verdict::leq("bernstein_running_max", bern, 0.0));

    out
}
