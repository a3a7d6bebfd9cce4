//! Semi-implicit time integration: backward-Euler diffusion through the
//! shifted solve, explicit gradient source, CFL-limited adaptive step.
//!
//! One step solves `(I - dt*Lap) u_new = u + dt F(grad u)`. The explicit
//! part behaves like transport with speed `|grad F(grad u)|`, so the step is
//! capped at `cfl * h / max(eps, |grad F|_inf)`. Constants are fixed points:
//! the gradient of a constant vanishes node-by-node, `F(0) = 0`, and the
//! shifted solve maps constants to themselves. A run records monitor rows
//! every `save_stride` accepted steps and stops at the horizon, on solver
//! failure, or when `|grad u|_inf` crosses the blow-up guard.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::hash::{Hash, Hasher};

use crate::asymptotics::{monitors, TimeSeries};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::nonlinearity::NonlinearitySpec;
use crate::operators::{gradient, solve_helmholtz, solve_robin_aux};

const CFL_VELOCITY_FLOOR: f64 = 1e-8;

/// Initial datum catalog; amplitudes scale the sup norm.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDatum {
    /// Product of half-period cosines over the bounding box.
    Cosine { amplitude: f64 },
    /// Compactly supported smooth bump; width and center default to the
    /// domain centroid and 0.3 of the smaller extent.
    Bump {
        amplitude: f64,
        width: Option<f64>,
        center: Option<[f64; 2]>,
    },
    /// Low-pass filtered seeded noise, rescaled to the requested amplitude.
    RandomSmooth { amplitude: f64, seed: u64 },
    /// Explicit nodal values (programmatic runs only).
    Custom { values: Vec<f64> },
}

impl InitialDatum {
    pub fn amplitude(&self) -> Option<f64> {
        match self {
            InitialDatum::Cosine { amplitude }
            | InitialDatum::Bump { amplitude, .. }
            | InitialDatum::RandomSmooth { amplitude, .. } => Some(*amplitude),
            InitialDatum::Custom { .. } => None,
        }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Result<InitialDatum> {
        match self {
            InitialDatum::Cosine { .. } => Ok(InitialDatum::Cosine { amplitude }),
            InitialDatum::Bump { width, center, .. } => Ok(InitialDatum::Bump {
                amplitude,
                width: *width,
                center: *center,
            }),
            InitialDatum::RandomSmooth { seed, .. } => Ok(InitialDatum::RandomSmooth {
                amplitude,
                seed: *seed,
            }),
            InitialDatum::Custom { .. } => Err(Error::invalid(
                "custom initial data has no amplitude to sweep",
            )),
        }
    }
}

/// Build the nodal initial state.
pub fn build_initial(grid: &Grid, datum: &InitialDatum) -> Result<Field> {
    match datum {
        InitialDatum::Cosine { amplitude } => {
            let ext = grid.extents();
            let pi = std::f64::consts::PI;
            Ok(Field::from_fn(grid, |x, y| {
                let mut v = *amplitude * (pi * x / ext[0]).cos();
                if grid.dim() == 2 {
                    v *= (pi * y / ext[1]).cos();
                }
                v
            }))
        }
        InitialDatum::Bump {
            amplitude,
            width,
            center,
        } => {
            let ext = grid.extents();
            let center = center.unwrap_or_else(|| {
                let mut cx = 0.0;
                let mut cy = 0.0;
                for a in 0..grid.node_count() {
                    let p = grid.node_pos(a);
                    cx += grid.weight(a) * p[0];
                    cy += grid.weight(a) * p[1];
                }
                [cx / grid.measure(), cy / grid.measure()]
            });
            let min_ext = if grid.dim() == 2 {
                ext[0].min(ext[1])
            } else {
                ext[0]
            };
            let w = width.unwrap_or(0.3 * min_ext);
            if !(w > 0.0) {
                return Err(Error::invalid(format!(
                    "bump width must be positive, got {w}"
                )));
            }
            Ok(Field::from_fn(grid, |x, y| {
                let mut r2 = ((x - center[0]) / w).powi(2);
                if grid.dim() == 2 {
                    r2 += ((y - center[1]) / w).powi(2);
                }
                if r2 < 1.0 {
                    amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                } else {
                    0.0
                }
            }))
        }
        InitialDatum::RandomSmooth { amplitude, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let raw: Vec<f64> = (0..grid.node_count())
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let mut field = Field::from_values(grid, raw)?;
            let alpha = (4.0 * grid.h()).powi(2);
            for _ in 0..4 {
                field = solve_helmholtz(grid, alpha, &field)?;
            }
            let sup = field.sup_norm();
            if sup > 0.0 {
                let scale = amplitude / sup;
                for v in field.values_mut() {
                    *v *= scale;
                }
            }
            Ok(field)
        }
        InitialDatum::Custom { values } => Field::from_values(grid, values.clone()),
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub nonlinearity: NonlinearitySpec,
    pub initial: InitialDatum,
    pub t_end: f64,
    pub dt_max: f64,
    pub cfl_factor: f64,
    pub save_stride: usize,
    pub blowup_guard: f64,
    pub robin_k: f64,
}

impl RunConfig {
    pub fn new(nonlinearity: NonlinearitySpec, initial: InitialDatum, t_end: f64) -> RunConfig {
        RunConfig {
            nonlinearity,
            initial,
            t_end,
            dt_max: 1e-3,
            cfl_factor: 0.25,
            save_stride: 10,
            blowup_guard: 1e6,
            robin_k: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.nonlinearity.validate()?;
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid(format!(
                "run.t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.dt_max > 0.0) || !self.dt_max.is_finite() {
            return Err(Error::invalid(format!(
                "run.dt_max must be positive, got {}",
                self.dt_max
            )));
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(Error::invalid(format!(
                "run.cfl must lie in (0, 1], got {}",
                self.cfl_factor
            )));
        }
        if self.save_stride == 0 {
            return Err(Error::invalid("run.save_stride must be at least 1"));
        }
        if !(self.blowup_guard > 0.0) {
            return Err(Error::invalid(format!(
                "run.blowup_guard must be positive, got {}",
                self.blowup_guard
            )));
        }
        if !(self.robin_k > 0.0) {
            return Err(Error::invalid(format!(
                "run.robin_k must be positive, got {}",
                self.robin_k
            )));
        }
        Ok(())
    }

    pub fn hash_value(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        match &self.nonlinearity.kind {
            crate::nonlinearity::Kind::Zero => 0u8.hash(&mut h),
            crate::nonlinearity::Kind::Power { p } => {
                1u8.hash(&mut h);
                p.to_bits().hash(&mut h);
            }
            crate::nonlinearity::Kind::Exponential { q } => {
                2u8.hash(&mut h);
                q.to_bits().hash(&mut h);
            }
            crate::nonlinearity::Kind::Table { radii, values } => {
                3u8.hash(&mut h);
                for v in radii.iter().chain(values) {
                    v.to_bits().hash(&mut h);
                }
            }
        }
        self.nonlinearity.sign.to_bits().hash(&mut h);
        self.nonlinearity.delta.to_bits().hash(&mut h);
        self.nonlinearity
            .c0
            .unwrap_or(f64::NAN)
            .to_bits()
            .hash(&mut h);
        match &self.initial {
            InitialDatum::Cosine { amplitude } => {
                10u8.hash(&mut h);
                amplitude.to_bits().hash(&mut h);
            }
            InitialDatum::Bump {
                amplitude,
                width,
                center,
            } => {
                11u8.hash(&mut h);
                amplitude.to_bits().hash(&mut h);
                width.unwrap_or(f64::NAN).to_bits().hash(&mut h);
                let c = center.unwrap_or([f64::NAN; 2]);
                c[0].to_bits().hash(&mut h);
                c[1].to_bits().hash(&mut h);
            }
            InitialDatum::RandomSmooth { amplitude, seed } => {
                12u8.hash(&mut h);
                amplitude.to_bits().hash(&mut h);
                seed.hash(&mut h);
            }
            InitialDatum::Custom { values } => {
                13u8.hash(&mut h);
                for v in values {
                    v.to_bits().hash(&mut h);
                }
            }
        }
        self.t_end.to_bits().hash(&mut h);
        self.dt_max.to_bits().hash(&mut h);
        self.cfl_factor.to_bits().hash(&mut h);
        self.save_stride.hash(&mut h);
        self.blowup_guard.to_bits().hash(&mut h);
        self.robin_k.to_bits().hash(&mut h);
        h.finish()
    }
}

#[derive(Debug, Clone)]
pub struct RunState {
    pub t: f64,
    pub u: Field,
    pub dt_last: f64,
    pub step_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    GradientGuard,
    SolverFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::GradientGuard => "gradient-guard",
            RunStatus::SolverFailure => "solver-failure",
        }
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub series: TimeSeries,
    pub snapshots: Vec<(f64, Field)>,
    pub state: RunState,
    pub status: RunStatus,
    pub psi: Field,
    pub u0_sup: f64,
    pub u0_mean: f64,
}

/// CFL-limited proposal `min(dt_max, cfl * h / max(eps, |grad F(grad u)|))`.
pub fn adapt_dt(grid: &Grid, state: &RunState, config: &RunConfig) -> Result<f64> {
    let g = gradient(grid, &state.u)?;
    let speed = config.nonlinearity.eval_grad(grid, &g)?.sup_norm();
    Ok(proposed_dt(grid.h(), speed, config))
}

fn proposed_dt(h: f64, speed: f64, config: &RunConfig) -> f64 {
    config
        .dt_max
        .min(config.cfl_factor * h / speed.max(CFL_VELOCITY_FLOOR))
}

/// One semi-implicit step of size `dt`.
pub fn step_imex(grid: &Grid, state: &RunState, dt: f64, config: &RunConfig) -> Result<RunState> {
    let g = gradient(grid, &state.u)?;
    let f = config.nonlinearity.eval(grid, &g)?;
    let mut rhs = state.u.clone();
    for (r, fv) in rhs.values_mut().iter_mut().zip(f.values()) {
        *r += dt * fv;
    }
    let u_new = solve_helmholtz(grid, dt, &rhs)?;
    Ok(RunState {
        t: state.t + dt,
        u: u_new,
        dt_last: dt,
        step_index: state.step_index + 1,
    })
}

/// March to the horizon, recording monitor rows every `save_stride` steps
/// and at the final state. Numerical failures terminate the run with a
/// status instead of an error.
pub fn run(grid: &Grid, config: &RunConfig) -> Result<RunResult> {
    config.validate()?;
    let u0 = build_initial(grid, &config.initial)?;
    let psi = solve_robin_aux(grid, config.robin_k)?;
    let u0_sup = u0.sup_norm();
    let u0_mean = u0.weighted_mean(grid)?;

    let mut series = TimeSeries {
        records: Vec::new(),
        config_hash: config.hash_value(),
        grid_id: grid.id(),
    };
    let mut snapshots = Vec::new();
    let rec0 = monitors(grid, &u0, &u0, 0.0, 0.0, &config.nonlinearity, &psi)?;
    series.push(rec0)?;
    snapshots.push((0.0, u0.clone()));

    let mut u = u0;
    let mut grad = gradient(grid, &u)?;
    let mut t = 0.0;
    let mut step = 0usize;
    let mut dt_last = 0.0;
    let mut status = RunStatus::Completed;
    let horizon = config.t_end * (1.0 - 1e-14);

    while t < horizon {
        let speed = match config.nonlinearity.eval_grad(grid, &grad) {
            Ok(g) => g.sup_norm(),
            Err(_) => {
                status = RunStatus::SolverFailure;
                break;
            }
        };
        let mut dt = proposed_dt(grid.h(), speed, config);
        if t + dt > config.t_end {
            dt = config.t_end - t;
        }
        if dt <= 0.0 {
            break;
        }
        let f = match config.nonlinearity.eval(grid, &grad) {
            Ok(f) => f,
            Err(_) => {
                status = RunStatus::SolverFailure;
                break;
            }
        };
        let mut rhs = u.clone();
        for (r, fv) in rhs.values_mut().iter_mut().zip(f.values()) {
            *r += dt * fv;
        }
        let u_new = match solve_helmholtz(grid, dt, &rhs) {
            Ok(v) => v,
            Err(_) => {
                status = RunStatus::SolverFailure;
                break;
            }
        };
        let grad_new = gradient(grid, &u_new)?;
        t += dt;
        step += 1;
        dt_last = dt;

        let guard_hit = grad_new.sup_norm() > config.blowup_guard;
        let at_end = t >= horizon;
        if guard_hit || at_end || step % config.save_stride == 0 {
            match monitors(grid, &u, &u_new, t, dt, &config.nonlinearity, &psi) {
                Ok(rec) => {
                    series.push(rec)?;
                    snapshots.push((t, u_new.clone()));
                }
                Err(_) => {
                    status = RunStatus::SolverFailure;
                    break;
                }
            }
        }
        u = u_new;
        grad = grad_new;
        if guard_hit {
            status = RunStatus::GradientGuard;
            break;
        }
    }

    Ok(RunResult {
        series,
        snapshots,
        state: RunState {
            t,
            u,
            dt_last,
            step_index: step,
        },
        status,
        psi,
        u0_sup,
        u0_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_interval;
    use crate::spectral::closed_form_second_eigenvalue;
    use std::f64::consts::PI;

    #[test]
    fn dt_examples() {
        let g = build_interval(1.0, 101).unwrap();
        let cfg = RunConfig {
            dt_max: 0.5,
            ..RunConfig::new(
                NonlinearitySpec::power(2.0),
                InitialDatum::Cosine { amplitude: 1.0 },
                1.0,
            )
        };
        // constant state: gradient vanishes, dt = dt_max
        let state = RunState {
            t: 0.0,
            u: Field::constant(&g, 3.0),
            dt_last: 0.0,
            step_index: 0,
        };
        assert_eq!(adapt_dt(&g, &state, &cfg).unwrap(), 0.5);

        // |grad u| = 10 interior, grad F = 2z so speed 20: dt = 0.25*0.01/20
        let ramp = Field::from_fn(&g, |x, _| 10.0 * x);
        let state = RunState {
            t: 0.0,
            u: ramp,
            dt_last: 0.0,
            step_index: 0,
        };
        let dt = adapt_dt(&g, &state, &cfg).unwrap();
        assert!((dt - 1.25e-4).abs() <= 1e-12 * dt);
    }

    #[test]
    fn dt_monotone_in_speed() {
        let cfg = RunConfig::new(
            NonlinearitySpec::power(2.0),
            InitialDatum::Cosine { amplitude: 1.0 },
            1.0,
        );
        let mut prev = f64::INFINITY;
        for speed in [0.0, 1.0, 5.0, 50.0, 1e4] {
            let dt = proposed_dt(0.01, speed, &cfg);
            assert!(dt <= prev);
            prev = dt;
        }
    }

    #[test]
    fn constants_are_fixed_points() {
        let g = build_interval(1.0, 101).unwrap();
        let cfg = RunConfig::new(
            NonlinearitySpec::power(3.0),
            InitialDatum::Cosine { amplitude: 0.0 },
            1.0,
        );
        let state = RunState {
            t: 0.0,
            u: Field::constant(&g, -2.7),
            dt_last: 0.0,
            step_index: 0,
        };
        let next = step_imex(&g, &state, 1e-3, &cfg).unwrap();
        assert!(next.u.sup_diff(&state.u) <= 1e-12);
    }

    #[test]
    fn heat_step_matches_eigen_identity() {
        let g = build_interval(1.0, 101).unwrap();
        let cfg = RunConfig::new(
            NonlinearitySpec::zero(),
            InitialDatum::Cosine { amplitude: 1.0 },
            1.0,
        );
        let u = Field::from_fn(&g, |x, _| (PI * x).cos());
        let state = RunState {
            t: 0.0,
            u: u.clone(),
            dt_last: 0.0,
            step_index: 0,
        };
        let dt = 1e-3;
        let next = step_imex(&g, &state, dt, &cfg).unwrap();
        let mu = closed_form_second_eigenvalue(&g).unwrap();
        let mut err = 0.0f64;
        for a in 0..g.node_count() {
            err = err.max((next.u.values()[a] - u.values()[a] / (1.0 + dt * mu)).abs());
        }
        assert!(err <= 1e-9, "one-step eigen error {err}");
    }

    #[test]
    fn cole_hopf_step_comparison() {
        // exp(u) of the p=2 flow follows the linear heat flow of exp(u0),
        // up to O(dt + h^2)
        let g = build_interval(1.0, 201).unwrap();
        let cfg = RunConfig {
            dt_max: 1e-3,
            save_stride: 1000,
            ..RunConfig::new(
                NonlinearitySpec::power(2.0),
                InitialDatum::Cosine { amplitude: 0.5 },
                0.5,
            )
        };
        let result = run(&g, &cfg).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        let w0 = {
            let u0 = build_initial(&g, &cfg.initial).unwrap();
            Field::from_values(&g, u0.values().iter().map(|v| v.exp()).collect()).unwrap()
        };
        let w_end = crate::spectral::heat_semigroup_apply(&g, &w0, result.state.t).unwrap();
        let mut err = 0.0f64;
        for a in 0..g.node_count() {
            err = err.max((result.state.u.values()[a].exp() - w_end.values()[a]).abs());
        }
        assert!(err <= 1e-2, "transform mismatch {err}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = build_interval(1.0, 51).unwrap();
        let cfg = RunConfig::new(
            NonlinearitySpec::power(3.0),
            InitialDatum::Cosine { amplitude: 0.0 },
            0.5,
        );
        let result = run(&g, &cfg).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        assert_eq!(result.state.u.sup_norm(), 0.0);
    }

    #[test]
    fn guard_terminates_run() {
        let g = build_interval(1.0, 101).unwrap();
        let cfg = RunConfig {
            blowup_guard: 0.5,
            ..RunConfig::new(
                NonlinearitySpec::power(3.0),
                InitialDatum::Cosine { amplitude: 1.0 },
                1.0,
            )
        };
        let result = run(&g, &cfg).unwrap();
        assert_eq!(result.status, RunStatus::GradientGuard);
        assert!(result.state.t < 1.0);
    }

    #[test]
    fn translation_invariance() {
        let g = build_interval(1.0, 101).unwrap();
        let base = RunConfig {
            dt_max: 5e-4,
            save_stride: 20,
            ..RunConfig::new(
                NonlinearitySpec::power(3.0),
                InitialDatum::Cosine { amplitude: 0.2 },
                0.1,
            )
        };
        let res_a = run(&g, &base).unwrap();
        let u0 = build_initial(&g, &base.initial).unwrap();
        let shifted = RunConfig {
            initial: InitialDatum::Custom {
                values: u0.values().iter().map(|v| v - 0.1).collect(),
            },
            ..base
        };
        let res_b = run(&g, &shifted).unwrap();
        assert_eq!(res_a.snapshots.len(), res_b.snapshots.len());
        for ((_, ua), (_, ub)) in res_a.snapshots.iter().zip(&res_b.snapshots) {
            for (va, vb) in ua.values().iter().zip(ub.values()) {
                assert!((va - 0.1 - vb).abs() <= 1e-8, "shift broke: {va} vs {vb}");
            }
        }
    }

    #[test]
    fn exponential_source_run_decays() {
        let g = build_interval(1.0, 101).unwrap();
        let cfg = RunConfig {
            dt_max: 5e-4,
            save_stride: 20,
            ..RunConfig::new(
                NonlinearitySpec::exponential(2.0),
                InitialDatum::Cosine { amplitude: 0.2 },
                0.5,
            )
        };
        let result = run(&g, &cfg).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        let first = result.series.records.first().unwrap();
        let last = result.series.records.last().unwrap();
        assert!(last.grad_sup < 0.1 * first.grad_sup);
        assert!(last.max_u <= first.max_u + 1e-10);
    }

    #[test]
    fn oracle_mode_limit_is_the_initial_mean() {
        let g = build_interval(1.0, 101).unwrap();
        let cfg = RunConfig {
            dt_max: 1e-3,
            save_stride: 10,
            ..RunConfig::new(
                NonlinearitySpec::zero(),
                InitialDatum::Cosine { amplitude: 0.7 },
                0.5,
            )
        };
        let result = run(&g, &cfg).unwrap();
        // the source mean is identically zero, so the integral adds nothing
        let c = crate::asymptotics::estimate_c(
            &result.series,
            result.u0_mean,
            1.0,
            crate::asymptotics::CMethod::TailExtrapolate,
        )
        .unwrap();
        assert_eq!(c, result.u0_mean);
    }

    #[test]
    fn random_smooth_is_deterministic() {
        let g = build_interval(1.0, 101).unwrap();
        let a = build_initial(
            &g,
            &InitialDatum::RandomSmooth {
                amplitude: 0.3,
                seed: 11,
            },
        )
        .unwrap();
        let b = build_initial(
            &g,
            &InitialDatum::RandomSmooth {
                amplitude: 0.3,
                seed: 11,
            },
        )
        .unwrap();
        assert_eq!(a.values(), b.values());
        assert!((a.sup_norm() - 0.3).abs() <= 1e-12);
    }

    #[test]
    fn bump_is_compact_with_requested_peak() {
        let g = build_interval(1.0, 101).unwrap();
        let datum = InitialDatum::Bump {
            amplitude: 0.4,
            width: Some(0.2),
            center: Some([0.5, 0.0]),
        };
        let u = build_initial(&g, &datum).unwrap();
        let center = g.node_at(50, 0).unwrap();
        assert!((u.values()[center] - 0.4).abs() <= 1e-15);
        assert_eq!(u.values()[0], 0.0);
        assert_eq!(u.values()[100], 0.0);
        assert!(u.values().iter().all(|&v| (0.0..=0.4).contains(&v)));

        // default center and width stay inside the domain
        let d = InitialDatum::Bump {
            amplitude: 0.1,
            width: None,
            center: None,
        };
        let u = build_initial(&g, &d).unwrap();
        assert!(u.sup_norm() > 0.0 && u.sup_norm() <= 0.1 + 1e-15);
    }
}
