//! Gradient nonlinearities and machine-checkable surrogates of the
//! structural assumptions they claim.
//!
//! Built-in kinds are radial: powers `sign*|z|^p`, exponentials
//! `sign*(exp(|z|^q)-1)`, a piecewise-linear radial table, and the zero map
//! used for linear-oracle runs. The validator checks, on sampled shells:
//! small-gradient domination `|F(z)| <= |z|^p` for `|z| <= delta`, a
//! monotone-growth surrogate of the superlinearity ratio
//! `|F(z)| / (|z| sqrt(1 + |grad F(z)|))` (increasing on the top half of the
//! shells, tenfold overall growth), and the claimed lower bound
//! `F(z) >= c0 |z|^q`. The growth condition is a limit at infinity; finite
//! sampling yields a surrogate verdict, not a proof.

use crate::error::{Error, Result};
use crate::field::{Field, VectorField};

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// F = 0; linear heat flow, used as an exact oracle.
    Zero,
    /// F(z) = sign * |z|^p with p > 1.
    Power { p: f64 },
    /// F(z) = sign * (exp(|z|^q) - 1) with q > 1.
    Exponential { q: f64 },
    /// Piecewise-linear radial profile through (0, 0) and the given points.
    Table { radii: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    pub kind: Kind,
    /// +1 or -1; flips the sign of the radial profile.
    pub sign: f64,
    /// Radius below which the power bound is claimed.
    pub delta: f64,
    /// Claimed lower-bound constant, when any.
    pub c0: Option<f64>,
}

impl NonlinearitySpec {
    pub fn zero() -> Self {
        NonlinearitySpec {
            kind: Kind::Zero,
            sign: 1.0,
            delta: 1.0,
            c0: None,
        }
    }

    pub fn power(p: f64) -> Self {
        NonlinearitySpec {
            kind: Kind::Power { p },
            sign: 1.0,
            delta: 1.0,
            c0: None,
        }
    }

    pub fn exponential(q: f64) -> Self {
        NonlinearitySpec {
            kind: Kind::Exponential { q },
            sign: 1.0,
            delta: 1.0,
            c0: None,
        }
    }

    pub fn table(radii: Vec<f64>, values: Vec<f64>) -> Self {
        NonlinearitySpec {
            kind: Kind::Table { radii, values },
            sign: 1.0,
            delta: 1.0,
            c0: None,
        }
    }

    pub fn with_sign(mut self, sign: f64) -> Self {
        self.sign = sign;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = Some(c0);
        self
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sign != 1.0 && self.sign != -1.0 {
            return Err(Error::invalid(format!(
                "F.sign must be +1 or -1, got {}",
                self.sign
            )));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::invalid(format!(
                "F.delta must be positive, got {}",
                self.delta
            )));
        }
        if let Some(c0) = self.c0 {
            if !(c0 > 0.0) || !c0.is_finite() {
                return Err(Error::invalid(format!("F.c0 must be positive, got {c0}")));
            }
        }
        match &self.kind {
            Kind::Zero => Ok(()),
            Kind::Power { p } => {
                if !(p > &1.0) || !p.is_finite() {
                    return Err(Error::invalid(format!("F.p must exceed 1 (got {p})")));
                }
                Ok(())
            }
            Kind::Exponential { q } => {
                if !(q > &1.0) || !q.is_finite() {
                    return Err(Error::invalid(format!("F.q must exceed 1 (got {q})")));
                }
                Ok(())
            }
            Kind::Table { radii, values } => {
                if radii.is_empty() || radii.len() != values.len() {
                    return Err(Error::invalid(
                        "F.table needs matching nonempty radius/value lists",
                    ));
                }
                let mut prev = 0.0;
                for &r in radii {
                    if !(r > prev) || !r.is_finite() {
                        return Err(Error::invalid(
                            "F.table radii must be strictly increasing and positive",
                        ));
                    }
                    prev = r;
                }
                if !values.iter().all(|v| v.is_finite()) {
                    return Err(Error::invalid("F.table values must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Signed radial profile F(r).
    pub fn radial(&self, r: f64) -> f64 {
        let base = match &self.kind {
            Kind::Zero => 0.0,
            Kind::Power { p } => r.powf(*p),
            Kind::Exponential { q } => r.powf(*q).exp_m1(),
            Kind::Table { radii, values } => table_eval(radii, values, r),
        };
        self.sign * base
    }

    /// Derivative of the signed radial profile.
    pub fn radial_deriv(&self, r: f64) -> f64 {
        let base = match &self.kind {
            Kind::Zero => 0.0,
            Kind::Power { p } => {
                if r == 0.0 {
                    0.0
                } else {
                    p * r.powf(p - 1.0)
                }
            }
            Kind::Exponential { q } => {
                if r == 0.0 {
                    0.0
                } else {
                    q * r.powf(q - 1.0) * r.powf(*q).exp()
                }
            }
            Kind::Table { radii, values } => table_slope(radii, values, r),
        };
        self.sign * base
    }

    /// Nodewise F applied to a gradient field.
    pub fn eval(&self, grid: &crate::grid::Grid, g: &VectorField) -> Result<Field> {
        g.check_grid(grid)?;
        let n = g.node_count();
        let mut out = vec![0.0; n];
        for a in 0..n {
            let v = self.radial(g.norm_at(a));
            if !v.is_finite() {
                return Err(Error::Overflow { node: a });
            }
            out[a] = v;
        }
        Ok(Field::from_raw(grid, out))
    }

    /// Nodewise gradient of F applied to a gradient field; zero at z = 0.
    pub fn eval_grad(&self, grid: &crate::grid::Grid, g: &VectorField) -> Result<VectorField> {
        g.check_grid(grid)?;
        let n = g.node_count();
        let d = g.dim();
        let mut comps = vec![vec![0.0; n]; d];
        for a in 0..n {
            let r = g.norm_at(a);
            if r == 0.0 {
                continue;
            }
            let scale = self.radial_deriv(r) / r;
            if !scale.is_finite() {
                return Err(Error::Overflow { node: a });
            }
            for (axis, comp) in comps.iter_mut().enumerate() {
                comp[a] = scale * g.comp(axis)[a];
            }
        }
        Ok(VectorField::from_comps(grid, comps))
    }

    /// Check the claimed assumptions on sampled shells. Radii must be
    /// increasing and should span from below `delta` to well above it.
    pub fn validate_assumptions(&self, shell_radii: &[f64]) -> Result<AssumptionReport> {
        if shell_radii.len() < 4 {
            return Err(Error::invalid("need at least 4 shell radii"));
        }
        let mut prev = 0.0;
        for &r in shell_radii {
            if !(r > prev) || !r.is_finite() {
                return Err(Error::invalid(
                    "shell radii must be positive and increasing",
                ));
            }
            prev = r;
        }
        if shell_radii[0] > self.delta {
            return Err(Error::invalid(format!(
                "shell radii must reach below delta = {}, first is {}",
                self.delta, shell_radii[0]
            )));
        }
        let p = match &self.kind {
            Kind::Power { p } => *p,
            _ => 2.0,
        };
        // lower-bound exponent: the kind's own growth exponent
        let q = match &self.kind {
            Kind::Power { p } => *p,
            Kind::Exponential { q } => *q,
            _ => 2.0,
        };

        // (a) |F| <= |z|^p for |z| <= delta
        let mut ass3_max: f64 = 0.0;
        for &r in shell_radii.iter().filter(|&&r| r <= self.delta) {
            for z in directions(r) {
                let f = self.point_value(&z);
                ass3_max = ass3_max.max(f.abs() / r.powf(p));
            }
        }
        let ass3 = CheckResult {
            pass: ass3_max <= 1.0 + 1e-9,
            measured: ass3_max,
            threshold: 1.0,
        };

        // (b) growth surrogate: min over the shell of |F|/(|z| sqrt(1+|grad F|))
        let ratios: Vec<f64> = shell_radii
            .iter()
            .map(|&r| {
                directions(r)
                    .into_iter()
                    .map(|z| {
                        let f = self.point_value(&z);
                        let gf = self.point_grad_norm(&z);
                        if !f.is_finite() || !gf.is_finite() {
                            return f64::INFINITY;
                        }
                        f.abs() / (r * (1.0 + gf).sqrt())
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let half = ratios.len() / 2;
        let monotone_top = ratios[half..]
            .windows(2)
            .all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        let growth = ratios[ratios.len() - 1] / ratios[0].max(f64::MIN_POSITIVE);
        let ass4 = CheckResult {
            pass: monotone_top && growth >= 10.0,
            measured: growth,
            threshold: 10.0,
        };

        // (c) F(z) >= c0 |z|^q where claimed; for sign = -1 the claim is
        // F(z) <= -c0 |z|^q, equivalent to the bound on the reflected flow.
        // Margins are measured relative to the bound so the equality case
        // passes at every shell scale.
        let ass5 = self.c0.map(|c0| {
            let mut worst = f64::INFINITY;
            for &r in shell_radii {
                let bound = c0 * r.powf(q);
                for z in directions(r) {
                    let f = self.sign * self.point_value(&z);
                    worst = worst.min((f - bound) / (1.0 + bound));
                }
            }
            CheckResult {
                pass: worst >= -1e-12,
                measured: worst,
                threshold: 0.0,
            }
        });

        let pass = ass3.pass && ass4.pass && ass5.as_ref().map_or(true, |c| c.pass);
        Ok(AssumptionReport {
            ass3,
            ass4,
            ass4_monotone_top: monotone_top,
            ass5,
            pass,
        })
    }

    fn point_value(&self, z: &[f64; 2]) -> f64 {
        self.radial((z[0] * z[0] + z[1] * z[1]).sqrt())
    }

    fn point_grad_norm(&self, z: &[f64; 2]) -> f64 {
        let r = (z[0] * z[0] + z[1] * z[1]).sqrt();
        self.radial_deriv(r).abs()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckResult {
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub ass3: CheckResult,
    pub ass4: CheckResult,
    pub ass4_monotone_top: bool,
    pub ass5: Option<CheckResult>,
    pub pass: bool,
}

fn directions(r: f64) -> Vec<[f64; 2]> {
    const NDIR: usize = 16;
    (0..NDIR)
        .map(|k| {
            let th = 2.0 * std::f64::consts::PI * k as f64 / NDIR as f64;
            [r * th.cos(), r * th.sin()]
        })
        .collect()
}

fn table_eval(radii: &[f64], values: &[f64], r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let mut r0 = 0.0;
    let mut v0 = 0.0;
    for (&ri, &vi) in radii.iter().zip(values) {
        if r <= ri {
            return v0 + (vi - v0) * (r - r0) / (ri - r0);
        }
        r0 = ri;
        v0 = vi;
    }
    // extrapolate with the last slope
    let last = radii.len() - 1;
    let slope = if radii.len() == 1 {
        values[0] / radii[0]
    } else {
        (values[last] - values[last - 1]) / (radii[last] - radii[last - 1])
    };
    values[last] + slope * (r - radii[last])
}

fn table_slope(radii: &[f64], values: &[f64], r: f64) -> f64 {
    if r == 0.0 {
        return 0.0;
    }
    let mut r0 = 0.0;
    let mut v0 = 0.0;
    for (&ri, &vi) in radii.iter().zip(values) {
        if r <= ri {
            return (vi - v0) / (ri - r0);
        }
        r0 = ri;
        v0 = vi;
    }
    let last = radii.len() - 1;
    if radii.len() == 1 {
        values[0] / radii[0]
    } else {
        (values[last] - values[last - 1]) / (radii[last] - radii[last - 1])
    }
}
