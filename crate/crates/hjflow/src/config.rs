//! Flat `key = value` experiment configs.
//!
//! Lines hold one assignment each; `#` starts a comment. Keys are
//! dot-namespaced (`grid.n`, `F.p`, `run.t_end`). Unknown and duplicate
//! keys are hard errors so a typo cannot silently change an experiment.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::{build_interval, build_rectangle, build_union_rectangles, Grid, Rect};
use crate::nonlinearity::{Kind, NonlinearitySpec};
use crate::stepper::{InitialDatum, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Single,
    SweepKappa,
    Semigroup,
    Eig,
    OracleColeHopf,
    PicardCrosscheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Single => "single",
            ExperimentKind::SweepKappa => "sweep-kappa",
            ExperimentKind::Semigroup => "semigroup",
            ExperimentKind::Eig => "eig",
            ExperimentKind::OracleColeHopf => "oracle-colehopf",
            ExperimentKind::PicardCrosscheck => "picard-crosscheck",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Interval {
        length: f64,
        n: usize,
    },
    Rectangle {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
    },
    Union {
        rects: Vec<Rect>,
        h: f64,
    },
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        match self {
            GridSpec::Interval { length, n } => build_interval(*length, *n),
            GridSpec::Rectangle { lx, ly, nx, ny } => build_rectangle(*lx, *ly, *nx, *ny),
            GridSpec::Union { rects, h } => build_union_rectangles(rects, *h),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitParams {
    /// Optional explicit fit band (high, low) in deviation units.
    pub band: Option<(f64, f64)>,
    /// When set, a verdict row requires |rate - lambda|/lambda below this.
    pub rate_tol_rel: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SemigroupParams {
    pub times: Vec<f64>,
    pub n_samples: usize,
    pub refine: bool,
}

#[derive(Debug, Clone)]
pub struct PicardParams {
    pub time_nodes: usize,
    pub max_iters: usize,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct ColeHopfParams {
    pub tol_c: f64,
    pub tol_u: f64,
}

#[derive(Debug, Clone)]
pub struct RunEntry {
    pub id: String,
    pub config: RunConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentManifest {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub grid_spec: GridSpec,
    pub runs: Vec<RunEntry>,
    pub fit: FitParams,
    pub tail_extrapolate: bool,
    pub semigroup: SemigroupParams,
    pub picard: PicardParams,
    pub colehopf: ColeHopfParams,
}

struct Entry {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

struct ConfigMap {
    entries: Vec<Entry>,
}

impl ConfigMap {
    fn parse(text: &str) -> Result<ConfigMap> {
        let mut entries: Vec<Entry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            };
            let trimmed = stripped.trim();
            if trimmed.is_empty() {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("expected `key = value`, got `{trimmed}`"),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(Error::ConfigParse {
                    line,
                    msg: "empty key".into(),
                });
            }
            if value.is_empty() {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("empty value for `{key}`"),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("duplicate key `{key}` (first set on line {})", prev.line),
                });
            }
            entries.push(Entry {
                key,
                value,
                line,
                used: false,
            });
        }
        Ok(ConfigMap { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        for e in self.entries.iter_mut() {
            if e.key == key {
                e.used = true;
                return Some((e.value.clone(), e.line));
            }
        }
        None
    }

    fn take_f64(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => parse_f64(&v, key, line),
        }
    }

    fn take_usize(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<usize>().map_err(|_| Error::ConfigParse {
                line,
                msg: format!("`{key}` expects an unsigned integer, got `{v}`"),
            }),
        }
    }

    fn take_u64(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => v.parse::<u64>().map_err(|_| Error::ConfigParse {
                line,
                msg: format!("`{key}` expects an unsigned integer, got `{v}`"),
            }),
        }
    }

    fn take_bool(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => match v.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::ConfigParse {
                    line,
                    msg: format!("`{key}` expects true or false, got `{v}`"),
                }),
            },
        }
    }

    fn finish(self) -> Result<()> {
        for e in &self.entries {
            if !e.used {
                return Err(Error::UnknownKey {
                    line: e.line,
                    key: e.key.clone(),
                });
            }
        }
        Ok(())
    }
}

fn parse_f64(v: &str, key: &str, line: usize) -> Result<f64> {
    v.parse::<f64>().map_err(|_| Error::ConfigParse {
        line,
        msg: format!("`{key}` expects a number, got `{v}`"),
    })
}

fn parse_f64_list(v: &str, key: &str, line: usize) -> Result<Vec<f64>> {
    v.split(',')
        .map(|tok| parse_f64(tok.trim(), key, line))
        .collect()
}

/// Parse a config text into a fully validated manifest with defaults filled.
pub fn parse_config(text: &str) -> Result<ExperimentManifest> {
    let mut map = ConfigMap::parse(text)?;

    let kind = match map.take("experiment") {
        None => ExperimentKind::Single,
        Some((v, line)) => match v.as_str() {
            "single" => ExperimentKind::Single,
            "sweep-kappa" => ExperimentKind::SweepKappa,
            "semigroup" => ExperimentKind::Semigroup,
            "eig" => ExperimentKind::Eig,
            "oracle-colehopf" => ExperimentKind::OracleColeHopf,
            "picard-crosscheck" => ExperimentKind::PicardCrosscheck,
            _ => {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("unknown experiment kind `{v}`"),
                })
            }
        },
    };

    let output_dir = PathBuf::from(
        map.take("output_dir")
            .map(|(v, _)| v)
            .unwrap_or_else(|| "hjflow-out".to_string()),
    );
    let seed = map.take_u64("seed", 0)?;

    let grid_spec = parse_grid(&mut map)?;
    let nonlinearity = parse_nonlinearity(&mut map)?;
    let initial = parse_initial(&mut map, seed)?;

    let t_end = map.take_f64("run.t_end", 1.0)?;
    let dt_max = map.take_f64("run.dt_max", 1e-3)?;
    let cfl_factor = map.take_f64("run.cfl", 0.25)?;
    let save_stride = map.take_usize("run.save_stride", 10)?;
    let blowup_guard = map.take_f64("run.blowup_guard", 1e6)?;
    let robin_k = map.take_f64("run.robin_k", 1.0)?;

    let base = RunConfig {
        nonlinearity,
        initial,
        t_end,
        dt_max,
        cfl_factor,
        save_stride,
        blowup_guard,
        robin_k,
    };
    base.validate()?;

    let band_hi = map.take("fit.band_hi");
    let band_lo = map.take("fit.band_lo");
    let band = match (band_hi, band_lo) {
        (None, None) => None,
        (Some((hi, lh)), Some((lo, ll))) => Some((
            parse_f64(&hi, "fit.band_hi", lh)?,
            parse_f64(&lo, "fit.band_lo", ll)?,
        )),
        (Some((_, line)), None) | (None, Some((_, line))) => {
            return Err(Error::ConfigParse {
                line,
                msg: "fit.band_hi and fit.band_lo must be set together".into(),
            })
        }
    };
    let rate_tol_rel = match map.take("fit.rate_tol_rel") {
        None => None,
        Some((v, line)) => Some(parse_f64(&v, "fit.rate_tol_rel", line)?),
    };
    let fit = FitParams { band, rate_tol_rel };

    let tail_extrapolate = match map.take("c.method") {
        None => true,
        Some((v, line)) => match v.as_str() {
            "tail-extrapolate" => true,
            "truncate" => false,
            _ => {
                return Err(Error::ConfigParse {
                    line,
                    msg: format!("c.method expects truncate or tail-extrapolate, got `{v}`"),
                })
            }
        },
    };

    let semigroup = SemigroupParams {
        times: match map.take("semigroup.times") {
            None => vec![1e-4, 1e-3, 1e-2, 0.1, 1.0],
            Some((v, line)) => parse_f64_list(&v, "semigroup.times", line)?,
        },
        n_samples: map.take_usize("semigroup.samples", 20)?,
        refine: map.take_bool("semigroup.refine", true)?,
    };

    let picard = PicardParams {
        time_nodes: map.take_usize("picard.time_nodes", 16)?,
        max_iters: map.take_usize("picard.max_iters", 20)?,
        tol: map.take_f64("picard.tol", 5e-3)?,
    };

    let colehopf = ColeHopfParams {
        tol_c: map.take_f64("colehopf.tol_c", 1e-3)?,
        tol_u: map.take_f64("colehopf.tol_u", 2e-3)?,
    };

    let sweep_amplitudes = match map.take("sweep.amplitudes") {
        None => None,
        Some((v, line)) => Some(parse_f64_list(&v, "sweep.amplitudes", line)?),
    };

    map.finish()?;

    let runs = match kind {
        ExperimentKind::SweepKappa => {
            let amps = sweep_amplitudes
                .ok_or_else(|| Error::invalid("sweep-kappa requires sweep.amplitudes"))?;
            if amps.is_empty() {
                return Err(Error::invalid("sweep.amplitudes must be nonempty"));
            }
            let mut runs = Vec::with_capacity(amps.len());
            for &a in &amps {
                let cfg = RunConfig {
                    initial: base.initial.with_amplitude(a)?,
                    ..base.clone()
                };
                cfg.validate()?;
                runs.push(RunEntry {
                    id: format!("amp{a}"),
                    config: cfg,
                });
            }
            runs
        }
        ExperimentKind::Semigroup | ExperimentKind::Eig => Vec::new(),
        _ => {
            if sweep_amplitudes.is_some() {
                return Err(Error::invalid(format!(
                    "sweep.amplitudes only applies to sweep-kappa, not {}",
                    kind.as_str()
                )));
            }
            vec![RunEntry {
                id: "run".to_string(),
                config: base.clone(),
            }]
        }
    };

    let mut seen = std::collections::HashSet::new();
    for r in &runs {
        if !seen.insert(r.id.clone()) {
            return Err(Error::invalid(format!("duplicate run id `{}`", r.id)));
        }
    }

    if kind == ExperimentKind::OracleColeHopf {
        match &base.nonlinearity.kind {
            Kind::Power { p } if (*p - 2.0).abs() < 1e-12 && base.nonlinearity.sign == 1.0 => {}
            _ => {
                return Err(Error::invalid(
                    "oracle-colehopf requires F.kind = power with F.p = 2 and F.sign = 1",
                ))
            }
        }
    }

    Ok(ExperimentManifest {
        kind,
        output_dir,
        seed,
        grid_spec,
        runs,
        fit,
        tail_extrapolate,
        semigroup,
        picard,
        colehopf,
    })
}

fn parse_grid(map: &mut ConfigMap) -> Result<GridSpec> {
    let kind_tok = map.take("grid.kind");
    let (kind_str, kind_line) = match &kind_tok {
        Some((v, l)) => (v.clone(), *l),
        None => ("interval".to_string(), 0),
    };
    match kind_str.as_str() {
        "interval" => Ok(GridSpec::Interval {
            length: map.take_f64("grid.length", 1.0)?,
            n: map.take_usize("grid.n", 201)?,
        }),
        "rectangle" => Ok(GridSpec::Rectangle {
            lx: map.take_f64("grid.lx", 1.0)?,
            ly: map.take_f64("grid.ly", 1.0)?,
            nx: map.take_usize("grid.nx", 101)?,
            ny: map.take_usize("grid.ny", 101)?,
        }),
        "union" => {
            let h = map.take_f64("grid.h", 0.05)?;
            let Some((spec, line)) = map.take("grid.rects") else {
                return Err(Error::invalid("grid.kind = union requires grid.rects"));
            };
            let mut rects = Vec::new();
            for part in spec.split(';') {
                let nums = parse_f64_list(part, "grid.rects", line)?;
                if nums.len() != 4 {
                    return Err(Error::ConfigParse {
                        line,
                        msg: format!("grid.rects entries need 4 numbers, got {}", nums.len()),
                    });
                }
                rects.push(Rect::new(nums[0], nums[1], nums[2], nums[3]));
            }
            Ok(GridSpec::Union { rects, h })
        }
        other => Err(Error::ConfigParse {
            line: kind_line,
            msg: format!("unknown grid.kind `{other}`"),
        }),
    }
}

fn parse_nonlinearity(map: &mut ConfigMap) -> Result<NonlinearitySpec> {
    let kind_tok = map.take("F.kind");
    let (kind_str, kind_line) = match &kind_tok {
        Some((v, l)) => (v.clone(), *l),
        None => ("power".to_string(), 0),
    };
    let kind = match kind_str.as_str() {
        "zero" => Kind::Zero,
        "power" => Kind::Power {
            p: map.take_f64("F.p", 2.0)?,
        },
        "exponential" => Kind::Exponential {
            q: map.take_f64("F.q", 2.0)?,
        },
        "table" => {
            let Some((spec, line)) = map.take("F.table") else {
                return Err(Error::invalid("F.kind = table requires F.table"));
            };
            let mut radii = Vec::new();
            let mut values = Vec::new();
            for part in spec.split(';') {
                let Some((r, v)) = part.split_once(':') else {
                    return Err(Error::ConfigParse {
                        line,
                        msg: format!("F.table entries are `radius:value`, got `{part}`"),
                    });
                };
                radii.push(parse_f64(r.trim(), "F.table", line)?);
                values.push(parse_f64(v.trim(), "F.table", line)?);
            }
            Kind::Table { radii, values }
        }
        other => {
            return Err(Error::ConfigParse {
                line: kind_line,
                msg: format!("unknown F.kind `{other}`"),
            });
        }
    };
    let spec = NonlinearitySpec {
        kind,
        sign: map.take_f64("F.sign", 1.0)?,
        delta: map.take_f64("F.delta", 1.0)?,
        c0: match map.take("F.c0") {
            None => None,
            Some((v, line)) => Some(parse_f64(&v, "F.c0", line)?),
        },
    };
    spec.validate()?;
    Ok(spec)
}

fn parse_initial(map: &mut ConfigMap, seed: u64) -> Result<InitialDatum> {
    let kind_tok = map.take("u0.kind");
    let (kind_str, kind_line) = match &kind_tok {
        Some((v, l)) => (v.clone(), *l),
        None => ("cosine".to_string(), 0),
    };
    let amplitude = map.take_f64("u0.amplitude", 0.1)?;
    match kind_str.as_str() {
        "cosine" => Ok(InitialDatum::Cosine { amplitude }),
        "bump" => {
            let width = match map.take("u0.width") {
                None => None,
                Some((v, line)) => Some(parse_f64(&v, "u0.width", line)?),
            };
            let cx = map.take("u0.center_x");
            let cy = map.take("u0.center_y");
            let center = match (cx, cy) {
                (None, None) => None,
                (Some((x, lx)), Some((y, ly))) => Some([
                    parse_f64(&x, "u0.center_x", lx)?,
                    parse_f64(&y, "u0.center_y", ly)?,
                ]),
                (Some((_, line)), None) | (None, Some((_, line))) => {
                    return Err(Error::ConfigParse {
                        line,
                        msg: "u0.center_x and u0.center_y must be set together".into(),
                    })
                }
            };
            Ok(InitialDatum::Bump {
                amplitude,
                width,
                center,
            })
        }
        "random-smooth" => Ok(InitialDatum::RandomSmooth {
            amplitude,
            seed: map.take_u64("u0.seed", seed)?,
        }),
        other => Err(Error::ConfigParse {
            line: kind_line,
            msg: format!("unknown u0.kind `{other}`"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_single_config() {
        let m = parse_config("run.t_end = 2.0\n").unwrap();
        assert_eq!(m.kind, ExperimentKind::Single);
        assert_eq!(m.runs.len(), 1);
        assert_eq!(m.runs[0].id, "run");
        assert_eq!(m.runs[0].config.t_end, 2.0);
        assert_eq!(m.runs[0].config.save_stride, 10);
        assert!(matches!(m.grid_spec, GridSpec::Interval { n: 201, .. }));
    }

    #[test]
    fn small_power_exponent_rejected() {
        let err = parse_config("F.kind = power\nF.p = 0.5\n").unwrap_err();
        assert!(err.to_string().contains("must exceed 1"), "{err}");
    }

    #[test]
    fn sweep_expands_amplitudes() {
        let text =
            "experiment = sweep-kappa\nsweep.amplitudes = 0.05, 0.1, 0.2, 0.4, 0.8\nF.p = 3\n";
        let m = parse_config(text).unwrap();
        assert_eq!(m.runs.len(), 5);
        assert_eq!(m.runs[0].id, "amp0.05");
        assert_eq!(m.runs[4].id, "amp0.8");
        for (r, a) in m.runs.iter().zip([0.05, 0.1, 0.2, 0.4, 0.8]) {
            assert_eq!(r.config.initial.amplitude(), Some(a));
        }
    }

    #[test]
    fn degenerate_single_amplitude_sweep() {
        let m = parse_config("experiment = sweep-kappa\nsweep.amplitudes = 0.1\n").unwrap();
        assert_eq!(m.runs.len(), 1);
        assert_eq!(m.runs[0].id, "amp0.1");
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("run.t_end = 1\nrun.dtmax = 0.1\n").unwrap_err();
        match err {
            Error::UnknownKey { line, key } => {
                assert_eq!(line, 2);
                assert_eq!(key, "run.dtmax");
            }
            other => panic!("expected unknown key, got {other}"),
        }
    }

    #[test]
    fn syntax_error_reports_line() {
        let err = parse_config("run.t_end = 1\nnot an assignment\n").unwrap_err();
        match err {
            Error::ConfigParse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = parse_config("run.t_end = 1\nrun.t_end = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn union_grid_parses() {
        let text = "grid.kind = union\ngrid.h = 0.25\ngrid.rects = 0,0,1,1; 1,0,2,0.5\n";
        let m = parse_config(text).unwrap();
        match &m.grid_spec {
            GridSpec::Union { rects, h } => {
                assert_eq!(rects.len(), 2);
                assert_eq!(*h, 0.25);
            }
            other => panic!("expected union, got {other:?}"),
        }
        m.grid_spec.build().unwrap();
    }

    #[test]
    fn colehopf_requires_square_power() {
        let err =
            parse_config("experiment = oracle-colehopf\nF.kind = power\nF.p = 3\n").unwrap_err();
        assert!(err.to_string().contains("oracle-colehopf"));
        parse_config("experiment = oracle-colehopf\nF.kind = power\nF.p = 2\n").unwrap();
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let text = "# a comment\n\nrun.t_end = 1.5 # trailing\n";
        let m = parse_config(text).unwrap();
        assert_eq!(m.runs[0].config.t_end, 1.5);
    }
}
