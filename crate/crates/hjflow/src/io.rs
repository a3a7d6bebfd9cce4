//! Text artifacts: monitor CSVs, snapshot files, verdict tables, run
//! metadata, and the gnuplot script. Floats are written with 17 significant
//! digits so outputs are byte-stable and round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::asymptotics::{Record, TimeSeries, Verdict};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

pub const SERIES_HEADER: &str = "t,M,m,Lut,grad_sup,xnorm_dev,meanF,sup_h,dt";
pub const SUMMARY_HEADER: &str = "run_id,status,lambda,rate,rate_rel_err,c,prefactor,sup_grad_max";

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn parse_float(tok: &str) -> Result<f64> {
    if tok == "nan" {
        return Ok(f64::NAN);
    }
    tok.parse::<f64>()
        .map_err(|_| Error::invalid(format!("bad float `{tok}` in data file")))
}

pub fn write_series_csv(path: &Path, series: &TimeSeries) -> Result<()> {
    let mut out = String::with_capacity(series.records.len() * 200 + 64);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in &series.records {
        let cols = [
            r.t,
            r.max_u,
            r.min_u,
            r.lut,
            r.grad_sup,
            r.xnorm_dev,
            r.mean_f,
            r.sup_h,
            r.dt,
        ];
        let row: Vec<String> = cols.iter().map(|&v| fmt_float(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<TimeSeries> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SERIES_HEADER => {}
        _ => {
            return Err(Error::invalid(format!(
                "{}: missing series header",
                path.display()
            )))
        }
    }
    let mut series = TimeSeries::default();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 9 {
            return Err(Error::invalid(format!(
                "{}: expected 9 columns, got {}",
                path.display(),
                cols.len()
            )));
        }
        let v: Vec<f64> = cols.iter().map(|t| parse_float(t)).collect::<Result<_>>()?;
        series.push(Record {
            t: v[0],
            max_u: v[1],
            min_u: v[2],
            lut: v[3],
            grad_sup: v[4],
            xnorm_dev: v[5],
            mean_f: v[6],
            sup_h: v[7],
            dt: v[8],
        })?;
    }
    Ok(series)
}

/// Snapshot: header `kind nx ny h`, row-major mask bits for masked grids,
/// then one node value per line in row-major node order.
pub fn write_snapshot(path: &Path, grid: &Grid, field: &Field) -> Result<()> {
    field.check_grid(grid)?;
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {} {}\n",
        grid.kind().as_str(),
        grid.nx(),
        grid.ny(),
        fmt_float(grid.h())
    ));
    if grid.kind() == crate::grid::GridKind::Masked {
        let (cx, cy) = grid.cells();
        for j in 0..cy {
            let row: String = (0..cx)
                .map(|i| {
                    if grid.cell_mask()[j * cx + i] {
                        '1'
                    } else {
                        '0'
                    }
                })
                .collect();
            out.push_str(&row);
            out.push('\n');
        }
    }
    for v in field.values() {
        out.push_str(&fmt_float(*v));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a snapshot written by `write_snapshot` against the grid it came
/// from; the header and mask must match.
pub fn read_snapshot(path: &Path, grid: &Grid) -> Result<Field> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid("empty snapshot"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4
        || parts[0] != grid.kind().as_str()
        || parts[1] != grid.nx().to_string()
        || parts[2] != grid.ny().to_string()
    {
        return Err(Error::invalid(format!(
            "snapshot header `{header}` does not match grid"
        )));
    }
    if grid.kind() == crate::grid::GridKind::Masked {
        let (cx, cy) = grid.cells();
        for j in 0..cy {
            let row = lines
                .next()
                .ok_or_else(|| Error::invalid("snapshot mask truncated"))?;
            for (i, ch) in row.chars().enumerate() {
                let expect = grid.cell_mask()[j * cx + i];
                if (ch == '1') != expect {
                    return Err(Error::invalid("snapshot mask does not match grid"));
                }
            }
        }
    }
    let mut values = Vec::with_capacity(grid.node_count());
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        values.push(parse_float(line.trim())?);
    }
    Field::from_values(grid, values)
}

pub fn write_verdicts(path: &Path, verdicts: &[Verdict]) -> Result<()> {
    let mut out = String::from("name,pass,measured,threshold\n");
    for v in verdicts {
        out.push_str(&format!(
            "{},{},{},{}\n",
            v.name,
            v.pass,
            fmt_float(v.measured),
            fmt_float(v.threshold)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Summary row, NaN rendered as `nan`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub run_id: String,
    pub status: String,
    pub lambda: f64,
    pub rate: f64,
    pub rate_rel_err: f64,
    pub c: f64,
    pub prefactor: f64,
    pub sup_grad_max: f64,
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.run_id,
            r.status,
            fmt_float(r.lambda),
            fmt_float(r.rate),
            fmt_float(r.rate_rel_err),
            fmt_float(r.c),
            fmt_float(r.prefactor),
            fmt_float(r.sup_grad_max)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Flat `key = value` metadata next to each run's series.
pub fn write_meta(path: &Path, pairs: &[(&str, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<std::collections::HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = std::collections::HashMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

pub fn meta_f64(map: &std::collections::HashMap<String, String>, key: &str) -> Result<f64> {
    let v = map
        .get(key)
        .ok_or_else(|| Error::invalid(format!("meta file is missing `{key}`")))?;
    parse_float(v)
}

/// Gnuplot script over the emitted CSVs: deviation decay on a log axis and
/// the extremal envelopes.
pub fn write_plots_script(path: &Path, run_ids: &[String]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "set datafile separator ','")?;
    writeln!(f, "set key outside")?;
    writeln!(f, "set xlabel 't'")?;
    writeln!(f, "set logscale y")?;
    writeln!(f, "set ylabel 'deviation (xnorm)'")?;
    let devs: Vec<String> = run_ids
        .iter()
        .map(|id| format!("'{id}/series.csv' using 1:6 with lines title '{id}'"))
        .collect();
    writeln!(f, "plot {}", devs.join(", \\\n     "))?;
    writeln!(f, "pause -1 'deviation decay; press enter'")?;
    writeln!(f, "unset logscale y")?;
    writeln!(f, "set ylabel 'max u / min u'")?;
    let envs: Vec<String> = run_ids
        .iter()
        .flat_map(|id| {
            [
                format!("'{id}/series.csv' using 1:2 with lines title '{id} max'"),
                format!("'{id}/series.csv' using 1:3 with lines title '{id} min'"),
            ]
        })
        .collect();
    writeln!(f, "plot {}", envs.join(", \\\n     "))?;
    writeln!(f, "pause -1 'extremal envelopes; press enter'")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_union_rectangles, Rect};

    #[test]
    fn series_roundtrip() {
        let dir = std::env::temp_dir().join(format!("hjflow-io-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let mut series = TimeSeries::default();
        for k in 0..5 {
            series
                .push(Record {
                    t: 0.1 * k as f64 + 0.05,
                    max_u: 1.0 / (k + 1) as f64,
                    min_u: -0.3,
                    lut: 0.01,
                    grad_sup: 2.0,
                    xnorm_dev: 2.5,
                    mean_f: 1e-3,
                    sup_h: 4.0,
                    dt: 1e-3,
                })
                .unwrap();
        }
        let path = dir.join("series.csv");
        write_series_csv(&path, &series).unwrap();
        let back = read_series_csv(&path).unwrap();
        assert_eq!(back.records.len(), 5);
        for (a, b) in series.records.iter().zip(&back.records) {
            assert_eq!(a.t, b.t);
            assert_eq!(a.max_u, b.max_u);
            assert_eq!(a.mean_f, b.mean_f);
        }
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn snapshot_roundtrip_masked() {
        let dir = std::env::temp_dir().join(format!("hjflow-snap-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let g = build_union_rectangles(
            &[Rect::new(0.0, 0.0, 1.0, 1.0), Rect::new(1.0, 0.0, 2.0, 0.5)],
            0.25,
        )
        .unwrap();
        let f = Field::from_fn(&g, |x, y| (x * 1.37 - y * 0.11).sin());
        let path = dir.join("final.snap");
        write_snapshot(&path, &g, &f).unwrap();
        let back = read_snapshot(&path, &g).unwrap();
        assert_eq!(back.values(), f.values());
        fs::remove_dir_all(&dir).ok();
    }
}
