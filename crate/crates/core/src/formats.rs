//! CSV readers and writers for panels, forecasts and evaluation reports.
//!
//! Every file is UTF-8 with a header row. Columns are located by header
//! name, so their order in the file does not matter. Values are written as
//! decimals with 12 significant digits, which makes write -> read -> write
//! byte-stable.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::evaluation::{ErrorRecord, MseRecord, SeriesMseRecord, SkillRecord};
use crate::hierarchy::TimeSeriesPanel;
use crate::period::Quarter;

/// Significant digits used for every floating-point value written.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `v` with [`SIGNIFICANT_DIGITS`] significant digits, trailing
/// zeros removed. Very large or small magnitudes use exponent notation.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v);
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    let s = if (-6..=11).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let (mantissa, e) = sci.split_once('e').expect("exponent");
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn write_csv<W: Write>(w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(w);
    let wrap = |source| Error::Csv {
        path: "<output>".into(),
        source,
    };
    writer.write_record(header).map_err(wrap)?;
    for row in rows {
        writer.write_record(&row).map_err(wrap)?;
    }
    writer.flush()?;
    Ok(())
}

/// Rows of `required` columns with their 1-based line numbers.
fn read_csv<R: Read>(r: R, context: &str, required: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let wrap = |source| Error::Csv {
        path: context.to_string(),
        source,
    };
    let headers = reader.headers().map_err(wrap)?.clone();
    let idx = required
        .iter()
        .map(|name| {
            headers.iter().position(|h| h == *name).ok_or_else(|| Error::Parse {
                context: context.to_string(),
                line: 1,
                message: format!("missing column `{name}`"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(wrap)?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((
            line,
            idx.iter().map(|&i| rec.get(i).unwrap_or("").to_string()).collect(),
        ));
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(s: &str, context: &str, line: u64, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        context: context.to_string(),
        line,
        message: format!("bad {what} `{s}`"),
    })
}

fn parse_value(s: &str, context: &str, line: u64) -> Result<f64> {
    let v: f64 = parse_field(s, context, line, "value")?;
    if !v.is_finite() {
        return Err(Error::Parse {
            context: context.to_string(),
            line,
            message: format!("non-finite value `{s}`"),
        });
    }
    Ok(v)
}

/// Reads long-format `series,period,value` rows.
pub fn read_long_from<R: Read>(r: R, context: &str) -> Result<Vec<(String, Quarter, f64)>> {
    read_csv(r, context, &["series", "period", "value"])?
        .into_iter()
        .map(|(line, f)| {
            Ok((
                f[0].clone(),
                parse_field(&f[1], context, line, "period")?,
                parse_value(&f[2], context, line)?,
            ))
        })
        .collect()
}

pub fn read_long(path: &Path) -> Result<Vec<(String, Quarter, f64)>> {
    read_long_from(open(path)?, &path.display().to_string())
}

pub fn write_long_to<W: Write>(w: W, records: &[(String, Quarter, f64)]) -> Result<()> {
    write_csv(
        w,
        &["series", "period", "value"],
        records
            .iter()
            .map(|(s, q, v)| vec![s.clone(), q.to_string(), format_value(*v)]),
    )
}

pub fn write_long(path: &Path, records: &[(String, Quarter, f64)]) -> Result<()> {
    write_long_to(create(path)?, records)
}

pub fn read_panel(path: &Path) -> Result<TimeSeriesPanel> {
    TimeSeriesPanel::from_long(read_long(path)?)
}

/// Writes a panel in long format, series-major.
pub fn write_panel(path: &Path, panel: &TimeSeriesPanel) -> Result<()> {
    let mut records = Vec::with_capacity(panel.values().len());
    for (j, s) in panel.series_names().iter().enumerate() {
        for (t, &q) in panel.times().iter().enumerate() {
            records.push((s.clone(), q, panel.values()[(t, j)]));
        }
    }
    write_long(path, &records)
}

/// Reads `series,horizon,value` rows.
pub fn read_forecasts_from<R: Read>(r: R, context: &str) -> Result<Vec<(String, usize, f64)>> {
    read_csv(r, context, &["series", "horizon", "value"])?
        .into_iter()
        .map(|(line, f)| {
            Ok((
                f[0].clone(),
                parse_field(&f[1], context, line, "horizon")?,
                parse_value(&f[2], context, line)?,
            ))
        })
        .collect()
}

pub fn read_forecasts(path: &Path) -> Result<Vec<(String, usize, f64)>> {
    read_forecasts_from(open(path)?, &path.display().to_string())
}

pub fn write_forecasts_to<W: Write>(w: W, records: &[(String, usize, f64)]) -> Result<()> {
    write_csv(
        w,
        &["series", "horizon", "value"],
        records
            .iter()
            .map(|(s, h, v)| vec![s.clone(), h.to_string(), format_value(*v)]),
    )
}

pub fn write_forecasts(path: &Path, records: &[(String, usize, f64)]) -> Result<()> {
    write_forecasts_to(create(path)?, records)
}

/// Writes `horizon,max_violation`.
pub fn write_violations(path: &Path, violations: &[f64]) -> Result<()> {
    write_csv(
        create(path)?,
        &["horizon", "max_violation"],
        violations
            .iter()
            .enumerate()
            .map(|(h, v)| vec![(h + 1).to_string(), format_value(*v)]),
    )
}

pub fn read_violations(path: &Path) -> Result<Vec<(usize, f64)>> {
    let ctx = path.display().to_string();
    read_csv(open(path)?, &ctx, &["horizon", "max_violation"])?
        .into_iter()
        .map(|(line, f)| {
            Ok((
                parse_field(&f[0], &ctx, line, "horizon")?,
                parse_value(&f[1], &ctx, line)?,
            ))
        })
        .collect()
}

pub fn write_mse(path: &Path, records: &[MseRecord]) -> Result<()> {
    write_csv(
        create(path)?,
        &["method", "horizon", "group", "mse"],
        records.iter().map(|r| {
            vec![
                r.method.clone(),
                r.horizon.to_string(),
                r.group.clone(),
                format_value(r.mse),
            ]
        }),
    )
}

pub fn read_mse(path: &Path) -> Result<Vec<MseRecord>> {
    let ctx = path.display().to_string();
    read_csv(open(path)?, &ctx, &["method", "horizon", "group", "mse"])?
        .into_iter()
        .map(|(line, f)| {
            Ok(MseRecord {
                method: f[0].clone(),
                horizon: parse_field(&f[1], &ctx, line, "horizon")?,
                group: f[2].clone(),
                mse: parse_value(&f[3], &ctx, line)?,
            })
        })
        .collect()
}

pub fn write_series_mse(path: &Path, records: &[SeriesMseRecord]) -> Result<()> {
    write_csv(
        create(path)?,
        &["method", "horizon", "series", "mse"],
        records.iter().map(|r| {
            vec![
                r.method.clone(),
                r.horizon.to_string(),
                r.series.clone(),
                format_value(r.mse),
            ]
        }),
    )
}

/// Undefined skill scores are written as `NA`.
pub fn write_skill(path: &Path, records: &[SkillRecord]) -> Result<()> {
    write_csv(
        create(path)?,
        &["method", "horizon", "group", "skill_pct"],
        records.iter().map(|r| {
            vec![
                r.method.clone(),
                r.horizon.to_string(),
                r.group.clone(),
                r.skill_pct.map_or_else(|| "NA".to_string(), format_value),
            ]
        }),
    )
}

pub fn read_skill(path: &Path) -> Result<Vec<SkillRecord>> {
    let ctx = path.display().to_string();
    read_csv(open(path)?, &ctx, &["method", "horizon", "group", "skill_pct"])?
        .into_iter()
        .map(|(line, f)| {
            Ok(SkillRecord {
                method: f[0].clone(),
                horizon: parse_field(&f[1], &ctx, line, "horizon")?,
                group: f[2].clone(),
                skill_pct: if f[3] == "NA" {
                    None
                } else {
                    Some(parse_value(&f[3], &ctx, line)?)
                },
            })
        })
        .collect()
}

pub fn write_errors(path: &Path, records: &[ErrorRecord]) -> Result<()> {
    write_csv(
        create(path)?,
        &["window", "origin", "horizon", "method", "series", "error"],
        records.iter().map(|r| {
            vec![
                r.window.to_string(),
                r.origin.to_string(),
                r.horizon.to_string(),
                r.method.clone(),
                r.series.clone(),
                format_value(r.error),
            ]
        }),
    )
}

pub fn read_errors(path: &Path) -> Result<Vec<ErrorRecord>> {
    let ctx = path.display().to_string();
    read_csv(
        open(path)?,
        &ctx,
        &["window", "origin", "horizon", "method", "series", "error"],
    )?
    .into_iter()
    .map(|(line, f)| {
        Ok(ErrorRecord {
            window: parse_field(&f[0], &ctx, line, "window")?,
            origin: parse_field(&f[1], &ctx, line, "origin")?,
            horizon: parse_field(&f[2], &ctx, line, "horizon")?,
            method: f[3].clone(),
            series: f[4].clone(),
            error: parse_value(&f[5], &ctx, line)?,
        })
    })
    .collect()
}

/// Dense matrix with the series names as header and one row per series.
pub fn write_matrix(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut header = vec!["series"];
    header.extend(names.iter().map(String::as_str));
    write_csv(
        create(path)?,
        &header,
        (0..m.nrows()).map(|i| {
            std::iter::once(names[i].clone())
                .chain(m.row(i).iter().map(|v| format_value(*v)))
                .collect()
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn value_format_examples() {
        assert_eq!(format_value(0.0), "0");
        assert_eq!(format_value(-0.0), "0");
        assert_eq!(format_value(1.0), "1");
        assert_eq!(format_value(11.0 / 3.0), "3.66666666667");
        assert_eq!(format_value(-123456.789), "-123456.789");
        assert_eq!(format_value(1e20), "1e20");
        assert_eq!(format_value(1.5e-9), "1.5e-9");
        assert_eq!(format_value(99999999999.99999), "100000000000");
    }

    proptest! {
        #[test]
        fn formatted_values_are_stable(v in prop::num::f64::NORMAL | prop::num::f64::ZERO) {
            let once = format_value(v);
            let parsed: f64 = once.parse().unwrap();
            prop_assert_eq!(format_value(parsed), once);
            prop_assert!((parsed - v).abs() <= 1e-11 * v.abs());
        }
    }

    #[test]
    fn long_roundtrip_and_column_order() {
        let text = "value,series,period\n1.5,a,2000Q1\n2,a,2000Q2\n";
        let recs = read_long_from(text.as_bytes(), "mem").unwrap();
        assert_eq!(recs[0], ("a".to_string(), "2000Q1".parse().unwrap(), 1.5));
        let mut out = Vec::new();
        write_long_to(&mut out, &recs).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "series,period,value\na,2000Q1,1.5\na,2000Q2,2\n"
        );
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = "series,horizon,value\na,1,1.0\na,x,2.0\n";
        match read_forecasts_from(text.as_bytes(), "f.csv") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "series,value\na,1\n";
        assert!(matches!(
            read_forecasts_from(text.as_bytes(), "f.csv"),
            Err(Error::Parse { .. })
        ));
        let text = "series,horizon,value\na,1,NaN\n";
        assert!(read_forecasts_from(text.as_bytes(), "f.csv").is_err());
    }
}
