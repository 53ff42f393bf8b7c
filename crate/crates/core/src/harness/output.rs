use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::RunRecord;

pub const CSV_HEADER: [&str; 6] = ["step", "seed", "loss", "grad_norm_sq", "lr", "state_elems"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::invalid(format!(
                "unknown format `{s}`; expected csv or json"
            ))),
        }
    }
}

/// Shortest round-trip text; scientific notation outside `[1e-5, 1e16)`.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Header row plus one row per record, `\n`-terminated. Floats use the
/// shortest representation that round-trips (at most 17 significant digits).
pub fn write_records_csv<W: Write>(out: W, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            r.seed.to_string(),
            format_f64(r.loss),
            format_f64(r.grad_norm_sq),
            format_f64(r.lr),
            r.state_elems.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_json<W: Write, S: Serialize>(mut out: W, value: &S) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(format_f64(0.25), "0.25");
        assert_eq!(format_f64(1e-300), "1e-300");
        assert_eq!(format_f64(-2.5e20), "-2.5e20");
        assert_eq!(format_f64(1e-5), "0.00001");
        let v = 0.1 + 0.2;
        assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn csv_layout() {
        let recs = vec![RunRecord {
            step: 1,
            seed: 7,
            loss: 0.1,
            grad_norm_sq: 1.0 / 3.0,
            lr: 1e-3,
            state_elems: 12,
            wall_time: 0.5,
        }];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "step,seed,loss,grad_norm_sq,lr,state_elems\n1,7,0.1,0.3333333333333333,0.001,12\n"
        );
        let parsed: f64 = text
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .nth(3)
            .unwrap()
            .parse()
            .unwrap();
        assert_eq!(parsed, 1.0 / 3.0);
    }
}
