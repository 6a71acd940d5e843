//! Report writers. Every output starts with the artifact version and the
//! configuration that produced it.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use knperc::explorer::EstimateWithCI;
use knperc::Variant;
use serde::Serialize;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const CSV_HEADER: [&str; 8] = ["variant", "d", "k", "n", "trials", "seed", "estimate", "stderr"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Lossless float text: 17 significant digits.
pub fn float17(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot write {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    knperc: &'a str,
    config: &'a C,
    report: &'a R,
}

pub fn write_json<C: Serialize, R: Serialize>(out: &mut dyn Write, config: &C, report: &R) -> Result<()> {
    let env = Envelope {
        knperc: VERSION,
        config,
        report,
    };
    serde_json::to_writer_pretty(&mut *out, &env)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// One estimator row.
pub struct EstimateRow {
    pub variant: String,
    pub d: usize,
    pub k: usize,
    pub n: u32,
    pub estimate: EstimateWithCI,
}

impl EstimateRow {
    pub fn new(variant: Variant, d: usize, k: usize, n: u32, estimate: EstimateWithCI) -> Self {
        Self {
            variant: variant.tag().to_string(),
            d,
            k,
            n,
            estimate,
        }
    }
}

#[derive(Serialize)]
struct JsonRow<'a> {
    variant: &'a str,
    d: usize,
    k: usize,
    n: u32,
    trials: u64,
    seed: u64,
    estimate: f64,
    stderr: f64,
}

pub fn write_estimates<C: Serialize>(out: &mut dyn Write, format: Format, config: &C, rows: &[EstimateRow]) -> Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "# knperc {VERSION} config={}", serde_json::to_string(config)?)?;
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut *out);
            w.write_record(CSV_HEADER)?;
            for r in rows {
                w.write_record([
                    r.variant.clone(),
                    r.d.to_string(),
                    r.k.to_string(),
                    r.n.to_string(),
                    r.estimate.trials.to_string(),
                    r.estimate.master_seed.to_string(),
                    float17(r.estimate.point),
                    float17(r.estimate.stderr),
                ])?;
            }
            w.flush()?;
            drop(w);
            out.flush()?;
            Ok(())
        }
        Format::Json => {
            let rows: Vec<JsonRow> = rows
                .iter()
                .map(|r| JsonRow {
                    variant: &r.variant,
                    d: r.d,
                    k: r.k,
                    n: r.n,
                    trials: r.estimate.trials,
                    seed: r.estimate.master_seed,
                    estimate: r.estimate.point,
                    stderr: r.estimate.stderr,
                })
                .collect();
            write_json(out, config, &rows)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 0.9823, 1e-300, 12345.678, 0.0, 1.0] {
            let s = float17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(float17(0.5), "5.0000000000000000e-1");
    }
}
