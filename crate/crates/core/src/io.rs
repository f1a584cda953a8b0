//! File formats: moment JSON (`{"moments": [...]}`) and distribution CSV
//! (header `x,p`, contiguous ascending states).

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{validate_moments, FiniteDistribution, MomentSequence, SupportWindow};

/// Mass tolerance accepted when reading a distribution file.
pub const CSV_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentFile {
    moments: Vec<f64>,
}

/// Parses and validates a moment file.
pub fn read_moments(reader: impl Read) -> Result<MomentSequence> {
    let file: MomentFile = serde_json::from_reader(reader)
        .map_err(|e| Error::Parse(format!("moment file: {e}")))?;
    validate_moments(&file.moments)
}

pub fn write_moments(mut writer: impl Write, mu: &MomentSequence) -> Result<()> {
    let file = MomentFile {
        moments: mu.values().to_vec(),
    };
    serde_json::to_writer_pretty(&mut writer, &file).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(writer)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Row {
    x: u64,
    p: f64,
}

/// Reads an `x,p` table; rows must be contiguous and ascending and the mass
/// must be one within [`CSV_MASS_TOLERANCE`]. The table is renormalized.
pub fn read_distribution(reader: impl Read) -> Result<FiniteDistribution> {
    let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| Error::Parse(format!("distribution file: {e}")))?;
    if headers != vec!["x", "p"] {
        return Err(Error::Parse(format!(
            "distribution file: expected header \"x,p\", found {:?}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let rows: Vec<Row> = csv
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Parse(format!("distribution file row {}: {e}", i + 1))))
        .collect::<Result<_>>()?;
    let first = rows
        .first()
        .ok_or_else(|| Error::Parse("distribution file: no rows".into()))?
        .x;
    for (i, row) in rows.iter().enumerate() {
        if row.x != first + i as u64 {
            return Err(Error::Parse(format!(
                "distribution file row {}: state {} breaks the contiguous ascending order",
                i + 1,
                row.x
            )));
        }
    }
    let probs: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > CSV_MASS_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}, not 1 within {CSV_MASS_TOLERANCE:e}"
        )));
    }
    let window = SupportWindow::new(first, first + rows.len() as u64 - 1)?;
    FiniteDistribution::normalized(window, probs)
}

/// Writes an `x,p` table with 17 significant digits.
pub fn write_distribution_csv(mut writer: impl Write, dist: &FiniteDistribution) -> Result<()> {
    writeln!(writer, "x,p")?;
    for (x, p) in dist.iter() {
        writeln!(writer, "{x},{p:.16e}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DistributionJson<'a> {
    x: Vec<u64>,
    p: &'a [f64],
}

pub fn write_distribution_json(mut writer: impl Write, dist: &FiniteDistribution) -> Result<()> {
    let body = DistributionJson {
        x: dist.window().states().collect(),
        p: dist.probs(),
    };
    serde_json::to_writer(&mut writer, &body).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(writer)?;
    Ok(())
}
