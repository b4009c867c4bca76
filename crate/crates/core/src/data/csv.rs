use std::io::{BufRead, Write};

use super::{DataError, ExperimentalDataset, TemperatureBatch, TemperatureProfile, TimePoint};
use crate::scalar::Scalar;

const EXPERIMENT_HEADER: &str = "temperature_c,time_h,length_mm";
const PROFILE_HEADER: &str = "time_h,temp_c";
const LENGTHS_HEADER: &str = "length_mm";

/// Numbered, non-empty data lines after a mandatory header.
fn data_rows<R: BufRead>(reader: R, header: &str) -> Result<Vec<(usize, String)>, DataError> {
    let mut lines = reader.lines().enumerate();
    let found = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                let line = line.trim_start_matches('\u{feff}').trim();
                if !line.is_empty() {
                    break line.to_string();
                }
            }
            None => return Err(DataError::EmptyDataset),
        }
    };
    let normalized: String = found.split(',').map(str::trim).collect::<Vec<_>>().join(",");
    if normalized != header {
        return Err(DataError::HeaderMismatch {
            expected: header.to_string(),
            found,
        });
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if !line.is_empty() {
            rows.push((idx + 1, line.to_string()));
        }
    }
    Ok(rows)
}

fn fields<const N: usize>(line_no: usize, line: &str) -> Result<[f64; N], DataError> {
    let parts: Vec<&str> = line.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(DataError::MalformedRow {
            line: line_no,
            reason: format!("expected {N} fields, found {}", parts.len()),
        });
    }
    let mut out = [0.0; N];
    for (slot, part) in out.iter_mut().zip(&parts) {
        let v: f64 = part.parse().map_err(|_| DataError::MalformedRow {
            line: line_no,
            reason: format!("`{part}` is not a number"),
        })?;
        if !v.is_finite() {
            return Err(DataError::MalformedRow {
                line: line_no,
                reason: format!("`{part}` is not finite"),
            });
        }
        *slot = v;
    }
    Ok(out)
}

/// Parses `temperature_c,time_h,length_mm` rows (one per larva) and groups them
/// by temperature and time. Row order does not matter.
pub fn parse_experimental_csv<F: Scalar, R: BufRead>(
    reader: R,
) -> Result<ExperimentalDataset<F>, DataError> {
    let rows = data_rows(reader, EXPERIMENT_HEADER)?;
    if rows.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    let mut records = Vec::with_capacity(rows.len());
    for (line_no, line) in &rows {
        let [temp, time, len] = fields::<3>(*line_no, line)?;
        records.push((F::lit(temp), F::lit(time), F::lit(len)));
    }
    // Canonical order makes grouping independent of input row order.
    records.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.partial_cmp(&b.1).unwrap())
            .then(a.2.partial_cmp(&b.2).unwrap())
    });

    let mut batches: Vec<TemperatureBatch<F>> = Vec::new();
    for (temp, time, len) in records {
        match batches.last_mut() {
            Some(b) if b.temperature_c == temp => match b.observations.last_mut() {
                Some(o) if o.time_h == time => o.lengths_mm.push(len),
                _ => b.observations.push(TimePoint { time_h: time, lengths_mm: vec![len] }),
            },
            _ => batches.push(TemperatureBatch {
                temperature_c: temp,
                observations: vec![TimePoint { time_h: time, lengths_mm: vec![len] }],
            }),
        }
    }
    ExperimentalDataset::new(batches)
}

/// Writes one row per replicate length in canonical order.
pub fn write_experimental_csv<F: Scalar, W: Write>(
    dataset: &ExperimentalDataset<F>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{EXPERIMENT_HEADER}")?;
    for b in dataset.batches() {
        for o in &b.observations {
            for y in &o.lengths_mm {
                writeln!(out, "{},{},{}", b.temperature_c, o.time_h, y)?;
            }
        }
    }
    Ok(())
}

/// Parses `time_h,temp_c` rows. Times must already be strictly increasing.
pub fn parse_temperature_csv<F: Scalar, R: BufRead>(
    reader: R,
) -> Result<TemperatureProfile<F>, DataError> {
    let rows = data_rows(reader, PROFILE_HEADER)?;
    let mut times = Vec::with_capacity(rows.len());
    let mut temps = Vec::with_capacity(rows.len());
    for (line_no, line) in &rows {
        let [time, temp] = fields::<2>(*line_no, line)?;
        if let Some(&prev) = times.last() {
            if time <= prev {
                return Err(DataError::NonMonotoneTime { line: *line_no, previous: prev, time });
            }
        }
        times.push(time);
        temps.push(temp);
    }
    if times.len() < 2 {
        return Err(DataError::TooFewSamples { found: times.len() });
    }
    TemperatureProfile::new(
        times.into_iter().map(F::lit).collect(),
        temps.into_iter().map(F::lit).collect(),
    )
}

pub fn write_temperature_csv<F: Scalar, W: Write>(
    profile: &TemperatureProfile<F>,
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{PROFILE_HEADER}")?;
    for (t, y) in profile.times().iter().zip(profile.temps()) {
        writeln!(out, "{t},{y}")?;
    }
    Ok(())
}

/// Parses a single-column `length_mm` file of scene lengths.
pub fn parse_lengths_csv<F: Scalar, R: BufRead>(reader: R) -> Result<Vec<F>, DataError> {
    let rows = data_rows(reader, LENGTHS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line_no, line) in &rows {
        let [y] = fields::<1>(*line_no, line)?;
        if y <= 0.0 {
            return Err(DataError::InvariantViolation(format!(
                "line {line_no}: non-positive length {y}"
            )));
        }
        out.push(F::lit(y));
    }
    if out.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Ok(out)
}
