//! CSV layouts. Numbers are written in the shortest form that parses back to
//! the same `f64`, always with a period decimal separator.

use crate::error::{Error, Result};
use crate::magnetization::FluxOffsetRecord;
use crate::noise::{NoiseSeries, PsdEstimate, SigmaCurve};
use crate::qubit::EsrScan;
use crate::spinsys::{SpectrumTrace, TransitionList};

/// Shortest round-trip text for `x`; scientific notation outside
/// `[1e-4, 1e15)`.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn write_table<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

fn floats(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| format_float(*v)).collect()
}

pub fn trace_csv(trace: &SpectrumTrace) -> String {
    write_table(
        &["f_Hz", "amplitude"],
        trace
            .frequencies
            .iter()
            .zip(&trace.amplitudes)
            .map(|(f, a)| floats(&[*f, *a])),
    )
}

pub fn transitions_csv(lists: &[TransitionList]) -> String {
    let rows = lists.iter().flat_map(|l| {
        l.entries.iter().map(move |t| {
            vec![
                format_float(t.frequency),
                format_float(t.intensity),
                t.lower.to_string(),
                t.upper.to_string(),
                l.label.clone(),
            ]
        })
    });
    write_table(&["f_Hz", "intensity", "i", "j", "site"], rows)
}

pub fn records_csv(records: &[FluxOffsetRecord]) -> String {
    write_table(
        &["B_par_mT", "T_mK", "Phi_off_mPhi0"],
        records
            .iter()
            .map(|r| floats(&[r.b_par * 1e3, r.temperature * 1e3, r.phi_off * 1e3])),
    )
}

pub fn series_csv(series: &NoiseSeries) -> String {
    write_table(
        &["t_s", "value"],
        series
            .samples
            .iter()
            .enumerate()
            .map(|(i, v)| floats(&[i as f64 / series.fs, *v])),
    )
}

pub fn psd_csv(psd: &PsdEstimate) -> String {
    write_table(
        &["f_Hz", "S"],
        psd.frequencies
            .iter()
            .zip(&psd.psd)
            .map(|(f, s)| floats(&[*f, *s])),
    )
}

pub fn sigma_csv(curve: &SigmaCurve) -> String {
    write_table(
        &["n_rep", "sigma_P", "binomial_sigma_P"],
        curve.points.iter().map(|p| {
            vec![
                p.n_rep.to_string(),
                format_float(p.sigma),
                format_float(p.binomial),
            ]
        }),
    )
}

/// Row 0: empty corner then the drive grid (Hz); column 0: ESR frequency
/// (Hz); cell `(i, j)`: switching probability.
pub fn scan_csv(scan: &EsrScan) -> String {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_writer(Vec::new());
    let mut head = vec!["f_esr_Hz\\f_drive_Hz".to_string()];
    head.extend(floats(&scan.drive_frequencies));
    w.write_record(&head).expect("writing to memory");
    for (f, row) in scan.esr_frequencies.iter().zip(&scan.p_sw) {
        let mut rec = vec![format_float(*f)];
        rec.extend(floats(row));
        w.write_record(&rec).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("csv output is UTF-8")
}

/// Parsed numeric table with the header checked against `expected`.
fn read_numeric(text: &str, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Csv {
        line: 1,
        reason: e.to_string(),
    })?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Csv {
            line: 1,
            reason: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Csv {
            line,
            reason: e.to_string(),
        })?;
        if rec.len() != expected.len() {
            return Err(Error::Csv {
                line,
                reason: format!("expected {} fields, found {}", expected.len(), rec.len()),
            });
        }
        let row = rec
            .iter()
            .enumerate()
            .map(|(c, v)| {
                v.parse::<f64>().map_err(|_| Error::Csv {
                    line,
                    reason: format!("column `{}`: `{v}` is not a number", expected[c]),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads `B_par_mT,T_mK,Phi_off_mPhi0`; rows with `T ≤ 0` are rejected by
/// line number.
pub fn read_records(text: &str) -> Result<Vec<FluxOffsetRecord>> {
    let rows = read_numeric(text, &["B_par_mT", "T_mK", "Phi_off_mPhi0"])?;
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            if !(r[1] > 0.0) {
                return Err(Error::Csv {
                    line: k + 2,
                    reason: format!("temperature must be > 0, got {} mK", r[1]),
                });
            }
            Ok(FluxOffsetRecord {
                b_par: r[0] * 1e-3,
                temperature: r[1] * 1e-3,
                phi_off: r[2] * 1e-3,
            })
        })
        .collect()
}

pub fn read_trace(text: &str) -> Result<SpectrumTrace> {
    let rows = read_numeric(text, &["f_Hz", "amplitude"])?;
    SpectrumTrace::new(
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
    )
}

/// Reads `t_s,value`; the sample rate comes from the first time step.
pub fn read_series(text: &str, seed: u64) -> Result<NoiseSeries> {
    let rows = read_numeric(text, &["t_s", "value"])?;
    if rows.len() < 2 {
        return Err(Error::Csv {
            line: rows.len() + 1,
            reason: "a series needs at least 2 rows".into(),
        });
    }
    let dt = rows[1][0] - rows[0][0];
    if !(dt > 0.0) {
        return Err(Error::Csv {
            line: 3,
            reason: "time stamps must increase".into(),
        });
    }
    NoiseSeries::new(rows.iter().map(|r| r[1]).collect(), 1.0 / dt, seed)
}

pub fn read_psd(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let rows = read_numeric(text, &["f_Hz", "S"])?;
    Ok((
        rows.iter().map(|r| r[0]).collect(),
        rows.iter().map(|r| r[1]).collect(),
    ))
}

pub fn read_scan(text: &str) -> Result<EsrScan> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut drive = Vec::new();
    let mut esr = Vec::new();
    let mut cells = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 1;
        let rec = rec.map_err(|e| Error::Csv {
            line,
            reason: e.to_string(),
        })?;
        let parse = |v: &str| {
            v.parse::<f64>().map_err(|_| Error::Csv {
                line,
                reason: format!("`{v}` is not a number"),
            })
        };
        if k == 0 {
            drive = rec.iter().skip(1).map(parse).collect::<Result<_>>()?;
            continue;
        }
        if rec.len() != drive.len() + 1 {
            return Err(Error::Csv {
                line,
                reason: format!("expected {} fields, found {}", drive.len() + 1, rec.len()),
            });
        }
        let vals: Vec<f64> = rec.iter().map(parse).collect::<Result<_>>()?;
        esr.push(vals[0]);
        cells.push(vals[1..].to_vec());
    }
    EsrScan::new(esr, drive, cells)
}
