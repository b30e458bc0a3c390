//! Number formatting and small table helpers shared by the CSV writers.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Nine significant digits, `inf`/`-inf`/`nan` spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{:.8e}", x);
    // Round-trip through the shortest representation of the rounded value.
    let v: f64 = s.parse().expect("formatted float parses");
    if v.abs() < 1e-4 || v.abs() >= 1e15 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" | "+inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

/// Codebook matrix as CSV: one row per antenna, one column per beam,
/// cells written `re;im`.
pub fn codebook_to_csv(m: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols())
            .map(|c| format!("{};{}", fmt_f64(m[(r, c)].re), fmt_f64(m[(r, c)].im)))
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn codebook_from_csv(text: &str) -> Result<DMatrix<Complex64>> {
    let rows: Vec<Vec<Complex64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|cell| {
                    let (re, im) = cell.trim().split_once(';')?;
                    Some(Complex64::new(parse_f64(re)?, parse_f64(im)?))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Input(format!("codebook row {}: cells must be `re;im`", i + 1)))
        })
        .collect::<Result<_>>()?;
    let n_cols = rows.first().map_or(0, Vec::len);
    if n_cols == 0 {
        return Err(Error::Input("codebook CSV is empty".into()));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
        return Err(Error::Input(format!("codebook row {} has a different number of beams", i + 1)));
    }
    Ok(DMatrix::from_fn(rows.len(), n_cols, |r, c| rows[r][c]))
}

/// Empirical quantile by nearest rank on sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Median, averaging the two middle values for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
