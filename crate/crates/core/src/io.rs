//! CSV and JSON emission for trajectories and sweeps.
//!
//! CSV dialect: comma separated, header row, LF line endings, every value
//! with 17 significant digits so doubles round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{KpoError, Result};
use crate::sweep::{SweepLayer, SweepResult};

/// Formats with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub const SWEEP_CSV_HEADER: &str = "delta_over_2pi_mhz,p_over_2pi_mhz,value";

/// Long-format CSV of one layer, Δ-major.
pub fn sweep_layer_csv(result: &SweepResult, layer: &SweepLayer) -> String {
    let mut out = String::with_capacity(64 * result.delta_values_mhz.len() * result.p_values_mhz.len());
    out.push_str(SWEEP_CSV_HEADER);
    out.push('\n');
    for (i, d) in result.delta_values_mhz.iter().enumerate() {
        for (j, p) in result.p_values_mhz.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(*d),
                fmt_f64(*p),
                fmt_f64(layer.grid[i][j])
            );
        }
    }
    out
}

/// Grid read back from a long-format sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct GridData {
    pub delta_values_mhz: Vec<f64>,
    pub p_values_mhz: Vec<f64>,
    pub grid: Vec<Vec<f64>>,
}

/// Parses CSV produced by [`sweep_layer_csv`].
pub fn read_sweep_csv(text: &str) -> Result<GridData> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == SWEEP_CSV_HEADER => {}
        other => {
            return Err(KpoError::Format(format!("unexpected header {other:?}")));
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(KpoError::Format(format!("line {}: expected 3 fields", lineno + 2)));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| KpoError::Format(format!("line {}: {e}", lineno + 2)))
        };
        rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    let Some(first) = rows.first() else {
        return Err(KpoError::Format("no data rows".into()));
    };
    let n_p = rows.iter().take_while(|r| r.0 == first.0).count();
    if rows.len() % n_p != 0 {
        return Err(KpoError::Format("ragged grid".into()));
    }
    let p_values_mhz: Vec<f64> = rows[..n_p].iter().map(|r| r.1).collect();
    let mut delta_values_mhz = Vec::new();
    let mut grid = Vec::new();
    for chunk in rows.chunks(n_p) {
        if chunk.iter().any(|r| r.0 != chunk[0].0)
            || chunk.iter().zip(&p_values_mhz).any(|(r, p)| r.1 != *p)
        {
            return Err(KpoError::Format("rows are not in delta-major order".into()));
        }
        delta_values_mhz.push(chunk[0].0);
        grid.push(chunk.iter().map(|r| r.2).collect());
    }
    Ok(GridData {
        delta_values_mhz,
        p_values_mhz,
        grid,
    })
}

/// Pretty JSON to `path`.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        let s = fmt_f64(0.1);
        assert_eq!(s, "1.0000000000000001e-1");
        assert_eq!(s.parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(read_sweep_csv("a,b,c\n1,2,3\n").is_err());
        assert!(read_sweep_csv("delta_over_2pi_mhz,p_over_2pi_mhz,value\n").is_err());
    }

    proptest! {
        #[test]
        fn formatted_values_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
