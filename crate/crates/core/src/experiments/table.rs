use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};

/// Column-ordered numeric records; missing entries are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Shortest text that parses back to the same `f64`; integers print without a fraction, `NaN` as empty.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if v == 0.0 && v.is_sign_negative() {
        "-0".into()
    } else if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn parse_real(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.is_empty() {
        return Ok(f64::NAN);
    }
    t.parse::<f64>()
        .map_err(|_| Error::Parse(format!("not a number: `{t}`")))
}

impl RecordTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        RecordTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the column count"
        );
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::InvalidArgument {
                name: "column",
                reason: format!("unknown column `{name}`"),
            })?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }

    /// CSV preceded by one `#` comment line listing the column order.
    pub fn write_csv<W: Write>(&self, mut w: W, title: &str) -> Result<()> {
        writeln!(w, "# {title} columns: {}", self.columns.join(", "))?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.columns)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|v| format_real(*v)))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let columns: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut table = RecordTable::new(columns);
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(parse_real)
                .collect::<Result<Vec<f64>>>()
                .map_err(|e| Error::Parse(format!("record {}: {e}", k + 1)))?;
            if row.len() != table.columns.len() {
                return Err(Error::Parse(format!(
                    "record {} has {} fields",
                    k + 1,
                    row.len()
                )));
            }
            table.rows.push(row);
        }
        Ok(table)
    }
}

/// Order statistics and moments of one column, ignoring `NaN`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub missing: usize,
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// `None` when the column has no non-missing value.
pub fn summarize(values: &[f64]) -> Option<SummaryStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(SummaryStats {
        mean,
        std,
        median: quantile(&v, 0.5),
        q25: quantile(&v, 0.25),
        q75: quantile(&v, 0.75),
        min: v[0],
        max: v[n - 1],
        count: n,
        missing: values.len() - n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_summary() {
        let s = summarize(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(
            (s.mean, s.median, s.std, s.min, s.max),
            (2.0, 2.0, 1.0, 1.0, 3.0)
        );
        let c = summarize(&[4.5; 7]).unwrap();
        assert_eq!(c.std, 0.0);
        assert_eq!(c.min, c.max);
        let m = summarize(&[1.0, f64::NAN, 3.0]).unwrap();
        assert_eq!((m.count, m.missing, m.mean), (2, 1, 2.0));
        assert!(summarize(&[f64::NAN]).is_none());
        let q = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((q.q25, q.median, q.q75), (1.75, 2.5, 3.25));
    }

    #[test]
    fn normal_sample_summary() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let v: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let s = summarize(&v).unwrap();
        assert!(s.mean.abs() < 0.05);
        assert!((0.95..=1.05).contains(&s.std));
    }

    #[test]
    fn format_examples() {
        assert_eq!(format_real(3.0), "3");
        assert_eq!(format_real(0.1), "0.1");
        assert_eq!(format_real(1e-300), "1e-300");
        assert_eq!(format_real(f64::NAN), "");
        assert_eq!(format_real(f64::NEG_INFINITY), "-inf");
        assert_eq!(format_real(-0.0), "-0");
    }

    #[test]
    fn unknown_column() {
        let t = RecordTable::new(["a"]);
        assert!(t.column("b").is_err());
    }

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(prop::num::f64::ANY, 3), 0..20)) {
            let mut t = RecordTable::new(["a", "b", "c"]);
            for r in rows {
                t.push(r);
            }
            let mut buf = Vec::new();
            t.write_csv(&mut buf, "test").unwrap();
            let back = RecordTable::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.columns, t.columns);
            for (a, b) in back.rows.iter().zip(&t.rows) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!(x.to_bits() == y.to_bits() || (x.is_nan() && y.is_nan()));
                }
            }
        }

        #[test]
        fn quartiles_ordered(v in prop::collection::vec(-1e6f64..1e6, 1..200)) {
            let s = summarize(&v).unwrap();
            prop_assert!(s.min <= s.q25 && s.q25 <= s.median && s.median <= s.q75 && s.q75 <= s.max);
        }
    }
}
