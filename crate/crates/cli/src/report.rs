use std::io::Write;

use liouville_core::numerics::{fmt_sig, round_sig};
use serde::Serialize;

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 9] =
    ["experiment", "quantity", "parameters", "value", "bound", "ratio", "passed", "seed", "wall_time_s"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub quantity: String,
    pub parameters: String,
    pub value: f64,
    pub bound: Option<f64>,
    /// Measured over allowed; at most 1 on passing rows.
    pub ratio: Option<f64>,
    /// `None` for purely informational rows.
    pub passed: Option<bool>,
    pub seed: u64,
    pub wall_time_s: Option<f64>,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        self.passed == Some(false)
    }
}

fn opt_sig(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.quantity.clone(),
            r.parameters.clone(),
            fmt_sig(r.value),
            opt_sig(r.bound),
            opt_sig(r.ratio),
            r.passed.map(|p| p.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            opt_sig(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    experiment: &'a str,
    quantity: &'a str,
    parameters: &'a str,
    value: Option<f64>,
    bound: Option<f64>,
    ratio: Option<f64>,
    passed: Option<bool>,
    seed: u64,
    wall_time_s: Option<f64>,
}

/// Rounded to 12 significant digits; non-finite values become null.
fn json_num(v: f64) -> Option<f64> {
    v.is_finite().then(|| round_sig(v))
}

pub fn write_json<W: Write>(rows: &[ResultRow], mut out: W) -> std::io::Result<()> {
    let json: Vec<JsonRow> = rows
        .iter()
        .map(|r| JsonRow {
            experiment: &r.experiment,
            quantity: &r.quantity,
            parameters: &r.parameters,
            value: json_num(r.value),
            bound: r.bound.and_then(json_num),
            ratio: r.ratio.and_then(json_num),
            passed: r.passed,
            seed: r.seed,
            wall_time_s: r.wall_time_s.and_then(json_num),
        })
        .collect();
    serde_json::to_writer_pretty(&mut out, &json)?;
    writeln!(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            experiment: "demo".into(),
            quantity: "a, \"quoted\" name".into(),
            parameters: "x=1".into(),
            value: 1.0 / 3.0,
            bound: Some(1.0),
            ratio: Some(1.0 / 3.0),
            passed: Some(true),
            seed: 7,
            wall_time_s: None,
        }
    }

    #[test]
    fn csv_quotes_and_digits() {
        let mut buf = Vec::new();
        write_csv(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "demo,\"a, \"\"quoted\"\" name\",x=1,0.333333333333,1,0.333333333333,true,7,"
        );
    }

    #[test]
    fn json_fields_match_csv() {
        let mut r = row();
        r.value = f64::INFINITY;
        let mut buf = Vec::new();
        write_json(&[r], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let obj = v.as_array().unwrap()[0].as_object().unwrap();
        let keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        let mut expect = CSV_HEADER.to_vec();
        expect.sort_unstable();
        assert_eq!(keys, expect);
        assert!(obj["value"].is_null());
        assert_eq!(obj["ratio"].as_f64().unwrap(), 0.333333333333);
    }
}
