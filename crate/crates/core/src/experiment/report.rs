//! Sweep results and their CSV form.

use std::io::Write;

use crate::error::Result;

use super::config::{Method, SweepVariable};

pub const CSV_HEADER: &str = "sweep_var,sweep_value,method,metric,unit,value,stderr,trials,seed";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_var: SweepVariable,
    pub sweep_value: f64,
    pub method: Method,
    pub metric: &'static str,
    pub unit: &'static str,
    /// `None` marks a method that is not applicable at this point.
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepRow {
    pub fn is_applicable(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Sorts by sweep value, then method label.
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.sweep_value
                .total_cmp(&b.sweep_value)
                .then_with(|| a.method.label().cmp(b.method.label()))
        });
    }

    pub fn get(&self, sweep_value: f64, method: Method) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.method == method)
    }

    /// Value at a point, if present and applicable.
    pub fn value(&self, sweep_value: f64, method: Method) -> Option<f64> {
        self.get(sweep_value, method).and_then(|r| r.value)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(CSV_HEADER.split(','))?;
        let na = "NA".to_string();
        for r in &self.rows {
            out.write_record([
                r.sweep_var.label().to_string(),
                r.sweep_value.to_string(),
                r.method.label().to_string(),
                r.metric.to_string(),
                r.unit.to_string(),
                r.value.map_or_else(|| na.clone(), |v| v.to_string()),
                r.stderr.map_or_else(|| na.clone(), |v| v.to_string()),
                r.trials.to_string(),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

impl From<csv::Error> for crate::error::Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => crate::error::Error::Io(io),
            other => crate::error::Error::Config(format!("CSV error: {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: f64, method: Method, value: Option<f64>) -> SweepRow {
        SweepRow {
            sweep_var: SweepVariable::Tau,
            sweep_value: v,
            method,
            metric: "rmse",
            unit: "dB",
            value,
            stderr: value.map(|_| 0.1),
            trials: 10,
            seed: 3,
        }
    }

    #[test]
    fn csv_layout_and_na_rows() {
        let mut res = SweepResult {
            rows: vec![
                row(2.0, Method::Rsls, Some(-3.5)),
                row(1.0, Method::Rsls, None),
                row(1.0, Method::Mmse, Some(-1.0)),
            ],
        };
        res.sort();
        let text = res.to_csv_string().unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "tau,1,mmse,rmse,dB,-1,0.1,10,3");
        assert_eq!(lines[2], "tau,1,rsls,rmse,dB,NA,NA,10,3");
        assert_eq!(lines[3], "tau,2,rsls,rmse,dB,-3.5,0.1,10,3");
    }
}
