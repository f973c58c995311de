//! Result tables and their CSV / JSON encodings.
//!
//! Floats are written with 17 significant digits (`{:.16e}`) in both
//! formats. Non-finite floats become `inf`, `-inf` or `nan` in CSV and
//! `null` in JSON.

use serde_json::{Map, Number, Value as Json};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Missing, Into::into)
    }
}

fn float_text(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(v) => float_text(*v),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Int(i) => Json::from(*i),
            Cell::Float(v) if v.is_finite() => Json::Number(float_text(*v).parse::<Number>().expect("finite float")),
            Cell::Float(_) | Cell::Missing => Json::Null,
            Cell::Bool(b) => Json::Bool(*b),
            Cell::Text(s) => Json::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub experiment: String,
    pub seed: u64,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(experiment: &str, seed: u64, columns: &[&'static str]) -> Self {
        Table {
            experiment: experiment.to_string(),
            seed,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Json> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Json> = self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                Json::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("experiment".into(), Json::String(self.experiment.clone()));
        top.insert("seed".into(), Json::from(self.seed));
        top.insert("rows".into(), Json::Array(rows));
        let mut text = serde_json::to_string_pretty(&Json::Object(top)).expect("serializable");
        text.push('\n');
        text
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new("demo", 7, &["t", "x", "note"]);
        t.push(vec![1usize.into(), 0.1.into(), "a,b".into()]);
        t.push(vec![2usize.into(), f64::INFINITY.into(), Cell::Missing]);
        t
    }

    #[test]
    fn csv_layout() {
        assert_eq!(
            sample().to_csv(),
            "t,x,note\n1,1.0000000000000001e-1,\"a,b\"\n2,inf,\n"
        );
    }

    #[test]
    fn json_layout() {
        let text = sample().to_json();
        let v: Json = serde_json::from_str(&text).unwrap();
        assert_eq!(v["experiment"], "demo");
        assert_eq!(v["rows"][0]["t"], 1);
        assert!(v["rows"][1]["x"].is_null());
        assert!(text.contains("1.0000000000000001e-1"));
        // column order is preserved
        assert!(text.find("\"t\"").unwrap() < text.find("\"note\"").unwrap());
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300] {
            assert_eq!(float_text(v).parse::<f64>().unwrap(), v);
        }
    }
}
