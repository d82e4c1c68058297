//! Rendering of tables and key/value reports as text, CSV or JSON.

use std::io::{self, Write};

use serde_json::{json, Map, Value};

use crate::config::Format;

/// Floats in CSV: 17 significant digits, round-trip exact.
pub fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// `x` rounded to `digits` significant digits, printed in the shortest form.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{}", if x == 0.0 { 0.0 } else { x });
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses");
    if rounded.abs() < 1e-5 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

/// Column-oriented numeric output.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write(&self, w: &mut dyn Write, format: Format, echo: &str) -> io::Result<()> {
        match format {
            Format::Csv => {
                writeln!(w, "# {echo}")?;
                writeln!(w, "{}", self.columns.join(","))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|&x| csv_float(x)).collect();
                    writeln!(w, "{}", cells.join(","))?;
                }
                Ok(())
            }
            Format::Json => {
                let doc = json!({
                    "config": echo,
                    "columns": self.columns,
                    "rows": self.rows,
                });
                writeln!(w, "{}", serde_json::to_string(&doc).expect("serializable"))
            }
            Format::Text => {
                let width = self.columns.iter().map(String::len).max().unwrap_or(0).max(16);
                writeln!(w, "# {echo}")?;
                let header: Vec<String> = self.columns.iter().map(|c| format!("{c:>width$}")).collect();
                writeln!(w, "{}", header.join(" "))?;
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(|&x| format!("{:>width$}", sig(x, 10))).collect();
                    writeln!(w, "{}", cells.join(" "))?;
                }
                Ok(())
            }
        }
    }
}

/// A scalar entry of a [`Report`].
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    /// A float shown with the given number of significant digits in text.
    Num(f64, usize),
    Int(i64),
    Str(String),
    Bool(bool),
    Null,
}

impl Field {
    fn text(&self) -> String {
        match self {
            Field::Num(x, d) => sig(*x, *d),
            Field::Int(i) => i.to_string(),
            Field::Str(s) => s.clone(),
            Field::Bool(b) => b.to_string(),
            Field::Null => "none".into(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Field::Num(x, _) => csv_float(*x),
            Field::Str(s) if s.contains(',') || s.contains('"') => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            other => other.text(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Num(x, _) => json!(x),
            Field::Int(i) => json!(i),
            Field::Str(s) => json!(s),
            Field::Bool(b) => json!(b),
            Field::Null => Value::Null,
        }
    }
}

/// Ordered key/value output of the scalar commands.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub fields: Vec<(String, Field)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn push(&mut self, key: impl Into<String>, value: Field) -> &mut Self {
        self.fields.push((key.into(), value));
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.notes.push(note.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&Field> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn write(&self, w: &mut dyn Write, format: Format, echo: &str) -> io::Result<()> {
        match format {
            Format::Text => {
                for (k, v) in &self.fields {
                    writeln!(w, "{k} = {}", v.text())?;
                }
                for n in &self.notes {
                    writeln!(w, "note: {n}")?;
                }
                Ok(())
            }
            Format::Csv => {
                writeln!(w, "# {echo}")?;
                writeln!(w, "key,value")?;
                for (k, v) in &self.fields {
                    writeln!(w, "{k},{}", v.csv())?;
                }
                for n in &self.notes {
                    writeln!(w, "note,{}", Field::Str(n.clone()).csv())?;
                }
                Ok(())
            }
            Format::Json => {
                let mut map = Map::new();
                map.insert("config".into(), json!(echo));
                for (k, v) in &self.fields {
                    map.insert(k.clone(), v.json());
                }
                map.insert("notes".into(), json!(self.notes));
                writeln!(w, "{}", serde_json::to_string(&map).expect("serializable"))
            }
        }
    }
}
