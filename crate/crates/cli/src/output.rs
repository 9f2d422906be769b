//! Output writing: metadata-first CSV and JSON-lines, 9 significant digits,
//! LF line endings. Data goes to the output sink only; diagnostics belong on
//! stderr.

use std::fs::File;
use std::io::{self, BufWriter, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Jsonl,
}

/// Formats with 9 significant digits.
pub fn sig9(x: f64) -> String {
    format!("{:.8e}", x)
}

/// One output value; numbers are rendered at 9 significant digits in both
/// formats, and the scientific notation used is also valid JSON.
pub enum Cell {
    Num(f64),
    Int(u64),
    Str(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => sig9(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Str(s) => s.clone(),
        }
    }

    fn json(&self) -> String {
        match self {
            Cell::Num(x) => sig9(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Str(s) => serde_json::to_string(s).expect("strings serialize"),
        }
    }
}

pub struct Writer {
    out: BufWriter<Box<dyn Write>>,
    format: Format,
}

impl Writer {
    /// Opens the sink; "-" means stdout.
    pub fn open(path: &str, format: Format) -> io::Result<Self> {
        let raw: Box<dyn Write> = if path == "-" {
            Box::new(io::stdout())
        } else {
            Box::new(File::create(path)?)
        };
        Ok(Self {
            out: BufWriter::new(raw),
            format,
        })
    }

    /// Every output begins with one metadata record.
    pub fn meta(&mut self, meta: &serde_json::Value) -> io::Result<()> {
        let json = serde_json::to_string(meta).expect("metadata serializes");
        match self.format {
            Format::Csv => writeln!(self.out, "# {json}"),
            Format::Jsonl => writeln!(self.out, "{json}"),
        }
    }

    /// An auxiliary record outside the main table: a comment line in CSV,
    /// a typed object in JSON lines.
    pub fn aux(&mut self, kind: &str, fields: &[(&str, Cell)]) -> io::Result<()> {
        match self.format {
            Format::Csv => {
                let body: Vec<String> = fields
                    .iter()
                    .map(|(k, v)| format!("{k}={}", v.csv()))
                    .collect();
                writeln!(self.out, "# {kind} {}", body.join(" "))
            }
            Format::Jsonl => self.json_record(kind, fields),
        }
    }

    /// The CSV header row; JSON lines carry field names per record instead.
    pub fn header(&mut self, columns: &[&str]) -> io::Result<()> {
        if self.format == Format::Csv {
            writeln!(self.out, "{}", columns.join(","))?;
        }
        Ok(())
    }

    pub fn row(&mut self, kind: &str, columns: &[&str], cells: &[Cell]) -> io::Result<()> {
        debug_assert_eq!(columns.len(), cells.len());
        match self.format {
            Format::Csv => {
                let body: Vec<String> = cells.iter().map(Cell::csv).collect();
                writeln!(self.out, "{}", body.join(","))
            }
            Format::Jsonl => {
                let fields: Vec<(&str, Cell)> = columns
                    .iter()
                    .zip(cells)
                    .map(|(&c, v)| {
                        (
                            c,
                            match v {
                                Cell::Num(x) => Cell::Num(*x),
                                Cell::Int(n) => Cell::Int(*n),
                                Cell::Str(s) => Cell::Str(s.clone()),
                            },
                        )
                    })
                    .collect();
                self.json_record(kind, &fields)
            }
        }
    }

    fn json_record(&mut self, kind: &str, fields: &[(&str, Cell)]) -> io::Result<()> {
        let mut parts = vec![format!("\"record\":\"{kind}\"")];
        for (k, v) in fields {
            parts.push(format!("\"{k}\":{}", v.json()));
        }
        writeln!(self.out, "{{{}}}", parts.join(","))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}
