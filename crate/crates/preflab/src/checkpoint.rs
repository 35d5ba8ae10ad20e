//! Versioned plain-text checkpoints. Floats are written in Rust's shortest
//! round-trip decimal form, so save → load reproduces every parameter bit
//! for bit.
//!
//! Layout: a header (`preflab-checkpoint v1`, architecture fields, table
//! specs, free-form `meta` key/value lines), then each parameter tensor as a
//! `tensor <name> <rows> <cols>` line followed by one whitespace-separated
//! row per line, closed by `end`.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::{Architecture, NodeClassifier, ParamSet, TableSpec};

pub const FORMAT_HEADER: &str = "preflab-checkpoint v1";

/// A serializable model snapshot plus free-form metadata (task, strategy,
/// training knobs — anything the harness wants to carry along).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch: Architecture,
    pub params: ParamSet,
    pub meta: Vec<(String, String)>,
}

impl Checkpoint {
    pub fn of_model(model: &NodeClassifier, meta: Vec<(String, String)>) -> Checkpoint {
        Checkpoint {
            arch: model.arch().clone(),
            params: model.params().clone(),
            meta,
        }
    }

    pub fn into_model(self) -> Result<NodeClassifier> {
        NodeClassifier::from_params(self.arch, self.params)
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        writeln!(out, "layers {}", self.arch.layers).unwrap();
        writeln!(out, "hidden {}", self.arch.hidden).unwrap();
        writeln!(out, "classes {}", self.arch.classes).unwrap();
        writeln!(out, "dropout {}", self.arch.dropout).unwrap();
        writeln!(out, "tables {}", self.arch.tables.len()).unwrap();
        for t in &self.arch.tables {
            writeln!(out, "table {} {}", t.name, t.rows).unwrap();
        }
        for (k, v) in &self.meta {
            writeln!(out, "meta {k} {v}").unwrap();
        }
        writeln!(out, "params {}", self.params.len()).unwrap();
        for (name, tensor) in self.params.iter() {
            let (r, c) = tensor.dim();
            writeln!(out, "tensor {name} {r} {c}").unwrap();
            for row in tensor.rows() {
                let mut first = true;
                for v in row {
                    if !first {
                        out.push(' ');
                    }
                    write!(out, "{v}").unwrap();
                    first = false;
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Checkpoint> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = || {
            lines
                .next()
                .ok_or_else(|| Error::parse(0, "unexpected end of checkpoint"))
        };

        let (ln, header) = next()?;
        if header != FORMAT_HEADER {
            return Err(Error::parse(
                ln,
                format!("bad header {header:?}, expected {FORMAT_HEADER:?}"),
            ));
        }
        let layers = parse_field(next()?, "layers")?;
        let hidden = parse_field(next()?, "hidden")?;
        let classes = parse_field(next()?, "classes")?;
        let (ln, line) = next()?;
        let dropout: f64 = line
            .strip_prefix("dropout ")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(ln, "expected 'dropout <rate>'"))?;
        let table_count: usize = parse_field(next()?, "tables")?;
        let mut tables = Vec::with_capacity(table_count);
        for _ in 0..table_count {
            let (ln, line) = next()?;
            let rest = line
                .strip_prefix("table ")
                .ok_or_else(|| Error::parse(ln, "expected 'table <name> <rows>'"))?;
            let (name, rows) = rest
                .split_once(' ')
                .ok_or_else(|| Error::parse(ln, "expected 'table <name> <rows>'"))?;
            let rows: usize = rows
                .parse()
                .map_err(|_| Error::parse(ln, "table rows must be an integer"))?;
            tables.push(TableSpec::new(name, rows));
        }

        // Zero or more meta lines, then the params count.
        let mut meta = Vec::new();
        let param_count: usize = loop {
            let (ln, line) = next()?;
            if let Some(rest) = line.strip_prefix("meta ") {
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| Error::parse(ln, "expected 'meta <key> <value>'"))?;
                meta.push((k.to_string(), v.to_string()));
            } else if let Some(count) = line.strip_prefix("params ") {
                break count
                    .parse()
                    .map_err(|_| Error::parse(ln, "params count must be an integer"))?;
            } else {
                return Err(Error::parse(ln, format!("unexpected line {line:?}")));
            }
        };

        let arch = Architecture {
            layers,
            hidden,
            classes,
            tables,
            dropout,
        };
        arch.validate()?;

        let mut entries = Vec::with_capacity(param_count);
        for _ in 0..param_count {
            let (ln, line) = next()?;
            let rest = line
                .strip_prefix("tensor ")
                .ok_or_else(|| Error::parse(ln, "expected 'tensor <name> <rows> <cols>'"))?;
            let mut parts = rest.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| Error::parse(ln, "missing tensor name"))?
                .to_string();
            let rows: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(ln, "missing tensor rows"))?;
            let cols: usize = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::parse(ln, "missing tensor cols"))?;
            let mut tensor = Array2::<f64>::zeros((rows, cols));
            for r in 0..rows {
                let (ln, line) = next()?;
                let mut filled = 0;
                for (c, tok) in line.split_whitespace().enumerate() {
                    if c >= cols {
                        return Err(Error::parse(ln, "too many values in tensor row"));
                    }
                    tensor[(r, c)] = tok
                        .parse()
                        .map_err(|_| Error::parse(ln, format!("bad float {tok:?}")))?;
                    filled += 1;
                }
                if filled != cols {
                    return Err(Error::parse(
                        ln,
                        format!("tensor row has {filled} values, expected {cols}"),
                    ));
                }
            }
            entries.push((name, tensor));
        }

        let (ln, line) = next()?;
        if line != "end" {
            return Err(Error::parse(ln, format!("expected 'end', got {line:?}")));
        }

        let params = ParamSet::from_entries(entries);
        // Validate names/shapes against the declared architecture.
        NodeClassifier::from_params(arch.clone(), params.clone())?;
        Ok(Checkpoint { arch, params, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::MissingCheckpoint {
            what: e.to_string(),
            path: path.display().to_string(),
        })?;
        Checkpoint::from_text(&text)
    }
}

fn parse_field((ln, line): (usize, &str), key: &str) -> Result<usize> {
    line.strip_prefix(key)
        .and_then(|s| s.strip_prefix(' '))
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(ln, format!("expected '{key} <count>'")))
}
