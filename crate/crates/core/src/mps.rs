//! Fixed-format MPS writer and reader.
//!
//! The writer aligns fields on the classic columns (2, 5, 15, 25) and puts
//! one coefficient per line. Names longer than eight characters push later
//! fields right; the reader splits on whitespace, as most modern readers
//! do, so such files still round-trip. The objective sense is written as an
//! `OBJSENSE` section.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Ge,
    Eq,
}

impl RowSense {
    fn code(self) -> &'static str {
        match self {
            RowSense::Le => "L",
            RowSense::Ge => "G",
            RowSense::Eq => "E",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsRow {
    pub name: String,
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsColumn {
    pub name: String,
    pub integer: bool,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
    /// `(row index, coefficient)`, in file order.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MpsModel {
    pub name: String,
    pub maximize: bool,
    pub objective_name: String,
    pub rows: Vec<MpsRow>,
    pub columns: Vec<MpsColumn>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MpsError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown {kind} `{name}`")]
    Unknown { line: usize, kind: &'static str, name: String },
    #[error("missing ENDATA")]
    MissingEnd,
}

/// Shortest decimal that reads back to the same `f64`, in exponent form
/// when the plain form would not fit a 12-character field.
pub fn format_number(x: f64) -> String {
    let plain = format!("{x}");
    if plain.len() <= 12 {
        plain
    } else {
        format!("{x:e}")
    }
}

fn entry_line(out: &mut String, first: &str, second: &str, value: f64) {
    let _ = writeln!(out, "    {first:<8}  {second:<8}  {:>12}", format_number(value));
}

pub fn write(model: &MpsModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", model.name);
    if model.maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }
    out.push_str("ROWS\n");
    let _ = writeln!(out, " N  {}", model.objective_name);
    for row in &model.rows {
        let _ = writeln!(out, " {:<2} {}", row.sense.code(), row.name);
    }
    out.push_str("COLUMNS\n");
    let mut in_integer = false;
    for col in &model.columns {
        if col.integer != in_integer {
            let tag = if col.integer { "'INTORG'" } else { "'INTEND'" };
            let _ = writeln!(out, "    MARKER                 'MARKER'                 {tag}");
            in_integer = col.integer;
        }
        entry_line(&mut out, &col.name, &model.objective_name, col.objective);
        for &(r, v) in &col.entries {
            entry_line(&mut out, &col.name, &model.rows[r].name, v);
        }
    }
    if in_integer {
        out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
    }
    out.push_str("RHS\n");
    for row in &model.rows {
        if row.rhs != 0.0 {
            entry_line(&mut out, "RHS", &row.name, row.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for col in &model.columns {
        let bound = |out: &mut String, kind: &str, v: f64| {
            let _ = writeln!(out, " {kind:<2} BND       {:<8}  {:>12}", col.name, format_number(v));
        };
        if col.lower == col.upper {
            bound(&mut out, "FX", col.lower);
            continue;
        }
        if col.lower == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND       {}", col.name);
        } else if col.lower != 0.0 {
            bound(&mut out, "LO", col.lower);
        }
        if col.upper.is_finite() {
            bound(&mut out, "UP", col.upper);
        } else if col.integer {
            let _ = writeln!(out, " PL BND       {}", col.name);
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
}

pub fn parse(text: &str) -> Result<MpsModel, MpsError> {
    let mut model = MpsModel {
        name: String::new(),
        maximize: false,
        objective_name: String::new(),
        rows: Vec::new(),
        columns: Vec::new(),
    };
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut col_index: HashMap<String, usize> = HashMap::new();
    let mut section = Section::None;
    let mut integer = false;
    let mut ended = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.starts_with('*') || raw.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let syntax = |message: &str| MpsError::Syntax { line, message: message.to_string() };
        let number = |s: &str| s.parse::<f64>().map_err(|_| syntax(&format!("bad number `{s}`")));

        if !raw.starts_with(' ') && !raw.starts_with('\t') {
            match tokens[0] {
                "NAME" => model.name = tokens.get(1).unwrap_or(&"").to_string(),
                "OBJSENSE" => {
                    section = Section::ObjSense;
                    if let Some(s) = tokens.get(1) {
                        model.maximize = s.starts_with("MAX");
                    }
                }
                "ROWS" => section = Section::Rows,
                "COLUMNS" => section = Section::Columns,
                "RHS" => section = Section::Rhs,
                "RANGES" => section = Section::Ranges,
                "BOUNDS" => section = Section::Bounds,
                "ENDATA" => {
                    ended = true;
                    break;
                }
                other => return Err(syntax(&format!("unknown section `{other}`"))),
            }
            continue;
        }

        match section {
            Section::None => return Err(syntax("data before any section")),
            Section::ObjSense => model.maximize = tokens[0].starts_with("MAX"),
            Section::Rows => {
                let [kind, name] = tokens[..] else { return Err(syntax("expected `type name`")) };
                let sense = match kind {
                    "N" => {
                        if model.objective_name.is_empty() {
                            model.objective_name = name.to_string();
                        }
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    _ => return Err(syntax(&format!("bad row type `{kind}`"))),
                };
                row_index.insert(name.to_string(), model.rows.len());
                model.rows.push(MpsRow { name: name.to_string(), sense, rhs: 0.0 });
            }
            Section::Columns => {
                if tokens.get(1) == Some(&"'MARKER'") {
                    match tokens.get(2) {
                        Some(&"'INTORG'") => integer = true,
                        Some(&"'INTEND'") => integer = false,
                        _ => return Err(syntax("bad marker")),
                    }
                    continue;
                }
                if tokens.len() != 3 && tokens.len() != 5 {
                    return Err(syntax("expected `column row value [row value]`"));
                }
                let name = tokens[0];
                let c = *col_index.entry(name.to_string()).or_insert_with(|| {
                    model.columns.push(MpsColumn {
                        name: name.to_string(),
                        integer,
                        lower: 0.0,
                        upper: f64::INFINITY,
                        objective: 0.0,
                        entries: Vec::new(),
                    });
                    model.columns.len() - 1
                });
                for pair in tokens[1..].chunks(2) {
                    let value = number(pair[1])?;
                    if pair[0] == model.objective_name {
                        model.columns[c].objective = value;
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| MpsError::Unknown {
                            line,
                            kind: "row",
                            name: pair[0].to_string(),
                        })?;
                        model.columns[c].entries.push((r, value));
                    }
                }
            }
            Section::Rhs => {
                let pairs = if tokens.len() % 2 == 1 { &tokens[1..] } else { &tokens[..] };
                for pair in pairs.chunks(2) {
                    let [row, value] = pair else { return Err(syntax("dangling RHS entry")) };
                    let value = number(value)?;
                    if *row == model.objective_name {
                        return Err(syntax("objective constants are not supported"));
                    }
                    let r = *row_index
                        .get(*row)
                        .ok_or_else(|| MpsError::Unknown { line, kind: "row", name: row.to_string() })?;
                    model.rows[r].rhs = value;
                }
            }
            Section::Ranges => return Err(syntax("RANGES are not supported")),
            Section::Bounds => {
                let kind = tokens[0];
                let needs_value = matches!(kind, "UP" | "LO" | "FX" | "LI" | "UI");
                let (col, value) = match (needs_value, tokens.len()) {
                    (true, 4) => (tokens[2], Some(number(tokens[3])?)),
                    (true, 3) => (tokens[1], Some(number(tokens[2])?)),
                    (false, 3) => (tokens[2], None),
                    (false, 2) => (tokens[1], None),
                    (false, 4) if kind == "BV" => (tokens[2], None),
                    _ => return Err(syntax("malformed bound")),
                };
                let c = *col_index
                    .get(col)
                    .ok_or_else(|| MpsError::Unknown { line, kind: "column", name: col.to_string() })?;
                let column = &mut model.columns[c];
                match (kind, value) {
                    ("UP", Some(v)) => column.upper = v,
                    ("LO", Some(v)) => column.lower = v,
                    ("FX", Some(v)) => {
                        column.lower = v;
                        column.upper = v;
                    }
                    ("UI", Some(v)) => {
                        column.upper = v;
                        column.integer = true;
                    }
                    ("LI", Some(v)) => {
                        column.lower = v;
                        column.integer = true;
                    }
                    ("MI", None) => column.lower = f64::NEG_INFINITY,
                    ("PL", None) => column.upper = f64::INFINITY,
                    ("FR", None) => {
                        column.lower = f64::NEG_INFINITY;
                        column.upper = f64::INFINITY;
                    }
                    ("BV", None) => {
                        column.lower = 0.0;
                        column.upper = 1.0;
                        column.integer = true;
                    }
                    _ => return Err(syntax(&format!("unsupported bound type `{kind}`"))),
                }
            }
        }
    }
    if !ended {
        return Err(MpsError::MissingEnd);
    }
    Ok(model)
}
