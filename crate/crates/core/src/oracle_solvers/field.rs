use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{usage, Error, Result};
use crate::pde_tasks::{Equation, TaskSpec};

const FIELD_HEADER: &str = "gampinn-field 1";

#[derive(Debug, Clone, PartialEq)]
pub struct FieldAxis {
    pub name: String,
    /// Ascending node coordinates.
    pub coords: Vec<f64>,
}

impl FieldAxis {
    pub fn new(name: &str, coords: Vec<f64>) -> Self {
        FieldAxis {
            name: name.to_string(),
            coords,
        }
    }
}

/// How a field was produced: scheme name plus step sizes and counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeInfo {
    pub name: String,
    pub params: Vec<(String, f64)>,
}

impl SchemeInfo {
    pub fn new(name: &str, params: Vec<(&str, f64)>) -> Self {
        SchemeInfo {
            name: name.to_string(),
            params: params.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }
}

/// Values on a tensor grid, row-major with the last axis fastest. Axes run
/// `t, x` for Burgers and `t, y, x` for the heat equation.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub axes: Vec<FieldAxis>,
    pub values: Vec<f64>,
    pub task: TaskSpec,
    pub scheme: SchemeInfo,
}

fn input_axis_names(eq: Equation) -> &'static [&'static str] {
    match eq {
        Equation::Burgers1D => &["x", "t"],
        Equation::Heat2D => &["x", "y", "t"],
    }
}

impl SolutionField {
    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.coords.len()).collect()
    }

    pub fn axis(&self, name: &str) -> Option<&FieldAxis> {
        self.axes.iter().find(|a| a.name == name)
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.axes)
            .fold(0, |acc, (&i, a)| acc * a.coords.len() + i)
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.offset(index)]
    }

    /// Values at time node `k` (the leading axis).
    pub fn time_slice(&self, k: usize) -> &[f64] {
        let len: usize = self.axes[1..].iter().map(|a| a.coords.len()).product();
        &self.values[k * len..(k + 1) * len]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Every node as a row of network inputs (`x, t` or `x, y, t`), in the
    /// same order as `values`.
    pub fn input_points(&self) -> Array2<f64> {
        let names = input_axis_names(self.task.equation);
        let which: Vec<usize> = names
            .iter()
            .map(|n| self.axes.iter().position(|a| a.name == *n).expect("field axis"))
            .collect();
        let shape = self.shape();
        let mut pts = Array2::zeros((self.values.len(), names.len()));
        let mut idx = vec![0usize; shape.len()];
        for mut row in pts.rows_mut() {
            for (col, &ax) in which.iter().enumerate() {
                row[col] = self.axes[ax].coords[idx[ax]];
            }
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        pts
    }

    /// Keep every `strides[d]`-th node along axis `d`, end nodes included.
    pub fn restrict(&self, strides: &[usize]) -> Result<SolutionField> {
        if strides.len() != self.axes.len() || strides.contains(&0) {
            return usage("one positive stride per axis is required");
        }
        for (a, &s) in self.axes.iter().zip(strides) {
            if (a.coords.len() - 1) % s != 0 {
                return usage(format!(
                    "stride {s} does not divide the {} intervals of axis {}",
                    a.coords.len() - 1,
                    a.name
                ));
            }
        }
        let axes: Vec<FieldAxis> = self
            .axes
            .iter()
            .zip(strides)
            .map(|(a, &s)| FieldAxis::new(&a.name, a.coords.iter().copied().step_by(s).collect()))
            .collect();
        let shape: Vec<usize> = axes.iter().map(|a| a.coords.len()).collect();
        let total: usize = shape.iter().product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; shape.len()];
        for _ in 0..total {
            let src: Vec<usize> = idx.iter().zip(strides).map(|(i, s)| i * s).collect();
            values.push(self.get(&src));
            for d in (0..shape.len()).rev() {
                idx[d] += 1;
                if idx[d] < shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        let mut scheme = self.scheme.clone();
        scheme.name = format!("{} restricted", scheme.name);
        Ok(SolutionField {
            axes,
            values,
            task: self.task.clone(),
            scheme,
        })
    }
}

pub fn encode_field(field: &SolutionField) -> String {
    let mut out = String::with_capacity(field.values.len() * 24 + 256);
    let _ = writeln!(out, "{FIELD_HEADER}");
    let _ = writeln!(out, "task {}", field.task.record());
    let _ = write!(out, "scheme {}", field.scheme.name.replace(' ', "_"));
    for (k, v) in &field.scheme.params {
        let _ = write!(out, " {k}={v:?}");
    }
    out.push('\n');
    for a in &field.axes {
        let _ = writeln!(out, "axis {} {}", a.name, a.coords.len());
        write_row(&mut out, &a.coords);
    }
    let _ = writeln!(out, "values {}", field.values.len());
    let row = field.axes.last().map_or(1, |a| a.coords.len()).max(1);
    for chunk in field.values.chunks(row) {
        write_row(&mut out, chunk);
    }
    out
}

fn write_row(out: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

pub fn decode_field(text: &str) -> Result<SolutionField> {
    let mut lines = text.lines();
    if lines.next() != Some(FIELD_HEADER) {
        return Err(bad("not a field file (bad header or version)"));
    }
    let task: TaskSpec = lines
        .next()
        .and_then(|l| l.strip_prefix("task "))
        .ok_or_else(|| bad("missing task line"))?
        .parse()?;
    let scheme_line = lines
        .next()
        .and_then(|l| l.strip_prefix("scheme "))
        .ok_or_else(|| bad("missing scheme line"))?;
    let mut parts = scheme_line.split_whitespace();
    let name = parts.next().ok_or_else(|| bad("empty scheme line"))?.replace('_', " ");
    let mut params = Vec::new();
    for p in parts {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| bad(format!("bad scheme entry `{p}`")))?;
        params.push((k.to_string(), parse_num(v)?));
    }
    let scheme = SchemeInfo { name, params };

    let mut axes = Vec::new();
    let mut values = None;
    while let Some(line) = lines.next() {
        let mut head = line.split_whitespace();
        match head.next() {
            Some("axis") => {
                let name = head.next().ok_or_else(|| bad("axis without name"))?;
                let n = parse_count(head.next())?;
                let coords = read_numbers(&mut lines, n)?;
                if coords.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(bad(format!("axis {name} is not ascending")));
                }
                axes.push(FieldAxis::new(name, coords));
            }
            Some("values") => {
                let n = parse_count(head.next())?;
                values = Some(read_numbers(&mut lines, n)?);
            }
            Some(other) => return Err(bad(format!("unexpected section `{other}`"))),
            None => continue,
        }
    }
    let values = values.ok_or_else(|| bad("missing values section"))?;
    let expected: usize = axes.iter().map(|a| a.coords.len()).product();
    if axes.is_empty() || values.len() != expected {
        return Err(bad(format!(
            "{} values do not fill a grid of {expected} nodes",
            values.len()
        )));
    }
    Ok(SolutionField {
        axes,
        values,
        task,
        scheme,
    })
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| bad(format!("bad number `{s}`")))
}

fn parse_count(s: Option<&str>) -> Result<usize> {
    s.and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad count"))
}

fn read_numbers<'a>(lines: &mut impl Iterator<Item = &'a str>, n: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let line = lines.next().ok_or_else(|| bad("file ends inside a number block"))?;
        for tok in line.split_whitespace() {
            out.push(parse_num(tok)?);
        }
    }
    if out.len() != n {
        return Err(bad("number block has the wrong length"));
    }
    Ok(out)
}

pub fn write_field(path: &Path, field: &SolutionField) -> Result<()> {
    std::fs::write(path, encode_field(field))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SolutionField> {
    decode_field(&std::fs::read_to_string(path)?)
}
