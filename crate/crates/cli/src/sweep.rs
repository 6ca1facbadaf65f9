//! One report per grid point, flattened into CSV rows.

use irrevkit::comb::ExtractionMethod;
use rayon::prelude::*;
use serde_json::Value;

use crate::run::{cell, run_scenario};
use crate::scenario::Scenario;
use crate::CliError;

/// Sweeping this name replaces the extraction θ grid and lists δ²(θ).
pub const THETA: &str = "theta";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub passed: bool,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in std::iter::once(&self.header).chain(&self.rows) {
            w.write_record(r).expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("writing to memory")).expect("cells are UTF-8")
    }
}

/// Comma-separated reals.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, CliError> {
    let grid = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| CliError::schema(format!("grid: {t:?} is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if grid.is_empty() {
        return Err(CliError::schema("grid: no values"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(CliError::schema(format!("grid: non-finite value {x}")));
    }
    Ok(grid)
}

fn unescape(token: &str) -> String {
    token.replace("~1", "/").replace("~0", "~")
}

/// Set `pointer` in `doc`, creating the last key if its parent object exists.
fn set_pointer(doc: &mut Value, pointer: &str, v: f64) -> Result<(), CliError> {
    let bad = || CliError::schema(format!("param: {pointer:?} does not address a field of the scenario"));
    let (parent, last) = pointer.rsplit_once('/').ok_or_else(bad)?;
    let last = unescape(last);
    match doc.pointer_mut(parent).ok_or_else(bad)? {
        Value::Object(m) => {
            m.insert(last, v.into());
        }
        Value::Array(a) => {
            let i: usize = last.parse().map_err(|_| bad())?;
            *a.get_mut(i).ok_or_else(bad)? = v.into();
        }
        _ => return Err(bad()),
    }
    Ok(())
}

pub fn sweep(doc: &Value, param: &str, grid: &[f64]) -> Result<Table, CliError> {
    if grid.is_empty() {
        return Err(CliError::schema("grid: no values"));
    }
    if param == THETA {
        return theta_sweep(doc, grid);
    }
    if !param.starts_with('/') {
        return Err(CliError::schema(format!("param: expected {THETA:?} or a JSON pointer, found {param:?}")));
    }
    let reports = grid
        .par_iter()
        .map(|&g| {
            let mut d = doc.clone();
            set_pointer(&mut d, param, g)?;
            run_scenario(&Scenario::from_value(d)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let name = unescape(param.rsplit('/').next().unwrap_or(param));
    let mut header = vec![name];
    header.extend(reports[0].summary().into_iter().map(|(k, _)| k.to_string()));
    let rows = grid
        .iter()
        .zip(&reports)
        .map(|(g, r)| std::iter::once(format!("{g:?}")).chain(r.summary().into_iter().map(|(_, v)| v)).collect())
        .collect();
    Ok(Table { header, rows, passed: reports.iter().all(|r| r.passed) })
}

fn theta_sweep(doc: &Value, grid: &[f64]) -> Result<Table, CliError> {
    let mut s = Scenario::from_value(doc.clone())?;
    let kind = s.kind;
    let ex = s.extraction_mut().ok_or_else(|| CliError::schema(format!("param: kind {kind:?} has no θ grid")))?;
    ex.grid = grid.to_vec();
    ex.method = ExtractionMethod::Extrapolated;
    let r = run_scenario(&s)?;
    let points = ["/iep/theta_grid", "/bound/iep/theta_grid"]
        .iter()
        .find_map(|p| r.result.pointer(p))
        .and_then(Value::as_array)
        .ok_or_else(|| CliError::schema("report has no θ grid"))?;
    let rows = points
        .iter()
        .map(|pt| pt.as_array().map(|xs| xs.iter().map(cell).collect()).unwrap_or_default())
        .collect();
    Ok(Table { header: vec![THETA.into(), "delta_sq".into()], rows, passed: r.passed })
}
