use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::output::{csv_bytes, write_atomic};
use crate::error::{Error, Result};
use crate::netdyn::AdjacencySeries;

/// Attribute levels with a weight matrix per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    pub entities: Vec<String>,
    pub periods: Vec<String>,
    /// `d x n` levels, one column per period.
    pub levels: DMatrix<f64>,
    /// Weight matrix at each period (annual matrices repeated within a year).
    pub ads: AdjacencySeries,
    /// Every weight matrix has rows summing to 0 or 1.
    pub row_stochastic: bool,
    /// Every weight matrix has columns summing to 0 or 1.
    pub column_stochastic: bool,
}

impl PanelDataset {
    pub fn d(&self) -> usize {
        self.entities.len()
    }

    pub fn n(&self) -> usize {
        self.periods.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelPaths {
    /// `period,<entity>...`
    pub levels: PathBuf,
    /// Directory holding `<year>.csv` trade matrices.
    pub trade_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    /// Periods `YYYYQk`; annual matrices cover four quarters.
    Quarterly,
    /// Periods `YYYY`.
    Annual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelOptions {
    pub frequency: Frequency,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            frequency: Frequency::Quarterly,
        }
    }
}

fn panel_err(msg: String) -> Error {
    Error::Panel(msg)
}

/// `(year, quarter)`; quarter is 0 for annual data.
fn parse_period(s: &str, freq: Frequency) -> Result<(i32, u32)> {
    let bad = || panel_err(format!("cannot parse period '{s}'"));
    match freq {
        Frequency::Annual => Ok((s.trim().parse().map_err(|_| bad())?, 0)),
        Frequency::Quarterly => {
            let t = s.trim();
            let (y, q) = t
                .split_once('Q')
                .or_else(|| t.split_once('q'))
                .ok_or_else(bad)?;
            let y: i32 = y.trim_end_matches('-').parse().map_err(|_| bad())?;
            let q: u32 = q.parse().map_err(|_| bad())?;
            if !(1..=4).contains(&q) {
                return Err(bad());
            }
            Ok((y, q))
        }
    }
}

fn next_period((y, q): (i32, u32), freq: Frequency) -> (i32, u32) {
    match freq {
        Frequency::Annual => (y + 1, 0),
        Frequency::Quarterly if q == 4 => (y + 1, 1),
        Frequency::Quarterly => (y, q + 1),
    }
}

fn parse_cell(v: &str, file: &Path, row: (usize, &str), col: &str) -> Result<f64> {
    let row = format!("{} ({})", row.0, row.1);
    let x: f64 = v.trim().parse().map_err(|_| {
        panel_err(format!(
            "{}: non-numeric value '{v}' in row {row}, column {col}",
            file.display()
        ))
    })?;
    if !x.is_finite() {
        return Err(panel_err(format!(
            "{}: non-finite value in row {row}, column {col}",
            file.display()
        )));
    }
    Ok(x)
}

/// Reads `period,<entity>...` levels.
pub fn read_levels(path: &Path) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let entities: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    if entities.is_empty() {
        return Err(panel_err(format!("{}: no entity columns", path.display())));
    }
    let mut periods = Vec::new();
    let mut cols = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        if rec.len() != entities.len() + 1 {
            return Err(panel_err(format!(
                "{}: row {} has {} cells",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        periods.push(rec[0].trim().to_string());
        for (j, e) in entities.iter().enumerate() {
            cols.push(parse_cell(&rec[j + 1], path, (i + 1, rec[0].trim()), e)?);
        }
    }
    let d = entities.len();
    let levels = DMatrix::from_column_slice(d, periods.len(), &cols);
    Ok((entities, periods, levels))
}

/// Reads a labelled square trade matrix, reordered to `entities`. Entry
/// `(i, j)` is the flow from `i` to `j`.
pub fn read_trade_matrix(path: &Path, entities: &[String]) -> Result<DMatrix<f64>> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    let cols: Vec<String> = header
        .iter()
        .skip(1)
        .map(|s| s.trim().to_string())
        .collect();
    let d = entities.len();
    let pos = |label: &str| entities.iter().position(|e| e == label);
    let col_idx: Vec<usize> = cols
        .iter()
        .map(|c| {
            pos(c).ok_or_else(|| panel_err(format!("{}: unknown entity '{c}'", path.display())))
        })
        .collect::<Result<_>>()?;
    if cols.len() != d {
        return Err(panel_err(format!(
            "{}: {} columns for {d} entities",
            path.display(),
            cols.len()
        )));
    }
    let mut m = DMatrix::from_element(d, d, f64::NAN);
    let mut seen = vec![false; d];
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let label = rec.get(0).unwrap_or_default().trim();
        let r = pos(label)
            .ok_or_else(|| panel_err(format!("{}: unknown entity '{label}'", path.display())))?;
        if rec.len() != d + 1 {
            return Err(panel_err(format!(
                "{}: row {label} has {} cells",
                path.display(),
                rec.len()
            )));
        }
        seen[r] = true;
        for (k, &c) in col_idx.iter().enumerate() {
            let v = parse_cell(&rec[k + 1], path, (i + 1, label), &cols[k])?;
            if v < 0.0 {
                return Err(panel_err(format!(
                    "{}: negative trade value {v} ({label} -> {})",
                    path.display(),
                    cols[k]
                )));
            }
            m[(r, c)] = v;
        }
    }
    if let Some(r) = seen.iter().position(|s| !s) {
        return Err(panel_err(format!(
            "{}: no row for entity '{}'",
            path.display(),
            entities[r]
        )));
    }
    Ok(m)
}

/// `W_ij = (T_ij + T_ji) / sum_k (T_kj + T_jk)`: trade between `i` and `j`
/// over the total trade of `j`. The diagonal is ignored; an entity without
/// trade gets a zero column.
pub fn trade_weights(trade: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = trade.nrows();
    if trade.ncols() != d {
        return Err(Error::Dimension("trade matrix must be square".into()));
    }
    if trade.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(panel_err(
            "trade values must be finite and non-negative".into(),
        ));
    }
    let mut v = trade + trade.transpose();
    v.fill_diagonal(0.0);
    let totals: Vec<f64> = v.column_iter().map(|c| c.sum()).collect();
    Ok(DMatrix::from_fn(d, d, |i, j| {
        if totals[j] > 0.0 {
            v[(i, j)] / totals[j]
        } else {
            0.0
        }
    }))
}

fn sums_are_unit_or_zero(sums: impl Iterator<Item = f64>) -> bool {
    sums.into_iter()
        .all(|s| s.abs() < 1e-12 || (s - 1.0).abs() < 1e-12)
}

fn stochastic_flags(mats: &[DMatrix<f64>]) -> (bool, bool) {
    let rows = mats
        .iter()
        .all(|m| sums_are_unit_or_zero(m.row_iter().map(|r| r.sum())));
    let cols = mats
        .iter()
        .all(|m| sums_are_unit_or_zero(m.column_iter().map(|c| c.sum())));
    (rows, cols)
}

/// Builds a dataset from levels and per-year trade matrices already in
/// memory.
pub fn assemble_panel(
    entities: Vec<String>,
    periods: Vec<String>,
    levels: DMatrix<f64>,
    trade_by_year: &BTreeMap<i32, DMatrix<f64>>,
    opts: &PanelOptions,
) -> Result<PanelDataset> {
    let d = entities.len();
    if levels.nrows() != d || levels.ncols() != periods.len() {
        return Err(Error::Dimension(
            "levels do not match entities and periods".into(),
        ));
    }
    if periods.len() < 2 {
        return Err(panel_err("need at least two periods".into()));
    }
    let parsed: Vec<(i32, u32)> = periods
        .iter()
        .map(|p| parse_period(p, opts.frequency))
        .collect::<Result<_>>()?;
    for (k, w) in parsed.windows(2).enumerate() {
        if next_period(w[0], opts.frequency) != w[1] {
            return Err(panel_err(format!(
                "periods '{}' and '{}' are not consecutive",
                periods[k],
                periods[k + 1]
            )));
        }
    }
    let mut weights: BTreeMap<i32, DMatrix<f64>> = BTreeMap::new();
    let mut mats = Vec::with_capacity(parsed.len());
    for (y, _) in &parsed {
        if !weights.contains_key(y) {
            let t = trade_by_year
                .get(y)
                .ok_or_else(|| panel_err(format!("missing trade matrix for year {y}")))?;
            if t.nrows() != d {
                return Err(panel_err(format!(
                    "trade matrix for year {y} is {}x{}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            weights.insert(*y, trade_weights(t)?);
        }
        mats.push(weights[y].clone());
    }
    let (row_stochastic, column_stochastic) = stochastic_flags(&mats);
    let ads = AdjacencySeries::new(d, 1, mats)?;
    Ok(PanelDataset {
        entities,
        periods,
        levels,
        ads,
        row_stochastic,
        column_stochastic,
    })
}

/// Reads the levels file and `<year>.csv` for every year it covers.
pub fn ingest_panel(paths: &PanelPaths, opts: &PanelOptions) -> Result<PanelDataset> {
    let (entities, periods, levels) = read_levels(&paths.levels)?;
    let mut trade = BTreeMap::new();
    for p in &periods {
        let (y, _) = parse_period(p, opts.frequency)?;
        if trade.contains_key(&y) {
            continue;
        }
        let file = paths.trade_dir.join(format!("{y}.csv"));
        if !file.exists() {
            return Err(panel_err(format!(
                "missing trade matrix for year {y} ({})",
                file.display()
            )));
        }
        trade.insert(y, read_trade_matrix(&file, &entities)?);
    }
    assemble_panel(entities, periods, levels, &trade, opts)
}

/// Writes `levels.csv` and `trade/<year>.csv` in the layout `ingest_panel`
/// reads.
pub fn write_panel_files(
    dir: &Path,
    entities: &[String],
    periods: &[String],
    levels: &DMatrix<f64>,
    trade_by_year: &BTreeMap<i32, DMatrix<f64>>,
) -> Result<PanelPaths> {
    let mut header = vec!["period".to_string()];
    header.extend(entities.iter().cloned());
    let rows = periods.iter().enumerate().map(|(k, p)| {
        let mut row = vec![p.clone()];
        row.extend(levels.column(k).iter().map(|v| v.to_string()));
        row
    });
    let levels_path = dir.join("levels.csv");
    write_atomic(&levels_path, &csv_bytes(&header, rows)?)?;
    let trade_dir = dir.join("trade");
    for (y, t) in trade_by_year {
        let mut header = vec!["from".to_string()];
        header.extend(entities.iter().cloned());
        let rows = entities.iter().enumerate().map(|(i, e)| {
            let mut row = vec![e.clone()];
            row.extend(t.row(i).iter().map(|v| v.to_string()));
            row
        });
        write_atomic(
            &trade_dir.join(format!("{y}.csv")),
            &csv_bytes(&header, rows)?,
        )?;
    }
    Ok(PanelPaths {
        levels: levels_path,
        trade_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periods() {
        assert_eq!(
            parse_period("1999Q4", Frequency::Quarterly).unwrap(),
            (1999, 4)
        );
        assert_eq!(
            parse_period("2001-Q1", Frequency::Quarterly).unwrap(),
            (2001, 1)
        );
        assert!(parse_period("2001Q5", Frequency::Quarterly).is_err());
        assert_eq!(next_period((1999, 4), Frequency::Quarterly), (2000, 1));
        assert_eq!(next_period((1999, 0), Frequency::Annual), (2000, 0));
    }
}
