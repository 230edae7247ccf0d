use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_to_rows, rows_to_matrix};

/// A contiguous, time-indexed sequence of `d x d` edge-weight matrices with
/// entries in `[-1, 1]`. Entry `(i, j)` is the weight of the edge from vertex
/// `i` to vertex `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencySeries {
    d: usize,
    t0: i64,
    mats: Vec<DMatrix<f64>>,
}

pub(crate) fn check_snapshot(d: usize, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::Dimension(format!(
            "snapshot is {}x{}, expected {d}x{d}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(v) = m.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("edge weight {v} outside [-1, 1]")));
    }
    Ok(())
}

impl AdjacencySeries {
    pub fn new(d: usize, t0: i64, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        for m in &mats {
            check_snapshot(d, m)?;
        }
        Ok(Self { d, t0, mats })
    }

    pub fn empty(d: usize, t0: i64) -> Self {
        Self {
            d,
            t0,
            mats: Vec::new(),
        }
    }

    /// The same snapshot repeated `len` times.
    pub fn constant(m: &DMatrix<f64>, t0: i64, len: usize) -> Result<Self> {
        Self::new(m.nrows(), t0, vec![m.clone(); len])
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Time of the last snapshot.
    pub fn end_time(&self) -> i64 {
        self.t0 + self.mats.len() as i64 - 1
    }

    pub fn mats(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn into_mats(self) -> Vec<DMatrix<f64>> {
        self.mats
    }

    /// Snapshot at absolute time `t`.
    pub fn get(&self, t: i64) -> Option<&DMatrix<f64>> {
        let k = t - self.t0;
        if k < 0 {
            return None;
        }
        self.mats.get(k as usize)
    }

    /// Snapshot at position `k` (time `t0 + k`).
    pub fn at(&self, k: usize) -> &DMatrix<f64> {
        &self.mats[k]
    }

    pub fn last(&self) -> Option<&DMatrix<f64>> {
        self.mats.last()
    }

    pub fn push(&mut self, m: DMatrix<f64>) -> Result<()> {
        check_snapshot(self.d, &m)?;
        self.mats.push(m);
        Ok(())
    }

    /// Positions `start..end` as a new series.
    pub fn slice(&self, start: usize, end: usize) -> AdjacencySeries {
        AdjacencySeries {
            d: self.d,
            t0: self.t0 + start as i64,
            mats: self.mats[start..end].to_vec(),
        }
    }

    pub fn is_binary(&self) -> bool {
        self.mats
            .iter()
            .all(|m| m.iter().all(|v| *v == 0.0 || *v == 1.0))
    }

    /// Time-averaged edge weights.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let mut acc = DMatrix::zeros(self.d, self.d);
        for m in &self.mats {
            acc += m;
        }
        if !self.mats.is_empty() {
            acc /= self.mats.len() as f64;
        }
        acc
    }

    /// Long CSV: header `t,i,j,w`, 1-based vertex indices, zero entries
    /// omitted. An all-zero snapshot is written as a single `t,1,1,0` row so
    /// that every time point appears.
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "i", "j", "w"])?;
        for (k, m) in self.mats.iter().enumerate() {
            let t = self.t0 + k as i64;
            let mut any = false;
            for i in 0..self.d {
                for j in 0..self.d {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        any = true;
                        wr.write_record([
                            t.to_string(),
                            (i + 1).to_string(),
                            (j + 1).to_string(),
                            v.to_string(),
                        ])?;
                    }
                }
            }
            if !any {
                wr.write_record([t.to_string(), "1".into(), "1".into(), "0".into()])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the long CSV format. `d` defaults to the largest vertex index
    /// seen. Every time between the first and last must have at least one row.
    pub fn read_long_csv<R: Read>(r: R, d: Option<usize>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        let expect = ["t", "i", "j", "w"];
        if headers.len() != 4 || headers.iter().zip(expect).any(|(h, e)| h.trim() != e) {
            return Err(Error::Parse(format!(
                "expected header t,i,j,w, got {:?}",
                headers
            )));
        }
        let mut entries: BTreeMap<i64, Vec<(usize, usize, f64)>> = BTreeMap::new();
        let mut max_idx = 0usize;
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            let field = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
            let bad = |what: &str| Error::Parse(format!("row {}: bad {what}", line + 2));
            let t: i64 = field(0).parse().map_err(|_| bad("t"))?;
            let i: usize = field(1).parse().map_err(|_| bad("i"))?;
            let j: usize = field(2).parse().map_err(|_| bad("j"))?;
            let w: f64 = field(3).parse().map_err(|_| bad("w"))?;
            if i == 0 || j == 0 {
                return Err(Error::Parse(format!(
                    "row {}: indices are 1-based",
                    line + 2
                )));
            }
            max_idx = max_idx.max(i).max(j);
            entries.entry(t).or_default().push((i - 1, j - 1, w));
        }
        let d = d.unwrap_or(max_idx);
        if max_idx > d {
            return Err(Error::Dimension(format!(
                "vertex index {max_idx} exceeds d = {d}"
            )));
        }
        let (Some(&first), Some(&last)) = (entries.keys().next(), entries.keys().last()) else {
            return Ok(Self::empty(d, 1));
        };
        let mut mats = Vec::with_capacity((last - first + 1) as usize);
        for t in first..=last {
            let rows = entries.get(&t).ok_or_else(|| {
                Error::Parse(format!("time {t} missing: times must be contiguous"))
            })?;
            let mut m = DMatrix::zeros(d, d);
            for &(i, j, w) in rows {
                m[(i, j)] = w;
            }
            mats.push(m);
        }
        Self::new(d, first, mats)
    }

    /// Dense JSON: `[{"t": .., "rows": [[..], ..]}, ..]`.
    pub fn to_dense_json(&self) -> serde_json::Value {
        let items: Vec<DenseSnapshot> = self
            .mats
            .iter()
            .enumerate()
            .map(|(k, m)| DenseSnapshot {
                t: self.t0 + k as i64,
                rows: matrix_to_rows(m),
            })
            .collect();
        serde_json::to_value(items).expect("plain data serializes")
    }

    pub fn from_dense_json(v: &serde_json::Value) -> Result<Self> {
        let mut items: Vec<DenseSnapshot> = serde_json::from_value(v.clone())?;
        items.sort_by_key(|s| s.t);
        let Some(first) = items.first() else {
            return Err(Error::Parse("empty network series".into()));
        };
        let t0 = first.t;
        let d = first.rows.len();
        let mut mats = Vec::with_capacity(items.len());
        for (k, s) in items.iter().enumerate() {
            if s.t != t0 + k as i64 {
                return Err(Error::Parse(format!("time {} out of sequence", s.t)));
            }
            mats.push(rows_to_matrix(&s.rows)?);
        }
        Self::new(d, t0, mats)
    }
}

#[derive(Serialize, Deserialize)]
struct DenseSnapshot {
    t: i64,
    rows: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AdjacencySeries {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        let z = DMatrix::zeros(2, 2);
        AdjacencySeries::new(2, 3, vec![a.clone(), z, a]).unwrap()
    }

    #[test]
    fn rejects_out_of_range_weights() {
        let bad = DMatrix::from_element(2, 2, 1.5);
        assert!(AdjacencySeries::new(2, 0, vec![bad]).is_err());
    }

    #[test]
    fn long_csv_round_trip_keeps_empty_snapshots() {
        let s = sample();
        let mut buf = Vec::new();
        s.write_long_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,i,j,w\n"));
        assert!(text.contains("4,1,1,0\n"));
        let back = AdjacencySeries::read_long_csv(&buf[..], Some(2)).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn long_csv_gap_is_an_error() {
        let text = "t,i,j,w\n1,1,2,1\n3,1,2,1\n";
        assert!(AdjacencySeries::read_long_csv(text.as_bytes(), None).is_err());
    }

    #[test]
    fn dense_json_round_trip() {
        let s = sample();
        let v = s.to_dense_json();
        assert_eq!(AdjacencySeries::from_dense_json(&v).unwrap(), s);
    }

    #[test]
    fn get_by_time() {
        let s = sample();
        assert!(s.get(2).is_none());
        assert_eq!(s.get(4).unwrap(), &DMatrix::zeros(2, 2));
        assert_eq!(s.end_time(), 5);
    }
}
