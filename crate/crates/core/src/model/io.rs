use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// CSV with header `t,x1,...,xd`, one row per column of `x`.
pub fn write_series_csv<W: Write>(w: W, x: &DMatrix<f64>, t0: i64) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=x.nrows()).map(|i| format!("x{i}")));
    wr.write_record(&header)?;
    for k in 0..x.ncols() {
        let mut rec = vec![(t0 + k as i64).to_string()];
        rec.extend(x.column(k).iter().map(|v| v.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `t,x1,...,xd`; times must be consecutive. Returns `(t0, x)`.
pub fn read_series_csv<R: Read>(r: R) -> Result<(i64, DMatrix<f64>)> {
    let mut rd = csv::Reader::from_reader(r);
    let headers = rd.headers()?.clone();
    let d = headers.len().saturating_sub(1);
    let ok = headers.get(0).map(str::trim) == Some("t")
        && headers
            .iter()
            .skip(1)
            .enumerate()
            .all(|(i, h)| h.trim() == format!("x{}", i + 1));
    if !ok || d == 0 {
        return Err(Error::Parse(format!(
            "expected header t,x1,...,xd, got {:?}",
            headers
        )));
    }
    let mut t0 = None;
    let mut cols: Vec<f64> = Vec::new();
    let mut n = 0usize;
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse(format!("row {}: non-numeric cell", line + 2));
        if rec.len() != d + 1 {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields",
                line + 2,
                d + 1
            )));
        }
        let t: i64 = rec[0].trim().parse().map_err(|_| bad())?;
        let start = *t0.get_or_insert(t);
        if t != start + n as i64 {
            return Err(Error::Parse(format!(
                "row {}: time {t} out of sequence",
                line + 2
            )));
        }
        for v in rec.iter().skip(1) {
            cols.push(v.trim().parse().map_err(|_| bad())?);
        }
        n += 1;
    }
    Ok((t0.unwrap_or(1), DMatrix::from_vec(d, n, cols)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.5, -3.0, 0.125, 1e-9, 7.0]);
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &x, 5).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,x1,x2\n5,1,0.125\n"));
        let (t0, back) = read_series_csv(&buf[..]).unwrap();
        assert_eq!((t0, back), (5, x));
    }

    #[test]
    fn rejects_gaps_and_text() {
        assert!(read_series_csv("t,x1\n1,0\n3,0\n".as_bytes()).is_err());
        assert!(read_series_csv("t,x1\n1,abc\n".as_bytes()).is_err());
        assert!(read_series_csv("t,y\n1,0\n".as_bytes()).is_err());
    }
}
