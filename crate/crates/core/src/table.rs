//! Labelled-matrix CSV helpers: a header row `<corner>,<col1>,...` and one
//! row per label.

use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};

pub(crate) fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("is_io_error checked"),
        }
    } else {
        Error::Format(e.to_string())
    }
}

pub(crate) fn write_labelled_matrix<W: Write>(
    out: W,
    corner: &str,
    rows: &[String],
    cols: &[String],
    matrix: &Array2<f64>,
    fmt: impl Fn(f64) -> String,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![corner.to_string()];
    header.extend(cols.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (label, row) in rows.iter().zip(matrix.rows()) {
        let mut rec = vec![label.clone()];
        rec.extend(row.iter().map(|&v| fmt(v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn read_labelled_matrix<R: Read>(
    input: R,
    corner: &str,
) -> Result<(Vec<String>, Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some(corner) {
        return Err(Error::Format(format!("expected header starting with {corner:?}")));
    }
    let cols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != cols.len() + 1 {
            return Err(Error::Format(format!("row {:?} has {} fields, expected {}", &rec[0], rec.len(), cols.len() + 1)));
        }
        rows.push(rec[0].to_string());
        for v in rec.iter().skip(1) {
            values.push(parse_f64(v)?);
        }
    }
    let matrix = Array2::from_shape_vec((rows.len(), cols.len()), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    Ok((rows, cols, matrix))
}

pub(crate) fn parse_f64(v: &str) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad number {v:?}")))
}
