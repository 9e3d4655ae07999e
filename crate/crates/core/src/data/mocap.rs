//! Converter for motion-capture exports with one skeleton per CSV row.
//!
//! Each data row holds `3p` numbers `x₁,y₁,z₁,x₂,…`. A first row that does not
//! parse as numbers is treated as a header. Empty fields are rejected since
//! missing markers are not supported.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Mat;

pub fn read_mocap_csv(path: &Path) -> Result<Vec<Mat>> {
    let file = std::fs::File::open(path)?;
    parse_mocap_csv(file)
}

pub fn parse_mocap_csv<R: std::io::Read>(reader: R) -> Result<Vec<Mat>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut shapes = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in rdr.records().enumerate() {
        let line = idx + 1;
        let record = record.map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(|f| f.parse::<f64>()).collect();
        let vals = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(Error::Parse { line, msg: format!("bad number: {e}") }),
        };
        if vals.len() % 3 != 0 || vals.is_empty() {
            return Err(Error::Parse { line, msg: format!("{} values is not a multiple of 3", vals.len()) });
        }
        if let Some(w) = width {
            if w != vals.len() {
                return Err(Error::Schema(format!("row {line} has {} values, earlier rows have {w}", vals.len())));
            }
        }
        width = Some(vals.len());
        let p = vals.len() / 3;
        shapes.push(Mat::from_vec(p, 3, vals).map_err(|e| Error::Parse { line, msg: e.to_string() })?);
    }
    Ok(shapes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let text = "j1x,j1y,j1z,j2x,j2y,j2z\n0,1,2,3,4,5\n6,7,8,9,10,11\n";
        let shapes = parse_mocap_csv(text.as_bytes()).unwrap();
        assert_eq!(shapes.len(), 2);
        assert_eq!(shapes[1], Mat::from_rows(&[&[6.0, 7.0, 8.0], &[9.0, 10.0, 11.0]]));
    }

    #[test]
    fn ragged_and_bad_rows() {
        assert!(matches!(parse_mocap_csv("0,1,2\n0,1,2,3,4,5\n".as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(parse_mocap_csv("0,1\n".as_bytes()), Err(Error::Parse { .. })));
        assert!(matches!(parse_mocap_csv("0,1,2\n0,x,2\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
