//! Line-oriented landmark text format.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! frame <id> p=<count> [gt] [cam]
//! u v [x y z]          <- p lines; x y z present iff `gt`
//! m11 m12              <- 3 lines iff `cam` (ground-truth 3x2 camera)
//! ```
//!
//! Numbers are decimal `f64`. The writer emits the shortest representation
//! that parses back to the same bits, so save → load is exact.

use std::fmt::Write as _;

use crate::data::{LandmarkDataset, LandmarkFrame};
use crate::error::{Error, Result};
use crate::linalg::Mat;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_numbers(text: &str, line: usize, expect: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split_whitespace()
        .map(|tok| tok.parse::<f64>().map_err(|_| parse_err(line, format!("not a number: {tok:?}"))))
        .collect::<Result<_>>()?;
    if vals.len() != expect {
        return Err(parse_err(line, format!("expected {expect} numbers, found {}", vals.len())));
    }
    if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
        return Err(parse_err(line, format!("non-finite value {v}")));
    }
    Ok(vals)
}

struct Header {
    id: String,
    p: usize,
    gt: bool,
    cam: bool,
}

fn parse_header(text: &str, line: usize) -> Result<Header> {
    let mut toks = text.split_whitespace();
    if toks.next() != Some("frame") {
        return Err(parse_err(line, "expected a `frame` header"));
    }
    let id = toks.next().ok_or_else(|| parse_err(line, "frame header missing id"))?.to_string();
    let p_tok = toks.next().ok_or_else(|| parse_err(line, "frame header missing p=<count>"))?;
    let p = p_tok
        .strip_prefix("p=")
        .and_then(|v| v.parse::<usize>().ok())
        .ok_or_else(|| parse_err(line, format!("bad point count {p_tok:?}")))?;
    let (mut gt, mut cam) = (false, false);
    for flag in toks {
        match flag {
            "gt" if !gt => gt = true,
            "cam" if !cam => cam = true,
            other => return Err(parse_err(line, format!("unknown frame flag {other:?}"))),
        }
    }
    Ok(Header { id, p, gt, cam })
}

/// Parses a dataset. Frames must all have the same landmark count.
pub fn parse_landmarks(text: &str) -> Result<LandmarkDataset> {
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut frames = Vec::new();
    let mut p_common: Option<usize> = None;

    while let Some((line, text)) = lines.next() {
        let header = parse_header(text, line)?;
        if let Some(p) = p_common {
            if header.p != p {
                return Err(Error::Schema(format!(
                    "frame {:?} (line {line}) has {} points, earlier frames have {p}",
                    header.id, header.p
                )));
            }
        }
        p_common = Some(header.p);
        let width = if header.gt { 5 } else { 2 };
        let mut w = Vec::with_capacity(2 * header.p);
        let mut s = Vec::with_capacity(3 * header.p);
        for _ in 0..header.p {
            let (ln, row) = lines.next().ok_or_else(|| parse_err(line, format!("frame {:?} ends early", header.id)))?;
            if row.starts_with("frame") {
                return Err(parse_err(ln, format!("frame {:?} has fewer than {} points", header.id, header.p)));
            }
            let vals = parse_numbers(row, ln, width)?;
            w.extend_from_slice(&vals[..2]);
            s.extend_from_slice(&vals[2..]);
        }
        let mut cam = Vec::with_capacity(6);
        if header.cam {
            for _ in 0..3 {
                let (ln, row) =
                    lines.next().ok_or_else(|| parse_err(line, format!("frame {:?} camera ends early", header.id)))?;
                cam.extend(parse_numbers(row, ln, 2)?);
            }
        }
        frames.push(LandmarkFrame {
            id: header.id,
            w: Mat::from_vec(header.p, 2, w)?,
            gt_shape: if header.gt { Some(Mat::from_vec(header.p, 3, s)?) } else { None },
            gt_camera: if header.cam { Some(Mat::from_vec(3, 2, cam)?) } else { None },
            offset: [0.0, 0.0],
        });
    }
    LandmarkDataset::new(p_common.unwrap_or(0), frames)
}

/// Serializes a dataset. Offsets are not stored; the file holds `w` as is.
pub fn format_landmarks(ds: &LandmarkDataset) -> String {
    let mut out = String::new();
    for f in &ds.frames {
        let _ = write!(out, "frame {} p={}", f.id, ds.p);
        if f.gt_shape.is_some() {
            out.push_str(" gt");
        }
        if f.gt_camera.is_some() {
            out.push_str(" cam");
        }
        out.push('\n');
        for i in 0..ds.p {
            let _ = write!(out, "{} {}", f.w[(i, 0)], f.w[(i, 1)]);
            if let Some(s) = &f.gt_shape {
                let _ = write!(out, " {} {} {}", s[(i, 0)], s[(i, 1)], s[(i, 2)]);
            }
            out.push('\n');
        }
        if let Some(m) = &f.gt_camera {
            for i in 0..3 {
                let _ = writeln!(out, "{} {}", m[(i, 0)], m[(i, 1)]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_without_ground_truth() {
        let text = "frame a p=4\n0 0\n1 0\n0 1\n1 1\n# second\n\nframe b p=4\n1 2\n3 4\n5 6\n7 8\n";
        let ds = parse_landmarks(text).unwrap();
        assert_eq!(ds.p, 4);
        assert_eq!(ds.frames.len(), 2);
        assert!(ds.frames.iter().all(|f| f.gt_shape.is_none() && f.gt_camera.is_none()));
        assert_eq!(ds.frames[1].w[(3, 1)], 8.0);
    }

    #[test]
    fn mismatched_point_counts_name_the_frame() {
        let text = "frame a p=2\n0 0\n1 1\nframe bad p=3\n0 0\n1 1\n2 2\n";
        match parse_landmarks(text) {
            Err(Error::Schema(msg)) => assert!(msg.contains("bad"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = "frame a p=2\n0 0\n1 x\n";
        assert!(matches!(parse_landmarks(text), Err(Error::Parse { line: 3, .. })));
        let text = "frame a p=2 gt\n0 0 1 2 3\n1 1\n";
        assert!(matches!(parse_landmarks(text), Err(Error::Parse { line: 3, .. })));
        let text = "frame a p=3\n0 0\n1 1\nframe b p=3\n";
        assert!(matches!(parse_landmarks(text), Err(Error::Parse { line: 4, .. })));
        assert!(matches!(parse_landmarks("frame a q=2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_landmarks("frame a p=1 bogus\n0 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_landmarks("frame a p=1\nnan 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn ground_truth_and_camera_round_trip() {
        let text = "frame f0 p=2 gt cam\n0.1 -0.2 1 2 3\n0.3 0.4 4 5 6\n1 0\n0 1\n0 0\n";
        let ds = parse_landmarks(text).unwrap();
        let f = &ds.frames[0];
        assert_eq!(f.gt_shape.as_ref().unwrap()[(1, 2)], 6.0);
        assert_eq!(f.gt_camera.as_ref().unwrap(), &Mat::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0]]));
        assert_eq!(format_landmarks(&ds), text);
    }

    #[test]
    fn empty_input_is_empty_dataset() {
        let ds = parse_landmarks("# nothing\n").unwrap();
        assert!(ds.frames.is_empty());
    }
}
