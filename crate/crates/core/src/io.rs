//! Plain-text formats: comma-separated values with `#` comment lines.
//!
//! * Matrices: one row per line.
//! * Joint distributions: for d = 2 the probability matrix with rows indexed
//!   by the first variable's cell; for any d, a `# dims: m1,m2,...` comment
//!   followed by `k1,...,kd,value` rows (0-based cell indices).
//! * Sample batches: a `# seed=…, kind=…, acceptance=…, proposals=…` comment
//!   followed by one point per line.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fit::ContingencyTensor;
use crate::joint::DiscreteJoint;
use crate::sim::{CopulaKind, SampleBatch};
use crate::tensor::Tensor;

/// Numeric rows of a CSV file plus its optional column names.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    /// Text of every `#` comment line, without the marker.
    pub comments: Vec<String>,
}

/// Parses numeric CSV. A first data line whose fields are all non-numeric is
/// taken as a header; any other unparsable field is an error naming its line.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut comments = Vec::new();
    let mut width = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            comments.push(comment.trim().to_string());
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if header.is_none() && rows.is_empty() && parsed.iter().all(Option::is_none) {
            header = Some(fields.iter().map(|f| f.to_string()).collect::<Vec<_>>());
            width = Some(fields.len());
            continue;
        }
        if let Some(pos) = parsed.iter().position(Option::is_none) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("field {} ({:?}) is not a number", pos + 1, fields[pos]),
            });
        }
        let values: Vec<f64> = parsed.into_iter().flatten().collect();
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("value {bad} is not finite"),
            });
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {w} fields, found {}", values.len()),
                })
            }
            _ => width = Some(values.len()),
        }
        rows.push(values);
    }
    Ok(CsvTable {
        header,
        rows,
        comments,
    })
}

/// Formats a matrix with optional leading comment lines.
pub fn format_matrix(rows: &[Vec<f64>], comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Shortest decimal text that reads back to the same `f64`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        // Avoid printing "-0".
        "0".to_string()
    } else if v.abs() < 1e-5 || v.abs() >= 1e16 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn dims_from_comments(comments: &[String]) -> Result<Option<Vec<usize>>> {
    for c in comments {
        if let Some(rest) = c.strip_prefix("dims:") {
            let dims = rest
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: 0,
                    message: format!("bad dims header {c:?}: {e}"),
                })?;
            return Ok(Some(dims));
        }
    }
    Ok(None)
}

/// Reads a joint distribution (either layout) at the ingestion tolerances.
pub fn parse_joint(text: &str) -> Result<DiscreteJoint> {
    DiscreteJoint::ingest(parse_joint_tensor(text)?)
}

/// Reads a joint-layout CSV into a raw tensor without validating margins.
pub fn parse_joint_tensor(text: &str) -> Result<Tensor> {
    let table = parse_csv(text)?;
    match dims_from_comments(&table.comments)? {
        Some(dims) => {
            let d = dims.len();
            let mut t = Tensor::zeros(dims.clone())?;
            let mut seen = vec![false; t.len()];
            for (row_no, row) in table.rows.iter().enumerate() {
                let line = row_no + 1;
                if row.len() != d + 1 {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {} indices and a value", d),
                    });
                }
                let mut idx = Vec::with_capacity(d);
                for (axis, (&v, &m)) in row[..d].iter().zip(&dims).enumerate() {
                    if v.fract() != 0.0 || v < 0.0 || v >= m as f64 {
                        return Err(Error::Parse {
                            line,
                            message: format!("index {v} on axis {axis} is not in 0..{m}"),
                        });
                    }
                    idx.push(v as usize);
                }
                let o = t.offset(&idx);
                if seen[o] {
                    return Err(Error::Parse {
                        line,
                        message: format!("cell {idx:?} listed twice"),
                    });
                }
                seen[o] = true;
                t.data_mut()[o] = row[d];
            }
            Ok(t)
        }
        None => {
            if table.rows.is_empty() {
                return Err(Error::Parse {
                    line: 0,
                    message: "no matrix rows found".into(),
                });
            }
            Tensor::from_rows(&table.rows)
        }
    }
}

/// Writes a joint: a matrix for d = 2, index-value rows otherwise.
pub fn format_joint(joint: &DiscreteJoint) -> String {
    format_tensor(joint.probabilities())
}

/// Same layout as [`format_joint`] for any tensor.
pub fn format_tensor(t: &Tensor) -> String {
    if t.ndim() == 2 {
        let rows = t.to_rows().expect("two axes");
        return format_matrix(&rows, &[]);
    }
    let mut out = String::new();
    let dims: Vec<String> = t.shape().iter().map(usize::to_string).collect();
    let _ = writeln!(out, "# dims: {}", dims.join(","));
    for (o, v) in t.data().iter().enumerate() {
        let idx: Vec<String> = t.unravel(o).iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{},{}", idx.join(","), format_number(*v));
    }
    out
}

/// Contingency counts in the joint layout.
pub fn format_counts(a: &ContingencyTensor) -> String {
    let t = Tensor::new(
        a.sizes().to_vec(),
        a.counts().iter().map(|&c| c as f64).collect(),
    )
    .expect("counts match their sizes");
    format_tensor(&t)
}

pub fn format_sample(batch: &SampleBatch) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# seed={}, kind={}, acceptance={}, proposals={}",
        batch.seed,
        batch.kind,
        format_number(batch.acceptance_rate()),
        batch.proposals
    );
    for p in &batch.points {
        let line: Vec<String> = p.iter().map(|v| format_number(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Reads a sample CSV written by [`format_sample`].
pub fn parse_sample(text: &str) -> Result<SampleBatch> {
    let table = parse_csv(text)?;
    let meta = table
        .comments
        .iter()
        .find(|c| c.starts_with("seed="))
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing `# seed=…, kind=…` header".into(),
        })?;
    let mut seed = None;
    let mut kind = None;
    let mut proposals = None;
    for part in meta.split(',') {
        let (key, value) = part.trim().split_once('=').ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("malformed header entry {part:?}"),
        })?;
        let bad = |e: String| Error::Parse {
            line: 1,
            message: format!("header entry {key}: {e}"),
        };
        match key {
            "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
            "kind" => {
                kind = Some(
                    value
                        .parse::<CopulaKind>()
                        .map_err(|e| bad(e.to_string()))?,
                )
            }
            "proposals" => proposals = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
            _ => {}
        }
    }
    let points = table.rows;
    let dim = points.first().map_or(0, Vec::len);
    if points.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Validation(
            "sample coordinates must lie in [0, 1]".into(),
        ));
    }
    Ok(SampleBatch {
        proposals: proposals.unwrap_or(points.len() as u64),
        points,
        dim,
        kind: kind.ok_or_else(|| Error::Parse {
            line: 1,
            message: "header lacks kind=".into(),
        })?,
        seed: seed.ok_or_else(|| Error::Parse {
            line: 1,
            message: "header lacks seed=".into(),
        })?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::example_joint;

    #[test]
    fn parse_reports_line_numbers() {
        let err = parse_csv("# c\n1,2\n3,x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_csv("1,2\n3\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn header_row_is_recognized() {
        let t = parse_csv("storm,flood\n1,2\n3,4\n").unwrap();
        assert_eq!(t.header.unwrap(), vec!["storm", "flood"]);
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
    }

    #[test]
    fn joint_roundtrip_two_dims() {
        let j = example_joint().unwrap();
        let back = parse_joint(&format_joint(&j)).unwrap();
        assert_eq!(back, j);
    }

    #[test]
    fn joint_roundtrip_three_dims() {
        let j = DiscreteJoint::independence(&[2, 3, 2]).unwrap();
        let text = format_joint(&j);
        assert!(text.starts_with("# dims: 2,3,2\n"));
        let back = parse_joint(&text).unwrap();
        assert_eq!(back.sizes(), &[2, 3, 2]);
        for (a, b) in back
            .probabilities()
            .data()
            .iter()
            .zip(j.probabilities().data())
        {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dims_layout_rejects_bad_indices() {
        assert!(parse_joint_tensor("# dims: 2,2\n0,0,0.5\n2,0,0.5\n").is_err());
        assert!(parse_joint_tensor("# dims: 2,2\n0,0,0.5\n0,0,0.5\n").is_err());
    }

    #[test]
    fn sample_roundtrip() {
        let batch = SampleBatch {
            points: vec![vec![0.25, 0.5], vec![1.0, 0.125]],
            dim: 2,
            kind: CopulaKind::Grid,
            seed: 42,
            proposals: 2,
        };
        let text = format_sample(&batch);
        assert!(text.starts_with("# seed=42, kind=grid, acceptance=1, proposals=2\n"));
        assert_eq!(parse_sample(&text).unwrap(), batch);
    }
}
