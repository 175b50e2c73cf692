//! CSV ingestion: one value per line, or `x,y` rows in regression mode.
//! An optional non-numeric first line is treated as a header. Errors carry
//! 1-based line numbers.

use std::path::Path;

use fdpv_core::TimeSeries;

#[derive(Debug)]
pub enum IngestError {
    Io(std::io::Error),
    Parse { line: usize, message: String },
}

impl std::fmt::Display for IngestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IngestError::Io(e) => write!(f, "cannot read input: {e}"),
            IngestError::Parse { line, message } => write!(f, "line {line}: {message}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    Univariate,
    /// Two columns `x,y` with equidistant `x`.
    Regression,
}

fn parse_fields(line: &str) -> Vec<&str> {
    line.split(',').map(str::trim).collect()
}

fn numeric_row(fields: &[&str]) -> Option<Vec<f64>> {
    fields
        .iter()
        .map(|f| f.parse::<f64>().ok())
        .collect::<Option<Vec<f64>>>()
}

/// Parse a CSV file into a series. In regression mode the sampling step is
/// derived from the abscissae, which must be equidistant and increasing.
pub fn ingest_csv(path: &Path, mode: IngestMode) -> Result<TimeSeries, IngestError> {
    let text = std::fs::read_to_string(path).map_err(IngestError::Io)?;
    let expected = match mode {
        IngestMode::Univariate => 1usize,
        IngestMode::Regression => 2usize,
    };
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut first_data_line = true;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields = parse_fields(line);
        let parsed = numeric_row(&fields);
        match parsed {
            None if first_data_line => {
                // header row
                first_data_line = false;
                continue;
            }
            None => {
                return Err(IngestError::Parse {
                    line: line_no,
                    message: format!("non-numeric value in `{line}`"),
                });
            }
            Some(values) => {
                first_data_line = false;
                if values.len() != expected {
                    return Err(IngestError::Parse {
                        line: line_no,
                        message: format!(
                            "expected {expected} column(s), found {}",
                            values.len()
                        ),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(IngestError::Parse {
                        line: line_no,
                        message: "non-finite value".into(),
                    });
                }
                rows.push((line_no, values));
            }
        }
    }
    if rows.is_empty() {
        return Err(IngestError::Parse {
            line: text.lines().count().max(1),
            message: "no data rows".into(),
        });
    }

    match mode {
        IngestMode::Univariate => {
            let values = rows.into_iter().map(|(_, v)| v[0]).collect();
            TimeSeries::univariate(values).map_err(|e| IngestError::Parse {
                line: 1,
                message: e.to_string(),
            })
        }
        IngestMode::Regression => {
            if rows.len() < 2 {
                return Err(IngestError::Parse {
                    line: rows[0].0,
                    message: "regression input needs at least two rows".into(),
                });
            }
            let delta = rows[1].1[0] - rows[0].1[0];
            if !(delta > 0.0) {
                return Err(IngestError::Parse {
                    line: rows[1].0,
                    message: "abscissae must be strictly increasing".into(),
                });
            }
            let x0 = rows[0].1[0];
            let tol = 1e-6 * delta.abs();
            for (i, (line_no, v)) in rows.iter().enumerate() {
                let expected_x = x0 + delta * i as f64;
                if (v[0] - expected_x).abs() > tol + 1e-12 * expected_x.abs() {
                    return Err(IngestError::Parse {
                        line: *line_no,
                        message: format!(
                            "abscissae must be equidistant: found {} where {} was expected",
                            v[0], expected_x
                        ),
                    });
                }
            }
            let values: Vec<f64> = rows.iter().map(|(_, v)| v[1]).collect();
            let origin = x0 - delta;
            TimeSeries::regression_with_origin(values, delta, origin).map_err(|e| {
                IngestError::Parse {
                    line: 1,
                    message: e.to_string(),
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_single_column() {
        let f = write_temp("1.0\n2.0\n3.0\n");
        let s = ingest_csv(f.path(), IngestMode::Univariate).unwrap();
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn skips_a_header_row() {
        let f = write_temp("value\n1.0\n2.0\n");
        let s = ingest_csv(f.path(), IngestMode::Univariate).unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn reports_the_offending_line() {
        let f = write_temp("1.0\nabc\n3.0\n");
        match ingest_csv(f.path(), IngestMode::Univariate) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn regression_derives_the_design() {
        let f = write_temp("x,y\n0.5,1.0\n1.0,2.0\n1.5,3.0\n");
        let s = ingest_csv(f.path(), IngestMode::Regression).unwrap();
        let d = s.design().unwrap();
        assert!((d.delta - 0.5).abs() < 1e-12);
        assert!((d.x(1) - 0.5).abs() < 1e-12);
        assert_eq!(s.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn regression_rejects_uneven_spacing() {
        let f = write_temp("1,1.0\n2,2.0\n4,3.0\n");
        match ingest_csv(f.path(), IngestMode::Regression) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_finite_and_wrong_arity() {
        let f = write_temp("1.0\nnan\n");
        assert!(matches!(
            ingest_csv(f.path(), IngestMode::Univariate),
            Err(IngestError::Parse { line: 2, .. })
        ));
        let f = write_temp("1.0,2.0\n");
        assert!(matches!(
            ingest_csv(f.path(), IngestMode::Univariate),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }
}
