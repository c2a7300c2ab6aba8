//! Datasets and their CSV form: a header naming input columns then output
//! columns, one sample per row, decimal text.

use super::ProblemDef;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Analytic,
    FiniteDifference,
    Ingested,
}

/// A batch of (input, output) samples. Inputs and outputs are row-aligned;
/// outputs are clean reference values unless produced by [`super::add_noise`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Array2<f64>,
    pub outputs: Array2<f64>,
    pub source: Source,
}

impl Dataset {
    pub fn new(inputs: Array2<f64>, outputs: Array2<f64>, source: Source) -> Result<Self> {
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: outputs.nrows(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            source,
        })
    }

    pub fn empty(input_dim: usize, output_dim: usize, source: Source) -> Self {
        Self {
            inputs: Array2::zeros((0, input_dim)),
            outputs: Array2::zeros((0, output_dim)),
            source,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let d_in = self.inputs.ncols();
        let d_out = self.outputs.ncols();
        let mut inputs = Array2::zeros((rows.len(), d_in));
        let mut outputs = Array2::zeros((rows.len(), d_out));
        for (k, &r) in rows.iter().enumerate() {
            inputs.row_mut(k).assign(&self.inputs.row(r));
            outputs.row_mut(k).assign(&self.outputs.row(r));
        }
        Dataset {
            inputs,
            outputs,
            source: self.source,
        }
    }
}

/// Write `dataset` with the problem's column names.
pub fn write_dataset_csv(path: &Path, dataset: &Dataset, problem: &ProblemDef) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let header: Vec<&str> = problem
        .input_names
        .iter()
        .chain(problem.output_names.iter())
        .copied()
        .collect();
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for (xin, xout) in dataset.inputs.outer_iter().zip(dataset.outputs.outer_iter()) {
        let rec: Vec<String> = xin
            .iter()
            .chain(xout.iter())
            .map(|v| format!("{v}"))
            .collect();
        w.write_record(&rec).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Plain read of a dataset CSV with the problem's expected header.
pub fn read_dataset_csv(path: &Path, problem: &ProblemDef) -> Result<Dataset> {
    Ok(ingest_dataset(path, problem)?.dataset)
}

#[derive(Debug)]
pub struct IngestReport {
    pub dataset: Dataset,
    /// Non-fatal oddities, e.g. rows outside the declared domain.
    pub warnings: Vec<String>,
    /// Whether the row count matches the problem's full reference grid.
    pub full_grid: bool,
}

/// Read and validate a dataset file. Malformed rows and header mismatches
/// fail; out-of-domain coordinates only warn (extrapolation test sets live
/// outside the training domain by design).
pub fn ingest_dataset(path: &Path, problem: &ProblemDef) -> Result<IngestReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let expected: Vec<&str> = problem
        .input_names
        .iter()
        .chain(problem.output_names.iter())
        .copied()
        .collect();
    let headers = reader
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Data(format!(
            "header mismatch: expected {expected:?}, got {got:?}"
        )));
    }
    let d_in = problem.input_names.len();
    let d_out = problem.output_names.len();
    let mut rows: Vec<f64> = Vec::new();
    let mut n_rows = 0usize;
    let mut warnings = Vec::new();
    let mut out_of_domain = 0usize;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::CsvParse {
            line: k + 2,
            message: e.to_string(),
        })?;
        if record.len() != d_in + d_out {
            return Err(Error::CsvParse {
                line: k + 2,
                message: format!("expected {} fields, got {}", d_in + d_out, record.len()),
            });
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::CsvParse {
                line: k + 2,
                message: format!("not a number: `{field}`"),
            })?;
            rows.push(v);
        }
        let coords = &rows[rows.len() - d_in - d_out..rows.len() - d_out];
        let inside = coords
            .iter()
            .zip(&problem.domain)
            .all(|(&v, [lo, hi])| v >= *lo - 1e-9 && v <= *hi + 1e-9);
        if !inside {
            out_of_domain += 1;
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Data(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    if out_of_domain > 0 {
        warnings.push(format!(
            "{out_of_domain} of {n_rows} rows lie outside the declared domain"
        ));
    }
    let all = Array2::from_shape_vec((n_rows, d_in + d_out), rows)
        .expect("row-major reshape");
    let inputs = all.slice(ndarray::s![.., ..d_in]).to_owned();
    let outputs = all.slice(ndarray::s![.., d_in..]).to_owned();
    let declared: usize = problem.full_grid.iter().product();
    Ok(IngestReport {
        dataset: Dataset::new(inputs, outputs, Source::Ingested)?,
        warnings,
        full_grid: n_rows == declared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ProblemDef, ProblemId};

    fn synthetic_grid_csv(path: &Path, problem: &ProblemDef) {
        // Full-grid file with placeholder outputs; layout matches the
        // declared reference grid of the problem.
        let [nx, nt] = [problem.full_grid[0], problem.full_grid[1]];
        let mut s = String::from("x,t,u\n");
        for it in 0..nt {
            for ix in 0..nx {
                let x = problem.domain[0][0]
                    + (problem.domain[0][1] - problem.domain[0][0]) * ix as f64 / (nx - 1) as f64;
                let t = problem.domain[1][0]
                    + (problem.domain[1][1] - problem.domain[1][0]) * it as f64 / (nt - 1) as f64;
                s.push_str(&format!("{x},{t},{}\n", (x + t).sin()));
            }
        }
        std::fs::write(path, s).unwrap();
    }

    #[test]
    fn burgers_full_grid_has_declared_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemDef::get(ProblemId::Burgers);
        let path = dir.path().join("burgers.csv");
        synthetic_grid_csv(&path, &p);
        let report = ingest_dataset(&path, &p).unwrap();
        assert_eq!(report.dataset.len(), 25_600);
        assert!(report.full_grid);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn kdv_full_grid_has_declared_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemDef::get(ProblemId::Kdv);
        let path = dir.path().join("kdv.csv");
        synthetic_grid_csv(&path, &p);
        let report = ingest_dataset(&path, &p).unwrap();
        assert_eq!(report.dataset.len(), 102_912);
        assert!(report.full_grid);
    }

    #[test]
    fn empty_file_is_an_error_not_an_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemDef::get(ProblemId::Burgers);
        let path = dir.path().join("empty.csv");
        std::fs::write(&path, "x,t,u\n").unwrap();
        assert!(matches!(ingest_dataset(&path, &p), Err(Error::Data(_))));
    }

    #[test]
    fn malformed_rows_and_bad_headers_fail() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemDef::get(ProblemId::Burgers);
        let bad_header = dir.path().join("h.csv");
        std::fs::write(&bad_header, "t,x,u\n0,0,0\n").unwrap();
        assert!(ingest_dataset(&bad_header, &p).is_err());

        let bad_row = dir.path().join("r.csv");
        std::fs::write(&bad_row, "x,t,u\n0.0,0.1,oops\n").unwrap();
        assert!(matches!(
            ingest_dataset(&bad_row, &p),
            Err(Error::CsvParse { line: 2, .. })
        ));
    }

    #[test]
    fn out_of_domain_rows_warn_but_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemDef::get(ProblemId::Burgers);
        let path = dir.path().join("odd.csv");
        std::fs::write(&path, "x,t,u\n0.0,0.5,1.0\n5.0,0.5,1.0\n").unwrap();
        let report = ingest_dataset(&path, &p).unwrap();
        assert_eq!(report.dataset.len(), 2);
        assert_eq!(report.warnings.len(), 1);
        assert!(!report.full_grid);
    }

    #[test]
    fn csv_roundtrip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = ProblemDef::get(ProblemId::ConvDiff);
        let ds = Dataset::new(
            ndarray::array![[0.5, 0.25], [1.5, 0.75]],
            ndarray::array![[0.125], [-0.375]],
            Source::FiniteDifference,
        )
        .unwrap();
        let path = dir.path().join("ds.csv");
        write_dataset_csv(&path, &ds, &p).unwrap();
        let back = read_dataset_csv(&path, &p).unwrap();
        assert_eq!(back.inputs, ds.inputs);
        assert_eq!(back.outputs, ds.outputs);
    }
}
