//! CSV serialization for matrices, dendrograms, partitions and benchmark
//! records.
//!
//! Reals are written with Rust's shortest round-trip formatting, so a save
//! followed by a load reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use relclust::{Dendrogram, DissimilarityMatrix, MergeStep};

use crate::error::{Error, Result};

/// Matrix file layouts accepted by `load_matrix`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// `n` rows of `n` comma-separated entries; an optional non-numeric
    /// header row is skipped.
    SquareCsv,
    /// Row `i` (starting at the second object) holds the `i` entries
    /// `d(i, 0..i)`; the diagonal is implicit.
    LowerTriangleCsv,
}

/// Symmetrization tolerance applied when loading matrices.
pub const LOAD_TOLERANCE: f64 = 1e-9;

const DENDROGRAM_HEADER: &str = "step,left,right,delta_e,error_after,new_size";
const PARTITION_HEADER: &str = "object,cluster";
const BENCH_HEADER: &str = "k,e_hca,e_mlr,e_rkm_best,e_rkm_worst,t_hca_ms,t_mlr_ms,t_rkm_ms";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn parse_field<T: std::str::FromStr>(path: &Path, line: usize, field: &str) -> Result<T> {
    field.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        field: field.trim().to_string(),
    })
}

/// Non-empty lines with their 1-based file line numbers.
fn data_lines(text: &str) -> Vec<(usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect()
}

/// Loads and validates a dissimilarity matrix.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DissimilarityMatrix> {
    let text = read(path)?;
    let raw = match format {
        MatrixFormat::SquareCsv => parse_square(path, &text)?,
        MatrixFormat::LowerTriangleCsv => parse_lower_triangle(path, &text)?,
    };
    Ok(DissimilarityMatrix::validate(&raw, LOAD_TOLERANCE)?)
}

fn parse_square(path: &Path, text: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = data_lines(text);
    if let Some(&(_, first)) = lines.first() {
        // A non-numeric first row is a header.
        if first.split(',').any(|f| f.trim().parse::<f64>().is_err()) {
            lines.remove(0);
        }
    }
    let mut rows = Vec::with_capacity(lines.len());
    let width = lines
        .first()
        .map(|(_, l)| l.split(',').count())
        .unwrap_or(0);
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                line: line_no,
                got: fields.len(),
                expected: width,
            });
        }
        let mut row = Vec::with_capacity(fields.len());
        for field in fields {
            row.push(parse_field(path, line_no, field)?);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_lower_triangle(path: &Path, text: &str) -> Result<Vec<Vec<f64>>> {
    let lines = data_lines(text);
    let n = lines.len() + 1;
    let mut raw = vec![vec![0.0f64; n]; n];
    for (idx, (line_no, line)) in lines.into_iter().enumerate() {
        let i = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != i {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                line: line_no,
                got: fields.len(),
                expected: i,
            });
        }
        for (j, field) in fields.into_iter().enumerate() {
            let v: f64 = parse_field(path, line_no, field)?;
            raw[i][j] = v;
            raw[j][i] = v;
        }
    }
    Ok(raw)
}

/// Writes a matrix as headerless square CSV.
pub fn save_matrix(path: &Path, d: &DissimilarityMatrix) -> Result<()> {
    let n = d.n_objects();
    let mut out = String::new();
    for i in 0..n {
        for j in 0..n {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", d.get(i, j));
        }
        out.push('\n');
    }
    write(path, &out)
}

/// Writes a dendrogram with the header
/// `step,left,right,delta_e,error_after,new_size`.
pub fn save_dendrogram(path: &Path, dend: &Dendrogram) -> Result<()> {
    let mut out = String::from(DENDROGRAM_HEADER);
    out.push('\n');
    for s in dend.steps() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.step, s.left, s.right, s.delta_e, s.error_after, s.new_size
        );
    }
    write(path, &out)
}

/// Loads a dendrogram saved by [`save_dendrogram`].
pub fn load_dendrogram(path: &Path) -> Result<Dendrogram> {
    let text = read(path)?;
    let lines = data_lines(&text);
    let Some(&(header_line, header)) = lines.first() else {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, field: String::new() });
    };
    if header != DENDROGRAM_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: header_line,
            field: header.to_string(),
        });
    }
    let mut steps = Vec::with_capacity(lines.len() - 1);
    for &(line_no, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                line: line_no,
                got: fields.len(),
                expected: 6,
            });
        }
        steps.push(MergeStep {
            step: parse_field(path, line_no, fields[0])?,
            left: parse_field(path, line_no, fields[1])?,
            right: parse_field(path, line_no, fields[2])?,
            delta_e: parse_field(path, line_no, fields[3])?,
            error_after: parse_field(path, line_no, fields[4])?,
            new_size: parse_field(path, line_no, fields[5])?,
        });
    }
    Ok(Dendrogram::new(steps.len() + 1, steps)?)
}

/// Writes an object-to-cluster assignment with the header `object,cluster`.
pub fn save_partition(path: &Path, assignment: &[usize]) -> Result<()> {
    let mut out = String::from(PARTITION_HEADER);
    out.push('\n');
    for (object, cluster) in assignment.iter().enumerate() {
        let _ = writeln!(out, "{object},{cluster}");
    }
    write(path, &out)
}

/// Loads an assignment saved by [`save_partition`].
pub fn load_partition(path: &Path) -> Result<Vec<usize>> {
    let text = read(path)?;
    let lines = data_lines(&text);
    let Some(&(header_line, header)) = lines.first() else {
        return Err(Error::Parse { path: path.to_path_buf(), line: 1, field: String::new() });
    };
    if header != PARTITION_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: header_line,
            field: header.to_string(),
        });
    }
    let mut assignment = vec![usize::MAX; lines.len() - 1];
    for &(line_no, line) in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(Error::RaggedRows {
                path: path.to_path_buf(),
                line: line_no,
                got: fields.len(),
                expected: 2,
            });
        }
        let object: usize = parse_field(path, line_no, fields[0])?;
        let cluster: usize = parse_field(path, line_no, fields[1])?;
        if object >= assignment.len() || assignment[object] != usize::MAX {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                field: fields[0].to_string(),
            });
        }
        assignment[object] = cluster;
    }
    Ok(assignment)
}

/// Writes benchmark records with the header matching their fields.
pub fn save_bench(path: &Path, records: &[crate::bench::BenchRecord]) -> Result<()> {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.k, r.e_hca, r.e_mlr, r.e_rkm_best, r.e_rkm_worst, r.t_hca_ms, r.t_mlr_ms, r.t_rkm_ms
        );
    }
    write(path, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn tmp(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("relclust-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn square_csv_round_trips_bit_exactly() {
        let d = DissimilarityMatrix::validate(
            &[
                vec![0.0, 0.1 + 0.2, 4.0],
                vec![0.1 + 0.2, 0.0, 1.0 / 3.0],
                vec![4.0, 1.0 / 3.0, 0.0],
            ],
            1e-9,
        )
        .unwrap();
        let path = tmp("square.csv");
        save_matrix(&path, &d).unwrap();
        let loaded = load_matrix(&path, MatrixFormat::SquareCsv).unwrap();
        assert_eq!(d, loaded);
    }

    #[test]
    fn square_csv_accepts_a_header_row() {
        let path = tmp("header.csv");
        fs::write(&path, "a,b\n0,1\n1,0\n").unwrap();
        let m = load_matrix(&path, MatrixFormat::SquareCsv).unwrap();
        assert_eq!(m.n_objects(), 2);
        assert_eq!(m.get(0, 1), 1.0);
    }

    #[test]
    fn lower_triangle_fills_the_symmetric_matrix() {
        let path = tmp("lower.csv");
        fs::write(&path, "1\n4,1\n").unwrap();
        let m = load_matrix(&path, MatrixFormat::LowerTriangleCsv).unwrap();
        assert_eq!(m.n_objects(), 3);
        assert_eq!(m.get(0, 1), 1.0);
        assert_eq!(m.get(0, 2), 4.0);
        assert_eq!(m.get(2, 1), 1.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn ragged_square_input_is_reported() {
        let path = tmp("ragged.csv");
        fs::write(&path, "0,1\n1\n").unwrap();
        match load_matrix(&path, MatrixFormat::SquareCsv) {
            Err(Error::RaggedRows { line: 2, got: 1, expected: 2, .. }) => {}
            other => panic!("expected ragged-rows error, got {other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_the_line_number() {
        let path = tmp("bad.csv");
        fs::write(&path, "0,1\nx,0\n").unwrap();
        match load_matrix(&path, MatrixFormat::SquareCsv) {
            Err(Error::Parse { line: 2, field, .. }) => assert_eq!(field, "x"),
            other => panic!("expected a parse error on line 2, got {other:?}"),
        }
    }

    #[test]
    fn dendrogram_round_trips_bit_exactly() {
        let d = DissimilarityMatrix::validate(
            &[
                vec![0.0, 1.0, 25.0, 36.0],
                vec![1.0, 0.0, 16.0, 25.0],
                vec![25.0, 16.0, 0.0, 1.0],
                vec![36.0, 25.0, 1.0, 0.0],
            ],
            1e-9,
        )
        .unwrap();
        let dend = relclust::hca::naive(&d).unwrap();
        let path = tmp("dend.csv");
        save_dendrogram(&path, &dend).unwrap();
        let loaded = load_dendrogram(&path).unwrap();
        assert_eq!(dend, loaded);
    }

    #[test]
    fn partition_round_trips() {
        let assignment = vec![0usize, 2, 1, 1, 0];
        let path = tmp("part.csv");
        save_partition(&path, &assignment).unwrap();
        assert_eq!(load_partition(&path).unwrap(), assignment);
    }
}
