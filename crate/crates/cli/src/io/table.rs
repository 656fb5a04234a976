use std::path::Path;

use crate::error::{CliError, CliResult};

/// Reads a comma-separated matrix of reals, one row per line. With `header`
/// the first line is skipped.
pub fn read_matrix(path: &Path, header: bool) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(k, field)| parse_real(field).ok_or_else(|| {
                CliError::at_line(path, line, format!("field {} is not a finite real: {field:?}", k + 1))
            }))
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Reads a single-column file as a vector.
pub fn read_vector(path: &Path, header: bool) -> CliResult<Vec<f64>> {
    let rows = read_matrix(path, header)?;
    if let Some(first) = rows.first().filter(|r| r.len() != 1) {
        return Err(CliError::at_line(
            path,
            1 + header as u64,
            format!("expected one value per line, found {}", first.len()),
        ));
    }
    Ok(rows.into_iter().map(|r| r[0]).collect())
}

fn parse_real(field: &str) -> Option<f64> {
    field.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn csv_error(path: &Path, err: csv::Error) -> CliError {
    let line = match err.kind() {
        csv::ErrorKind::UnequalLengths { pos: Some(pos), .. } => Some(pos.line()),
        csv::ErrorKind::Utf8 { pos: Some(pos), .. } => Some(pos.line()),
        csv::ErrorKind::Deserialize { pos: Some(pos), .. } => Some(pos.line()),
        _ => None,
    };
    match line {
        Some(line) => CliError::at_line(path, line, err),
        None => CliError::input(format!("{}: {err}", path.display())),
    }
}

pub fn write_matrix(path: &Path, rows: &[Vec<f64>]) -> CliResult<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_vector(path: &Path, values: &[f64]) -> CliResult<()> {
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    write_matrix(path, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![vec![0.1, -2.5e-17, 3.0], vec![1.0 / 3.0, 7.0, -0.0]];
        write_matrix(&path, &rows).unwrap();
        assert_eq!(read_matrix(&path, false).unwrap(), rows);
    }

    #[test]
    fn header_is_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "a,b\n1,2\n3,4\n").unwrap();
        assert_eq!(read_matrix(&path, true).unwrap(), vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!(read_matrix(&path, false).is_err());
    }

    #[test]
    fn errors_name_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "1,2\n3,x\n").unwrap();
        let err = read_matrix(&path, false).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("bad.csv:2"), "{}", err.message);
        std::fs::write(&path, "1,2\n3\n").unwrap();
        let err = read_matrix(&path, false).unwrap_err();
        assert!(err.message.contains("bad.csv:2"), "{}", err.message);
        std::fs::write(&path, "1\nnan\n").unwrap();
        assert!(read_vector(&path, false).unwrap_err().message.contains(":2"));
    }
}
