//! File helpers shared by the trace, dataset and ground-truth formats.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::data::{DataMatrix, Dataset};
use crate::error::{Error, Result};

/// Writes `contents` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::param(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Column roles of a dataset file: `modifiable` y-columns, then `covariates`
/// x-columns, then an optional `z_true` label column (1-based labels).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetLayout {
    pub modifiable: usize,
    pub covariates: usize,
    pub labels: bool,
}

impl DatasetLayout {
    pub fn width(&self) -> usize {
        self.modifiable + self.covariates + usize::from(self.labels)
    }

    pub fn of(data: &Dataset) -> Self {
        Self {
            modifiable: data.m(),
            covariates: data.p(),
            labels: data.z.is_some(),
        }
    }
}

/// Header `y1..yM, x1..xP[, z_true]`, shortest round-trip float formatting.
pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=data.m()).map(|i| format!("y{i}")).collect();
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    if data.z.is_some() {
        header.push("z_true".into());
    }
    let csv_err = |e: csv::Error| Error::parse("dataset", e.to_string());
    w.write_record(&header).map_err(csv_err)?;
    for n in 0..data.n() {
        let mut rec: Vec<String> = data
            .y
            .row(n)
            .iter()
            .chain(data.x.row(n))
            .map(f64::to_string)
            .collect();
        if let Some(z) = &data.z {
            rec.push((z[n] + 1).to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::parse("dataset", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    write_atomic(path, dataset_to_csv(data)?.as_bytes())
}

/// Parses a dataset with declared column roles. Errors carry the 1-based
/// file line and column.
pub fn parse_dataset(text: &str, layout: DatasetLayout) -> Result<Dataset> {
    if layout.modifiable == 0 {
        return Err(Error::param("at least one modifiable column is required"));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::parse("line 1", e.to_string()))?
        .clone();
    if header.len() != layout.width() {
        return Err(Error::parse(
            "line 1",
            format!(
                "header has {} columns, layout declares {} modifiable + {} covariates{}",
                header.len(),
                layout.modifiable,
                layout.covariates,
                if layout.labels { " + labels" } else { "" }
            ),
        ));
    }
    let (m, p) = (layout.modifiable, layout.covariates);
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut z = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
        if rec.len() != header.len() {
            return Err(Error::parse(
                format!("line {line}"),
                format!("{} fields, expected {}", rec.len(), header.len()),
            ));
        }
        for (j, field) in rec.iter().enumerate() {
            let loc = || format!("line {line}, column {} ({})", j + 1, &header[j]);
            if layout.labels && j == m + p {
                let label: usize = field.parse().map_err(|_| {
                    Error::parse(loc(), format!("label {field:?} is not a positive integer"))
                })?;
                if label == 0 {
                    return Err(Error::parse(loc(), "labels are 1-based"));
                }
                z.push(label - 1);
                continue;
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::parse(loc(), format!("{field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(Error::parse(loc(), format!("non-finite value {field:?}")));
            }
            if j < m {
                y.push(v);
            } else {
                x.push(v);
            }
        }
    }
    let n = y.len() / m;
    Dataset::new(
        DataMatrix::new(n, m, y)?,
        DataMatrix::new(n, p, x)?,
        layout.labels.then_some(z),
    )
}

pub fn read_dataset(path: &Path, layout: DatasetLayout) -> Result<Dataset> {
    parse_dataset(&read_text(path)?, layout).map_err(|e| e.context(path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        Dataset::new(
            DataMatrix::from_rows(2, &[vec![0.1, -2.5e-7], vec![1.0 / 3.0, 4.0]]).unwrap(),
            DataMatrix::from_rows(1, &[vec![1.0], vec![0.0]]).unwrap(),
            Some(vec![1, 0]),
        )
        .unwrap()
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let d = sample();
        let text = dataset_to_csv(&d).unwrap();
        assert!(text.starts_with("y1,y2,x1,z_true\n"));
        assert!(text.contains(",2\n"));
        let back = parse_dataset(&text, DatasetLayout::of(&d)).unwrap();
        assert_eq!(back, d);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &d).unwrap();
        assert_eq!(read_dataset(&path, DatasetLayout::of(&d)).unwrap(), d);
    }

    #[test]
    fn dataset_errors_carry_locations() {
        let layout = DatasetLayout {
            modifiable: 2,
            covariates: 1,
            labels: false,
        };
        let err = parse_dataset("a,b,c\n1,2,3\n4,oops,6\n", layout).unwrap_err();
        assert!(err.to_string().contains("line 3, column 2"), "{err}");
        let err = parse_dataset("a,b\n1,2\n", layout).unwrap_err();
        assert!(err.to_string().contains("header"), "{err}");
        let err = parse_dataset("a,b,c\n1,2\n", layout).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let labelled = DatasetLayout {
            labels: true,
            covariates: 0,
            ..layout
        };
        assert!(parse_dataset("a,b,z\n1,2,0\n", labelled).is_err());
        assert!(parse_dataset("a,b,c\n1,NaN,3\n", layout).is_err());
        assert_eq!(parse_dataset("a,b,c\n", layout).unwrap().n(), 0);
    }

    #[test]
    fn atomic_write_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(read_text(&p).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let bad = dir.path().join("missing").join("b.txt");
        let err = write_atomic(&bad, b"x").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("missing"));
        assert!(read_text(&bad).is_err());
    }
}
