//! Dataset CSV, split/metadata JSON and edge-list files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pglearn_core::dataset::{Dataset, SplitSpec};
use pglearn_core::graph::SparseGraph;
use pglearn_core::Mat;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Which CSV column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    /// The last column.
    #[default]
    Last,
    /// 0-based column position.
    Index(usize),
    /// Column name; requires a header row.
    Name(String),
}

impl LabelColumn {
    /// Parses a column selector: a non-negative integer is a position, anything else a name.
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_string()),
        }
    }
}

/// Whether the first CSV row is a header.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Header if any feature cell of the first row is not a number.
    #[default]
    Auto,
    /// First row is a header.
    Present,
    /// No header row.
    Absent,
}

/// CSV reading options.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CsvOptions {
    /// Label column selector.
    pub label: LabelColumn,
    /// Header handling.
    pub header: HeaderMode,
}

fn csv_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Csv { path: path.to_path_buf(), message: message.into() }
}

fn is_unlabeled(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

/// Reads a labeled point cloud.
///
/// Empty or `?` label cells mark unlabeled points. Class names are mapped to
/// `0..c` in order of first appearance.
pub fn read_dataset(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file);
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_err(path, e.to_string()))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec));
    }
    if rows.is_empty() {
        return Err(csv_err(path, "file is empty"));
    }
    let width = rows[0].1.len();
    if width < 2 {
        return Err(csv_err(path, "need at least one feature column and a label column"));
    }

    let header_present = |label: usize| match opts.header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => rows[0].1.iter().enumerate().any(|(j, v)| j != label && v.parse::<f64>().is_err()),
    };
    let (label, has_header) = match &opts.label {
        LabelColumn::Last => (width - 1, header_present(width - 1)),
        LabelColumn::Index(i) => {
            if *i >= width {
                return Err(csv_err(path, format!("label column {i} out of range for {width} columns")));
            }
            (*i, header_present(*i))
        }
        LabelColumn::Name(name) => {
            if opts.header == HeaderMode::Absent {
                return Err(csv_err(path, "a label column name needs a header row"));
            }
            let pos = rows[0].1.iter().position(|h| h == name);
            let pos = pos.ok_or_else(|| csv_err(path, format!("no column named '{name}'")))?;
            (pos, true)
        }
    };
    let body = if has_header { &rows[1..] } else { &rows[..] };
    if body.is_empty() {
        return Err(csv_err(path, "no data rows"));
    }

    let d = width - 1;
    let mut data = Vec::with_capacity(body.len() * d);
    let mut labels = Vec::with_capacity(body.len());
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, rec) in body {
        if rec.len() != width {
            return Err(csv_err(path, format!("line {line}: {} fields, expected {width}", rec.len())));
        }
        for (j, cell) in rec.iter().enumerate() {
            if j == label {
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| csv_err(path, format!("line {line}, column {j}: cannot parse '{cell}' as a number")))?;
            if !v.is_finite() {
                return Err(csv_err(path, format!("line {line}, column {j}: non-finite value '{cell}'")));
            }
            data.push(v);
        }
        let cell = &rec[label];
        labels.push(if is_unlabeled(cell) {
            None
        } else {
            Some(*index.entry(cell.to_string()).or_insert_with(|| {
                names.push(cell.to_string());
                names.len() - 1
            }))
        });
    }
    if names.len() < 2 {
        return Err(csv_err(path, format!("need at least 2 classes, found {}", names.len())));
    }
    let features = Mat::from_vec(body.len(), d, data);
    Ok(Dataset::with_class_names(features, labels, names)?)
}

/// Writes features as `x1..xd` followed by a `label` column of class names.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let to_err = |e: csv::Error| csv_err(path, e.to_string());
    let mut header: Vec<String> = (1..=dataset.d()).map(|m| format!("x{m}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(to_err)?;
    for i in 0..dataset.n() {
        let mut row: Vec<String> = dataset.point(i).iter().map(|v| format!("{v:?}")).collect();
        row.push(dataset.label(i).map_or(String::new(), |c| dataset.class_names()[c].clone()));
        w.write_record(&row).map_err(to_err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads any JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| CliError::json(path, e))
}

/// Writes pretty-printed JSON.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::json(path, e))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// Reads a split file and checks it against the dataset.
pub fn read_split(path: &Path, dataset: &Dataset) -> Result<SplitSpec> {
    let split: SplitSpec = read_json(path)?;
    split
        .validate(dataset)
        .map_err(|e| CliError::Invalid(format!("{}: split does not fit the dataset: {e}", path.display())))?;
    Ok(split)
}

/// Ground truth about injected noise columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMetadata {
    /// Column count before injection.
    pub original_columns: usize,
    /// 0-based indices of the injected columns.
    pub noise_columns: Vec<usize>,
    /// Requested fraction.
    pub noise_fraction: f64,
    /// Seed used for the draws.
    pub seed: u64,
}

/// Writes stored edges once per unordered pair as `i j w` lines.
pub fn write_edge_list(path: &Path, graph: &SparseGraph) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (s, i, j) in graph.pattern().entries() {
        if i < j {
            writeln!(w, "{i} {j} {:?}", graph.weights()[s]).map_err(|e| CliError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
