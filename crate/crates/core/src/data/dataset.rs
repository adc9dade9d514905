//! Node-classification datasets and their on-disk format.
//!
//! A dataset directory holds four files:
//!
//! * `features.csv`: one row per node, comma-separated reals.
//! * `edges.csv`: one `src,dst` pair per line, 0-based, undirected.
//! * `labels.csv`: one class index per line.
//! * `splits.json`: `{"train": [...], "val": [...], "test": [...]}`.
//!
//! An optional `checksums.sha256` (in `sha256sum` format) pins the bytes of
//! the other files; when present every listed file is verified on load.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sparse::SparseAdjacency;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FEATURES_FILE: &str = "features.csv";
pub const EDGES_FILE: &str = "edges.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLITS_FILE: &str = "splits.json";
pub const CHECKSUM_FILE: &str = "checksums.sha256";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    pub fn get(&self, split: Split) -> &[usize] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// First split (in train, val, test order) that repeats an index already
    /// seen, with the offending index.
    fn first_overlap(&self) -> Option<(Split, usize)> {
        let mut seen = HashSet::new();
        for split in [Split::Train, Split::Val, Split::Test] {
            let mut own = HashSet::new();
            for &i in self.get(split) {
                if !own.insert(i) || seen.contains(&i) {
                    return Some((split, i));
                }
            }
            seen.extend(own);
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDataset<T> {
    features: Array2<T>,
    adjacency: SparseAdjacency,
    labels: Vec<usize>,
    splits: Splits,
    num_classes: usize,
}

impl<T: Scalar> GraphDataset<T> {
    /// Validates shapes and the observed-graph invariants (square,
    /// symmetric, zero diagonal), finite features, disjoint in-range splits.
    /// `num_classes` defaults to `max(label) + 1`.
    pub fn new(
        features: Array2<T>,
        adjacency: SparseAdjacency,
        labels: Vec<usize>,
        splits: Splits,
        num_classes: Option<usize>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::shape("labels", n, labels.len()));
        }
        if adjacency.num_rows() != n || !adjacency.is_square() {
            return Err(Error::shape("adjacency", n, adjacency.num_rows()));
        }
        if !adjacency.is_symmetric() || !adjacency.has_zero_diagonal() {
            return Err(Error::InvalidArgument(
                "observed adjacency must be symmetric with an empty diagonal".into(),
            ));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "features".into(),
            });
        }
        let observed = labels.iter().max().map_or(0, |&m| m + 1);
        let num_classes = num_classes.unwrap_or(observed);
        if observed > num_classes {
            return Err(Error::InvalidArgument(format!(
                "label {} outside [0, {num_classes})",
                observed - 1
            )));
        }
        for split in [Split::Train, Split::Val, Split::Test] {
            if let Some(&i) = splits.get(split).iter().find(|&&i| i >= n) {
                return Err(Error::InvalidArgument(format!(
                    "{split:?} index {i} out of range for {n} nodes"
                )));
            }
        }
        if let Some((split, i)) = splits.first_overlap() {
            return Err(Error::InvalidArgument(format!(
                "node {i} appears twice across splits (second time in {split:?})"
            )));
        }
        Ok(Self {
            features,
            adjacency,
            labels,
            splits,
            num_classes,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<T> {
        &self.features
    }

    pub fn adjacency(&self) -> &SparseAdjacency {
        &self.adjacency
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn split(&self, split: Split) -> &[usize] {
        self.splits.get(split)
    }

    /// Same dataset over a different observed graph.
    pub fn with_adjacency(&self, adjacency: SparseAdjacency) -> Result<Self> {
        Self::new(
            self.features.clone(),
            adjacency,
            self.labels.clone(),
            self.splits.clone(),
            Some(self.num_classes),
        )
    }

    /// Same dataset with different features (same node count).
    pub fn with_features(&self, features: Array2<T>) -> Result<Self> {
        Self::new(
            features,
            self.adjacency.clone(),
            self.labels.clone(),
            self.splits.clone(),
            Some(self.num_classes),
        )
    }

    pub fn cast<U: Scalar>(&self) -> GraphDataset<U> {
        GraphDataset {
            features: self.features.mapv(|v| U::lit(v.to_f64_lossy())),
            adjacency: self.adjacency.clone(),
            labels: self.labels.clone(),
            splits: self.splits.clone(),
            num_classes: self.num_classes,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::data(file, line, e.to_string())
}

fn parse_index(file: &str, line: usize, field: &str) -> Result<usize> {
    field.parse::<usize>().map_err(|_| {
        Error::data(
            file,
            line,
            format!("expected a non-negative integer, got `{field}`"),
        )
    })
}

fn read_features<T: Scalar>(path: &Path) -> Result<Array2<T>> {
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in csv_reader(path)?.records() {
        let record = record.map_err(|e| csv_error(FEATURES_FILE, e))?;
        let line = record_line(&record);
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(Error::data(
                FEATURES_FILE,
                line,
                format!("expected {w} columns, got {}", record.len()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                Error::data(FEATURES_FILE, line, format!("not a real number: `{field}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::data(
                    FEATURES_FILE,
                    line,
                    format!("non-finite feature `{field}`"),
                ));
            }
            values.push(T::lit(v));
        }
        rows += 1;
    }
    Array2::from_shape_vec((rows, width.unwrap_or(0)), values)
        .map_err(|e| Error::data(FEATURES_FILE, 0, e.to_string()))
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let mut labels = Vec::with_capacity(n);
    for record in csv_reader(path)?.records() {
        let record = record.map_err(|e| csv_error(LABELS_FILE, e))?;
        let line = record_line(&record);
        if record.len() != 1 {
            return Err(Error::data(
                LABELS_FILE,
                line,
                "expected one label per line",
            ));
        }
        labels.push(parse_index(LABELS_FILE, line, &record[0])?);
    }
    if labels.len() != n {
        return Err(Error::data(
            LABELS_FILE,
            labels.len(),
            format!("{} labels for {n} feature rows", labels.len()),
        ));
    }
    Ok(labels)
}

fn read_edges(path: &Path, n: usize) -> Result<SparseAdjacency> {
    let mut edges = Vec::new();
    for record in csv_reader(path)?.records() {
        let record = record.map_err(|e| csv_error(EDGES_FILE, e))?;
        let line = record_line(&record);
        if record.len() != 2 {
            return Err(Error::data(EDGES_FILE, line, "expected `src,dst`"));
        }
        let a = parse_index(EDGES_FILE, line, &record[0])?;
        let b = parse_index(EDGES_FILE, line, &record[1])?;
        if a >= n || b >= n {
            return Err(Error::data(
                EDGES_FILE,
                line,
                format!("edge ({a}, {b}) out of range for {n} nodes"),
            ));
        }
        edges.push((a, b));
    }
    SparseAdjacency::from_undirected_edges(n, &edges)
}

/// 1-based line of the first occurrence of `"key"` in a JSON document.
fn json_key_line(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map_or(0, |pos| text[..pos].matches('\n').count() + 1)
}

fn read_splits(path: &Path, n: usize) -> Result<Splits> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let splits: Splits = serde_json::from_str(&text)
        .map_err(|e| Error::data(SPLITS_FILE, e.line(), e.to_string()))?;
    let key = |s: Split| match s {
        Split::Train => "train",
        Split::Val => "val",
        Split::Test => "test",
    };
    for split in [Split::Train, Split::Val, Split::Test] {
        if let Some(&i) = splits.get(split).iter().find(|&&i| i >= n) {
            return Err(Error::data(
                SPLITS_FILE,
                json_key_line(&text, key(split)),
                format!("{} index {i} out of range for {n} nodes", key(split)),
            ));
        }
    }
    if let Some((split, i)) = splits.first_overlap() {
        return Err(Error::data(
            SPLITS_FILE,
            json_key_line(&text, key(split)),
            format!("node {i} in `{}` overlaps an earlier split", key(split)),
        ));
    }
    Ok(splits)
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn verify_checksums(dir: &Path) -> Result<()> {
    let path = dir.join(CHECKSUM_FILE);
    if !path.exists() {
        return Ok(());
    }
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (digest, name) = line
            .split_once(char::is_whitespace)
            .ok_or_else(|| Error::data(CHECKSUM_FILE, i + 1, "expected `<sha256>  <file>`"))?;
        let name = name.trim().trim_start_matches('*');
        let actual = sha256_hex(&dir.join(name))?;
        if !actual.eq_ignore_ascii_case(digest) {
            return Err(Error::data(
                CHECKSUM_FILE,
                i + 1,
                format!("{name}: checksum mismatch (expected {digest}, found {actual})"),
            ));
        }
    }
    Ok(())
}

/// SHA-256 lines for the four dataset files, in `sha256sum` format.
pub fn dataset_checksums(dir: &Path) -> Result<String> {
    let mut out = String::new();
    for name in [FEATURES_FILE, EDGES_FILE, LABELS_FILE, SPLITS_FILE] {
        out.push_str(&format!("{}  {name}\n", sha256_hex(&dir.join(name))?));
    }
    Ok(out)
}

/// Reads and validates a dataset directory.
pub fn load_dataset<T: Scalar>(dir: impl AsRef<Path>) -> Result<GraphDataset<T>> {
    let dir = dir.as_ref();
    for name in [FEATURES_FILE, EDGES_FILE, LABELS_FILE, SPLITS_FILE] {
        let p = dir.join(name);
        if !p.is_file() {
            return Err(Error::Io {
                path: p,
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing dataset file"),
            });
        }
    }
    verify_checksums(dir)?;
    let features = read_features::<T>(&dir.join(FEATURES_FILE))?;
    let n = features.nrows();
    let labels = read_labels(&dir.join(LABELS_FILE), n)?;
    let adjacency = read_edges(&dir.join(EDGES_FILE), n)?;
    let splits = read_splits(&dir.join(SPLITS_FILE), n)?;
    GraphDataset::new(features, adjacency, labels, splits, None)
}

fn write_file(path: PathBuf, contents: &[u8]) -> Result<()> {
    let mut f = fs::File::create(&path).map_err(io_err(&path))?;
    f.write_all(contents).map_err(io_err(&path))
}

/// Writes the canonical directory layout. Reals use the shortest
/// representation that parses back to the same value.
pub fn save_dataset<T: Scalar>(dataset: &GraphDataset<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let mut features = String::new();
    for row in dataset.features.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        features.push_str(&line.join(","));
        features.push('\n');
    }
    write_file(dir.join(FEATURES_FILE), features.as_bytes())?;

    let mut edges = String::new();
    for (a, b) in dataset.adjacency.undirected_edges() {
        edges.push_str(&format!("{a},{b}\n"));
    }
    write_file(dir.join(EDGES_FILE), edges.as_bytes())?;

    let labels: String = dataset.labels.iter().map(|l| format!("{l}\n")).collect();
    write_file(dir.join(LABELS_FILE), labels.as_bytes())?;

    let splits = serde_json::to_string(&dataset.splits).expect("splits serialize");
    write_file(dir.join(SPLITS_FILE), splits.as_bytes())
}
