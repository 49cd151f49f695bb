//! Labeled histogram datasets: CSV ingest, preprocessing, merge application,
//! and per-class summary statistics.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header must start with a `label` column, found {0:?}")]
    BadHeader(String),
    #[error("dataset has no data rows")]
    Empty,
    #[error("dataset has no word columns")]
    NoWords,
    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {col}: cannot parse {value:?} as a number")]
    BadNumber {
        row: usize,
        col: String,
        value: String,
    },
    #[error("row {row}, word {word}: negative count {value}")]
    NegativeCount { row: usize, word: usize, value: f64 },
    #[error("row {row}, word {word}: non-finite count")]
    NonFiniteCount { row: usize, word: usize },
    #[error("row {row}: histogram sums to zero, cannot l1-normalize")]
    ZeroRow { row: usize },
    #[error("merge map expects {expected} words, dataset has {found}")]
    MapSizeMismatch { expected: usize, found: usize },
    #[error("merge map assigns no word to cluster {0}")]
    MapNotSurjective(usize),
    #[error("merge map assigns word {word} to cluster {cluster}, valid range is 0..{k}")]
    MapOutOfRange {
        word: usize,
        cluster: usize,
        k: usize,
    },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("dataset must contain exactly two classes, found {0}")]
    NotBinary(usize),
}

/// A labeled collection of bag-of-words histograms.
///
/// Rows are samples, columns are words. Counts are kept as `f64` so that
/// l1-normalized and sqrt-transformed data flow through the same type.
/// Class labels are canonicalized: the distinct label values are sorted
/// ascending and mapped to class indices `0..C`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramDataset {
    counts: Vec<f64>,
    n: usize,
    t: usize,
    labels: Vec<usize>,
    class_labels: Vec<i64>,
    word_ids: Vec<usize>,
}

impl HistogramDataset {
    /// Builds a dataset from row-major counts and per-row integer labels.
    pub fn new(counts: Vec<f64>, t: usize, raw_labels: &[i64]) -> Result<Self, DataError> {
        let n = raw_labels.len();
        if n == 0 {
            return Err(DataError::Empty);
        }
        if t == 0 {
            return Err(DataError::NoWords);
        }
        if counts.len() != n * t {
            return Err(DataError::Shape(format!(
                "counts has {} entries, expected {} ({} rows x {} words)",
                counts.len(),
                n * t,
                n,
                t
            )));
        }
        for (idx, &v) in counts.iter().enumerate() {
            let (row, word) = (idx / t, idx % t);
            if !v.is_finite() {
                return Err(DataError::NonFiniteCount { row, word });
            }
            if v < 0.0 {
                return Err(DataError::NegativeCount { row, word, value: v });
            }
        }
        let mut class_labels: Vec<i64> = raw_labels.to_vec();
        class_labels.sort_unstable();
        class_labels.dedup();
        let labels = raw_labels
            .iter()
            .map(|l| class_labels.binary_search(l).unwrap())
            .collect();
        Ok(Self {
            counts,
            n,
            t,
            labels,
            class_labels,
            word_ids: (0..t).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn class_count(&self) -> usize {
        self.class_labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.counts[i * self.t..(i + 1) * self.t]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.counts[i * self.t + j]
    }

    /// Class index of row `i`, in `0..class_count()`.
    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Original label value of class index `c`.
    pub fn class_label(&self, c: usize) -> i64 {
        self.class_labels[c]
    }

    /// Node ids of the current columns. Fresh datasets use `0..t`.
    pub fn word_ids(&self) -> &[usize] {
        &self.word_ids
    }

    /// Column `j` gathered into a new vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.value(i, j)).collect()
    }

    /// Signed labels for binary problems: class index 0 maps to +1,
    /// class index 1 to -1. Errors unless exactly two classes are present.
    pub fn signed_labels(&self) -> Result<Vec<f64>, DataError> {
        if self.class_count() != 2 {
            return Err(DataError::NotBinary(self.class_count()));
        }
        Ok(self
            .labels
            .iter()
            .map(|&c| if c == 0 { 1.0 } else { -1.0 })
            .collect())
    }
}

/// Reads a dataset from CSV with header `label,w0,w1,...`.
pub fn load_dataset<P: AsRef<Path>>(path: P) -> Result<HistogramDataset, DataError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(file)
}

/// Reads a dataset in CSV form from any reader. See [`load_dataset`].
pub fn read_dataset<R: Read>(reader: R) -> Result<HistogramDataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() || header.get(0) != Some("label") {
        return Err(DataError::BadHeader(
            header.get(0).unwrap_or("<empty>").to_string(),
        ));
    }
    let t = header.len() - 1;
    if t == 0 {
        return Err(DataError::NoWords);
    }
    let mut counts = Vec::new();
    let mut raw_labels = Vec::new();
    for (ridx, record) in rdr.records().enumerate() {
        let record = record?;
        let row = ridx + 2; // 1-based, after the header line
        if record.len() != t + 1 {
            return Err(DataError::RaggedRow {
                row,
                expected: t + 1,
                found: record.len(),
            });
        }
        let label: i64 = record[0].trim().parse().map_err(|_| DataError::BadNumber {
            row,
            col: "label".into(),
            value: record[0].to_string(),
        })?;
        raw_labels.push(label);
        for j in 0..t {
            let field = record[j + 1].trim();
            let v: f64 = field.parse().map_err(|_| DataError::BadNumber {
                row,
                col: header[j + 1].to_string(),
                value: field.to_string(),
            })?;
            counts.push(v);
        }
    }
    if raw_labels.is_empty() {
        return Err(DataError::Empty);
    }
    HistogramDataset::new(counts, t, &raw_labels)
}

/// Writes a dataset as CSV with header `label,w0,w1,...`.
pub fn write_dataset<P: AsRef<Path>>(ds: &HistogramDataset, path: P) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_dataset_to(ds, file)
}

pub fn write_dataset_to<W: Write>(ds: &HistogramDataset, writer: W) -> Result<(), DataError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((0..ds.t()).map(|j| format!("w{j}")));
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(ds.t() + 1);
    for i in 0..ds.n() {
        record.clear();
        record.push(ds.class_label(ds.label(i)).to_string());
        record.extend(ds.row(i).iter().map(|v| format_count(*v)));
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|source| DataError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

fn format_count(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // shortest representation that round-trips exactly
        let mut buf = ryu_format(v);
        if !buf.contains('.') && !buf.contains('e') {
            buf.push_str(".0");
        }
        buf
    }
}

fn ryu_format(v: f64) -> String {
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().ok(), Some(v));
    s
}

/// Per-level preprocessing: optional l1 row normalization followed by an
/// optional elementwise square root.
pub fn preprocess(
    mut ds: HistogramDataset,
    l1_normalize: bool,
    sqrt: bool,
) -> Result<HistogramDataset, DataError> {
    let t = ds.t;
    if l1_normalize {
        for i in 0..ds.n {
            let row = &mut ds.counts[i * t..(i + 1) * t];
            let sum: f64 = row.iter().sum();
            if sum == 0.0 {
                return Err(DataError::ZeroRow { row: i });
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    if sqrt {
        for v in ds.counts.iter_mut() {
            *v = v.sqrt();
        }
    }
    Ok(ds)
}

/// Assignment of original words to merged clusters.
///
/// `assign[j]` is the cluster index of word `j`; every cluster in `0..k`
/// receives at least one word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordMap {
    assign: Vec<usize>,
    k: usize,
}

impl WordMap {
    pub fn new(assign: Vec<usize>, k: usize) -> Result<Self, DataError> {
        let mut seen = vec![false; k];
        for (word, &cluster) in assign.iter().enumerate() {
            if cluster >= k {
                return Err(DataError::MapOutOfRange { word, cluster, k });
            }
            seen[cluster] = true;
        }
        if let Some(cluster) = seen.iter().position(|s| !s) {
            return Err(DataError::MapNotSurjective(cluster));
        }
        Ok(Self { assign, k })
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assign
    }

    pub fn cluster_of(&self, word: usize) -> usize {
        self.assign[word]
    }

    pub fn words(&self) -> usize {
        self.assign.len()
    }

    pub fn clusters(&self) -> usize {
        self.k
    }
}

/// Sums histogram columns according to a merge map, producing a dataset over
/// `map.clusters()` words. Row sums and labels are preserved.
pub fn apply_merge_map(
    ds: &HistogramDataset,
    map: &WordMap,
) -> Result<HistogramDataset, DataError> {
    if map.words() != ds.t() {
        return Err(DataError::MapSizeMismatch {
            expected: map.words(),
            found: ds.t(),
        });
    }
    let k = map.clusters();
    let mut counts = vec![0.0; ds.n() * k];
    for i in 0..ds.n() {
        let row = ds.row(i);
        let out = &mut counts[i * k..(i + 1) * k];
        for (j, &v) in row.iter().enumerate() {
            out[map.cluster_of(j)] += v;
        }
    }
    let raw_labels: Vec<i64> = (0..ds.n()).map(|i| ds.class_label(ds.label(i))).collect();
    HistogramDataset::new(counts, k, &raw_labels)
}

/// Per-class and global first and second moments of the word columns.
#[derive(Debug, Clone)]
pub struct ClassStats {
    c: usize,
    t: usize,
    n: usize,
    class_counts: Vec<usize>,
    class_sums: Vec<f64>,
    class_sumsq: Vec<f64>,
    global_sums: Vec<f64>,
}

impl ClassStats {
    pub fn class_count(&self) -> usize {
        self.c
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples in class `c`.
    pub fn count(&self, c: usize) -> usize {
        self.class_counts[c]
    }

    /// Sum of word `j` over samples of class `c`.
    pub fn sum(&self, c: usize, j: usize) -> f64 {
        self.class_sums[c * self.t + j]
    }

    /// Sum of squared values of word `j` over samples of class `c`.
    pub fn sumsq(&self, c: usize, j: usize) -> f64 {
        self.class_sumsq[c * self.t + j]
    }

    /// Mean of word `j` within class `c`.
    pub fn mean(&self, c: usize, j: usize) -> f64 {
        self.sum(c, j) / self.class_counts[c] as f64
    }

    /// Sum of word `j` over all samples.
    pub fn global_sum(&self, j: usize) -> f64 {
        self.global_sums[j]
    }

    pub fn global_mean(&self, j: usize) -> f64 {
        self.global_sums[j] / self.n as f64
    }

    /// Total mass over all words and samples.
    pub fn total(&self) -> f64 {
        self.global_sums.iter().sum()
    }
}

/// Computes [`ClassStats`] in one pass over the dataset.
pub fn class_statistics(ds: &HistogramDataset) -> ClassStats {
    let (c, t, n) = (ds.class_count(), ds.t(), ds.n());
    let mut class_counts = vec![0usize; c];
    let mut class_sums = vec![0.0; c * t];
    let mut class_sumsq = vec![0.0; c * t];
    let mut global_sums = vec![0.0; t];
    for i in 0..n {
        let ci = ds.label(i);
        class_counts[ci] += 1;
        let row = ds.row(i);
        let sums = &mut class_sums[ci * t..(ci + 1) * t];
        let sumsq = &mut class_sumsq[ci * t..(ci + 1) * t];
        for j in 0..t {
            sums[j] += row[j];
            sumsq[j] += row[j] * row[j];
            global_sums[j] += row[j];
        }
    }
    ClassStats {
        c,
        t,
        n,
        class_counts,
        class_sums,
        class_sumsq,
        global_sums,
    }
}
