//! Synthetic ambiguous-label data and the dataset CSV format
//! (`f0,...,f{d-1},label`).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng as _;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::softmax;
use crate::ranking::{min_pairwise_gap, CondDist};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: usize,
    /// Generating distribution, known only for synthetic data.
    pub eta_true: Option<CondDist>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub dim: usize,
    pub classes: usize,
    pub samples: Vec<LabeledSample>,
}

impl Dataset {
    pub fn new(dim: usize, classes: usize, samples: Vec<LabeledSample>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::TooFewClasses(classes));
        }
        for s in &samples {
            if s.x.len() != dim {
                return Err(Error::ClassMismatch {
                    expected: dim,
                    got: s.x.len(),
                });
            }
            if let Some(i) = s.x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            if s.y >= classes {
                return Err(Error::LabelOutOfRange { label: s.y, classes });
            }
        }
        Ok(Self { dim, classes, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Splits off the last `n` samples.
    pub fn split_tail(mut self, n: usize) -> (Dataset, Dataset) {
        let at = self.samples.len().saturating_sub(n);
        let tail = Dataset {
            dim: self.dim,
            classes: self.classes,
            samples: self.samples.split_off(at),
        };
        (self, tail)
    }

    /// Shuffles with the seed's split stream, then holds out the last
    /// `fraction` of the samples.
    pub fn holdout_split(mut self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut rng = rng::child(seed, Stream::Split, &[]);
        self.samples.shuffle(&mut rng);
        let n_hold = (self.samples.len() as f64 * fraction).round() as usize;
        self.split_tail(n_hold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Softmax temperature; smaller is sharper.
    pub tau: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 20,
            dim: 16,
            n_train: 5000,
            n_test: 2000,
            tau: 2.0,
        }
    }
}

/// Generated η with a pairwise gap below this are redrawn.
pub const ETA_TIE_GAP: f64 = 1e-6;
const MAX_REDRAWS: usize = 10_000;

/// Draws `n` samples from a random linear teacher: `x ~ N(0, I_d)`,
/// `η(x) = softmax(W x / τ)` with `W ~ N(0, 1)^{C×d}`, `y ~ η(x)`.
///
/// Sample `i` depends only on `(seed, i)`, so a longer draw extends a
/// shorter one.
pub fn generate_synthetic(classes: usize, dim: usize, n: usize, tau: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 {
        return Err(Error::TooFewClasses(classes));
    }
    if dim == 0 || n == 0 {
        return Err(Error::InvalidArgument("need d >= 1 and n >= 1".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let mut wrng = rng::child(seed, Stream::TeacherWeights, &[]);
    let teacher: Vec<f64> = (0..classes * dim).map(|_| rng::normal(&mut wrng)).collect();
    let samples = (0..n)
        .map(|i| {
            let mut rng = rng::child(seed, Stream::Samples, &[i as u64]);
            for _ in 0..MAX_REDRAWS {
                let x: Vec<f64> = (0..dim).map(|_| rng::normal(&mut rng)).collect();
                let logits: Vec<f64> = teacher
                    .chunks_exact(dim)
                    .map(|w| w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / tau)
                    .collect();
                let eta = softmax(&logits);
                if min_pairwise_gap(&eta) < ETA_TIE_GAP {
                    continue;
                }
                let Ok(eta) = CondDist::new(eta) else { continue };
                let y = sample_label(&eta, rng.random::<f64>());
                return Ok(LabeledSample {
                    x,
                    y,
                    eta_true: Some(eta),
                });
            }
            Err(Error::InvalidArgument(format!(
                "no tie-free η for sample {i} after {MAX_REDRAWS} draws; tau {tau} is too small"
            )))
        })
        .collect::<Result<_>>()?;
    Dataset::new(dim, classes, samples)
}

fn sample_label(eta: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (c, p) in eta.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    eta.len() - 1
}

/// Writes `f0,...,f{d-1},label`; floats use the shortest round-trip form.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..data.dim).map(|i| format!("f{i}")).collect();
    writeln!(out, "{},label", header.join(","))?;
    for s in &data.samples {
        for v in &s.x {
            write!(out, "{v:?},")?;
        }
        writeln!(out, "{}", s.y)?;
    }
    out.flush()?;
    Ok(())
}

/// Rows of `values..., label` from a CSV file. A first row that does not
/// parse as numbers is taken as the header.
pub(crate) fn read_labeled_table(path: &Path) -> Result<Vec<(Vec<f64>, usize)>> {
    let rows = read_table(path, true)?;
    Ok(rows.into_iter().map(|(v, y)| (v, y.expect("labeled"))).collect())
}

/// Rows of numbers only, e.g. a score matrix without a label column.
pub(crate) fn read_value_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_table(path, false)?.into_iter().map(|(v, _)| v).collect())
}

fn read_table(path: &Path, labeled: bool) -> Result<Vec<(Vec<f64>, Option<usize>)>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => parse_err(0, format!("{other:?}")),
        })?;
    let min_width = if labeled { 2 } else { 1 };
    let mut rows = Vec::new();
    let mut width = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() < min_width {
            let what = if labeled { "at least one value column and a label" } else { "at least one column" };
            return Err(parse_err(line, format!("need {what}")));
        }
        let fields: Vec<&str> = record.iter().collect();
        let (values, label_field) = fields.split_at(fields.len() - usize::from(labeled));
        let parsed: std::result::Result<Vec<f64>, _> = values.iter().map(|v| v.parse::<f64>()).collect();
        let label = label_field.first().map(|l| l.parse::<usize>()).transpose();
        match (parsed, label) {
            (Ok(values), Ok(label)) => {
                if let Some(j) = values.iter().position(|v| !v.is_finite()) {
                    return Err(parse_err(line, format!("column {j} is not finite")));
                }
                if *width.get_or_insert(values.len()) != values.len() {
                    return Err(parse_err(
                        line,
                        format!("expected {} value columns, found {}", width.unwrap(), values.len()),
                    ));
                }
                rows.push((values, label));
            }
            _ if i == 0 => continue,
            (Err(e), _) => {
                let col = values.iter().position(|v| v.parse::<f64>().is_err()).unwrap_or(0);
                return Err(parse_err(line, format!("column {col}: {e} ({:?})", values[col])));
            }
            (_, Err(e)) => return Err(parse_err(line, format!("label {:?}: {e}", label_field[0]))),
        }
    }
    Ok(rows)
}

/// Loads a dataset CSV; `C` is inferred as the largest label plus one.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let rows = read_labeled_table(path)?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dim = rows[0].0.len();
    let classes = rows.iter().map(|r| r.1).max().unwrap_or(0) + 1;
    let samples = rows
        .into_iter()
        .map(|(x, y)| LabeledSample { x, y, eta_true: None })
        .collect();
    Dataset::new(dim, classes.max(2), samples)
}
