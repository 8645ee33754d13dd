//! Multi-label datasets: loading (CSV and Mulan-style ARFF), validation,
//! fold and hold-out partitioning, instance weights and feature scaling.
//!
//! Every feature vector carries a constant `1.0` at index 0 so that all
//! linear models in the crate are `(m + 1)`-dimensional.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labelled example. `features[0]` is the bias term.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub labels: Vec<bool>,
}

impl Instance {
    /// Builds an instance from raw features (bias is prepended).
    pub fn new(raw_features: &[f64], labels: Vec<bool>) -> Self {
        let mut features = Vec::with_capacity(raw_features.len() + 1);
        features.push(1.0);
        features.extend_from_slice(raw_features);
        Instance { features, labels }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    instances: Vec<Instance>,
    m: usize,
    d: usize,
}

impl Dataset {
    /// Validates shape and value invariants and wraps the instances.
    pub fn new(instances: Vec<Instance>) -> Result<Self> {
        let first = instances
            .first()
            .ok_or_else(|| Error::Argument("dataset must contain at least one instance".into()))?;
        if first.features.is_empty() {
            return Err(Error::Schema("feature vector is missing the bias term".into()));
        }
        let m = first.features.len() - 1;
        let d = first.labels.len();
        for (n, inst) in instances.iter().enumerate() {
            if inst.features.len() != m + 1 || inst.labels.len() != d {
                return Err(Error::Schema(format!(
                    "instance {} has {} features and {} labels, expected {} and {}",
                    n + 1,
                    inst.features.len().saturating_sub(1),
                    inst.labels.len(),
                    m,
                    d
                )));
            }
            if inst.features[0] != 1.0 {
                return Err(Error::Schema(format!("instance {} has bias {} != 1", n + 1, inst.features[0])));
            }
            if inst.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Schema(format!("instance {} has a non-finite feature", n + 1)));
            }
        }
        Ok(Dataset { instances, m, d })
    }

    /// Builds a dataset from raw feature rows (without bias) and label rows.
    pub fn from_rows(features: Vec<Vec<f64>>, labels: Vec<Vec<bool>>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Schema(format!(
                "{} feature rows but {} label rows",
                features.len(),
                labels.len()
            )));
        }
        let instances = features
            .iter()
            .zip(labels)
            .map(|(x, y)| Instance::new(x, y))
            .collect();
        Dataset::new(instances)
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Feature dimensionality, excluding the bias.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Label dimensionality.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    pub fn label_matrix(&self) -> Vec<Vec<bool>> {
        self.instances.iter().map(|i| i.labels.clone()).collect()
    }

    /// Column `i` of the label matrix.
    pub fn label_column(&self, i: usize) -> Vec<bool> {
        self.instances.iter().map(|inst| inst.labels[i]).collect()
    }

    /// Sub-dataset with the given instance indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(indices.iter().map(|&n| self.instances[n].clone()).collect())
    }

    /// Writes the dataset in the CSV layout accepted by [`load_csv`].
    ///
    /// Floats are written in shortest round-trip form so that reloading
    /// yields a bitwise-equal dataset.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# m={} d={}", self.m, self.d);
        for inst in &self.instances {
            let mut first = true;
            for v in &inst.features[1..] {
                if !first {
                    out.push(',');
                }
                first = false;
                let _ = write!(out, "{v:?}");
            }
            for &l in &inst.labels {
                if !first {
                    out.push(',');
                }
                first = false;
                out.push(if l { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Instance;
    type IntoIter = std::slice::Iter<'a, Instance>;

    fn into_iter(self) -> Self::IntoIter {
        self.instances.iter()
    }
}

/// Non-negative per-instance weights.
///
/// A zero-sum vector is allowed (an expert with no responsibility, a
/// hold-out set with no weight); only [`WeightVector::normalized`] rejects it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((n, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Argument(format!("weight {n} is {w}; weights must be finite and >= 0")));
        }
        Ok(WeightVector(weights))
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn ones(n: usize) -> Self {
        WeightVector(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Rescaled copy summing to one.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.sum();
        if total <= 0.0 {
            return Err(Error::Argument("cannot normalize weights with zero sum".into()));
        }
        Ok(WeightVector(self.0.iter().map(|w| w / total).collect()))
    }

    /// Rescaled copy with mean one (sum equal to the length); zero-sum stays zero.
    pub fn rescaled_to_mean_one(&self) -> Self {
        let total = self.sum();
        if total <= 0.0 {
            return self.clone();
        }
        let scale = self.0.len() as f64 / total;
        WeightVector(self.0.iter().map(|w| w * scale).collect())
    }

    pub fn select(&self, indices: &[usize]) -> WeightVector {
        WeightVector(indices.iter().map(|&n| self.0[n]).collect())
    }
}

/// Per-feature z-scoring fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    /// Computes the mean and standard deviation of each raw feature.
    /// Constant features get a scale of one.
    pub fn fit(data: &Dataset) -> Self {
        let m = data.m();
        let n = data.len() as f64;
        let mut means = vec![0.0; m];
        for inst in data {
            for (mu, x) in means.iter_mut().zip(&inst.features[1..]) {
                *mu += x;
            }
        }
        means.iter_mut().for_each(|mu| *mu /= n);
        let mut vars = vec![0.0; m];
        for inst in data {
            for ((v, x), mu) in vars.iter_mut().zip(&inst.features[1..]).zip(&means) {
                *v += (x - mu) * (x - mu);
            }
        }
        let scales = vars
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { means, scales }
    }

    pub fn transform_features(&self, features: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(features.len());
        out.push(features[0]);
        for ((x, mu), s) in features[1..].iter().zip(&self.means).zip(&self.scales) {
            out.push((x - mu) / s);
        }
        out
    }

    pub fn transform(&self, data: &Dataset) -> Result<Dataset> {
        if data.m() != self.means.len() {
            return Err(Error::Schema(format!(
                "standardizer fitted on m = {} applied to m = {}",
                self.means.len(),
                data.m()
            )));
        }
        Dataset::new(
            data.iter()
                .map(|inst| Instance {
                    features: self.transform_features(&inst.features),
                    labels: inst.labels.clone(),
                })
                .collect(),
        )
    }
}

fn parse_label(token: &str, row: usize, column: usize) -> Result<bool> {
    let t = token.trim();
    let value = match t {
        "0" => Some(false),
        "1" => Some(true),
        _ => match t.parse::<f64>() {
            Ok(0.0) => Some(false),
            Ok(1.0) => Some(true),
            _ => None,
        },
    };
    value.ok_or_else(|| Error::Label {
        row,
        column,
        value: t.to_string(),
    })
}

/// Parses CSV text: features then `d` label columns per row. Blank lines and
/// lines starting with `#` are skipped. Rows are numbered from 1 over data rows.
pub fn parse_csv(text: &str, d: usize) -> Result<Dataset> {
    let mut width = None;
    let mut instances = Vec::new();
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    for (idx, line) in rows.enumerate() {
        let row = idx + 1;
        let tokens: Vec<&str> = line.split(',').collect();
        match width {
            None => {
                if tokens.len() < d {
                    return Err(Error::Schema(format!(
                        "row {row} has {} columns, fewer than the {d} label columns",
                        tokens.len()
                    )));
                }
                width = Some(tokens.len());
            }
            Some(w) if w != tokens.len() => {
                return Err(Error::Schema(format!("row {row} has {} columns, expected {w}", tokens.len())));
            }
            _ => {}
        }
        let m = tokens.len() - d;
        let mut raw = Vec::with_capacity(m);
        for (col, tok) in tokens[..m].iter().enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("column {} value `{}` is not a number", col + 1, tok.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: format!("column {} value is not finite", col + 1),
                });
            }
            raw.push(v);
        }
        let labels = tokens[m..]
            .iter()
            .enumerate()
            .map(|(j, tok)| parse_label(tok, row, m + j + 1))
            .collect::<Result<Vec<_>>>()?;
        instances.push(Instance::new(&raw, labels));
    }
    Dataset::new(instances)
}

/// Loads a comma-separated file whose last `d` columns are binary labels.
pub fn load_csv(path: impl AsRef<Path>, d: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AttributeKind {
    Numeric,
    /// Two-valued nominal; the index of the value meaning "present".
    Binary { positive: usize },
}

#[derive(Debug, Clone)]
struct Attribute {
    name: String,
    kind: AttributeKind,
    values: Vec<String>,
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"'))) {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Splits `@attribute <name> <type>` where the name may be quoted.
fn split_attribute_decl(rest: &str) -> Option<(&str, &str)> {
    let rest = rest.trim();
    let quote = rest.chars().next()?;
    if quote == '\'' || quote == '"' {
        let end = rest[1..].find(quote)? + 1;
        Some((&rest[1..end], rest[end + 1..].trim()))
    } else {
        let end = rest.find(char::is_whitespace)?;
        Some((&rest[..end], rest[end..].trim()))
    }
}

fn parse_attribute(line_no: usize, rest: &str) -> Result<Attribute> {
    let (name, ty) = split_attribute_decl(rest).ok_or_else(|| Error::Parse {
        row: line_no,
        message: format!("malformed attribute declaration `{rest}`"),
    })?;
    let name = name.to_string();
    let lower = ty.to_ascii_lowercase();
    if lower == "numeric" || lower == "real" || lower == "integer" {
        return Ok(Attribute {
            name,
            kind: AttributeKind::Numeric,
            values: Vec::new(),
        });
    }
    if ty.starts_with('{') && ty.ends_with('}') {
        let values: Vec<String> = ty[1..ty.len() - 1]
            .split(',')
            .map(|v| unquote(v).to_string())
            .collect();
        if values.len() == 2 {
            let positive = values
                .iter()
                .position(|v| v == "1" || v.eq_ignore_ascii_case("true") || v.eq_ignore_ascii_case("yes"));
            let negative = values
                .iter()
                .position(|v| v == "0" || v.eq_ignore_ascii_case("false") || v.eq_ignore_ascii_case("no"));
            if let (Some(p), Some(n)) = (positive, negative) {
                if p != n {
                    return Ok(Attribute {
                        name,
                        kind: AttributeKind::Binary { positive: p },
                        values,
                    });
                }
            }
        }
        return Err(Error::UnsupportedAttribute {
            name,
            reason: format!("nominal attribute {ty} is not binary"),
        });
    }
    Err(Error::UnsupportedAttribute {
        name,
        reason: format!("attribute type `{ty}` is not supported"),
    })
}

fn attribute_value(attr: &Attribute, token: &str, row: usize) -> Result<f64> {
    let t = unquote(token);
    if t == "?" {
        return Err(Error::Parse {
            row,
            message: format!("missing value for `{}`", attr.name),
        });
    }
    match attr.kind {
        AttributeKind::Numeric => t.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
            row,
            message: format!("`{}` value `{t}` is not a finite number", attr.name),
        }),
        AttributeKind::Binary { positive } => {
            let idx = attr.values.iter().position(|v| v == t).ok_or_else(|| Error::Parse {
                row,
                message: format!("`{}` value `{t}` is not one of {:?}", attr.name, attr.values),
            })?;
            Ok(if idx == positive { 1.0 } else { 0.0 })
        }
    }
}

/// Parses Mulan-style ARFF text. Dense and sparse (`{index value, ...}`)
/// data rows are accepted; `label_names` select the label attributes by name,
/// all other attributes become features in declaration order.
pub fn parse_arff(text: &str, label_names: &[String]) -> Result<Dataset> {
    let mut attrs: Vec<Attribute> = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut in_data = false;
    for (i, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(i + 1, &line["@attribute".len()..])?);
        } else if lower.starts_with("@data") {
            in_data = true;
            break;
        }
    }
    if !in_data {
        return Err(Error::Schema("ARFF file has no @data section".into()));
    }

    let mut label_idx = Vec::with_capacity(label_names.len());
    for name in label_names {
        let idx = attrs
            .iter()
            .position(|a| &a.name == name)
            .ok_or_else(|| Error::Schema(format!("label attribute `{name}` not found")))?;
        label_idx.push(idx);
    }
    let mut is_label = vec![false; attrs.len()];
    for &i in &label_idx {
        is_label[i] = true;
    }
    let feature_idx: Vec<usize> = (0..attrs.len()).filter(|&i| !is_label[i]).collect();

    let mut instances = Vec::new();
    let mut row = 0;
    for (_, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        row += 1;
        let mut values = vec![0.0; attrs.len()];
        if line.starts_with('{') {
            let body = line.trim_start_matches('{').trim_end_matches('}');
            for pair in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                let (idx, val) = pair.split_once(char::is_whitespace).ok_or_else(|| Error::Parse {
                    row,
                    message: format!("malformed sparse entry `{pair}`"),
                })?;
                let idx: usize = idx.parse().ok().filter(|&i| i < attrs.len()).ok_or_else(|| Error::Parse {
                    row,
                    message: format!("sparse index `{idx}` out of range"),
                })?;
                values[idx] = attribute_value(&attrs[idx], val.trim(), row)?;
            }
        } else {
            let tokens: Vec<&str> = line.split(',').collect();
            if tokens.len() != attrs.len() {
                return Err(Error::Schema(format!(
                    "data row {row} has {} values, expected {}",
                    tokens.len(),
                    attrs.len()
                )));
            }
            for (j, tok) in tokens.iter().enumerate() {
                values[j] = attribute_value(&attrs[j], tok, row)?;
            }
        }
        let raw_features: Vec<f64> = feature_idx.iter().map(|&j| values[j]).collect();
        let mut labels = Vec::with_capacity(label_idx.len());
        for &j in &label_idx {
            let v = values[j];
            if v != 0.0 && v != 1.0 {
                return Err(Error::Label {
                    row,
                    column: j + 1,
                    value: v.to_string(),
                });
            }
            labels.push(v == 1.0);
        }
        instances.push(Instance::new(&raw_features, labels));
    }
    Dataset::new(instances)
}

/// Names of all attributes declared in an ARFF document, in order.
pub fn arff_attribute_names(text: &str) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@attribute") {
            let (name, _) = split_attribute_decl(&line["@attribute".len()..]).ok_or_else(|| Error::Parse {
                row: i + 1,
                message: "malformed attribute declaration".into(),
            })?;
            names.push(name.to_string());
        } else if lower.starts_with("@data") {
            break;
        }
    }
    Ok(names)
}

pub fn load_arff(path: impl AsRef<Path>, label_names: &[String]) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_arff(&text, label_names)
}

/// Loads an ARFF file whose last `d` attributes are the labels (Mulan convention).
pub fn load_arff_trailing(path: impl AsRef<Path>, d: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let names = arff_attribute_names(&text)?;
    if names.len() < d {
        return Err(Error::Schema(format!("ARFF declares {} attributes, fewer than d = {d}", names.len())));
    }
    parse_arff(&text, &names[names.len() - d..])
}

/// Seeded shuffle of `0..n`.
pub(crate) fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    idx
}

/// Test-index sets of a seeded `k`-fold partition. Fold sizes differ by at most one;
/// the first `n mod k` folds carry the extra instance.
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Argument(format!("fold count must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::Argument(format!("fold count {k} exceeds instance count {n}")));
    }
    let order = shuffled_indices(n, seed);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut fold = order[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}

/// `k` (train, test) pairs whose test parts partition the data.
pub fn split_folds(data: &Dataset, k: usize, seed: u64) -> Result<Vec<(Dataset, Dataset)>> {
    let folds = fold_indices(data.len(), k, seed)?;
    let mut out = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        let mut train_idx = train_idx;
        train_idx.sort_unstable();
        out.push((data.select(&train_idx)?, data.select(test_idx)?));
    }
    Ok(out)
}

/// Instance indices of a seeded hold-out split: `(train, holdout)`.
pub fn holdout_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!("hold-out ratio must lie in (0, 1), got {ratio}")));
    }
    if n < 2 {
        return Err(Error::Argument(format!("hold-out split needs at least 2 instances, got {n}")));
    }
    let size = ((ratio * n as f64).round() as usize).clamp(1, n - 1);
    let order = shuffled_indices(n, seed);
    let mut holdout = order[..size].to_vec();
    let mut train = order[size..].to_vec();
    holdout.sort_unstable();
    train.sort_unstable();
    Ok((train, holdout))
}

/// A dataset paired with one weight per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDataset {
    pub data: Dataset,
    pub weights: WeightVector,
}

/// Splits data and weights together into disjoint train and hold-out parts.
pub fn holdout_split(
    data: &Dataset,
    weights: &WeightVector,
    ratio: f64,
    seed: u64,
) -> Result<(WeightedDataset, WeightedDataset)> {
    if weights.len() != data.len() {
        return Err(Error::Argument(format!(
            "{} weights for {} instances",
            weights.len(),
            data.len()
        )));
    }
    let (train, holdout) = holdout_indices(data.len(), ratio, seed)?;
    Ok((
        WeightedDataset {
            data: data.select(&train)?,
            weights: weights.select(&train),
        },
        WeightedDataset {
            data: data.select(&holdout)?,
            weights: weights.select(&holdout),
        },
    ))
}
