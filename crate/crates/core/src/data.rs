//! Synthetic tasks and client partitioning.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Batch, Targets};
use crate::numeric::Matrix;
use crate::rng::{derive_tagged, domain, gaussian_vector, seeded_rng, CounterStream};

/// Attempts at drawing Dirichlet proportions that leave no shard empty.
pub const DIRICHLET_RETRY_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    RegressionQuadratic,
    ClassificationBlobs,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::RegressionQuadratic => "regression_quadratic",
            Task::ClassificationBlobs => "classification_blobs",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Targets,
    pub task: Task,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn batch(&self, idx: &[usize]) -> Result<Batch> {
        Batch::new(self.inputs.select_rows(idx), self.targets.select(idx))
    }

    pub fn full_batch(&self) -> Result<Batch> {
        Batch::new(self.inputs.clone(), self.targets.clone())
    }

    /// Class labels, or all zeros for regression.
    pub fn labels(&self) -> Vec<usize> {
        match &self.targets {
            Targets::Classes(c) => c.clone(),
            Targets::Values(m) => vec![0; m.rows()],
        }
    }

    /// Rows `[0, at)` and `[at, n)`.
    pub fn split(&self, at: usize) -> (Dataset, Dataset) {
        let head: Vec<usize> = (0..at).collect();
        let tail: Vec<usize> = (at..self.len()).collect();
        let part = |idx: &[usize]| Dataset {
            inputs: self.inputs.select_rows(idx),
            targets: self.targets.select(idx),
            task: self.task,
            seed: self.seed,
        };
        (part(&head), part(&tail))
    }
}

/// Isotropic Gaussian blobs around seeded centers at distance `separation`
/// from the origin. Sample `i` belongs to class `i % classes`.
pub fn make_classification_blobs(n: usize, dim: usize, classes: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || n < classes {
        return Err(Error::InvalidConfig(format!(
            "blobs need n >= classes >= 2 (n={n}, classes={classes})"
        )));
    }
    let centers: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let g = gaussian_vector(derive_tagged(seed, domain::DATA, 0, c as u64), dim);
            let norm = g.norm().max(f64::MIN_POSITIVE);
            g.as_slice().iter().map(|x| separation * x / norm).collect()
        })
        .collect();
    let noise = CounterStream::new(derive_tagged(seed, domain::DATA, 1, 0));
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for (j, center) in centers[c].iter().enumerate() {
            data.push(center + noise.gaussian((i * dim + j) as u64));
        }
        labels.push(c);
    }
    Ok(Dataset {
        inputs: Matrix::new(n, dim, data)?,
        targets: Targets::Classes(labels),
        task: Task::ClassificationBlobs,
        seed,
    })
}

/// Linear-teacher regression: `y = W* x + noise * eps`, `x ~ N(0, I)`,
/// `W*` entries `N(0, 1/dim)`. Squared error on a linear model is quadratic.
pub fn make_regression_quadratic(n: usize, dim: usize, out_dim: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n == 0 || dim == 0 || out_dim == 0 {
        return Err(Error::InvalidConfig("regression task needs positive sizes".into()));
    }
    let teacher = gaussian_vector(derive_tagged(seed, domain::DATA, 2, 0), dim * out_dim);
    let scale = 1.0 / (dim as f64).sqrt();
    let xs = CounterStream::new(derive_tagged(seed, domain::DATA, 3, 0));
    let es = CounterStream::new(derive_tagged(seed, domain::DATA, 4, 0));
    let mut inputs = Vec::with_capacity(n * dim);
    let mut targets = Vec::with_capacity(n * out_dim);
    for i in 0..n {
        let row: Vec<f64> = (0..dim).map(|j| xs.gaussian((i * dim + j) as u64)).collect();
        for o in 0..out_dim {
            let w = &teacher.as_slice()[o * dim..(o + 1) * dim];
            let y = w.iter().zip(&row).fold(0.0, |acc, (a, b)| acc + a * b) * scale;
            targets.push(y + noise * es.gaussian((i * out_dim + o) as u64));
        }
        inputs.extend(row);
    }
    Ok(Dataset {
        inputs: Matrix::new(n, dim, inputs)?,
        targets: Targets::Values(Matrix::new(n, out_dim, targets)?),
        task: Task::RegressionQuadratic,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Iid,
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSpec {
    pub mode: PartitionMode,
    /// Concentration; used by `dirichlet` only.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        if self.mode == PartitionMode::Dirichlet && !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "partition.alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn apply(&self, labels: &[usize], clients: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        self.validate()?;
        match self.mode {
            PartitionMode::Iid => iid_partition(labels.len(), clients, seed),
            PartitionMode::Dirichlet => dirichlet_partition(labels, clients, self.alpha, seed),
        }
    }
}

/// Shuffled split into `clients` shards whose sizes differ by at most one.
pub fn iid_partition(n: usize, clients: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if clients == 0 {
        return Err(Error::InvalidConfig("partition needs at least one client".into()));
    }
    let mut rng = seeded_rng(derive_tagged(seed, domain::PARTITION, 0, 0));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    let base = n / clients;
    let extra = n % clients;
    let mut shards = Vec::with_capacity(clients);
    let mut start = 0;
    for m in 0..clients {
        let len = base + usize::from(m < extra);
        let mut shard = idx[start..start + len].to_vec();
        shard.sort_unstable();
        shards.push(shard);
        start += len;
    }
    Ok(shards)
}

/// Per-class proportions drawn from `Dirichlet(alpha * 1_M)`. Draws that
/// leave a shard empty are retried up to [`DIRICHLET_RETRY_LIMIT`] times;
/// after that the empty shards are kept and a warning is logged.
pub fn dirichlet_partition(labels: &[usize], clients: usize, alpha: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    if clients == 0 {
        return Err(Error::InvalidConfig("partition needs at least one client".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("dirichlet alpha must be positive, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = seeded_rng(derive_tagged(seed, domain::PARTITION, 1, 0));
    let mut shards = Vec::new();
    for attempt in 0..DIRICHLET_RETRY_LIMIT {
        shards = vec![Vec::new(); clients];
        for members in &by_class {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let mut weights: Vec<f64> = (0..clients).map(|_| gamma.sample(&mut rng)).collect();
            let mut sum: f64 = weights.iter().sum();
            if sum <= 0.0 || !sum.is_finite() {
                // Every draw underflowed; fall back to one random owner.
                weights = vec![0.0; clients];
                weights[rand::Rng::gen_range(&mut rng, 0..clients)] = 1.0;
                sum = 1.0;
            }
            let n_c = members.len();
            let mut cum = 0.0;
            let mut start = 0;
            for (m, w) in weights.iter().enumerate() {
                cum += w / sum;
                let end = if m + 1 == clients {
                    n_c
                } else {
                    ((cum * n_c as f64).floor() as usize).clamp(start, n_c)
                };
                shards[m].extend_from_slice(&members[start..end]);
                start = end;
            }
        }
        if shards.iter().all(|s| !s.is_empty()) || labels.len() < clients {
            break;
        }
        if attempt + 1 == DIRICHLET_RETRY_LIMIT {
            let empty = shards.iter().filter(|s| s.is_empty()).count();
            log::warn!("dirichlet partition left {empty} empty shard(s) after {DIRICHLET_RETRY_LIMIT} draws");
        }
    }
    for s in &mut shards {
        s.sort_unstable();
    }
    Ok(shards)
}

/// Writes the dataset as delimited text. The first row is a self-describing
/// header (`task`, `n`, `input_dim`, `target_kind`, `target_dim`, `seed`),
/// the second names the columns, then one row per sample.
pub fn dump_dataset<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    let (kind, tdim) = match &ds.targets {
        Targets::Classes(_) => ("class", 1),
        Targets::Values(m) => ("value", m.cols()),
    };
    w.write_record([
        format!("task={}", ds.task.name()),
        format!("n={}", ds.len()),
        format!("input_dim={}", ds.inputs.cols()),
        format!("target_kind={kind}"),
        format!("target_dim={tdim}"),
        format!("seed={}", ds.seed),
    ])?;
    let mut names: Vec<String> = (0..ds.inputs.cols()).map(|j| format!("x{j}")).collect();
    names.extend((0..tdim).map(|j| format!("y{j}")));
    w.write_record(&names)?;
    for i in 0..ds.len() {
        let mut row: Vec<String> = ds.inputs.row(i).iter().map(|v| format!("{v:?}")).collect();
        match &ds.targets {
            Targets::Classes(c) => row.push(c[i].to_string()),
            Targets::Values(m) => row.extend(m.row(i).iter().map(|v| format!("{v:?}"))),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset<R: Read>(input: R) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| Error::Parse("empty dataset file".into()))??;
    let field = |key: &str| -> Result<String> {
        header
            .iter()
            .find_map(|f| f.strip_prefix(&format!("{key}=")).map(str::to_string))
            .ok_or_else(|| Error::Parse(format!("dataset header lacks `{key}`")))
    };
    let num = |key: &str| -> Result<u64> {
        field(key)?
            .parse::<u64>()
            .map_err(|e| Error::Parse(format!("dataset header `{key}`: {e}")))
    };
    let task = match field("task")?.as_str() {
        "regression_quadratic" => Task::RegressionQuadratic,
        "classification_blobs" => Task::ClassificationBlobs,
        other => return Err(Error::Parse(format!("unknown task `{other}`"))),
    };
    let n = num("n")? as usize;
    let input_dim = num("input_dim")? as usize;
    let target_dim = num("target_dim")? as usize;
    let seed = num("seed")?;
    let classes = match field("target_kind")?.as_str() {
        "class" => true,
        "value" => false,
        other => return Err(Error::Parse(format!("unknown target_kind `{other}`"))),
    };
    records
        .next()
        .ok_or_else(|| Error::Parse("dataset file lacks a column row".into()))??;
    let mut inputs = Vec::with_capacity(n * input_dim);
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != input_dim + target_dim {
            return Err(Error::Parse(format!(
                "data row {}: expected {} fields, got {}",
                line + 1,
                input_dim + target_dim,
                rec.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("data row {}: {e}", line + 1)))
        };
        for j in 0..input_dim {
            inputs.push(parse(&rec[j])?);
        }
        if classes {
            labels.push(
                rec[input_dim]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("data row {}: {e}", line + 1)))?,
            );
        } else {
            for j in 0..target_dim {
                values.push(parse(&rec[input_dim + j])?);
            }
        }
    }
    let rows = inputs.len() / input_dim.max(1);
    if rows != n {
        return Err(Error::Parse(format!("header says n={n}, found {rows} rows")));
    }
    let targets = if classes {
        Targets::Classes(labels)
    } else {
        Targets::Values(Matrix::new(n, target_dim, values)?)
    };
    Ok(Dataset {
        inputs: Matrix::new(n, input_dim, inputs)?,
        targets,
        task,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_partition(shards: &[Vec<usize>], n: usize) {
        let mut all: Vec<usize> = shards.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn blobs_deterministic_and_balanced() {
        let a = make_classification_blobs(101, 4, 3, 2.0, 5).unwrap();
        let b = make_classification_blobs(101, 4, 3, 2.0, 5).unwrap();
        assert_eq!(a, b);
        let labels = a.labels();
        let counts: Vec<usize> = (0..3).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }

    #[test]
    fn blobs_one_per_class() {
        let d = make_classification_blobs(4, 2, 4, 1.0, 0).unwrap();
        let mut l = d.labels();
        l.sort_unstable();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn blobs_reject_bad_sizes() {
        assert!(make_classification_blobs(1, 2, 2, 1.0, 0).is_err());
        assert!(make_classification_blobs(10, 2, 1, 1.0, 0).is_err());
    }

    #[test]
    fn iid_partition_law() {
        let shards = iid_partition(103, 10, 1).unwrap();
        assert_partition(&shards, 103);
        let sizes: Vec<usize> = shards.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(shards, iid_partition(103, 10, 1).unwrap());
        assert_ne!(shards, iid_partition(103, 10, 2).unwrap());
    }

    #[test]
    fn dirichlet_partition_law() {
        let labels: Vec<usize> = (0..500).map(|i| i % 5).collect();
        for alpha in [0.05, 1.0, 100.0] {
            let shards = dirichlet_partition(&labels, 7, alpha, 3).unwrap();
            assert_eq!(shards.len(), 7);
            assert_partition(&shards, 500);
        }
        assert_eq!(
            dirichlet_partition(&labels, 7, 1.0, 3).unwrap(),
            dirichlet_partition(&labels, 7, 1.0, 3).unwrap()
        );
    }

    #[test]
    fn dirichlet_rejects_bad_alpha() {
        assert!(dirichlet_partition(&[0, 1], 2, 0.0, 0).is_err());
        assert!(dirichlet_partition(&[0, 1], 2, -1.0, 0).is_err());
    }

    #[test]
    fn dataset_dump_load_round_trip() {
        for ds in [
            make_classification_blobs(17, 3, 2, 1.5, 9).unwrap(),
            make_regression_quadratic(11, 4, 2, 0.1, 9).unwrap(),
        ] {
            let mut buf = Vec::new();
            dump_dataset(&ds, &mut buf).unwrap();
            let back = load_dataset(buf.as_slice()).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn load_rejects_truncated_rows() {
        let text = "task=classification_blobs,n=1,input_dim=2,target_kind=class,target_dim=1,seed=0\nx0,x1,y0\n1.0,0\n";
        assert!(load_dataset(text.as_bytes()).is_err());
    }
}
