use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tabular::dataset::Dataset;
use crate::tabular::schema::NUM_CLASSES;

/// Train/validation/test fractions with a shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.6,
            val_frac: 0.2,
            test_frac: 0.2,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|&f| !(f > 0.0) || !f.is_finite()) {
            return Err(Error::Param(format!("split fractions must be positive, got {fr:?}")));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Param(format!("split fractions must sum to 1, got {fr:?}")));
        }
        Ok(())
    }
}

/// Row indices of each partition, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// `floor(frac · n)` with a guard against representation error (0.6·10 → 6).
fn floor_share(frac: f64, n: usize) -> usize {
    (frac * n as f64 + 1e-9).floor() as usize
}

fn allocate(mut idx: Vec<usize>, spec: &SplitSpec, out: &mut SplitIndices) {
    let n = idx.len();
    let n_train = floor_share(spec.train_frac, n);
    let n_val = floor_share(spec.val_frac, n);
    let rest = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    out.train.extend(idx);
    out.val.extend(val);
    out.test.extend(rest);
}

/// Per-class floor/floor/remainder allocation after a seeded shuffle (or one
/// global allocation when `stratified` is off).
pub fn split_indices(labels: &[usize], spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    if labels.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    if spec.stratified {
        for class in 0..NUM_CLASSES {
            let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
            if idx.is_empty() {
                continue;
            }
            if idx.len() < 3 {
                return Err(Error::Data(format!(
                    "class {class} has {} rows; stratified split needs at least 3",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng_for(spec.seed, "split", class as u64));
            allocate(idx, spec, &mut out);
        }
    } else {
        let mut idx: Vec<usize> = (0..labels.len()).collect();
        idx.shuffle(&mut rng_for(spec.seed, "split", u64::MAX));
        allocate(idx, spec, &mut out);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn stratified_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset, Dataset)> {
    let s = split_indices(&ds.labels(), spec)?;
    Ok((ds.select(&s.train), ds.select(&s.val), ds.select(&s.test)))
}
