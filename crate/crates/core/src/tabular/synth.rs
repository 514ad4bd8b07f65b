//! Class-conditional synthetic generator. Fields are drawn independently given
//! the class from per-class level distributions.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tabular::dataset::{Dataset, Row};
use crate::tabular::schema::{Field, Schema, NUM_CLASSES};

pub const PROFILE_VERSION: u32 = 1;

/// Attribute counts by severity for young-motorcyclist crashes (10 fields × 5 levels).
pub const MOTORCYCLIST_PROFILE_JSON: &str = include_str!("../../fixtures/motorcyclist_profile.json");

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorProfile {
    schema: Schema,
    /// `[class][field][level]`, each innermost vector summing to 1.
    marginals: Vec<Vec<Vec<f64>>>,
    class_counts: [usize; NUM_CLASSES],
}

#[derive(Serialize, Deserialize)]
struct ProfileField {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    levels: Vec<String>,
    /// Nonnegative weights per label (counts or probabilities); normalized on load.
    weights: BTreeMap<String, Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ProfileFile {
    profile_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
    label_levels: Vec<String>,
    class_counts: Vec<usize>,
    fields: Vec<ProfileField>,
}

impl GeneratorProfile {
    pub fn new(schema: Schema, marginals: Vec<Vec<Vec<f64>>>, class_counts: [usize; NUM_CLASSES]) -> Result<Self> {
        if marginals.len() != NUM_CLASSES {
            return Err(Error::Param("need one marginal set per class".into()));
        }
        for (c, per_field) in marginals.iter().enumerate() {
            if per_field.len() != schema.num_fields() {
                return Err(Error::Param(format!("class {c}: wrong number of fields")));
            }
            for (f, p) in per_field.iter().enumerate() {
                let field = schema.field(f);
                if p.len() != field.levels.len() {
                    return Err(Error::Param(format!("class {c}, field {}: wrong level count", field.name)));
                }
                if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(Error::Param(format!("class {c}, field {}: negative probability", field.name)));
                }
                let s: f64 = p.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::Param(format!(
                        "class {c}, field {}: probabilities sum to {s}",
                        field.name
                    )));
                }
            }
        }
        Ok(Self {
            schema,
            marginals,
            class_counts,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        self.class_counts
    }

    pub fn marginal(&self, class: usize, field: usize) -> &[f64] {
        &self.marginals[class][field]
    }

    pub fn with_class_counts(mut self, counts: [usize; NUM_CLASSES]) -> Self {
        self.class_counts = counts;
        self
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ProfileFile = serde_json::from_str(s)?;
        if file.profile_version != PROFILE_VERSION {
            return Err(Error::Config(format!(
                "unsupported profile_version {}",
                file.profile_version
            )));
        }
        let fields: Vec<Field> = file
            .fields
            .iter()
            .map(|f| Field {
                name: f.name.clone(),
                levels: f.levels.clone(),
            })
            .collect();
        let schema = Schema::new(fields, file.label_levels.clone())?;
        if file.class_counts.len() != NUM_CLASSES {
            return Err(Error::Config("class_counts must have 3 entries".into()));
        }
        let mut marginals = vec![Vec::with_capacity(schema.num_fields()); NUM_CLASSES];
        for f in &file.fields {
            for (c, label) in file.label_levels.iter().enumerate() {
                let w = f
                    .weights
                    .get(label)
                    .ok_or_else(|| Error::Config(format!("field {} lacks weights for {label}", f.name)))?;
                if w.len() != f.levels.len() {
                    return Err(Error::Config(format!("field {}: {label} weights/levels length differ", f.name)));
                }
                let total: f64 = w.iter().sum();
                if !(total > 0.0) || w.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::Config(format!("field {}: bad {label} weights", f.name)));
                }
                marginals[c].push(w.iter().map(|&v| v / total).collect());
            }
        }
        let counts = [file.class_counts[0], file.class_counts[1], file.class_counts[2]];
        Self::new(schema, marginals, counts)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

    /// The bundled young-motorcyclist fixture.
    pub fn motorcyclist() -> Self {
        Self::from_json_str(MOTORCYCLIST_PROFILE_JSON).expect("bundled profile is valid")
    }
}

fn sample_level<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum; take the last
    // level with positive mass.
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1)
}

/// Exactly `class_counts[c]` rows per class, fields sampled independently,
/// rows shuffled. Deterministic per seed.
pub fn synth_generate(profile: &GeneratorProfile, seed: u64) -> Dataset {
    let mut rows = Vec::with_capacity(profile.class_counts.iter().sum());
    for (c, &count) in profile.class_counts.iter().enumerate() {
        let mut rng = rng_for(seed, "synth", c as u64);
        for _ in 0..count {
            let values = profile.marginals[c].iter().map(|p| sample_level(p, &mut rng)).collect();
            rows.push(Row { values, label: c });
        }
    }
    rows.shuffle(&mut rng_for(seed, "synth-order", 0));
    Dataset::new(profile.schema.clone(), rows).expect("sampled levels are in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn motorcyclist_fixture_shape() {
        let p = GeneratorProfile::motorcyclist();
        assert_eq!(p.class_counts(), [2858, 6246, 1622]);
        assert_eq!(p.schema().num_fields(), 10);
        assert_eq!(p.schema().total_levels(), 50);
        let road = p.schema().field_index("RoadAlgn").unwrap();
        let straight = p.schema().field(road).level_index("Straight, level").unwrap();
        assert!((p.marginal(0, road)[straight] - 1931.0 / 2858.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_profile_gives_identical_rows() {
        let schema = Schema::with_fields(vec![Field::new("A", &["x", "y"]), Field::new("B", &["p", "q", "r"])]).unwrap();
        let marg = vec![vec![vec![1.0, 0.0], vec![1.0, 0.0, 0.0]]; 3];
        let p = GeneratorProfile::new(schema, marg, [4, 4, 4]).unwrap();
        let ds = synth_generate(&p, 3);
        assert!(ds.rows().iter().all(|r| r.values == vec![0, 0]));
        assert_eq!(ds.class_counts(), [4, 4, 4]);
    }

    #[test]
    fn count_contract() {
        let p = GeneratorProfile::motorcyclist().with_class_counts([0, 1, 0]);
        let ds = synth_generate(&p, 0);
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.rows()[0].label, 1);
    }

    #[test]
    fn invalid_marginals_rejected() {
        let schema = Schema::with_fields(vec![Field::new("A", &["x", "y"])]).unwrap();
        assert!(GeneratorProfile::new(schema.clone(), vec![vec![vec![0.5, 0.6]]; 3], [1, 1, 1]).is_err());
        assert!(GeneratorProfile::new(schema, vec![vec![vec![1.5, -0.5]]; 3], [1, 1, 1]).is_err());
    }
}
