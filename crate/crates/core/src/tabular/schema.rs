use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Severity labels in report order.
pub const LABEL_LEVELS: [&str; 3] = ["KA", "BC", "O"];
pub const NUM_CLASSES: usize = 3;
/// Name of the label column in CSV files.
pub const LABEL_COLUMN: &str = "Severity";
/// Level that absorbs unlisted CSV values.
pub const FALLBACK_LEVEL: &str = "Other";

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub levels: Vec<String>,
}

impl Field {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Self {
        Self {
            name: name.into(),
            levels: levels.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn level_index(&self, level: &str) -> Option<usize> {
        self.levels.iter().position(|l| l == level)
    }

    pub fn fallback_index(&self) -> Option<usize> {
        self.level_index(FALLBACK_LEVEL)
    }
}

/// Ordered categorical fields plus the three severity labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    fields: Vec<Field>,
    label_levels: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SchemaFile {
    schema_version: u32,
    fields: Vec<Field>,
    label_levels: Vec<String>,
}

impl<'de> Deserialize<'de> for Schema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            fields: Vec<Field>,
            label_levels: Vec<String>,
        }
        let raw = Raw::deserialize(d)?;
        Schema::new(raw.fields, raw.label_levels).map_err(serde::de::Error::custom)
    }
}

impl Schema {
    pub fn new(fields: Vec<Field>, label_levels: Vec<String>) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::Schema("schema has no fields".into()));
        }
        let mut names = HashSet::new();
        for f in &fields {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!("duplicate field {}", f.name)));
            }
            if f.name == LABEL_COLUMN {
                return Err(Error::Schema(format!("field name {LABEL_COLUMN} is reserved")));
            }
            if f.levels.len() < 2 {
                return Err(Error::Schema(format!("field {} needs at least 2 levels", f.name)));
            }
            let mut seen = HashSet::new();
            for l in &f.levels {
                if !seen.insert(l.as_str()) {
                    return Err(Error::Schema(format!("field {} repeats level {l:?}", f.name)));
                }
            }
        }
        if label_levels != LABEL_LEVELS {
            return Err(Error::Schema(format!(
                "label levels must be {LABEL_LEVELS:?}, got {label_levels:?}"
            )));
        }
        Ok(Self {
            fields,
            label_levels,
        })
    }

    pub fn with_fields(fields: Vec<Field>) -> Result<Self> {
        Self::new(fields, LABEL_LEVELS.iter().map(|s| s.to_string()).collect())
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, i: usize) -> &Field {
        &self.fields[i]
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn label_levels(&self) -> &[String] {
        &self.label_levels
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn field_names(&self) -> Vec<&str> {
        self.fields.iter().map(|f| f.name.as_str()).collect()
    }

    /// Sum of level counts, i.e. the one-hot width.
    pub fn total_levels(&self) -> usize {
        self.fields.iter().map(|f| f.levels.len()).sum()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.label_levels.iter().position(|l| l == label)
    }

    /// Sub-schema with the named fields, in the order given.
    pub fn project(&self, names: &[&str]) -> Result<Schema> {
        let fields = names
            .iter()
            .map(|n| {
                self.field_index(n)
                    .map(|i| self.fields[i].clone())
                    .ok_or_else(|| Error::Schema(format!("unknown field {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(fields, self.label_levels.clone())
    }

    /// Content hash over names, levels and label levels (hex, 16 bytes).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for f in &self.fields {
            h.update((f.name.len() as u64).to_le_bytes());
            h.update(f.name.as_bytes());
            h.update((f.levels.len() as u64).to_le_bytes());
            for l in &f.levels {
                h.update((l.len() as u64).to_le_bytes());
                h.update(l.as_bytes());
            }
        }
        for l in &self.label_levels {
            h.update(l.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..16])
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = SchemaFile {
            schema_version: SCHEMA_VERSION,
            fields: self.fields.clone(),
            label_levels: self.label_levels.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)? + "\n")
    }

    pub fn from_json_str(s: &str) -> Result<Schema> {
        let file: SchemaFile = serde_json::from_str(s)?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported schema_version {}",
                file.schema_version
            )));
        }
        Schema::new(file.fields, file.label_levels)
    }

    pub fn load(path: &Path) -> Result<Schema> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&s)
    }

}
