use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tabular::schema::{Schema, LABEL_COLUMN, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Row {
    /// One level index per schema field.
    pub values: Vec<usize>,
    pub label: usize,
}

/// Categorical rows validated against a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Row>,
}

impl Dataset {
    pub fn new(schema: Schema, rows: Vec<Row>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.values.len() != schema.num_fields() {
                return Err(Error::Data(format!(
                    "row {i} has {} values for {} fields",
                    r.values.len(),
                    schema.num_fields()
                )));
            }
            for (f, &v) in r.values.iter().enumerate() {
                if v >= schema.field(f).levels.len() {
                    return Err(Error::Data(format!(
                        "row {i}: level index {v} out of range for {}",
                        schema.field(f).name
                    )));
                }
            }
            if r.label >= NUM_CLASSES {
                return Err(Error::Data(format!("row {i}: label index {}", r.label)));
            }
        }
        Ok(Self { schema, rows })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        class_counts(self.rows.iter().map(|r| r.label))
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Keeps only the fields of `sub`, which must be a projection of this schema.
    pub fn project(&self, sub: &Schema) -> Result<Dataset> {
        let map = sub
            .fields()
            .iter()
            .map(|f| {
                let i = self
                    .schema
                    .field_index(&f.name)
                    .ok_or_else(|| Error::SchemaMismatch(format!("field {} not in dataset", f.name)))?;
                if self.schema.field(i).levels != f.levels {
                    return Err(Error::SchemaMismatch(format!("levels of {} differ", f.name)));
                }
                Ok(i)
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| Row {
                values: map.iter().map(|&i| r.values[i]).collect(),
                label: r.label,
            })
            .collect();
        Ok(Dataset {
            schema: sub.clone(),
            rows,
        })
    }
}

pub fn class_counts(labels: impl IntoIterator<Item = usize>) -> [usize; NUM_CLASSES] {
    let mut c = [0; NUM_CLASSES];
    for l in labels {
        c[l] += 1;
    }
    c
}

/// Reads a categorical CSV. Header must name exactly the schema fields plus the
/// `Severity` column (any order). Unlisted levels map to `Other` when the field has it.
pub fn read_dataset_csv<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let mut col_of: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if col_of.insert(h.as_str(), i).is_some() {
            return Err(Error::Data(format!("duplicate header column {h}")));
        }
    }
    let label_col = *col_of
        .get(LABEL_COLUMN)
        .ok_or_else(|| Error::Data(format!("header lacks {LABEL_COLUMN} column")))?;
    let mut field_cols = Vec::with_capacity(schema.num_fields());
    for f in schema.fields() {
        let c = col_of
            .get(f.name.as_str())
            .ok_or_else(|| Error::SchemaMismatch(format!("header lacks field {}", f.name)))?;
        field_cols.push(*c);
    }
    if header.len() != schema.num_fields() + 1 {
        let unknown: Vec<&str> = header
            .iter()
            .map(String::as_str)
            .filter(|h| *h != LABEL_COLUMN && schema.field_index(h).is_none())
            .collect();
        return Err(Error::SchemaMismatch(format!("header has unknown columns {unknown:?}")));
    }

    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let mut values = Vec::with_capacity(field_cols.len());
        for (f, &c) in schema.fields().iter().zip(&field_cols) {
            let text = cell(c);
            let idx = f.level_index(text).or_else(|| f.fallback_index()).ok_or_else(|| {
                Error::Data(format!(
                    "row {}: unknown level {text:?} for {} and no Other level",
                    line + 1,
                    f.name
                ))
            })?;
            values.push(idx);
        }
        let lt = cell(label_col);
        let label = schema
            .label_index(lt)
            .ok_or_else(|| Error::Data(format!("row {}: unknown severity {lt:?}", line + 1)))?;
        rows.push(Row { values, label });
    }
    if rows.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    Dataset::new(schema.clone(), rows)
}

pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset_csv(std::io::BufReader::new(file), schema)
}

pub fn write_dataset_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.schema().field_names();
    header.push(LABEL_COLUMN);
    w.write_record(&header)?;
    for r in ds.rows() {
        let mut rec: Vec<&str> = r
            .values
            .iter()
            .enumerate()
            .map(|(f, &v)| ds.schema().field(f).levels[v].as_str())
            .collect();
        rec.push(ds.schema().label_levels()[r.label].as_str());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset_csv(ds, std::io::BufWriter::new(file))
}

/// Header row of a CSV file, trimmed.
pub fn read_csv_header(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    Ok(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
}
