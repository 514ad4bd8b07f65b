use std::io::{Read, Write};
use std::ops::Range;

use crate::error::{Error, Result};
use crate::tabular::dataset::{class_counts, Dataset, Row};
use crate::tabular::schema::{Schema, LABEL_COLUMN, NUM_CLASSES};

/// Dense one-hot design matrix (row-major) with its field → column map.
///
/// Values are exactly 0/1 straight out of [`encode_onehot`]; SMOTE output may
/// hold fractional mixtures when snapping is off.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    schema: Schema,
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    column_map: Vec<Range<usize>>,
    labels: Vec<usize>,
}

pub fn column_map(schema: &Schema) -> Vec<Range<usize>> {
    let mut start = 0;
    schema
        .fields()
        .iter()
        .map(|f| {
            let r = start..start + f.levels.len();
            start = r.end;
            r
        })
        .collect()
}

pub fn encode_onehot(ds: &Dataset) -> Result<EncodedMatrix> {
    if ds.is_empty() {
        return Err(Error::Data("cannot encode an empty dataset".into()));
    }
    let map = column_map(ds.schema());
    let n_cols = ds.schema().total_levels();
    let mut data = vec![0.0; ds.len() * n_cols];
    for (i, r) in ds.rows().iter().enumerate() {
        for (range, &v) in map.iter().zip(&r.values) {
            data[i * n_cols + range.start + v] = 1.0;
        }
    }
    Ok(EncodedMatrix {
        schema: ds.schema().clone(),
        data,
        n_rows: ds.len(),
        n_cols,
        column_map: map,
        labels: ds.labels(),
    })
}

impl EncodedMatrix {
    pub fn from_parts(schema: Schema, data: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        let n_cols = schema.total_levels();
        if labels.is_empty() || data.len() != labels.len() * n_cols {
            return Err(Error::Data(format!(
                "{} values for {} rows × {n_cols} columns",
                data.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l >= NUM_CLASSES) {
            return Err(Error::Data("label index out of range".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite encoded value".into()));
        }
        Ok(Self {
            column_map: column_map(&schema),
            schema,
            n_rows: labels.len(),
            n_cols,
            data,
            labels,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column_map(&self) -> &[Range<usize>] {
        &self.column_map
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        class_counts(self.labels.iter().copied())
    }

    /// Column index → owning field index.
    pub fn column_fields(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_cols];
        for (f, r) in self.column_map.iter().enumerate() {
            for c in r.clone() {
                out[c] = f;
            }
        }
        out
    }

    pub fn select_rows(&self, indices: &[usize]) -> EncodedMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        EncodedMatrix {
            schema: self.schema.clone(),
            data,
            n_rows: indices.len(),
            n_cols: self.n_cols,
            column_map: self.column_map.clone(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// True when every field block holds exactly one 1 and zeros elsewhere.
    pub fn is_onehot(&self) -> bool {
        (0..self.n_rows).all(|i| {
            let row = self.row(i);
            self.column_map.iter().all(|r| {
                let block = &row[r.clone()];
                block.iter().all(|&v| v == 0.0 || v == 1.0) && block.iter().filter(|&&v| v == 1.0).count() == 1
            })
        })
    }

    /// Per-field argmax (ties to the lowest level index).
    pub fn decode(&self) -> Dataset {
        let rows = (0..self.n_rows)
            .map(|i| {
                let row = self.row(i);
                let values = self
                    .column_map
                    .iter()
                    .map(|r| {
                        let block = &row[r.clone()];
                        let mut best = 0;
                        for (j, &v) in block.iter().enumerate() {
                            if v > block[best] {
                                best = j;
                            }
                        }
                        best
                    })
                    .collect();
                Row {
                    values,
                    label: self.labels[i],
                }
            })
            .collect();
        Dataset::new(self.schema.clone(), rows).expect("decoded indices are in range")
    }

    /// Level distribution of `field` over rows of `class` (all rows when `None`):
    /// the mean of the field's column block.
    pub fn level_distribution(&self, field: usize, class: Option<usize>) -> Vec<f64> {
        let r = self.column_map[field].clone();
        let mut acc = vec![0.0; r.len()];
        let mut n = 0usize;
        for i in 0..self.n_rows {
            if class.is_some_and(|c| self.labels[i] != c) {
                continue;
            }
            n += 1;
            for (a, &v) in acc.iter_mut().zip(&self.row(i)[r.clone()]) {
                *a += v;
            }
        }
        if n > 0 {
            for a in &mut acc {
                *a /= n as f64;
            }
        }
        acc
    }
}

/// Header for encoded CSVs: `Field=Level` per column, then `Severity`.
fn encoded_header(schema: &Schema) -> Vec<String> {
    let mut h: Vec<String> = schema
        .fields()
        .iter()
        .flat_map(|f| f.levels.iter().map(move |l| format!("{}={}", f.name, l)))
        .collect();
    h.push(LABEL_COLUMN.to_string());
    h
}

/// Writes a (possibly fractional) encoded matrix as numeric CSV.
pub fn write_encoded_csv<W: Write>(m: &EncodedMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(encoded_header(m.schema()))?;
    for i in 0..m.n_rows() {
        let mut rec: Vec<String> = m.row(i).iter().map(|v| format!("{v:?}")).collect();
        rec.push(m.schema().label_levels()[m.labels()[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_encoded_csv<R: Read>(reader: R, schema: &Schema) -> Result<EncodedMatrix> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != encoded_header(schema) {
        return Err(Error::SchemaMismatch("encoded CSV header does not match schema".into()));
    }
    let n_cols = schema.total_levels();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for c in 0..n_cols {
            let v: f64 = rec
                .get(c)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|_| Error::Data(format!("row {}: column {c} is not numeric", line + 1)))?;
            data.push(v);
        }
        let l = rec.get(n_cols).unwrap_or("").trim();
        labels.push(
            schema
                .label_index(l)
                .ok_or_else(|| Error::Data(format!("row {}: unknown severity {l:?}", line + 1)))?,
        );
    }
    if labels.is_empty() {
        return Err(Error::Data("CSV has no data rows".into()));
    }
    EncodedMatrix::from_parts(schema.clone(), data, labels)
}

/// True when a header looks like the encoded (`Field=Level`) layout.
pub fn is_encoded_header(header: &[String]) -> bool {
    header.len() > 1 && header[..header.len() - 1].iter().all(|h| h.contains('='))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::schema::Field;

    #[test]
    fn two_by_two_onehot() {
        let schema = Schema::with_fields(vec![Field::new("A", &["a0", "a1"]), Field::new("B", &["b0", "b1"])]).unwrap();
        let ds = Dataset::new(schema, vec![Row { values: vec![0, 1], label: 2 }]).unwrap();
        let m = encode_onehot(&ds).unwrap();
        assert_eq!(m.row(0), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(m.labels(), &[2]);
        assert_eq!(m.column_map(), &[0..2, 2..4]);
        assert!(m.is_onehot());
        assert_eq!(m.decode(), ds);
    }

    #[test]
    fn empty_dataset_rejected() {
        let schema = Schema::with_fields(vec![Field::new("A", &["a0", "a1"])]).unwrap();
        let ds = Dataset::new(schema, vec![]).unwrap();
        assert!(encode_onehot(&ds).is_err());
    }

    #[test]
    fn encoded_csv_roundtrip_keeps_fractions() {
        let schema = Schema::with_fields(vec![Field::new("A", &["a0", "a1"])]).unwrap();
        let m = EncodedMatrix::from_parts(schema.clone(), vec![0.25, 0.75, 1.0, 0.0], vec![0, 1]).unwrap();
        let mut buf = Vec::new();
        write_encoded_csv(&m, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("A=a0,A=a1,Severity"));
        assert_eq!(read_encoded_csv(buf.as_slice(), &schema).unwrap(), m);
    }
}
