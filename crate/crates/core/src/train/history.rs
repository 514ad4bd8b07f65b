use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainHistory {
    pub rows: Vec<EpochRecord>,
}

const HEADER: [&str; 6] = ["epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr"];

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Row with the lowest val loss (earliest on ties).
    pub fn best(&self) -> Option<&EpochRecord> {
        self.rows.iter().fold(None, |best: Option<&EpochRecord>, r| match best {
            Some(b) if b.val_loss <= r.val_loss => Some(b),
            _ => Some(r),
        })
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.epoch.to_string(),
                r.train_loss.to_string(),
                r.train_acc.to_string(),
                r.val_loss.to_string(),
                r.val_acc.to_string(),
                r.lr.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        if rdr.headers()?.iter().ne(HEADER) {
            return Err(Error::Data("history CSV header mismatch".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .unwrap_or("")
                    .parse()
                    .map_err(|_| Error::Data(format!("bad history value {:?}", rec.get(i))))
            };
            rows.push(EpochRecord {
                epoch: num(0)? as usize,
                train_loss: num(1)?,
                train_acc: num(2)?,
                val_loss: num(3)?,
                val_acc: num(4)?,
                lr: num(5)?,
            });
        }
        Ok(Self { rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_history_is_header_only() {
        assert_eq!(TrainHistory::default().to_csv_string(), "epoch,train_loss,train_acc,val_loss,val_acc,lr\n");
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let h = TrainHistory {
            rows: vec![EpochRecord { epoch: 1, train_loss: 0.1 + 0.2, train_acc: 1.0 / 3.0, val_loss: 1e-300, val_acc: 0.5, lr: 1e-3 }],
        };
        assert_eq!(TrainHistory::read_csv(h.to_csv_string().as_bytes()).unwrap(), h);
    }

    #[test]
    fn best_prefers_earliest_minimum() {
        let r = |epoch, val_loss| EpochRecord { epoch, train_loss: 0.0, train_acc: 0.0, val_loss, val_acc: 0.0, lr: 0.0 };
        let h = TrainHistory { rows: vec![r(1, 2.0), r(2, 1.0), r(3, 1.0)] };
        assert_eq!(h.best().unwrap().epoch, 2);
    }
}
