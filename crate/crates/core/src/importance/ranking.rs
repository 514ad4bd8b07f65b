use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Schema;

/// Normalized per-field scores with the induced ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRanking {
    fields: Vec<String>,
    scores: Vec<f64>,
    order: Vec<usize>,
}

impl ImportanceRanking {
    /// Normalizes raw nonnegative per-field totals. An all-zero total (no split
    /// ever helped) yields uniform scores.
    pub fn from_raw(schema: &Schema, raw: &[f64]) -> Result<Self> {
        if raw.len() != schema.num_fields() {
            return Err(Error::Param("one raw importance per field required".into()));
        }
        if raw.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Numerical(format!("invalid raw importances {raw:?}")));
        }
        let total: f64 = raw.iter().sum();
        let n = raw.len() as f64;
        let scores: Vec<f64> = if total > 0.0 {
            raw.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / n; raw.len()]
        };
        let mut order: Vec<usize> = (0..scores.len()).collect();
        // stable sort keeps schema order among equal scores
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        Ok(Self {
            fields: schema.field_names().iter().map(|s| s.to_string()).collect(),
            scores,
            order,
        })
    }

    pub fn fields(&self) -> &[String] {
        &self.fields
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Field indices by descending score.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based rank of each field.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.order.len()];
        for (pos, &f) in self.order.iter().enumerate() {
            r[f] = pos + 1;
        }
        r
    }
}

/// Fields in the top `k` of both rankings, by ascending mean rank then schema order.
pub fn select_common_topk(a: &ImportanceRanking, b: &ImportanceRanking, k: usize) -> Result<Vec<usize>> {
    if a.fields != b.fields {
        return Err(Error::SchemaMismatch("rankings cover different fields".into()));
    }
    if k == 0 || k > a.fields.len() {
        return Err(Error::Param(format!("k = {k} must be in 1..={}", a.fields.len())));
    }
    let (ra, rb) = (a.ranks(), b.ranks());
    let mut out: Vec<usize> = (0..a.fields.len()).filter(|&f| ra[f] <= k && rb[f] <= k).collect();
    out.sort_by_key(|&f| (ra[f] + rb[f], f));
    Ok(out)
}

/// One row of the exported ranking table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub field: String,
    /// Mean of the two normalized scores.
    pub score: f64,
    pub score_forest: f64,
    pub score_gbdt: f64,
    pub rank_forest: usize,
    pub rank_gbdt: usize,
    pub selected: bool,
}

/// Rows in schema order.
pub fn ranking_rows(forest: &ImportanceRanking, gbdt: &ImportanceRanking, selected: &[usize]) -> Vec<RankingRow> {
    let (rf, rg) = (forest.ranks(), gbdt.ranks());
    forest
        .fields
        .iter()
        .enumerate()
        .map(|(i, name)| RankingRow {
            field: name.clone(),
            score: 0.5 * (forest.scores[i] + gbdt.scores[i]),
            score_forest: forest.scores[i],
            score_gbdt: gbdt.scores[i],
            rank_forest: rf[i],
            rank_gbdt: rg[i],
            selected: selected.contains(&i),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Field;

    fn schema(n: usize) -> Schema {
        Schema::with_fields((0..n).map(|i| Field::new(format!("f{}", i + 1), &["a", "b"])).collect()).unwrap()
    }

    fn ranking(s: &Schema, order: &[usize]) -> ImportanceRanking {
        // raw scores descending along `order`
        let mut raw = vec![0.0; order.len()];
        for (pos, &f) in order.iter().enumerate() {
            raw[f] = (order.len() - pos) as f64;
        }
        ImportanceRanking::from_raw(s, &raw).unwrap()
    }

    #[test]
    fn identical_rankings_top3() {
        let s = schema(5);
        let a = ranking(&s, &[3, 1, 4, 0, 2]);
        assert_eq!(select_common_topk(&a, &a, 3).unwrap(), vec![3, 1, 4]);
    }

    #[test]
    fn reversed_rankings_disjoint() {
        let s = schema(4);
        let a = ranking(&s, &[0, 1, 2, 3]);
        let b = ranking(&s, &[3, 2, 1, 0]);
        assert!(select_common_topk(&a, &b, 2).unwrap().is_empty());
    }

    #[test]
    fn eighteen_fields_ten_common() {
        // b swaps two blocks so that exactly 10 fields sit in both top-12s
        let s = schema(18);
        let a = ranking(&s, &(0..18).collect::<Vec<_>>());
        let mut ob: Vec<usize> = (0..10).collect();
        ob.extend([12, 13, 10, 11, 14, 15, 16, 17]);
        let b = ranking(&s, &ob);
        let sel = select_common_topk(&a, &b, 12).unwrap();
        assert_eq!(sel, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn zero_scores_become_uniform_and_ties_keep_schema_order() {
        let s = schema(4);
        let r = ImportanceRanking::from_raw(&s, &[0.0; 4]).unwrap();
        assert_eq!(r.scores(), &[0.25; 4]);
        assert_eq!(r.order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn mismatched_fields_rejected() {
        let a = ranking(&schema(3), &[0, 1, 2]);
        let b = ranking(&schema(4), &[0, 1, 2, 3]);
        assert!(select_common_topk(&a, &b, 2).is_err());
    }
}
