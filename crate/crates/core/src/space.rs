//! Two-dimensional (row x item) rating matrices.
//!
//! Rows are users of the 2-D recommendation space: plain users for the
//! flattened baseline, virtual users for the context-aware pipeline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cube::PatternVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatingMatrix {
    items: Vec<String>,
    rows: Vec<BTreeMap<usize, f64>>,
}

impl RatingMatrix {
    pub fn new(items: Vec<String>) -> Self {
        RatingMatrix {
            items,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: BTreeMap<usize, f64>) -> usize {
        debug_assert!(row.keys().all(|&s| s < self.items.len()));
        self.rows.push(row);
        self.rows.len() - 1
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, r: usize) -> &BTreeMap<usize, f64> {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[BTreeMap<usize, f64>] {
        &self.rows
    }

    pub fn get(&self, r: usize, item: usize) -> Option<f64> {
        self.rows.get(r).and_then(|row| row.get(&item).copied())
    }

    pub fn cell_count(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    /// Dense length-p vector of row `r`, 0 where unrated.
    pub fn user_vector(&self, r: usize, owner: impl Into<String>) -> Result<PatternVector> {
        let row = self.rows.get(r).ok_or_else(|| Error::UnknownUser(format!("row {r}")))?;
        let mut components = vec![0.0; self.items.len()];
        for (&s, &v) in row {
            components[s] = v;
        }
        Ok(PatternVector {
            owner: owner.into(),
            components,
        })
    }

    /// Inverse of [`RatingMatrix::user_vector`]: nonzero components become ratings.
    pub fn row_from_vector(vector: &PatternVector) -> BTreeMap<usize, f64> {
        vector
            .components
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(s, &v)| (s, v))
            .collect()
    }

    pub(crate) fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut v = vec![0.0; self.items.len()];
                for (&s, &x) in row {
                    v[s] = x;
                }
                v
            })
            .collect()
    }
}

/// Cosine similarity between two sparse rows.
pub(crate) fn sparse_cosine(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small
        .iter()
        .filter_map(|(s, x)| large.get(s).map(|y| x * y))
        .sum();
    let na: f64 = a.values().map(|x| x * x).sum();
    let nb: f64 = b.values().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).min(1.0)
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    items: Vec<String>,
    rows: Vec<BTreeMap<String, f64>>,
}

impl Serialize for RatingMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|(&s, &v)| (self.items[s].clone(), v)).collect())
            .collect();
        MatrixFile {
            items: self.items.clone(),
            rows,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RatingMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let file = MatrixFile::deserialize(deserializer)?;
        let index: BTreeMap<&str, usize> = file
            .items
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let rows = file
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(id, &v)| {
                        index
                            .get(id.as_str())
                            .map(|&s| (s, v))
                            .ok_or_else(|| D::Error::custom(format!("unknown item {id:?}")))
                    })
                    .collect()
            })
            .collect::<std::result::Result<_, _>>()?;
        Ok(RatingMatrix {
            items: file.items,
            rows,
        })
    }
}
