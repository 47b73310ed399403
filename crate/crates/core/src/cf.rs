//! SOM-based collaborative filtering over a 2-D rating space.
//!
//! Rows are clustered with a Kohonen layer. A row's unrated items are scored
//! by the similarity-weighted mean rating of the other rows on the same
//! neuron; items no peer rated fall back to the neuron's prototype weight.
//! The baseline and the context-aware pipeline both go through this module.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::som::{SomConfig, SomNetwork};
use crate::space::{sparse_cosine, RatingMatrix};

/// A SOM over the rows of a matrix plus each row's neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct UserClusterModel {
    pub som: SomNetwork,
    pub membership: Vec<usize>,
}

impl UserClusterModel {
    pub fn fit(matrix: &RatingMatrix, config: &SomConfig) -> Result<Self> {
        if matrix.row_count() == 0 {
            return Err(Error::EmptySpace);
        }
        let vectors = matrix.dense_rows();
        let som = SomNetwork::train(&vectors, config)?;
        let membership = som.assign(&vectors);
        Ok(UserClusterModel { som, membership })
    }

    /// Rebuilds memberships from a persisted network.
    pub fn from_som(matrix: &RatingMatrix, som: SomNetwork) -> Result<Self> {
        if som.dim() != matrix.item_count() {
            return Err(Error::LengthMismatch {
                left: som.dim(),
                right: matrix.item_count(),
            });
        }
        let membership = som.assign(&matrix.dense_rows());
        Ok(UserClusterModel { som, membership })
    }

    pub fn neuron_of(&self, row: usize) -> usize {
        self.membership[row]
    }

    /// Rows per occupied neuron, in ascending row order.
    pub fn clusters(&self) -> BTreeMap<usize, Vec<usize>> {
        let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (row, &n) in self.membership.iter().enumerate() {
            out.entry(n).or_default().push(row);
        }
        out
    }

    /// Scores for every item `row` has not rated.
    pub fn predict_scores(&self, matrix: &RatingMatrix, row: usize) -> Result<BTreeMap<usize, f64>> {
        if row >= matrix.row_count() || row >= self.membership.len() {
            return Err(Error::UnknownUser(format!("row {row}")));
        }
        let own = matrix.row(row);
        let neuron = self.membership[row];
        let peers: Vec<(usize, f64)> = self
            .membership
            .iter()
            .enumerate()
            .filter(|&(r, &n)| r != row && n == neuron)
            .map(|(r, _)| (r, sparse_cosine(own, matrix.row(r))))
            .collect();

        let mut num = vec![0.0; matrix.item_count()];
        let mut den = vec![0.0; matrix.item_count()];
        for &(r, sim) in &peers {
            for (&s, &v) in matrix.row(r) {
                num[s] += sim * v;
                den[s] += sim;
            }
        }
        let prototype = &self.som.weights[neuron];
        Ok((0..matrix.item_count())
            .filter(|s| !own.contains_key(s))
            .map(|s| {
                let score = if den[s] > 0.0 { num[s] / den[s] } else { prototype[s] };
                (s, score)
            })
            .collect())
    }

    /// Top-`n` unrated items by score, ties broken by ascending item index.
    pub fn recommend(&self, matrix: &RatingMatrix, row: usize, n: usize) -> Result<Vec<(usize, f64)>> {
        Ok(rank(self.predict_scores(matrix, row)?, n))
    }
}

/// Sorts by descending score then ascending item index and truncates.
pub fn rank(scores: BTreeMap<usize, f64>, n: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().collect();
    ranked.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    ranked.truncate(n);
    ranked
}
