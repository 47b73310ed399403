//! The three-phase context-aware recommender.
//!
//! 1. Each user's context situations are clustered by usage pattern with a
//!    per-user SOM; occupied neurons become labels `1..=m`.
//! 2. Every (user, label) pair becomes a virtual user whose rating of an item
//!    is the mean of the user's ratings of that item over the situations
//!    carrying the label.
//! 3. Virtual users are clustered with a second SOM and recommendations come
//!    from [`crate::cf`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cf::{rank, UserClusterModel};
use crate::cube::RatingCube;
use crate::error::{Error, Result};
use crate::json::{read_json, write_json};
use crate::rng::derive_seed;
use crate::schema::{ContextSchema, ContextSituation};
use crate::som::{SomConfig, SomNetwork};
use crate::space::RatingMatrix;

pub const DEFAULT_PHASE1_NEURONS: usize = 6;
pub const DEFAULT_PHASE3_NEURONS: usize = 21;

/// Arithmetic mean, the aggregation used to collapse repeated ratings.
pub fn aggregate(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyList);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// A user's situations grouped by usage pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextClustering {
    pub user_id: String,
    /// Situation flat index -> label in `1..=m`.
    pub labels: BTreeMap<usize, usize>,
    pub m: usize,
}

impl ContextClustering {
    pub fn label_of(&self, situation: &ContextSituation) -> Option<usize> {
        self.labels.get(&situation.flat_index()).copied()
    }
}

/// Phase 1 for one user.
///
/// The per-user network is seeded with `cfg.seed ^ fnv1a(user)`.
pub fn cluster_user_contexts(cube: &RatingCube, user: &str, cfg: &SomConfig) -> Result<ContextClustering> {
    let patterns = cube.usage_pattern_vectors(user)?;
    if patterns.is_empty() {
        return Err(Error::NoRatings(user.to_string()));
    }
    let user_cfg = cfg.clone().with_seed(derive_seed(cfg.seed, user));
    let vectors: Vec<&[f64]> = patterns.iter().map(|(_, v)| v.components.as_slice()).collect();
    let som = SomNetwork::train(&vectors, &user_cfg)?;
    let neurons = som.assign(&vectors);

    let occupied: BTreeSet<usize> = neurons.iter().copied().collect();
    let compact: BTreeMap<usize, usize> = occupied.iter().enumerate().map(|(i, &n)| (n, i + 1)).collect();
    let labels = patterns
        .iter()
        .zip(&neurons)
        .map(|((sit, _), n)| (sit.flat_index(), compact[n]))
        .collect();
    Ok(ContextClustering {
        user_id: user.to_string(),
        labels,
        m: occupied.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VirtualUser {
    pub user: String,
    pub label: usize,
}

impl std::fmt::Display for VirtualUser {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.user, self.label)
    }
}

/// The collapsed (virtual user x item) space. Rows are ordered by
/// (user id, label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualUserSpace {
    pub virtual_users: Vec<VirtualUser>,
    pub matrix: RatingMatrix,
}

impl VirtualUserSpace {
    pub fn index_of(&self, user: &str, label: usize) -> Option<usize> {
        self.virtual_users
            .binary_search_by(|v| (v.user.as_str(), v.label).cmp(&(user, label)))
            .ok()
    }

    /// Row indices of one user's virtual users.
    pub fn rows_of(&self, user: &str) -> std::ops::Range<usize> {
        let start = self.virtual_users.partition_point(|v| v.user.as_str() < user);
        let end = self.virtual_users.partition_point(|v| v.user.as_str() <= user);
        start..end
    }

    pub fn len(&self) -> usize {
        self.virtual_users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.virtual_users.is_empty()
    }
}

/// Phase 2: one virtual user per (user, label), ratings averaged per item.
pub fn build_virtual_space(
    cube: &RatingCube,
    clusterings: &BTreeMap<String, ContextClustering>,
) -> Result<VirtualUserSpace> {
    let mut virtual_users = Vec::new();
    let mut matrix = RatingMatrix::new(cube.items().to_vec());
    for (u, user) in cube.users().iter().enumerate() {
        let mut cells = cube.user_cells(u).peekable();
        if cells.peek().is_none() {
            continue;
        }
        let clustering = clusterings
            .get(user)
            .ok_or_else(|| Error::MissingClustering(user.clone()))?;
        let mut grouped: BTreeMap<usize, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
        for ((_, sit, s), rating) in cells {
            let label = *clustering
                .labels
                .get(&sit)
                .ok_or_else(|| Error::MissingClustering(user.clone()))?;
            grouped
                .entry(label)
                .or_default()
                .entry(s)
                .or_default()
                .push(rating.value() as f64);
        }
        for (label, items) in grouped {
            let row = items
                .into_iter()
                .map(|(s, values)| aggregate(&values).map(|v| (s, v)))
                .collect::<Result<_>>()?;
            matrix.push_row(row);
            virtual_users.push(VirtualUser {
                user: user.clone(),
                label,
            });
        }
    }
    Ok(VirtualUserSpace {
        virtual_users,
        matrix,
    })
}

/// Phase 3 clustering of the virtual users.
pub fn cluster_virtual_users(space: &VirtualUserSpace, cfg: &SomConfig) -> Result<UserClusterModel> {
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    UserClusterModel::fit(&space.matrix, cfg)
}

/// Scores of every item the virtual user has not rated.
pub fn predict_scores(
    model: &UserClusterModel,
    space: &VirtualUserSpace,
    virtual_user: &VirtualUser,
) -> Result<BTreeMap<String, f64>> {
    let row = space
        .index_of(&virtual_user.user, virtual_user.label)
        .ok_or_else(|| Error::UnknownVirtualUser {
            user: virtual_user.user.clone(),
            label: virtual_user.label,
        })?;
    let items = space.matrix.items();
    Ok(model
        .predict_scores(&space.matrix, row)?
        .into_iter()
        .map(|(s, v)| (items[s].clone(), v))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub phase1: SomConfig,
    pub phase3: SomConfig,
}

impl PipelineConfig {
    /// 6 context-clustering neurons and 21 user-clustering neurons.
    pub fn new(seed: u64) -> Self {
        PipelineConfig {
            phase1: SomConfig::new(DEFAULT_PHASE1_NEURONS, seed),
            phase3: SomConfig::new(DEFAULT_PHASE3_NEURONS, seed),
        }
    }
}

/// A trained context-aware recommender.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub schema: ContextSchema,
    pub clusterings: BTreeMap<String, ContextClustering>,
    pub space: VirtualUserSpace,
    pub users: UserClusterModel,
}

impl PipelineModel {
    pub fn train(cube: &RatingCube, cfg: &PipelineConfig) -> Result<Self> {
        cfg.phase1.validate()?;
        cfg.phase3.validate()?;
        let active: Vec<&String> = cube
            .users()
            .iter()
            .enumerate()
            .filter(|(u, _)| cube.user_cells(*u).next().is_some())
            .map(|(_, id)| id)
            .collect();
        let clusterings = active
            .par_iter()
            .map(|user| cluster_user_contexts(cube, user, &cfg.phase1).map(|c| ((*user).clone(), c)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let space = build_virtual_space(cube, &clusterings)?;
        let users = cluster_virtual_users(&space, &cfg.phase3)?;
        Ok(PipelineModel {
            schema: cube.schema().clone(),
            clusterings,
            space,
            users,
        })
    }

    /// Label the online context maps to. Situations the user never rated in
    /// fall back to the virtual user with the most rated items (lowest label
    /// on ties).
    pub fn route(&self, user: &str, online_context: &ContextSituation) -> Result<usize> {
        let clustering = self
            .clusterings
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        if let Some(label) = clustering.label_of(online_context) {
            return Ok(label);
        }
        let rows = self.space.rows_of(user);
        let densest = rows
            .clone()
            .max_by(|&a, &b| {
                let la = self.space.matrix.row(a).len();
                let lb = self.space.matrix.row(b).len();
                la.cmp(&lb).then(b.cmp(&a))
            })
            .ok_or_else(|| Error::NoVirtualUsers(user.to_string()))?;
        Ok(self.space.virtual_users[densest].label)
    }

    /// Row of the virtual user serving `user` in `online_context`.
    pub fn route_row(&self, user: &str, online_context: &ContextSituation) -> Result<usize> {
        let label = self.route(user, online_context)?;
        self.space
            .index_of(user, label)
            .ok_or_else(|| Error::NoVirtualUsers(user.to_string()))
    }

    /// Top-`n` items for `user` in `online_context`, as (item id, score).
    pub fn recommend(&self, user: &str, online_context: &ContextSituation, n: usize) -> Result<Vec<(String, f64)>> {
        let row = self.route_row(user, online_context)?;
        Ok(self.recommend_row(row, n)?
            .into_iter()
            .map(|(s, v)| (self.space.matrix.items()[s].clone(), v))
            .collect())
    }

    /// Ranked candidates for a virtual-user row. Items rated in training by
    /// any virtual user of the same person are excluded, so the pipeline and
    /// the baseline share one exclusion set per user.
    pub fn recommend_row(&self, row: usize, n: usize) -> Result<Vec<(usize, f64)>> {
        let mut scores = self.users.predict_scores(&self.space.matrix, row)?;
        let user = &self.space.virtual_users[row].user;
        for sibling in self.space.rows_of(user) {
            for s in self.space.matrix.row(sibling).keys() {
                scores.remove(s);
            }
        }
        Ok(rank(scores, n))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("schema.json"), &self.schema)?;
        let clusterings: Vec<ClusteringFile> = self
            .clusterings
            .values()
            .map(|c| ClusteringFile::from_clustering(c, &self.schema))
            .collect();
        write_json(&dir.join("clusterings.json"), &clusterings)?;
        write_json(&dir.join("virtual_space.json"), &self.space)?;
        write_json(&dir.join("user_som.json"), &self.users.som)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let schema: ContextSchema = read_json(&dir.join("schema.json"))?;
        let files: Vec<ClusteringFile> = read_json(&dir.join("clusterings.json"))?;
        let clusterings = files
            .into_iter()
            .map(|f| f.into_clustering(&schema).map(|c| (c.user_id.clone(), c)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let space: VirtualUserSpace = read_json(&dir.join("virtual_space.json"))?;
        let som: SomNetwork = read_json(&dir.join("user_som.json"))?;
        let users = UserClusterModel::from_som(&space.matrix, som)?;
        Ok(PipelineModel {
            schema,
            clusterings,
            space,
            users,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LabelEntry {
    flat_index: usize,
    context: Vec<String>,
    label: usize,
}

#[derive(Serialize, Deserialize)]
struct ClusteringFile {
    user_id: String,
    m: usize,
    labels: Vec<LabelEntry>,
}

impl ClusteringFile {
    fn from_clustering(c: &ContextClustering, schema: &ContextSchema) -> Self {
        let labels = c
            .labels
            .iter()
            .map(|(&flat_index, &label)| {
                let sit = schema.decode(flat_index).expect("labels hold valid situations");
                LabelEntry {
                    flat_index,
                    context: schema.value_names(&sit).into_iter().map(String::from).collect(),
                    label,
                }
            })
            .collect();
        ClusteringFile {
            user_id: c.user_id.clone(),
            m: c.m,
            labels,
        }
    }

    fn into_clustering(self, schema: &ContextSchema) -> Result<ContextClustering> {
        let mut labels = BTreeMap::new();
        for e in self.labels {
            let sit = schema.situation_by_names(&e.context)?;
            if sit.flat_index() != e.flat_index || e.label == 0 || e.label > self.m {
                return Err(Error::InvalidConfig(format!(
                    "inconsistent clustering entry for user {:?}",
                    self.user_id
                )));
            }
            labels.insert(e.flat_index, e.label);
        }
        Ok(ContextClustering {
            user_id: self.user_id,
            labels,
            m: self.m,
        })
    }
}
