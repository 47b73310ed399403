//! The context-free baseline: collapse the cube over all situations and run
//! the same SOM collaborative filtering on plain users.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cf::{rank, UserClusterModel};
use crate::cube::RatingCube;
use crate::error::{Error, Result};
use crate::json::{read_json, write_json};
use crate::pipeline::aggregate;
use crate::schema::ContextSchema;
use crate::som::{SomConfig, SomNetwork};
use crate::space::RatingMatrix;

pub const DEFAULT_BASELINE_NEURONS: usize = 19;

/// Users with at least one rating, in id order, against all cube items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatSpace {
    pub users: Vec<String>,
    pub matrix: RatingMatrix,
}

impl FlatSpace {
    pub fn index_of(&self, user: &str) -> Option<usize> {
        self.users.binary_search_by(|u| u.as_str().cmp(user)).ok()
    }
}

/// Averages each (user, item) pair over every situation it was rated in.
pub fn flatten_cube(cube: &RatingCube) -> Result<FlatSpace> {
    if cube.is_empty() {
        return Err(Error::EmptyCube);
    }
    let mut users = Vec::new();
    let mut matrix = RatingMatrix::new(cube.items().to_vec());
    for (u, user) in cube.users().iter().enumerate() {
        let mut by_item: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for ((_, _, s), rating) in cube.user_cells(u) {
            by_item.entry(s).or_default().push(rating.value() as f64);
        }
        if by_item.is_empty() {
            continue;
        }
        let row = by_item
            .into_iter()
            .map(|(s, values)| aggregate(&values).map(|v| (s, v)))
            .collect::<Result<_>>()?;
        matrix.push_row(row);
        users.push(user.clone());
    }
    Ok(FlatSpace { users, matrix })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub schema: ContextSchema,
    pub flat: FlatSpace,
    pub users: UserClusterModel,
}

impl BaselineModel {
    pub fn train(cube: &RatingCube, cfg: &SomConfig) -> Result<Self> {
        let flat = flatten_cube(cube)?;
        let users = UserClusterModel::fit(&flat.matrix, cfg)?;
        Ok(BaselineModel {
            schema: cube.schema().clone(),
            flat,
            users,
        })
    }

    pub fn row_of(&self, user: &str) -> Result<usize> {
        self.flat
            .index_of(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    pub fn recommend(&self, user: &str, n: usize) -> Result<Vec<(String, f64)>> {
        let row = self.row_of(user)?;
        Ok(self
            .recommend_row(row, n)?
            .into_iter()
            .map(|(s, v)| (self.flat.matrix.items()[s].clone(), v))
            .collect())
    }

    pub fn recommend_row(&self, row: usize, n: usize) -> Result<Vec<(usize, f64)>> {
        Ok(rank(self.users.predict_scores(&self.flat.matrix, row)?, n))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_json(&dir.join("schema.json"), &self.schema)?;
        write_json(&dir.join("flat_space.json"), &self.flat)?;
        write_json(&dir.join("user_som.json"), &self.users.som)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let schema: ContextSchema = read_json(&dir.join("schema.json"))?;
        let flat: FlatSpace = read_json(&dir.join("flat_space.json"))?;
        let som: SomNetwork = read_json(&dir.join("user_som.json"))?;
        let users = UserClusterModel::from_som(&flat.matrix, som)?;
        Ok(BaselineModel { schema, flat, users })
    }
}

/// Trains a baseline on `flat` and returns the top-`n` items for `user`.
pub fn baseline_recommend(flat: &FlatSpace, cfg: &SomConfig, user: &str, n: usize) -> Result<Vec<(String, f64)>> {
    let row = flat
        .index_of(user)
        .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
    let users = UserClusterModel::fit(&flat.matrix, cfg)?;
    Ok(rank(users.predict_scores(&flat.matrix, row)?, n)
        .into_iter()
        .map(|(s, v)| (flat.matrix.items()[s].clone(), v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::RatingRecord;

    fn cube(rows: &[(&str, &str, usize, i64)]) -> RatingCube {
        let schema = ContextSchema::restaurant_default();
        let recs: Vec<RatingRecord> = rows
            .iter()
            .map(|&(u, s, sit, r)| RatingRecord {
                user_id: u.into(),
                item_id: s.into(),
                situation: schema.decode(sit).unwrap(),
                rating: schema.rating(r).unwrap(),
            })
            .collect();
        RatingCube::from_records(schema, &recs).unwrap()
    }

    #[test]
    fn flatten_examples() {
        let c = cube(&[("u", "a", 0, 4), ("u", "b", 0, 2), ("u", "b", 9, 4), ("v", "a", 3, 1)]);
        let flat = flatten_cube(&c).unwrap();
        assert_eq!(flat.users, vec!["u", "v"]);
        assert_eq!(flat.matrix.row(0), &BTreeMap::from([(0, 4.0), (1, 3.0)]));
        assert_eq!(flat.matrix.row(1), &BTreeMap::from([(0, 1.0)]));
    }

    #[test]
    fn flatten_rejects_empty() {
        let empty = RatingCube::from_records(ContextSchema::restaurant_default(), &[]).unwrap();
        assert!(matches!(flatten_cube(&empty), Err(Error::EmptyCube)));
    }

    #[test]
    fn flatten_is_idempotent_on_single_situation() {
        let c = cube(&[("u", "a", 7, 4), ("u", "b", 7, 2), ("v", "b", 7, 5)]);
        let flat = flatten_cube(&c).unwrap();
        // rebuild a single-situation cube from the flat matrix and flatten again
        let mut rows: Vec<(String, String, i64)> = Vec::new();
        for (r, u) in flat.users.iter().enumerate() {
            for (&s, &v) in flat.matrix.row(r) {
                rows.push((u.clone(), flat.matrix.items()[s].clone(), v as i64));
            }
        }
        let borrowed: Vec<(&str, &str, usize, i64)> =
            rows.iter().map(|(u, s, v)| (u.as_str(), s.as_str(), 7, *v)).collect();
        assert_eq!(flatten_cube(&cube(&borrowed)).unwrap(), flat);
    }

    #[test]
    fn recommend_rules() {
        let c = cube(&[
            ("u", "a", 0, 5),
            ("u", "b", 1, 2),
            ("v", "a", 0, 5),
            ("v", "c", 0, 4),
            ("v", "d", 0, 4),
        ]);
        let cfg = SomConfig::new(1, 0);
        let model = BaselineModel::train(&c, &cfg).unwrap();
        let recs = model.recommend("u", 10).unwrap();
        let ids: Vec<&str> = recs.iter().map(|(i, _)| i.as_str()).collect();
        // c and d tie at 4.0 and are ordered by id; a and b were rated
        assert_eq!(ids, vec!["c", "d"]);
        assert_eq!(recs[0].1, 4.0);
        assert_eq!(baseline_recommend(&model.flat, &cfg, "u", 10).unwrap(), recs);
        assert!(matches!(model.recommend("zz", 3), Err(Error::UnknownUser(_))));
    }

    #[test]
    fn singleton_cluster_falls_back_to_prototype() {
        let c = cube(&[("u", "a", 0, 5), ("v", "b", 0, 5)]);
        let model = BaselineModel::train(&c, &SomConfig::new(19, 4)).unwrap();
        let clusters = model.users.clusters();
        if clusters.len() == 2 {
            let recs = model.recommend("u", 5).unwrap();
            let neuron = model.users.neuron_of(0);
            assert_eq!(recs, vec![("b".to_string(), model.users.som.weights[neuron][1])]);
        }
    }

    #[test]
    fn persistence_roundtrip() {
        let c = cube(&[("u", "a", 0, 5), ("u", "b", 1, 2), ("v", "a", 0, 3)]);
        let model = BaselineModel::train(&c, &SomConfig::new(3, 8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        model.save(dir.path()).unwrap();
        assert_eq!(BaselineModel::load(dir.path()).unwrap(), model);
    }
}
