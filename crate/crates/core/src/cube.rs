//! The sparse (user, situation, item) rating cube and its CSV form.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::ops::Bound;
use std::path::Path;

use crate::error::{Error, Result};
use crate::schema::{ContextSchema, ContextSituation, Rating};

/// One observed rating with its full context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatingRecord {
    pub user_id: String,
    pub item_id: String,
    pub situation: ContextSituation,
    pub rating: Rating,
}

/// A length-p rating vector over the cube's items; 0 marks "unrated".
#[derive(Debug, Clone, PartialEq)]
pub struct PatternVector {
    pub owner: String,
    pub components: Vec<f64>,
}

impl PatternVector {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn nonzero_count(&self) -> usize {
        self.components.iter().filter(|&&c| c != 0.0).count()
    }
}

/// Cell key: dense (user, situation flat index, item) indices.
pub type CellKey = (usize, usize, usize);

/// Immutable rating cube. User and item ids are kept sorted; dense indices
/// follow that order.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingCube {
    schema: ContextSchema,
    users: Vec<String>,
    items: Vec<String>,
    cells: BTreeMap<CellKey, Rating>,
}

impl RatingCube {
    /// Builds a cube whose id lists are exactly the ids appearing in `records`.
    pub fn from_records(schema: ContextSchema, records: &[RatingRecord]) -> Result<Self> {
        let users: BTreeSet<&str> = records.iter().map(|r| r.user_id.as_str()).collect();
        let items: BTreeSet<&str> = records.iter().map(|r| r.item_id.as_str()).collect();
        let users = users.into_iter().map(String::from).collect();
        let items = items.into_iter().map(String::from).collect();
        Self::with_ids(schema, users, items, records)
    }

    /// Builds a cube over explicit id lists, which may include users or items
    /// without ratings. Lists are sorted and deduplicated.
    pub fn with_ids(
        schema: ContextSchema,
        mut users: Vec<String>,
        mut items: Vec<String>,
        records: &[RatingRecord],
    ) -> Result<Self> {
        users.sort();
        users.dedup();
        items.sort();
        items.dedup();
        if users.iter().chain(&items).any(String::is_empty) {
            return Err(Error::MalformedRow {
                line: 0,
                reason: "empty user or item id".into(),
            });
        }
        let mut cube = RatingCube {
            schema,
            users,
            items,
            cells: BTreeMap::new(),
        };
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 1;
            let u = cube
                .user_index(&r.user_id)
                .ok_or_else(|| Error::UnknownUser(r.user_id.clone()))?;
            let s = cube.item_index(&r.item_id).ok_or_else(|| Error::MalformedRow {
                line,
                reason: format!("unknown item {:?}", r.item_id),
            })?;
            cube.insert(line, u, r.situation.flat_index(), s, r.rating)?;
        }
        Ok(cube)
    }

    fn insert(&mut self, line: u64, user: usize, situation: usize, item: usize, rating: Rating) -> Result<()> {
        let count = self.schema.situation_count();
        if situation >= count {
            return Err(Error::InvalidSituation {
                index: situation,
                count,
            });
        }
        if rating.value() < self.schema.rating_min() || rating.value() > self.schema.rating_max() {
            return Err(Error::RatingOutOfRange {
                line,
                value: rating.value() as i64,
                min: self.schema.rating_min(),
                max: self.schema.rating_max(),
            });
        }
        if self.cells.insert((user, situation, item), rating).is_some() {
            return Err(Error::DuplicateCell {
                line,
                user: self.users[user].clone(),
                item: self.items[item].clone(),
            });
        }
        Ok(())
    }

    pub fn schema(&self) -> &ContextSchema {
        &self.schema
    }

    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    /// Number of items, the length of every pattern vector.
    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.users.binary_search_by(|u| u.as_str().cmp(id)).ok()
    }

    pub fn item_index(&self, id: &str) -> Option<usize> {
        self.items.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn get(&self, user: usize, situation: usize, item: usize) -> Option<Rating> {
        self.cells.get(&(user, situation, item)).copied()
    }

    /// All cells in (user, situation, item) order.
    pub fn cells(&self) -> impl Iterator<Item = (CellKey, Rating)> + '_ {
        self.cells.iter().map(|(&k, &r)| (k, r))
    }

    /// Cells of one user in (situation, item) order.
    pub fn user_cells(&self, user: usize) -> impl Iterator<Item = (CellKey, Rating)> + '_ {
        self.cells
            .range((Bound::Included((user, 0, 0)), Bound::Excluded((user + 1, 0, 0))))
            .map(|(&k, &r)| (k, r))
    }

    /// Cells in canonical order as owned records.
    pub fn records(&self) -> Vec<RatingRecord> {
        self.cells()
            .map(|((u, sit, s), rating)| RatingRecord {
                user_id: self.users[u].clone(),
                item_id: self.items[s].clone(),
                situation: self.schema.decode(sit).expect("stored situations are valid"),
                rating,
            })
            .collect()
    }

    /// A cube over the same schema and id lists holding only the given cells.
    pub fn subset(&self, keys: impl IntoIterator<Item = CellKey>) -> RatingCube {
        let cells = keys
            .into_iter()
            .map(|k| (k, self.cells[&k]))
            .collect();
        RatingCube {
            schema: self.schema.clone(),
            users: self.users.clone(),
            items: self.items.clone(),
            cells,
        }
    }

    /// One pattern vector per situation in which `user` rated something.
    ///
    /// Component `s` holds the rating of item `s` in that situation, 0 when
    /// unrated. Situations without ratings are skipped.
    pub fn usage_pattern_vectors(&self, user: &str) -> Result<Vec<(ContextSituation, PatternVector)>> {
        let u = self
            .user_index(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))?;
        let p = self.item_count();
        let mut out: Vec<(ContextSituation, PatternVector)> = Vec::new();
        for ((_, sit, s), rating) in self.user_cells(u) {
            if out.last().map(|(c, _)| c.flat_index()) != Some(sit) {
                let situation = self.schema.decode(sit)?;
                let owner = format!("{user}@{sit}");
                out.push((
                    situation,
                    PatternVector {
                        owner,
                        components: vec![0.0; p],
                    },
                ));
            }
            out.last_mut().expect("pushed above").1.components[s] = rating.value() as f64;
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(header(&self.schema))?;
        for ((u, sit, s), rating) in self.cells() {
            let situation = self.schema.decode(sit)?;
            let mut row = vec![self.users[u].as_str(), self.items[s].as_str()];
            row.extend(self.schema.value_names(&situation));
            let value = rating.to_string();
            row.push(&value);
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: &Path, schema: ContextSchema) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        load_ratings(std::io::BufReader::new(file), schema)
    }
}

fn header(schema: &ContextSchema) -> Vec<String> {
    let mut h = vec!["user_id".to_string(), "item_id".to_string()];
    h.extend(schema.dimensions().iter().map(|d| d.name.clone()));
    h.push("rating".into());
    h
}

/// Parses a ratings CSV (`user_id,item_id,<one column per dimension>,rating`).
///
/// With the default schema the header is
/// `user_id,item_id,day,time,companion,weather,rating`.
pub fn load_ratings<R: Read>(source: R, schema: ContextSchema) -> Result<RatingCube> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let expected = header(&schema);
    let mut rows = reader.records();
    match rows.next() {
        Some(first) => {
            let first = first?;
            if first.iter().ne(expected.iter().map(String::as_str)) {
                return Err(Error::MalformedRow {
                    line: 1,
                    reason: format!("header must be {:?}", expected.join(",")),
                });
            }
        }
        None => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "missing header".into(),
            })
        }
    }

    let dims = schema.dimensions().len();
    let mut parsed = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != expected.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", expected.len(), row.len()),
            });
        }
        let user = row[0].trim();
        let item = row[1].trim();
        if user.is_empty() || item.is_empty() {
            return Err(Error::MalformedRow {
                line,
                reason: "empty user or item id".into(),
            });
        }
        let mut values = Vec::with_capacity(dims);
        for (k, d) in schema.dimensions().iter().enumerate() {
            let raw = row[2 + k].trim();
            let v = d.index_of(raw).ok_or_else(|| Error::UnknownContextValue {
                line,
                dimension: d.name.clone(),
                value: raw.to_string(),
            })?;
            values.push(v);
        }
        let raw_rating = row[2 + dims].trim();
        let value: i64 = raw_rating.parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("rating {raw_rating:?} is not an integer"),
        })?;
        let rating = schema.rating(value).ok_or(Error::RatingOutOfRange {
            line,
            value,
            min: schema.rating_min(),
            max: schema.rating_max(),
        })?;
        parsed.push((line, user.to_string(), item.to_string(), schema.situation(&values)?, rating));
    }

    let users: BTreeSet<&str> = parsed.iter().map(|p| p.1.as_str()).collect();
    let items: BTreeSet<&str> = parsed.iter().map(|p| p.2.as_str()).collect();
    let mut cube = RatingCube {
        users: users.into_iter().map(String::from).collect(),
        items: items.into_iter().map(String::from).collect(),
        schema,
        cells: BTreeMap::new(),
    };
    for (line, user, item, situation, rating) in &parsed {
        let u = cube.user_index(user).expect("collected above");
        let s = cube.item_index(item).expect("collected above");
        cube.insert(*line, u, situation.flat_index(), s, *rating)?;
    }
    Ok(cube)
}
