//! Contextual dimensions, situations and the rating scale.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One contextual dimension and its ordered value profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextDimension {
    pub name: String,
    pub values: Vec<String>,
}

impl ContextDimension {
    pub fn new<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Result<Self> {
        let dim = ContextDimension {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        };
        dim.validate()?;
        Ok(dim)
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn index_of(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidSchema("dimension with empty name".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidSchema(format!("dimension {:?} has no values", self.name)));
        }
        let mut seen = HashSet::new();
        for v in &self.values {
            if !seen.insert(v.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "dimension {:?} lists value {:?} twice",
                    self.name, v
                )));
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawSchema {
    dimensions: Vec<ContextDimension>,
    rating_min: u8,
    rating_max: u8,
}

/// The ordered set of contextual dimensions plus the rating scale.
///
/// Situations are numbered by mixed-radix encoding of their value indices,
/// with the last dimension varying fastest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct ContextSchema {
    dimensions: Vec<ContextDimension>,
    rating_min: u8,
    rating_max: u8,
}

impl TryFrom<RawSchema> for ContextSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        ContextSchema::new(raw.dimensions, raw.rating_min, raw.rating_max)
    }
}

impl ContextSchema {
    pub fn new(dimensions: Vec<ContextDimension>, rating_min: u8, rating_max: u8) -> Result<Self> {
        if dimensions.is_empty() {
            return Err(Error::InvalidSchema("schema needs at least one dimension".into()));
        }
        let mut names = HashSet::new();
        for d in &dimensions {
            d.validate()?;
            if !names.insert(d.name.as_str()) {
                return Err(Error::InvalidSchema(format!("dimension {:?} defined twice", d.name)));
            }
        }
        if rating_min == 0 || rating_min > rating_max {
            return Err(Error::InvalidSchema(format!(
                "rating range [{rating_min}, {rating_max}] must satisfy 1 <= min <= max"
            )));
        }
        let schema = ContextSchema {
            dimensions,
            rating_min,
            rating_max,
        };
        schema
            .dimensions
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(d.cardinality()))
            .ok_or_else(|| Error::InvalidSchema("situation count overflows".into()))?;
        Ok(schema)
    }

    /// Day, time of day, companion and weather on a 1-5 rating scale.
    pub fn restaurant_default() -> Self {
        let dims = vec![
            ContextDimension::new("day", ["Weekday", "Weekend"]),
            ContextDimension::new("time", ["Morning", "Noon", "Afternoon", "Night"]),
            ContextDimension::new(
                "companion",
                ["Spouse", "Family", "Friends", "Co-workers", "Alone", "Others"],
            ),
            ContextDimension::new(
                "weather",
                [
                    "Cold/Sunny",
                    "Cold/Rainy",
                    "Moderate/Sunny",
                    "Moderate/Rainy",
                    "Hot/Sunny",
                    "Hot/Rainy",
                    "Others",
                ],
            ),
        ]
        .into_iter()
        .collect::<Result<Vec<_>>>()
        .expect("built-in dimensions are valid");
        ContextSchema::new(dims, 1, 5).expect("built-in schema is valid")
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dimensions(&self) -> &[ContextDimension] {
        &self.dimensions
    }

    pub fn rating_min(&self) -> u8 {
        self.rating_min
    }

    pub fn rating_max(&self) -> u8 {
        self.rating_max
    }

    pub fn situation_count(&self) -> usize {
        self.dimensions.iter().map(ContextDimension::cardinality).product()
    }

    /// Builds a situation from one value index per dimension.
    pub fn situation(&self, values: &[usize]) -> Result<ContextSituation> {
        if values.len() != self.dimensions.len() {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.dimensions.len(),
            });
        }
        let mut flat = 0usize;
        for (d, &v) in self.dimensions.iter().zip(values) {
            if v >= d.cardinality() {
                return Err(Error::InvalidSchema(format!(
                    "value index {v} out of range for dimension {:?}",
                    d.name
                )));
            }
            flat = flat * d.cardinality() + v;
        }
        Ok(ContextSituation {
            values: values.to_vec(),
            flat_index: flat,
        })
    }

    /// Builds a situation from value names, in dimension order.
    pub fn situation_by_names<S: AsRef<str>>(&self, names: &[S]) -> Result<ContextSituation> {
        if names.len() != self.dimensions.len() {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: self.dimensions.len(),
            });
        }
        let values = self
            .dimensions
            .iter()
            .zip(names)
            .map(|(d, n)| {
                d.index_of(n.as_ref()).ok_or_else(|| Error::UnknownContextValue {
                    line: 0,
                    dimension: d.name.clone(),
                    value: n.as_ref().to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.situation(&values)
    }

    /// Decodes a flat index back into its value tuple.
    pub fn decode(&self, flat_index: usize) -> Result<ContextSituation> {
        let count = self.situation_count();
        if flat_index >= count {
            return Err(Error::InvalidSituation {
                index: flat_index,
                count,
            });
        }
        let mut values = vec![0; self.dimensions.len()];
        let mut rest = flat_index;
        for (slot, d) in values.iter_mut().zip(&self.dimensions).rev() {
            *slot = rest % d.cardinality();
            rest /= d.cardinality();
        }
        Ok(ContextSituation { values, flat_index })
    }

    pub fn value_names(&self, situation: &ContextSituation) -> Vec<&str> {
        self.dimensions
            .iter()
            .zip(&situation.values)
            .map(|(d, &v)| d.values[v].as_str())
            .collect()
    }

    pub fn rating(&self, value: i64) -> Option<Rating> {
        (self.rating_min as i64..=self.rating_max as i64)
            .contains(&value)
            .then_some(Rating(value as u8))
    }
}

/// All situations of `schema` in flat-index order.
pub fn enumerate_situations(schema: &ContextSchema) -> Vec<ContextSituation> {
    (0..schema.situation_count())
        .map(|i| schema.decode(i).expect("index within range"))
        .collect()
}

/// One concrete tuple of context values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContextSituation {
    flat_index: usize,
    values: Vec<usize>,
}

impl ContextSituation {
    pub fn flat_index(&self) -> usize {
        self.flat_index
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }
}

/// An integer rating inside the schema's scale. 0 is reserved for "unrated".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rating(u8);

impl Rating {
    pub fn value(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}
