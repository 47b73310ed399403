//! Synthetic rating cubes with a tunable amount of context dependence.
//!
//! Situations are partitioned into latent archetypes. Every user belongs to
//! a taste group and draws a global preference vector around the group's
//! prototype plus one preference vector per archetype around the
//! archetype's prototype. In a situation of archetype `a` the latent rating
//! of item `s` is `(1 - gamma) * global(s) + gamma * archetype_a(s)`, then
//! Gaussian noise is added and the value is rounded and clipped to the
//! rating scale. Which items get rated in a situation is sampled in
//! proportion to `exp(selectivity * latent)`, so users mostly rate what
//! they like in that context.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cube::{RatingCube, RatingRecord};
use crate::error::{Error, Result};
use crate::json::write_json;
use crate::rng::XorShiftRng;
use crate::schema::ContextSchema;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub schema: ContextSchema,
    pub n_archetypes: usize,
    pub n_taste_groups: usize,
    /// Weight of the archetype preference, 0 = context-free.
    pub gamma: f64,
    /// Expected fraction of (user, situation) pairs with ratings.
    pub density: f64,
    pub ratings_per_active_situation: usize,
    pub noise_sd: f64,
    /// Standard deviation of a user's preferences around the prototypes.
    pub user_spread: f64,
    /// Inverse temperature of preference-driven item choice; 0 = uniform.
    pub selectivity: f64,
    /// Whether a user may rate the same item in several situations.
    pub repeat_items: bool,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_users: 630,
            n_items: 400,
            schema: ContextSchema::restaurant_default(),
            n_archetypes: 6,
            n_taste_groups: 4,
            gamma: 0.5,
            density: 0.006,
            ratings_per_active_situation: 15,
            noise_sd: 0.3,
            user_spread: 0.5,
            selectivity: 4.0,
            repeat_items: true,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_users == 0 || self.n_items == 0 {
            return fail("n_users and n_items must be positive".into());
        }
        if self.n_archetypes == 0 || self.n_taste_groups == 0 {
            return fail("n_archetypes and n_taste_groups must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} not in [0, 1]", self.gamma));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return fail(format!("density {} not in (0, 1]", self.density));
        }
        if self.ratings_per_active_situation == 0 || self.ratings_per_active_situation > self.n_items {
            return fail(format!(
                "ratings_per_active_situation {} not in [1, n_items]",
                self.ratings_per_active_situation
            ));
        }
        for (name, v) in [
            ("noise_sd", self.noise_sd),
            ("user_spread", self.user_spread),
            ("selectivity", self.selectivity),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} {v} must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Diagnostics written next to the ratings; never read by the recommenders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Archetype of every situation, indexed by flat situation index.
    pub situation_archetype: Vec<usize>,
    pub user_taste_group: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub cube: RatingCube,
    pub truth: GroundTruth,
}

impl GeneratedData {
    /// Writes `ratings.csv` and `ground_truth.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.cube.save_csv(&dir.join("ratings.csv"))?;
        write_json(&dir.join("ground_truth.json"), &self.truth)
    }
}

fn id(prefix: &str, i: usize, count: usize) -> String {
    let width = count.saturating_sub(1).to_string().len();
    format!("{prefix}{i:0width$}")
}

pub fn generate(cfg: &GenConfig) -> Result<GeneratedData> {
    cfg.validate()?;
    let schema = &cfg.schema;
    let (lo, hi) = (schema.rating_min() as f64, schema.rating_max() as f64);
    let n_sit = schema.situation_count();
    let p = cfg.n_items;
    let mut rng = XorShiftRng::new(cfg.seed);

    // balanced random archetype assignment
    let mut order: Vec<usize> = (0..n_sit).collect();
    rng.shuffle(&mut order);
    let mut situation_archetype = vec![0; n_sit];
    for (k, &sit) in order.iter().enumerate() {
        situation_archetype[sit] = k % cfg.n_archetypes;
    }

    let prototypes = |count: usize, rng: &mut XorShiftRng| -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| (0..p).map(|_| rng.uniform(lo, hi)).collect())
            .collect()
    };
    let taste = prototypes(cfg.n_taste_groups, &mut rng);
    let archetypes = prototypes(cfg.n_archetypes, &mut rng);

    let users: Vec<String> = (0..cfg.n_users).map(|u| id("u", u, cfg.n_users)).collect();
    let items: Vec<String> = (0..p).map(|s| id("i", s, p)).collect();
    let mut records = Vec::new();
    let mut user_taste_group = BTreeMap::new();

    for user in &users {
        let group = rng.below(cfg.n_taste_groups);
        user_taste_group.insert(user.clone(), group);
        let perturb = |base: &[f64], rng: &mut XorShiftRng| -> Vec<f64> {
            base.iter()
                .map(|&b| (b + cfg.user_spread * rng.standard_normal()).clamp(lo, hi))
                .collect()
        };
        let global = perturb(&taste[group], &mut rng);
        let own: Vec<Vec<f64>> = archetypes.iter().map(|a| perturb(a, &mut rng)).collect();

        let mut active: Vec<usize> = (0..n_sit).filter(|_| rng.next_f64() < cfg.density).collect();
        if active.is_empty() {
            active.push(rng.below(n_sit));
        }

        let mut used = vec![false; p];
        for sit in active {
            let pref = &own[situation_archetype[sit]];
            let latent: Vec<f64> = (0..p)
                .map(|s| (1.0 - cfg.gamma) * global[s] + cfg.gamma * pref[s])
                .collect();
            let chosen = weighted_sample(
                &latent,
                &used,
                cfg.selectivity,
                cfg.ratings_per_active_situation,
                &mut rng,
            );
            if !cfg.repeat_items {
                for &s in &chosen {
                    used[s] = true;
                }
            }
            let situation = schema.decode(sit)?;
            for s in chosen {
                let noisy = latent[s] + cfg.noise_sd * rng.standard_normal();
                let value = noisy.round().clamp(lo, hi) as i64;
                records.push(RatingRecord {
                    user_id: user.clone(),
                    item_id: items[s].clone(),
                    situation: situation.clone(),
                    rating: schema.rating(value).expect("clamped into range"),
                });
            }
        }
    }

    let cube = RatingCube::with_ids(schema.clone(), users, items, &records)?;
    Ok(GeneratedData {
        cube,
        truth: GroundTruth {
            situation_archetype,
            user_taste_group,
        },
    })
}

/// Up to `k` distinct unexcluded indices drawn without replacement with
/// weight `exp(selectivity * score)` (Efraimidis-Spirakis keys).
fn weighted_sample(scores: &[f64], excluded: &[bool], selectivity: f64, k: usize, rng: &mut XorShiftRng) -> Vec<usize> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut keys: Vec<(f64, usize)> = scores
        .iter()
        .enumerate()
        .map(|(s, &x)| {
            let weight = (selectivity * (x - max)).exp().max(f64::MIN_POSITIVE);
            let u = 1.0 - rng.next_f64();
            // log-key: ln(u) / w, larger is better
            (u.ln() / weight, s)
        })
        .filter(|&(_, s)| !excluded[s])
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<usize> = keys.into_iter().take(k).map(|(_, s)| s).collect();
    out.sort_unstable();
    out
}
