//! Top-N evaluation: splits, precision/recall/F1, per-cluster F1 and
//! neuron-count sweeps.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::ops::RangeInclusive;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{flatten_cube, BaselineModel};
use crate::cf::UserClusterModel;
use crate::cube::RatingCube;
use crate::error::{Error, Result};
use crate::pipeline::{build_virtual_space, PipelineConfig, PipelineModel};
use crate::rng::XorShiftRng;
use crate::schema::ContextSituation;
use crate::som::SomConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(seed: u64) -> Self {
        SplitConfig {
            train_fraction: 0.8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train fraction {} not in (0, 1]",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// Seeded record-level split. The first `ceil(f * N)` records of a shuffled
/// canonical ordering go to training, the rest to test.
pub fn split(cube: &RatingCube, cfg: &SplitConfig) -> Result<(RatingCube, RatingCube)> {
    cfg.validate()?;
    let mut keys: Vec<_> = cube.cells().map(|(k, _)| k).collect();
    let n = keys.len();
    let target = cfg.train_fraction * n as f64;
    // 0.8 * 10 must give 8, not ceil(8.000000000000002)
    let n_train = if (target - target.round()).abs() < 1e-9 {
        target.round()
    } else {
        target.ceil()
    } as usize;
    XorShiftRng::new(cfg.seed).shuffle(&mut keys);
    let test = keys.split_off(n_train.min(n));
    Ok((cube.subset(keys), cube.subset(test)))
}

/// Precision and recall of a duplicate-free recommendation list.
pub fn precision_recall<T: Ord>(recommended: &[T], relevant: &BTreeSet<T>) -> Result<(f64, f64)> {
    if relevant.is_empty() {
        return Err(Error::EmptyRelevantSet);
    }
    let hits = recommended.iter().filter(|r| relevant.contains(r)).count();
    let precision = if recommended.is_empty() {
        0.0
    } else {
        hits as f64 / recommended.len() as f64
    };
    Ok((precision, hits as f64 / relevant.len() as f64))
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// F1 from raw counts, `2h / (k + r)`, a single correctly rounded division.
fn f1_from_counts(hits: usize, recommended: usize, relevant: usize) -> f64 {
    if hits == 0 {
        0.0
    } else {
        (2 * hits) as f64 / (recommended + relevant) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub top_ns: Vec<usize>,
    pub relevance_threshold: u8,
    pub sample_users: usize,
    pub seed: u64,
}

impl EvalConfig {
    /// Top-5 to top-30 in steps of 5, threshold 4, 200 users.
    pub fn new(seed: u64) -> Self {
        EvalConfig {
            top_ns: vec![5, 10, 15, 20, 25, 30],
            relevance_threshold: 4,
            sample_users: 200,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_ns.is_empty() || self.top_ns[0] == 0 || self.top_ns.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(format!(
                "top-N list {:?} must be positive and strictly ascending",
                self.top_ns
            )));
        }
        if self.sample_users == 0 {
            return Err(Error::InvalidConfig("sample_users must be positive".into()));
        }
        Ok(())
    }

    fn max_n(&self) -> usize {
        *self.top_ns.last().expect("validated non-empty")
    }
}

/// A trained recommender the harness can score.
///
/// Rows are the units recommendations are made for: plain users for the
/// baseline, virtual users for the pipeline.
pub trait TopNSystem: Sync {
    fn name(&self) -> &'static str;

    /// Fails with [`Error::UntrainedSystem`] unless the model was built from
    /// exactly `train`.
    fn check_trained_on(&self, train: &RatingCube) -> Result<()>;

    fn cluster_model(&self) -> &UserClusterModel;

    /// (user id, context label) of a row.
    fn row_owner(&self, row: usize) -> (&str, Option<usize>);

    /// The row serving `user` in `situation`, `None` for users without a model.
    fn route(&self, user: &str, situation: &ContextSituation) -> Option<usize>;

    /// Item indices of the top-`n` recommendations for a row.
    fn ranking(&self, row: usize, n: usize) -> Result<Vec<usize>>;
}

impl TopNSystem for PipelineModel {
    fn name(&self) -> &'static str {
        "pipeline"
    }

    fn check_trained_on(&self, train: &RatingCube) -> Result<()> {
        let active = (0..train.users().len())
            .filter(|&u| train.user_cells(u).next().is_some())
            .count();
        if active != self.clusterings.len() || train.schema() != &self.schema {
            return Err(Error::UntrainedSystem);
        }
        match build_virtual_space(train, &self.clusterings) {
            Ok(space) if space == self.space => Ok(()),
            _ => Err(Error::UntrainedSystem),
        }
    }

    fn cluster_model(&self) -> &UserClusterModel {
        &self.users
    }

    fn row_owner(&self, row: usize) -> (&str, Option<usize>) {
        let v = &self.space.virtual_users[row];
        (v.user.as_str(), Some(v.label))
    }

    fn route(&self, user: &str, situation: &ContextSituation) -> Option<usize> {
        self.route_row(user, situation).ok()
    }

    fn ranking(&self, row: usize, n: usize) -> Result<Vec<usize>> {
        Ok(self.recommend_row(row, n)?.into_iter().map(|(s, _)| s).collect())
    }
}

impl TopNSystem for BaselineModel {
    fn name(&self) -> &'static str {
        "baseline"
    }

    fn check_trained_on(&self, train: &RatingCube) -> Result<()> {
        match flatten_cube(train) {
            Ok(flat) if flat == self.flat && train.schema() == &self.schema => Ok(()),
            _ => Err(Error::UntrainedSystem),
        }
    }

    fn cluster_model(&self) -> &UserClusterModel {
        &self.users
    }

    fn row_owner(&self, row: usize) -> (&str, Option<usize>) {
        (self.flat.users[row].as_str(), None)
    }

    fn route(&self, user: &str, _situation: &ContextSituation) -> Option<usize> {
        self.flat.index_of(user)
    }

    fn ranking(&self, row: usize, n: usize) -> Result<Vec<usize>> {
        Ok(self.recommend_row(row, n)?.into_iter().map(|(s, _)| s).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNMetrics {
    pub n: usize,
    pub hits: usize,
    pub recommended: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores of one evaluation unit: a user in one test situation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub user: String,
    pub situation: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    pub neuron: usize,
    pub relevant: usize,
    pub metrics: Vec<TopNMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopNSummary {
    pub mean_f1: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub mean_f1: f64,
    pub users: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub sampled_users: usize,
    pub evaluated_units: usize,
    pub skipped_no_model: usize,
    pub skipped_empty_relevant: usize,
    pub skipped_no_candidates: usize,
    pub per_n: BTreeMap<usize, TopNSummary>,
    pub per_cluster: BTreeMap<usize, ClusterSummary>,
    pub units: Vec<UnitResult>,
}

impl EvalReport {
    pub fn mean_f1(&self, n: usize) -> Option<f64> {
        self.per_n.get(&n).map(|s| s.mean_f1)
    }

    /// `n,mean_f1,mean_precision,mean_recall`
    pub fn write_topn_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["n", "mean_f1", "mean_precision", "mean_recall"])?;
        for (n, s) in &self.per_n {
            w.write_record([
                n.to_string(),
                s.mean_f1.to_string(),
                s.mean_precision.to_string(),
                s.mean_recall.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// `cluster,mean_f1`
    pub fn write_cluster_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cluster", "mean_f1"])?;
        for (c, s) in &self.per_cluster {
            w.write_record([c.to_string(), s.mean_f1.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// One user's test ratings in one situation and the row serving them.
struct TestGroup {
    situation: usize,
    row: usize,
    items: Vec<(usize, u8)>,
}

/// Test item indices translated into the training item space. Items unseen in
/// training get indices past the end, so they count as relevant but can never
/// be recommended.
fn item_map(train: &RatingCube, test: &RatingCube) -> Vec<usize> {
    test.items()
        .iter()
        .enumerate()
        .map(|(s, id)| train.item_index(id).unwrap_or(train.item_count() + s))
        .collect()
}

/// Groups a user's test ratings by situation; `None` if the system has no
/// model for the user.
fn group_user_tests<S: TopNSystem + ?Sized>(
    system: &S,
    test: &RatingCube,
    items: &[usize],
    u: usize,
) -> Option<Vec<TestGroup>> {
    let user = &test.users()[u];
    let mut groups: Vec<TestGroup> = Vec::new();
    for ((_, sit, s), rating) in test.user_cells(u) {
        let s = items[s];
        match groups.last_mut() {
            Some(g) if g.situation == sit => g.items.push((s, rating.value())),
            _ => {
                let situation = test.schema().decode(sit).expect("stored situations are valid");
                let row = system.route(user, &situation)?;
                groups.push(TestGroup {
                    situation: sit,
                    row,
                    items: vec![(s, rating.value())],
                });
            }
        }
    }
    Some(groups)
}

enum UnitOutcome {
    Scored(UnitResult),
    EmptyRelevant,
    NoCandidates,
}

fn score_unit<S: TopNSystem + ?Sized>(system: &S, group: &TestGroup, cfg: &EvalConfig) -> Result<UnitOutcome> {
    let relevant: BTreeSet<usize> = group
        .items
        .iter()
        .filter(|(_, r)| *r >= cfg.relevance_threshold)
        .map(|(s, _)| *s)
        .collect();
    if relevant.is_empty() {
        return Ok(UnitOutcome::EmptyRelevant);
    }
    let ranking = system.ranking(group.row, cfg.max_n())?;
    if ranking.is_empty() {
        return Ok(UnitOutcome::NoCandidates);
    }
    let metrics = cfg
        .top_ns
        .iter()
        .map(|&n| {
            let recommended = &ranking[..n.min(ranking.len())];
            let hits = recommended.iter().filter(|s| relevant.contains(s)).count();
            TopNMetrics {
                n,
                hits,
                recommended: recommended.len(),
                precision: hits as f64 / recommended.len() as f64,
                recall: hits as f64 / relevant.len() as f64,
                f1: f1_from_counts(hits, recommended.len(), relevant.len()),
            }
        })
        .collect();
    let (user, label) = system.row_owner(group.row);
    Ok(UnitOutcome::Scored(UnitResult {
        user: user.to_string(),
        situation: group.situation,
        label,
        neuron: system.cluster_model().neuron_of(group.row),
        relevant: relevant.len(),
        metrics,
    }))
}

/// Users to evaluate: up to `sample_users` of those with test ratings,
/// drawn without replacement and returned in id order.
pub fn sample_users(test: &RatingCube, cfg: &EvalConfig) -> Vec<usize> {
    let mut available: Vec<usize> = (0..test.users().len())
        .filter(|&u| test.user_cells(u).next().is_some())
        .collect();
    if available.len() > cfg.sample_users {
        XorShiftRng::new(cfg.seed).shuffle(&mut available);
        available.truncate(cfg.sample_users);
        available.sort_unstable();
    }
    available
}

/// Mean precision, recall and F1 per top-N, plus per-cluster F1@5.
///
/// The unit of evaluation is a sampled user in one test situation: its
/// relevant set is the user's test items rated at or above the threshold in
/// that situation, and the system answers with the list it would serve in
/// that context. Units without relevant items or without candidates are
/// skipped and counted.
pub fn evaluate<S: TopNSystem + ?Sized>(
    system: &S,
    train: &RatingCube,
    test: &RatingCube,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    system.check_trained_on(train)?;
    let sampled = sample_users(test, cfg);
    let items = item_map(train, test);

    let per_user: Vec<Option<Vec<UnitOutcome>>> = sampled
        .par_iter()
        .map(|&u| {
            group_user_tests(system, test, &items, u)
                .map(|groups| {
                    groups
                        .iter()
                        .map(|g| score_unit(system, g, cfg))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()
        })
        .collect::<Result<_>>()?;

    let mut report = EvalReport {
        system: system.name().to_string(),
        sampled_users: sampled.len(),
        evaluated_units: 0,
        skipped_no_model: 0,
        skipped_empty_relevant: 0,
        skipped_no_candidates: 0,
        per_n: BTreeMap::new(),
        per_cluster: BTreeMap::new(),
        units: Vec::new(),
    };
    for outcomes in per_user {
        let Some(outcomes) = outcomes else {
            report.skipped_no_model += 1;
            continue;
        };
        for outcome in outcomes {
            match outcome {
                UnitOutcome::Scored(unit) => report.units.push(unit),
                UnitOutcome::EmptyRelevant => report.skipped_empty_relevant += 1,
                UnitOutcome::NoCandidates => report.skipped_no_candidates += 1,
            }
        }
    }
    report.evaluated_units = report.units.len();
    if !report.units.is_empty() {
        let count = report.units.len() as f64;
        for (k, &n) in cfg.top_ns.iter().enumerate() {
            let (mut f, mut p, mut r) = (0.0, 0.0, 0.0);
            for unit in &report.units {
                f += unit.metrics[k].f1;
                p += unit.metrics[k].precision;
                r += unit.metrics[k].recall;
            }
            report.per_n.insert(
                n,
                TopNSummary {
                    mean_f1: f / count,
                    mean_precision: p / count,
                    mean_recall: r / count,
                    units: report.units.len(),
                },
            );
        }
    }
    report.per_cluster = per_cluster_f1(system, train, test, cfg)?;
    Ok(report)
}

pub const CLUSTER_SAMPLE: usize = 10;
pub const CLUSTER_TOP_N: usize = 5;

/// Mean F1@5 over up to 10 members of each occupied neuron.
///
/// A member's score is its mean F1@5 over the test situations routed to it.
/// Members with no scorable situation are not eligible; neurons without an
/// eligible member are absent.
pub fn per_cluster_f1<S: TopNSystem + ?Sized>(
    system: &S,
    train: &RatingCube,
    test: &RatingCube,
    cfg: &EvalConfig,
) -> Result<BTreeMap<usize, ClusterSummary>> {
    system.check_trained_on(train)?;
    let five = EvalConfig {
        top_ns: vec![CLUSTER_TOP_N],
        ..cfg.clone()
    };
    let items = item_map(train, test);
    let mut member_f1: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for u in 0..test.users().len() {
        for group in group_user_tests(system, test, &items, u).unwrap_or_default() {
            if let UnitOutcome::Scored(unit) = score_unit(system, &group, &five)? {
                member_f1.entry(group.row).or_default().push(unit.metrics[0].f1);
            }
        }
    }
    let mut rng = XorShiftRng::new(cfg.seed ^ 0x005E_EDC1);
    let mut out = BTreeMap::new();
    for (neuron, members) in system.cluster_model().clusters() {
        let mut eligible: Vec<usize> = members.iter().copied().filter(|row| member_f1.contains_key(row)).collect();
        if eligible.is_empty() {
            continue;
        }
        rng.shuffle(&mut eligible);
        eligible.truncate(CLUSTER_SAMPLE);
        eligible.sort_unstable();
        let eligible: Vec<f64> = eligible
            .iter()
            .map(|row| {
                let scores = &member_f1[row];
                scores.iter().sum::<f64>() / scores.len() as f64
            })
            .collect();
        let mean = eligible.iter().sum::<f64>() / eligible.len() as f64;
        out.insert(
            neuron,
            ClusterSummary {
                mean_f1: mean,
                users: eligible.len(),
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepRole {
    Phase1,
    Phase3,
    Baseline,
}

impl SweepRole {
    /// The neuron range searched for each network.
    pub fn default_range(self) -> RangeInclusive<usize> {
        match self {
            SweepRole::Phase1 => 2..=15,
            SweepRole::Phase3 | SweepRole::Baseline => 5..=35,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub neurons: usize,
    pub mean_f1_at_10: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub role: SweepRole,
    pub best_neurons: usize,
    pub curve: Vec<SweepPoint>,
}

pub const SWEEP_TOP_N: usize = 10;

/// Trains once per neuron count and keeps the count with the highest mean
/// F1@10 on `validation` (smaller count on ties; missing scores count as 0).
pub fn neuron_sweep(
    train: &RatingCube,
    validation: &RatingCube,
    range: RangeInclusive<usize>,
    role: SweepRole,
    pipeline: &PipelineConfig,
    baseline: &SomConfig,
    eval: &EvalConfig,
) -> Result<SweepResult> {
    if range.is_empty() || *range.start() == 0 {
        return Err(Error::InvalidConfig(format!("invalid neuron range {range:?}")));
    }
    let cfg = EvalConfig {
        top_ns: vec![SWEEP_TOP_N],
        ..eval.clone()
    };
    let mut curve = Vec::new();
    for neurons in range {
        let report = match role {
            SweepRole::Phase1 | SweepRole::Phase3 => {
                let mut p = pipeline.clone();
                if role == SweepRole::Phase1 {
                    p.phase1 = p.phase1.with_neurons(neurons);
                } else {
                    p.phase3 = p.phase3.with_neurons(neurons);
                }
                evaluate(&PipelineModel::train(train, &p)?, train, validation, &cfg)?
            }
            SweepRole::Baseline => {
                let b = baseline.clone().with_neurons(neurons);
                evaluate(&BaselineModel::train(train, &b)?, train, validation, &cfg)?
            }
        };
        curve.push(SweepPoint {
            neurons,
            mean_f1_at_10: report.mean_f1(SWEEP_TOP_N),
        });
    }
    Ok(SweepResult {
        role,
        best_neurons: best_of(&curve),
        curve,
    })
}

fn best_of(curve: &[SweepPoint]) -> usize {
    let mut best = &curve[0];
    for p in &curve[1..] {
        if p.mean_f1_at_10.unwrap_or(0.0) > best.mean_f1_at_10.unwrap_or(0.0) {
            best = p;
        }
    }
    best.neurons
}
