use std::collections::BTreeMap;
use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::scheme::{LevelScheme, NodeLevels, ParamNode};
use crate::dataset::{Phase, PhaseRecord, ProjectDataset, ProjectRecord, SizeCategory};
use crate::error::{Error, Result};
use crate::metrics::{classify_di, depth_of_inspection, DiLevel};

/// Tolerance on "sums to one" checks.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A probability for each DI level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiDistribution {
    pub poor: f64,
    pub moderate: f64,
    pub desirable: f64,
    pub excellent: f64,
}

impl DiDistribution {
    pub fn from_array(p: [f64; 4]) -> Self {
        DiDistribution {
            poor: p[0],
            moderate: p[1],
            desirable: p[2],
            excellent: p[3],
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.poor, self.moderate, self.desirable, self.excellent]
    }

    pub fn get(&self, level: DiLevel) -> f64 {
        self.to_array()[level.index()]
    }

    pub fn mass(&self, levels: &[DiLevel]) -> f64 {
        levels.iter().map(|&l| self.get(l)).sum()
    }

    fn check(&self, what: &str) -> Result<()> {
        check_distribution(&self.to_array(), what)
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Configuration(format!(
            "{what}: probabilities must lie in [0, 1]"
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Configuration(format!("{what}: sums to {sum}, not 1")));
    }
    Ok(())
}

/// P(level | DI level) for one DI level, with the counts it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CptRow {
    pub di_level: DiLevel,
    pub probs: Vec<f64>,
    /// Data counts per level; all zero for purely expert-supplied rows.
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeCpt {
    pub node: ParamNode,
    pub levels: NodeLevels,
    /// One row per DI level, ordered Poor..Excellent.
    pub rows: Vec<CptRow>,
}

impl NodeCpt {
    pub fn prob(&self, level: &str, di: DiLevel) -> Option<f64> {
        let i = self.levels.index_of(level)?;
        Some(self.rows[di.index()].probs[i])
    }

    fn check(&self) -> Result<()> {
        if self.rows.len() != 4
            || self
                .rows
                .iter()
                .zip(DiLevel::ALL)
                .any(|(r, d)| r.di_level != d)
        {
            return Err(Error::Configuration(format!(
                "{}: expected one row per DI level in order poor..excellent",
                self.node
            )));
        }
        for row in &self.rows {
            if row.probs.len() != self.levels.len() || row.counts.len() != self.levels.len() {
                return Err(Error::Configuration(format!(
                    "{}: row width does not match its {} levels",
                    self.node,
                    self.levels.len()
                )));
            }
            check_distribution(&row.probs, &format!("{} | {}", self.node, row.di_level))?;
        }
        Ok(())
    }
}

/// DI as parent, each parameter node a conditionally independent child.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel")]
pub struct CptModel {
    pub phase: Phase,
    pub size: SizeCategory,
    pub smoothing: f64,
    pub sample_size: u32,
    /// Weight of expert input folded in by [`merge_expert`]; zero for a
    /// model estimated purely from data.
    pub expert_weight: f64,
    pub prior: DiDistribution,
    pub prior_counts: [u32; 4],
    pub nodes: Vec<NodeCpt>,
}

#[derive(Deserialize)]
struct RawModel {
    phase: Phase,
    size: SizeCategory,
    smoothing: f64,
    sample_size: u32,
    expert_weight: f64,
    prior: DiDistribution,
    prior_counts: [u32; 4],
    nodes: Vec<NodeCpt>,
}

impl TryFrom<RawModel> for CptModel {
    type Error = Error;

    fn try_from(r: RawModel) -> Result<Self> {
        let model = CptModel {
            phase: r.phase,
            size: r.size,
            smoothing: r.smoothing,
            sample_size: r.sample_size,
            expert_weight: r.expert_weight,
            prior: r.prior,
            prior_counts: r.prior_counts,
            nodes: r.nodes,
        };
        model.check()?;
        Ok(model)
    }
}

impl CptModel {
    /// An expert-specified model with no data behind it.
    pub fn from_expert(
        phase: Phase,
        size: SizeCategory,
        prior: DiDistribution,
        tables: Vec<(ParamNode, NodeLevels, [Vec<f64>; 4])>,
    ) -> Result<Self> {
        let nodes = tables
            .into_iter()
            .map(|(node, levels, rows)| NodeCpt {
                node,
                rows: DiLevel::ALL
                    .into_iter()
                    .zip(rows)
                    .map(|(di_level, probs)| CptRow {
                        di_level,
                        counts: vec![0; probs.len()],
                        probs,
                    })
                    .collect(),
                levels,
            })
            .collect();
        let model = CptModel {
            phase,
            size,
            smoothing: 0.0,
            sample_size: 0,
            expert_weight: 1.0,
            prior,
            prior_counts: [0; 4],
            nodes,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<()> {
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(Error::Configuration("smoothing must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.expert_weight) {
            return Err(Error::Configuration("expert weight must lie in [0, 1]".into()));
        }
        self.prior.check("prior")?;
        for (i, n) in self.nodes.iter().enumerate() {
            if self.nodes[..i].iter().any(|m| m.node == n.node) {
                return Err(Error::Configuration(format!("duplicate node {}", n.node)));
            }
            n.check()?;
        }
        Ok(())
    }

    pub fn node(&self, node: ParamNode) -> Option<&NodeCpt> {
        self.nodes.iter().find(|n| n.node == node)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    /// P(DI | evidence) under the naive-Bayes factorisation. Empty evidence
    /// returns the prior.
    pub fn posterior(&self, evidence: &Evidence) -> Result<DiDistribution> {
        let mut factors = Vec::with_capacity(evidence.len());
        for (node, label) in evidence.iter() {
            let cpt = self.node(node).ok_or_else(|| {
                Error::Argument(format!("model has no node {node}"))
            })?;
            let idx = cpt.levels.index_of(label).ok_or_else(|| {
                Error::Argument(format!(
                    "{node} has no level `{label}` (levels: {})",
                    cpt.levels.labels().join(", ")
                ))
            })?;
            factors.push((cpt, idx));
        }
        let mut unnorm = self.prior.to_array();
        for (d, p) in unnorm.iter_mut().enumerate() {
            for (cpt, idx) in &factors {
                *p *= cpt.rows[d].probs[*idx];
            }
        }
        let total: f64 = unnorm.iter().sum();
        if total <= 0.0 {
            return Err(Error::ImpossibleEvidence);
        }
        Ok(DiDistribution::from_array(unnorm.map(|p| p / total)))
    }

    /// Every combination of levels over `nodes`, in scheme order.
    pub fn grid(&self, nodes: &[ParamNode]) -> Result<Vec<Evidence>> {
        let mut grid = vec![Evidence::default()];
        for &node in nodes {
            let cpt = self
                .node(node)
                .ok_or_else(|| Error::Argument(format!("model has no node {node}")))?;
            grid = grid
                .into_iter()
                .flat_map(|e| {
                    cpt.levels
                        .labels()
                        .iter()
                        .map(move |l| e.clone().with(node, l.clone()))
                })
                .collect();
        }
        Ok(grid)
    }
}

/// Observed levels for some of the parameter nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Evidence(BTreeMap<ParamNode, String>);

impl Evidence {
    pub fn new() -> Self {
        Evidence::default()
    }

    pub fn with(mut self, node: ParamNode, level: impl Into<String>) -> Self {
        self.0.insert(node, level.into());
        self
    }

    pub fn get(&self, node: ParamNode) -> Option<&str> {
        self.0.get(&node).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamNode, &str)> {
        self.0.iter().map(|(n, l)| (*n, l.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses `node=level,node=level`. A node may appear only once.
    pub fn parse(s: &str) -> Result<Self> {
        let mut ev = Evidence::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("evidence `{part}` is not node=level")))?;
            let node: ParamNode = k.parse()?;
            if ev.0.insert(node, v.trim().to_string()).is_some() {
                return Err(Error::Argument(format!("{node} given more than once")));
            }
        }
        Ok(ev)
    }
}

impl std::fmt::Display for Evidence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return f.write_str("(none)");
        }
        let parts: Vec<String> = self.iter().map(|(n, l)| format!("{n}={l}")).collect();
        f.write_str(&parts.join(","))
    }
}

struct SliceRow<'a> {
    record: &'a PhaseRecord,
    di: DiLevel,
}

fn slice<'a>(ds: &'a ProjectDataset, phase: Phase, size: SizeCategory) -> Result<Vec<SliceRow<'a>>> {
    let rows = ds
        .slice(size)
        .map(|p: &ProjectRecord| {
            let record = p.phase(phase);
            let di = depth_of_inspection(u64::from(record.ni), record.captured_total())
                .and_then(classify_di)
                .map_err(|e| match e {
                    Error::UndefinedMetric(m) => {
                        Error::UndefinedMetric(format!("{}/{}: {m}", p.id, phase))
                    }
                    other => other,
                })?;
            Ok(SliceRow { record, di })
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no {size} projects to estimate {phase} tables from"
        )));
    }
    Ok(rows)
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if smoothing.is_finite() && smoothing >= 0.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "smoothing must be a non-negative number, got {smoothing}"
        )))
    }
}

/// Estimates the prior over DI levels and every node's CPT from the
/// projects of one size in one phase, with additive smoothing. A DI level
/// with no observations and no smoothing gets a uniform row, which carries
/// no weight because its prior is zero.
pub fn build_model(
    ds: &ProjectDataset,
    phase: Phase,
    size: SizeCategory,
    scheme: &LevelScheme,
    smoothing: f64,
) -> Result<CptModel> {
    check_smoothing(smoothing)?;
    scheme.validate()?;
    let rows = slice(ds, phase, size)?;
    let n = rows.len() as u32;

    let mut prior_counts = [0u32; 4];
    for r in &rows {
        prior_counts[r.di.index()] += 1;
    }
    let prior_den = f64::from(n) + 4.0 * smoothing;
    let prior =
        DiDistribution::from_array(prior_counts.map(|c| (f64::from(c) + smoothing) / prior_den));

    let mut nodes = Vec::with_capacity(ParamNode::ALL.len());
    for node in ParamNode::ALL {
        let levels = scheme.resolve(node, phase, size)?.clone();
        let mut counts = vec![vec![0u32; levels.len()]; 4];
        for r in &rows {
            if let Some(v) = node.observe(r.record) {
                let label = scheme.discretize(node, v, phase, size)?;
                let idx = levels.index_of(label).expect("label from the same levels");
                counts[r.di.index()][idx] += 1;
            }
        }
        let k = levels.len() as f64;
        let cpt_rows = DiLevel::ALL
            .into_iter()
            .zip(counts)
            .map(|(di_level, counts)| {
                let total: u32 = counts.iter().sum();
                let den = f64::from(total) + k * smoothing;
                let probs = if den > 0.0 {
                    counts
                        .iter()
                        .map(|&c| (f64::from(c) + smoothing) / den)
                        .collect()
                } else {
                    vec![1.0 / k; counts.len()]
                };
                CptRow {
                    di_level,
                    probs,
                    counts,
                }
            })
            .collect();
        nodes.push(NodeCpt {
            node,
            levels,
            rows: cpt_rows,
        });
    }

    Ok(CptModel {
        phase,
        size,
        smoothing,
        sample_size: n,
        expert_weight: 0.0,
        prior,
        prior_counts,
        nodes,
    })
}

/// count(node at `level` and DI at `di_level`) divided by the slice size.
///
/// This is a joint relative frequency, not a conditional probability; the
/// matching conditional is available from [`build_model`]. Over all
/// (level, DI level) pairs it sums to the share of projects where the node
/// is observed.
#[allow(clippy::too_many_arguments)]
pub fn joint_frequency(
    ds: &ProjectDataset,
    phase: Phase,
    size: SizeCategory,
    scheme: &LevelScheme,
    node: ParamNode,
    level: &str,
    di_level: DiLevel,
) -> Result<f64> {
    let rows = slice(ds, phase, size)?;
    let levels = scheme.resolve(node, phase, size)?;
    if levels.index_of(level).is_none() {
        return Err(Error::Argument(format!("{node} has no level `{level}`")));
    }
    let mut hits = 0usize;
    for r in &rows {
        if r.di != di_level {
            continue;
        }
        if let Some(v) = node.observe(r.record) {
            if scheme.discretize(node, v, phase, size)? == level {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / rows.len() as f64)
}

/// Cell-wise `weight * expert + (1 - weight) * data`, renormalised.
pub fn merge_expert(model: &CptModel, expert: &CptModel, weight: f64) -> Result<CptModel> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::Argument(format!("weight must lie in [0, 1], got {weight}")));
    }
    if model.nodes.len() != expert.nodes.len()
        || model
            .nodes
            .iter()
            .zip(&expert.nodes)
            .any(|(a, b)| a.node != b.node || a.levels != b.levels)
    {
        return Err(Error::Configuration(
            "expert model uses a different level scheme".into(),
        ));
    }
    let blend = |d: &[f64], e: &[f64]| -> Vec<f64> {
        let mixed: Vec<f64> = d
            .iter()
            .zip(e)
            .map(|(d, e)| weight * e + (1.0 - weight) * d)
            .collect();
        let sum: f64 = mixed.iter().sum();
        mixed.into_iter().map(|p| p / sum).collect()
    };
    let prior = blend(&model.prior.to_array(), &expert.prior.to_array());
    let nodes = model
        .nodes
        .iter()
        .zip(&expert.nodes)
        .map(|(d, e)| NodeCpt {
            node: d.node,
            levels: d.levels.clone(),
            rows: d
                .rows
                .iter()
                .zip(&e.rows)
                .map(|(dr, er)| CptRow {
                    di_level: dr.di_level,
                    probs: blend(&dr.probs, &er.probs),
                    counts: dr.counts.clone(),
                })
                .collect(),
        })
        .collect();
    let merged = CptModel {
        phase: model.phase,
        size: model.size,
        smoothing: model.smoothing,
        sample_size: model.sample_size,
        expert_weight: weight,
        prior: DiDistribution::from_array([prior[0], prior[1], prior[2], prior[3]]),
        prior_counts: model.prior_counts,
        nodes,
    };
    merged.check()?;
    Ok(merged)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub evidence: Evidence,
    /// Posterior mass on the target levels; `None` for impossible evidence.
    pub mass: Option<f64>,
    pub posterior: Option<DiDistribution>,
    pub impossible: bool,
    #[serde(skip)]
    cost: (Option<usize>, Option<usize>),
}

impl Recommendation {
    /// Builds a candidate directly, e.g. to re-rank stored results.
    /// Cost fields are level indices of inspectors and inspection time.
    pub fn new(evidence: Evidence, mass: Option<f64>, cost: (Option<usize>, Option<usize>)) -> Self {
        Recommendation {
            evidence,
            impossible: mass.is_none(),
            mass,
            posterior: None,
            cost,
        }
    }
}

/// Stable ordering: highest mass first, then fewer inspectors, then less
/// inspection time. Unspecified cost fields sort before specified ones.
/// Impossible candidates go last in input order.
pub fn sort_recommendations(recs: &mut [Recommendation]) {
    recs.sort_by(|a, b| match (a.mass, b.mass) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.cost.cmp(&b.cost)),
    });
}

/// Scores each candidate by posterior mass on `target` and ranks them.
pub fn recommend(
    model: &CptModel,
    target: &[DiLevel],
    candidates: &[Evidence],
) -> Result<Vec<Recommendation>> {
    if candidates.is_empty() {
        return Err(Error::Argument("candidate grid is empty".into()));
    }
    if target.is_empty() {
        return Err(Error::Argument("target DI level set is empty".into()));
    }
    let level_index = |node: ParamNode, ev: &Evidence| {
        let label = ev.get(node)?;
        model.node(node)?.levels.index_of(label)
    };
    let mut recs = Vec::with_capacity(candidates.len());
    for ev in candidates {
        let cost = (
            level_index(ParamNode::NumInspectors, ev),
            level_index(ParamNode::InspectionTimePct, ev),
        );
        let rec = match model.posterior(ev) {
            Ok(post) => Recommendation {
                evidence: ev.clone(),
                mass: Some(post.mass(target)),
                posterior: Some(post),
                impossible: false,
                cost,
            },
            Err(Error::ImpossibleEvidence) => Recommendation {
                evidence: ev.clone(),
                mass: None,
                posterior: None,
                impossible: true,
                cost,
            },
            Err(e) => return Err(e),
        };
        recs.push(rec);
    }
    sort_recommendations(&mut recs);
    Ok(recs)
}
