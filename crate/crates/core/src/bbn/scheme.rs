use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Phase, PhaseRecord, SizeCategory};
use crate::error::{Error, Result};
use crate::metrics::prep_ratio_pct;

/// Inspection parameters modelled as children of the DI node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamNode {
    NumInspectors,
    /// Inspection hours as a percentage of phase hours.
    InspectionTimePct,
    /// Preparation hours as a percentage of inspection hours.
    PrepTimeRatio,
    /// Inspector experience in years.
    Experience,
    /// Declared ordinal skill (1 = low, 2 = moderate, 3 = high); never
    /// present in project records.
    Skill,
}

impl ParamNode {
    pub const ALL: [ParamNode; 5] = [
        ParamNode::NumInspectors,
        ParamNode::InspectionTimePct,
        ParamNode::PrepTimeRatio,
        ParamNode::Experience,
        ParamNode::Skill,
    ];

    pub fn key(self) -> &'static str {
        match self {
            ParamNode::NumInspectors => "num_inspectors",
            ParamNode::InspectionTimePct => "inspection_time_pct",
            ParamNode::PrepTimeRatio => "prep_time_ratio",
            ParamNode::Experience => "experience",
            ParamNode::Skill => "skill",
        }
    }

    /// The node's value for a phase record, if the record carries one.
    pub fn observe(self, pr: &PhaseRecord) -> Option<f64> {
        match self {
            ParamNode::NumInspectors => Some(f64::from(pr.num_inspectors)),
            ParamNode::InspectionTimePct => {
                (pr.phase_hours > 0.0).then(|| 100.0 * pr.inspection_hours / pr.phase_hours)
            }
            ParamNode::PrepTimeRatio => prep_ratio_pct(pr),
            ParamNode::Experience => Some(pr.experience_years),
            ParamNode::Skill => None,
        }
    }
}

impl fmt::Display for ParamNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for ParamNode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        ParamNode::ALL
            .into_iter()
            .find(|n| n.key() == s)
            .or(match s.as_str() {
                "n" | "inspectors" => Some(ParamNode::NumInspectors),
                "inspection_time" => Some(ParamNode::InspectionTimePct),
                "prep_time" | "prep_ratio" => Some(ParamNode::PrepTimeRatio),
                "experience_level" => Some(ParamNode::Experience),
                _ => None,
            })
            .ok_or_else(|| Error::Argument(format!("unknown parameter node `{s}`")))
    }
}

/// Which adjacent level owns a cut point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutOwner {
    Below,
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub at: f64,
    pub owner: CutOwner,
}

impl Cut {
    pub fn below(at: f64) -> Self {
        Cut {
            at,
            owner: CutOwner::Below,
        }
    }

    pub fn above(at: f64) -> Self {
        Cut {
            at,
            owner: CutOwner::Above,
        }
    }
}

/// Ordered levels of one node, separated by cut points.
///
/// `n` labels need `n - 1` cuts. A point level such as "exactly 3" is two
/// cuts at the same value, the first owned by the level above it and the
/// second by the level below. Because the levels are delimited by cuts they
/// always cover the whole real line without overlap; construction rejects
/// cut sequences that would leave a level empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLevels")]
pub struct NodeLevels {
    labels: Vec<String>,
    cuts: Vec<Cut>,
}

#[derive(Deserialize)]
struct RawLevels {
    labels: Vec<String>,
    cuts: Vec<Cut>,
}

impl TryFrom<RawLevels> for NodeLevels {
    type Error = Error;

    fn try_from(raw: RawLevels) -> Result<Self> {
        NodeLevels::new(raw.labels, raw.cuts)
    }
}

impl NodeLevels {
    pub fn new(labels: Vec<String>, cuts: Vec<Cut>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Configuration("a node needs at least one level".into()));
        }
        if labels.len() != cuts.len() + 1 {
            return Err(Error::Configuration(format!(
                "{} levels need {} cuts, got {}",
                labels.len(),
                labels.len() - 1,
                cuts.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.trim().is_empty() {
                return Err(Error::Configuration("level labels must not be empty".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::Configuration(format!("duplicate level label `{l}`")));
            }
        }
        if let Some(c) = cuts.iter().find(|c| !c.at.is_finite()) {
            return Err(Error::Configuration(format!("cut at {} is not finite", c.at)));
        }
        for (i, w) in cuts.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let ok = a.at < b.at
                || (a.at == b.at && a.owner == CutOwner::Above && b.owner == CutOwner::Below);
            if !ok {
                return Err(Error::Configuration(format!(
                    "level `{}` would be empty",
                    labels[i + 1]
                )));
            }
        }
        Ok(NodeLevels { labels, cuts })
    }

    /// Low/Moderate/High levels with the given two cuts.
    pub fn lmh(low_to_mid: Cut, mid_to_high: Cut) -> Self {
        NodeLevels::new(
            vec!["L".into(), "M".into(), "H".into()],
            vec![low_to_mid, mid_to_high],
        )
        .expect("valid L/M/H cuts")
    }

    /// Low below `value`, Moderate exactly at it, High above.
    pub fn around(value: f64) -> Self {
        NodeLevels::lmh(Cut::above(value), Cut::below(value))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Index of the level containing `value`.
    pub fn level_of(&self, value: f64) -> usize {
        self.cuts
            .iter()
            .filter(|c| value > c.at || (value == c.at && c.owner == CutOwner::Above))
            .count()
    }

    pub fn label_of(&self, value: f64) -> &str {
        &self.labels[self.level_of(value)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOverride {
    pub phase: Phase,
    pub size: SizeCategory,
    pub node: ParamNode,
    pub levels: NodeLevels,
}

/// Discretization for every node, with optional (phase, size) overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelScheme {
    pub defaults: BTreeMap<ParamNode, NodeLevels>,
    #[serde(default)]
    pub overrides: Vec<LevelOverride>,
}

impl Default for LevelScheme {
    /// Inspector-count levels follow the recommended team sizes for each
    /// slice; time shares use the 10-15% inspection band and the 10-20%
    /// preparation band; experience reuses the novice/average/large split.
    fn default() -> Self {
        let mut defaults = BTreeMap::new();
        defaults.insert(ParamNode::NumInspectors, NodeLevels::around(3.0));
        defaults.insert(
            ParamNode::InspectionTimePct,
            NodeLevels::lmh(Cut::above(10.0), Cut::below(15.0)),
        );
        defaults.insert(
            ParamNode::PrepTimeRatio,
            NodeLevels::lmh(Cut::above(10.0), Cut::below(20.0)),
        );
        defaults.insert(
            ParamNode::Experience,
            NodeLevels::lmh(Cut::below(2.0), Cut::below(4.0)),
        );
        defaults.insert(
            ParamNode::Skill,
            NodeLevels::lmh(Cut::below(1.5), Cut::below(2.5)),
        );

        let mut overrides = vec![LevelOverride {
            phase: Phase::Design,
            size: SizeCategory::Small,
            node: ParamNode::NumInspectors,
            levels: NodeLevels::around(4.0),
        }];
        for phase in Phase::ALL {
            overrides.push(LevelOverride {
                phase,
                size: SizeCategory::Medium,
                node: ParamNode::NumInspectors,
                levels: NodeLevels::lmh(Cut::above(3.0), Cut::below(5.0)),
            });
            overrides.push(LevelOverride {
                phase,
                size: SizeCategory::Large,
                node: ParamNode::NumInspectors,
                levels: NodeLevels::around(4.0),
            });
        }
        LevelScheme {
            defaults,
            overrides,
        }
    }
}

impl LevelScheme {
    /// Checks rules that the per-node constructor cannot see.
    pub fn validate(&self) -> Result<()> {
        let inspector_levels = self
            .defaults
            .get(&ParamNode::NumInspectors)
            .into_iter()
            .chain(
                self.overrides
                    .iter()
                    .filter(|o| o.node == ParamNode::NumInspectors)
                    .map(|o| &o.levels),
            );
        for levels in inspector_levels {
            for needed in ["L", "M", "H"] {
                if levels.index_of(needed).is_none() {
                    return Err(Error::Configuration(format!(
                        "num_inspectors levels must include `{needed}`"
                    )));
                }
            }
        }
        for (i, o) in self.overrides.iter().enumerate() {
            if self.overrides[..i]
                .iter()
                .any(|p| p.phase == o.phase && p.size == o.size && p.node == o.node)
            {
                return Err(Error::Configuration(format!(
                    "duplicate override for {} at {}/{}",
                    o.node, o.phase, o.size
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, node: ParamNode, phase: Phase, size: SizeCategory) -> Result<&NodeLevels> {
        self.overrides
            .iter()
            .find(|o| o.node == node && o.phase == phase && o.size == size)
            .map(|o| &o.levels)
            .or_else(|| self.defaults.get(&node))
            .ok_or_else(|| {
                Error::Configuration(format!(
                    "no levels for {node} at {phase}/{size} and no default"
                ))
            })
    }

    pub fn discretize(
        &self,
        node: ParamNode,
        value: f64,
        phase: Phase,
        size: SizeCategory,
    ) -> Result<&str> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::Argument(format!(
                "{node} value must be a non-negative number, got {value}"
            )));
        }
        Ok(self.resolve(node, phase, size)?.label_of(value))
    }
}

/// The level label of `value` for `node` in the (phase, size) slice.
pub fn discretize(
    node: ParamNode,
    value: f64,
    phase: Phase,
    size: SizeCategory,
    scheme: &LevelScheme,
) -> Result<String> {
    scheme.discretize(node, value, phase, size).map(str::to_string)
}
