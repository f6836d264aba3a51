//! Few-mode transmission model: mode groups, transmission scenarios, the
//! reach table and normalized MIMO complexity.
//!
//! MIMO cost is the equalizer count of the receiver DSP normalized to a 2x2
//! single-mode receiver. Detecting `k` modes jointly needs a `2k x 2k`
//! equalizer matrix, so the normalized cost is `(2k)^2 / 4 = k^2`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REACH_CSV: &str = include_str!("../data/default_reach.csv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModeGroup {
    A,
    B,
    C,
    D,
    E,
}

impl ModeGroup {
    pub const ALL: [ModeGroup; 5] = [ModeGroup::A, ModeGroup::B, ModeGroup::C, ModeGroup::D, ModeGroup::E];

    pub fn mode_count(self) -> u32 {
        match self {
            ModeGroup::A => 1,
            ModeGroup::B => 2,
            ModeGroup::C => 3,
            ModeGroup::D => 4,
            ModeGroup::E => 5,
        }
    }

    pub fn label(self) -> char {
        (b'A' + self as u8) as char
    }
}

/// Total number of modes across groups A..E.
pub const TOTAL_MODES: u32 = 15;

/// The unit a scenario allocates and detects: a single-mode channel, one
/// mode group, or all groups jointly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupSelector {
    Single,
    Group(ModeGroup),
    Joint,
}

impl fmt::Display for GroupSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupSelector::Single => f.write_str("single"),
            GroupSelector::Group(g) => write!(f, "{}", g.label()),
            GroupSelector::Joint => f.write_str("joint"),
        }
    }
}

impl FromStr for GroupSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "single" => Ok(GroupSelector::Single),
            "joint" => Ok(GroupSelector::Joint),
            "A" | "a" => Ok(GroupSelector::Group(ModeGroup::A)),
            "B" | "b" => Ok(GroupSelector::Group(ModeGroup::B)),
            "C" | "c" => Ok(GroupSelector::Group(ModeGroup::C)),
            "D" | "d" => Ok(GroupSelector::Group(ModeGroup::D)),
            "E" | "e" => Ok(GroupSelector::Group(ModeGroup::E)),
            other => Err(Error::Parse(format!("unknown group selector `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Smt,
    Mgdm,
    MfMgdm,
    FullMimo,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [
        ScenarioKind::Smt,
        ScenarioKind::Mgdm,
        ScenarioKind::MfMgdm,
        ScenarioKind::FullMimo,
    ];

    pub fn selectors(self) -> Vec<GroupSelector> {
        match self {
            ScenarioKind::Smt => vec![GroupSelector::Single],
            ScenarioKind::Mgdm | ScenarioKind::MfMgdm => {
                ModeGroup::ALL.iter().map(|&g| GroupSelector::Group(g)).collect()
            }
            ScenarioKind::FullMimo => vec![GroupSelector::Joint],
        }
    }

    pub fn has_selector(self, sel: GroupSelector) -> bool {
        matches!(
            (self, sel),
            (ScenarioKind::Smt, GroupSelector::Single)
                | (ScenarioKind::Mgdm | ScenarioKind::MfMgdm, GroupSelector::Group(_))
                | (ScenarioKind::FullMimo, GroupSelector::Joint)
        )
    }

    /// Modes that actually carry data in `sel`.
    pub fn usable_modes(self, sel: GroupSelector) -> Option<u32> {
        if !self.has_selector(sel) {
            return None;
        }
        Some(match (self, sel) {
            (ScenarioKind::Mgdm, GroupSelector::Group(g)) => g.mode_count(),
            (ScenarioKind::FullMimo, _) => TOTAL_MODES,
            _ => 1,
        })
    }

    pub fn joint_detection(self) -> bool {
        self == ScenarioKind::FullMimo
    }

    /// Normalized receiver cost for one detection unit of `sel`.
    pub fn detection_cost(self, sel: GroupSelector) -> Option<MimoCost> {
        self.usable_modes(sel)
            .map(|k| mimo_complexity(k).expect("usable modes are at least one"))
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioKind::Smt => "smt",
            ScenarioKind::Mgdm => "mgdm",
            ScenarioKind::MfMgdm => "mf-mgdm",
            ScenarioKind::FullMimo => "full-mimo",
        })
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "smt" => Ok(ScenarioKind::Smt),
            "mgdm" => Ok(ScenarioKind::Mgdm),
            "mf-mgdm" | "mfmgdm" => Ok(ScenarioKind::MfMgdm),
            "full-mimo" | "fullmimo" => Ok(ScenarioKind::FullMimo),
            other => Err(Error::Parse(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Normalized equalizer count. Totally ordered; values are always finite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MimoCost(pub f64);

impl MimoCost {
    pub const ZERO: MimoCost = MimoCost(0.0);

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Eq for MimoCost {}

impl PartialOrd for MimoCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for MimoCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for MimoCost {
    type Output = MimoCost;
    fn add(self, rhs: Self) -> Self {
        MimoCost(self.0 + rhs.0)
    }
}

impl AddAssign for MimoCost {
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl Sub for MimoCost {
    type Output = MimoCost;
    fn sub(self, rhs: Self) -> Self {
        MimoCost(self.0 - rhs.0)
    }
}

impl Sum for MimoCost {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(MimoCost::ZERO, Add::add)
    }
}

impl fmt::Display for MimoCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Normalized MIMO cost of detecting `k` modes jointly.
pub fn mimo_complexity(k: u32) -> Result<MimoCost> {
    if k < 1 {
        return Err(Error::InvalidArgument("mode count must be at least 1".into()));
    }
    let n = 2 * k as u64;
    Ok(MimoCost((n * n) as f64 / 4.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectionUnit {
    pub selector: GroupSelector,
    pub usable_modes: u32,
    pub cost: MimoCost,
}

pub fn scenario_groups(kind: ScenarioKind) -> Vec<DetectionUnit> {
    kind.selectors()
        .into_iter()
        .map(|selector| {
            let usable_modes = kind.usable_modes(selector).expect("selector from scenario");
            DetectionUnit {
                selector,
                usable_modes,
                cost: mimo_complexity(usable_modes).expect("k >= 1"),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReachEntry {
    pub scenario: String,
    pub group: String,
    pub modulation: String,
    pub reach_km: f64,
    pub gbps_per_mode: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModulationChoice {
    pub modulation: String,
    pub gbps_per_mode: f64,
    pub reach_km: f64,
}

/// Validated reach table. Entries per (scenario, selector) are kept sorted
/// by capacity, highest first.
#[derive(Clone, Debug)]
pub struct ReachTable {
    rows: BTreeMap<(ScenarioKind, GroupSelector), Vec<ModulationChoice>>,
}

impl ReachTable {
    pub fn from_entries(entries: &[ReachEntry]) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidReachTable("table is empty".into()));
        }
        let mut rows: BTreeMap<(ScenarioKind, GroupSelector), Vec<ModulationChoice>> =
            BTreeMap::new();
        for e in entries {
            let scenario: ScenarioKind = e.scenario.parse()?;
            let sel: GroupSelector = e.group.parse()?;
            if !scenario.has_selector(sel) {
                return Err(Error::InvalidReachTable(format!(
                    "group {sel} is not available in scenario {scenario}"
                )));
            }
            if !(e.reach_km > 0.0) || !(e.gbps_per_mode > 0.0) {
                return Err(Error::InvalidReachTable(format!(
                    "{scenario}/{sel}/{}: reach and capacity must be positive",
                    e.modulation
                )));
            }
            let row = rows.entry((scenario, sel)).or_default();
            if row.iter().any(|m| m.modulation == e.modulation) {
                return Err(Error::InvalidReachTable(format!(
                    "{scenario}/{sel}: duplicate modulation {}",
                    e.modulation
                )));
            }
            row.push(ModulationChoice {
                modulation: e.modulation.clone(),
                gbps_per_mode: e.gbps_per_mode,
                reach_km: e.reach_km,
            });
        }
        for ((scenario, sel), row) in &mut rows {
            row.sort_by(|a, b| {
                b.gbps_per_mode
                    .total_cmp(&a.gbps_per_mode)
                    .then(a.reach_km.total_cmp(&b.reach_km))
            });
            for pair in row.windows(2) {
                // Higher capacity must not reach further.
                if pair[0].gbps_per_mode > pair[1].gbps_per_mode
                    && pair[0].reach_km > pair[1].reach_km
                {
                    return Err(Error::InvalidReachTable(format!(
                        "{scenario}/{sel}: {} has higher capacity and longer reach than {}",
                        pair[0].modulation, pair[1].modulation
                    )));
                }
            }
        }
        Ok(ReachTable { rows })
    }

    pub fn from_csv_str(s: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(s.as_bytes());
        let entries = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<ReachEntry>, _>>()
            .map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_entries(&entries)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn default_table() -> Self {
        Self::from_csv_str(DEFAULT_REACH_CSV).expect("embedded reach table is valid")
    }

    /// Modulations for one selector, highest capacity first.
    pub fn modulations(&self, scenario: ScenarioKind, sel: GroupSelector) -> &[ModulationChoice] {
        self.rows
            .get(&(scenario, sel))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Longest reach of any modulation of any selector in `scenario`.
    pub fn max_reach_km(&self, scenario: ScenarioKind) -> f64 {
        self.rows
            .iter()
            .filter(|((s, _), _)| *s == scenario)
            .flat_map(|(_, row)| row.iter().map(|m| m.reach_km))
            .fold(0.0, f64::max)
    }

    /// Highest-capacity modulation that reaches `route_length_km`.
    pub fn select_modulation(
        &self,
        scenario: ScenarioKind,
        sel: GroupSelector,
        route_length_km: f64,
    ) -> Option<&ModulationChoice> {
        self.modulations(scenario, sel)
            .iter()
            .find(|m| m.reach_km >= route_length_km)
    }
}

/// Capacity of a set of groups, each paired with its modulation label.
pub fn group_combination_capacity(
    table: &ReachTable,
    scenario: ScenarioKind,
    groups: &[(GroupSelector, &str)],
) -> Result<f64> {
    let mut total = 0.0;
    for &(sel, modulation) in groups {
        let modes = scenario.usable_modes(sel).ok_or_else(|| {
            Error::Infeasible(format!("group {sel} is not available in {scenario}"))
        })?;
        let m = table
            .modulations(scenario, sel)
            .iter()
            .find(|m| m.modulation == modulation)
            .ok_or_else(|| {
                Error::Infeasible(format!("{scenario}/{sel} has no modulation {modulation}"))
            })?;
        total += modes as f64 * m.gbps_per_mode;
    }
    Ok(total)
}
