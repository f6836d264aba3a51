//! Metrics, sweep configuration and the sweep driver.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{ReachTable, ScenarioKind};
use crate::provision::{provision_all, Planner, ProvisionOutcome, Request, Role};
use crate::spp::{Objective, ProtectionMode};
use crate::state::NetworkState;
use crate::topology::{load_topology, Topology};
use crate::traffic::{calibrate_high_load, generate, Calibration, CalibrationParams, TrafficConfig};

pub const CSV_HEADER: &str = "scenario,mode,regime,load,seed,spectrum_per_req,mimo_per_tbps,rejection";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub requests: usize,
    pub accepted: usize,
    pub accepted_tbps: f64,
    pub rejection: f64,
    /// Backup-lit (link, wavelength) pairs per accepted request.
    pub spectrum_per_req: Option<f64>,
    /// Backup MIMO complexity per accepted Tb/s.
    pub mimo_per_tbps: Option<f64>,
    pub backup_lit_pairs: usize,
    pub backup_group_slots: usize,
    pub backup_mimo_total: f64,
    pub backup_receiver_units: usize,
}

pub fn compute_metrics(state: &NetworkState, outcome: &ProvisionOutcome) -> Metrics {
    let requests = outcome.accepted.len() + outcome.rejected.len();
    let accepted = outcome
        .assignments
        .iter()
        .filter(|a| a.role == Role::Backup)
        .count();
    debug_assert_eq!(accepted, outcome.accepted.len());
    let accepted_tbps = outcome.accepted.iter().map(|r| r.rate_gbps as f64).sum::<f64>() / 1000.0;
    let backup_lit_pairs = state.spectrum.backup_lit_pairs();
    let backup_mimo_total = state.mimo.backup_total().value();
    Metrics {
        requests,
        accepted,
        accepted_tbps,
        rejection: outcome.rejection_ratio(),
        spectrum_per_req: (accepted > 0).then(|| backup_lit_pairs as f64 / accepted as f64),
        mimo_per_tbps: (accepted_tbps > 0.0).then(|| backup_mimo_total / accepted_tbps),
        backup_lit_pairs,
        backup_group_slots: state.spectrum.slots().filter(|(_, o)| o.role.is_backup()).count(),
        backup_mimo_total,
        backup_receiver_units: state.mimo.backup_unit_count(),
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub state: NetworkState,
    pub outcome: ProvisionOutcome,
    pub metrics: Metrics,
}

/// Provisions `requests` in order on a fresh network.
pub fn run_instance(planner: &Planner<'_>, wavelengths: usize, requests: &[Request], mode: ProtectionMode) -> RunResult {
    let mut state = planner.new_state(wavelengths);
    let outcome = provision_all(&mut state, planner, requests, mode);
    let metrics = compute_metrics(&state, &outcome);
    RunResult {
        state,
        outcome,
        metrics,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub scenario: ScenarioKind,
    pub mode: ProtectionMode,
    pub regime: String,
    pub load: String,
    pub seed: u64,
    pub metrics: Metrics,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6}",
            self.scenario,
            self.mode,
            self.regime,
            self.load,
            self.seed,
            opt(self.metrics.spectrum_per_req),
            opt(self.metrics.mimo_per_tbps),
            self.metrics.rejection
        )
    }
}

pub fn write_csv<W: Write>(mut w: W, records: &[MetricsRecord]) -> std::io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn csv_string(records: &[MetricsRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("csv is utf-8")
}

/// Series for the spectrum and MIMO figures, keyed
/// metric -> "regime/load" -> scenario -> mode.
pub fn plot_data(records: &[MetricsRecord]) -> serde_json::Value {
    type Series = BTreeMap<String, BTreeMap<String, BTreeMap<String, Option<f64>>>>;
    let mut spectrum: Series = BTreeMap::new();
    let mut mimo: Series = BTreeMap::new();
    for r in records {
        let panel = format!("{}/{}", r.regime, r.load);
        for (series, v) in [(&mut spectrum, r.metrics.spectrum_per_req), (&mut mimo, r.metrics.mimo_per_tbps)] {
            series
                .entry(panel.clone())
                .or_default()
                .entry(r.scenario.to_string())
                .or_default()
                .insert(r.mode.to_string(), v);
        }
    }
    serde_json::json!({ "spectrum_per_req": spectrum, "mimo_per_tbps": mimo })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub name: String,
    pub max_link_km: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// "german17" or a path to a topology JSON file.
    pub topology: String,
    /// Reach table CSV; the built-in table when absent.
    pub reach_table: Option<String>,
    pub wavelengths: usize,
    pub k: usize,
    pub seed: u64,
    pub replicas: usize,
    pub target_rejection: f64,
    pub objective: Objective,
    pub scenarios: Vec<String>,
    pub modes: Vec<String>,
    pub loads: Vec<String>,
    pub regimes: Vec<Regime>,
    /// Fixed high-load request count per regime name, skipping calibration.
    pub high_load_requests: BTreeMap<String, usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            topology: "german17".into(),
            reach_table: None,
            wavelengths: 100,
            k: 3,
            seed: 1,
            replicas: 10,
            target_rejection: 0.01,
            objective: Objective::SpectrumFirst,
            scenarios: ScenarioKind::ALL.iter().map(|s| s.to_string()).collect(),
            modes: vec!["spp".into(), "dpp".into()],
            loads: vec!["high".into(), "low".into()],
            regimes: vec![
                Regime {
                    name: "S".into(),
                    max_link_km: 3.0,
                },
                Regime {
                    name: "L".into(),
                    max_link_km: 380.0,
                },
            ],
            high_load_requests: BTreeMap::new(),
        }
    }
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(format!("sweep config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }
}

fn resolve(base: Option<&Path>, p: &str) -> PathBuf {
    let p = Path::new(p);
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p.to_path_buf(),
    }
}

/// "german17" names the built-in topology; anything else is a JSON path.
pub fn resolve_topology(spec: &str, base: Option<&Path>) -> Result<Topology> {
    if spec == "german17" {
        Ok(Topology::german17())
    } else {
        load_topology(resolve(base, spec))
    }
}

pub fn resolve_reach_table(spec: Option<&str>, base: Option<&Path>) -> Result<ReachTable> {
    match spec {
        None => Ok(ReachTable::default_table()),
        Some(p) => ReachTable::load(resolve(base, p)),
    }
}

/// A scenario is left out of a regime when even its longest reach is shorter
/// than the shortest link, since then no route can be served.
pub fn scenario_applies(table: &ReachTable, scenario: ScenarioKind, topology: &Topology) -> bool {
    table.max_reach_km(scenario) >= topology.min_link_km()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeLoads {
    pub regime: String,
    pub high: usize,
    pub low: usize,
    pub calibration: Option<Calibration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub records: Vec<MetricsRecord>,
    pub loads: Vec<RegimeLoads>,
    pub skipped: Vec<(String, ScenarioKind)>,
}

struct Cell {
    regime: usize,
    load: String,
    count: usize,
    scenario: ScenarioKind,
    mode: ProtectionMode,
}

/// Runs every cell of the grid. All cells share the base seed so that
/// scenarios and protection modes see identical request sequences.
pub fn run_sweep(config: &SweepConfig, base_dir: Option<&Path>) -> Result<SweepResult> {
    let base = resolve_topology(&config.topology, base_dir)?;
    let table = resolve_reach_table(config.reach_table.as_deref(), base_dir)?;
    let scenarios = config
        .scenarios
        .iter()
        .map(|s| s.parse::<ScenarioKind>())
        .collect::<Result<Vec<_>>>()?;
    let modes = config
        .modes
        .iter()
        .map(|s| s.parse::<ProtectionMode>())
        .collect::<Result<Vec<_>>>()?;
    for l in &config.loads {
        if l != "high" && l != "low" {
            return Err(Error::InvalidArgument(format!("unknown load {l:?}, expected high or low")));
        }
    }
    if config.wavelengths == 0 || config.k == 0 {
        return Err(Error::InvalidArgument("wavelengths and k must be positive".into()));
    }

    let topologies = config
        .regimes
        .iter()
        .map(|r| base.scale_link_lengths(r.max_link_km))
        .collect::<Result<Vec<_>>>()?;

    let mut loads = Vec::new();
    for (regime, topo) in config.regimes.iter().zip(&topologies) {
        let entry = match config.high_load_requests.get(&regime.name) {
            Some(&high) => RegimeLoads {
                regime: regime.name.clone(),
                high,
                low: high.div_ceil(2),
                calibration: None,
            },
            None => {
                let mut p = CalibrationParams::high_load(topo, &table, config.wavelengths, config.k, config.seed);
                p.replicas = config.replicas;
                p.target_rejection = config.target_rejection;
                let c = calibrate_high_load(&p).map_err(|e| Error::Cell {
                    cell: format!("calibration of regime {}", regime.name),
                    source: Box::new(e),
                })?;
                RegimeLoads {
                    regime: regime.name.clone(),
                    high: c.high,
                    low: c.low,
                    calibration: Some(c),
                }
            }
        };
        loads.push(entry);
    }

    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for (ri, regime) in config.regimes.iter().enumerate() {
        for &scenario in &scenarios {
            if !scenario_applies(&table, scenario, &topologies[ri]) {
                skipped.push((regime.name.clone(), scenario));
            }
        }
        for load in &config.loads {
            let count = if load == "high" { loads[ri].high } else { loads[ri].low };
            for &scenario in &scenarios {
                if !scenario_applies(&table, scenario, &topologies[ri]) {
                    continue;
                }
                for &mode in &modes {
                    cells.push(Cell {
                        regime: ri,
                        load: load.clone(),
                        count,
                        scenario,
                        mode,
                    });
                }
            }
        }
    }

    let records = cells
        .par_iter()
        .map(|c| {
            let topo = &topologies[c.regime];
            let mut planner = Planner::new(topo, &table, c.scenario, config.k);
            planner.objective = config.objective;
            let requests = generate(
                &TrafficConfig {
                    seed: config.seed,
                    count: c.count,
                },
                topo,
            );
            let run = run_instance(&planner, config.wavelengths, &requests, c.mode);
            MetricsRecord {
                scenario: c.scenario,
                mode: c.mode,
                regime: config.regimes[c.regime].name.clone(),
                load: c.load.clone(),
                seed: config.seed,
                metrics: run.metrics,
            }
        })
        .collect();
    Ok(SweepResult {
        records,
        loads,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_of_empty_run() {
        let t = Topology::german17();
        let table = ReachTable::default_table();
        let planner = Planner::new(&t, &table, ScenarioKind::Mgdm, 3);
        let run = run_instance(&planner, 4, &[], ProtectionMode::Spp);
        assert_eq!(run.metrics.spectrum_per_req, None);
        assert_eq!(run.metrics.mimo_per_tbps, None);
        assert_eq!(run.metrics.rejection, 0.0);
    }

    #[test]
    fn metrics_of_single_request() {
        let t = Topology::german17();
        let table = ReachTable::default_table();
        let planner = Planner::new(&t, &table, ScenarioKind::Smt, 3);
        let r = Request {
            id: 0,
            src: t.node_by_name("Koeln").unwrap(),
            dst: t.node_by_name("Essen").unwrap(),
            rate_gbps: 200,
        };
        let run = run_instance(&planner, 4, &[r], ProtectionMode::Dpp);
        let m = &run.metrics;
        assert_eq!(m.accepted, 1);
        let backup = &run.outcome.assignments[1];
        assert_eq!(m.spectrum_per_req, Some(backup.route.hops() as f64));
        // The backup lands on the working receiver, so nothing new is deployed.
        assert_eq!(m.mimo_per_tbps, Some(0.0));
    }

    #[test]
    fn csv_formatting() {
        let rec = MetricsRecord {
            scenario: ScenarioKind::MfMgdm,
            mode: ProtectionMode::Spp,
            regime: "S".into(),
            load: "low".into(),
            seed: 9,
            metrics: Metrics {
                requests: 0,
                accepted: 0,
                accepted_tbps: 0.0,
                rejection: 0.0,
                spectrum_per_req: None,
                mimo_per_tbps: None,
                backup_lit_pairs: 0,
                backup_group_slots: 0,
                backup_mimo_total: 0.0,
                backup_receiver_units: 0,
            },
        };
        assert_eq!(
            csv_string(&[rec]),
            format!("{CSV_HEADER}\nmf-mgdm,spp,S,low,9,,,0.000000\n")
        );
    }

    #[test]
    fn config_parsing() {
        let c = SweepConfig::from_toml_str("seed = 5\n[high_load_requests]\nS = 10\n").unwrap();
        assert_eq!(c.seed, 5);
        assert_eq!(c.high_load_requests["S"], 10);
        assert_eq!(c.wavelengths, 100);
        assert!(SweepConfig::from_toml_str("bogus = 1").is_err());
        let shipped = SweepConfig::from_toml_str(include_str!("../data/sweep.toml")).unwrap();
        assert_eq!(shipped, SweepConfig::default());
    }

    #[test]
    fn mf_mgdm_gated_by_regime() {
        let t = Topology::german17();
        let table = ReachTable::default_table();
        let s = t.scale_link_lengths(3.0).unwrap();
        let l = t.scale_link_lengths(380.0).unwrap();
        assert!(scenario_applies(&table, ScenarioKind::MfMgdm, &s));
        assert!(!scenario_applies(&table, ScenarioKind::MfMgdm, &l));
        assert!(scenario_applies(&table, ScenarioKind::Mgdm, &l));
    }
}
