//! Backup lightpath assignment under shared (SPP) or dedicated (DPP) path
//! protection.
//!
//! Every candidate backup is one lightpath: a route link-disjoint from the
//! working route, one wavelength, and a minimal set of mode groups whose
//! capacity meets the request rate. Each candidate is an edge of the
//! auxiliary graph between the request's end nodes; the cheapest edge under
//! the lexicographic (spectrum, MIMO) cost wins. Spectrum counts newly lit
//! (link, wavelength) pairs, MIMO counts receiver units that must be deployed
//! after reusing the request's working receivers and joining shareable
//! backup units.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{GroupSelector, MimoCost, ReachTable, ScenarioKind};
use crate::provision::{Assignment, GroupAssignment, Planner, Request, Role};
use crate::state::{can_share_slot, NetworkState, SlotKey, SlotRole};
use crate::topology::{route_order, LinkId, Route};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtectionMode {
    Spp,
    Dpp,
}

impl ProtectionMode {
    pub fn shares(self) -> bool {
        self == ProtectionMode::Spp
    }
}

impl fmt::Display for ProtectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtectionMode::Spp => "spp",
            ProtectionMode::Dpp => "dpp",
        })
    }
}

impl FromStr for ProtectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spp" => Ok(ProtectionMode::Spp),
            "dpp" => Ok(ProtectionMode::Dpp),
            other => Err(Error::Parse(format!("unknown protection mode `{other}`"))),
        }
    }
}

/// Which cost component dominates option selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    SpectrumFirst,
    MimoFirst,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "spectrum" | "spectrum-first" => Ok(Objective::SpectrumFirst),
            "mimo" | "mimo-first" => Ok(Objective::MimoFirst),
            other => Err(Error::Parse(format!("unknown objective `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LexCost {
    pub spectrum: u32,
    pub mimo: MimoCost,
}

impl LexCost {
    pub fn compare(&self, other: &LexCost, objective: Objective) -> Ordering {
        match objective {
            Objective::SpectrumFirst => self
                .spectrum
                .cmp(&other.spectrum)
                .then(self.mimo.cmp(&other.mimo)),
            Objective::MimoFirst => self
                .mimo
                .cmp(&other.mimo)
                .then(self.spectrum.cmp(&other.spectrum)),
        }
    }
}

impl PartialOrd for LexCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LexCost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.compare(other, Objective::SpectrumFirst)
    }
}

/// A feasible set of mode groups, each with its chosen modulation.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCombination {
    pub groups: Vec<GroupAssignment>,
    pub capacity_gbps: f64,
    pub detection_cost: MimoCost,
}

impl GroupCombination {
    pub fn selectors(&self) -> Vec<GroupSelector> {
        self.groups.iter().map(|g| g.selector).collect()
    }
}

/// Minimal group sets able to carry `rate_gbps` over `route_length_km`,
/// ordered by (group count, detection cost, labels).
pub fn group_combinations(
    table: &ReachTable,
    scenario: ScenarioKind,
    rate_gbps: f64,
    route_length_km: f64,
) -> Vec<GroupCombination> {
    let units: Vec<(GroupAssignment, f64, MimoCost)> = scenario
        .selectors()
        .into_iter()
        .filter_map(|sel| {
            let m = table.select_modulation(scenario, sel, route_length_km)?;
            let modes = scenario.usable_modes(sel)?;
            Some((
                GroupAssignment {
                    selector: sel,
                    modulation: m.modulation.clone(),
                    gbps_per_mode: m.gbps_per_mode,
                },
                modes as f64 * m.gbps_per_mode,
                scenario.detection_cost(sel)?,
            ))
        })
        .collect();
    let n = units.len();
    let capacity = |mask: u32| -> f64 {
        (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| units[i].1)
            .sum()
    };
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let cap = capacity(mask);
        if cap < rate_gbps {
            continue;
        }
        // Capacity grows with every added group, so minimality only needs
        // single-element removals.
        let minimal = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .all(|i| capacity(mask & !(1 << i)) < rate_gbps);
        if !minimal {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        out.push(GroupCombination {
            groups: members.iter().map(|&i| units[i].0.clone()).collect(),
            capacity_gbps: cap,
            detection_cost: members.iter().map(|&i| units[i].2).sum(),
        });
    }
    out.sort_by(|a, b| {
        a.groups
            .len()
            .cmp(&b.groups.len())
            .then(a.detection_cost.cmp(&b.detection_cost))
            .then_with(|| a.selectors().cmp(&b.selectors()))
    });
    out
}

/// One edge of the auxiliary graph.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateOption {
    pub route: Route,
    pub wavelength: usize,
    pub groups: Vec<GroupAssignment>,
    pub capacity_gbps: f64,
    pub incremental_spectrum: u32,
    pub incremental_mimo: MimoCost,
}

impl CandidateOption {
    pub fn cost(&self) -> LexCost {
        LexCost {
            spectrum: self.incremental_spectrum,
            mimo: self.incremental_mimo,
        }
    }

    pub fn selectors(&self) -> Vec<GroupSelector> {
        self.groups.iter().map(|g| g.selector).collect()
    }
}

/// Full selection order: cost, then route, then wavelength, then group labels.
pub fn compare_options(a: &CandidateOption, b: &CandidateOption, objective: Objective) -> Ordering {
    a.cost()
        .compare(&b.cost(), objective)
        .then_with(|| route_order(&a.route, &b.route))
        .then(a.wavelength.cmp(&b.wavelength))
        .then_with(|| a.selectors().cmp(&b.selectors()))
}

#[derive(Clone, Copy)]
struct Edge {
    route: usize,
    combo: usize,
    wavelength: usize,
    cost: LexCost,
}

struct Auxiliary {
    routes: Vec<Route>,
    combos: Vec<Vec<GroupCombination>>,
    edges: Vec<Edge>,
}

impl Auxiliary {
    fn option(&self, e: &Edge) -> CandidateOption {
        let combo = &self.combos[e.route][e.combo];
        CandidateOption {
            route: self.routes[e.route].clone(),
            wavelength: e.wavelength,
            groups: combo.groups.clone(),
            capacity_gbps: combo.capacity_gbps,
            incremental_spectrum: e.cost.spectrum,
            incremental_mimo: e.cost.mimo,
        }
    }

    fn compare(&self, a: &Edge, b: &Edge, objective: Objective) -> Ordering {
        a.cost
            .compare(&b.cost, objective)
            .then_with(|| route_order(&self.routes[a.route], &self.routes[b.route]))
            .then(a.wavelength.cmp(&b.wavelength))
            .then_with(|| {
                self.combos[a.route][a.combo]
                    .selectors()
                    .cmp(&self.combos[b.route][b.combo].selectors())
            })
    }
}

fn build_auxiliary(
    state: &NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    working: &Assignment,
    mode: ProtectionMode,
) -> Auxiliary {
    let working_links = working.route.link_set();
    let routes = planner
        .topology
        .k_shortest_paths_excluding(request.src, request.dst, planner.k, &working_links)
        .unwrap_or_default();
    let working_groups = working.selectors();
    let spectrum = &state.spectrum;
    let selectors = spectrum.selectors().to_vec();
    let mut combos = Vec::with_capacity(routes.len());
    let mut edges = Vec::new();

    for (ri, route) in routes.iter().enumerate() {
        let route_combos = group_combinations(
            planner.table,
            planner.scenario,
            request.rate_gbps as f64,
            route.length_km,
        );
        let combo_mimo: Vec<MimoCost> = route_combos
            .iter()
            .map(|c| {
                state.mimo.additional_backup_mimo(
                    planner.scenario,
                    request.dst,
                    &c.selectors(),
                    &working_groups,
                    &working_links,
                    mode.shares(),
                )
            })
            .collect();
        let combo_sel_idx: Vec<Vec<usize>> = route_combos
            .iter()
            .map(|c| {
                c.groups
                    .iter()
                    .map(|g| selectors.iter().position(|&s| s == g.selector).expect("scenario group"))
                    .collect()
            })
            .collect();

        for wl in 0..spectrum.wavelengths() {
            if route.links.iter().any(|&l| spectrum.has_working(l, wl)) {
                continue;
            }
            let usable: Vec<bool> = selectors
                .iter()
                .map(|&sel| {
                    route.links.iter().all(|&link| {
                        slot_usable(state, SlotKey { link, wavelength: wl, selector: sel }, &working_links, mode)
                    })
                })
                .collect();
            let fresh = route.links.iter().filter(|&&l| !spectrum.is_lit(l, wl)).count() as u32;
            for (ci, idx) in combo_sel_idx.iter().enumerate() {
                if idx.iter().all(|&i| usable[i]) {
                    edges.push(Edge {
                        route: ri,
                        combo: ci,
                        wavelength: wl,
                        cost: LexCost {
                            spectrum: fresh,
                            mimo: combo_mimo[ci],
                        },
                    });
                }
            }
        }
        combos.push(route_combos);
    }
    Auxiliary { routes, combos, edges }
}

fn slot_usable(
    state: &NetworkState,
    key: SlotKey,
    working_links: &BTreeSet<LinkId>,
    mode: ProtectionMode,
) -> bool {
    match state.spectrum.slot(&key) {
        None => true,
        Some(occ) => {
            mode.shares()
                && occ.role == SlotRole::BackupShared
                && can_share_slot(occ, working_links).unwrap_or(false)
        }
    }
}

/// Every legal backup option for `request`, in enumeration order
/// (route, wavelength, group combination).
pub fn enumerate_options(
    state: &NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    working: &Assignment,
    mode: ProtectionMode,
) -> Vec<CandidateOption> {
    let aux = build_auxiliary(state, planner, request, working, mode);
    aux.edges.iter().map(|e| aux.option(e)).collect()
}

/// The option [`assign_backup`] would commit, without touching the state.
pub fn best_option(
    state: &NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    working: &Assignment,
    mode: ProtectionMode,
) -> Option<CandidateOption> {
    let aux = build_auxiliary(state, planner, request, working, mode);
    aux.edges
        .iter()
        .min_by(|a, b| aux.compare(a, b, planner.objective))
        .map(|e| aux.option(e))
}

/// Picks the cheapest backup option and commits its slots and receivers.
/// Returns `None` when no legal option exists.
pub fn assign_backup(
    state: &mut NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    working: &Assignment,
    mode: ProtectionMode,
) -> Option<Assignment> {
    let option = best_option(state, planner, request, working, mode)?;
    let working_links = working.route.link_set();
    let selectors = option.selectors();
    let keys: Vec<SlotKey> = option
        .route
        .links
        .iter()
        .flat_map(|&link| {
            selectors.iter().map(move |&selector| SlotKey {
                link,
                wavelength: option.wavelength,
                selector,
            })
        })
        .collect();
    let role = if mode.shares() {
        SlotRole::BackupShared
    } else {
        SlotRole::BackupDedicated
    };
    state
        .spectrum
        .occupy(&keys, role, request.id, &working_links)
        .expect("enumerated option is legal");
    let plan = state.mimo.plan_backup(
        planner.scenario,
        request.dst,
        &selectors,
        &working.selectors(),
        &working_links,
        mode.shares(),
    );
    debug_assert_eq!(plan.increment, option.incremental_mimo);
    state
        .mimo
        .commit_backup(request.dst, request.id, &working_links, &plan, mode.shares());
    Some(Assignment {
        request: request.id,
        role: Role::Backup,
        src: request.src,
        dst: request.dst,
        rate_gbps: request.rate_gbps,
        route: option.route,
        wavelength: option.wavelength,
        groups: option.groups,
        capacity_gbps: option.capacity_gbps,
        mimo_deployed: plan.increment,
    })
}
