//! Working-path provisioning, the per-request working+backup transaction and
//! the assignment log.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::{group_combination_capacity, GroupSelector, MimoCost, ReachTable, ScenarioKind};
use crate::spp::{assign_backup, group_combinations, Objective, ProtectionMode};
use crate::state::{NetworkState, RequestId, SlotKey, SlotRole};
use crate::topology::{LinkId, NodeId, Route, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_gbps: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    Working,
    Backup,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Working => "working",
            Role::Backup => "backup",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupAssignment {
    pub selector: GroupSelector,
    pub modulation: String,
    pub gbps_per_mode: f64,
}

/// A provisioned lightpath.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub request: RequestId,
    pub role: Role,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_gbps: u32,
    pub route: Route,
    pub wavelength: usize,
    pub groups: Vec<GroupAssignment>,
    pub capacity_gbps: f64,
    pub mimo_deployed: MimoCost,
}

impl Assignment {
    pub fn selectors(&self) -> Vec<GroupSelector> {
        self.groups.iter().map(|g| g.selector).collect()
    }
}

/// Static inputs shared by every provisioning decision of a run.
#[derive(Clone, Copy, Debug)]
pub struct Planner<'a> {
    pub topology: &'a Topology,
    pub table: &'a ReachTable,
    pub scenario: ScenarioKind,
    pub k: usize,
    pub objective: Objective,
}

impl<'a> Planner<'a> {
    pub fn new(topology: &'a Topology, table: &'a ReachTable, scenario: ScenarioKind, k: usize) -> Self {
        Planner {
            topology,
            table,
            scenario,
            k,
            objective: Objective::SpectrumFirst,
        }
    }

    pub fn new_state(&self, wavelengths: usize) -> NetworkState {
        NetworkState::new(self.scenario, self.topology.link_count(), wavelengths)
    }
}

fn working_keys(route: &Route, wavelength: usize, selectors: &[GroupSelector]) -> Vec<SlotKey> {
    route
        .links
        .iter()
        .flat_map(|&link| {
            selectors.iter().map(move |&selector| SlotKey {
                link,
                wavelength,
                selector,
            })
        })
        .collect()
}

fn commit_working(
    state: &mut NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    route: Route,
    wavelength: usize,
    groups: Vec<GroupAssignment>,
    capacity_gbps: f64,
) -> Result<Assignment> {
    let selectors: Vec<GroupSelector> = groups.iter().map(|g| g.selector).collect();
    let links = route.link_set();
    state.spectrum.occupy(
        &working_keys(&route, wavelength, &selectors),
        SlotRole::Working,
        request.id,
        &links,
    )?;
    let mimo = state
        .mimo
        .register_working(request.dst, request.id, planner.scenario, &selectors)?;
    Ok(Assignment {
        request: request.id,
        role: Role::Working,
        src: request.src,
        dst: request.dst,
        rate_gbps: request.rate_gbps,
        route,
        wavelength,
        groups,
        capacity_gbps,
        mimo_deployed: mimo,
    })
}

/// First fit over (route, wavelength ascending, group combination order).
pub fn provision_working(
    state: &mut NetworkState,
    planner: &Planner<'_>,
    request: &Request,
) -> Option<Assignment> {
    let routes = planner
        .topology
        .k_shortest_paths(request.src, request.dst, planner.k)
        .ok()?;
    let spectrum = &state.spectrum;
    for route in routes {
        let combos = group_combinations(
            planner.table,
            planner.scenario,
            request.rate_gbps as f64,
            route.length_km,
        );
        if combos.is_empty() {
            continue;
        }
        for wl in 0..spectrum.wavelengths() {
            if route.links.iter().any(|&l| spectrum.has_backup(l, wl)) {
                continue;
            }
            let fits = combos.iter().position(|c| {
                route.links.iter().all(|&link| {
                    c.groups.iter().all(|g| {
                        spectrum
                            .slot(&SlotKey {
                                link,
                                wavelength: wl,
                                selector: g.selector,
                            })
                            .is_none()
                    })
                })
            });
            if let Some(ci) = fits {
                let c = combos[ci].clone();
                return Some(
                    commit_working(state, planner, request, route, wl, c.groups, c.capacity_gbps)
                        .expect("first-fit slot is free"),
                );
            }
        }
    }
    None
}

/// Installs a given working lightpath. The route must start at the request
/// source and end at its destination; every group must reach over the route
/// and the groups together must carry the request rate.
pub fn register_working(
    state: &mut NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    links: &[LinkId],
    wavelength: usize,
    selectors: &[GroupSelector],
) -> Result<Assignment> {
    let route = planner.topology.route_from_links(request.src, links)?;
    if route.dst != request.dst {
        return Err(Error::InvalidArgument(format!(
            "route ends at {} instead of {}",
            route.dst, request.dst
        )));
    }
    let mut groups = Vec::with_capacity(selectors.len());
    for &sel in selectors {
        let m = planner
            .table
            .select_modulation(planner.scenario, sel, route.length_km)
            .ok_or_else(|| {
                Error::Infeasible(format!("group {sel} does not reach {} km", route.length_km))
            })?;
        groups.push(GroupAssignment {
            selector: sel,
            modulation: m.modulation.clone(),
            gbps_per_mode: m.gbps_per_mode,
        });
    }
    let pairs: Vec<(GroupSelector, &str)> =
        groups.iter().map(|g| (g.selector, g.modulation.as_str())).collect();
    let capacity = group_combination_capacity(planner.table, planner.scenario, &pairs)?;
    if capacity < request.rate_gbps as f64 {
        return Err(Error::Infeasible(format!(
            "{capacity} Gb/s cannot carry {} Gb/s",
            request.rate_gbps
        )));
    }
    commit_working(state, planner, request, route, wavelength, groups, capacity)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProvisionOutcome {
    /// Working then backup assignment of every accepted request, in arrival order.
    pub assignments: Vec<Assignment>,
    pub accepted: Vec<Request>,
    pub rejected: Vec<RequestId>,
}

impl ProvisionOutcome {
    pub fn rejection_ratio(&self) -> f64 {
        let total = self.accepted.len() + self.rejected.len();
        if total == 0 {
            0.0
        } else {
            self.rejected.len() as f64 / total as f64
        }
    }
}

/// Provisions one request as a transaction: working first, then backup.
/// On backup failure the working path is released.
pub fn provision_request(
    state: &mut NetworkState,
    planner: &Planner<'_>,
    request: &Request,
    mode: ProtectionMode,
) -> Option<(Assignment, Assignment)> {
    let working = provision_working(state, planner, request)?;
    match assign_backup(state, planner, request, &working, mode) {
        Some(backup) => Some((working, backup)),
        None => {
            state
                .release(request.id)
                .expect("working path was just registered");
            None
        }
    }
}

pub fn provision_all(
    state: &mut NetworkState,
    planner: &Planner<'_>,
    requests: &[Request],
    mode: ProtectionMode,
) -> ProvisionOutcome {
    let mut out = ProvisionOutcome::default();
    for r in requests {
        match provision_request(state, planner, r, mode) {
            Some((w, b)) => {
                out.assignments.push(w);
                out.assignments.push(b);
                out.accepted.push(*r);
            }
            None => out.rejected.push(r.id),
        }
    }
    out
}

/// One row of the assignment log CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub request: RequestId,
    pub role: String,
    pub src: usize,
    pub dst: usize,
    pub rate_gbps: u32,
    /// Link ids joined by `-`.
    pub links: String,
    pub wavelength: usize,
    /// Group labels joined by `+`.
    pub groups: String,
    pub modulations: String,
    pub capacity_gbps: f64,
    pub mimo_deployed: f64,
}

impl AssignmentRecord {
    pub fn from_assignment(a: &Assignment) -> Self {
        let join = |v: Vec<String>, sep: &str| v.join(sep);
        AssignmentRecord {
            request: a.request,
            role: a.role.label().to_string(),
            src: a.src.0,
            dst: a.dst.0,
            rate_gbps: a.rate_gbps,
            links: join(a.route.links.iter().map(|l| l.to_string()).collect(), "-"),
            wavelength: a.wavelength,
            groups: join(a.groups.iter().map(|g| g.selector.to_string()).collect(), "+"),
            modulations: join(a.groups.iter().map(|g| g.modulation.clone()).collect(), "+"),
            capacity_gbps: a.capacity_gbps,
            mimo_deployed: a.mimo_deployed.0,
        }
    }

    pub fn role(&self) -> Result<Role> {
        match self.role.as_str() {
            "working" => Ok(Role::Working),
            "backup" => Ok(Role::Backup),
            other => Err(Error::MalformedLog(format!("unknown role `{other}`"))),
        }
    }

    pub fn link_ids(&self) -> Result<Vec<LinkId>> {
        if self.links.is_empty() {
            return Err(Error::MalformedLog(format!("request {} has an empty route", self.request)));
        }
        self.links
            .split('-')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::MalformedLog(format!("bad link id `{s}`")))
            })
            .collect()
    }

    pub fn selectors(&self) -> Result<Vec<GroupSelector>> {
        self.groups
            .split('+')
            .map(|s| s.parse().map_err(|_| Error::MalformedLog(format!("bad group `{s}`"))))
            .collect()
    }
}

pub fn write_assignment_log<W: Write>(w: W, assignments: &[Assignment]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for a in assignments {
        wtr.serialize(AssignmentRecord::from_assignment(a))
            .map_err(|e| Error::Parse(e.to_string()))?;
    }
    wtr.flush().map_err(|e| Error::io("assignment log", e))?;
    Ok(())
}

pub fn read_assignment_log<R: Read>(r: R) -> Result<Vec<AssignmentRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<AssignmentRecord>, _>>()
        .map_err(|e| Error::MalformedLog(e.to_string()))
}

/// Working link set per request, as recorded in a log.
pub fn working_links_by_request(
    records: &[AssignmentRecord],
) -> Result<std::collections::BTreeMap<RequestId, BTreeSet<LinkId>>> {
    let mut out = std::collections::BTreeMap::new();
    for r in records {
        if r.role()? == Role::Working
            && out.insert(r.request, r.link_ids()?.into_iter().collect()).is_some()
        {
            return Err(Error::MalformedLog(format!(
                "request {} has two working rows",
                r.request
            )));
        }
    }
    Ok(out)
}
