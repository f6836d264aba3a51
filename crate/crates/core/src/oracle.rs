//! Brute-force reference implementations used to check the heuristic.
//!
//! Nothing here calls into `spp`: routes come from a plain DFS over simple
//! paths, group sets from subset enumeration, and the sharing and receiver
//! rules are re-derived from the raw state.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::fmt::{GroupSelector, ReachTable, ScenarioKind};
use crate::provision::{working_links_by_request, AssignmentRecord, Assignment, Request, Role};
use crate::spp::ProtectionMode;
use crate::state::{NetworkState, ReceiverRole, SlotKey, SlotRole};
use crate::topology::{LinkId, NodeId, Topology};

pub const MAX_NODES: usize = 6;
pub const MAX_WAVELENGTHS: usize = 3;
pub const MAX_REQUESTS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleChoice {
    pub links: Vec<LinkId>,
    pub length_km: f64,
    pub wavelength: usize,
    pub groups: Vec<GroupSelector>,
    pub spectrum: u32,
    pub mimo: f64,
}

/// Every simple path from `src` to `dst` that avoids `banned`, as link lists.
pub fn all_simple_paths(
    topology: &Topology,
    src: NodeId,
    dst: NodeId,
    banned: &BTreeSet<LinkId>,
) -> Vec<Vec<LinkId>> {
    fn dfs(
        t: &Topology,
        at: NodeId,
        dst: NodeId,
        banned: &BTreeSet<LinkId>,
        visited: &mut Vec<bool>,
        path: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
    ) {
        if at == dst {
            out.push(path.clone());
            return;
        }
        for l in t.links() {
            if banned.contains(&l.id) || (l.a != at && l.b != at) {
                continue;
            }
            let next = if l.a == at { l.b } else { l.a };
            if visited[next.0] {
                continue;
            }
            visited[next.0] = true;
            path.push(l.id);
            dfs(t, next, dst, banned, visited, path, out);
            path.pop();
            visited[next.0] = false;
        }
    }
    let mut visited = vec![false; topology.node_count()];
    visited[src.0] = true;
    let mut out = Vec::new();
    dfs(topology, src, dst, banned, &mut visited, &mut Vec::new(), &mut out);
    out
}

pub fn path_length(topology: &Topology, links: &[LinkId]) -> f64 {
    links.iter().fold(0.0, |acc, &l| acc + topology.link(l).length_km)
}

/// All simple paths sorted by (length, hops, link ids).
pub fn sorted_simple_paths(
    topology: &Topology,
    src: NodeId,
    dst: NodeId,
    banned: &BTreeSet<LinkId>,
) -> Vec<(f64, Vec<LinkId>)> {
    let mut paths: Vec<(f64, Vec<LinkId>)> = all_simple_paths(topology, src, dst, banned)
        .into_iter()
        .map(|p| (path_length(topology, &p), p))
        .collect();
    paths.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.len().cmp(&b.1.len()))
            .then_with(|| a.1.cmp(&b.1))
    });
    paths
}

fn modes_of(scenario: ScenarioKind, sel: GroupSelector) -> u32 {
    match (scenario, sel) {
        (ScenarioKind::Mgdm, GroupSelector::Group(g)) => g as u32 + 1,
        (ScenarioKind::FullMimo, GroupSelector::Joint) => 15,
        _ => 1,
    }
}

/// Entries of a (2k x 2k) equalizer matrix over the 4 of the 2x2 baseline.
fn equalizer_cost(k: u32) -> f64 {
    let side = 2 * k as usize;
    let matrix = vec![vec![1u8; side]; side];
    matrix.iter().map(|row| row.len()).sum::<usize>() as f64 / 4.0
}

fn compare_choice(a: &OracleChoice, b: &OracleChoice) -> Ordering {
    a.spectrum
        .cmp(&b.spectrum)
        .then(a.mimo.total_cmp(&b.mimo))
        .then(a.length_km.total_cmp(&b.length_km))
        .then(a.links.len().cmp(&b.links.len()))
        .then_with(|| a.links.cmp(&b.links))
        .then(a.wavelength.cmp(&b.wavelength))
        .then_with(|| a.groups.cmp(&b.groups))
}

/// Exhaustive search for the cheapest backup lightpath of `request`.
/// `max_routes` truncates the sorted route list the same way the heuristic's
/// `k` does; `None` searches all simple paths.
#[allow(clippy::too_many_arguments)]
pub fn exhaustive_backup_option(
    state: &NetworkState,
    topology: &Topology,
    table: &ReachTable,
    mode: ProtectionMode,
    request: &Request,
    working: &Assignment,
    max_routes: Option<usize>,
) -> Result<Option<OracleChoice>> {
    let scenario = state.scenario();
    if topology.node_count() > MAX_NODES {
        return Err(Error::OracleBounds(format!("{} nodes", topology.node_count())));
    }
    if state.spectrum.wavelengths() > MAX_WAVELENGTHS {
        return Err(Error::OracleBounds(format!("{} wavelengths", state.spectrum.wavelengths())));
    }
    let known: BTreeSet<_> = state.spectrum.requests().chain([request.id]).collect();
    if known.len() > MAX_REQUESTS {
        return Err(Error::OracleBounds(format!("{} requests", known.len())));
    }

    let working_links: BTreeSet<LinkId> = working.route.links.iter().copied().collect();
    let working_groups: Vec<GroupSelector> = working.groups.iter().map(|g| g.selector).collect();
    let mut paths = sorted_simple_paths(topology, request.src, request.dst, &working_links);
    if let Some(k) = max_routes {
        paths.truncate(k);
    }
    let selectors = scenario.selectors();
    let share = mode == ProtectionMode::Spp;
    let receivers = state.mimo.units_at(request.dst);

    let mut best: Option<OracleChoice> = None;
    for (length, links) in &paths {
        // Best capacity per group at this length, or None if out of reach.
        let per_group: Vec<Option<f64>> = selectors
            .iter()
            .map(|&sel| {
                table
                    .modulations(scenario, sel)
                    .iter()
                    .filter(|m| m.reach_km >= *length)
                    .map(|m| m.gbps_per_mode * modes_of(scenario, sel) as f64)
                    .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))))
            })
            .collect();
        let capacity = |mask: usize| -> Option<f64> {
            let mut total = 0.0;
            for (i, cap) in per_group.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    total += (*cap)?;
                }
            }
            Some(total)
        };
        let rate = request.rate_gbps as f64;
        let feasible = |mask: usize| capacity(mask).is_some_and(|c| c >= rate);
        for mask in 1..(1usize << selectors.len()) {
            if !feasible(mask) {
                continue;
            }
            let has_feasible_subset = (1..mask).any(|sub| sub & mask == sub && feasible(sub));
            if has_feasible_subset {
                continue;
            }
            let groups: Vec<GroupSelector> = (0..selectors.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| selectors[i])
                .collect();

            let mut mimo = 0.0;
            for &g in &groups {
                if working_groups.contains(&g) {
                    continue;
                }
                let joinable = share
                    && receivers.iter().any(|u| {
                        u.role == ReceiverRole::Backup
                            && u.shareable
                            && u.selector == g
                            && u.protected.iter().all(|p| p.intersection(&working_links).next().is_none())
                    });
                if !joinable {
                    mimo += equalizer_cost(modes_of(scenario, g));
                }
            }

            'wl: for wl in 0..state.spectrum.wavelengths() {
                let mut spectrum = 0;
                for &link in links {
                    let occupants: Vec<_> = selectors
                        .iter()
                        .filter_map(|&s| {
                            state.spectrum.slot(&SlotKey { link, wavelength: wl, selector: s })
                        })
                        .collect();
                    if occupants.iter().any(|o| o.role == SlotRole::Working) {
                        continue 'wl;
                    }
                    if occupants.is_empty() {
                        spectrum += 1;
                    }
                    for &g in &groups {
                        if let Some(o) = state.spectrum.slot(&SlotKey { link, wavelength: wl, selector: g }) {
                            let ok = share
                                && o.role == SlotRole::BackupShared
                                && o.protected.iter().all(|p| p.intersection(&working_links).next().is_none());
                            if !ok {
                                continue 'wl;
                            }
                        }
                    }
                }
                let choice = OracleChoice {
                    links: links.clone(),
                    length_km: *length,
                    wavelength: wl,
                    groups: groups.clone(),
                    spectrum,
                    mimo,
                };
                if best.as_ref().is_none_or(|b| compare_choice(&choice, b) == Ordering::Less) {
                    best = Some(choice);
                }
            }
        }
    }
    Ok(best)
}

fn expand(sel: GroupSelector) -> Vec<GroupSelector> {
    match sel {
        GroupSelector::Joint => crate::fmt::ModeGroup::ALL
            .iter()
            .map(|&g| GroupSelector::Group(g))
            .collect(),
        other => vec![other],
    }
}

/// Recomputes sharing legality from an assignment log alone: a slot held by a
/// working lightpath has exactly one owner, and backups co-located on a slot
/// have pairwise link-disjoint working routes.
pub fn verify_sharing_legality(records: &[AssignmentRecord]) -> Result<bool> {
    let working = working_links_by_request(records)?;
    let mut slots: BTreeMap<(LinkId, usize, GroupSelector), Vec<(u32, Role)>> = BTreeMap::new();
    for r in records {
        let role = r.role()?;
        if role == Role::Backup && !working.contains_key(&r.request) {
            return Err(Error::MalformedLog(format!(
                "backup of request {} has no working row",
                r.request
            )));
        }
        for link in r.link_ids()? {
            for sel in r.selectors()? {
                for g in expand(sel) {
                    slots.entry((link, r.wavelength, g)).or_default().push((r.request, role));
                }
            }
        }
    }
    for owners in slots.values() {
        if owners.len() < 2 {
            continue;
        }
        if owners.iter().any(|(_, role)| *role == Role::Working) {
            return Ok(false);
        }
        for i in 0..owners.len() {
            for j in i + 1..owners.len() {
                let (a, b) = (&working[&owners[i].0], &working[&owners[j].0]);
                if a.intersection(b).next().is_some() {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(request: u32, role: &str, links: &str, wl: usize, groups: &str) -> AssignmentRecord {
        AssignmentRecord {
            request,
            role: role.into(),
            src: 0,
            dst: 1,
            rate_gbps: 100,
            links: links.into(),
            wavelength: wl,
            groups: groups.into(),
            modulations: "QPSK".into(),
            capacity_gbps: 100.0,
            mimo_deployed: 0.0,
        }
    }

    #[test]
    fn equalizer_oracle() {
        assert_eq!(equalizer_cost(1), 1.0);
        assert_eq!(equalizer_cost(5), 25.0);
        assert_eq!(equalizer_cost(15), 225.0);
    }

    #[test]
    fn legality_checks() {
        let legal = vec![
            rec(1, "working", "1-2", 0, "A"),
            rec(1, "backup", "3-4", 0, "A"),
            rec(2, "working", "5-6", 0, "A"),
            rec(2, "backup", "4", 0, "A"),
        ];
        assert!(verify_sharing_legality(&legal).unwrap());

        let illegal = vec![
            rec(1, "working", "7-2", 0, "A"),
            rec(1, "backup", "3-4", 0, "A"),
            rec(2, "working", "7-6", 1, "A"),
            rec(2, "backup", "4", 0, "A"),
        ];
        assert!(!verify_sharing_legality(&illegal).unwrap());

        let dedicated = vec![
            rec(1, "working", "7", 0, "A"),
            rec(1, "backup", "3-4", 0, "A"),
            rec(2, "working", "7", 0, "B"),
            rec(2, "backup", "4", 0, "C"),
        ];
        assert!(verify_sharing_legality(&dedicated).unwrap());

        let orphan = vec![rec(3, "backup", "1", 0, "A")];
        assert!(matches!(verify_sharing_legality(&orphan), Err(Error::MalformedLog(_))));
        let bad_role = vec![rec(3, "spare", "1", 0, "A")];
        assert!(verify_sharing_legality(&bad_role).is_err());
    }

    #[test]
    fn joint_slots_collide_with_everything() {
        let log = vec![
            rec(1, "working", "1", 0, "joint"),
            rec(2, "working", "1", 0, "joint"),
        ];
        assert!(!verify_sharing_legality(&log).unwrap());
    }
}
