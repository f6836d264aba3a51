//! Mutable resource state of one simulation run: spectrum slots per
//! (link, wavelength, mode group) and MIMO receiver pools per node.
//!
//! Sharing rule for backups: a slot (or a backup receiver unit) can hold
//! several backup owners only while the working routes of all owners are
//! pairwise link-disjoint. Working and backup lightpaths never occupy the
//! same wavelength on the same link.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::fmt::{GroupSelector, MimoCost, ScenarioKind};
use crate::topology::{LinkId, NodeId};

pub type RequestId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotRole {
    Working,
    BackupDedicated,
    BackupShared,
}

impl SlotRole {
    pub fn is_backup(self) -> bool {
        !matches!(self, SlotRole::Working)
    }

    pub fn label(self) -> &'static str {
        match self {
            SlotRole::Working => "working",
            SlotRole::BackupDedicated => "backup-dedicated",
            SlotRole::BackupShared => "backup-shared",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SlotKey {
    pub link: LinkId,
    pub wavelength: usize,
    pub selector: GroupSelector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotOccupancy {
    pub role: SlotRole,
    pub owners: Vec<RequestId>,
    /// Working-route links of each owner, parallel to `owners`.
    pub protected: Vec<BTreeSet<LinkId>>,
}

fn disjoint_from_all(sets: &[BTreeSet<LinkId>], candidate: &BTreeSet<LinkId>) -> bool {
    sets.iter().all(|s| s.is_disjoint(candidate))
}

/// Whether a backup whose working route uses `candidate_working_links` may
/// join the shared backup slot `occ`.
pub fn can_share_slot(occ: &SlotOccupancy, candidate_working_links: &BTreeSet<LinkId>) -> Result<bool> {
    if occ.role != SlotRole::BackupShared {
        return Err(Error::Contract(format!(
            "can_share_slot called on a {} slot",
            occ.role.label()
        )));
    }
    Ok(disjoint_from_all(&occ.protected, candidate_working_links))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct PairUse {
    working: u16,
    backup: u16,
}

#[derive(Clone, Debug)]
pub struct SpectrumState {
    scenario: ScenarioKind,
    wavelengths: usize,
    num_links: usize,
    selectors: Vec<GroupSelector>,
    slots: Vec<Option<SlotOccupancy>>,
    pairs: Vec<PairUse>,
    owned: BTreeMap<RequestId, BTreeSet<usize>>,
}

impl SpectrumState {
    pub fn new(scenario: ScenarioKind, num_links: usize, wavelengths: usize) -> Self {
        let selectors = scenario.selectors();
        SpectrumState {
            scenario,
            wavelengths,
            num_links,
            slots: vec![None; num_links * wavelengths * selectors.len()],
            pairs: vec![PairUse::default(); num_links * wavelengths],
            selectors,
            owned: BTreeMap::new(),
        }
    }

    pub fn scenario(&self) -> ScenarioKind {
        self.scenario
    }

    pub fn wavelengths(&self) -> usize {
        self.wavelengths
    }

    pub fn num_links(&self) -> usize {
        self.num_links
    }

    pub fn selectors(&self) -> &[GroupSelector] {
        &self.selectors
    }

    fn index(&self, key: &SlotKey) -> Result<usize> {
        if key.link >= self.num_links || key.wavelength >= self.wavelengths {
            return Err(Error::Contract(format!(
                "slot link={} wl={} outside state bounds",
                key.link, key.wavelength
            )));
        }
        let s = self
            .selectors
            .iter()
            .position(|&s| s == key.selector)
            .ok_or_else(|| {
                Error::Contract(format!(
                    "group {} not available in {}",
                    key.selector, self.scenario
                ))
            })?;
        Ok((key.link * self.wavelengths + key.wavelength) * self.selectors.len() + s)
    }

    fn key_of(&self, index: usize) -> SlotKey {
        let s = index % self.selectors.len();
        let pair = index / self.selectors.len();
        SlotKey {
            link: pair / self.wavelengths,
            wavelength: pair % self.wavelengths,
            selector: self.selectors[s],
        }
    }

    pub fn slot(&self, key: &SlotKey) -> Option<&SlotOccupancy> {
        self.index(key).ok().and_then(|i| self.slots[i].as_ref())
    }

    /// Whether any group on (link, wavelength) is occupied.
    pub fn is_lit(&self, link: LinkId, wavelength: usize) -> bool {
        let p = self.pairs[link * self.wavelengths + wavelength];
        p.working + p.backup > 0
    }

    pub fn has_working(&self, link: LinkId, wavelength: usize) -> bool {
        self.pairs[link * self.wavelengths + wavelength].working > 0
    }

    pub fn has_backup(&self, link: LinkId, wavelength: usize) -> bool {
        self.pairs[link * self.wavelengths + wavelength].backup > 0
    }

    /// Occupied slots in key order.
    pub fn slots(&self) -> impl Iterator<Item = (SlotKey, &SlotOccupancy)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_ref().map(|o| (self.key_of(i), o)))
    }

    pub fn requests(&self) -> impl Iterator<Item = RequestId> + '_ {
        self.owned.keys().copied()
    }

    /// (link, wavelength) pairs lit only by backups.
    pub fn backup_lit_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| p.backup > 0 && p.working == 0).count()
    }

    pub fn lit_pairs(&self) -> usize {
        self.pairs.iter().filter(|p| p.working + p.backup > 0).count()
    }

    /// Records `request` on every key. All-or-nothing.
    pub fn occupy(
        &mut self,
        keys: &[SlotKey],
        role: SlotRole,
        request: RequestId,
        working_links: &BTreeSet<LinkId>,
    ) -> Result<()> {
        let mut indices = Vec::with_capacity(keys.len());
        for key in keys {
            let i = self.index(key)?;
            if indices.contains(&i) {
                return Err(Error::Contract(format!("duplicate slot {key:?}")));
            }
            let pair = self.pairs[key.link * self.wavelengths + key.wavelength];
            if role.is_backup() && pair.working > 0 || !role.is_backup() && pair.backup > 0 {
                return Err(Error::Conflict(format!(
                    "link {} wavelength {} already carries the other role",
                    key.link, key.wavelength
                )));
            }
            if let Some(occ) = &self.slots[i] {
                let shareable = role == SlotRole::BackupShared
                    && occ.role == SlotRole::BackupShared
                    && !occ.owners.contains(&request)
                    && can_share_slot(occ, working_links)?;
                if !shareable {
                    return Err(Error::Conflict(format!(
                        "slot link={} wl={} group={} held by {} {:?}",
                        key.link,
                        key.wavelength,
                        key.selector,
                        occ.role.label(),
                        occ.owners
                    )));
                }
            }
            indices.push(i);
        }
        for (key, &i) in keys.iter().zip(&indices) {
            let protected = if role == SlotRole::BackupShared {
                working_links.clone()
            } else {
                BTreeSet::new()
            };
            match &mut self.slots[i] {
                Some(occ) => {
                    occ.owners.push(request);
                    occ.protected.push(protected);
                }
                slot @ None => {
                    *slot = Some(SlotOccupancy {
                        role,
                        owners: vec![request],
                        protected: vec![protected],
                    });
                    let pair = &mut self.pairs[key.link * self.wavelengths + key.wavelength];
                    if role.is_backup() {
                        pair.backup += 1;
                    } else {
                        pair.working += 1;
                    }
                }
            }
            self.owned.entry(request).or_default().insert(i);
        }
        Ok(())
    }

    /// Drops `request` from every slot it holds. Returns false if it held none.
    pub fn release(&mut self, request: RequestId) -> bool {
        let Some(indices) = self.owned.remove(&request) else {
            return false;
        };
        for i in indices {
            let key = self.key_of(i);
            let slot = &mut self.slots[i];
            let occ = slot.as_mut().expect("owned slot is occupied");
            let pos = occ
                .owners
                .iter()
                .position(|&o| o == request)
                .expect("owner recorded");
            occ.owners.remove(pos);
            occ.protected.remove(pos);
            if occ.owners.is_empty() {
                let role = occ.role;
                *slot = None;
                let pair = &mut self.pairs[key.link * self.wavelengths + key.wavelength];
                if role.is_backup() {
                    pair.backup -= 1;
                } else {
                    pair.working -= 1;
                }
            }
        }
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReceiverRole {
    Working,
    Backup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverUnit {
    pub selector: GroupSelector,
    pub cost: MimoCost,
    pub role: ReceiverRole,
    pub shareable: bool,
    pub owners: Vec<RequestId>,
    pub protected: Vec<BTreeSet<LinkId>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReceiverAction {
    /// The request's own working receiver already detects this group.
    ReuseWorking,
    /// Join the existing shareable backup unit at this position in the node's list.
    Join(usize),
    Deploy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverPlan {
    pub actions: Vec<(GroupSelector, ReceiverAction, MimoCost)>,
    pub increment: MimoCost,
}

/// Receiver units per destination node.
#[derive(Clone, Debug, Default)]
pub struct MimoPool {
    nodes: BTreeMap<NodeId, Vec<ReceiverUnit>>,
}

impl MimoPool {
    pub fn units_at(&self, node: NodeId) -> &[ReceiverUnit] {
        self.nodes.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn units(&self) -> impl Iterator<Item = (NodeId, &ReceiverUnit)> {
        self.nodes
            .iter()
            .flat_map(|(&n, units)| units.iter().map(move |u| (n, u)))
    }

    pub fn register_working(
        &mut self,
        node: NodeId,
        request: RequestId,
        scenario: ScenarioKind,
        selectors: &[GroupSelector],
    ) -> Result<MimoCost> {
        let mut total = MimoCost::ZERO;
        let mut fresh = Vec::new();
        for &sel in selectors {
            let cost = scenario.detection_cost(sel).ok_or_else(|| {
                Error::Contract(format!("group {sel} not available in {scenario}"))
            })?;
            total += cost;
            fresh.push(ReceiverUnit {
                selector: sel,
                cost,
                role: ReceiverRole::Working,
                shareable: false,
                owners: vec![request],
                protected: vec![BTreeSet::new()],
            });
        }
        self.nodes.entry(node).or_default().extend(fresh);
        Ok(total)
    }

    /// Decides, per backup group, whether the request reuses its working
    /// receiver, joins a shareable backup unit at `dst`, or deploys a new one.
    pub fn plan_backup(
        &self,
        scenario: ScenarioKind,
        dst: NodeId,
        backup: &[GroupSelector],
        working: &[GroupSelector],
        working_links: &BTreeSet<LinkId>,
        sharing: bool,
    ) -> ReceiverPlan {
        let units = self.units_at(dst);
        let mut actions = Vec::with_capacity(backup.len());
        let mut increment = MimoCost::ZERO;
        for &sel in backup {
            if working.contains(&sel) {
                actions.push((sel, ReceiverAction::ReuseWorking, MimoCost::ZERO));
                continue;
            }
            let joinable = sharing
                .then(|| {
                    units.iter().position(|u| {
                        u.role == ReceiverRole::Backup
                            && u.shareable
                            && u.selector == sel
                            && disjoint_from_all(&u.protected, working_links)
                    })
                })
                .flatten();
            match joinable {
                Some(i) => actions.push((sel, ReceiverAction::Join(i), MimoCost::ZERO)),
                None => {
                    let cost = scenario.detection_cost(sel).unwrap_or(MimoCost::ZERO);
                    increment += cost;
                    actions.push((sel, ReceiverAction::Deploy, cost));
                }
            }
        }
        ReceiverPlan { actions, increment }
    }

    /// Incremental backup MIMO cost for `backup` groups at `dst`.
    pub fn additional_backup_mimo(
        &self,
        scenario: ScenarioKind,
        dst: NodeId,
        backup: &[GroupSelector],
        working: &[GroupSelector],
        working_links: &BTreeSet<LinkId>,
        sharing: bool,
    ) -> MimoCost {
        self.plan_backup(scenario, dst, backup, working, working_links, sharing)
            .increment
    }

    pub fn commit_backup(
        &mut self,
        dst: NodeId,
        request: RequestId,
        working_links: &BTreeSet<LinkId>,
        plan: &ReceiverPlan,
        sharing: bool,
    ) {
        let units = self.nodes.entry(dst).or_default();
        for &(sel, action, cost) in &plan.actions {
            match action {
                ReceiverAction::ReuseWorking => {}
                ReceiverAction::Join(i) => {
                    units[i].owners.push(request);
                    units[i].protected.push(working_links.clone());
                }
                ReceiverAction::Deploy => units.push(ReceiverUnit {
                    selector: sel,
                    cost,
                    role: ReceiverRole::Backup,
                    shareable: sharing,
                    owners: vec![request],
                    protected: vec![working_links.clone()],
                }),
            }
        }
    }

    pub fn release(&mut self, request: RequestId) -> bool {
        let mut found = false;
        for units in self.nodes.values_mut() {
            for u in units.iter_mut() {
                if let Some(pos) = u.owners.iter().position(|&o| o == request) {
                    u.owners.remove(pos);
                    u.protected.remove(pos);
                    found = true;
                }
            }
            units.retain(|u| !u.owners.is_empty());
        }
        self.nodes.retain(|_, units| !units.is_empty());
        found
    }

    /// Sum of deployed backup units, each counted once however many share it.
    pub fn backup_total(&self) -> MimoCost {
        self.units()
            .filter(|(_, u)| u.role == ReceiverRole::Backup)
            .map(|(_, u)| u.cost)
            .sum()
    }

    pub fn backup_unit_count(&self) -> usize {
        self.units()
            .filter(|(_, u)| u.role == ReceiverRole::Backup)
            .count()
    }
}

/// Spectrum plus receivers for one run.
#[derive(Clone, Debug)]
pub struct NetworkState {
    pub spectrum: SpectrumState,
    pub mimo: MimoPool,
}

fn fmt_owners(owners: &[RequestId], protected: &[BTreeSet<LinkId>], with_sets: bool) -> String {
    let mut pairs: Vec<_> = owners.iter().zip(protected).collect();
    pairs.sort_by_key(|(o, _)| **o);
    let ids: Vec<String> = pairs.iter().map(|(o, _)| o.to_string()).collect();
    let mut out = format!("owners={}", ids.join(","));
    if with_sets {
        let sets: Vec<String> = pairs
            .iter()
            .map(|(_, s)| s.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("+"))
            .collect();
        let _ = write!(out, " protects={}", sets.join("|"));
    }
    out
}

impl NetworkState {
    pub fn new(scenario: ScenarioKind, num_links: usize, wavelengths: usize) -> Self {
        NetworkState {
            spectrum: SpectrumState::new(scenario, num_links, wavelengths),
            mimo: MimoPool::default(),
        }
    }

    pub fn scenario(&self) -> ScenarioKind {
        self.spectrum.scenario()
    }

    /// Releases every slot and receiver held by `request`.
    pub fn release(&mut self, request: RequestId) -> Result<()> {
        let a = self.spectrum.release(request);
        let b = self.mimo.release(request);
        if a || b {
            Ok(())
        } else {
            Err(Error::UnknownRequest(request))
        }
    }

    /// Deterministic, sorted text serialization of all slots and receivers.
    pub fn dump(&self) -> String {
        let mut out = format!(
            "scenario={} wavelengths={}\n",
            self.spectrum.scenario(),
            self.spectrum.wavelengths()
        );
        for (key, occ) in self.spectrum.slots() {
            let _ = writeln!(
                out,
                "slot link={} wl={} group={} role={} {}",
                key.link,
                key.wavelength,
                key.selector,
                occ.role.label(),
                fmt_owners(&occ.owners, &occ.protected, occ.role == SlotRole::BackupShared)
            );
        }
        let mut receivers: Vec<String> = self
            .mimo
            .units()
            .map(|(node, u)| {
                let role = match u.role {
                    ReceiverRole::Working => "working",
                    ReceiverRole::Backup if u.shareable => "backup-shared",
                    ReceiverRole::Backup => "backup-dedicated",
                };
                format!(
                    "receiver node={} group={} role={} cost={} {}",
                    node,
                    u.selector,
                    role,
                    u.cost,
                    fmt_owners(&u.owners, &u.protected, u.shareable)
                )
            })
            .collect();
        receivers.sort();
        for r in receivers {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }

    /// Sweeps every structural invariant; returns the first violation found.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let sp = &self.spectrum;
        let mut pairs: BTreeMap<(LinkId, usize), (u16, u16)> = BTreeMap::new();
        for (key, occ) in sp.slots() {
            if occ.owners.is_empty() || occ.owners.len() != occ.protected.len() {
                return Err(format!("slot {key:?} has inconsistent owners"));
            }
            if occ.role != SlotRole::BackupShared && occ.owners.len() != 1 {
                return Err(format!("{} slot {key:?} has {} owners", occ.role.label(), occ.owners.len()));
            }
            for i in 0..occ.protected.len() {
                for j in i + 1..occ.protected.len() {
                    if !occ.protected[i].is_disjoint(&occ.protected[j]) {
                        return Err(format!("shared slot {key:?} owners {} and {} overlap", occ.owners[i], occ.owners[j]));
                    }
                }
            }
            let e = pairs.entry((key.link, key.wavelength)).or_default();
            if occ.role.is_backup() {
                e.1 += 1;
            } else {
                e.0 += 1;
            }
        }
        for (&(link, wl), &(w, b)) in &pairs {
            if w > 0 && b > 0 {
                return Err(format!("link {link} wavelength {wl} mixes working and backup"));
            }
            if sp.has_working(link, wl) != (w > 0) || sp.has_backup(link, wl) != (b > 0) {
                return Err(format!("lit counters stale at link {link} wavelength {wl}"));
            }
        }
        if pairs.len() != sp.lit_pairs() {
            return Err("lit pair count mismatch".into());
        }
        for (node, u) in self.mimo.units() {
            if u.owners.is_empty() {
                return Err(format!("empty receiver at node {node}"));
            }
            if !u.shareable && u.owners.len() != 1 {
                return Err(format!("dedicated receiver at node {node} has several owners"));
            }
            for i in 0..u.protected.len() {
                for j in i + 1..u.protected.len() {
                    if !u.protected[i].is_disjoint(&u.protected[j]) {
                        return Err(format!("shared receiver at node {node} has overlapping owners"));
                    }
                }
            }
        }
        Ok(())
    }
}
