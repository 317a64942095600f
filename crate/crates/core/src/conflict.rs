//! Conflict structure in decay spaces: annulus/disk decompositions, link
//! independence predicates, WAFF upper bounds, the dense-ball finder,
//! density dominance, and guard-set construction with verification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::decayspace::{ball, independent_wrt, BallQuery, QuasiMetricSpace};
use crate::error::{Error, Result};
use crate::sinrcore::{min_cross_distance, QuasiLink};

/// Node probability table; index = node id.
pub type NodeProbs = [f64];

/// Result of the two independence predicates for a link pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndependencePair {
    pub gamma1_independent: bool,
    pub r_gamma1_independent: bool,
}

/// Evaluates gamma1-independence (q(j,i) > gamma1 * q_i) and
/// (R, gamma1)-independence (q(j,i) > R*gamma1*q_i/2 or
/// q(j,i)*q(i,j) > gamma1^2*q_i*q_j/4) for a link pair.
///
/// The ordering convention q_j >= q_i is enforced internally, and the
/// cross-link distance q(j,i) is the minimum over the four directed endpoint
/// quasi-distances — the same reading the affectance maximum uses.
pub fn independent_pair(
    i: &QuasiLink,
    j: &QuasiLink,
    space: &QuasiMetricSpace,
    config: &ScenarioConfig,
) -> Result<IndependencePair> {
    // Relabel so `longer` plays the role of j (q_j >= q_i).
    let (shorter, longer) = if j.quasi_length >= i.quasi_length { (i, j) } else { (j, i) };
    let q_i = shorter.quasi_length;
    let q_j = longer.quasi_length;
    let q_ji = min_cross_distance(longer, shorter, space)?;
    let q_ij = min_cross_distance(shorter, longer, space)?;
    let r = longer.power / shorter.power;
    let g = config.gamma1;
    let gamma1_independent = q_ji > g * q_i;
    let r_gamma1_independent =
        q_ji > 0.5 * r * g * q_i || q_ji * q_ij > 0.25 * g * g * q_i * q_j;
    Ok(IndependencePair { gamma1_independent, r_gamma1_independent })
}

/// Concentric annulus disks around one endpoint of a link. Ball k has radius
/// R*q*gamma1 + (k-1)*q; disk k is the annulus between balls k-1 and k. The
/// innermost disk is empty by construction, so nodes inside the first ball
/// (and the center itself) belong to no disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiskDecomposition {
    pub center: usize,
    /// Base quasi-distance unit q.
    pub base: f64,
    /// Power ratio R.
    pub power_ratio: f64,
    pub gamma1: f64,
    /// Disk count K (>= 2).
    pub disk_count: usize,
    /// disks[k-1] holds disk k; disks[0] is always empty.
    pub disks: Vec<Vec<usize>>,
}

/// Which link endpoint a decomposition is centered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Sender,
    Receiver,
}

impl DiskDecomposition {
    /// Radius of ball k (1-based).
    pub fn radius(&self, k: usize) -> f64 {
        self.power_ratio * self.base * self.gamma1 + (k as f64 - 1.0) * self.base
    }

    /// Disk index (1-based) containing a node at directed quasi-distance
    /// `dist` from the center; `None` inside ball 1 or beyond ball K.
    pub fn disk_of_distance(&self, dist: f64) -> Option<usize> {
        if dist <= self.radius(1) || dist > self.radius(self.disk_count) {
            return None;
        }
        for k in 2..=self.disk_count {
            if dist <= self.radius(k) {
                return Some(k);
            }
        }
        None
    }

    pub fn disk_of(&self, space: &QuasiMetricSpace, node: usize) -> Option<usize> {
        if node == self.center {
            return None;
        }
        self.disk_of_distance(space.q(self.center, node))
    }

    /// All nodes assigned to some disk, ascending by disk then id.
    pub fn covered(&self) -> Vec<usize> {
        self.disks.iter().flatten().copied().collect()
    }
}

/// Builds the decomposition around the chosen endpoint of `link`.
pub fn disk_decomposition(
    link: &QuasiLink,
    endpoint: Endpoint,
    space: &QuasiMetricSpace,
    config: &ScenarioConfig,
    power_ratio: f64,
    disk_count: usize,
) -> Result<DiskDecomposition> {
    if disk_count < 2 {
        return Err(Error::InvalidConfig(format!(
            "disk_count = {disk_count} must be at least 2"
        )));
    }
    let center = match endpoint {
        Endpoint::Sender => link.sender,
        Endpoint::Receiver => link.receiver,
    };
    let mut dd = DiskDecomposition {
        center,
        base: link.quasi_length,
        power_ratio,
        gamma1: config.gamma1,
        disk_count,
        disks: vec![Vec::new(); disk_count],
    };
    for z in 0..space.n() {
        if z == center {
            continue;
        }
        if let Some(k) = dd.disk_of_distance(space.q(center, z)) {
            dd.disks[k - 1].push(z);
        }
    }
    Ok(dd)
}

/// WAFF upper-bound evaluation with the hidden constant set to one. The
/// caller compares the measured WAFF against kappa * bound and reports the
/// empirical kappa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaffBound {
    /// (C_DI/C2) * gamma1^(m-2) * (q_i/q) * R^(m-1) * (1 + 1/(R*gamma1)).
    pub decay_bound: f64,
    /// Corollary form (C1/C2) * gamma1^(m-2).
    pub corollary_bound: f64,
    pub power_ratio: f64,
    pub base: f64,
    /// Pairwise 1-independence and (R,gamma1)-independence of the set with
    /// respect to i, as required by the bound's hypotheses.
    pub hypotheses_hold: bool,
}

/// Evaluates the decay-space WAFF bound for `set` against link `i`.
/// R is the maximum power ratio over the set and q the minimum member
/// quasi-length (the equilength base unit); both default to 1/q_i when the
/// set is empty.
pub fn waff_upper_bound(
    set: &[QuasiLink],
    i: &QuasiLink,
    space: &QuasiMetricSpace,
    config: &ScenarioConfig,
) -> Result<WaffBound> {
    let m = config.xi;
    let g = config.gamma1;
    let mut power_ratio = 1.0f64;
    let mut base = i.quasi_length;
    let mut hypotheses_hold = true;
    for j in set {
        power_ratio = power_ratio.max(j.power / i.power);
        base = base.min(j.quasi_length);
        let pair = independent_pair(i, j, space, config)?;
        if !pair.r_gamma1_independent {
            hypotheses_hold = false;
        }
        // 1-independence of the set members among themselves.
        for k in set {
            if k.id <= j.id {
                continue;
            }
            let d = min_cross_distance(k, j, space)?;
            if d <= j.quasi_length.min(k.quasi_length) {
                hypotheses_hold = false;
            }
        }
    }
    let decay_bound = (config.c_di / config.c2)
        * g.powf(m - 2.0)
        * (i.quasi_length / base)
        * power_ratio.powf(m - 1.0)
        * (1.0 + 1.0 / (power_ratio * g));
    let corollary_bound = (config.c1 / config.c2) * g.powf(m - 2.0);
    Ok(WaffBound { decay_bound, corollary_bound, power_ratio, base, hypotheses_hold })
}

/// A q/2-radius ball inside an annulus carrying the probability mass that
/// the receive-probability bound needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBall {
    pub center: usize,
    pub radius: f64,
    pub mass: f64,
    /// Annulus index k > 1 of the center.
    pub annulus: usize,
    /// s <= mass <= 1/2.
    pub cond_mass_window: bool,
    /// Every shell ball keeps mass <= zeta^m * s.
    pub cond_shell_sparse: bool,
    /// Every member's big ball carries mass >= C1 / (2 chi).
    pub cond_member_mass: bool,
    /// Covering number chi(q, radius_k) used in the third condition.
    pub chi: usize,
}

/// Outcome of the dense-ball search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum DenseBallOutcome {
    Found(DenseBall),
    /// The annulus region mass is below C1/2.
    NotFound { region_mass: f64 },
}

/// Searches the annulus region around `center` for the node-centered
/// q/2-ball of maximum probability mass. Candidate centers are restricted to
/// node locations: the continuum search is not computable from a matrix, and
/// node-centered balls realize the maximum over balls containing a node.
pub fn dense_ball(
    center: usize,
    space: &QuasiMetricSpace,
    probs: &NodeProbs,
    decomposition: &DiskDecomposition,
    config: &ScenarioConfig,
) -> Result<DenseBallOutcome> {
    debug_assert_eq!(decomposition.center, center);
    let q = decomposition.base;
    let region = decomposition.covered();
    let region_mass: f64 = region.iter().map(|&z| probs[z]).sum();
    if region_mass < config.c1 / 2.0 {
        return Ok(DenseBallOutcome::NotFound { region_mass });
    }

    // Widened annulus margin for candidate centers.
    let slack = 0.25 * q;
    let outer = decomposition.radius(decomposition.disk_count) + slack;
    let inner = decomposition.radius(1) - slack;
    let mut best: Option<(usize, f64)> = None;
    for w in 0..space.n() {
        if w == center {
            continue;
        }
        let dist = space.q(center, w);
        if dist <= inner || dist > outer {
            continue;
        }
        let members = ball(space, &BallQuery { center: w, radius: q / 2.0 })?;
        let mass: f64 = members.iter().map(|&z| probs[z]).sum();
        let better = match best {
            None => true,
            Some((bw, bm)) => mass > bm || (mass == bm && w < bw),
        };
        if better {
            best = Some((w, mass));
        }
    }
    let Some((w, mass)) = best else {
        return Ok(DenseBallOutcome::NotFound { region_mass });
    };

    let dist = space.q(center, w);
    let annulus = decomposition
        .disk_of_distance(dist)
        .or_else(|| {
            (2..=decomposition.disk_count)
                .find(|&k| dist <= decomposition.radius(k) + slack && dist > decomposition.radius(k - 1) - slack)
        })
        .unwrap_or(2);

    let s = config.dense_s;
    let cond_mass_window = s <= mass && mass <= 0.5;

    // Shells around the dense center.
    let b1 = ball(space, &BallQuery { center: w, radius: q / 2.0 })?;
    let b_h = ball(space, &BallQuery { center: w, radius: config.h_shell * q / 2.0 })?;
    let b_q = ball(space, &BallQuery { center: w, radius: q })?;
    let shell: Vec<usize> = b_q.iter().copied().filter(|z| !b1.contains(z)).collect();
    let _ = &b_h; // shells B2 and B3 partition b_q \ b1; both are swept below
    let zeta_cap = config.zeta.powf(config.xi) * s;
    let mut cond_shell_sparse = true;
    for &x in &shell {
        let members = ball(space, &BallQuery { center: x, radius: q / 2.0 })?;
        let m: f64 = members.iter().map(|&z| probs[z]).sum();
        if m > zeta_cap {
            cond_shell_sparse = false;
            break;
        }
    }

    let radius_k = decomposition.radius(annulus);
    let chi = covering_number(space, center, radius_k, q / 2.0)?;
    let needed = config.c1 / (2.0 * chi as f64);
    let mut cond_member_mass = true;
    for &jn in &b1 {
        let members = ball(space, &BallQuery { center: jn, radius: (radius_k - config.delta1).max(0.0) })?;
        let m: f64 = members.iter().map(|&z| probs[z]).sum();
        if m < needed {
            cond_member_mass = false;
            break;
        }
    }

    Ok(DenseBallOutcome::Found(DenseBall {
        center: w,
        radius: q / 2.0,
        mass,
        annulus,
        cond_mass_window,
        cond_shell_sparse,
        cond_member_mass,
        chi,
    }))
}

/// Greedy covering number of the radius-`r` ball around `center` by balls of
/// radius `cover_radius` centered at member nodes.
pub fn covering_number(
    space: &QuasiMetricSpace,
    center: usize,
    r: f64,
    cover_radius: f64,
) -> Result<usize> {
    let members = ball(space, &BallQuery { center, radius: r })?;
    let mut uncovered: Vec<usize> = members;
    let mut count = 0usize;
    while let Some(&next) = uncovered.first() {
        count += 1;
        let covered = ball(space, &BallQuery { center: next, radius: cover_radius })?;
        uncovered.retain(|z| !covered.contains(z));
    }
    Ok(count)
}

/// Closed-form lower bound on the per-round receive probability:
/// (s/16) * (1/4)^((2*R*gamma1 + 2k - 4)^xi * s).
pub fn receive_probability_bound(s: f64, power_ratio: f64, gamma1: f64, k: usize, xi: f64) -> f64 {
    debug_assert!(s > 0.0 && s <= 0.5, "s = {s} outside (0, 1/2]");
    debug_assert!(k > 1, "bound needs k > 1");
    let east = 2.0 * power_ratio * gamma1 + 2.0 * k as f64 - 4.0;
    (s / 16.0) * 0.25f64.powf(east.powf(xi) * s)
}

/// Density dominance of node `b`: non-receiver probability mass in the ball
/// strictly exceeds `ratio` times the receiver mass.
pub fn density_dominant(
    b: usize,
    receivers: &[usize],
    others: &[usize],
    radius: f64,
    space: &QuasiMetricSpace,
    probs: &NodeProbs,
    ratio: f64,
) -> Result<bool> {
    debug_assert!(
        receivers.iter().all(|r| !others.contains(r)),
        "receiver and non-receiver sets overlap"
    );
    let members = ball(space, &BallQuery { center: b, radius })?;
    let mass = |set: &[usize]| -> f64 {
        members
            .iter()
            .filter(|z| set.contains(z))
            .map(|&z| probs[z])
            .sum()
    };
    Ok(mass(others) > ratio * mass(receivers))
}

/// Which construction produced a guard set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardRole {
    /// Candidates from the annulus disks around the guarded receiver.
    Receiver,
    /// Candidates restricted to the q/2 and h*q/2 shells around the sender,
    /// treated as two pseudo-disks for the mass caps.
    Sender,
}

/// A greedily built set of guards around a node, independent with respect to
/// it, with per-disk probability masses capped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardSet {
    pub target: usize,
    pub role: GuardRole,
    pub guards: Vec<usize>,
    /// Disk index of each guard, parallel to `guards`.
    pub guard_disks: Vec<usize>,
    /// Probability mass accumulated per disk.
    pub disk_mass: BTreeMap<usize, f64>,
    /// Base unit q of the decomposition used.
    pub base: f64,
    /// Candidates rejected by the mass cap (kept for diagnostics).
    pub cap_rejected: usize,
}

/// Greedy guard construction: candidates ascend by quasi-distance from the
/// target and join when the set stays independent with respect to the target
/// and the per-disk mass cap allows it.
pub fn build_guard_set(
    target: usize,
    role: GuardRole,
    decomposition: &DiskDecomposition,
    space: &QuasiMetricSpace,
    probs: &NodeProbs,
    config: &ScenarioConfig,
) -> Result<GuardSet> {
    debug_assert_eq!(decomposition.center, target);
    let q = decomposition.base;
    // (candidate, disk index) pool per role.
    let mut pool: Vec<(usize, usize)> = match role {
        GuardRole::Receiver => decomposition
            .disks
            .iter()
            .enumerate()
            .flat_map(|(ix, disk)| disk.iter().map(move |&z| (z, ix + 1)))
            .collect(),
        GuardRole::Sender => {
            let inner = ball(space, &BallQuery { center: target, radius: q / 2.0 })?;
            let outer =
                ball(space, &BallQuery { center: target, radius: config.h_shell * q / 2.0 })?;
            let mut v: Vec<(usize, usize)> = inner
                .iter()
                .filter(|&&z| z != target)
                .map(|&z| (z, 1))
                .collect();
            v.extend(
                outer
                    .iter()
                    .filter(|&&z| z != target && !inner.contains(&z))
                    .map(|&z| (z, 2)),
            );
            v
        }
    };
    pool.sort_by(|a, b| {
        space
            .q(target, a.0)
            .total_cmp(&space.q(target, b.0))
            .then(a.0.cmp(&b.0))
    });

    let mut guards: Vec<usize> = Vec::new();
    let mut guard_disks: Vec<usize> = Vec::new();
    let mut disk_mass: BTreeMap<usize, f64> = BTreeMap::new();
    let mut cap_rejected = 0usize;
    for (cand, disk) in pool {
        let used = disk_mass.get(&disk).copied().unwrap_or(0.0);
        if used + probs[cand] > config.guard_mass_cap {
            cap_rejected += 1;
            continue;
        }
        guards.push(cand);
        if independent_wrt(space, target, &guards)? {
            guard_disks.push(disk);
            *disk_mass.entry(disk).or_insert(0.0) += probs[cand];
        } else {
            guards.pop();
        }
    }
    Ok(GuardSet { target, role, guards, guard_disks, disk_mass, base: q, cap_rejected })
}

/// One verification failure with its witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GuardViolation {
    /// The constructed set is not independent with respect to the target.
    Independence { member: usize },
    /// min over guards of q(z, g) exceeds q(z, target).
    Property1 { z: usize, nearest_guard: f64, to_target: f64 },
    /// A non-guard sees guard mass above s/2 inside its target-radius ball.
    MassCondition { b: usize, mass: f64, cap: f64 },
    /// A disk accumulated more guard mass than its cap.
    DiskCap { disk: usize, mass: f64, cap: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GuardReport {
    pub violations: Vec<GuardViolation>,
    /// Guards whose surrounding base-radius ball carries activation mass
    /// below s/2 (informational, not a violation).
    pub inactive_guards: Vec<usize>,
}

impl GuardReport {
    pub fn independence_ok(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v, GuardViolation::Independence { .. }))
    }

    pub fn property1_violations(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| matches!(v, GuardViolation::Property1 { .. }))
            .count()
    }
}

/// Re-verifies a guard set: set independence, the guarding property
/// (every other node has a guard at least as close as the target), the s/2
/// mass condition for non-guards, the per-disk caps, and the activation
/// masses.
pub fn verify_guard_property(
    gs: &GuardSet,
    space: &QuasiMetricSpace,
    probs: &NodeProbs,
    config: &ScenarioConfig,
) -> Result<GuardReport> {
    let mut report = GuardReport::default();

    if !independent_wrt(space, gs.target, &gs.guards)? {
        // Localize the offender: first member whose removal restores it.
        for &g in &gs.guards {
            let rest: Vec<usize> = gs.guards.iter().copied().filter(|&z| z != g).collect();
            if independent_wrt(space, gs.target, &rest)? {
                report.violations.push(GuardViolation::Independence { member: g });
                break;
            }
        }
        if report.independence_ok() {
            report
                .violations
                .push(GuardViolation::Independence { member: gs.guards[0] });
        }
    }

    for z in 0..space.n() {
        if z == gs.target || gs.guards.contains(&z) {
            continue;
        }
        let nearest = gs
            .guards
            .iter()
            .map(|&g| space.q(z, g))
            .fold(f64::INFINITY, f64::min);
        let to_target = space.q(z, gs.target);
        if nearest > to_target {
            report.violations.push(GuardViolation::Property1 {
                z,
                nearest_guard: nearest,
                to_target,
            });
        }
    }

    let cap = config.dense_s / 2.0;
    for b in 0..space.n() {
        if b == gs.target || gs.guards.contains(&b) {
            continue;
        }
        let radius = space.q(b, gs.target);
        let members = ball(space, &BallQuery { center: b, radius })?;
        let mass: f64 = members
            .iter()
            .filter(|z| gs.guards.contains(z))
            .map(|&z| probs[z])
            .sum();
        let intersects = members.iter().any(|z| gs.guards.contains(z));
        if intersects && mass > cap {
            report.violations.push(GuardViolation::MassCondition { b, mass, cap });
        }
    }

    for (&disk, &mass) in &gs.disk_mass {
        if mass > config.guard_mass_cap {
            report.violations.push(GuardViolation::DiskCap {
                disk,
                mass,
                cap: config.guard_mass_cap,
            });
        }
    }

    for &g in &gs.guards {
        let members = ball(space, &BallQuery { center: g, radius: gs.base })?;
        let mass: f64 = members.iter().filter(|&&z| z != g).map(|&z| probs[z]).sum();
        if mass < config.dense_s / 2.0 {
            report.inactive_guards.push(g);
        }
    }

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decayspace::closure_quasi_metric;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    fn plane_space(points: &[(f64, f64)], alpha: f64) -> QuasiMetricSpace {
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|a| {
                points
                    .iter()
                    .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt().powf(alpha))
                    .collect()
            })
            .collect();
        QuasiMetricSpace::from_matrix(rows).unwrap()
    }

    fn link(id: usize, s: usize, r: usize, p: f64, space: &QuasiMetricSpace) -> QuasiLink {
        QuasiLink::from_space(id, s, r, p, 0.25, space)
    }

    #[test]
    fn independence_predicates() {
        // cross distance 2, q_i = q_j = 1, gamma1 = 1
        let space = plane_space(&[(0.0, 0.0), (1.0, 0.0), (3.0, 0.0), (4.0, 0.0)], 1.0);
        let i = link(0, 0, 1, 1.0, &space);
        let j = link(1, 2, 3, 1.0, &space);
        let config = cfg();
        let pair = independent_pair(&i, &j, &space, &config).unwrap();
        assert!(pair.gamma1_independent);
        // R = 1: 2 > 0.5 holds
        assert!(pair.r_gamma1_independent);
    }

    #[test]
    fn independence_r4_first_disjunct_fails() {
        // R = 4, gamma1 = 1, q_i = 1, cross distance 1.9: 1.9 > 2 fails,
        // product disjunct decides: 1.9 * 1.9 > 0.25 * q_i * q_j.
        let space = plane_space(&[(0.0, 0.0), (1.0, 0.0), (2.9, 0.0), (3.9, 0.0)], 1.0);
        let i = link(0, 0, 1, 1.0, &space);
        let j = link(1, 2, 3, 4.0, &space);
        let config = cfg();
        let q_ji = min_cross_distance(&j, &i, &space).unwrap();
        assert!((q_ji - 1.9).abs() < 1e-12);
        assert!(!(q_ji > 0.5 * 4.0 * 1.0 * 1.0));
        let pair = independent_pair(&i, &j, &space, &config).unwrap();
        // product: 1.9 * 1.9 = 3.61 > 0.25 * 1 * 1
        assert!(pair.r_gamma1_independent);
    }

    #[test]
    fn coincident_links_are_dependent() {
        let space = plane_space(&[(0.0, 0.0), (1.0, 0.0), (0.001, 0.0), (1.001, 0.0)], 1.0);
        let i = link(0, 0, 1, 1.0, &space);
        let j = link(1, 2, 3, 1.0, &space);
        let pair = independent_pair(&i, &j, &space, &cfg()).unwrap();
        assert!(!pair.gamma1_independent);
        assert!(!pair.r_gamma1_independent);
    }

    #[test]
    fn disk_assignment_edges() {
        // R*q*gamma1 = 1, q = 1: ball radii 1, 2, 3, ...
        let space = plane_space(
            &[(0.0, 0.0), (1.0, 0.0), (1.5, 0.0), (5.0, 0.0), (0.2, 0.0)],
            1.0,
        );
        let l = link(0, 0, 1, 1.0, &space);
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &cfg(), 1.0, 3).unwrap();
        // node 2 at distance 1.5 = R*q*gamma1 + 0.5q -> disk 2
        assert_eq!(dd.disk_of(&space, 2), Some(2));
        // node 3 beyond the outermost radius 3 -> no disk
        assert_eq!(dd.disk_of(&space, 3), None);
        // the center -> no disk
        assert_eq!(dd.disk_of(&space, 0), None);
        // node 4 inside ball 1 -> no disk (innermost disk is empty)
        assert_eq!(dd.disk_of(&space, 4), None);
        assert!(dd.disks[0].is_empty());
    }

    #[test]
    fn disks_partition_their_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = (0..20)
            .map(|_| (rng.gen_range(0.0..10.0), rng.gen_range(0.0..10.0)))
            .collect();
        let space = plane_space(&pts, 1.0);
        let l = link(0, 0, 1, 1.0, &space);
        let dd = disk_decomposition(&l, Endpoint::Receiver, &space, &cfg(), 1.0, 6).unwrap();
        let mut seen = std::collections::HashSet::new();
        for disk in &dd.disks {
            for &z in disk {
                assert!(seen.insert(z), "node {z} in two disks");
            }
        }
    }

    #[test]
    fn waff_bound_example_values() {
        let space = plane_space(&[(0.0, 0.0), (1.0, 0.0), (9.0, 0.0), (10.0, 0.0)], 1.0);
        let config = ScenarioConfig { xi: 3.0, gamma1: 1.0, c_di: 1.0, c2: 0.5, c1: 1.0, ..cfg() };
        let i = link(0, 0, 1, 1.0, &space);
        let j = link(1, 2, 3, 1.0, &space);
        let bound = waff_upper_bound(&[j], &i, &space, &config).unwrap();
        // gamma1^(m-2) = 1, q_i/q = 1, R^(m-1) = 1, 1 + 1/(R*gamma1) = 2
        assert_eq!(bound.decay_bound, 2.0 * config.c_di / config.c2);
        assert_eq!(bound.corollary_bound, config.c1 / config.c2);
        assert!(bound.hypotheses_hold);
        // empty set: measured waff 0 fits under any bound
        let empty = waff_upper_bound(&[], &i, &space, &config).unwrap();
        assert!(empty.decay_bound > 0.0);
    }

    #[test]
    fn receive_probability_bound_values() {
        let b = receive_probability_bound(0.25, 1.0, 1.0, 2, 2.0);
        assert_eq!(b, 0.00390625);
        // monotone decreasing in k
        assert!(receive_probability_bound(0.25, 1.0, 1.0, 3, 2.0) < b);
        // s -> 0 drives the bound to 0
        assert!(receive_probability_bound(1e-9, 1.0, 1.0, 2, 2.0) < 1e-8);
        // exponent base 2*R*gamma1 + 2k - 4 = 2 at k = 2, R*gamma1 = 1
        assert_eq!(2.0 * 1.0 * 1.0 + 2.0 * 2.0 - 4.0, 2.0);
    }

    #[test]
    fn density_dominance_cases() {
        let space = plane_space(&[(0.0, 0.0), (0.5, 0.0), (0.9, 0.0), (5.0, 0.0)], 1.0);
        let probs = vec![0.3, 0.3, 0.2, 0.9];
        // no receivers in the ball, one other with positive mass
        assert!(density_dominant(0, &[3], &[1, 2], 1.0, &space, &probs, 1.0).unwrap());
        // equal masses at ratio 1: strict inequality fails
        let probs_eq = vec![0.0, 0.25, 0.25, 0.9];
        assert!(!density_dominant(0, &[1], &[2], 1.0, &space, &probs_eq, 1.0).unwrap());
        // 0.6 vs 0.2 at ratio 2: 0.6 > 0.4
        let probs2 = vec![0.0, 0.2, 0.6, 0.9];
        assert!(density_dominant(0, &[1], &[2], 1.0, &space, &probs2, 2.0).unwrap());
    }

    #[test]
    fn dense_ball_single_carrier_and_not_found() {
        let config = ScenarioConfig { c1: 0.5, dense_s: 0.25, ..cfg() };
        // node 1 alone inside the annulus carries C1/2
        let space = plane_space(&[(0.0, 0.0), (1.5, 0.0), (9.0, 0.0), (9.5, 0.0)], 1.0);
        let l = QuasiLink::new(0, 0, 3, 1.0, 1.0, 0.25); // base unit q = 1
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &config, 1.0, 3).unwrap();
        let probs = vec![0.0, 0.25, 0.0, 0.0];
        match dense_ball(0, &space, &probs, &dd, &config).unwrap() {
            DenseBallOutcome::Found(db) => {
                assert_eq!(db.center, 1);
                assert_eq!(db.mass, 0.25);
                assert_eq!(db.annulus, 2);
                assert!(db.cond_mass_window);
            }
            other => panic!("expected dense ball, got {other:?}"),
        }
        // drain the mass: not found, with the measured region mass
        let sparse = vec![0.0, 0.1, 0.0, 0.0];
        match dense_ball(0, &space, &sparse, &dd, &config).unwrap() {
            DenseBallOutcome::NotFound { region_mass } => assert_eq!(region_mass, 0.1),
            other => panic!("expected not-found, got {other:?}"),
        }
    }

    #[test]
    fn dense_ball_matches_exhaustive_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|_| (rng.gen_range(0.0..4.0), rng.gen_range(0.0..4.0)))
            .collect();
        let space = plane_space(&pts, 1.0);
        let probs: Vec<f64> = (0..10).map(|_| rng.gen_range(0.05..0.4)).collect();
        let config = ScenarioConfig { c1: 0.2, ..cfg() };
        let l = QuasiLink::new(0, 0, 1, 1.0, 1.0, 0.25);
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &config, 1.0, 8).unwrap();
        if let DenseBallOutcome::Found(db) = dense_ball(0, &space, &probs, &dd, &config).unwrap() {
            // brute force over every candidate center in the widened annulus
            let slack = 0.25;
            let mut best = 0.0f64;
            for w in 1..10 {
                let d = space.q(0, w);
                if d <= dd.radius(1) - slack || d > dd.radius(8) + slack {
                    continue;
                }
                let members = ball(&space, &BallQuery { center: w, radius: 0.5 }).unwrap();
                let mass: f64 = members.iter().map(|&z| probs[z]).sum();
                best = best.max(mass);
            }
            assert_eq!(db.mass, best);
        }
    }

    #[test]
    fn guard_set_two_node_space() {
        let space = plane_space(&[(0.0, 0.0), (1.5, 0.0)], 1.0);
        let l = QuasiLink::new(0, 0, 1, 1.0, 1.0, 0.25);
        let config = cfg();
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &config, 1.0, 4).unwrap();
        let probs = vec![0.1, 0.1];
        let gs = build_guard_set(0, GuardRole::Receiver, &dd, &space, &probs, &config).unwrap();
        assert_eq!(gs.guards, vec![1]);
    }

    #[test]
    fn guard_set_cluster_collapses_to_one() {
        // a tight cluster of mutually covering nodes in one disk
        let space = plane_space(
            &[(0.0, 0.0), (1.3, 0.0), (1.35, 0.0), (1.4, 0.0), (1.45, 0.0)],
            1.0,
        );
        let l = QuasiLink::new(0, 0, 1, 1.0, 1.0, 0.25);
        let config = cfg();
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &config, 1.0, 4).unwrap();
        let probs = vec![0.1; 5];
        let gs = build_guard_set(0, GuardRole::Receiver, &dd, &space, &probs, &config).unwrap();
        assert_eq!(gs.guards.len(), 1, "cluster should yield exactly one guard");
        assert!(independent_wrt(&space, 0, &gs.guards).unwrap());
    }

    #[test]
    fn guard_set_empty_disks() {
        let space = plane_space(&[(0.0, 0.0), (100.0, 0.0)], 1.0);
        let l = QuasiLink::new(0, 0, 1, 1.0, 1.0, 0.25);
        let config = cfg();
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &config, 1.0, 3).unwrap();
        let probs = vec![0.1, 0.1];
        let gs = build_guard_set(0, GuardRole::Receiver, &dd, &space, &probs, &config).unwrap();
        assert!(gs.guards.is_empty());
    }

    #[test]
    fn sender_role_restricts_to_shells() {
        let space = plane_space(
            &[(0.0, 0.0), (0.3, 0.0), (0.8, 0.0), (3.0, 0.0), (9.0, 0.0)],
            1.0,
        );
        let _l = QuasiLink::new(0, 0, 4, 1.0, 1.0, 0.25);
        let config = cfg(); // h = 2: shells at q/2 = 0.5 and q = 1.0
        let dd = DiskDecomposition {
            center: 0,
            base: 1.0,
            power_ratio: 1.0,
            gamma1: 1.0,
            disk_count: 4,
            disks: vec![vec![]; 4],
        };
        let probs = vec![0.1; 5];
        let gs = build_guard_set(0, GuardRole::Sender, &dd, &space, &probs, &config).unwrap();
        // candidates: node 1 (inner shell), node 2 (outer shell); node 3, 4 out
        assert!(gs.guards.contains(&1));
        assert!(!gs.guards.contains(&3));
        assert!(!gs.guards.contains(&4));
    }

    #[test]
    fn verify_all_other_nodes_guard_trivially() {
        let space = plane_space(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.5, 0.0)], 1.0);
        let config = cfg();
        let gs = GuardSet {
            target: 0,
            role: GuardRole::Receiver,
            guards: vec![1, 2, 3],
            guard_disks: vec![2, 2, 3],
            disk_mass: BTreeMap::new(),
            base: 1.0,
            cap_rejected: 0,
        };
        let probs = vec![0.05; 4];
        let report = verify_guard_property(&gs, &space, &probs, &config).unwrap();
        assert_eq!(report.property1_violations(), 0);
    }

    #[test]
    fn verify_empty_guard_set_violates_property1() {
        let space = plane_space(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 1.0);
        let gs = GuardSet {
            target: 0,
            role: GuardRole::Receiver,
            guards: vec![],
            guard_disks: vec![],
            disk_mass: BTreeMap::new(),
            base: 1.0,
            cap_rejected: 0,
        };
        let probs = vec![0.05; 3];
        let report = verify_guard_property(&gs, &space, &probs, &cfg()).unwrap();
        assert!(report.property1_violations() > 0);
    }

    #[test]
    fn greedy_output_verifies_cleanly_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 8;
        let raw: Vec<Vec<f64>> = (0..n)
            .map(|u| {
                (0..n)
                    .map(|v| if u == v { 0.0 } else { rng.gen_range(1.0..4.0) })
                    .collect()
            })
            .collect();
        let space = closure_quasi_metric(raw).unwrap();
        let probs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.1)).collect();
        let config = cfg();
        // base unit = nearest-neighbour distance keeps ball 1 empty of nodes
        let base = (1..n).map(|z| space.q(0, z)).fold(f64::INFINITY, f64::min);
        let l = QuasiLink::new(0, 0, 1, base, 1.0, 0.25);
        let max_d = (1..n).map(|z| space.q(0, z)).fold(0.0f64, f64::max);
        let disks = ((max_d - config.gamma1 * base) / base).ceil() as usize + 2;
        let dd = disk_decomposition(&l, Endpoint::Sender, &space, &config, 1.0, disks).unwrap();
        let gs = build_guard_set(0, GuardRole::Receiver, &dd, &space, &probs, &config).unwrap();
        let report = verify_guard_property(&gs, &space, &probs, &config).unwrap();
        assert!(report.independence_ok());
        assert!(independent_wrt(&space, 0, &gs.guards).unwrap());
    }
}
