//! SINR evaluation, power-condition checks, affectance and WAFF, and
//! acknowledgement powers with reverse affectance.
//!
//! Two distinct notions of interference coexist on purpose. The simulator's
//! ground truth is the SINR ratio, whose interference term is measured
//! sender-to-receiver only. The gate quantity is the affectance, which takes
//! the maximum over all four endpoint pairings and therefore
//! over-approximates. See [`affectance`] and [`sinr`].

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::decayspace::QuasiMetricSpace;
use crate::error::{Error, Result};

pub use crate::config::ScenarioConfig as Config;

/// A directed communication request with its power and color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiLink {
    pub id: usize,
    pub sender: usize,
    pub receiver: usize,
    /// Link quasi-length q_i = q(sender, receiver).
    pub quasi_length: f64,
    pub power: f64,
    /// Transmission probability, the link's color.
    pub prob: f64,
    pub active: bool,
}

impl QuasiLink {
    pub fn new(
        id: usize,
        sender: usize,
        receiver: usize,
        quasi_length: f64,
        power: f64,
        prob: f64,
    ) -> Self {
        debug_assert!(power > 0.0 && quasi_length > 0.0);
        Self { id, sender, receiver, quasi_length, power, prob, active: true }
    }

    /// Builds the link reading its quasi-length from the space.
    pub fn from_space(
        id: usize,
        sender: usize,
        receiver: usize,
        power: f64,
        prob: f64,
        space: &QuasiMetricSpace,
    ) -> Self {
        Self::new(id, sender, receiver, space.q(sender, receiver), power, prob)
    }

    /// Reverse quasi-length q_i* = q(receiver, sender).
    pub fn reverse_length(&self, space: &QuasiMetricSpace) -> f64 {
        space.q(self.receiver, self.sender)
    }
}

/// SINR at the receiver of `i` against a concurrent transmitter set.
///
/// With no interference and zero noise the ratio is reported as the +inf
/// sentinel: a noiseless isolated link always succeeds.
pub fn sinr(
    i: &QuasiLink,
    concurrent: &[&QuasiLink],
    space: &QuasiMetricSpace,
    config: &ScenarioConfig,
) -> Result<f64> {
    let signal = i.power / i.quasi_length;
    let mut interference = 0.0;
    for j in concurrent {
        if j.id == i.id {
            continue;
        }
        let d = space.q(j.sender, i.receiver);
        if d <= 0.0 {
            return Err(Error::ZeroCrossDistance { from: j.sender, to: i.receiver });
        }
        interference += j.power / d;
    }
    let denom = interference + config.noise;
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(signal / denom)
}

/// True when every member of `set` decodes against the rest of the set.
pub fn sinr_feasible(
    set: &[&QuasiLink],
    space: &QuasiMetricSpace,
    config: &ScenarioConfig,
) -> Result<bool> {
    for i in set {
        if sinr(i, set, space, config)? < config.beta {
            return Ok(false);
        }
    }
    Ok(true)
}

/// One violated power condition with its witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerViolation {
    /// P_v < c * beta * N * q_v.
    Floor { link: usize, power: f64, required: f64 },
    /// Longer link carries more power.
    Monotone { long: usize, short: usize },
    /// Longer link carries a larger P/q ratio.
    MonotoneRatio { long: usize, short: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerConditionReport {
    pub violations: Vec<PowerViolation>,
}

impl PowerConditionReport {
    pub fn is_satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks condition (i) P_v >= c*beta*N*q_v and condition (ii): whenever
/// q_v >= q_w, the longer link must satisfy P_v <= P_w and P_v/q_v <= P_w/q_w.
pub fn power_conditions_check(
    links: &[QuasiLink],
    _space: &QuasiMetricSpace,
    config: &ScenarioConfig,
) -> PowerConditionReport {
    let mut violations = Vec::new();
    let floor = config.power_margin * config.beta * config.noise;
    for v in links {
        let required = floor * v.quasi_length;
        if v.power < required {
            violations.push(PowerViolation::Floor { link: v.id, power: v.power, required });
        }
    }
    for v in links {
        for w in links {
            if v.id == w.id {
                continue;
            }
            // q_v^-1 <= q_w^-1, i.e. v is the longer link.
            if v.quasi_length >= w.quasi_length {
                if v.power > w.power {
                    violations.push(PowerViolation::Monotone { long: v.id, short: w.id });
                }
                if v.power / v.quasi_length > w.power / w.quasi_length {
                    violations.push(PowerViolation::MonotoneRatio { long: v.id, short: w.id });
                }
            }
        }
    }
    PowerConditionReport { violations }
}

/// The four cross quasi-distances between endpoints of `j` and endpoints of
/// `i`: sender/receiver of `j` against receiver/sender of `i`.
pub fn cross_distances(
    j: &QuasiLink,
    i: &QuasiLink,
    space: &QuasiMetricSpace,
) -> Result<[f64; 4]> {
    let pairs = [
        (j.sender, i.receiver),
        (j.receiver, i.receiver),
        (j.sender, i.sender),
        (j.receiver, i.sender),
    ];
    let mut out = [0.0; 4];
    for (slot, (from, to)) in pairs.into_iter().enumerate() {
        let d = space.q(from, to);
        if d <= 0.0 {
            return Err(Error::ZeroCrossDistance { from, to });
        }
        out[slot] = d;
    }
    Ok(out)
}

/// Minimum directed cross quasi-distance between two links, the reading of
/// q(j,i) used by the independence predicates.
pub fn min_cross_distance(
    j: &QuasiLink,
    i: &QuasiLink,
    space: &QuasiMetricSpace,
) -> Result<f64> {
    Ok(cross_distances(j, i, space)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Affectance of link `j` on link `i`: the maximum of R*q_i/q(x,y) over the
/// four endpoint pairings, with R = P_j/P_i.
pub fn affectance(j: &QuasiLink, i: &QuasiLink, space: &QuasiMetricSpace) -> Result<f64> {
    debug_assert_ne!(j.id, i.id, "affectance of a link on itself");
    let r = j.power / i.power;
    let num = r * i.quasi_length;
    Ok(cross_distances(j, i, space)?
        .into_iter()
        .map(|d| num / d)
        .fold(0.0, f64::max))
}

/// Capped per-pair variant min(1, c * p_j q_i / (p_i q_ji)) with q_ji the
/// minimum cross distance. Kept alongside the formal definition because the
/// scheduling pseudocode names this form.
pub fn capped_pair_affectance(
    j: &QuasiLink,
    i: &QuasiLink,
    space: &QuasiMetricSpace,
    cap_const: f64,
) -> Result<f64> {
    let q_ji = min_cross_distance(j, i, space)?;
    if i.prob <= 0.0 {
        return Err(Error::ZeroProbabilityMass);
    }
    Ok((cap_const * j.prob * i.quasi_length / (i.prob * q_ji)).min(1.0))
}

/// Probability-weighted average affectance of `set` on `i`. Empty sets
/// average to zero by convention so the first scheduled link passes the gate.
pub fn waff<'a, I>(set: I, i: &QuasiLink, space: &QuasiMetricSpace) -> Result<f64>
where
    I: IntoIterator<Item = &'a QuasiLink>,
{
    let mut weighted = 0.0;
    let mut total = 0.0;
    let mut nonempty = false;
    for j in set {
        nonempty = true;
        weighted += j.prob * affectance(j, i, space)?;
        total += j.prob;
    }
    if !nonempty {
        return Ok(0.0);
    }
    if total <= 0.0 {
        return Err(Error::ZeroProbabilityMass);
    }
    Ok(weighted / total)
}

/// Outcome of the DP-feasibility gate together with the GDP lower-bound
/// companion flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub waff: f64,
    pub threshold: f64,
    pub pass: bool,
    pub gdp_threshold: f64,
    /// waff >= delta_1 / C_DI.
    pub gdp_lower: bool,
}

/// DP-feasibility gate: waff(S,i) against the configured threshold form,
/// plus the GDP lower-bound condition reported separately.
pub fn dp_feasible_gate<'a, I>(
    set: I,
    i: &QuasiLink,
    space: &QuasiMetricSpace,
    config: &ScenarioConfig,
) -> Result<GateDecision>
where
    I: IntoIterator<Item = &'a QuasiLink>,
{
    let value = waff(set, i, space)?;
    let threshold = config.gate_threshold_value();
    let gdp_threshold = config.delta1 / config.c_di;
    Ok(GateDecision {
        waff: value,
        threshold,
        pass: value <= threshold,
        gdp_threshold,
        gdp_lower: value >= gdp_threshold,
    })
}

/// Acknowledgement power from the raw quantities:
/// P* = P * q_i^* * q_ji / (q_i * q_ji^*).
pub fn ack_power_from_parts(
    power: f64,
    q_i: f64,
    q_i_star: f64,
    q_ji: f64,
    q_ji_star: f64,
) -> f64 {
    power * q_i_star * q_ji / (q_i * q_ji_star)
}

/// Acknowledgement power for link `i` in the interference environment of
/// link `j`.
///
/// q_ji is the forward interference distance q(s_j, r_i) and q_ji^* its
/// reversal q(r_i, s_j), so in a fully symmetric space every ratio cancels
/// and P* = P exactly.
pub fn ack_power(i: &QuasiLink, j: &QuasiLink, space: &QuasiMetricSpace) -> Result<f64> {
    let q_i = i.quasi_length;
    let q_i_star = i.reverse_length(space);
    let q_ji = space.q(j.sender, i.receiver);
    let q_ji_star = space.q(i.receiver, j.sender);
    for (d, from, to) in [
        (q_i_star, i.receiver, i.sender),
        (q_ji, j.sender, i.receiver),
        (q_ji_star, i.receiver, j.sender),
    ] {
        if d <= 0.0 {
            return Err(Error::ZeroCrossDistance { from, to });
        }
    }
    Ok(ack_power_from_parts(i.power, q_i, q_i_star, q_ji, q_ji_star))
}

/// Acknowledgement power for an isolated link (no interferer to calibrate
/// against): the distance ratio degenerates and only the reverse-length
/// compensation remains.
pub fn ack_power_isolated(i: &QuasiLink, space: &QuasiMetricSpace) -> Result<f64> {
    let q_i_star = i.reverse_length(space);
    if q_i_star <= 0.0 {
        return Err(Error::ZeroCrossDistance { from: i.receiver, to: i.sender });
    }
    Ok(i.power * q_i_star / i.quasi_length)
}

/// The reverse link of `i`: acknowledgements travel receiver to sender.
pub fn reverse_link(i: &QuasiLink, space: &QuasiMetricSpace, ack_power: f64) -> QuasiLink {
    QuasiLink {
        id: i.id,
        sender: i.receiver,
        receiver: i.sender,
        quasi_length: i.reverse_length(space),
        power: ack_power,
        prob: i.prob,
        active: i.active,
    }
}

/// Forward affectance, reverse affectance under acknowledgement powers, and
/// their ratio. The harness aggregates the maximum ratio over an instance as
/// the empirical hidden constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AckAffectance {
    pub reverse: f64,
    pub forward: f64,
    pub ratio: f64,
}

pub fn ack_affectance_ratio(
    i: &QuasiLink,
    j: &QuasiLink,
    space: &QuasiMetricSpace,
    _config: &ScenarioConfig,
) -> Result<AckAffectance> {
    let forward = affectance(j, i, space)?;
    let p_i_star = ack_power(i, j, space)?;
    let p_j_star = ack_power(j, i, space)?;
    let i_rev = reverse_link(i, space, p_i_star);
    let j_rev = reverse_link(j, space, p_j_star);
    let reverse = affectance(&j_rev, &i_rev, space)?;
    let ratio = if forward > 0.0 { reverse / forward } else { f64::INFINITY };
    Ok(AckAffectance { reverse, forward, ratio })
}

/// Dense pairwise affectance table; the diagonal is zero by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectanceMatrix {
    pub n: usize,
    /// Row-major: entry (j, i) is the affectance of link j on link i.
    pub a: Vec<f64>,
    pub power_scheme: String,
}

impl AffectanceMatrix {
    pub fn compute(
        links: &[QuasiLink],
        space: &QuasiMetricSpace,
        power_scheme: &str,
    ) -> Result<Self> {
        let n = links.len();
        let mut a = vec![0.0; n * n];
        for (jx, j) in links.iter().enumerate() {
            for (ix, i) in links.iter().enumerate() {
                if jx != ix {
                    a[jx * n + ix] = affectance(j, i, space)?;
                }
            }
        }
        Ok(Self { n, a, power_scheme: power_scheme.to_string() })
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.a[j * self.n + i]
    }
}
