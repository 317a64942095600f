//! Scenario configuration: every model constant in one place.
//!
//! All constants that the algorithms consume are surfaced here with their
//! defaults, so a run is auditable from its config block alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How transmit powers are assigned to generated links.
///
/// `Uniform` and `InverseLength` satisfy both power conditions by
/// construction; `Proportional` (P = c*beta*N*q) satisfies condition (i) at
/// equality but violates the monotonicity condition (ii) whenever link
/// lengths differ, which makes it useful for exercising the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PowerScheme {
    Uniform,
    #[default]
    InverseLength,
    Proportional,
}

/// Which quantity the scheduling engine uses as its WAFF gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WaffGateMode {
    /// The formal weighted-average-affectance definition.
    #[default]
    Definition,
    /// The capped per-pair form min(1, c*p_j*q_i/(p_i*q_ji)) restricted to
    /// links passing the distance gate.
    CappedPair,
}

/// Threshold form for the DP-feasibility gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GateThreshold {
    /// C1/(beta*C2) — the form used inside the scheduling loop.
    #[default]
    Scaled,
    /// 1/(beta*C2) — the form stated with the feasibility proposition.
    Plain,
}

/// Battery accounting rule for the broadcast engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ChargeModel {
    /// Charge p_i once per acknowledged delivery (default).
    #[default]
    PerDelivery,
    /// Charge p_i per targeted receiver, successful or not.
    PerAttempt,
    /// Charge p_i once per round.
    PerRound,
}

/// Distribution of online receiver arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverDraw {
    #[default]
    Uniform,
    /// Weight receiver z proportionally to 1/(1+rank) by distance.
    NearBiased,
}

/// How per-state success probabilities are obtained for PID analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SuccessProbMode {
    /// Exact coverage fraction under the draw distribution.
    #[default]
    Exact,
    /// Empirical frequency over a seeded calibration phase.
    Empirical,
}

/// All model constants for both engines plus instance synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    // ---- SINR model ----
    /// Path-loss exponent, must lie in (2,6) when `strict`.
    pub alpha: f64,
    /// SINR decoding threshold.
    pub beta: f64,
    /// Per-subset threshold used by the palette size formula.
    pub beta_prime: f64,
    /// Ambient noise at every receiver.
    pub noise: f64,
    /// Power condition (i) margin c > 1.
    pub power_margin: f64,

    // ---- density / independence bounds ----
    /// Upper bound on per-ball probability mass.
    pub c1: f64,
    /// Lower bound on per-ball probability mass, 0 < c2 <= c1.
    pub c2: f64,
    /// Independence-dimension density bound used by the second gate.
    pub c_d: f64,
    /// Independence-dimension density bound in the WAFF upper bound.
    pub c_di: f64,
    /// Independence constant gamma_1 > 0.
    pub gamma1: f64,
    /// GDP lower-bound constant in (0,1).
    pub delta1: f64,

    // ---- scheduling engine ----
    /// DT window factor: window is ceil(c0_rounds * log2 n) rounds.
    pub c0_rounds: f64,
    /// DT acknowledgement threshold factor.
    pub c1_msgs: f64,
    /// PF window factor.
    pub c2_rounds: f64,
    /// PF acknowledgement threshold factor.
    pub c3_msgs: f64,
    /// PF transmission probability scale in [0,1].
    pub c_eps: f64,
    /// Probability cap for palette colors.
    pub p_max: f64,
    /// Per-phase round budget factor (budget = ceil(c_t * log2 n)).
    pub c_t: f64,
    /// Epoch cap before a run is flagged partial.
    pub max_epochs: usize,
    /// Constant of the capped per-pair affectance variant.
    pub cap_const: f64,
    pub waff_gate: WaffGateMode,
    pub gate_threshold: GateThreshold,

    // ---- conflict-structure constants ----
    /// Ball-shrinking ratio of the dense-ball conditions.
    pub zeta: f64,
    /// Sender guard shell factor, 1 <= h <= 2.
    pub h_shell: f64,
    /// Density-dominance ratio (mu - delta)/lambda.
    pub dd_ratio: f64,
    /// Per-disk guard probability mass cap C_{D_k}.
    pub guard_mass_cap: f64,
    /// Disk count for annulus decompositions.
    pub k_disks: usize,
    /// Dense-ball mass floor `s` (exposed, not derived).
    pub dense_s: f64,
    /// Dimension parameter xi (= m) in exponent formulas.
    pub xi: f64,

    // ---- online broadcast ----
    /// Update-rule slack, 0 < eps < 1.
    pub eps: f64,
    /// Ladder ratio lambda > 1.
    pub lambda: f64,
    /// Battery capacity C_B > 0.
    pub battery: f64,
    /// Target receiver count r per round at the base power.
    pub target_r: f64,
    /// Ladder top bracketing parameter (the undefined factor in
    /// p_k <= C_B/xi is read as this cap).
    pub s_cap: f64,
    /// Affectance gate; `None` means 1/beta.
    pub oams_gamma: Option<f64>,
    /// Round budget for broadcast runs.
    pub max_rounds: usize,
    pub charge_model: ChargeModel,
    pub receiver_draw: ReceiverDraw,
    pub success_prob_mode: SuccessProbMode,
    /// Calibration rounds per state for the empirical mode.
    pub calib_rounds: usize,
    /// Initial ladder state override (1-based); `None` starts at the top.
    pub initial_state: Option<usize>,
    /// Per-round probability that an idle node transmits as background
    /// traffic (0 disables background interference).
    pub background_prob: f64,
    /// Transmit power of background interferers.
    pub background_power: f64,
    /// Competitive-theorem constant C.
    pub competitive_c: f64,
    /// Competitive-theorem precondition constant K (C_B/p_s >= K).
    pub competitive_k: f64,

    // ---- instance synthesis ----
    /// Node count.
    pub n_nodes: usize,
    /// Asymmetry factor upper bound, sigma >= 1 (1 = metric).
    pub sigma: f64,
    /// Side length of the sampling square.
    pub area: f64,
    /// Minimum pairwise separation as a fraction of `area`.
    pub min_sep_frac: f64,
    /// Link count; `None` pairs up floor(n/2) disjoint links.
    pub n_links: Option<usize>,
    pub power_scheme: PowerScheme,

    /// Reject out-of-range alpha and flag budget overruns.
    pub strict: bool,
    /// Base seed recorded with the scenario.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            beta: 2.0,
            beta_prime: 2.0,
            noise: 1.0,
            power_margin: 2.0,
            c1: 1.0,
            c2: 0.5,
            c_d: 1.0,
            c_di: 1.0,
            gamma1: 1.0,
            delta1: 0.5,
            c0_rounds: 3.0,
            c1_msgs: 1.0,
            c2_rounds: 3.0,
            c3_msgs: 1.0,
            c_eps: 0.5,
            p_max: 0.5,
            c_t: 8.0,
            max_epochs: 64,
            cap_const: 1.0,
            waff_gate: WaffGateMode::default(),
            gate_threshold: GateThreshold::default(),
            zeta: 2.0,
            h_shell: 2.0,
            dd_ratio: 1.0,
            guard_mass_cap: 1.0,
            k_disks: 8,
            dense_s: 0.25,
            xi: 2.0,
            eps: 0.1,
            lambda: 2.0,
            battery: 100.0,
            target_r: 10.0,
            s_cap: 10.0,
            oams_gamma: None,
            max_rounds: 10_000,
            charge_model: ChargeModel::default(),
            receiver_draw: ReceiverDraw::default(),
            success_prob_mode: SuccessProbMode::default(),
            calib_rounds: 200,
            initial_state: None,
            background_prob: 0.0,
            background_power: 1.0,
            competitive_c: 0.25,
            competitive_k: 4.0,
            n_nodes: 16,
            sigma: 1.25,
            area: 100.0,
            min_sep_frac: 0.01,
            n_links: None,
            power_scheme: PowerScheme::default(),
            strict: true,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Affectance gate value for the broadcast engine.
    pub fn oams_gate(&self) -> f64 {
        self.oams_gamma.unwrap_or(1.0 / self.beta)
    }

    /// DP-feasibility threshold under the configured gate form.
    pub fn gate_threshold_value(&self) -> f64 {
        match self.gate_threshold {
            GateThreshold::Scaled => self.c1 / (self.beta * self.c2),
            GateThreshold::Plain => 1.0 / (self.beta * self.c2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.strict && !(self.alpha > 2.0 && self.alpha < 6.0) {
            return fail(format!("alpha = {} outside (2,6)", self.alpha));
        }
        if !(self.alpha > 0.0) {
            return fail(format!("alpha = {} must be positive", self.alpha));
        }
        if !(self.beta > 0.0) || !(self.beta_prime > 0.0) {
            return fail(format!(
                "beta thresholds must be positive (beta = {}, beta' = {})",
                self.beta, self.beta_prime
            ));
        }
        if self.noise < 0.0 {
            return fail(format!("noise = {} must be nonnegative", self.noise));
        }
        if !(self.power_margin > 1.0) {
            return fail(format!("power_margin = {} must exceed 1", self.power_margin));
        }
        if !(0.0 < self.c2 && self.c2 <= self.c1 && self.c1 <= 1.0) {
            return fail(format!("need 0 < C2 <= C1 <= 1 (C1 = {}, C2 = {})", self.c1, self.c2));
        }
        if !(self.c_d > 0.0 && self.c_di > 0.0) {
            return fail("C_D and C_DI must be positive".into());
        }
        if !(self.gamma1 > 0.0) {
            return fail(format!("gamma1 = {} must be positive", self.gamma1));
        }
        if !(self.delta1 > 0.0 && self.delta1 < 1.0) {
            return fail(format!("delta1 = {} outside (0,1)", self.delta1));
        }
        if self.c0_rounds < self.c1_msgs {
            return fail(format!(
                "c0 = {} < c1 = {}: DT threshold unreachable",
                self.c0_rounds, self.c1_msgs
            ));
        }
        if self.c2_rounds < self.c3_msgs {
            return fail(format!(
                "c2 = {} < c3 = {}: PF threshold unreachable",
                self.c2_rounds, self.c3_msgs
            ));
        }
        if self.c0_rounds + self.c2_rounds > self.c_t {
            return fail(format!(
                "c0 + c2 = {} exceeds the per-phase budget factor c_t = {}",
                self.c0_rounds + self.c2_rounds,
                self.c_t
            ));
        }
        if !(0.0..=1.0).contains(&self.c_eps) {
            return fail(format!("c_eps = {} outside [0,1]", self.c_eps));
        }
        if !(self.p_max > 0.0 && self.p_max <= 1.0) {
            return fail(format!("p_max = {} outside (0,1]", self.p_max));
        }
        if !(self.zeta > 1.0) {
            return fail(format!("zeta = {} must exceed 1", self.zeta));
        }
        if !(1.0..=2.0).contains(&self.h_shell) {
            return fail(format!("h = {} outside [1,2]", self.h_shell));
        }
        if !(self.dd_ratio > 0.0) {
            return fail("dd_ratio must be positive".into());
        }
        if self.k_disks < 2 {
            return fail(format!("k_disks = {} must be at least 2", self.k_disks));
        }
        if !(self.dense_s > 0.0 && self.dense_s <= 0.5) {
            return fail(format!("dense_s = {} outside (0, 1/2]", self.dense_s));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return fail(format!("eps = {} outside (0,1)", self.eps));
        }
        if !(self.lambda > 1.0) {
            return fail(format!("lambda = {} must exceed 1", self.lambda));
        }
        if !(self.battery > 0.0) {
            return fail(format!("battery = {} must be positive", self.battery));
        }
        if !(self.target_r >= 1.0) {
            return fail(format!("target_r = {} must be at least 1", self.target_r));
        }
        if !(self.s_cap > 0.0) {
            return fail("s_cap must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.background_prob) {
            return fail("background_prob outside [0,1]".into());
        }
        if self.n_nodes == 0 {
            return fail("n_nodes must be positive".into());
        }
        if !(self.sigma >= 1.0) {
            return fail(format!("sigma = {} must be at least 1", self.sigma));
        }
        if !(self.area > 0.0) {
            return fail("area must be positive".into());
        }
        if let Some(m) = self.n_links {
            if m == 0 || 2 * m > self.n_nodes {
                return fail(format!(
                    "n_links = {m} needs 1 <= n_links <= floor(n_nodes/2) = {}",
                    self.n_nodes / 2
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_alpha_outside_range_when_strict() {
        let cfg = ScenarioConfig { alpha: 6.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let lax = ScenarioConfig { alpha: 6.5, strict: false, ..Default::default() };
        lax.validate().unwrap();
    }

    #[test]
    fn rejects_unreachable_dt_threshold() {
        let cfg = ScenarioConfig { c0_rounds: 1.0, c1_msgs: 2.0, ..Default::default() };
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("DT threshold"));
    }

    #[test]
    fn gate_threshold_forms() {
        let cfg = ScenarioConfig { beta: 2.0, c1: 1.0, c2: 0.5, ..Default::default() };
        assert_eq!(cfg.gate_threshold_value(), 1.0);
        let plain = ScenarioConfig { gate_threshold: GateThreshold::Plain, ..cfg };
        assert_eq!(plain.gate_threshold_value(), 1.0);
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        let cfg = ScenarioConfig { sigma: 1.5, n_nodes: 24, ..Default::default() };
        let text = toml::to_string(&cfg).unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
