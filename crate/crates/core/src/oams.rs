//! Online broadcast in a metric space under a battery budget: the geometric
//! power ladder, the per-round state update, the ideal-power-set analysis,
//! the coupled shadow chain, and the closed-form transition/expectation
//! bounds the runs are checked against.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{ChargeModel, ReceiverDraw, ScenarioConfig, SuccessProbMode};
use crate::decayspace::Instance;
use crate::error::{Error, Result};

/// Geometric transmit-power ladder: powers[0] = C_B/n, each state lambda
/// times the previous, topped so that C_B/(lambda*s_cap) < p_k < C_B/s_cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLadder {
    pub powers: Vec<f64>,
    /// p_1 = C_B / n.
    pub base: f64,
}

impl PowerLadder {
    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    /// Power of a 1-based state.
    pub fn power(&self, state: usize) -> f64 {
        self.powers[state - 1]
    }
}

/// Builds the ladder for `n` receivers. Fails when no integer state count
/// satisfies the strict bracketing of the top power.
pub fn power_ladder(config: &ScenarioConfig, n: usize) -> Result<PowerLadder> {
    if !(config.lambda > 1.0) {
        return Err(Error::InvalidConfig(format!(
            "lambda = {} must exceed 1",
            config.lambda
        )));
    }
    if n == 0 || !(config.battery > 0.0) || !(config.s_cap > 0.0) {
        return Err(Error::InvalidConfig("ladder needs n >= 1, C_B > 0, s_cap > 0".into()));
    }
    let x = n as f64 / config.s_cap;
    if x <= 1.0 {
        return Err(Error::LadderBracketing { n, lambda: config.lambda, s_cap: config.s_cap });
    }
    // Largest j with lambda^j < x; ladder has k = j + 1 states.
    let mut pow = 1.0f64;
    let mut j = 0usize;
    while pow * config.lambda < x {
        pow *= config.lambda;
        j += 1;
    }
    // Strict lower bracket: lambda^(j+1) must exceed x, not equal it.
    if pow * config.lambda == x {
        return Err(Error::LadderBracketing { n, lambda: config.lambda, s_cap: config.s_cap });
    }
    let base = config.battery / n as f64;
    let mut powers = Vec::with_capacity(j + 1);
    let mut p = base;
    for _ in 0..=j {
        powers.push(p);
        p *= config.lambda;
    }
    Ok(PowerLadder { powers, base })
}

/// Ladder for an instance's receiver set (one link per receiver).
pub fn power_ladder_for(inst: &Instance) -> Result<PowerLadder> {
    power_ladder(&inst.config, inst.links.len())
}

/// State-update decision for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateMove {
    Down,
    Stay,
    Up,
}

/// The update rule: at least r(1+eps/2) successes steps the power down, at
/// most r(1-eps/2) steps it up, anything between keeps the state. A failed
/// affectance gate skips the update entirely. The result is clamped to
/// [1, k].
pub fn sp_step(
    state: usize,
    successes: usize,
    gate_ok: bool,
    ladder_len: usize,
    config: &ScenarioConfig,
) -> (usize, StateMove) {
    debug_assert!((1..=ladder_len).contains(&state));
    if !gate_ok {
        return (state, StateMove::Stay);
    }
    let r = config.target_r;
    let s = successes as f64;
    if s >= r * (1.0 + config.eps / 2.0) {
        if state > 1 {
            (state - 1, StateMove::Down)
        } else {
            (state, StateMove::Down)
        }
    } else if s <= r * (1.0 - config.eps / 2.0) {
        if state < ladder_len {
            (state + 1, StateMove::Up)
        } else {
            (state, StateMove::Up)
        }
    } else {
        (state, StateMove::Stay)
    }
}

/// Ladder states that are ideal: index at most s, affectance gate satisfied,
/// and success probability above (1-eps)*C_B/(p_i*n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealPowerSet {
    /// 1-based ladder states in the set.
    pub members: Vec<usize>,
    /// The bracketing index s, when one exists.
    pub s_index: Option<usize>,
    /// Set when no index satisfies the s-bracketing conditions.
    pub no_bracket: bool,
}

impl IdealPowerSet {
    pub fn min_state(&self) -> Option<usize> {
        self.members.first().copied()
    }

    pub fn max_state(&self) -> Option<usize> {
        self.members.last().copied()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.members.binary_search(&state).is_ok()
    }

    /// Coupled-chain distance min(|i-s|, |i-s+1|) minimized over members.
    pub fn distance(&self, state: usize) -> usize {
        self.members
            .iter()
            .map(|&s| {
                let a = state.abs_diff(s);
                let b = (state + 1).abs_diff(s);
                a.min(b)
            })
            .min()
            .unwrap_or(0)
    }
}

/// Evaluates the ideal-power-set membership conditions exactly.
/// `q` holds per-state success probabilities, `gate` per-state affectance
/// values compared against 1/beta.
pub fn ideal_power_set(
    ladder: &PowerLadder,
    q: &[f64],
    gate: &[f64],
    n: usize,
    config: &ScenarioConfig,
) -> Result<IdealPowerSet> {
    let k = ladder.len();
    if q.len() != k || gate.len() != k {
        return Err(Error::InvalidConfig("per-state arrays must match the ladder".into()));
    }
    if q.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidConfig("success probabilities outside [0,1]".into()));
    }
    let cb = config.battery;
    let nf = n as f64;
    let crosses = |ix: usize| -> bool {
        // p_s >= C_B / (n q_s); q = 0 makes the bound infinite.
        q[ix] > 0.0 && ladder.powers[ix] >= cb / (nf * q[ix])
    };
    let mut s_index = None;
    for s in 1..=k {
        let below_ok = s == 1 || {
            let ix = s - 2;
            !(q[ix] > 0.0) || ladder.powers[ix] < cb / (nf * q[ix])
        };
        if crosses(s - 1) && below_ok {
            s_index = Some(s);
            break;
        }
    }
    let mut members = Vec::new();
    if let Some(s) = s_index {
        for i in 1..=s {
            let ix = i - 1;
            let prob_floor = (1.0 - config.eps) * cb / (ladder.powers[ix] * nf);
            if gate[ix] <= 1.0 / config.beta && q[ix] > prob_floor {
                members.push(i);
            }
        }
    }
    Ok(IdealPowerSet { members, s_index, no_bracket: s_index.is_none() })
}

/// Closed-form lower bound on the drift transition probability,
/// 1 - (1/(eps^2 r) - 1/(eps r)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionBound {
    pub value: f64,
    /// Bound is <= 0 (or its subtracted term negative) and carries no
    /// information.
    pub vacuous: bool,
}

pub fn transition_probability_bound(eps: f64, r: f64) -> TransitionBound {
    let term = 1.0 / (eps * eps * r) - 1.0 / (eps * r);
    let value = 1.0 - term;
    TransitionBound { value, vacuous: value <= 0.0 || term < 0.0 }
}

/// Closed-form expectation bounds with b = (1/(eps^2 r) - 2/(eps r))(1 - lambda^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectationBounds {
    pub successes: f64,
    pub power: f64,
    pub b: f64,
    /// lambda - 1 + b <= 0: the closed forms are meaningless.
    pub vacuous: bool,
}

pub fn expectation_bounds(config: &ScenarioConfig, n: usize) -> ExpectationBounds {
    let (eps, r, lambda) = (config.eps, config.target_r, config.lambda);
    let b = (1.0 / (eps * eps * r) - 2.0 / (eps * r)) * (1.0 - lambda * lambda);
    let denom = lambda - 1.0 + b;
    if denom <= 0.0 {
        // Vacuous bounds carry no constraint; infinity keeps records
        // comparable (NaN would poison equality checks).
        return ExpectationBounds {
            successes: f64::INFINITY,
            power: f64::INFINITY,
            b,
            vacuous: true,
        };
    }
    let successes = r * n as f64 * lambda / (config.s_cap * denom);
    let power = r * (1.0 + eps / 2.0) * lambda * config.battery / (config.s_cap * denom);
    ExpectationBounds { successes, power, b, vacuous: false }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    BatteryExhausted,
    RoundBudget,
}

/// One simulated round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub round: usize,
    /// 1-based ladder state during the round.
    pub state: usize,
    pub power: f64,
    pub targets: usize,
    pub successes: usize,
    pub charged: f64,
    pub battery_after: f64,
    /// Coupled shadow-chain value.
    pub shadow: usize,
    pub gate_ok: bool,
    /// -1 down, 0 stay, +1 up (applied after the round).
    pub moved: i8,
}

/// Power-state trajectory with the coupled shadow chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub rows: Vec<TraceRow>,
    pub initial_state: usize,
    pub initial_shadow: usize,
}

/// Aggregate outcome of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BroadcastResult {
    /// Distinct receivers that got the message.
    pub delivered: usize,
    /// Delivery events including repeats.
    pub success_events: usize,
    pub consumed: f64,
    pub rounds: usize,
    pub final_state: usize,
    pub halt: HaltReason,
    pub pid: IdealPowerSet,
    /// Per-state success probabilities used for the analysis.
    pub q_per_state: Vec<f64>,
    pub transition_bound: TransitionBound,
    pub expectation_bounds: ExpectationBounds,
    /// p_s for the competitive ratio, when s exists.
    pub p_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OamsRun {
    pub trace: ChainTrace,
    pub result: BroadcastResult,
}

/// Receiver weights under the configured draw distribution.
fn receiver_weights(inst: &Instance, sender: usize, receivers: &[usize]) -> Vec<f64> {
    match inst.config.receiver_draw {
        ReceiverDraw::Uniform => vec![1.0 / receivers.len() as f64; receivers.len()],
        ReceiverDraw::NearBiased => {
            let mut order: Vec<usize> = (0..receivers.len()).collect();
            order.sort_by(|&a, &b| {
                inst.space
                    .q(sender, receivers[a])
                    .total_cmp(&inst.space.q(sender, receivers[b]))
                    .then(a.cmp(&b))
            });
            let mut w = vec![0.0; receivers.len()];
            for (rank, &ix) in order.iter().enumerate() {
                w[ix] = 1.0 / (1.0 + rank as f64);
            }
            let total: f64 = w.iter().sum();
            w.iter().map(|x| x / total).collect()
        }
    }
}

fn draw_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (ix, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return ix;
        }
    }
    weights.len() - 1
}

/// Exact per-state success probability: the weighted fraction of receivers
/// whose noise-only SINR clears beta at that power.
fn exact_state_probs(
    inst: &Instance,
    sender: usize,
    receivers: &[usize],
    weights: &[f64],
    ladder: &PowerLadder,
) -> Vec<f64> {
    ladder
        .powers
        .iter()
        .map(|&p| {
            receivers
                .iter()
                .zip(weights)
                .filter(|(&r, _)| crate::oracle::decodes(p, inst.space.q(sender, r), &inst.config))
                .map(|(_, &w)| w)
                .sum()
        })
        .collect()
}

/// Runs the online broadcast. The instance must be symmetric (a metric), and
/// every link must share one sender. Deterministic in (instance, seed).
pub fn oams_run(inst: &Instance, seed: u64) -> Result<OamsRun> {
    let config = &inst.config;
    config.validate()?;
    if let Err((u, v)) = inst.space.is_symmetric(1e-12) {
        return Err(Error::AsymmetricInstance {
            u,
            v,
            forward: inst.space.q(u, v),
            backward: inst.space.q(v, u),
        });
    }
    if inst.links.is_empty() {
        return Err(Error::InvalidConfig("broadcast needs at least one link".into()));
    }
    let sender = inst.links[0].sender;
    if inst.links.iter().any(|l| l.sender != sender) {
        return Err(Error::InvalidConfig("broadcast links must share one sender".into()));
    }
    let receivers: Vec<usize> = inst.links.iter().map(|l| l.receiver).collect();
    let n = receivers.len();
    let ladder = power_ladder(config, n)?;
    let k = ladder.len();
    let weights = receiver_weights(inst, sender, &receivers);

    let q_per_state = match config.success_prob_mode {
        SuccessProbMode::Exact => exact_state_probs(inst, sender, &receivers, &weights, &ladder),
        SuccessProbMode::Empirical => {
            let mut probs = Vec::with_capacity(k);
            for (ix, &p) in ladder.powers.iter().enumerate() {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(0x5EED_0000 + ix as u64);
                let mut hits = 0usize;
                for _ in 0..config.calib_rounds.max(1) {
                    let r = receivers[draw_index(&weights, &mut rng)];
                    if crate::oracle::decodes(p, inst.space.q(sender, r), config) {
                        hits += 1;
                    }
                }
                probs.push(hits as f64 / config.calib_rounds.max(1) as f64);
            }
            probs
        }
    };

    // Affectance gate per state. Without background traffic the environment
    // is empty and every state passes.
    let gate_values: Vec<f64> = vec![0.0; k];
    let pid = ideal_power_set(&ladder, &q_per_state, &gate_values, n, config)?;

    let mut state = match config.initial_state {
        Some(s) if s >= 1 && s <= k => s,
        Some(s) => {
            return Err(Error::InvalidConfig(format!("initial state {s} outside 1..={k}")))
        }
        None => k,
    };
    let mut shadow = pid.distance(state);
    let initial_state = state;
    let initial_shadow = shadow;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut battery = config.battery;
    let mut delivered = vec![false; n];
    let mut success_events = 0usize;
    let mut rows = Vec::new();
    let mut halt = HaltReason::RoundBudget;
    let gamma = config.oams_gate();

    'rounds: for round in 1..=config.max_rounds {
        let p = ladder.power(state);
        let targets =
            ((config.target_r * p * n as f64 / config.battery).floor() as usize).max(1);
        let draws: Vec<usize> = (0..targets).map(|_| draw_index(&weights, &mut rng)).collect();

        // Background interferers for the round.
        let background: Vec<usize> = if config.background_prob > 0.0 {
            receivers
                .iter()
                .copied()
                .filter(|z| !draws.iter().any(|&d| receivers[d] == *z))
                .filter(|_| rng.gen::<f64>() < config.background_prob)
                .collect()
        } else {
            Vec::new()
        };

        // Gate: summed sub-threshold affectance of the background set on the
        // targeted links, maximized over targets.
        let mut gate_value = 0.0f64;
        for &d in &draws {
            let r = receivers[d];
            let q_link = inst.space.q(sender, r);
            let mut sum = 0.0;
            for &z in &background {
                let a = (config.background_power / p) * (q_link / inst.space.q(z, r));
                if a <= 1.0 / config.beta {
                    sum += a;
                }
            }
            gate_value = gate_value.max(sum);
        }
        let gate_ok = gate_value <= gamma;

        let mut charged = 0.0f64;
        let mut successes = 0usize;
        let mut exhausted = false;

        if let ChargeModel::PerRound = config.charge_model {
            if battery >= p {
                battery -= p;
                charged += p;
            } else {
                exhausted = true;
            }
        }
        if !exhausted && gate_ok {
            for &d in &draws {
                if let ChargeModel::PerAttempt = config.charge_model {
                    if battery < p {
                        exhausted = true;
                        break;
                    }
                    battery -= p;
                    charged += p;
                }
                let r = receivers[d];
                let signal = p / inst.space.q(sender, r);
                let interference: f64 = background
                    .iter()
                    .map(|&z| config.background_power / inst.space.q(z, r))
                    .sum();
                let denom = interference + config.noise;
                let ok = if denom == 0.0 { true } else { signal / denom >= config.beta };
                if !ok {
                    continue;
                }
                if let ChargeModel::PerDelivery = config.charge_model {
                    if battery < p {
                        exhausted = true;
                        break;
                    }
                    battery -= p;
                    charged += p;
                }
                successes += 1;
                success_events += 1;
                delivered[d] = true;
            }
        }

        if exhausted {
            rows.push(TraceRow {
                round,
                state,
                power: p,
                targets,
                successes,
                charged,
                battery_after: battery,
                shadow,
                gate_ok,
                moved: 0,
            });
            halt = HaltReason::BatteryExhausted;
            break 'rounds;
        }

        let (next, mv) = sp_step(state, successes, gate_ok, k, config);
        let moved = match mv {
            StateMove::Down => -1,
            StateMove::Stay => 0,
            StateMove::Up => 1,
        };
        let old_dist = pid.distance(state);
        let new_dist = pid.distance(next);
        if new_dist < old_dist {
            shadow = shadow.saturating_sub(1);
        } else if new_dist > old_dist {
            shadow += 1;
        }
        rows.push(TraceRow {
            round,
            state,
            power: p,
            targets,
            successes,
            charged,
            battery_after: battery,
            shadow,
            gate_ok,
            moved,
        });
        state = next;
    }

    let rounds = rows.len();
    let final_state = state;
    let result = BroadcastResult {
        delivered: delivered.iter().filter(|&&d| d).count(),
        success_events,
        consumed: config.battery - battery,
        rounds,
        final_state,
        halt,
        p_s: pid.s_index.map(|s| ladder.power(s)),
        pid,
        q_per_state,
        transition_bound: transition_probability_bound(config.eps, config.target_r),
        expectation_bounds: expectation_bounds(config, n),
    };
    Ok(OamsRun { trace: ChainTrace { rows, initial_state, initial_shadow }, result })
}

/// Coupling-check outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// Rounds actually checked (prefix before any state entered the set).
    pub checked_rounds: usize,
    pub violation: Option<CouplingViolation>,
    /// Nothing to check: empty set or the trace starts inside it.
    pub vacuous: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingViolation {
    pub round: usize,
    pub shadow: usize,
    pub required: usize,
}

/// Verifies the coupled-chain inequality shadow_t >= min over s in PID of
/// min(|i_t - s|, |i_t - s + 1|) on the prefix where no earlier state
/// entered the set.
pub fn coupling_check(trace: &ChainTrace, pid: &IdealPowerSet) -> CouplingReport {
    if pid.members.is_empty() || pid.contains(trace.initial_state) {
        return CouplingReport { checked_rounds: 0, violation: None, vacuous: true };
    }
    let mut checked = 0usize;
    for row in &trace.rows {
        let required = pid.distance(row.state);
        checked += 1;
        if row.shadow < required {
            return CouplingReport {
                checked_rounds: checked,
                violation: Some(CouplingViolation {
                    round: row.round,
                    shadow: row.shadow,
                    required,
                }),
                vacuous: false,
            };
        }
        if pid.contains(row.state) {
            break;
        }
    }
    CouplingReport { checked_rounds: checked, violation: None, vacuous: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decayspace::QuasiMetricSpace;
    use crate::sinrcore::QuasiLink;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    /// Star instance: sender at origin, receivers at the given distances.
    fn star(dists: &[f64], config: &ScenarioConfig) -> Instance {
        let mut pts: Vec<(f64, f64)> = vec![(0.0, 0.0)];
        pts.extend(dists.iter().map(|&d| (d, 0.0)));
        let rows: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| {
                pts.iter()
                    .map(|b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt())
                    .collect()
            })
            .collect();
        let space = QuasiMetricSpace::from_matrix(rows).unwrap();
        let links: Vec<QuasiLink> = (0..dists.len())
            .map(|i| QuasiLink::from_space(i, 0, i + 1, 1.0, 1.0, &space))
            .collect();
        Instance { space, links, config: config.clone(), coords: None }
    }

    #[test]
    fn ladder_example_values() {
        let config = ScenarioConfig {
            battery: 100.0,
            lambda: 2.0,
            s_cap: 10.0,
            ..cfg()
        };
        let ladder = power_ladder(&config, 100).unwrap();
        assert_eq!(ladder.powers, vec![1.0, 2.0, 4.0, 8.0]);
        // bracketing: 100/(2*10) = 5 < 8 < 10 = 100/10
        assert!(ladder.powers[3] > 5.0 && ladder.powers[3] < 10.0);
    }

    #[test]
    fn ladder_single_node() {
        let config = ScenarioConfig { battery: 50.0, s_cap: 0.7, ..cfg() };
        let ladder = power_ladder(&config, 1).unwrap();
        assert_eq!(ladder.powers, vec![50.0]);
    }

    #[test]
    fn ladder_rejects_lambda_one_and_integer_bracket() {
        let config = ScenarioConfig { lambda: 1.0, ..cfg() };
        assert!(power_ladder(&config, 10).is_err());
        // n/s_cap = 8 a power of lambda: strict bracketing impossible
        let config = ScenarioConfig { lambda: 2.0, s_cap: 2.0, ..cfg() };
        assert!(matches!(
            power_ladder(&config, 16),
            Err(Error::LadderBracketing { .. })
        ));
    }

    #[test]
    fn sp_step_threshold_arithmetic() {
        let config = ScenarioConfig { target_r: 20.0, eps: 0.1, ..cfg() };
        // r(1+eps/2) = 21, r(1-eps/2) = 19
        assert_eq!(sp_step(3, 21, true, 5, &config), (2, StateMove::Down));
        assert_eq!(sp_step(3, 19, true, 5, &config), (4, StateMove::Up));
        assert_eq!(sp_step(3, 20, true, 5, &config), (3, StateMove::Stay));
        // clamped at the ends
        assert_eq!(sp_step(1, 30, true, 5, &config).0, 1);
        assert_eq!(sp_step(5, 0, true, 5, &config).0, 5);
        // failed gate freezes the state
        assert_eq!(sp_step(3, 0, false, 5, &config), (3, StateMove::Stay));
    }

    #[test]
    fn pid_membership_conditions() {
        let config = ScenarioConfig { battery: 100.0, eps: 0.1, beta: 2.0, ..cfg() };
        let ladder = PowerLadder { powers: vec![1.0, 2.0, 4.0], base: 1.0 };
        let n = 100;
        // probability condition at p = 2: q > 0.9*100/(2*100) = 0.45
        let q = vec![0.2, 0.5, 0.9];
        let gate = vec![0.0, 0.0, 0.0];
        let pid = ideal_power_set(&ladder, &q, &gate, n, &config).unwrap();
        // s: p_s >= C_B/(n q_s): state1 1 >= 100/(100*0.2)=5 no; state2 2 >= 2 yes
        assert_eq!(pid.s_index, Some(2));
        assert!(pid.contains(2));
        assert!(!pid.contains(1)); // q too small at state 1
    }

    #[test]
    fn pid_empty_when_all_probs_zero() {
        let config = cfg();
        let ladder = PowerLadder { powers: vec![1.0, 2.0], base: 1.0 };
        let pid = ideal_power_set(&ladder, &[0.0, 0.0], &[0.0, 0.0], 10, &config).unwrap();
        assert!(pid.members.is_empty());
        assert!(pid.no_bracket);
    }

    #[test]
    fn pid_all_states_when_probs_maximal() {
        let config = ScenarioConfig { battery: 100.0, ..cfg() };
        let ladder = PowerLadder { powers: vec![1.0, 2.0, 4.0], base: 1.0 };
        let pid =
            ideal_power_set(&ladder, &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0], 100, &config).unwrap();
        // s = 1 (1 >= 100/100), PID = {1..s} = {1}
        assert_eq!(pid.s_index, Some(1));
        assert_eq!(pid.members, vec![1]);
    }

    #[test]
    fn transition_bound_values() {
        let b = transition_probability_bound(0.1, 1000.0);
        assert!((b.value - 0.91).abs() < 1e-12);
        assert!(!b.vacuous);
        let b = transition_probability_bound(0.1, 10.0);
        assert!((b.value - -8.0).abs() < 1e-12);
        assert!(b.vacuous);
        let b = transition_probability_bound(0.1, 1e9);
        assert!(b.value > 0.9999);
    }

    #[test]
    fn expectation_bounds_values() {
        let config = ScenarioConfig {
            eps: 0.1,
            target_r: 1000.0,
            lambda: 1.5,
            s_cap: 50.0,
            battery: 100.0,
            ..cfg()
        };
        let e = expectation_bounds(&config, 100);
        assert!((e.b - -0.1).abs() < 1e-9);
        assert!(!e.vacuous);
        assert!((e.successes - 7500.0).abs() < 1e-6);
        // r = 10 flips the sign of lambda - 1 + b
        let config = ScenarioConfig { target_r: 10.0, ..config };
        let e = expectation_bounds(&config, 100);
        assert!(e.vacuous);
    }

    #[test]
    fn adjacent_receiver_succeeds_every_round() {
        let config = ScenarioConfig {
            battery: 100.0,
            target_r: 4.0,
            s_cap: 2.5,
            lambda: 2.0,
            beta: 2.0,
            noise: 1.0,
            max_rounds: 20,
            n_nodes: 9,
            ..cfg()
        };
        // 8 receivers all within range of every ladder power
        let inst = star(&[0.2, 0.21, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27], &config);
        let run = oams_run(&inst, 1).unwrap();
        // every completed round delivers to its full target count; the
        // battery-truncated final round may fall short
        let complete = match run.result.halt {
            HaltReason::BatteryExhausted => &run.trace.rows[..run.trace.rows.len() - 1],
            HaltReason::RoundBudget => &run.trace.rows[..],
        };
        assert!(!run.trace.rows.is_empty());
        for row in complete {
            assert_eq!(row.successes, row.targets);
        }
        assert!(run.result.delivered > 0);
    }

    #[test]
    fn out_of_range_receivers_climb_and_drain() {
        let config = ScenarioConfig {
            battery: 100.0,
            target_r: 4.0,
            s_cap: 2.5,
            lambda: 2.0,
            beta: 2.0,
            noise: 1.0,
            max_rounds: 50,
            charge_model: ChargeModel::PerAttempt,
            initial_state: Some(1),
            ..cfg()
        };
        // receivers far beyond any ladder power
        let inst = star(&[500.0, 600.0, 700.0, 800.0], &config);
        let run = oams_run(&inst, 5).unwrap();
        // states climb monotonically to the top
        let states: Vec<usize> = run.trace.rows.iter().map(|r| r.state).collect();
        assert!(states.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(run.result.final_state, power_ladder(&config, 4).unwrap().len());
        assert!(run.result.consumed > 0.0);
        assert_eq!(run.result.delivered, 0);
    }

    #[test]
    fn battery_below_one_charge_halts_after_first_round() {
        // s_cap 0.45 pushes the ladder top to 2*C_B, above the battery
        let config = ScenarioConfig {
            battery: 4.0,
            target_r: 4.0,
            s_cap: 0.45,
            lambda: 2.0,
            beta: 2.0,
            noise: 1.0,
            max_rounds: 20,
            ..cfg()
        };
        let inst = star(&[0.2, 0.21, 0.22, 0.23, 0.24, 0.25, 0.26, 0.27], &config);
        let ladder = power_ladder(&config, 8).unwrap();
        assert!(*ladder.powers.last().unwrap() > config.battery);
        let run = oams_run(&inst, 2).unwrap();
        assert_eq!(run.result.halt, HaltReason::BatteryExhausted);
        assert_eq!(run.result.rounds, 1);
        assert_eq!(run.result.final_state, ladder.len());
        assert_eq!(run.result.delivered, 0);
    }

    #[test]
    fn battery_is_never_overdrawn() {
        for seed in 0..20u64 {
            let config = ScenarioConfig {
                battery: 8.0,
                target_r: 3.0,
                s_cap: 2.5,
                lambda: 2.0,
                max_rounds: 200,
                ..cfg()
            };
            let inst = star(&[0.3, 0.5, 0.8, 1.2, 2.0, 3.0, 5.0, 8.0], &config);
            let run = oams_run(&inst, seed).unwrap();
            assert!(run.result.consumed <= config.battery + 1e-12);
            let total: f64 = run.trace.rows.iter().map(|r| r.charged).sum();
            assert!((total - run.result.consumed).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_instance_is_rejected() {
        let config = cfg();
        let rows = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        let space = QuasiMetricSpace::from_matrix(rows).unwrap();
        let links = vec![QuasiLink::from_space(0, 0, 1, 1.0, 1.0, &space)];
        let inst = Instance { space, links, config, coords: None };
        assert!(matches!(oams_run(&inst, 0), Err(Error::AsymmetricInstance { .. })));
    }

    #[test]
    fn runs_are_deterministic() {
        let config = ScenarioConfig {
            battery: 20.0,
            target_r: 3.0,
            s_cap: 2.5,
            max_rounds: 100,
            ..cfg()
        };
        let inst = star(&[0.3, 0.6, 1.0, 1.5, 2.5, 4.0], &config);
        let a = oams_run(&inst, 11).unwrap();
        let b = oams_run(&inst, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn coupling_vacuous_when_start_inside_pid() {
        let pid = IdealPowerSet { members: vec![3], s_index: Some(3), no_bracket: false };
        let trace = ChainTrace { rows: vec![], initial_state: 3, initial_shadow: 0 };
        assert!(coupling_check(&trace, &pid).vacuous);
    }

    #[test]
    fn coupling_checks_hand_built_traces() {
        let pid = IdealPowerSet { members: vec![4], s_index: Some(4), no_bracket: false };
        let mk = |round, state, shadow| TraceRow {
            round,
            state,
            power: 1.0,
            targets: 1,
            successes: 0,
            charged: 0.0,
            battery_after: 1.0,
            shadow,
            gate_ok: true,
            moved: 1,
        };
        // monotone approach 1 -> 4 with a correctly coupled shadow
        let good = ChainTrace {
            rows: vec![mk(1, 1, 3), mk(2, 2, 2), mk(3, 3, 1), mk(4, 4, 0)],
            initial_state: 1,
            initial_shadow: 3,
        };
        assert!(coupling_check(&good, &pid).violation.is_none());
        // shadow drops without the state moving closer
        let bad = ChainTrace {
            rows: vec![mk(1, 1, 3), mk(2, 1, 1)],
            initial_state: 1,
            initial_shadow: 3,
        };
        let report = coupling_check(&bad, &pid);
        assert_eq!(report.violation.unwrap().round, 2);
    }

    #[test]
    fn trace_invariant_shadow_dominates_distance() {
        let config = ScenarioConfig {
            battery: 30.0,
            target_r: 3.0,
            s_cap: 2.5,
            max_rounds: 300,
            initial_state: Some(1),
            ..cfg()
        };
        let inst = star(&[0.3, 0.5, 0.9, 1.4, 2.2, 3.5, 5.0, 7.0], &config);
        for seed in 0..10u64 {
            let run = oams_run(&inst, seed).unwrap();
            let report = coupling_check(&run.trace, &run.result.pid);
            assert!(report.violation.is_none(), "seed {seed}: {report:?}");
        }
    }
}
