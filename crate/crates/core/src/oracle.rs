//! Brute-force oracles for small instances. These share nothing with the
//! randomized engines beyond the SINR primitives, so they can serve as an
//! independent verification path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::decayspace::Instance;
use crate::error::{Error, Result};
use crate::oams::PowerLadder;
use crate::sinrcore::{sinr, sinr_feasible};

/// Link-count cap for the exact schedule search (2^cap subsets).
pub const SCHEDULE_CAP: usize = 12;
/// Receiver cap for the offline broadcast optimum.
pub const BROADCAST_CAP: usize = 12;
/// Ladder cap for the offline broadcast optimum.
pub const LADDER_CAP: usize = 8;

/// Minimum slot count with an optimal partition witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinSchedule {
    pub min_slots: usize,
    /// One optimal partition; every part is SINR-feasible.
    pub witness: Vec<Vec<usize>>,
}

/// Exact minimum number of slots needed to schedule every link, with each
/// slot's set simultaneously SINR-feasible. Feasibility is memoized per
/// subset, then an exact set-partition dynamic program runs over bitmasks.
pub fn exact_min_schedule(instance: &Instance, config: &ScenarioConfig) -> Result<MinSchedule> {
    let links = &instance.links;
    let m = links.len();
    if m > SCHEDULE_CAP {
        return Err(Error::OracleCap { what: "links", got: m, cap: SCHEDULE_CAP });
    }
    if m == 0 {
        return Ok(MinSchedule { min_slots: 0, witness: Vec::new() });
    }
    for link in links {
        if sinr(link, &[], &instance.space, config)? < config.beta {
            return Err(Error::InfeasibleSingleton { link: link.id });
        }
    }

    let full = (1usize << m) - 1;
    // Precompute signal and pairwise interference terms.
    let signal: Vec<f64> = links.iter().map(|l| l.power / l.quasi_length).collect();
    let mut intf = vec![0.0f64; m * m];
    for (jx, j) in links.iter().enumerate() {
        for (ix, i) in links.iter().enumerate() {
            if jx == ix {
                continue;
            }
            let d = instance.space.q(j.sender, i.receiver);
            if d <= 0.0 {
                return Err(Error::ZeroCrossDistance { from: j.sender, to: i.receiver });
            }
            intf[jx * m + ix] = j.power / d;
        }
    }
    let mut feasible = vec![false; full + 1];
    for mask in 1..=full {
        let mut ok = true;
        for i in 0..m {
            if mask & (1 << i) == 0 {
                continue;
            }
            let mut denom = config.noise;
            for j in 0..m {
                if j != i && mask & (1 << j) != 0 {
                    denom += intf[j * m + i];
                }
            }
            let s = if denom == 0.0 { f64::INFINITY } else { signal[i] / denom };
            if s < config.beta {
                ok = false;
                break;
            }
        }
        feasible[mask] = ok;
    }

    let mut dp = vec![usize::MAX; full + 1];
    let mut choice = vec![0usize; full + 1];
    dp[0] = 0;
    for mask in 1..=full {
        // Enumerate submasks containing the lowest set bit to avoid
        // symmetric duplicates.
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let part = sub | low;
            if feasible[part] && dp[mask ^ part] != usize::MAX {
                let cand = dp[mask ^ part] + 1;
                if cand < dp[mask] {
                    dp[mask] = cand;
                    choice[mask] = part;
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }

    let mut witness: Vec<Vec<usize>> = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let part = choice[mask];
        witness.push((0..m).filter(|i| part & (1 << i) != 0).collect());
        mask ^= part;
    }
    // Re-verify the witness through the public predicate.
    for part in &witness {
        let refs: Vec<&_> = part.iter().map(|&i| &links[i]).collect();
        debug_assert!(sinr_feasible(&refs, &instance.space, config)?);
    }
    Ok(MinSchedule { min_slots: dp[full], witness })
}

/// A finite birth-death chain over ladder states 1..=k with an absorbing
/// floor below state 1, plus per-state expected successes and power cost per
/// round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Per state (index 0 = ladder state 1): probability of moving down,
    /// staying, moving up. Moving down from state 1 absorbs.
    pub rows: Vec<[f64; 3]>,
    /// Expected successes per round spent in each state.
    pub successes: Vec<f64>,
    /// Expected power charged per round spent in each state.
    pub costs: Vec<f64>,
    /// 1-based starting state.
    pub start: usize,
    /// Optional exact round horizon.
    pub horizon: Option<usize>,
}

impl ChainSpec {
    /// Builds the spec from a ladder and per-state success probabilities,
    /// using the engine's target-count and per-delivery charge rules.
    pub fn from_ladder(
        ladder: &PowerLadder,
        q: &[f64],
        rows: Vec<[f64; 3]>,
        start: usize,
        horizon: Option<usize>,
        n: usize,
        config: &ScenarioConfig,
    ) -> Self {
        let mut successes = Vec::with_capacity(ladder.powers.len());
        let mut costs = Vec::with_capacity(ladder.powers.len());
        for (ix, &p) in ladder.powers.iter().enumerate() {
            let targets =
                ((config.target_r * p * n as f64 / config.battery).floor() as usize).max(1);
            let succ = targets as f64 * q[ix];
            successes.push(succ);
            costs.push(p * succ);
        }
        Self { rows, successes, costs, start, horizon }
    }

    fn validate(&self) -> Result<()> {
        let k = self.rows.len();
        if k == 0 || self.successes.len() != k || self.costs.len() != k {
            return Err(Error::InvalidConfig("chain spec arity mismatch".into()));
        }
        if self.start == 0 || self.start > k {
            return Err(Error::InvalidConfig(format!(
                "start state {} outside 1..={k}",
                self.start
            )));
        }
        for (ix, row) in self.rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::NonStochasticRow { row: ix, sum });
            }
        }
        Ok(())
    }
}

/// Exact expectations for a [`ChainSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainExpectation {
    pub expected_successes: f64,
    pub expected_power: f64,
    pub expected_rounds: f64,
}

/// Solves the chain exactly: with a horizon, by backward recursion over the
/// remaining rounds; without one, by the first-step linear equations for the
/// totals accumulated before absorption.
pub fn exact_chain_expectation(spec: &ChainSpec) -> Result<ChainExpectation> {
    spec.validate()?;
    let k = spec.rows.len();
    if let Some(m) = spec.horizon {
        // value[i] = expected remaining total starting in state i (0 = absorbed)
        let mut succ = vec![0.0f64; k + 1];
        let mut power = vec![0.0f64; k + 1];
        let mut rounds = vec![0.0f64; k + 1];
        for _ in 0..m {
            let mut ns = vec![0.0f64; k + 1];
            let mut np = vec![0.0f64; k + 1];
            let mut nr = vec![0.0f64; k + 1];
            for i in 1..=k {
                let [down, stay, up] = spec.rows[i - 1];
                let di = i - 1;
                let ui = (i + 1).min(k);
                ns[i] = spec.successes[i - 1] + down * succ[di] + stay * succ[i] + up * succ[ui];
                np[i] = spec.costs[i - 1] + down * power[di] + stay * power[i] + up * power[ui];
                nr[i] = 1.0 + down * rounds[di] + stay * rounds[i] + up * rounds[ui];
            }
            succ = ns;
            power = np;
            rounds = nr;
        }
        return Ok(ChainExpectation {
            expected_successes: succ[spec.start],
            expected_power: power[spec.start],
            expected_rounds: rounds[spec.start],
        });
    }

    // Absorption totals: E_i = reward_i + sum_j P(i->j) E_j, E_absorbed = 0.
    let mut a = DMatrix::<f64>::identity(k, k);
    for i in 0..k {
        let [down, stay, up] = spec.rows[i];
        a[(i, i)] -= stay;
        if i > 0 {
            a[(i, i - 1)] -= down;
        }
        let ui = (i + 1).min(k - 1);
        a[(i, ui)] -= up;
    }
    let lu = a.lu();
    let solve = |reward: &[f64]| -> Result<DVector<f64>> {
        lu.solve(&DVector::from_iterator(k, reward.iter().copied())).ok_or_else(|| {
            Error::InvalidConfig("chain never reaches the absorbing state; supply a horizon".into())
        })
    };
    let succ = solve(&spec.successes)?;
    let power = solve(&spec.costs)?;
    let rounds = solve(&vec![1.0; k])?;
    let ix = spec.start - 1;
    // Non-absorbing chains can slip past LU as near-singular systems.
    for v in [succ[ix], power[ix], rounds[ix]] {
        if !v.is_finite() || v < -1e-6 || v.abs() > 1e12 {
            return Err(Error::InvalidConfig(
                "chain never reaches the absorbing state; supply a horizon".into(),
            ));
        }
    }
    Ok(ChainExpectation {
        expected_successes: succ[ix],
        expected_power: power[ix],
        expected_rounds: rounds[ix],
    })
}

/// Offline broadcast optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineBroadcast {
    pub max_receivers: usize,
    /// Lexicographically-first optimal receiver subset (link ids).
    pub witness: Vec<usize>,
    /// Cheapest ladder power able to reach each receiver (None = unreachable).
    pub min_power: Vec<Option<f64>>,
}

/// Maximum number of receivers reachable under the battery, by exhaustive
/// subset enumeration. Each delivery costs the cheapest ladder power whose
/// noise-only SINR clears beta at that receiver.
pub fn offline_optimal_broadcast(
    instance: &Instance,
    ladder: &PowerLadder,
    config: &ScenarioConfig,
) -> Result<OfflineBroadcast> {
    let links = &instance.links;
    let m = links.len();
    if m > BROADCAST_CAP {
        return Err(Error::OracleCap { what: "receivers", got: m, cap: BROADCAST_CAP });
    }
    if ladder.powers.len() > LADDER_CAP {
        return Err(Error::OracleCap {
            what: "ladder states",
            got: ladder.powers.len(),
            cap: LADDER_CAP,
        });
    }
    let min_power: Vec<Option<f64>> = links
        .iter()
        .map(|l| {
            let q = instance.space.q(l.sender, l.receiver);
            ladder.powers.iter().copied().find(|&p| decodes(p, q, config))
        })
        .collect();

    let mut best_count = 0usize;
    let mut best_mask = 0usize;
    for mask in 0usize..(1 << m) {
        let count = mask.count_ones() as usize;
        if count <= best_count {
            continue;
        }
        let mut cost = 0.0f64;
        let mut reachable = true;
        for (i, mp) in min_power.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            match mp {
                Some(p) => cost += p,
                None => {
                    reachable = false;
                    break;
                }
            }
        }
        if reachable && cost <= config.battery {
            best_count = count;
            best_mask = mask;
        }
    }
    let witness =
        (0..m).filter(|i| best_mask & (1 << i) != 0).map(|i| links[i].id).collect();
    Ok(OfflineBroadcast { max_receivers: best_count, witness, min_power })
}

/// Noise-only decode test shared with the broadcast engine's ground truth.
pub fn decodes(power: f64, quasi_distance: f64, config: &ScenarioConfig) -> bool {
    if config.noise == 0.0 {
        return true;
    }
    power / quasi_distance / config.noise >= config.beta
}
