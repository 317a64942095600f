//! Quasi-metric (decay) spaces: construction, validation, ball queries,
//! independence, and bounded-growth diagnostics.
//!
//! A quasi-distance is nonnegative and triangle-respecting but not
//! necessarily symmetric. Everything downstream consumes only the matrix;
//! planar coordinates are generation metadata.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{PowerScheme, ScenarioConfig};
use crate::error::{Error, Result};
use crate::sinrcore::QuasiLink;

/// Relative tolerance for triangle checks; Floyd-Warshall closure can leave
/// ulp-level slack between a stored entry and a re-summed two-hop path.
const TRIANGLE_TOL: f64 = 1e-9;

/// Cap for the exhaustive independence-dimension search (2^(cap-1) subsets).
pub const EXHAUSTIVE_CAP: usize = 16;

/// A finite quasi-metric space held as a dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiMetricSpace {
    n: usize,
    q: Vec<f64>,
    labels: Vec<String>,
}

impl QuasiMetricSpace {
    /// Wraps a matrix without running the closure. The caller is expected to
    /// provide a valid quasi-metric; `validate_quasi_metric` tells the truth
    /// either way.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut q = Vec::with_capacity(n * n);
        for row in &rows {
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
            q.extend_from_slice(row);
        }
        Ok(Self { n, q, labels: default_labels(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Directed quasi-distance from `u` to `v`.
    #[inline]
    pub fn q(&self, u: usize, v: usize) -> f64 {
        self.q[u * self.n + v]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: Vec<String>) {
        assert_eq!(labels.len(), self.n);
        self.labels = labels;
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|u| self.q[u * self.n..(u + 1) * self.n].to_vec())
            .collect()
    }

    /// Symmetrized distance used for packing estimates.
    #[inline]
    pub fn mutual(&self, u: usize, v: usize) -> f64 {
        self.q(u, v).min(self.q(v, u))
    }

    pub fn max_from(&self, u: usize) -> f64 {
        (0..self.n)
            .filter(|&z| z != u)
            .map(|z| self.q(u, z))
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> std::result::Result<(), (usize, usize)> {
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                let (a, b) = (self.q(u, v), self.q(v, u));
                if (a - b).abs() > tol * a.abs().max(b.abs()).max(1.0) {
                    return Err((u, v));
                }
            }
        }
        Ok(())
    }

    fn check_node(&self, z: usize) -> Result<()> {
        if z >= self.n {
            return Err(Error::NodeOutOfRange { node: z, n: self.n });
        }
        Ok(())
    }
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i}")).collect()
}

/// A directed ball query: membership is measured away from the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallQuery {
    pub center: usize,
    pub radius: f64,
}

/// One axiom violation with its witness indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AxiomViolation {
    Negative { u: usize, v: usize, value: f64 },
    NonzeroDiagonal { u: usize, value: f64 },
    /// q[u][v] = q[v][u] = 0 for distinct nodes.
    IdentityCollapse { u: usize, v: usize },
    /// Zero off-diagonal entry in one direction.
    ZeroOffDiagonal { u: usize, v: usize },
    /// q[u][v] > q[u][w] + q[w][v] beyond tolerance.
    Triangle { u: usize, w: usize, v: usize, direct: f64, detour: f64 },
}

/// Violations are data, not errors: an empty report certifies the axioms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<AxiomViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Repairs an arbitrary nonnegative matrix into a quasi-metric by taking the
/// all-pairs shortest-path closure. Entries only decrease; a matrix that
/// already satisfies the triangle inequality comes back unchanged.
pub fn closure_quasi_metric(raw: Vec<Vec<f64>>) -> Result<QuasiMetricSpace> {
    let n = raw.len();
    for (u, row) in raw.iter().enumerate() {
        if row.len() != n {
            return Err(Error::NotSquare { rows: n, cols: row.len() });
        }
        for (v, &x) in row.iter().enumerate() {
            if x < 0.0 {
                return Err(Error::NegativeEntry { row: u, col: v, value: x });
            }
            if u == v && x != 0.0 {
                return Err(Error::NonzeroDiagonal { idx: u, value: x });
            }
            if u != v && x == 0.0 {
                return Err(Error::ZeroOffDiagonal { row: u, col: v });
            }
        }
    }
    let mut space = QuasiMetricSpace::from_matrix(raw)?;
    let q = &mut space.q;
    // Relaxations below a relative epsilon are ignored; this makes the
    // closure idempotent under floating point (a second pass can otherwise
    // re-associate a path sum and win by an ulp).
    for w in 0..n {
        for u in 0..n {
            let uw = q[u * n + w];
            for v in 0..n {
                let direct = q[u * n + v];
                let detour = uw + q[w * n + v];
                if detour < direct - 1e-12 * direct {
                    q[u * n + v] = detour;
                }
            }
        }
    }
    Ok(space)
}

/// Lists every axiom violation with a witness. Performs the full O(n^3)
/// triangle sweep.
pub fn validate_quasi_metric(space: &QuasiMetricSpace) -> ValidationReport {
    let n = space.n;
    let mut violations = Vec::new();
    for u in 0..n {
        let d = space.q(u, u);
        if d != 0.0 {
            violations.push(AxiomViolation::NonzeroDiagonal { u, value: d });
        }
        for v in 0..n {
            if u == v {
                continue;
            }
            let x = space.q(u, v);
            if x < 0.0 {
                violations.push(AxiomViolation::Negative { u, v, value: x });
            } else if x == 0.0 {
                if u < v && space.q(v, u) == 0.0 {
                    violations.push(AxiomViolation::IdentityCollapse { u, v });
                } else {
                    violations.push(AxiomViolation::ZeroOffDiagonal { u, v });
                }
            }
        }
    }
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let direct = space.q(u, v);
            let tol = TRIANGLE_TOL * direct.abs().max(1.0);
            for w in 0..n {
                if w == u || w == v {
                    continue;
                }
                let detour = space.q(u, w) + space.q(w, v);
                if direct > detour + tol {
                    violations.push(AxiomViolation::Triangle { u, w, v, direct, detour });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Directed ball: `{z : q(center, z) <= radius}`, always containing the
/// center. Returned sorted by node id.
pub fn ball(space: &QuasiMetricSpace, query: &BallQuery) -> Result<Vec<usize>> {
    space.check_node(query.center)?;
    if query.radius < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "ball radius {} must be nonnegative",
            query.radius
        )));
    }
    Ok((0..space.n)
        .filter(|&z| space.q(query.center, z) <= query.radius)
        .collect())
}

/// A set `I` is independent with respect to `v` when the ball around each
/// member `w` of radius q(v,w) contains no other member.
pub fn independent_wrt(space: &QuasiMetricSpace, v: usize, set: &[usize]) -> Result<bool> {
    space.check_node(v)?;
    for &w in set {
        space.check_node(w)?;
        if w == v {
            return Err(Error::MemberOfSet { v });
        }
    }
    for &w in set {
        let radius = space.q(v, w);
        for &z in set {
            if z != w && space.q(w, z) <= radius {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Exact independence dimension around `v` by exhaustive subset search.
/// Rejects spaces above [`EXHAUSTIVE_CAP`] nodes.
pub fn independence_dimension(space: &QuasiMetricSpace, v: usize) -> Result<usize> {
    space.check_node(v)?;
    if space.n > EXHAUSTIVE_CAP {
        return Err(Error::ExhaustiveCapExceeded { n: space.n, cap: EXHAUSTIVE_CAP });
    }
    let candidates: Vec<usize> = (0..space.n).filter(|&z| z != v).collect();
    let m = candidates.len();
    let mut best = 0usize;
    let mut subset = Vec::with_capacity(m);
    for mask in 0u32..(1u32 << m) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        subset.clear();
        for (i, &c) in candidates.iter().enumerate() {
            if mask & (1 << i) != 0 {
                subset.push(c);
            }
        }
        if independent_wrt(space, v, &subset)? {
            best = size;
        }
    }
    Ok(best)
}

/// Greedy lower bound on the independence dimension for spaces above the
/// exhaustive cap. Candidates are taken in ascending q(v, .) order.
pub fn independence_dimension_greedy(space: &QuasiMetricSpace, v: usize) -> Result<usize> {
    space.check_node(v)?;
    let mut order: Vec<usize> = (0..space.n).filter(|&z| z != v).collect();
    order.sort_by(|&a, &b| {
        space.q(v, a).total_cmp(&space.q(v, b)).then(a.cmp(&b))
    });
    let mut picked: Vec<usize> = Vec::new();
    for w in order {
        picked.push(w);
        if !independent_wrt(space, v, &picked)? {
            picked.pop();
        }
    }
    Ok(picked.len())
}

/// Empirical doubling-dimension estimate.
///
/// For every node c the full-spread ball (radius max_z q(c,z)) is packed at
/// separation 2*eps*r under the symmetrized distance — two points closer
/// than that share an eps*r-ball — and the estimate is the maximum of
/// log(count)/log(1/eps). Diagnostic only; exact packing is used up to 16
/// candidates, greedy beyond.
pub fn doubling_estimate(space: &QuasiMetricSpace, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidConfig(format!("eps = {eps} outside (0,1]")));
    }
    if space.n <= 1 || eps == 1.0 {
        return Ok(0.0);
    }
    let mut best = 0.0f64;
    for c in 0..space.n {
        let radius = space.max_from(c);
        if radius <= 0.0 {
            continue;
        }
        let members = ball(space, &BallQuery { center: c, radius })?;
        let sep = 2.0 * eps * radius;
        let count = max_packing(space, &members, sep);
        if count > 1 {
            let est = (count as f64).ln() / (1.0 / eps).ln();
            best = best.max(est);
        }
    }
    Ok(best)
}

/// Largest subset of `members` with pairwise symmetrized distance >= `sep`.
fn max_packing(space: &QuasiMetricSpace, members: &[usize], sep: f64) -> usize {
    let m = members.len();
    if m <= 16 {
        let mut best = 0usize;
        'mask: for mask in 0u32..(1u32 << m) {
            let size = mask.count_ones() as usize;
            if size <= best {
                continue;
            }
            for i in 0..m {
                if mask & (1 << i) == 0 {
                    continue;
                }
                for j in (i + 1)..m {
                    if mask & (1 << j) != 0
                        && space.mutual(members[i], members[j]) < sep
                    {
                        continue 'mask;
                    }
                }
            }
            best = size;
        }
        best
    } else {
        let mut picked: Vec<usize> = Vec::new();
        for &z in members {
            if picked.iter().all(|&p| space.mutual(p, z) >= sep) {
                picked.push(z);
            }
        }
        picked.len()
    }
}

/// A space together with its links and the scenario that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub space: QuasiMetricSpace,
    pub links: Vec<QuasiLink>,
    pub config: ScenarioConfig,
    /// Planar coordinates when the instance was synthesized.
    pub coords: Option<Vec<[f64; 2]>>,
}

impl Instance {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        for (ix, link) in self.links.iter().enumerate() {
            if link.id != ix {
                return Err(Error::InvalidConfig(format!(
                    "link ids must be contiguous from 0: found id {} at position {ix}",
                    link.id
                )));
            }
            self.space.check_node(link.sender)?;
            self.space.check_node(link.receiver)?;
            if link.sender == link.receiver {
                return Err(Error::InvalidConfig(format!(
                    "link {} has coincident endpoints",
                    link.id
                )));
            }
            if self.space.q(link.sender, link.receiver) <= 0.0 {
                return Err(Error::ZeroCrossDistance { from: link.sender, to: link.receiver });
            }
        }
        Ok(())
    }

    /// Per-node transmission probabilities: link colors land on their
    /// senders, other nodes get zero.
    pub fn node_probs(&self) -> Vec<f64> {
        let mut probs = vec![0.0; self.space.n()];
        for link in &self.links {
            probs[link.sender] += link.prob;
        }
        probs
    }

    /// Ratio of maximum to minimum power assignment.
    pub fn power_spread(&self) -> f64 {
        spread(self.links.iter().map(|l| l.power))
    }

    /// Ratio of maximum to minimum link quasi-length.
    pub fn length_spread(&self) -> f64 {
        spread(self.links.iter().map(|l| l.quasi_length))
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut any = false;
    for v in values {
        any = true;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if any && lo > 0.0 {
        hi / lo
    } else {
        1.0
    }
}

/// Synthesizes an instance: points in the plane, asymmetric stretch factors
/// in [1, sigma], exponentiation by alpha, then the quasi-metric closure.
/// Deterministic in (config, seed).
pub fn generate_instance(config: &ScenarioConfig, seed: u64) -> Result<Instance> {
    config.validate()?;
    let n = config.n_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let min_sep = config.area * config.min_sep_frac;
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while pts.len() < n {
        let p = [rng.gen_range(0.0..config.area), rng.gen_range(0.0..config.area)];
        let ok = pts
            .iter()
            .all(|&o| ((o[0] - p[0]).powi(2) + (o[1] - p[1]).powi(2)).sqrt() >= min_sep);
        if ok {
            pts.push(p);
        }
        attempts += 1;
        if attempts > 10_000 * n.max(1) {
            return Err(Error::InvalidConfig(format!(
                "could not place {n} nodes with separation {min_sep}"
            )));
        }
    }

    let mut raw = vec![vec![0.0f64; n]; n];
    for u in 0..n {
        for v in 0..n {
            if u == v {
                continue;
            }
            let d = ((pts[u][0] - pts[v][0]).powi(2) + (pts[u][1] - pts[v][1]).powi(2)).sqrt();
            let stretch = if config.sigma > 1.0 {
                rng.gen_range(1.0..=config.sigma)
            } else {
                1.0
            };
            raw[u][v] = (d * stretch).powf(config.alpha);
        }
    }
    let space = closure_quasi_metric(raw)?;

    let mut order: Vec<usize> = (0..n).collect();
    // Fisher-Yates with draws taken even for n < 2 so the stream layout is
    // stable across link-count choices.
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    let m = config.n_links.unwrap_or(n / 2).min(n / 2);
    let mut links = Vec::with_capacity(m);
    let lengths: Vec<f64> = (0..m)
        .map(|i| space.q(order[2 * i], order[2 * i + 1]))
        .collect();
    let q_max = lengths.iter().copied().fold(0.0f64, f64::max);
    // Power formulas keep a unit floor on the noise so zero-noise scenarios
    // still get positive powers.
    let n_eff = config.noise.max(1.0);
    let scale = config.power_margin * config.beta * n_eff;
    for i in 0..m {
        let q_i = lengths[i];
        let power = match config.power_scheme {
            PowerScheme::Uniform => scale * q_max,
            PowerScheme::InverseLength => scale * q_max * q_max / q_i,
            PowerScheme::Proportional => scale * q_i,
        };
        links.push(QuasiLink::new(
            i,
            order[2 * i],
            order[2 * i + 1],
            q_i,
            power,
            config.c1 / (2.0 * m.max(1) as f64),
        ));
    }

    let instance = Instance { space, links, config: config.clone(), coords: Some(pts) };
    instance.validate()?;
    Ok(instance)
}

/// Synthesizes a broadcast instance: the same planar sampling pipeline with
/// sigma forced to 1 (the broadcast engine needs a metric), node 0 as the
/// single sender, and one link per remaining node.
pub fn generate_broadcast_instance(config: &ScenarioConfig, seed: u64) -> Result<Instance> {
    if config.sigma != 1.0 {
        return Err(Error::InvalidConfig(format!(
            "broadcast instances must be symmetric: sigma = {} (set sigma = 1)",
            config.sigma
        )));
    }
    if config.n_nodes < 2 {
        return Err(Error::InvalidConfig("broadcast needs a sender and a receiver".into()));
    }
    let base = generate_instance(&ScenarioConfig { n_links: None, ..config.clone() }, seed)?;
    let space = base.space;
    let n = space.n();
    let prob = config.c1 / (2.0 * (n - 1) as f64);
    let links = (1..n)
        .map(|z| QuasiLink::from_space(z - 1, 0, z, 1.0, prob, &space))
        .collect();
    let instance = Instance { space, links, config: config.clone(), coords: base.coords };
    instance.validate()?;
    Ok(instance)
}
