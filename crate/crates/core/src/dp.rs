//! Exact finite-horizon dynamic programming over the tree of beliefs
//! reachable from one augmented state.
//!
//! Every interior node branches on (action, observation); observation
//! branches of probability zero are dropped. Leaves carry the terminal cost
//! `lambda1 H + lambda2 aoi_norm`, and interior nodes
//!
//! ```text
//! Q(a) = c 1{a = probe} + V(x) + sum_z Pr(z | x, a) J(child(a, z))
//! J    = min_a Q(a)         (ties go to probe)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{assumption2_check, observation_likelihood, AugmentedState, BeliefState, ViolationRate};
use crate::error::{Error, Result};
use crate::model::{Action, Observation, Pomdp};
use crate::policy::{DecisionContext, Policy};
use crate::rng::StreamKey;
use crate::scenario::ScenarioConfig;

pub const DEFAULT_HORIZON_CAP: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpChild {
    pub prob: f64,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpNode {
    pub state: AugmentedState,
    pub stage: u32,
    /// Indexed `[action][observation]`; empty for leaves.
    pub children: [[Option<DpChild>; 2]; 2],
    /// `Q(no-probe)`, `Q(probe)`; equal to the terminal cost at leaves.
    pub cost_to_go: [f64; 2],
    pub optimal_cost: f64,
    /// `None` at leaves.
    pub optimal_action: Option<Action>,
}

impl DpNode {
    pub fn is_leaf(&self) -> bool {
        self.optimal_action.is_none()
    }

    pub fn child(&self, action: Action, obs: Observation) -> Option<DpChild> {
        self.children[action.bit()][obs.bit()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpSolution {
    nodes: Vec<DpNode>,
    pub horizon: u32,
}

impl DpSolution {
    pub fn root(&self) -> &DpNode {
        &self.nodes[0]
    }

    pub fn node(&self, i: usize) -> &DpNode {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[DpNode] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn optimal_cost(&self) -> f64 {
        self.root().optimal_cost
    }

    /// Node reached by following `(a_{t-1}, z_t)` pairs from the root.
    pub fn follow(&self, path: &[(Action, Observation)]) -> Option<&DpNode> {
        let mut node = self.root();
        for &(a, z) in path {
            node = &self.nodes[node.child(a, z)?.node];
        }
        Some(node)
    }
}

struct Builder<'a> {
    pomdp: Pomdp,
    config: &'a ScenarioConfig,
    depth: u32,
    nodes: Vec<DpNode>,
}

impl Builder<'_> {
    fn terminal_cost(&self, x: &AugmentedState) -> f64 {
        x.voi(self.config.lambda1, self.config.lambda2)
    }

    fn build(&mut self, x: AugmentedState, stage: u32) -> Result<usize> {
        let id = self.nodes.len();
        let v = self.terminal_cost(&x);
        self.nodes.push(DpNode {
            state: x,
            stage,
            children: [[None; 2]; 2],
            cost_to_go: [v, v],
            optimal_cost: v,
            optimal_action: None,
        });
        if stage == self.depth {
            return Ok(id);
        }
        let mut children = [[None; 2]; 2];
        let mut q = [v, v + self.config.probe_cost];
        for a in Action::BOTH {
            for z in Observation::BOTH {
                let p = observation_likelihood(&x.belief, a, z, &self.pomdp);
                if p <= 0.0 {
                    continue;
                }
                let next = x.step(a, z, &self.pomdp)?;
                let child = self.build(next, stage + 1)?;
                q[a.bit()] += p * self.nodes[child].optimal_cost;
                children[a.bit()][z.bit()] = Some(DpChild { prob: p, node: child });
            }
        }
        let action = if q[1] <= q[0] { Action::Probe } else { Action::NoProbe };
        let node = &mut self.nodes[id];
        node.children = children;
        node.cost_to_go = q;
        node.optimal_cost = q[action.bit()];
        node.optimal_action = Some(action);
        Ok(id)
    }
}

/// Solves `horizon` decision stages from `initial` (stages `0..horizon`,
/// terminal cost at stage `horizon`) by backward induction.
pub fn dp_solve_capped(initial: &AugmentedState, config: &ScenarioConfig, horizon: u32, cap: u32) -> Result<DpSolution> {
    if horizon > cap {
        return Err(Error::HorizonCap { horizon, cap });
    }
    config.validate()?;
    let mut b = Builder { pomdp: config.pomdp(), config, depth: horizon, nodes: Vec::new() };
    b.build(*initial, 0)?;
    Ok(DpSolution { nodes: b.nodes, horizon })
}

pub fn dp_solve(initial: &AugmentedState, config: &ScenarioConfig, horizon: u32) -> Result<DpSolution> {
    dp_solve_capped(initial, config, horizon, DEFAULT_HORIZON_CAP)
}

/// `sum_z Pr(z | x, no-probe) J(child(0, z)) - sum_z Pr(z | x, probe) J(child(1, z))`:
/// probing is optimal exactly when the probe cost does not exceed this.
pub fn probe_advantage(solution: &DpSolution, node: usize) -> Result<f64> {
    let n = solution.node(node);
    if n.is_leaf() {
        return Err(Error::LeafNode(format!("node {node} at stage {}", n.stage)));
    }
    let expect = |a: Action| -> f64 {
        Observation::BOTH
            .iter()
            .filter_map(|&z| n.child(a, z))
            .map(|c| c.prob * solution.node(c.node).optimal_cost)
            .sum()
    };
    Ok(expect(Action::NoProbe) - expect(Action::Probe))
}

/// Follows a solved tree; the decision at stage `t` is read off the node
/// reached by the observed history.
#[derive(Debug, Clone)]
pub struct DpPolicy {
    solution: DpSolution,
}

impl DpPolicy {
    pub fn new(solution: DpSolution) -> Self {
        DpPolicy { solution }
    }
}

impl Policy for DpPolicy {
    fn decide(&self, ctx: &DecisionContext<'_>) -> Action {
        self.solution
            .follow(ctx.history)
            .and_then(|n| n.optimal_action)
            .unwrap_or(Action::NoProbe)
    }

    fn id(&self) -> String {
        "dp_optimal".into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiMonotonicityReport {
    /// `J_0(P, aoi / N)` for `aoi = 1..=N`.
    pub values: Vec<f64>,
    /// AoI values `d` with `J(d + 1) < J(d) - tol`.
    pub violations: Vec<u32>,
}

impl AoiMonotonicityReport {
    pub fn nondecreasing(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const MONOTONICITY_TOL: f64 = 1e-10;

pub fn verify_aoi_monotonicity(config: &ScenarioConfig, belief: &BeliefState, horizon: u32) -> Result<AoiMonotonicityReport> {
    let mut values = Vec::with_capacity(horizon as usize);
    for aoi in 1..=horizon {
        let x = AugmentedState::new(*belief, aoi, horizon)?;
        values.push(dp_solve(&x, config, horizon)?.optimal_cost());
    }
    let violations = values
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] < w[0] - MONOTONICITY_TOL)
        .map(|(i, _)| i as u32 + 1)
        .collect();
    Ok(AoiMonotonicityReport { values, violations })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub entropy: f64,
    pub aoi_norm: f64,
    pub action: Action,
    pub probe_advantage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdStructureReport {
    pub points: Vec<GridPoint>,
    /// `(i, j)`: point `i` probes, point `j` dominates it componentwise but
    /// does not probe.
    pub violations: Vec<(usize, usize)>,
    /// Assumption 2 held at every grid belief.
    pub assumption2_roots: bool,
    /// Assumption 2 held at every node of every solved tree.
    pub assumption2_all_nodes: bool,
}

/// Solves each grid state and checks that the optimal probe region at the
/// root is upward closed in (entropy, normalized AoI).
pub fn verify_threshold_structure(
    config: &ScenarioConfig,
    horizon: u32,
    grid: &[AugmentedState],
) -> Result<ThresholdStructureReport> {
    let mut points = Vec::with_capacity(grid.len());
    let mut roots_ok = true;
    let mut all_ok = true;
    for x in grid {
        let sol = dp_solve(x, config, horizon)?;
        let root = sol.root();
        roots_ok &= assumption2_check(&x.belief, &config.transition, config.p_g).holds;
        all_ok &= sol
            .nodes()
            .iter()
            .all(|n| assumption2_check(&n.state.belief, &config.transition, config.p_g).holds);
        let adv = if root.is_leaf() { 0.0 } else { probe_advantage(&sol, 0)? };
        points.push(GridPoint {
            entropy: x.entropy(),
            aoi_norm: x.aoi_norm(),
            action: root.optimal_action.unwrap_or(Action::NoProbe),
            probe_advantage: adv,
        });
    }
    let mut violations = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if p.action != Action::Probe {
            continue;
        }
        for (j, q) in points.iter().enumerate() {
            if i != j && q.entropy >= p.entropy && q.aoi_norm >= p.aoi_norm && q.action != Action::Probe {
                violations.push((i, j));
            }
        }
    }
    Ok(ThresholdStructureReport { points, violations, assumption2_roots: roots_ok, assumption2_all_nodes: all_ok })
}

/// Samples belief pairs at a common AoI and counts how often the pair with
/// higher health entropy has a strictly lower optimal cost (diagnostic).
pub fn entropy_monotonicity_diagnostic(
    config: &ScenarioConfig,
    horizon: u32,
    pairs: usize,
    key: StreamKey,
) -> Result<ViolationRate> {
    let mut rng = key.rng();
    let mut out = ViolationRate::default();
    for _ in 0..pairs {
        let a = BeliefState::random(&mut rng);
        let b = BeliefState::random(&mut rng);
        let aoi = rng.random_range(1..=horizon);
        let (lo, hi) = if a.entropy() <= b.entropy() { (a, b) } else { (b, a) };
        let j = |belief| -> Result<f64> {
            Ok(dp_solve(&AugmentedState::new(belief, aoi, horizon)?, config, horizon)?.optimal_cost())
        };
        out.comparisons += 1;
        if j(hi)? < j(lo)? - MONOTONICITY_TOL {
            out.violations += 1;
        }
    }
    Ok(out)
}
