//! Independent reference implementation used as a test oracle. The
//! reference computations use no library code; `to_scenario` only converts
//! their inputs.

#![allow(dead_code)]

use rand::Rng;

pub const S: usize = 8;

/// Per-component kernels `[ms, sensor, sm]`, each `k[from][to]` with 0 = healthy.
pub type Kernels = [[[f64; 2]; 2]; 3];

/// `P(z = 1 | s, a)`, indexed `[state][action]`, written out by hand.
/// An update needs a generated sample (sensor healthy) and a healthy SM
/// link; the probe only forces generation when the MS link is healthy.
pub fn update_table(p_g: f64) -> [[f64; 2]; S] {
    [
        [p_g, 1.0], // MS h, S h, SM h
        [0.0, 0.0], // MS h, S h, SM f
        [0.0, 0.0], // MS h, S f, SM h
        [0.0, 0.0], // MS h, S f, SM f
        [p_g, p_g], // MS f, S h, SM h
        [0.0, 0.0], // MS f, S h, SM f
        [0.0, 0.0], // MS f, S f, SM h
        [0.0, 0.0], // MS f, S f, SM f
    ]
}

pub fn obs_prob(p_g: f64, s: usize, a: usize, z: usize) -> f64 {
    let p1 = update_table(p_g)[s][a];
    if z == 1 {
        p1
    } else {
        1.0 - p1
    }
}

fn bits(i: usize) -> [usize; 3] {
    [(i >> 2) & 1, (i >> 1) & 1, i & 1]
}

pub fn joint(k: &Kernels) -> [[f64; S]; S] {
    let mut m = [[0.0; S]; S];
    for (i, row) in m.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (bi, bj) = (bits(i), bits(j));
            *v = (0..3).map(|c| k[c][bi[c]][bj[c]]).product();
        }
    }
    m
}

pub fn kernel(p01: f64, p11: f64) -> [[f64; 2]; 2] {
    [[1.0 - p01, p01], [1.0 - p11, p11]]
}

/// Bits, with `0 log 0 = 0`.
pub fn h2(p: f64) -> f64 {
    let t = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.log2() };
    t(p) + t(1.0 - p)
}

pub fn faulty_mass(b: &[f64; S]) -> f64 {
    [1, 2, 3, 5, 6, 7].iter().map(|&i| b[i]).sum()
}

pub fn entropy(b: &[f64; S]) -> f64 {
    h2(faulty_mass(b))
}

/// Unnormalised forward step: `alpha'(j) = r(j, a, z) sum_i alpha(i) P(i, j)`.
pub fn forward(alpha: &[f64; S], p: &[[f64; S]; S], p_g: f64, a: usize, z: usize) -> [f64; S] {
    let mut out = [0.0; S];
    for (j, o) in out.iter_mut().enumerate() {
        let pred: f64 = (0..S).map(|i| alpha[i] * p[i][j]).sum();
        *o = pred * obs_prob(p_g, j, a, z);
    }
    out
}

pub fn normalize(v: &[f64; S]) -> Option<[f64; S]> {
    let s: f64 = v.iter().sum();
    (s > 0.0).then(|| v.map(|x| x / s))
}

pub fn filter(b: &[f64; S], p: &[[f64; S]; S], p_g: f64, a: usize, z: usize) -> Option<[f64; S]> {
    normalize(&forward(b, p, p_g, a, z))
}

/// Left side of the probing condition, straight from the kernels.
pub fn assumption_lhs(b: &[f64; S], k: &Kernels, p_g: f64) -> f64 {
    (0..S)
        .map(|i| {
            let [_, s, sm] = bits(i);
            b[i] * (k[1][s][0] * k[2][sm][0] * (2.0 - p_g) - 1.0)
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct Model {
    pub k: Kernels,
    pub p_g: f64,
    pub c: f64,
    pub l1: f64,
    pub l2: f64,
    /// Horizon used to normalise AoI.
    pub n: u32,
}

impl Model {
    fn stage(&self, alpha: &[f64; S], aoi: u32) -> f64 {
        let mass: f64 = alpha.iter().sum();
        match normalize(alpha) {
            Some(b) => mass * (self.l1 * entropy(&b) + self.l2 * aoi as f64 / self.n as f64),
            None => 0.0,
        }
    }

    /// Expected total cost of a fixed decision tree over `depth` decision
    /// stages. Decision nodes are numbered in heap order: the root is 0 and
    /// the child of node `i` after observing `z` is `2i + 1 + z`.
    pub fn tree_cost(&self, b0: &[f64; S], aoi0: u32, depth: u32, tree: u64) -> f64 {
        let p = joint(&self.k);
        self.tree_cost_rec(&p, *b0, aoi0, 0, 0, depth, tree)
    }

    #[allow(clippy::too_many_arguments)]
    fn tree_cost_rec(&self, p: &[[f64; S]; S], alpha: [f64; S], aoi: u32, node: u64, t: u32, depth: u32, tree: u64) -> f64 {
        let mass: f64 = alpha.iter().sum();
        if mass <= 0.0 {
            return 0.0;
        }
        let here = self.stage(&alpha, aoi);
        if t == depth {
            return here;
        }
        let a = ((tree >> node) & 1) as usize;
        let mut total = here + mass * self.c * a as f64;
        for z in 0..2 {
            let next = forward(&alpha, p, self.p_g, a, z);
            let next_aoi = if z == 1 { 1 } else { (aoi + 1).min(self.n) };
            total += self.tree_cost_rec(p, next, next_aoi, 2 * node + 1 + z as u64, t + 1, depth, tree);
        }
        total
    }

    /// Minimum over every deterministic decision tree of depth `depth`.
    pub fn brute_force(&self, b0: &[f64; S], aoi0: u32, depth: u32) -> f64 {
        assert!(depth <= 4, "enumeration is exponential in 2^depth");
        let decisions = (1u64 << depth) - 1;
        (0..(1u64 << decisions))
            .map(|tree| self.tree_cost(b0, aoi0, depth, tree))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Belief with roughly a quarter of its entries zeroed.
pub fn random_belief<R: Rng + ?Sized>(rng: &mut R) -> [f64; S] {
    loop {
        let mut w = [0.0; S];
        for v in w.iter_mut() {
            if rng.random::<f64>() > 0.25 {
                *v = -rng.random::<f64>().max(1e-300).ln();
            }
        }
        if let Some(b) = normalize(&w) {
            return b;
        }
    }
}

pub fn random_kernels<R: Rng + ?Sized>(rng: &mut R) -> Kernels {
    [0; 3].map(|_| kernel(rng.random(), rng.random()))
}

pub fn to_scenario(m: &Model, b0: &[f64; S], aoi0: u32) -> afdsim::ScenarioConfig {
    use afdsim::scenario::{BeliefInit, InitialStateMode};
    let k = |c: usize| afdsim::SubsystemKernel::from_rows(m.k[c]).unwrap();
    afdsim::ScenarioConfig {
        transition: afdsim::TransitionModel::new(k(0), k(1), k(2)).unwrap(),
        p_g: m.p_g,
        probe_cost: m.c,
        lambda1: m.l1,
        lambda2: m.l2,
        horizon: m.n,
        initial_belief: BeliefInit::Explicit(*b0),
        initial_aoi: aoi0,
        initial_state: InitialStateMode::FromBelief,
        seed: 0,
    }
}

pub fn random_model<R: Rng + ?Sized>(rng: &mut R, n: u32) -> Model {
    Model {
        k: random_kernels(rng),
        p_g: rng.random_range(0.0..0.95),
        c: rng.random_range(0.0..2.0),
        l1: rng.random_range(0.0..2.0),
        l2: rng.random_range(0.0..2.0),
        n,
    }
}
