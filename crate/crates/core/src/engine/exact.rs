//! Exact forward propagation of the synchronous chain over all `3^n`
//! configurations. Only feasible for tiny graphs; used as a test oracle for
//! the Monte Carlo engine.

use std::collections::BTreeMap;

use crate::dynamics::{
    belief_prob, factcheck_prob, tally_neighbors, AgentState, ModelParams, StateVector,
};
use crate::error::{Error, Result};
use crate::graph::Graph;

pub const MAX_EXACT_NODES: usize = 8;
pub const MAX_EXACT_STEPS: usize = 6;

/// Probability of each state for one node: `(p_B, p_F, p_S)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StateProbabilities {
    pub believer: f64,
    pub fact_checker: f64,
    pub susceptible: f64,
}

impl StateProbabilities {
    pub fn get(&self, state: AgentState) -> f64 {
        match state {
            AgentState::Believer => self.believer,
            AgentState::FactChecker => self.fact_checker,
            AgentState::Susceptible => self.susceptible,
        }
    }

    fn add(&mut self, state: AgentState, p: f64) {
        match state {
            AgentState::Believer => self.believer += p,
            AgentState::FactChecker => self.fact_checker += p,
            AgentState::Susceptible => self.susceptible += p,
        }
    }
}

/// Joint distribution over whole-network configurations. Configurations are
/// keyed by their base-3 code (node 0 is the least significant digit).
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    nodes: usize,
    probs: BTreeMap<u32, f64>,
}

fn encode(states: &[AgentState]) -> u32 {
    states
        .iter()
        .rev()
        .fold(0, |code, s| code * 3 + s.index() as u32)
}

fn decode(mut code: u32, nodes: usize) -> StateVector {
    let mut out = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        out.push(AgentState::ALL[(code % 3) as usize]);
        code /= 3;
    }
    StateVector::new(out)
}

impl StateDistribution {
    fn point_mass(states: &StateVector) -> Self {
        StateDistribution {
            nodes: states.len(),
            probs: BTreeMap::from([(encode(states.as_slice()), 1.0)]),
        }
    }

    /// Number of configurations with nonzero probability.
    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probability(&self, states: &StateVector) -> f64 {
        if states.len() != self.nodes {
            return 0.0;
        }
        self.probs
            .get(&encode(states.as_slice()))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (StateVector, f64)> + '_ {
        self.probs
            .iter()
            .map(move |(&code, &p)| (decode(code, self.nodes), p))
    }

    /// Per-node state probabilities.
    pub fn marginals(&self) -> Vec<StateProbabilities> {
        let mut out = vec![StateProbabilities::default(); self.nodes];
        for (states, p) in self.iter() {
            for (m, &s) in out.iter_mut().zip(states.as_slice()) {
                m.add(s, p);
            }
        }
        out
    }
}

/// One-step transition probabilities of a node, indexed like
/// [`AgentState::ALL`].
fn node_kernel(
    state: AgentState,
    g: &Graph,
    config: &StateVector,
    i: usize,
    params: &ModelParams,
) -> [f64; 3] {
    match state {
        AgentState::Susceptible => {
            let t = tally_neighbors(g, config, i).expect("config sized to graph");
            let f = belief_prob(params, t);
            let h = factcheck_prob(params, t);
            [1.0 - f - h, f, h]
        }
        AgentState::Believer => [
            params.p_forget(),
            1.0 - params.p_verify() - params.p_forget(),
            params.p_verify(),
        ],
        AgentState::FactChecker => [params.p_forget(), 0.0, 1.0 - params.p_forget()],
    }
}

/// Exact distribution of the configuration after `steps` synchronous updates
/// from `initial`.
pub fn exact_state_distribution(
    g: &Graph,
    initial: &StateVector,
    params: &ModelParams,
    steps: usize,
) -> Result<StateDistribution> {
    let n = g.node_count();
    if n > MAX_EXACT_NODES || steps > MAX_EXACT_STEPS {
        return Err(Error::Intractable {
            nodes: n,
            steps,
            max_nodes: MAX_EXACT_NODES,
            max_steps: MAX_EXACT_STEPS,
        });
    }
    if initial.len() != n {
        return Err(Error::SizeMismatch {
            states: initial.len(),
            node_count: n,
        });
    }

    let mut dist = StateDistribution::point_mass(initial);
    for _ in 0..steps {
        let mut next: BTreeMap<u32, f64> = BTreeMap::new();
        for (config, p) in dist.iter() {
            // Partial products over nodes 0..i, as (code prefix, probability).
            let mut partial: Vec<(u32, f64)> = vec![(0, p)];
            let mut place = 1u32;
            for (i, &s) in config.as_slice().iter().enumerate() {
                let kernel = node_kernel(s, g, &config, i, params);
                partial = partial
                    .iter()
                    .flat_map(|&(code, q)| {
                        kernel
                            .iter()
                            .enumerate()
                            .filter(|(_, &k)| k > 0.0)
                            .map(move |(digit, &k)| (code + digit as u32 * place, q * k))
                    })
                    .collect();
                place *= 3;
            }
            for (code, q) in partial {
                *next.entry(code).or_insert(0.0) += q;
            }
        }
        dist.probs = next;
    }
    Ok(dist)
}
