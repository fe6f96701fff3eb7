//! Susceptible / believer / fact-checker transition kernel.
//!
//! A susceptible node exposed to believers and fact-checkers leaves the
//! susceptible state with total probability `beta`, split between the two
//! camps by neighbor counts weighted with `1 + alpha` (believers) and
//! `1 - alpha` (fact-checkers). Believers verify with `p_verify`, and both
//! believers and fact-checkers forget with `p_forget`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_probability, Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AgentState {
    Susceptible,
    Believer,
    FactChecker,
}

impl AgentState {
    pub const ALL: [AgentState; 3] = [
        AgentState::Susceptible,
        AgentState::Believer,
        AgentState::FactChecker,
    ];

    pub fn symbol(self) -> char {
        match self {
            AgentState::Susceptible => 'S',
            AgentState::Believer => 'B',
            AgentState::FactChecker => 'F',
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for AgentState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "S" => Ok(AgentState::Susceptible),
            "B" => Ok(AgentState::Believer),
            "F" => Ok(AgentState::FactChecker),
            other => Err(format!(
                "unknown agent state `{other}` (expected S, B or F)"
            )),
        }
    }
}

/// The four model rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    beta: f64,
    alpha: f64,
    p_verify: f64,
    p_forget: f64,
}

impl ModelParams {
    pub fn new(beta: f64, alpha: f64, p_verify: f64, p_forget: f64) -> Result<Self> {
        match Self::violations(beta, alpha, p_verify, p_forget)
            .into_iter()
            .next()
        {
            Some(err) => Err(err),
            None => Ok(ModelParams {
                beta,
                alpha,
                p_verify,
                p_forget,
            }),
        }
    }

    /// Every invariant violated by the given values, in field order.
    pub fn violations(beta: f64, alpha: f64, p_verify: f64, p_forget: f64) -> Vec<Error> {
        let mut errors = Vec::new();
        if let Err(e) = check_probability("beta", beta) {
            errors.push(e);
        }
        if !(alpha > -1.0 && alpha < 1.0) {
            errors.push(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
                reason: "must lie in the open interval (-1, 1)",
            });
        }
        let verify_ok = check_probability("p_verify", p_verify).map_err(|e| errors.push(e));
        let forget_ok = check_probability("p_forget", p_forget).map_err(|e| errors.push(e));
        if verify_ok.is_ok() && forget_ok.is_ok() && p_verify + p_forget > 1.0 {
            errors.push(Error::InvalidParameter {
                name: "p_forget",
                value: p_forget,
                reason: "p_verify + p_forget must not exceed 1",
            });
        }
        errors
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn p_verify(&self) -> f64 {
        self.p_verify
    }

    pub fn p_forget(&self) -> f64 {
        self.p_forget
    }
}

/// Believer and fact-checker counts among a node's neighbors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NeighborTally {
    pub believers: u32,
    pub fact_checkers: u32,
}

impl NeighborTally {
    pub fn new(believers: u32, fact_checkers: u32) -> Self {
        NeighborTally {
            believers,
            fact_checkers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateVector(Vec<AgentState>);

impl StateVector {
    pub fn new(states: Vec<AgentState>) -> Self {
        StateVector(states)
    }

    pub fn uniform(n: usize, state: AgentState) -> Self {
        StateVector(vec![state; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[AgentState] {
        &self.0
    }

    pub fn get(&self, i: usize) -> AgentState {
        self.0[i]
    }

    pub fn into_inner(self) -> Vec<AgentState> {
        self.0
    }

    /// Number of nodes in `state`.
    pub fn count(&self, state: AgentState) -> usize {
        self.0.iter().filter(|&&s| s == state).count()
    }

    fn check_matches(&self, g: &Graph) -> Result<()> {
        if self.len() == g.node_count() {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                states: self.len(),
                node_count: g.node_count(),
            })
        }
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for StateVector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        s.chars()
            .map(|c| c.to_string().parse())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(StateVector)
    }
}

pub fn tally_neighbors(g: &Graph, states: &StateVector, i: usize) -> Result<NeighborTally> {
    states.check_matches(g)?;
    if i >= g.node_count() {
        return Err(Error::NodeOutOfRange {
            index: i,
            node_count: g.node_count(),
        });
    }
    Ok(tally(g.neighbors(i), &states.0))
}

#[inline]
fn tally(neighbors: &[u32], states: &[AgentState]) -> NeighborTally {
    let mut t = NeighborTally::default();
    for &j in neighbors {
        match states[j as usize] {
            AgentState::Believer => t.believers += 1,
            AgentState::FactChecker => t.fact_checkers += 1,
            AgentState::Susceptible => {}
        }
    }
    t
}

#[inline]
fn weights(params: &ModelParams, tally: NeighborTally) -> (f64, f64) {
    (
        f64::from(tally.believers) * (1.0 + params.alpha),
        f64::from(tally.fact_checkers) * (1.0 - params.alpha),
    )
}

/// Probability that a susceptible node becomes a believer this step.
/// Zero when no neighbor believes (including the unexposed 0/0 case).
pub fn belief_prob(params: &ModelParams, tally: NeighborTally) -> f64 {
    if tally.believers == 0 {
        return 0.0;
    }
    let (wb, wf) = weights(params, tally);
    params.beta * wb / (wb + wf)
}

/// Probability that a susceptible node becomes a fact-checker this step.
pub fn factcheck_prob(params: &ModelParams, tally: NeighborTally) -> f64 {
    if tally.fact_checkers == 0 {
        return 0.0;
    }
    let (wb, wf) = weights(params, tally);
    params.beta * wf / (wb + wf)
}

/// Maps one uniform draw in `[0, 1)` to the next state of a node.
#[inline]
pub(crate) fn transition(
    current: AgentState,
    tally: NeighborTally,
    params: &ModelParams,
    u: f64,
) -> AgentState {
    match current {
        AgentState::Susceptible => {
            if tally.believers == 0 && tally.fact_checkers == 0 {
                return AgentState::Susceptible;
            }
            let f = belief_prob(params, tally);
            if u < f {
                AgentState::Believer
            } else if u < f + factcheck_prob(params, tally) {
                AgentState::FactChecker
            } else {
                AgentState::Susceptible
            }
        }
        AgentState::Believer => {
            if u < params.p_verify {
                AgentState::FactChecker
            } else if u < params.p_verify + params.p_forget {
                AgentState::Susceptible
            } else {
                AgentState::Believer
            }
        }
        AgentState::FactChecker => {
            if u < params.p_forget {
                AgentState::Susceptible
            } else {
                AgentState::FactChecker
            }
        }
    }
}

/// Synchronous update into a caller-owned buffer. Consumes exactly one
/// uniform draw per node, in node-index order.
pub(crate) fn step_into<R: Rng + ?Sized>(
    g: &Graph,
    current: &[AgentState],
    next: &mut [AgentState],
    params: &ModelParams,
    rng: &mut R,
) {
    for (i, slot) in next.iter_mut().enumerate() {
        let u: f64 = rng.random();
        let t = match current[i] {
            AgentState::Susceptible => tally(g.neighbors(i), current),
            _ => NeighborTally::default(),
        };
        *slot = transition(current[i], t, params, u);
    }
}

/// Outcome of a draw `u` given thresholds `[t1, t2]`: index
/// `(u >= t1) + (u >= t2)` into the row for the current state.
const TARGETS: [[AgentState; 3]; 3] = {
    use AgentState::{Believer as B, FactChecker as F, Susceptible as S};
    [[B, F, S], [F, S, B], [S, F, F]]
};

#[inline]
fn susceptible_thresholds(params: &ModelParams, t: NeighborTally) -> [f64; 2] {
    let f = belief_prob(params, t);
    [f, f + factcheck_prob(params, t)]
}

#[inline]
fn to_tally(counts: &[u32; 3]) -> NeighborTally {
    NeighborTally::new(
        counts[AgentState::Believer.index()],
        counts[AgentState::FactChecker.index()],
    )
}

/// Configuration plus per-node neighbor counts by state, updated in place as
/// nodes change. Draw order and outcomes match [`step`] exactly.
pub(crate) struct TalliedStates {
    states: Vec<AgentState>,
    counts: Vec<[u32; 3]>,
    fixed: [[f64; 2]; 3],
    changes: Vec<(u32, AgentState)>,
}

impl TalliedStates {
    pub(crate) fn new(g: &Graph, params: &ModelParams, states: StateVector) -> Self {
        let states = states.into_inner();
        let counts = (0..states.len())
            .map(|i| {
                let mut c = [0; 3];
                for &j in g.neighbors(i) {
                    c[states[j as usize].index()] += 1;
                }
                c
            })
            .collect();
        let verify = params.p_verify;
        TalliedStates {
            states,
            counts,
            fixed: [
                [0.0, 0.0],
                [verify, verify + params.p_forget],
                [params.p_forget, params.p_forget],
            ],
            changes: Vec::new(),
        }
    }

    pub(crate) fn states(&self) -> &[AgentState] {
        &self.states
    }

    pub(crate) fn advance<R: Rng + ?Sized>(
        &mut self,
        g: &Graph,
        params: &ModelParams,
        rng: &mut R,
    ) {
        self.changes.clear();
        for (i, (&s, c)) in self.states.iter().zip(&self.counts).enumerate() {
            let u: f64 = rng.random();
            let [t1, t2] = match s {
                AgentState::Susceptible => susceptible_thresholds(params, to_tally(c)),
                _ => self.fixed[s.index()],
            };
            let next = TARGETS[s.index()][usize::from(u >= t1) + usize::from(u >= t2)];
            if next != s {
                self.changes.push((i as u32, next));
            }
        }
        for &(i, next) in &self.changes {
            let prev = std::mem::replace(&mut self.states[i as usize], next);
            for &j in g.neighbors(i as usize) {
                let c = &mut self.counts[j as usize];
                c[prev.index()] -= 1;
                c[next.index()] += 1;
            }
        }
    }
}

/// One synchronous step: every node reads the input configuration and
/// transitions independently. The input is left untouched.
pub fn step<R: Rng + ?Sized>(
    g: &Graph,
    states: &StateVector,
    params: &ModelParams,
    rng: &mut R,
) -> Result<StateVector> {
    states.check_matches(g)?;
    let mut next = vec![AgentState::Susceptible; states.len()];
    step_into(g, &states.0, &mut next, params, rng);
    Ok(StateVector(next))
}
