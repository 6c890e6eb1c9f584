//! Core model types: plot graphs, instances, allocations and utilities.
//!
//! An instance has a set of agents, an undirected graph over plots, a plot
//! value for every (agent, plot) pair and a directed friend bonus for
//! ordered agent pairs. An allocation is a partial injective map from agents
//! to plots. The utility of a matched agent is its value for its own plot
//! plus the bonus for every friend placed on an adjacent plot; an unmatched
//! agent has utility zero.
//!
//! Friend bonuses are directed: the bonus agent `i` derives from being next
//! to `j` is independent of the bonus `j` derives from `i`. Undirected
//! friendship data must therefore be expanded to two ordered entries by the
//! caller. Absent ordered pairs carry bonus zero and are not stored.

use crate::value::ExtendedValue;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// Index of an agent in the instance's agent list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Agent(pub usize);

/// Index of a plot in the instance's plot list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Plot(pub usize);

impl fmt::Display for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent#{}", self.0)
    }
}

impl fmt::Display for Plot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "plot#{}", self.0)
    }
}

/// Structural problems detected while building a graph or instance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate plot label `{0}`")]
    DuplicatePlotLabel(String),
    #[error("duplicate agent label `{0}`")]
    DuplicateAgentLabel(String),
    #[error("edge endpoint {0} out of range (have {1} plots)")]
    EdgeOutOfRange(usize, usize),
    #[error("self-loop on {0}")]
    SelfLoop(Plot),
    #[error("plot value matrix must have one row per agent ({expected} rows, got {got})")]
    ValueRows { expected: usize, got: usize },
    #[error("plot value row for agent {agent} must have one entry per plot ({expected}, got {got})")]
    ValueColumns { agent: usize, expected: usize, got: usize },
    #[error("friend bonus references agent {0} out of range (have {1} agents)")]
    BonusAgentOutOfRange(usize, usize),
    #[error("friend bonus from agent {0} to itself")]
    BonusSelfPair(usize),
}

/// Problems detected while evaluating an allocation against an instance.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unknown agent {0} (instance has {1} agents)")]
    UnknownAgent(usize, usize),
    #[error("allocation covers {got} agents but the instance has {expected}")]
    AgentCountMismatch { expected: usize, got: usize },
    #[error("allocation assigns unknown {0} (instance has {1} plots)")]
    UnknownPlot(Plot, usize),
    #[error("allocation assigns {0} to more than one agent")]
    PlotReused(Plot),
    #[error("agent {0} assigned more than once")]
    AgentReassigned(usize),
}

/// Undirected graph over plots. Edges are unordered pairs without loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlotGraph {
    labels: Vec<String>,
    edges: BTreeSet<(Plot, Plot)>,
}

impl PlotGraph {
    /// Builds a graph from plot labels and index pairs. Edge pairs are
    /// normalized; duplicates collapse.
    pub fn new(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for label in &labels {
            if !seen.insert(label.clone()) {
                return Err(ModelError::DuplicatePlotLabel(label.clone()));
            }
        }
        let m = labels.len();
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= m {
                return Err(ModelError::EdgeOutOfRange(a, m));
            }
            if b >= m {
                return Err(ModelError::EdgeOutOfRange(b, m));
            }
            if a == b {
                return Err(ModelError::SelfLoop(Plot(a)));
            }
            set.insert((Plot(a.min(b)), Plot(a.max(b))));
        }
        Ok(PlotGraph { labels, edges: set })
    }

    pub fn plot_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, p: Plot) -> &str {
        &self.labels[p.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn plot_by_label(&self, label: &str) -> Option<Plot> {
        self.labels.iter().position(|l| l == label).map(Plot)
    }

    pub fn is_adjacent(&self, a: Plot, b: Plot) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.contains(&key)
    }

    pub fn edges(&self) -> impl Iterator<Item = (Plot, Plot)> + '_ {
        self.edges.iter().copied()
    }
}

/// A complete problem instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    agent_labels: Vec<String>,
    graph: PlotGraph,
    /// Dense n-by-m matrix: `plot_values[agent][plot]`.
    plot_values: Vec<Vec<ExtendedValue>>,
    /// Directed bonuses keyed by (from, to); zero entries are not stored.
    friend_bonuses: BTreeMap<(Agent, Agent), ExtendedValue>,
}

impl Instance {
    pub fn new(
        agent_labels: Vec<String>,
        graph: PlotGraph,
        plot_values: Vec<Vec<ExtendedValue>>,
        friend_bonuses: impl IntoIterator<Item = ((usize, usize), ExtendedValue)>,
    ) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for label in &agent_labels {
            if !seen.insert(label.clone()) {
                return Err(ModelError::DuplicateAgentLabel(label.clone()));
            }
        }
        let n = agent_labels.len();
        let m = graph.plot_count();
        if plot_values.len() != n {
            return Err(ModelError::ValueRows { expected: n, got: plot_values.len() });
        }
        for (agent, row) in plot_values.iter().enumerate() {
            if row.len() != m {
                return Err(ModelError::ValueColumns { agent, expected: m, got: row.len() });
            }
        }
        let mut bonuses = BTreeMap::new();
        for ((from, to), value) in friend_bonuses {
            if from >= n {
                return Err(ModelError::BonusAgentOutOfRange(from, n));
            }
            if to >= n {
                return Err(ModelError::BonusAgentOutOfRange(to, n));
            }
            if from == to {
                return Err(ModelError::BonusSelfPair(from));
            }
            if !value.is_zero() {
                bonuses.insert((Agent(from), Agent(to)), value);
            }
        }
        Ok(Instance { agent_labels, graph, plot_values, friend_bonuses: bonuses })
    }

    pub fn agent_count(&self) -> usize {
        self.agent_labels.len()
    }

    pub fn plot_count(&self) -> usize {
        self.graph.plot_count()
    }

    pub fn graph(&self) -> &PlotGraph {
        &self.graph
    }

    pub fn agents(&self) -> impl Iterator<Item = Agent> {
        (0..self.agent_count()).map(Agent)
    }

    pub fn agent_label(&self, a: Agent) -> &str {
        &self.agent_labels[a.0]
    }

    pub fn agent_labels(&self) -> &[String] {
        &self.agent_labels
    }

    pub fn agent_by_label(&self, label: &str) -> Option<Agent> {
        self.agent_labels.iter().position(|l| l == label).map(Agent)
    }

    pub fn plot_value(&self, a: Agent, p: Plot) -> &ExtendedValue {
        &self.plot_values[a.0][p.0]
    }

    /// Directed bonus from `from` to `to`; absent pairs read as zero.
    pub fn friend_bonus(&self, from: Agent, to: Agent) -> ExtendedValue {
        self.friend_bonuses
            .get(&(from, to))
            .cloned()
            .unwrap_or_else(ExtendedValue::zero)
    }

    /// All stored (nonzero or unacceptable) bonuses leaving `from`.
    pub fn outgoing_bonuses(&self, from: Agent) -> impl Iterator<Item = (Agent, &ExtendedValue)> {
        self.friend_bonuses
            .range((from, Agent(0))..=(from, Agent(usize::MAX)))
            .map(|(&(_, to), v)| (to, v))
    }

    /// All stored bonus entries in key order.
    pub fn friend_bonuses(&self) -> impl Iterator<Item = ((Agent, Agent), &ExtendedValue)> {
        self.friend_bonuses.iter().map(|(&k, v)| (k, v))
    }

    /// Returns a copy with one plot value replaced.
    pub fn with_plot_value(&self, a: Agent, p: Plot, value: ExtendedValue) -> Instance {
        let mut out = self.clone();
        out.plot_values[a.0][p.0] = value;
        out
    }

    /// Renders an allocation with this instance's labels, e.g. `{1=v1, 2=v2}`.
    pub fn format_allocation(&self, alloc: &Allocation) -> String {
        let mut parts = Vec::new();
        for (agent, plot) in alloc.iter_assigned() {
            let agent_label = self
                .agent_labels
                .get(agent.0)
                .map(String::as_str)
                .unwrap_or("?");
            let plot_label = if plot.0 < self.graph.plot_count() {
                self.graph.label(plot)
            } else {
                "?"
            };
            parts.push(format!("{agent_label}={plot_label}"));
        }
        if parts.is_empty() {
            "{}".to_string()
        } else {
            format!("{{{}}}", parts.join(", "))
        }
    }
}

/// A partial injective assignment of agents to plots.
///
/// The slot vector always has one entry per agent of the instance the
/// allocation belongs to; `None` means unmatched.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    slots: Vec<Option<Plot>>,
}

impl Allocation {
    /// The empty allocation: every agent unmatched.
    pub fn empty(agent_count: usize) -> Self {
        Allocation { slots: vec![None; agent_count] }
    }

    /// Builds an allocation from (agent index, plot index) pairs.
    pub fn from_pairs(
        agent_count: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self, EvalError> {
        let mut slots = vec![None; agent_count];
        let mut used = BTreeSet::new();
        for &(agent, plot) in pairs {
            if agent >= agent_count {
                return Err(EvalError::UnknownAgent(agent, agent_count));
            }
            if slots[agent].is_some() {
                return Err(EvalError::AgentReassigned(agent));
            }
            if !used.insert(plot) {
                return Err(EvalError::PlotReused(Plot(plot)));
            }
            slots[agent] = Some(Plot(plot));
        }
        Ok(Allocation { slots })
    }

    pub(crate) fn from_slots(slots: Vec<Option<Plot>>) -> Self {
        Allocation { slots }
    }

    pub fn agent_count(&self) -> usize {
        self.slots.len()
    }

    pub fn plot_of(&self, a: Agent) -> Option<Plot> {
        self.slots.get(a.0).copied().flatten()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn assigned_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn iter_assigned(&self) -> impl Iterator<Item = (Agent, Plot)> + '_ {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|p| (Agent(i), p)))
    }
}

/// Checks that an allocation is structurally valid for an instance: one slot
/// per agent, all plots in range, no plot assigned twice.
pub fn validate_allocation(inst: &Instance, alloc: &Allocation) -> Result<(), EvalError> {
    if alloc.slots.len() != inst.agent_count() {
        return Err(EvalError::AgentCountMismatch {
            expected: inst.agent_count(),
            got: alloc.slots.len(),
        });
    }
    let mut used = vec![false; inst.plot_count()];
    for slot in &alloc.slots {
        if let Some(p) = slot {
            if p.0 >= inst.plot_count() {
                return Err(EvalError::UnknownPlot(*p, inst.plot_count()));
            }
            if used[p.0] {
                return Err(EvalError::PlotReused(*p));
            }
            used[p.0] = true;
        }
    }
    Ok(())
}

/// Total feasibility predicate over arbitrary allocation values.
pub fn is_feasible(inst: &Instance, alloc: &Allocation) -> bool {
    validate_allocation(inst, alloc).is_ok()
}

/// Utility of one agent under an allocation: own plot value plus the bonus
/// for every friend on an adjacent plot. Unmatched agents get exactly zero.
pub fn utility(inst: &Instance, alloc: &Allocation, agent: Agent) -> Result<ExtendedValue, EvalError> {
    if agent.0 >= inst.agent_count() {
        return Err(EvalError::UnknownAgent(agent.0, inst.agent_count()));
    }
    validate_allocation(inst, alloc)?;
    Ok(utility_unchecked(inst, alloc, agent))
}

/// Utility without feasibility validation; callers must have validated the
/// allocation once. Used by the exhaustive scans in `space`.
pub(crate) fn utility_unchecked(inst: &Instance, alloc: &Allocation, agent: Agent) -> ExtendedValue {
    let Some(own) = alloc.plot_of(agent) else {
        return ExtendedValue::zero();
    };
    let mut total = inst.plot_value(agent, own).clone();
    if total.is_unacceptable() {
        return total;
    }
    for (friend, bonus) in inst.outgoing_bonuses(agent) {
        if let Some(theirs) = alloc.plot_of(friend) {
            if inst.graph().is_adjacent(own, theirs) {
                total = total.add(bonus);
                if total.is_unacceptable() {
                    return total;
                }
            }
        }
    }
    total
}
