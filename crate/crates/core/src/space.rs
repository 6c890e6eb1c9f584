//! Exhaustive operations over the allocation space of an instance.
//!
//! Everything here scans the full space of partial injective assignments,
//! which has size `sum over k of C(n,k) * m!/(m-k)!`. The crate targets
//! desk-scale instances (n, m up to about 6, roughly 13k allocations), so
//! definitional scans are preferred over cleverness; the one optimization,
//! the individually-rational skyline in [`po_ir_set`], is cross-checked
//! against the naive definition by property tests.
//!
//! The enumeration order is part of the contract: agents are decided in
//! index order, each agent tries "unmatched" first and then free plots in
//! index order. Every "first" tie-break in this crate (welfare maximizer,
//! dictatorship winner, improvement step, solver value order) refers to this
//! order, which makes all searches reproducible.

use crate::model::{
    is_feasible, utility, utility_unchecked, validate_allocation, Agent, Allocation, EvalError,
    Instance, Plot,
};
use crate::value::ExtendedValue;

/// Iterator over every partial injective assignment of an instance, in the
/// documented lexicographic order. The first element is always the empty
/// allocation.
pub fn allocations(inst: &Instance) -> Allocations {
    Allocations {
        n: inst.agent_count(),
        m: inst.plot_count(),
        choice: Vec::new(),
        taken: Vec::new(),
        started: false,
        done: false,
    }
}

pub struct Allocations {
    n: usize,
    m: usize,
    /// Per-agent choice: 0 is unmatched, p+1 is plot p.
    choice: Vec<usize>,
    taken: Vec<bool>,
    started: bool,
    done: bool,
}

impl Allocations {
    fn emit(&self) -> Allocation {
        Allocation::from_slots(
            self.choice
                .iter()
                .map(|&c| if c == 0 { None } else { Some(Plot(c - 1)) })
                .collect(),
        )
    }

    /// Moves to the lexicographic successor; false when exhausted.
    fn advance(&mut self) -> bool {
        let mut i = self.n;
        while i > 0 {
            i -= 1;
            let cur = self.choice[i];
            if cur > 0 {
                self.taken[cur - 1] = false;
            }
            let mut next = cur + 1;
            while next <= self.m && self.taken[next - 1] {
                next += 1;
            }
            if next <= self.m {
                self.choice[i] = next;
                self.taken[next - 1] = true;
                return true;
            }
            // Agent i has no further plot; reset to unmatched and carry.
            self.choice[i] = 0;
        }
        false
    }
}

impl Iterator for Allocations {
    type Item = Allocation;

    fn next(&mut self) -> Option<Allocation> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            self.choice = vec![0; self.n];
            self.taken = vec![false; self.m];
            return Some(self.emit());
        }
        if self.advance() {
            Some(self.emit())
        } else {
            self.done = true;
            None
        }
    }
}

/// One utility per agent, in agent index order.
pub type UtilityProfile = Vec<ExtendedValue>;

/// Utilities of all agents under an allocation.
pub fn utility_profile(inst: &Instance, alloc: &Allocation) -> Result<UtilityProfile, EvalError> {
    validate_allocation(inst, alloc)?;
    Ok(inst
        .agents()
        .map(|a| utility_unchecked(inst, alloc, a))
        .collect())
}

/// Every allocation together with its utility profile, in enumeration order.
pub fn evaluated_allocations(inst: &Instance) -> Vec<(Allocation, UtilityProfile)> {
    allocations(inst)
        .map(|alloc| {
            let profile = inst
                .agents()
                .map(|a| utility_unchecked(inst, &alloc, a))
                .collect();
            (alloc, profile)
        })
        .collect()
}

/// Pointwise Pareto dominance on profiles: every agent weakly better, at
/// least one strictly. Irreflexive by construction.
pub fn profile_dominates(a: &[ExtendedValue], b: &[ExtendedValue]) -> bool {
    assert_eq!(a.len(), b.len(), "profiles must come from the same instance");
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            std::cmp::Ordering::Less => return false,
            std::cmp::Ordering::Greater => strict = true,
            std::cmp::Ordering::Equal => {}
        }
    }
    strict
}

/// Does allocation `a` Pareto-dominate allocation `b` on this instance?
pub fn pareto_dominates(
    inst: &Instance,
    a: &Allocation,
    b: &Allocation,
) -> Result<bool, EvalError> {
    let pa = utility_profile(inst, a)?;
    let pb = utility_profile(inst, b)?;
    Ok(profile_dominates(&pa, &pb))
}

/// Every agent gets at least its outside option of zero. An unacceptable
/// utility is below zero, so any allocation touching an unacceptable plot or
/// neighbor fails this.
pub fn is_individually_rational(inst: &Instance, alloc: &Allocation) -> Result<bool, EvalError> {
    let profile = utility_profile(inst, alloc)?;
    Ok(profile.iter().all(ExtendedValue::is_nonnegative))
}

/// Definitional Pareto optimality: no allocation in the full space dominates
/// this one. Deliberately a naive scan; it is the oracle the optimized set
/// computations are checked against.
pub fn is_pareto_optimal(inst: &Instance, alloc: &Allocation) -> Result<bool, EvalError> {
    let profile = utility_profile(inst, alloc)?;
    for other in allocations(inst) {
        let other_profile: UtilityProfile = inst
            .agents()
            .map(|a| utility_unchecked(inst, &other, a))
            .collect();
        if profile_dominates(&other_profile, &profile) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Sum of all utilities; any unacceptable entry makes the welfare
/// unacceptable.
pub fn welfare(inst: &Instance, alloc: &Allocation) -> Result<ExtendedValue, EvalError> {
    let profile = utility_profile(inst, alloc)?;
    Ok(ExtendedValue::sum(profile.iter()))
}

/// The enumeration-first allocation attaining the maximum finite welfare.
///
/// Total: the empty allocation always has finite welfare zero, so a maximum
/// exists even when every complete assignment hits an unacceptable entry.
pub fn max_welfare(inst: &Instance) -> Allocation {
    let mut best: Option<(Allocation, ExtendedValue)> = None;
    for alloc in allocations(inst) {
        let w = ExtendedValue::sum(
            inst.agents()
                .map(|a| utility_unchecked(inst, &alloc, a))
                .collect::<Vec<_>>()
                .iter(),
        );
        if w.is_unacceptable() {
            continue;
        }
        match &best {
            Some((_, best_w)) if w <= *best_w => {}
            _ => best = Some((alloc, w)),
        }
    }
    best.expect("the empty allocation always provides finite welfare").0
}

/// Indices of profiles not dominated by any other profile in `candidates`.
///
/// Caller must guarantee a closure property: every potential dominator of a
/// candidate is itself a candidate. This holds for the full space, and for
/// the individually rational subset (a dominator of an IR profile is
/// pointwise at least as large, hence IR).
fn skyline(profiles: &[&UtilityProfile], candidates: &[usize]) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for &c in candidates {
        if kept.iter().any(|&k| profile_dominates(profiles[k], profiles[c])) {
            continue;
        }
        kept.retain(|&k| !profile_dominates(profiles[c], profiles[k]));
        kept.push(c);
    }
    kept
}

/// All Pareto-optimal allocations, in enumeration order.
pub fn pareto_optimal_set(inst: &Instance) -> Vec<Allocation> {
    let evaluated = evaluated_allocations(inst);
    let profiles: Vec<&UtilityProfile> = evaluated.iter().map(|(_, p)| p).collect();
    let all: Vec<usize> = (0..evaluated.len()).collect();
    let kept = skyline(&profiles, &all);
    kept.into_iter().map(|i| evaluated[i].0.clone()).collect()
}

/// All allocations that are both individually rational and Pareto-optimal,
/// in enumeration order.
pub fn po_ir_set(inst: &Instance) -> Vec<Allocation> {
    let evaluated = evaluated_allocations(inst);
    let profiles: Vec<&UtilityProfile> = evaluated.iter().map(|(_, p)| p).collect();
    let ir: Vec<usize> = (0..evaluated.len())
        .filter(|&i| profiles[i].iter().all(ExtendedValue::is_nonnegative))
        .collect();
    let kept = skyline(&profiles, &ir);
    kept.into_iter().map(|i| evaluated[i].0.clone()).collect()
}

/// Closed-form size of the allocation space; the enumeration invariant
/// says `allocations(inst).count()` equals this.
pub fn allocation_space_size(agent_count: usize, plot_count: usize) -> u128 {
    let n = agent_count as u128;
    let m = plot_count as u128;
    let mut total = 0u128;
    for k in 0..=n.min(m) {
        let mut choose = 1u128;
        for i in 0..k {
            choose = choose * (n - i) / (i + 1);
        }
        let mut arrange = 1u128;
        for i in 0..k {
            arrange *= m - i;
        }
        total += choose * arrange;
    }
    total
}

/// True when the allocation is feasible, individually rational and
/// Pareto-optimal; convenience used by audits.
pub fn is_po_ir(inst: &Instance, alloc: &Allocation) -> Result<bool, EvalError> {
    Ok(is_feasible(inst, alloc)
        && is_individually_rational(inst, alloc)?
        && is_pareto_optimal(inst, alloc)?)
}

/// Re-exported here so audits can evaluate single agents without importing
/// the model module separately.
pub fn agent_utility(
    inst: &Instance,
    alloc: &Allocation,
    agent: Agent,
) -> Result<ExtendedValue, EvalError> {
    utility(inst, alloc, agent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PlotGraph;
    use crate::value::ExtendedValue as V;

    fn blank_instance(n: usize, m: usize) -> Instance {
        let labels = (0..m).map(|i| format!("v{}", i + 1)).collect();
        let graph = PlotGraph::new(labels, &[]).unwrap();
        Instance::new(
            (0..n).map(|i| format!("{}", i + 1)).collect(),
            graph,
            vec![vec![V::zero(); m]; n],
            [],
        )
        .unwrap()
    }

    fn five_agent_instance() -> Instance {
        crate::model::tests::five_agent_instance()
    }

    fn alloc(n: usize, pairs: &[(usize, usize)]) -> Allocation {
        Allocation::from_pairs(n, pairs).unwrap()
    }

    #[test]
    fn enumeration_count_matches_closed_form() {
        // Independent oracle: binomial times falling factorial, computed
        // with a different library than the production closed form.
        fn oracle(n: u64, m: u64) -> u128 {
            (0..=n.min(m))
                .map(|k| {
                    let choose = num_integer::binomial(n as u128, k as u128);
                    let arrange: u128 = (0..k as u128).map(|i| m as u128 - i).product();
                    choose * arrange
                })
                .sum()
        }
        for n in 0..=5usize {
            for m in 0..=5usize {
                let inst = blank_instance(n, m);
                let counted = allocations(&inst).count() as u128;
                assert_eq!(counted, oracle(n as u64, m as u64), "n={n} m={m}");
                assert_eq!(counted, allocation_space_size(n, m), "closed form n={n} m={m}");
            }
        }
        assert_eq!(allocation_space_size(5, 5), 1546);
        assert_eq!(allocation_space_size(6, 6), 13327);
    }

    #[test]
    fn enumeration_order_is_lexicographic_with_unmatched_first() {
        let inst = blank_instance(2, 1);
        let got: Vec<Allocation> = allocations(&inst).collect();
        assert_eq!(
            got,
            vec![
                Allocation::empty(2),
                alloc(2, &[(1, 0)]),
                alloc(2, &[(0, 0)]),
            ]
        );

        let inst = blank_instance(2, 2);
        let got: Vec<Allocation> = allocations(&inst).collect();
        assert_eq!(
            got,
            vec![
                Allocation::empty(2),
                alloc(2, &[(1, 0)]),
                alloc(2, &[(1, 1)]),
                alloc(2, &[(0, 0)]),
                alloc(2, &[(0, 0), (1, 1)]),
                alloc(2, &[(0, 1)]),
                alloc(2, &[(0, 1), (1, 0)]),
            ]
        );
    }

    #[test]
    fn enumeration_yields_distinct_feasible_allocations() {
        let inst = blank_instance(3, 3);
        let all: Vec<Allocation> = allocations(&inst).collect();
        for a in &all {
            assert!(is_feasible(&inst, a));
        }
        let unique: std::collections::BTreeSet<Vec<Option<usize>>> = all
            .iter()
            .map(|a| (0..3).map(|i| a.plot_of(Agent(i)).map(|p| p.0)).collect())
            .collect();
        assert_eq!(unique.len(), all.len());
    }

    #[test]
    fn dominance_example_from_the_improvement_argument() {
        // Moving agent 1 from v1 to v2 while agent 2 takes v1 lifts agent 1
        // from 3/10 to 11/10 and agent 2 from 0 to 1/2; nobody drops.
        let inst = five_agent_instance();
        let better = alloc(5, &[(0, 1), (1, 0), (2, 2), (3, 3), (4, 4)]);
        let worse = alloc(5, &[(0, 0), (3, 1), (2, 2), (4, 3)]);
        assert!(pareto_dominates(&inst, &better, &worse).unwrap());
        assert!(!pareto_dominates(&inst, &worse, &better).unwrap());
    }

    #[test]
    fn rotated_assignments_are_incomparable() {
        let inst = five_agent_instance();
        let a = alloc(5, &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
        let b = alloc(5, &[(1, 0), (2, 1), (0, 2), (3, 3), (4, 4)]);
        // Profiles (13/10, 3/10, 1, ...) and (1, 13/10, 3/10, ...) each give
        // some agent strictly more, so neither dominates.
        assert!(!pareto_dominates(&inst, &a, &b).unwrap());
        assert!(!pareto_dominates(&inst, &b, &a).unwrap());
        assert!(!pareto_dominates(&inst, &a, &a).unwrap());
    }

    #[test]
    fn po_ir_set_of_the_five_agent_instance() {
        // Exactly: two of agents 1-3 on the edge {v1, v2}, the third on v3,
        // agents 4 and 5 on v4/v5 in either order. 6 ordered pair choices
        // times 2 orders = 12.
        let inst = five_agent_instance();
        let set = po_ir_set(&inst);
        assert_eq!(set.len(), 12);
        for a in &set {
            let on = |i: usize| a.plot_of(Agent(i)).unwrap().0;
            let trio: Vec<usize> = (0..3).map(on) .collect();
            let mut edge_holders: Vec<usize> = trio.iter().filter(|&&p| p <= 1).copied().collect();
            edge_holders.sort();
            assert_eq!(edge_holders, vec![0, 1], "{}", inst.format_allocation(a));
            assert_eq!(trio.iter().filter(|&&p| p == 2).count(), 1);
            let mut tail: Vec<usize> = (3..5).map(on).collect();
            tail.sort();
            assert_eq!(tail, vec![3, 4]);
            assert_eq!(welfare(&inst, a).unwrap(), V::from_ratio(14, 5));
        }
        // Enumeration order puts the aligned allocation first.
        assert_eq!(set[0], alloc(5, &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]));
    }

    #[test]
    fn po_ir_set_matches_naive_definition_on_the_five_agent_instance() {
        let inst = five_agent_instance();
        let expected: Vec<Allocation> = allocations(&inst)
            .filter(|a| {
                is_individually_rational(&inst, a).unwrap()
                    && is_pareto_optimal(&inst, a).unwrap()
            })
            .collect();
        assert_eq!(po_ir_set(&inst), expected);
    }

    #[test]
    fn indifferent_instance_makes_every_allocation_optimal() {
        let inst = blank_instance(3, 3);
        let total = allocations(&inst).count();
        assert_eq!(po_ir_set(&inst).len(), total);
        assert_eq!(pareto_optimal_set(&inst).len(), total);
    }

    #[test]
    fn max_welfare_picks_the_aligned_allocation() {
        let inst = five_agent_instance();
        let best = max_welfare(&inst);
        assert_eq!(best, alloc(5, &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]));
        assert_eq!(welfare(&inst, &best).unwrap(), V::from_ratio(14, 5));
    }

    #[test]
    fn welfare_is_unacceptable_when_any_agent_is() {
        let inst = five_agent_instance().with_plot_value(Agent(1), Plot(1), V::Unacceptable);
        let a = alloc(5, &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]);
        assert_eq!(welfare(&inst, &a).unwrap(), V::Unacceptable);
        // The maximum finite welfare is still attained (without agent 2 on v2).
        let best = max_welfare(&inst);
        assert_eq!(welfare(&inst, &best).unwrap(), V::from_ratio(14, 5));
    }

    #[test]
    fn empty_edge_set_reduces_utility_to_plot_values() {
        let labels = vec!["v1".into(), "v2".into()];
        let graph = PlotGraph::new(labels, &[]).unwrap();
        let inst = Instance::new(
            vec!["x".into(), "y".into()],
            graph,
            vec![
                vec![V::from_int(2), V::from_int(1)],
                vec![V::from_int(1), V::from_int(2)],
            ],
            [((0, 1), V::from_int(5)), ((1, 0), V::from_int(5))],
        )
        .unwrap();
        let a = alloc(2, &[(0, 0), (1, 1)]);
        let profile = utility_profile(&inst, &a).unwrap();
        assert_eq!(profile, vec![V::from_int(2), V::from_int(2)]);
    }
}
