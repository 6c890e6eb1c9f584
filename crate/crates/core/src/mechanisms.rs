//! Reference mechanisms over single instances.
//!
//! Each mechanism maps an instance to one feasible allocation,
//! deterministically. They exist to witness that the properties checked by
//! [`crate::verify`] are compatible in pairs: the null mechanism is
//! individually rational and strategyproof, serial dictatorship is
//! Pareto-optimal and strategyproof, and iterated Pareto improvement from an
//! individually rational start is individually rational and Pareto-optimal.

use crate::model::{validate_allocation, Allocation, EvalError, Instance};
use crate::space::{evaluated_allocations, profile_dominates, UtilityProfile};
use crate::value::ExtendedValue;

/// A mechanism together with its parameters, as selectable from the
/// command line and the strategyproofness checker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MechanismSpec {
    /// Leaves every agent unmatched. Constant, hence strategyproof.
    Null,
    /// Serial dictatorship: dictators in `order` successively restrict the
    /// candidate set to the allocations maximizing their own utility.
    SerialDictatorship { order: Vec<usize> },
    /// Repeated enumeration-first Pareto improvement from `start`.
    IrParetoImprove { start: Allocation },
    /// Enumeration-first maximizer of finite total welfare.
    MaxWelfare,
}

impl MechanismSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::Null => "null",
            MechanismSpec::SerialDictatorship { .. } => "serial-dictatorship",
            MechanismSpec::IrParetoImprove { .. } => "ir-pareto-improve",
            MechanismSpec::MaxWelfare => "max-welfare",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MechanismError {
    #[error("dictator order must be a permutation of all {expected} agents, got {got:?}")]
    OrderNotPermutation { expected: usize, got: Vec<usize> },
    #[error("start allocation is not feasible: {0}")]
    StartInfeasible(EvalError),
    #[error("start allocation is not individually rational")]
    StartNotIndividuallyRational,
}

/// Runs a mechanism on an instance.
pub fn run_mechanism(spec: &MechanismSpec, inst: &Instance) -> Result<Allocation, MechanismError> {
    match spec {
        MechanismSpec::Null => Ok(null_mechanism(inst)),
        MechanismSpec::SerialDictatorship { order } => serial_dictatorship(inst, order),
        MechanismSpec::IrParetoImprove { start } => ir_pareto_improve(inst, start),
        MechanismSpec::MaxWelfare => Ok(crate::space::max_welfare(inst)),
    }
}

/// The empty allocation. Ignores reports entirely, so no misreport can ever
/// change the outcome; individually rational because unmatched utility is
/// zero.
pub fn null_mechanism(inst: &Instance) -> Allocation {
    Allocation::empty(inst.agent_count())
}

/// Serial dictatorship by candidate-set refinement.
///
/// Starting from all feasible allocations, each dictator in `order` keeps
/// exactly the allocations that maximize its own utility; the result is the
/// enumeration-first member of the final set. Because every refinement
/// keeps a nonempty set and the last agent's maximizers cannot be dominated
/// within the surviving set, the output is always Pareto-optimal: a
/// dominating allocation would weakly improve every dictator and so survive
/// every refinement, then strictly improve some dictator, contradicting that
/// dictator's maximization step.
pub fn serial_dictatorship(inst: &Instance, order: &[usize]) -> Result<Allocation, MechanismError> {
    let n = inst.agent_count();
    let mut seen = vec![false; n];
    let valid = order.len() == n
        && order.iter().all(|&a| {
            if a >= n || seen[a] {
                false
            } else {
                seen[a] = true;
                true
            }
        });
    if !valid {
        return Err(MechanismError::OrderNotPermutation {
            expected: n,
            got: order.to_vec(),
        });
    }

    let evaluated = evaluated_allocations(inst);
    let mut candidates: Vec<usize> = (0..evaluated.len()).collect();
    for &dictator in order {
        let best = candidates
            .iter()
            .map(|&i| &evaluated[i].1[dictator])
            .max()
            .expect("candidate set never empties")
            .clone();
        candidates.retain(|&i| evaluated[i].1[dictator] == best);
    }
    Ok(evaluated[candidates[0]].0.clone())
}

/// Runs [`ir_pareto_improve`] but returns every allocation visited, starting
/// with `start` and ending with the fixed point.
pub fn ir_pareto_improve_trace(
    inst: &Instance,
    start: &Allocation,
) -> Result<Vec<Allocation>, MechanismError> {
    validate_allocation(inst, start).map_err(MechanismError::StartInfeasible)?;
    let evaluated = evaluated_allocations(inst);
    let start_profile: UtilityProfile = inst
        .agents()
        .map(|a| crate::model::utility(inst, start, a).expect("validated above"))
        .collect();
    if !start_profile.iter().all(ExtendedValue::is_nonnegative) {
        return Err(MechanismError::StartNotIndividuallyRational);
    }

    let mut trace = vec![start.clone()];
    let mut current = start_profile;
    loop {
        // Enumeration-first strict improvement over the current profile.
        let step = evaluated
            .iter()
            .find(|(_, profile)| profile_dominates(profile, &current));
        match step {
            Some((alloc, profile)) => {
                trace.push(alloc.clone());
                current = profile.clone();
            }
            // No dominating allocation exists: current is Pareto-optimal.
            None => return Ok(trace),
        }
    }
}

/// Iterated Pareto improvement: from an individually rational start, repeat
/// "move to the enumeration-first dominating allocation" until none exists.
///
/// Utilities never decrease along the chain, so individual rationality is
/// preserved; profiles strictly increase in the dominance order, so the
/// chain cannot revisit an allocation and terminates. The fixed point is
/// Pareto-optimal by the stopping condition.
pub fn ir_pareto_improve(inst: &Instance, start: &Allocation) -> Result<Allocation, MechanismError> {
    let trace = ir_pareto_improve_trace(inst, start)?;
    Ok(trace.last().expect("trace contains at least the start").clone())
}
