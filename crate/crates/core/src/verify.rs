//! Family-level verification: strategyproofness checking and exhaustive
//! search for property-satisfying mechanism tables.
//!
//! A [`Family`] is a finite set of instances plus directed deviation edges.
//! An edge `(truth, report, deviator)` states that when `truth` is the real
//! instance, the deviator could unilaterally misreport so that `report` is
//! the instance the mechanism sees. A mechanism restricted to the family is
//! a [`MechanismTable`]: one allocation per instance.
//!
//! [`impossibility_solve`] searches for a table whose entries all lie in the
//! per-instance candidate domains (by default the Pareto-optimal and
//! individually rational set) and that has no profitable deviation along any
//! edge. A SAT verdict carries the lexicographically first such table; an
//! UNSAT verdict means exhaustive search refuted every table, which is the
//! mechanical form of an incompatibility proof over that family.
//!
//! The search itself is backtracking with forward checking over the
//! documented variable order (family order) and value order (enumeration
//! order), preceded by an arc-consistency pass. The pass only removes
//! values that appear in no satisfying table, so it changes neither the
//! verdict nor the returned table; without it, chronological backtracking
//! thrashes on large families whose conflicts sit far apart in the variable
//! order. All steps and the reported statistics are deterministic.

use crate::mechanisms::{run_mechanism, MechanismError, MechanismSpec};
use crate::model::{utility, Agent, Allocation, EvalError, Instance};
use crate::space::{
    allocations, evaluated_allocations, pareto_optimal_set, po_ir_set, UtilityProfile,
};
use crate::value::ExtendedValue;
use std::collections::{BTreeMap, VecDeque};
use std::fmt;

/// Identifier of an instance within a family.
pub type InstanceId = String;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyInstance {
    pub id: InstanceId,
    pub instance: Instance,
}

/// Directed deviation edge: under truth `truth`, agent `deviator` can make
/// the mechanism see `report` instead. Families that want both directions
/// covered must store both orientations explicitly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Deviation {
    pub truth: InstanceId,
    pub report: InstanceId,
    pub deviator: Agent,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Family {
    pub instances: Vec<FamilyInstance>,
    pub deviations: Vec<Deviation>,
}

impl Family {
    pub fn new(instances: Vec<FamilyInstance>, deviations: Vec<Deviation>) -> Family {
        Family { instances, deviations }
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.instances.iter().position(|fi| fi.id == id)
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.index_of(id).map(|i| &self.instances[i].instance)
    }
}

/// One defect found by the family audit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FamilyAuditViolation {
    DuplicateInstanceId(InstanceId),
    UnknownInstance { deviation: usize, id: InstanceId },
    DeviatorOutOfRange { deviation: usize, deviator: Agent },
    AgentsDiffer { truth: InstanceId, report: InstanceId },
    GraphsDiffer { truth: InstanceId, report: InstanceId },
    NonDeviatorValuesDiffer { truth: InstanceId, report: InstanceId, agent: Agent },
    NonDeviatorBonusDiffers { truth: InstanceId, report: InstanceId, from: Agent, to: Agent },
}

impl fmt::Display for FamilyAuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use FamilyAuditViolation::*;
        match self {
            DuplicateInstanceId(id) => write!(f, "duplicate instance id `{id}`"),
            UnknownInstance { deviation, id } => {
                write!(f, "deviation {deviation} references unknown instance `{id}`")
            }
            DeviatorOutOfRange { deviation, deviator } => {
                write!(f, "deviation {deviation} names out-of-range {deviator}")
            }
            AgentsDiffer { truth, report } => {
                write!(f, "instances `{truth}` and `{report}` have different agent lists")
            }
            GraphsDiffer { truth, report } => {
                write!(f, "instances `{truth}` and `{report}` have different plot graphs")
            }
            NonDeviatorValuesDiffer { truth, report, agent } => write!(
                f,
                "instances `{truth}` and `{report}` differ in plot values of non-deviator {agent}"
            ),
            NonDeviatorBonusDiffers { truth, report, from, to } => write!(
                f,
                "instances `{truth}` and `{report}` differ in bonus {from}->{to} not owned by the deviator"
            ),
        }
    }
}

/// Field-by-field check that every deviation edge connects two instances
/// that are identical except in the deviator's own reports (its plot value
/// row and its outgoing friend bonuses).
pub fn family_audit_violations(fam: &Family) -> Vec<FamilyAuditViolation> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for fi in &fam.instances {
        if !seen.insert(fi.id.clone()) {
            out.push(FamilyAuditViolation::DuplicateInstanceId(fi.id.clone()));
        }
    }
    for (k, dev) in fam.deviations.iter().enumerate() {
        let (Some(t), Some(r)) = (fam.index_of(&dev.truth), fam.index_of(&dev.report)) else {
            let missing = if fam.index_of(&dev.truth).is_none() {
                dev.truth.clone()
            } else {
                dev.report.clone()
            };
            out.push(FamilyAuditViolation::UnknownInstance { deviation: k, id: missing });
            continue;
        };
        let truth = &fam.instances[t].instance;
        let report = &fam.instances[r].instance;
        let ids = || (dev.truth.clone(), dev.report.clone());
        if truth.agent_labels() != report.agent_labels() {
            let (truth, report) = ids();
            out.push(FamilyAuditViolation::AgentsDiffer { truth, report });
            continue;
        }
        if dev.deviator.0 >= truth.agent_count() {
            out.push(FamilyAuditViolation::DeviatorOutOfRange {
                deviation: k,
                deviator: dev.deviator,
            });
            continue;
        }
        if truth.graph() != report.graph() {
            let (truth, report) = ids();
            out.push(FamilyAuditViolation::GraphsDiffer { truth, report });
            continue;
        }
        for agent in truth.agents() {
            if agent == dev.deviator {
                continue;
            }
            let differs = (0..truth.plot_count()).any(|p| {
                truth.plot_value(agent, crate::model::Plot(p))
                    != report.plot_value(agent, crate::model::Plot(p))
            });
            if differs {
                let (truth, report) = ids();
                out.push(FamilyAuditViolation::NonDeviatorValuesDiffer { truth, report, agent });
            }
        }
        let truth_bonuses: BTreeMap<_, _> = truth.friend_bonuses().collect();
        let report_bonuses: BTreeMap<_, _> = report.friend_bonuses().collect();
        let keys: std::collections::BTreeSet<_> = truth_bonuses
            .keys()
            .chain(report_bonuses.keys())
            .copied()
            .collect();
        for (from, to) in keys {
            if from == dev.deviator {
                continue;
            }
            if truth_bonuses.get(&(from, to)) != report_bonuses.get(&(from, to)) {
                let (truth, report) = ids();
                out.push(FamilyAuditViolation::NonDeviatorBonusDiffers {
                    truth,
                    report,
                    from,
                    to,
                });
            }
        }
    }
    out
}

/// True iff the family invariants hold; see [`family_audit_violations`].
pub fn deviation_closure_audit(fam: &Family) -> bool {
    family_audit_violations(fam).is_empty()
}

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("family audit failed: {0}")]
    FamilyInvariant(String),
    #[error("mechanism failed on instance `{id}`: {source}")]
    Mechanism { id: InstanceId, source: MechanismError },
    #[error("evaluation failed on instance `{id}`: {source}")]
    Eval { id: InstanceId, source: EvalError },
    #[error("domain list covers {got} instances but the family has {expected}")]
    DomainCountMismatch { expected: usize, got: usize },
}

fn audited(fam: &Family) -> Result<(), VerifyError> {
    let violations = family_audit_violations(fam);
    if violations.is_empty() {
        return Ok(());
    }
    let text = violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ");
    Err(VerifyError::FamilyInvariant(text))
}

/// A profitable deviation found for a concrete mechanism: measured under the
/// truth instance, the outcome after misreporting beats the truthful one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpViolation {
    pub truth: InstanceId,
    pub report: InstanceId,
    pub deviator: Agent,
    pub truthful_utility: ExtendedValue,
    pub deviating_utility: ExtendedValue,
}

/// Runs a mechanism on every instance of an audited family and returns every
/// profitable deviation along the family's edges. Each stored edge is
/// evaluated in its stated direction; families carry both orientations.
pub fn sp_check(spec: &MechanismSpec, fam: &Family) -> Result<Vec<SpViolation>, VerifyError> {
    audited(fam)?;
    let mut outcomes = Vec::with_capacity(fam.instances.len());
    for fi in &fam.instances {
        let out = run_mechanism(spec, &fi.instance).map_err(|source| VerifyError::Mechanism {
            id: fi.id.clone(),
            source,
        })?;
        outcomes.push(out);
    }
    let mut violations = Vec::new();
    for dev in &fam.deviations {
        let t = fam.index_of(&dev.truth).expect("audited");
        let r = fam.index_of(&dev.report).expect("audited");
        let truth_inst = &fam.instances[t].instance;
        let eval = |alloc: &Allocation| {
            utility(truth_inst, alloc, dev.deviator).map_err(|source| VerifyError::Eval {
                id: dev.truth.clone(),
                source,
            })
        };
        let truthful_utility = eval(&outcomes[t])?;
        let deviating_utility = eval(&outcomes[r])?;
        if deviating_utility > truthful_utility {
            violations.push(SpViolation {
                truth: dev.truth.clone(),
                report: dev.report.clone(),
                deviator: dev.deviator,
                truthful_utility,
                deviating_utility,
            });
        }
    }
    Ok(violations)
}

/// Which per-instance candidate domains the solver searches over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Restrict domains to individually rational allocations.
    pub require_ir: bool,
    /// Restrict domains to Pareto-optimal allocations.
    pub require_po: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { require_ir: true, require_po: true }
    }
}

/// One allocation per instance; the object the solver searches for.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MechanismTable {
    pub choices: BTreeMap<InstanceId, Allocation>,
}

/// Deterministic search statistics; identical runs produce identical stats.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SearchStats {
    /// Value assignments attempted during backtracking.
    pub nodes_expanded: u64,
    /// Domain values removed by arc consistency and forward checking.
    pub propagation_prunes: u64,
    /// Initial candidate-domain size per instance, before propagation.
    pub domain_sizes: BTreeMap<InstanceId, usize>,
    /// Set when some domain was empty before search began.
    pub empty_domain: Option<InstanceId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A table satisfying all constraints exists; this is the
    /// lexicographically first one (family order, then enumeration order).
    Sat { table: MechanismTable, stats: SearchStats },
    /// No table over the domains satisfies every deviation constraint.
    Unsat { stats: SearchStats },
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat { .. })
    }

    pub fn stats(&self) -> &SearchStats {
        match self {
            Verdict::Sat { stats, .. } | Verdict::Unsat { stats } => stats,
        }
    }
}

/// Searches for a mechanism table over the default property domains.
pub fn impossibility_solve(fam: &Family, opts: SolveOptions) -> Result<Verdict, VerifyError> {
    audited(fam)?;
    let domains: Vec<Vec<Allocation>> = fam
        .instances
        .iter()
        .map(|fi| domain_for(&fi.instance, opts))
        .collect();
    solve_over_domains(fam, domains)
}

/// Candidate domain of a single instance under the given property flags, in
/// enumeration order.
pub fn domain_for(inst: &Instance, opts: SolveOptions) -> Vec<Allocation> {
    match (opts.require_ir, opts.require_po) {
        (true, true) => po_ir_set(inst),
        (false, true) => pareto_optimal_set(inst),
        (true, false) => evaluated_allocations(inst)
            .into_iter()
            .filter(|(_, p)| p.iter().all(ExtendedValue::is_nonnegative))
            .map(|(a, _)| a)
            .collect(),
        (false, false) => allocations(inst).collect(),
    }
}

/// Searches for a table whose choice for each instance comes from the given
/// domain. Used directly by families that can express their domains more
/// compactly than the full allocation-level sets (one representative per
/// indifference class); correctness requires that within each domain entry's
/// indifference class the constraint utilities are constant.
pub fn impossibility_solve_with_domains(
    fam: &Family,
    domains: Vec<Vec<Allocation>>,
) -> Result<Verdict, VerifyError> {
    audited(fam)?;
    if domains.len() != fam.instances.len() {
        return Err(VerifyError::DomainCountMismatch {
            expected: fam.instances.len(),
            got: domains.len(),
        });
    }
    solve_over_domains(fam, domains)
}

/// Binary constraint derived from one deviation edge, with utilities
/// precomputed against the truth instance.
struct EdgeConstraint {
    truth_var: usize,
    report_var: usize,
    /// truth_utils[a]: deviator's truthful utility if the truth instance
    /// resolves to domain value a.
    truth_utils: Vec<ExtendedValue>,
    /// cross_utils[b]: deviator's utility, measured under the truth
    /// instance, of the choice the table makes at the report instance.
    cross_utils: Vec<ExtendedValue>,
}

struct Solver {
    domains: Vec<Vec<Allocation>>,
    alive: Vec<Vec<bool>>,
    alive_counts: Vec<usize>,
    edges: Vec<EdgeConstraint>,
    /// edge indices where the variable is the truth side / report side.
    by_truth: Vec<Vec<usize>>,
    by_report: Vec<Vec<usize>>,
    assigned: Vec<Option<usize>>,
    prunes: u64,
    nodes: u64,
}

fn solve_over_domains(fam: &Family, domains: Vec<Vec<Allocation>>) -> Result<Verdict, VerifyError> {
    let var_count = fam.instances.len();
    let mut stats = SearchStats::default();
    for (fi, dom) in fam.instances.iter().zip(&domains) {
        stats.domain_sizes.insert(fi.id.clone(), dom.len());
    }
    if let Some(pos) = domains.iter().position(Vec::is_empty) {
        stats.empty_domain = Some(fam.instances[pos].id.clone());
        return Ok(Verdict::Unsat { stats });
    }

    let mut edges = Vec::with_capacity(fam.deviations.len());
    for dev in &fam.deviations {
        let t = fam.index_of(&dev.truth).expect("audited");
        let r = fam.index_of(&dev.report).expect("audited");
        // A deviation from an instance to itself constrains nothing.
        if t == r {
            continue;
        }
        let truth_inst = &fam.instances[t].instance;
        let eval = |alloc: &Allocation, id: &InstanceId| {
            utility(truth_inst, alloc, dev.deviator).map_err(|source| VerifyError::Eval {
                id: id.clone(),
                source,
            })
        };
        let truth_utils = domains[t]
            .iter()
            .map(|a| eval(a, &dev.truth))
            .collect::<Result<Vec<_>, _>>()?;
        let cross_utils = domains[r]
            .iter()
            .map(|a| eval(a, &dev.truth))
            .collect::<Result<Vec<_>, _>>()?;
        edges.push(EdgeConstraint { truth_var: t, report_var: r, truth_utils, cross_utils });
    }

    let mut by_truth = vec![Vec::new(); var_count];
    let mut by_report = vec![Vec::new(); var_count];
    for (i, e) in edges.iter().enumerate() {
        by_truth[e.truth_var].push(i);
        by_report[e.report_var].push(i);
    }

    let alive: Vec<Vec<bool>> = domains.iter().map(|d| vec![true; d.len()]).collect();
    let alive_counts: Vec<usize> = domains.iter().map(Vec::len).collect();
    let mut solver = Solver {
        domains,
        alive,
        alive_counts,
        edges,
        by_truth,
        by_report,
        assigned: vec![None; var_count],
        prunes: 0,
        nodes: 0,
    };

    if let Some(wiped) = solver.enforce_arc_consistency() {
        stats.propagation_prunes = solver.prunes;
        stats.empty_domain = Some(fam.instances[wiped].id.clone());
        return Ok(Verdict::Unsat { stats });
    }

    let sat = solver.search(0);
    stats.nodes_expanded = solver.nodes;
    stats.propagation_prunes = solver.prunes;
    if sat {
        let mut table = MechanismTable::default();
        for (var, fi) in fam.instances.iter().enumerate() {
            let val = solver.assigned[var].expect("search completed");
            table.choices.insert(fi.id.clone(), solver.domains[var][val].clone());
        }
        Ok(Verdict::Sat { table, stats })
    } else {
        Ok(Verdict::Unsat { stats })
    }
}

impl Solver {
    /// The deviation constraint: the deviator must not end up strictly
    /// better at the report choice, measured in truth utilities.
    fn consistent(e: &EdgeConstraint, truth_val: usize, report_val: usize) -> bool {
        e.cross_utils[report_val] <= e.truth_utils[truth_val]
    }

    fn kill(&mut self, var: usize, val: usize) {
        self.alive[var][val] = false;
        self.alive_counts[var] -= 1;
        self.prunes += 1;
    }

    /// AC-3 to fixpoint. Returns the first wiped-out variable, if any.
    /// Removes only values with no support, so every satisfying table
    /// survives; in particular the lexicographically first one does.
    fn enforce_arc_consistency(&mut self) -> Option<usize> {
        let mut queue: VecDeque<usize> = (0..self.edges.len() * 2).collect();
        let mut queued: Vec<bool> = vec![true; self.edges.len() * 2];
        while let Some(arc) = queue.pop_front() {
            queued[arc] = false;
            let edge_idx = arc / 2;
            let revise_truth = arc % 2 == 0;
            let e = &self.edges[edge_idx];
            let (var, changed) = if revise_truth {
                // Value a needs some alive b with cross[b] <= truth[a].
                let min_cross = self.domains[e.report_var]
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| self.alive[e.report_var][*b])
                    .map(|(b, _)| &e.cross_utils[b])
                    .min();
                let var = e.truth_var;
                let to_kill: Vec<usize> = match min_cross {
                    None => (0..self.domains[var].len())
                        .filter(|&a| self.alive[var][a])
                        .collect(),
                    Some(min_cross) => (0..self.domains[var].len())
                        .filter(|&a| self.alive[var][a] && e.truth_utils[a] < *min_cross)
                        .collect(),
                };
                let changed = !to_kill.is_empty();
                for a in to_kill {
                    self.kill(var, a);
                }
                (var, changed)
            } else {
                // Value b needs some alive a with cross[b] <= truth[a].
                let max_truth = self.domains[e.truth_var]
                    .iter()
                    .enumerate()
                    .filter(|(a, _)| self.alive[e.truth_var][*a])
                    .map(|(a, _)| &e.truth_utils[a])
                    .max();
                let var = e.report_var;
                let to_kill: Vec<usize> = match max_truth {
                    None => (0..self.domains[var].len())
                        .filter(|&b| self.alive[var][b])
                        .collect(),
                    Some(max_truth) => (0..self.domains[var].len())
                        .filter(|&b| self.alive[var][b] && e.cross_utils[b] > *max_truth)
                        .collect(),
                };
                let changed = !to_kill.is_empty();
                for b in to_kill {
                    self.kill(var, b);
                }
                (var, changed)
            };
            if !changed {
                continue;
            }
            if self.alive_counts[var] == 0 {
                return Some(var);
            }
            // Re-examine arcs whose support set shrank: edges where `var`
            // is the opposite side of the revision.
            for &f in &self.by_report[var] {
                let arc = f * 2;
                if !queued[arc] {
                    queued[arc] = true;
                    queue.push_back(arc);
                }
            }
            for &f in &self.by_truth[var] {
                let arc = f * 2 + 1;
                if !queued[arc] {
                    queued[arc] = true;
                    queue.push_back(arc);
                }
            }
        }
        None
    }

    /// Chronological backtracking with forward checking from variable `var`
    /// onward; variables are assigned in index order, values in domain
    /// order, so the first solution found is the lexicographically first.
    fn search(&mut self, var: usize) -> bool {
        if var == self.domains.len() {
            return true;
        }
        for val in 0..self.domains[var].len() {
            if !self.alive[var][val] {
                continue;
            }
            self.nodes += 1;
            self.assigned[var] = Some(val);
            let mut trail: Vec<(usize, usize)> = Vec::new();
            if self.forward_check(var, val, &mut trail) && self.search(var + 1) {
                return true;
            }
            for (v, x) in trail {
                self.alive[v][x] = true;
                self.alive_counts[v] += 1;
            }
            self.assigned[var] = None;
        }
        false
    }

    /// Prunes unassigned neighbors of `var := val`; false on wipeout.
    fn forward_check(&mut self, var: usize, val: usize, trail: &mut Vec<(usize, usize)>) -> bool {
        for i in 0..self.edges.len() {
            let e = &self.edges[i];
            let (other, prune_reports) = if e.truth_var == var && self.assigned[e.report_var].is_none()
            {
                (e.report_var, true)
            } else if e.report_var == var && self.assigned[e.truth_var].is_none() {
                (e.truth_var, false)
            } else {
                continue;
            };
            for x in 0..self.domains[other].len() {
                if !self.alive[other][x] {
                    continue;
                }
                let e = &self.edges[i];
                let ok = if prune_reports {
                    Self::consistent(e, val, x)
                } else {
                    Self::consistent(e, x, val)
                };
                if !ok {
                    self.alive[other][x] = false;
                    self.alive_counts[other] -= 1;
                    self.prunes += 1;
                    trail.push((other, x));
                }
            }
            if self.alive_counts[other] == 0 {
                return false;
            }
        }
        true
    }
}

/// Independent re-audit of a SAT table: feasibility, the property flags via
/// the naive definitional predicates, and every deviation edge by fresh
/// utility evaluation. Returns human-readable defects; empty means pass.
pub fn audit_table(fam: &Family, table: &MechanismTable, opts: SolveOptions) -> Vec<String> {
    use crate::space::{is_individually_rational, is_pareto_optimal};
    let mut problems = Vec::new();
    if let Err(e) = audited(fam) {
        problems.push(e.to_string());
        return problems;
    }
    for fi in &fam.instances {
        let Some(choice) = table.choices.get(&fi.id) else {
            problems.push(format!("no choice for instance `{}`", fi.id));
            continue;
        };
        if !crate::model::is_feasible(&fi.instance, choice) {
            problems.push(format!("choice for `{}` is infeasible", fi.id));
            continue;
        }
        if opts.require_ir && !is_individually_rational(&fi.instance, choice).unwrap() {
            problems.push(format!("choice for `{}` is not individually rational", fi.id));
        }
        if opts.require_po && !is_pareto_optimal(&fi.instance, choice).unwrap() {
            problems.push(format!("choice for `{}` is not Pareto-optimal", fi.id));
        }
    }
    for (k, dev) in fam.deviations.iter().enumerate() {
        let (Some(tc), Some(rc)) = (table.choices.get(&dev.truth), table.choices.get(&dev.report))
        else {
            continue;
        };
        let truth_inst = fam.instance(&dev.truth).expect("audited");
        let truthful = utility(truth_inst, tc, dev.deviator);
        let deviating = utility(truth_inst, rc, dev.deviator);
        match (truthful, deviating) {
            (Ok(truthful), Ok(deviating)) => {
                if deviating > truthful {
                    problems.push(format!(
                        "deviation {k}: {} profits by deviating from `{}` to `{}` ({} > {})",
                        dev.deviator, dev.truth, dev.report, deviating, truthful
                    ));
                }
            }
            _ => problems.push(format!("deviation {k}: choices not evaluable")),
        }
    }
    problems
}

/// Utility profile of an allocation under an instance; convenience re-export
/// for audits that work across a family's instances.
pub fn profile_under(
    inst: &Instance,
    alloc: &Allocation,
) -> Result<UtilityProfile, EvalError> {
    crate::space::utility_profile(inst, alloc)
}
