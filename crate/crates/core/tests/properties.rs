//! Randomized cross-checks of the library's load-bearing invariants:
//! dominance is a strict partial order, the efficient-set constructions
//! agree with their naive definitions, the reference mechanisms deliver the
//! properties they advertise, and the solver's verdicts survive independent
//! re-audits.

use landalloc::families::marriage;
use landalloc::mechanisms::{
    ir_pareto_improve, null_mechanism, serial_dictatorship, MechanismSpec,
};
use landalloc::model::{Agent, Allocation, Instance, Plot, PlotGraph};
use landalloc::space::{
    allocation_space_size, allocations, evaluated_allocations, is_individually_rational,
    is_pareto_optimal, max_welfare, po_ir_set, profile_dominates, utility_profile,
};
use landalloc::value::ExtendedValue;
use landalloc::verify::{
    audit_table, domain_for, impossibility_solve, impossibility_solve_with_domains, sp_check,
    Deviation, Family, FamilyInstance, MechanismTable, SolveOptions, Verdict,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn value_palette() -> Vec<ExtendedValue> {
    vec![
        ExtendedValue::Unacceptable,
        ExtendedValue::from_int(-1),
        ExtendedValue::from_ratio(-1, 2),
        ExtendedValue::zero(),
        ExtendedValue::from_ratio(1, 10),
        ExtendedValue::from_ratio(1, 2),
        ExtendedValue::from_int(1),
        ExtendedValue::from_int(2),
    ]
}

fn bonus_palette() -> Vec<ExtendedValue> {
    vec![
        ExtendedValue::from_int(-2),
        ExtendedValue::from_ratio(-1, 2),
        ExtendedValue::from_ratio(1, 5),
        ExtendedValue::from_int(1),
        ExtendedValue::from_int(3),
    ]
}

fn arb_value() -> impl Strategy<Value = ExtendedValue> {
    prop::sample::select(value_palette())
}

fn arb_instance(max_agents: usize, max_plots: usize) -> impl Strategy<Value = Instance> {
    (1..=max_agents, 1..=max_plots).prop_flat_map(|(n, m)| {
        let plot_pairs: Vec<(usize, usize)> =
            (0..m).flat_map(|a| (a + 1..m).map(move |b| (a, b))).collect();
        let agent_pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect();
        let edge_flags = prop::collection::vec(any::<bool>(), plot_pairs.len());
        let values = prop::collection::vec(arb_value(), n * m);
        let bonuses = prop::collection::vec(
            prop::option::weighted(0.3, prop::sample::select(bonus_palette())),
            agent_pairs.len(),
        );
        (edge_flags, values, bonuses).prop_map(move |(flags, vals, bons)| {
            let edges: Vec<(usize, usize)> = plot_pairs
                .iter()
                .zip(&flags)
                .filter(|(_, &keep)| keep)
                .map(|(&e, _)| e)
                .collect();
            let graph = PlotGraph::new(
                (1..=m).map(|j| format!("p{j}")).collect(),
                &edges,
            )
            .expect("generated edges are valid");
            let plot_values: Vec<Vec<ExtendedValue>> =
                vals.chunks(m).map(|row| row.to_vec()).collect();
            let friend_bonuses: Vec<((usize, usize), ExtendedValue)> = agent_pairs
                .iter()
                .zip(bons)
                .filter_map(|(&pair, b)| b.map(|b| (pair, b)))
                .collect();
            Instance::new(
                (1..=n).map(|i| format!("a{i}")).collect(),
                graph,
                plot_values,
                friend_bonuses,
            )
            .expect("generated instance is valid")
        })
    })
}

/// A base instance plus variants that each change one agent's plot-value
/// row, wired into a deviation family with both edge orientations.
fn arb_report_family(max_agents: usize, max_plots: usize) -> impl Strategy<Value = Family> {
    arb_instance(max_agents, max_plots).prop_flat_map(|inst| {
        let n = inst.agent_count();
        let m = inst.plot_count();
        let variant = (0..n, prop::collection::vec((0..m, arb_value()), 1..=2));
        (Just(inst), prop::collection::vec(variant, 1..=2)).prop_map(|(inst, variants)| {
            let mut instances = vec![FamilyInstance {
                id: "truth".into(),
                instance: inst.clone(),
            }];
            let mut deviations = Vec::new();
            for (k, (deviator, changes)) in variants.into_iter().enumerate() {
                let mut edited = inst.clone();
                for (plot, value) in changes {
                    edited = edited.with_plot_value(Agent(deviator), Plot(plot), value);
                }
                let id = format!("report-{k}");
                instances.push(FamilyInstance {
                    id: id.clone(),
                    instance: edited,
                });
                deviations.push(Deviation {
                    truth: "truth".into(),
                    report: id.clone(),
                    deviator: Agent(deviator),
                });
                deviations.push(Deviation {
                    truth: id,
                    report: "truth".into(),
                    deviator: Agent(deviator),
                });
            }
            Family::new(instances, deviations)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Pareto dominance is irreflexive, asymmetric, and transitive on the
    /// evaluated allocation space of any small instance.
    #[test]
    fn dominance_is_a_strict_partial_order(inst in arb_instance(3, 3)) {
        let profiles: Vec<_> = evaluated_allocations(&inst)
            .into_iter()
            .map(|(_, p)| p)
            .collect();
        for a in &profiles {
            prop_assert!(!profile_dominates(a, a));
        }
        for a in &profiles {
            for b in &profiles {
                if profile_dominates(a, b) {
                    prop_assert!(!profile_dominates(b, a));
                    for c in &profiles {
                        if profile_dominates(b, c) {
                            prop_assert!(profile_dominates(a, c));
                        }
                    }
                }
            }
        }
    }

    /// The efficient-and-rational set equals the brute-force filter of the
    /// full allocation space by the two definitional predicates.
    #[test]
    fn po_ir_set_matches_the_naive_filter(inst in arb_instance(3, 3)) {
        let naive: Vec<Allocation> = allocations(&inst)
            .filter(|a| {
                is_individually_rational(&inst, a).unwrap()
                    && is_pareto_optimal(&inst, a).unwrap()
            })
            .collect();
        prop_assert_eq!(po_ir_set(&inst), naive);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Maximizing total welfare always lands on a Pareto-optimal
    /// allocation: any improvement would strictly raise the finite sum.
    #[test]
    fn welfare_maximization_is_pareto_optimal(inst in arb_instance(4, 4)) {
        let best = max_welfare(&inst);
        prop_assert!(is_pareto_optimal(&inst, &best).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Serial dictatorship terminates with a Pareto-optimal allocation for
    /// any dictator order: the outcome lexicographically maximizes the
    /// dictators' utilities, so no allocation weakly beats it everywhere.
    #[test]
    fn serial_dictatorship_is_pareto_optimal(inst in arb_instance(3, 3)) {
        let n = inst.agent_count();
        let forward: Vec<usize> = (0..n).collect();
        let backward: Vec<usize> = (0..n).rev().collect();
        for order in [forward, backward] {
            let out = serial_dictatorship(&inst, &order).unwrap();
            prop_assert!(is_pareto_optimal(&inst, &out).unwrap());
        }
    }

    /// Iterated Pareto improvement from the empty allocation terminates on
    /// an individually rational, Pareto-optimal allocation: improvements
    /// never lower anyone below the zero outside option.
    #[test]
    fn pareto_improvement_from_empty_is_rational_and_optimal(inst in arb_instance(3, 3)) {
        let start = Allocation::empty(inst.agent_count());
        let out = ir_pareto_improve(&inst, &start).unwrap();
        prop_assert!(is_individually_rational(&inst, &out).unwrap());
        prop_assert!(is_pareto_optimal(&inst, &out).unwrap());
    }

    /// The null mechanism is individually rational everywhere and, being
    /// constant in the report, admits no profitable deviation on any
    /// report family.
    #[test]
    fn null_mechanism_is_rational_and_strategyproof(fam in arb_report_family(3, 3)) {
        for fi in &fam.instances {
            let out = null_mechanism(&fi.instance);
            prop_assert!(is_individually_rational(&fi.instance, &out).unwrap());
        }
        prop_assert!(sp_check(&MechanismSpec::Null, &fam).unwrap().is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Enumeration of feasible allocations is deterministic, duplicate-free,
    /// and counts exactly the partial injections from agents to plots
    /// (adjacent-plot structure never constrains feasibility).
    #[test]
    fn enumeration_counts_partial_injections(inst in arb_instance(4, 4)) {
        let first: Vec<Allocation> = allocations(&inst).collect();
        let second: Vec<Allocation> = allocations(&inst).collect();
        prop_assert_eq!(&first, &second);
        let distinct: std::collections::HashSet<_> = first.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), first.len());

        let n = inst.agent_count() as u128;
        let m = inst.plot_count() as u128;
        let mut expected = 0u128;
        for k in 0..=n.min(m) {
            let choose = |set: u128, k: u128| -> u128 {
                (0..k).fold(1u128, |acc, i| acc * (set - i) / (i + 1))
            };
            let arrangements = (0..k).fold(1u128, |acc, i| acc * (k - i));
            expected += choose(n, k) * choose(m, k) * arrangements;
        }
        prop_assert_eq!(first.len() as u128, expected);
        prop_assert_eq!(
            expected,
            allocation_space_size(inst.agent_count(), inst.plot_count())
        );
    }

    /// The solver is deterministic; a SAT table survives the independent
    /// re-audit, and under UNSAT no randomly assembled table from the same
    /// domains passes it either.
    #[test]
    fn solver_verdicts_survive_independent_audits(
        fam in arb_report_family(3, 3),
        seed in any::<u64>(),
    ) {
        let opts = SolveOptions::default();
        let verdict = impossibility_solve(&fam, opts).unwrap();
        prop_assert_eq!(&verdict, &impossibility_solve(&fam, opts).unwrap());
        match &verdict {
            Verdict::Sat { table, .. } => {
                prop_assert!(audit_table(&fam, table, opts).is_empty());
            }
            Verdict::Unsat { .. } => {
                let domains: Vec<Vec<Allocation>> = fam
                    .instances
                    .iter()
                    .map(|fi| domain_for(&fi.instance, opts))
                    .collect();
                prop_assert!(domains.iter().all(|d| !d.is_empty()));
                let mut rng = StdRng::seed_from_u64(seed);
                for _ in 0..20 {
                    let mut table = MechanismTable::default();
                    for (fi, domain) in fam.instances.iter().zip(&domains) {
                        let pick = rng.gen_range(0..domain.len());
                        table.choices.insert(fi.id.clone(), domain[pick].clone());
                    }
                    prop_assert!(!audit_table(&fam, &table, opts).is_empty());
                }
            }
        }
    }
}

/// A three-agent, three-plot instance (plots v1 and v2 adjacent) with a
/// directed bonus cycle laid over the adjacency; `marks` hides plot v1
/// (bit 0) and/or plot v2 (bit 1) from each agent.
fn trio_instance(marks: [usize; 3]) -> Instance {
    let graph =
        PlotGraph::new((1..=3).map(|j| format!("v{j}")).collect(), &[(0, 1)]).expect("valid graph");
    let base_row = [
        ExtendedValue::from_ratio(3, 10),
        ExtendedValue::from_ratio(1, 10),
        ExtendedValue::from_int(1),
    ];
    let mut values: Vec<Vec<ExtendedValue>> = (0..3).map(|_| base_row.to_vec()).collect();
    for (row, digit) in values.iter_mut().zip(marks) {
        if digit & 1 != 0 {
            row[0] = ExtendedValue::Unacceptable;
        }
        if digit & 2 != 0 {
            row[1] = ExtendedValue::Unacceptable;
        }
    }
    let mut friends = Vec::new();
    for i in 0..3 {
        friends.push(((i, (i + 1) % 3), ExtendedValue::from_int(1)));
        friends.push(((i, (i + 2) % 3), ExtendedValue::from_ratio(1, 5)));
    }
    Instance::new(
        (1..=3).map(|i| i.to_string()).collect(),
        graph,
        values,
        friends,
    )
    .expect("valid instance")
}

/// One instance per combination of the three agents' mark menus, with a
/// deviation edge (in both orientations) between every pair of combinations
/// that differ in exactly one agent's mark.
fn trio_grid_family(menus: &[Vec<usize>; 3]) -> Family {
    let id_of = |marks: [usize; 3]| format!("m-{}{}{}", marks[0], marks[1], marks[2]);
    let mut combos = Vec::new();
    for &d1 in &menus[0] {
        for &d2 in &menus[1] {
            for &d3 in &menus[2] {
                combos.push([d1, d2, d3]);
            }
        }
    }
    let instances = combos
        .iter()
        .map(|&marks| FamilyInstance {
            id: id_of(marks),
            instance: trio_instance(marks),
        })
        .collect();
    let mut deviations = Vec::new();
    for &a in &combos {
        for &b in &combos {
            let differ: Vec<usize> = (0..3).filter(|&i| a[i] != b[i]).collect();
            if differ.len() == 1 {
                deviations.push(Deviation {
                    truth: id_of(a),
                    report: id_of(b),
                    deviator: Agent(differ[0]),
                });
            }
        }
    }
    Family::new(instances, deviations)
}

/// A menu of mark digits that always offers the unmarked instance and one
/// to three of the marked variants.
fn arb_mark_menu() -> impl Strategy<Value = Vec<usize>> {
    prop::sample::subsequence(vec![1usize, 2, 3], 1..=3).prop_map(|mut extra| {
        let mut menu = vec![0usize];
        menu.append(&mut extra);
        menu
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Deviation edges only ever constrain: deleting edges from a family
    /// preserves satisfiability (equivalently, adding edges can turn a
    /// satisfiable family unsatisfiable but never the reverse), and a
    /// family with no edges at all always has a table.
    #[test]
    fn deleting_deviation_edges_preserves_satisfiability(
        menus in [arb_mark_menu(), arb_mark_menu(), arb_mark_menu()],
        seed in any::<u64>(),
    ) {
        let opts = SolveOptions::default();
        let full = trio_grid_family(&menus);
        let full_verdict = impossibility_solve(&full, opts).unwrap();

        let mut rng = StdRng::seed_from_u64(seed);
        let kept: Vec<Deviation> = full
            .deviations
            .iter()
            .filter(|_| rng.gen_bool(0.5))
            .cloned()
            .collect();
        let sub = Family::new(full.instances.clone(), kept);
        let sub_verdict = impossibility_solve(&sub, opts).unwrap();
        if full_verdict.is_sat() {
            prop_assert!(
                sub_verdict.is_sat(),
                "a family solvable with every edge must stay solvable after deleting some"
            );
        }

        let unconstrained = Family::new(full.instances.clone(), Vec::new());
        prop_assert!(impossibility_solve(&unconstrained, opts).unwrap().is_sat());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every pairing's class utilities match a direct evaluation of its
    /// representative allocation: paired agents earn exactly their report's
    /// bonus toward the partner, everyone else exactly zero.
    #[test]
    fn marriage_class_profiles_match_direct_evaluation(digits in [0..5usize, 0..5, 0..5, 0..5]) {
        let profile = marriage::MarriageProfile::from_digits(digits).unwrap();
        let inst = marriage::instance(profile, false);
        for matching in marriage::Matching::all() {
            let rep = marriage::representative_allocation(matching, 4);
            let direct = utility_profile(&inst, &rep).unwrap();
            let class = marriage::class_profile(profile, matching, 4);
            prop_assert_eq!(direct, class);
            prop_assert_eq!(marriage::matching_of(&inst, &rep), matching);
        }
    }
}

/// Profile identifiers parse back to the profile they came from, for the
/// entire report space.
#[test]
fn marriage_profile_ids_round_trip() {
    let all = marriage::MarriageProfile::all();
    assert_eq!(all.len(), 625);
    for p in all {
        assert_eq!(marriage::MarriageProfile::parse_id(&p.id()), Some(p));
    }
    assert_eq!(marriage::MarriageProfile::parse_id("p-00000"), None);
    assert_eq!(marriage::MarriageProfile::parse_id("p-5000"), None);
    assert_eq!(marriage::MarriageProfile::parse_id("q-0000"), None);
}

/// The compressed class-representative domains and the full
/// allocation-level domains assign the same verdict to the truncation-grid
/// family: class members are utility-indistinguishable, so nothing is lost.
#[test]
fn marriage_class_domains_agree_with_allocation_domains() {
    let (fam, class_domains) = marriage::family(marriage::Scope::TruncationGrid);
    let by_class = impossibility_solve_with_domains(&fam, class_domains).unwrap();
    let by_allocation = impossibility_solve(&fam, SolveOptions::default()).unwrap();
    assert!(!by_class.is_sat());
    assert!(!by_allocation.is_sat());
}
