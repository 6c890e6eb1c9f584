//! The two instance families behind the bundled incompatibility checks,
//! plus the supporting structure each one needs.
//!
//! [`plot_unacceptability`] is a five-agent family where variants of one
//! base instance mark a single plot unacceptable for a single agent. It is
//! small enough that the solver works over full allocation-level candidate
//! sets.
//!
//! [`marriage`] embeds a two-sided matching market: two men and two women
//! report rankings over opposite-gender partners, encoded as friend bonuses
//! on a plot graph of disjoint edges. Its 625 instances would be far too
//! many for allocation-level domains, so the module works with indifference
//! classes: allocations with the same man-woman pairing give every agent
//! the same utility, and one representative per class is enough.

pub mod plot_unacceptability {
    //! Base instance: five agents, five plots, one graph edge between the
    //! two contested plots. Agents 1..3 want v1 and v2 weakly but v3
    //! strongly; agents 4 and 5 are indifferent filler. Friend bonuses run
    //! around the cycle 1 -> 2 -> 3 -> 1 strongly and backwards weakly, so
    //! pairs of the trio want to share the v1-v2 edge.
    //!
    //! Reports mark subsets of {v1, v2} unacceptable. The default
    //! [`family`] covers every combination of such reports by the three
    //! trio agents (a 4 x 4 x 4 grid of instances) with deviation edges
    //! between each pair differing in one agent's report; the solver
    //! refutes it.
    //!
    //! [`single_flip_family`] keeps only the base and its six single-mark
    //! neighbors. That restriction is satisfiable: a mechanism can answer
    //! each single mark with the efficient outcome that happens to pay the
    //! deviator little, so no single misreport ever profits. Refuting the
    //! incompatibility needs chains of deviations through instances where
    //! several agents' reports differ from the base at once, which is what
    //! the grid supplies. The contrast is pinned down by the solver
    //! verdicts in this module's tests.

    use crate::model::{Agent, Allocation, Instance, Plot, PlotGraph};
    use crate::space::{
        agent_utility, is_individually_rational, is_pareto_optimal, pareto_dominates,
        pareto_optimal_set,
    };
    use crate::value::ExtendedValue;
    use crate::verify::{Deviation, Family, FamilyInstance, InstanceId};

    /// The shared base instance. Agent and plot indices follow label order:
    /// agent "1" is `Agent(0)`, plot "v1" is `Plot(0)`.
    pub fn base_instance() -> Instance {
        let graph = PlotGraph::new(
            (1..=5).map(|i| format!("v{i}")).collect(),
            &[(0, 1)],
        )
        .expect("well-formed graph");
        let trio = vec![
            ExtendedValue::from_ratio(3, 10),
            ExtendedValue::from_ratio(1, 10),
            ExtendedValue::from_int(1),
            ExtendedValue::zero(),
            ExtendedValue::zero(),
        ];
        let filler = vec![ExtendedValue::from_ratio(1, 10); 5];
        let values = vec![trio.clone(), trio.clone(), trio, filler.clone(), filler];
        let bonuses = [
            ((0, 1), ExtendedValue::from_int(1)),
            ((1, 2), ExtendedValue::from_int(1)),
            ((2, 0), ExtendedValue::from_int(1)),
            ((0, 2), ExtendedValue::from_ratio(1, 5)),
            ((2, 1), ExtendedValue::from_ratio(1, 5)),
            ((1, 0), ExtendedValue::from_ratio(1, 5)),
        ];
        Instance::new(
            (1..=5).map(|i| i.to_string()).collect(),
            graph,
            values,
            bonuses,
        )
        .expect("well-formed instance")
    }

    /// The base instance with `plots` marked unacceptable for `agent`.
    pub fn flagged_instance(agent: Agent, plots: &[Plot]) -> Instance {
        let mut inst = base_instance();
        for &p in plots {
            inst = inst.with_plot_value(agent, p, ExtendedValue::Unacceptable);
        }
        inst
    }

    fn variant_id(base: &Instance, agent: Agent, plots: &[Plot]) -> InstanceId {
        let marks: String = plots.iter().map(|&p| base.graph().label(p)).collect();
        format!("unacc-{}-{}", base.agent_label(agent), marks)
    }

    /// The six single-mark variants: each trio member can mark each of the
    /// two contested plots unacceptable. Returns (id, deviator, instance)
    /// with ids like `unacc-2-v2`.
    pub fn unacceptability_variants() -> Vec<(InstanceId, Agent, Instance)> {
        let base = base_instance();
        let mut out = Vec::new();
        for agent in 0..3 {
            for plot in 0..2 {
                let a = Agent(agent);
                let p = Plot(plot);
                out.push((variant_id(&base, a, &[p]), a, flagged_instance(a, &[p])));
            }
        }
        out
    }

    /// The per-agent report space: one subset of {v1, v2} marked
    /// unacceptable, as a digit 0..=3 (none, v1, v2, both).
    const REPORT_DIGITS: usize = 4;

    fn report_plots(digit: usize) -> &'static [Plot] {
        match digit {
            0 => &[],
            1 => &[Plot(0)],
            2 => &[Plot(1)],
            3 => &[Plot(0), Plot(1)],
            _ => unreachable!("digits run 0..4"),
        }
    }

    /// Reports of the three trio agents, e.g. `[0, 3, 1]` for agent 2
    /// marking both contested plots and agent 3 marking v1.
    pub type MarkProfile = [usize; 3];

    /// Stable instance id of a profile, e.g. `marks-031`.
    pub fn profile_id(profile: MarkProfile) -> InstanceId {
        format!("marks-{}{}{}", profile[0], profile[1], profile[2])
    }

    /// Builds the instance where each trio agent marks the plots named by
    /// its digit of `profile`.
    pub fn profile_instance(profile: MarkProfile) -> Instance {
        let mut inst = base_instance();
        for (agent, &digit) in profile.iter().enumerate() {
            for &p in report_plots(digit) {
                inst = inst.with_plot_value(Agent(agent), p, ExtendedValue::Unacceptable);
            }
        }
        inst
    }

    /// All 64 profiles in id order (agent 3's digit varies fastest).
    pub fn all_profiles() -> Vec<MarkProfile> {
        let mut out = Vec::with_capacity(64);
        for a in 0..REPORT_DIGITS {
            for b in 0..REPORT_DIGITS {
                for c in 0..REPORT_DIGITS {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }

    /// The default family: one instance per profile in the 4 x 4 x 4 grid
    /// of trio reports, with deviation edges between every ordered pair of
    /// profiles differing in exactly one agent's report. 64 instances,
    /// 576 edges; the solver refutes it.
    pub fn family() -> Family {
        let profiles = all_profiles();
        let instances = profiles
            .iter()
            .map(|&p| FamilyInstance { id: profile_id(p), instance: profile_instance(p) })
            .collect();
        let mut deviations = Vec::new();
        for &truth in &profiles {
            for agent in 0..3 {
                for digit in 0..REPORT_DIGITS {
                    if digit == truth[agent] {
                        continue;
                    }
                    let mut report = truth;
                    report[agent] = digit;
                    deviations.push(Deviation {
                        truth: profile_id(truth),
                        report: profile_id(report),
                        deviator: Agent(agent),
                    });
                }
            }
        }
        Family::new(instances, deviations)
    }

    /// The smallest interesting family: the base instance and the one
    /// variant where agent 2 marks v2, joined by both deviation edges.
    /// Satisfiable: the solver answers both instances with the outcome
    /// that already pays agent 2 its best mark-proof utility.
    pub fn minimal_pair_family() -> Family {
        let (id, deviator, inst) = unacceptability_variants()
            .into_iter()
            .find(|(id, _, _)| id == "unacc-2-v2")
            .expect("variant exists");
        Family::new(
            vec![
                FamilyInstance {
                    id: "base".into(),
                    instance: base_instance(),
                },
                FamilyInstance {
                    id: id.clone(),
                    instance: inst,
                },
            ],
            vec![
                Deviation {
                    truth: "base".into(),
                    report: id.clone(),
                    deviator,
                },
                Deviation {
                    truth: id,
                    report: "base".into(),
                    deviator,
                },
            ],
        )
    }

    /// The six single-mark variants with deviation edges to and from the
    /// base only: seven instances, twelve edges. Satisfiable, unlike the
    /// default family; see the module docs.
    pub fn single_flip_family() -> Family {
        let mut instances = vec![FamilyInstance {
            id: "base".into(),
            instance: base_instance(),
        }];
        let mut deviations = Vec::new();
        for (id, deviator, instance) in unacceptability_variants() {
            deviations.push(Deviation {
                truth: "base".into(),
                report: id.clone(),
                deviator,
            });
            deviations.push(Deviation {
                truth: id.clone(),
                report: "base".into(),
                deviator,
            });
            instances.push(FamilyInstance { id, instance });
        }
        Family::new(instances, deviations)
    }

    /// Outcome of one named check within [`case_audit`].
    #[derive(Clone, Debug)]
    pub struct CaseCheck {
        pub id: &'static str,
        pub pass: bool,
        pub detail: String,
    }

    #[derive(Clone, Debug, Default)]
    pub struct CaseReport {
        pub cases: Vec<CaseCheck>,
    }

    impl CaseReport {
        pub fn all_pass(&self) -> bool {
            self.cases.iter().all(|c| c.pass)
        }

        fn push(&mut self, id: &'static str, pass: bool, detail: String) {
            self.cases.push(CaseCheck { id, pass, detail });
        }
    }

    /// The intermediate facts the incompatibility argument rests on, each
    /// checked exhaustively. [`crate::verify::impossibility_solve`] refutes
    /// the family wholesale; this breaks the refutation into auditable
    /// steps.
    pub fn case_audit() -> CaseReport {
        let mut report = CaseReport::default();
        let base = base_instance();
        let variants = unacceptability_variants();

        // Marking a plot unacceptable really removes it: no individually
        // rational allocation of any variant assigns that agent that plot.
        {
            let mut offenders = Vec::new();
            for (id, agent, inst) in &variants {
                let plot = (0..inst.plot_count())
                    .map(Plot)
                    .find(|&p| inst.plot_value(*agent, p).is_unacceptable())
                    .expect("variant marks one plot");
                for alloc in crate::space::allocations(inst) {
                    if alloc.plot_of(*agent) == Some(plot)
                        && is_individually_rational(inst, &alloc).unwrap()
                    {
                        offenders.push((id.clone(), alloc));
                    }
                }
            }
            report.push(
                "ir-excludes-unacceptable-plot",
                offenders.is_empty(),
                format!(
                    "individually rational allocations assigning a marked plot: {}",
                    offenders.len()
                ),
            );
        }

        // In the variant where agent 2 rejects v2, every efficient
        // allocation that still puts agent 2 on v1 pays it at least 1/2:
        // a friend always ends up across the edge. The bound is tight.
        {
            let inst = variants
                .iter()
                .find(|(id, _, _)| id == "unacc-2-v2")
                .map(|(_, _, inst)| inst.clone())
                .expect("variant exists");
            let agent2 = Agent(1);
            let mins = pareto_optimal_set(&inst)
                .into_iter()
                .filter(|a| a.plot_of(agent2) == Some(Plot(0)))
                .map(|a| agent_utility(&inst, &a, agent2).unwrap())
                .min();
            let expected = ExtendedValue::from_ratio(1, 2);
            let pass = mins.as_ref() == Some(&expected);
            report.push(
                "v1-holder-utility-floor",
                pass,
                format!(
                    "minimum utility of agent 2 on v1 over efficient allocations: {}",
                    mins.map_or_else(|| "none".into(), |v| v.to_string())
                ),
            );
        }

        // In the agent-2/v2 variant, whenever agents 1 and 3 hold the two
        // contested plots in an efficient allocation, agent 2 must be on
        // v3: anywhere else it earns 0 and moving it to v3 (displacing at
        // most an indifferent filler) improves.
        {
            let inst = variants
                .iter()
                .find(|(id, _, _)| id == "unacc-2-v2")
                .map(|(_, _, inst)| inst.clone())
                .expect("variant exists");
            let mut matched = 0usize;
            let mut bad = 0usize;
            for alloc in pareto_optimal_set(&inst) {
                let one_and_three_on_edge = matches!(
                    (alloc.plot_of(Agent(0)), alloc.plot_of(Agent(2))),
                    (Some(Plot(0)), Some(Plot(1))) | (Some(Plot(1)), Some(Plot(0)))
                );
                if !one_and_three_on_edge {
                    continue;
                }
                matched += 1;
                if alloc.plot_of(Agent(1)) != Some(Plot(2)) {
                    bad += 1;
                }
            }
            report.push(
                "pair-on-edge-forces-v3",
                matched > 0 && bad == 0,
                format!("agents 1 and 3 hold the edge in {matched} efficient allocations, agent 2 off v3 in {bad}"),
            );
        }

        // If agent 1 keeps v1 while a filler agent sits on v2 and agent 3
        // holds v3, the allocation is always improvable; one witness pair
        // is checked explicitly.
        {
            let (pass_pattern, count) =
                pattern_never_optimal(&base, Agent(0), Agent(2));
            let better =
                Allocation::from_pairs(5, &[(0, 1), (1, 0), (2, 2), (3, 3), (4, 4)]).unwrap();
            let worse = Allocation::from_pairs(5, &[(0, 0), (3, 1), (2, 2), (4, 3)]).unwrap();
            let witness = pareto_dominates(&base, &better, &worse).unwrap();
            report.push(
                "outsider-on-v2-beside-agent-1",
                pass_pattern && witness,
                format!("{count} pattern allocations all improvable; witness dominance: {witness}"),
            );
        }

        // Same with agents 1 and 3 swapped: agent 3 on v1, filler on v2,
        // agent 1 on v3.
        {
            let (pass_pattern, count) =
                pattern_never_optimal(&base, Agent(2), Agent(0));
            let better =
                Allocation::from_pairs(5, &[(2, 1), (1, 0), (0, 2), (3, 3), (4, 4)]).unwrap();
            let worse = Allocation::from_pairs(5, &[(2, 0), (3, 1), (0, 2), (4, 3)]).unwrap();
            let witness = pareto_dominates(&base, &better, &worse).unwrap();
            report.push(
                "outsider-on-v2-beside-agent-3",
                pass_pattern && witness,
                format!("{count} pattern allocations all improvable; witness dominance: {witness}"),
            );
        }

        report
    }

    /// True iff no allocation matching the pattern (v1 to `on_v1`, v2 to a
    /// filler agent, v3 to `on_v3`) is Pareto-optimal; also returns how
    /// many allocations matched.
    fn pattern_never_optimal(inst: &Instance, on_v1: Agent, on_v3: Agent) -> (bool, usize) {
        let mut count = 0usize;
        for alloc in crate::space::allocations(inst) {
            let filler_on_v2 = alloc.plot_of(Agent(3)) == Some(Plot(1))
                || alloc.plot_of(Agent(4)) == Some(Plot(1));
            let fits = alloc.plot_of(on_v1) == Some(Plot(0))
                && alloc.plot_of(on_v3) == Some(Plot(2))
                && filler_on_v2;
            if !fits {
                continue;
            }
            count += 1;
            if is_pareto_optimal(inst, &alloc).unwrap() {
                return (false, count);
            }
        }
        (count > 0, count)
    }

    #[cfg(test)]
    mod tests {
        use super::*;
        use crate::mechanisms::{run_mechanism, MechanismSpec};
        use crate::model::utility;
        use crate::space::{po_ir_set, utility_profile};
        use crate::verify::{
            audit_table, deviation_closure_audit, impossibility_solve, sp_check, SolveOptions,
            Verdict,
        };

        #[test]
        fn families_have_the_documented_shapes_and_pass_their_audits() {
            let fam = family();
            assert_eq!(fam.instances.len(), 64);
            assert_eq!(fam.deviations.len(), 576);
            assert_eq!(fam.instances[0].id, "marks-000");
            assert_eq!(fam.instances[63].id, "marks-333");
            assert!(deviation_closure_audit(&fam));
            assert_eq!(
                fam.instance("marks-020").unwrap(),
                &unacceptability_variants()[3].2
            );

            let single = single_flip_family();
            assert_eq!(single.instances.len(), 7);
            assert_eq!(single.deviations.len(), 12);
            assert!(deviation_closure_audit(&single));
        }

        #[test]
        fn rejecting_both_contested_plots_yields_v3_or_nothing() {
            for agent in [Agent(0), Agent(1), Agent(2)] {
                let inst = flagged_instance(agent, &[Plot(0), Plot(1)]);
                let set = po_ir_set(&inst);
                assert_eq!(set.len(), 14);
                let mut on_v3 = 0usize;
                for alloc in &set {
                    let utility = agent_utility(&inst, alloc, agent).unwrap();
                    if alloc.plot_of(agent) == Some(Plot(2)) {
                        assert_eq!(utility, ExtendedValue::from_int(1));
                        on_v3 += 1;
                    } else {
                        assert_eq!(utility, ExtendedValue::zero());
                    }
                }
                assert_eq!(on_v3, 4);
            }
        }

        #[test]
        fn the_default_family_admits_no_mechanism_table() {
            let verdict = impossibility_solve(&family(), SolveOptions::default()).unwrap();
            let Verdict::Unsat { stats } = verdict else {
                panic!("expected UNSAT");
            };
            // Propagation alone wipes a domain before any search: no
            // branching is ever needed.
            assert_eq!(stats.nodes_expanded, 0);
            assert_eq!(stats.empty_domain.as_deref(), Some("marks-121"));
            assert_eq!(stats.domain_sizes["marks-000"], 12);
            assert_eq!(stats.domain_sizes["marks-020"], 8);
            assert_eq!(stats.domain_sizes["marks-030"], 14);
        }

        #[test]
        fn single_marks_alone_are_dodgeable() {
            let fam = single_flip_family();
            let verdict = impossibility_solve(&fam, SolveOptions::default()).unwrap();
            let Verdict::Sat { table, .. } = &verdict else {
                panic!("expected SAT");
            };
            assert!(audit_table(&fam, table, SolveOptions::default()).is_empty());
            // The surviving table answers each single mark with the
            // efficient outcome that pays the marking agent least, so no
            // deviation from the base profits.
            let base_choice = &table.choices["base"];
            let inst = base_instance();
            for dev in &fam.deviations {
                if dev.truth != "base" {
                    continue;
                }
                let truthful = agent_utility(&inst, base_choice, dev.deviator).unwrap();
                let deviating =
                    agent_utility(&inst, &table.choices[&dev.report], dev.deviator).unwrap();
                assert!(deviating <= truthful);
            }
        }

        #[test]
        fn the_base_and_one_variant_alone_are_dodgeable() {
            let fam = minimal_pair_family();
            assert_eq!(fam.instances.len(), 2);
            assert_eq!(fam.deviations.len(), 2);
            assert!(deviation_closure_audit(&fam));
            let id = fam.instances[1].id.clone();
            assert_eq!(id, "unacc-2-v2");
            let verdict = impossibility_solve(&fam, SolveOptions::default()).unwrap();
            let Verdict::Sat { table, .. } = &verdict else {
                panic!("expected SAT");
            };
            assert!(audit_table(&fam, table, SolveOptions::default()).is_empty());
            // The dodge pays agent 2 the full value of v3 in both answers,
            // so marking v2 gains it nothing: the solver exploits the
            // outcomes where agents 1 and 3 share the contested edge.
            let expected =
                Allocation::from_pairs(5, &[(0, 0), (1, 2), (2, 1), (3, 3), (4, 4)]).unwrap();
            assert_eq!(&table.choices["base"], &expected);
            assert_eq!(&table.choices[&id], &expected);
        }

        #[test]
        fn reference_mechanisms_trade_one_property_for_the_other_two() {
            let fam = family();

            // Leaving everyone unmatched answers every report the same way,
            // so no misreport changes anything (it gives up optimality).
            assert!(sp_check(&MechanismSpec::Null, &fam).unwrap().is_empty());

            // Serial dictatorship commits to later agents' plots while
            // serving earlier ones, so a later agent's marks cannot move
            // the outcome in its favor (it gives up individual
            // rationality: the first dictator parks agent 2 on v2 even
            // when agent 2 rejects v2).
            let sd = MechanismSpec::SerialDictatorship {
                order: vec![0, 1, 2, 3, 4],
            };
            assert!(sp_check(&sd, &fam).unwrap().is_empty());
            let inst = fam.instance("marks-020").unwrap();
            let choice = run_mechanism(&sd, inst).unwrap();
            assert_eq!(choice.plot_of(Agent(1)), Some(Plot(1)));
            assert!(!is_individually_rational(inst, &choice).unwrap());

            // Welfare maximization respects reports, and that is exactly
            // what makes it gameable: agent 2 can claim v2 is
            // unacceptable, pushing the welfare optimum to the outcome
            // that hands it v3.
            let violations = sp_check(&MechanismSpec::MaxWelfare, &fam).unwrap();
            assert_eq!(violations.len(), 63);
            let first = &violations[0];
            assert_eq!(first.truth, "marks-000");
            assert_eq!(first.report, "marks-020");
            assert_eq!(first.deviator, Agent(1));
            assert_eq!(first.truthful_utility, ExtendedValue::from_ratio(3, 10));
            assert_eq!(first.deviating_utility, ExtendedValue::from_int(1));
        }

        #[test]
        fn every_case_in_the_audit_passes() {
            let report = case_audit();
            let ids: Vec<&str> = report.cases.iter().map(|c| c.id).collect();
            assert_eq!(
                ids,
                [
                    "ir-excludes-unacceptable-plot",
                    "v1-holder-utility-floor",
                    "pair-on-edge-forces-v3",
                    "outsider-on-v2-beside-agent-1",
                    "outsider-on-v2-beside-agent-3"
                ]
            );
            for case in &report.cases {
                assert!(case.pass, "case {} failed: {}", case.id, case.detail);
            }
            assert!(report.all_pass());
        }

        #[test]
        fn witness_pairs_are_individually_rational_where_the_argument_needs_them() {
            let base = base_instance();
            let better =
                Allocation::from_pairs(5, &[(0, 1), (1, 0), (2, 2), (3, 3), (4, 4)]).unwrap();
            assert!(is_individually_rational(&base, &better).unwrap());
            let profile = utility_profile(&base, &better).unwrap();
            assert_eq!(profile[0], ExtendedValue::from_ratio(11, 10));
            assert_eq!(profile[1], ExtendedValue::from_ratio(1, 2));
        }

        #[test]
        fn marking_a_plot_poisons_only_that_assignment() {
            let (_, agent, inst) = &unacceptability_variants()[3];
            assert_eq!(*agent, Agent(1));
            let on_marked = Allocation::from_pairs(5, &[(1, 1)]).unwrap();
            assert!(utility(inst, &on_marked, *agent).unwrap().is_unacceptable());
            let on_other = Allocation::from_pairs(5, &[(1, 0)]).unwrap();
            assert_eq!(
                utility(inst, &on_other, *agent).unwrap(),
                ExtendedValue::from_ratio(3, 10)
            );
        }
    }
}

pub mod marriage {
    //! A two-sided matching market embedded in the land model.
    //!
    //! Four agents (men m1, m2 and women w1, w2) sit on a graph of four
    //! disjoint edges, so every agent is adjacent to at most one other.
    //! Plot values are all zero; preferences live entirely in the friend
    //! bonuses. Same-gender bonuses are -100 in both directions, which
    //! keeps same-gender pairs out of every individually rational
    //! allocation (a paired agent earns at most 2, nowhere near 100).
    //! Opposite-gender bonuses encode one of five reports per agent over
    //! its two potential partners: both ranked (2 over 1), or a truncated
    //! list dropping one or both partners as unacceptable.
    //!
    //! Utilities depend only on which man is adjacent to which woman, so
    //! allocations partition into indifference classes keyed by a
    //! [`Matching`]. The family over all 625 report profiles uses one
    //! canonical representative per efficient individually rational class
    //! as the candidate domain, which keeps the search space tiny without
    //! changing satisfiability.

    use crate::model::{Agent, Allocation, Instance, PlotGraph};
    use crate::space::{is_individually_rational, profile_dominates};
    use crate::value::ExtendedValue;
    use crate::verify::{Deviation, Family, FamilyInstance};

    /// One agent's report over its two opposite-gender partners, in the
    /// fixed partner order (for a man: w1 then w2; for a woman: m1 then
    /// m2). Digits 0..=4 in declaration order form the profile ids.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
    pub enum PartnerReport {
        /// Both acceptable, first preferred: bonuses (2, 1).
        PrefersFirst,
        /// Both acceptable, second preferred: bonuses (1, 2).
        PrefersSecond,
        /// Only the first is acceptable: bonuses (2, unacceptable).
        OnlyFirst,
        /// Only the second is acceptable: bonuses (unacceptable, 2).
        OnlySecond,
        /// Neither is acceptable.
        Neither,
    }

    impl PartnerReport {
        pub const ALL: [PartnerReport; 5] = [
            PartnerReport::PrefersFirst,
            PartnerReport::PrefersSecond,
            PartnerReport::OnlyFirst,
            PartnerReport::OnlySecond,
            PartnerReport::Neither,
        ];

        pub fn digit(self) -> usize {
            Self::ALL.iter().position(|&r| r == self).expect("listed")
        }

        pub fn from_digit(d: usize) -> Option<PartnerReport> {
            Self::ALL.get(d).copied()
        }

        /// Bonus toward the (first, second) partner.
        fn bonuses(self) -> (ExtendedValue, ExtendedValue) {
            let yes = |v| ExtendedValue::from_int(v);
            let no = ExtendedValue::Unacceptable;
            match self {
                PartnerReport::PrefersFirst => (yes(2), yes(1)),
                PartnerReport::PrefersSecond => (yes(1), yes(2)),
                PartnerReport::OnlyFirst => (yes(2), no),
                PartnerReport::OnlySecond => (no, yes(2)),
                PartnerReport::Neither => (no.clone(), no),
            }
        }

        /// Bonus toward a concrete partner index (0 = first, 1 = second).
        fn bonus_toward(self, partner: usize) -> ExtendedValue {
            let (first, second) = self.bonuses();
            if partner == 0 {
                first
            } else {
                second
            }
        }
    }

    /// Reports of m1, m2, w1, w2 in that order.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
    pub struct MarriageProfile {
        pub reports: [PartnerReport; 4],
    }

    impl MarriageProfile {
        pub fn new(reports: [PartnerReport; 4]) -> Self {
            MarriageProfile { reports }
        }

        pub fn from_digits(digits: [usize; 4]) -> Option<Self> {
            let mut reports = [PartnerReport::PrefersFirst; 4];
            for (slot, d) in reports.iter_mut().zip(digits) {
                *slot = PartnerReport::from_digit(d)?;
            }
            Some(MarriageProfile { reports })
        }

        /// Stable identifier, e.g. `p-0110`.
        pub fn id(&self) -> String {
            let digits: String = self.reports.iter().map(|r| r.digit().to_string()).collect();
            format!("p-{digits}")
        }

        pub fn parse_id(s: &str) -> Option<Self> {
            let digits = s.strip_prefix("p-")?;
            if digits.len() != 4 {
                return None;
            }
            let mut ds = [0usize; 4];
            for (slot, ch) in ds.iter_mut().zip(digits.chars()) {
                *slot = ch.to_digit(10)? as usize;
            }
            Self::from_digits(ds)
        }

        /// All 625 profiles in id order (last position varies fastest).
        pub fn all() -> Vec<MarriageProfile> {
            let mut out = Vec::with_capacity(625);
            for a in PartnerReport::ALL {
                for b in PartnerReport::ALL {
                    for c in PartnerReport::ALL {
                        for d in PartnerReport::ALL {
                            out.push(MarriageProfile::new([a, b, c, d]));
                        }
                    }
                }
            }
            out
        }

        fn with_report(mut self, position: usize, report: PartnerReport) -> Self {
            self.reports[position] = report;
            self
        }
    }

    /// Number of non-dummy agents and their conventional order.
    const CORE_AGENTS: usize = 4;

    fn is_man(agent: usize) -> bool {
        agent < 2
    }

    /// The two opposite-gender partner agent indices of `agent`, in report
    /// order (first, second).
    fn partners_of(agent: usize) -> [usize; 2] {
        if is_man(agent) {
            [2, 3]
        } else {
            [0, 1]
        }
    }

    /// Builds the instance for one report profile. With `with_dummies`,
    /// four additional agents with zero values and no bonuses are present;
    /// they never change any core agent's utility, which is what the
    /// class machinery's tests use them to demonstrate.
    pub fn instance(profile: MarriageProfile, with_dummies: bool) -> Instance {
        let mut labels: Vec<String> = ["m1", "m2", "w1", "w2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        if with_dummies {
            labels.extend((1..=4).map(|i| format!("d{i}")));
        }
        let n = labels.len();
        let plot_labels: Vec<String> = (1..=4)
            .flat_map(|e| [format!("e{e}a"), format!("e{e}b")])
            .collect();
        let graph = PlotGraph::new(plot_labels, &[(0, 1), (2, 3), (4, 5), (6, 7)])
            .expect("well-formed graph");
        let values = vec![vec![ExtendedValue::zero(); 8]; n];
        let mut bonuses: Vec<((usize, usize), ExtendedValue)> = vec![
            ((0, 1), ExtendedValue::from_int(-100)),
            ((1, 0), ExtendedValue::from_int(-100)),
            ((2, 3), ExtendedValue::from_int(-100)),
            ((3, 2), ExtendedValue::from_int(-100)),
        ];
        for agent in 0..CORE_AGENTS {
            let report = profile.reports[agent];
            for (k, partner) in partners_of(agent).into_iter().enumerate() {
                bonuses.push(((agent, partner), report.bonus_toward(k)));
            }
        }
        Instance::new(labels, graph, values, bonuses).expect("well-formed instance")
    }

    /// Which woman each man is adjacent to: `partner_of_man[i]` is 0 for
    /// w1, 1 for w2. Injective by construction of [`Matching::all`] and
    /// checked when derived from an allocation.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
    pub struct Matching {
        pub partner_of_man: [Option<usize>; 2],
    }

    impl Matching {
        /// All seven pairings in the documented order: the empty pairing,
        /// then by (m1 partner, m2 partner) with None first.
        pub fn all() -> [Matching; 7] {
            let m = |a, b| Matching { partner_of_man: [a, b] };
            [
                m(None, None),
                m(None, Some(0)),
                m(None, Some(1)),
                m(Some(0), None),
                m(Some(0), Some(1)),
                m(Some(1), None),
                m(Some(1), Some(0)),
            ]
        }

        /// (man agent index, woman agent index) pairs, men in order.
        pub fn pairs(&self) -> Vec<(usize, usize)> {
            self.partner_of_man
                .iter()
                .enumerate()
                .filter_map(|(man, w)| w.map(|w| (man, 2 + w)))
                .collect()
        }

        /// Core agents not in any pair, in index order.
        pub fn singles(&self) -> Vec<usize> {
            let paired: Vec<usize> = self.pairs().iter().flat_map(|&(a, b)| [a, b]).collect();
            (0..CORE_AGENTS).filter(|a| !paired.contains(a)).collect()
        }
    }

    /// The pairing an allocation realizes. Every plot neighbors exactly
    /// one other plot, so adjacency is a partial pairing of agents; the
    /// man-woman pairs of that pairing form the key.
    pub fn matching_of(inst: &Instance, alloc: &Allocation) -> Matching {
        let occupant = |plot| {
            inst.agents().find(|&a| alloc.plot_of(a) == Some(plot))
        };
        let mut partner_of_man = [None; 2];
        for man in 0..2 {
            let Some(plot) = alloc.plot_of(Agent(man)) else {
                continue;
            };
            let neighbor = crate::model::Plot(plot.0 ^ 1);
            if let Some(other) = occupant(neighbor) {
                if (2..CORE_AGENTS).contains(&other.0) {
                    partner_of_man[man] = Some(other.0 - 2);
                }
            }
        }
        let m = Matching { partner_of_man };
        if let [Some(a), Some(b)] = m.partner_of_man {
            assert_ne!(a, b, "two men adjacent to the same woman");
        }
        m
    }

    /// One indifference class of individually rational allocations: all
    /// members realize `matching` and share one utility profile.
    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct AllocationClass {
        pub matching: Matching,
        pub members: Vec<Allocation>,
    }

    /// Partitions the individually rational allocations of a marriage
    /// instance by their pairing. Classes appear in [`Matching::all`]
    /// order; members keep enumeration order. Panics if an individually
    /// rational allocation pairs a same-gender couple, which the -100
    /// bonuses rule out.
    pub fn ir_class_partition(inst: &Instance) -> Vec<AllocationClass> {
        let order = Matching::all();
        let mut classes: Vec<AllocationClass> = Vec::new();
        for alloc in crate::space::allocations(inst) {
            if !is_individually_rational(inst, &alloc).unwrap() {
                continue;
            }
            for man in 0..2 {
                if let Some(plot) = alloc.plot_of(Agent(man)) {
                    let neighbor = crate::model::Plot(plot.0 ^ 1);
                    let same_gender = inst
                        .agents()
                        .find(|&a| alloc.plot_of(a) == Some(neighbor))
                        .is_some_and(|a| a.0 < 2);
                    assert!(
                        !same_gender,
                        "individually rational allocation pairs two men: {}",
                        inst.format_allocation(&alloc)
                    );
                }
            }
            let key = matching_of(inst, &alloc);
            match classes.iter_mut().find(|c| c.matching == key) {
                Some(class) => class.members.push(alloc),
                None => classes.push(AllocationClass { matching: key, members: vec![alloc] }),
            }
        }
        classes.sort_by_key(|c| order.iter().position(|m| *m == c.matching).expect("valid"));
        classes
    }

    /// The utility profile every member of a pairing's class shares:
    /// paired agents earn their bonus toward their partner, everyone else
    /// earns zero.
    pub fn class_profile(
        profile: MarriageProfile,
        matching: Matching,
        agent_count: usize,
    ) -> Vec<ExtendedValue> {
        let mut out = vec![ExtendedValue::zero(); agent_count];
        for (man, woman) in matching.pairs() {
            let wi = woman - 2;
            out[man] = profile.reports[man].bonus_toward(wi);
            out[woman] = profile.reports[woman].bonus_toward(man);
        }
        out
    }

    /// The canonical member of a pairing's class: pairs take successive
    /// edges in man order (man on the `a` plot), then each single core
    /// agent sits alone on the next edge's `a` plot. Dummies stay
    /// unmatched.
    pub fn representative_allocation(matching: Matching, agent_count: usize) -> Allocation {
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut edge = 0usize;
        for (man, woman) in matching.pairs() {
            pairs.push((man, 2 * edge));
            pairs.push((woman, 2 * edge + 1));
            edge += 1;
        }
        for single in matching.singles() {
            pairs.push((single, 2 * edge));
            edge += 1;
        }
        Allocation::from_pairs(agent_count, &pairs).expect("four edges suffice")
    }

    /// A pairing is individually rational iff both directions of every
    /// pair are acceptable.
    pub fn ir_matchings(profile: MarriageProfile) -> Vec<Matching> {
        Matching::all()
            .into_iter()
            .filter(|m| {
                m.pairs().into_iter().all(|(man, woman)| {
                    let wi = woman - 2;
                    !profile.reports[man].bonus_toward(wi).is_unacceptable()
                        && !profile.reports[woman].bonus_toward(man).is_unacceptable()
                })
            })
            .collect()
    }

    /// Individually rational pairings not dominated by another one. Since
    /// utilities are constant within a class and dominating allocations of
    /// individually rational allocations are individually rational, these
    /// classes carry exactly the efficient individually rational
    /// allocations.
    pub fn po_ir_matchings(profile: MarriageProfile) -> Vec<Matching> {
        let candidates = ir_matchings(profile);
        let profiles: Vec<Vec<ExtendedValue>> = candidates
            .iter()
            .map(|m| class_profile(profile, *m, CORE_AGENTS))
            .collect();
        candidates
            .iter()
            .zip(&profiles)
            .filter(|(_, p)| !profiles.iter().any(|q| profile_dominates(q, p)))
            .map(|(m, _)| *m)
            .collect()
    }

    /// Solver domain for one profile: the canonical representative of each
    /// efficient individually rational class, in [`Matching::all`] order.
    pub fn class_domain(profile: MarriageProfile, agent_count: usize) -> Vec<Allocation> {
        po_ir_matchings(profile)
            .into_iter()
            .map(|m| representative_allocation(m, agent_count))
            .collect()
    }

    /// Which slice of the 625 report profiles a family covers.
    #[derive(Clone, Copy, Debug, PartialEq, Eq)]
    pub enum Scope {
        /// Every profile; 625 instances, 10000 deviation edges.
        Full,
        /// The crossed-preferences profile and each agent's truncation to
        /// its preferred partner: 16 profiles, 64 deviation edges. Already
        /// unsatisfiable on its own.
        TruncationGrid,
    }

    impl Scope {
        pub fn name(self) -> &'static str {
            match self {
                Scope::Full => "full",
                Scope::TruncationGrid => "truncation-grid",
            }
        }

        pub fn parse(s: &str) -> Option<Scope> {
            match s {
                "full" => Some(Scope::Full),
                "truncation-grid" => Some(Scope::TruncationGrid),
                _ => None,
            }
        }
    }

    /// Crossed preferences: each man's favorite woman favors the other
    /// man. Digits (m1, m2, w1, w2).
    pub const CROSSED_DIGITS: [usize; 4] = [0, 1, 1, 0];

    /// Per-agent truncation to a one-entry list holding only the partner
    /// preferred under [`CROSSED_DIGITS`].
    const TRUNCATED_DIGITS: [usize; 4] = [2, 3, 3, 2];

    fn scope_profiles(scope: Scope) -> Vec<MarriageProfile> {
        match scope {
            Scope::Full => MarriageProfile::all(),
            Scope::TruncationGrid => MarriageProfile::all()
                .into_iter()
                .filter(|p| {
                    p.reports
                        .iter()
                        .enumerate()
                        .all(|(i, r)| {
                            r.digit() == CROSSED_DIGITS[i] || r.digit() == TRUNCATED_DIGITS[i]
                        })
                })
                .collect(),
        }
    }

    /// The family over a scope plus per-instance class-representative
    /// domains, ready for
    /// [`crate::verify::impossibility_solve_with_domains`]. Deviations
    /// connect every ordered pair of in-scope profiles differing in
    /// exactly one agent's report.
    pub fn family(scope: Scope) -> (Family, Vec<Vec<Allocation>>) {
        let profiles = scope_profiles(scope);
        let mut instances = Vec::with_capacity(profiles.len());
        let mut domains = Vec::with_capacity(profiles.len());
        for p in &profiles {
            instances.push(FamilyInstance { id: p.id(), instance: instance(*p, false) });
            domains.push(class_domain(*p, CORE_AGENTS));
        }
        let mut deviations = Vec::new();
        for truth in &profiles {
            for position in 0..CORE_AGENTS {
                for report in PartnerReport::ALL {
                    if report == truth.reports[position] {
                        continue;
                    }
                    let deviated = truth.with_report(position, report);
                    if profiles.contains(&deviated) {
                        deviations.push(Deviation {
                            truth: truth.id(),
                            report: deviated.id(),
                            deviator: Agent(position),
                        });
                    }
                }
            }
        }
        (Family::new(instances, deviations), domains)
    }

}
