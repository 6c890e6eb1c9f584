//! Command-line front end: evaluate allocations, enumerate efficient
//! outcomes, run the reference mechanisms, check strategyproofness along a
//! family's deviation edges, and search whole families for a mechanism
//! table satisfying rationality, optimality, and strategyproofness at once.
//!
//! Every command prints a human-readable summary followed by exactly one
//! machine-readable JSON record on the final line of standard output. All
//! numbers are exact rationals; `--decimal` additionally renders
//! terminating values as decimals in the human-readable part. Exit status:
//! 0 on success, 1 on an error or a violated `--expect`, 2 on usage errors.

mod format;

use clap::{Parser, Subcommand, ValueEnum};
use format::{parse_allocation, parse_family, parse_instance, render_allocation, ParseError};
use landalloc::families::{marriage, plot_unacceptability};
use landalloc::mechanisms::{run_mechanism, MechanismError, MechanismSpec};
use landalloc::model::{Allocation, EvalError, Instance};
use landalloc::space::{
    is_individually_rational, is_pareto_optimal, po_ir_set, utility_profile, welfare,
};
use landalloc::value::{render_decimal, ExtendedValue};
use landalloc::verify::{
    impossibility_solve, impossibility_solve_with_domains, sp_check, Family, SolveOptions,
    Verdict, VerifyError,
};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "landalloc",
    version,
    about = "Land allocation with friend bonuses: evaluation, mechanisms, and mechanism-table search"
)]
struct Cli {
    /// Render terminating values as decimals in the human-readable output.
    #[arg(long, global = true)]
    decimal: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate an allocation on an instance: utilities, welfare, flags.
    Eval {
        /// Instance document (format landalloc/1).
        instance: PathBuf,
        /// Allocation literal, e.g. `1=v1,2=v2` or `empty`.
        allocation: String,
    },
    /// List the efficient individually rational allocations of an instance.
    PoIr {
        /// Instance document (format landalloc/1).
        instance: PathBuf,
    },
    /// Run a reference mechanism on an instance.
    Mech {
        mechanism: MechanismName,
        /// Instance document (format landalloc/1).
        instance: PathBuf,
        /// Dictator order as comma-separated agent labels
        /// (serial-dictatorship only; defaults to declaration order).
        #[arg(long)]
        order: Option<String>,
        /// Start allocation literal (ir-pareto-improve only; defaults to
        /// `empty`).
        #[arg(long)]
        start: Option<String>,
    },
    /// Run a mechanism on every instance of a family and report every
    /// profitable misreport along the family's deviation edges.
    SpCheck {
        mechanism: MechanismName,
        /// Family document (format landalloc-family/1).
        family: PathBuf,
        /// Dictator order (serial-dictatorship only).
        #[arg(long)]
        order: Option<String>,
        /// Start allocation literal (ir-pareto-improve only).
        #[arg(long)]
        start: Option<String>,
    },
    /// Decide whether a family admits a mechanism table that is
    /// individually rational, Pareto optimal, and strategyproof.
    Verify {
        /// `thm1`, `thm2`, or a path to a family document.
        target: String,
        /// Bundled sub-family. thm1: `grid` (default), `single-flips`,
        /// `minimal-pair`. thm2: `full` (default), `truncation-grid`.
        #[arg(long)]
        subfamily: Option<String>,
        /// Exit nonzero unless the verdict matches.
        #[arg(long, value_enum)]
        expect: Option<Expectation>,
        /// Drop the individual-rationality restriction on candidate
        /// domains (not available for thm2).
        #[arg(long)]
        allow_irrational: bool,
        /// Drop the Pareto-optimality restriction on candidate domains
        /// (not available for thm2).
        #[arg(long)]
        allow_dominated: bool,
    },
    /// Write a bundled family (or the canonical form of a family document)
    /// to a family document file.
    Export {
        /// `thm1`, `thm2`, or a path to a family document.
        target: String,
        /// Output path for the document.
        output: PathBuf,
        /// Bundled sub-family (same names as `verify`).
        #[arg(long)]
        subfamily: Option<String>,
    },
    /// Re-check the intermediate facts behind a bundled verdict, one
    /// exhaustively verified case at a time.
    Cases {
        /// Only `thm1` carries a case audit.
        target: String,
        /// Exit nonzero unless every case passes.
        #[arg(long, value_enum)]
        expect: Option<PassExpectation>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MechanismName {
    Null,
    SerialDictatorship,
    IrParetoImprove,
    MaxWelfare,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Expectation {
    Sat,
    Unsat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PassExpectation {
    Pass,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    let decimal = cli.decimal;
    match cli.command {
        Command::Eval {
            instance,
            allocation,
        } => cmd_eval(&instance, &allocation, decimal),
        Command::PoIr { instance } => cmd_po_ir(&instance, decimal),
        Command::Mech {
            mechanism,
            instance,
            order,
            start,
        } => cmd_mech(mechanism, &instance, order.as_deref(), start.as_deref(), decimal),
        Command::SpCheck {
            mechanism,
            family,
            order,
            start,
        } => cmd_sp_check(mechanism, &family, order.as_deref(), start.as_deref(), decimal),
        Command::Verify {
            target,
            subfamily,
            expect,
            allow_irrational,
            allow_dominated,
        } => cmd_verify(
            &target,
            subfamily.as_deref(),
            expect,
            allow_irrational,
            allow_dominated,
            decimal,
        ),
        Command::Export {
            target,
            output,
            subfamily,
        } => cmd_export(&target, subfamily.as_deref(), &output),
        Command::Cases { target, expect } => cmd_cases(&target, expect),
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    parse_instance(&read_file(path)?).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn load_family(path: &Path) -> Result<Family, CliError> {
    parse_family(&read_file(path)?).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn literal(inst: &Instance, text: &str, what: &str) -> Result<Allocation, CliError> {
    parse_allocation(inst, text).map_err(|source| CliError::Parse {
        path: what.to_string(),
        source,
    })
}

/// Human-readable value: exact fraction, or a terminating decimal under
/// `--decimal` when one exists.
fn show(v: &ExtendedValue, decimal: bool) -> String {
    if decimal {
        if let Some(d) = v.as_finite().and_then(render_decimal) {
            return d;
        }
    }
    v.to_string()
}

/// Machine-readable value: always the exact form.
fn value_json(v: &ExtendedValue) -> Value {
    Value::String(v.to_string())
}

fn utilities_json(inst: &Instance, profile: &[ExtendedValue]) -> Value {
    let mut map = Map::new();
    for agent in inst.agents() {
        map.insert(
            inst.agent_label(agent).to_string(),
            value_json(&profile[agent.0]),
        );
    }
    Value::Object(map)
}

fn print_record(record: &Value) {
    println!("{record}");
}

fn cmd_eval(path: &Path, allocation: &str, decimal: bool) -> Result<ExitCode, CliError> {
    let inst = load_instance(path)?;
    let alloc = literal(&inst, allocation, "allocation argument")?;
    let profile = utility_profile(&inst, &alloc)?;
    let total = welfare(&inst, &alloc)?;
    let rational = is_individually_rational(&inst, &alloc)?;
    let optimal = is_pareto_optimal(&inst, &alloc)?;

    println!("allocation: {}", inst.format_allocation(&alloc));
    println!("utilities:");
    for agent in inst.agents() {
        println!(
            "  {} = {}",
            inst.agent_label(agent),
            show(&profile[agent.0], decimal)
        );
    }
    println!("welfare: {}", show(&total, decimal));
    println!("individually rational: {rational}");
    println!("pareto optimal: {optimal}");
    print_record(&json!({
        "command": "eval",
        "allocation": render_allocation(&inst, &alloc),
        "utilities": utilities_json(&inst, &profile),
        "welfare": value_json(&total),
        "individually_rational": rational,
        "pareto_optimal": optimal,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_po_ir(path: &Path, decimal: bool) -> Result<ExitCode, CliError> {
    let inst = load_instance(path)?;
    let set = po_ir_set(&inst);
    println!(
        "{} efficient individually rational allocation(s):",
        set.len()
    );
    let mut entries = Vec::new();
    for alloc in &set {
        let profile = utility_profile(&inst, alloc)?;
        let shown: Vec<String> = profile.iter().map(|v| show(v, decimal)).collect();
        println!(
            "  {} -> ({})",
            inst.format_allocation(alloc),
            shown.join(", ")
        );
        entries.push(json!({
            "allocation": render_allocation(&inst, alloc),
            "utilities": utilities_json(&inst, &profile),
        }));
    }
    print_record(&json!({
        "command": "po-ir",
        "count": set.len(),
        "entries": entries,
    }));
    Ok(ExitCode::SUCCESS)
}

fn parse_order(inst: &Instance, text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|label| {
            let label = label.trim();
            inst.agent_by_label(label)
                .map(|a| a.0)
                .ok_or_else(|| CliError::Usage(format!("--order names unknown agent `{label}`")))
        })
        .collect()
}

fn build_spec(
    name: MechanismName,
    inst: &Instance,
    order: Option<&str>,
    start: Option<&str>,
) -> Result<MechanismSpec, CliError> {
    if order.is_some() && name != MechanismName::SerialDictatorship {
        return Err(CliError::Usage(
            "--order only applies to serial-dictatorship".into(),
        ));
    }
    if start.is_some() && name != MechanismName::IrParetoImprove {
        return Err(CliError::Usage(
            "--start only applies to ir-pareto-improve".into(),
        ));
    }
    Ok(match name {
        MechanismName::Null => MechanismSpec::Null,
        MechanismName::MaxWelfare => MechanismSpec::MaxWelfare,
        MechanismName::SerialDictatorship => {
            let order = match order {
                Some(text) => parse_order(inst, text)?,
                None => (0..inst.agent_count()).collect(),
            };
            MechanismSpec::SerialDictatorship { order }
        }
        MechanismName::IrParetoImprove => {
            let start = match start {
                Some(text) => literal(inst, text, "--start argument")?,
                None => Allocation::empty(inst.agent_count()),
            };
            MechanismSpec::IrParetoImprove { start }
        }
    })
}

fn mechanism_label(name: MechanismName) -> &'static str {
    match name {
        MechanismName::Null => "null",
        MechanismName::SerialDictatorship => "serial-dictatorship",
        MechanismName::IrParetoImprove => "ir-pareto-improve",
        MechanismName::MaxWelfare => "max-welfare",
    }
}

fn cmd_mech(
    name: MechanismName,
    path: &Path,
    order: Option<&str>,
    start: Option<&str>,
    decimal: bool,
) -> Result<ExitCode, CliError> {
    let inst = load_instance(path)?;
    let spec = build_spec(name, &inst, order, start)?;
    let alloc = run_mechanism(&spec, &inst)?;
    let profile = utility_profile(&inst, &alloc)?;
    let rational = is_individually_rational(&inst, &alloc)?;
    let optimal = is_pareto_optimal(&inst, &alloc)?;

    println!("mechanism: {}", mechanism_label(name));
    println!("allocation: {}", inst.format_allocation(&alloc));
    println!("utilities:");
    for agent in inst.agents() {
        println!(
            "  {} = {}",
            inst.agent_label(agent),
            show(&profile[agent.0], decimal)
        );
    }
    println!("individually rational: {rational}");
    println!("pareto optimal: {optimal}");
    print_record(&json!({
        "command": "mech",
        "mechanism": mechanism_label(name),
        "allocation": render_allocation(&inst, &alloc),
        "utilities": utilities_json(&inst, &profile),
        "individually_rational": rational,
        "pareto_optimal": optimal,
    }));
    Ok(ExitCode::SUCCESS)
}

fn cmd_sp_check(
    name: MechanismName,
    path: &Path,
    order: Option<&str>,
    start: Option<&str>,
    decimal: bool,
) -> Result<ExitCode, CliError> {
    let fam = load_family(path)?;
    let Some(first) = fam.instances.first() else {
        return Err(CliError::Usage(
            "the family declares no instances, so there is nothing to check".into(),
        ));
    };
    let spec = build_spec(name, &first.instance, order, start)?;
    let violations = sp_check(&spec, &fam)?;

    println!(
        "mechanism {} on {} instance(s), {} deviation edge(s):",
        mechanism_label(name),
        fam.instances.len(),
        fam.deviations.len()
    );
    let mut records = Vec::new();
    for v in &violations {
        let truth_inst = fam.instance(&v.truth).expect("audited family");
        let deviator = truth_inst.agent_label(v.deviator);
        println!(
            "  agent {} profits by reporting `{}` when the truth is `{}`: {} -> {}",
            deviator,
            v.report,
            v.truth,
            show(&v.truthful_utility, decimal),
            show(&v.deviating_utility, decimal)
        );
        records.push(json!({
            "truth": v.truth,
            "report": v.report,
            "deviator": deviator,
            "truthful_utility": value_json(&v.truthful_utility),
            "deviating_utility": value_json(&v.deviating_utility),
        }));
    }
    if violations.is_empty() {
        println!("  no profitable deviation exists on this family");
    } else {
        println!("  {} profitable deviation(s) found", violations.len());
    }
    print_record(&json!({
        "command": "sp-check",
        "mechanism": mechanism_label(name),
        "instances": fam.instances.len(),
        "deviations": fam.deviations.len(),
        "violations": records,
        "count": violations.len(),
    }));
    Ok(ExitCode::SUCCESS)
}

/// What a `verify` target resolved to: a family, optional precomputed
/// domains (class representatives), and naming for the output record.
struct VerifyTarget {
    family: Family,
    domains: Option<Vec<Vec<Allocation>>>,
    target: String,
    subfamily: Option<String>,
}

fn resolve_verify_target(
    target: &str,
    subfamily: Option<&str>,
    relaxed: bool,
) -> Result<VerifyTarget, CliError> {
    match target {
        "thm1" => {
            let name = subfamily.unwrap_or("grid");
            let family = match name {
                "grid" => plot_unacceptability::family(),
                "single-flips" => plot_unacceptability::single_flip_family(),
                "minimal-pair" => plot_unacceptability::minimal_pair_family(),
                other => {
                    return Err(CliError::Usage(format!(
                        "unknown thm1 sub-family `{other}`; available: grid, single-flips, minimal-pair"
                    )))
                }
            };
            Ok(VerifyTarget {
                family,
                domains: None,
                target: "thm1".into(),
                subfamily: Some(name.into()),
            })
        }
        "thm2" => {
            if relaxed {
                return Err(CliError::Usage(
                    "thm2 uses class-level domains that already encode rationality and optimality; the relaxation flags do not apply".into(),
                ));
            }
            let name = subfamily.unwrap_or("full");
            let scope = marriage::Scope::parse(name).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown thm2 sub-family `{other}`; available: full, truncation-grid",
                    other = name
                ))
            })?;
            let (family, domains) = marriage::family(scope);
            Ok(VerifyTarget {
                family,
                domains: Some(domains),
                target: "thm2".into(),
                subfamily: Some(name.into()),
            })
        }
        path => {
            if subfamily.is_some() {
                return Err(CliError::Usage(
                    "--subfamily only applies to the bundled targets thm1 and thm2".into(),
                ));
            }
            Ok(VerifyTarget {
                family: load_family(Path::new(path))?,
                domains: None,
                target: path.to_string(),
                subfamily: None,
            })
        }
    }
}

fn cmd_verify(
    target: &str,
    subfamily: Option<&str>,
    expect: Option<Expectation>,
    allow_irrational: bool,
    allow_dominated: bool,
    decimal: bool,
) -> Result<ExitCode, CliError> {
    let _ = decimal;
    let relaxed = allow_irrational || allow_dominated;
    let resolved = resolve_verify_target(target, subfamily, relaxed)?;
    let opts = SolveOptions {
        require_ir: !allow_irrational,
        require_po: !allow_dominated,
    };

    let mut requirements: Vec<&str> = Vec::new();
    if opts.require_ir {
        requirements.push("individually rational");
    }
    if opts.require_po {
        requirements.push("pareto optimal");
    }
    requirements.push("strategyproof");

    match &resolved.subfamily {
        Some(name) => println!(
            "family: {} ({name}) — {} instance(s), {} deviation edge(s)",
            resolved.target,
            resolved.family.instances.len(),
            resolved.family.deviations.len()
        ),
        None => println!(
            "family: {} — {} instance(s), {} deviation edge(s)",
            resolved.target,
            resolved.family.instances.len(),
            resolved.family.deviations.len()
        ),
    }
    println!(
        "searching for a mechanism table that is {}",
        requirements.join(" + ")
    );

    let started = Instant::now();
    let verdict = match resolved.domains {
        Some(domains) => impossibility_solve_with_domains(&resolved.family, domains)?,
        None => impossibility_solve(&resolved.family, opts)?,
    };
    let elapsed = started.elapsed();

    let stats = verdict.stats();
    let domain_values_total: usize = stats.domain_sizes.values().sum();
    match &verdict {
        Verdict::Unsat { .. } => {
            println!("verdict: UNSAT — no such mechanism table exists");
        }
        Verdict::Sat { table, .. } => {
            println!("verdict: SAT — a mechanism table exists:");
            for fi in &resolved.family.instances {
                println!(
                    "  {}: {}",
                    fi.id,
                    fi.instance.format_allocation(&table.choices[&fi.id])
                );
            }
        }
    }
    println!(
        "search: {} node(s) expanded, {} domain value(s) pruned by propagation, {} candidate value(s) across all domains",
        stats.nodes_expanded, stats.propagation_prunes, domain_values_total
    );
    if let Some(id) = &stats.empty_domain {
        println!("propagation emptied the domain of `{id}` before any search");
    }
    println!("elapsed: {:.3}s", elapsed.as_secs_f64());

    let status = if verdict.is_sat() { "sat" } else { "unsat" };
    let expectation_met = expect.map(|e| match e {
        Expectation::Sat => verdict.is_sat(),
        Expectation::Unsat => !verdict.is_sat(),
    });
    if let Some(met) = expectation_met {
        let expected = match expect.expect("checked") {
            Expectation::Sat => "sat",
            Expectation::Unsat => "unsat",
        };
        println!(
            "expectation {expected}: {}",
            if met { "satisfied" } else { "VIOLATED" }
        );
    }

    let mut record = Map::new();
    record.insert("command".into(), json!("verify"));
    record.insert("target".into(), json!(resolved.target));
    if let Some(name) = &resolved.subfamily {
        record.insert("subfamily".into(), json!(name));
    }
    record.insert(
        "requirements".into(),
        json!({
            "individually_rational": opts.require_ir,
            "pareto_optimal": opts.require_po,
            "strategyproof": true,
        }),
    );
    record.insert("instances".into(), json!(resolved.family.instances.len()));
    record.insert("deviations".into(), json!(resolved.family.deviations.len()));
    record.insert("status".into(), json!(status));
    record.insert("nodes_expanded".into(), json!(stats.nodes_expanded));
    record.insert(
        "propagation_prunes".into(),
        json!(stats.propagation_prunes),
    );
    record.insert("domain_values_total".into(), json!(domain_values_total));
    if let Some(id) = &stats.empty_domain {
        record.insert("empty_domain".into(), json!(id));
    }
    if let Verdict::Sat { table, .. } = &verdict {
        let mut choices = Map::new();
        for fi in &resolved.family.instances {
            choices.insert(
                fi.id.clone(),
                json!(render_allocation(&fi.instance, &table.choices[&fi.id])),
            );
        }
        record.insert("table".into(), Value::Object(choices));
    }
    if let Some(met) = expectation_met {
        record.insert(
            "expect".into(),
            json!(match expect.expect("checked") {
                Expectation::Sat => "sat",
                Expectation::Unsat => "unsat",
            }),
        );
        record.insert("expectation_met".into(), json!(met));
    }
    print_record(&Value::Object(record));

    Ok(match expectation_met {
        Some(false) => ExitCode::FAILURE,
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_export(
    target: &str,
    subfamily: Option<&str>,
    output: &Path,
) -> Result<ExitCode, CliError> {
    let resolved = resolve_verify_target(target, subfamily, false)?;
    let text = format::serialize_family(&resolved.family);
    std::fs::write(output, &text).map_err(|source| CliError::Io {
        path: output.display().to_string(),
        source,
    })?;
    println!(
        "wrote {} instance(s), {} deviation edge(s) to {}",
        resolved.family.instances.len(),
        resolved.family.deviations.len(),
        output.display()
    );
    let mut record = Map::new();
    record.insert("command".into(), json!("export"));
    record.insert("target".into(), json!(resolved.target));
    if let Some(name) = &resolved.subfamily {
        record.insert("subfamily".into(), json!(name));
    }
    record.insert("instances".into(), json!(resolved.family.instances.len()));
    record.insert("deviations".into(), json!(resolved.family.deviations.len()));
    record.insert("output".into(), json!(output.display().to_string()));
    print_record(&Value::Object(record));
    Ok(ExitCode::SUCCESS)
}

fn cmd_cases(target: &str, expect: Option<PassExpectation>) -> Result<ExitCode, CliError> {
    if target != "thm1" {
        return Err(CliError::Usage(format!(
            "no case audit is bundled for `{target}`; available: thm1"
        )));
    }
    let report = plot_unacceptability::case_audit();
    let mut cases = Vec::new();
    for case in &report.cases {
        let tag = if case.pass { "pass" } else { "FAIL" };
        println!("[{tag}] {}: {}", case.id, case.detail);
        cases.push(json!({
            "id": case.id,
            "pass": case.pass,
            "detail": case.detail,
        }));
    }
    let all_pass = report.all_pass();
    println!(
        "{} case(s) checked, {}",
        report.cases.len(),
        if all_pass {
            "all pass"
        } else {
            "some FAILED"
        }
    );

    let mut record = Map::new();
    record.insert("command".into(), json!("cases"));
    record.insert("target".into(), json!("thm1"));
    record.insert("cases".into(), json!(cases));
    record.insert("all_pass".into(), json!(all_pass));
    if expect.is_some() {
        record.insert("expect".into(), json!("pass"));
        record.insert("expectation_met".into(), json!(all_pass));
    }
    print_record(&Value::Object(record));

    Ok(if expect.is_some() && !all_pass {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}
