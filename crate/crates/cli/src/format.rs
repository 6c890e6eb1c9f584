//! Line-oriented text formats for instances, deviation families, and
//! allocation literals.
//!
//! An instance document begins with the versioned header `format
//! landalloc/1` and then mixes five directives:
//!
//! ```text
//! format landalloc/1
//! # agents 1 and 2 compete for two adjacent plots
//! plot v1
//! plot v2
//! edge v1 v2
//! agent 1
//! agent 2
//! value 1 v1 0.3
//! value 1 v2 unacceptable
//! friend 1 2 1
//! ```
//!
//! A family document begins with `format landalloc-family/1`, wraps
//! instance bodies in `begin-instance <id>` / `end-instance` blocks, and
//! links them with `deviation <truth-id> <report-id> <agent-label>` lines.
//!
//! Shared rules: `#` starts a comment that runs to the end of the line;
//! labels and ids must be declared before they are referenced; declaring a
//! label twice or stating the same value, bonus, or edge twice is an
//! error; omitted values and bonuses are zero. Numbers are exact: integers,
//! fractions such as `3/10`, decimals such as `0.3`, or the keyword
//! `unacceptable`. Errors carry a line number and one of the stable codes
//! `bad-header`, `syntax`, `unknown-directive`, `malformed-rational`,
//! `duplicate-id`, `undeclared-reference`.
//!
//! Allocation literals, used by command arguments, are `empty` or
//! comma-separated `agent=plot` pairs such as `1=v1,2=v2`.

use landalloc::model::{Allocation, Instance, Plot, PlotGraph};
use landalloc::value::ExtendedValue;
use landalloc::verify::{Deviation, Family, FamilyInstance};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

pub const INSTANCE_HEADER: &str = "landalloc/1";
pub const FAMILY_HEADER: &str = "landalloc-family/1";

/// A parse failure: a stable error code plus the 1-based line it happened on.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: [{code}] {message}", code = kind.code())]
pub struct ParseError {
    pub line: usize,
    pub kind: ErrorKind,
    pub message: String,
}

/// Stable machine-checkable category of a [`ParseError`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Missing or wrong `format ...` header.
    BadHeader,
    /// A known directive with the wrong shape.
    Syntax,
    /// A directive word this format does not define.
    UnknownDirective,
    /// A value that is not an exact rational or `unacceptable`.
    MalformedRational,
    /// A label, id, or entry declared twice.
    DuplicateId,
    /// A reference to a label or id that was never declared.
    UndeclaredReference,
}

impl ErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            ErrorKind::BadHeader => "bad-header",
            ErrorKind::Syntax => "syntax",
            ErrorKind::UnknownDirective => "unknown-directive",
            ErrorKind::MalformedRational => "malformed-rational",
            ErrorKind::DuplicateId => "duplicate-id",
            ErrorKind::UndeclaredReference => "undeclared-reference",
        }
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

fn err(line: usize, kind: ErrorKind, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        kind,
        message: message.into(),
    }
}

/// One meaningful line: its 1-based number and whitespace-split tokens.
struct Line<'a> {
    number: usize,
    tokens: Vec<&'a str>,
}

fn meaningful_lines(text: &str) -> Vec<Line<'_>> {
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let content = raw.split('#').next().unwrap_or("");
            let tokens: Vec<&str> = content.split_whitespace().collect();
            if tokens.is_empty() {
                None
            } else {
                Some(Line {
                    number: i + 1,
                    tokens,
                })
            }
        })
        .collect()
}

fn expect_header(lines: &[Line<'_>], expected: &'static str) -> Result<(), ParseError> {
    match lines.first() {
        Some(line) if line.tokens == ["format", expected] => Ok(()),
        Some(line) => Err(err(
            line.number,
            ErrorKind::BadHeader,
            format!(
                "expected `format {expected}` as the first directive, found `{}`",
                line.tokens.join(" ")
            ),
        )),
        None => Err(err(
            1,
            ErrorKind::BadHeader,
            format!("empty document; expected `format {expected}`"),
        )),
    }
}

/// Accumulates instance directives and finishes into an [`Instance`].
#[derive(Default)]
struct InstanceBuilder {
    plots: Vec<String>,
    edges: Vec<(usize, usize)>,
    agents: Vec<String>,
    values: BTreeMap<(usize, usize), ExtendedValue>,
    friends: BTreeMap<(usize, usize), ExtendedValue>,
}

impl InstanceBuilder {
    fn plot_index(&self, label: &str, line: usize) -> Result<usize, ParseError> {
        self.plots.iter().position(|p| p == label).ok_or_else(|| {
            err(
                line,
                ErrorKind::UndeclaredReference,
                format!("plot `{label}` is not declared"),
            )
        })
    }

    fn agent_index(&self, label: &str, line: usize) -> Result<usize, ParseError> {
        self.agents.iter().position(|a| a == label).ok_or_else(|| {
            err(
                line,
                ErrorKind::UndeclaredReference,
                format!("agent `{label}` is not declared"),
            )
        })
    }

    fn parse_value(&self, text: &str, line: usize) -> Result<ExtendedValue, ParseError> {
        ExtendedValue::from_str(text).map_err(|e| {
            err(line, ErrorKind::MalformedRational, e.to_string())
        })
    }

    /// Applies one directive line. Returns false if the directive word is
    /// not an instance directive, leaving the caller to handle it.
    fn apply(&mut self, line: &Line<'_>) -> Result<bool, ParseError> {
        let n = line.number;
        let t = &line.tokens;
        match t[0] {
            "plot" => {
                let [_, label] = t[..] else {
                    return Err(err(n, ErrorKind::Syntax, "usage: plot <label>"));
                };
                if self.plots.iter().any(|p| p == label) {
                    return Err(err(
                        n,
                        ErrorKind::DuplicateId,
                        format!("plot `{label}` is already declared"),
                    ));
                }
                self.plots.push(label.to_string());
            }
            "agent" => {
                let [_, label] = t[..] else {
                    return Err(err(n, ErrorKind::Syntax, "usage: agent <label>"));
                };
                if self.agents.iter().any(|a| a == label) {
                    return Err(err(
                        n,
                        ErrorKind::DuplicateId,
                        format!("agent `{label}` is already declared"),
                    ));
                }
                self.agents.push(label.to_string());
            }
            "edge" => {
                let [_, a, b] = t[..] else {
                    return Err(err(n, ErrorKind::Syntax, "usage: edge <plot> <plot>"));
                };
                let a = self.plot_index(a, n)?;
                let b = self.plot_index(b, n)?;
                if a == b {
                    return Err(err(n, ErrorKind::Syntax, "edge endpoints must differ"));
                }
                let key = (a.min(b), a.max(b));
                if self.edges.contains(&key) {
                    return Err(err(
                        n,
                        ErrorKind::DuplicateId,
                        format!(
                            "edge between `{}` and `{}` is already declared",
                            self.plots[key.0], self.plots[key.1]
                        ),
                    ));
                }
                self.edges.push(key);
            }
            "value" => {
                let [_, agent, plot, value] = t[..] else {
                    return Err(err(
                        n,
                        ErrorKind::Syntax,
                        "usage: value <agent> <plot> <rational|unacceptable>",
                    ));
                };
                let a = self.agent_index(agent, n)?;
                let p = self.plot_index(plot, n)?;
                let v = self.parse_value(value, n)?;
                if self.values.insert((a, p), v).is_some() {
                    return Err(err(
                        n,
                        ErrorKind::DuplicateId,
                        format!("value of plot `{plot}` for agent `{agent}` is already stated"),
                    ));
                }
            }
            "friend" => {
                let [_, from, to, value] = t[..] else {
                    return Err(err(
                        n,
                        ErrorKind::Syntax,
                        "usage: friend <agent> <agent> <rational|unacceptable>",
                    ));
                };
                let f = self.agent_index(from, n)?;
                let g = self.agent_index(to, n)?;
                if f == g {
                    return Err(err(n, ErrorKind::Syntax, "friend endpoints must differ"));
                }
                let v = self.parse_value(value, n)?;
                if self.friends.insert((f, g), v).is_some() {
                    return Err(err(
                        n,
                        ErrorKind::DuplicateId,
                        format!("friend bonus `{from}` -> `{to}` is already stated"),
                    ));
                }
            }
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn finish(self, line: usize) -> Result<Instance, ParseError> {
        let graph = PlotGraph::new(self.plots, &self.edges)
            .map_err(|e| err(line, ErrorKind::Syntax, e.to_string()))?;
        let mut rows = vec![vec![ExtendedValue::zero(); graph.plot_count()]; self.agents.len()];
        for ((a, p), v) in self.values {
            rows[a][p] = v;
        }
        Instance::new(self.agents, graph, rows, self.friends)
            .map_err(|e| err(line, ErrorKind::Syntax, e.to_string()))
    }
}

/// Parses an instance document.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let lines = meaningful_lines(text);
    expect_header(&lines, INSTANCE_HEADER)?;
    let mut builder = InstanceBuilder::default();
    let mut last_line = lines.first().map(|l| l.number).unwrap_or(1);
    for line in &lines[1..] {
        last_line = line.number;
        if !builder.apply(line)? {
            return Err(err(
                line.number,
                ErrorKind::UnknownDirective,
                format!("`{}` is not an instance directive", line.tokens[0]),
            ));
        }
    }
    builder.finish(last_line)
}

/// Parses a family document.
pub fn parse_family(text: &str) -> Result<Family, ParseError> {
    let lines = meaningful_lines(text);
    expect_header(&lines, FAMILY_HEADER)?;
    let mut instances: Vec<FamilyInstance> = Vec::new();
    let mut ids = BTreeSet::new();
    let mut deviations = Vec::new();
    let mut open: Option<(String, InstanceBuilder, usize)> = None;
    let mut last_line = lines.first().map(|l| l.number).unwrap_or(1);

    for line in &lines[1..] {
        last_line = line.number;
        let n = line.number;
        let t = &line.tokens;
        match t[0] {
            "begin-instance" => {
                if let Some((id, _, _)) = &open {
                    return Err(err(
                        n,
                        ErrorKind::Syntax,
                        format!("instance `{id}` is still open; `end-instance` must come first"),
                    ));
                }
                let [_, id] = t[..] else {
                    return Err(err(n, ErrorKind::Syntax, "usage: begin-instance <id>"));
                };
                if !ids.insert(id.to_string()) {
                    return Err(err(
                        n,
                        ErrorKind::DuplicateId,
                        format!("instance `{id}` is already declared"),
                    ));
                }
                open = Some((id.to_string(), InstanceBuilder::default(), n));
            }
            "end-instance" => {
                let [_] = t[..] else {
                    return Err(err(n, ErrorKind::Syntax, "usage: end-instance"));
                };
                let Some((id, builder, _)) = open.take() else {
                    return Err(err(n, ErrorKind::Syntax, "no instance block is open"));
                };
                instances.push(FamilyInstance {
                    id,
                    instance: builder.finish(n)?,
                });
            }
            "deviation" => {
                if let Some((id, _, _)) = &open {
                    return Err(err(
                        n,
                        ErrorKind::Syntax,
                        format!("`deviation` is not allowed inside instance `{id}`"),
                    ));
                }
                let [_, truth, report, agent] = t[..] else {
                    return Err(err(
                        n,
                        ErrorKind::Syntax,
                        "usage: deviation <truth-id> <report-id> <agent-label>",
                    ));
                };
                let resolve = |id: &str| {
                    instances
                        .iter()
                        .position(|fi| fi.id == id)
                        .ok_or_else(|| {
                            err(
                                n,
                                ErrorKind::UndeclaredReference,
                                format!("instance `{id}` is not declared"),
                            )
                        })
                };
                let truth_pos = resolve(truth)?;
                resolve(report)?;
                let deviator = instances[truth_pos]
                    .instance
                    .agent_by_label(agent)
                    .ok_or_else(|| {
                        err(
                            n,
                            ErrorKind::UndeclaredReference,
                            format!("agent `{agent}` is not declared in instance `{truth}`"),
                        )
                    })?;
                deviations.push(Deviation {
                    truth: truth.to_string(),
                    report: report.to_string(),
                    deviator,
                });
            }
            word => match &mut open {
                Some((_, builder, _)) => {
                    if !builder.apply(line)? {
                        return Err(err(
                            n,
                            ErrorKind::UnknownDirective,
                            format!("`{word}` is not an instance directive"),
                        ));
                    }
                }
                None => {
                    return Err(err(
                        n,
                        ErrorKind::UnknownDirective,
                        format!("`{word}` is not a family directive"),
                    ));
                }
            },
        }
    }
    if let Some((id, _, begun)) = open {
        return Err(err(
            begun.max(last_line),
            ErrorKind::Syntax,
            format!("instance `{id}` is never closed with `end-instance`"),
        ));
    }
    Ok(Family::new(instances, deviations))
}

/// Renders an instance as a document that [`parse_instance`] reads back to
/// an equal value. Zero values and bonuses are omitted.
#[cfg(test)]
pub fn serialize_instance(inst: &Instance) -> String {
    let mut out = format!("format {INSTANCE_HEADER}\n");
    serialize_instance_body(inst, &mut out);
    out
}

fn serialize_instance_body(inst: &Instance, out: &mut String) {
    for label in inst.graph().labels() {
        out.push_str(&format!("plot {label}\n"));
    }
    for (a, b) in inst.graph().edges() {
        out.push_str(&format!(
            "edge {} {}\n",
            inst.graph().label(a),
            inst.graph().label(b)
        ));
    }
    for label in inst.agent_labels() {
        out.push_str(&format!("agent {label}\n"));
    }
    for agent in inst.agents() {
        for plot in 0..inst.plot_count() {
            let value = inst.plot_value(agent, Plot(plot));
            if !value.is_zero() {
                out.push_str(&format!(
                    "value {} {} {}\n",
                    inst.agent_label(agent),
                    inst.graph().label(Plot(plot)),
                    value
                ));
            }
        }
    }
    for ((from, to), value) in inst.friend_bonuses() {
        out.push_str(&format!(
            "friend {} {} {}\n",
            inst.agent_label(from),
            inst.agent_label(to),
            value
        ));
    }
}

/// Renders a family as a document that [`parse_family`] reads back to an
/// equal value.
pub fn serialize_family(fam: &Family) -> String {
    let mut out = format!("format {FAMILY_HEADER}\n");
    for fi in &fam.instances {
        out.push_str(&format!("begin-instance {}\n", fi.id));
        serialize_instance_body(&fi.instance, &mut out);
        out.push_str("end-instance\n");
    }
    for dev in &fam.deviations {
        let truth = fam
            .instance(&dev.truth)
            .expect("families serialize only with valid deviations");
        out.push_str(&format!(
            "deviation {} {} {}\n",
            dev.truth,
            dev.report,
            truth.agent_label(dev.deviator)
        ));
    }
    out
}

/// Parses an allocation literal (`empty` or `1=v1,2=v2`) against an
/// instance's labels.
pub fn parse_allocation(inst: &Instance, text: &str) -> Result<Allocation, ParseError> {
    let text = text.trim();
    if text == "empty" {
        return Ok(Allocation::empty(inst.agent_count()));
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for part in text.split(',') {
        let Some((agent, plot)) = part.split_once('=') else {
            return Err(err(
                1,
                ErrorKind::Syntax,
                format!("expected `agent=plot`, found `{part}`"),
            ));
        };
        let (agent, plot) = (agent.trim(), plot.trim());
        let a = inst.agent_by_label(agent).ok_or_else(|| {
            err(
                1,
                ErrorKind::UndeclaredReference,
                format!("agent `{agent}` is not declared"),
            )
        })?;
        let p = inst.graph().plot_by_label(plot).ok_or_else(|| {
            err(
                1,
                ErrorKind::UndeclaredReference,
                format!("plot `{plot}` is not declared"),
            )
        })?;
        if pairs.iter().any(|&(other, _)| other == a.0) {
            return Err(err(
                1,
                ErrorKind::DuplicateId,
                format!("agent `{agent}` is assigned twice"),
            ));
        }
        if pairs.iter().any(|&(_, other)| other == p.0) {
            return Err(err(
                1,
                ErrorKind::DuplicateId,
                format!("plot `{plot}` is assigned twice"),
            ));
        }
        pairs.push((a.0, p.0));
    }
    Allocation::from_pairs(inst.agent_count(), &pairs)
        .map_err(|e| err(1, ErrorKind::Syntax, e.to_string()))
}

/// Renders an allocation as the literal [`parse_allocation`] accepts:
/// `empty`, or comma-joined `agent=plot` pairs in agent order.
pub fn render_allocation(inst: &Instance, alloc: &Allocation) -> String {
    let parts: Vec<String> = alloc
        .iter_assigned()
        .map(|(agent, plot)| {
            format!(
                "{}={}",
                inst.agent_label(agent),
                inst.graph().label(plot)
            )
        })
        .collect();
    if parts.is_empty() {
        "empty".to_string()
    } else {
        parts.join(",")
    }
}
