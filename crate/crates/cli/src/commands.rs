use std::collections::BTreeSet;
use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crowdspec::agent::AgentError;
use crowdspec::checker::{check, Status, Verdict};
use crowdspec::engine::{compile_rules, run, ConflictPolicy, EngineConfig, Trace};
use crowdspec::logic::{check_wellformed, normalize_messages_with, AgentId, CrowdFormula, GrammarMode, NormalizeOptions};
use crowdspec::parser::{
    parse_formula, parse_props, parse_spec_syntax, parse_spec_with, pretty_print_formula, pretty_print_props,
    pretty_print_spec, ParseError, SpecDocument, SpecError, SpecOptions,
};
use crowdspec::scenarios::{
    build_find_nemo, build_testers, check_confidentiality, nemo_derivation, nemo_property, testers_property,
    FindNemoConfig, TestersConfig, Topology,
};
use crowdspec::structure::neighbourhood;
use serde_json::{json, Value};

use crate::{Cli, Command, Conflict, EngineArgs, Mode, ScenarioCommand, TopologyArg};

// Write errors such as a closed pipe end the output quietly.
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

type Result<T> = std::result::Result<T, Box<dyn Error>>;

pub fn dispatch(cli: &Cli) -> Result<u8> {
    let text = cli.text;
    match &cli.command {
        Command::Validate { paths, mode, fix_duality } => validate(paths, *mode, *fix_duality, text),
        Command::Normalize { path, formula, compat_eq1_row2 } => {
            normalize(path.as_deref(), formula.as_deref(), *compat_eq1_row2)
        }
        Command::Reach { path, source, fix_duality } => reach(path, source, *fix_duality, text),
        Command::Run { path, engine } => {
            let doc = load(path, engine.fix_duality)?;
            let trace = execute(&doc, engine)?;
            if text {
                out!("{}", render_trace(&trace));
            } else {
                outln!("{}", serde_json::to_string_pretty(&trace.to_json())?);
            }
            Ok(if trace.quiescent { 0 } else { 2 })
        }
        Command::Check {
            path,
            subject,
            prop,
            props,
            mode,
            engine,
        } => {
            let doc = load(path, engine.fix_duality)?;
            match props {
                Some(p) => check_props(&doc, p, *mode, engine, text),
                None => {
                    let f = parse_formula(prop.as_deref().unwrap_or_default()).map_err(|e| format!("property: {e}"))?;
                    lint_property(&f, *mode)?;
                    let trace = execute(&doc, engine)?;
                    let v = check(&trace, &f, &AgentId::new(subject.clone().unwrap_or_default()))?;
                    emit_verdict(&v, text)?;
                    Ok(v.exit_code() as u8)
                }
            }
        }
        Command::Scenario(s) => scenario(s, text),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn load(path: &Path, fix_duality: bool) -> Result<SpecDocument> {
    let text = read(path)?;
    parse_spec_with(&text, SpecOptions { fix_duality }).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn engine_config(a: &EngineArgs) -> EngineConfig {
    EngineConfig {
        max_rounds: a.max_rounds,
        delay: a.delay,
        conflict: match a.conflict {
            Conflict::Halt => ConflictPolicy::Halt,
            Conflict::Skip => ConflictPolicy::Skip,
        },
        normalize: NormalizeOptions {
            compat_eq1_row2: a.compat_eq1_row2,
        },
    }
}

fn execute(doc: &SpecDocument, a: &EngineArgs) -> Result<Trace> {
    let sys = compile_rules(doc)?;
    Ok(run(&sys, &engine_config(a))?)
}

#[derive(Debug)]
struct Diag {
    file: String,
    line: usize,
    column: usize,
    severity: &'static str,
    message: String,
}

/// 1-based line and column of byte offset `at`.
fn position(text: &str, at: usize) -> (usize, usize) {
    let before = &text[..at.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Offset of `needle` at or after `from`, or `from` if absent.
fn find_from(text: &str, from: usize, needle: &str) -> usize {
    text[from..].find(needle).map_or(from, |i| from + i)
}

fn agent_offset(text: &str, id: &AgentId) -> usize {
    for kw in ["agent ", "extern agent "] {
        let needle = format!("{kw}{id}");
        let mut start = 0;
        while let Some(i) = text[start..].find(&needle) {
            let at = start + i;
            let next = text[at + needle.len()..].chars().next();
            if !next.is_some_and(|c| c.is_alphanumeric() || c == '_') {
                return at;
            }
            start = at + needle.len();
        }
    }
    0
}

/// Grammar errors, plus strict-only findings as warnings in liberal mode.
fn lint(f: &CrowdFormula, mode: Mode) -> Vec<(&'static str, String)> {
    let liberal = check_wellformed(f, GrammarMode::Liberal);
    let mut out: Vec<(&'static str, String)> = liberal.iter().map(|d| ("error", d.to_string())).collect();
    for d in check_wellformed(f, GrammarMode::Strict) {
        if !liberal.contains(&d) {
            let sev = if mode == Mode::Strict { "error" } else { "warning" };
            out.push((sev, format!("{d} (strict grammar)")));
        }
    }
    out
}

fn lint_property(f: &CrowdFormula, mode: Mode) -> Result<()> {
    let mut errors = Vec::new();
    for (sev, msg) in lint(f, mode) {
        if sev == "error" {
            errors.push(msg);
        } else {
            eprintln!("warning: property: {msg}");
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!("property: {}", errors.join("; ")).into())
    }
}

fn syntax_diag(file: &str, e: &ParseError) -> Diag {
    Diag {
        file: file.into(),
        line: e.line,
        column: e.column,
        severity: "error",
        message: e.to_string(),
    }
}

fn validate_file(path: &Path, mode: Mode, fix_duality: bool) -> Result<Vec<Diag>> {
    let text = read(path)?;
    let file = path.display().to_string();
    let mut diags = Vec::new();
    let mut push = |at: usize, severity: &'static str, message: String| {
        let (line, column) = position(&text, at);
        diags.push(Diag {
            file: file.clone(),
            line,
            column,
            severity,
            message,
        });
    };
    if path.extension().is_some_and(|e| e == "props") {
        let props = match parse_props(&text) {
            Ok(p) => p,
            Err(e) => return Ok(vec![syntax_diag(&file, &e)]),
        };
        for p in &props {
            let at = find_from(&text, 0, &format!("property {}", p.name));
            for (sev, msg) in lint(&p.formula, mode) {
                push(at, sev, format!("property `{}`: {msg}", p.name));
            }
        }
        return Ok(diags);
    }
    let doc = match parse_spec_with(&text, SpecOptions { fix_duality }) {
        Ok(d) => d,
        Err(SpecError::Syntax(e)) => return Ok(vec![syntax_diag(&file, &e)]),
        Err(SpecError::Semantic(issues)) => {
            // Locate issues by their agent when the document is syntactically fine.
            let syntax = parse_spec_syntax(&text).ok();
            for issue in issues {
                let at = syntax
                    .as_ref()
                    .and_then(|d| d.agents.iter().find(|a| issue.to_string().contains(&format!("`{}`", a.id))))
                    .map_or(0, |a| agent_offset(&text, &a.id));
                push(at, "error", issue.to_string());
            }
            return Ok(diags);
        }
    };
    if let Err(e) = compile_rules(&doc) {
        let at = match &e {
            AgentError::Rule { agent, rule, .. } => find_from(&text, agent_offset(&text, agent), &format!("rule {rule}")),
            _ => 0,
        };
        push(at, "error", e.to_string());
    }
    for a in &doc.agents {
        let base = agent_offset(&text, &a.id);
        for r in &a.rules {
            let at = find_from(&text, base, &format!("rule {}", r.name));
            for f in [&r.premise, &r.consequence] {
                for (sev, msg) in lint(f, mode) {
                    push(at, sev, format!("rule `{}` of `{}`: {msg}", r.name, a.id));
                }
            }
        }
        for s in &a.sends {
            let at = find_from(&text, base, "send");
            for (sev, msg) in lint(s, mode) {
                push(at, sev, format!("send of `{}`: {msg}", a.id));
            }
        }
    }
    Ok(diags)
}

fn validate(paths: &[std::path::PathBuf], mode: Mode, fix_duality: bool, text: bool) -> Result<u8> {
    let mut all = Vec::new();
    for p in paths {
        all.extend(validate_file(p, mode, fix_duality)?);
    }
    if text {
        for d in &all {
            eprintln!("{}:{}:{}: {}: {}", d.file, d.line, d.column, d.severity, d.message);
        }
    } else if !all.is_empty() {
        let arr: Vec<Value> = all
            .iter()
            .map(|d| json!({"file": d.file, "line": d.line, "column": d.column, "severity": d.severity, "message": d.message}))
            .collect();
        outln!("{}", serde_json::to_string_pretty(&arr)?);
    }
    Ok(u8::from(all.iter().any(|d| d.severity == "error")))
}

fn normalize(path: Option<&Path>, formula: Option<&str>, compat: bool) -> Result<u8> {
    let opts = NormalizeOptions { compat_eq1_row2: compat };
    let norm = |f: &CrowdFormula| normalize_messages_with(f, opts);
    if let Some(src) = formula {
        outln!("{}", pretty_print_formula(&norm(&parse_formula(src)?)));
        return Ok(0);
    }
    let path = path.ok_or("nothing to normalize")?;
    let text = read(path)?;
    if path.extension().is_some_and(|e| e == "props") {
        let mut props = parse_props(&text)?;
        for p in &mut props {
            p.formula = norm(&p.formula);
        }
        out!("{}", pretty_print_props(&props));
    } else {
        let mut doc = parse_spec_syntax(&text)?;
        for a in &mut doc.agents {
            for r in &mut a.rules {
                r.premise = norm(&r.premise);
                r.consequence = norm(&r.consequence);
            }
            for s in &mut a.sends {
                *s = norm(s);
            }
        }
        out!("{}", pretty_print_spec(&doc));
    }
    Ok(0)
}

fn reach(path: &Path, source: &str, fix_duality: bool, text: bool) -> Result<u8> {
    let sys = compile_rules(&load(path, fix_duality)?)?;
    let n = neighbourhood(&sys, &AgentId::new(source))?;
    if text {
        let members: Vec<String> = n.neighbourhood.iter().map(|a| a.to_string()).collect();
        outln!("{} reaches {} agent(s): {}", n.source, members.len(), members.join(" "));
        for (id, path) in &n.witness_paths {
            let hops: Vec<String> = path.iter().map(|a| a.to_string()).collect();
            outln!("  {id}: {}", hops.join(" -> "));
        }
    } else {
        outln!("{}", serde_json::to_string_pretty(&n)?);
    }
    Ok(0)
}

fn render_trace(t: &Trace) -> String {
    let mut out = String::new();
    for (r, events) in t.events.iter().enumerate() {
        let _ = writeln!(out, "round {r}");
        for e in events {
            let rule = e.rule.as_deref().map(|r| format!(" {r}")).unwrap_or_default();
            let b: Vec<String> = e.bindings.iter().map(|(k, v)| format!("{k}={v}")).collect();
            let b = if b.is_empty() { String::new() } else { format!(" [{}]", b.join(", ")) };
            let _ = writeln!(out, "  {:?} {}{rule}{b}: {}", e.kind, e.owner, e.effects.join("; "));
        }
    }
    let _ = writeln!(out, "{}", if t.quiescent { "quiescent" } else { "round budget exhausted" });
    out
}

fn render_verdict(v: &Verdict) -> String {
    let mut out = String::new();
    let status = match v.status {
        Status::Holds => "holds",
        Status::Fails => "fails",
        Status::Inconclusive => "inconclusive",
    };
    let _ = writeln!(
        out,
        "{status}: {} (subject {}, {} rounds{})",
        v.property,
        v.subject,
        v.rounds,
        if v.quiescent { ", quiescent" } else { ", not quiescent" }
    );
    if let Some(w) = &v.witness {
        let _ = writeln!(out, "  witness at round {}: {}", w.round, w.subformula);
    }
    if let Some(c) = &v.counterexample {
        let _ = writeln!(out, "  counterexample at round {}: {}", c.round, c.falsified);
        for (k, val) in &c.bindings {
            let _ = writeln!(out, "    {k} = {val}");
        }
        for s in &c.trail {
            let _ = writeln!(out, "    round {}: {}", s.round, s.formula);
        }
    }
    let _ = writeln!(out, "  ({})", v.note);
    out
}

fn emit_verdict(v: &Verdict, text: bool) -> Result<()> {
    if text {
        out!("{}", render_verdict(v));
    } else {
        outln!("{}", serde_json::to_string_pretty(v)?);
    }
    Ok(())
}

fn check_props(doc: &SpecDocument, path: &Path, mode: Mode, engine: &EngineArgs, text: bool) -> Result<u8> {
    let props = parse_props(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?;
    for p in &props {
        lint_property(&p.formula, mode).map_err(|e| format!("`{}`: {e}", p.name))?;
    }
    let trace = execute(doc, engine)?;
    let mut results = Vec::new();
    let mut mismatch = false;
    for p in &props {
        let v = check(&trace, &p.formula, &p.subject)?;
        let want = p.expect.map_or("holds", |e| e.keyword());
        let got = serde_json::to_value(v.status)?;
        let matches = got == want;
        mismatch |= !matches;
        if text {
            out!("{} [{}]: {}", p.name, if matches { "as expected" } else { "UNEXPECTED" }, render_verdict(&v));
        }
        results.push(json!({"name": p.name, "expect": want, "matches": matches, "verdict": v}));
    }
    if !text {
        outln!("{}", serde_json::to_string_pretty(&results)?);
    }
    Ok(u8::from(mismatch))
}

fn topology(t: TopologyArg) -> Topology {
    match t {
        TopologyArg::Single => Topology::Single,
        TopologyArg::Chained => Topology::Chained,
        TopologyArg::Isolated => Topology::Isolated,
    }
}

struct Report {
    json: Value,
    title: String,
    verdicts: Vec<Verdict>,
}

impl Report {
    fn code(&self) -> u8 {
        self.verdicts.iter().map(|v| v.exit_code() as u8).max().unwrap_or(0)
    }
}

fn nemo_report(cfg: &FindNemoConfig, engine: &EngineArgs) -> Result<Report> {
    let trace = execute(&build_find_nemo(cfg)?, engine)?;
    let v = check(&trace, &nemo_property(), &"seeker".into())?;
    let chain = cfg
        .able
        .iter()
        .find_map(|&i| nemo_derivation(&trace, &AgentId::new(format!("c{i}"))));
    Ok(Report {
        json: json!({"scenario": "nemo", "config": cfg, "derivation": chain, "verdict": v}),
        title: format!("nemo {}", serde_json::to_string(cfg)?),
        verdicts: vec![v],
    })
}

fn testers_report(cfg: &TestersConfig, engine: &EngineArgs) -> Result<Report> {
    let trace = execute(&build_testers(cfg)?, engine)?;
    let v = check(&trace, &testers_property(), &"Testers".into())?;
    let c = check_confidentiality(&trace, cfg)?;
    Ok(Report {
        json: json!({"scenario": "testers", "config": cfg, "verdict": v, "confidentiality": c}),
        title: format!("testers {}", serde_json::to_string(cfg)?),
        verdicts: vec![v, c],
    })
}

fn show_report(r: &Report, text: bool) -> Result<()> {
    if text {
        outln!("{}", r.title);
        for v in &r.verdicts {
            out!("{}", render_verdict(v));
        }
    } else {
        outln!("{}", serde_json::to_string_pretty(&r.json)?);
    }
    Ok(())
}

fn scenario(cmd: &ScenarioCommand, text: bool) -> Result<u8> {
    match cmd {
        ScenarioCommand::Nemo {
            size,
            able,
            topology: t,
            emit,
            engine,
        } => {
            let cfg = FindNemoConfig::new(*size, able.iter().copied(), topology(*t));
            if *emit {
                out!("{}", pretty_print_spec(&build_find_nemo(&cfg)?));
                return Ok(0);
            }
            let report = nemo_report(&cfg, engine)?;
            show_report(&report, text)?;
            Ok(report.code())
        }
        ScenarioCommand::Testers {
            fragments,
            crowd,
            whole,
            no_safety,
            failsafe,
            emit,
            engine,
        } => {
            let mut cfg = TestersConfig::new(*fragments, *crowd);
            if !whole.is_empty() {
                cfg.whole_implications = whole.iter().map(|w| w.iter().copied().collect::<BTreeSet<_>>()).collect();
            }
            cfg.safety = !no_safety;
            cfg.failsafe = *failsafe;
            if *emit {
                out!("{}", pretty_print_spec(&build_testers(&cfg)?));
                return Ok(0);
            }
            let report = testers_report(&cfg, engine)?;
            show_report(&report, text)?;
            Ok(report.code())
        }
        ScenarioCommand::Grid { engine } => grid(engine, text),
    }
}

enum Job {
    Nemo(FindNemoConfig),
    Testers(TestersConfig),
}

fn grid(engine: &EngineArgs, text: bool) -> Result<u8> {
    let mut jobs = Vec::new();
    for n in [3, 10, 50, 100] {
        for t in [Topology::Single, Topology::Chained] {
            jobs.push(Job::Nemo(FindNemoConfig::new(n, [n - 1], t)));
        }
    }
    for n in [2, 3, 6] {
        jobs.push(Job::Testers(TestersConfig::new(n, 3 * n)));
    }
    let results: Vec<std::result::Result<Report, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|job| {
                s.spawn(move || {
                    match job {
                        Job::Nemo(c) => nemo_report(c, engine),
                        Job::Testers(c) => testers_report(c, engine),
                    }
                    .map_err(|e| e.to_string())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("grid worker panicked")).collect()
    });
    let reports = results.into_iter().collect::<std::result::Result<Vec<_>, _>>()?;
    if text {
        for r in &reports {
            show_report(r, true)?;
        }
    } else {
        let all: Vec<&Value> = reports.iter().map(|r| &r.json).collect();
        outln!("{}", serde_json::to_string_pretty(&all)?);
    }
    Ok(reports.iter().map(Report::code).max().unwrap_or(0))
}
