//! Scenario model: a declarative description of a simulated distributed
//! system and its test workloads.
//!
//! A scenario file (versioned `cascadelab-scenario v1`) declares
//! components with handlers, the injectable surface (throw points,
//! library calls, loops, boolean error detectors), and the test
//! workloads that drive them. The statement tree is immutable after
//! parsing and safe to share across concurrent readers.
//!
//! See [`parser`] for the concrete grammar.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub mod faults;
pub mod parser;

pub use faults::{
    enumerate_fault_points, filter_detectors, filter_loops, ExceptionSource, FaultId, FaultKind,
    FaultPoint,
};
pub use parser::{parse_scenario, ParseError};

/// Version header required on the first line of every scenario file.
pub const SCENARIO_VERSION: &str = "cascadelab-scenario v1";

// ---------------------------------------------------------------------------
// Top-level scenario
// ---------------------------------------------------------------------------

/// A parsed, validated scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub components: Vec<Component>,
    pub tests: Vec<TestWorkload>,
    pub config: ScenarioConfig,
}

/// Scenario-level configuration: integer settings (timeouts in virtual
/// ms, cluster sizes, feature flags) plus noise declarations.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Named integer settings, overridable per test.
    pub values: BTreeMap<String, i64>,
    /// Bounded iteration-count jitter per loop id.
    pub loop_jitter: BTreeMap<String, u32>,
    /// Bounded virtual-ms jitter applied to `work` statements.
    pub work_jitter: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub handlers: Vec<Handler>,
    pub detectors: Vec<DetectorDecl>,
}

/// A named statement block invocable by requests, `call`, or `send`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Handler {
    pub name: String,
    pub body: Vec<Stmt>,
}

/// A boolean error detector. The detector "trips" (returns its
/// error-indicating value) when `trips_when` holds; a negation
/// injection flips the result of every evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorDecl {
    pub id: String,
    pub trips_when: Cond,
    pub attrs: DetectorAttrs,
}

/// Statically declared filtering attributes of a detector.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct DetectorAttrs {
    pub final_only_inputs: bool,
    pub constant_or_unused_return: bool,
    pub primitive_only_computation: bool,
    pub jdk_like_utility: bool,
}

impl DetectorAttrs {
    pub fn any(&self) -> bool {
        self.final_only_inputs
            || self.constant_or_unused_return
            || self.primitive_only_computation
            || self.jdk_like_utility
    }
}

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

/// One statement in a handler body. Every statement carries a stable id
/// of the form `<component>/<handler>/s<k>` (preorder index), used for
/// coverage, branch identity, and call-site identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stmt {
    pub id: String,
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum StmtKind {
    /// Advance virtual time (subject to work jitter).
    Work(Expr),
    /// Advance virtual time exactly.
    Sleep(Expr),
    /// Assign a run-global integer variable.
    Set { var: String, value: Expr },
    /// Record (branch-id, outcome) and execute the taken side.
    Branch {
        cond: Cond,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    Loop {
        loop_id: String,
        kind: LoopKind,
        body: Vec<Stmt>,
    },
    /// Invoke a handler of the same component.
    Call { handler: String },
    /// Synchronous cross-component request. With a declared timeout the
    /// site is an injectable exception fault point; the timeout
    /// exception is raised in the sender when the callee's virtual
    /// completion exceeds the bound.
    Send {
        component: String,
        handler: String,
        size: Option<Expr>,
        timeout: Option<SendTimeout>,
    },
    /// Library call site. With a declared exception it is injectable;
    /// an optional guard makes it throw naturally.
    LibCall {
        call_id: String,
        throws: Option<String>,
        when: Option<Cond>,
    },
    /// Guarded throw site: throws `exception` when `guard` holds.
    /// `excluded` marks reflection/security-style exceptions that are
    /// never enumerated as fault points.
    ThrowPoint {
        point_id: String,
        exception: String,
        guard: Cond,
        excluded: bool,
    },
    /// Evaluate a detector and discard the result.
    DetectorCall { detector: String },
    /// Exception handling: re-attempt or swallow, with an optional
    /// per-failure block.
    Retry {
        policy: RetryPolicy,
        body: Vec<Stmt>,
        onfail: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum LoopKind {
    /// Bound expression evaluated once at loop entry.
    Times(Expr),
    /// Condition re-evaluated before each iteration.
    While(Cond),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SendTimeout {
    pub bound: Expr,
    pub exception: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RetryPolicy {
    /// Re-execute the body up to this many attempts, then rethrow.
    Attempts(u32),
    /// Execute once; on failure run `onfail` and continue.
    Ignore,
}

// ---------------------------------------------------------------------------
// Expressions and conditions
// ---------------------------------------------------------------------------

/// Integer expression over literals, request parameters, run variables,
/// config values, and the two virtual-time sources.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Expr {
    Lit(i64),
    /// Request parameter (sends bind the payload size as `size`).
    Param(String),
    /// Run-global variable, 0 when unset.
    Var(String),
    /// Config value after test overrides.
    Cfg(String),
    /// Virtual ms since the current top-level request started.
    ReqElapsed,
    /// Virtual ms since the current handler invocation started.
    OpElapsed,
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Neg(Box<Expr>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Cond {
    True,
    False,
    Cmp { op: CmpOp, lhs: Expr, rhs: Expr },
    /// True iff the named detector trips at this evaluation.
    Detector(String),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

// ---------------------------------------------------------------------------
// Test workloads
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestWorkload {
    pub name: String,
    pub requests: Vec<Request>,
    pub config_overrides: BTreeMap<String, i64>,
    /// Hard virtual-time budget for one run of this workload.
    pub expected_virtual_duration: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Request {
    pub component: String,
    pub handler: String,
    pub params: BTreeMap<String, i64>,
}

// ---------------------------------------------------------------------------
// Loop metadata
// ---------------------------------------------------------------------------

/// Static facts about one loop, derived from the statement tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopMeta {
    pub loop_id: String,
    pub component: String,
    pub handler: String,
    pub stmt_id: String,
    /// Bound expression is free of parameters, variables, config and
    /// time sources (only `times` loops can be constant).
    pub constant_bound: bool,
    /// Statements reachable from the loop body, transitively through
    /// `call` and `send`.
    pub reachable_code_size: usize,
    /// A `send` or `libcall` is reachable from the body.
    pub performs_io: bool,
    /// Innermost enclosing loop within the same handler.
    pub parent_loop: Option<String>,
    /// Next loop statement in the same statement list.
    pub next_sibling_loop: Option<String>,
}

impl Scenario {
    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn handler(&self, component: &str, handler: &str) -> Option<&Handler> {
        self.component(component)?
            .handlers
            .iter()
            .find(|h| h.name == handler)
    }

    pub fn detector(&self, id: &str) -> Option<&DetectorDecl> {
        self.components
            .iter()
            .flat_map(|c| c.detectors.iter())
            .find(|d| d.id == id)
    }

    pub fn test(&self, name: &str) -> Option<&TestWorkload> {
        self.tests.iter().find(|t| t.name == name)
    }

    /// Effective config for a test: base values plus overrides.
    pub fn config_for(&self, test: &TestWorkload) -> BTreeMap<String, i64> {
        let mut values = self.config.values.clone();
        for (k, v) in &test.config_overrides {
            values.insert(k.clone(), *v);
        }
        values
    }

    /// Derives the [`LoopMeta`] forest for every loop in the scenario,
    /// keyed by loop id.
    pub fn loop_meta(&self) -> BTreeMap<String, LoopMeta> {
        let sizes = self.handler_stats();
        let mut meta = BTreeMap::new();
        for comp in &self.components {
            for handler in &comp.handlers {
                let mut stack: Vec<String> = Vec::new();
                collect_loop_meta(
                    &comp.name,
                    &handler.name,
                    &handler.body,
                    &mut stack,
                    &sizes,
                    &mut meta,
                );
            }
        }
        meta
    }

    /// Per-handler statement counts, IO flags and callee sets, closed
    /// transitively over the call graph.
    fn handler_stats(&self) -> BTreeMap<(String, String), HandlerStats> {
        let mut direct: BTreeMap<(String, String), HandlerStats> = BTreeMap::new();
        for comp in &self.components {
            for handler in &comp.handlers {
                let mut stats = HandlerStats::default();
                scan_stmts(&comp.name, &handler.body, &mut stats);
                direct.insert((comp.name.clone(), handler.name.clone()), stats);
            }
        }
        // Close callee sets to a fixpoint; handler graphs are tiny.
        loop {
            let snapshot = direct.clone();
            let mut changed = false;
            for stats in direct.values_mut() {
                let mut extra = BTreeSet::new();
                for callee in &stats.callees {
                    if let Some(cs) = snapshot.get(callee) {
                        for c in &cs.callees {
                            if !stats.callees.contains(c) {
                                extra.insert(c.clone());
                            }
                        }
                    }
                }
                if !extra.is_empty() {
                    stats.callees.extend(extra);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        direct
    }
}

#[derive(Debug, Clone, Default)]
struct HandlerStats {
    stmt_count: usize,
    has_io: bool,
    callees: BTreeSet<(String, String)>,
}

fn scan_stmts(component: &str, stmts: &[Stmt], stats: &mut HandlerStats) {
    for stmt in stmts {
        stats.stmt_count += 1;
        match &stmt.kind {
            StmtKind::Branch {
                then_body,
                else_body,
                ..
            } => {
                scan_stmts(component, then_body, stats);
                scan_stmts(component, else_body, stats);
            }
            StmtKind::Loop { body, .. } => scan_stmts(component, body, stats),
            StmtKind::Retry { body, onfail, .. } => {
                scan_stmts(component, body, stats);
                scan_stmts(component, onfail, stats);
            }
            StmtKind::Call { handler } => {
                stats
                    .callees
                    .insert((component.to_string(), handler.clone()));
            }
            StmtKind::Send {
                component: target,
                handler,
                ..
            } => {
                stats.has_io = true;
                stats.callees.insert((target.clone(), handler.clone()));
            }
            StmtKind::LibCall { .. } => stats.has_io = true,
            _ => {}
        }
    }
}

fn collect_loop_meta(
    component: &str,
    handler: &str,
    stmts: &[Stmt],
    loop_stack: &mut Vec<String>,
    sizes: &BTreeMap<(String, String), HandlerStats>,
    out: &mut BTreeMap<String, LoopMeta>,
) {
    // Sibling chain: the next loop in this same statement list.
    let loop_positions: Vec<(usize, String)> = stmts
        .iter()
        .enumerate()
        .filter_map(|(i, s)| match &s.kind {
            StmtKind::Loop { loop_id, .. } => Some((i, loop_id.clone())),
            _ => None,
        })
        .collect();

    for (idx, stmt) in stmts.iter().enumerate() {
        match &stmt.kind {
            StmtKind::Loop {
                loop_id,
                kind,
                body,
            } => {
                let mut body_stats = HandlerStats::default();
                scan_stmts(component, body, &mut body_stats);
                let mut size = body_stats.stmt_count;
                let mut io = body_stats.has_io;
                let mut seen = BTreeSet::new();
                let mut queue: Vec<(String, String)> = body_stats.callees.iter().cloned().collect();
                while let Some(key) = queue.pop() {
                    if !seen.insert(key.clone()) {
                        continue;
                    }
                    if let Some(hs) = sizes.get(&key) {
                        size += hs.stmt_count;
                        io |= hs.has_io;
                        for c in &hs.callees {
                            if !seen.contains(c) {
                                queue.push(c.clone());
                            }
                        }
                    }
                }
                let next_sibling = loop_positions
                    .iter()
                    .find(|(i, _)| *i > idx)
                    .map(|(_, id)| id.clone());
                out.insert(
                    loop_id.clone(),
                    LoopMeta {
                        loop_id: loop_id.clone(),
                        component: component.to_string(),
                        handler: handler.to_string(),
                        stmt_id: stmt.id.clone(),
                        constant_bound: match kind {
                            LoopKind::Times(e) => expr_is_constant(e),
                            LoopKind::While(_) => false,
                        },
                        reachable_code_size: size,
                        performs_io: io,
                        parent_loop: loop_stack.last().cloned(),
                        next_sibling_loop: next_sibling,
                    },
                );
                loop_stack.push(loop_id.clone());
                collect_loop_meta(component, handler, body, loop_stack, sizes, out);
                loop_stack.pop();
            }
            StmtKind::Branch {
                then_body,
                else_body,
                ..
            } => {
                collect_loop_meta(component, handler, then_body, loop_stack, sizes, out);
                collect_loop_meta(component, handler, else_body, loop_stack, sizes, out);
            }
            StmtKind::Retry { body, onfail, .. } => {
                collect_loop_meta(component, handler, body, loop_stack, sizes, out);
                collect_loop_meta(component, handler, onfail, loop_stack, sizes, out);
            }
            _ => {}
        }
    }
}

fn expr_is_constant(expr: &Expr) -> bool {
    match expr {
        Expr::Lit(_) => true,
        Expr::Param(_) | Expr::Var(_) | Expr::Cfg(_) | Expr::ReqElapsed | Expr::OpElapsed => false,
        Expr::Binary { lhs, rhs, .. } => expr_is_constant(lhs) && expr_is_constant(rhs),
        Expr::Neg(inner) => expr_is_constant(inner),
    }
}

/// Walks every statement of every handler in declaration order.
pub fn visit_stmts<'a>(
    scenario: &'a Scenario,
    mut f: impl FnMut(&'a Component, &'a Handler, &'a Stmt),
) {
    fn walk<'a>(
        comp: &'a Component,
        handler: &'a Handler,
        stmts: &'a [Stmt],
        f: &mut impl FnMut(&'a Component, &'a Handler, &'a Stmt),
    ) {
        for stmt in stmts {
            f(comp, handler, stmt);
            match &stmt.kind {
                StmtKind::Branch {
                    then_body,
                    else_body,
                    ..
                } => {
                    walk(comp, handler, then_body, f);
                    walk(comp, handler, else_body, f);
                }
                StmtKind::Loop { body, .. } => walk(comp, handler, body, f),
                StmtKind::Retry { body, onfail, .. } => {
                    walk(comp, handler, body, f);
                    walk(comp, handler, onfail, f);
                }
                _ => {}
            }
        }
    }
    for comp in &scenario.components {
        for handler in &comp.handlers {
            walk(comp, handler, &handler.body, &mut f);
        }
    }
}
