//! Step-by-step factorization traces.
//!
//! With instrumentation enabled the engine records one event per merge
//! level, per non-trivial compression, and per non-trivial elimination,
//! each with a snapshot of the active system graph. Traces serialize to
//! stable JSON (golden-file comparable) and to DOT.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Merge,
    Compress,
    Eliminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub kind: TraceKind,
    pub level: usize,
    /// Label of the node acted upon (or `level<i>` for merges).
    pub node: String,
    /// Compression partners or created super nodes.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub partners: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    /// Active nodes (label, size) after the step, sorted by id.
    pub nodes: Vec<(String, usize)>,
    /// Interaction edges among active nodes after the step.
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct TraceLog {
    pub events: Vec<TraceEvent>,
}

impl TraceLog {
    pub fn push(&mut self, event: TraceEvent) {
        self.events.push(event);
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Sequence of step kinds, e.g. for matching against an expected shape.
    pub fn kinds(&self) -> Vec<TraceKind> {
        self.events.iter().map(|e| e.kind).collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization")
    }

    /// DOT digraph for one step.
    pub fn event_dot(&self, step: usize) -> String {
        let e = &self.events[step];
        let mut out = String::new();
        out.push_str(&format!("digraph step{step} {{\n"));
        out.push_str(&format!(
            "  label=\"{:?} {} (level {})\";\n",
            e.kind, e.node, e.level
        ));
        for (label, size) in &e.nodes {
            let color = match label.chars().next() {
                Some('r') => "red",
                Some('b') => "black",
                _ => "orange",
            };
            out.push_str(&format!(
                "  \"{label}\" [color={color}, label=\"{label}\\n{size}\"];\n"
            ));
        }
        for (from, to) in &e.edges {
            out.push_str(&format!("  \"{from}\" -> \"{to}\";\n"));
        }
        out.push_str("}\n");
        out
    }
}
