//! Logical gate evaluation.

use serde::{Deserialize, Serialize};

use super::{GateKind, InstantiatedGraph};
use crate::diag::{Code, Diagnostic, Diagnostics};

/// Progressive mode never reports AND/OR violations (a complex event may
/// still be unfolding). Strict mode turns a pending gate into a violation
/// once its source event is marked terminal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    #[default]
    Progressive,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Satisfied,
    Pending,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateStatus {
    pub gate: String,
    pub verdict: Verdict,
    /// Members that occurred, in member order.
    pub occurred: Vec<String>,
}

fn verdict(kind: GateKind, occurred: usize, members: usize) -> Verdict {
    match kind {
        GateKind::Xor => match occurred {
            0 => Verdict::Pending,
            1 => Verdict::Satisfied,
            _ => Verdict::Violated,
        },
        GateKind::Or if occurred >= 1 => Verdict::Satisfied,
        GateKind::Or => Verdict::Pending,
        GateKind::And if occurred == members => Verdict::Satisfied,
        GateKind::And => Verdict::Pending,
    }
}

/// Evaluates every gate of `g` in stored order. A member has occurred iff its
/// status is matched or source-only; only the member's own status is used.
pub fn check_gates(g: &InstantiatedGraph, mode: GateMode) -> Result<Vec<GateStatus>, Diagnostics> {
    let mut missing = Diagnostics::default();
    let mut out = Vec::with_capacity(g.gates.len());
    for gate in &g.gates {
        let mut occurred = Vec::new();
        for m in &gate.members {
            match g.events.get(m) {
                Some(ev) if ev.status.occurred() => occurred.push(m.clone()),
                Some(_) => {}
                None => missing.push(Diagnostic::error(
                    Code::UnknownMember,
                    &gate.id,
                    format!("gate member {m} does not exist"),
                )),
            }
        }
        let mut v = verdict(gate.kind, occurred.len(), gate.members.len());
        let terminal = g.events.get(&gate.source).is_some_and(|s| s.terminal);
        if mode == GateMode::Strict && terminal && v == Verdict::Pending {
            v = Verdict::Violated;
        }
        out.push(GateStatus {
            gate: gate.id.clone(),
            verdict: v,
            occurred,
        });
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        missing.sort();
        Err(missing)
    }
}
