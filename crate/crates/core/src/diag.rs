//! Diagnostics shared by every module.
//!
//! Problems found in user data are returned as values so callers (the editor,
//! the service, the CLI) can display them instead of aborting.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// Machine-readable diagnostic codes. The serialized form is the
/// SCREAMING_SNAKE_CASE name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Code {
    // parsing
    Syntax,
    SchemaRef,
    GateArity,
    OffsetOrder,
    OffsetRange,
    DuplicateId,
    EmptyProvenance,
    BadDimensions,
    // graph invariants
    ConfidenceRange,
    StatusProvenance,
    StatusSchemaRef,
    ChildDuplicate,
    SelfChild,
    UnknownChild,
    MultipleParents,
    HierarchyCycle,
    Orphan,
    UnknownRoot,
    RootHasParent,
    TemporalSelf,
    TemporalEndpoint,
    TemporalCycle,
    GateDuplicateMember,
    GateUnknownSource,
    GatePlacement,
    ArgFillerMissing,
    ArgDuplicate,
    ArgOrderDuplicate,
    EntityNameEmpty,
    EntityNoProvenance,
    ProvenanceMissing,
    MatchPair,
    UnknownMember,
    // matching
    EmptySchema,
    IdCollision,
    TemporalDropped,
    // layout
    NotAParent,
    EmptyLayout,
    // editing
    RefMissing,
    WouldCycle,
    DuplicateEdge,
    DuplicateArgument,
    SelfEdge,
    SelfParent,
    SelfMerge,
    BadPermutation,
    InvalidSpan,
    InvalidBbox,
    AtBoundary,
    BadRange,
    // provenance
    StaleSpan,
    NotText,
    // service
    UnknownSession,
    AtomicityAbort,
    ReplayMismatch,
    Io,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        use Code::*;
        match self {
            Syntax => "SYNTAX",
            SchemaRef => "SCHEMA_REF",
            GateArity => "GATE_ARITY",
            OffsetOrder => "OFFSET_ORDER",
            OffsetRange => "OFFSET_RANGE",
            DuplicateId => "DUPLICATE_ID",
            EmptyProvenance => "EMPTY_PROVENANCE",
            BadDimensions => "BAD_DIMENSIONS",
            ConfidenceRange => "CONFIDENCE_RANGE",
            StatusProvenance => "STATUS_PROVENANCE",
            StatusSchemaRef => "STATUS_SCHEMA_REF",
            ChildDuplicate => "CHILD_DUPLICATE",
            SelfChild => "SELF_CHILD",
            UnknownChild => "UNKNOWN_CHILD",
            MultipleParents => "MULTIPLE_PARENTS",
            HierarchyCycle => "HIERARCHY_CYCLE",
            Orphan => "ORPHAN",
            UnknownRoot => "UNKNOWN_ROOT",
            RootHasParent => "ROOT_HAS_PARENT",
            TemporalSelf => "TEMPORAL_SELF",
            TemporalEndpoint => "TEMPORAL_ENDPOINT",
            TemporalCycle => "TEMPORAL_CYCLE",
            GateDuplicateMember => "GATE_DUPLICATE_MEMBER",
            GateUnknownSource => "GATE_UNKNOWN_SOURCE",
            GatePlacement => "GATE_PLACEMENT",
            ArgFillerMissing => "ARG_FILLER_MISSING",
            ArgDuplicate => "ARG_DUPLICATE",
            ArgOrderDuplicate => "ARG_ORDER_DUPLICATE",
            EntityNameEmpty => "ENTITY_NAME_EMPTY",
            EntityNoProvenance => "ENTITY_NO_PROVENANCE",
            ProvenanceMissing => "PROVENANCE_MISSING",
            MatchPair => "MATCH_PAIR",
            UnknownMember => "UNKNOWN_MEMBER",
            EmptySchema => "EMPTY_SCHEMA",
            IdCollision => "ID_COLLISION",
            TemporalDropped => "TEMPORAL_DROPPED",
            NotAParent => "NOT_A_PARENT",
            EmptyLayout => "EMPTY_LAYOUT",
            RefMissing => "REF_MISSING",
            WouldCycle => "WOULD_CYCLE",
            DuplicateEdge => "DUPLICATE_EDGE",
            DuplicateArgument => "DUPLICATE_ARGUMENT",
            SelfEdge => "SELF_EDGE",
            SelfParent => "SELF_PARENT",
            SelfMerge => "SELF_MERGE",
            BadPermutation => "BAD_PERMUTATION",
            InvalidSpan => "INVALID_SPAN",
            InvalidBbox => "INVALID_BBOX",
            AtBoundary => "AT_BOUNDARY",
            BadRange => "BAD_RANGE",
            StaleSpan => "STALE_SPAN",
            NotText => "NOT_TEXT",
            UnknownSession => "UNKNOWN_SESSION",
            AtomicityAbort => "ATOMICITY_ABORT",
            ReplayMismatch => "REPLAY_MISMATCH",
            Io => "IO",
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    /// Id of the element the diagnostic is about (event, entity, gate,
    /// provenance record) or a field path for parse errors.
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(code: Code, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: Severity::Error,
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub fn warning(code: Code, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code,
            severity: Severity::Warning,
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}] {}: {}", self.code, self.subject, self.message)
    }
}

/// An ordered list of diagnostics, used as the error side of fallible
/// operations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(transparent)]
pub struct Diagnostics(pub Vec<Diagnostic>);

impl Diagnostics {
    pub fn single(d: Diagnostic) -> Self {
        Self(vec![d])
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Diagnostic> {
        self.0.iter()
    }

    pub fn has_errors(&self) -> bool {
        self.0.iter().any(Diagnostic::is_error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.0.iter().filter(|d| d.is_error())
    }

    pub fn has_code(&self, code: Code) -> bool {
        self.0.iter().any(|d| d.code == code)
    }

    /// Sorts by (severity, subject, code, message) and removes exact duplicates.
    pub fn sort(&mut self) {
        self.0.sort_by(|a, b| {
            (a.severity, &a.subject, a.code.as_str(), &a.message).cmp(&(
                b.severity,
                &b.subject,
                b.code.as_str(),
                &b.message,
            ))
        });
        self.0.dedup();
    }

    pub fn push(&mut self, d: Diagnostic) {
        self.0.push(d);
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Self::single(d)
    }
}

impl IntoIterator for Diagnostics {
    type Item = Diagnostic;
    type IntoIter = std::vec::IntoIter<Diagnostic>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}
