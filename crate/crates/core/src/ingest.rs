//! Event-stream ingestion with per-source detector sessions.
//!
//! Connection-attempt events arrive pre-classified as success or failure.
//! Only the FIRST attempt from a source to each distinct destination counts
//! as an observation; repeats are discarded, so a session's observation
//! count always equals its distinct-destination count.  Once a source
//! reaches a terminal decision its session is frozen and later events only
//! bump a discard counter.
//!
//! Event order defines observation order; events for one source must be
//! processed in input order.  Replaying the same stream yields identical
//! decisions.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::{DetectorState, TestSpec, TunedParams, Verdict};
use crate::triple::{TriplePlan, TripleState};
use crate::trwa::{TrwaParams, TrwaState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IngestError {
    #[error("malformed event: {reason}")]
    MalformedEvent { reason: String },
    #[error("snapshot was taken with detector kind `{snapshot}` but the store runs `{config}`")]
    SnapshotKindMismatch {
        snapshot: String,
        config: &'static str,
    },
    #[error("snapshot is not valid JSON: {reason}")]
    SnapshotFormat { reason: String },
}

/// One connection attempt: epoch-millisecond timestamp, source and
/// destination identifiers, and the success bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionEvent {
    pub timestamp: i64,
    pub src: String,
    pub dst: String,
    pub outcome: u8,
}

impl ConnectionEvent {
    /// Parse one JSONL record; unknown fields are ignored.
    pub fn parse(line: &str) -> Result<Self, IngestError> {
        let event: ConnectionEvent =
            serde_json::from_str(line).map_err(|e| IngestError::MalformedEvent {
                reason: e.to_string(),
            })?;
        event.validate()?;
        Ok(event)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.outcome > 1 {
            return Err(IngestError::MalformedEvent {
                reason: format!("outcome must be 0 or 1, got {}", self.outcome),
            });
        }
        if self.src.is_empty() || self.dst.is_empty() {
            return Err(IngestError::MalformedEvent {
                reason: "src and dst must be non-empty".into(),
            });
        }
        Ok(())
    }

    pub fn is_success(&self) -> bool {
        self.outcome == 1
    }
}

/// Terminal decision emitted for a source.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub src: String,
    pub decision: Verdict,
    pub n: u64,
    pub s: u64,
    pub ts: i64,
}

/// End-of-stream summary for a source that never reached a decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UndecidedRecord {
    pub src: String,
    pub decision: &'static str,
    pub n: u64,
    pub s: u64,
}

/// Which detector each session runs, with its configuration.
#[derive(Debug, Clone)]
pub enum DetectorConfig {
    New { spec: TestSpec, params: TunedParams },
    Trwa { spec: TestSpec, params: TrwaParams },
    Triple { plan: Box<TriplePlan> },
}

impl DetectorConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            DetectorConfig::New { .. } => "new",
            DetectorConfig::Trwa { .. } => "trwa",
            DetectorConfig::Triple { .. } => "triple",
        }
    }

    fn fresh_state(&self) -> SessionState {
        match self {
            DetectorConfig::New { .. } => SessionState::New(DetectorState::new()),
            DetectorConfig::Trwa { .. } => SessionState::Trwa(TrwaState::new()),
            DetectorConfig::Triple { .. } => SessionState::Triple(TripleState::new()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum SessionState {
    New(DetectorState),
    Trwa(TrwaState),
    Triple(TripleState),
}

impl SessionState {
    fn counts(&self) -> (u64, u64) {
        match self {
            SessionState::New(st) => (st.n(), st.s()),
            SessionState::Trwa(st) => (st.n(), st.s()),
            SessionState::Triple(st) => (st.n(), st.s()),
        }
    }

    fn decision(&self) -> Option<Verdict> {
        match self {
            SessionState::New(st) => st.decision(),
            SessionState::Trwa(st) => st.decision(),
            SessionState::Triple(st) => st.decision(),
        }
    }
}

/// Per-source state: distinct destinations seen and the detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSession {
    src: String,
    seen_destinations: HashSet<String>,
    state: SessionState,
    decision_emitted: bool,
}

impl SourceSession {
    pub fn src(&self) -> &str {
        &self.src
    }

    /// Observation count; equals the number of distinct destinations.
    pub fn observations(&self) -> u64 {
        self.state.counts().0
    }

    pub fn successes(&self) -> u64 {
        self.state.counts().1
    }

    pub fn decision(&self) -> Option<Verdict> {
        self.state.decision()
    }

    pub fn distinct_destinations(&self) -> u64 {
        self.seen_destinations.len() as u64
    }
}

/// Discard and throughput counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub events: u64,
    pub duplicate_pairs: u64,
    pub after_decision: u64,
    pub decisions: u64,
}

/// In-memory session store; one detector per source.
#[derive(Debug)]
pub struct SessionStore {
    config: DetectorConfig,
    sessions: HashMap<String, SourceSession>,
    stats: IngestStats,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    kind: String,
    stats: IngestStats,
    sessions: Vec<SourceSession>,
}

impl SessionStore {
    pub fn new(config: DetectorConfig) -> Self {
        SessionStore {
            config,
            sessions: HashMap::new(),
            stats: IngestStats::default(),
        }
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn session(&self, src: &str) -> Option<&SourceSession> {
        self.sessions.get(src)
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Feed one event.  Returns a record when the source reaches its
    /// terminal decision on this event.
    pub fn ingest(
        &mut self,
        event: &ConnectionEvent,
    ) -> Result<Option<DecisionRecord>, IngestError> {
        event.validate()?;
        self.stats.events += 1;

        let session = self
            .sessions
            .entry(event.src.clone())
            .or_insert_with(|| SourceSession {
                src: event.src.clone(),
                seen_destinations: HashSet::new(),
                state: self.config.fresh_state(),
                decision_emitted: false,
            });

        // decision().is_some() with the flag unset can only come from a
        // hand-edited snapshot; heal the flag and discard either way
        if session.decision_emitted || session.state.decision().is_some() {
            session.decision_emitted = true;
            self.stats.after_decision += 1;
            return Ok(None);
        }
        if !session.seen_destinations.insert(event.dst.clone()) {
            self.stats.duplicate_pairs += 1;
            return Ok(None);
        }

        let success = event.is_success();
        let verdict = match (&mut session.state, &self.config) {
            (SessionState::New(st), DetectorConfig::New { spec, params }) => st
                .step(success, spec, params)
                .expect("session is undecided"),
            (SessionState::Trwa(st), DetectorConfig::Trwa { spec, params }) => st
                .step(success, params, spec)
                .expect("session is undecided"),
            (SessionState::Triple(st), DetectorConfig::Triple { plan }) => {
                st.step(success, plan).expect("session is undecided")
            }
            _ => unreachable!("session state kind always matches the store config"),
        };

        Ok(verdict.map(|decision| {
            session.decision_emitted = true;
            self.stats.decisions += 1;
            let (n, s) = session.state.counts();
            DecisionRecord {
                src: event.src.clone(),
                decision,
                n,
                s,
                ts: event.timestamp,
            }
        }))
    }

    /// End-of-stream summaries for sources still undecided, ordered by
    /// source identifier for reproducible output.
    pub fn undecided_summary(&self) -> Vec<UndecidedRecord> {
        let mut records: Vec<UndecidedRecord> = self
            .sessions
            .values()
            .filter(|s| !s.decision_emitted)
            .map(|s| {
                let (n, count) = s.state.counts();
                UndecidedRecord {
                    src: s.src.clone(),
                    decision: "undecided",
                    n,
                    s: count,
                }
            })
            .collect();
        records.sort_by(|a, b| a.src.cmp(&b.src));
        records
    }

    /// Serialize session state (not the configuration) for restart.
    pub fn snapshot_json(&self) -> String {
        let mut sessions: Vec<SourceSession> = self.sessions.values().cloned().collect();
        sessions.sort_by(|a, b| a.src.cmp(&b.src));
        serde_json::to_string_pretty(&Snapshot {
            kind: self.config.kind().to_string(),
            stats: self.stats,
            sessions,
        })
        .expect("snapshot serialization cannot fail")
    }

    /// Rebuild a store from a snapshot and the (externally supplied)
    /// configuration it was taken under.
    pub fn from_snapshot_json(config: DetectorConfig, json: &str) -> Result<Self, IngestError> {
        let snapshot: Snapshot =
            serde_json::from_str(json).map_err(|e| IngestError::SnapshotFormat {
                reason: e.to_string(),
            })?;
        if snapshot.kind != config.kind() {
            return Err(IngestError::SnapshotKindMismatch {
                snapshot: snapshot.kind,
                config: config.kind(),
            });
        }
        Ok(SessionStore {
            config,
            sessions: snapshot
                .sessions
                .into_iter()
                .map(|s| (s.src.clone(), s))
                .collect(),
            stats: snapshot.stats,
        })
    }
}
