//! Headless playback of a recorded trace with a pedal script.

use std::io::{BufRead, BufReader};
use std::path::Path;

use phantom_core::fsm::{DemoRecord, Pedal, Phase, PhaseCounts};
use phantom_core::io_streams::{load_trace, InputFrame};
use phantom_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::Scene;
use crate::error::{Result, SessionError};
use crate::session::Session;

/// One pedal script line: `{"t": 1.5, "state": "down"}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedalEvent {
    pub t: f64,
    pub state: Pedal,
}

/// Reads a JSON-lines pedal script. Blank lines are skipped; times must be
/// finite and non-decreasing.
pub fn load_pedal_script(path: impl AsRef<Path>) -> Result<Vec<PedalEvent>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| SessionError::io(path, e))?;
    let mut out: Vec<PedalEvent> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SessionError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| SessionError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let ev: PedalEvent = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if !ev.t.is_finite() {
            return Err(parse_err("time must be finite".into()));
        }
        if out.last().is_some_and(|p| ev.t < p.t) {
            return Err(parse_err("times must be non-decreasing".into()));
        }
        out.push(ev);
    }
    Ok(out)
}

pub fn write_pedal_script(path: impl AsRef<Path>, events: &[PedalEvent]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for e in events {
        text.push_str(&serde_json::to_string(e)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| SessionError::io(path, e))
}

/// Time spent in each phase (s).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseDurations {
    pub live: f64,
    pub preview: f64,
    pub executing: f64,
}

impl PhaseDurations {
    fn add(&mut self, phase: Phase, dt: f64) {
        match phase {
            Phase::Live => self.live += dt,
            Phase::Preview => self.preview += dt,
            Phase::Executing => self.executing += dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub durations: PhaseDurations,
    /// Recorded samples per phase (PREVIEW is always zero).
    pub samples: PhaseCounts,
    pub preview_intervals: usize,
    pub commits: usize,
    pub gate_activations: usize,
    pub planner_failures: usize,
    /// Pedal events the state machine refused in the phase they arrived in.
    pub rejected_pedals: usize,
    pub final_phase: Phase,
}

/// Tracks the phase timeline while replaying.
struct Timeline {
    phase: Phase,
    since: f64,
    durations: PhaseDurations,
    preview_intervals: usize,
    commits: usize,
}

impl Timeline {
    fn observe(&mut self, phase: Phase, t: f64) {
        if phase != self.phase {
            self.durations.add(self.phase, (t - self.since).max(0.0));
            if phase == Phase::Preview {
                self.preview_intervals += 1;
            }
            if phase == Phase::Executing {
                self.commits += 1;
            }
            self.phase = phase;
            self.since = self.since.max(t);
        }
    }
}

/// Plays `frames` through a fresh session, applying each pedal event just
/// before the first frame at or after its time. Pedal events after the last
/// frame are applied at the end. Identical inputs give identical records.
pub fn replay(scene: &Scene, frames: &[InputFrame], pedals: &[PedalEvent]) -> Result<(DemoRecord, ReplaySummary)> {
    let mut session = Session::new(scene)?;
    let t0 = frames.first().map(|f| f.timestamp()).unwrap_or(0.0);
    let mut timeline = Timeline {
        phase: session.phase(),
        since: t0,
        durations: PhaseDurations::default(),
        preview_intervals: 0,
        commits: 0,
    };
    let mut rejected = 0;
    let mut pending = pedals.iter().peekable();
    let mut apply_pedal = |session: &mut Session, timeline: &mut Timeline, ev: &PedalEvent| -> Result<()> {
        match session.pedal(ev.state) {
            Ok(_) => {}
            Err(Error::Rejected { .. }) => rejected += 1,
            Err(e) => return Err(e.into()),
        }
        timeline.observe(session.phase(), ev.t);
        Ok(())
    };
    for frame in frames {
        while let Some(ev) = pending.next_if(|ev| ev.t <= frame.timestamp()) {
            apply_pedal(&mut session, &mut timeline, ev)?;
        }
        session.input(frame.clone())?;
        timeline.observe(session.phase(), frame.timestamp());
    }
    for ev in pending {
        apply_pedal(&mut session, &mut timeline, ev)?;
    }
    let end = frames.last().map(|f| f.timestamp()).unwrap_or(t0);
    timeline.durations.add(timeline.phase, (end - timeline.since).max(0.0));

    let state = session.state();
    let (gate_activations, planner_failures, final_phase) = (state.gate_activations(), state.planner_failures(), state.phase());
    let record = session.into_record();
    let summary = ReplaySummary {
        durations: timeline.durations,
        samples: record.counts(),
        preview_intervals: timeline.preview_intervals,
        commits: timeline.commits,
        gate_activations,
        planner_failures,
        rejected_pedals: rejected,
        final_phase,
    };
    Ok((record, summary))
}

/// [`replay`] on files; writes the demo to `out`.
pub fn replay_files(
    scene: &Scene,
    trace: impl AsRef<Path>,
    pedal_script: impl AsRef<Path>,
    out: impl AsRef<Path>,
) -> Result<(DemoRecord, ReplaySummary)> {
    let frames = load_trace(trace)?;
    let pedals = load_pedal_script(pedal_script)?;
    let (record, summary) = replay(scene, &frames, &pedals)?;
    record.finalize(out)?;
    Ok((record, summary))
}
