//! Input sources. Trace playback, scripted generators and live operator input
//! all yield the same `(WristSample, GloveSample)` frames.
//!
//! Trace files are JSON lines, one frame per line:
//! `{"t": 0.0, "wrist": {"quat": [w, x, y, z], "pos": [x, y, z]}, "glove": [27 values]}`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retarget::{GloveSample, WristSample, GLOVE_CHANNELS};
use crate::se3::{PoseDoc, RigidTransform};

/// One synchronized input frame.
#[derive(Debug, Clone, PartialEq)]
pub struct InputFrame {
    pub wrist: WristSample,
    pub glove: GloveSample,
}

impl InputFrame {
    pub fn new(t: f64, wrist: RigidTransform, glove: [f64; GLOVE_CHANNELS]) -> Self {
        Self {
            wrist: WristSample { timestamp: t, pose: wrist },
            glove: GloveSample::new(t, glove),
        }
    }

    pub fn timestamp(&self) -> f64 {
        self.wrist.timestamp
    }

    fn retimed(&self, t: f64) -> Self {
        let mut f = self.clone();
        f.wrist.timestamp = t;
        f.glove.timestamp = t;
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Trace,
    Scripted,
    Live,
}

pub trait InputSource {
    fn kind(&self) -> SourceKind;
    /// Nominal rate in Hz.
    fn rate(&self) -> f64;
    /// Next frame, or `None` at end of stream.
    fn next_frame(&mut self) -> Result<Option<InputFrame>>;
}

/// Wire form of a trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLine {
    pub t: f64,
    pub wrist: PoseDoc,
    pub glove: Vec<f64>,
}

impl From<&InputFrame> for TraceLine {
    fn from(f: &InputFrame) -> Self {
        TraceLine {
            t: f.timestamp(),
            wrist: PoseDoc::from(&f.wrist.pose),
            glove: f.glove.angles.to_vec(),
        }
    }
}

impl TraceLine {
    fn into_frame(self) -> std::result::Result<InputFrame, String> {
        if !self.t.is_finite() {
            return Err("timestamp must be finite".into());
        }
        let pose = self
            .wrist
            .to_transform()
            .ok_or("wrist quaternion must be finite with unit norm")?;
        let glove = GloveSample::from_slice(self.t, &self.glove).map_err(|e| e.to_string())?;
        Ok(InputFrame {
            wrist: WristSample { timestamp: self.t, pose },
            glove,
        })
    }
}

/// Writes frames as a JSON-lines trace.
pub fn record_trace(path: impl AsRef<Path>, frames: &[InputFrame]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for f in frames {
        serde_json::to_writer(&mut w, &TraceLine::from(f))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads every frame of a trace file.
pub fn load_trace(path: impl AsRef<Path>) -> Result<Vec<InputFrame>> {
    let mut src = TraceSource::open(path, 60.0)?;
    let mut out = Vec::new();
    while let Some(f) = src.next_frame()? {
        out.push(f);
    }
    Ok(out)
}

/// Streams frames from a trace file, validating order line by line.
pub struct TraceSource {
    path: PathBuf,
    lines: std::io::Lines<BufReader<std::fs::File>>,
    line_no: usize,
    last_t: Option<f64>,
    rate: f64,
}

impl TraceSource {
    pub fn open(path: impl AsRef<Path>, rate: f64) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            lines: BufReader::new(file).lines(),
            path,
            line_no: 0,
            last_t: None,
            rate,
        })
    }

    fn parse_err(&self, reason: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line_no,
            reason: reason.into(),
        }
    }
}

impl InputSource for TraceSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Trace
    }

    fn rate(&self) -> f64 {
        self.rate
    }

    fn next_frame(&mut self) -> Result<Option<InputFrame>> {
        loop {
            let Some(line) = self.lines.next() else {
                return Ok(None);
            };
            self.line_no += 1;
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| self.parse_err(e.to_string()))?;
            let frame = parsed.into_frame().map_err(|e| self.parse_err(e))?;
            if let Some(prev) = self.last_t {
                if frame.timestamp() <= prev {
                    return Err(self.parse_err(format!(
                        "timestamp {} does not increase (previous {prev})",
                        frame.timestamp()
                    )));
                }
            }
            self.last_t = Some(frame.timestamp());
            return Ok(Some(frame));
        }
    }
}

/// In-memory frames replayed as a source.
pub struct VecSource {
    frames: std::vec::IntoIter<InputFrame>,
    rate: f64,
}

impl VecSource {
    pub fn new(frames: Vec<InputFrame>, rate: f64) -> Self {
        Self {
            frames: frames.into_iter(),
            rate,
        }
    }
}

impl InputSource for VecSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Trace
    }

    fn rate(&self) -> f64 {
        self.rate
    }

    fn next_frame(&mut self) -> Result<Option<InputFrame>> {
        Ok(self.frames.next())
    }
}

/// Wrist motion generators.
#[derive(Debug, Clone, PartialEq)]
pub enum WristScript {
    /// Fixed pose.
    Hold(RigidTransform),
    /// Horizontal circle around `center`, one revolution per `period`
    /// seconds, starting at `center + (radius, 0, 0)` and turning
    /// counter-clockwise seen from +z. Orientation is the tangent frame:
    /// x along the direction of travel, z up.
    Circle { center: Vector3<f64>, radius: f64, period: f64 },
    /// Gaussian position steps of std `step` per frame, fixed orientation.
    RandomWalk { start: RigidTransform, step: f64 },
}

/// Glove generators.
#[derive(Debug, Clone, PartialEq)]
pub enum GloveScript {
    Hold([f64; GLOVE_CHANNELS]),
    /// `offset + amplitude * (1 - cos(2 pi t / period + phase_c)) / 2` per
    /// channel, with phases spread evenly across channels.
    Sine {
        offset: [f64; GLOVE_CHANNELS],
        amplitude: f64,
        period: f64,
    },
    /// Per-channel Gaussian steps of std `step`, clamped to `[lo, hi]`.
    RandomWalk {
        start: [f64; GLOVE_CHANNELS],
        step: f64,
        lo: f64,
        hi: f64,
    },
}

pub fn circle_wrist(radius: f64, period: f64) -> Result<WristScript> {
    if !(radius >= 0.0 && radius.is_finite()) || !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter("circle needs radius >= 0 and period > 0".into()));
    }
    Ok(WristScript::Circle {
        center: Vector3::new(0.0, 0.0, 1.0),
        radius,
        period,
    })
}

pub fn sine_fingers(amplitude: f64, period: f64) -> Result<GloveScript> {
    if !(amplitude >= 0.0 && amplitude.is_finite()) || !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter("sine needs amplitude >= 0 and period > 0".into()));
    }
    Ok(GloveScript::Sine {
        offset: [0.0; GLOVE_CHANNELS],
        amplitude,
        period,
    })
}

pub fn random_walk(step: f64) -> Result<(WristScript, GloveScript)> {
    if !(step >= 0.0 && step.is_finite()) {
        return Err(Error::InvalidParameter("random walk step must be >= 0".into()));
    }
    Ok((
        WristScript::RandomWalk {
            start: RigidTransform::from_translation(0.0, 0.0, 1.0),
            step,
        },
        GloveScript::RandomWalk {
            start: [0.5; GLOVE_CHANNELS],
            step,
            lo: 0.0,
            hi: 1.5,
        },
    ))
}

/// Pose on the circle at time `t`.
pub fn circle_pose(center: &Vector3<f64>, radius: f64, period: f64, t: f64) -> RigidTransform {
    let w = 2.0 * std::f64::consts::PI / period;
    let (s, c) = (w * t).sin_cos();
    let x = Vector3::new(-s, c, 0.0);
    let z = Vector3::z();
    let y = z.cross(&x);
    let rot = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    RigidTransform::new(
        UnitQuaternion::from_rotation_matrix(&rot),
        center + Vector3::new(radius * c, radius * s, 0.0),
    )
}

/// Deterministic generator sampled at `rate` Hz for `duration` seconds.
pub struct ScriptedSource {
    wrist: WristScript,
    glove: GloveScript,
    rate: f64,
    frames: usize,
    index: usize,
    rng: ChaCha8Rng,
    walk_pose: Option<RigidTransform>,
    walk_glove: Option<[f64; GLOVE_CHANNELS]>,
    t0: f64,
}

impl ScriptedSource {
    pub fn new(wrist: WristScript, glove: GloveScript, rate: f64, duration: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) || !(duration >= 0.0) {
            return Err(Error::InvalidParameter("rate must be positive and duration non-negative".into()));
        }
        let frames = (duration * rate).floor() as usize + 1;
        Ok(Self {
            wrist,
            glove,
            rate,
            frames,
            index: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            walk_pose: None,
            walk_glove: None,
            t0: 0.0,
        })
    }

    /// Shifts every timestamp by `t0`.
    pub fn starting_at(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Wrist pose at local time `t` for the stateless scripts.
    pub fn wrist_at(script: &WristScript, t: f64) -> Option<RigidTransform> {
        match script {
            WristScript::Hold(p) => Some(*p),
            WristScript::Circle { center, radius, period } => Some(circle_pose(center, *radius, *period, t)),
            WristScript::RandomWalk { .. } => None,
        }
    }

    pub fn glove_at(script: &GloveScript, t: f64) -> Option<[f64; GLOVE_CHANNELS]> {
        match script {
            GloveScript::Hold(g) => Some(*g),
            GloveScript::Sine {
                offset,
                amplitude,
                period,
            } => {
                let w = 2.0 * std::f64::consts::PI / period;
                let mut g = *offset;
                for (c, v) in g.iter_mut().enumerate() {
                    let phase = 2.0 * std::f64::consts::PI * c as f64 / GLOVE_CHANNELS as f64;
                    *v += amplitude * 0.5 * (1.0 - (w * t + phase).cos());
                }
                Some(g)
            }
            GloveScript::RandomWalk { .. } => None,
        }
    }

    pub fn collect_all(mut self) -> Vec<InputFrame> {
        let mut out = Vec::with_capacity(self.frames);
        while let Ok(Some(f)) = self.next_frame() {
            out.push(f);
        }
        out
    }
}

impl InputSource for ScriptedSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Scripted
    }

    fn rate(&self) -> f64 {
        self.rate
    }

    fn next_frame(&mut self) -> Result<Option<InputFrame>> {
        if self.index >= self.frames {
            return Ok(None);
        }
        let t = self.index as f64 / self.rate;
        self.index += 1;
        let wrist = match &self.wrist {
            WristScript::RandomWalk { start, step } => {
                let next = match self.walk_pose {
                    None => *start,
                    Some(p) => {
                        let n = Normal::new(0.0, step.max(f64::MIN_POSITIVE)).expect("finite step");
                        let d = Vector3::new(n.sample(&mut self.rng), n.sample(&mut self.rng), n.sample(&mut self.rng));
                        RigidTransform::new(p.rotation, p.translation + d)
                    }
                };
                self.walk_pose = Some(next);
                next
            }
            other => Self::wrist_at(other, t).expect("stateless script"),
        };
        let glove = match &self.glove {
            GloveScript::RandomWalk { start, step, lo, hi } => {
                let next = match self.walk_glove {
                    None => *start,
                    Some(mut g) => {
                        for v in g.iter_mut() {
                            let d: f64 = self.rng.random_range(-1.0..=1.0) * step;
                            *v = (*v + d).clamp(*lo, *hi);
                        }
                        g
                    }
                };
                self.walk_glove = Some(next);
                next
            }
            other => Self::glove_at(other, t).expect("stateless script"),
        };
        Ok(Some(InputFrame::new(self.t0 + t, wrist, glove)))
    }
}

/// Operator input pushed at arbitrary times, resampled onto a fixed-rate
/// clock by zero-order hold.
#[derive(Debug, Clone)]
pub struct LiveSource {
    rate: f64,
    tick: u64,
    t0: f64,
    pending: std::collections::VecDeque<InputFrame>,
    held: Option<InputFrame>,
    closed: bool,
}

impl LiveSource {
    pub fn new(rate: f64, t0: f64) -> Self {
        Self {
            rate,
            tick: 0,
            t0,
            pending: Default::default(),
            held: None,
            closed: false,
        }
    }

    /// Queues a pushed frame; frames that do not advance time are dropped.
    pub fn push(&mut self, frame: InputFrame) {
        let last = self.pending.back().or(self.held.as_ref()).map(|f| f.timestamp());
        if last.is_none_or(|l| frame.timestamp() > l) {
            self.pending.push_back(frame);
        }
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    /// Time of the next clock tick.
    pub fn next_tick_time(&self) -> f64 {
        self.t0 + self.tick as f64 / self.rate
    }

    /// Advances one tick and returns the latest frame at or before it,
    /// re-stamped with the tick time. `None` until the first frame arrives.
    pub fn tick(&mut self) -> Option<InputFrame> {
        let t = self.next_tick_time();
        self.tick += 1;
        while self.pending.front().is_some_and(|f| f.timestamp() <= t) {
            self.held = self.pending.pop_front();
        }
        self.held.as_ref().map(|f| f.retimed(t))
    }
}

impl InputSource for LiveSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Live
    }

    fn rate(&self) -> f64 {
        self.rate
    }

    fn next_frame(&mut self) -> Result<Option<InputFrame>> {
        loop {
            if self.closed && self.pending.is_empty() {
                return Ok(None);
            }
            if self.held.is_none() && self.pending.is_empty() {
                return Ok(None);
            }
            if let Some(f) = self.tick() {
                return Ok(Some(f));
            }
        }
    }
}
