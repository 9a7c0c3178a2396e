//! Human-to-robot retargeting.
//!
//! The wrist drives the end-effector with a relative position and an absolute
//! orientation:
//!
//! ```text
//! p_e(t) = p_e(0) + (p_w(t) - p_w(0))
//! R_e(t) = R_w(t)
//! ```
//!
//! Glove channels drive hand joints one-to-one through a per-joint linear map
//! `f_i(x) = s_i (x - b_i) r_i` whose scale and bias are solved so that the
//! calibrated glove range lands exactly on the robot joint limits.
//!
//! # Glove channel layout
//!
//! 27 channels, 0-based. Fingers are thumb, index, middle, ring, pinky
//! (`finger` = 0..5); channel `5 * finger + slot` with slots
//! `0` spread, `1` MCP flexion, `2` PIP flexion, `3` DIP flexion, `4` roll.
//! Channels 25 and 26 are wrist flexion and wrist deviation.

use std::path::Path;

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, KinematicModel};
use crate::se3::RigidTransform;

pub const GLOVE_CHANNELS: usize = 27;

/// Wrist pose in the world frame (origin between the operator's feet).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WristSample {
    pub timestamp: f64,
    pub pose: RigidTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GloveSample {
    pub timestamp: f64,
    pub angles: [f64; GLOVE_CHANNELS],
}

impl GloveSample {
    pub fn new(timestamp: f64, angles: [f64; GLOVE_CHANNELS]) -> Self {
        Self { timestamp, angles }
    }

    pub fn from_slice(timestamp: f64, angles: &[f64]) -> Result<Self> {
        let arr: [f64; GLOVE_CHANNELS] = angles
            .try_into()
            .map_err(|_| Error::dim("glove sample", GLOVE_CHANNELS, angles.len()))?;
        if !arr.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("glove angles must be finite".into()));
        }
        Ok(Self::new(timestamp, arr))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndEffectorTarget {
    pub timestamp: f64,
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl EndEffectorTarget {
    pub fn from_pose(timestamp: f64, pose: &RigidTransform) -> Self {
        Self {
            timestamp,
            position: pose.translation,
            orientation: pose.rotation,
        }
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform::new(self.orientation, self.position)
    }
}

/// Relative-position, absolute-orientation wrist mapping.
pub fn wrist_to_target(
    current: &WristSample,
    wrist_origin: &WristSample,
    ee_origin: &EndEffectorTarget,
) -> EndEffectorTarget {
    EndEffectorTarget {
        timestamp: current.timestamp,
        position: ee_origin.position + (current.pose.translation - wrist_origin.pose.translation),
        orientation: current.pose.rotation,
    }
}

/// Direction indicator `r_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }

    pub fn from_sign(v: i32) -> Option<Self> {
        match v {
            1 => Some(Direction::Forward),
            -1 => Some(Direction::Reverse),
            _ => None,
        }
    }
}

/// One robot joint's requested correspondence, before solving `s` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub robot_joint: usize,
    pub glove_channel: usize,
    pub direction: Direction,
    pub glove_min: f64,
    pub glove_max: f64,
}

/// Solved linear map for one robot joint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointMap {
    pub glove_channel: usize,
    pub scale: f64,
    pub bias: f64,
    pub direction: Direction,
    pub glove_min: f64,
    pub glove_max: f64,
    pub robot_min: f64,
    pub robot_max: f64,
}

impl JointMap {
    /// `s (x - b) r`, without clamping.
    pub fn apply(&self, x: f64) -> f64 {
        self.scale * (x - self.bias) * self.direction.sign()
    }

    pub fn apply_clamped(&self, x: f64) -> f64 {
        self.apply(x).clamp(self.robot_min, self.robot_max)
    }

    /// Solves `s`, `b` so that the glove range endpoints map onto the robot
    /// limits, swapped when the direction is reversed.
    pub fn solve(
        glove_channel: usize,
        direction: Direction,
        (glove_min, glove_max): (f64, f64),
        (robot_min, robot_max): (f64, f64),
    ) -> Result<JointMap> {
        if !(glove_min.is_finite() && glove_max.is_finite()) || glove_max <= glove_min {
            return Err(Error::Mapping {
                field: format!("channel {glove_channel} glove range"),
                reason: format!("degenerate range [{glove_min}, {glove_max}]"),
            });
        }
        if !(robot_min.is_finite() && robot_max.is_finite()) || robot_max <= robot_min {
            return Err(Error::Mapping {
                field: format!("channel {glove_channel} robot range"),
                reason: format!("degenerate range [{robot_min}, {robot_max}]"),
            });
        }
        let scale = (robot_max - robot_min) / (glove_max - glove_min);
        let bias = match direction {
            Direction::Forward => glove_min - robot_min / scale,
            Direction::Reverse => glove_min + robot_max / scale,
        };
        Ok(JointMap {
            glove_channel,
            scale,
            bias,
            direction,
            glove_min,
            glove_max,
            robot_min,
            robot_max,
        })
    }
}

/// Per-robot-joint linear maps, indexed by robot joint.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingTable {
    maps: Vec<JointMap>,
}

impl MappingTable {
    pub fn maps(&self) -> &[JointMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    /// Glove sample to robot joint angles, clamped to the robot limits.
    pub fn map_hand(&self, glove: &GloveSample) -> JointConfig {
        JointConfig(
            self.maps
                .iter()
                .map(|m| m.apply_clamped(glove.angles[m.glove_channel]))
                .collect(),
        )
    }

    /// Reads a mapping config; robot limits come from `model`.
    pub fn load(path: impl AsRef<Path>, model: &KinematicModel) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, model)
    }

    pub fn from_json_str(s: &str, model: &KinematicModel) -> Result<Self> {
        let doc: MappingDoc = serde_json::from_str(s)?;
        let entries = doc
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                Ok(Correspondence {
                    robot_joint: e.robot_joint,
                    glove_channel: e.glove_channel,
                    direction: Direction::from_sign(e.direction).ok_or_else(|| Error::Mapping {
                        field: format!("entries[{i}].direction"),
                        reason: format!("must be 1 or -1, got {}", e.direction),
                    })?,
                    glove_min: e.glove_min,
                    glove_max: e.glove_max,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let limits: Vec<(f64, f64)> = model.joints().iter().map(|j| (j.lower, j.upper)).collect();
        build_mapping(&entries, &limits)
    }

    pub fn to_json_string(&self) -> String {
        let doc = MappingDoc {
            entries: self
                .maps
                .iter()
                .enumerate()
                .map(|(i, m)| EntryDoc {
                    robot_joint: i,
                    glove_channel: m.glove_channel,
                    direction: m.direction.sign() as i32,
                    glove_min: m.glove_min,
                    glove_max: m.glove_max,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("mapping serializes")
    }
}

/// Solves one [`JointMap`] per robot joint.
///
/// `robot_limits[i]` is `(min, max)` for robot joint `i`; every robot joint
/// must appear exactly once in `entries`.
pub fn build_mapping(entries: &[Correspondence], robot_limits: &[(f64, f64)]) -> Result<MappingTable> {
    let n = robot_limits.len();
    if entries.len() != n {
        return Err(Error::Mapping {
            field: "entries".into(),
            reason: format!("expected {n} entries, got {}", entries.len()),
        });
    }
    let mut maps: Vec<Option<JointMap>> = vec![None; n];
    for (i, e) in entries.iter().enumerate() {
        if e.robot_joint >= n {
            return Err(Error::Mapping {
                field: format!("entries[{i}].robot_joint"),
                reason: format!("joint {} does not exist", e.robot_joint),
            });
        }
        if e.glove_channel >= GLOVE_CHANNELS {
            return Err(Error::Mapping {
                field: format!("entries[{i}].glove_channel"),
                reason: format!("channel {} outside 0..{GLOVE_CHANNELS}", e.glove_channel),
            });
        }
        if maps[e.robot_joint].is_some() {
            return Err(Error::Mapping {
                field: format!("entries[{i}].robot_joint"),
                reason: format!("joint {} mapped twice", e.robot_joint),
            });
        }
        let m = JointMap::solve(e.glove_channel, e.direction, (e.glove_min, e.glove_max), robot_limits[e.robot_joint])
            .map_err(|err| match err {
                Error::Mapping { reason, .. } => Error::Mapping {
                    field: format!("entries[{i}]"),
                    reason,
                },
                other => other,
            })?;
        maps[e.robot_joint] = Some(m);
    }
    Ok(MappingTable {
        maps: maps.into_iter().map(|m| m.expect("every joint assigned")).collect(),
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MappingDoc {
    entries: Vec<EntryDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    robot_joint: usize,
    glove_channel: usize,
    direction: i32,
    glove_min: f64,
    glove_max: f64,
}

/// Default glove correspondence for the bundled 16-joint hand.
pub const HAND16_MAPPING_JSON: &str = include_str!("../models/hand16_mapping.json");

pub fn default_hand_mapping(hand: &KinematicModel) -> Result<MappingTable> {
    MappingTable::from_json_str(HAND16_MAPPING_JSON, hand)
}
