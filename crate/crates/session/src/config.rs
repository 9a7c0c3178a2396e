//! Scene configuration file and the resolved scene built from it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector3};
use phantom_core::calibration::{FrameGraph, Intrinsics, TagObservation, BASE, FIXED_CAM, FLOAT_CAM, TAG};
use phantom_core::collision_net::{Ccn, CollisionGuard, Cpn, DEFAULT_GATE_THRESHOLD};
use phantom_core::fsm::{DemoMetadata, SessionSetup, DEFAULT_PLAN_DT};
use phantom_core::kinematics::{bundled, load_model, IkOptions};
use phantom_core::retarget::{default_hand_mapping, MappingTable};
use phantom_core::se3::PoseDoc;
use phantom_core::{JointConfig, KinematicModel, RigidTransform};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SessionError};

pub const DEFAULT_RATE_HZ: f64 = 60.0;

/// How a camera's pose in the base frame is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoseSource {
    /// Static camera. The first fixed camera in the list carries the
    /// hand-eye result and observes the tag; further fixed cameras are
    /// declared directly in the base frame.
    Fixed,
    /// Moving camera located through its tag observations.
    Floating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub name: String,
    pub intrinsics: Intrinsics,
    pub source: PoseSource,
    /// `base -> camera`. For a floating camera this is the pose at which the
    /// simulated camera first observes the tag.
    pub pose: PoseDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkPaths {
    pub cpn: PathBuf,
    pub ccn: PathBuf,
}

/// Contents of `scene.json`. Omitted model and mapping paths select the
/// bundled arm, hand and mapping; relative paths are resolved against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default = "default_task")]
    pub task: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub arm_model: Option<PathBuf>,
    #[serde(default)]
    pub hand_model: Option<PathBuf>,
    /// Palm pose relative to the end-effector frame.
    #[serde(default)]
    pub hand_mount: Option<PoseDoc>,
    /// Arm joint carrying the hand; defaults to the last arm joint.
    #[serde(default)]
    pub flange_joint: Option<usize>,
    /// Arm configuration at session start.
    #[serde(default)]
    pub arm_home: Option<Vec<f64>>,
    #[serde(default)]
    pub mapping: Option<PathBuf>,
    #[serde(default)]
    pub networks: Option<NetworkPaths>,
    #[serde(default = "default_cameras")]
    pub cameras: Vec<CameraConfig>,
    /// `base -> tag` of the simulated calibration tag.
    #[serde(default = "default_tag")]
    pub tag: PoseDoc,
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    #[serde(default = "default_gate")]
    pub gate_threshold: f64,
    #[serde(default = "default_plan_dt")]
    pub plan_dt: f64,
}

fn default_task() -> String {
    "teleop".into()
}

fn default_rate() -> f64 {
    DEFAULT_RATE_HZ
}

fn default_gate() -> f64 {
    DEFAULT_GATE_THRESHOLD
}

fn default_plan_dt() -> f64 {
    DEFAULT_PLAN_DT
}

fn default_tag() -> PoseDoc {
    RigidTransform::from_translation(0.6, 0.0, 0.0).into()
}

/// A camera at `eye` whose optical (+z) axis points at `target`.
fn looking_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> RigidTransform {
    let z = (target - eye).normalize();
    let x = up.cross(&z).normalize();
    let y = z.cross(&x);
    let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
    let r = UnitQuaternion::from_matrix(&m);
    RigidTransform::new(r, eye)
}

fn default_intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 600.0,
        fy: 600.0,
        cx: 320.0,
        cy: 240.0,
    }
}

fn default_cameras() -> Vec<CameraConfig> {
    let target = Vector3::new(0.3, 0.0, 0.3);
    vec![
        CameraConfig {
            name: "third_person".into(),
            intrinsics: default_intrinsics(),
            source: PoseSource::Fixed,
            pose: looking_at(Vector3::new(1.6, -1.0, 1.0), target, Vector3::z()).into(),
        },
        CameraConfig {
            name: "top_down".into(),
            intrinsics: default_intrinsics(),
            source: PoseSource::Fixed,
            pose: looking_at(Vector3::new(0.3, 0.0, 2.0), target, Vector3::x()).into(),
        },
        CameraConfig {
            name: "floating".into(),
            intrinsics: default_intrinsics(),
            source: PoseSource::Floating,
            pose: looking_at(Vector3::new(0.9, 0.8, 0.7), target, Vector3::z()).into(),
        },
    ]
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            task: default_task(),
            seed: 0,
            arm_model: None,
            hand_model: None,
            hand_mount: None,
            flange_joint: None,
            arm_home: None,
            mapping: None,
            networks: None,
            cameras: default_cameras(),
            tag: default_tag(),
            rate_hz: default_rate(),
            gate_threshold: default_gate(),
            plan_dt: default_plan_dt(),
        }
    }
}

impl SceneConfig {
    /// Reads a config file and resolves its relative paths.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SessionError::io(path, e))?;
        let mut cfg: SceneConfig = serde_json::from_str(&text)
            .map_err(|e| SessionError::config(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(dir);
        Ok(cfg)
    }

    /// Makes every relative file path relative to `dir` instead.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        self.arm_model.as_mut().map(fix);
        self.hand_model.as_mut().map(fix);
        self.mapping.as_mut().map(fix);
        if let Some(n) = self.networks.as_mut() {
            fix(&mut n.cpn);
            fix(&mut n.ccn);
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(SessionError::config("rate_hz", "must be positive"));
        }
        if !(self.gate_threshold > 0.0 && self.gate_threshold < 1.0) {
            return Err(SessionError::config("gate_threshold", "must lie in (0, 1)"));
        }
        if !(self.plan_dt.is_finite() && self.plan_dt > 0.0) {
            return Err(SessionError::config("plan_dt", "must be positive"));
        }
        let mut names = std::collections::BTreeSet::new();
        for (i, c) in self.cameras.iter().enumerate() {
            if c.name.is_empty() || !names.insert(c.name.as_str()) {
                return Err(SessionError::config(format!("cameras[{i}].name"), "must be non-empty and unique"));
            }
            if c.name == BASE || c.name == TAG {
                return Err(SessionError::config(format!("cameras[{i}].name"), "reserved frame name"));
            }
            let k = &c.intrinsics;
            if !(k.fx > 0.0 && k.fy > 0.0 && k.cx.is_finite() && k.cy.is_finite()) {
                return Err(SessionError::config(format!("cameras[{i}].intrinsics"), "focal lengths must be positive"));
            }
            if c.pose.to_transform().is_none() {
                return Err(SessionError::config(format!("cameras[{i}].pose"), "quaternion is not normalizable"));
            }
        }
        let floating = self.cameras.iter().filter(|c| c.source == PoseSource::Floating).count();
        if floating > 1 {
            return Err(SessionError::config("cameras", "at most one floating camera is supported"));
        }
        if floating == 1 && !self.cameras.iter().any(|c| c.source == PoseSource::Fixed) {
            return Err(SessionError::config("cameras", "a floating camera needs a fixed camera to locate the tag"));
        }
        if self.tag.to_transform().is_none() {
            return Err(SessionError::config("tag", "quaternion is not normalizable"));
        }
        Ok(())
    }
}

/// Cameras placed in the base frame through the calibration chain.
#[derive(Debug, Clone)]
pub struct CameraRig {
    cameras: Vec<CameraConfig>,
    graph: FrameGraph,
    base_to_tag: RigidTransform,
    calibrated: Option<usize>,
    floating: Option<usize>,
}

impl CameraRig {
    pub fn new(cameras: &[CameraConfig], base_to_tag: RigidTransform) -> Result<Self> {
        let calibrated = cameras.iter().position(|c| c.source == PoseSource::Fixed);
        let floating = cameras.iter().position(|c| c.source == PoseSource::Floating);
        let mut rig = Self {
            cameras: cameras.to_vec(),
            graph: FrameGraph::new(),
            base_to_tag,
            calibrated,
            floating,
        };
        if let Some(i) = calibrated {
            let base_to_fixed = rig.true_pose(i);
            rig.graph.set_hand_eye(base_to_fixed);
            let obs = TagObservation::new(FIXED_CAM, base_to_fixed.inverse().compose(&base_to_tag), 0.0);
            rig.graph.observe(&obs)?;
        }
        if let Some(i) = floating {
            let pose = rig.true_pose(i);
            rig.observe_floating(&pose, 0.0)?;
        }
        Ok(rig)
    }

    fn true_pose(&self, i: usize) -> RigidTransform {
        self.cameras[i].pose.to_transform().expect("validated pose")
    }

    /// Simulates the floating camera seeing the tag from `base_to_float` and
    /// re-solves its pose through the chain.
    pub fn observe_floating(&mut self, base_to_float: &RigidTransform, t: f64) -> Result<RigidTransform> {
        if self.floating.is_none() {
            return Err(SessionError::config("cameras", "no floating camera configured"));
        }
        let obs = TagObservation::new(FLOAT_CAM, base_to_float.inverse().compose(&self.base_to_tag), t);
        Ok(self.graph.observe(&obs)?)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.cameras.iter().map(|c| c.name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.cameras.iter().any(|c| c.name == name)
    }

    pub fn graph(&self) -> &FrameGraph {
        &self.graph
    }

    /// `base -> camera` for a named camera.
    pub fn pose(&self, name: &str) -> Option<RigidTransform> {
        let i = self.cameras.iter().position(|c| c.name == name)?;
        if Some(i) == self.calibrated {
            self.graph.transform(BASE, FIXED_CAM)
        } else if Some(i) == self.floating {
            self.graph.transform(BASE, FLOAT_CAM)
        } else {
            Some(self.true_pose(i))
        }
    }

    /// Every camera and the tag in the base frame, keyed by name.
    pub fn frames(&self) -> BTreeMap<String, PoseDoc> {
        let mut out: BTreeMap<String, PoseDoc> = self
            .cameras
            .iter()
            .filter_map(|c| Some((c.name.clone(), self.pose(&c.name)?.into())))
            .collect();
        if let Some(t) = self.graph.transform(BASE, TAG) {
            out.insert(TAG.into(), t.into());
        }
        out
    }
}

/// A validated, fully loaded scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub config: SceneConfig,
    pub setup: SessionSetup,
    /// Hand model on its own; the collision networks work in its joint space.
    pub hand: KinematicModel,
    pub rig: CameraRig,
}

impl Scene {
    pub fn build(config: SceneConfig) -> Result<Self> {
        config.validate()?;
        let load = |p: &Option<PathBuf>, fallback: fn() -> KinematicModel| -> Result<KinematicModel> {
            Ok(match p {
                Some(p) => load_model(p)?,
                None => fallback(),
            })
        };
        let arm = load(&config.arm_model, bundled::arm6)?;
        let hand = load(&config.hand_model, bundled::hand16)?;
        let flange = match (config.flange_joint, &config.arm_model) {
            (Some(j), _) => j,
            (None, None) => bundled::ARM_FLANGE_JOINT,
            (None, Some(_)) => arm.dof().checked_sub(1).ok_or_else(|| SessionError::config("arm_model", "arm has no joints"))?,
        };
        if flange >= arm.dof() {
            return Err(SessionError::config("flange_joint", format!("arm has {} joints", arm.dof())));
        }
        let mount = match &config.hand_mount {
            Some(p) => p.to_transform().ok_or_else(|| SessionError::config("hand_mount", "quaternion is not normalizable"))?,
            None => bundled::hand_mount(),
        };
        let model = arm.attach(flange, mount, &hand)?;

        let mapping = match &config.mapping {
            Some(p) => MappingTable::load(p, &hand)?,
            None => default_hand_mapping(&hand)?,
        };
        let guard = match &config.networks {
            Some(n) => {
                let cpn = Cpn::load(&n.cpn)?;
                let ccn = Ccn::load(&n.ccn)?;
                if cpn.dof() != hand.dof() || ccn.dof() != hand.dof() || cpn.link_count() != hand.link_count() {
                    return Err(SessionError::config("networks", "network shapes do not match the hand model"));
                }
                Some(CollisionGuard::new(cpn, ccn, config.gate_threshold))
            }
            None => None,
        };

        let home = match (&config.arm_home, &config.arm_model) {
            (Some(h), _) => JointConfig(h.clone()),
            (None, None) => bundled::arm_home(),
            (None, Some(_)) => JointConfig(arm.joints().iter().map(|j| j.mid()).collect()),
        };
        if home.len() != arm.dof() {
            return Err(SessionError::config("arm_home", format!("expected {} values, got {}", arm.dof(), home.len())));
        }
        let mut initial = JointConfig::zeros(model.dof());
        initial.0[..arm.dof()].copy_from_slice(&home.0);
        let initial = initial.clamped(&model);

        let rig = CameraRig::new(&config.cameras, config.tag.to_transform().expect("validated tag"))?;
        let setup = SessionSetup {
            ee_joint: flange,
            hand_offset: arm.dof(),
            mapping,
            guard,
            ik: IkOptions::default(),
            plan_dt: config.plan_dt,
            initial,
            model,
        };
        Ok(Self {
            config,
            setup,
            hand,
            rig,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::build(SceneConfig::load(path)?)
    }

    /// Header written at the top of every demo recorded in this scene.
    pub fn metadata(&self) -> DemoMetadata {
        DemoMetadata {
            task: self.config.task.clone(),
            seed: self.config.seed,
            model_hash: self.setup.model.content_hash(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scene_builds_and_places_cameras() {
        let scene = Scene::build(SceneConfig::default()).unwrap();
        assert_eq!(scene.setup.model.dof(), bundled::ARM_DOF + bundled::HAND_DOF);
        let frames = scene.rig.frames();
        for c in default_cameras() {
            let est = frames[&c.name].to_transform().unwrap();
            let truth = c.pose.to_transform().unwrap();
            assert!(est.translation_distance(&truth) < 1e-12, "{}", c.name);
            assert!(est.rotation_distance(&truth) < 1e-9, "{}", c.name);
        }
    }

    #[test]
    fn cameras_look_at_their_target() {
        let t = looking_at(Vector3::new(1.0, 2.0, 3.0), Vector3::zeros(), Vector3::z());
        let axis = t.transform_vector(&Vector3::z());
        assert!((axis + Vector3::new(1.0, 2.0, 3.0).normalize()).norm() < 1e-12);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let cfg = SceneConfig {
            rate_hz: 0.0,
            ..SceneConfig::default()
        };
        assert!(matches!(Scene::build(cfg), Err(SessionError::Config { field, .. }) if field == "rate_hz"));
        let mut cfg = SceneConfig::default();
        cfg.cameras[1].name = cfg.cameras[0].name.clone();
        assert!(matches!(Scene::build(cfg), Err(SessionError::Config { field, .. }) if field == "cameras[1].name"));
        let cfg = SceneConfig {
            mapping: Some("/nonexistent/mapping.json".into()),
            ..SceneConfig::default()
        };
        assert!(matches!(Scene::build(cfg), Err(SessionError::Core(phantom_core::Error::Io { .. }))));
    }
}
