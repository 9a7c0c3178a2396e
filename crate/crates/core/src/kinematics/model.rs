use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::se3::{PoseDoc, RigidTransform};

/// Axis unit-norm tolerance for loaded joints.
pub const AXIS_NORM_TOL: f64 = 1e-9;

/// A revolute joint. Its frame is `parent ∘ origin ∘ Rot(axis, q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    /// `None` means the joint hangs off the root frame.
    pub parent: Option<usize>,
    pub origin: RigidTransform,
    pub axis: Vector3<f64>,
    pub lower: f64,
    pub upper: f64,
    /// rad/s
    pub max_velocity: f64,
}

impl JointSpec {
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }
}

/// Line segment swept by a sphere, in some frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        Self { a, b, radius }
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Self::new(center, center, radius)
    }

    pub fn transformed(&self, t: &RigidTransform) -> Capsule {
        Capsule {
            a: t.transform_point(&self.a),
            b: t.transform_point(&self.b),
            radius: self.radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    /// Owning joint; the capsule is expressed in that joint's frame.
    pub joint: usize,
    pub capsule: Capsule,
    /// Extra link indices never tested against this one. Parent/child and
    /// same-joint pairs are always masked on top of these.
    pub mask: Vec<usize>,
}

/// Vector of joint angles in radians, one per model joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn zeros(n: usize) -> Self {
        JointConfig(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// First joint (index, value) outside its limits, if any.
    pub fn limit_violation(&self, model: &KinematicModel) -> Option<(usize, f64)> {
        self.0
            .iter()
            .zip(model.joints())
            .enumerate()
            .find(|(_, (v, j))| !(**v >= j.lower && **v <= j.upper))
            .map(|(i, (v, _))| (i, *v))
    }

    pub fn within_limits(&self, model: &KinematicModel) -> bool {
        self.len() == model.dof() && self.limit_violation(model).is_none()
    }

    pub fn clamped(&self, model: &KinematicModel) -> JointConfig {
        JointConfig(
            self.0
                .iter()
                .zip(model.joints())
                .map(|(v, j)| v.clamp(j.lower, j.upper))
                .collect(),
        )
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        JointConfig(v)
    }
}

/// Immutable, validated joint/link tree.
#[derive(Debug, Clone)]
pub struct KinematicModel {
    root: String,
    joints: Vec<JointSpec>,
    links: Vec<LinkSpec>,
    /// Joint indices with parents before children.
    order: Vec<usize>,
    /// `subtree[i][j]` is true when joint j is i or a descendant of i.
    subtree: Vec<Vec<bool>>,
    /// Symmetric link-pair mask.
    masked: Vec<Vec<bool>>,
    /// Unmasked link pairs (i < j).
    pairs: Vec<(usize, usize)>,
}

impl KinematicModel {
    /// Validates the tree and builds the derived tables.
    pub fn new(root: impl Into<String>, joints: Vec<JointSpec>, links: Vec<LinkSpec>) -> Result<Self> {
        let n = joints.len();
        if n == 0 {
            return Err(Error::model("joints", "model has no joints"));
        }
        for (i, j) in joints.iter().enumerate() {
            let field = |f: &str| format!("joints[{i}].{f}");
            if let Some(p) = j.parent {
                if p >= n {
                    return Err(Error::model(field("parent"), format!("index {p} out of range")));
                }
                if p == i {
                    return Err(Error::model(field("parent"), "joint is its own parent"));
                }
            }
            if !(j.axis.iter().all(|v| v.is_finite()) && (j.axis.norm() - 1.0).abs() <= AXIS_NORM_TOL) {
                return Err(Error::model(field("axis"), "axis must have unit norm"));
            }
            if !(j.lower.is_finite() && j.upper.is_finite()) {
                return Err(Error::model(field("lower"), "limits must be finite"));
            }
            if j.lower >= j.upper {
                return Err(Error::model(
                    field("lower"),
                    format!("lower {} must be below upper {}", j.lower, j.upper),
                ));
            }
            if !(j.max_velocity.is_finite() && j.max_velocity > 0.0) {
                return Err(Error::model(field("max_velocity"), "must be positive"));
            }
        }

        let order = topological_order(&joints)?;

        let mut subtree = vec![vec![false; n]; n];
        for &j in order.iter().rev() {
            subtree[j][j] = true;
        }
        for &j in &order {
            // walk up ancestors
            let mut cur = joints[j].parent;
            while let Some(p) = cur {
                subtree[p][j] = true;
                cur = joints[p].parent;
            }
        }

        let m = links.len();
        for (i, l) in links.iter().enumerate() {
            if l.joint >= n {
                return Err(Error::model(
                    format!("links[{i}].joint"),
                    format!("joint index {} does not exist", l.joint),
                ));
            }
            let c = &l.capsule;
            if !(c.radius.is_finite() && c.radius > 0.0) {
                return Err(Error::model(format!("links[{i}].capsule.radius"), "radius must be positive"));
            }
            if !c.a.iter().chain(c.b.iter()).all(|v| v.is_finite()) {
                return Err(Error::model(format!("links[{i}].capsule"), "endpoints must be finite"));
            }
            if let Some(bad) = l.mask.iter().find(|&&k| k >= m) {
                return Err(Error::model(format!("links[{i}].mask"), format!("link index {bad} does not exist")));
            }
        }

        let mut masked = vec![vec![false; m]; m];
        for i in 0..m {
            masked[i][i] = true;
            for &k in &links[i].mask {
                masked[i][k] = true;
                masked[k][i] = true;
            }
            for j in 0..m {
                let (ji, jj) = (links[i].joint, links[j].joint);
                if ji == jj || joints[jj].parent == Some(ji) || joints[ji].parent == Some(jj) {
                    masked[i][j] = true;
                }
            }
        }
        let mut pairs = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if !masked[i][j] {
                    pairs.push((i, j));
                }
            }
        }

        Ok(Self {
            root: root.into(),
            joints,
            links,
            order,
            subtree,
            masked,
            pairs,
        })
    }

    pub fn root_name(&self) -> &str {
        &self.root
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub(crate) fn order(&self) -> &[usize] {
        &self.order
    }

    /// True when joint `j` is `i` itself or lies below it.
    pub fn in_subtree(&self, i: usize, j: usize) -> bool {
        self.subtree[i][j]
    }

    pub fn is_masked(&self, a: usize, b: usize) -> bool {
        self.masked[a][b]
    }

    /// Link pairs that are tested for collision, `i < j`.
    pub fn collision_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn lower_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.lower).collect()
    }

    pub fn upper_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.upper).collect()
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn check_len(&self, q: &JointConfig) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::dim("joint configuration", self.dof(), q.len()));
        }
        Ok(())
    }

    /// Mounts `child`'s root onto joint `at` of `self` through `mount`.
    ///
    /// Child joints and links are appended after the parent's, so a combined
    /// configuration is `[parent q..., child q...]`.
    pub fn attach(&self, at: usize, mount: RigidTransform, child: &KinematicModel) -> Result<KinematicModel> {
        if at >= self.dof() {
            return Err(Error::model("attach", format!("joint {at} does not exist")));
        }
        let off_j = self.dof();
        let off_l = self.link_count();
        let mut joints = self.joints.clone();
        for j in &child.joints {
            let mut j = j.clone();
            match j.parent {
                Some(p) => j.parent = Some(p + off_j),
                None => {
                    j.parent = Some(at);
                    j.origin = mount.compose(&j.origin);
                }
            }
            joints.push(j);
        }
        let mut links = self.links.clone();
        for l in &child.links {
            let mut l = l.clone();
            l.joint += off_j;
            l.mask = l.mask.iter().map(|k| k + off_l).collect();
            links.push(l);
        }
        KinematicModel::new(self.root.clone(), joints, links)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(s).map_err(|e| Error::model(json_field(&e), e.to_string()))?;
        doc.into_model()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelDoc::from_model(self)).expect("model serializes")
    }

    /// Hex SHA-256 of the canonical JSON form; identifies the model in demo headers.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&ModelDoc::from_model(self)).expect("model serializes"));
        hex::encode(h.finalize())
    }
}

/// Reads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<KinematicModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    KinematicModel::from_json_str(&text)
}

fn json_field(e: &serde_json::Error) -> String {
    format!("line {} column {}", e.line(), e.column())
}

fn topological_order(joints: &[JointSpec]) -> Result<Vec<usize>> {
    let n = joints.len();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if state[start] == 2 {
            continue;
        }
        let mut chain = Vec::new();
        let mut cur = Some(start);
        while let Some(j) = cur {
            match state[j] {
                2 => break,
                1 => {
                    return Err(Error::model(
                        format!("joints[{j}].parent"),
                        "parent links form a cycle",
                    ))
                }
                _ => {
                    state[j] = 1;
                    chain.push(j);
                    cur = joints[j].parent;
                }
            }
        }
        for &j in chain.iter().rev() {
            state[j] = 2;
            order.push(j);
        }
    }
    Ok(order)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    #[serde(default = "default_root")]
    root: String,
    joints: Vec<JointDoc>,
    links: Vec<LinkDoc>,
}

fn default_root() -> String {
    "base".to_string()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointDoc {
    name: String,
    parent: Option<usize>,
    origin: PoseDoc,
    axis: [f64; 3],
    lower: f64,
    upper: f64,
    max_velocity: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    joint: usize,
    capsule: CapsuleDoc,
    #[serde(default)]
    mask: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsuleDoc {
    a: [f64; 3],
    b: [f64; 3],
    radius: f64,
}

impl ModelDoc {
    fn into_model(self) -> Result<KinematicModel> {
        let joints = self
            .joints
            .into_iter()
            .enumerate()
            .map(|(i, j)| {
                let origin = j.origin.to_transform().ok_or_else(|| {
                    Error::model(format!("joints[{i}].origin.quat"), "quaternion must have unit norm")
                })?;
                Ok(JointSpec {
                    name: j.name,
                    parent: j.parent,
                    origin,
                    axis: Vector3::from(j.axis),
                    lower: j.lower,
                    upper: j.upper,
                    max_velocity: j.max_velocity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let links = self
            .links
            .into_iter()
            .enumerate()
            .map(|(i, l)| LinkSpec {
                name: l.name.unwrap_or_else(|| format!("link{i}")),
                joint: l.joint,
                capsule: Capsule::new(Vector3::from(l.capsule.a), Vector3::from(l.capsule.b), l.capsule.radius),
                mask: l.mask,
            })
            .collect();
        KinematicModel::new(self.root, joints, links)
    }

    fn from_model(m: &KinematicModel) -> Self {
        ModelDoc {
            root: m.root.clone(),
            joints: m
                .joints
                .iter()
                .map(|j| JointDoc {
                    name: j.name.clone(),
                    parent: j.parent,
                    origin: PoseDoc::from(&j.origin),
                    axis: [j.axis.x, j.axis.y, j.axis.z],
                    lower: j.lower,
                    upper: j.upper,
                    max_velocity: j.max_velocity,
                })
                .collect(),
            links: m
                .links
                .iter()
                .map(|l| LinkDoc {
                    name: Some(l.name.clone()),
                    joint: l.joint,
                    capsule: CapsuleDoc {
                        a: l.capsule.a.into(),
                        b: l.capsule.b.into(),
                        radius: l.capsule.radius,
                    },
                    mask: l.mask.clone(),
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn joint(name: &str, parent: Option<usize>) -> JointSpec {
        JointSpec {
            name: name.into(),
            parent,
            origin: RigidTransform::from_translation(0.1, 0.0, 0.0),
            axis: Vector3::z(),
            lower: -1.0,
            upper: 1.0,
            max_velocity: 1.0,
        }
    }

    fn link(joint: usize) -> LinkSpec {
        LinkSpec {
            name: format!("l{joint}"),
            joint,
            capsule: Capsule::new(Vector3::zeros(), Vector3::x() * 0.1, 0.01),
            mask: vec![],
        }
    }

    #[test]
    fn detects_cycle() {
        let joints = vec![joint("a", Some(2)), joint("b", Some(0)), joint("c", Some(1))];
        let err = KinematicModel::new("base", joints, vec![]).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
    }

    #[test]
    fn rejects_bad_limits_naming_field() {
        let mut j = joint("a", None);
        j.lower = 1.0;
        j.upper = 0.5;
        let err = KinematicModel::new("base", vec![j], vec![]).unwrap_err();
        assert!(err.to_string().contains("joints[0].lower"), "{err}");
    }

    #[test]
    fn rejects_dangling_link() {
        let err = KinematicModel::new("base", vec![joint("a", None)], vec![link(3)]).unwrap_err();
        assert!(err.to_string().contains("links[0].joint"), "{err}");
    }

    #[test]
    fn rejects_non_unit_axis() {
        let mut j = joint("a", None);
        j.axis = Vector3::new(1.0, 1.0, 0.0);
        let err = KinematicModel::new("base", vec![j], vec![]).unwrap_err();
        assert!(err.to_string().contains("axis"), "{err}");
    }

    #[test]
    fn order_puts_parents_first() {
        // children listed before parents
        let joints = vec![joint("c", Some(1)), joint("b", Some(2)), joint("a", None)];
        let m = KinematicModel::new("base", joints, vec![]).unwrap();
        let pos = |j: usize| m.order().iter().position(|&x| x == j).unwrap();
        assert!(pos(2) < pos(1) && pos(1) < pos(0));
        assert!(m.in_subtree(2, 0));
        assert!(!m.in_subtree(0, 2));
    }

    #[test]
    fn adjacent_links_are_masked() {
        let joints = vec![joint("a", None), joint("b", Some(0)), joint("c", Some(1))];
        let m = KinematicModel::new("base", joints, vec![link(0), link(1), link(2)]).unwrap();
        assert!(m.is_masked(0, 1) && m.is_masked(1, 2));
        assert!(!m.is_masked(0, 2));
        assert_eq!(m.collision_pairs(), &[(0, 2)]);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let joints = vec![joint("a", None), joint("b", Some(0))];
        let m = KinematicModel::new("base", joints, vec![link(0), link(1)]).unwrap();
        let back = KinematicModel::from_json_str(&m.to_json_string()).unwrap();
        assert_eq!(back.joints(), m.joints());
        assert_eq!(back.links(), m.links());
        assert_eq!(back.content_hash(), m.content_hash());

        let bad = r#"{"joints":[{"name":"a","parent":null,"origin":{"quat":[1,0,0,0],"pos":[0,0,0]},
            "axis":[0,0,1],"lower":0.0,"upper":1.0,"max_velocity":0.0}],"links":[]}"#;
        let err = KinematicModel::from_json_str(bad).unwrap_err();
        assert!(err.to_string().contains("max_velocity"), "{err}");

        let missing = r#"{"joints":[{"name":"a"}],"links":[]}"#;
        assert!(matches!(KinematicModel::from_json_str(missing), Err(Error::ModelLoad { .. })));
    }

    #[test]
    fn attach_offsets_indices() {
        let arm = KinematicModel::new("base", vec![joint("a0", None), joint("a1", Some(0))], vec![link(0), link(1)]).unwrap();
        let mut l1 = link(1);
        l1.mask = vec![0];
        let hand = KinematicModel::new("palm", vec![joint("h0", None), joint("h1", Some(0))], vec![link(0), l1]).unwrap();
        let both = arm.attach(1, RigidTransform::from_translation(0.0, 0.0, 0.05), &hand).unwrap();
        assert_eq!(both.dof(), 4);
        assert_eq!(both.joints()[2].parent, Some(1));
        assert_eq!(both.joints()[3].parent, Some(2));
        assert_eq!(both.links()[3].mask, vec![2]);
        assert!(both.is_masked(1, 2));
    }
}
