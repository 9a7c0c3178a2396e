//! Runtime pos-to-pos correction: the prediction network gates whether the
//! correction network runs.

use crate::error::Result;
use crate::kinematics::JointConfig;

use super::nets::{Ccn, Cpn};

/// Default gate on the largest predicted link collision probability.
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.5;

/// Anything that scores per-link collision probabilities.
pub trait CollisionPredictor {
    fn predict(&self, q: &JointConfig) -> Result<Vec<f64>>;
}

/// Anything that maps a configuration to a corrected one.
pub trait ConfigCorrector {
    fn correct(&self, q: &JointConfig) -> Result<JointConfig>;
}

impl CollisionPredictor for Cpn {
    fn predict(&self, q: &JointConfig) -> Result<Vec<f64>> {
        self.forward(q)
    }
}

impl ConfigCorrector for Ccn {
    fn correct(&self, q: &JointConfig) -> Result<JointConfig> {
        self.forward(q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub corrected: JointConfig,
    /// True when the correction network was applied.
    pub was_gated: bool,
    pub cpn_probs: Vec<f64>,
}

impl CorrectionResult {
    pub fn max_prob(&self) -> f64 {
        self.cpn_probs.iter().copied().fold(0.0, f64::max)
    }
}

/// Passes `q` through untouched when every predicted probability is below
/// `gate_threshold`; otherwise returns the corrector's output.
pub fn correct<P, C>(q: &JointConfig, predictor: &P, corrector: &C, gate_threshold: f64) -> Result<CorrectionResult>
where
    P: CollisionPredictor + ?Sized,
    C: ConfigCorrector + ?Sized,
{
    let cpn_probs = predictor.predict(q)?;
    let peak = cpn_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak < gate_threshold {
        return Ok(CorrectionResult {
            corrected: q.clone(),
            was_gated: false,
            cpn_probs,
        });
    }
    Ok(CorrectionResult {
        corrected: corrector.correct(q)?,
        was_gated: true,
        cpn_probs,
    })
}

/// Trained prediction/correction pair with its gate.
#[derive(Debug, Clone)]
pub struct CollisionGuard {
    pub cpn: Cpn,
    pub ccn: Ccn,
    pub gate_threshold: f64,
}

impl CollisionGuard {
    pub fn new(cpn: Cpn, ccn: Ccn, gate_threshold: f64) -> Self {
        Self { cpn, ccn, gate_threshold }
    }

    pub fn apply(&self, q: &JointConfig) -> Result<CorrectionResult> {
        correct(q, &self.cpn, &self.ccn, self.gate_threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct ConstPredictor(f64, usize);
    impl CollisionPredictor for ConstPredictor {
        fn predict(&self, _: &JointConfig) -> Result<Vec<f64>> {
            Ok(vec![self.0; self.1])
        }
    }

    struct Shift(f64);
    impl ConfigCorrector for Shift {
        fn correct(&self, q: &JointConfig) -> Result<JointConfig> {
            Ok(JointConfig(q.0.iter().map(|v| v + self.0).collect()))
        }
    }

    #[test]
    fn safe_prediction_passes_through() {
        let q = JointConfig(vec![0.1, 0.2, 0.3]);
        let r = correct(&q, &ConstPredictor(0.0, 3), &Shift(1.0), 0.5).unwrap();
        assert!(!r.was_gated);
        assert_eq!(r.corrected, q);
    }

    #[test]
    fn certain_collision_runs_corrector() {
        let q = JointConfig(vec![0.1, 0.2, 0.3]);
        let r = correct(&q, &ConstPredictor(1.0, 3), &Shift(1.0), 0.5).unwrap();
        assert!(r.was_gated);
        assert_eq!(r.corrected, Shift(1.0).correct(&q).unwrap());
        assert_eq!(r.max_prob(), 1.0);
    }

    #[test]
    fn threshold_is_inclusive_on_gate() {
        let q = JointConfig(vec![0.0]);
        assert!(correct(&q, &ConstPredictor(0.5, 1), &Shift(1.0), 0.5).unwrap().was_gated);
        assert!(!correct(&q, &ConstPredictor(0.4999, 1), &Shift(1.0), 0.5).unwrap().was_gated);
    }
}
