//! Machine-readable evaluation of a scene: pipeline latency, network quality
//! and the mapping endpoint property.

use std::hint::black_box;
use std::time::Instant;

use phantom_core::collision_net::{correction_quality, generate_dataset, link_accuracy, CollisionGuard, Split};
use phantom_core::retarget::{Direction, GloveSample, MappingTable, GLOVE_CHANNELS};
use phantom_core::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Scene;
use crate::error::Result;

/// Upper bucket edges (ms) of the latency histogram; the last bucket is open.
pub const LATENCY_BUCKETS_MS: [f64; 12] = [0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 16.7, 33.3];

/// Frame budget of a 60 Hz loop (ms).
pub const FRAME_BUDGET_MS: f64 = 16.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyHistogram {
    pub iterations: usize,
    /// Upper edges (ms); `counts` has one extra trailing bucket above the last edge.
    pub bucket_edges_ms: Vec<f64>,
    pub counts: Vec<usize>,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
}

impl LatencyHistogram {
    pub fn from_samples_ms(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let pct = |p: f64| -> f64 {
            if n == 0 {
                return 0.0;
            }
            samples[((p * (n - 1) as f64).round() as usize).min(n - 1)]
        };
        let median = if n == 0 {
            0.0
        } else if n % 2 == 1 {
            samples[n / 2]
        } else {
            0.5 * (samples[n / 2 - 1] + samples[n / 2])
        };
        let mut counts = vec![0; LATENCY_BUCKETS_MS.len() + 1];
        for &s in &samples {
            let b = LATENCY_BUCKETS_MS.iter().position(|&e| s <= e).unwrap_or(LATENCY_BUCKETS_MS.len());
            counts[b] += 1;
        }
        Self {
            iterations: n,
            bucket_edges_ms: LATENCY_BUCKETS_MS.to_vec(),
            counts,
            median_ms: median,
            p95_ms: pct(0.95),
            p99_ms: pct(0.99),
            max_ms: samples.last().copied().unwrap_or(0.0),
            mean_ms: if n == 0 { 0.0 } else { samples.iter().sum::<f64>() / n as f64 },
        }
    }

    /// One line per bucket: `<= edge ms: count`.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let width = 40.0 / self.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
        for (i, c) in self.counts.iter().enumerate() {
            let label = match self.bucket_edges_ms.get(i) {
                Some(e) => format!("<= {e:>6} ms"),
                None => format!(" > {:>6} ms", self.bucket_edges_ms.last().copied().unwrap_or(0.0)),
            };
            s.push_str(&format!("{label} {c:>6} {}\n", "#".repeat((*c as f64 * width).ceil() as usize)));
        }
        s
    }
}

/// Glove vectors spread over the mapped input ranges, with a margin outside
/// them so clamping is exercised too.
pub fn random_gloves(mapping: &MappingTable, count: usize, seed: u64) -> Vec<GloveSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ranges = [(0.0, 1.0); GLOVE_CHANNELS];
    for m in mapping.maps() {
        let pad = 0.1 * (m.glove_max - m.glove_min);
        ranges[m.glove_channel] = (m.glove_min - pad, m.glove_max + pad);
    }
    (0..count)
        .map(|k| {
            let angles = std::array::from_fn(|c| rng.random_range(ranges[c].0..ranges[c].1));
            GloveSample::new(k as f64, angles)
        })
        .collect()
}

/// Times `map_hand` followed by the collision guard (when present) on the
/// calling thread, one glove sample per iteration.
pub fn measure_pipeline_latency(mapping: &MappingTable, guard: Option<&CollisionGuard>, iterations: usize, seed: u64) -> Result<LatencyHistogram> {
    let gloves = random_gloves(mapping, iterations, seed);
    let mut samples = Vec::with_capacity(iterations);
    for g in &gloves {
        let start = Instant::now();
        let q = mapping.map_hand(black_box(g));
        if let Some(guard) = guard {
            black_box(guard.apply(&q)?);
        } else {
            black_box(q);
        }
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(LatencyHistogram::from_samples_ms(samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointCheck {
    pub joints: usize,
    /// Largest distance between a mapped glove endpoint and the robot limit
    /// it should land on.
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Maps each joint's glove range endpoints and compares them with the robot
/// limits: forward maps send min to lower, reverse maps send min to upper.
pub fn endpoint_check(mapping: &MappingTable, tolerance: f64) -> EndpointCheck {
    let mut max_error: f64 = 0.0;
    for m in mapping.maps() {
        let (at_min, at_max) = match m.direction {
            Direction::Forward => (m.robot_min, m.robot_max),
            Direction::Reverse => (m.robot_max, m.robot_min),
        };
        max_error = max_error.max((m.apply(m.glove_min) - at_min).abs());
        max_error = max_error.max((m.apply(m.glove_max) - at_max).abs());
    }
    EndpointCheck {
        joints: mapping.len(),
        max_error,
        tolerance,
        passed: max_error <= tolerance,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpnMetrics {
    pub samples: usize,
    pub per_link_accuracy: Vec<f64>,
    pub min_accuracy: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcnMetrics {
    pub colliding_configs: usize,
    /// Share of corrected configurations the geometric oracle still flags.
    pub oracle_collision_rate: f64,
    pub mse: f64,
    pub mean_relative_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub latency: LatencyHistogram,
    pub within_frame_budget: bool,
    pub cpn: Option<CpnMetrics>,
    pub ccn: Option<CcnMetrics>,
    pub endpoints: EndpointCheck,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub iterations: usize,
    /// Size of the freshly sampled evaluation set for the networks.
    pub samples: usize,
    /// Cap on the colliding configurations fed to the correction network.
    pub colliding: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            iterations: 10_000,
            samples: 20_000,
            colliding: 1_000,
            seed: 0x5eed,
            exec: Exec::Parallel,
        }
    }
}

pub fn eval(scene: &Scene, opts: &EvalOptions) -> Result<EvalReport> {
    let guard = scene.setup.guard.as_ref();
    let latency = measure_pipeline_latency(&scene.setup.mapping, guard, opts.iterations, opts.seed)?;
    let (mut cpn, mut ccn) = (None, None);
    if let Some(g) = guard {
        // Every sample is fresh, so the whole set is held out from training.
        let data = generate_dataset(&scene.hand, opts.samples, opts.seed, opts.exec)?;
        let acc = link_accuracy(&g.cpn, data.configs(), data.labels(), g.gate_threshold)?;
        cpn = Some(CpnMetrics {
            samples: data.len(),
            min_accuracy: acc.iter().copied().fold(1.0, f64::min),
            mean_accuracy: acc.iter().sum::<f64>() / acc.len().max(1) as f64,
            per_link_accuracy: acc,
        });
        let mut idx: Vec<usize> = [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .flat_map(|s| data.colliding_indices(s))
            .collect();
        idx.sort_unstable();
        idx.truncate(opts.colliding);
        let configs = data.select_configs(&idx);
        let q = correction_quality(&scene.hand, &g.ccn, &configs, opts.exec)?;
        ccn = Some(CcnMetrics {
            colliding_configs: idx.len(),
            oracle_collision_rate: q.collision_rate,
            mse: q.mse,
            mean_relative_deviation: q.mean_relative_deviation,
        });
    }
    Ok(EvalReport {
        within_frame_budget: latency.median_ms <= FRAME_BUDGET_MS,
        latency,
        cpn,
        ccn,
        endpoints: endpoint_check(&scene.setup.mapping, 1e-9),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_statistics() {
        let h = LatencyHistogram::from_samples_ms(vec![0.3, 0.1, 40.0, 0.2]);
        assert_eq!(h.median_ms, 0.25);
        assert_eq!(h.max_ms, 40.0);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(*h.counts.last().unwrap(), 1);
        assert_eq!(h.counts[3], 1); // 0.1 lands in the (0.05, 0.1] bucket
        assert!(h.render().lines().count() == LATENCY_BUCKETS_MS.len() + 1);
    }
}
