//! Backend selection for batch experiments.

use serde::{Deserialize, Serialize};

use crate::circuit::{DynamicCircuit, FeedforwardRule};
use crate::error::{Error, Result};
use crate::pauli::PauliString;
use crate::rng::stream_rng;
use crate::sim::counts::weighted_expectation;
use crate::sim::{expectation, run_dense, run_trajectories_instance, Counts, NoiseBinding};

/// How circuit instances are executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Executor {
    /// Stabilizer trajectories, one per shot.
    #[default]
    Trajectory,
    /// Exact dense distribution per instance, shots drawn from it.
    Dense,
    /// Exact dense expectation per instance (infinitely many shots).
    Exact,
}

/// Shot histogram of one instance. `Exact` is not a sampler and is rejected.
pub fn run_counts(
    exec: Executor,
    c: &DynamicCircuit,
    nb: &NoiseBinding,
    shots: u64,
    seed: u64,
    instance: u64,
) -> Result<Counts> {
    match exec {
        Executor::Trajectory => Ok(run_trajectories_instance(c, nb, shots, seed, instance, false)?.counts),
        Executor::Dense => {
            let dist: Vec<((u64, u64), f64)> = run_dense(c, nb)?.distribution().into_iter().collect();
            let mut cdf = Vec::with_capacity(dist.len());
            let mut acc = 0.0;
            for (_, p) in &dist {
                acc += p.max(0.0);
                cdf.push(acc);
            }
            let mut counts = Counts::new(c.n_clbits(), c.n_qubits());
            let mut rng = stream_rng(seed, instance, 0);
            for _ in 0..shots {
                let u: f64 = rand::Rng::gen::<f64>(&mut rng) * acc;
                let k = cdf.partition_point(|&v| v <= u).min(dist.len() - 1);
                let ((cb, t), _) = dist[k];
                counts.add(cb, t, 1);
            }
            Ok(counts)
        }
        Executor::Exact => Err(Error::Config("the exact executor does not sample shots".into())),
    }
}

/// Mean eigenvalue of a diagonal observable for one instance, after undoing
/// recorded-bit flips and applying software recovery.
#[allow(clippy::too_many_arguments)]
pub fn instance_expectation(
    exec: Executor,
    c: &DynamicCircuit,
    nb: &NoiseBinding,
    observable: &PauliString,
    recovery: &[FeedforwardRule],
    flip_mask: u64,
    shots: u64,
    seed: u64,
    instance: u64,
) -> Result<f64> {
    match exec {
        Executor::Exact => {
            let dist = run_dense(c, nb)?.distribution();
            weighted_expectation(
                dist.into_iter().map(|((cb, t), p)| ((cb ^ flip_mask, t), p)),
                observable,
                recovery,
            )
        }
        _ => {
            let counts = run_counts(exec, c, nb, shots, seed, instance)?;
            expectation(&counts.corrected(flip_mask), observable, recovery)
        }
    }
}
