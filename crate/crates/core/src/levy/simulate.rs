use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Exp};
use serde::Serialize;

use super::basis::TeugelsBasis;
use super::measure::LevyMeasure;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub time: f64,
    pub size: f64,
}

/// Exact compound-Poisson path on `[0, horizon]`: arrival times of a rate-λ
/// Poisson process, sizes drawn with probabilities `λ_j / λ`.
///
/// Path `index` uses its own random stream, so paths can be generated in any
/// order or concurrently.
pub fn simulate_levy_path(
    measure: &LevyMeasure,
    horizon: f64,
    seed: u64,
    index: u64,
) -> Vec<JumpEvent> {
    let lambda = measure.total_intensity();
    if !(horizon > 0.0) || measure.is_empty() {
        return Vec::new();
    }
    let mut rng = rng::stream(seed, Domain::LevyPath, index);
    let wait = Exp::new(lambda).expect("positive total intensity");
    let pick = WeightedIndex::new(measure.atoms().iter().map(|a| a.lambda))
        .expect("positive intensities");
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += wait.sample(&mut rng);
        if t > horizon {
            break;
        }
        events.push(JumpEvent {
            time: t,
            size: measure.atoms()[pick.sample(&mut rng)].x,
        });
    }
    events
}

/// Monte Carlo estimate of `E[H^(i), H^(j)]_T` with its standard error.
///
/// Per path the quadratic covariation is the sum over jumps of the product of
/// the jump parts `q_i(x) x · q_j(x) x`; its mean equals the predictable
/// bracket `δ_ij T`.
pub fn empirical_bracket(
    paths: &[Vec<JumpEvent>],
    basis: &TeugelsBasis,
    i: usize,
    j: usize,
) -> Result<(f64, f64)> {
    if paths.is_empty() {
        return Err(Error::invalid("empirical bracket needs at least one path"));
    }
    let m = basis.dim();
    if i == 0 || j == 0 || i > m || j > m {
        return Err(Error::invalid(format!(
            "bracket indices ({i}, {j}) outside 1..={m}"
        )));
    }
    let values: Vec<f64> = paths
        .iter()
        .map(|p| {
            p.iter()
                .map(|e| basis.jump_part(i, e.size) * basis.jump_part(j, e.size))
                .sum()
        })
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_err = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok((mean, std_err))
}
