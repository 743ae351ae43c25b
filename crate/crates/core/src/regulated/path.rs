use serde::Serialize;

use crate::error::{Error, Result};

/// Làdlàg path sampled on a grid.
///
/// `values[k]` is the value at `t_k` and `right_limits[k]` the right limit
/// `ξ(t_k+)`; the path is constant equal to `right_limits[k]` on the open
/// interval `(t_k, t_{k+1})`. The right limit at the horizon equals the value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegulatedPath {
    times: Vec<f64>,
    values: Vec<f64>,
    right_limits: Vec<f64>,
}

/// Grid indices `σ_{n,1} < σ_{n,2} < …` where the right jump is below `-1/n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JumpArray {
    pub level: u64,
    pub times: Vec<usize>,
}

impl JumpArray {
    pub fn contains(&self, k: usize) -> bool {
        self.times.binary_search(&k).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

impl RegulatedPath {
    pub fn new(times: Vec<f64>, values: Vec<f64>, mut right_limits: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() || times.len() != right_limits.len() {
            return Err(Error::invalid(format!(
                "regulated path needs equal nonzero lengths, got {} times, {} values, {} right limits",
                times.len(),
                values.len(),
                right_limits.len()
            )));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("grid times must be strictly increasing"));
        }
        let last = values.len() - 1;
        right_limits[last] = values[last];
        Ok(Self {
            times,
            values,
            right_limits,
        })
    }

    /// Path with `right_limits == values`.
    pub fn right_continuous(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let rl = values.clone();
        Self::new(times, values, rl)
    }

    pub fn constant(times: Vec<f64>, c: f64) -> Result<Self> {
        let v = vec![c; times.len()];
        Self::right_continuous(times, v)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn right_limits(&self) -> &[f64] {
        &self.right_limits
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn right_limit(&self, k: usize) -> f64 {
        self.right_limits[k]
    }

    /// `Δ_+ξ(t_k) = ξ(t_k+) - ξ(t_k)`.
    pub fn right_jump(&self, k: usize) -> f64 {
        self.right_limits[k] - self.values[k]
    }

    /// `Δξ(t_k) = ξ(t_k) - ξ(t_k-)`, zero at the origin.
    pub fn left_jump(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.values[k] - self.right_limits[k - 1]
        }
    }

    /// `Σ_{s < t_k} Δ_+ξ_s` for every grid time.
    pub fn jumping_part(&self) -> Vec<f64> {
        let mut acc = 0.0;
        (0..self.len())
            .map(|k| {
                let here = acc;
                acc += self.right_jump(k);
                here
            })
            .collect()
    }

    /// Right-continuous part `ξ* = ξ - Σ_{s<·} Δ_+ξ_s`.
    pub fn right_continuous_part(&self) -> RegulatedPath {
        let v: Vec<f64> = self
            .values
            .iter()
            .zip(self.jumping_part())
            .map(|(v, j)| v - j)
            .collect();
        RegulatedPath {
            times: self.times.clone(),
            right_limits: v.clone(),
            values: v,
        }
    }

    /// Pointwise `self ≤ other` on values and right limits.
    pub fn le(&self, other: &RegulatedPath) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
            && self
                .right_limits
                .iter()
                .zip(&other.right_limits)
                .all(|(a, b)| a <= b)
    }
}

/// Left upper semi-continuous envelope `ξ̂_t = limsup_{s↑t, s<t} ξ_s`.
///
/// On the grid convention the left limit at `t_k` is the constant carried on
/// `(t_{k-1}, t_k)`, so `ξ̂(t_k) = ξ(t_{k-1}+)` and `ξ̂(t_0) = ξ(t_0)`.
pub fn left_envelope(path: &RegulatedPath) -> RegulatedPath {
    let n = path.len();
    let mut values = Vec::with_capacity(n);
    values.push(path.values[0]);
    values.extend_from_slice(&path.right_limits[..n - 1]);
    let mut right_limits = path.right_limits.clone();
    right_limits[n - 1] = values[n - 1];
    RegulatedPath {
        times: path.times.clone(),
        values,
        right_limits,
    }
}

/// Grid indices where `Δ_+ξ < -1/n`, in increasing order.
pub fn right_jump_times(path: &RegulatedPath, n: u64) -> JumpArray {
    assert!(n >= 1, "penalty level must be at least 1");
    let threshold = -1.0 / n as f64;
    JumpArray {
        level: n,
        times: (0..path.len().saturating_sub(1))
            .filter(|&k| path.right_jump(k) < threshold)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn envelope_of_constant() {
        let p = RegulatedPath::constant(grid(4), 2.5).unwrap();
        assert_eq!(left_envelope(&p).values(), &[2.5; 5]);
    }

    #[test]
    fn envelope_of_right_continuous_path_lags_one_step() {
        let p = RegulatedPath::right_continuous(grid(3), vec![3.0, 1.0, 2.0, 0.5]).unwrap();
        assert_eq!(left_envelope(&p).values(), &[3.0, 3.0, 1.0, 2.0]);
    }

    #[test]
    fn envelope_sees_the_segment_not_the_point() {
        let p = RegulatedPath::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.2, 0.2], vec![1.0, 0.2, 0.2])
            .unwrap();
        assert_eq!(left_envelope(&p).value(1), 1.0);
    }

    #[test]
    fn jump_thresholds() {
        let t = grid(4);
        let flat = RegulatedPath::constant(t.clone(), 1.0).unwrap();
        assert!(right_jump_times(&flat, 5).is_empty());

        let p = RegulatedPath::new(t.clone(), vec![1.0, 1.0, 1.0, 0.4, 0.4], vec![1.0, 1.0, 0.4, 0.4, 0.4]).unwrap();
        assert!((p.right_jump(2) + 0.6).abs() < 1e-15);
        assert!(right_jump_times(&p, 1).is_empty());
        for n in 2..10 {
            assert_eq!(right_jump_times(&p, n).times, vec![2]);
        }

        let big = RegulatedPath::new(t, vec![1.0, 1.0, -1.0, -1.0, -1.0], vec![1.0, -1.0, -1.0, -1.0, -1.0]).unwrap();
        for n in 1..10 {
            assert_eq!(right_jump_times(&big, n).times, vec![1]);
        }
    }

    #[test]
    fn right_limit_at_horizon_is_the_value() {
        let p = RegulatedPath::new(grid(2), vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 7.0]).unwrap();
        assert_eq!(p.right_limit(2), 1.0);
        assert_eq!(p.right_jump(2), 0.0);
        assert_eq!(p.left_jump(2), 1.0);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        assert!(RegulatedPath::new(grid(2), vec![0.0; 3], vec![0.0; 2]).is_err());
        assert!(RegulatedPath::new(vec![0.0, 0.0], vec![0.0; 2], vec![0.0; 2]).is_err());
    }

    fn arb_path() -> impl Strategy<Value = RegulatedPath> {
        (2usize..12).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3.0f64..3.0, n + 1),
                proptest::collection::vec(-3.0f64..3.0, n + 1),
            )
                .prop_map(move |(v, vp)| RegulatedPath::new(grid(n), v, vp).unwrap())
        })
    }

    proptest! {
        #[test]
        fn jump_arrays_are_nested(p in arb_path(), n in 1u64..50) {
            let a = right_jump_times(&p, n);
            let b = right_jump_times(&p, n + 1);
            prop_assert!(a.times.windows(2).all(|w| w[0] < w[1]));
            for k in &a.times {
                prop_assert!(b.contains(*k));
            }
        }

        #[test]
        fn decomposition_reassembles(p in arb_path()) {
            let star = p.right_continuous_part();
            let jumps = p.jumping_part();
            for k in 0..p.len() {
                prop_assert!((star.value(k) + jumps[k] - p.value(k)).abs() < 1e-12);
            }
            let rc = RegulatedPath::right_continuous(p.times().to_vec(), p.values().to_vec()).unwrap();
            prop_assert!(rc.jumping_part().iter().all(|&j| j == 0.0));
        }

        #[test]
        fn envelope_is_monotone(p in arb_path(), shift in proptest::collection::vec(0.0f64..1.0, 24)) {
            let n = p.len();
            let q = RegulatedPath::new(
                p.times().to_vec(),
                p.values().iter().zip(&shift).map(|(v, s)| v + s).collect(),
                p.right_limits().iter().zip(&shift[n..]).map(|(v, s)| v + s).collect(),
            ).unwrap();
            prop_assume!(p.le(&q));
            prop_assert!(left_envelope(&p).le(&left_envelope(&q)));
        }
    }
}
