use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

const PROBES: usize = 4000;
const PROBE_DIM: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DriverFamily {
    /// `a + b y + c z^(1)`.
    Affine { a: f64, b: f64, c: f64 },
    /// `a sin(b y)`.
    Saturating { a: f64, b: f64 },
    /// `c min(‖z‖, clip)`.
    ZNorm { c: f64, clip: f64 },
}

/// A registry driver with its declared constants.
///
/// For `f` only `lipschitz` is used, in the sense
/// `|f(t,y,z) - f(t,y',z')| ≤ L (|y-y'| + ‖z-z'‖)`. For `g` the constants
/// follow the squared form `|g - g'|² ≤ L |y-y'|² + α ‖z-z'‖²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverSpec {
    #[serde(flatten)]
    pub family: DriverFamily,
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Constant added to the family value.
    #[serde(default)]
    pub shift: f64,
}

impl DriverSpec {
    pub fn new(family: DriverFamily, lipschitz: f64) -> Self {
        Self {
            family,
            lipschitz,
            alpha: None,
            shift: 0.0,
        }
    }

    pub fn zero() -> Self {
        Self::new(DriverFamily::Affine { a: 0.0, b: 0.0, c: 0.0 }, 0.0)
    }

    pub fn constant(a: f64) -> Self {
        Self::new(DriverFamily::Affine { a, b: 0.0, c: 0.0 }, 0.0)
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    #[inline]
    pub fn eval(&self, _t: f64, y: f64, z: &[f64]) -> f64 {
        let v = match self.family {
            DriverFamily::Affine { a, b, c } => a + b * y + c * z.first().copied().unwrap_or(0.0),
            DriverFamily::Saturating { a, b } => a * (b * y).sin(),
            DriverFamily::ZNorm { c, clip } => {
                c * z.iter().map(|v| v * v).sum::<f64>().sqrt().min(clip)
            }
        };
        self.shift + v
    }

    pub fn independent_of_y(&self) -> bool {
        match self.family {
            DriverFamily::Affine { b, .. } => b == 0.0,
            DriverFamily::Saturating { a, b } => a == 0.0 || b == 0.0,
            DriverFamily::ZNorm { .. } => true,
        }
    }

    pub fn independent_of_z(&self) -> bool {
        match self.family {
            DriverFamily::Affine { c, .. } => c == 0.0,
            DriverFamily::Saturating { .. } => true,
            DriverFamily::ZNorm { c, clip } => c == 0.0 || clip == 0.0,
        }
    }
}

/// Pair `(f, g)` of Lipschitz drivers, with constants checked on random probes.
#[derive(Debug, Clone, Serialize)]
pub struct DriverPair {
    pub(crate) f: DriverSpec,
    pub(crate) g: DriverSpec,
}

impl DriverPair {
    pub fn new(f: DriverSpec, g: DriverSpec) -> Result<Self> {
        let alpha = g
            .alpha
            .ok_or_else(|| Error::invalid("g: missing contraction constant alpha"))?;
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(Error::invalid(format!(
                "g: alpha must lie in (0, 1/2), got {alpha}"
            )));
        }
        if !(f.lipschitz >= 0.0) || !(g.lipschitz >= 0.0) {
            return Err(Error::invalid("Lipschitz constants must be nonnegative"));
        }
        verify_f(&f)?;
        verify_g(&g, alpha)?;
        Ok(Self { f, g })
    }

    /// `f = g = 0` with a nominal `α`.
    pub fn zero() -> Self {
        Self::new(DriverSpec::zero(), DriverSpec::zero().with_alpha(0.25))
            .expect("zero drivers are Lipschitz")
    }

    pub fn f_spec(&self) -> &DriverSpec {
        &self.f
    }

    pub fn g_spec(&self) -> &DriverSpec {
        &self.g
    }

    #[inline]
    pub fn f(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        self.f.eval(t, y, z)
    }

    #[inline]
    pub fn g(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        self.g.eval(t, y, z)
    }

    pub fn lipschitz_f(&self) -> f64 {
        self.f.lipschitz
    }

    pub fn lipschitz_g(&self) -> f64 {
        self.g.lipschitz
    }

    pub fn alpha_g(&self) -> f64 {
        self.g.alpha.unwrap_or(0.0)
    }

    /// Shape required by the Snell oracle: `f = f(t, y)` and `g = g(t)`.
    pub fn oracle_compatible(&self) -> bool {
        self.f.independent_of_z() && self.g.independent_of_y() && self.g.independent_of_z()
    }
}

struct Probe {
    t: f64,
    y: f64,
    y2: f64,
    z: [f64; PROBE_DIM],
    z2: [f64; PROBE_DIM],
}

fn probes() -> impl Iterator<Item = Probe> {
    let mut rng = rng::stream(0, Domain::Probe, 0);
    (0..PROBES).map(move |i| {
        // local probes move one argument at a time so slopes are not masked
        let (sy, sz) = match i % 4 {
            0 => (1e-3, 0.0),
            1 => (0.0, 1e-3),
            _ => (10.0, 10.0),
        };
        let y: f64 = rng.random_range(-10.0..10.0);
        let z: [f64; PROBE_DIM] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        Probe {
            t: rng.random_range(0.0..1.0),
            y,
            y2: y + sy * rng.random_range(-1.0..1.0),
            z,
            z2: std::array::from_fn(|j| z[j] + sz * rng.random_range(-1.0..1.0)),
        }
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn verify_f(f: &DriverSpec) -> Result<()> {
    for p in probes() {
        let lhs = (f.eval(p.t, p.y, &p.z) - f.eval(p.t, p.y2, &p.z2)).abs();
        let rhs = f.lipschitz * ((p.y - p.y2).abs() + dist(&p.z, &p.z2));
        if lhs > rhs * (1.0 + 1e-12) + 1e-14 {
            return Err(Error::invalid(format!(
                "f: declared Lipschitz constant {} violated ({lhs:e} > {rhs:e})",
                f.lipschitz
            )));
        }
    }
    Ok(())
}

fn verify_g(g: &DriverSpec, alpha: f64) -> Result<()> {
    for p in probes() {
        let lhs = (g.eval(p.t, p.y, &p.z) - g.eval(p.t, p.y2, &p.z2)).powi(2);
        let rhs = g.lipschitz * (p.y - p.y2).powi(2) + alpha * dist(&p.z, &p.z2).powi(2);
        if lhs > rhs * (1.0 + 1e-10) + 1e-14 {
            return Err(Error::invalid(format!(
                "g: declared constants (L = {}, alpha = {alpha}) violated ({lhs:e} > {rhs:e})",
                g.lipschitz
            )));
        }
    }
    Ok(())
}
