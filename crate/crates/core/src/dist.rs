//! Truncated probability distributions on ℕ and ℕⁿ.
//!
//! A [`TruncatedDist`] stores a dense, row-major probability vector on the
//! grid `{0..cutoff}ⁿ` together with the mass that fell outside the grid
//! (`tail_mass`). Normalization is an invariant of the type: entries are
//! nonnegative and `sum(probs) + tail_mass = 1` within [`NORMALIZATION_TOL`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{EntropyNats, MeanPhotonNumber};

/// Dense-storage budget: maximum number of retained joint states (64³).
pub const MAX_STATES: usize = 1 << 18;

/// Tail mass above which exact entropy computations refuse to proceed.
pub const TAIL_THRESHOLD: f64 = 1e-10;

/// Allowed defect of `sum(probs) + tail_mass - 1`.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Compensated (Kahan) summation; keeps normalization checks meaningful
/// for vectors of ~10⁵ entries.
pub(crate) fn kahan_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// A probability distribution on `{0..cutoff}ⁿ` with tracked tail mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist")]
pub struct TruncatedDist {
    n_modes: usize,
    cutoff: usize,
    probs: Vec<f64>,
    tail_mass: f64,
}

#[derive(Deserialize)]
struct RawDist {
    n_modes: usize,
    cutoff: usize,
    probs: Vec<f64>,
    tail_mass: f64,
}

impl TryFrom<RawDist> for TruncatedDist {
    type Error = Error;
    fn try_from(raw: RawDist) -> Result<Self> {
        TruncatedDist::from_parts(raw.n_modes, raw.cutoff, raw.probs, raw.tail_mass)
    }
}

/// Mean occupation per mode and in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub per_mode: Vec<f64>,
    pub total: f64,
}

impl TruncatedDist {
    /// Validating constructor; the only way to build a distribution from raw
    /// parts.
    pub fn from_parts(
        n_modes: usize,
        cutoff: usize,
        probs: Vec<f64>,
        tail_mass: f64,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::Domain("n_modes must be >= 1".into()));
        }
        let size = checked_grid_size(n_modes, cutoff)?;
        if probs.len() != size {
            return Err(Error::Dimension(format!(
                "expected {size} entries for {n_modes} mode(s) at cutoff {cutoff}, got {}",
                probs.len()
            )));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Domain("probabilities must be finite and >= 0".into()));
        }
        if !tail_mass.is_finite() || tail_mass < 0.0 {
            return Err(Error::Domain(format!(
                "tail mass must be finite and >= 0, got {tail_mass}"
            )));
        }
        let defect = kahan_sum(probs.iter().copied()) + tail_mass - 1.0;
        if defect.abs() > NORMALIZATION_TOL {
            return Err(Error::Domain(format!(
                "probabilities + tail must sum to 1, defect {defect:.3e}"
            )));
        }
        Ok(Self {
            n_modes,
            cutoff,
            probs,
            tail_mass,
        })
    }

    /// Point mass at the given joint occupation.
    pub fn delta(n_modes: usize, cutoff: usize, occupation: &[usize]) -> Result<Self> {
        if occupation.len() != n_modes {
            return Err(Error::Dimension(format!(
                "expected {n_modes} occupation numbers, got {}",
                occupation.len()
            )));
        }
        if occupation.iter().any(|&k| k > cutoff) {
            return Err(Error::Domain("occupation exceeds cutoff".into()));
        }
        let size = checked_grid_size(n_modes, cutoff)?;
        let mut probs = vec![0.0; size];
        let idx = occupation
            .iter()
            .fold(0usize, |acc, &k| acc * (cutoff + 1) + k);
        probs[idx] = 1.0;
        Self::from_parts(n_modes, cutoff, probs, 0.0)
    }

    /// Uniform distribution on the grid.
    pub fn uniform(n_modes: usize, cutoff: usize) -> Result<Self> {
        let size = checked_grid_size(n_modes, cutoff)?;
        Self::from_parts(n_modes, cutoff, vec![1.0 / size as f64; size], 0.0)
    }

    /// Single-mode geometric distribution with mean `energy`:
    /// `p_k = (E/(E+1))ᵏ / (E+1)`, with `tail_mass = (E/(E+1))^(cutoff+1)`.
    pub fn geometric(energy: MeanPhotonNumber, cutoff: usize) -> Result<Self> {
        let e = energy.0;
        if !e.is_finite() || e < 0.0 {
            return Err(Error::Domain(format!(
                "geometric: energy must be >= 0, got {e}"
            )));
        }
        let size = checked_grid_size(1, cutoff)?;
        if e == 0.0 {
            let mut probs = vec![0.0; size];
            probs[0] = 1.0;
            return Self::from_parts(1, cutoff, probs, 0.0);
        }
        let ratio = e / (e + 1.0);
        let mut probs = Vec::with_capacity(size);
        let mut p = 1.0 / (e + 1.0);
        for _ in 0..=cutoff {
            probs.push(p);
            p *= ratio;
        }
        let tail = ratio.powi(cutoff as i32 + 1);
        Self::from_parts(1, cutoff, probs, tail)
    }

    /// Smallest cutoff at which `geometric(energy)` has tail mass below
    /// `tail_target`.
    pub fn geometric_cutoff(energy: f64, tail_target: f64) -> usize {
        if energy <= 0.0 {
            return 0;
        }
        let ratio = energy / (energy + 1.0);
        // ratio^(c+1) < target  =>  c+1 > ln(target)/ln(ratio)
        let c = (tail_target.ln() / ratio.ln()).ceil() as usize;
        c.max(1)
    }

    /// Reproducible pseudo-random distribution: i.i.d. Gamma(concentration)
    /// weights, normalized. Tail mass is zero by construction.
    pub fn random(n_modes: usize, cutoff: usize, seed: u64, concentration: f64) -> Result<Self> {
        if !concentration.is_finite() || concentration <= 0.0 {
            return Err(Error::Domain(format!(
                "concentration must be > 0, got {concentration}"
            )));
        }
        let size = checked_grid_size(n_modes, cutoff)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gamma = Gamma::new(concentration, 1.0)
            .map_err(|e| Error::Domain(format!("gamma sampler: {e}")))?;
        let mut probs: Vec<f64> = (0..size).map(|_| gamma.sample(&mut rng)).collect();
        let total = kahan_sum(probs.iter().copied());
        if total <= 0.0 {
            return Err(Error::Numeric("degenerate random sample".into()));
        }
        for p in &mut probs {
            *p /= total;
        }
        Self::from_parts(n_modes, cutoff, probs, 0.0)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Shannon entropy in nats, refusing if the tail mass is too large for
    /// the result to be meaningful.
    pub fn entropy(&self) -> Result<EntropyNats> {
        if self.tail_mass > TAIL_THRESHOLD {
            return Err(Error::Truncation {
                tail: self.tail_mass,
                threshold: TAIL_THRESHOLD,
            });
        }
        Ok(EntropyNats(self.entropy_raw().max(0.0)))
    }

    /// Shannon entropy of the retained entries, with no tail check. Report
    /// builders use this together with [`Self::tail_mass`] so that oversized
    /// tails flag the instance instead of aborting it.
    pub fn entropy_raw(&self) -> f64 {
        -kahan_sum(
            self.probs
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * p.ln()),
        )
    }

    /// Upper bound on the entropy carried by the truncated tail:
    /// `-t ln t + t ln(grid size)`.
    pub fn tail_entropy_bound(&self) -> f64 {
        let t = self.tail_mass;
        if t <= 0.0 {
            0.0
        } else {
            -t * t.ln() + t * (self.n_modes as f64) * ((self.cutoff + 1) as f64).ln()
        }
    }

    /// Mean occupation of each mode.
    pub fn energy_report(&self) -> EnergyReport {
        let width = self.cutoff + 1;
        let mut per_mode = vec![0.0; self.n_modes];
        for (mode, acc) in per_mode.iter_mut().enumerate() {
            let stride = width.pow((self.n_modes - 1 - mode) as u32);
            *acc = kahan_sum(
                self.probs
                    .iter()
                    .enumerate()
                    .map(|(idx, &p)| p * ((idx / stride) % width) as f64),
            );
        }
        let total = per_mode.iter().sum();
        EnergyReport { per_mode, total }
    }

    /// Product distribution. Both factors must share the same cutoff.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(Error::Dimension(format!(
                "tensor requires equal cutoffs, got {} and {}",
                self.cutoff, other.cutoff
            )));
        }
        let n_modes = self.n_modes + other.n_modes;
        checked_grid_size(n_modes, self.cutoff)?;
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for &p in &self.probs {
            for &q in &other.probs {
                probs.push(p * q);
            }
        }
        let tail = self.tail_mass + other.tail_mass - self.tail_mass * other.tail_mass;
        Self::from_parts(n_modes, self.cutoff, probs, tail)
    }

    /// Marginal distribution of one mode; all other modes are summed out.
    /// The joint tail mass is carried over unchanged (it may sit anywhere).
    pub fn marginal(&self, mode: usize) -> Result<Self> {
        if mode >= self.n_modes {
            return Err(Error::Domain(format!(
                "mode index {mode} out of range for {} mode(s)",
                self.n_modes
            )));
        }
        let width = self.cutoff + 1;
        let stride = width.pow((self.n_modes - 1 - mode) as u32);
        let mut probs = vec![0.0; width];
        for (idx, &p) in self.probs.iter().enumerate() {
            probs[(idx / stride) % width] += p;
        }
        Self::from_parts(1, self.cutoff, probs, self.tail_mass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Grid size `(cutoff+1)^n_modes`, checked against [`MAX_STATES`].
fn checked_grid_size(n_modes: usize, cutoff: usize) -> Result<usize> {
    let width = cutoff + 1;
    let mut size = 1usize;
    for _ in 0..n_modes {
        size = size
            .checked_mul(width)
            .filter(|&s| s <= MAX_STATES)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "grid {width}^{n_modes} exceeds the dense budget of {MAX_STATES} states"
                ))
            })?;
    }
    Ok(size)
}

/// Total variation distance between two distributions on the same grid,
/// including the tail as one extra (aggregated) outcome.
pub fn total_variation(a: &TruncatedDist, b: &TruncatedDist) -> Result<f64> {
    if a.n_modes != b.n_modes || a.cutoff != b.cutoff {
        return Err(Error::Dimension(
            "total variation requires matching grids".into(),
        ));
    }
    let body = kahan_sum(
        a.probs
            .iter()
            .zip(&b.probs)
            .map(|(&p, &q)| (p - q).abs()),
    );
    Ok(0.5 * (body + (a.tail_mass - b.tail_mass).abs()))
}
