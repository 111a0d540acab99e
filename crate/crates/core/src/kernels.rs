//! Row-stochastic transition kernels on truncated ℕ.
//!
//! A [`StochasticKernel`] is the action of a channel on occupation-number
//! distributions: `P(m|n)` is the probability of output occupation `m`
//! given input occupation `n`. Mass pushed past the output cutoff is
//! tracked per row as `leak`, so that `row sum + leak = 1`.
//!
//! Implemented families:
//!
//! * thinning `T_λ`: `P(m|n) = C(n,m) λᵐ (1-λ)^(n-m)`;
//! * quantum-limited attenuator (same kernel as the thinning on the
//!   occupation-number diagonal);
//! * quantum-limited amplifier: `P(m|n) = C(m,n) (1-1/κ)^(m-n) κ^-(n+1)`,
//!   `m ≥ n` (negative binomial);
//! * quantum-limited phase-contravariant channel:
//!   `P(m|n) = C(n+m,m) (1-1/κ)ᵐ κ^-(n+1)`;
//! * thermal-environment attenuator / amplifier / additive-noise /
//!   contravariant channels, built by composing an attenuation stage with
//!   an amplification stage (see [`build_channel`]).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dist::{kahan_sum, TruncatedDist};
use crate::error::{Error, Result};

/// Allowed defect of `row sum + leak - 1` per kernel row.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Transition kernel from occupations `0..=n_in` to `0..=n_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticKernel {
    n_in: usize,
    n_out: usize,
    matrix: Vec<f64>,
    leak: Vec<f64>,
}

impl StochasticKernel {
    fn from_rows(n_in: usize, n_out: usize, matrix: Vec<f64>) -> Self {
        debug_assert_eq!(matrix.len(), (n_in + 1) * (n_out + 1));
        let leak = matrix
            .chunks(n_out + 1)
            .map(|row| (1.0 - kahan_sum(row.iter().copied())).max(0.0))
            .collect();
        Self {
            n_in,
            n_out,
            matrix,
            leak,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut matrix = vec![0.0; (n + 1) * (n + 1)];
        for k in 0..=n {
            matrix[k * (n + 1) + k] = 1.0;
        }
        Self::from_rows(n, n, matrix)
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Row of transition probabilities out of input occupation `n`.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.matrix[n * (self.n_out + 1)..(n + 1) * (self.n_out + 1)]
    }

    pub fn entry(&self, n: usize, m: usize) -> f64 {
        self.matrix[n * (self.n_out + 1) + m]
    }

    /// Mass escaping past the output cutoff from input occupation `n`.
    pub fn leak(&self, n: usize) -> f64 {
        self.leak[n]
    }

    pub fn max_leak(&self) -> f64 {
        self.leak.iter().cloned().fold(0.0, f64::max)
    }

    /// `v_out[m] = Σ_n v_in[n] P(m|n)`; returns the output vector and the
    /// leaked mass `Σ_n v_in[n] leak(n)`.
    pub fn apply_to_vector(&self, v_in: &[f64]) -> (Vec<f64>, f64) {
        debug_assert_eq!(v_in.len(), self.n_in + 1);
        let mut out = vec![0.0; self.n_out + 1];
        let mut leaked = 0.0;
        for (n, &p) in v_in.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &k) in out.iter_mut().zip(self.row(n)) {
                *o += p * k;
            }
            leaked += p * self.leak[n];
        }
        (out, leaked)
    }

    /// `w_in[n] = Σ_m P(m|n) w_out[m]` (adjoint action on observables).
    pub fn transpose_apply(&self, w_out: &[f64]) -> Vec<f64> {
        debug_assert_eq!(w_out.len(), self.n_out + 1);
        (0..=self.n_in)
            .map(|n| self.row(n).iter().zip(w_out).map(|(&k, &w)| k * w).sum())
            .collect()
    }

    /// Dense CSV export: one row per input occupation, transition
    /// probabilities followed by the leak column.
    pub fn to_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# cmoe.kernel.v1 n_in={} n_out={}", self.n_in, self.n_out)?;
        write!(w, "n")?;
        for m in 0..=self.n_out {
            write!(w, ",m{m}")?;
        }
        writeln!(w, ",leak")?;
        for n in 0..=self.n_in {
            write!(w, "{n}")?;
            for &p in self.row(n) {
                write!(w, ",{p:e}")?;
            }
            writeln!(w, ",{:e}", self.leak[n])?;
        }
        Ok(())
    }
}

/// Cumulative table of `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

fn check_transmissivity(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "transmissivity must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

fn check_gain(kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < 1.0 {
        return Err(Error::Domain(format!("gain must be >= 1, got {kappa}")));
    }
    Ok(())
}

fn check_env_energy(energy: f64) -> Result<()> {
    if !energy.is_finite() || energy < 0.0 {
        return Err(Error::Domain(format!(
            "environment energy must be >= 0, got {energy}"
        )));
    }
    Ok(())
}

/// Binomial thinning `T_λ`: each of the `n` input quanta survives
/// independently with probability `λ`.
pub fn thinning_kernel(lambda: f64, n_in: usize, n_out: usize) -> Result<StochasticKernel> {
    check_transmissivity(lambda)?;
    let width = n_out + 1;
    let mut matrix = vec![0.0; (n_in + 1) * width];
    if lambda == 0.0 {
        for n in 0..=n_in {
            matrix[n * width] = 1.0;
        }
        return Ok(StochasticKernel::from_rows(n_in, n_out, matrix));
    }
    if lambda == 1.0 {
        for n in 0..=n_in.min(n_out) {
            matrix[n * width + n] = 1.0;
        }
        return Ok(StochasticKernel::from_rows(n_in, n_out, matrix));
    }
    let lnf = ln_factorials(n_in);
    let ln_l = lambda.ln();
    let ln_c = (1.0 - lambda).ln();
    for n in 0..=n_in {
        for m in 0..=n.min(n_out) {
            let ln_p = lnf[n] - lnf[m] - lnf[n - m] + m as f64 * ln_l + (n - m) as f64 * ln_c;
            matrix[n * width + m] = ln_p.exp();
        }
    }
    Ok(StochasticKernel::from_rows(n_in, n_out, matrix))
}

/// Occupation-number kernel of the quantum-limited attenuator of
/// transmissivity `λ` (vacuum environment). Identical to
/// [`thinning_kernel`].
pub fn ql_attenuator_kernel(lambda: f64, n_in: usize, n_out: usize) -> Result<StochasticKernel> {
    thinning_kernel(lambda, n_in, n_out)
}

/// Occupation-number kernel of the quantum-limited amplifier of gain `κ`:
/// each row is the negative-binomial distribution
/// `P(m|n) = C(m,n) (1-1/κ)^(m-n) κ^-(n+1)` on `m ≥ n`.
pub fn ql_amplifier_kernel(kappa: f64, n_in: usize, n_out: usize) -> Result<StochasticKernel> {
    check_gain(kappa)?;
    let width = n_out + 1;
    let mut matrix = vec![0.0; (n_in + 1) * width];
    if kappa == 1.0 {
        for n in 0..=n_in.min(n_out) {
            matrix[n * width + n] = 1.0;
        }
        return Ok(StochasticKernel::from_rows(n_in, n_out, matrix));
    }
    let lnf = ln_factorials(n_out.max(n_in));
    let ln_x = (1.0 - 1.0 / kappa).ln();
    let ln_k = kappa.ln();
    for n in 0..=n_in {
        for m in n..=n_out {
            let ln_p =
                lnf[m] - lnf[n] - lnf[m - n] + (m - n) as f64 * ln_x - (n + 1) as f64 * ln_k;
            matrix[n * width + m] = ln_p.exp();
        }
    }
    Ok(StochasticKernel::from_rows(n_in, n_out, matrix))
}

/// Occupation-number kernel of the quantum-limited phase-contravariant
/// channel (environment side of the two-mode squeezer):
/// `P(m|n) = C(n+m,m) (1-1/κ)ᵐ κ^-(n+1)`.
pub fn ql_contravariant_kernel(kappa: f64, n_in: usize, n_out: usize) -> Result<StochasticKernel> {
    check_gain(kappa)?;
    let width = n_out + 1;
    let mut matrix = vec![0.0; (n_in + 1) * width];
    if kappa == 1.0 {
        for n in 0..=n_in {
            matrix[n * width] = 1.0;
        }
        return Ok(StochasticKernel::from_rows(n_in, n_out, matrix));
    }
    let lnf = ln_factorials(n_in + n_out);
    let ln_x = (1.0 - 1.0 / kappa).ln();
    let ln_k = kappa.ln();
    for n in 0..=n_in {
        for m in 0..=n_out {
            let ln_p = lnf[n + m] - lnf[n] - lnf[m] + m as f64 * ln_x - (n + 1) as f64 * ln_k;
            matrix[n * width + m] = ln_p.exp();
        }
    }
    Ok(StochasticKernel::from_rows(n_in, n_out, matrix))
}

/// Kernel composition: `(k1 ∘ k2)(m|n) = Σ_j k1(j|n) k2(m|j)`, with leak
/// accumulated along the way.
pub fn compose(k1: &StochasticKernel, k2: &StochasticKernel) -> Result<StochasticKernel> {
    if k1.n_out != k2.n_in {
        return Err(Error::Dimension(format!(
            "compose: inner dimensions differ ({} vs {})",
            k1.n_out, k2.n_in
        )));
    }
    let width = k2.n_out + 1;
    let mut matrix = vec![0.0; (k1.n_in + 1) * width];
    let mut leak = vec![0.0; k1.n_in + 1];
    for n in 0..=k1.n_in {
        let row_out = &mut matrix[n * width..(n + 1) * width];
        let mut leaked = k1.leak[n];
        for (j, &p) in k1.row(n).iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &q) in row_out.iter_mut().zip(k2.row(j)) {
                *o += p * q;
            }
            leaked += p * k2.leak[j];
        }
        leak[n] = leaked;
    }
    Ok(StochasticKernel {
        n_in: k1.n_in,
        n_out: k2.n_out,
        matrix,
        leak,
    })
}

/// One of the implemented channel families, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ChannelFamily {
    Thinning { lambda: f64 },
    Attenuator { lambda: f64, env_energy: f64 },
    Amplifier { kappa: f64, env_energy: f64 },
    AdditiveNoise { env_energy: f64 },
    Contravariant { kappa: f64, env_energy: f64 },
}

impl ChannelFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelFamily::Thinning { lambda } => check_transmissivity(lambda),
            ChannelFamily::Attenuator { lambda, env_energy } => {
                check_transmissivity(lambda)?;
                check_env_energy(env_energy)
            }
            ChannelFamily::Amplifier { kappa, env_energy } => {
                check_gain(kappa)?;
                check_env_energy(env_energy)
            }
            ChannelFamily::AdditiveNoise { env_energy } => check_env_energy(env_energy),
            ChannelFamily::Contravariant { kappa, env_energy } => {
                check_gain(kappa)?;
                check_env_energy(env_energy)
            }
        }
    }

    /// Image of the mean occupation under the channel. Thermal inputs map to
    /// thermal outputs with exactly this mean; for arbitrary inputs it is
    /// the first-moment law.
    pub fn mean_energy_map(&self, e_in: f64) -> f64 {
        match *self {
            ChannelFamily::Thinning { lambda } => lambda * e_in,
            ChannelFamily::Attenuator { lambda, env_energy } => {
                lambda * e_in + (1.0 - lambda) * env_energy
            }
            ChannelFamily::Amplifier { kappa, env_energy } => {
                kappa * e_in + (kappa - 1.0) * (env_energy + 1.0)
            }
            ChannelFamily::AdditiveNoise { env_energy } => e_in + env_energy,
            ChannelFamily::Contravariant { kappa, env_energy } => {
                (kappa - 1.0) * (e_in + 1.0) + kappa * env_energy
            }
        }
    }

    /// Gain of the amplifying stage in the two-stage decomposition; 1 when
    /// the channel never increases occupation.
    fn stage_gain(&self) -> f64 {
        match *self {
            ChannelFamily::Thinning { .. } => 1.0,
            ChannelFamily::Attenuator { lambda, env_energy } => {
                1.0 + (1.0 - lambda) * env_energy
            }
            ChannelFamily::Amplifier { kappa, env_energy } => {
                1.0 + (kappa - 1.0) * (env_energy + 1.0)
            }
            ChannelFamily::AdditiveNoise { env_energy } => 1.0 + env_energy,
            ChannelFamily::Contravariant { kappa, env_energy } => kappa * (1.0 + env_energy),
        }
    }

    /// Output cutoff that keeps the leak below ~1e-10 for thermal-like
    /// inputs: `ceil(γ n_in + 10 sqrt(γ n_in + γ))` with `γ` the stage gain.
    pub fn default_output_cutoff(&self, n_in: usize) -> usize {
        let gain = self.stage_gain();
        if gain <= 1.0 {
            return n_in;
        }
        let gn = gain * n_in as f64;
        (gn + 10.0 * (gn + gain).sqrt()).ceil() as usize
    }
}

/// A channel family applied independently to `n_modes` modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub family: ChannelFamily,
    pub n_modes: usize,
}

impl ChannelSpec {
    pub fn new(family: ChannelFamily, n_modes: usize) -> Result<Self> {
        family.validate()?;
        if n_modes == 0 {
            return Err(Error::Domain("n_modes must be >= 1".into()));
        }
        Ok(Self { family, n_modes })
    }
}

/// Single-mode kernel of any channel family.
///
/// Zero-environment-energy channels use the quantum-limited kernels
/// directly. Thermal-environment channels are built as an attenuation
/// stage followed by an amplification stage whose parameters are fixed by
/// the family's mean-energy law:
///
/// * attenuator `(λ, E)`:  amplifier gain `κ₁ = 1 + (1-λ)E` after
///   transmissivity `λ₁ = λ/κ₁`;
/// * amplifier `(κ, E)`:   `κ₂ = 1 + (κ-1)(E+1)` after `λ₂ = κ/κ₂`;
/// * additive noise `E`:   `κ = 1 + E` after `λ = 1/(1+E)`;
/// * contravariant `(κ, E)`: contravariant stage `κ₄ = κ(1+E)` after
///   `λ₄ = (κ-1)/(κ₄-1)`.
pub fn build_channel(
    family: &ChannelFamily,
    n_in: usize,
    n_out: usize,
) -> Result<StochasticKernel> {
    family.validate()?;
    match *family {
        ChannelFamily::Thinning { lambda } => thinning_kernel(lambda, n_in, n_out),
        ChannelFamily::Attenuator { lambda, env_energy } => {
            if env_energy == 0.0 {
                ql_attenuator_kernel(lambda, n_in, n_out)
            } else {
                let gain = 1.0 + (1.0 - lambda) * env_energy;
                let first = ql_attenuator_kernel(lambda / gain, n_in, n_in)?;
                let second = ql_amplifier_kernel(gain, n_in, n_out)?;
                compose(&first, &second)
            }
        }
        ChannelFamily::Amplifier { kappa, env_energy } => {
            if env_energy == 0.0 {
                ql_amplifier_kernel(kappa, n_in, n_out)
            } else {
                let gain = 1.0 + (kappa - 1.0) * (env_energy + 1.0);
                let first = ql_attenuator_kernel(kappa / gain, n_in, n_in)?;
                let second = ql_amplifier_kernel(gain, n_in, n_out)?;
                compose(&first, &second)
            }
        }
        ChannelFamily::AdditiveNoise { env_energy } => {
            if env_energy == 0.0 {
                thinning_kernel(1.0, n_in, n_out)
            } else {
                let gain = 1.0 + env_energy;
                let first = ql_attenuator_kernel(1.0 / gain, n_in, n_in)?;
                let second = ql_amplifier_kernel(gain, n_in, n_out)?;
                compose(&first, &second)
            }
        }
        ChannelFamily::Contravariant { kappa, env_energy } => {
            if env_energy == 0.0 {
                ql_contravariant_kernel(kappa, n_in, n_out)
            } else {
                let gain = kappa * (1.0 + env_energy);
                let lambda = (kappa - 1.0) / (gain - 1.0);
                let first = ql_attenuator_kernel(lambda, n_in, n_in)?;
                let second = ql_contravariant_kernel(gain, n_in, n_out)?;
                compose(&first, &second)
            }
        }
    }
}

/// Push a single-mode distribution through a kernel.
pub fn apply(kernel: &StochasticKernel, d: &TruncatedDist) -> Result<TruncatedDist> {
    if d.n_modes() != 1 {
        return Err(Error::Dimension(format!(
            "apply expects a single-mode distribution, got {} modes",
            d.n_modes()
        )));
    }
    if d.cutoff() != kernel.n_in() {
        return Err(Error::Dimension(format!(
            "kernel expects input cutoff {}, distribution has {}",
            kernel.n_in(),
            d.cutoff()
        )));
    }
    let (probs, leaked) = kernel.apply_to_vector(d.probs());
    TruncatedDist::from_parts(1, kernel.n_out(), probs, d.tail_mass() + leaked)
}

/// Contract one axis of a dense joint array with a kernel. Returns the new
/// array and the leaked mass.
fn apply_along_axis(
    data: &[f64],
    dims: &[usize],
    axis: usize,
    kernel: &StochasticKernel,
) -> (Vec<f64>, f64) {
    let in_len = dims[axis];
    debug_assert_eq!(in_len, kernel.n_in() + 1);
    let out_len = kernel.n_out() + 1;
    let inner: usize = dims[axis + 1..].iter().product();
    let outer: usize = dims[..axis].iter().product();
    let mut out = vec![0.0; outer * out_len * inner];
    let mut leaked = 0.0;
    for o in 0..outer {
        for i in 0..inner {
            for n in 0..in_len {
                let p = data[(o * in_len + n) * inner + i];
                if p == 0.0 {
                    continue;
                }
                leaked += p * kernel.leak(n);
                let row = kernel.row(n);
                for (m, &k) in row.iter().enumerate() {
                    out[(o * out_len + m) * inner + i] += p * k;
                }
            }
        }
    }
    (out, leaked)
}

/// Apply the one-mode kernel of `spec.family` independently to every mode
/// of `d` (which may be correlated). The output cutoff is chosen by
/// [`ChannelFamily::default_output_cutoff`].
pub fn apply_multimode(spec: &ChannelSpec, d: &TruncatedDist) -> Result<TruncatedDist> {
    if spec.n_modes != d.n_modes() {
        return Err(Error::Dimension(format!(
            "channel acts on {} mode(s), distribution has {}",
            spec.n_modes,
            d.n_modes()
        )));
    }
    let n_in = d.cutoff();
    let n_out = spec.family.default_output_cutoff(n_in);
    let kernel = build_channel(&spec.family, n_in, n_out)?;
    let mut data = d.probs().to_vec();
    let mut dims = vec![n_in + 1; d.n_modes()];
    let mut tail = d.tail_mass();
    for axis in 0..d.n_modes() {
        let (next, leaked) = apply_along_axis(&data, &dims, axis, &kernel);
        data = next;
        dims[axis] = n_out + 1;
        tail += leaked;
    }
    TruncatedDist::from_parts(d.n_modes(), n_out, data, tail)
}

/// Forward multimode action of a fixed kernel on a raw joint probability
/// vector (every axis has length `n_in + 1`). Returns the output vector
/// (axes of length `n_out + 1`) and the leaked mass.
pub(crate) fn forward_multimode(
    kernel: &StochasticKernel,
    probs: &[f64],
    n_modes: usize,
) -> (Vec<f64>, f64) {
    let mut data = probs.to_vec();
    let mut dims = vec![kernel.n_in() + 1; n_modes];
    let mut leaked = 0.0;
    for axis in 0..n_modes {
        let (next, leak) = apply_along_axis(&data, &dims, axis, kernel);
        data = next;
        dims[axis] = kernel.n_out() + 1;
        leaked += leak;
    }
    (data, leaked)
}

/// Adjoint of [`apply_multimode`] for a fixed kernel: contracts every axis
/// of a function on the output grid back to the input grid. Used by the
/// output-entropy gradient.
pub(crate) fn transpose_multimode(
    kernel: &StochasticKernel,
    w_out: &[f64],
    n_modes: usize,
) -> Vec<f64> {
    let out_len = kernel.n_out() + 1;
    let in_len = kernel.n_in() + 1;
    let mut data = w_out.to_vec();
    let mut dims = vec![out_len; n_modes];
    for axis in 0..n_modes {
        let inner: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut next = vec![0.0; outer * in_len * inner];
        for o in 0..outer {
            for i in 0..inner {
                for n in 0..in_len {
                    let row = kernel.row(n);
                    let mut acc = 0.0;
                    for (m, &k) in row.iter().enumerate() {
                        acc += k * data[(o * out_len + m) * inner + i];
                    }
                    next[(o * in_len + n) * inner + i] = acc;
                }
            }
        }
        data = next;
        dims[axis] = in_len;
    }
    data
}
