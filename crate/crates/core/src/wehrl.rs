//! Husimi function and Wehrl entropy of truncated single-mode density
//! matrices and of diagonal states on one or two modes.
//!
//! The Husimi function of a state ρ is `Q(z) = ⟨z|ρ|z⟩` with `|z⟩` a
//! coherent state; it is the density of heterodyne outcomes against
//! `d²ⁿz/πⁿ`. The Wehrl entropy is `W = -∫ Q ln Q d²ⁿz/πⁿ`.
//!
//! For phase-invariant (occupation-diagonal) states `Q` depends only on
//! `u = |z|²`, and `W` reduces to the 1-D integral of
//! `-Q(u) ln Q(u)` with `Q(u) = e^{-u} Σ_k p_k uᵏ/k!`; this is the
//! `Radial` scheme. General single-mode matrices use the `Planar` scheme:
//! the same radial rule times a uniform angular rule.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dist::{kahan_sum, TruncatedDist, TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::specfun::EntropyNats;

/// Largest tolerated defect of the quadrature normalization check.
pub const QUAD_NORM_TOL: f64 = 1e-8;

/// Neglected-mass budget for the truncated integration domain.
pub const NEGLECTED_MASS_TOL: f64 = 1e-12;

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGENVALUE_FLOOR: f64 = -1e-12;

/// Hermitian, positive, unit-trace matrix in the truncated Fock basis
/// `{|0⟩..|cutoff⟩}` of a single mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    cutoff: usize,
    matrix: DMatrix<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct RawDensityMatrix {
    cutoff: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl DensityMatrix {
    /// Validating constructor: checks Hermiticity, unit trace, and
    /// positivity (eigenvalues above `-1e-12`).
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Dimension("density matrix must be square".into()));
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..n {
                let defect = (matrix[(i, j)] - matrix[(j, i)].conj()).norm();
                if defect > HERMITICITY_TOL {
                    return Err(Error::Domain(format!(
                        "matrix is not Hermitian: defect {defect:.3e} at ({i}, {j})"
                    )));
                }
            }
        }
        let trace: Complex64 = matrix.diagonal().iter().sum();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::Domain(format!(
                "trace must be 1, got {} + {}i",
                trace.re, trace.im
            )));
        }
        let eigenvalues = matrix.clone().symmetric_eigen().eigenvalues;
        if let Some(min) = eigenvalues.iter().cloned().reduce(f64::min) {
            if min < EIGENVALUE_FLOOR {
                return Err(Error::Domain(format!(
                    "matrix is not positive: smallest eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(Self {
            cutoff: n - 1,
            matrix,
        })
    }

    /// Diagonal state with the spectrum of a single-mode distribution. The
    /// tail mass must be below the trace tolerance.
    pub fn from_diagonal(d: &TruncatedDist) -> Result<Self> {
        if d.n_modes() != 1 {
            return Err(Error::Dimension(
                "from_diagonal expects a single-mode distribution".into(),
            ));
        }
        if d.tail_mass() > TRACE_TOL {
            return Err(Error::Truncation {
                tail: d.tail_mass(),
                threshold: TRACE_TOL,
            });
        }
        let n = d.cutoff() + 1;
        let mut matrix = DMatrix::zeros(n, n);
        for (k, &p) in d.probs().iter().enumerate() {
            matrix[(k, k)] = Complex64::new(p, 0.0);
        }
        Self::from_matrix(matrix)
    }

    /// Truncated thermal state with mean photon number `energy`. The cutoff
    /// must be large enough that the truncated tail stays below the trace
    /// tolerance.
    pub fn thermal(energy: f64, cutoff: usize) -> Result<Self> {
        let d = TruncatedDist::geometric(crate::specfun::MeanPhotonNumber::new(energy)?, cutoff)?;
        Self::from_diagonal(&d)
    }

    /// Pure state from Fock-basis amplitudes; the vector is normalized.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Dimension("empty amplitude vector".into()));
        }
        let norm2 = kahan_sum(amplitudes.iter().map(|a| a.norm_sqr()));
        if norm2 <= 0.0 {
            return Err(Error::Domain("zero state vector".into()));
        }
        let scale = norm2.sqrt();
        let n = amplitudes.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                matrix[(i, j)] = (amplitudes[i] / scale) * (amplitudes[j] / scale).conj();
            }
        }
        Self::from_matrix(matrix)
    }

    /// Truncated coherent state `|α⟩` (normalized after truncation). Pick
    /// the cutoff so that `e^{-|α|²} |α|^{2k}/k!` is negligible beyond it.
    pub fn coherent(alpha: Complex64, cutoff: usize) -> Result<Self> {
        let mut amps = Vec::with_capacity(cutoff + 1);
        let mut a = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
        for k in 0..=cutoff {
            if k > 0 {
                a *= alpha / (k as f64).sqrt();
            }
            amps.push(a);
        }
        Self::pure(&amps)
    }

    /// Reproducible random mixed state: `ρ = GG†/tr(GG†)` with `G` a
    /// complex Gaussian matrix.
    pub fn random_mixed(cutoff: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = cutoff + 1;
        let g = DMatrix::from_fn(n, n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        let mut rho = &g * g.adjoint();
        let trace: Complex64 = rho.diagonal().iter().sum();
        rho /= Complex64::new(trace.re, 0.0);
        // Symmetrize away the last-ulp Hermiticity defects of the product.
        let sym = (&rho + rho.adjoint()) / Complex64::new(2.0, 0.0);
        Self::from_matrix(sym)
    }

    /// Reproducible random pure state with Gaussian amplitudes.
    pub fn random_pure(cutoff: usize, seed: u64) -> Result<Self> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..=cutoff)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        Self::pure(&amps)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// Diagonal of the matrix as a distribution (tail = 1 - trace defect).
    pub fn diagonal_part(&self) -> Result<TruncatedDist> {
        let probs: Vec<f64> = self
            .matrix
            .diagonal()
            .iter()
            .map(|c| c.re.max(0.0))
            .collect();
        let tail = (1.0 - kahan_sum(probs.iter().copied())).max(0.0);
        TruncatedDist::from_parts(1, self.cutoff, probs, tail)
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.cutoff + 1;
        let raw = RawDensityMatrix {
            cutoff: self.cutoff,
            re: (0..n)
                .map(|i| (0..n).map(|j| self.matrix[(i, j)].re).collect())
                .collect(),
            im: (0..n)
                .map(|i| (0..n).map(|j| self.matrix[(i, j)].im).collect())
                .collect(),
        };
        Ok(serde_json::to_string(&raw)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawDensityMatrix = serde_json::from_str(text)?;
        let n = raw.cutoff + 1;
        if raw.re.len() != n
            || raw.im.len() != n
            || raw.re.iter().any(|r| r.len() != n)
            || raw.im.iter().any(|r| r.len() != n)
        {
            return Err(Error::Dimension(
                "re/im blocks do not match the declared cutoff".into(),
            ));
        }
        let matrix = DMatrix::from_fn(n, n, |i, j| Complex64::new(raw.re[i][j], raw.im[i][j]));
        Self::from_matrix(matrix)
    }
}

/// `S(ρ) = -Σ eig ln eig`; eigenvalues within tolerance of zero are
/// clamped to zero.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<EntropyNats> {
    let eigenvalues = rho.matrix.clone().symmetric_eigen().eigenvalues;
    let mut s = 0.0;
    for &ev in eigenvalues.iter() {
        if ev < EIGENVALUE_FLOOR {
            return Err(Error::Numeric(format!(
                "negative eigenvalue {ev:.3e} beyond tolerance"
            )));
        }
        if ev > 0.0 {
            s -= ev * ev.ln();
        }
    }
    Ok(EntropyNats(s.max(0.0)))
}

/// Quadrature discretization of the heterodyne outcome integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum QuadratureScheme {
    /// 1-D rule in `u = |z|²`; exact for phase-invariant states.
    Radial,
    /// Radial rule times a uniform angular rule; general single-mode states.
    Planar,
}

/// Gauss–Legendre rule on `u = r² ∈ [0, upper]` with (for `Planar`)
/// `angular_nodes` equally spaced phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub scheme: QuadratureScheme,
    pub radial_nodes: usize,
    pub angular_nodes: usize,
    pub upper: f64,
}

impl QuadratureSpec {
    /// Default rule for states truncated at `cutoff`:
    /// `upper = cutoff + 20 sqrt(cutoff) + 20`, 512 radial and 256 angular
    /// nodes. The exponential factor in `Q` makes the neglected mass beyond
    /// `upper` far below [`NEGLECTED_MASS_TOL`].
    pub fn for_cutoff(scheme: QuadratureScheme, cutoff: usize) -> Self {
        let c = cutoff as f64;
        Self {
            scheme,
            radial_nodes: 512,
            angular_nodes: 256,
            upper: c + 20.0 * c.sqrt() + 20.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radial_nodes < 16 {
            return Err(Error::Domain(format!(
                "at least 16 radial nodes required, got {}",
                self.radial_nodes
            )));
        }
        if matches!(self.scheme, QuadratureScheme::Planar) && self.angular_nodes < 16 {
            return Err(Error::Domain(format!(
                "at least 16 angular nodes required, got {}",
                self.angular_nodes
            )));
        }
        if !self.upper.is_finite() || self.upper <= 0.0 {
            return Err(Error::Domain(format!(
                "upper integration limit must be positive, got {}",
                self.upper
            )));
        }
        Ok(())
    }

    /// Upper bound on the Husimi mass beyond the integration domain for a
    /// state truncated at `cutoff`: the tail of the slowest-decaying
    /// integrand `e^{-u} u^cutoff / cutoff!`.
    pub fn neglected_mass_bound(&self, cutoff: usize) -> f64 {
        // Regularized upper incomplete gamma Q(cutoff+1, U) = e^-U Σ_{j<=cutoff} U^j/j!
        let u = self.upper;
        let mut term = (-u).exp();
        let mut sum = term;
        for j in 1..=cutoff {
            term *= u / j as f64;
            sum += term;
        }
        sum
    }

    fn check_domain(&self, cutoff: usize) -> Result<()> {
        let neglected = self.neglected_mass_bound(cutoff);
        if neglected > NEGLECTED_MASS_TOL {
            return Err(Error::Numeric(format!(
                "integration domain too small: neglected mass bound {neglected:.3e}"
            )));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[0, upper]` (Newton iteration on
/// the Legendre recurrence).
fn gauss_legendre(n: usize, upper: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Initial guess (Chebyshev-like), then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * upper * (1.0 - x);
        weights[i] = 0.5 * upper * w;
        nodes[n - 1 - i] = 0.5 * upper * (1.0 + x);
        weights[n - 1 - i] = 0.5 * upper * w;
    }
    (nodes, weights)
}

/// Husimi function `Q(z) = ⟨z|ρ|z⟩ = e^{-|z|²} Σ ρ_jk z̄ʲ zᵏ/√(j!k!)`,
/// clamped into `[0, 1]`.
pub fn husimi_q(rho: &DensityMatrix, z: Complex64) -> f64 {
    let n = rho.cutoff + 1;
    // v_k = e^{-|z|²/2} z^k / sqrt(k!)
    let mut v = Vec::with_capacity(n);
    let mut a = Complex64::new((-z.norm_sqr() / 2.0).exp(), 0.0);
    for k in 0..n {
        if k > 0 {
            a *= z / (k as f64).sqrt();
        }
        v.push(a);
    }
    let mut q = 0.0;
    for j in 0..n {
        for k in 0..n {
            q += (v[j].conj() * rho.matrix[(j, k)] * v[k]).re;
        }
    }
    q.clamp(0.0, 1.0)
}

/// Tables `M[i][k] = e^{-u_i} u_iᵏ/k!` for the radial rule.
fn poisson_table(nodes: &[f64], cutoff: usize) -> Vec<Vec<f64>> {
    nodes
        .iter()
        .map(|&u| {
            let mut row = Vec::with_capacity(cutoff + 1);
            let mut t = (-u).exp();
            for k in 0..=cutoff {
                if k > 0 {
                    t *= u / k as f64;
                }
                row.push(t);
            }
            row
        })
        .collect()
}

fn entropy_term(q: f64) -> f64 {
    if q > 0.0 {
        -q * q.ln()
    } else {
        0.0
    }
}

struct RadialOutcome {
    entropy: f64,
    norm: f64,
}

fn radial_wehrl_1mode(p: &TruncatedDist, quad: &QuadratureSpec) -> RadialOutcome {
    let (nodes, weights) = gauss_legendre(quad.radial_nodes, quad.upper);
    let table = poisson_table(&nodes, p.cutoff());
    let mut entropy = 0.0;
    let mut norm = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let q: f64 = table[i]
            .iter()
            .zip(p.probs())
            .map(|(&t, &pk)| t * pk)
            .sum();
        entropy += w * entropy_term(q);
        norm += w * q;
    }
    RadialOutcome { entropy, norm }
}

fn radial_wehrl_2mode(p: &TruncatedDist, quad: &QuadratureSpec) -> RadialOutcome {
    let (nodes, weights) = gauss_legendre(quad.radial_nodes, quad.upper);
    let table = poisson_table(&nodes, p.cutoff());
    let width = p.cutoff() + 1;
    let n = nodes.len();
    // A[i][k2] = Σ_k1 M[i][k1] p[k1, k2], then Q[i][j] = Σ_k2 A[i][k2] M[j][k2].
    let mut a = vec![0.0; n * width];
    for i in 0..n {
        for (k1, &t) in table[i].iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            let row = &p.probs()[k1 * width..(k1 + 1) * width];
            let acc = &mut a[i * width..(i + 1) * width];
            for (dst, &pv) in acc.iter_mut().zip(row) {
                *dst += t * pv;
            }
        }
    }
    let mut entropy = 0.0;
    let mut norm = 0.0;
    for i in 0..n {
        let ai = &a[i * width..(i + 1) * width];
        for j in 0..n {
            let q: f64 = ai.iter().zip(&table[j]).map(|(&x, &t)| x * t).sum();
            let w = weights[i] * weights[j];
            entropy += w * entropy_term(q);
            norm += w * q;
        }
    }
    RadialOutcome { entropy, norm }
}

/// Wehrl entropy of a diagonal state on one or two modes, by radial
/// quadrature per mode.
pub fn wehrl_entropy_diag(p: &TruncatedDist, quad: &QuadratureSpec) -> Result<EntropyNats> {
    let (w, _) = wehrl_entropy_diag_with_norm(p, quad)?;
    Ok(w)
}

/// As [`wehrl_entropy_diag`], additionally returning the quadrature norm
/// `∫ Q` (which must equal `1 - tail` up to quadrature error).
pub fn wehrl_entropy_diag_with_norm(
    p: &TruncatedDist,
    quad: &QuadratureSpec,
) -> Result<(EntropyNats, f64)> {
    quad.validate()?;
    quad.check_domain(p.cutoff())?;
    if p.tail_mass() > TAIL_THRESHOLD {
        return Err(Error::Truncation {
            tail: p.tail_mass(),
            threshold: TAIL_THRESHOLD,
        });
    }
    let outcome = match p.n_modes() {
        1 => radial_wehrl_1mode(p, quad),
        2 => radial_wehrl_2mode(p, quad),
        n => {
            return Err(Error::Dimension(format!(
                "diagonal Wehrl entropy supports 1 or 2 modes, got {n}"
            )))
        }
    };
    let defect = (outcome.norm - (1.0 - p.tail_mass())).abs();
    if defect > QUAD_NORM_TOL {
        return Err(Error::Numeric(format!(
            "quadrature normalization defect {defect:.3e}"
        )));
    }
    Ok((EntropyNats(outcome.entropy), outcome.norm))
}

/// Wehrl entropy of a general single-mode density matrix by planar
/// quadrature (radial Gauss–Legendre times uniform angles).
pub fn wehrl_entropy_general(rho: &DensityMatrix, quad: &QuadratureSpec) -> Result<EntropyNats> {
    let (w, _) = wehrl_entropy_general_with_norm(rho, quad)?;
    Ok(w)
}

/// As [`wehrl_entropy_general`], additionally returning the quadrature
/// norm.
pub fn wehrl_entropy_general_with_norm(
    rho: &DensityMatrix,
    quad: &QuadratureSpec,
) -> Result<(EntropyNats, f64)> {
    quad.validate()?;
    quad.check_domain(rho.cutoff())?;
    if !matches!(quad.scheme, QuadratureScheme::Planar) {
        return Err(Error::Domain(
            "general Wehrl entropy requires the planar scheme".into(),
        ));
    }
    let n = rho.cutoff + 1;
    let (nodes, weights) = gauss_legendre(quad.radial_nodes, quad.upper);
    let n_ang = quad.angular_nodes;
    let phases: Vec<Complex64> = (0..n_ang)
        .map(|j| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n_ang as f64))
        .collect();
    let mut entropy = 0.0;
    let mut norm = 0.0;
    for (i, &u) in nodes.iter().enumerate() {
        let r = u.sqrt();
        // b_k = e^{-u/2} r^k / sqrt(k!)
        let mut b = Vec::with_capacity(n);
        let mut t = (-u / 2.0).exp();
        for k in 0..n {
            if k > 0 {
                t *= r / (k as f64).sqrt();
            }
            b.push(t);
        }
        // Q(r, φ) = T_0 + 2 Re Σ_{d≥1} T_d e^{i d φ}, T_d = Σ_j ρ_{j,j+d} b_j b_{j+d}.
        let mut t_diag = 0.0;
        for (j, &bj) in b.iter().enumerate() {
            t_diag += rho.matrix[(j, j)].re * bj * bj;
        }
        let mut t_off = Vec::with_capacity(n - 1);
        for d in 1..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n - d {
                acc += rho.matrix[(j, j + d)] * (b[j] * b[j + d]);
            }
            t_off.push(acc);
        }
        let w_i = weights[i] / n_ang as f64;
        for phase in &phases {
            let mut q = t_diag;
            let mut e = Complex64::new(1.0, 0.0);
            for td in &t_off {
                e *= phase;
                q += 2.0 * (td * e).re;
            }
            let q = q.max(0.0);
            entropy += w_i * entropy_term(q);
            norm += w_i * q;
        }
    }
    let trace_defect = (norm - 1.0).abs();
    if trace_defect > QUAD_NORM_TOL {
        return Err(Error::Numeric(format!(
            "quadrature normalization defect {trace_defect:.3e}"
        )));
    }
    Ok((EntropyNats(entropy), norm))
}
