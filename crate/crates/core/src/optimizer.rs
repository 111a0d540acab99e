//! Constrained minimum-output-entropy search.
//!
//! Minimizes the output Shannon entropy of a channel over truncated input
//! distributions with a fixed input entropy, by projected descent on the
//! probability simplex: the gradient of the output entropy through the
//! linear kernel map is `Kᵀ(-1 - ln q)` at output `q`, a step is re-projected
//! onto the simplex, and the entropy equality constraint is restored by an
//! exponential tilt `p ↦ p^β/Z(β)`. Multi-start; results are labeled local
//! minima — the acceptance of a run rests on matching the analytic bound,
//! not on any global-optimality claim.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{lifted_bound, BoundSpec};
use crate::dist::{kahan_sum, total_variation, TruncatedDist};
use crate::error::{Error, Result};
use crate::kernels::{build_channel, forward_multimode, transpose_multimode, ChannelSpec};
use crate::specfun::{g_inv_raw, EntropyNats, MeanPhotonNumber};

/// Residual |H(p) - target| achieved by [`entropy_projection`].
pub const ENTROPY_PROJECTION_TOL: f64 = 1e-8;

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const LN_FLOOR: f64 = 1e-300;
const STALL_WINDOW: usize = 20;
const STALL_REL_TOL: f64 = 1e-12;

/// A constrained minimization instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationProblem {
    pub channel: ChannelSpec,
    /// Required input entropy in nats (total over all modes).
    pub target_entropy: f64,
    /// Per-mode input cutoff.
    pub cutoff: usize,
    /// Stopping threshold on the gradient-mapping norm.
    pub grad_tol: f64,
    pub max_iters: usize,
    pub starts: usize,
    pub seed: u64,
}

impl OptimizationProblem {
    pub fn new(channel: ChannelSpec, target_entropy: f64, cutoff: usize) -> Self {
        Self {
            channel,
            target_entropy,
            cutoff,
            grad_tol: 1e-9,
            max_iters: 5000,
            starts: 8,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.channel.family.validate()?;
        let max = self.channel.n_modes as f64 * ((self.cutoff + 1) as f64).ln();
        if !self.target_entropy.is_finite()
            || self.target_entropy < 0.0
            || self.target_entropy > max
        {
            return Err(Error::Domain(format!(
                "target entropy {} outside the achievable range [0, {max:.6}] at cutoff {}",
                self.target_entropy, self.cutoff
            )));
        }
        if self.starts == 0 || self.max_iters == 0 {
            return Err(Error::Domain("starts and max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one minimization (the best of all starts).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub argmin: TruncatedDist,
    pub input_entropy: f64,
    pub output_entropy: f64,
    /// Lifted analytic bound at the achieved input entropy.
    pub bound: f64,
    /// `output_entropy - bound`; nonnegative up to tolerance when the
    /// bounds hold.
    pub gap: f64,
    /// Total variation distance to the matched geometric product with the
    /// same entropy.
    pub tv_to_geometric: f64,
    pub converged: bool,
    pub iterations: usize,
    pub start_index: usize,
}

/// Euclidean projection onto the probability simplex.
fn simplex_project(x: &[f64]) -> Vec<f64> {
    let mut sorted = x.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        acc += v;
        let candidate = (acc - 1.0) / (k + 1) as f64;
        if v - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    x.iter().map(|&v| (v - theta).max(0.0)).collect()
}

fn shannon(p: &[f64]) -> f64 {
    -kahan_sum(p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()))
}

/// Entropy of the exponential tilt `p^β/Z(β)`, computed stably in log
/// space over the support of `p`.
fn tilted(p: &[f64], beta: f64) -> Vec<f64> {
    let mut logs: Vec<f64> = p
        .iter()
        .map(|&v| if v > 0.0 { beta * v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for l in &mut logs {
        if l.is_finite() {
            *l = (*l - max).exp();
            z += *l;
        } else {
            *l = 0.0;
        }
    }
    logs.iter_mut().for_each(|l| *l /= z);
    logs
}

/// Move `probs` (a bare simplex vector) along the exponential-tilt path
/// until its entropy equals `target` within [`ENTROPY_PROJECTION_TOL`].
fn tilt_to_entropy(probs: &[f64], target: f64) -> Result<Vec<f64>> {
    let h1 = shannon(probs);
    if (h1 - target).abs() < ENTROPY_PROJECTION_TOL {
        return Ok(probs.to_vec());
    }
    let support = probs.iter().filter(|&&v| v > 0.0).count();
    let h0 = (support as f64).ln();
    if target > h0 + ENTROPY_PROJECTION_TOL {
        return Err(Error::Domain(format!(
            "target entropy {target:.6} exceeds ln(support) = {h0:.6}"
        )));
    }
    if target >= h0 - ENTROPY_PROJECTION_TOL {
        // β = 0: uniform over the support.
        return Ok(tilted(probs, 0.0));
    }
    // H(β) decreases from ln(support) at β = 0; bracket the target.
    let (mut lo, mut hi) = if target > h1 { (0.0, 1.0) } else { (1.0, 2.0) };
    if target <= h1 {
        let mut h = shannon(&tilted(probs, hi));
        while h > target {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Numeric(format!(
                    "entropy tilt cannot reach target {target:.6} (stuck at {h:.6})"
                )));
            }
            h = shannon(&tilted(probs, hi));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let q = tilted(probs, mid);
        let h = shannon(&q);
        if (h - target).abs() < ENTROPY_PROJECTION_TOL {
            return Ok(q);
        }
        if h > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = tilted(probs, 0.5 * (lo + hi));
    let h = shannon(&q);
    if (h - target).abs() < 10.0 * ENTROPY_PROJECTION_TOL {
        Ok(q)
    } else {
        Err(Error::Numeric(format!(
            "entropy tilt bisection stalled at H = {h:.9}, target {target:.9}"
        )))
    }
}

/// Nearest distribution along the exponential-tilt path `p ↦ p^β/Z(β)`
/// with the requested entropy.
pub fn entropy_projection(d: &TruncatedDist, target: EntropyNats) -> Result<TruncatedDist> {
    if d.tail_mass() > 0.0 {
        return Err(Error::Domain(
            "entropy projection expects a tail-free distribution".into(),
        ));
    }
    let probs = tilt_to_entropy(d.probs(), target.0)?;
    TruncatedDist::from_parts(d.n_modes(), d.cutoff(), probs, 0.0)
}

/// Matched geometric product at the problem's target entropy, normalized
/// onto the truncated grid and tilted to hit the target exactly.
fn geometric_matched(problem: &OptimizationProblem) -> Result<TruncatedDist> {
    let n = problem.channel.n_modes;
    let per_mode = problem.target_entropy / n as f64;
    let energy = g_inv_raw(per_mode)?;
    let one = TruncatedDist::geometric(MeanPhotonNumber::new(energy)?, problem.cutoff)?;
    let scale = 1.0 - one.tail_mass();
    let probs: Vec<f64> = one.probs().iter().map(|&p| p / scale).collect();
    let one = TruncatedDist::from_parts(1, problem.cutoff, probs, 0.0)?;
    let mut joint = one.clone();
    for _ in 1..n {
        joint = joint.tensor(&one)?;
    }
    entropy_projection(&joint, EntropyNats(problem.target_entropy))
}

/// Mixture of the uniform distribution and the vacuum point mass whose
/// entropy equals the target; spans the whole entropy range without
/// favoring the geometric shape.
fn vacuum_mixture_start(problem: &OptimizationProblem) -> Result<TruncatedDist> {
    let n = problem.channel.n_modes;
    let size = (problem.cutoff + 1).pow(n as u32);
    let uniform = 1.0 / size as f64;
    let entropy_of = |w: f64| -> f64 {
        let p0 = w + (1.0 - w) * uniform;
        let rest = (1.0 - w) * uniform;
        let mut h = -p0 * p0.ln();
        if rest > 0.0 {
            h -= (size - 1) as f64 * rest * rest.ln();
        }
        h
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if entropy_of(mid) > problem.target_entropy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    let mut probs = vec![(1.0 - w) * uniform; size];
    probs[0] += w;
    let total = kahan_sum(probs.iter().copied());
    probs.iter_mut().for_each(|p| *p /= total);
    let d = TruncatedDist::from_parts(n, problem.cutoff, probs, 0.0)?;
    entropy_projection(&d, EntropyNats(problem.target_entropy))
}

struct StartOutcome {
    probs: Vec<f64>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

struct Objective<'a> {
    kernel: &'a crate::kernels::StochasticKernel,
    n_modes: usize,
}

impl Objective<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let (q, _) = forward_multimode(self.kernel, p, self.n_modes);
        shannon(&q)
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let (q, _) = forward_multimode(self.kernel, p, self.n_modes);
        let w: Vec<f64> = q
            .iter()
            .map(|&v| -1.0 - v.max(LN_FLOOR).ln())
            .collect();
        transpose_multimode(self.kernel, &w, self.n_modes)
    }
}

/// Simplex projection followed by the entropy tilt; `None` when the point
/// cannot be tilted to the target (support too small).
fn retract(x: &[f64], target: f64) -> Option<Vec<f64>> {
    let on_simplex = simplex_project(x);
    tilt_to_entropy(&on_simplex, target).ok()
}

fn descend(
    objective: &Objective,
    start: Vec<f64>,
    target: f64,
    grad_tol: f64,
    max_iters: usize,
) -> StartOutcome {
    let mut p = start;
    let mut f = objective.value(&p);
    let mut converged = false;
    let mut iterations = 0;
    let mut stall_anchor = f;
    let mut stall_count = 0;
    for iter in 0..max_iters {
        iterations = iter + 1;
        let grad = objective.gradient(&p);
        // Gradient-mapping stopping rule at unit step.
        let trial: Vec<f64> = p.iter().zip(&grad).map(|(&v, &g)| v - g).collect();
        if let Some(mapped) = retract(&trial, target) {
            let movement: f64 = mapped
                .iter()
                .zip(&p)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if movement < grad_tol {
                converged = true;
                break;
            }
        }
        // Backtracking line search on the retracted step.
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= MIN_STEP {
            let trial: Vec<f64> = p
                .iter()
                .zip(&grad)
                .map(|(&v, &g)| v - alpha * g)
                .collect();
            if let Some(candidate) = retract(&trial, target) {
                let directional: f64 = grad
                    .iter()
                    .zip(candidate.iter().zip(&p))
                    .map(|(&g, (&c, &v))| g * (c - v))
                    .sum();
                let f_new = objective.value(&candidate);
                if directional < 0.0 && f_new <= f + ARMIJO_C * directional {
                    p = candidate;
                    f = f_new;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No feasible descent step: first-order stationary.
            converged = true;
            break;
        }
        // Objective-stall rule over a sliding window.
        stall_count += 1;
        if stall_count >= STALL_WINDOW {
            let rel = (stall_anchor - f).abs() / f.abs().max(1.0);
            if rel < STALL_REL_TOL {
                converged = true;
                break;
            }
            stall_anchor = f;
            stall_count = 0;
        }
    }
    StartOutcome {
        objective: f,
        probs: p,
        iterations,
        converged,
    }
}

fn splitmix(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Minimize the output entropy over inputs with the problem's target
/// entropy. Runs all starts (geometric-matched, vacuum-uniform mixture,
/// seeded random) and returns the best local minimizer; ties break on the
/// start index, so the result is deterministic.
pub fn minimize_output_entropy(problem: &OptimizationProblem) -> Result<OptimizationResult> {
    problem.validate()?;
    let n_modes = problem.channel.n_modes;
    let n_out = problem.channel.family.default_output_cutoff(problem.cutoff);
    let kernel = build_channel(&problem.channel.family, problem.cutoff, n_out)?;
    let objective = Objective {
        kernel: &kernel,
        n_modes,
    };

    let matched = geometric_matched(problem)?;
    let mut starts: Vec<Vec<f64>> = vec![matched.probs().to_vec()];
    if problem.starts > 1 {
        starts.push(vacuum_mixture_start(problem)?.probs().to_vec());
    }
    for k in 2..problem.starts {
        let d = TruncatedDist::random(
            n_modes,
            problem.cutoff,
            splitmix(problem.seed, k as u64),
            1.0,
        )?;
        starts.push(entropy_projection(&d, EntropyNats(problem.target_entropy))?
            .probs()
            .to_vec());
    }

    let outcomes: Vec<StartOutcome> = starts
        .into_par_iter()
        .map(|s| {
            descend(
                &objective,
                s,
                problem.target_entropy,
                problem.grad_tol,
                problem.max_iters,
            )
        })
        .collect();

    let (best_index, best) = outcomes
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            a.objective
                .partial_cmp(&b.objective)
                .unwrap()
                .then(i.cmp(j))
        })
        .expect("at least one start");

    let argmin = TruncatedDist::from_parts(
        n_modes,
        problem.cutoff,
        best.probs.clone(),
        0.0,
    )?;
    let input_entropy = argmin.entropy_raw();
    let bound = lifted_bound(
        &BoundSpec::channel(&problem.channel),
        EntropyNats(input_entropy),
    )?
    .0;
    let tv_to_geometric = total_variation(&argmin, &matched)?;
    Ok(OptimizationResult {
        input_entropy,
        output_entropy: best.objective,
        bound,
        gap: best.objective - bound,
        tv_to_geometric,
        converged: best.converged,
        iterations: best.iterations,
        start_index: best_index,
        argmin,
    })
}

/// Grid of minimizations probing for bound violations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchConfig {
    pub channel: ChannelSpec,
    /// Input-entropy targets (total nats).
    pub targets: Vec<f64>,
    pub cutoff: usize,
    pub seeds: Vec<u64>,
    pub starts: usize,
    pub max_iters: usize,
}

impl SearchConfig {
    pub fn new(channel: ChannelSpec, targets: Vec<f64>, cutoff: usize, seeds: Vec<u64>) -> Self {
        Self {
            channel,
            targets,
            cutoff,
            seeds,
            starts: 8,
            max_iters: 5000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchCell {
    pub target: f64,
    pub seed: u64,
    pub result: OptimizationResult,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSummary {
    pub cells: Vec<SearchCell>,
    pub min_gap: f64,
    /// Cells whose gap fell below -1e-6: numerical counterexample
    /// candidates (expected none).
    pub candidates: usize,
    pub non_converged: usize,
}

/// Tolerance below which a negative gap counts as a counterexample
/// candidate.
pub const COUNTEREXEMPLAR_GAP_TOL: f64 = 1e-6;

/// Deterministic multi-start sweep over the target × seed grid.
pub fn counterexample_search(config: &SearchConfig) -> Result<SearchSummary> {
    let mut cells = Vec::new();
    for &target in &config.targets {
        for &seed in &config.seeds {
            let mut problem = OptimizationProblem::new(config.channel, target, config.cutoff);
            problem.starts = config.starts;
            problem.max_iters = config.max_iters;
            problem.seed = seed;
            let result = minimize_output_entropy(&problem)?;
            cells.push(SearchCell {
                target,
                seed,
                result,
            });
        }
    }
    let min_gap = if cells.is_empty() {
        f64::NAN
    } else {
        cells
            .iter()
            .map(|c| c.result.gap)
            .fold(f64::INFINITY, f64::min)
    };
    let candidates = cells
        .iter()
        .filter(|c| c.result.gap < -COUNTEREXEMPLAR_GAP_TOL)
        .count();
    let non_converged = cells.iter().filter(|c| !c.result.converged).count();
    Ok(SearchSummary {
        cells,
        min_gap,
        candidates,
        non_converged,
    })
}
