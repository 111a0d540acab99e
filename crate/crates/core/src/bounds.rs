//! Output-entropy lower bounds and the verification harness.
//!
//! Each channel family carries a single-copy bound function `f`: the output
//! entropy of any admissible single-mode input with entropy `s` is at least
//! `f(s)`, with equality on thermal/geometric inputs. The `n`-mode bound is
//! the lifted form `n f(s/n)`, which is tight on products of identical
//! thermal/geometric states. The harness pushes concrete inputs through the
//! kernels (or the Wehrl quadrature) and reports the margin
//! `output entropy − bound`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{TruncatedDist, TAIL_THRESHOLD};
use crate::error::{Error, Result};
use crate::kernels::{apply_multimode, ChannelFamily, ChannelSpec};
use crate::specfun::{g_inv_raw, g_raw, EntropyNats};
use crate::wehrl::{
    von_neumann_entropy, wehrl_entropy_diag_with_norm, wehrl_entropy_general_with_norm,
    DensityMatrix, QuadratureScheme, QuadratureSpec, QUAD_NORM_TOL,
};

/// Margin tolerance for exact-kernel (classical) verifications.
pub const CLASSICAL_MARGIN_TOL: f64 = 1e-9;

/// Margin tolerance for quadrature-based Wehrl verifications.
pub const WEHRL_MARGIN_TOL: f64 = 1e-6;

/// Which single-copy bound function applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    Channel(ChannelFamily),
    Wehrl,
}

/// A bound function together with the number of modes it is lifted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub family: BoundFamily,
    pub n_modes: usize,
}

impl BoundSpec {
    pub fn new(family: BoundFamily, n_modes: usize) -> Result<Self> {
        if let BoundFamily::Channel(f) = &family {
            f.validate()?;
        }
        if n_modes == 0 {
            return Err(Error::Domain("n_modes must be >= 1".into()));
        }
        Ok(Self { family, n_modes })
    }

    pub fn channel(spec: &ChannelSpec) -> Self {
        Self {
            family: BoundFamily::Channel(spec.family),
            n_modes: spec.n_modes,
        }
    }
}

fn single_copy_f(family: &BoundFamily, s: f64) -> Result<f64> {
    let e = g_inv_raw(s)?;
    Ok(match family {
        BoundFamily::Channel(ChannelFamily::Thinning { lambda }) => g_raw(lambda * e),
        BoundFamily::Channel(ChannelFamily::Attenuator { lambda, env_energy }) => {
            g_raw(lambda * e + (1.0 - lambda) * env_energy)
        }
        BoundFamily::Channel(ChannelFamily::AdditiveNoise { env_energy }) => {
            g_raw(e + env_energy)
        }
        BoundFamily::Channel(ChannelFamily::Amplifier { kappa, env_energy }) => {
            g_raw(kappa * e + (kappa - 1.0) * (env_energy + 1.0))
        }
        BoundFamily::Channel(ChannelFamily::Contravariant { kappa, env_energy }) => {
            g_raw((kappa - 1.0) * (e + 1.0) + kappa * env_energy)
        }
        BoundFamily::Wehrl => e.ln_1p() + 1.0,
    })
}

/// The family's single-copy bound `f(s)`. Requires `n_modes = 1`.
pub fn single_copy_bound(spec: &BoundSpec, s: EntropyNats) -> Result<EntropyNats> {
    if spec.n_modes != 1 {
        return Err(Error::Domain(format!(
            "single-copy bound is defined for one mode, spec has {}",
            spec.n_modes
        )));
    }
    if s.0 < 0.0 || !s.0.is_finite() {
        return Err(Error::Domain(format!("entropy must be >= 0, got {}", s.0)));
    }
    single_copy_f(&spec.family, s.0).map(EntropyNats)
}

/// The lifted `n`-mode bound `n f(s_total/n)`.
pub fn lifted_bound(spec: &BoundSpec, s_total: EntropyNats) -> Result<EntropyNats> {
    if s_total.0 < 0.0 || !s_total.0.is_finite() {
        return Err(Error::Domain(format!(
            "entropy must be >= 0, got {}",
            s_total.0
        )));
    }
    let n = spec.n_modes as f64;
    let f = single_copy_f(&spec.family, s_total.0 / n)?;
    Ok(EntropyNats(n * f))
}

/// One verified instance: entropies, bound value, margin, and truncation
/// diagnostics. Instances whose diagnostics exceed the declared thresholds
/// are retained with `valid = false` and excluded from pass/fail
/// statistics, never dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub instance: String,
    pub n_modes: usize,
    pub input_entropy: f64,
    pub output_entropy: f64,
    pub bound: f64,
    pub margin: f64,
    pub input_tail: f64,
    pub output_tail: f64,
    pub quad_norm_defect: f64,
    pub valid: bool,
}

impl VerificationReport {
    /// Whether this instance respects the bound at the given margin
    /// tolerance. Invalid instances pass vacuously (they are flagged
    /// instead).
    pub fn passes(&self, margin_tol: f64) -> bool {
        !self.valid || self.margin >= -margin_tol
    }
}

/// Margin of the thinning bound on an arbitrary (possibly correlated)
/// input distribution.
pub fn verify_thinning(d: &TruncatedDist, lambda: f64) -> Result<VerificationReport> {
    let spec = ChannelSpec::new(ChannelFamily::Thinning { lambda }, d.n_modes())?;
    verify_channel(d, &spec)
}

/// Margin of the channel's output-entropy bound on a diagonal input.
///
/// The input entropy is the Shannon entropy of `d`, which equals the von
/// Neumann entropy of the product-basis-diagonal state it represents.
pub fn verify_channel(d: &TruncatedDist, spec: &ChannelSpec) -> Result<VerificationReport> {
    if spec.n_modes != d.n_modes() {
        return Err(Error::Dimension(format!(
            "channel acts on {} mode(s), input has {}",
            spec.n_modes,
            d.n_modes()
        )));
    }
    let output = apply_multimode(spec, d)?;
    let input_entropy = d.entropy_raw();
    let output_entropy = output.entropy_raw();
    let bound = lifted_bound(&BoundSpec::channel(spec), EntropyNats(input_entropy))?.0;
    let valid = d.tail_mass() <= TAIL_THRESHOLD && output.tail_mass() <= TAIL_THRESHOLD;
    Ok(VerificationReport {
        instance: format!("{:?}", spec.family),
        n_modes: spec.n_modes,
        input_entropy,
        output_entropy,
        bound,
        margin: output_entropy - bound,
        input_tail: d.tail_mass(),
        output_tail: output.tail_mass(),
        quad_norm_defect: 0.0,
        valid,
    })
}

/// Input state for a Wehrl verification.
#[derive(Debug, Clone)]
pub enum WehrlState {
    /// General single-mode state.
    Density(DensityMatrix),
    /// Diagonal state on one or two modes.
    Diagonal(TruncatedDist),
}

/// Margin of the Wehrl-entropy bound `W ≥ n (ln(g⁻¹(S/n)+1) + 1)`.
pub fn verify_wehrl(state: &WehrlState) -> Result<VerificationReport> {
    match state {
        WehrlState::Density(rho) => {
            let quad = QuadratureSpec::for_cutoff(QuadratureScheme::Planar, rho.cutoff());
            let s = von_neumann_entropy(rho)?.0;
            let (w, norm) = wehrl_entropy_general_with_norm(rho, &quad)?;
            let bound = lifted_bound(
                &BoundSpec::new(BoundFamily::Wehrl, 1)?,
                EntropyNats(s),
            )?
            .0;
            let defect = (norm - 1.0).abs();
            Ok(VerificationReport {
                instance: "wehrl-density".into(),
                n_modes: 1,
                input_entropy: s,
                output_entropy: w.0,
                bound,
                margin: w.0 - bound,
                input_tail: 0.0,
                output_tail: 0.0,
                quad_norm_defect: defect,
                valid: defect <= QUAD_NORM_TOL,
            })
        }
        WehrlState::Diagonal(d) => {
            let quad = QuadratureSpec::for_cutoff(QuadratureScheme::Radial, d.cutoff());
            let s = d.entropy_raw();
            let (w, norm) = wehrl_entropy_diag_with_norm(d, &quad)?;
            let bound = lifted_bound(
                &BoundSpec::new(BoundFamily::Wehrl, d.n_modes())?,
                EntropyNats(s),
            )?
            .0;
            let defect = (norm - (1.0 - d.tail_mass())).abs();
            Ok(VerificationReport {
                instance: "wehrl-diagonal".into(),
                n_modes: d.n_modes(),
                input_entropy: s,
                output_entropy: w.0,
                bound,
                margin: w.0 - bound,
                input_tail: d.tail_mass(),
                output_tail: 0.0,
                quad_norm_defect: defect,
                valid: d.tail_mass() <= TAIL_THRESHOLD && defect <= QUAD_NORM_TOL,
            })
        }
    }
}

/// How sweep instances are generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputKind {
    /// Dirichlet-style random diagonal distributions.
    RandomDiagonal { concentration: f64 },
    /// Random mixed density matrices (Wehrl, single mode only).
    RandomDensity,
    /// Random pure states (Wehrl, single mode only).
    RandomPure,
    /// The matched thermal/geometric product with the given per-mode
    /// energy; the equality case of every bound.
    Geometric { energy: f64 },
}

/// One cell of a sweep: a bound, an input family, and instance counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub bound: BoundSpec,
    pub input: InputKind,
    pub cutoff: usize,
    pub instances: usize,
    pub base_seed: u64,
}

/// Aggregate statistics of a sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSummary {
    pub total: usize,
    pub valid: usize,
    pub flagged: usize,
    pub violations: usize,
    pub min_margin: f64,
    pub margin_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub reports: Vec<VerificationReport>,
    pub summary: SweepSummary,
}

fn sweep_instance(config: &SweepConfig, index: usize) -> Result<VerificationReport> {
    let seed = config.base_seed.wrapping_add(index as u64);
    let n_modes = config.bound.n_modes;
    match (&config.bound.family, &config.input) {
        (BoundFamily::Channel(family), InputKind::RandomDiagonal { concentration }) => {
            let d = TruncatedDist::random(n_modes, config.cutoff, seed, *concentration)?;
            let spec = ChannelSpec::new(*family, n_modes)?;
            let mut report = verify_channel(&d, &spec)?;
            report.instance = format!("{}#{index}", report.instance);
            Ok(report)
        }
        (BoundFamily::Channel(family), InputKind::Geometric { energy }) => {
            let one = TruncatedDist::geometric(
                crate::specfun::MeanPhotonNumber::new(*energy)?,
                config.cutoff,
            )?;
            let mut d = one.clone();
            for _ in 1..n_modes {
                d = d.tensor(&one)?;
            }
            let spec = ChannelSpec::new(*family, n_modes)?;
            let mut report = verify_channel(&d, &spec)?;
            report.instance = format!("{}-thermal#{index}", report.instance);
            Ok(report)
        }
        (BoundFamily::Wehrl, InputKind::RandomDiagonal { concentration }) => {
            let d = TruncatedDist::random(n_modes, config.cutoff, seed, *concentration)?;
            let mut report = verify_wehrl(&WehrlState::Diagonal(d))?;
            report.instance = format!("{}#{index}", report.instance);
            Ok(report)
        }
        (BoundFamily::Wehrl, InputKind::RandomDensity) => {
            if n_modes != 1 {
                return Err(Error::Domain(
                    "random density inputs are single-mode only".into(),
                ));
            }
            let rho = DensityMatrix::random_mixed(config.cutoff, seed)?;
            let mut report = verify_wehrl(&WehrlState::Density(rho))?;
            report.instance = format!("{}#{index}", report.instance);
            Ok(report)
        }
        (BoundFamily::Wehrl, InputKind::RandomPure) => {
            if n_modes != 1 {
                return Err(Error::Domain(
                    "random pure inputs are single-mode only".into(),
                ));
            }
            let rho = DensityMatrix::random_pure(config.cutoff, seed)?;
            let mut report = verify_wehrl(&WehrlState::Density(rho))?;
            report.instance = format!("{}-pure#{index}", report.instance);
            Ok(report)
        }
        (BoundFamily::Wehrl, InputKind::Geometric { energy }) => {
            let one = TruncatedDist::geometric(
                crate::specfun::MeanPhotonNumber::new(*energy)?,
                config.cutoff,
            )?;
            let mut d = one.clone();
            for _ in 1..n_modes {
                d = d.tensor(&one)?;
            }
            let mut report = verify_wehrl(&WehrlState::Diagonal(d))?;
            report.instance = format!("{}-thermal#{index}", report.instance);
            Ok(report)
        }
        (BoundFamily::Channel(_), InputKind::RandomDensity | InputKind::RandomPure) => {
            Err(Error::Domain(
                "density-matrix inputs apply to the Wehrl bound only".into(),
            ))
        }
    }
}

/// Margin tolerance appropriate to the bound's dominant error source.
pub fn margin_tolerance(family: &BoundFamily) -> f64 {
    match family {
        BoundFamily::Channel(_) => CLASSICAL_MARGIN_TOL,
        BoundFamily::Wehrl => WEHRL_MARGIN_TOL,
    }
}

/// Run every instance of every config cell; deterministic in the seeds,
/// ordered by (cell, instance index) regardless of the execution schedule.
pub fn sweep(configs: &[SweepConfig]) -> Result<SweepOutcome> {
    let jobs: Vec<(usize, usize)> = configs
        .iter()
        .enumerate()
        .flat_map(|(c, cfg)| (0..cfg.instances).map(move |i| (c, i)))
        .collect();
    let reports: Result<Vec<VerificationReport>> = jobs
        .par_iter()
        .map(|&(c, i)| sweep_instance(&configs[c], i))
        .collect();
    let reports = reports?;
    let margin_tol = configs
        .iter()
        .map(|c| margin_tolerance(&c.bound.family))
        .fold(0.0, f64::max);
    let mut summary = SweepSummary {
        total: reports.len(),
        valid: 0,
        flagged: 0,
        violations: 0,
        min_margin: f64::INFINITY,
        margin_tol,
    };
    for (report, cfg_idx) in reports.iter().zip(jobs.iter().map(|&(c, _)| c)) {
        if report.valid {
            summary.valid += 1;
            summary.min_margin = summary.min_margin.min(report.margin);
            if !report.passes(margin_tolerance(&configs[cfg_idx].bound.family)) {
                summary.violations += 1;
            }
        } else {
            summary.flagged += 1;
        }
    }
    if summary.valid == 0 {
        summary.min_margin = f64::NAN;
    }
    Ok(SweepOutcome { reports, summary })
}

/// CSV export of verification reports (schema-versioned header line).
pub fn reports_to_csv<W: Write>(reports: &[VerificationReport], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# cmoe.reports.v1")?;
    writeln!(
        w,
        "instance,n_modes,input_entropy,output_entropy,bound,margin,input_tail,output_tail,quad_norm_defect,valid"
    )?;
    for r in reports {
        writeln!(
            w,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            r.instance,
            r.n_modes,
            r.input_entropy,
            r.output_entropy,
            r.bound,
            r.margin,
            r.input_tail,
            r.output_tail,
            r.quad_norm_defect,
            r.valid
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::MeanPhotonNumber;
    use approx::assert_abs_diff_eq;

    fn geometric(e: f64, cutoff: usize) -> TruncatedDist {
        TruncatedDist::geometric(MeanPhotonNumber::new(e).unwrap(), cutoff).unwrap()
    }

    fn channel_bound(family: ChannelFamily, n_modes: usize) -> BoundSpec {
        BoundSpec::new(BoundFamily::Channel(family), n_modes).unwrap()
    }

    #[test]
    fn thinning_bound_at_full_transmission_is_identity() {
        let spec = channel_bound(ChannelFamily::Thinning { lambda: 1.0 }, 1);
        for s in [0.0, 0.7, 2.3] {
            let f = single_copy_bound(&spec, EntropyNats(s)).unwrap().0;
            assert_abs_diff_eq!(f, s, epsilon = 1e-11);
        }
    }

    #[test]
    fn attenuator_bound_matches_thermal_output_entropy() {
        let family = ChannelFamily::Attenuator {
            lambda: 0.45,
            env_energy: 0.8,
        };
        let spec = channel_bound(family, 1);
        for e_in in [0.3, 1.0, 4.0] {
            let s = g_raw(e_in);
            let f = single_copy_bound(&spec, EntropyNats(s)).unwrap().0;
            assert_abs_diff_eq!(f, g_raw(family.mean_energy_map(e_in)), epsilon = 1e-10);
        }
    }

    #[test]
    fn amplifier_bound_at_zero_entropy() {
        let kappa = 1.7;
        let spec = channel_bound(
            ChannelFamily::Amplifier {
                kappa,
                env_energy: 0.0,
            },
            1,
        );
        let f = single_copy_bound(&spec, EntropyNats(0.0)).unwrap().0;
        assert_abs_diff_eq!(f, g_raw(kappa - 1.0), epsilon = 1e-12);
    }

    #[test]
    fn all_bounds_match_thermal_output_entropies() {
        let families = [
            ChannelFamily::Thinning { lambda: 0.6 },
            ChannelFamily::Attenuator {
                lambda: 0.6,
                env_energy: 1.2,
            },
            ChannelFamily::Amplifier {
                kappa: 1.4,
                env_energy: 0.5,
            },
            ChannelFamily::AdditiveNoise { env_energy: 0.9 },
            ChannelFamily::Contravariant {
                kappa: 1.3,
                env_energy: 0.7,
            },
        ];
        for family in families {
            let spec = channel_bound(family, 1);
            for e_in in [0.1, 0.9, 3.0] {
                let f = single_copy_bound(&spec, EntropyNats(g_raw(e_in))).unwrap().0;
                assert_abs_diff_eq!(
                    f,
                    g_raw(family.mean_energy_map(e_in)),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn lifted_bound_reduces_to_single_copy() {
        let spec = channel_bound(ChannelFamily::Thinning { lambda: 0.5 }, 1);
        for s in [0.0, 1.0, 3.0] {
            assert_abs_diff_eq!(
                lifted_bound(&spec, EntropyNats(s)).unwrap().0,
                single_copy_bound(&spec, EntropyNats(s)).unwrap().0,
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn lifted_thinning_bound_on_two_thermal_modes() {
        // At s = 2 g(E): 2 g(λE), the entropy of the thermal product output.
        let lambda = 0.7;
        let e = 1.1;
        let spec = channel_bound(ChannelFamily::Thinning { lambda }, 2);
        let b = lifted_bound(&spec, EntropyNats(2.0 * g_raw(e))).unwrap().0;
        assert_abs_diff_eq!(b, 2.0 * g_raw(lambda * e), epsilon = 1e-10);
    }

    #[test]
    fn lifted_bound_is_monotone_in_entropy() {
        let spec = BoundSpec::new(BoundFamily::Wehrl, 3).unwrap();
        let mut prev = -f64::INFINITY;
        for i in 0..50 {
            let s = i as f64 * 0.2;
            let b = lifted_bound(&spec, EntropyNats(s)).unwrap().0;
            assert!(b > prev);
            prev = b;
        }
    }

    #[test]
    fn lifted_bound_below_split_sums() {
        // Convexity: n f(s/n) <= f(s1) + f(s2) for s1 + s2 = s.
        let families = [
            BoundFamily::Channel(ChannelFamily::Amplifier {
                kappa: 1.5,
                env_energy: 0.3,
            }),
            BoundFamily::Wehrl,
        ];
        for family in families {
            let two = BoundSpec::new(family, 2).unwrap();
            let one = BoundSpec::new(family, 1).unwrap();
            for s in [0.4, 1.5, 3.0] {
                let lifted = lifted_bound(&two, EntropyNats(s)).unwrap().0;
                for frac in [0.0, 0.2, 0.5, 0.9] {
                    let s1 = frac * s;
                    let s2 = s - s1;
                    let split = single_copy_bound(&one, EntropyNats(s1)).unwrap().0
                        + single_copy_bound(&one, EntropyNats(s2)).unwrap().0;
                    assert!(
                        lifted <= split + 1e-9,
                        "lifted {lifted} > split {split} at s={s}, frac={frac}"
                    );
                }
            }
        }
    }

    #[test]
    fn thinning_margin_vanishes_on_geometric_input() {
        let e = 2.0;
        let cutoff = TruncatedDist::geometric_cutoff(e, 1e-12);
        let report = verify_thinning(&geometric(e, cutoff), 0.5).unwrap();
        assert!(report.valid);
        assert!(report.margin.abs() < 1e-6, "margin {}", report.margin);
    }

    #[test]
    fn thinning_margin_nonnegative_on_correlated_inputs() {
        for seed in 0..20u64 {
            let d = TruncatedDist::random(2, 15, seed, 0.4).unwrap();
            let report = verify_thinning(&d, 0.65).unwrap();
            assert!(report.valid);
            assert!(
                report.margin >= -CLASSICAL_MARGIN_TOL,
                "seed {seed}: margin {}",
                report.margin
            );
        }
    }

    #[test]
    fn thinning_point_mass_input() {
        let d = TruncatedDist::delta(2, 10, &[3, 5]).unwrap();
        let report = verify_thinning(&d, 0.5).unwrap();
        assert_abs_diff_eq!(report.bound, 0.0, epsilon = 1e-12);
        assert!(report.output_entropy >= 0.0);
        assert!(report.margin >= 0.0);
    }

    #[test]
    fn channel_margins_on_thermal_products() {
        let families = [
            ChannelFamily::Attenuator {
                lambda: 0.55,
                env_energy: 0.6,
            },
            ChannelFamily::Amplifier {
                kappa: 1.3,
                env_energy: 0.2,
            },
            ChannelFamily::AdditiveNoise { env_energy: 0.8 },
            ChannelFamily::Contravariant {
                kappa: 1.2,
                env_energy: 0.4,
            },
        ];
        for family in families {
            let e = 1.0;
            let cutoff = TruncatedDist::geometric_cutoff(e, 1e-12);
            let one = geometric(e, cutoff);
            let d = one.tensor(&one).unwrap();
            let spec = ChannelSpec::new(family, 2).unwrap();
            let report = verify_channel(&d, &spec).unwrap();
            assert!(report.valid, "{family:?} flagged: {report:?}");
            assert!(
                report.margin.abs() < 1e-6,
                "{family:?}: margin {}",
                report.margin
            );
        }
    }

    #[test]
    fn amplifier_margin_on_random_diagonal_inputs() {
        let spec = ChannelSpec::new(
            ChannelFamily::Amplifier {
                kappa: 1.5,
                env_energy: 0.2,
            },
            2,
        )
        .unwrap();
        for seed in 0..10u64 {
            let d = TruncatedDist::random(2, 15, seed, 0.5).unwrap();
            let report = verify_channel(&d, &spec).unwrap();
            assert!(report.valid);
            assert!(report.margin >= -CLASSICAL_MARGIN_TOL, "seed {seed}");
        }
    }

    #[test]
    fn contravariant_fock_product_input() {
        // H = 0 input: output entropy at least n·g(κ-1) for E = 0.
        let kappa = 1.4;
        let spec = ChannelSpec::new(
            ChannelFamily::Contravariant {
                kappa,
                env_energy: 0.0,
            },
            2,
        )
        .unwrap();
        let d = TruncatedDist::delta(2, 10, &[3, 5]).unwrap();
        let report = verify_channel(&d, &spec).unwrap();
        assert_abs_diff_eq!(report.bound, 2.0 * g_raw(kappa - 1.0), epsilon = 1e-10);
        assert!(report.margin >= -CLASSICAL_MARGIN_TOL);
    }

    #[test]
    fn wehrl_margin_vanishes_on_thermal_state() {
        let e = 1.0;
        let cutoff = TruncatedDist::geometric_cutoff(e, 1e-12);
        let report = verify_wehrl(&WehrlState::Diagonal(geometric(e, cutoff))).unwrap();
        assert!(report.valid);
        assert!(report.margin.abs() < 1e-6, "margin {}", report.margin);
    }

    #[test]
    fn wehrl_margin_on_random_pure_states() {
        for seed in 0..5u64 {
            let rho = DensityMatrix::random_pure(8, seed).unwrap();
            let report = verify_wehrl(&WehrlState::Density(rho)).unwrap();
            assert!(report.valid);
            assert!(report.output_entropy >= 1.0 - WEHRL_MARGIN_TOL);
            assert!(report.margin >= -WEHRL_MARGIN_TOL);
        }
    }

    #[test]
    fn wehrl_margin_on_random_diagonal_states() {
        for seed in 0..10u64 {
            let d = TruncatedDist::random(1, 12, seed, 0.7).unwrap();
            let report = verify_wehrl(&WehrlState::Diagonal(d)).unwrap();
            assert!(report.valid);
            assert!(
                report.margin >= -WEHRL_MARGIN_TOL,
                "seed {seed}: margin {}",
                report.margin
            );
        }
    }

    #[test]
    fn wehrl_margin_vanishes_on_thermal_product() {
        let e = 0.8;
        let cutoff = TruncatedDist::geometric_cutoff(e, 1e-12);
        let one = geometric(e, cutoff);
        let d = one.tensor(&one).unwrap();
        let report = verify_wehrl(&WehrlState::Diagonal(d)).unwrap();
        assert!(report.valid);
        assert_eq!(report.n_modes, 2);
        assert!(report.margin.abs() < 1e-6, "margin {}", report.margin);
    }

    #[test]
    fn sweep_of_empty_grid() {
        let outcome = sweep(&[]).unwrap();
        assert!(outcome.reports.is_empty());
        assert_eq!(outcome.summary.total, 0);
    }

    #[test]
    fn sweep_thinning_instances() {
        let config = SweepConfig {
            bound: channel_bound(ChannelFamily::Thinning { lambda: 0.5 }, 1),
            input: InputKind::RandomDiagonal { concentration: 1.0 },
            cutoff: 30,
            instances: 100,
            base_seed: 7,
        };
        let outcome = sweep(std::slice::from_ref(&config)).unwrap();
        assert_eq!(outcome.reports.len(), 100);
        assert_eq!(outcome.summary.violations, 0);
        assert!(outcome.summary.min_margin >= -CLASSICAL_MARGIN_TOL);
    }

    #[test]
    fn sweep_is_deterministic() {
        let config = SweepConfig {
            bound: channel_bound(ChannelFamily::Thinning { lambda: 0.4 }, 2),
            input: InputKind::RandomDiagonal { concentration: 0.8 },
            cutoff: 10,
            instances: 16,
            base_seed: 99,
        };
        let a = sweep(std::slice::from_ref(&config)).unwrap();
        let b = sweep(std::slice::from_ref(&config)).unwrap();
        for (x, y) in a.reports.iter().zip(&b.reports) {
            assert_eq!(x.margin, y.margin);
            assert_eq!(x.instance, y.instance);
        }
    }

    #[test]
    fn csv_export_has_versioned_header() {
        let report = VerificationReport {
            instance: "t".into(),
            n_modes: 1,
            input_entropy: 1.0,
            output_entropy: 0.9,
            bound: 0.8,
            margin: 0.1,
            input_tail: 0.0,
            output_tail: 0.0,
            quad_norm_defect: 0.0,
            valid: true,
        };
        let mut buf = Vec::new();
        reports_to_csv(&[report], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# cmoe.reports.v1\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
