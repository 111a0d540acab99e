//! Validation of the closed-form channel kernels against brute-force
//! two-mode unitary exponentiation.

// Kernel entries and oracle vectors are indexed side by side.
#![allow(clippy::needless_range_loop)]

mod common;

use cmoe::kernels::{
    build_channel, ql_amplifier_kernel, ql_attenuator_kernel, ql_contravariant_kernel,
    ChannelFamily,
};
use common::*;

/// Quantum-limited attenuator rows vs the beamsplitter oracle on the
/// cutoff-20 two-mode space (exact there: the total occupation is
/// conserved).
#[test]
fn attenuator_kernel_matches_beamsplitter_oracle() {
    let cutoff = 20;
    for lambda in [0.25, 0.5, 0.8] {
        let kernel = ql_attenuator_kernel(lambda, cutoff, cutoff).unwrap();
        let generator = beamsplitter_generator(lambda, cutoff);
        for n in 0..=10 {
            let (p_a, _) = evolve_and_trace(&generator, cutoff, n, 0);
            for m in 0..=cutoff {
                let diff = (kernel.entry(n, m) - p_a[m]).abs();
                assert!(
                    diff < 1e-10,
                    "λ={lambda}, n={n}, m={m}: diff {diff:.3e}"
                );
            }
        }
    }
}

/// Quantum-limited amplifier and contravariant rows vs the squeezer
/// evolved on its exact invariant chain, at gains far from 1. With a
/// 200-link chain the oracle truncation is far below roundoff, so this
/// pins the kernel formulas to ~1e-12.
#[test]
fn amplifier_kernels_match_squeezer_oracle_at_large_gain() {
    let chain = 200;
    for kappa in [1.3, 1.5, 2.0] {
        let amp = ql_amplifier_kernel(kappa, 10, 80).unwrap();
        let contra = ql_contravariant_kernel(kappa, 10, 80).unwrap();
        for n in 0..=10 {
            let weights = squeeze_chain_weights(kappa, n, 0, chain);
            for m in 0..=80 {
                // Amplifier output m = n + j; contravariant output m = j.
                let oracle_a = if m >= n { weights[m - n] } else { 0.0 };
                let oracle_b = weights[m];
                let da = (amp.entry(n, m) - oracle_a).abs();
                let db = (contra.entry(n, m) - oracle_b).abs();
                assert!(da < 1e-12, "amp κ={kappa}, n={n}, m={m}: diff {da:.3e}");
                assert!(db < 1e-12, "contra κ={kappa}, n={n}, m={m}: diff {db:.3e}");
            }
        }
    }
}

/// Thermal-environment attenuator: the two-stage composition must equal
/// the direct environment-mixture construction entrywise.
#[test]
fn noisy_attenuator_matches_environment_mixture() {
    let lambda = 0.6;
    let energy = 0.4;
    let oracle_cutoff = 60;
    let family = ChannelFamily::Attenuator {
        lambda,
        env_energy: energy,
    };
    let kernel = build_channel(&family, 10, oracle_cutoff).unwrap();
    for n in [0, 3, 7, 10] {
        let oracle = attenuator_oracle_row(lambda, energy, n, oracle_cutoff, 1e-14);
        for m in 0..=oracle_cutoff - 15 {
            let diff = (kernel.entry(n, m) - oracle[m]).abs();
            assert!(diff < 1e-10, "n={n}, m={m}: diff {diff:.3e}");
        }
    }
}

/// Thermal-environment amplifier and contravariant channel vs the
/// squeezer environment mixture.
#[test]
fn noisy_squeezer_channels_match_environment_mixture() {
    let kappa = 1.4;
    let energy = 0.3;
    let oracle_cutoff = 70;
    let amp = build_channel(
        &ChannelFamily::Amplifier {
            kappa,
            env_energy: energy,
        },
        8,
        oracle_cutoff,
    )
    .unwrap();
    let contra = build_channel(
        &ChannelFamily::Contravariant {
            kappa,
            env_energy: energy,
        },
        8,
        oracle_cutoff,
    )
    .unwrap();
    for n in [0, 2, 5, 8] {
        let (oracle_a, oracle_b) = squeezer_oracle_row(kappa, energy, n, oracle_cutoff, 1e-14);
        for m in 0..=oracle_cutoff - 20 {
            let da = (amp.entry(n, m) - oracle_a[m]).abs();
            let db = (contra.entry(n, m) - oracle_b[m]).abs();
            assert!(da < 1e-9, "amp n={n}, m={m}: diff {da:.3e}");
            assert!(db < 1e-9, "contra n={n}, m={m}: diff {db:.3e}");
        }
    }
}

/// Additive noise as the composition of the oracle-validated
/// quantum-limited stages: the kernel must reproduce the stage-by-stage
/// mixture of oracle rows.
#[test]
fn additive_noise_matches_composed_oracle_stages() {
    let energy = 0.5;
    let oracle_cutoff = 60;
    let family = ChannelFamily::AdditiveNoise { env_energy: energy };
    let kernel = build_channel(&family, 8, oracle_cutoff).unwrap();
    let lambda = 1.0 / (1.0 + energy);
    let kappa = 1.0 + energy;
    let bs = beamsplitter_generator(lambda, oracle_cutoff);
    let sq = squeeze_generator(kappa, oracle_cutoff);
    for n in [0, 3, 8] {
        let (thinned, _) = evolve_and_trace(&bs, oracle_cutoff, n, 0);
        let mut out = vec![0.0; oracle_cutoff + 1];
        for (j, &w) in thinned.iter().enumerate() {
            if w < 1e-16 {
                continue;
            }
            let (amped, _) = evolve_and_trace(&sq, oracle_cutoff, j, 0);
            for (o, p) in out.iter_mut().zip(amped) {
                *o += w * p;
            }
        }
        for m in 0..=oracle_cutoff - 20 {
            let diff = (kernel.entry(n, m) - out[m]).abs();
            assert!(diff < 1e-9, "n={n}, m={m}: diff {diff:.3e}");
        }
    }
}

/// First and second moments of the noisy attenuator on point-mass inputs
/// vs the environment-mixture oracle on the cutoff-20 two-mode space.
/// The thinning stage contributes `λ(1-λ)n + λ²·Var` and the thermal
/// environment adds its own fluctuations; the oracle carries all of it.
#[test]
fn attenuator_moments_match_cutoff20_oracle() {
    let lambda = 0.6;
    let energy = 0.3;
    let cutoff = 20;
    let family = ChannelFamily::Attenuator {
        lambda,
        env_energy: energy,
    };
    let kernel = build_channel(&family, 10, cutoff).unwrap();
    for n in 0..=10 {
        let oracle = attenuator_oracle_row(lambda, energy, n, cutoff, 1e-13);
        let row = kernel.row(n);
        let dm = (mean_of(row) - mean_of(&oracle)).abs();
        let dv = (variance_of(row) - variance_of(&oracle)).abs();
        assert!(dm < 1e-5, "mean at n={n}: diff {dm:.3e}");
        assert!(dv < 1e-4, "variance at n={n}: diff {dv:.3e}");
        // The analytic first-moment law holds exactly only where the
        // shared 20-photon truncation leaks nothing (small n).
        if n <= 5 {
            let law = family.mean_energy_map(n as f64);
            assert!((mean_of(row) - law).abs() < 1e-9, "law at n={n}");
        }
    }
}
