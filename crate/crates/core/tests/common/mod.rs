//! Brute-force oracles shared by the integration tests.
//!
//! The channel kernels in the library are closed-form binomial /
//! negative-binomial expressions. The oracles here never touch those
//! formulas: they numerically exponentiate the two-mode generators of the
//! beamsplitter and the two-mode squeezer on a truncated two-mode Fock
//! space, apply the unitary to `|n, k⟩`, and trace out one side.

// Each integration-test target uses its own subset of the oracles.
#![allow(dead_code)]

/// Sparse real matrix in row-major adjacency form.
pub struct SparseMatrix {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn new(dim: usize) -> Self {
        Self {
            rows: vec![Vec::new(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        self.rows[row].push((col, value));
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }

    /// Max column absolute sum (induced 1-norm).
    pub fn norm_one(&self) -> f64 {
        let mut col_sums = vec![0.0; self.dim()];
        for row in &self.rows {
            for &(j, a) in row {
                col_sums[j] += a.abs();
            }
        }
        col_sums.into_iter().fold(0.0, f64::max)
    }
}

/// `exp(M) v` by time-stepped Taylor series: split `M` into `2^s` slices
/// with norm below 1/2 and apply each slice's series to the vector.
pub fn expm_action(m: &SparseMatrix, v: &[f64]) -> Vec<f64> {
    let norm = m.norm_one();
    let mut steps = 1u32;
    while norm / steps as f64 > 0.5 {
        steps *= 2;
    }
    let scale = 1.0 / steps as f64;
    let mut state = v.to_vec();
    for _ in 0..steps {
        let mut acc = state.clone();
        let mut term = state.clone();
        for k in 1..=30 {
            term = m.matvec(&term);
            let factor = scale / k as f64;
            let mut largest = 0.0_f64;
            for (t, a) in term.iter_mut().zip(acc.iter_mut()) {
                *t *= factor;
                *a += *t;
                largest = largest.max(t.abs());
            }
            if largest < 1e-30 {
                break;
            }
        }
        state = acc;
    }
    state
}

/// Beamsplitter generator `θ (a†b − a b†)` on the two-mode space with
/// per-mode cutoff `cutoff`; `θ = arccos √λ`.
pub fn beamsplitter_generator(lambda: f64, cutoff: usize) -> SparseMatrix {
    let theta = lambda.sqrt().acos();
    let d = cutoff + 1;
    let mut g = SparseMatrix::new(d * d);
    for na in 0..d {
        for nb in 0..d {
            let idx = na * d + nb;
            // a†b: |na, nb⟩ → sqrt((na+1) nb) |na+1, nb-1⟩
            if na + 1 < d && nb >= 1 {
                let amp = theta * (((na + 1) * nb) as f64).sqrt();
                g.add((na + 1) * d + (nb - 1), idx, amp);
            }
            // -a b†: |na, nb⟩ → -sqrt(na (nb+1)) |na-1, nb+1⟩
            if na >= 1 && nb + 1 < d {
                let amp = -theta * ((na * (nb + 1)) as f64).sqrt();
                g.add((na - 1) * d + (nb + 1), idx, amp);
            }
        }
    }
    g
}

/// Two-mode squeezing generator `θ (a†b† − a b)` on the two-mode space;
/// `θ = arccosh √κ`.
pub fn squeeze_generator(kappa: f64, cutoff: usize) -> SparseMatrix {
    let theta = kappa.sqrt().acosh();
    let d = cutoff + 1;
    let mut g = SparseMatrix::new(d * d);
    for na in 0..d {
        for nb in 0..d {
            let idx = na * d + nb;
            if na + 1 < d && nb + 1 < d {
                let amp = theta * (((na + 1) * (nb + 1)) as f64).sqrt();
                g.add((na + 1) * d + (nb + 1), idx, amp);
            }
            if na >= 1 && nb >= 1 {
                let amp = -theta * ((na * nb) as f64).sqrt();
                g.add((na - 1) * d + (nb - 1), idx, amp);
            }
        }
    }
    g
}

/// Evolve `|n, k⟩` under the generator and return the output occupation
/// distributions of the two sides: `(P(m_a), P(m_b))`.
pub fn evolve_and_trace(
    generator: &SparseMatrix,
    cutoff: usize,
    n: usize,
    k: usize,
) -> (Vec<f64>, Vec<f64>) {
    let d = cutoff + 1;
    let mut v = vec![0.0; d * d];
    v[n * d + k] = 1.0;
    let psi = expm_action(generator, &v);
    let mut p_a = vec![0.0; d];
    let mut p_b = vec![0.0; d];
    for na in 0..d {
        for nb in 0..d {
            let w = psi[na * d + nb].powi(2);
            p_a[na] += w;
            p_b[nb] += w;
        }
    }
    (p_a, p_b)
}

/// Two-mode squeezing from `|n, k⟩`, restricted to the invariant chain
/// `{|n+j, k+j⟩}` (the generator conserves `n_a - n_b`, so the restriction
/// is exact). Returns the squared amplitudes over `j = 0..len`.
pub fn squeeze_chain_weights(kappa: f64, n: usize, k: usize, len: usize) -> Vec<f64> {
    let theta = kappa.sqrt().acosh();
    let mut g = SparseMatrix::new(len);
    for j in 0..len - 1 {
        let c = theta * (((n + j + 1) * (k + j + 1)) as f64).sqrt();
        g.add(j + 1, j, c);
        g.add(j, j + 1, -c);
    }
    let mut v = vec![0.0; len];
    v[0] = 1.0;
    expm_action(&g, &v).iter().map(|a| a * a).collect()
}

/// Geometric environment weights `w_k(E)` down to a cumulative tail below
/// `tail_tol`; returns (weights, retained mass).
pub fn thermal_weights(energy: f64, tail_tol: f64) -> Vec<f64> {
    if energy <= 0.0 {
        return vec![1.0];
    }
    let ratio = energy / (energy + 1.0);
    let mut weights = Vec::new();
    let mut w = 1.0 / (energy + 1.0);
    let mut mass = 0.0;
    while 1.0 - mass > tail_tol {
        weights.push(w);
        mass += w;
        w *= ratio;
    }
    weights
}

/// Thermal-environment oracle for the attenuator at transmissivity
/// `lambda`, environment energy `energy`: mixes `|n, k⟩` over the thermal
/// weights of the environment. Returns the output distribution on the
/// system side, on a space large enough to avoid truncation at the
/// requested accuracy.
pub fn attenuator_oracle_row(
    lambda: f64,
    energy: f64,
    n: usize,
    cutoff: usize,
    env_tail: f64,
) -> Vec<f64> {
    let weights = thermal_weights(energy, env_tail);
    let generator = beamsplitter_generator(lambda, cutoff);
    let mut out = vec![0.0; cutoff + 1];
    for (k, &w) in weights.iter().enumerate() {
        let (p_a, _) = evolve_and_trace(&generator, cutoff, n, k);
        for (o, p) in out.iter_mut().zip(p_a) {
            *o += w * p;
        }
    }
    out
}

/// Thermal-environment oracle for the amplifier (system side) and the
/// phase-contravariant channel (environment side) at gain `kappa`.
pub fn squeezer_oracle_row(
    kappa: f64,
    energy: f64,
    n: usize,
    cutoff: usize,
    env_tail: f64,
) -> (Vec<f64>, Vec<f64>) {
    let weights = thermal_weights(energy, env_tail);
    let generator = squeeze_generator(kappa, cutoff);
    let mut out_a = vec![0.0; cutoff + 1];
    let mut out_b = vec![0.0; cutoff + 1];
    for (k, &w) in weights.iter().enumerate() {
        let (p_a, p_b) = evolve_and_trace(&generator, cutoff, n, k);
        for (o, p) in out_a.iter_mut().zip(p_a) {
            *o += w * p;
        }
        for (o, p) in out_b.iter_mut().zip(p_b) {
            *o += w * p;
        }
    }
    (out_a, out_b)
}

pub fn mean_of(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(k, &v)| k as f64 * v).sum()
}

pub fn variance_of(p: &[f64]) -> f64 {
    let mu = mean_of(p);
    p.iter()
        .enumerate()
        .map(|(k, &v)| (k as f64 - mu).powi(2) * v)
        .sum()
}
