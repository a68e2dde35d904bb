//! Multi-photon Fock bases and the lift of single-photon transfer matrices
//! into them.
//!
//! For `n` indistinguishable photons in `m` modes the basis holds every weak
//! composition of `n` into `m` parts, `C(n+m-1, n)` states, listed in
//! descending lexicographic order (`|20..0>` first, `|0..02>` last). An
//! `m x m` matrix `U` acts on that space through
//!
//! ```text
//! <S|Phi(U)|T> = Per(U[S, T]) / sqrt(prod_i s_i! * prod_j t_j!)
//! ```
//!
//! where `U[S, T]` repeats row `i` of `U` `s_i` times and column `j` `t_j`
//! times. `Phi` is a homomorphism, so lossy (sub-unitary) meshes map to
//! contractions and unitary meshes to unitaries.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QpnnError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Tolerance on squared norms of states.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Photon occupation numbers, one entry per spatial mode.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockState(Vec<usize>);

impl FockState {
    pub fn new(occupations: Vec<usize>) -> Self {
        FockState(occupations)
    }

    pub fn occupations(&self) -> &[usize] {
        &self.0
    }

    pub fn photons(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn modes(&self) -> usize {
        self.0.len()
    }

    /// Mode index of every photon, repeated by occupation (`|1020>` -> `[0, 2, 2]`).
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(mode, &k)| std::iter::repeat_n(mode, k))
            .collect()
    }
}

impl fmt::Display for FockState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.0.iter().any(|&k| k > 9) { "," } else { "" };
        let body: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "|{}>", body.join(sep))
    }
}

/// Enumerated `n`-photon, `m`-mode Fock basis with index lookup.
#[derive(Clone, Debug)]
pub struct FockBasis {
    photons: usize,
    modes: usize,
    states: Vec<FockState>,
    index: HashMap<FockState, usize>,
    // Hot-path caches for Phi(U).
    mode_lists: Vec<Vec<usize>>,
    inv_sqrt_factorials: Vec<f64>,
}

impl FockBasis {
    pub fn photons(&self) -> usize {
        self.photons
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Basis dimension `N`.
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[FockState] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &FockState {
        &self.states[idx]
    }

    pub fn index_of(&self, occupations: &[usize]) -> Option<usize> {
        // HashMap<FockState, _> can't be queried by slice without allocation.
        self.index.get(&FockState(occupations.to_vec())).copied()
    }

    pub fn mode_list(&self, idx: usize) -> &[usize] {
        &self.mode_lists[idx]
    }

    /// `1 / sqrt(prod_j n_j!)` for state `idx`.
    pub fn inv_sqrt_factorial(&self, idx: usize) -> f64 {
        self.inv_sqrt_factorials[idx]
    }
}

impl PartialEq for FockBasis {
    fn eq(&self, other: &Self) -> bool {
        self.photons == other.photons && self.modes == other.modes
    }
}

/// Enumerates all weak compositions of `n` photons into `m` modes.
pub fn enumerate_basis(n: usize, m: usize) -> Result<FockBasis> {
    if n == 0 || m == 0 {
        return Err(QpnnError::EmptyBasis { photons: n, modes: m });
    }
    let mut states = Vec::new();
    let mut current = vec![0usize; m];
    compositions(n, 0, &mut current, &mut states);

    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let mode_lists = states.iter().map(FockState::mode_list).collect();
    let inv_sqrt_factorials = states
        .iter()
        .map(|s| {
            let prod: f64 = s.occupations().iter().map(|&k| factorial(k)).product();
            1.0 / prod.sqrt()
        })
        .collect();

    Ok(FockBasis {
        photons: n,
        modes: m,
        states,
        index,
        mode_lists,
        inv_sqrt_factorials,
    })
}

fn compositions(remaining: usize, mode: usize, current: &mut Vec<usize>, out: &mut Vec<FockState>) {
    let m = current.len();
    if mode == m - 1 {
        current[mode] = remaining;
        out.push(FockState(current.clone()));
        current[mode] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[mode] = k;
        compositions(remaining - k, mode + 1, current, out);
    }
    current[mode] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Complex amplitudes over a Fock basis. May be sub-normalized; the missing
/// norm is the probability that at least one photon was lost.
#[derive(Clone, Debug)]
pub struct QuantumState {
    basis: Arc<FockBasis>,
    amplitudes: Array1<Complex64>,
}

impl QuantumState {
    pub fn new(basis: Arc<FockBasis>, amplitudes: Array1<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(QpnnError::DimensionMismatch {
                expected: basis.dim(),
                found: amplitudes.len(),
            });
        }
        let state = QuantumState { basis, amplitudes };
        let norm = state.norm_sqr();
        if !norm.is_finite() || norm > 1.0 + NORM_TOLERANCE {
            return Err(QpnnError::InvalidQuantity {
                name: "squared state norm (<= 1)",
                value: norm,
            });
        }
        Ok(state)
    }

    /// Single basis state given by its occupation vector.
    pub fn fock(basis: Arc<FockBasis>, occupations: &[usize]) -> Result<Self> {
        let idx = basis
            .index_of(occupations)
            .ok_or_else(|| QpnnError::UnknownState(occupations.to_vec()))?;
        let mut amplitudes = Array1::from_elem(basis.dim(), ZERO);
        amplitudes[idx] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { basis, amplitudes })
    }

    /// Normalized superposition of occupation vectors with the given weights.
    pub fn superposition(basis: Arc<FockBasis>, terms: &[(Complex64, &[usize])]) -> Result<Self> {
        let mut amplitudes = Array1::from_elem(basis.dim(), ZERO);
        for (weight, occ) in terms {
            let idx = basis
                .index_of(occ)
                .ok_or_else(|| QpnnError::UnknownState(occ.to_vec()))?;
            amplitudes[idx] += *weight;
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(QpnnError::InvalidQuantity {
                name: "superposition norm",
                value: 0.0,
            });
        }
        amplitudes.mapv_inplace(|a| a / norm);
        Ok(QuantumState { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &Array1<Complex64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Applies an `N x N` operator. No norm check: sub-unitary operators
    /// only shrink the state.
    pub fn evolve(&self, op: &Array2<Complex64>) -> Result<QuantumState> {
        if op.dim() != (self.basis.dim(), self.basis.dim()) {
            return Err(QpnnError::DimensionMismatch {
                expected: self.basis.dim(),
                found: op.nrows(),
            });
        }
        Ok(QuantumState {
            basis: Arc::clone(&self.basis),
            amplitudes: op.dot(&self.amplitudes),
        })
    }
}

/// Permanent of a square complex matrix.
pub fn permanent(matrix: &Array2<Complex64>) -> Result<Complex64> {
    let (rows, cols) = matrix.dim();
    if rows != cols || rows == 0 {
        return Err(QpnnError::NotSquare { rows, cols });
    }
    let flat: Vec<Complex64> = matrix.iter().copied().collect();
    Ok(permanent_row_major(rows, &flat))
}

/// Permanent of a `k x k` matrix stored row-major in `a`.
///
/// `k <= 3` is expanded directly; larger matrices use Ryser's formula with
/// Gray-code subset ordering, O(2^k k).
pub fn permanent_row_major(k: usize, a: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), k * k);
    match k {
        0 => Complex64::new(1.0, 0.0),
        1 => a[0],
        2 => a[0] * a[3] + a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] + a[5] * a[7])
                + a[1] * (a[3] * a[8] + a[5] * a[6])
                + a[2] * (a[3] * a[7] + a[4] * a[6])
        }
        _ => ryser_gray(k, a),
    }
}

fn ryser_gray(k: usize, a: &[Complex64]) -> Complex64 {
    assert!(k < 64, "permanent of a {k}x{k} matrix is out of reach");
    let mut row_sums = vec![ZERO; k];
    let mut in_subset = vec![false; k];
    let mut total = ZERO;
    let mut subset_size = 0usize;
    for step in 1u64..(1u64 << k) {
        let col = step.trailing_zeros() as usize;
        if in_subset[col] {
            in_subset[col] = false;
            subset_size -= 1;
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs -= a[i * k + col];
            }
        } else {
            in_subset[col] = true;
            subset_size += 1;
            for (i, rs) in row_sums.iter_mut().enumerate() {
                *rs += a[i * k + col];
            }
        }
        let prod: Complex64 = row_sums.iter().product();
        if subset_size % 2 == 0 {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if k % 2 == 1 {
        -total
    } else {
        total
    }
}

/// Lifts an `m x m` single-photon transfer matrix to the `N x N` matrix
/// acting on `basis`.
pub fn multi_photon_transform(u: &Array2<Complex64>, basis: &FockBasis) -> Result<Array2<Complex64>> {
    let mut out = Array2::from_elem((basis.dim(), basis.dim()), ZERO);
    multi_photon_transform_into(u, basis, &mut out)?;
    Ok(out)
}

/// As [`multi_photon_transform`], writing into a preallocated `N x N` buffer.
pub fn multi_photon_transform_into(
    u: &Array2<Complex64>,
    basis: &FockBasis,
    out: &mut Array2<Complex64>,
) -> Result<()> {
    let m = basis.modes();
    if u.dim() != (m, m) {
        return Err(QpnnError::DimensionMismatch {
            expected: m,
            found: if u.nrows() != m { u.nrows() } else { u.ncols() },
        });
    }
    let dim = basis.dim();
    if out.dim() != (dim, dim) {
        return Err(QpnnError::DimensionMismatch {
            expected: dim,
            found: out.nrows(),
        });
    }
    let n = basis.photons();
    if n == 1 {
        // Basis state j is the photon in mode j.
        out.assign(u);
        return Ok(());
    }
    let mut sub = vec![ZERO; n * n];
    for s in 0..dim {
        let rows = basis.mode_list(s);
        let norm_s = basis.inv_sqrt_factorial(s);
        for t in 0..dim {
            let cols = basis.mode_list(t);
            for (i, &r) in rows.iter().enumerate() {
                for (j, &c) in cols.iter().enumerate() {
                    sub[i * n + j] = u[[r, c]];
                }
            }
            out[[s, t]] = permanent_row_major(n, &sub) * (norm_s * basis.inv_sqrt_factorial(t));
        }
    }
    Ok(())
}
