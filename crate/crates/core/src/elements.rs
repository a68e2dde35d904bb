//! Single-photon transfer matrices of photonic components and the
//! rectangular MZI mesh built from them.
//!
//! Every mode of an `m`-mode mesh crosses `m` columns, each `l_mzi` long
//! (either an MZI or a balancing flat section), then an output phase screen
//! `l_ps` long. Propagation loss of an element of length `l` is
//! `1 - 10^(-alpha_wg * l / 10)` and enters a transfer matrix as the
//! amplitude factor `sqrt(1 - alpha)`.

use std::f64::consts::{PI, TAU};

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QpnnError, Result};
use crate::fock::FockBasis;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Micrometres per centimetre.
const UM_PER_CM: f64 = 1e4;

/// Phase pair of one Mach-Zehnder interferometer, canonicalized to `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MziParams {
    pub phi: f64,
    pub theta: f64,
}

impl MziParams {
    pub fn new(phi: f64, theta: f64) -> Self {
        MziParams {
            phi: wrap_phase(phi),
            theta: wrap_phase(theta),
        }
    }
}

/// Maps any finite phase into `[0, 2pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Fabrication state of one MZI: the two coupler transmittances and the
/// photon loss probability of the whole element.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziImperfection {
    pub t1: f64,
    pub t2: f64,
    pub alpha: f64,
}

impl MziImperfection {
    pub const IDEAL: MziImperfection = MziImperfection {
        t1: 0.5,
        t2: 0.5,
        alpha: 0.0,
    };

    pub fn new(t1: f64, t2: f64, alpha: f64) -> Result<Self> {
        for (name, v) in [("t1", t1), ("t2", t2), ("alpha", alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(QpnnError::InvalidQuantity { name, value: v });
            }
        }
        Ok(MziImperfection { t1, t2, alpha })
    }
}

impl Default for MziImperfection {
    fn default() -> Self {
        Self::IDEAL
    }
}

/// Distributions from which per-element imperfections are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionModel {
    /// Mean propagation loss, dB/cm.
    pub alpha_wg_mean: f64,
    /// Standard deviation of the propagation loss as a fraction of the mean.
    pub alpha_wg_rel_std: f64,
    pub dc_mean: f64,
    pub dc_std: f64,
    /// MZI (and flat section) length, um.
    pub l_mzi: f64,
    /// Output phase-shifter length, um.
    pub l_ps: f64,
}

impl Default for ImperfectionModel {
    fn default() -> Self {
        ImperfectionModel {
            alpha_wg_mean: 0.0,
            alpha_wg_rel_std: 0.0667,
            dc_mean: 0.5,
            dc_std: 0.0508,
            l_mzi: 286.684,
            l_ps: 50.0,
        }
    }
}

impl ImperfectionModel {
    /// Realistic fabrication spread at the given mean propagation loss.
    pub fn realistic(alpha_wg_mean: f64) -> Self {
        ImperfectionModel {
            alpha_wg_mean,
            ..Default::default()
        }
    }

    /// Lossless elements with perfect 50:50 couplers.
    pub fn ideal() -> Self {
        Self::uniform(0.0)
    }

    /// Identical loss on every element and perfect couplers.
    pub fn uniform(alpha_wg: f64) -> Self {
        ImperfectionModel {
            alpha_wg_mean: alpha_wg,
            alpha_wg_rel_std: 0.0,
            dc_mean: 0.5,
            dc_std: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("alpha_wg_mean", self.alpha_wg_mean),
            ("alpha_wg_rel_std", self.alpha_wg_rel_std),
            ("dc_mean", self.dc_mean),
            ("dc_std", self.dc_std),
        ];
        for (name, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(QpnnError::InvalidQuantity { name, value });
            }
        }
        for (name, value) in [("l_mzi", self.l_mzi), ("l_ps", self.l_ps)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(QpnnError::InvalidQuantity { name, value });
            }
        }
        Ok(())
    }

    /// Optical path length of one `m`-mode mesh layer, um.
    pub fn layer_length(&self, m: usize) -> f64 {
        m as f64 * self.l_mzi + self.l_ps
    }

    /// Power transmission of one mode through one lossless-coupler layer
    /// with uniform loss at the mean.
    pub fn uniform_layer_transmission(&self, m: usize) -> f64 {
        1.0 - element_loss(self.alpha_wg_mean, self.layer_length(m) / UM_PER_CM)
            .expect("validated model")
    }
}

/// Loss probability of an element of `length_cm` at `alpha_wg` dB/cm.
pub fn element_loss(alpha_wg: f64, length_cm: f64) -> Result<f64> {
    if !(alpha_wg.is_finite() && alpha_wg >= 0.0) {
        return Err(QpnnError::InvalidQuantity {
            name: "alpha_wg",
            value: alpha_wg,
        });
    }
    if !(length_cm.is_finite() && length_cm >= 0.0) {
        return Err(QpnnError::InvalidQuantity {
            name: "length",
            value: length_cm,
        });
    }
    Ok(1.0 - 10f64.powf(-alpha_wg * length_cm / 10.0))
}

/// Ideal MZI: `e^{i theta} [[e^{i phi} cos theta, -sin theta], [e^{i phi} sin theta, cos theta]]`.
pub fn ideal_mzi(params: MziParams) -> Array2<Complex64> {
    let (s, c) = params.theta.sin_cos();
    let g = Complex64::from_polar(1.0, params.theta);
    let e_phi = Complex64::from_polar(1.0, params.phi);
    ndarray::array![[g * e_phi * c, -g * s], [g * e_phi * s, g * c]]
}

/// Imperfect MZI: loss, second coupler (`-i` arms), internal `2 theta`
/// shifter, first coupler (`+i` arms), input `phi` shifter, applied
/// right to left.
pub fn realistic_mzi(params: MziParams, imp: MziImperfection) -> Array2<Complex64> {
    let [[a, b], [c, d]] = realistic_mzi_entries(params, imp);
    ndarray::array![[a, b], [c, d]]
}

#[inline]
pub(crate) fn realistic_mzi_entries(params: MziParams, imp: MziImperfection) -> [[Complex64; 2]; 2] {
    let MziImperfection { t1, t2, alpha } = imp;
    let amp = (1.0 - alpha).sqrt();
    let e2t = Complex64::from_polar(1.0, 2.0 * params.theta);
    let ep = Complex64::from_polar(1.0, params.phi);
    let tt = (t1 * t2).sqrt();
    let rr = ((1.0 - t1) * (1.0 - t2)).sqrt();
    let t1r2 = (t1 * (1.0 - t2)).sqrt();
    let t2r1 = (t2 * (1.0 - t1)).sqrt();
    [
        [
            amp * ep * (tt * e2t + rr),
            amp * I * (t2r1 * e2t - t1r2),
        ],
        [
            amp * I * ep * (t2r1 - t1r2 * e2t),
            amp * (rr * e2t + tt),
        ],
    ]
}

/// Mode pairs per column of the rectangular mesh: even columns couple
/// `(0,1), (2,3), ...`, odd columns `(1,2), (3,4), ...`.
pub fn clements_columns(m: usize) -> Vec<Vec<(usize, usize)>> {
    (0..m)
        .map(|col| {
            (col % 2..m.saturating_sub(1))
                .step_by(2)
                .map(|p| (p, p + 1))
                .collect()
        })
        .collect()
}

/// Modes left uncoupled in each column.
fn idle_modes(m: usize) -> Vec<Vec<usize>> {
    clements_columns(m)
        .into_iter()
        .map(|pairs| {
            (0..m)
                .filter(|&j| !pairs.iter().any(|&(p, q)| j == p || j == q))
                .collect()
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MziSlot {
    pub column: usize,
    pub modes: (usize, usize),
    pub params: MziParams,
    pub imperfection: MziImperfection,
}

/// Straight waveguide next to an MZI, carrying only loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSection {
    pub column: usize,
    pub mode: usize,
    pub alpha: f64,
}

/// One sampled set of fabrication imperfections for a single mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerImperfections {
    /// In mesh sequence order.
    pub mzis: Vec<MziImperfection>,
    /// In column-then-mode order.
    pub flat_alphas: Vec<f64>,
    pub output_alphas: Vec<f64>,
}

impl LayerImperfections {
    pub fn ideal(m: usize) -> Self {
        let n_flat: usize = idle_modes(m).iter().map(Vec::len).sum();
        LayerImperfections {
            mzis: vec![MziImperfection::IDEAL; m * (m - 1) / 2],
            flat_alphas: vec![0.0; n_flat],
            output_alphas: vec![0.0; m],
        }
    }
}

/// Draws every element's imperfection for one `m`-mode mesh.
///
/// Coupler transmittances are normal around `dc_mean` and clamped to
/// `[0, 1]`; each element draws its own `alpha_wg` (normal, std
/// `rel_std * mean`, clamped at 0) and converts it to a loss probability over
/// its own length. Draw order: MZIs in sequence order `(t1, t2, alpha)`,
/// then flat sections, then the output screen.
pub fn sample_imperfections<R: Rng + ?Sized>(
    model: &ImperfectionModel,
    m: usize,
    rng: &mut R,
) -> Result<LayerImperfections> {
    model.validate()?;
    let l_mzi_cm = model.l_mzi / UM_PER_CM;
    let l_ps_cm = model.l_ps / UM_PER_CM;
    let wg_std = model.alpha_wg_rel_std * model.alpha_wg_mean;

    let mut normal = |mean: f64, std: f64| -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        mean + std * z
    };

    let mut mzis = Vec::with_capacity(m * (m - 1) / 2);
    for pairs in clements_columns(m) {
        for _ in pairs {
            let t1 = normal(model.dc_mean, model.dc_std).clamp(0.0, 1.0);
            let t2 = normal(model.dc_mean, model.dc_std).clamp(0.0, 1.0);
            let wg = normal(model.alpha_wg_mean, wg_std).max(0.0);
            mzis.push(MziImperfection {
                t1,
                t2,
                alpha: element_loss(wg, l_mzi_cm)?,
            });
        }
    }
    let mut flat_alphas = Vec::new();
    for idle in idle_modes(m) {
        for _ in idle {
            let wg = normal(model.alpha_wg_mean, wg_std).max(0.0);
            flat_alphas.push(element_loss(wg, l_mzi_cm)?);
        }
    }
    let mut output_alphas = Vec::with_capacity(m);
    for _ in 0..m {
        let wg = normal(model.alpha_wg_mean, wg_std).max(0.0);
        output_alphas.push(element_loss(wg, l_ps_cm)?);
    }
    Ok(LayerImperfections {
        mzis,
        flat_alphas,
        output_alphas,
    })
}

/// One programmable rectangular mesh with its fabrication state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshLayer {
    pub m: usize,
    pub mzis: Vec<MziSlot>,
    pub output_phases: Vec<f64>,
    pub output_alphas: Vec<f64>,
    pub flat_sections: Vec<FlatSection>,
}

impl MeshLayer {
    /// Number of phases per layer: two per MZI plus the output screen.
    pub fn param_count(m: usize) -> usize {
        m * m
    }

    /// Lossless, perfect-coupler mesh with every phase at zero (the identity).
    pub fn ideal(m: usize) -> Self {
        Self::with_imperfections(m, &LayerImperfections::ideal(m)).expect("ideal layout is valid")
    }

    pub fn with_imperfections(m: usize, imp: &LayerImperfections) -> Result<Self> {
        if m < 2 {
            return Err(QpnnError::InvalidConfig(format!(
                "a mesh needs at least two modes, got {m}"
            )));
        }
        let mut mzis = Vec::with_capacity(m * (m - 1) / 2);
        for (column, pairs) in clements_columns(m).into_iter().enumerate() {
            for modes in pairs {
                mzis.push(MziSlot {
                    column,
                    modes,
                    params: MziParams::default(),
                    imperfection: MziImperfection::IDEAL,
                });
            }
        }
        let flat: Vec<(usize, usize)> = idle_modes(m)
            .into_iter()
            .enumerate()
            .flat_map(|(col, modes)| modes.into_iter().map(move |j| (col, j)))
            .collect();
        if imp.mzis.len() != mzis.len() {
            return Err(QpnnError::DimensionMismatch {
                expected: mzis.len(),
                found: imp.mzis.len(),
            });
        }
        if imp.flat_alphas.len() != flat.len() {
            return Err(QpnnError::DimensionMismatch {
                expected: flat.len(),
                found: imp.flat_alphas.len(),
            });
        }
        if imp.output_alphas.len() != m {
            return Err(QpnnError::DimensionMismatch {
                expected: m,
                found: imp.output_alphas.len(),
            });
        }
        for (slot, i) in mzis.iter_mut().zip(&imp.mzis) {
            slot.imperfection = *i;
        }
        let flat_sections = flat
            .into_iter()
            .zip(&imp.flat_alphas)
            .map(|((column, mode), &alpha)| FlatSection { column, mode, alpha })
            .collect();
        Ok(MeshLayer {
            m,
            mzis,
            output_phases: vec![0.0; m],
            output_alphas: imp.output_alphas.clone(),
            flat_sections,
        })
    }

    /// Writes `[phi_0, theta_0, phi_1, theta_1, ..., d_0, ..., d_{m-1}]`.
    pub fn set_phases(&mut self, phases: &[f64]) -> Result<()> {
        if phases.len() != Self::param_count(self.m) {
            return Err(QpnnError::DimensionMismatch {
                expected: Self::param_count(self.m),
                found: phases.len(),
            });
        }
        let (mzi_part, screen) = phases.split_at(2 * self.mzis.len());
        for (slot, pair) in self.mzis.iter_mut().zip(mzi_part.chunks_exact(2)) {
            slot.params = MziParams::new(pair[0], pair[1]);
        }
        for (d, &x) in self.output_phases.iter_mut().zip(screen) {
            *d = wrap_phase(x);
        }
        Ok(())
    }

    pub fn phases(&self) -> Vec<f64> {
        self.mzis
            .iter()
            .flat_map(|s| [s.params.phi, s.params.theta])
            .chain(self.output_phases.iter().copied())
            .collect()
    }
}

/// Single-photon transfer matrix of a mesh: columns applied in order, flat
/// sections attenuating idle modes, then the lossy output phase screen.
pub fn build_mesh(layer: &MeshLayer) -> Result<Array2<Complex64>> {
    let m = layer.m;
    let mut u = Array2::<Complex64>::eye(m);
    for slot in &layer.mzis {
        let (p, q) = slot.modes;
        if p >= m || q >= m || p == q {
            return Err(QpnnError::ModeOutOfRange(p, q, m));
        }
    }
    for f in &layer.flat_sections {
        if f.mode >= m {
            return Err(QpnnError::ModeOutOfRange(f.mode, f.mode, m));
        }
    }
    if layer.output_phases.len() != m || layer.output_alphas.len() != m {
        return Err(QpnnError::DimensionMismatch {
            expected: m,
            found: layer.output_phases.len().min(layer.output_alphas.len()),
        });
    }

    let columns = layer
        .mzis
        .iter()
        .map(|s| s.column)
        .chain(layer.flat_sections.iter().map(|f| f.column))
        .max()
        .map_or(0, |c| c + 1);
    for col in 0..columns {
        for slot in layer.mzis.iter().filter(|s| s.column == col) {
            let t = realistic_mzi_entries(slot.params, slot.imperfection);
            let (p, q) = slot.modes;
            for k in 0..m {
                let up = u[[p, k]];
                let uq = u[[q, k]];
                u[[p, k]] = t[0][0] * up + t[0][1] * uq;
                u[[q, k]] = t[1][0] * up + t[1][1] * uq;
            }
        }
        for f in layer.flat_sections.iter().filter(|f| f.column == col) {
            let amp = (1.0 - f.alpha).sqrt();
            u.row_mut(f.mode).mapv_inplace(|x| x * amp);
        }
    }
    for j in 0..m {
        let factor = Complex64::from_polar((1.0 - layer.output_alphas[j]).sqrt(), layer.output_phases[j]);
        u.row_mut(j).mapv_inplace(|x| x * factor);
    }
    Ok(u)
}

/// Single-site Kerr nonlinearity placed on every mode between meshes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrLayer {
    pub varphi: f64,
}

impl KerrLayer {
    pub fn new(varphi: f64) -> Result<Self> {
        if !varphi.is_finite() {
            return Err(QpnnError::InvalidQuantity {
                name: "varphi",
                value: varphi,
            });
        }
        Ok(KerrLayer { varphi })
    }

    /// The ideal two-photon pi shift.
    pub fn ideal() -> Self {
        KerrLayer { varphi: PI }
    }
}

/// Diagonal of the Kerr layer in `basis`: `exp(i varphi sum_j n_j (n_j - 1) / 2)`.
pub fn kerr_phases(layer: KerrLayer, basis: &FockBasis) -> Array1<Complex64> {
    basis
        .states()
        .iter()
        .map(|s| {
            let pairs: usize = s.occupations().iter().map(|&k| k * k.saturating_sub(1) / 2).sum();
            Complex64::from_polar(1.0, layer.varphi * pairs as f64)
        })
        .collect()
}

/// Kerr layer as an `N x N` diagonal matrix.
pub fn kerr_unitary(layer: KerrLayer, basis: &FockBasis) -> Array2<Complex64> {
    Array2::from_diag(&kerr_phases(layer, basis))
}
