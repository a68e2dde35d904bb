//! Full-network transfer functions, state propagation and the three
//! performance measures.
//!
//! Loss is tracked by propagating sub-normalized states; the lost norm is
//! never given a basis vector of its own.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elements::{build_mesh, kerr_phases, KerrLayer, LayerImperfections, MeshLayer};
use crate::error::{QpnnError, Result};
use crate::fock::{multi_photon_transform_into, FockBasis, QuantumState, NORM_TOLERANCE};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// An `L`-layer network: meshes separated by identical Kerr layers.
#[derive(Clone, Debug)]
pub struct QpnnInstance {
    basis: Arc<FockBasis>,
    layers: Vec<MeshLayer>,
    nonlinearity: KerrLayer,
    qubit_pairing: Vec<(usize, usize)>,
    kerr_diag: Array1<Complex64>,
}

impl QpnnInstance {
    pub fn new(
        basis: Arc<FockBasis>,
        layers: Vec<MeshLayer>,
        nonlinearity: KerrLayer,
        qubit_pairing: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(QpnnError::InvalidConfig("a network needs at least one layer".into()));
        }
        for layer in &layers {
            if layer.m != basis.modes() {
                return Err(QpnnError::DimensionMismatch {
                    expected: basis.modes(),
                    found: layer.m,
                });
            }
        }
        validate_pairing(basis.modes(), &qubit_pairing)?;
        let kerr_diag = kerr_phases(nonlinearity, &basis);
        Ok(QpnnInstance {
            basis,
            layers,
            nonlinearity,
            qubit_pairing,
            kerr_diag,
        })
    }

    /// Builds an instance from one sampled imperfection set per layer.
    pub fn from_imperfections(
        basis: Arc<FockBasis>,
        imperfections: &[LayerImperfections],
        nonlinearity: KerrLayer,
        qubit_pairing: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let m = basis.modes();
        let layers = imperfections
            .iter()
            .map(|imp| MeshLayer::with_imperfections(m, imp))
            .collect::<Result<Vec<_>>>()?;
        Self::new(basis, layers, nonlinearity, qubit_pairing)
    }

    /// Lossless, perfect-coupler network with all phases zero.
    pub fn ideal(
        basis: Arc<FockBasis>,
        n_layers: usize,
        nonlinearity: KerrLayer,
        qubit_pairing: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let m = basis.modes();
        Self::new(basis, vec![MeshLayer::ideal(m); n_layers], nonlinearity, qubit_pairing)
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn layers(&self) -> &[MeshLayer] {
        &self.layers
    }

    pub fn nonlinearity(&self) -> KerrLayer {
        self.nonlinearity
    }

    pub fn qubit_pairing(&self) -> &[(usize, usize)] {
        &self.qubit_pairing
    }

    pub fn set_nonlinearity(&mut self, nonlinearity: KerrLayer) {
        self.nonlinearity = nonlinearity;
        self.kerr_diag = kerr_phases(nonlinearity, &self.basis);
    }

    pub fn param_count(&self) -> usize {
        self.layers.len() * MeshLayer::param_count(self.basis.modes())
    }

    /// Writes the phase vector, layer by layer.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(QpnnError::DimensionMismatch {
                expected: self.param_count(),
                found: params.len(),
            });
        }
        let per_layer = MeshLayer::param_count(self.basis.modes());
        for (layer, chunk) in self.layers.iter_mut().zip(params.chunks_exact(per_layer)) {
            layer.set_phases(chunk)?;
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(MeshLayer::phases).collect()
    }
}

fn validate_pairing(m: usize, pairing: &[(usize, usize)]) -> Result<()> {
    let mut seen = vec![false; m];
    for &(a, b) in pairing {
        if a == b || a >= m || b >= m {
            return Err(QpnnError::InvalidPairing(format!(
                "pair ({a}, {b}) is not two distinct modes below {m}"
            )));
        }
        for x in [a, b] {
            if seen[x] {
                return Err(QpnnError::InvalidPairing(format!("mode {x} used twice")));
            }
            seen[x] = true;
        }
    }
    Ok(())
}

/// Input/target state pairs the network is trained to map.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pairs: Vec<(QuantumState, QuantumState)>,
}

impl TrainingSet {
    pub fn new(pairs: Vec<(QuantumState, QuantumState)>) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| QpnnError::InvalidTrainingSet("no pairs".into()))?;
        let basis = Arc::clone(first.0.basis());
        for (i, (input, target)) in pairs.iter().enumerate() {
            for s in [input, target] {
                if **s.basis() != *basis {
                    return Err(QpnnError::InvalidTrainingSet(format!("pair {i} mixes bases")));
                }
                if (s.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
                    return Err(QpnnError::InvalidTrainingSet(format!(
                        "pair {i} has a state of squared norm {}",
                        s.norm_sqr()
                    )));
                }
            }
        }
        Ok(TrainingSet { pairs })
    }

    pub fn pairs(&self) -> &[(QuantumState, QuantumState)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        self.pairs[0].0.basis()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub f_unc: f64,
    pub f_con: f64,
    pub p_cb: f64,
    /// No amplitude reached the computational basis; `f_con` is set to 0.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f_unc: f64,
    pub f_con: f64,
    pub p_cb: f64,
    pub per_pair: Vec<PairMetrics>,
}

impl MetricsReport {
    fn from_pairs(per_pair: Vec<PairMetrics>) -> Self {
        let k = per_pair.len() as f64;
        let mean = |f: fn(&PairMetrics) -> f64| per_pair.iter().map(f).sum::<f64>() / k;
        MetricsReport {
            f_unc: mean(|p| p.f_unc),
            f_con: mean(|p| p.f_con),
            p_cb: mean(|p| p.p_cb),
            per_pair,
        }
    }

    pub fn any_degenerate(&self) -> bool {
        self.per_pair.iter().any(|p| p.degenerate)
    }
}

/// Indices of states with exactly one photon in each qubit's mode pair and
/// none elsewhere.
pub fn computational_basis_indices(basis: &FockBasis, pairing: &[(usize, usize)]) -> Result<Vec<usize>> {
    validate_pairing(basis.modes(), pairing)?;
    let mut in_pair = vec![false; basis.modes()];
    for &(a, b) in pairing {
        in_pair[a] = true;
        in_pair[b] = true;
    }
    Ok(basis
        .states()
        .iter()
        .enumerate()
        .filter(|(_, s)| {
            let occ = s.occupations();
            pairing.iter().all(|&(a, b)| occ[a] + occ[b] == 1)
                && occ.iter().zip(&in_pair).all(|(&k, &paired)| paired || k == 0)
        })
        .map(|(i, _)| i)
        .collect())
}

/// Dense `N x N` transfer function of the whole network.
pub fn transfer_function(instance: &QpnnInstance) -> Result<Array2<Complex64>> {
    let dim = instance.basis.dim();
    let mut phi = Array2::from_elem((dim, dim), ZERO);
    let mut s = Array2::<Complex64>::eye(dim);
    for (i, layer) in instance.layers.iter().enumerate() {
        if i > 0 {
            for (mut row, &k) in s.rows_mut().into_iter().zip(instance.kerr_diag.iter()) {
                row.mapv_inplace(|x| x * k);
            }
        }
        let u = build_mesh(layer)?;
        multi_photon_transform_into(&u, &instance.basis, &mut phi)?;
        s = phi.dot(&s);
    }
    Ok(s)
}

fn check_set(dim: usize, set: &TrainingSet) -> Result<()> {
    if set.basis().dim() != dim {
        return Err(QpnnError::DimensionMismatch {
            expected: dim,
            found: set.basis().dim(),
        });
    }
    Ok(())
}

/// `F_i = |<target_i| S |input_i>|^2` and their mean.
pub fn unconditional_fidelity(s: &Array2<Complex64>, set: &TrainingSet) -> Result<(f64, Vec<f64>)> {
    check_set(s.nrows(), set)?;
    if s.ncols() != s.nrows() {
        return Err(QpnnError::NotSquare {
            rows: s.nrows(),
            cols: s.ncols(),
        });
    }
    let per: Vec<f64> = set
        .pairs()
        .iter()
        .map(|(input, target)| {
            let out = s.dot(input.amplitudes());
            overlap(target.amplitudes(), &out).norm_sqr()
        })
        .collect();
    let mean = per.iter().sum::<f64>() / per.len() as f64;
    Ok((mean, per))
}

/// Conditional fidelity and computational-basis probability of `S` on the
/// training set, together with the unconditional fidelity.
pub fn conditional_metrics(s: &Array2<Complex64>, set: &TrainingSet, cb: &[usize]) -> Result<MetricsReport> {
    check_set(s.nrows(), set)?;
    if let Some(&bad) = cb.iter().find(|&&i| i >= s.nrows()) {
        return Err(QpnnError::DimensionMismatch {
            expected: s.nrows(),
            found: bad,
        });
    }
    let outputs: Vec<Array1<Complex64>> = set.pairs().iter().map(|(input, _)| s.dot(input.amplitudes())).collect();
    Ok(metrics_from_outputs(&outputs, set, cb))
}

/// Metrics of already-propagated output amplitudes (`outputs[i] = S |input_i>`).
pub fn metrics_from_outputs(outputs: &[Array1<Complex64>], set: &TrainingSet, cb: &[usize]) -> MetricsReport {
    let per_pair = outputs
        .iter()
        .zip(set.pairs())
        .map(|(out, (_, target))| pair_metrics(out, target.amplitudes(), cb))
        .collect();
    MetricsReport::from_pairs(per_pair)
}

fn overlap(target: &Array1<Complex64>, out: &Array1<Complex64>) -> Complex64 {
    target.iter().zip(out.iter()).map(|(t, o)| t.conj() * o).sum()
}

fn pair_metrics(out: &Array1<Complex64>, target: &Array1<Complex64>, cb: &[usize]) -> PairMetrics {
    let f_unc = overlap(target, out).norm_sqr();
    let p_cb: f64 = cb.iter().map(|&x| out[x].norm_sqr()).sum();
    if p_cb <= 0.0 {
        return PairMetrics {
            f_unc,
            f_con: 0.0,
            p_cb: 0.0,
            degenerate: true,
        };
    }
    // Project onto the computational basis, renormalize, then overlap.
    let projected: Complex64 = cb.iter().map(|&x| target[x].conj() * out[x]).sum();
    PairMetrics {
        f_unc,
        f_con: projected.norm_sqr() / p_cb,
        p_cb,
        degenerate: false,
    }
}

/// Reusable buffers for propagating states through one instance. The lifted
/// mesh of each layer is rebuilt on every call, so parameters may change
/// freely between calls.
#[derive(Debug)]
pub struct Propagator {
    phi: Array2<Complex64>,
    scratch: Array1<Complex64>,
}

impl Propagator {
    pub fn new(basis: &FockBasis) -> Self {
        let dim = basis.dim();
        Propagator {
            phi: Array2::from_elem((dim, dim), ZERO),
            scratch: Array1::from_elem(dim, ZERO),
        }
    }

    /// Propagates every state in place through the network.
    pub fn propagate(&mut self, instance: &QpnnInstance, states: &mut [Array1<Complex64>]) -> Result<()> {
        self.propagate_with(instance, states, |_, _| {})
    }

    /// As [`Propagator::propagate`], calling `visit(stage, states)` after
    /// every mesh and every Kerr layer. Stages alternate mesh/Kerr starting
    /// from mesh 0.
    pub fn propagate_with<F>(
        &mut self,
        instance: &QpnnInstance,
        states: &mut [Array1<Complex64>],
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(Stage, &[Array1<Complex64>]),
    {
        let dim = instance.basis.dim();
        for s in states.iter() {
            if s.len() != dim {
                return Err(QpnnError::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
        }
        for (i, layer) in instance.layers.iter().enumerate() {
            if i > 0 {
                for s in states.iter_mut() {
                    s.zip_mut_with(&instance.kerr_diag, |x, k| *x *= k);
                }
                visit(Stage::Kerr(i - 1), states);
            }
            let u = build_mesh(layer)?;
            multi_photon_transform_into(&u, &instance.basis, &mut self.phi)?;
            for s in states.iter_mut() {
                for (r, row) in self.phi.rows().into_iter().enumerate() {
                    self.scratch[r] = row.iter().zip(s.iter()).map(|(a, b)| a * b).sum();
                }
                std::mem::swap(s, &mut self.scratch);
            }
            visit(Stage::Mesh(i), states);
        }
        Ok(())
    }
}

/// Position inside the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Input,
    Mesh(usize),
    Kerr(usize),
}

/// Per-mode photon-number distribution at one stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageProfile {
    pub stage: Stage,
    /// `probabilities[j][k] = P(n_j = k)`.
    pub probabilities: Vec<Vec<f64>>,
    /// `1 - ||psi||^2`.
    pub lost_norm: f64,
}

fn profile(stage: Stage, basis: &FockBasis, amplitudes: &Array1<Complex64>) -> StageProfile {
    let (n, m) = (basis.photons(), basis.modes());
    let mut probabilities = vec![vec![0.0; n + 1]; m];
    let mut norm = 0.0;
    for (state, a) in basis.states().iter().zip(amplitudes.iter()) {
        let p = a.norm_sqr();
        norm += p;
        for (j, &k) in state.occupations().iter().enumerate() {
            probabilities[j][k] += p;
        }
    }
    StageProfile {
        stage,
        probabilities,
        lost_norm: (1.0 - norm).max(0.0),
    }
}

/// Photon-number probabilities of every mode at the input and after each
/// mesh and each Kerr layer.
pub fn mode_occupation_profile(instance: &QpnnInstance, input: &QuantumState) -> Result<Vec<StageProfile>> {
    if (input.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
        return Err(QpnnError::InvalidQuantity {
            name: "input squared norm (must be 1)",
            value: input.norm_sqr(),
        });
    }
    let basis = Arc::clone(&instance.basis);
    let mut out = vec![profile(Stage::Input, &basis, input.amplitudes())];
    let mut states = vec![input.amplitudes().clone()];
    Propagator::new(&basis).propagate_with(instance, &mut states, |stage, s| {
        out.push(profile(stage, &basis, &s[0]));
    })?;
    Ok(out)
}

/// Evaluates metrics of one instance on one training set, reusing buffers
/// between calls.
#[derive(Debug)]
pub struct Evaluator {
    instance: QpnnInstance,
    set: TrainingSet,
    cb: Vec<usize>,
    propagator: Propagator,
    states: Vec<Array1<Complex64>>,
}

impl Evaluator {
    pub fn new(instance: QpnnInstance, set: TrainingSet) -> Result<Self> {
        check_set(instance.basis.dim(), &set)?;
        let cb = computational_basis_indices(&instance.basis, &instance.qubit_pairing)?;
        let propagator = Propagator::new(&instance.basis);
        let states = set.pairs().iter().map(|(i, _)| i.amplitudes().clone()).collect();
        Ok(Evaluator {
            instance,
            set,
            cb,
            propagator,
            states,
        })
    }

    pub fn instance(&self) -> &QpnnInstance {
        &self.instance
    }

    pub fn instance_mut(&mut self) -> &mut QpnnInstance {
        &mut self.instance
    }

    pub fn set(&self) -> &TrainingSet {
        &self.set
    }

    pub fn computational_basis(&self) -> &[usize] {
        &self.cb
    }

    /// Output amplitudes `S |input_i>` at `params`.
    pub fn outputs(&mut self, params: &[f64]) -> Result<&[Array1<Complex64>]> {
        self.instance.set_params(params)?;
        for (s, (input, _)) in self.states.iter_mut().zip(self.set.pairs()) {
            s.assign(input.amplitudes());
        }
        self.propagator.propagate(&self.instance, &mut self.states)?;
        Ok(&self.states)
    }

    pub fn metrics(&mut self, params: &[f64]) -> Result<MetricsReport> {
        self.outputs(params)?;
        Ok(metrics_from_outputs(&self.states, &self.set, &self.cb))
    }
}
