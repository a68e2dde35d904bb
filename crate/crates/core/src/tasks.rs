//! Training tasks (Bell-state analysis, GHZ generation) and analytic
//! reference figures.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{array, Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::TrainingSet;
use crate::error::{QpnnError, Result};
use crate::fock::{enumerate_basis, FockBasis, QuantumState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskName {
    Bsa,
    Ghz,
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskName::Bsa => "bsa",
            TaskName::Ghz => "ghz",
        })
    }
}

impl FromStr for TaskName {
    type Err = QpnnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bsa" => Ok(TaskName::Bsa),
            "ghz" => Ok(TaskName::Ghz),
            other => Err(QpnnError::InvalidConfig(format!("unknown task {other:?}"))),
        }
    }
}

/// A task: its Fock space, dual-rail qubit layout and training pairs.
#[derive(Clone, Debug)]
pub struct TaskSpec {
    pub name: TaskName,
    pub qubit_pairing: Vec<(usize, usize)>,
    pub training_set: TrainingSet,
    /// Human-readable `input -> target` labels, one per pair.
    pub truth_table: Vec<(String, String)>,
}

impl TaskSpec {
    pub fn by_name(name: TaskName) -> Result<Self> {
        match name {
            TaskName::Bsa => bsa_training_set(),
            TaskName::Ghz => ghz_training_set(),
        }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        self.training_set.basis()
    }

    pub fn photons(&self) -> usize {
        self.basis().photons()
    }

    pub fn modes(&self) -> usize {
        self.basis().modes()
    }

    pub fn descriptor(&self) -> TaskDescriptor {
        TaskDescriptor {
            name: self.name,
            photons: self.photons(),
            modes: self.modes(),
            qubit_pairing: self.qubit_pairing.clone(),
            truth_table: self.truth_table.clone(),
        }
    }
}

/// Serializable summary of a [`TaskSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskDescriptor {
    pub name: TaskName,
    pub photons: usize,
    pub modes: usize,
    pub qubit_pairing: Vec<(usize, usize)>,
    pub truth_table: Vec<(String, String)>,
}

/// Fock occupations of a computational-basis bit string under dual-rail
/// encoding: logical 0 puts the photon in the first mode of its pair.
pub fn dual_rail_occupations(bits: &[u8], pairing: &[(usize, usize)], m: usize) -> Vec<usize> {
    let mut occ = vec![0; m];
    for (&bit, &(zero, one)) in bits.iter().zip(pairing) {
        occ[if bit == 0 { zero } else { one }] += 1;
    }
    occ
}

fn logical_state(
    basis: &Arc<FockBasis>,
    pairing: &[(usize, usize)],
    terms: &[(f64, &[u8])],
) -> Result<QuantumState> {
    let m = basis.modes();
    let occs: Vec<Vec<usize>> = terms
        .iter()
        .map(|(_, bits)| dual_rail_occupations(bits, pairing, m))
        .collect();
    let weighted: Vec<(Complex64, &[usize])> = terms
        .iter()
        .zip(&occs)
        .map(|((w, _), occ)| (Complex64::new(*w, 0.0), occ.as_slice()))
        .collect();
    QuantumState::superposition(Arc::clone(basis), &weighted)
}

/// Bell-state analyzer on two dual-rail qubits (modes (0,1) and (2,3)):
/// `Phi+ -> |00>`, `Psi+ -> |01>`, `Phi- -> |10>`, `Psi- -> |11>`.
pub fn bsa_training_set() -> Result<TaskSpec> {
    let pairing = vec![(0, 1), (2, 3)];
    let basis = Arc::new(enumerate_basis(2, 4)?);
    let h = FRAC_1_SQRT_2;
    let bell: [(&str, [(f64, &[u8]); 2], &[u8]); 4] = [
        ("Phi+", [(h, &[0, 0]), (h, &[1, 1])], &[0, 0]),
        ("Psi+", [(h, &[0, 1]), (h, &[1, 0])], &[0, 1]),
        ("Phi-", [(h, &[0, 0]), (-h, &[1, 1])], &[1, 0]),
        ("Psi-", [(h, &[0, 1]), (-h, &[1, 0])], &[1, 1]),
    ];
    let mut pairs = Vec::with_capacity(4);
    let mut truth_table = Vec::with_capacity(4);
    for (label, terms, target) in bell {
        let input = logical_state(&basis, &pairing, &terms)?;
        let output = logical_state(&basis, &pairing, &[(1.0, target)])?;
        pairs.push((input, output));
        truth_table.push((label.to_string(), format!("|{}{}>", target[0], target[1])));
    }
    Ok(TaskSpec {
        name: TaskName::Bsa,
        qubit_pairing: pairing,
        training_set: TrainingSet::new(pairs)?,
        truth_table,
    })
}

/// GHZ generation on three dual-rail qubits: `|000> -> (|000> + |111>)/sqrt 2`.
pub fn ghz_training_set() -> Result<TaskSpec> {
    let pairing = vec![(0, 1), (2, 3), (4, 5)];
    let basis = Arc::new(enumerate_basis(3, 6)?);
    let h = FRAC_1_SQRT_2;
    let input = logical_state(&basis, &pairing, &[(1.0, &[0, 0, 0])])?;
    let output = logical_state(&basis, &pairing, &[(h, &[0, 0, 0]), (h, &[1, 1, 1])])?;
    Ok(TaskSpec {
        name: TaskName::Ghz,
        qubit_pairing: pairing,
        training_set: TrainingSet::new(vec![(input, output)])?,
        truth_table: vec![("|000>".into(), "(|000>+|111>)/sqrt2".into())],
    })
}

fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| a[[i / br, j / bc]] * b[[i % br, j % bc]])
}

/// Two-qubit Fredkin-gate analyzer in the logical basis `|00>, |01>, |10>, |11>`:
/// `(H x I)(I x H) diag(1, 1, 1, e^{i varphi}) (I x H)`.
pub fn fredkin_bsa_unitary(varphi: f64) -> Array2<Complex64> {
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let hadamard = array![[r, r], [r, -r]];
    let eye = Array2::<Complex64>::eye(2);
    let kerr = Array2::from_diag(&Array1::from(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::from_polar(1.0, varphi),
    ]));
    let h_first = kron(&hadamard, &eye);
    let h_second = kron(&eye, &hadamard);
    h_first.dot(&h_second).dot(&kerr).dot(&h_second)
}

/// Mean unconditional fidelity of the lossless Fredkin-gate analyzer over
/// the four Bell states, with the same truth table as [`bsa_training_set`].
pub fn fredkin_bsa_fidelity(varphi: f64) -> f64 {
    let u = fredkin_bsa_unitary(varphi);
    let h = FRAC_1_SQRT_2;
    // (input amplitudes over |00>,|01>,|10>,|11>, target index)
    let bell = [
        ([h, 0.0, 0.0, h], 0),
        ([0.0, h, h, 0.0], 1),
        ([h, 0.0, 0.0, -h], 2),
        ([0.0, h, -h, 0.0], 3),
    ];
    bell.iter()
        .map(|(amps, target)| {
            let amp: Complex64 = (0..4).map(|j| u[[*target, j]] * amps[j]).sum();
            amp.norm_sqr()
        })
        .sum::<f64>()
        / 4.0
}

/// Success probability of `n_nodes` independent operations in series.
pub fn series_success_rate(f: f64, n_nodes: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&f) {
        return Err(QpnnError::InvalidQuantity {
            name: "per-node fidelity",
            value: f,
        });
    }
    if n_nodes == 0 {
        return Err(QpnnError::InvalidConfig("series needs at least one node".into()));
    }
    Ok(f.powi(n_nodes as i32))
}

/// Best unconditional fidelity of a linear-optical Bell-state analyzer
/// without ancilla photons.
pub fn linear_optical_bound() -> f64 {
    0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_rail_zero_is_first_mode() {
        assert_eq!(dual_rail_occupations(&[0], &[(0, 1)], 2), vec![1, 0]);
        assert_eq!(dual_rail_occupations(&[1, 0], &[(0, 1), (2, 3)], 4), vec![0, 1, 1, 0]);
    }

    #[test]
    fn bsa_inputs() {
        let task = bsa_training_set().unwrap();
        let basis = task.basis();
        assert_eq!((task.photons(), task.modes(), task.training_set.len()), (2, 4, 4));
        let phi_plus = &task.training_set.pairs()[0].0;
        for (i, a) in phi_plus.amplitudes().iter().enumerate() {
            let occ = basis.state(i).occupations();
            let expected = if occ == [1, 0, 1, 0] || occ == [0, 1, 0, 1] {
                FRAC_1_SQRT_2
            } else {
                0.0
            };
            assert!((a.re - expected).abs() < 1e-15 && a.im == 0.0);
        }
        let pairs = task.training_set.pairs();
        for (i, (a, _)) in pairs.iter().enumerate() {
            for (j, (b, _)) in pairs.iter().enumerate() {
                let ip = a.inner(b).norm();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn ghz_set() {
        let task = ghz_training_set().unwrap();
        assert_eq!(task.basis().dim(), 56);
        let target = &task.training_set.pairs()[0].1;
        assert!((target.norm_sqr() - 1.0).abs() < 1e-15);
        let nonzero: Vec<f64> = target.amplitudes().iter().filter(|a| a.norm() > 0.0).map(|a| a.re).collect();
        assert_eq!(nonzero.len(), 2);
        assert!(nonzero.iter().all(|&a| (a - FRAC_1_SQRT_2).abs() < 1e-15));
    }

    #[test]
    fn task_name_parsing() {
        assert_eq!("BSA".parse::<TaskName>().unwrap(), TaskName::Bsa);
        assert!("cnot".parse::<TaskName>().is_err());
        assert_eq!(TaskName::Ghz.to_string(), "ghz");
    }

    #[test]
    fn series_rates() {
        assert!((series_success_rate(0.5, 10).unwrap() - 0.0009765625).abs() < 1e-15);
        assert_eq!(series_success_rate(0.37, 1).unwrap(), 0.37);
        assert!(series_success_rate(1.2, 3).is_err());
        assert!(series_success_rate(0.5, 0).is_err());
    }
}
