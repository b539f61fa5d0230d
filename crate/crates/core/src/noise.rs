//! Noise channels and leakage models.
//!
//! Anything that keeps the system inside the qubit space, whatever it does
//! there, leaves `det F = 0`. The same holds for leakage that adds a
//! parameter-independent constant to each row. [`leaky_gate`] breaks that
//! condition on purpose: its coupling to the third level grows with the gate
//! angle, which is what the witness is built to detect.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubit::{make_s_theta, ComplexMatrix, DensityState, MeasEffect, UnitaryGate};
use crate::witness::{AngleConfig, ProbMatrix, N_MEAS, N_PREP};

const COMPLETENESS_TOL: f64 = 1e-10;
const MAX_LEAK_COUPLING: f64 = 0.5;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: p,
            reason: "must lie in [0, 1]",
        })
    }
}

/// Completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    operators: Vec<ComplexMatrix>,
    label: String,
}

impl KrausChannel {
    /// Checks `sum K^dagger K = 1` within `1e-10`.
    pub fn new(operators: Vec<ComplexMatrix>, label: impl Into<String>) -> Result<Self> {
        let first = operators
            .first()
            .ok_or_else(|| Error::InvalidMatrix("channel needs at least one operator".into()))?;
        let dim = first.dim();
        let mut sum = ComplexMatrix::zeros(dim);
        for k in &operators {
            if k.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: k.dim(),
                });
            }
            sum = &sum + &(&k.adjoint() * k);
        }
        let err = sum.max_abs_diff(&ComplexMatrix::identity(dim));
        if err > COMPLETENESS_TOL {
            return Err(Error::InvalidMatrix(format!(
                "Kraus operators not trace preserving (deviation {err:.3e})"
            )));
        }
        Ok(Self {
            operators,
            label: label.into(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            operators: vec![ComplexMatrix::identity(dim)],
            label: "identity".into(),
        }
    }

    pub fn operators(&self) -> &[ComplexMatrix] {
        &self.operators
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.operators[0].dim()
    }

    /// Deviation of `sum K^dagger K` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let dim = self.dim();
        let sum = self
            .operators
            .iter()
            .fold(ComplexMatrix::zeros(dim), |acc, k| &acc + &(&k.adjoint() * k));
        sum.max_abs_diff(&ComplexMatrix::identity(dim))
    }

    /// Acts as `self` on the leading block and as the identity on the extra
    /// levels.
    pub fn embed(&self, dim: usize) -> Self {
        if dim == self.dim() {
            return self.clone();
        }
        let mut operators: Vec<_> = self
            .operators
            .iter()
            .map(|k| k.embed(dim, c(0.0)))
            .collect();
        let mut rest = ComplexMatrix::zeros(dim);
        for i in self.dim()..dim {
            rest[(i, i)] = c(1.0);
        }
        operators.push(rest);
        Self {
            operators,
            label: self.label.clone(),
        }
    }

    fn apply_matrix(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        self.operators
            .iter()
            .fold(ComplexMatrix::zeros(rho.dim()), |acc, k| {
                &acc + &(&(k * rho) * &k.adjoint())
            })
    }
}

fn paulis() -> [ComplexMatrix; 3] {
    let i = Complex64::i();
    [
        ComplexMatrix::from_rows(&[vec![c(0.0), c(1.0)], vec![c(1.0), c(0.0)]]).unwrap(),
        ComplexMatrix::from_rows(&[vec![c(0.0), -i], vec![i, c(0.0)]]).unwrap(),
        ComplexMatrix::diagonal(&[c(1.0), c(-1.0)]),
    ]
}

/// `rho -> (1 - p) rho + p 1/2`, as four Kraus operators.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    check_probability("depolarizing p", p)?;
    let mut ops = vec![ComplexMatrix::identity(2).scale(c((1.0 - 0.75 * p).sqrt()))];
    ops.extend(paulis().iter().map(|s| s.scale(c((p / 4.0).sqrt()))));
    KrausChannel::new(ops, format!("depolarizing({p})"))
}

/// Energy relaxation `|1> -> |0>` with probability `gamma`.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_probability("amplitude damping gamma", gamma)?;
    let k0 = ComplexMatrix::diagonal(&[c(1.0), c((1.0 - gamma).sqrt())]);
    let mut k1 = ComplexMatrix::zeros(2);
    k1[(0, 1)] = c(gamma.sqrt());
    KrausChannel::new(vec![k0, k1], format!("amplitude_damping({gamma})"))
}

/// Pure dephasing: coherences shrink by `sqrt(1 - lambda)`.
pub fn phase_damping(lambda: f64) -> Result<KrausChannel> {
    check_probability("phase damping lambda", lambda)?;
    let k0 = ComplexMatrix::diagonal(&[c(1.0), c((1.0 - lambda).sqrt())]);
    let k1 = ComplexMatrix::diagonal(&[c(0.0), c(lambda.sqrt())]);
    KrausChannel::new(vec![k0, k1], format!("phase_damping({lambda})"))
}

/// `sum K rho K^dagger`.
pub fn apply_channel(ch: &KrausChannel, rho: &DensityState) -> Result<DensityState> {
    if ch.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: ch.dim(),
            found: rho.dim(),
        });
    }
    DensityState::new(ch.apply_matrix(rho.matrix()))
}

/// Classical bit-flip probabilities of the readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfusion")]
pub struct ReadoutConfusion {
    /// P(read 1 | true 0).
    pub eps0: f64,
    /// P(read 0 | true 1).
    pub eps1: f64,
}

#[derive(Deserialize)]
struct RawConfusion {
    eps0: f64,
    eps1: f64,
}

impl TryFrom<RawConfusion> for ReadoutConfusion {
    type Error = Error;
    fn try_from(r: RawConfusion) -> Result<Self> {
        ReadoutConfusion::new(r.eps0, r.eps1)
    }
}

impl ReadoutConfusion {
    pub fn new(eps0: f64, eps1: f64) -> Result<Self> {
        check_probability("readout eps0", eps0)?;
        check_probability("readout eps1", eps1)?;
        Ok(Self { eps0, eps1 })
    }
}

/// Probability of reading 0 when the true outcome-0 probability is `p`.
pub fn apply_readout(p: f64, conf: &ReadoutConfusion) -> f64 {
    p * (1.0 - conf.eps0) + (1.0 - p) * conf.eps1
}

/// [`apply_readout`] on every measured cell; the ones row is untouched.
pub fn apply_readout_matrix(f: &ProbMatrix, conf: &ReadoutConfusion) -> ProbMatrix {
    ProbMatrix::new(f.map_rows(|_, p| apply_readout(p, conf)))
        .expect("readout confusion maps [0, 1] into itself")
}

#[derive(Clone, Debug, PartialEq)]
pub enum LeakageModel {
    /// Every preparation carries the same extra term `weight * external_state`.
    Constant {
        weight: f64,
        external_state: DensityState,
    },
    /// Coherent `|1> <-> |2>` rotation by `coupling * theta` inside each
    /// parameterized gate.
    ParameterDependent { coupling: f64 },
}

impl LeakageModel {
    pub fn constant(weight: f64, external_state: DensityState) -> Result<Self> {
        check_probability("leakage weight", weight)?;
        Ok(Self::Constant {
            weight,
            external_state,
        })
    }

    pub fn parameter_dependent(coupling: f64) -> Result<Self> {
        check_coupling(coupling)?;
        Ok(Self::ParameterDependent { coupling })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::ParameterDependent { .. } => "parameter_dependent",
        }
    }

    /// Trace left in the qubit sector once the leaked weight is removed.
    pub fn qubit_sector_trace(&self) -> f64 {
        match self {
            Self::Constant { weight, .. } => 1.0 - weight,
            Self::ParameterDependent { .. } => 1.0,
        }
    }
}

fn check_coupling(epsilon: f64) -> Result<()> {
    if (0.0..=MAX_LEAK_COUPLING).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "leakage coupling",
            value: epsilon,
            reason: "must lie in [0, 0.5]",
        })
    }
}

/// Adds `c_k = weight * Tr(M_k P~)` to every entry of row `k`. No clamping:
/// the shifted entries are bookkeeping, not probabilities.
pub fn constant_leakage(
    f: &ProbMatrix,
    model: &LeakageModel,
    m_effects: &[MeasEffect; N_MEAS],
) -> Result<ProbMatrix> {
    let LeakageModel::Constant {
        weight,
        external_state,
    } = model
    else {
        return Err(Error::LeakageKind {
            expected: "constant",
        });
    };
    let shifts: Vec<f64> = m_effects
        .iter()
        .map(|m| {
            let dim = m.dim().max(external_state.dim());
            let m = m.embed(dim);
            let p = external_state.embed(dim);
            weight * m.matrix().trace_product(p.matrix()).re
        })
        .collect();
    ProbMatrix::from_affine_rows(f.map_rows(|k, v| v + shifts[k]))
}

/// Three-level gate: `S_theta` on `{|0>, |1>}` followed by a real rotation
/// of `{|1>, |2>}` through `epsilon * theta`.
pub fn leaky_gate(theta: f64, epsilon: f64) -> Result<UnitaryGate> {
    check_coupling(epsilon)?;
    Ok(leaky_gate_unchecked(theta, epsilon))
}

fn leaky_gate_unchecked(theta: f64, epsilon: f64) -> UnitaryGate {
    let (s, co) = (epsilon * theta).sin_cos();
    let mut r = ComplexMatrix::identity(3);
    r[(1, 1)] = c(co);
    r[(1, 2)] = c(-s);
    r[(2, 1)] = c(s);
    r[(2, 2)] = c(co);
    UnitaryGate::new_unchecked(r).then_after(&make_s_theta(theta).embed(3))
}

/// Complete noise description for the circuit: channels after every gate,
/// optional leakage, optional readout confusion.
#[derive(Clone, Debug, Default)]
pub struct NoiseModel {
    pub gate_channels: Vec<KrausChannel>,
    pub leakage: Option<LeakageModel>,
    pub readout: Option<ReadoutConfusion>,
}

impl NoiseModel {
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn is_ideal(&self) -> bool {
        self.gate_channels.is_empty() && self.leakage.is_none() && self.readout.is_none()
    }

    pub fn dim(&self) -> usize {
        if self.leakage.is_some() {
            3
        } else {
            2
        }
    }

    fn gate(&self, theta: f64) -> UnitaryGate {
        match &self.leakage {
            Some(LeakageModel::ParameterDependent { coupling }) => {
                leaky_gate_unchecked(theta, *coupling)
            }
            _ => make_s_theta(theta).embed(self.dim()),
        }
    }

    fn noisy_step(&self, rho: ComplexMatrix, theta: f64) -> ComplexMatrix {
        let mut rho = self.gate(theta).conjugate(&rho);
        for ch in &self.gate_channels {
            rho = ch.embed(rho.dim()).apply_matrix(&rho);
        }
        rho
    }

    /// Probability of reading 0 after `S, S_beta | S_phi, S` under this model.
    pub fn cell_probability(&self, beta: f64, phi: f64) -> f64 {
        let dim = self.dim();
        let mut rho = DensityState::basis(dim, 0).into_matrix();
        for theta in [0.0, beta] {
            rho = self.noisy_step(rho, theta);
        }
        if let Some(LeakageModel::Constant {
            weight,
            external_state,
        }) = &self.leakage
        {
            let leaked = external_state.embed(dim).into_matrix();
            rho = &rho.scale(c(1.0 - weight)) + &leaked.scale(c(*weight));
        }
        for theta in [phi, 0.0] {
            rho = self.noisy_step(rho, theta);
        }
        let p = rho[(0, 0)].re.clamp(0.0, 1.0);
        match &self.readout {
            Some(conf) => apply_readout(p, conf),
            None => p,
        }
    }

    pub fn prob_matrix(&self, angles: &AngleConfig) -> ProbMatrix {
        let rows: [[f64; N_PREP]; N_MEAS] = std::array::from_fn(|k| {
            std::array::from_fn(|j| self.cell_probability(angles.beta[j], angles.phi[k]))
        });
        ProbMatrix::new(rows).expect("cell probabilities are clamped")
    }
}

/// Noise section of an experiment plan.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Depolarizing probability after every gate.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub depolarizing: f64,
    /// Amplitude damping probability after every gate.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub amplitude_damping: f64,
    /// Phase damping probability after every gate.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub phase_damping: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout: Option<ReadoutSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leakage: Option<LeakageSpec>,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutSpec {
    pub eps0: f64,
    pub eps1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeakageSpec {
    /// Leaked population is diagonal over levels `|0>, |1>, |2>`.
    Constant {
        weight: f64,
        external_populations: [f64; 3],
    },
    ParameterDependent { coupling: f64 },
}

impl NoiseSpec {
    pub fn to_model(&self) -> Result<NoiseModel> {
        let invalid = |e: Error| Error::InvalidNoise(e.to_string());
        let mut gate_channels = Vec::new();
        if self.depolarizing != 0.0 {
            gate_channels.push(depolarizing(self.depolarizing).map_err(invalid)?);
        }
        if self.amplitude_damping != 0.0 {
            gate_channels.push(amplitude_damping(self.amplitude_damping).map_err(invalid)?);
        }
        if self.phase_damping != 0.0 {
            gate_channels.push(phase_damping(self.phase_damping).map_err(invalid)?);
        }
        let readout = self
            .readout
            .map(|r| ReadoutConfusion::new(r.eps0, r.eps1))
            .transpose()
            .map_err(invalid)?;
        let leakage = match &self.leakage {
            None => None,
            Some(LeakageSpec::ParameterDependent { coupling }) => {
                Some(LeakageModel::parameter_dependent(*coupling).map_err(invalid)?)
            }
            Some(LeakageSpec::Constant {
                weight,
                external_populations,
            }) => {
                let diag = external_populations.map(c);
                let state = DensityState::new(ComplexMatrix::diagonal(&diag)).map_err(|_| {
                    Error::InvalidNoise(format!(
                        "external_populations {external_populations:?} must be non-negative and sum to 1"
                    ))
                })?;
                Some(LeakageModel::constant(*weight, state).map_err(invalid)?)
            }
        };
        Ok(NoiseModel {
            gate_channels,
            leakage,
            readout,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubit::{measurement_effect, prepare};
    use crate::witness::{default_angles, determinant, ideal_prob_matrix};

    #[test]
    fn depolarizing_limits() {
        let id = depolarizing(0.0).unwrap();
        let rho = prepare(0.7);
        let out = apply_channel(&id, &rho).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) < 1e-15);

        let full = depolarizing(1.0).unwrap();
        let out = apply_channel(&full, &DensityState::basis(2, 0)).unwrap();
        assert!(out.matrix().max_abs_diff(DensityState::maximally_mixed(2).matrix()) < 1e-15);
        assert!(full.completeness_error() < 1e-12);
        assert_eq!(full.operators().len(), 4);
        assert!(depolarizing(1.2).is_err());
        assert!(depolarizing(-0.1).is_err());
    }

    #[test]
    fn damping_examples() {
        let ad = amplitude_damping(1.0).unwrap();
        let out = apply_channel(&ad, &DensityState::basis(2, 1)).unwrap();
        assert!(out.matrix().max_abs_diff(DensityState::basis(2, 0).matrix()) < 1e-15);

        let id = amplitude_damping(0.0).unwrap();
        let rho = prepare(1.1);
        assert!(apply_channel(&id, &rho).unwrap().matrix().max_abs_diff(rho.matrix()) < 1e-15);

        let pd = phase_damping(0.4).unwrap();
        let out = apply_channel(&pd, &rho).unwrap();
        assert!((out.population(0) - rho.population(0)).abs() < 1e-15);
        assert!((out.population(1) - rho.population(1)).abs() < 1e-15);
        assert!(out.matrix()[(0, 1)].norm() < rho.matrix()[(0, 1)].norm());
        assert!(phase_damping(2.0).is_err());
        assert!(amplitude_damping(f64::NAN).is_err());
    }

    #[test]
    fn channel_dimension_mismatch() {
        let ch = depolarizing(0.1).unwrap();
        assert!(matches!(
            apply_channel(&ch, &DensityState::basis(3, 0)),
            Err(Error::DimensionMismatch { .. })
        ));
        let embedded = ch.embed(3);
        assert!(embedded.completeness_error() < 1e-12);
        assert!(apply_channel(&embedded, &DensityState::basis(3, 2)).is_ok());
    }

    #[test]
    fn non_trace_preserving_rejected() {
        let k = ComplexMatrix::identity(2).scale(c(0.9));
        assert!(KrausChannel::new(vec![k], "lossy").is_err());
    }

    #[test]
    fn readout_formula() {
        let none = ReadoutConfusion::new(0.0, 0.0).unwrap();
        assert_eq!(apply_readout(0.37, &none), 0.37);
        let conf = ReadoutConfusion::new(0.02, 0.0).unwrap();
        assert!((apply_readout(1.0, &conf) - 0.98).abs() < 1e-15);
        assert!(ReadoutConfusion::new(0.1, 1.5).is_err());
    }

    #[test]
    fn readout_keeps_ideal_witness_null() {
        let conf = ReadoutConfusion::new(0.03, 0.05).unwrap();
        let f = apply_readout_matrix(&ideal_prob_matrix(&default_angles()), &conf);
        assert!(determinant(&f).abs() < 1e-12);
    }

    #[test]
    fn constant_leakage_zero_weight_and_kind() {
        let f = ideal_prob_matrix(&default_angles());
        let effects = default_angles().phi.map(measurement_effect);
        let model = LeakageModel::constant(0.0, DensityState::basis(3, 2)).unwrap();
        assert_eq!(constant_leakage(&f, &model, &effects).unwrap(), f);

        let wrong = LeakageModel::parameter_dependent(0.1).unwrap();
        assert!(matches!(
            constant_leakage(&f, &wrong, &effects),
            Err(Error::LeakageKind { .. })
        ));
    }

    #[test]
    fn constant_leakage_can_exceed_unit_range() {
        let f = ideal_prob_matrix(&default_angles());
        let effects = default_angles().phi.map(measurement_effect);
        let model = LeakageModel::constant(0.9, prepare(0.0)).unwrap();
        let shifted = constant_leakage(&f, &model, &effects).unwrap();
        // M(phi) overlaps |1><1| so rows shift up past 1 in places
        assert!(shifted.measured_rows().iter().flatten().any(|&v| v > 1.0));
        assert!((determinant(&shifted) - determinant(&f)).abs() < 1e-10);
    }

    #[test]
    fn leaky_gate_reduces_to_embedded_s_theta() {
        for &t in &[0.0, 0.8, -2.1] {
            let g = leaky_gate(t, 0.0).unwrap();
            assert!(g.matrix().max_abs_diff(make_s_theta(t).embed(3).matrix()) < 1e-15);
        }
        assert!(leaky_gate(1.0, 0.6).is_err());
        assert!(leaky_gate(1.0, -0.1).is_err());
        assert!(leaky_gate(2.0, 0.5).unwrap().unitarity_error() < 1e-12);
    }

    #[test]
    fn spec_to_model() {
        let spec: NoiseSpec = serde_json::from_str(
            r#"{"depolarizing": 0.05, "readout": {"eps0": 0.01, "eps1": 0.02},
                "leakage": {"kind": "constant", "weight": 0.1, "external_populations": [0, 0, 1]}}"#,
        )
        .unwrap();
        let model = spec.to_model().unwrap();
        assert_eq!(model.gate_channels.len(), 1);
        assert_eq!(model.dim(), 3);
        assert!(determinant(&model.prob_matrix(&default_angles())).abs() < 1e-10);

        let bad: NoiseSpec = serde_json::from_str(r#"{"depolarizing": 1.5}"#).unwrap();
        assert!(matches!(bad.to_model(), Err(Error::InvalidNoise(_))));
        let bad: NoiseSpec = serde_json::from_str(
            r#"{"leakage": {"kind": "constant", "weight": 0.1, "external_populations": [0.5, 0, 0]}}"#,
        )
        .unwrap();
        assert!(matches!(bad.to_model(), Err(Error::InvalidNoise(_))));
        assert!(serde_json::from_str::<NoiseSpec>(r#"{"crosstalk": 0.1}"#).is_err());
    }

    #[test]
    fn ideal_model_matches_ideal_matrix() {
        let a = default_angles();
        let f = NoiseModel::ideal().prob_matrix(&a);
        assert!(f.to_matrix().max_abs_diff(&ideal_prob_matrix(&a).to_matrix()) < 1e-14);
    }
}
