//! Thermodynamic models written as vielbein systems `e(q)·p = r`.
//!
//! Built-in families:
//!
//! | family       | coordinates | vielbein                              | entropy                                   |
//! |--------------|-------------|---------------------------------------|-------------------------------------------|
//! | ideal gas    | `(u, v)`    | `diag(u, v)`                          | `P_u ln(u/u₀) + P_v ln(v/v₀)`             |
//! | van der Waals| `(u, v)`    | `[[u + a/v, 0], [a(v−b)/v², v − b]]`  | `P_u ln(ũ/ũ₀) + P_v ln(ṽ/ṽ₀)`             |
//! | log-affine   | `q ∈ ℝᵐ₊`   | `diag(q)` with `η = P`                | `Σ P_μ ln(q^μ/q₀^μ)`                      |
//!
//! where `P_u = f k_B / 2`, `P_v = k_B`, `ũ = u + a/v` and `ṽ = v − b`.
//! Momenta are `p = (1/T, P/T)` for the gases.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    self, fmt_vec, DiagonalScale, DiagonalVielbein, MetricAt, VdwVielbein, VielbeinField, MAX_DIM,
};

/// Extensive coordinates `q` and intensive momenta `p` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    /// Set when `p` was computed from the equations of state at `q`.
    pub on_shell: bool,
}

impl PhaseState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self {
            q,
            p,
            on_shell: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `T = 1/p₁`.
    pub fn temperature(&self) -> f64 {
        1.0 / self.p[0]
    }

    /// `P = p₂/p₁`.
    pub fn pressure(&self) -> f64 {
        self.p[1] / self.p[0]
    }

    /// `θ = −p`, the natural coordinates of the dual flat structure.
    pub fn theta(&self) -> DVector<f64> {
        -&self.p
    }
}

/// A scale factor given either as a number or as the name of a charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleFactor {
    Value(f64),
    /// Resolves to `P_u`.
    Pu,
    /// Resolves to `P_v`.
    Pv,
}

impl ScaleFactor {
    fn resolve(self, pu: f64, pv: f64) -> f64 {
        match self {
            ScaleFactor::Value(x) => x,
            ScaleFactor::Pu => pu,
            ScaleFactor::Pv => pv,
        }
    }
}

impl From<f64> for ScaleFactor {
    fn from(x: f64) -> Self {
        ScaleFactor::Value(x)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ScaleRepr {
    Number(f64),
    Token(String),
}

impl Serialize for ScaleFactor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ScaleFactor::Value(x) => ScaleRepr::Number(*x),
            ScaleFactor::Pu => ScaleRepr::Token("Pu".into()),
            ScaleFactor::Pv => ScaleRepr::Token("Pv".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScaleFactor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match ScaleRepr::deserialize(d)? {
            ScaleRepr::Number(x) => Ok(ScaleFactor::Value(x)),
            ScaleRepr::Token(t) if t == "Pu" => Ok(ScaleFactor::Pu),
            ScaleRepr::Token(t) if t == "Pv" => Ok(ScaleFactor::Pv),
            ScaleRepr::Token(t) => Err(serde::de::Error::custom(format!(
                "scale factor must be a number, \"Pu\" or \"Pv\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelFamily {
    Ideal { f: f64, k_b: f64 },
    Vdw { f: f64, k_b: f64, a: f64, b: f64 },
    LogAffine,
    Custom,
}

type EntropyFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;

/// An equation-of-state system with its frame scale, charges and entropy.
#[derive(Clone)]
pub struct VielbeinModel {
    pub(crate) name: String,
    pub(crate) family: ModelFamily,
    pub(crate) vielbein: Arc<dyn VielbeinField>,
    pub(crate) eta: DiagonalScale,
    pub(crate) charges: DVector<f64>,
    pub(crate) reference_state: DVector<f64>,
    /// `√(η^{ij} r_i r_j)`, fixed at construction.
    pub(crate) energy: f64,
    pub(crate) entropy_fn: Option<Arc<EntropyFn>>,
}

impl fmt::Debug for VielbeinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VielbeinModel")
            .field("name", &self.name)
            .field("family", &self.family)
            .field("eta", &self.eta)
            .field("charges", &self.charges.as_slice())
            .field("reference_state", &self.reference_state.as_slice())
            .field("energy", &self.energy)
            .finish()
    }
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg()))
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    require(x.is_finite() && x > 0.0, || format!("{name} must be positive, got {x}"))
}

fn gas_charges(f: f64, k_b: f64) -> Result<(f64, f64)> {
    require(f.is_finite() && f >= 1.0, || format!("f must be at least 1, got {f}"))?;
    positive("k_B", k_b)?;
    Ok((0.5 * f * k_b, k_b))
}

impl VielbeinModel {
    /// Ideal gas `u = (f/2) k_B T`, `P v = k_B T` with `η = diag(α², β²)`.
    pub fn ideal_gas(
        f: f64,
        k_b: f64,
        alpha2: impl Into<ScaleFactor>,
        beta2: impl Into<ScaleFactor>,
    ) -> Result<Self> {
        let (pu, pv) = gas_charges(f, k_b)?;
        let eta = DiagonalScale::new(vec![
            alpha2.into().resolve(pu, pv),
            beta2.into().resolve(pu, pv),
        ])?;
        Self::assemble(
            "ideal",
            ModelFamily::Ideal { f, k_b },
            Arc::new(DiagonalVielbein { dim: 2 }),
            eta,
            DVector::from_vec(vec![pu, pv]),
            DVector::from_vec(vec![1.0, 1.0]),
            None,
        )
    }

    /// Van der Waals gas `u + a/v = (f/2) k_B T`, `(P + a/v²)(v − b) = k_B T`.
    pub fn vdw_gas(
        f: f64,
        k_b: f64,
        a: f64,
        b: f64,
        alpha2: impl Into<ScaleFactor>,
        beta2: impl Into<ScaleFactor>,
    ) -> Result<Self> {
        let (pu, pv) = gas_charges(f, k_b)?;
        require(a.is_finite() && a >= 0.0, || format!("a must be non-negative, got {a}"))?;
        require(b.is_finite() && b >= 0.0, || format!("b must be non-negative, got {b}"))?;
        let eta = DiagonalScale::new(vec![
            alpha2.into().resolve(pu, pv),
            beta2.into().resolve(pu, pv),
        ])?;
        let reference = if b < 1.0 {
            DVector::from_vec(vec![1.0, 1.0])
        } else {
            DVector::from_vec(vec![1.0, b + 1.0])
        };
        Self::assemble(
            "vdw",
            ModelFamily::Vdw { f, k_b, a, b },
            Arc::new(VdwVielbein { a, b }),
            eta,
            DVector::from_vec(vec![pu, pv]),
            reference,
            None,
        )
    }

    /// The family with characteristic function `W = Σ P_μ ln q^μ` and metric
    /// `g_{μν} = (P_μ/(q^μ)²) δ_{μν}`.
    pub fn log_affine(charges: &[f64]) -> Result<Self> {
        require(!charges.is_empty() && charges.len() <= MAX_DIM, || {
            format!("log-affine dimension must be in 1..={MAX_DIM}")
        })?;
        for &c in charges {
            positive("P", c)?;
        }
        let m = charges.len();
        Self::assemble(
            "log_affine",
            ModelFamily::LogAffine,
            Arc::new(DiagonalVielbein { dim: m }),
            DiagonalScale::new(charges.to_vec())?,
            DVector::from_column_slice(charges),
            DVector::from_element(m, 1.0),
            None,
        )
    }

    /// A model with a user-supplied vielbein. Without an entropy function the
    /// entropy-based operations report [`Error::Unsupported`].
    pub fn custom(
        name: impl Into<String>,
        vielbein: Arc<dyn VielbeinField>,
        eta: DiagonalScale,
        charges: DVector<f64>,
        reference_state: DVector<f64>,
        entropy: Option<Arc<EntropyFn>>,
    ) -> Result<Self> {
        let n = vielbein.dim();
        require(eta.dim() == n && charges.len() == n && reference_state.len() == n, || {
            format!("vielbein, scale, charges and reference state must all have dimension {n}")
        })?;
        let model = Self::assemble(
            &name.into(),
            ModelFamily::Custom,
            vielbein,
            eta,
            charges,
            reference_state,
            entropy,
        )?;
        if let Some(s) = &model.entropy_fn {
            let s0 = s(&model.reference_state);
            require(s0.abs() < 1e-12, || {
                format!("entropy must vanish at the reference state, got {s0}")
            })?;
        }
        Ok(model)
    }

    fn assemble(
        name: &str,
        family: ModelFamily,
        vielbein: Arc<dyn VielbeinField>,
        eta: DiagonalScale,
        charges: DVector<f64>,
        reference_state: DVector<f64>,
        entropy_fn: Option<Arc<EntropyFn>>,
    ) -> Result<Self> {
        if charges.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config("charges must be finite".into()));
        }
        let energy = eta.norm_sq_upper(&charges).sqrt();
        positive("E", energy)?;
        let model = Self {
            name: name.to_string(),
            family,
            vielbein,
            eta,
            charges,
            reference_state,
            energy,
            entropy_fn,
        };
        model
            .check_admissible(&model.reference_state)
            .map_err(|e| Error::Config(format!("reference state: {e}")))?;
        Ok(model)
    }

    /// Replaces the reference state `q₀` (where `s(q₀) = 0`).
    pub fn with_reference_state(mut self, q0: DVector<f64>) -> Result<Self> {
        require(q0.len() == self.dim(), || {
            format!("reference state must have dimension {}", self.dim())
        })?;
        self.check_admissible(&q0)
            .map_err(|e| Error::Config(format!("reference state: {e}")))?;
        if self.family == ModelFamily::Custom && self.entropy_fn.is_some() {
            return Err(Error::Config(
                "custom models fix their reference state at construction".into(),
            ));
        }
        self.reference_state = q0;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.vielbein.dim()
    }

    pub fn vielbein(&self) -> &dyn VielbeinField {
        self.vielbein.as_ref()
    }

    pub fn eta(&self) -> &DiagonalScale {
        &self.eta
    }

    /// The conserved charges `r` (`(P_u, P_v)` for the gases).
    pub fn charges(&self) -> &DVector<f64> {
        &self.charges
    }

    pub fn reference_state(&self) -> &DVector<f64> {
        &self.reference_state
    }

    /// The conserved energy `E = √(η^{ij} r_i r_j)`.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// `E(P) = √(η^{ij} P_i P_j)` for arbitrary charges.
    pub fn energy_for(&self, charges: &DVector<f64>) -> f64 {
        self.eta.norm_sq_upper(charges).sqrt()
    }

    /// Whether the frame scale equals the charges (`α² = P_u`, `β² = P_v`), the
    /// choice that makes the gas flows isobaric.
    pub fn is_constant_pressure(&self) -> bool {
        self.family != ModelFamily::Custom
            && self
                .charges
                .iter()
                .zip(self.eta.lower_entries())
                .all(|(c, l)| (c - l).abs() <= 1e-14 * c.abs())
    }

    pub fn check_admissible(&self, q: &DVector<f64>) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::Domain(format!(
                "state has dimension {} but the model has dimension {}",
                q.len(),
                self.dim()
            )));
        }
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("state {} is not finite", fmt_vec(q))));
        }
        match self.family {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => {
                if q.iter().any(|&x| x <= 0.0) {
                    return Err(Error::Domain(format!(
                        "state {} has a non-positive coordinate",
                        fmt_vec(q)
                    )));
                }
            }
            ModelFamily::Vdw { a, b, .. } => {
                let (u, v) = (q[0], q[1]);
                if v <= b {
                    return Err(Error::Domain(format!("v = {v} must exceed b = {b}")));
                }
                if u + a / v <= 0.0 {
                    return Err(Error::Domain(format!(
                        "u + a/v = {} must be positive",
                        u + a / v
                    )));
                }
            }
            ModelFamily::Custom => {}
        }
        Ok(())
    }

    /// Metric and inverse metric at an admissible state.
    pub fn metric(&self, q: &DVector<f64>) -> Result<MetricAt> {
        self.check_admissible(q)?;
        geometry::metric_at(self.vielbein.as_ref(), q, &self.eta)
    }

    /// `p = e⁻¹(q)·r`.
    pub fn on_shell_momenta(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_admissible(q)?;
        let e = self.vielbein.eval(q);
        let det = e.determinant();
        if !det.is_finite() || det.abs() <= geometry::SINGULAR_EPS {
            return Err(Error::Domain(format!(
                "vielbein is singular at {} (det = {det:e})",
                fmt_vec(q)
            )));
        }
        e.lu()
            .solve(&self.charges)
            .ok_or_else(|| Error::Domain(format!("vielbein is singular at {}", fmt_vec(q))))
    }

    pub fn on_shell_state(&self, q: DVector<f64>) -> Result<PhaseState> {
        let p = self.on_shell_momenta(&q)?;
        Ok(PhaseState {
            q,
            p,
            on_shell: true,
        })
    }

    /// Relative deviation `max_i |e_i^μ p_μ − r_i| / max(|r_i|, 1)` from the
    /// equations of state.
    pub fn charge_residual(&self, state: &PhaseState) -> f64 {
        let r = self.vielbein.eval(&state.q) * &state.p;
        r.iter()
            .zip(self.charges.iter())
            .map(|(x, c)| (x - c).abs() / c.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    fn entropy_raw(&self, q: &DVector<f64>) -> f64 {
        let q0 = &self.reference_state;
        match self.family {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => q
                .iter()
                .zip(q0.iter())
                .zip(self.charges.iter())
                .map(|((x, x0), c)| c * (x / x0).ln())
                .sum(),
            ModelFamily::Vdw { a, b, .. } => {
                let (pu, pv) = (self.charges[0], self.charges[1]);
                pu * ((q[0] + a / q[1]) / (q0[0] + a / q0[1])).ln()
                    + pv * ((q[1] - b) / (q0[1] - b)).ln()
            }
            ModelFamily::Custom => self.entropy_fn.as_ref().map_or(f64::NAN, |s| s(q)),
        }
    }

    fn require_entropy(&self) -> Result<()> {
        if self.family == ModelFamily::Custom && self.entropy_fn.is_none() {
            Err(Error::Unsupported {
                model: self.name.clone(),
                what: "no entropy function was supplied".into(),
            })
        } else {
            Ok(())
        }
    }

    /// Specific entropy relative to the reference state.
    pub fn entropy(&self, q: &DVector<f64>) -> Result<f64> {
        self.require_entropy()?;
        self.check_admissible(q)?;
        Ok(self.entropy_raw(q))
    }

    /// The entropy as a plain function, `NaN` outside the admissible region.
    /// Suitable for [`geometry::ruppeiner_metric`].
    pub fn entropy_function(&self) -> impl Fn(&DVector<f64>) -> f64 + '_ {
        move |q: &DVector<f64>| {
            if self.check_admissible(q).is_ok() {
                self.entropy_raw(q)
            } else {
                f64::NAN
            }
        }
    }

    /// `∂s/∂q`. Analytic for the built-in families; central differences with
    /// the default step otherwise.
    pub fn entropy_gradient(&self, q: &DVector<f64>) -> Result<DVector<f64>> {
        self.require_entropy()?;
        self.check_admissible(q)?;
        Ok(match self.family {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => {
                q.zip_map(&self.charges, |x, c| c / x)
            }
            ModelFamily::Vdw { a, b, .. } => {
                let (u, v) = (q[0], q[1]);
                let (pu, pv) = (self.charges[0], self.charges[1]);
                let ut = u + a / v;
                DVector::from_vec(vec![pu / ut, -pu * a / (v * v * ut) + pv / (v - b)])
            }
            ModelFamily::Custom => {
                let s = self.entropy_function();
                let h = geometry::default_fd_steps(q);
                let mut grad = DVector::zeros(q.len());
                for mu in 0..q.len() {
                    let mut plus = q.clone();
                    let mut minus = q.clone();
                    plus[mu] += h[mu];
                    minus[mu] -= h[mu];
                    grad[mu] = (s(&plus) - s(&minus)) / (2.0 * h[mu]);
                }
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Domain(format!(
                        "entropy gradient is not finite at {}",
                        fmt_vec(q)
                    )));
                }
                grad
            }
        })
    }

    /// Closed-form extensive coordinates after mock time `tau` along the
    /// on-shell Hamilton flow started at `q0`.
    pub fn closed_form_state(&self, q0: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
        self.check_admissible(q0)?;
        let e = self.energy;
        let rate = |i: usize| self.charges[i] / (self.eta.lower(i) * e);
        match self.family {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => Ok(DVector::from_iterator(
                q0.len(),
                q0.iter().enumerate().map(|(i, x)| x * (rate(i) * tau).exp()),
            )),
            ModelFamily::Vdw { a, b, .. } => {
                let (u0, v0) = (q0[0], q0[1]);
                let v = b + (v0 - b) * (rate(1) * tau).exp();
                let u = -a / v + (u0 + a / v0) * (rate(0) * tau).exp();
                Ok(DVector::from_vec(vec![u, v]))
            }
            ModelFamily::Custom => Err(self.unsupported("closed-form trajectories")),
        }
    }

    /// Planck potential `Ξ = s − p·q` (`s − u/T − Pv/T` for the gases).
    pub fn planck_potential(&self, state: &PhaseState) -> Result<f64> {
        Ok(self.entropy(&state.q)? - state.p.dot(&state.q))
    }

    /// The θ-potential `Ψ(θ)` as a function of `θ = −p` alone, for the
    /// diagonal families: `Σ P_μ ln(−P_μ/(θ_μ q₀^μ)) − Σ P_μ`.
    pub fn theta_potential(&self, theta: &DVector<f64>) -> Result<f64> {
        match self.family {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => {
                if theta.len() != self.dim() || theta.iter().any(|&t| !(t < 0.0)) {
                    return Err(Error::Domain(format!(
                        "θ = {} must be strictly negative",
                        fmt_vec(theta)
                    )));
                }
                let mut psi = 0.0;
                for ((t, c), q0) in theta.iter().zip(self.charges.iter()).zip(self.reference_state.iter()) {
                    psi += c * (-c / (t * q0)).ln() - c;
                }
                Ok(psi)
            }
            _ => Err(self.unsupported("closed-form θ-potential")),
        }
    }

    /// The η-potential `Ψ*(η) = −s(η)` with `η = q`.
    pub fn eta_potential(&self, q: &DVector<f64>) -> Result<f64> {
        Ok(-self.entropy(q)?)
    }

    /// Rate of change along the Hamilton flow of the pressure `P` (ideal gas)
    /// or of the effective pressure `P + a/v²` (van der Waals):
    /// `(P/E)(P_u/α² − P_v/β²)`.
    pub fn pressure_drift(&self, state: &PhaseState) -> Result<f64> {
        if self.dim() != 2 {
            return Err(self.unsupported("pressure drift needs a two-dimensional gas model"));
        }
        let factor = (self.charges[0] / self.eta.lower(0) - self.charges[1] / self.eta.lower(1))
            / self.energy;
        match self.family {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => Ok(state.pressure() * factor),
            ModelFamily::Vdw { .. } => Ok(self.effective_pressure(state)? * factor),
            ModelFamily::Custom => Err(self.unsupported("pressure drift")),
        }
    }

    /// `P + a/v²` (reduces to `P` for the ideal gas).
    pub fn effective_pressure(&self, state: &PhaseState) -> Result<f64> {
        match self.family {
            ModelFamily::Vdw { a, .. } => {
                let v = state.q[1];
                Ok(state.pressure() + a / (v * v))
            }
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine if self.dim() == 2 => {
                Ok(state.pressure())
            }
            _ => Err(self.unsupported("pressure")),
        }
    }

    pub(crate) fn unsupported(&self, what: &str) -> Error {
        Error::Unsupported {
            model: self.name.clone(),
            what: what.to_string(),
        }
    }
}

/// Mathieu transformation `(u, v, 1/T, P/T) ↦ (u + a/v, v − b, 1/T, P/T + a/(v²T))`.
pub fn mathieu_forward(a: f64, b: f64, state: &PhaseState) -> Result<PhaseState> {
    let (u, v) = (state.q[0], state.q[1]);
    if state.dim() != 2 || !(v > b) {
        return Err(Error::Domain(format!("Mathieu map needs v > b, got v = {v}, b = {b}")));
    }
    let (pu, pv) = (state.p[0], state.p[1]);
    Ok(PhaseState {
        q: DVector::from_vec(vec![u + a / v, v - b]),
        p: DVector::from_vec(vec![pu, pv + a / (v * v) * pu]),
        on_shell: state.on_shell,
    })
}

/// Inverse of [`mathieu_forward`].
pub fn mathieu_inverse(a: f64, b: f64, state: &PhaseState) -> Result<PhaseState> {
    let (ut, vt) = (state.q[0], state.q[1]);
    if state.dim() != 2 || !(vt > 0.0) {
        return Err(Error::Domain(format!("inverse Mathieu map needs ṽ > 0, got {vt}")));
    }
    let v = vt + b;
    let (pu, pvt) = (state.p[0], state.p[1]);
    Ok(PhaseState {
        q: DVector::from_vec(vec![ut - a / v, v]),
        p: DVector::from_vec(vec![pu, pvt - a / (v * v) * pu]),
        on_shell: state.on_shell,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ideal,
    Vdw,
    LogAffine,
}

/// Model configuration document, e.g.
/// `{"model": "vdw", "f": 3, "k_B": 1, "a": 0.5, "b": 0.1, "alpha2": "Pu", "beta2": "Pv"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(rename = "k_B", default, skip_serializing_if = "Option::is_none")]
    pub k_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<ScaleFactor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<ScaleFactor>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_state: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<VielbeinModel> {
        let reject = |present: bool, key: &str| {
            require(!present, || {
                format!("key '{key}' does not apply to model '{}'", self.kind_name())
            })
        };
        let f = self.f.unwrap_or(3.0);
        let k_b = self.k_b.unwrap_or(1.0);
        let alpha2 = self.alpha2.unwrap_or(ScaleFactor::Pu);
        let beta2 = self.beta2.unwrap_or(ScaleFactor::Pv);
        let model = match self.model {
            ModelKind::Ideal => {
                reject(self.a.is_some(), "a")?;
                reject(self.b.is_some(), "b")?;
                reject(self.charges.is_some(), "P")?;
                VielbeinModel::ideal_gas(f, k_b, alpha2, beta2)?
            }
            ModelKind::Vdw => {
                reject(self.charges.is_some(), "P")?;
                VielbeinModel::vdw_gas(
                    f,
                    k_b,
                    self.a.unwrap_or(0.0),
                    self.b.unwrap_or(0.0),
                    alpha2,
                    beta2,
                )?
            }
            ModelKind::LogAffine => {
                for (present, key) in [
                    (self.f.is_some(), "f"),
                    (self.k_b.is_some(), "k_B"),
                    (self.a.is_some(), "a"),
                    (self.b.is_some(), "b"),
                    (self.alpha2.is_some(), "alpha2"),
                    (self.beta2.is_some(), "beta2"),
                ] {
                    reject(present, key)?;
                }
                let charges = self
                    .charges
                    .as_ref()
                    .ok_or_else(|| Error::Config("log_affine needs 'P'".into()))?;
                VielbeinModel::log_affine(charges)?
            }
        };
        match &self.reference_state {
            Some(q0) => model.with_reference_state(DVector::from_column_slice(q0)),
            None => Ok(model),
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.model {
            ModelKind::Ideal => "ideal",
            ModelKind::Vdw => "vdw",
            ModelKind::LogAffine => "log_affine",
        }
    }
}

/// `e·e⁻¹` deviation from the identity, for diagnostics.
pub fn frame_inverse_error(model: &VielbeinModel, q: &DVector<f64>) -> Result<f64> {
    let e = model.vielbein.eval(q);
    let inv = e
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain(format!("vielbein is singular at {}", fmt_vec(q))))?;
    Ok((e * inv - DMatrix::identity(q.len(), q.len())).amax())
}
