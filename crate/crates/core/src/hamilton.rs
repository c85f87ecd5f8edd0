//! Hamilton's equations for `H = √(g^{μν}(q) p_μ p_ν)` in the mock time `τ`,
//! and the Hamilton-Jacobi quantities `W`, `S` and `G` for the built-in models.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::{self, fmt_vec};
use crate::integrate::{integrate, left_domain, IntegratorConfig};
use crate::models::{ModelFamily, PhaseState, VielbeinModel};
use crate::trajectory::{ParameterKind, Sample, Trajectory, TrajectoryMeta};

/// A model together with its conserved energy.
#[derive(Debug, Clone)]
pub struct HamiltonSystem {
    model: VielbeinModel,
    energy: f64,
}

impl HamiltonSystem {
    pub fn new(model: VielbeinModel) -> Self {
        let energy = model.energy();
        Self { model, energy }
    }

    pub fn model(&self) -> &VielbeinModel {
        &self.model
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Default RK4 step `1e-3·E`, i.e. uniform steps of `1e-3` in `t`.
    pub fn default_step(&self) -> f64 {
        1e-3 * self.energy
    }

    /// `(e p, D e p)` with `D = diag(η^{ii})`.
    fn frame_momenta(&self, state: &PhaseState) -> Result<(DVector<f64>, DVector<f64>)> {
        self.model.check_admissible(&state.q)?;
        if state.p.len() != state.q.len() {
            return Err(Error::Domain("q and p have different dimensions".into()));
        }
        let ep = self.model.vielbein().eval(&state.q) * &state.p;
        let eta = self.model.eta();
        let dep = DVector::from_iterator(ep.len(), ep.iter().enumerate().map(|(i, x)| x * eta.upper(i)));
        Ok((ep, dep))
    }

    /// `H = √(g^{μν} p_μ p_ν)`; equals `E` on shell.
    pub fn hamiltonian(&self, state: &PhaseState) -> Result<f64> {
        let (ep, dep) = self.frame_momenta(state)?;
        let h2 = ep.dot(&dep);
        if !(h2 > 0.0) {
            return Err(Error::Domain(format!(
                "g^(μν) p_μ p_ν = {h2:e} is not positive at q = {}, p = {}",
                fmt_vec(&state.q),
                fmt_vec(&state.p)
            )));
        }
        Ok(h2.sqrt())
    }

    /// `(dq/dτ, dp/dτ) = (∂H/∂p, −∂H/∂q)`.
    ///
    /// With `g^{..} = eᵀ D e` this is `dq/dτ = eᵀ D e p / H` and
    /// `dp_μ/dτ = −(∂_μ e · p)ᵀ D (e p) / H`. The vielbein derivatives are
    /// analytic for the built-in models and central differences otherwise.
    pub fn hamilton_rhs(&self, state: &PhaseState) -> Result<(DVector<f64>, DVector<f64>)> {
        let h = self.hamiltonian(state)?;
        let (_, dep) = self.frame_momenta(state)?;
        let field = self.model.vielbein();
        let e = field.eval(&state.q);
        let dq = e.tr_mul(&dep) / h;
        let n = state.q.len();
        let mut dp = DVector::zeros(n);
        for mu in 0..n {
            let de = field.partial(&state.q, mu);
            dp[mu] = -(de * &state.p).dot(&dep) / h;
        }
        Ok((dq, dp))
    }
}

fn split(y: &[f64]) -> PhaseState {
    let n = y.len() / 2;
    PhaseState::new(
        DVector::from_column_slice(&y[..n]),
        DVector::from_column_slice(&y[n..]),
    )
}

/// Integrates Hamilton's equations over `tau_span` from `state0`.
///
/// Each sample carries its eikonal residual; samples inherit the on-shell
/// flag of `state0`.
pub fn integrate_hamilton(
    system: &HamiltonSystem,
    state0: &PhaseState,
    tau_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    system.model.check_admissible(&state0.q)?;
    system.hamiltonian(state0)?;
    let y0: Vec<f64> = state0.q.iter().chain(state0.p.iter()).copied().collect();
    let rhs = |_tau: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (dq, dp) = system.hamilton_rhs(&split(y))?;
        Ok(dq.iter().chain(dp.iter()).copied().collect())
    };
    let raw = integrate(rhs, &y0, tau_span, cfg)?;
    let samples = raw
        .into_iter()
        .map(|(tau, y)| {
            let mut state = split(&y);
            state.on_shell = state0.on_shell;
            let metric = system.model.metric(&state.q).map_err(|e| left_domain(e, tau, &y))?;
            let eikonal_residual = geometry::eikonal_residual(&metric, &state.p, system.energy);
            Ok(Sample {
                param: tau,
                state,
                eikonal_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(
        ParameterKind::Tau,
        order_samples(samples),
        TrajectoryMeta {
            model: system.model.name().to_string(),
            energy: system.energy,
            config_hash: cfg.hash_hex(),
        },
    )
}

/// Backward integrations produce decreasing parameters; trajectories are
/// stored in increasing order.
pub(crate) fn order_samples(mut samples: Vec<Sample>) -> Vec<Sample> {
    if samples.len() > 1 && samples[0].param > samples[samples.len() - 1].param {
        samples.reverse();
    }
    samples
}

/// Hamilton's characteristic function `W(q, P)` with the integration constant
/// set to zero: `Σ P_μ ln q^μ` for the ideal gas and the log-affine family,
/// `P_u ln(u + a/v) + P_v ln(v − b)` for the van der Waals gas.
pub fn characteristic_w(model: &VielbeinModel, q: &DVector<f64>, charges: &DVector<f64>) -> Result<f64> {
    model.check_admissible(q)?;
    if charges.len() != model.dim() {
        return Err(Error::Domain(format!(
            "charges have dimension {} but the model has dimension {}",
            charges.len(),
            model.dim()
        )));
    }
    match model.family() {
        ModelFamily::Ideal { .. } | ModelFamily::LogAffine => {
            Ok(q.iter().zip(charges.iter()).map(|(x, c)| c * x.ln()).sum())
        }
        ModelFamily::Vdw { a, b, .. } => {
            let (u, v) = (q[0], q[1]);
            Ok(charges[0] * (u + a / v).ln() + charges[1] * (v - b).ln())
        }
        ModelFamily::Custom => Err(model.unsupported("no closed-form characteristic function")),
    }
}

/// Action `S = W(q, P) − E(P) τ`.
pub fn action(model: &VielbeinModel, q: &DVector<f64>, charges: &DVector<f64>, tau: f64) -> Result<f64> {
    Ok(characteristic_w(model, q, charges)? - model.energy_for(charges) * tau)
}

/// Generating function `G = S(q, P, τ) − S(q₀, P, τ₀)`.
pub fn generating_g(
    model: &VielbeinModel,
    charges: &DVector<f64>,
    q: &DVector<f64>,
    tau: f64,
    q0: &DVector<f64>,
    tau0: f64,
) -> Result<f64> {
    Ok(action(model, q, charges, tau)? - action(model, q0, charges, tau0)?)
}
