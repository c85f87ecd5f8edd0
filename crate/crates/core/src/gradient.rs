//! Gradient flows `dθ/dt = −θ` and `dq/dt = g^{μν} ∂s/∂q^ν`, their
//! reparametrization onto Hamilton flows by `dτ = E dt`, and the
//! temperature-time dictionary `T(t) = T₀ eᵗ`, `β = e^{−t} + C`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry;
use crate::hamilton::order_samples;
use crate::integrate::{integrate, left_domain, IntegratorConfig};
use crate::models::VielbeinModel;
use crate::trajectory::{ParameterKind, Sample, Trajectory, TrajectoryMeta};

/// `dθ/dt = −θ`.
pub fn theta_flow_rhs(theta: &DVector<f64>) -> DVector<f64> {
    -theta
}

/// `dq/dt = g^{μν}(q) ∂s/∂q^ν`.
pub fn eta_flow_rhs(model: &VielbeinModel, q: &DVector<f64>) -> Result<DVector<f64>> {
    let metric = model.metric(q)?;
    let grad = model.entropy_gradient(q)?;
    Ok(&metric.g_inv * grad)
}

/// Integrates the η-flow over `t_span`. Samples carry the on-shell momenta and
/// their eikonal residuals.
pub fn integrate_gradient_flow(
    model: &VielbeinModel,
    q0: &DVector<f64>,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    model.check_admissible(q0)?;
    eta_flow_rhs(model, q0)?;
    let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        Ok(eta_flow_rhs(model, &DVector::from_column_slice(y))?.as_slice().to_vec())
    };
    let raw = integrate(rhs, q0.as_slice(), t_span, cfg)?;
    let samples = raw
        .into_iter()
        .map(|(t, y)| {
            let checked = |e| left_domain(e, t, &y);
            let state = model.on_shell_state(DVector::from_column_slice(&y)).map_err(checked)?;
            let metric = model.metric(&state.q).map_err(checked)?;
            let eikonal_residual = geometry::eikonal_residual(&metric, &state.p, model.energy());
            Ok(Sample {
                param: t,
                state,
                eikonal_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(
        ParameterKind::T,
        order_samples(samples),
        TrajectoryMeta {
            model: model.name().to_string(),
            energy: model.energy(),
            config_hash: cfg.hash_hex(),
        },
    )
}

/// Maps a `t` trajectory to `τ = E t` or a `τ` trajectory to `t = τ/E`.
/// Samples are unchanged.
pub fn reparametrize(traj: &Trajectory, energy: f64) -> Result<Trajectory> {
    if !(energy.is_finite() && energy > 0.0) {
        return Err(Error::Domain(format!("energy must be positive, got {energy}")));
    }
    let (kind, scale) = match traj.kind() {
        ParameterKind::T => (ParameterKind::Tau, energy),
        ParameterKind::Tau => (ParameterKind::T, 1.0 / energy),
    };
    let samples = traj
        .iter()
        .map(|s| Sample {
            param: s.param * scale,
            ..s.clone()
        })
        .collect();
    Trajectory::new(kind, samples, traj.meta().clone())
}

/// `T(t) = T₀ eᵗ`.
pub fn temperature_of_t(t0: f64, t: f64) -> Result<f64> {
    if !(t0 > 0.0) {
        return Err(Error::Domain(format!("initial temperature must be positive, got {t0}")));
    }
    Ok(t0 * t.exp())
}

/// `t = −ln β`.
pub fn t_of_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("β must be positive, got {beta}")));
    }
    Ok(-beta.ln())
}

/// `β(t) = e^{−t} + C`.
pub fn beta_of_t(t: f64, c: f64) -> f64 {
    (-t).exp() + c
}
