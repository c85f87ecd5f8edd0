//! Named invariant checks assembled into a deterministic report.
//!
//! Each check measures a nonnegative residual and passes when it does not
//! exceed its tolerance. Checks that do not apply to a model (for example the
//! Mathieu conjugacy for an ideal gas, or closed-form comparisons for custom
//! vielbeins) are left out of the report rather than marked as passing.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::{
    average_energy, canonical_distribution, canonical_flow_residual, closed_form_q,
    gompertz, integrate_discrete_flow, kl_divergence, log_partition, unnormalized_flow,
    DiscreteEnsemble, FlowEndpoints,
};
use crate::error::{Error, Result};
use crate::geometry::{self, default_fd_steps, mixed_partials, ruppeiner_metric};
use crate::gradient::{integrate_gradient_flow, reparametrize};
use crate::hamilton::{characteristic_w, generating_g, integrate_hamilton, HamiltonSystem};
use crate::integrate::IntegratorConfig;
use crate::models::{mathieu_forward, ModelFamily, PhaseState, VielbeinModel};
use crate::trajectory::Trajectory;

/// Per-check tolerances. Missing keys in a tolerance file take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub metric_identity: f64,
    pub eikonal: f64,
    pub ruppeiner: f64,
    pub hessian_symmetry: f64,
    pub arc_length: f64,
    pub closed_form_ideal: f64,
    pub closed_form_vdw: f64,
    pub energy_drift: f64,
    pub charge_conservation: f64,
    pub null_lagrangian: f64,
    pub unit_speed: f64,
    pub momentum_reconstruction: f64,
    pub dw_e_dtau: f64,
    pub generating_function: f64,
    pub flow_equivalence: f64,
    pub theta_linearity: f64,
    pub entropy_rate: f64,
    pub pressure_constant: f64,
    pub pressure_rate: f64,
    pub mathieu_conjugacy: f64,
    pub one_form: f64,
    pub legendre: f64,
    pub temperature: f64,
    pub reversibility: f64,
    pub discrete_closed_form: f64,
    pub normalization: f64,
    pub kl_monotone: f64,
    pub association: f64,
    pub canonical_residual: f64,
    pub gompertz: f64,
    pub gompertz_rule: f64,
    pub average_energy: f64,
    pub potential_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            metric_identity: 1e-10,
            eikonal: 1e-10,
            ruppeiner: 1e-5,
            hessian_symmetry: 1e-5,
            arc_length: 1e-4,
            closed_form_ideal: 1e-8,
            closed_form_vdw: 1e-7,
            energy_drift: 1e-8,
            charge_conservation: 1e-8,
            null_lagrangian: 1e-10,
            unit_speed: 1e-8,
            momentum_reconstruction: 1e-8,
            dw_e_dtau: 1e-8,
            generating_function: 1e-8,
            flow_equivalence: 1e-6,
            theta_linearity: 1e-7,
            entropy_rate: 1e-6,
            pressure_constant: 1e-6,
            pressure_rate: 1e-4,
            mathieu_conjugacy: 1e-6,
            one_form: 1e-8,
            legendre: 1e-10,
            temperature: 1e-8,
            reversibility: 1e-7,
            discrete_closed_form: 1e-6,
            normalization: 1e-10,
            kl_monotone: 0.0,
            association: 1e-10,
            canonical_residual: 1e-10,
            gompertz: 1e-12,
            gompertz_rule: 1e-8,
            average_energy: 1e-6,
            potential_identity: 1e-10,
        }
    }
}

impl Tolerances {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("tolerances: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Geometry,
    Flows,
    Discrete,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "geometry" => Ok(Suite::Geometry),
            "flows" => Ok(Suite::Flows),
            "discrete" => Ok(Suite::Discrete),
            other => Err(Error::Config(format!(
                "unknown suite '{other}' (expected all, geometry, flows or discrete)"
            ))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::All => "all",
            Suite::Geometry => "geometry",
            Suite::Flows => "flows",
            Suite::Discrete => "discrete",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The identity being tested, as a formula.
    pub anchor: String,
    /// `null` in JSON when the check could not be evaluated.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Summary {
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub summary: Summary,
    pub config: serde_json::Value,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.summary.passed == self.summary.total
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub suite: Suite,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            suite: Suite::All,
            tolerances: Tolerances::default(),
            seed: 42,
        }
    }
}

/// Number of random states used by pointwise geometry checks.
const RANDOM_STATES: usize = 20;

/// Mock-time horizon, in units of `t`, of the flow checks.
const FLOW_T: f64 = 3.0;

/// Gradient-flow output step; Hamilton output uses `E` times this.
const OUTPUT_DT: f64 = 0.01;

struct Collector {
    checks: Vec<Check>,
}

impl Collector {
    fn push(&mut self, name: &str, anchor: &str, tolerance: f64, residual: Result<f64>) {
        let residual = match residual {
            Ok(r) => r,
            Err(e) => {
                log::warn!("check {name} could not be evaluated: {e}");
                f64::NAN
            }
        };
        self.checks.push(Check {
            name: name.to_string(),
            anchor: anchor.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        });
    }
}

fn sup<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x) })
}

fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    sup(a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)))
}

/// Runs the selected suite against `model`. `config` is echoed into the report.
pub fn run_verification(
    model: &VielbeinModel,
    config: serde_json::Value,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let mut c = Collector { checks: Vec::new() };
    let tol = &opts.tolerances;
    if opts.suite.includes(Suite::Geometry) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let states = random_states(model, &mut rng, RANDOM_STATES)?;
        geometry_checks(model, &states, tol, &mut c);
    }
    if opts.suite.includes(Suite::Flows) {
        flow_checks(model, tol, &mut c)?;
    }
    if opts.suite.includes(Suite::Discrete) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
        discrete_checks(&mut rng, tol, &mut c);
    }
    let mut checks = c.checks;
    checks.sort_by(|a, b| a.name.cmp(&b.name));
    let passed = checks.iter().filter(|c| c.pass).count();
    let total = checks.len();
    let config = serde_json::json!({
        "model": config,
        "suite": opts.suite,
        "seed": opts.seed,
        "tolerances": tol,
    });
    Ok(VerificationReport {
        checks,
        summary: Summary { passed, total },
        config,
    })
}

/// Admissible states spread over a box around the reference state.
pub fn random_states(model: &VielbeinModel, rng: &mut ChaCha8Rng, count: usize) -> Result<Vec<DVector<f64>>> {
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count {
            return Err(Error::Config(format!(
                "could not sample admissible states for model '{}'",
                model.name()
            )));
        }
        let q = match model.family() {
            ModelFamily::Ideal { .. } | ModelFamily::LogAffine => {
                DVector::from_fn(model.dim(), |_, _| rng.gen_range(0.5..5.0))
            }
            ModelFamily::Vdw { a, b, .. } => {
                let v = b + rng.gen_range(0.2..5.0);
                let ut = rng.gen_range(0.5..5.0);
                DVector::from_vec(vec![ut - a / v, v])
            }
            ModelFamily::Custom => model
                .reference_state()
                .map(|x| x * rng.gen_range(0.8..1.25)),
        };
        if model.metric(&q).is_ok() {
            out.push(q);
        }
    }
    Ok(out)
}

fn geometry_checks(model: &VielbeinModel, states: &[DVector<f64>], tol: &Tolerances, c: &mut Collector) {
    let n = model.dim();
    c.push(
        "geometry.metric_identity",
        "g_{μν} g^{νρ} = δ_μ^ρ",
        tol.metric_identity,
        (|| {
            let mut worst = 0.0f64;
            for q in states {
                let m = model.metric(q)?;
                worst = worst.max((&m.g * &m.g_inv - DMatrix::identity(n, n)).amax());
            }
            Ok(worst)
        })(),
    );
    c.push(
        "geometry.eikonal",
        "g^{μν} p_μ p_ν = E²",
        tol.eikonal,
        (|| {
            let mut worst = 0.0f64;
            for q in states {
                let s = model.on_shell_state(q.clone())?;
                let m = model.metric(q)?;
                let r = geometry::eikonal_residual(&m, &s.p, model.energy());
                worst = worst.max(r.abs() / model.energy().powi(2));
            }
            Ok(worst)
        })(),
    );
    let has_entropy = model.entropy(model.reference_state()).is_ok();
    if has_entropy {
        let entropy = model.entropy_function();
        c.push(
            "geometry.hessian_symmetry",
            "∂²s/∂q^μ∂q^ν = ∂²s/∂q^ν∂q^μ",
            tol.hessian_symmetry,
            (|| {
                let mut worst = 0.0f64;
                for q in states {
                    let h = default_fd_steps(q);
                    for mu in 0..n {
                        for nu in 0..mu {
                            let (a, b) = mixed_partials(&entropy, q, mu, nu, &h)?;
                            worst = worst.max((a - b).abs());
                        }
                    }
                }
                Ok(worst)
            })(),
        );
    }
    let diagonal = matches!(model.family(), ModelFamily::Ideal { .. } | ModelFamily::LogAffine);
    if diagonal && model.is_constant_pressure() {
        let entropy = model.entropy_function();
        c.push(
            "geometry.ruppeiner",
            "−∂²s/∂q^μ∂q^ν = g_{μν}",
            tol.ruppeiner,
            (|| {
                let mut worst = 0.0f64;
                for q in states {
                    let r = ruppeiner_metric(&entropy, q, None)?;
                    let g = model.metric(q)?.g;
                    let scale = g.amax().max(1.0);
                    worst = worst.max((r - g).amax() / scale);
                }
                Ok(worst)
            })(),
        );
    }
    if diagonal {
        c.push(
            "geometry.legendre",
            "Ψ(θ) + Ψ*(η) − θ·η = 0",
            tol.legendre,
            (|| {
                let mut worst = 0.0f64;
                for q in states {
                    let s = model.on_shell_state(q.clone())?;
                    let theta = s.theta();
                    let r = model.theta_potential(&theta)? + model.eta_potential(q)? - theta.dot(q);
                    worst = worst.max(r.abs());
                }
                Ok(worst)
            })(),
        );
    }
    if let ModelFamily::Vdw { a, b, .. } = model.family() {
        c.push(
            "geometry.one_form",
            "p·dq = p̃·dq̃",
            tol.one_form,
            (|| {
                let mut worst = 0.0f64;
                for (k, q) in states.iter().enumerate() {
                    let s = model.on_shell_state(q.clone())?;
                    let dir = &states[(k + 1) % states.len()] - q;
                    let dq = dir * (0.01 / q.amax().max(1.0));
                    worst = worst.max(one_form_defect(a, b, &s, &dq)?);
                }
                Ok(worst)
            })(),
        );
    }
}

/// `|p·Δq − p̃·Δq̃|` with `Δq̃` the image of `Δq` under the Jacobian of the
/// Mathieu map, estimated by a central difference.
pub fn one_form_defect(a: f64, b: f64, state: &PhaseState, dq: &DVector<f64>) -> Result<f64> {
    let eps = 1e-4;
    let image = |q: DVector<f64>| -> Result<DVector<f64>> {
        Ok(mathieu_forward(a, b, &PhaseState::new(q, state.p.clone()))?.q)
    };
    let dq_tilde = (image(&state.q + dq * eps)? - image(&state.q - dq * eps)?) / (2.0 * eps);
    let tilde = mathieu_forward(a, b, state)?;
    Ok((state.p.dot(dq) - tilde.p.dot(&dq_tilde)).abs())
}

struct FlowRuns {
    hamilton: Trajectory,
    gradient: Trajectory,
}

fn run_flows(model: &VielbeinModel) -> Result<FlowRuns> {
    let e = model.energy();
    let q0 = model.reference_state().clone();
    let system = HamiltonSystem::new(model.clone());
    let state0 = model.on_shell_state(q0.clone())?;
    let hamilton = integrate_hamilton(
        &system,
        &state0,
        (0.0, FLOW_T * e),
        &IntegratorConfig::rk4(system.default_step(), OUTPUT_DT * e),
    )?;
    let gradient = integrate_gradient_flow(
        model,
        &q0,
        (0.0, FLOW_T),
        &IntegratorConfig::rk4(1e-3, OUTPUT_DT),
    )?;
    Ok(FlowRuns { hamilton, gradient })
}

fn flow_checks(model: &VielbeinModel, tol: &Tolerances, c: &mut Collector) -> Result<()> {
    let runs = match run_flows(model) {
        Ok(r) => r,
        Err(e @ Error::Integration { .. }) | Err(e @ Error::Domain(_)) => {
            c.push("flows.integration", "flows integrate over the test horizon", 0.0, Err(e));
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    let ham = &runs.hamilton;
    let grad = &runs.gradient;
    let e = model.energy();
    let system = HamiltonSystem::new(model.clone());
    let built_in = model.family() != ModelFamily::Custom;
    let has_entropy = model.entropy(model.reference_state()).is_ok();
    let q0 = model.reference_state().clone();

    if built_in {
        let (name_tol, anchor) = match model.family() {
            ModelFamily::Vdw { .. } => (tol.closed_form_vdw, "ṽ(τ) = ṽ₀ exp(P_v τ/(β² E)), ũ(τ) = ũ₀ exp(P_u τ/(α² E))"),
            _ => (tol.closed_form_ideal, "q^μ(τ) = q₀^μ exp(P_μ τ/(η_μ E))"),
        };
        c.push(
            "flows.closed_form",
            anchor,
            name_tol,
            (|| {
                let mut worst = 0.0f64;
                for s in ham {
                    let exact = model.closed_form_state(&q0, s.param)?;
                    worst = worst.max(rel_diff(&s.state.q, &exact));
                }
                Ok(worst)
            })(),
        );
    }
    c.push(
        "flows.energy_drift",
        "H(q(τ), p(τ)) = E",
        tol.energy_drift,
        (|| {
            let mut worst = 0.0f64;
            for s in ham {
                worst = worst.max((system.hamiltonian(&s.state)? - e).abs() / e);
            }
            Ok(worst)
        })(),
    );
    c.push(
        "flows.charge_conservation",
        "e_i^μ(q) p_μ = r_i",
        tol.charge_conservation,
        Ok(sup(ham.iter().map(|s| model.charge_residual(&s.state)))),
    );
    c.push(
        "flows.null_lagrangian",
        "p_μ dq^μ/dτ − H = 0",
        tol.null_lagrangian,
        (|| {
            let mut worst = 0.0f64;
            for s in ham {
                let (dq, _) = system.hamilton_rhs(&s.state)?;
                worst = worst.max((s.state.p.dot(&dq) - system.hamiltonian(&s.state)?).abs());
            }
            Ok(worst)
        })(),
    );
    c.push(
        "flows.unit_speed",
        "g_{μν} (dq^μ/dτ)(dq^ν/dτ) = 1",
        tol.unit_speed,
        (|| {
            let mut worst = 0.0f64;
            for s in ham {
                let (dq, _) = system.hamilton_rhs(&s.state)?;
                worst = worst.max((model.metric(&s.state.q)?.norm_sq(&dq) - 1.0).abs());
            }
            Ok(worst)
        })(),
    );
    c.push(
        "flows.arc_length",
        "∫ √(g_{μν} dq^μ dq^ν) = Δτ",
        tol.arc_length,
        (|| {
            // The chord-midpoint quadrature needs a finer grid than the output step.
            let h = system.default_step();
            let fine = integrate_hamilton(&system, &ham.first().state, (0.0, e), &IntegratorConfig::rk4(h, h))?;
            let len = geometry::arc_length(&fine, |q| model.metric(q))?;
            Ok((len - e).abs())
        })(),
    );
    if built_in {
        let charges = model.charges().clone();
        c.push(
            "flows.momentum_reconstruction",
            "p_μ = ∂W/∂q^μ",
            tol.momentum_reconstruction,
            (|| {
                let mut worst = 0.0f64;
                for s in ham {
                    let q = &s.state.q;
                    for mu in 0..q.len() {
                        let h = 1e-5 * q[mu].abs().max(1.0);
                        let mut plus = q.clone();
                        let mut minus = q.clone();
                        plus[mu] += h;
                        minus[mu] -= h;
                        let fd = (characteristic_w(model, &plus, &charges)?
                            - characteristic_w(model, &minus, &charges)?)
                            / (2.0 * h);
                        worst = worst.max((fd - s.state.p[mu]).abs() / s.state.p[mu].abs().max(1.0));
                    }
                }
                Ok(worst)
            })(),
        );
        c.push(
            "flows.dw_e_dtau",
            "dW = E dτ",
            tol.dw_e_dtau,
            (|| {
                let w0 = characteristic_w(model, &ham.first().state.q, &charges)?;
                let mut worst = 0.0f64;
                for s in ham {
                    let dw = characteristic_w(model, &s.state.q, &charges)? - w0;
                    worst = worst.max((dw - e * (s.param - ham.first().param)).abs());
                }
                Ok(worst)
            })(),
        );
        c.push(
            "flows.generating_function",
            "∂G/∂P_i = 0",
            tol.generating_function,
            (|| {
                let end = ham.last();
                let tau0 = ham.first().param;
                let mut worst = 0.0f64;
                for i in 0..charges.len() {
                    let h = 1e-6 * charges[i].abs().max(1.0);
                    let mut plus = charges.clone();
                    let mut minus = charges.clone();
                    plus[i] += h;
                    minus[i] -= h;
                    let d = (generating_g(model, &plus, &end.state.q, end.param, &q0, tau0)?
                        - generating_g(model, &minus, &end.state.q, end.param, &q0, tau0)?)
                        / (2.0 * h);
                    worst = worst.max(d.abs());
                }
                Ok(worst)
            })(),
        );
    }
    if has_entropy {
        c.push(
            "flows.flow_equivalence",
            "dτ = E dt",
            tol.flow_equivalence,
            (|| {
                let mapped = reparametrize(grad, e)?;
                if mapped.len() != ham.len() {
                    return Err(Error::Domain("gradient and Hamilton samples do not align".into()));
                }
                let mut worst = 0.0f64;
                for (a, b) in mapped.iter().zip(ham.iter()) {
                    worst = worst.max(rel_diff(&a.state.q, &b.state.q));
                }
                Ok(worst)
            })(),
        );
        c.push(
            "flows.entropy_rate_t",
            "ds = E² dt",
            tol.entropy_rate,
            (|| {
                let s0 = model.entropy(&grad.first().state.q)?;
                let mut worst = 0.0f64;
                for s in grad {
                    let ds = model.entropy(&s.state.q)? - s0;
                    worst = worst.max((ds - e * e * (s.param - grad.first().param)).abs());
                }
                Ok(worst)
            })(),
        );
        c.push(
            "flows.entropy_rate_tau",
            "ds = E dτ",
            tol.entropy_rate,
            (|| {
                let s0 = model.entropy(&ham.first().state.q)?;
                let mut worst = 0.0f64;
                for s in ham {
                    let ds = model.entropy(&s.state.q)? - s0;
                    worst = worst.max((ds - e * (s.param - ham.first().param)).abs());
                }
                Ok(worst)
            })(),
        );
    }
    if built_in && model.is_constant_pressure() {
        c.push(
            "flows.theta_linearity",
            "θ(t) = θ(0) e^{−t}",
            tol.theta_linearity,
            (|| {
                let theta = |s: &PhaseState| -> Result<DVector<f64>> {
                    match model.family() {
                        ModelFamily::Vdw { a, b, .. } => Ok(mathieu_forward(a, b, s)?.theta()),
                        _ => Ok(s.theta()),
                    }
                };
                let th0 = theta(&grad.first().state)?;
                let mut worst = 0.0f64;
                for s in grad {
                    let expected = &th0 * (-(s.param - grad.first().param)).exp();
                    let th = theta(&s.state)?;
                    worst = worst.max(sup(th.iter().zip(expected.iter()).map(|(x, y)| (x - y).abs() / y.abs())));
                }
                Ok(worst)
            })(),
        );
        c.push(
            "flows.temperature",
            "dt = d ln T",
            tol.temperature,
            (|| {
                let ln_t0 = grad.first().state.temperature().ln();
                Ok(sup(grad.iter().map(|s| {
                    (s.state.temperature().ln() - ln_t0 - (s.param - grad.first().param)).abs()
                })))
            })(),
        );
    }
    if built_in && model.dim() == 2 {
        if model.is_constant_pressure() {
            c.push(
                "flows.pressure_constant",
                "d(P + a/v²)/dτ = 0",
                tol.pressure_constant,
                (|| {
                    let p0 = model.effective_pressure(&ham.first().state)?;
                    let mut worst = 0.0f64;
                    for s in ham {
                        worst = worst.max((model.effective_pressure(&s.state)? - p0).abs() / p0.abs());
                    }
                    Ok(worst)
                })(),
            );
        } else {
            c.push(
                "flows.pressure_rate",
                "dP/dτ = (P/E)(P_u/α² − P_v/β²)",
                tol.pressure_rate,
                (|| {
                    let samples = ham.samples();
                    let mut worst = 0.0f64;
                    for w in samples.windows(3) {
                        let fd = (model.effective_pressure(&w[2].state)? - model.effective_pressure(&w[0].state)?)
                            / (w[2].param - w[0].param);
                        let exact = model.pressure_drift(&w[1].state)?;
                        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
                    }
                    Ok(worst)
                })(),
            );
        }
    }
    if let ModelFamily::Vdw { a, b, .. } = model.family() {
        c.push(
            "flows.mathieu_conjugacy",
            "(ũ, ṽ)(τ) follows the ideal-gas flow",
            tol.mathieu_conjugacy,
            (|| {
                let ideal = model.eta().lower_entries();
                let rates = DVector::from_fn(2, |i, _| model.charges()[i] / (ideal[i] * e));
                let start = mathieu_forward(a, b, &ham.first().state)?.q;
                let mut worst = 0.0f64;
                for s in ham {
                    let tq = mathieu_forward(a, b, &s.state)?.q;
                    let dt = s.param - ham.first().param;
                    let exact = start.zip_map(&rates, |x, r| x * (r * dt).exp());
                    worst = worst.max(rel_diff(&tq, &exact));
                }
                Ok(worst)
            })(),
        );
        c.push(
            "flows.one_form",
            "p·dq = p̃·dq̃",
            tol.one_form,
            (|| {
                let mut worst = 0.0f64;
                for w in ham.samples().windows(2) {
                    let dq = &w[1].state.q - &w[0].state.q;
                    worst = worst.max(one_form_defect(a, b, &w[0].state, &dq)?);
                }
                Ok(worst)
            })(),
        );
    }
    c.push(
        "flows.reversibility",
        "backward integration returns to the start",
        tol.reversibility,
        (|| {
            let cfg = IntegratorConfig::rk4(system.default_step(), OUTPUT_DT * e);
            let end = ham.last();
            let back = integrate_hamilton(&system, &end.state, (end.param, ham.first().param), &cfg)?;
            let start = &ham.first().state;
            let r = back.first();
            Ok(rel_diff(&r.state.q, &start.q).max(rel_diff(&r.state.p, &start.p)))
        })(),
    );
    Ok(())
}

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

fn random_levels(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = rng.gen_range(2..=8);
    let mut levels: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
    levels.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    levels
}

fn t_grid() -> impl Iterator<Item = f64> {
    (0..=50).map(|k| 0.1 * k as f64)
}

fn discrete_checks(rng: &mut ChaCha8Rng, tol: &Tolerances, c: &mut Collector) {
    let pairs: Vec<FlowEndpoints> = (0..10)
        .map(|_| {
            let n = rng.gen_range(2..=8);
            FlowEndpoints::new(&random_distribution(rng, n), &random_distribution(rng, n))
                .expect("random distributions are valid")
        })
        .collect();
    let level_sets: Vec<Vec<f64>> = (0..5).map(|_| random_levels(rng)).collect();

    let runs: Result<Vec<Vec<(f64, DVector<f64>)>>> = pairs
        .iter()
        .map(|ep| integrate_discrete_flow(ep, (0.0, 5.0), &IntegratorConfig::rk4(1e-3, 0.05)))
        .collect();
    let runs = runs.map_err(|e| e.to_string());
    let from_runs = |f: &dyn Fn(&FlowEndpoints, &[(f64, DVector<f64>)]) -> Result<f64>| -> Result<f64> {
        let runs = runs.as_ref().map_err(|e| Error::Integration {
            message: e.clone(),
            last: None,
        })?;
        let mut worst = 0.0f64;
        for (ep, run) in pairs.iter().zip(runs) {
            worst = worst.max(f(ep, run)?);
        }
        Ok(worst)
    };
    c.push(
        "discrete.closed_form",
        "q(t) ∝ exp(e^{−t} ln q₀ + (1 − e^{−t}) ln q₂)",
        tol.discrete_closed_form,
        from_runs(&|ep, run| Ok(sup(run.iter().map(|(t, q)| (q - closed_form_q(*t, ep)).amax())))),
    );
    c.push(
        "discrete.normalization",
        "Σ q_i(t) = 1",
        tol.normalization,
        from_runs(&|_, run| Ok(sup(run.iter().map(|(_, q)| (q.sum() - 1.0).abs())))),
    );
    c.push(
        "discrete.kl_monotone",
        "dD(q‖q₂)/dt ≤ 0",
        tol.kl_monotone,
        from_runs(&|ep, run| {
            let d: Vec<f64> = run
                .iter()
                .map(|(_, q)| kl_divergence(q, ep.q2()))
                .collect::<Result<_>>()?;
            Ok(sup(d.windows(2).map(|w| (w[1] - w[0]).max(0.0))))
        }),
    );
    c.push(
        "discrete.association",
        "p(β = e^{−t}) = q(t) with q₀ = p(β = 1), q₂ = 1/N",
        tol.association,
        (|| {
            let mut worst = 0.0f64;
            for levels in &level_sets {
                let n = levels.len();
                let q0 = canonical_distribution(levels, 1.0)?;
                let ep = FlowEndpoints::new(q0.as_slice(), &vec![1.0 / n as f64; n])?;
                for t in t_grid() {
                    let p = canonical_distribution(levels, (-t).exp())?;
                    worst = worst.max((p - closed_form_q(t, &ep)).amax());
                }
            }
            Ok(worst)
        })(),
    );
    c.push(
        "discrete.canonical_residual",
        "d/dt ln(p_i/p₀) = −[ln(p_i/p₀) − Σ p_j ln(p_j/p₀)]",
        tol.canonical_residual,
        (|| {
            let mut worst = 0.0f64;
            for levels in &level_sets {
                for t in t_grid() {
                    worst = worst.max(canonical_flow_residual(levels, t)?.amax());
                }
            }
            Ok(worst)
        })(),
    );
    c.push(
        "discrete.gompertz",
        "Q(t) = K exp(c e^{−t})",
        tol.gompertz,
        (|| {
            let mut worst = 0.0f64;
            for ep in &pairs {
                for t in t_grid() {
                    let q = unnormalized_flow(t, ep);
                    for i in 0..ep.len() {
                        let (k, c0) = (ep.q2()[i], (ep.q0()[i] / ep.q2()[i]).ln());
                        worst = worst.max((q[i] - gompertz(t, k, c0)?).abs());
                    }
                }
            }
            Ok(worst)
        })(),
    );
    c.push(
        "discrete.gompertz_rule",
        "d ln Q/dt = −ln(Q/K)",
        tol.gompertz_rule,
        (|| {
            let h = 1e-5;
            let mut worst = 0.0f64;
            for ep in &pairs {
                for t in t_grid() {
                    let lp = unnormalized_flow(t + h, ep).map(f64::ln);
                    let lm = unnormalized_flow(t - h, ep).map(f64::ln);
                    let q = unnormalized_flow(t, ep);
                    for i in 0..ep.len() {
                        let fd = (lp[i] - lm[i]) / (2.0 * h);
                        worst = worst.max((fd + (q[i] / ep.q2()[i]).ln()).abs());
                    }
                }
            }
            Ok(worst)
        })(),
    );
    c.push(
        "discrete.average_energy",
        "U = −d ln Z/dβ",
        tol.average_energy,
        (|| {
            let h = 1e-4;
            let mut worst = 0.0f64;
            for levels in &level_sets {
                for beta in [0.1, 0.5, 1.0, 2.0] {
                    let fd = -(log_partition(levels, beta + h)? - log_partition(levels, beta - h)?) / (2.0 * h);
                    worst = worst.max((fd - average_energy(levels, beta)?).abs());
                }
            }
            Ok(worst)
        })(),
    );
    c.push(
        "discrete.potential_identity",
        "Σ p ln p = −βU − ln Z",
        tol.potential_identity,
        (|| {
            let mut worst = 0.0f64;
            for levels in &level_sets {
                for beta in [0.0, 0.1, 0.5, 1.0, 2.0, 10.0] {
                    let ens = DiscreteEnsemble::canonical(levels, beta)?;
                    let r = ens.neg_entropy() + beta * ens.average_energy() + ens.log_partition();
                    worst = worst.max(r.abs());
                }
            }
            Ok(worst)
        })(),
    );
}
