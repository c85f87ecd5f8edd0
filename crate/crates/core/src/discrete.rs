//! Canonical ensembles on a finite set of energy levels and the KL gradient
//! flow `d/dt ln(q/q₂) = −ln(q/q₂) + D(q‖q₂)`.
//!
//! The flow has the closed-form solution
//! `q(t) ∝ exp(e^{−t} ln q₀ + (1 − e^{−t}) ln q₂)`, whose unnormalized form
//! `Q(t) = q₂ exp(ln(q₀/q₂) e^{−t})` is a Gompertz function. Canonical
//! distributions at coldness `β = e^{−t}` trace the same curve with
//! `q₀ = p(β = 1)` and `q₂` uniform. All probability arithmetic is done in log
//! space with a max shift.

use log::warn;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::fmt_vec;
use crate::integrate::{integrate, IntegratorConfig};

/// Probabilities below this are treated as underflow.
pub const MIN_PROB: f64 = 1e-300;

/// Allowed drift of `Σ q_i` from 1 during an integration.
pub const NORMALIZATION_GUARD: f64 = 1e-8;

fn check_levels(levels: &[f64], beta: f64) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::Config("energy levels must not be empty".into()));
    }
    if levels.iter().any(|e| !e.is_finite()) {
        return Err(Error::Config("energy levels must be finite".into()));
    }
    if !beta.is_finite() {
        return Err(Error::Domain(format!("β must be finite, got {beta}")));
    }
    if beta < 0.0 {
        warn!("negative coldness β = {beta}");
    }
    Ok(())
}

/// `ln Z(β) = ln Σ e^{−β ℰ_i}`.
pub fn log_partition(levels: &[f64], beta: f64) -> Result<f64> {
    check_levels(levels, beta)?;
    let shift = levels.iter().map(|e| -beta * e).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = levels.iter().map(|e| (-beta * e - shift).exp()).sum();
    Ok(shift + sum.ln())
}

pub fn partition_function(levels: &[f64], beta: f64) -> Result<f64> {
    Ok(log_partition(levels, beta)?.exp())
}

/// `p_i = e^{−β ℰ_i}/Z`.
pub fn canonical_distribution(levels: &[f64], beta: f64) -> Result<DVector<f64>> {
    let log_z = log_partition(levels, beta)?;
    Ok(DVector::from_iterator(levels.len(), levels.iter().map(|e| (-beta * e - log_z).exp())))
}

/// `U = Σ p_i ℰ_i`.
pub fn average_energy(levels: &[f64], beta: f64) -> Result<f64> {
    let p = canonical_distribution(levels, beta)?;
    Ok(p.iter().zip(levels).map(|(p, e)| p * e).sum())
}

/// A canonical distribution together with its levels and coldness.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEnsemble {
    pub probs: DVector<f64>,
    pub levels: Vec<f64>,
    pub beta: f64,
}

impl DiscreteEnsemble {
    pub fn canonical(levels: &[f64], beta: f64) -> Result<Self> {
        Ok(Self {
            probs: canonical_distribution(levels, beta)?,
            levels: levels.to_vec(),
            beta,
        })
    }

    pub fn log_partition(&self) -> f64 {
        log_partition(&self.levels, self.beta).expect("levels validated at construction")
    }

    pub fn average_energy(&self) -> f64 {
        self.probs.iter().zip(&self.levels).map(|(p, e)| p * e).sum()
    }

    /// `Σ p_i ln p_i`.
    pub fn neg_entropy(&self) -> f64 {
        self.probs.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum()
    }
}

/// `D(p‖q) = Σ p_i ln(p_i/q_i)`.
pub fn kl_divergence(p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Domain(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let mut d = 0.0;
    for (i, (&a, &b)) in p.iter().zip(q.iter()).enumerate() {
        if (a > 0.0) != (b > 0.0) || a < 0.0 || b < 0.0 {
            return Err(Error::Domain(format!(
                "supports differ at index {i} ({a} vs {b})"
            )));
        }
        if a > 0.0 {
            d += a * (a / b).ln();
        }
    }
    Ok(d.max(0.0))
}

/// Initial and target distributions of the KL flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEndpoints {
    q0: DVector<f64>,
    q2: DVector<f64>,
}

fn validate_distribution(name: &str, q: &[f64]) -> Result<DVector<f64>> {
    if q.is_empty() {
        return Err(Error::Config(format!("{name} must not be empty")));
    }
    if q.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::Config(format!("{name} must be strictly positive")));
    }
    let sum: f64 = q.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("{name} sums to {sum}, not 1")));
    }
    Ok(DVector::from_iterator(q.len(), q.iter().map(|x| x / sum)))
}

impl FlowEndpoints {
    /// Both vectors must be strictly positive and sum to 1 within `1e-9`; they
    /// are renormalized exactly.
    pub fn new(q0: &[f64], q2: &[f64]) -> Result<Self> {
        if q0.len() != q2.len() {
            return Err(Error::Config(format!(
                "q0 has {} entries but q2 has {}",
                q0.len(),
                q2.len()
            )));
        }
        Ok(Self {
            q0: validate_distribution("q0", q0)?,
            q2: validate_distribution("q2", q2)?,
        })
    }

    pub fn q0(&self) -> &DVector<f64> {
        &self.q0
    }

    pub fn q2(&self) -> &DVector<f64> {
        &self.q2
    }

    pub fn len(&self) -> usize {
        self.q0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q0.is_empty()
    }
}

/// `dq_i/dt = q_i (−ln(q_i/q₂_i) + D(q‖q₂))`.
pub fn kl_flow_rhs(q: &DVector<f64>, endpoints: &FlowEndpoints) -> Result<DVector<f64>> {
    let d = kl_divergence(q, &endpoints.q2)?;
    Ok(DVector::from_iterator(
        q.len(),
        q.iter().zip(endpoints.q2.iter()).map(|(a, b)| a * (-(a / b).ln() + d)),
    ))
}

fn closed_form_logs(t: f64, endpoints: &FlowEndpoints) -> DVector<f64> {
    let w = (-t).exp();
    endpoints
        .q0
        .zip_map(&endpoints.q2, |a, b| w * a.ln() + (1.0 - w) * b.ln())
}

fn log_sum_exp(x: &DVector<f64>) -> f64 {
    let m = x.max();
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// The normalization `Ψ(t) = ln Σ_i Q_i(t)`.
pub fn normalization(t: f64, endpoints: &FlowEndpoints) -> f64 {
    log_sum_exp(&closed_form_logs(t, endpoints))
}

/// `q(t) = Q(t) e^{−Ψ(t)}`.
pub fn closed_form_q(t: f64, endpoints: &FlowEndpoints) -> DVector<f64> {
    let logs = closed_form_logs(t, endpoints);
    let psi = log_sum_exp(&logs);
    logs.map(|x| (x - psi).exp())
}

/// `Q(t) = q₂ exp(ln(q₀/q₂) e^{−t})`.
pub fn unnormalized_flow(t: f64, endpoints: &FlowEndpoints) -> DVector<f64> {
    let w = (-t).exp();
    endpoints.q0.zip_map(&endpoints.q2, |a, b| b * ((a / b).ln() * w).exp())
}

/// Integrates the KL flow. Fails with an integration error when a probability
/// underflows [`MIN_PROB`] or the total drifts from 1 by more than
/// [`NORMALIZATION_GUARD`]; the state is never silently renormalized.
pub fn integrate_discrete_flow(
    endpoints: &FlowEndpoints,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, DVector<f64>)>> {
    cfg.validate()?;
    let rhs = |_t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let q = DVector::from_column_slice(y);
        if let Some(i) = q.iter().position(|&x| !(x > MIN_PROB)) {
            return Err(Error::Domain(format!("probability q{} = {:e} underflowed", i + 1, q[i])));
        }
        let sum = q.sum();
        if (sum - 1.0).abs() > NORMALIZATION_GUARD {
            return Err(Error::Domain(format!(
                "normalization drifted to {sum} at {}",
                fmt_vec(&q)
            )));
        }
        Ok(kl_flow_rhs(&q, endpoints)?.as_slice().to_vec())
    };
    let mut out: Vec<_> = integrate(rhs, endpoints.q0.as_slice(), t_span, cfg)?
        .into_iter()
        .map(|(t, y)| (t, DVector::from_vec(y)))
        .collect();
    if out.len() > 1 && out[0].0 > out[out.len() - 1].0 {
        out.reverse();
    }
    Ok(out)
}

/// Residual `LHS − RHS` of
/// `d/dt ln(p_i(e^{−t})/p₀) = −[ln(p_i/p₀) − Σ_j p_j ln(p_j/p₀)]`
/// with `p₀ = 1/N`. The left side is `β(ℰ_i − U)` at `β = e^{−t}`.
pub fn canonical_flow_residual(levels: &[f64], t: f64) -> Result<DVector<f64>> {
    let beta = (-t).exp();
    let p = canonical_distribution(levels, beta)?;
    let u: f64 = p.iter().zip(levels).map(|(p, e)| p * e).sum();
    let log_z = log_partition(levels, beta)?;
    let ln_p0 = -(levels.len() as f64).ln();
    // ln p_i computed directly, without round-tripping through exp.
    let ln_p: Vec<f64> = levels.iter().map(|e| -beta * e - log_z).collect();
    let mean: f64 = p.iter().zip(&ln_p).map(|(p, l)| p * (l - ln_p0)).sum();
    Ok(DVector::from_iterator(
        levels.len(),
        levels.iter().zip(&ln_p).map(|(e, l)| {
            let lhs = beta * (e - u);
            let rhs = -((l - ln_p0) - mean);
            lhs - rhs
        }),
    ))
}

fn check_k(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("Gompertz K must be positive, got {k}")))
    }
}

/// `f(t) = K exp(c e^{−t})`.
pub fn gompertz(t: f64, k: f64, c: f64) -> Result<f64> {
    check_k(k)?;
    Ok(k * (c * (-t).exp()).exp())
}

/// `f′(t) + f ln(f/K)` with `f′ = −c e^{−t} f`.
pub fn gompertz_residual(t: f64, k: f64, c: f64) -> Result<f64> {
    let f = gompertz(t, k, c)?;
    let df = -c * (-t).exp() * f;
    Ok(df + f * (f.ln() - k.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn example() -> FlowEndpoints {
        FlowEndpoints::new(&[0.2, 0.8], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn canonical_examples() {
        let p = canonical_distribution(&[0.0, 1.0, 5.0, -2.0], 0.0).unwrap();
        assert!(p.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let z = partition_function(&[0.0, 1.0], 2f64.ln()).unwrap();
        assert!((z - 1.5).abs() < 1e-15);
        let p = canonical_distribution(&[0.0, 1.0], 2f64.ln()).unwrap();
        assert!((p - dv(&[2.0 / 3.0, 1.0 / 3.0])).amax() < 1e-15);
        let p = canonical_distribution(&[0.0, 1.0, 2.0], 50.0).unwrap();
        assert!(p[0] > 1.0 - 1e-6);
        assert!(matches!(canonical_distribution(&[], 1.0), Err(Error::Config(_))));
        // No overflow at large β with large levels.
        let p = canonical_distribution(&[1e4, 2e4], 10.0).unwrap();
        assert!((p.sum() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn average_energy_examples() {
        assert!((average_energy(&[0.0, 1.0], 2f64.ln()).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((average_energy(&[1.0, 2.0, 6.0], 0.0).unwrap() - 3.0).abs() < 1e-15);
        for beta in [0.0, 0.7, 3.0] {
            assert!((average_energy(&[2.5], beta).unwrap() - 2.5).abs() < 1e-15);
        }
        let levels = [0.0, 0.3, 1.7];
        let h = 1e-4;
        for beta in [0.2, 1.0, 2.5] {
            let fd = -(log_partition(&levels, beta + h).unwrap() - log_partition(&levels, beta - h).unwrap())
                / (2.0 * h);
            assert!((fd - average_energy(&levels, beta).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn kl_examples() {
        let p = dv(&[2.0 / 3.0, 1.0 / 3.0]);
        let q = dv(&[0.5, 0.5]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let oracle = (2.0 / 3.0) * (4.0f64 / 3.0).ln() + (1.0 / 3.0) * (2.0f64 / 3.0).ln();
        let d = kl_divergence(&p, &q).unwrap();
        assert!((d - oracle).abs() < 1e-15);
        assert!((d - 0.056633).abs() < 1e-6);
        assert!(matches!(kl_divergence(&dv(&[1.0, 0.0]), &q), Err(Error::Domain(_))));
        assert!(kl_divergence(&dv(&[1.0]), &q).is_err());
    }

    #[test]
    fn kl_rhs_example_matches_closed_form_derivative() {
        let ep = example();
        let q = ep.q0().clone();
        let rhs = kl_flow_rhs(&q, &ep).unwrap();
        let h = 1e-5;
        let fd = (closed_form_q(h, &ep) - closed_form_q(-h, &ep)) / (2.0 * h);
        assert!((&rhs - &fd).amax() < 1e-9);
        let d = 0.2 * 0.4f64.ln() + 0.8 * 1.6f64.ln();
        assert!((d - 0.192745).abs() < 1e-6);
        assert!((rhs[0] - 0.2 * (-(0.4f64).ln() + d)).abs() < 1e-15);
        assert!(rhs.sum().abs() < 1e-15);
        assert!(kl_flow_rhs(ep.q2(), &ep).unwrap().amax() < 1e-16);
    }

    #[test]
    fn closed_form_examples() {
        let ep = example();
        assert!((closed_form_q(0.0, &ep) - ep.q0()).amax() < 1e-15);
        assert!((closed_form_q(40.0, &ep) - ep.q2()).amax() < 1e-12);
        let q = closed_form_q(2f64.ln(), &ep);
        assert!((q - dv(&[1.0 / 3.0, 2.0 / 3.0])).amax() < 1e-15);
        let big = unnormalized_flow(2f64.ln(), &ep);
        assert!((big - dv(&[0.1f64.sqrt(), 0.4f64.sqrt()])).amax() < 1e-15);
    }

    #[test]
    fn endpoints_validation() {
        assert!(FlowEndpoints::new(&[0.2, 0.8], &[0.5, 0.5]).is_ok());
        assert!(FlowEndpoints::new(&[0.2, 0.7], &[0.5, 0.5]).is_err());
        assert!(FlowEndpoints::new(&[0.0, 1.0], &[0.5, 0.5]).is_err());
        assert!(FlowEndpoints::new(&[0.2, 0.8], &[1.0]).is_err());
        assert!(FlowEndpoints::new(&[], &[]).is_err());
    }

    #[test]
    fn integrated_flow_matches_closed_form() {
        let ep = example();
        let cfg = IntegratorConfig::rk4(1e-3, 2f64.ln() / 100.0);
        let out = integrate_discrete_flow(&ep, (0.0, 5.0), &cfg).unwrap();
        let mut last_d = f64::INFINITY;
        for (t, q) in &out {
            assert!((q - closed_form_q(*t, &ep)).amax() < 1e-6);
            assert!((q.sum() - 1.0).abs() < 1e-10);
            let d = kl_divergence(q, ep.q2()).unwrap();
            assert!(d <= last_d);
            last_d = d;
        }
        let (t, q) = &out[100];
        assert!((t - 2f64.ln()).abs() < 1e-12);
        assert!((q - dv(&[1.0 / 3.0, 2.0 / 3.0])).amax() < 1e-6);

        let same = FlowEndpoints::new(&[0.3, 0.7], &[0.3, 0.7]).unwrap();
        let out = integrate_discrete_flow(&same, (0.0, 1.0), &cfg).unwrap();
        assert!(out.iter().all(|(_, q)| (q - same.q0()).amax() < 1e-15));
    }

    #[test]
    fn underflow_is_reported() {
        // Backward in time q₁ collapses doubly exponentially.
        let ep = FlowEndpoints::new(&[1e-3, 1.0 - 1e-3], &[0.5, 0.5]).unwrap();
        let err = integrate_discrete_flow(&ep, (0.0, -8.0), &IntegratorConfig::rk4(1e-3, 0.1)).unwrap_err();
        assert!(matches!(err, Error::Integration { .. }), "{err}");
    }

    #[test]
    fn canonical_flow_residual_examples() {
        assert!(canonical_flow_residual(&[0.0, 1.0, 2.0], 0.0).unwrap().amax() <= 1e-10);
        let r = canonical_flow_residual(&[1.3, 1.3, 1.3], 0.7).unwrap();
        assert!(r.amax() < 1e-15);
        // Finite-difference oracle for the left side.
        let levels = [0.0, 0.4, 2.0, 3.5];
        let t = 0.6;
        let h = 1e-5;
        let lp = |t: f64| canonical_distribution(&levels, (-t).exp()).unwrap().map(|p| p.ln());
        let fd = (lp(t + h) - lp(t - h)) / (2.0 * h);
        let p = canonical_distribution(&levels, (-t).exp()).unwrap();
        let p0 = 0.25f64;
        let mean: f64 = p.iter().map(|x| x * (x / p0).ln()).sum();
        for i in 0..4 {
            let rhs = -((p[i] / p0).ln() - mean);
            assert!((fd[i] - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn association_with_canonical_distribution() {
        let levels = [0.0, 0.5, 1.1, 2.0];
        let q0 = canonical_distribution(&levels, 1.0).unwrap();
        let uniform = vec![0.25; 4];
        let ep = FlowEndpoints::new(q0.as_slice(), &uniform).unwrap();
        for t in [0.0f64, 0.3, 1.0, 4.0] {
            let a = canonical_distribution(&levels, (-t).exp()).unwrap();
            assert!((a - closed_form_q(t, &ep)).amax() < 1e-10);
        }
    }

    #[test]
    fn gompertz_examples() {
        assert!((gompertz(40.0, 0.5, 3.0).unwrap() - 0.5).abs() < 1e-12);
        for t in [0.0, 1.0, 5.0] {
            assert_eq!(gompertz(t, 2.0, 0.0).unwrap(), 2.0);
            assert_eq!(gompertz_residual(t, 2.0, 0.0).unwrap(), 0.0);
        }
        assert!(gompertz(0.0, 0.0, 1.0).is_err());
        let ep = FlowEndpoints::new(&[0.2, 0.8], &[0.5, 0.5]).unwrap();
        for i in 0..=50 {
            let t = 0.1 * i as f64;
            let q = unnormalized_flow(t, &ep);
            let g = gompertz(t, 0.5, 0.4f64.ln()).unwrap();
            assert!((q[0] - g).abs() < 1e-12);
            let via_psi = closed_form_q(t, &ep) * normalization(t, &ep).exp();
            assert!((via_psi - &q).amax() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn gibbs_inequality(a in proptest::collection::vec(0.01f64..1.0, 2..8), seed in 0.01f64..1.0) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| (x * 7.3 + seed * (i as f64 + 1.0)).fract() + 0.01).collect();
            let p = DVector::from_vec(a.clone()) / a.iter().sum::<f64>();
            let q = DVector::from_vec(b.clone()) / b.iter().sum::<f64>();
            let d = kl_divergence(&p, &q).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(kl_flow_rhs(&p, &FlowEndpoints::new(p.as_slice(), q.as_slice()).unwrap()).unwrap().sum().abs() < 1e-14);
        }

        #[test]
        fn potential_identity(levels in proptest::collection::vec(-3.0f64..3.0, 1..8), beta in 0.0f64..4.0) {
            let ens = DiscreteEnsemble::canonical(&levels, beta).unwrap();
            let lhs = ens.neg_entropy();
            let rhs = -beta * ens.average_energy() - ens.log_partition();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn gompertz_residual_vanishes(t in -2.0f64..10.0, k in 0.01f64..5.0, c in -3.0f64..3.0) {
            prop_assert!(gompertz_residual(t, k, c).unwrap().abs() < 1e-12 * k.max(1.0) * (c.abs() * 8.0).exp());
        }
    }
}
