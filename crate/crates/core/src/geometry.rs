//! Metrics built from vielbein fields, eikonal residuals, Hessian metrics of
//! the negentropy, and arc lengths.
//!
//! Index conventions: a vielbein matrix `e` has rows indexed by the orthogonal
//! frame (Latin `i`) and columns by the coordinates (Greek `μ`), so the
//! equations of state read `e·p = r`. With `D = diag(η^{ii})` the inverse metric
//! is `g^{..} = eᵀ D e` and the metric is `g_{..} = e⁻¹ D⁻¹ e⁻ᵀ`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Determinant magnitude below which a vielbein is treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Largest supported dimension. Metrics are stored densely.
pub const MAX_DIM: usize = 16;

/// Mixed-partial disagreement above which a Hessian evaluation logs a warning.
pub const ASYMMETRY_WARN: f64 = 1e-5;

/// A vielbein field `q ↦ e_i^μ(q)`.
pub trait VielbeinField: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64>;

    /// `∂e/∂q^μ`. The default is a central difference with relative step 1e-6.
    fn partial(&self, q: &DVector<f64>, mu: usize) -> DMatrix<f64> {
        let h = 1e-6 * q[mu].abs().max(1.0);
        let mut plus = q.clone();
        let mut minus = q.clone();
        plus[mu] += h;
        minus[mu] -= h;
        (self.eval(&plus) - self.eval(&minus)) / (2.0 * h)
    }
}

/// `e = diag(q)`: the ideal gas and the log-affine family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalVielbein {
    pub dim: usize,
}

impl VielbeinField for DiagonalVielbein {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(q)
    }

    fn partial(&self, _q: &DVector<f64>, mu: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        d[(mu, mu)] = 1.0;
        d
    }
}

/// The van der Waals vielbein in `(u, v)`:
/// rows `(u + a/v, 0)` and `(a(v − b)/v², v − b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdwVielbein {
    pub a: f64,
    pub b: f64,
}

impl VielbeinField for VdwVielbein {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (u, v) = (q[0], q[1]);
        let (a, b) = (self.a, self.b);
        DMatrix::from_row_slice(2, 2, &[u + a / v, 0.0, a * (v - b) / (v * v), v - b])
    }

    fn partial(&self, q: &DVector<f64>, mu: usize) -> DMatrix<f64> {
        let v = q[1];
        let (a, b) = (self.a, self.b);
        match mu {
            0 => DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            _ => DMatrix::from_row_slice(
                2,
                2,
                &[-a / (v * v), 0.0, a * (2.0 * b - v) / (v * v * v), 1.0],
            ),
        }
    }
}

type VielbeinFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A user-supplied vielbein. Partial derivatives use central differences.
pub struct FnVielbein {
    dim: usize,
    f: Box<VielbeinFn>,
}

impl FnVielbein {
    pub fn new(
        dim: usize,
        f: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { dim, f: Box::new(f) }
    }
}

impl fmt::Debug for FnVielbein {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnVielbein").field("dim", &self.dim).finish()
    }
}

impl VielbeinField for FnVielbein {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, q: &DVector<f64>) -> DMatrix<f64> {
        (self.f)(q)
    }
}

/// Diagonal frame metric. Stores the lower-index entries `η_{ii}` (α², β², …);
/// the upper-index entries are their reciprocals.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalScale {
    lower: Vec<f64>,
}

impl DiagonalScale {
    pub fn new(lower: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() > MAX_DIM {
            return Err(Error::Config(format!(
                "scale dimension must be in 1..={MAX_DIM}, got {}",
                lower.len()
            )));
        }
        if let Some(x) = lower.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
            return Err(Error::Config(format!("scale factors must be positive, got {x}")));
        }
        Ok(Self { lower })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            lower: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// `η_{ii}`.
    pub fn lower(&self, i: usize) -> f64 {
        self.lower[i]
    }

    /// `η^{ii} = 1/η_{ii}`.
    pub fn upper(&self, i: usize) -> f64 {
        1.0 / self.lower[i]
    }

    pub fn lower_entries(&self) -> &[f64] {
        &self.lower
    }

    pub fn lower_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.lower))
    }

    pub fn upper_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            self.lower.iter().map(|x| 1.0 / x),
        ))
    }

    /// `η^{ij} r_i r_j`.
    pub fn norm_sq_upper(&self, r: &DVector<f64>) -> f64 {
        r.iter().zip(&self.lower).map(|(ri, l)| ri * ri / l).sum()
    }

    /// Rescales one entry in place, leaving any energy derived from it stale.
    #[cfg(test)]
    pub(crate) fn scale_entry(&mut self, i: usize, factor: f64) {
        self.lower[i] *= factor;
    }
}

/// The lower-index metric `g_{μν}` together with its inverse `g^{μν}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricAt {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
}

impl MetricAt {
    /// Wraps a lower-index metric, checking symmetry and positive definiteness.
    pub fn from_lower(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::Domain("metric must be square".into()));
        }
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-12 * g.amax().max(1.0) {
            return Err(Error::Domain(format!("metric is not symmetric (deviation {asym:e})")));
        }
        let chol = g
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Domain("metric is not positive definite".into()))?;
        let g_inv = symmetrize(chol.inverse());
        Ok(Self { g, g_inv })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `g_{μν} x^μ x^ν`.
    pub fn norm_sq(&self, dq: &DVector<f64>) -> f64 {
        dq.dot(&(&self.g * dq))
    }

    /// `g^{μν} p_μ p_ν`.
    pub fn norm_sq_inv(&self, p: &DVector<f64>) -> f64 {
        p.dot(&(&self.g_inv * p))
    }

    /// Smallest eigenvalue of `g`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.g
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Builds `g^{μν} = η^{ij} e_i^μ e_j^ν` and `g_{μν} = η_{ij} e_μ^i e_ν^j` from a
/// vielbein already evaluated at some state.
pub fn metric_inverse_from_vielbein(e: &DMatrix<f64>, eta: &DiagonalScale) -> Result<MetricAt> {
    let n = e.nrows();
    if !e.is_square() || n != eta.dim() {
        return Err(Error::Config(format!(
            "vielbein is {}x{} but the scale has dimension {}",
            e.nrows(),
            e.ncols(),
            eta.dim()
        )));
    }
    let det = e.determinant();
    if !det.is_finite() || det.abs() <= SINGULAR_EPS {
        return Err(Error::Domain(format!("vielbein is singular (det = {det:e})")));
    }
    let e_inv = e
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Domain("vielbein is not invertible".into()))?;
    let g_inv = symmetrize(e.transpose() * eta.upper_matrix() * e);
    let g = symmetrize(&e_inv * eta.lower_matrix() * e_inv.transpose());
    Ok(MetricAt { g, g_inv })
}

/// Evaluates `field` at `q` and builds the metric, naming `q` on failure.
pub fn metric_at(field: &dyn VielbeinField, q: &DVector<f64>, eta: &DiagonalScale) -> Result<MetricAt> {
    metric_inverse_from_vielbein(&field.eval(q), eta).map_err(|e| match e {
        Error::Domain(msg) => Error::Domain(format!("{msg} at q = {}", fmt_vec(q))),
        other => other,
    })
}

/// `g^{μν} p_μ p_ν − E²`.
pub fn eikonal_residual(metric: &MetricAt, p: &DVector<f64>, energy: f64) -> f64 {
    metric.norm_sq_inv(p) - energy * energy
}

/// Default finite-difference step per coordinate: `1e-4·max(1, |q^μ|)`.
pub fn default_fd_steps(q: &DVector<f64>) -> DVector<f64> {
    q.map(|x| 1e-4 * x.abs().max(1.0))
}

fn eval_finite(f: &dyn Fn(&DVector<f64>) -> f64, q: &DVector<f64>) -> Result<f64> {
    let s = f(q);
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Domain(format!(
            "entropy is not finite at {}; the state is too close to the domain boundary",
            fmt_vec(q)
        )))
    }
}

fn shifted(q: &DVector<f64>, shifts: &[(usize, f64)]) -> DVector<f64> {
    let mut out = q.clone();
    for &(i, d) in shifts {
        out[i] += d;
    }
    out
}

/// Two central-difference estimates of `∂²f/∂q^μ∂q^ν`: differentiating in `ν`
/// first and in `μ` first.
pub fn mixed_partials(
    f: &dyn Fn(&DVector<f64>) -> f64,
    q: &DVector<f64>,
    mu: usize,
    nu: usize,
    h: &DVector<f64>,
) -> Result<(f64, f64)> {
    let (hm, hn) = (h[mu], h[nu]);
    let pp = eval_finite(f, &shifted(q, &[(mu, hm), (nu, hn)]))?;
    let pm = eval_finite(f, &shifted(q, &[(mu, hm), (nu, -hn)]))?;
    let mp = eval_finite(f, &shifted(q, &[(mu, -hm), (nu, hn)]))?;
    let mm = eval_finite(f, &shifted(q, &[(mu, -hm), (nu, -hn)]))?;
    let d_nu_then_mu = ((pp - pm) / (2.0 * hn) - (mp - mm) / (2.0 * hn)) / (2.0 * hm);
    let d_mu_then_nu = ((pp - mp) / (2.0 * hm) - (pm - mm) / (2.0 * hm)) / (2.0 * hn);
    Ok((d_nu_then_mu, d_mu_then_nu))
}

/// Hessian metric of the negentropy, `(g^R)_{μν} = ∂²(−s)/∂q^μ∂q^ν`, by central
/// differences. Mixed partials are the average of both differentiation orders.
///
/// Returns the lower-index matrix; it is only a metric where `−s` is convex, so
/// use [`MetricAt::from_lower`] when an inverse is needed.
pub fn ruppeiner_metric(
    entropy: &dyn Fn(&DVector<f64>) -> f64,
    q: &DVector<f64>,
    steps: Option<&DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let n = q.len();
    let h = steps.cloned().unwrap_or_else(|| default_fd_steps(q));
    if h.len() != n {
        return Err(Error::Config("step vector length does not match the state".into()));
    }
    let s0 = eval_finite(entropy, q)?;
    let mut g = DMatrix::zeros(n, n);
    for mu in 0..n {
        let plus = eval_finite(entropy, &shifted(q, &[(mu, h[mu])]))?;
        let minus = eval_finite(entropy, &shifted(q, &[(mu, -h[mu])]))?;
        g[(mu, mu)] = -(plus - 2.0 * s0 + minus) / (h[mu] * h[mu]);
        for nu in 0..mu {
            let (a, b) = mixed_partials(entropy, q, mu, nu, &h)?;
            if (a - b).abs() > ASYMMETRY_WARN {
                log::warn!(
                    "mixed partials disagree by {:e} at {} ({mu},{nu})",
                    (a - b).abs(),
                    fmt_vec(q)
                );
            }
            let m = -0.5 * (a + b);
            g[(mu, nu)] = m;
            g[(nu, mu)] = m;
        }
    }
    Ok(g)
}

/// `Σ √(Δqᵀ g(q_mid) Δq)` over consecutive points.
pub fn arc_length_of_points<F>(points: &[DVector<f64>], metric_field: F) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<MetricAt>,
{
    let mut total = 0.0;
    for w in points.windows(2) {
        let dq = &w[1] - &w[0];
        let mid = (&w[0] + &w[1]) * 0.5;
        let m = metric_field(&mid)?;
        let ds2 = m.norm_sq(&dq);
        if ds2 < 0.0 {
            return Err(Error::Domain(format!(
                "metric is not positive definite at {}",
                fmt_vec(&mid)
            )));
        }
        total += ds2.sqrt();
    }
    Ok(total)
}

/// Metric length of the sampled path `q(·)` of a trajectory.
pub fn arc_length<F>(traj: &Trajectory, metric_field: F) -> Result<f64>
where
    F: Fn(&DVector<f64>) -> Result<MetricAt>,
{
    let points: Vec<DVector<f64>> = traj.iter().map(|s| s.state.q.clone()).collect();
    arc_length_of_points(&points, metric_field)
}

pub(crate) fn fmt_vec(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dv(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    /// `Σ_ij η^{ij} e_i^μ e_j^ν` by explicit loops.
    fn upper_metric_by_sum(e: &DMatrix<f64>, eta_lower: &[f64]) -> DMatrix<f64> {
        let n = e.nrows();
        let mut g = DMatrix::zeros(n, n);
        for mu in 0..n {
            for nu in 0..n {
                for i in 0..n {
                    g[(mu, nu)] += e[(i, mu)] * e[(i, nu)] / eta_lower[i];
                }
            }
        }
        g
    }

    #[test]
    fn ideal_vielbein_metric() {
        let e = DiagonalVielbein { dim: 2 }.eval(&dv(&[2.0, 1.0]));
        let eta = DiagonalScale::new(vec![1.5, 1.0]).unwrap();
        let m = metric_inverse_from_vielbein(&e, &eta).unwrap();
        let oracle = upper_metric_by_sum(&e, &[1.5, 1.0]);
        assert!((m.g_inv[(0, 0)] - 8.0 / 3.0).abs() < 1e-14);
        assert!((m.g_inv[(1, 1)] - 1.0).abs() < 1e-14);
        assert_eq!(m.g_inv[(0, 1)], 0.0);
        assert!((&m.g_inv - oracle).amax() < 1e-14);
    }

    #[test]
    fn identity_vielbein_gives_identity_metric() {
        let e = DMatrix::identity(3, 3);
        let m = metric_inverse_from_vielbein(&e, &DiagonalScale::identity(3)).unwrap();
        assert_eq!(m.g, DMatrix::identity(3, 3));
        assert_eq!(m.g_inv, DMatrix::identity(3, 3));
    }

    #[test]
    fn vdw_vielbein_off_diagonal() {
        let field = VdwVielbein { a: 0.5, b: 0.1 };
        let e = field.eval(&dv(&[2.0, 1.0]));
        let m = metric_inverse_from_vielbein(&e, &DiagonalScale::identity(2)).unwrap();
        let oracle = upper_metric_by_sum(&e, &[1.0, 1.0]);
        assert!((m.g_inv[(0, 1)] - 0.405).abs() < 1e-14);
        assert!((m.g_inv[(1, 0)] - 0.405).abs() < 1e-14);
        assert!((&m.g_inv - oracle).amax() < 1e-14);
        assert!((&m.g * &m.g_inv - DMatrix::identity(2, 2)).amax() < 1e-10);
    }

    #[test]
    fn vdw_analytic_partials_match_finite_differences() {
        let field = VdwVielbein { a: 0.5, b: 0.1 };
        let fd = FnVielbein::new(2, move |q| field.eval(q));
        let q = dv(&[2.0, 1.3]);
        for mu in 0..2 {
            assert!((field.partial(&q, mu) - fd.partial(&q, mu)).amax() < 1e-8);
        }
    }

    #[test]
    fn singular_vielbein_names_state() {
        let field = DiagonalVielbein { dim: 2 };
        let err = metric_at(&field, &dv(&[0.0, 1.0]), &DiagonalScale::identity(2)).unwrap_err();
        match err {
            Error::Domain(msg) => assert!(msg.contains("(0, 1)"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn scale_rejects_non_positive() {
        assert!(DiagonalScale::new(vec![1.0, 0.0]).is_err());
        assert!(DiagonalScale::new(vec![]).is_err());
        assert!(DiagonalScale::new(vec![1.0; MAX_DIM + 1]).is_err());
        let s = DiagonalScale::new(vec![2.0, 4.0]).unwrap();
        assert_eq!(s.lower_matrix() * s.upper_matrix(), DMatrix::identity(2, 2));
    }

    #[test]
    fn eikonal_examples() {
        let m = MetricAt::from_lower(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(eikonal_residual(&m, &dv(&[3.0, 4.0]), 5.0), 0.0);
        assert_eq!(eikonal_residual(&m, &dv(&[1.0, 0.0]), 2.0), -3.0);
    }

    #[test]
    fn eikonal_vanishes_on_ideal_gas_shell() {
        let (pu, pv) = (1.5, 1.0);
        let eta = DiagonalScale::new(vec![pu, pv]).unwrap();
        let energy = (pu + pv).sqrt();
        for &(u, v) in &[(0.3, 7.0), (2.0, 1.0), (11.0, 0.2)] {
            let m = metric_at(&DiagonalVielbein { dim: 2 }, &dv(&[u, v]), &eta).unwrap();
            let p = dv(&[pu / u, pv / v]);
            assert!(eikonal_residual(&m, &p, energy).abs() < 1e-12);
        }
    }

    fn ideal_entropy(q: &DVector<f64>) -> f64 {
        1.5 * q[0].ln() + 1.0 * q[1].ln()
    }

    fn vdw_entropy(q: &DVector<f64>) -> f64 {
        let (u, v, a, b) = (q[0], q[1], 0.5, 0.1);
        1.5 * ((u + a / v) / (1.0 + a)).ln() + ((v - b) / (1.0 - b)).ln()
    }

    #[test]
    fn ruppeiner_of_ideal_gas() {
        let g = ruppeiner_metric(&ideal_entropy, &dv(&[2.0, 1.0]), None).unwrap();
        assert!((g[(0, 0)] - 0.375).abs() < 1e-6);
        assert!((g[(1, 1)] - 1.0).abs() < 1e-6);
        assert!(g[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn ruppeiner_of_zero_entropy_is_zero() {
        let g = ruppeiner_metric(&|_| 0.0, &dv(&[2.0, 1.0]), None).unwrap();
        assert_eq!(g, DMatrix::zeros(2, 2));
        assert!(MetricAt::from_lower(g).is_err());
    }

    #[test]
    fn vdw_mixed_partials_agree() {
        let q = dv(&[2.0, 1.0]);
        let (a, b) = mixed_partials(&vdw_entropy, &q, 0, 1, &default_fd_steps(&q)).unwrap();
        assert!((a - b).abs() < 1e-6);
        // ∂²s/∂u∂v = P_u·a/(v²·ũ²) with ũ = u + a/v.
        let exact = 1.5 * 0.5 / (2.5f64 * 2.5);
        assert!((a - exact).abs() < 1e-6);
    }

    #[test]
    fn ruppeiner_near_boundary_is_domain_error() {
        let q = dv(&[2.0, 5e-5]);
        let err = ruppeiner_metric(&ideal_entropy, &q, Some(&dv(&[1e-4, 1e-4]))).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn arc_length_examples() {
        let euclid = |_: &DVector<f64>| MetricAt::from_lower(DMatrix::identity(2, 2));
        assert_eq!(arc_length_of_points(&[dv(&[1.0, 1.0])], euclid).unwrap(), 0.0);
        let pts: Vec<_> = (0..=1000)
            .map(|k| {
                let s = k as f64 / 1000.0;
                dv(&[3.0 * s, 4.0 * s])
            })
            .collect();
        assert!((arc_length_of_points(&pts, euclid).unwrap() - 5.0).abs() < 1e-6);
    }

    #[test]
    fn arc_length_is_additive_and_converges() {
        // Hyperbolic-type metric diag(1/u², 1/v²) along u = v = e^s.
        let field = DiagonalVielbein { dim: 2 };
        let metric = |q: &DVector<f64>| metric_at(&field, q, &DiagonalScale::identity(2));
        let path = |n: usize| -> Vec<DVector<f64>> {
            (0..=n)
                .map(|k| {
                    let s = k as f64 / n as f64;
                    dv(&[s.exp(), s.exp()])
                })
                .collect()
        };
        let exact = 2f64.sqrt();
        let coarse = (arc_length_of_points(&path(10), metric).unwrap() - exact).abs();
        let fine = (arc_length_of_points(&path(1000), metric).unwrap() - exact).abs();
        assert!(fine < coarse && fine < 1e-6);
        let pts = path(200);
        let whole = arc_length_of_points(&pts, metric).unwrap();
        let left = arc_length_of_points(&pts[..=80], metric).unwrap();
        let right = arc_length_of_points(&pts[80..], metric).unwrap();
        assert!((whole - left - right).abs() < 1e-13);
    }

    proptest! {
        #[test]
        fn metric_times_inverse_is_identity(
            u in 0.2f64..10.0,
            v in 0.2f64..10.0,
            a in 0.0f64..2.0,
            b in 0.0f64..0.15,
            al in 0.1f64..5.0,
            be in 0.1f64..5.0,
        ) {
            let eta = DiagonalScale::new(vec![al, be]).unwrap();
            let field = VdwVielbein { a, b };
            let q = dv(&[u, v]);
            let e = field.eval(&q);
            let e_inv = e.clone().try_inverse().unwrap();
            prop_assert!((&e * &e_inv - DMatrix::identity(2, 2)).amax() < 1e-12);
            let m = metric_at(&field, &q, &eta).unwrap();
            let scale = m.g.amax().max(m.g_inv.amax());
            prop_assert!((&m.g * &m.g_inv - DMatrix::identity(2, 2)).amax() < 1e-10 * scale.max(1.0));
            prop_assert!(m.min_eigenvalue() > 0.0);
        }

        #[test]
        fn eikonal_invariant_under_frame_rescaling(
            u in 0.2f64..10.0,
            v in 0.2f64..10.0,
            l1 in 0.1f64..10.0,
            l2 in 0.1f64..10.0,
        ) {
            // Multiplying η_{ii} by λ_i and r_i² by λ_i leaves η^{ij} r_i r_j fixed.
            let field = DiagonalVielbein { dim: 2 };
            let q = dv(&[u, v]);
            let r = dv(&[1.5, 1.0]);
            let eta = DiagonalScale::new(vec![1.0, 1.0]).unwrap();
            let energy = eta.norm_sq_upper(&r).sqrt();
            let p = field.eval(&q).try_inverse().unwrap() * &r;
            let base = eikonal_residual(&metric_at(&field, &q, &eta).unwrap(), &p, energy);

            let eta2 = DiagonalScale::new(vec![l1, l2]).unwrap();
            let r2 = dv(&[r[0] * l1.sqrt(), r[1] * l2.sqrt()]);
            let p2 = field.eval(&q).try_inverse().unwrap() * &r2;
            let scaled = eikonal_residual(&metric_at(&field, &q, &eta2).unwrap(), &p2, energy);
            prop_assert!(base.abs() < 1e-12);
            prop_assert!(scaled.abs() < 1e-11);
        }
    }
}
