//! Kernel formulas of the functional calculus evaluated on a lattice
//! eigensystem.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::decomposition::SpectralDecomposition;
use crate::error::{invalid, Error, Result};

/// Finite union of half-open energy intervals `[lo, hi)`. Membership uses
/// exact floating-point comparison, so an eigenvalue equal to `lo` is
/// included and one equal to `hi` is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySet {
    pub intervals: Vec<(f64, f64)>,
}

impl EnergySet {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { intervals: vec![(lo, hi)] }
    }

    /// `]−∞, e[`.
    pub fn below(e: f64) -> Self {
        Self::interval(f64::NEG_INFINITY, e)
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn contains(&self, e: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo <= e && e < hi)
    }

    /// `sup I`; `−∞` for the empty set.
    pub fn sup(&self) -> f64 {
        self.intervals.iter().filter(|(lo, hi)| lo < hi).map(|&(_, hi)| hi).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Bounded spectral functions with exponential decay
/// `|F(E)| ≤ γ min{1, e^{−τE}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectralFunction {
    /// `e^{−sE}`; decays with `τ = s`.
    Heat { s: f64 },
    /// `1_I(E)`; any `τ` works since `sup I < ∞`. `tau` is the one declared.
    Indicator { set: EnergySet, tau: f64 },
    /// `min{1, e^{−τE}}`.
    MinExp { tau: f64 },
}

impl SpectralFunction {
    pub fn eval(&self, e: f64) -> f64 {
        match self {
            Self::Heat { s } => (-s * e).exp(),
            Self::Indicator { set, .. } => f64::from(u8::from(set.contains(e))),
            Self::MinExp { tau } => (-tau * e).exp().min(1.0),
        }
    }

    pub fn tau(&self) -> f64 {
        match self {
            Self::Heat { s } => *s,
            Self::Indicator { tau, .. } | Self::MinExp { tau } => *tau,
        }
    }

    fn validate(&self) -> Result<()> {
        let tau = self.tau();
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("decay constant τ must be positive"));
        }
        if let Self::Indicator { set, .. } = self {
            if set.sup() == f64::INFINITY {
                return Err(invalid("indicator sets must be bounded above"));
            }
        }
        Ok(())
    }
}

fn check_sites(dec: &SpectralDecomposition, sites: &[usize]) -> Result<()> {
    sites.iter().try_for_each(|&s| dec.lattice().check_site(s))
}

/// `k_t(x, y) = Σ_n e^{−tE_n} φ_n(x) φ_n*(y)`.
pub fn heat_kernel(dec: &SpectralDecomposition, t: f64, x: usize, y: usize) -> Result<Complex64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    check_sites(dec, &[x, y])?;
    Ok(dec.spectral_sum(|e| (-t * e).exp(), x, y))
}

/// `p_I(x, y) = Σ_{E_n ∈ I} φ_n(x) φ_n*(y)`.
pub fn projection_kernel(dec: &SpectralDecomposition, set: &EnergySet, x: usize, y: usize) -> Result<Complex64> {
    check_sites(dec, &[x, y])?;
    Ok(dec.spectral_sum(|e| f64::from(u8::from(set.contains(e))), x, y))
}

/// `f(x, y) = Σ_n F(E_n) φ_n(x) φ_n*(y)`.
pub fn function_kernel(dec: &SpectralDecomposition, f: &SpectralFunction, x: usize, y: usize) -> Result<Complex64> {
    check_sites(dec, &[x, y])?;
    Ok(dec.spectral_sum(|e| f.eval(e), x, y))
}

/// Site vector `z ↦ Σ_n g(E_n) φ_n(z) φ_n*(y)`.
fn kernel_column<G: Fn(f64) -> f64>(dec: &SpectralDecomposition, g: G, y: usize) -> Vec<Complex64> {
    let u = dec.vectors();
    let n = dec.len();
    let norm2 = dec.lattice().cell_volume().recip();
    let coeff: Vec<Complex64> = (0..n).map(|m| u[(y, m)].conj() * g(dec.eigenvalues()[m]) * norm2).collect();
    (0..n).map(|z| (0..n).map(|m| u[(z, m)] * coeff[m]).sum()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComposedValue {
    pub t: f64,
    pub value: Complex64,
    /// `|value − direct| / scale`.
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundedFunctionReport {
    /// `Σ_n F(E_n) φ_n(x) φ_n*(y)`.
    pub direct: Complex64,
    /// `⟨k_t(·,x), e^{2tH} F(H) k_t(·,y)⟩` at each requested `t`.
    pub composed: Vec<ComposedValue>,
    /// Largest pairwise `|Δ composed| / scale`.
    pub t_spread: f64,
    /// `Σ_n |F(E_n)| |φ_n(x)| |φ_n(y)|`, the natural magnitude of the sums.
    pub scale: f64,
    pub pass: bool,
}

/// Relative tolerance for identities between finite eigen-sums.
pub const IDENTITY_TOLERANCE: f64 = 1e-8;

/// Evaluate the kernel of `F(H)` directly and through the composed form
/// with lattice heat kernels as the vectors, at each `t` in `t_checks`
/// (each in `]0, τ/2[`).
pub fn bounded_function_kernel(
    dec: &SpectralDecomposition,
    f: &SpectralFunction,
    x: usize,
    y: usize,
    t_checks: &[f64],
) -> Result<BoundedFunctionReport> {
    f.validate()?;
    check_sites(dec, &[x, y])?;
    let tau = f.tau();
    if t_checks.is_empty() {
        return Err(invalid("at least one t_check is required"));
    }
    if let Some(t) = t_checks.iter().find(|&&t| !(t > 0.0 && t < 0.5 * tau)) {
        return Err(invalid(format!("t_check {t} outside ]0, τ/2[ with τ = {tau}")));
    }
    let direct = function_kernel(dec, f, x, y)?;
    let scale: f64 = dec
        .eigenvalues()
        .iter()
        .enumerate()
        .map(|(n, &e)| f.eval(e).abs() * dec.phi(x, n).norm() * dec.phi(y, n).norm())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);

    let hd = dec.lattice().cell_volume();
    let u = dec.vectors();
    let n = dec.len();
    let mut composed = Vec::with_capacity(t_checks.len());
    for &t in t_checks {
        let kx = kernel_column(dec, |e| (-t * e).exp(), x);
        let ky = kernel_column(dec, |e| (-t * e).exp(), y);
        // Expand k_t(·,y) in the eigenbasis by explicit inner products, apply
        // e^{2tE} F(E), and resynthesize the site vector.
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for m in 0..n {
            let c: Complex64 = (0..n).map(|z| u[(z, m)].conj() * ky[z]).sum();
            let e = dec.eigenvalues()[m];
            let g = (2.0 * t * e).exp() * f.eval(e);
            if g == 0.0 {
                continue;
            }
            for z in 0..n {
                b[z] += u[(z, m)] * c * g;
            }
        }
        let value: Complex64 = kx.iter().zip(&b).map(|(a, b)| a.conj() * b).sum::<Complex64>() * hd;
        composed.push(ComposedValue { t, value, relative_residual: (value - direct).norm() / scale });
    }
    let mut t_spread: f64 = 0.0;
    for i in 0..composed.len() {
        for j in i + 1..composed.len() {
            t_spread = t_spread.max((composed[i].value - composed[j].value).norm() / scale);
        }
    }
    let pass = t_spread <= IDENTITY_TOLERANCE && composed.iter().all(|c| c.relative_residual <= IDENTITY_TOLERANCE);
    Ok(BoundedFunctionReport { direct, composed, t_spread, scale, pass })
}

/// Two evaluations of one trace identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs| / max(|lhs|, |rhs|)`, zero when both vanish.
    pub residual: f64,
    pub pass: bool,
}

impl IdentityReport {
    fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let scale = lhs.abs().max(rhs.abs());
        let residual = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
        Self { lhs, rhs, residual, pass: residual <= tolerance }
    }
}

/// Relative tolerance of the trace identities.
pub const TRACE_TOLERANCE: f64 = 1e-10;

fn check_weights(dec: &SpectralDecomposition, w: &[Complex64]) -> Result<()> {
    if w.len() != dec.len() {
        return Err(Error::DimensionMismatch { expected: dec.len(), found: w.len() });
    }
    if w.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(invalid("site weights must be finite"));
    }
    Ok(())
}

/// `‖ŵ u_n‖²` for every eigenvector.
fn weighted_masses(dec: &SpectralDecomposition, w: &[Complex64]) -> Vec<f64> {
    let u = dec.vectors();
    (0..dec.len()).map(|n| w.iter().enumerate().map(|(z, wz)| (wz * u[(z, n)]).norm_sqr()).sum()).collect()
}

/// `Trace[ŵ* 1_I(H) ŵ]` as `Σ_{E_n ∈ I} ‖ŵ u_n‖²` against
/// `Σ_x |w(x)|² p_I(x,x) h^d`.
pub fn trace_formula_check(dec: &SpectralDecomposition, set: &EnergySet, w: &[Complex64]) -> Result<IdentityReport> {
    check_weights(dec, w)?;
    let masses = weighted_masses(dec, w);
    let lhs: f64 = dec.eigenvalues().iter().zip(&masses).filter(|(e, _)| set.contains(**e)).map(|(_, m)| m).sum();
    let hd = dec.lattice().cell_volume();
    let mut rhs = 0.0;
    for (x, wx) in w.iter().enumerate() {
        if wx.norm_sqr() != 0.0 {
            rhs += wx.norm_sqr() * projection_kernel(dec, set, x, x)?.re * hd;
        }
    }
    Ok(IdentityReport::new(lhs, rhs, TRACE_TOLERANCE))
}

/// `Trace[ŵ* |F(H)|² ŵ]` as `Σ_n |F(E_n)|² ‖ŵ u_n‖²` against
/// `Σ_x |w(x)|² Σ_y |f(x,y)|² h^{2d}`.
pub fn hs_norm_check(dec: &SpectralDecomposition, f: &SpectralFunction, w: &[Complex64]) -> Result<IdentityReport> {
    check_weights(dec, w)?;
    let masses = weighted_masses(dec, w);
    let lhs: f64 = dec.eigenvalues().iter().zip(&masses).map(|(e, m)| f.eval(*e).powi(2) * m).sum();
    let hd = dec.lattice().cell_volume();
    let mut rhs = 0.0;
    for (x, wx) in w.iter().enumerate() {
        if wx.norm_sqr() == 0.0 {
            continue;
        }
        let col = kernel_column(dec, |e| f.eval(e), x);
        // f(x,y) = conj(f(y,x)) for real F, so |f(x,y)| = |col[y]|.
        let inner: f64 = col.iter().map(|z| z.norm_sqr()).sum::<f64>() * hd * hd;
        rhs += wx.norm_sqr() * inner;
    }
    Ok(IdentityReport::new(lhs, rhs, TRACE_TOLERANCE))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBoundsReport {
    pub t: f64,
    pub sup_i: f64,
    /// `p_I(x,x)` per site.
    pub diagonal: Vec<f64>,
    /// `e^{t sup I} k_t(x,x)` per site.
    pub upper: Vec<f64>,
    /// Largest `p_I(x,x) / (e^{t sup I} k_t(x,x))`.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Check `0 ≤ p_I(x,x) ≤ e^{t sup I} k_t(x,x)` at every site with relative
/// slack `1e-12`.
pub fn projection_diagonal_bounds(dec: &SpectralDecomposition, set: &EnergySet, t: f64) -> Result<ProjectionBoundsReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    let sup_i = set.sup();
    if sup_i == f64::INFINITY {
        return Err(invalid("sup I must be finite"));
    }
    let factor = if sup_i == f64::NEG_INFINITY { 0.0 } else { (t * sup_i).exp() };
    let mut diagonal = Vec::with_capacity(dec.len());
    let mut upper = Vec::with_capacity(dec.len());
    let mut pass = true;
    let mut max_ratio: f64 = 0.0;
    for x in 0..dec.len() {
        let p = projection_kernel(dec, set, x, x)?.re;
        let k = factor * heat_kernel(dec, t, x, x)?.re;
        pass &= p >= 0.0 && p <= k * (1.0 + 1e-12);
        if k > 0.0 {
            max_ratio = max_ratio.max(p / k);
        }
        diagonal.push(p);
        upper.push(k);
    }
    Ok(ProjectionBoundsReport { t, sup_i, diagonal, upper, max_ratio, pass })
}

/// `u(s) = e^{−sH} φ` through the eigen-expansion.
fn evolve(dec: &SpectralDecomposition, coeff: &[Complex64], s: f64) -> Vec<Complex64> {
    let u = dec.vectors();
    let n = dec.len();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (m, c) in coeff.iter().enumerate() {
        let g = c * (-s * dec.eigenvalues()[m]).exp();
        for z in 0..n {
            out[z] += u[(z, m)] * g;
        }
    }
    out
}

/// `‖(u(t+dt) − u(t−dt)) / (2dt) + H u(t)‖₂` with `u(s) = e^{−sH}φ` from
/// the eigen-expansion and `H u` from the assembled operator. The norm is
/// the lattice `L²` norm with weight `h^d`.
pub fn initial_value_residual(dec: &SpectralDecomposition, phi: &[Complex64], t: f64, dt: f64) -> Result<f64> {
    if phi.len() != dec.len() {
        return Err(Error::DimensionMismatch { expected: dec.len(), found: phi.len() });
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::NonPositiveTime(t));
    }
    if !(dt > 0.0 && dt <= t / 10.0) {
        return Err(invalid(format!("dt = {dt} must lie in ]0, t/10]")));
    }
    let u = dec.vectors();
    let n = dec.len();
    let coeff: Vec<Complex64> = (0..n).map(|m| (0..n).map(|z| u[(z, m)].conj() * phi[z]).sum()).collect();
    let plus = evolve(dec, &coeff, t + dt);
    let minus = evolve(dec, &coeff, t - dt);
    let now = evolve(dec, &coeff, t);
    let h_now = dec.hamiltonian().apply(&now);
    let hd = dec.lattice().cell_volume();
    let sq: f64 = (0..n).map(|z| ((plus[z] - minus[z]) / (2.0 * dt) + h_now[z]).norm_sqr()).sum();
    Ok((sq * hd).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialValueReport {
    pub t: f64,
    pub dt: f64,
    pub residual: f64,
    pub residual_half: f64,
    /// `residual(dt/2) / residual(dt)`, about 1/4 for a second-order scheme.
    pub ratio: f64,
    pub pass: bool,
}

/// Residual at `dt` and `dt/2`; passes when the ratio lies in `[0.2, 0.35]`.
pub fn initial_value_convergence(dec: &SpectralDecomposition, phi: &[Complex64], t: f64, dt: f64) -> Result<InitialValueReport> {
    let residual = initial_value_residual(dec, phi, t, dt)?;
    let residual_half = initial_value_residual(dec, phi, t, 0.5 * dt)?;
    let ratio = residual_half / residual;
    Ok(InitialValueReport { t, dt, residual, residual_half, ratio, pass: (0.2..=0.35).contains(&ratio) })
}
