//! Scaled Gaussians, Gaussian mixtures and the information-form bookkeeping used
//! by the message products.
//!
//! Weights are carried as natural logarithms throughout. Every product of a
//! Gaussian prior with a Gaussian likelihood term goes through [`InfoPrior`],
//! which caches the prior in information form so repeated fusions only cost one
//! Cholesky factorization of the posterior precision.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

// ============================================================================
// Linear algebra helpers
// ============================================================================

/// Returns (A + Aᵀ)/2.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// The input is symmetrized first. If the factorization fails, a diagonal
/// load of `1e-9 · trace/d` is added and the factorization retried with the
/// load growing tenfold up to three times.
pub fn spd_cholesky(a: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let sym = symmetrize(a);
    if let Some(ch) = Cholesky::new(sym.clone()) {
        return Ok(ch);
    }
    let d = sym.nrows();
    let trace = sym.trace();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(Error::NotPositiveDefinite(context));
    }
    let mut eps = 1e-9 * trace / d as f64;
    for _ in 0..4 {
        let loaded = &sym + DMatrix::identity(d, d) * eps;
        if let Some(ch) = Cholesky::new(loaded) {
            return Ok(ch);
        }
        eps *= 10.0;
    }
    Err(Error::NotPositiveDefinite(context))
}

/// log det(A) from its Cholesky factor.
pub fn chol_log_det(ch: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * ch.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Inverse of an SPD matrix, symmetrized.
pub fn spd_inverse(a: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let ch = spd_cholesky(a, context)?;
    Ok(symmetrize(&ch.inverse()))
}

/// log N(x; m, P) given the residual x − m and the Cholesky factor of P.
pub fn log_normal_pdf(residual: &DVector<f64>, cov_chol: &Cholesky<f64, Dyn>) -> f64 {
    let d = residual.len() as f64;
    let y = cov_chol
        .l_dirty()
        .solve_lower_triangular(residual)
        .unwrap_or_else(|| residual.clone());
    -0.5 * (d * LN_2PI + chol_log_det(cov_chol) + y.norm_squared())
}

/// Max-shifted log(Σ exp(vᵢ)). Empty input gives −∞.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

// ============================================================================
// Scaled Gaussian
// ============================================================================

/// c · N(x; m, P) with c stored as ln c.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledGaussian {
    pub log_weight: f64,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl ScaledGaussian {
    pub fn new(log_weight: f64, mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        debug_assert_eq!(mean.len(), cov.nrows());
        debug_assert_eq!(cov.nrows(), cov.ncols());
        Self {
            log_weight,
            mean,
            cov,
        }
    }

    /// Unit-scale Gaussian.
    pub fn normal(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        Self::new(0.0, mean, cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    /// ln(c · N(x; m, P)).
    pub fn log_eval(&self, x: &DVector<f64>) -> Result<f64> {
        let ch = spd_cholesky(&self.cov, "component covariance")?;
        Ok(self.log_weight + log_normal_pdf(&(x - &self.mean), &ch))
    }

    pub fn with_log_weight(mut self, log_weight: f64) -> Self {
        self.log_weight = log_weight;
        self
    }
}

// ============================================================================
// Gaussian mixture
// ============================================================================

/// Ordered list of scaled Gaussians sharing one dimension. May be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    components: Vec<ScaledGaussian>,
}

impl GaussianMixture {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            components: Vec::new(),
        }
    }

    pub fn single(g: ScaledGaussian) -> Self {
        Self {
            dim: g.dim(),
            components: vec![g],
        }
    }

    pub fn from_components(dim: usize, components: Vec<ScaledGaussian>) -> Result<Self> {
        if let Some(bad) = components.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { dim, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[ScaledGaussian] {
        &self.components
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScaledGaussian> {
        self.components.iter()
    }

    pub fn into_components(self) -> Vec<ScaledGaussian> {
        self.components
    }

    pub fn push(&mut self, g: ScaledGaussian) {
        debug_assert_eq!(g.dim(), self.dim);
        self.components.push(g);
    }

    pub fn log_weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.log_weight).collect()
    }

    /// ln Σ wᵢ (−∞ when empty).
    pub fn log_total_weight(&self) -> f64 {
        log_sum_exp(&self.log_weights())
    }

    pub fn total_weight(&self) -> f64 {
        self.log_total_weight().exp()
    }

    /// Adds `delta` to every log-weight.
    pub fn scaled(mut self, delta: f64) -> Self {
        for c in &mut self.components {
            c.log_weight += delta;
        }
        self
    }

    /// Rescales to unit total weight. Empty or zero-weight mixtures are returned as is.
    pub fn normalized(self) -> Self {
        let total = self.log_total_weight();
        if total.is_finite() {
            self.scaled(-total)
        } else {
            self
        }
    }

    /// Weighted mean Σ wᵢ mᵢ / Σ wᵢ, or `None` for an empty or zero-weight mixture.
    pub fn mean(&self) -> Option<DVector<f64>> {
        let total = self.log_total_weight();
        if !total.is_finite() {
            return None;
        }
        let mut acc = DVector::zeros(self.dim);
        for c in &self.components {
            acc += &c.mean * (c.log_weight - total).exp();
        }
        Some(acc)
    }

    /// ln Σ cᵢ N(x; mᵢ, Pᵢ).
    pub fn log_eval(&self, x: &DVector<f64>) -> Result<f64> {
        let terms = self
            .components
            .iter()
            .map(|c| c.log_eval(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(log_sum_exp(&terms))
    }
}

// ============================================================================
// Likelihood terms and information form
// ============================================================================

/// u · N(e; H x, C) as a function of x.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodComponent {
    pub log_u: f64,
    pub residual: DVector<f64>,
    pub obs_matrix: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

impl LikelihoodComponent {
    pub fn state_dim(&self) -> usize {
        self.obs_matrix.ncols()
    }

    /// ln(u · N(e; H x, C)).
    pub fn log_eval(&self, x: &DVector<f64>) -> Result<f64> {
        let ch = spd_cholesky(&self.noise, "likelihood noise")?;
        Ok(self.log_u + log_normal_pdf(&(&self.residual - &self.obs_matrix * x), &ch))
    }
}

/// exp(c − ½ xᵀ C̃ x + xᵀ ẽ): a likelihood term in information form.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalInfo {
    pub info_vector: DVector<f64>,
    pub info_matrix: DMatrix<f64>,
    pub log_scale: f64,
}

impl CanonicalInfo {
    /// Constant term: zero information, scale `log_scale`.
    pub fn constant(dim: usize, log_scale: f64) -> Self {
        Self {
            info_vector: DVector::zeros(dim),
            info_matrix: DMatrix::zeros(dim, dim),
            log_scale,
        }
    }

    pub fn dim(&self) -> usize {
        self.info_vector.len()
    }

    pub fn add_assign(&mut self, other: &CanonicalInfo) {
        self.info_vector += &other.info_vector;
        self.info_matrix += &other.info_matrix;
        self.log_scale += other.log_scale;
    }

    pub fn sub_assign(&mut self, other: &CanonicalInfo) {
        self.info_vector -= &other.info_vector;
        self.info_matrix -= &other.info_matrix;
        self.log_scale -= other.log_scale;
    }

    pub fn plus(&self, other: &CanonicalInfo) -> CanonicalInfo {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn minus(&self, other: &CanonicalInfo) -> CanonicalInfo {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    /// Information form of a scaled Gaussian viewed as a function of x.
    pub fn from_scaled_gaussian(g: &ScaledGaussian) -> Result<Self> {
        let ch = spd_cholesky(&g.cov, "scaled gaussian covariance")?;
        let precision = symmetrize(&ch.inverse());
        let info_vector = &precision * &g.mean;
        let d = g.dim() as f64;
        let log_scale =
            g.log_weight - 0.5 * (d * LN_2PI + chol_log_det(&ch)) - 0.5 * g.mean.dot(&info_vector);
        Ok(Self {
            info_vector,
            info_matrix: precision,
            log_scale,
        })
    }
}

/// Information form of u·N(e; Hx, C): ẽ = HᵀC⁻¹e, C̃ = HᵀC⁻¹H,
/// c = ln u − ½ ln det(2πC) − ½ eᵀC⁻¹e.
pub fn canonicalize(term: &LikelihoodComponent) -> Result<CanonicalInfo> {
    let ch = spd_cholesky(&term.noise, "likelihood noise")?;
    let c_inv_e = ch.solve(&term.residual);
    let c_inv_h = ch.solve(&term.obs_matrix);
    let ht = term.obs_matrix.transpose();
    let dz = term.residual.len() as f64;
    let log_scale =
        term.log_u - 0.5 * (dz * LN_2PI + chol_log_det(&ch)) - 0.5 * term.residual.dot(&c_inv_e);
    Ok(CanonicalInfo {
        info_vector: &ht * c_inv_e,
        info_matrix: symmetrize(&(&ht * c_inv_h)),
        log_scale,
    })
}

/// A prior component cached in information form for repeated fusion.
#[derive(Debug, Clone)]
pub struct InfoPrior {
    pub log_weight: f64,
    pub precision: DMatrix<f64>,
    pub info_vector: DVector<f64>,
    /// mᵀ P⁻¹ m
    pub quad: f64,
    /// ln det P
    pub log_det_cov: f64,
}

impl InfoPrior {
    pub fn new(prior: &ScaledGaussian) -> Result<Self> {
        let ch = spd_cholesky(&prior.cov, "prior covariance")?;
        let precision = symmetrize(&ch.inverse());
        let info_vector = &precision * &prior.mean;
        Ok(Self {
            log_weight: prior.log_weight,
            quad: prior.mean.dot(&info_vector),
            log_det_cov: chol_log_det(&ch),
            precision,
            info_vector,
        })
    }

    pub fn dim(&self) -> usize {
        self.info_vector.len()
    }

    fn posterior(
        &self,
        info: &CanonicalInfo,
    ) -> Result<(Cholesky<f64, Dyn>, DVector<f64>, DVector<f64>)> {
        let ch = spd_cholesky(
            &(&self.precision + &info.info_matrix),
            "posterior precision",
        )?;
        let b = &self.info_vector + &info.info_vector;
        let mean = ch.solve(&b);
        Ok((ch, b, mean))
    }

    fn fused_log_weight_from(
        &self,
        info: &CanonicalInfo,
        ch: &Cholesky<f64, Dyn>,
        b: &DVector<f64>,
        mean: &DVector<f64>,
    ) -> f64 {
        self.log_weight + info.log_scale - 0.5 * self.quad
            + 0.5 * b.dot(mean)
            + 0.5 * (-chol_log_det(ch) - self.log_det_cov)
    }

    /// ln w' of the fused component, without forming its covariance.
    pub fn fused_log_weight(&self, info: &CanonicalInfo) -> Result<f64> {
        if info.log_scale == f64::NEG_INFINITY || self.log_weight == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        if let Some(w) = self.fused_log_weight_small(info) {
            return Ok(w);
        }
        let (ch, b, mean) = self.posterior(info)?;
        Ok(self.fused_log_weight_from(info, &ch, &b, &mean))
    }

    /// Allocation-free path for small dimensions. Returns `None` when the
    /// dimension is too large or the posterior precision needs regularizing.
    fn fused_log_weight_small(&self, info: &CanonicalInfo) -> Option<f64> {
        const MAX: usize = 6;
        let d = self.dim();
        if d > MAX || info.dim() != d {
            return None;
        }
        let mut l = [0.0f64; MAX * MAX];
        for i in 0..d {
            for j in 0..=i {
                let a = 0.5 * (self.precision[(i, j)] + self.precision[(j, i)])
                    + 0.5 * (info.info_matrix[(i, j)] + info.info_matrix[(j, i)]);
                let mut s = a;
                for k in 0..j {
                    s -= l[i * MAX + k] * l[j * MAX + k];
                }
                if i == j {
                    if !(s > 0.0 && s.is_finite()) {
                        return None;
                    }
                    l[i * MAX + i] = s.sqrt();
                } else {
                    l[i * MAX + j] = s / l[j * MAX + j];
                }
            }
        }
        // bᵀ(P⁻¹ + C̃)⁻¹b = |L⁻¹b|²
        let mut y = [0.0f64; MAX];
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for i in 0..d {
            let mut s = self.info_vector[i] + info.info_vector[i];
            for k in 0..i {
                s -= l[i * MAX + k] * y[k];
            }
            y[i] = s / l[i * MAX + i];
            quad += y[i] * y[i];
            log_det += 2.0 * l[i * MAX + i].ln();
        }
        Some(
            self.log_weight + info.log_scale - 0.5 * self.quad
                + 0.5 * quad
                + 0.5 * (-log_det - self.log_det_cov),
        )
    }

    /// The scaled Gaussian equal to prior(x) · exp(c − ½xᵀC̃x + xᵀẽ).
    pub fn fuse(&self, info: &CanonicalInfo) -> Result<ScaledGaussian> {
        let (ch, b, mean) = self.posterior(info)?;
        let log_weight = self.fused_log_weight_from(info, &ch, &b, &mean);
        Ok(ScaledGaussian::new(
            log_weight,
            mean,
            symmetrize(&ch.inverse()),
        ))
    }
}

/// P' = (P⁻¹ + C̃)⁻¹, m' = P'(P⁻¹m + ẽ),
/// ln w' = ln w + c − ½mᵀP⁻¹m + ½m'ᵀP'⁻¹m' + ½(ln det P' − ln det P).
pub fn fuse_prior_with_info(
    prior: &ScaledGaussian,
    info: &CanonicalInfo,
) -> Result<ScaledGaussian> {
    if prior.dim() != info.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            found: info.dim(),
        });
    }
    InfoPrior::new(prior)?.fuse(info)
}

/// Exact pointwise product a(x)·b(x).
pub fn gaussian_product_pair(a: &ScaledGaussian, b: &ScaledGaussian) -> Result<ScaledGaussian> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let sum_cov = &a.cov + &b.cov;
    let ch = spd_cholesky(&sum_cov, "sum of covariances")?;
    let diff = &a.mean - &b.mean;
    let log_weight = a.log_weight + b.log_weight + log_normal_pdf(&diff, &ch);
    // P = Pa (Pa+Pb)⁻¹ Pb, m = Pb (Pa+Pb)⁻¹ ma + Pa (Pa+Pb)⁻¹ mb
    let cov = symmetrize(&(&a.cov * ch.solve(&b.cov)));
    let mean = &b.cov * ch.solve(&a.mean) + &a.cov * ch.solve(&b.mean);
    Ok(ScaledGaussian::new(log_weight, mean, cov))
}

/// Single scaled Gaussian with the zeroth, first and second moments of `gm`.
pub fn moment_match(gm: &GaussianMixture) -> Result<ScaledGaussian> {
    let total = gm.log_total_weight();
    if !total.is_finite() {
        return Err(Error::ZeroWeight);
    }
    let d = gm.dim();
    let weights: Vec<f64> = gm.iter().map(|c| (c.log_weight - total).exp()).collect();
    let mut mean = DVector::zeros(d);
    for (w, c) in weights.iter().zip(gm.iter()) {
        mean += &c.mean * *w;
    }
    let mut cov = DMatrix::zeros(d, d);
    for (w, c) in weights.iter().zip(gm.iter()) {
        let dm = &c.mean - &mean;
        cov += (&c.cov + &dm * dm.transpose()) * *w;
    }
    Ok(ScaledGaussian::new(total, mean, symmetrize(&cov)))
}

/// (c·N(m, P))^{1/S} = c'·N(m, S·P) with
/// ln c' = (ln c)/S + ½ ln det(2πSP) − (1/2S) ln det(2πP).
pub fn gaussian_fractional_power(g: &ScaledGaussian, s_count: usize) -> Result<ScaledGaussian> {
    if s_count == 0 {
        return Err(Error::Config(
            "fractional power needs a positive agent count".into(),
        ));
    }
    if s_count == 1 {
        return Ok(g.clone());
    }
    let s = s_count as f64;
    let d = g.dim() as f64;
    let ch = spd_cholesky(&g.cov, "fractional power covariance")?;
    let log_det_2pi_p = d * LN_2PI + chol_log_det(&ch);
    let log_det_2pi_sp = log_det_2pi_p + d * s.ln();
    let log_weight = g.log_weight / s + 0.5 * log_det_2pi_sp - log_det_2pi_p / (2.0 * s);
    Ok(ScaledGaussian::new(log_weight, g.mean.clone(), &g.cov * s))
}

/// Keeps at most `max_components` of the heaviest components, dropping any whose
/// weight is below `weight_floor` times the largest weight. Not renormalized.
pub fn gm_truncate(
    gm: &GaussianMixture,
    max_components: usize,
    weight_floor: f64,
) -> GaussianMixture {
    let max_components = max_components.max(1);
    let mut order: Vec<usize> = (0..gm.len()).collect();
    order.sort_by(|&a, &b| {
        gm.components[b]
            .log_weight
            .partial_cmp(&gm.components[a].log_weight)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let Some(&top) = order.first() else {
        return gm.clone();
    };
    let cutoff = gm.components[top].log_weight + weight_floor.ln();
    let components = order
        .into_iter()
        .take(max_components)
        .filter(|&i| {
            gm.components[i].log_weight >= cutoff && gm.components[i].log_weight > f64::NEG_INFINITY
        })
        .map(|i| gm.components[i].clone())
        .collect();
    GaussianMixture {
        dim: gm.dim,
        components,
    }
}

/// Greedy moment-preserving merge: starting from the heaviest remaining
/// component, every component within squared Mahalanobis distance `threshold`
/// of its mean (under its covariance) is replaced, together with it, by their
/// moment-matched Gaussian. Total weight is preserved. `threshold ≤ 0` is a no-op.
pub fn gm_merge(gm: &GaussianMixture, threshold: f64) -> Result<GaussianMixture> {
    if threshold <= 0.0 || gm.len() < 2 {
        return Ok(gm.clone());
    }
    let mut remaining: Vec<usize> = (0..gm.len())
        .filter(|&i| gm.components[i].log_weight > f64::NEG_INFINITY)
        .collect();
    remaining.sort_by(|&a, &b| {
        gm.components[b]
            .log_weight
            .total_cmp(&gm.components[a].log_weight)
            .then(a.cmp(&b))
    });
    let mut merged = Vec::new();
    while let Some(&head) = remaining.first() {
        let ch = spd_cholesky(&gm.components[head].cov, "merge covariance")?;
        let center = &gm.components[head].mean;
        let (group, rest): (Vec<usize>, Vec<usize>) = remaining.iter().partition(|&&i| {
            let diff = &gm.components[i].mean - center;
            let y = ch.l_dirty().solve_lower_triangular(&diff).unwrap_or(diff);
            y.norm_squared() <= threshold
        });
        if group.len() == 1 {
            merged.push(gm.components[head].clone());
        } else {
            let part = GaussianMixture {
                dim: gm.dim,
                components: group.iter().map(|&i| gm.components[i].clone()).collect(),
            };
            merged.push(moment_match(&part)?);
        }
        remaining = rest;
    }
    Ok(GaussianMixture {
        dim: gm.dim,
        components: merged,
    })
}

/// Default cap on mixture size.
pub const DEFAULT_MAX_COMPONENTS: usize = 20;
/// Default relative weight floor.
pub const DEFAULT_WEIGHT_FLOOR: f64 = 1e-6;

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(lw: f64, m: f64, v: f64) -> ScaledGaussian {
        ScaledGaussian::new(
            lw,
            DVector::from_element(1, m),
            DMatrix::from_element(1, 1, v),
        )
    }

    #[test]
    fn product_of_standard_normals() {
        let p = gaussian_product_pair(&g1(0.0, 0.0, 1.0), &g1(0.0, 0.0, 1.0)).unwrap();
        assert!((p.weight() - 0.282_094_791_773_878_1).abs() < 1e-12);
        assert!(p.mean[0].abs() < 1e-15);
        assert!((p.cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_of_offset_normals() {
        let p = gaussian_product_pair(&g1(0.0, 1.0, 1.0), &g1(0.0, -1.0, 1.0)).unwrap();
        let expected = (-1.0f64).exp() / (4.0 * std::f64::consts::PI).sqrt();
        assert!((p.weight() - expected).abs() < 1e-14);
        assert!((expected - 0.10377).abs() < 1e-5);
        assert!(p.mean[0].abs() < 1e-15);
        assert!((p.cov[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_with_itself_keeps_mean() {
        let a = ScaledGaussian::normal(
            DVector::from_vec(vec![1.0, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        );
        let p = gaussian_product_pair(&a, &a).unwrap();
        assert!((&p.mean - &a.mean).amax() < 1e-12);
        assert!((&p.cov - &a.cov * 0.5).amax() < 1e-12);
    }

    #[test]
    fn canonicalize_constant_and_unit_term() {
        let c = CanonicalInfo::constant(2, 0.3);
        assert_eq!(c.info_matrix, DMatrix::zeros(2, 2));
        assert_eq!(c.log_scale, 0.3);

        let term = LikelihoodComponent {
            log_u: 0.0,
            residual: DVector::zeros(1),
            obs_matrix: DMatrix::identity(1, 1),
            noise: DMatrix::identity(1, 1),
        };
        let info = canonicalize(&term).unwrap();
        assert!((info.log_scale + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((info.info_matrix[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(info.info_vector[0].abs() < 1e-15);

        let scaled = canonicalize(&LikelihoodComponent {
            log_u: 2.0f64.ln(),
            ..term
        })
        .unwrap();
        assert!((scaled.log_scale - info.log_scale - 2.0f64.ln()).abs() < 1e-14);
        assert_eq!(scaled.info_matrix, info.info_matrix);
    }

    #[test]
    fn fuse_matches_pair_product() {
        let term = LikelihoodComponent {
            log_u: 0.0,
            residual: DVector::zeros(1),
            obs_matrix: DMatrix::identity(1, 1),
            noise: DMatrix::identity(1, 1),
        };
        let fused =
            fuse_prior_with_info(&g1(0.0, 0.0, 1.0), &canonicalize(&term).unwrap()).unwrap();
        assert!((fused.weight() - 0.282_094_791_773_878_1).abs() < 1e-12);
        assert!((fused.cov[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fuse_with_null_info_is_identity() {
        let prior = g1(-0.7, 2.0, 3.0);
        let fused = fuse_prior_with_info(&prior, &CanonicalInfo::constant(1, 0.0)).unwrap();
        assert!((fused.log_weight - prior.log_weight).abs() < 1e-12);
        assert!((fused.mean[0] - 2.0).abs() < 1e-12);
        assert!((fused.cov[(0, 0)] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn moment_match_examples() {
        let gm = GaussianMixture::from_components(
            1,
            vec![g1(0.5f64.ln(), 1.0, 1.0), g1(0.5f64.ln(), -1.0, 1.0)],
        )
        .unwrap();
        let mm = moment_match(&gm).unwrap();
        assert!(mm.log_weight.abs() < 1e-15);
        assert!(mm.mean[0].abs() < 1e-15);
        assert!((mm.cov[(0, 0)] - 2.0).abs() < 1e-14);

        let gm = GaussianMixture::from_components(
            1,
            vec![g1(0.75f64.ln(), 0.0, 1.0), g1(0.25f64.ln(), 4.0, 1.0)],
        )
        .unwrap();
        let mm = moment_match(&gm).unwrap();
        assert!((mm.mean[0] - 1.0).abs() < 1e-14);
        assert!((mm.cov[(0, 0)] - 4.0).abs() < 1e-13);

        assert!(matches!(
            moment_match(&GaussianMixture::empty(1)),
            Err(Error::ZeroWeight)
        ));
    }

    #[test]
    fn fractional_power_example_and_round_trip() {
        let g = g1(0.0, 0.0, 1.0);
        let root = gaussian_fractional_power(&g, 2).unwrap();
        let expected =
            (4.0 * std::f64::consts::PI).sqrt() / (2.0 * std::f64::consts::PI).powf(0.25);
        assert!((root.weight() - expected).abs() < 1e-12);
        assert!((expected - 2.2391).abs() < 1e-4);
        assert!((root.cov[(0, 0)] - 2.0).abs() < 1e-15);

        let back = gaussian_product_pair(&root, &root).unwrap();
        assert!((back.log_weight - g.log_weight).abs() < 1e-12);
        assert!((back.cov[(0, 0)] - 1.0).abs() < 1e-12);

        assert_eq!(gaussian_fractional_power(&g, 1).unwrap(), g);
    }

    #[test]
    fn truncate_rules() {
        let gm = GaussianMixture::from_components(
            1,
            vec![
                g1(0.9f64.ln(), 0.0, 1.0),
                g1(0.1f64.ln(), 1.0, 1.0),
                g1(1e-12f64.ln(), 2.0, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(gm_truncate(&gm, 10, 1e-6).len(), 2);
        let one = gm_truncate(&gm, 1, 1e-6);
        assert_eq!(one.len(), 1);
        assert_eq!(one.components()[0].mean[0], 0.0);
        let single = GaussianMixture::single(g1(0.0, 0.0, 1.0));
        assert_eq!(gm_truncate(&single, 20, 1e-6), single);
    }

    #[test]
    fn merge_collapses_near_duplicates_only() {
        let gm = GaussianMixture::from_components(
            1,
            vec![
                g1(0.5f64.ln(), 0.0, 1.0),
                g1(0.3f64.ln(), 0.5, 1.0),
                g1(0.2f64.ln(), 5.0, 1.0),
            ],
        )
        .unwrap();
        let merged = gm_merge(&gm, 1.0).unwrap();
        assert_eq!(merged.len(), 2);
        assert!((merged.total_weight() - 1.0).abs() < 1e-12);
        let mm = moment_match(&gm).unwrap();
        let mm_merged = moment_match(&merged).unwrap();
        assert!((mm.mean[0] - mm_merged.mean[0]).abs() < 1e-12);
        assert!((mm.cov[(0, 0)] - mm_merged.cov[(0, 0)]).abs() < 1e-12);
        assert_eq!(gm_merge(&gm, 0.0).unwrap(), gm);
        assert_eq!(gm_merge(&gm, 100.0).unwrap().len(), 1);
    }

    #[test]
    fn log_sum_exp_examples() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[0.0]), 0.0);
        assert!((log_sum_exp(&[2.0f64.ln(), 3.0f64.ln()]) - 5.0f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2.0f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn regularization_rescues_semidefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(spd_cholesky(&m, "test").is_ok());
        assert!(spd_cholesky(&DMatrix::zeros(2, 2), "test").is_err());
    }
}
