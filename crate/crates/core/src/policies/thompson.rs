//! Thompson sampling on projected contexts (BCMAB-RP) and on raw contexts
//! (Linear TS).

use nalgebra::DVector;

use super::{argmax, check_arms, Policy, PolicyDecision, PolicyKind, PosteriorState};
use crate::error::{Error, Result};
use crate::projection::{build_projection, ProjectionMatrix};
use crate::rng::{streams, Rng};
use crate::types::{AlgoParams, Context};

fn confidence_log(t: u64, l_z: f64, lambda: f64, delta: f64) -> f64 {
    ((2.0 + 2.0 * t as f64 * l_z * l_z / lambda) / delta).ln()
}

/// Posterior scale
/// `ν_t = R√(4d·ln((2 + 2tL_z²/λ)/δ)) + √λ·L_ψ + ε√t`.
pub fn compute_nu(t: u64, p: &AlgoParams) -> Result<f64> {
    p.validate()?;
    if t == 0 {
        return Err(Error::invalid("round index starts at 1"));
    }
    let log_term = confidence_log(t, p.l_z, p.lambda, p.delta);
    Ok(p.noise_scale * (4.0 * p.d as f64 * log_term).sqrt()
        + p.lambda.sqrt() * p.l_psi
        + p.epsilon * (t as f64).sqrt())
}

/// `ν′_t` for Linear TS: the same form with `p.d` read as the full context
/// dimension and no projection-distortion term.
pub fn compute_nu_unprojected(t: u64, p: &AlgoParams) -> Result<f64> {
    let mut q = p.clone();
    q.epsilon = 0.0;
    compute_nu(t, &q)
}

/// Confidence radius of the ridge estimate,
/// `α_t = R√(d·ln((2 + 2tL_z²/λ)/δ)) + √λ·L_ψ + ε√t`.
pub fn compute_alpha(t: u64, p: &AlgoParams) -> Result<f64> {
    p.validate()?;
    if t == 0 {
        return Err(Error::invalid("round index starts at 1"));
    }
    let log_term = confidence_log(t, p.l_z, p.lambda, p.delta);
    Ok(p.noise_scale * (p.d as f64 * log_term).sqrt()
        + p.lambda.sqrt() * p.l_psi
        + p.epsilon * (t as f64).sqrt())
}

/// Sampling radius `β_t = min{√(4d·ln t), √(4·ln(tA))}·ν_t`.
pub fn compute_beta(t: u64, num_arms: usize, p: &AlgoParams) -> Result<f64> {
    let nu = compute_nu(t, p)?;
    let t_f = t as f64;
    let by_dim = (4.0 * p.d as f64 * t_f.ln()).sqrt();
    let by_arms = (4.0 * (t_f * num_arms as f64).ln()).sqrt();
    Ok(by_dim.min(by_arms) * nu)
}

/// Draw `ψ̃ ~ N(ψ̂, ν²Z⁻¹)` as `ψ̂ + ν·L·g` with `LLᵀ = Z⁻¹`.
///
/// A failed factorization forces an inverse refresh and one retry.
pub fn sample_parameter(state: &mut PosteriorState, nu: f64, rng: &mut Rng) -> Result<DVector<f64>> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::invalid(format!("nu must be finite and >= 0, got {nu}")));
    }
    let dim = state.dim();
    let g = DVector::from_fn(dim, |_, _| rng.standard_normal());
    let factor = match state.gram_inv().clone().cholesky() {
        Some(c) => c,
        None => {
            state.refresh()?;
            state
                .gram_inv()
                .clone()
                .cholesky()
                .ok_or_else(|| Error::Numeric("posterior covariance is not positive definite".into()))?
        }
    };
    let mut draw = state.psi_hat().clone();
    draw.gemv(nu, &factor.l(), &g, 1.0);
    Ok(draw)
}

fn thompson_scores(vectors: &[DVector<f64>], sampled: &DVector<f64>) -> Vec<f64> {
    vectors.iter().map(|z| sampled.dot(z)).collect()
}

/// One BCMAB-RP decision: project every context, draw one `ψ̃` shared by all
/// arms and play `argmax ψ̃ᵀz_a`.
pub fn bcmab_select(
    state: &mut PosteriorState,
    contexts: &[Context],
    projection: &ProjectionMatrix,
    nu: f64,
    rng: &mut Rng,
) -> Result<PolicyDecision> {
    check_arms(contexts)?;
    let reduced = contexts
        .iter()
        .map(|x| projection.apply(x.as_vector()))
        .collect::<Result<Vec<_>>>()?;
    let sampled = sample_parameter(state, nu, rng)?;
    let index_values = thompson_scores(&reduced, &sampled);
    Ok(PolicyDecision {
        arm: argmax(&index_values)?,
        index_values,
        sampled_parameter: Some(sampled),
    })
}

/// Linear TS decision on the raw contexts.
pub fn linear_ts_select(
    state: &mut PosteriorState,
    contexts: &[Context],
    nu: f64,
    rng: &mut Rng,
) -> Result<PolicyDecision> {
    check_arms(contexts)?;
    if let Some(x) = contexts.iter().find(|x| x.dim() != state.dim()) {
        return Err(Error::invalid(format!(
            "context has length {}, posterior has dimension {}",
            x.dim(),
            state.dim()
        )));
    }
    let sampled = sample_parameter(state, nu, rng)?;
    let index_values: Vec<f64> = contexts.iter().map(|x| sampled.dot(x.as_vector())).collect();
    Ok(PolicyDecision {
        arm: argmax(&index_values)?,
        index_values,
        sampled_parameter: Some(sampled),
    })
}

#[derive(Clone, Debug)]
pub struct BcmabRp {
    params: AlgoParams,
    projection: ProjectionMatrix,
    state: PosteriorState,
    rng: Rng,
}

impl BcmabRp {
    /// Draws `P` from the `projection` stream of `seed`.
    pub fn new(n: usize, params: AlgoParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let projection = build_projection(n, params.d, params.kappa_sq, &mut Rng::new(seed, streams::PROJECTION))?;
        Self::with_projection(params, projection, Rng::new(seed, streams::POSTERIOR))
    }

    pub fn with_projection(params: AlgoParams, projection: ProjectionMatrix, rng: Rng) -> Result<Self> {
        params.validate()?;
        if projection.d() != params.d {
            return Err(Error::invalid(format!(
                "projection has {} rows but d = {}",
                projection.d(),
                params.d
            )));
        }
        let state = PosteriorState::new(params.d, params.lambda)?;
        Ok(Self {
            params,
            projection,
            state,
            rng,
        })
    }

    pub fn params(&self) -> &AlgoParams {
        &self.params
    }

    pub fn state(&self) -> &PosteriorState {
        &self.state
    }
}

impl Policy for BcmabRp {
    fn kind(&self) -> PolicyKind {
        PolicyKind::BcmabRp
    }

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision> {
        let nu = compute_nu(self.state.t(), &self.params)?;
        bcmab_select(&mut self.state, contexts, &self.projection, nu, &mut self.rng)
    }

    fn update(&mut self, _arm: usize, context: &Context, reward: f64) -> Result<()> {
        let z = self.projection.apply(context.as_vector())?;
        self.state.update(&z, reward)
    }

    fn posterior(&self) -> Option<&PosteriorState> {
        Some(&self.state)
    }

    fn projection(&self) -> Option<&ProjectionMatrix> {
        Some(&self.projection)
    }
}

/// Thompson sampling in the original `n`-dimensional space. `params.d` holds
/// `n` and `params.l_z` bounds `‖x‖`.
#[derive(Clone, Debug)]
pub struct LinearTs {
    params: AlgoParams,
    state: PosteriorState,
    rng: Rng,
}

impl LinearTs {
    pub fn new(params: AlgoParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let state = PosteriorState::new(params.d, params.lambda)?;
        Ok(Self {
            params,
            state,
            rng: Rng::new(seed, streams::POSTERIOR),
        })
    }

    pub fn state(&self) -> &PosteriorState {
        &self.state
    }
}

impl Policy for LinearTs {
    fn kind(&self) -> PolicyKind {
        PolicyKind::LinearTs
    }

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision> {
        let nu = compute_nu_unprojected(self.state.t(), &self.params)?;
        linear_ts_select(&mut self.state, contexts, nu, &mut self.rng)
    }

    fn update(&mut self, _arm: usize, context: &Context, reward: f64) -> Result<()> {
        if context.dim() != self.state.dim() {
            return Err(Error::invalid("context dimension mismatch"));
        }
        self.state.update(context.as_vector(), reward)
    }

    fn posterior(&self) -> Option<&PosteriorState> {
        Some(&self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_context;
    use nalgebra::DMatrix;

    fn ctx(v: &[f64]) -> Context {
        validate_context(v).unwrap()
    }

    #[test]
    fn nu_reduces_to_ridge_term() {
        let mut p = AlgoParams::new(3);
        p.noise_scale = 0.0;
        p.epsilon = 0.0;
        p.lambda = 4.0;
        p.l_psi = 1.0;
        for t in [1, 10, 1000] {
            assert_eq!(compute_nu(t, &p).unwrap(), 2.0);
        }
    }

    #[test]
    fn nu_direct_arithmetic() {
        let p = AlgoParams {
            d: 4,
            lambda: 1.0,
            delta: 0.1,
            epsilon: 0.1,
            kappa_sq: 0.25,
            noise_scale: 1.0,
            l_z: 1.0,
            l_psi: 1.0,
        };
        // √(16·ln 40) + 1 + 0.1, evaluated term by term.
        let expected = (16.0f64 * 40.0f64.ln()).sqrt() + 1.0 + 0.1;
        let nu = compute_nu(1, &p).unwrap();
        assert!((nu - expected).abs() < 1e-12);
        assert!((nu - 8.7826).abs() < 1e-4);
        assert!(compute_nu(10, &p).unwrap() > nu);
        assert!(compute_nu(0, &p).is_err());
    }

    #[test]
    fn alpha_beta_shapes() {
        let p = AlgoParams::new(8);
        // β₁ = 0 since ln 1 = 0.
        assert_eq!(compute_beta(1, 5, &p).unwrap(), 0.0);
        let a = compute_alpha(10, &p).unwrap();
        let nu = compute_nu(10, &p).unwrap();
        assert!(a < nu);
        let b = compute_beta(10, 5, &p).unwrap();
        let expected = (4.0 * 8.0 * 10f64.ln()).sqrt().min((4.0 * 50f64.ln()).sqrt()) * nu;
        assert!((b - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_nu_returns_estimate() {
        let mut s = PosteriorState::from_parts(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 3.0]),
            DVector::from_vec(vec![0.4, -0.7]),
            1.0,
        )
        .unwrap();
        let psi = s.psi_hat().clone();
        let draw = sample_parameter(&mut s, 0.0, &mut Rng::new(1, "s")).unwrap();
        assert_eq!(draw, psi);
    }

    #[test]
    fn init_covariance_is_identity() {
        let mut s = PosteriorState::new(3, 1.0).unwrap();
        let mut rng = Rng::new(77, "cov");
        let n = 50_000;
        let draws: Vec<DVector<f64>> = (0..n).map(|_| sample_parameter(&mut s, 1.0, &mut rng).unwrap()).collect();
        let mean = draws.iter().fold(DVector::zeros(3), |acc, d| acc + d) / n as f64;
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        for d in &draws {
            let c = d - &mean;
            cov += &c * c.transpose();
        }
        cov /= (n - 1) as f64;
        assert!((cov - DMatrix::<f64>::identity(3, 3)).amax() <= 0.05);
    }

    #[test]
    fn one_dimensional_posterior_spread() {
        // Z = [4], ψ̂ = [2], ν = 2 → N(2, ν²/Z) = N(2, 1).
        let mut s = PosteriorState::from_parts(
            DMatrix::from_element(1, 1, 4.0),
            DVector::from_element(1, 8.0),
            1.0,
        )
        .unwrap();
        assert_eq!(s.psi_hat()[0], 2.0);
        let mut rng = Rng::new(5, "1d");
        let n = 50_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_parameter(&mut s, 2.0, &mut rng).unwrap()[0]).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((0.98..=1.02).contains(&sd), "sd {sd}");
        assert!((m - 2.0).abs() < 0.02);
    }

    #[test]
    fn negative_nu_rejected() {
        let mut s = PosteriorState::new(2, 1.0).unwrap();
        assert!(sample_parameter(&mut s, -1.0, &mut Rng::new(0, "x")).is_err());
    }

    #[test]
    fn single_arm_always_chosen() {
        let mut s = PosteriorState::new(2, 1.0).unwrap();
        let p = ProjectionMatrix::from_entries(2, 3, &[1.0, 0.5, 0.0, -0.3, 0.2, 1.0]).unwrap();
        let mut rng = Rng::new(3, "x");
        for _ in 0..20 {
            let d = bcmab_select(&mut s, &[ctx(&[0.2, 0.1, -0.3])], &p, 5.0, &mut rng).unwrap();
            assert_eq!(d.arm, 0);
        }
    }

    #[test]
    fn zero_sample_ties_to_first_arm() {
        let mut s = PosteriorState::new(2, 1.0).unwrap();
        let p = ProjectionMatrix::identity(2).unwrap();
        let arms = [ctx(&[0.1, 0.2]), ctx(&[0.9, 0.0]), ctx(&[0.0, -0.5])];
        let d = bcmab_select(&mut s, &arms, &p, 0.0, &mut Rng::new(0, "x")).unwrap();
        assert_eq!(d.arm, 0);
        assert!(d.index_values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn crafted_state_picks_largest_score() {
        // ψ̂ = (1, 0) from Z = I, b = (1, 0); ν = 0 makes ψ̃ = ψ̂.
        let mut s = PosteriorState::from_parts(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
        let p = ProjectionMatrix::identity(2).unwrap();
        let arms = [ctx(&[0.5, 0.0]), ctx(&[0.9, 0.0]), ctx(&[0.2, 0.9])];
        let d = bcmab_select(&mut s, &arms, &p, 0.0, &mut Rng::new(0, "x")).unwrap();
        assert_eq!(d.arm, 1);
        assert_eq!(d.index_values, vec![0.5, 0.9, 0.2]);
    }

    #[test]
    fn empty_arm_set_rejected() {
        let mut s = PosteriorState::new(2, 1.0).unwrap();
        let p = ProjectionMatrix::identity(2).unwrap();
        assert!(matches!(
            bcmab_select(&mut s, &[], &p, 1.0, &mut Rng::new(0, "x")),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn identity_projection_matches_linear_ts() {
        let n = 5;
        let mut params = AlgoParams::new(n);
        params.epsilon = 0.0;
        let mut bc = BcmabRp::with_projection(
            params.clone(),
            ProjectionMatrix::identity(n).unwrap(),
            Rng::new(9, streams::POSTERIOR),
        )
        .unwrap();
        let mut lt = LinearTs::new(params, 9).unwrap();
        let mut env = Rng::new(9, "contexts");
        for _ in 0..300 {
            let arms: Vec<Context> = (0..4)
                .map(|_| {
                    let g = DVector::from_fn(n, |_, _| env.standard_normal());
                    Context::try_from(&g / g.norm() * env.uniform()).unwrap()
                })
                .collect();
            let a = bc.select(&arms).unwrap();
            let b = lt.select(&arms).unwrap();
            assert_eq!(a, b);
            let r = if env.bernoulli(0.5) { 1.0 } else { 0.0 };
            bc.update(a.arm, &arms[a.arm], r).unwrap();
            lt.update(b.arm, &arms[b.arm], r).unwrap();
        }
        assert_eq!(bc.state(), lt.state());
    }

    #[test]
    fn scaling_sample_keeps_choice() {
        let mut rng = Rng::new(4, "scale");
        for _ in 0..200 {
            let sampled = DVector::from_fn(3, |_, _| rng.standard_normal());
            let zs: Vec<DVector<f64>> = (0..6).map(|_| DVector::from_fn(3, |_, _| rng.standard_normal())).collect();
            let base = argmax(&thompson_scores(&zs, &sampled)).unwrap();
            for c in [1e-3, 0.5, 7.0, 1e4] {
                let scaled = &sampled * c;
                assert_eq!(argmax(&thompson_scores(&zs, &scaled)).unwrap(), base);
            }
            // A new arm leaves the relative order of the old ones alone.
            let mut more = zs.clone();
            more.push(DVector::from_fn(3, |_, _| rng.standard_normal()));
            let old = thompson_scores(&zs, &sampled);
            let new = thompson_scores(&more, &sampled);
            assert_eq!(&new[..6], &old[..]);
        }
    }
}
