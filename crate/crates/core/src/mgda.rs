//! Multiple-gradient descent: pick simplex weights `α` minimizing `‖Σ α_d g_d‖²`
//! over the per-domain shared-parameter gradients, then step every parameter.
//!
//! For two domains the minimizer has a closed form; for more, Frank–Wolfe iterations
//! over the simplex use the two-point solution as an exact line search.

use ndarray::{Array1, Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn::ModelParams;
use crate::objective::GradientBundle;

/// Below this squared distance two gradients are treated as identical.
const DEGENERATE_GAP: f64 = 1e-18;

/// Weights on the simplex, one per domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainWeights(Vec<f64>);

impl DomainWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::InvalidInput("at least one weight is required".into()));
        }
        if alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput(format!("weights must lie in [0, 1]: {alpha:?}")));
        }
        let sum: f64 = alpha.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        Ok(DomainWeights(alpha))
    }

    pub fn uniform(n: usize) -> Self {
        DomainWeights(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The constant weights `(α, 1 - α)` of the fixed-weight two-domain variant.
pub fn fixed_alpha_weights(alpha_1: f64) -> Result<DomainWeights> {
    if !(0.0..=1.0).contains(&alpha_1) {
        return Err(Error::InvalidConfig(format!(
            "fixed α must be in [0, 1], got {alpha_1}"
        )));
    }
    Ok(DomainWeights(vec![alpha_1, 1.0 - alpha_1]))
}

fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `G / (‖G‖ · L)` with the Frobenius norm. Returns `None` when the norm or the
/// loss is zero (or not finite), in which case no weight update should be made.
pub fn normalize_gradient(grad: &Array2<f64>, loss: f64) -> Option<Array2<f64>> {
    let norm = frobenius(grad);
    let scale = norm * loss;
    if !(scale > 0.0 && scale.is_finite()) {
        return None;
    }
    Some(grad / scale)
}

/// Closed-form argmin over `α ∈ [0,1]` of `‖α u + (1-α) v‖²` from the three inner
/// products `uᵀu`, `uᵀv`, `vᵀv`.
pub fn solve_alpha_2_gram(uu: f64, uv: f64, vv: f64) -> f64 {
    let gap = uu - 2.0 * uv + vv;
    if gap < DEGENERATE_GAP {
        return 0.5;
    }
    if uv >= vv {
        0.0
    } else if uv >= uu {
        1.0
    } else {
        ((vv - uv) / gap).clamp(0.0, 1.0)
    }
}

/// Weight on `u` minimizing `‖α u + (1-α) v‖²` over `[0, 1]`.
pub fn solve_alpha_2(u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), v.len());
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    solve_alpha_2_gram(dot(u, u), dot(u, v), dot(v, v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrankWolfeConfig {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for FrankWolfeConfig {
    fn default() -> Self {
        FrankWolfeConfig {
            max_iters: 50,
            tol: 1e-8,
        }
    }
}

/// Minimum-norm point of the convex hull of `grads` by Frank–Wolfe with exact line search.
pub fn solve_alpha_fw(grads: &[Vec<f64>], cfg: FrankWolfeConfig) -> Result<DomainWeights> {
    if grads.is_empty() {
        return Err(Error::InvalidInput("no gradients to combine".into()));
    }
    let n = grads.len();
    let dim = grads[0].len();
    if grads.iter().any(|g| g.len() != dim) {
        return Err(Error::Shape("gradients have different lengths".into()));
    }
    if n == 1 {
        return Ok(DomainWeights(vec![1.0]));
    }
    let gram = Array2::from_shape_fn((n, n), |(i, j)| {
        grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum::<f64>()
    });
    let mut alpha = Array1::from_elem(n, 1.0 / n as f64);
    let mut objective = alpha.dot(&gram.dot(&alpha));
    for _ in 0..cfg.max_iters {
        // inner products of each vertex with the current combination w = Σ α g
        let gw = gram.dot(&alpha);
        let t = gw
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap();
        // line search on (1-γ) w + γ g_t: γ is the weight on g_t
        let gamma = solve_alpha_2_gram(gram[[t, t]], gw[t], objective);
        let mut next = &alpha * (1.0 - gamma);
        next[t] += gamma;
        let next_objective = next.dot(&gram.dot(&next));
        let improvement = objective - next_objective;
        if improvement <= 0.0 {
            break;
        }
        alpha = next;
        objective = next_objective;
        if improvement < cfg.tol {
            break;
        }
    }
    Ok(DomainWeights(project_to_simplex(alpha.to_vec())))
}

/// Clears rounding drift so the weights satisfy the simplex invariants exactly.
fn project_to_simplex(mut alpha: Vec<f64>) -> Vec<f64> {
    for a in alpha.iter_mut() {
        *a = a.clamp(0.0, 1.0);
    }
    let sum: f64 = alpha.iter().sum();
    for a in alpha.iter_mut() {
        *a /= sum;
    }
    alpha
}

/// Weights for a set of (already normalized) shared gradients: closed form for two
/// domains, Frank–Wolfe otherwise.
pub fn solve_alpha(grads: &[Vec<f64>], fw: FrankWolfeConfig) -> Result<DomainWeights> {
    match grads {
        [] => Err(Error::InvalidInput("no gradients to combine".into())),
        [_] => Ok(DomainWeights(vec![1.0])),
        [u, v] => {
            let a = solve_alpha_2(u, v);
            Ok(DomainWeights(vec![a, 1.0 - a]))
        }
        _ => solve_alpha_fw(grads, fw),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum OptimizerMethod {
    Sgd,
    #[default]
    Adam,
}

impl std::str::FromStr for OptimizerMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerMethod::Sgd),
            "adam" => Ok(OptimizerMethod::Adam),
            _ => Err(Error::InvalidConfig(format!("unknown optimizer {s:?}"))),
        }
    }
}

impl std::fmt::Display for OptimizerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerMethod::Sgd => "sgd",
            OptimizerMethod::Adam => "adam",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Moments {
    first: Array2<f64>,
    second: Array2<f64>,
}

impl Moments {
    fn zeros_like(m: &Array2<f64>) -> Self {
        Moments {
            first: Array2::zeros(m.raw_dim()),
            second: Array2::zeros(m.raw_dim()),
        }
    }
}

/// Plain gradient steps or Adam, one moment pair per parameter matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub method: OptimizerMethod,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Adam step counter of the shared matrix and of each specific matrix.
    steps: Vec<u64>,
    moments: Vec<Moments>,
}

impl OptimizerState {
    pub fn new(method: OptimizerMethod, learning_rate: f64, params: &ModelParams) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        let moments = match method {
            OptimizerMethod::Sgd => Vec::new(),
            OptimizerMethod::Adam => params.matrices().map(Moments::zeros_like).collect(),
        };
        Ok(OptimizerState {
            method,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            steps: vec![0; 1 + params.n_domains()],
            moments,
        })
    }

    /// Applies one step to matrix `slot` (0 = shared, 1 + d = domain d).
    fn step(&mut self, slot: usize, param: &mut Array2<f64>, direction: &Array2<f64>) {
        match self.method {
            OptimizerMethod::Sgd => param.scaled_add(-self.learning_rate, direction),
            OptimizerMethod::Adam => {
                self.steps[slot] += 1;
                let t = self.steps[slot] as i32;
                let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
                let m = &mut self.moments[slot];
                let c1 = 1.0 - b1.powi(t);
                let c2 = 1.0 - b2.powi(t);
                Zip::from(param)
                    .and(&mut m.first)
                    .and(&mut m.second)
                    .and(direction)
                    .for_each(|p, m1, m2, &g| {
                        *m1 = b1 * *m1 + (1.0 - b1) * g;
                        *m2 = b2 * *m2 + (1.0 - b2) * g * g;
                        let m_hat = *m1 / c1;
                        let v_hat = *m2 / c2;
                        *p -= lr * m_hat / (v_hat.sqrt() + eps);
                    });
            }
        }
    }

    pub fn shared_steps(&self) -> u64 {
        self.steps[0]
    }
}

/// `Σ_d α_d G_d` over the bundles' shared gradients.
pub fn combine_shared(bundles: &[GradientBundle], weights: &DomainWeights) -> Result<Array2<f64>> {
    if bundles.len() != weights.len() || bundles.is_empty() {
        return Err(Error::Shape(format!(
            "{} bundles for {} weights",
            bundles.len(),
            weights.len()
        )));
    }
    let mut out = Array2::zeros(bundles[0].grad_theta_s.raw_dim());
    for (b, &a) in bundles.iter().zip(weights.as_slice()) {
        if b.grad_theta_s.dim() != out.dim() {
            return Err(Error::Shape("shared gradients differ in shape".into()));
        }
        out.scaled_add(a, &b.grad_theta_s);
    }
    Ok(out)
}

/// Steps each `Θ_d` along its own domain's gradient and `Θ_s` along `shared_direction`.
pub fn apply_updates_with_direction(
    params: &mut ModelParams,
    bundles: &[GradientBundle],
    shared_direction: &Array2<f64>,
    state: &mut OptimizerState,
) -> Result<()> {
    if bundles.len() != params.n_domains() {
        return Err(Error::Shape(format!(
            "{} gradient bundles for {} domains",
            bundles.len(),
            params.n_domains()
        )));
    }
    if shared_direction.dim() != params.theta_s.dim() {
        return Err(Error::Shape(format!(
            "shared direction {:?} vs Θ_s {:?}",
            shared_direction.dim(),
            params.theta_s.dim()
        )));
    }
    for (d, b) in bundles.iter().enumerate() {
        if b.domain != d {
            return Err(Error::InvalidInput(format!(
                "bundle {d} belongs to domain {}",
                b.domain
            )));
        }
        if b.grad_theta_d.dim() != params.theta_d[d].dim() {
            return Err(Error::Shape(format!(
                "domain {d}: gradient {:?} vs Θ_d {:?}",
                b.grad_theta_d.dim(),
                params.theta_d[d].dim()
            )));
        }
    }
    for (d, b) in bundles.iter().enumerate() {
        state.step(1 + d, &mut params.theta_d[d], &b.grad_theta_d);
    }
    state.step(0, &mut params.theta_s, shared_direction);
    Ok(())
}

/// One update with the weighted (unnormalized) shared gradients.
pub fn apply_updates(
    params: &mut ModelParams,
    bundles: &[GradientBundle],
    weights: &DomainWeights,
    state: &mut OptimizerState,
) -> Result<()> {
    let direction = combine_shared(bundles, weights)?;
    apply_updates_with_direction(params, bundles, &direction, state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use ndarray::array;
    use rand::Rng as _;

    fn norm2(alpha: &[f64], grads: &[Vec<f64>]) -> f64 {
        let dim = grads[0].len();
        (0..dim)
            .map(|k| {
                let c: f64 = alpha.iter().zip(grads).map(|(a, g)| a * g[k]).sum();
                c * c
            })
            .sum()
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(solve_alpha_2(&[1.0, 0.0], &[0.0, 1.0]), 0.5);
        assert_eq!(solve_alpha_2(&[2.0, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(solve_alpha_2(&[1.0, 0.0], &[3.0, 0.0]), 1.0);
        assert_eq!(solve_alpha_2(&[1.0, 2.0], &[1.0, 2.0]), 0.5);
    }

    #[test]
    fn closed_form_matches_grid() {
        let mut rng = stream(9, "t");
        for _ in 0..50 {
            let u: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = solve_alpha_2(&u, &v);
            let grads = vec![u, v];
            let best = (0..=10_000)
                .map(|k| k as f64 / 10_000.0)
                .min_by(|x, y| norm2(&[*x, 1.0 - x], &grads).total_cmp(&norm2(&[*y, 1.0 - y], &grads)))
                .unwrap();
            assert!((a - best).abs() < 2e-4, "{a} vs {best}");
        }
    }

    #[test]
    fn frank_wolfe_zero_vertex_wins() {
        let grads = vec![vec![1.0, 0.5], vec![-0.3, 2.0], vec![0.0, 0.0]];
        let w = solve_alpha_fw(&grads, FrankWolfeConfig::default()).unwrap();
        assert!(w.as_slice()[2] > 0.999, "{w:?}");
        assert!(solve_alpha_fw(&[], FrankWolfeConfig::default()).is_err());
    }

    #[test]
    fn frank_wolfe_agrees_with_closed_form_for_two() {
        let mut rng = stream(10, "t");
        for _ in 0..50 {
            let u: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let closed = solve_alpha_2(&u, &v);
            let fw = solve_alpha_fw(&[u, v], FrankWolfeConfig::default()).unwrap();
            assert!((fw.as_slice()[0] - closed).abs() < 1e-6);
        }
    }

    #[test]
    fn normalization() {
        let g = array![[2.0, 0.0], [0.0, 0.0]];
        assert_eq!(normalize_gradient(&g, 0.5).unwrap(), g);
        let mut rng = stream(11, "t");
        let g = Array2::from_shape_simple_fn((3, 4), || rng.gen_range(-2.0..2.0));
        let n = normalize_gradient(&g, 1.7).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in n.iter().zip(g.iter()) {
            assert!((a - b / (norm * 1.7)).abs() < 1e-12);
        }
        assert!((frobenius(&n) - 1.0 / 1.7).abs() < 1e-12);
        assert!(normalize_gradient(&Array2::zeros((2, 2)), 1.0).is_none());
        assert!(normalize_gradient(&g, 0.0).is_none());
    }

    #[test]
    fn fixed_weights() {
        assert_eq!(fixed_alpha_weights(0.5).unwrap().as_slice(), &[0.5, 0.5]);
        let w = fixed_alpha_weights(0.4409).unwrap();
        assert!((w.as_slice()[1] - 0.5591).abs() < 1e-12);
        assert!(fixed_alpha_weights(1.5).is_err());
        assert!(fixed_alpha_weights(-0.1).is_err());
        assert!(DomainWeights::new(vec![0.3, 0.3]).is_err());
    }

    fn bundle(d: usize, s: Array2<f64>, t: Array2<f64>) -> GradientBundle {
        GradientBundle {
            domain: d,
            grad_theta_s: s,
            grad_theta_d: t,
            loss: 1.0,
        }
    }

    #[test]
    fn sgd_step_by_hand() {
        let mut params = ModelParams {
            theta_s: array![[1.0, 2.0], [3.0, 4.0]],
            theta_d: vec![array![[1.0, 0.0], [0.0, 1.0]], array![[0.5, 0.5], [0.5, 0.5]]],
        };
        let bundles = vec![
            bundle(0, array![[1.0, 0.0], [0.0, 1.0]], array![[2.0, 2.0], [2.0, 2.0]]),
            bundle(1, array![[0.0, 4.0], [4.0, 0.0]], array![[-1.0, 0.0], [0.0, -1.0]]),
        ];
        let mut state = OptimizerState::new(OptimizerMethod::Sgd, 0.1, &params).unwrap();
        let w = DomainWeights::new(vec![0.25, 0.75]).unwrap();
        apply_updates(&mut params, &bundles, &w, &mut state).unwrap();
        // Θ_s - 0.1 (0.25 G1 + 0.75 G2) = Θ_s - 0.1 [[0.25, 3], [3, 0.25]]
        let want_s = array![[0.975, 1.7], [2.7, 3.975]];
        for (a, b) in params.theta_s.iter().zip(want_s.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(params.theta_d[0], array![[0.8, -0.2], [-0.2, 0.8]]);
        assert_eq!(params.theta_d[1], array![[0.6, 0.5], [0.5, 0.6]]);
    }

    #[test]
    fn zero_gradients_leave_params_unchanged() {
        for method in [OptimizerMethod::Sgd, OptimizerMethod::Adam] {
            let mut params = ModelParams {
                theta_s: array![[1.0, -2.0]],
                theta_d: vec![array![[0.5], [0.25]], array![[1.0], [1.0]]],
            };
            let before = params.clone();
            let bundles = vec![
                bundle(0, Array2::zeros((1, 2)), Array2::zeros((2, 1))),
                bundle(1, Array2::zeros((1, 2)), Array2::zeros((2, 1))),
            ];
            let mut state = OptimizerState::new(method, 0.01, &params).unwrap();
            apply_updates(&mut params, &bundles, &DomainWeights::uniform(2), &mut state).unwrap();
            assert_eq!(params, before);
        }
    }

    #[test]
    fn alpha_one_ignores_second_domain() {
        let mut params = ModelParams {
            theta_s: Array2::zeros((1, 2)),
            theta_d: vec![Array2::zeros((2, 1)), Array2::zeros((2, 1))],
        };
        let bundles = vec![
            bundle(0, array![[1.0, 0.0]], Array2::zeros((2, 1))),
            bundle(1, array![[0.0, 7.0]], Array2::zeros((2, 1))),
        ];
        let mut state = OptimizerState::new(OptimizerMethod::Sgd, 1.0, &params).unwrap();
        apply_updates(&mut params, &bundles, &fixed_alpha_weights(1.0).unwrap(), &mut state).unwrap();
        assert_eq!(params.theta_s, array![[-1.0, 0.0]]);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut params = ModelParams {
            theta_s: array![[0.0, 0.0]],
            theta_d: vec![array![[0.0]]],
        };
        let bundles = vec![bundle(0, array![[3.0, -0.5]], array![[2.0]])];
        let mut state = OptimizerState::new(OptimizerMethod::Adam, 0.01, &params).unwrap();
        apply_updates(&mut params, &bundles, &DomainWeights::uniform(1), &mut state).unwrap();
        // bias-corrected first step is lr · g / (|g| + ε)
        assert!((params.theta_s[[0, 0]] + 0.01).abs() < 1e-9);
        assert!((params.theta_s[[0, 1]] - 0.01).abs() < 1e-9);
        assert!((params.theta_d[0][[0, 0]] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut params = ModelParams {
            theta_s: Array2::zeros((1, 2)),
            theta_d: vec![Array2::zeros((2, 1))],
        };
        let mut state = OptimizerState::new(OptimizerMethod::Sgd, 0.1, &params).unwrap();
        let bad = vec![bundle(0, Array2::zeros((2, 2)), Array2::zeros((2, 1)))];
        assert!(apply_updates(&mut params, &bad, &DomainWeights::uniform(1), &mut state).is_err());
        assert!(OptimizerState::new(OptimizerMethod::Sgd, 0.0, &params).is_err());
    }
}
