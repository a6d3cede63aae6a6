use crate::error::{Error, Result};
use crate::numerics::ParamSet;

/// Element-wise clip threshold after `epoch` decays: `init · decay^epoch`.
pub fn clip_threshold(init: f64, decay: f64, epoch: usize) -> f64 {
    init * decay.powi(epoch as i32)
}

/// Clamps every element into `[-threshold, threshold]`.
pub fn clip_gradients<P: ParamSet>(grads: &mut P, threshold: f64) {
    for s in grads.slices_mut() {
        for g in s.iter_mut() {
            *g = g.clamp(-threshold, threshold);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Variance rectification; off gives plain Adam.
    pub rectified: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            rectified: true,
        }
    }
}

/// Moment accumulators shaped like the parameters.
#[derive(Clone, Debug)]
pub struct OptimizerState<P> {
    pub first: P,
    pub second: P,
    pub step: u64,
}

impl<P: ParamSet> OptimizerState<P> {
    pub fn new(params: &P) -> Self {
        OptimizerState {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

/// One adaptive-moment step. With rectification on, steps whose
/// variance-rectification length `ρ_t` is at most 5 apply the bias-corrected
/// momentum alone.
pub fn optimizer_step<P: ParamSet>(
    params: &mut P,
    grads: &P,
    state: &mut OptimizerState<P>,
    config: &AdamConfig,
) -> Result<()> {
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (config.beta1, config.beta2);
    let bc1 = 1.0 - b1.powf(t);
    let bc2 = 1.0 - b2.powf(t);

    // None: momentum only; Some(r): adaptive step scaled by r.
    let rect = if config.rectified {
        let rho_inf = 2.0 / (1.0 - b2) - 1.0;
        let rho_t = rho_inf - 2.0 * t * b2.powf(t) / bc2;
        (rho_t > 5.0)
            .then(|| ((rho_t - 4.0) * (rho_t - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t)).sqrt())
    } else {
        Some(1.0)
    };

    let lr = config.learning_rate;
    for (((p, g), m), v) in params
        .slices_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(state.first.slices_mut())
        .zip(state.second.slices_mut())
    {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            p[i] -= match rect {
                Some(r) => lr * r * m_hat / ((v[i] / bc2).sqrt() + config.epsilon),
                None => lr * m_hat,
            };
        }
    }
    Ok(())
}
