use super::MlpParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments, shaped like the parameters they update.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub first_moment: MlpParams,
    pub second_moment: MlpParams,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(params: &MlpParams, config: AdamConfig) -> Self {
        AdamState {
            config,
            first_moment: params.zeros_like(),
            second_moment: params.zeros_like(),
            step_count: 0,
        }
    }

    /// One bias-corrected Adam update in place.
    pub fn step(&mut self, params: &mut MlpParams, grads: &MlpParams) -> Result<()> {
        if !params.same_shape(grads) || !params.same_shape(&self.first_moment) {
            return Err(Error::Usage("gradient shape does not match parameters".into()));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for l in 0..params.num_layers() {
            let g = grads.layer(l);
            let m = self.first_moment.layer_mut(l);
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
            }
            let v = self.second_moment.layer_mut(l);
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            }
            let m = self.first_moment.layer(l);
            let v = self.second_moment.layer(l);
            for ((p, mi), vi) in params.layer_mut(l).iter_mut().zip(m).zip(v) {
                let m_hat = mi / c1;
                let v_hat = vi / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step(params: &MlpParams, grads: &MlpParams, state: &AdamState) -> Result<(MlpParams, AdamState)> {
    let mut p = params.clone();
    let mut s = state.clone();
    s.step(&mut p, grads)?;
    Ok((p, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, pinn_layer_sizes};

    #[test]
    fn zero_gradient_is_fixed_point() {
        let p = init_params(&pinn_layer_sizes(2), 42).unwrap();
        let state = AdamState::new(&p, AdamConfig::default());
        let (q, s) = adam_step(&p, &p.zeros_like(), &state).unwrap();
        assert_eq!(p, q);
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn one_step_on_scalar() {
        // layer [1 -> 1]: one weight, one bias
        let p = MlpParams::from_layers(&[1, 1], vec![vec![0.0, 0.0]]).unwrap();
        let g = MlpParams::from_layers(&[1, 1], vec![vec![1.0, 0.0]]).unwrap();
        let state = AdamState::new(&p, AdamConfig::default());
        let (q, _) = adam_step(&p, &g, &state).unwrap();
        // m_hat = 1, v_hat = 1
        let expected = -0.005 / (1.0 + 1e-8);
        assert!((q.layer(0)[0] - expected).abs() < 1e-18);
        assert_eq!(q.layer(0)[1], 0.0);
    }

    #[test]
    fn non_finite_gradient_names_layer() {
        let p = init_params(&pinn_layer_sizes(2), 1).unwrap();
        let mut g = p.zeros_like();
        g.layer_mut(3)[5] = f64::NAN;
        let mut state = AdamState::new(&p, AdamConfig::default());
        let mut q = p.clone();
        assert_eq!(state.step(&mut q, &g), Err(Error::NonFiniteGradient { layer: 3 }));
    }

    #[test]
    fn identical_runs_identical_states() {
        let p = init_params(&pinn_layer_sizes(2), 3).unwrap();
        let g = init_params(&pinn_layer_sizes(2), 4).unwrap();
        let run = || {
            let mut q = p.clone();
            let mut s = AdamState::new(&q, AdamConfig::default());
            for _ in 0..5 {
                s.step(&mut q, &g).unwrap();
            }
            (q, s)
        };
        assert_eq!(run(), run());
    }
}
