use super::{Gradients, Network};
use crate::error::NetworkError;

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Gradients,
    pub v: Gradients,
}

impl Adam {
    pub fn new(net: &Network, config: AdamConfig) -> Adam {
        let sizes = net.layer_sizes();
        Adam {
            config,
            step: 0,
            m: Network::zeros(&sizes),
            v: Network::zeros(&sizes),
        }
    }

    /// Applies one update. A gradient with any NaN/Inf entry is rejected and
    /// leaves parameters, moments and the step counter untouched.
    pub fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<(), NetworkError> {
        if !net.same_shape(grads) || !net.same_shape(&self.m) {
            return Err(NetworkError::Shape(format!(
                "optimizer {:?}, network {:?}, gradient {:?}",
                self.m.layer_sizes(),
                net.layer_sizes(),
                grads.layer_sizes()
            )));
        }
        if !grads.is_finite() {
            return Err(NetworkError::NonFiniteGradient);
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let params = net.params_mut();
        let moments = self.m.params_mut().zip(self.v.params_mut());
        for ((p, (m, v)), g) in params.zip(moments).zip(grads.params()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
