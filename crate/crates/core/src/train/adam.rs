use super::TrainConfig;
use crate::model::ParamStore;
use crate::tensor::Tensor;

/// Bias-corrected Adam with one moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParamStore, cfg: &TrainConfig) -> Adam {
        let zeros = || params.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
        Adam {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps_taken(&self) -> i32 {
        self.step
    }

    pub fn first_moment(&self, slot: usize) -> &[f64] {
        &self.m[slot]
    }

    pub fn second_moment(&self, slot: usize) -> &[f64] {
        &self.v[slot]
    }

    /// Applies one update in parameter order from the gradients stored on
    /// the parameters, which are replaced by fresh leaves. Missing
    /// gradients count as zero. If any gradient is non-finite nothing is
    /// changed and the offending parameter's name is returned.
    pub fn step(&mut self, params: &mut ParamStore, lr: f64) -> Result<(), String> {
        let grads: Vec<Option<Vec<f64>>> = params.tensors().iter().map(Tensor::grad).collect();
        for (slot, g) in grads.iter().enumerate() {
            if g.as_ref().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(params.name(slot).to_string());
            }
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (slot, g) in grads.into_iter().enumerate() {
            let p = params.get(slot);
            let (m, v) = (&mut self.m[slot], &mut self.v[slot]);
            let mut data = p.to_vec();
            for i in 0..data.len() {
                let gi = g.as_ref().map_or(0.0, |g| g[i]);
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                data[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            let fresh = Tensor::param(data, p.shape()).expect("same shape");
            params.replace(slot, fresh);
        }
        Ok(())
    }
}
