use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    /// Adaptive moments.
    Adam { beta1: f64, beta2: f64, eps: f64 },
    /// Plain gradient descent.
    Sgd,
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for one parameter set. Minimises.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer<T> {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: f64, params: &[Tensor<T>]) -> Self {
        let zeros = |_: ()| params.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let (m, v) = match kind {
            OptimizerKind::Adam { .. } => (zeros(()), zeros(())),
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
        };
        Optimizer {
            kind,
            lr,
            step: 0,
            m,
            v,
        }
    }

    pub fn apply(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(params.len(), grads.len()));
        }
        self.step += 1;
        let lr = T::of(self.lr);
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv = *pv - lr * gv;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let bc1 = T::of(1.0 - beta1.powi(t));
                let bc2 = T::of(1.0 - beta2.powi(t));
                let (b1, b2, eps) = (T::of(beta1), T::of(beta2), T::of(eps));
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = self.m[i].data_mut();
                    let v = self.v[i].data_mut();
                    for (j, (pv, &gv)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[j] = b1 * m[j] + (T::one() - b1) * gv;
                        v[j] = b2 * v[j] + (T::one() - b2) * gv * gv;
                        let mh = m[j] / bc1;
                        let vh = v[j] / bc2;
                        *pv = *pv - lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut p = vec![Tensor::<f64>::filled([2, 1, 1, 1], 1.0)];
        let g = vec![Tensor::from_vec([2, 1, 1, 1], vec![0.5, -2.0]).unwrap()];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, &p);
        opt.apply(&mut p, &g).unwrap();
        assert_eq!(p[0].data(), &[0.95, 1.2]);
    }

    #[test]
    fn adam_first_step_is_lr_sized() {
        let mut p = vec![Tensor::<f64>::zeros([3, 1, 1, 1])];
        let g = vec![Tensor::from_vec([3, 1, 1, 1], vec![3.0, -0.01, 0.0]).unwrap()];
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), 2e-4, &p);
        opt.apply(&mut p, &g).unwrap();
        assert!((p[0].data()[0] + 2e-4).abs() < 1e-9);
        assert!((p[0].data()[1] - 2e-4).abs() < 1e-9);
        assert_eq!(p[0].data()[2], 0.0);
    }

    #[test]
    fn adam_minimises_quadratic() {
        let mut p = vec![Tensor::<f64>::filled([1, 1, 1, 1], 5.0)];
        let mut opt = Optimizer::new(OptimizerKind::adam_default(), 0.1, &p);
        for _ in 0..500 {
            let g = vec![p[0].map(|x| 2.0 * (x - 1.0))];
            opt.apply(&mut p, &g).unwrap();
        }
        assert!((p[0].data()[0] - 1.0).abs() < 0.05);
    }
}
