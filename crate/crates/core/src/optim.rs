//! AdamW with decoupled weight decay, and learning-rate schedules.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Array, Float, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.05,
        }
    }
}

/// Moments mirror the parameter registry name-for-name.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamWState<T: Float> {
    pub config: AdamWConfig,
    pub t: u64,
    pub m: ParamStore<T>,
    pub v: ParamStore<T>,
}

impl<T: Float> AdamWState<T> {
    pub fn new(params: &ParamStore<T>, config: AdamWConfig) -> Self {
        let zeros = || {
            let mut s = ParamStore::new();
            for (name, p) in params.iter() {
                s.insert(name, Array::zeros(p.shape())).expect("names are unique");
            }
            s
        };
        Self {
            config,
            t: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    /// One update at learning rate `lr`. Gradients are validated up front so
    /// a rejected step leaves parameters and state untouched.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &IndexMap<String, Array<T>>, lr: f64) -> Result<()> {
        for (name, p) in params.iter() {
            let g = grads
                .get(name)
                .ok_or_else(|| Error::InvalidArgument(format!("no gradient for `{name}`")))?;
            if g.shape() != p.shape() {
                return Err(Error::shape(
                    "adamw_step",
                    format!("`{name}`: parameter {:?}, gradient {:?}", p.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFiniteGradient(name.to_string()));
            }
            if self.m.get(name).is_none_or(|m| m.shape() != p.shape()) {
                return Err(Error::InvalidArgument(format!("optimizer state does not cover `{name}`")));
            }
        }
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (name, p) in params.iter_mut() {
            let g = &grads[name];
            let m = self.m.get_mut(name).expect("checked above");
            let v = self.v.get_mut(name).expect("checked above");
            for (((th, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gi = gi.to_f();
                let mut theta = th.to_f();
                theta -= lr * c.weight_decay * theta;
                let mn = c.beta1 * mi.to_f() + (1.0 - c.beta1) * gi;
                let vn = c.beta2 * vi.to_f() + (1.0 - c.beta2) * gi * gi;
                theta -= lr * (mn / bc1) / ((vn / bc2).sqrt() + c.eps);
                *mi = T::from_f(mn);
                *vi = T::from_f(vn);
                *th = T::from_f(theta);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Poly,
    #[serde(alias = "const")]
    Constant,
}

/// `lr0·(1 − epoch/max_epochs)^0.9` for `Poly`, `lr0` for `Constant`.
pub fn lr_schedule(epoch: usize, max_epochs: usize, lr0: f64, schedule: Schedule) -> f64 {
    match schedule {
        Schedule::Constant => lr0,
        Schedule::Poly => {
            let frac = if max_epochs == 0 {
                1.0
            } else {
                (epoch as f64 / max_epochs as f64).min(1.0)
            };
            lr0 * (1.0 - frac).powf(0.9)
        }
    }
}

/// Reference learning rates for the benchmark datasets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrPreset {
    AbdomenMri,
    Endoscopy,
    Brats,
}

impl LrPreset {
    pub fn lr(self) -> f64 {
        match self {
            LrPreset::AbdomenMri => 0.005,
            LrPreset::Endoscopy | LrPreset::Brats => 0.01,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("w", Array::scalar(v)).unwrap();
        s
    }

    fn grads(v: f64) -> IndexMap<String, Array<f64>> {
        IndexMap::from([("w".to_string(), Array::scalar(v))])
    }

    #[test]
    fn first_step_by_hand() {
        let mut p = scalar_store(1.0);
        let mut st = AdamWState::new(&p, AdamWConfig { weight_decay: 0.0, ..Default::default() });
        st.step(&mut p, &grads(1.0), 0.1).unwrap();
        assert!((p.get("w").unwrap().data()[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn decay_only_and_no_op() {
        let mut p = scalar_store(1.0);
        let mut st = AdamWState::new(&p, AdamWConfig::default());
        st.step(&mut p, &grads(0.0), 0.01).unwrap();
        assert!((p.get("w").unwrap().data()[0] - 0.9995).abs() < 1e-15);
        let mut p = scalar_store(0.3);
        let mut st = AdamWState::new(&p, AdamWConfig { weight_decay: 0.0, ..Default::default() });
        st.step(&mut p, &grads(0.0), 0.01).unwrap();
        assert_eq!(p.get("w").unwrap().data()[0], 0.3);
    }

    #[test]
    fn non_finite_gradient_names_parameter() {
        let mut p = scalar_store(1.0);
        let mut st = AdamWState::new(&p, AdamWConfig::default());
        let err = st.step(&mut p, &grads(f64::NAN), 0.01).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(ref n) if n == "w"));
        assert_eq!(st.t, 0);
        assert_eq!(p.get("w").unwrap().data()[0], 1.0);
    }

    #[test]
    fn schedules() {
        assert_eq!(lr_schedule(0, 100, 0.01, Schedule::Poly), 0.01);
        assert_eq!(lr_schedule(100, 100, 0.01, Schedule::Poly), 0.0);
        assert!((lr_schedule(50, 100, 0.01, Schedule::Poly) - 0.005359).abs() < 1e-6);
        assert_eq!(lr_schedule(70, 100, 0.01, Schedule::Constant), 0.01);
        assert_eq!(LrPreset::AbdomenMri.lr(), 0.005);
    }
}
