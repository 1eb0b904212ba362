use rand::seq::SliceRandom;
use rand::Rng as _;

use super::boosting::{sigmoid, softplus};
use super::persist::{floats_line, Lines};
use super::scaling::MaxAbsScaler;
use super::{LearnError, ModelSpec};
use crate::featurize::FeatureVector;
use crate::rng::rng_from_seed;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One-hidden-layer perceptron: ReLU hidden units, logistic output,
/// log-loss with an L2 penalty on the weights, trained with Adam.
///
/// Parameters are one flat vector laid out as
/// `[W1 (dim × hidden, row-major by input), b1 (hidden), w2 (hidden), b2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    scaler: MaxAbsScaler,
    dim: usize,
    hidden: usize,
    params: Vec<f64>,
}

struct Layout {
    dim: usize,
    hidden: usize,
}

impl Layout {
    fn b1(&self) -> usize {
        self.dim * self.hidden
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden
    }
    fn len(&self) -> usize {
        self.b2() + 1
    }
}

/// Mean log-loss of a batch plus `l2 / (2·batch)` times the squared weight
/// norm, and its gradient written into `grad`.
fn loss_gradient(layout: &Layout, params: &[f64], rows: &[&[(u32, f64)]], target: &[f64], l2: f64, grad: &mut [f64]) -> f64 {
    let (d, h) = (layout.dim, layout.hidden);
    let batch = rows.len() as f64;
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (w1, rest) = params.split_at(layout.b1());
    let (b1, rest) = rest.split_at(h);
    let (w2, b2) = rest.split_at(h);
    let b2 = b2[0];
    let mut z1 = vec![0.0; h];
    let mut loss = 0.0;
    for (row, &t) in rows.iter().zip(target) {
        z1.copy_from_slice(b1);
        for &(j, v) in row.iter() {
            let w = &w1[j as usize * h..(j as usize + 1) * h];
            for (z, wk) in z1.iter_mut().zip(w) {
                *z += v * wk;
            }
        }
        let z2 = b2 + z1.iter().zip(w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>();
        loss += softplus(z2) - t * z2;
        let dz2 = (sigmoid(z2) - t) / batch;
        grad[layout.b2()] += dz2;
        for k in 0..h {
            if z1[k] > 0.0 {
                grad[layout.w2() + k] += dz2 * z1[k];
                let d1 = dz2 * w2[k];
                grad[layout.b1() + k] += d1;
                for &(j, v) in row.iter() {
                    grad[j as usize * h + k] += v * d1;
                }
            }
        }
    }
    let penalty_scale = l2 / batch;
    let mut norm = 0.0;
    for i in (0..d * h).chain(layout.w2()..layout.b2()) {
        norm += params[i] * params[i];
        grad[i] += penalty_scale * params[i];
    }
    loss / batch + 0.5 * penalty_scale * norm
}

impl Mlp {
    pub(crate) fn train(spec: &ModelSpec, x: &[FeatureVector], y: &[bool], dim: usize) -> Self {
        let scaler = MaxAbsScaler::fit(x, dim);
        let hidden = spec.get_count("hidden_units");
        let layout = Layout { dim, hidden };
        let mut rng = rng_from_seed(spec.seed);
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let positives = target.iter().sum::<f64>();
        if positives == 0.0 || positives == target.len() as f64 {
            let p = (positives / target.len() as f64).clamp(1e-15, 1.0 - 1e-15);
            let mut params = vec![0.0; layout.len()];
            params[layout.b2()] = (p / (1.0 - p)).ln();
            return Self {
                scaler,
                dim,
                hidden,
                params,
            };
        }

        let mut params = Vec::with_capacity(layout.len());
        let hidden_bound = (6.0 / (dim + hidden) as f64).sqrt();
        let out_bound = (2.0 / (hidden + 1) as f64).sqrt();
        for _ in 0..layout.w2() {
            params.push(rng.random_range(-hidden_bound..hidden_bound));
        }
        for _ in layout.w2()..layout.len() {
            params.push(rng.random_range(-out_bound..out_bound));
        }

        let rows: Vec<Vec<(u32, f64)>> = x.iter().map(|r| scaler.apply(r)).collect();
        let n = rows.len();
        let batch_size = spec.get_count("batch_size").clamp(1, n);
        let lr = spec.get("learning_rate");
        let l2 = spec.get("l2");
        let tol = spec.get("tol");
        let patience = spec.get_count("n_iter_no_change");
        let mut m = vec![0.0; layout.len()];
        let mut v = vec![0.0; layout.len()];
        let mut grad = vec![0.0; layout.len()];
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        let mut stale = 0;
        for _ in 0..spec.get_count("epochs") {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for chunk in order.chunks(batch_size) {
                let batch_rows: Vec<&[(u32, f64)]> = chunk.iter().map(|&i| rows[i].as_slice()).collect();
                let batch_target: Vec<f64> = chunk.iter().map(|&i| target[i]).collect();
                let loss = loss_gradient(&layout, &params, &batch_rows, &batch_target, l2, &mut grad);
                epoch_loss += loss * chunk.len() as f64;
                step += 1;
                let c1 = 1.0 - BETA1.powi(step);
                let c2 = 1.0 - BETA2.powi(step);
                let lr_t = lr * c2.sqrt() / c1;
                for i in 0..params.len() {
                    m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
                    v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
                    params[i] -= lr_t * m[i] / (v[i].sqrt() + ADAM_EPS);
                }
            }
            let epoch_loss = epoch_loss / n as f64;
            if epoch_loss > best - tol {
                stale += 1;
            } else {
                stale = 0;
            }
            best = best.min(epoch_loss);
            if stale > patience {
                break;
            }
        }
        Self {
            scaler,
            dim,
            hidden,
            params,
        }
    }

    /// An untrained network with the given parameters (scaling = identity).
    pub fn from_params(dim: usize, hidden: usize, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), Layout { dim, hidden }.len());
        let scaler = MaxAbsScaler::fit(&[], dim);
        Self {
            scaler,
            dim,
            hidden,
            params,
        }
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn param_count(dim: usize, hidden: usize) -> usize {
        Layout { dim, hidden }.len()
    }

    /// Regularized batch loss and its analytic gradient at the current
    /// parameters, on already-scaled inputs.
    pub fn loss_and_gradient(&self, x: &[FeatureVector], y: &[bool], l2: f64) -> (f64, Vec<f64>) {
        let layout = Layout {
            dim: self.dim,
            hidden: self.hidden,
        };
        let rows: Vec<&[(u32, f64)]> = x.iter().map(|r| r.entries()).collect();
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let mut grad = vec![0.0; layout.len()];
        let loss = loss_gradient(&layout, &self.params, &rows, &target, l2, &mut grad);
        (loss, grad)
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let h = self.hidden;
        let layout = Layout { dim: self.dim, hidden: h };
        let mut z1 = self.params[layout.b1()..layout.w2()].to_vec();
        for (j, v) in self.scaler.apply(x) {
            let w = &self.params[j as usize * h..(j as usize + 1) * h];
            for (z, wk) in z1.iter_mut().zip(w) {
                *z += v * wk;
            }
        }
        let w2 = &self.params[layout.w2()..layout.b2()];
        let z2 = self.params[layout.b2()] + z1.iter().zip(w2).map(|(z, w)| z.max(0.0) * w).sum::<f64>();
        sigmoid(z2)
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        out.push_str(&format!("hidden {}\n", self.hidden));
        self.scaler.write_text(out);
        out.push_str(&floats_line("params", &self.params));
    }

    pub(crate) fn read_text(lines: &mut Lines<'_>, dim: usize) -> Result<Self, LearnError> {
        let hidden: usize = lines.keyword_value("hidden")?;
        let scaler = MaxAbsScaler::read_text(lines, dim)?;
        let params = lines.keyword_floats("params", Layout { dim, hidden }.len())?;
        Ok(Self {
            scaler,
            dim,
            hidden,
            params,
        })
    }
}
