use super::boosting::{sigmoid, softplus};
use super::persist::{floats_line, Lines};
use super::scaling::MaxAbsScaler;
use super::{LearnError, ModelSpec};
use crate::featurize::FeatureVector;

/// L2-regularized logistic regression on max-abs scaled inputs.
///
/// Minimizes `Σ log-loss + l2/2 · ‖w‖²` (bias unpenalized) by full-batch
/// gradient descent with Armijo backtracking.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    scaler: MaxAbsScaler,
    weights: Vec<f64>,
    bias: f64,
}

struct Problem<'a> {
    rows: Vec<Vec<(u32, f64)>>,
    target: &'a [f64],
    l2: f64,
}

impl Problem<'_> {
    fn margins(&self, w: &[f64], b: f64) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| b + r.iter().map(|&(j, v)| w[j as usize] * v).sum::<f64>())
            .collect()
    }

    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let data: f64 = self.margins(w, b).iter().zip(self.target).map(|(&z, &t)| softplus(z) - t * z).sum();
        data + 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64) -> (Vec<f64>, f64) {
        let mut gw: Vec<f64> = w.iter().map(|v| self.l2 * v).collect();
        let mut gb = 0.0;
        for (row, (&z, &t)) in self.rows.iter().zip(self.margins(w, b).iter().zip(self.target)) {
            let d = sigmoid(z) - t;
            gb += d;
            for &(j, v) in row {
                gw[j as usize] += d * v;
            }
        }
        (gw, gb)
    }
}

impl LogisticRegression {
    pub(crate) fn train(spec: &ModelSpec, x: &[FeatureVector], y: &[bool], dim: usize) -> Self {
        let scaler = MaxAbsScaler::fit(x, dim);
        let target: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let positives = target.iter().sum::<f64>();
        if positives == 0.0 || positives == target.len() as f64 {
            let p = (positives / target.len() as f64).clamp(1e-15, 1.0 - 1e-15);
            return Self {
                scaler,
                weights: vec![0.0; dim],
                bias: (p / (1.0 - p)).ln(),
            };
        }
        let problem = Problem {
            rows: x.iter().map(|r| scaler.apply(r)).collect(),
            target: &target,
            l2: spec.get("l2"),
        };
        let tol = spec.get("tol");
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        let mut f = problem.objective(&w, b);
        let mut step = 1.0;
        for _ in 0..spec.get_count("max_iter") {
            let (gw, gb) = problem.gradient(&w, b);
            let g2 = gw.iter().map(|v| v * v).sum::<f64>() + gb * gb;
            if g2.sqrt() < tol {
                break;
            }
            loop {
                let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(a, g)| a - step * g).collect();
                let cand_b = b - step * gb;
                let cand_f = problem.objective(&cand_w, cand_b);
                if cand_f <= f - 0.5 * step * g2 {
                    w = cand_w;
                    b = cand_b;
                    f = cand_f;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
                if step < 1e-20 {
                    break;
                }
            }
            if step < 1e-20 {
                break;
            }
        }
        Self {
            scaler,
            weights: w,
            bias: b,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let z = self.bias + self.scaler.apply(x).iter().map(|&(j, v)| self.weights[j as usize] * v).sum::<f64>();
        sigmoid(z)
    }

    pub(crate) fn write_text(&self, out: &mut String) {
        self.scaler.write_text(out);
        out.push_str(&floats_line("weights", &self.weights));
        out.push_str(&format!("bias {:?}\n", self.bias));
    }

    pub(crate) fn read_text(lines: &mut Lines<'_>, dim: usize) -> Result<Self, LearnError> {
        let scaler = MaxAbsScaler::read_text(lines, dim)?;
        let weights = lines.keyword_floats("weights", dim)?;
        let bias = lines.keyword_value("bias")?;
        Ok(Self { scaler, weights, bias })
    }
}
