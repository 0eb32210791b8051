//! Logistic-regression pixel classifier over HSV features.

use super::hsv::HsvPixel;
use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LogRegError {
    #[error("training set must contain both classes")]
    SingleClass,
    #[error("training set is empty")]
    Empty,
}

/// Weights (h, s, v, bias) over normalized features (h/360, s, v);
/// decision threshold 0.5.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegModel {
    pub weights: [f64; 4],
}

fn features(p: HsvPixel) -> [f64; 4] {
    [p.h / 360.0, p.s, p.v, 1.0]
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl SegModel {
    pub fn score(&self, p: HsvPixel) -> f64 {
        let x = features(p);
        sigmoid((0..4).map(|i| self.weights[i] * x[i]).sum())
    }

    pub fn classify(&self, p: HsvPixel) -> bool {
        self.score(p) >= 0.5
    }
}

/// Mean cross-entropy of the model over a labeled set.
pub fn cross_entropy(model: &SegModel, samples: &[(HsvPixel, bool)]) -> f64 {
    let eps = 1e-12;
    let mut loss = 0.0;
    for (p, y) in samples {
        let s = model.score(*p).clamp(eps, 1.0 - eps);
        loss -= if *y { s.ln() } else { (1.0 - s).ln() };
    }
    loss / samples.len() as f64
}

/// Mini-batch gradient descent on the cross-entropy, deterministic given
/// the seed (which drives the per-epoch shuffle).
pub fn logreg_train(
    samples: &[(HsvPixel, bool)],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<SegModel, LogRegError> {
    if samples.is_empty() {
        return Err(LogRegError::Empty);
    }
    let positives = samples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == samples.len() {
        return Err(LogRegError::SingleClass);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut w = [0.0f64; 4];
    let batch = 64.min(samples.len());
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            let mut grad = [0.0f64; 4];
            for &i in chunk {
                let (p, y) = samples[i];
                let x = features(p);
                let pred = sigmoid((0..4).map(|j| w[j] * x[j]).sum());
                let err = pred - if y { 1.0 } else { 0.0 };
                for j in 0..4 {
                    grad[j] += err * x[j];
                }
            }
            for j in 0..4 {
                w[j] -= lr * grad[j] / chunk.len() as f64;
            }
        }
    }
    Ok(SegModel { weights: w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn yellow_vs_gray(n: usize, seed: u64) -> Vec<(HsvPixel, bool)> {
        let mut rng = crate::rng::stream(seed, "logreg-data");
        let mut out = Vec::new();
        for _ in 0..n / 2 {
            out.push((
                HsvPixel {
                    h: rng.gen_range(40.0..60.0),
                    s: rng.gen_range(0.6..0.9),
                    v: rng.gen_range(0.6..0.9),
                },
                true,
            ));
            out.push((
                HsvPixel {
                    h: rng.gen_range(0.0..360.0),
                    s: rng.gen_range(0.0..0.15),
                    v: rng.gen_range(0.3..0.7),
                },
                false,
            ));
        }
        out
    }

    #[test]
    fn separable_set_reaches_full_accuracy() {
        let data = yellow_vs_gray(300, 1);
        let model = logreg_train(&data, 300, 0.8, 7).unwrap();
        let correct = data.iter().filter(|(p, y)| model.classify(*p) == *y).count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn loss_non_increasing_at_small_lr() {
        let data = yellow_vs_gray(200, 2);
        let mut prev = f64::INFINITY;
        for epochs in [5, 20, 80, 200] {
            let model = logreg_train(&data, epochs, 0.05, 3).unwrap();
            let loss = cross_entropy(&model, &data);
            assert!(loss <= prev + 1e-9, "loss {loss} after {epochs} epochs > {prev}");
            prev = loss;
        }
    }

    #[test]
    fn single_class_rejected() {
        let data: Vec<(HsvPixel, bool)> =
            (0..10).map(|_| (HsvPixel { h: 10.0, s: 0.5, v: 0.5 }, true)).collect();
        assert_eq!(logreg_train(&data, 10, 0.1, 1).unwrap_err(), LogRegError::SingleClass);
        assert_eq!(logreg_train(&[], 10, 0.1, 1).unwrap_err(), LogRegError::Empty);
    }

    #[test]
    fn determinism_given_seed() {
        let data = yellow_vs_gray(100, 3);
        let a = logreg_train(&data, 50, 0.3, 11).unwrap();
        let b = logreg_train(&data, 50, 0.3, 11).unwrap();
        assert_eq!(a, b);
    }

    /// IRLS (Newton) oracle: on a non-separable 100-sample set the MLE is
    /// finite; gradient descent must land near it.
    #[test]
    fn weights_match_irls_oracle() {
        // heavily overlapping classes so the optimum is finite and small
        let mut rng = crate::rng::stream(4, "logreg-irls");
        let mut data = Vec::new();
        for _ in 0..50 {
            data.push((
                HsvPixel {
                    h: rng.gen_range(30.0..90.0),
                    s: rng.gen_range(0.35..0.8),
                    v: rng.gen_range(0.35..0.9),
                },
                true,
            ));
            data.push((
                HsvPixel {
                    h: rng.gen_range(30.0..90.0),
                    s: rng.gen_range(0.2..0.65),
                    v: rng.gen_range(0.3..0.85),
                },
                false,
            ));
        }

        // IRLS: w += (X^T R X)^-1 X^T (y - p)
        let mut w = [0.0f64; 4];
        for _ in 0..60 {
            let mut xtrx = [[0.0f64; 4]; 4];
            let mut xty = [0.0f64; 4];
            for (p, y) in &data {
                let x = features(*p);
                let mu = sigmoid((0..4).map(|j| w[j] * x[j]).sum());
                let r = (mu * (1.0 - mu)).max(1e-9);
                for a in 0..4 {
                    for b in 0..4 {
                        xtrx[a][b] += r * x[a] * x[b];
                    }
                    xty[a] += x[a] * ((if *y { 1.0 } else { 0.0 }) - mu);
                }
            }
            // ridge for numeric safety, negligible at this scale
            for a in 0..4 {
                xtrx[a][a] += 1e-9;
            }
            let delta = solve4(xtrx, xty);
            for a in 0..4 {
                w[a] += delta[a];
            }
        }
        let irls = SegModel { weights: w };

        let gd = logreg_train(&data, 4000, 0.9, 5).unwrap();
        let irls_norm = irls.weights.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = irls
            .weights
            .iter()
            .zip(&gd.weights)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dist / irls_norm < 0.05, "GD {gd:?} vs IRLS {irls:?} (rel {})", dist / irls_norm);
        // and the losses agree tightly
        let gap = cross_entropy(&gd, &data) - cross_entropy(&irls, &data);
        assert!(gap.abs() < 1e-3, "loss gap {gap}");
    }

    /// Gaussian elimination with partial pivoting, 4x4.
    fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> [f64; 4] {
        for col in 0..4 {
            let pivot = (col..4).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()).unwrap();
            a.swap(col, pivot);
            b.swap(col, pivot);
            for row in col + 1..4 {
                let f = a[row][col] / a[col][col];
                for k in col..4 {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = [0.0f64; 4];
        for row in (0..4).rev() {
            let mut sum = b[row];
            for k in row + 1..4 {
                sum -= a[row][k] * x[k];
            }
            x[row] = sum / a[row][row];
        }
        x
    }
}
