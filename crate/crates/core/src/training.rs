//! Greedy layer-wise training of an [`UnfoldedNetwork`] with an SSIM loss
//! and Adam on the four pre-activations of each layer.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{degrade, estimate_noise_std, ssim, ssim_with_grad, synthetic, DegradationConfig, ImageTensor, MetricOptions};
use crate::linops::Kernel;
use crate::objective::DeblurProblem;
use crate::scalar::Real;
use crate::seeding;
use crate::unfolded::{layer_forward, layer_vjp, LayerParams, UnfoldedNetwork};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub factor: f64,
    pub every_n_epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs_per_layer: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub batch_size: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    pub lr_decay: LrDecay,
    /// Border excluded by the SSIM that is optimized.
    pub loss_border: usize,
    /// Border excluded by the SSIM that is reported.
    pub eval_border: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs_per_layer: 40,
            learning_rate: 0.01,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            batch_size: 4,
            seed: 0,
            k: 10,
            lr_decay: LrDecay {
                factor: 0.5,
                every_n_epochs: 10,
            },
            loss_border: 0,
            eval_border: MetricOptions::default().border,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(format!("train config: {m}")));
        if self.epochs_per_layer == 0 && self.k > 0 {
            return bad("epochs_per_layer must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad("adam_betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.lr_decay.factor > 0.0) || self.lr_decay.every_n_epochs == 0 {
            return bad("lr_decay needs a positive factor and period");
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_decay.factor.powi((epoch / self.lr_decay.every_n_epochs) as i32)
    }
}

/// Adam with bias correction on a fixed-size parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam<const N: usize> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: [f64; N],
    v: [f64; N],
    t: i32,
}

impl<const N: usize> Adam<N> {
    pub fn new(beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: [0.0; N],
            v: [0.0; N],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64; N], grads: &[f64; N], lr: f64) -> Result<()> {
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient at Adam step {}", self.t + 1)));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..N {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainSample<T> {
    pub truth: ImageTensor<T>,
    pub degraded: ImageTensor<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRow {
    pub layer: usize,
    /// `0` is the evaluation before the first update.
    pub epoch: usize,
    pub mean_train_ssim: f64,
    pub loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: usize,
    /// Mean SSIM of the layer inputs.
    pub input_ssim: f64,
    /// Mean SSIM of the trained layer outputs.
    pub output_ssim: f64,
    pub initial_loss: f64,
    pub final_loss: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<TrainRow>,
    pub layers: Vec<LayerSummary>,
}

struct Prepared<T: Real> {
    truth: ImageTensor<T>,
    problem: DeblurProblem<T>,
    sigma_hat: T,
}

fn loss_and_grad<T: Real>(
    s: &Prepared<T>,
    params: &LayerParams<T>,
    x: &ImageTensor<T>,
    loss_metric: MetricOptions,
) -> Result<(f64, [f64; 4])> {
    let (out, cache) = layer_forward(&s.problem, params, x, s.sigma_hat, true)?;
    let (value, grad) = ssim_with_grad(&out, &s.truth, loss_metric)?;
    let upstream = grad.scale(-T::one());
    let g = layer_vjp(&s.problem, &cache.expect("cache requested"), &upstream, false)?;
    Ok((-value.to_f64_lossy(), g.params.to_array().map(|v| v.to_f64_lossy())))
}

fn evaluate<T: Real>(
    prepared: &[Prepared<T>],
    params: &LayerParams<T>,
    inputs: &[ImageTensor<T>],
    loss_metric: MetricOptions,
    eval_metric: MetricOptions,
) -> Result<(f64, f64, Vec<ImageTensor<T>>)> {
    let results: Vec<Result<(f64, f64, ImageTensor<T>)>> = prepared
        .par_iter()
        .zip(inputs.par_iter())
        .map(|(s, x)| {
            let out = layer_forward(&s.problem, params, x, s.sigma_hat, false)?.0;
            let loss = -ssim(&out, &s.truth, loss_metric)?.to_f64_lossy();
            let score = ssim(&out, &s.truth, eval_metric)?.to_f64_lossy();
            Ok((loss, score, out))
        })
        .collect();
    let n = prepared.len() as f64;
    let (mut loss, mut score) = (0.0, 0.0);
    let mut outs = Vec::with_capacity(prepared.len());
    for r in results {
        let (l, s, o) = r?;
        loss += l;
        score += s;
        outs.push(o);
    }
    Ok((loss / n, score / n, outs))
}

fn mean_ssim<T: Real>(prepared: &[Prepared<T>], xs: &[ImageTensor<T>], metric: MetricOptions) -> Result<f64> {
    let mut total = 0.0;
    for (s, x) in prepared.iter().zip(xs) {
        total += ssim(x, &s.truth, metric)?.to_f64_lossy();
    }
    Ok(total / prepared.len() as f64)
}

/// Trains `cfg.k` layers one after the other. Layer `k` starts from the
/// trained parameters of layer `k - 1` and is fitted on the outputs of the
/// already trained layers.
pub fn train_greedy<T: Real>(
    dataset: &[TrainSample<T>],
    template: &UnfoldedNetwork<T>,
    cfg: &TrainConfig,
) -> Result<(UnfoldedNetwork<T>, TrainReport)> {
    cfg.validate()?;
    let first = dataset.first().ok_or_else(|| Error::EmptyInput("training set".into()))?;
    for s in dataset {
        s.truth.ensure_same_shape(&first.truth)?;
        s.degraded.ensure_same_shape(&s.truth)?;
    }
    let loss_metric = MetricOptions { border: cfg.loss_border };
    let eval_metric = MetricOptions { border: cfg.eval_border };

    let prepared: Vec<Prepared<T>> = dataset
        .iter()
        .map(|s| {
            Ok(Prepared {
                truth: s.truth.clone(),
                problem: template.problem_for(&s.degraded)?,
                sigma_hat: estimate_noise_std(&s.degraded)?,
            })
        })
        .collect::<Result<_>>()?;
    let mut inputs: Vec<ImageTensor<T>> = dataset.iter().map(|s| template.initial_point(&s.degraded)).collect();

    let mut net = UnfoldedNetwork {
        layers: Vec::with_capacity(cfg.k),
        ..template.clone()
    };
    let mut report = TrainReport::default();
    let mut params = template.layers.first().copied().unwrap_or_else(LayerParams::initial);
    let (b1, b2) = cfg.adam_betas;
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for layer in 0..cfg.k {
        let input_ssim = mean_ssim(&prepared, &inputs, eval_metric)?;
        let (loss0, score0, _) = evaluate(&prepared, &params, &inputs, loss_metric, eval_metric)?;
        report.rows.push(TrainRow {
            layer,
            epoch: 0,
            mean_train_ssim: score0,
            loss: loss0,
        });
        let mut adam = Adam::<4>::new(b1, b2, cfg.adam_eps);
        let mut rng = seeding::stream(cfg.seed, layer as u64);
        let mut last = (loss0, score0);
        for epoch in 1..=cfg.epochs_per_layer {
            order.shuffle(&mut rng);
            let lr = cfg.learning_rate_at(epoch - 1);
            for batch in order.chunks(cfg.batch_size) {
                let grads: Vec<Result<(f64, [f64; 4])>> = batch
                    .par_iter()
                    .map(|&i| loss_and_grad(&prepared[i], &params, &inputs[i], loss_metric))
                    .collect();
                let mut total = [0.0; 4];
                for g in grads {
                    let (loss, g) = g?;
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(format!("loss at layer {layer}, epoch {epoch}")));
                    }
                    for (t, v) in total.iter_mut().zip(g) {
                        *t += v;
                    }
                }
                let mean = total.map(|v| v / batch.len() as f64);
                let mut p = params.to_array().map(|v| v.to_f64_lossy());
                adam.step(&mut p, &mean, lr)
                    .map_err(|e| Error::NonFinite(format!("layer {layer}, epoch {epoch}: {e}")))?;
                params = LayerParams::from_array(p.map(T::lit));
            }
            let (loss, score, _) = evaluate(&prepared, &params, &inputs, loss_metric, eval_metric)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at layer {layer}, epoch {epoch}")));
            }
            report.rows.push(TrainRow {
                layer,
                epoch,
                mean_train_ssim: score,
                loss,
            });
            last = (loss, score);
            log::debug!("layer {layer} epoch {epoch}: loss {loss:.6}, ssim {score:.6}");
        }
        let (_, _, outs) = evaluate(&prepared, &params, &inputs, loss_metric, eval_metric)?;
        inputs = outs;
        report.layers.push(LayerSummary {
            layer,
            input_ssim,
            output_ssim: last.1,
            initial_loss: loss0,
            final_loss: last.0,
        });
        log::info!(
            "layer {layer}: gamma {:.4}, mu {:.3e}, train ssim {input_ssim:.4} -> {:.4}",
            params.gamma().to_f64_lossy(),
            params.mu().to_f64_lossy(),
            last.1
        );
        net.layers.push(params);
    }
    Ok((net, report))
}

/// Synthetic scenes degraded with `degradation`; scene `i` and its noise
/// both derive from `(seed, i)`.
pub fn synthetic_dataset<T: Real>(
    seed: u64,
    count: usize,
    channels: usize,
    size: usize,
    degradation: &DegradationConfig,
) -> Result<Vec<TrainSample<T>>> {
    (0..count)
        .map(|i| {
            let truth = synthetic::scene::<T>(seed, i as u64, channels, size, size);
            let (degraded, _) = degrade(&truth, degradation, i as u64)?;
            Ok(TrainSample { truth, degraded })
        })
        .collect()
}

/// Convenience: a fresh network template for `kernel` with the default
/// problem settings.
pub fn template<T: Real>(kernel: Kernel<T>) -> UnfoldedNetwork<T> {
    UnfoldedNetwork::new(kernel, 0)
}
