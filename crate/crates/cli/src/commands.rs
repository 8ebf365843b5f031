use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unfold_ipm::imaging::{degrade, psnr, ssim, synthetic, NoiseLevel};
use unfold_ipm::linops::{CirculantOperator, GradientOperators, Kernel, KernelSource};
use unfold_ipm::solver::{run_fb_ipm, var_grid_search};
use unfold_ipm::stability::{certify_problem, check_frozen_network, freeze_layers, AveragednessCheck, FrozenLayer, StabilityCertificate};
use unfold_ipm::training::{train_greedy, TrainSample};
use unfold_ipm::{Image, Network, Problem};

use crate::config::{parse_grid, RunConfig};
use crate::io;
use crate::{Cli, Command, Common};

pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<unfold_ipm::Error> for Failure {
    fn from(e: unfold_ipm::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

/// Config file, then command-line overrides, then seed propagation.
fn resolve_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(k) = &common.kernel {
        cfg.degradation.kernel = k.parse::<KernelSource>().map_err(usage)?;
    }
    if let Some(s) = &common.sigma {
        cfg.degradation.sigma = s.parse::<NoiseLevel>().map_err(usage)?;
    }
    if let Some(g) = &common.lambda_grid {
        cfg.lambda_grid = parse_grid(g).map_err(usage)?;
    }
    if let Some(k) = common.layers {
        cfg.train.k = k;
    }
    if let Some(b) = common.border_exclude {
        cfg.border_exclude = b;
    }
    if common.no_normalize {
        cfg.degradation.normalize_kernel = false;
    }
    let cfg = cfg.finalize();
    cfg.degradation.sigma.validate().map_err(usage)?;
    cfg.train.validate().map_err(usage)?;
    if cfg.lambda_grid.is_empty() || cfg.lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(usage(anyhow!("lambda grid must be a non-empty list of finite, non-negative values")));
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Outcome {
    let cfg = resolve_config(&cli.common)?;
    log::info!(
        "resolved config: {}",
        serde_json::to_string(&cfg).map_err(|e| Failure::Runtime(e.into()))?
    );
    match cli.command {
        Command::Synth {
            output,
            count,
            size,
            channels,
        } => synth(&cfg, &output, count, size, channels),
        Command::Degrade { input, output } => degrade_dir(&cfg, &input, &output),
        Command::Solve {
            input,
            output,
            trace,
            lambda,
        } => solve(&cfg, &input, &output, trace.as_deref(), lambda),
        Command::VarSearch {
            input,
            truth,
            output,
            report,
        } => var_search(&cfg, &input, &truth, &output, report.as_deref()),
        Command::Train {
            truth,
            degraded,
            model,
            report,
        } => train(&cfg, &truth, degraded.as_deref(), &model, report.as_deref()),
        Command::Infer {
            model,
            input,
            output,
            truth,
            metrics,
            layers_csv,
        } => infer(&cfg, &model, &input, &output, truth.as_deref(), metrics.as_deref(), layers_csv.as_deref()),
        Command::Certify { model, problem, output } => certify(&cfg, &model, &problem, &output),
        Command::Metrics { input, truth, output } => metrics(&cfg, &input, &truth, &output),
    }
}

fn kernel(cfg: &RunConfig) -> Result<Kernel<f64>, Failure> {
    Ok(cfg.degradation.kernel.build(cfg.degradation.normalize_kernel)?)
}

fn problem(cfg: &RunConfig, y: Image) -> Result<Problem, Failure> {
    let blur = CirculantOperator::new(kernel(cfg)?, y.spatial_shape())?;
    Ok(Problem::new(blur, y, cfg.bounds)?.with_delta(cfg.delta)?)
}

fn synth(cfg: &RunConfig, output: &Path, count: usize, size: usize, channels: usize) -> Outcome {
    if size == 0 || !(channels == 1 || channels == 3) {
        return Err(usage(anyhow!("size must be positive and channels 1 or 3")));
    }
    (0..count).into_par_iter().try_for_each(|i| {
        let img = synthetic::scene::<f64>(cfg.seed, i as u64, channels, size, size);
        io::write_png(&output.join(format!("scene_{i:04}.png")), &img)
    })?;
    log::info!("wrote {count} scenes to {}", output.display());
    Ok(())
}

#[derive(Serialize)]
struct ManifestRow {
    image: String,
    index: usize,
    sigma: f64,
    kernel_hash: String,
    seed: u64,
}

fn degrade_dir(cfg: &RunConfig, input: &Path, output: &Path) -> Outcome {
    let files = io::list_pngs(input)?;
    let hash = kernel(cfg)?.hash_hex();
    let rows: Vec<ManifestRow> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| -> anyhow::Result<ManifestRow> {
            let truth = io::read_png(path)?;
            let (y, sigma) = degrade(&truth, &cfg.degradation, i as u64)?;
            let name = io::file_name(path);
            io::write_png(&output.join(&name), &y)?;
            Ok(ManifestRow {
                image: name,
                index: i,
                sigma,
                kernel_hash: hash.clone(),
                seed: cfg.seed,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    io::write_csv(&output.join("manifest.csv"), &rows)?;
    log::info!("degraded {} images into {}", rows.len(), output.display());
    Ok(())
}

fn solve(cfg: &RunConfig, input: &Path, output: &Path, trace: Option<&Path>, lambda: Option<f64>) -> Outcome {
    let lambda = lambda.unwrap_or(cfg.lambda);
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(usage(anyhow!("lambda must be finite and non-negative, got {lambda}")));
    }
    let y = io::read_png(input)?;
    let p = problem(cfg, y)?;
    let sched = cfg.schedule.resolve(&p, lambda);
    log::info!("solve: lambda={lambda} schedule={}", serde_json::to_string(&sched).unwrap_or_default());
    let out = run_fb_ipm(&p, lambda, &sched)?;
    io::write_png(output, &out.image)?;
    if let Some(t) = trace {
        io::write_csv(t, &out.trace)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct VarRow {
    image: String,
    lambda: f64,
    ssim: Option<f64>,
    best: bool,
}

fn var_search(cfg: &RunConfig, input: &Path, truth: &Path, output: &Path, report: Option<&Path>) -> Outcome {
    let files = io::list_pngs(input)?;
    let results: Vec<Vec<VarRow>> = files
        .par_iter()
        .map(|path| -> anyhow::Result<Vec<VarRow>> {
            let name = io::file_name(path);
            let y = io::read_png(path)?;
            let t = io::read_png(&io::counterpart(truth, &name))?;
            let p = problem(cfg, y).map_err(failure_to_anyhow)?;
            let res = var_grid_search(&p, &t, &cfg.lambda_grid, |l| cfg.schedule.resolve(&p, l), cfg.metric())?;
            let dest = if files.len() == 1 && !output.is_dir() && output.extension().is_some() {
                output.to_path_buf()
            } else {
                output.join(&name)
            };
            io::write_png(&dest, &res.best_image)?;
            log::info!("{name}: best lambda {} (ssim {:.4})", res.best_lambda, res.best_ssim);
            Ok(res
                .points
                .iter()
                .map(|g| VarRow {
                    image: name.clone(),
                    lambda: g.lambda,
                    ssim: g.ssim,
                    best: g.lambda == res.best_lambda,
                })
                .collect())
        })
        .collect::<anyhow::Result<_>>()?;
    if let Some(r) = report {
        let rows: Vec<VarRow> = results.into_iter().flatten().collect();
        io::write_csv(r, &rows)?;
    }
    Ok(())
}

fn failure_to_anyhow(f: Failure) -> anyhow::Error {
    match f {
        Failure::Usage(e) | Failure::Runtime(e) => e,
    }
}

fn train(cfg: &RunConfig, truth: &Path, degraded: Option<&Path>, model: &Path, report: Option<&Path>) -> Outcome {
    let files = io::list_pngs(truth)?;
    let dataset: Vec<TrainSample<f64>> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| -> anyhow::Result<TrainSample<f64>> {
            let t = io::read_png(path)?;
            let y = match degraded {
                Some(d) => io::read_png(&d.join(io::file_name(path)))?,
                None => degrade(&t, &cfg.degradation, i as u64)?.0,
            };
            Ok(TrainSample { truth: t, degraded: y })
        })
        .collect::<anyhow::Result<_>>()?;
    let mut template = Network::new(kernel(cfg)?, 0);
    template.delta = cfg.delta;
    template.bounds = cfg.bounds;
    template.x0_margin = cfg.schedule.x0_margin;
    let (net, rep) = train_greedy(&dataset, &template, &cfg.train)?;
    io::write_bytes(model, (net.to_json()? + "\n").as_bytes())?;
    if let Some(r) = report {
        io::write_csv(r, &rep.rows)?;
    }
    if let Some(last) = rep.layers.last() {
        log::info!("trained {} layers; final mean train ssim {:.4}", net.depth(), last.output_ssim);
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricRow {
    image: String,
    ssim: Option<f64>,
    psnr: Option<f64>,
    sigma_hat: f64,
}

#[derive(Serialize)]
struct LayerRow {
    image: String,
    layer: usize,
    gamma: f64,
    mu: f64,
    lambda: f64,
}

fn infer(
    cfg: &RunConfig,
    model: &Path,
    input: &Path,
    output: &Path,
    truth: Option<&Path>,
    metrics: Option<&Path>,
    layers_csv: Option<&Path>,
) -> Outcome {
    let net = Network::load(model)?;
    let files = io::list_pngs(input)?;
    let results: Vec<(MetricRow, Vec<LayerRow>)> = files
        .par_iter()
        .map(|path| -> anyhow::Result<(MetricRow, Vec<LayerRow>)> {
            let name = io::file_name(path);
            let y = io::read_png(path)?;
            let inf = net.infer(&y)?;
            io::write_png(&output.join(&name), &inf.image)?;
            let (s, p) = match truth {
                Some(t) => {
                    let t = io::read_png(&io::counterpart(t, &name))?;
                    (Some(ssim(&inf.image, &t, cfg.metric())?), Some(psnr(&inf.image, &t, cfg.metric())?))
                }
                None => (None, None),
            };
            let layers = inf
                .layers
                .iter()
                .map(|l| LayerRow {
                    image: name.clone(),
                    layer: l.layer,
                    gamma: l.gamma,
                    mu: l.mu,
                    lambda: l.lambda,
                })
                .collect();
            Ok((
                MetricRow {
                    image: name,
                    ssim: s,
                    psnr: p,
                    sigma_hat: inf.sigma_hat,
                },
                layers,
            ))
        })
        .collect::<anyhow::Result<_>>()?;
    let (rows, layers): (Vec<MetricRow>, Vec<Vec<LayerRow>>) = results.into_iter().unzip();
    if let Some(m) = metrics {
        io::write_csv(m, &rows)?;
    }
    if let Some(l) = layers_csv {
        let flat: Vec<LayerRow> = layers.into_iter().flatten().collect();
        io::write_csv(l, &flat)?;
    }
    log::info!("restored {} images into {}", rows.len(), output.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum QuadraticRegularizer {
    Gradient,
    Identity,
    None,
}

/// Quadratic problem on which a model is certified. Layer weights come from
/// `lambdas` when given, otherwise from the trajectory of the model on `input`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyProblem {
    height: usize,
    width: usize,
    #[serde(default = "default_channels")]
    channels: usize,
    regularizer: QuadraticRegularizer,
    #[serde(default)]
    lambdas: Option<Vec<f64>>,
    #[serde(default)]
    input: Option<PathBuf>,
    #[serde(default = "default_pairs")]
    pairs: usize,
}

fn default_channels() -> usize {
    1
}

fn default_pairs() -> usize {
    1000
}

#[derive(Serialize)]
struct CertifyOutput {
    #[serde(flatten)]
    certificate: StabilityCertificate<f64>,
    lambdas: Vec<f64>,
    check: Option<AveragednessCheck>,
}

fn certify(cfg: &RunConfig, model: &Path, problem_path: &Path, output: &Path) -> Outcome {
    let net = Network::load(model)?;
    let text = std::fs::read_to_string(problem_path)
        .with_context(|| format!("reading {}", problem_path.display()))?;
    let spec: CertifyProblem = serde_json::from_str(&text)
        .with_context(|| format!("parsing problem {}", problem_path.display()))
        .map_err(usage)?;
    if spec.height == 0 || spec.width == 0 || spec.channels == 0 {
        return Err(usage(anyhow!("problem shape must be nonzero")));
    }
    let shape = (spec.height, spec.width);
    let layers: Vec<FrozenLayer<f64>> = match (&spec.lambdas, &spec.input) {
        (Some(l), _) => {
            if l.len() != net.depth() {
                return Err(usage(anyhow!("{} lambdas given for a {}-layer model", l.len(), net.depth())));
            }
            net.layers
                .iter()
                .zip(l)
                .map(|(p, &lambda)| FrozenLayer {
                    gamma: p.gamma(),
                    mu: p.mu(),
                    lambda,
                })
                .collect()
        }
        (None, Some(input)) => {
            let y = io::read_png(input)?;
            freeze_layers(&net, &y)?
        }
        (None, None) => return Err(usage(anyhow!("problem needs either \"lambdas\" or \"input\""))),
    };
    let blur = CirculantOperator::new(net.kernel.clone(), shape)?;
    let y = Image::zeros(spec.channels, spec.height, spec.width);
    let ops = match spec.regularizer {
        QuadraticRegularizer::Gradient => {
            let g = GradientOperators::new(shape)?;
            vec![g.vertical, g.horizontal]
        }
        QuadraticRegularizer::Identity => vec![CirculantOperator::identity(shape)?],
        QuadraticRegularizer::None => Vec::new(),
    };
    let p = Problem::new(blur, y, net.bounds)?.with_quadratic(ops)?;
    let cert = certify_problem(&layers, &p)?;
    let check = match cert.alpha {
        Some(a) if spec.pairs > 0 => Some(check_frozen_network(&layers, &p, a, spec.pairs, cfg.seed)?),
        _ => None,
    };
    if let Some(c) = &check {
        if !c.pass {
            log::warn!("Monte-Carlo check found {} violations (worst margin {:e})", c.violations, c.worst_margin);
        }
    }
    io::write_json(
        output,
        &CertifyOutput {
            lambdas: layers.iter().map(|l| l.lambda).collect(),
            certificate: cert,
            check,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct PairRow {
    image: String,
    ssim: f64,
    psnr: f64,
}

fn metrics(cfg: &RunConfig, input: &Path, truth: &Path, output: &Path) -> Outcome {
    let files = io::list_pngs(input)?;
    let rows: Vec<PairRow> = files
        .par_iter()
        .map(|path| -> anyhow::Result<PairRow> {
            let name = io::file_name(path);
            let x = io::read_png(path)?;
            let t = io::read_png(&io::counterpart(truth, &name))?;
            if x.shape() != t.shape() {
                bail!("{name}: shape {:?} differs from truth {:?}", x.shape(), t.shape());
            }
            Ok(PairRow {
                image: name,
                ssim: ssim(&x, &t, cfg.metric())?,
                psnr: psnr(&x, &t, cfg.metric())?,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    io::write_csv(output, &rows)?;
    Ok(())
}
