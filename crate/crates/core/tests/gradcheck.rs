//! Central finite differences against the analytic backward pass.
//!
//! The sampled latent graph and the rewards are held fixed, so the total
//! loss is a smooth function of every parameter away from rectifier kinks.
//! When the `±h` evaluations flip any rectifier the coordinate is retried
//! with `h / 100`; if that still straddles a kink it is skipped. The skipped
//! fraction must stay below 1 %.

mod common;

use ppgnn::data::{generate_sbm, GraphDataset, SbmConfig, Split};
use ppgnn::learner::{EmbeddingNet, LatentGraph, SampleMode};
use ppgnn::train::{GraphContext, ModelInit, ModelMode, ModelParams, RewardSource, RewardVector};
use rand::Rng;

const REL_TOL: f64 = 1e-4;
const STEP: f64 = 1e-4;

struct Eval {
    total: f64,
    pattern: Vec<bool>,
}

fn eval(
    params: &ModelParams<f64>,
    ctx: &GraphContext<f64>,
    data: &GraphDataset<f64>,
    latent: Option<&LatentGraph>,
    delta: &RewardVector<f64>,
) -> Eval {
    let state = params.learn_graph(ctx, data.features().view()).unwrap();
    let out = params
        .loss_and_gradients(
            ctx,
            data,
            state.as_ref(),
            latent,
            RewardSource::Fixed(delta.clone()),
            None,
        )
        .unwrap();
    let mut pattern = out.relu_pattern;
    if let Some(s) = &state {
        pattern.extend(EmbeddingNet::activation_pattern(&s.cache));
    }
    Eval {
        total: out.loss.total,
        pattern,
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub checked: usize,
    pub skipped: usize,
    pub retried: usize,
    pub worst_tensor: (String, f64),
}

/// Checks every coordinate of every parameter tensor.
pub fn check(mode: ModelMode, graph_conv: bool, seed: u64) -> Report {
    let data = generate_sbm::<f64>(&SbmConfig::new(30, 3, 0.4, 0.05, 6, 0.5, seed)).unwrap();
    let ctx = GraphContext::new(&data).unwrap();
    let init = ModelInit {
        mode,
        k: 3,
        anchors: Some(6),
        graph_conv,
        seed,
    };
    let params = ModelParams::init(&data, init).unwrap();
    let state = params.learn_graph(&ctx, data.features().view()).unwrap();
    let latent = state
        .as_ref()
        .map(|s| params.sample(s, SampleMode::Stochastic, seed + 1).unwrap());
    let train = data.split(Split::Train).to_vec();
    let mut r = common::rng(seed);
    let delta = RewardVector::from_parts(
        train.clone(),
        train.iter().map(|_| r.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let step = params
        .loss_and_gradients(
            &ctx,
            &data,
            state.as_ref(),
            latent.as_ref(),
            RewardSource::Fixed(delta.clone()),
            None,
        )
        .unwrap();
    let analytic = step.grads;
    // rounding error of a central difference at the base step
    let noise = 64.0 * f64::EPSILON * step.loss.total.abs().max(1.0) / STEP;

    let mut report = Report::default();
    let names = params.parameter_names();
    for name in &names {
        let grad = analytic.get(name).unwrap().to_vec();
        let mut numeric = vec![0.0; grad.len()];
        let mut kept = vec![false; grad.len()];
        for idx in 0..grad.len() {
            let theta = params.clone().tensor_mut(name).unwrap()[idx];
            let mut h = STEP * theta.abs().max(1.0);
            let mut estimate = None;
            // retry once with a smaller step next to a kink
            for _ in 0..2 {
                let mut plus = params.clone();
                plus.tensor_mut(name).unwrap()[idx] = theta + h;
                let mut minus = params.clone();
                minus.tensor_mut(name).unwrap()[idx] = theta - h;
                let ep = eval(&plus, &ctx, &data, latent.as_ref(), &delta);
                let em = eval(&minus, &ctx, &data, latent.as_ref(), &delta);
                if ep.pattern == em.pattern {
                    estimate = Some((ep.total - em.total) / (2.0 * h));
                    break;
                }
                report.retried += 1;
                h *= 1e-2;
            }
            let Some(estimate) = estimate else {
                report.skipped += 1;
                continue;
            };
            numeric[idx] = estimate;
            report.checked += 1;
            kept[idx] = true;
            let (a, n) = (grad[idx], numeric[idx]);
            assert!(
                (a - n).abs() <= REL_TOL * a.abs().max(n.abs()) + noise,
                "{mode} {name}[{idx}]: analytic {a:e} numeric {n:e}"
            );
        }
        let diff: f64 = (0..grad.len())
            .filter(|&i| kept[i])
            .map(|i| (grad[i] - numeric[i]).powi(2))
            .sum();
        let norm_a: f64 = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm_n: f64 = numeric.iter().map(|v| v * v).sum::<f64>().sqrt();
        let floor = noise * (grad.len() as f64).sqrt();
        let scale = norm_a.max(norm_n);
        assert!(
            diff.sqrt() <= REL_TOL * scale + floor,
            "{mode} {name}: tensor error {:e} against norm {scale:e}",
            diff.sqrt()
        );
        let rel = if scale > floor {
            diff.sqrt() / scale
        } else {
            0.0
        };
        if rel >= report.worst_tensor.1 {
            report.worst_tensor = (name.clone(), rel);
        }
    }
    assert!(
        (report.skipped as f64) < 0.01 * (report.checked + report.skipped) as f64,
        "{mode}: skipped {} of {}",
        report.skipped,
        report.checked + report.skipped
    );
    report
}

#[test]
fn node_node_gradients() {
    let r = check(ModelMode::Ppgnn, false, 21);
    assert!(r.checked > 10_000);
}

#[test]
fn node_node_graph_conv_gradients() {
    check(ModelMode::Ppgnn, true, 22);
}

#[test]
fn anchor_gradients() {
    check(ModelMode::PpgnnAnchor, false, 23);
}

#[test]
fn baseline_gradients() {
    check(ModelMode::Gcn, false, 24);
    check(ModelMode::Mlp, false, 25);
}

#[test]
fn last_embedding_bias_has_no_gradient() {
    // shifting every embedding by the same vector leaves all distances alone
    let data = generate_sbm::<f64>(&SbmConfig::new(30, 3, 0.4, 0.05, 6, 0.5, 5)).unwrap();
    let ctx = GraphContext::new(&data).unwrap();
    let init = ModelInit {
        mode: ModelMode::Ppgnn,
        k: 3,
        anchors: None,
        graph_conv: false,
        seed: 5,
    };
    let params = ModelParams::init(&data, init).unwrap();
    let state = params.learn_graph(&ctx, data.features().view()).unwrap();
    let latent = params
        .sample(state.as_ref().unwrap(), SampleMode::Stochastic, 6)
        .unwrap();
    let train = data.split(Split::Train).to_vec();
    let delta: Vec<f64> = (0..train.len())
        .map(|i| if i % 2 == 0 { 0.5 } else { -0.5 })
        .collect();
    let fixed = RewardSource::Fixed(RewardVector::from_parts(train, delta).unwrap());
    let out = params
        .loss_and_gradients(&ctx, &data, state.as_ref(), Some(&latent), fixed, None)
        .unwrap();
    let weight_scale = out
        .grads
        .get("embed.1.weight")
        .unwrap()
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(weight_scale > 0.0);
    for g in out.grads.get("embed.1.bias").unwrap() {
        assert!(g.abs() < 1e-12 * weight_scale.max(1.0), "{g}");
    }
}
