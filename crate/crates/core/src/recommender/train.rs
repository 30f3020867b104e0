use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;

use super::loss::{margin_term, margin_term_grad};
use super::model::{ForwardTrace, ModelConfig, ModelParams};
use crate::domain::LabeledRecord;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Index-based description of one anchor's positive and negative draws.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripletPlan {
    pub anchor: usize,
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
}

fn draw<R: Rng + ?Sized>(pool: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    if pool.len() >= count {
        pool.choose_multiple(rng, count).copied().collect()
    } else {
        (0..count)
            .map(|_| *pool.choose(rng).expect("non-empty pool"))
            .collect()
    }
}

fn split_labels(data: &[LabeledRecord]) -> Result<(Vec<usize>, Vec<usize>)> {
    let winners: Vec<usize> = (0..data.len()).filter(|&i| data[i].is_winner).collect();
    let losers: Vec<usize> = (0..data.len()).filter(|&i| !data[i].is_winner).collect();
    if winners.is_empty() || losers.is_empty() {
        return Err(Error::DegenerateData {
            winners: winners.len(),
            total: data.len(),
        });
    }
    Ok((winners, losers))
}

/// Anchors are winner records; positives come from the other winners (the
/// anchor itself when it is the only one) and negatives from non-winners.
pub fn plan_triplets<R: Rng + ?Sized>(
    data: &[LabeledRecord],
    cfg: &ModelConfig,
    rng: &mut R,
) -> Result<Vec<TripletPlan>> {
    let (winners, losers) = split_labels(data)?;
    Ok(winners
        .iter()
        .map(|&a| {
            let others: Vec<usize> = winners.iter().copied().filter(|&w| w != a).collect();
            let pool = if others.is_empty() { vec![a] } else { others };
            TripletPlan {
                anchor: a,
                positives: draw(&pool, cfg.positives_per_anchor, rng),
                negatives: draw(&losers, cfg.negatives_per_anchor, rng),
            }
        })
        .collect())
}

fn used_indices(plan: &[TripletPlan], n: usize) -> Vec<bool> {
    let mut used = vec![false; n];
    for t in plan {
        used[t.anchor] = true;
        t.positives
            .iter()
            .chain(&t.negatives)
            .for_each(|&i| used[i] = true);
    }
    used
}

fn forward_used(
    params: &ModelParams,
    features: &[Vec<f64>],
    used: &[bool],
) -> Result<Vec<Option<ForwardTrace>>> {
    features
        .iter()
        .zip(used)
        .map(|(f, &u)| {
            if u {
                params.forward_trace(f).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect()
}

fn out(traces: &[Option<ForwardTrace>], i: usize) -> &[f64] {
    traces[i].as_ref().expect("index was marked used").output()
}

/// Mean hinge loss of a fixed triplet plan.
pub fn plan_loss(
    params: &ModelParams,
    features: &[Vec<f64>],
    plan: &[TripletPlan],
    margin: f64,
) -> Result<f64> {
    if plan.is_empty() {
        return Err(Error::Empty("triplet plan"));
    }
    let traces = forward_used(params, features, &used_indices(plan, features.len()))?;
    let mut total = 0.0;
    for t in plan {
        let pos: Vec<&[f64]> = t.positives.iter().map(|&i| out(&traces, i)).collect();
        let neg: Vec<&[f64]> = t.negatives.iter().map(|&i| out(&traces, i)).collect();
        total += margin_term(out(&traces, t.anchor), &pos, &neg, margin)?;
    }
    Ok(total / plan.len() as f64)
}

/// Mean hinge loss of a fixed plan and its gradient w.r.t. every parameter.
pub fn plan_loss_and_gradient(
    params: &ModelParams,
    features: &[Vec<f64>],
    plan: &[TripletPlan],
    margin: f64,
) -> Result<(f64, ModelParams)> {
    if plan.is_empty() {
        return Err(Error::Empty("triplet plan"));
    }
    let used = used_indices(plan, features.len());
    let traces = forward_used(params, features, &used)?;
    let dim = params.embed_dim();
    let mut dz: Vec<Vec<f64>> = used
        .iter()
        .map(|&u| if u { vec![0.0; dim] } else { Vec::new() })
        .collect();
    let weight = 1.0 / plan.len() as f64;
    let mut total = 0.0;
    for t in plan {
        let pos: Vec<&[f64]> = t.positives.iter().map(|&i| out(&traces, i)).collect();
        let neg: Vec<&[f64]> = t.negatives.iter().map(|&i| out(&traces, i)).collect();
        let mut ga = vec![0.0; dim];
        let mut gp = vec![vec![0.0; dim]; pos.len()];
        let mut gn = vec![vec![0.0; dim]; neg.len()];
        total += margin_term_grad(
            out(&traces, t.anchor),
            &pos,
            &neg,
            margin,
            weight,
            &mut ga,
            &mut gp,
            &mut gn,
        )?;
        let targets = std::iter::once((t.anchor, ga))
            .chain(t.positives.iter().copied().zip(gp))
            .chain(t.negatives.iter().copied().zip(gn));
        for (i, g) in targets {
            dz[i].iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
    }
    let mut grads = params.zeroed_like();
    for (i, trace) in traces.iter().enumerate() {
        if let Some(trace) = trace {
            if dz[i].iter().any(|v| *v != 0.0) {
                params.backward(trace, &dz[i], &mut grads);
            }
        }
    }
    Ok((total * weight, grads))
}

/// Trains from `init` by gradient descent on the margin loss. Returns the
/// trained parameters and the mean loss observed in each epoch.
pub fn train_local_traced(
    data: &[LabeledRecord],
    init: &ModelParams,
    cfg: &ModelConfig,
) -> Result<(ModelParams, Vec<f64>)> {
    cfg.validate()?;
    split_labels(data)?;
    let features: Vec<Vec<f64>> = data.iter().map(|r| r.sample.features().to_vec()).collect();
    let mut params = init.clone();
    let mut rng = seeded(cfg.seed);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let mut plan = plan_triplets(data, cfg, &mut rng)?;
        let batch = cfg.anchors_per_batch.unwrap_or(plan.len()).min(plan.len());
        if batch < plan.len() {
            plan.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in plan.chunks(batch) {
            let (loss, grads) = plan_loss_and_gradient(&params, &features, chunk, cfg.margin)?;
            epoch_loss += loss * chunk.len() as f64;
            let norm = grads.values().map(|g| g * g).sum::<f64>().sqrt();
            let step = match cfg.grad_clip {
                Some(c) if norm > c => cfg.learning_rate * c / norm,
                _ => cfg.learning_rate,
            };
            for (p, g) in params.values_mut().zip(grads.values()) {
                *p -= step * g;
            }
        }
        losses.push(epoch_loss / plan.len() as f64);
    }
    Ok((params, losses))
}

/// Local training step of a node.
pub fn train_local(
    data: &[LabeledRecord],
    init: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ModelParams> {
    train_local_traced(data, init, cfg).map(|(p, _)| p)
}
