//! Embedding quality: k-means++ clustering scored by adjusted mutual
//! information, and a linear probe on frozen embeddings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::argmax_rows;
use crate::nn::{Adam, ParamStore, Tape, Tensor};

pub const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITERS: usize = 300;
const PROBE_EPOCHS: usize = 500;
const PROBE_LR: f64 = 1e-2;
const PROBE_TEST_FRACTION: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct KMeans {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means with k-means++ seeding; the lowest-inertia of `restarts` runs.
pub fn kmeans(data: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> Result<KMeans> {
    if k == 0 || k > data.len() || restarts == 0 {
        return Err(Error::Config(format!("k-means needs 1 <= k <= {} and restarts > 0, got k = {k}", data.len())));
    }
    let mut best: Option<KMeans> = None;
    for r in 0..restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let run = lloyd(data, plus_plus(data, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

fn plus_plus(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![data[rng.random_range(0..data.len())].clone()];
    let mut d: Vec<f64> = data.iter().map(|x| dist2(x, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = data.len() - 1;
            for (i, &w) in d.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..data.len())
        };
        centroids.push(data[next].clone());
        for (di, x) in d.iter_mut().zip(data) {
            *di = di.min(dist2(x, &centroids[centroids.len() - 1]));
        }
    }
    centroids
}

fn lloyd(data: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeans {
    let k = centroids.len();
    let dim = data[0].len();
    let nearest = |c: &[Vec<f64>], x: &[f64]| (0..k).map(|j| (dist2(x, &c[j]), j)).min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    let mut assignment = vec![usize::MAX; data.len()];
    for _ in 0..KMEANS_MAX_ITERS {
        let next: Vec<usize> = data.iter().map(|x| nearest(&centroids, x).1).collect();
        if next == assignment {
            break;
        }
        assignment = next;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in data.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for j in 0..k {
            // An emptied cluster keeps its previous centroid.
            if counts[j] > 0 {
                centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
    }
    let inertia = data.iter().map(|x| nearest(&centroids, x).0).sum();
    KMeans { assignment, centroids, inertia }
}

fn relabel(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    (labels.iter().map(|l| seen.binary_search(l).unwrap()).collect(), seen.len())
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// Adjusted mutual information with arithmetic-mean normalization.
pub fn adjusted_mutual_info(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Shape(format!("label vectors of length {} and {}", truth.len(), pred.len())));
    }
    let (u, r) = relabel(truth);
    let (v, c) = relabel(pred);
    if r < 2 {
        return Err(Error::Config("AMI is undefined for single-class ground truth".into()));
    }
    let n = truth.len();
    let nf = n as f64;
    let mut table = vec![vec![0usize; c]; r];
    for (&i, &j) in u.iter().zip(&v) {
        table[i][j] += 1;
    }
    let a: Vec<usize> = table.iter().map(|row| row.iter().sum()).collect();
    let b: Vec<usize> = (0..c).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let mut mi = 0.0;
    for i in 0..r {
        for j in 0..c {
            let nij = table[i][j] as f64;
            if nij > 0.0 {
                mi += nij / nf * (nf * nij / (a[i] as f64 * b[j] as f64)).ln();
            }
        }
    }
    // Expected MI under the hypergeometric model of random labellings.
    let lf: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let mut emi = 0.0;
    for &ai in &a {
        for &bj in &b {
            let lo = (ai + bj).saturating_sub(n).max(1);
            for nij in lo..=ai.min(bj) {
                let x = nij as f64;
                let log_p = lf[ai] + lf[bj] + lf[n - ai] + lf[n - bj] - lf[n] - lf[nij] - lf[ai - nij] - lf[bj - nij] - lf[n + nij - ai - bj];
                emi += x / nf * (nf * x / (ai as f64 * bj as f64)).ln() * log_p.exp();
            }
        }
    }
    let mean_h = 0.5 * (entropy(&a, nf) + entropy(&b, nf));
    let denom = mean_h - emi;
    if denom.abs() < 1e-15 {
        return Ok(if (mi - emi).abs() < 1e-15 { 1.0 } else { 0.0 });
    }
    Ok((mi - emi) / denom)
}

/// Trains a single linear layer with cross-entropy on standardized frozen
/// features of a stratified train split; returns held-out accuracy.
pub fn linear_probe(features: &[Vec<f64>], labels: &[usize], classes: usize, seed: u64) -> Result<f64> {
    if features.len() != labels.len() || features.is_empty() {
        return Err(Error::Shape("features and labels differ in length".into()));
    }
    let dim = features[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        let k = ((members.len() as f64) * PROBE_TEST_FRACTION).round() as usize;
        let k = if members.len() >= 2 { k.clamp(1, members.len() - 1) } else { 0 };
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    if test.is_empty() || train.is_empty() {
        return Err(Error::Config("too few samples for a probe split".into()));
    }
    let mean: Vec<f64> = (0..dim).map(|d| train.iter().map(|&i| features[i][d]).sum::<f64>() / train.len() as f64).collect();
    let std: Vec<f64> = (0..dim)
        .map(|d| (train.iter().map(|&i| (features[i][d] - mean[d]).powi(2)).sum::<f64>() / train.len() as f64).sqrt().max(1e-8))
        .collect();
    let matrix = |rows: &[usize]| {
        Tensor::matrix(rows.len(), dim, rows.iter().flat_map(|&i| (0..dim).map(|d| (features[i][d] - mean[d]) / std[d]).collect::<Vec<_>>()).collect())
    };
    let (xtr, xte) = (matrix(&train), matrix(&test));
    let ytr: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let mut store = ParamStore::new();
    let w = store.add("probe.weight", Tensor::zeros(vec![dim, classes]), true);
    let b = store.add("probe.bias", Tensor::zeros(vec![1, classes]), true);
    let forward = |store: &ParamStore, x: &Tensor| -> Result<(Tape, crate::nn::Var)> {
        let mut t = Tape::new();
        let xv = t.leaf(x.clone());
        let (wv, bv) = (t.param(store, w), t.param(store, b));
        let y = t.matmul(xv, wv)?;
        let y = t.add_row(y, bv)?;
        Ok((t, y))
    };
    let mut adam = Adam::new(PROBE_LR);
    for _ in 0..PROBE_EPOCHS {
        let (mut t, y) = forward(&store, &xtr)?;
        let loss = t.cross_entropy(y, &ytr)?;
        let grads = t.param_grads(&t.backward(loss)?, &store);
        adam.step(&mut store, &grads);
    }
    let (t, y) = forward(&store, &xte)?;
    let preds = argmax_rows(t.value(y));
    let hits = preds.iter().zip(&test).filter(|(p, &i)| **p == labels[i]).count();
    Ok(hits as f64 / test.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ami: f64,
    pub probe_accuracy: f64,
    pub seeds: EvalSeeds,
    pub clusters: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSeeds {
    pub kmeans: u64,
    pub probe: u64,
}

/// k-means (k = `classes`, k-means++, [`KMEANS_RESTARTS`] restarts) scored by
/// AMI, plus linear-probe accuracy.
pub fn evaluate_embeddings(embeddings: &[Vec<f64>], labels: &[usize], classes: usize, seed: u64) -> Result<EvalReport> {
    let km = kmeans(embeddings, classes, KMEANS_RESTARTS, seed)?;
    let ami = adjusted_mutual_info(labels, &km.assignment)?;
    let probe_seed = seed.wrapping_add(1);
    let probe_accuracy = linear_probe(embeddings, labels, classes, probe_seed)?;
    Ok(EvalReport { ami, probe_accuracy, seeds: EvalSeeds { kmeans: seed, probe: probe_seed }, clusters: classes, samples: embeddings.len() })
}
