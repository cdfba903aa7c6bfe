#![allow(dead_code)]

use fairadv::attack::{attack, AttackConfig, Objective};
use fairadv::data::DataSlice;
use fairadv::fairness::Thresholds;
use fairadv::model::{cross_entropy, Activation, LossKind, MlpModel};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random slice with every (y, a) cell populated.
pub fn random_slice(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DataSlice {
    assert!(n >= 4);
    let x = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>());
    let mut y: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let mut a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    for (k, (yy, aa)) in [(0, 0), (0, 1), (1, 0), (1, 1)].into_iter().enumerate() {
        y[k] = yy;
        a[k] = aa;
    }
    DataSlice::new(x, y, a).unwrap()
}

pub fn random_model(rng: &mut ChaCha8Rng, d: usize, activation: Activation) -> MlpModel {
    let depth = rng.gen_range(0..3);
    let mut dims = vec![d];
    for _ in 0..depth {
        dims.push(rng.gen_range(2..9));
    }
    dims.push(1);
    MlpModel::new_seeded(&dims, activation, rng.gen()).unwrap()
}

pub fn batch_loss(model: &MlpModel, x: &Array2<f64>, kind: LossKind, targets: &Array1<f64>) -> f64 {
    let f = model.predict(x.view()).unwrap();
    match kind {
        LossKind::CrossEntropy => f.iter().zip(targets).map(|(&f, &y)| cross_entropy(f, y)).sum(),
        LossKind::SignedSoftLabel => f.iter().zip(targets).map(|(&f, &s)| s * f).sum(),
    }
}

/// Signs of every hidden pre-activation, to detect finite-difference
/// probes that straddle a ReLU kink.
pub fn kink_pattern(model: &MlpModel, x: &Array2<f64>) -> Vec<bool> {
    let t = model.forward(x.view()).unwrap();
    let hidden = t.pre_activations.len().saturating_sub(1);
    t.pre_activations[..hidden].iter().flat_map(|z| z.iter().map(|&v| v > 0.0)).collect()
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-7 {
        (analytic - numeric).abs()
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Brute-force group metrics: (accuracy, hard DI, hard EOd, tpr, tnr,
/// relaxed DI, relaxed EOd), written independently of the library.
pub struct Brute {
    pub accuracy: f64,
    pub di: f64,
    pub eod: f64,
    pub tpr: [f64; 2],
    pub tnr: [f64; 2],
    pub di_relaxed: f64,
    pub eod_relaxed: f64,
}

pub fn brute_metrics(f: &[f64], y: &[u8], a: &[u8], thr: [f64; 2]) -> Brute {
    let n = f.len();
    let pred: Vec<u8> = (0..n).map(|i| u8::from(f[i] >= thr[a[i] as usize])).collect();
    let mean_where = |keep: &dyn Fn(usize) -> bool, v: &dyn Fn(usize) -> f64| {
        let idx: Vec<usize> = (0..n).filter(|&i| keep(i)).collect();
        idx.iter().map(|&i| v(i)).sum::<f64>() / idx.len() as f64
    };
    let soft = |i: usize| f[i];
    let hard = |i: usize| f64::from(pred[i]);
    let mut tpr = [0.0; 2];
    let mut tnr = [0.0; 2];
    let mut pos = [0.0; 2];
    let mut soft_group = [0.0; 2];
    let mut soft_cell = [[0.0; 2]; 2];
    for g in 0..2u8 {
        tpr[g as usize] = mean_where(&|i| a[i] == g && y[i] == 1, &hard);
        tnr[g as usize] = 1.0 - mean_where(&|i| a[i] == g && y[i] == 0, &hard);
        pos[g as usize] = mean_where(&|i| a[i] == g, &hard);
        soft_group[g as usize] = mean_where(&|i| a[i] == g, &soft);
        for c in 0..2u8 {
            soft_cell[c as usize][g as usize] = mean_where(&|i| a[i] == g && y[i] == c, &soft);
        }
    }
    let correct = (0..n).filter(|&i| pred[i] == y[i]).count();
    Brute {
        accuracy: correct as f64 / n as f64,
        di: (pos[0] - pos[1]).abs(),
        eod: (tpr[0] - tpr[1]).abs() + ((1.0 - tnr[0]) - (1.0 - tnr[1])).abs(),
        tpr,
        tnr,
        di_relaxed: (soft_group[1] - soft_group[0]).abs(),
        eod_relaxed: (soft_cell[0][0] - soft_cell[0][1]).abs() + (soft_cell[1][0] - soft_cell[1][1]).abs(),
    }
}

pub fn di_attack(model: &MlpModel, slice: &DataSlice, eps: f64) -> fairadv::attack::AttackResult {
    attack(model, slice, &AttackConfig::new(Objective::Di, eps)).unwrap()
}

pub const H: f64 = 1e-5;
pub const TOL: f64 = 1e-4;

/// Compares one analytic gradient entry against a central difference.
/// Returns `None` when the probe crosses a ReLU kink.
pub fn probe(seed: u64, activation: Activation, kind: LossKind, on_input: bool) -> Option<(f64, f64)> {
    let mut r = rng(seed);
    let d = r.gen_range(1..7);
    let b = r.gen_range(1..5);
    let model = random_model(&mut r, d, activation);
    let x = Array2::from_shape_fn((b, d), |_| r.gen::<f64>());
    let targets: Array1<f64> = match kind {
        LossKind::CrossEntropy => (0..b).map(|_| f64::from(r.gen_range(0..2u8))).collect(),
        LossKind::SignedSoftLabel => (0..b).map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 }).collect(),
    };
    let trace = model.forward(x.view()).unwrap();
    let grads = model.backward_loss(&trace, kind, targets.view()).unwrap();
    if on_input {
        let (i, j) = (r.gen_range(0..b), r.gen_range(0..d));
        let (mut up, mut down) = (x.clone(), x.clone());
        up[[i, j]] += H;
        down[[i, j]] -= H;
        if kink_pattern(&model, &up) != kink_pattern(&model, &down) {
            return None;
        }
        let fd = (batch_loss(&model, &up, kind, &targets) - batch_loss(&model, &down, kind, &targets)) / (2.0 * H);
        Some((grads.input_grad[[i, j]], fd))
    } else {
        let l = r.gen_range(0..model.layer_count());
        let w = &model.weights()[l];
        let use_bias = r.gen_bool(0.3);
        let shifted = |delta: f64| -> MlpModel {
            let mut ws = model.weights().to_vec();
            let mut bs = model.biases().to_vec();
            if use_bias {
                bs[l][0] += delta;
            } else {
                ws[l][[0, w.ncols() - 1]] += delta;
            }
            MlpModel::from_parts(activation, ws, bs).unwrap()
        };
        let (mu, md) = (shifted(H), shifted(-H));
        if kink_pattern(&mu, &x) != kink_pattern(&md, &x) {
            return None;
        }
        let fd = (batch_loss(&mu, &x, kind, &targets) - batch_loss(&md, &x, kind, &targets)) / (2.0 * H);
        let analytic = if use_bias {
            grads.bias_grads[l][0]
        } else {
            grads.weight_grads[l][[0, w.ncols() - 1]]
        };
        Some((analytic, fd))
    }
}

pub fn random_instance(seed: u64) -> (Array1<f64>, Vec<u8>, Vec<u8>, Thresholds) {
    let mut r = rng(seed);
    let n = r.gen_range(4..30);
    let s = random_slice(&mut r, n, 1);
    // coarse scores hit the thresholds exactly now and then
    let f: Array1<f64> = (0..n)
        .map(|_| if r.gen_bool(0.3) { r.gen_range(0..=10) as f64 / 10.0 } else { r.gen::<f64>() })
        .collect();
    let t = Thresholds::new(r.gen_range(1..10) as f64 / 10.0, r.gen_range(1..10) as f64 / 10.0);
    (f, s.labels, s.sensitive, t)
}
