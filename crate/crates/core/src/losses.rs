//! The training loss stack as pure functions with analytic gradients:
//! weighted cross-entropy, Dice, distance-map MSE, and the Sobel-gradient
//! MSE, plus the weighted total and its derivative with respect to every
//! prediction element.
//!
//! All reductions run in fixed raster order so repeated evaluations are
//! bit-stable.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sobel::{sobel_x, sobel_x_adjoint, sobel_y, sobel_y_adjoint};
use crate::types::{PredictionMaps, NUM_CLASSES, NUM_FG_CLASSES};

/// Per-class cross-entropy weights for the type branch.
///
/// Background gets the least weight, the head classes (epithelial,
/// lymphocyte, plasma, connective) a moderate one, and the tail classes
/// (neutrophil, eosinophil) an emphasizing one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights(pub [f64; NUM_CLASSES]);

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights([0.1, 0.8, 0.2, 0.2, 0.2, 0.8, 0.2])
    }
}

/// Weighting of the individual loss terms in the total. Both distance-map
/// terms carry weight 2; everything else weight 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub np_ce: f64,
    pub np_dice: f64,
    pub dist_mse: f64,
    pub dist_grad: f64,
    pub tp_wce: f64,
    pub tp_dice: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            np_ce: 1.0,
            np_dice: 1.0,
            dist_mse: 2.0,
            dist_grad: 2.0,
            tp_wce: 1.0,
            tp_dice: 1.0,
        }
    }
}

/// Probabilities are clamped to [PROB_CLAMP, 1] before the log.
pub const PROB_CLAMP: f64 = 1e-7;

/// Smoothing term in the Dice loss.
pub const DICE_EPS: f64 = 1e-3;

fn check_stack(pred: &[Grid<f64>], target: &[Grid<f64>], weights: &[f64]) -> Result<()> {
    if pred.len() != target.len() || pred.len() != weights.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "weighted_ce: {} pred / {} target channels, {} weights",
            pred.len(),
            target.len(),
            weights.len()
        )));
    }
    let shape = pred[0].shape();
    for g in pred.iter().chain(target.iter()) {
        if g.shape() != shape {
            return Err(Error::shape(
                "weighted_ce: channel shapes differ".to_string(),
            ));
        }
    }
    Ok(())
}

/// Weighted cross-entropy over a C-channel probability stack against one-hot
/// targets: the mean over pixels of w[true class] · (−log p[true class]).
pub fn weighted_ce(pred: &[Grid<f64>], target: &[Grid<f64>], weights: &[f64]) -> Result<f64> {
    check_stack(pred, target, weights)?;
    let (h, w) = pred[0].shape();
    let mut acc = 0.0;
    for r in 0..h {
        for c in 0..w {
            let t = true_class(target, r, c);
            let p = pred[t].get(r, c).clamp(PROB_CLAMP, 1.0);
            acc += weights[t] * (-p.ln());
        }
    }
    Ok(acc / (h * w) as f64)
}

#[inline]
fn true_class(target: &[Grid<f64>], r: usize, c: usize) -> usize {
    for (ch, g) in target.iter().enumerate() {
        if g.get(r, c) > 0.5 {
            return ch;
        }
    }
    0
}

/// Dice loss 1 − (2Σpt + ε) / (Σp + Σt + ε); 0 for a perfect match and for
/// two empty maps.
pub fn dice_loss(pred: &Grid<f64>, target: &Grid<f64>) -> f64 {
    assert!(pred.same_shape(target), "dice_loss shape mismatch");
    let mut inter = 0.0;
    let mut p_sum = 0.0;
    let mut t_sum = 0.0;
    for (&p, &t) in pred.iter().zip(target.iter()) {
        inter += p * t;
        p_sum += p;
        t_sum += t;
    }
    1.0 - (2.0 * inter + DICE_EPS) / (p_sum + t_sum + DICE_EPS)
}

/// Mean squared error over all elements of a two-channel distance group.
pub fn dist_mse(pred: &[Grid<f64>; 2], target: &[Grid<f64>; 2]) -> f64 {
    assert!(pred[0].same_shape(&target[0]) && pred[1].same_shape(&target[1]));
    let n = pred[0].len() + pred[1].len();
    let mut acc = 0.0;
    for ch in 0..2 {
        for (&p, &t) in pred[ch].iter().zip(target[ch].iter()) {
            let d = p - t;
            acc += d * d;
        }
    }
    acc / n as f64
}

/// Mean squared error between Sobel responses (x of channel 0, y of channel
/// 1), restricted to foreground pixels; 0 when the foreground is empty.
pub fn dist_grad_mse(pred: &[Grid<f64>; 2], target: &[Grid<f64>; 2], fg: &Grid<f64>) -> f64 {
    assert!(pred[0].same_shape(fg));
    let fg_count = fg.iter().filter(|&&m| m > 0.5).count();
    if fg_count == 0 {
        return 0.0;
    }
    let gx_p = sobel_x(&pred[0]);
    let gx_t = sobel_x(&target[0]);
    let gy_p = sobel_y(&pred[1]);
    let gy_t = sobel_y(&target[1]);
    let mut acc = 0.0;
    for ((&m, (&a, &b)), (&c, &d)) in fg
        .iter()
        .zip(gx_p.iter().zip(gx_t.iter()))
        .zip(gy_p.iter().zip(gy_t.iter()))
    {
        if m > 0.5 {
            acc += (a - b) * (a - b) + (c - d) * (c - d);
        }
    }
    // Two masked squared residuals per foreground pixel.
    acc / (2 * fg_count) as f64
}

/// The individual terms of the total loss, before weighting, plus the
/// weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub np_ce: f64,
    pub np_dice: f64,
    pub mse_hv: f64,
    pub mse_dg: f64,
    pub gmse_hv: f64,
    pub gmse_dg: f64,
    pub tp_wce: f64,
    pub tp_dice: f64,
    pub total: f64,
}

fn np_stacks(
    pred: &PredictionMaps,
    target: &crate::encoder::TargetMaps,
) -> ([Grid<f64>; 2], [Grid<f64>; 2]) {
    let pred_stack = [pred.np_prob.map(|p| 1.0 - p), pred.np_prob.clone()];
    let target_stack = [target.np.map(|t| 1.0 - t), target.np.clone()];
    (pred_stack, target_stack)
}

/// Evaluate every loss term and the weighted total.
pub fn total_loss(
    pred: &PredictionMaps,
    target: &crate::encoder::TargetMaps,
    cw: &ClassWeights,
    lw: &LossWeights,
) -> Result<LossBreakdown> {
    if !pred.np_prob.same_shape(&target.np) {
        return Err(Error::shape(format!(
            "pred {:?} vs target {:?}",
            pred.np_prob.shape(),
            target.np.shape()
        )));
    }
    if pred.tp_prob.len() != NUM_CLASSES || target.tp.len() != NUM_CLASSES {
        return Err(Error::shape("type stacks must have 7 channels".to_string()));
    }

    let (np_pred, np_target) = np_stacks(pred, target);
    let np_ce = weighted_ce(&np_pred, &np_target, &[1.0, 1.0])?;
    let np_dice = dice_loss(&pred.np_prob, &target.np);

    let mse_hv = dist_mse(&pred.hv, &target.hv);
    let mse_dg = dist_mse(&pred.dg, &target.dg);
    let gmse_hv = dist_grad_mse(&pred.hv, &target.hv, &target.np);
    let gmse_dg = dist_grad_mse(&pred.dg, &target.dg, &target.np);

    let tp_wce = weighted_ce(&pred.tp_prob, &target.tp, &cw.0)?;
    let tp_dice = (1..NUM_CLASSES)
        .map(|ch| dice_loss(&pred.tp_prob[ch], &target.tp[ch]))
        .sum::<f64>()
        / NUM_FG_CLASSES as f64;

    let total = lw.np_ce * np_ce
        + lw.np_dice * np_dice
        + lw.dist_mse * (mse_hv + mse_dg)
        + lw.dist_grad * (gmse_hv + gmse_dg)
        + lw.tp_wce * tp_wce
        + lw.tp_dice * tp_dice;

    Ok(LossBreakdown {
        np_ce,
        np_dice,
        mse_hv,
        mse_dg,
        gmse_hv,
        gmse_dg,
        tp_wce,
        tp_dice,
        total,
    })
}

/// Partial derivatives of the weighted total with respect to every
/// prediction element, arranged like `PredictionMaps`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredGradients {
    pub np_prob: Grid<f64>,
    pub hv: [Grid<f64>; 2],
    pub dg: [Grid<f64>; 2],
    pub tp_prob: Vec<Grid<f64>>,
}

/// Analytic gradient of `total_loss` with respect to the predictions.
pub fn total_loss_grad(
    pred: &PredictionMaps,
    target: &crate::encoder::TargetMaps,
    cw: &ClassWeights,
    lw: &LossWeights,
) -> Result<PredGradients> {
    if !pred.np_prob.same_shape(&target.np) {
        return Err(Error::shape(format!(
            "pred {:?} vs target {:?}",
            pred.np_prob.shape(),
            target.np.shape()
        )));
    }
    if pred.tp_prob.len() != NUM_CLASSES || target.tp.len() != NUM_CLASSES {
        return Err(Error::shape("type stacks must have 7 channels".to_string()));
    }

    let (h, w) = pred.np_prob.shape();
    let pixels = (h * w) as f64;

    // NP branch: cross-entropy through the 2-channel stack plus Dice.
    let mut np_grad = Grid::filled(h, w, 0.0f64);
    {
        let dice = DiceGrad::new(&pred.np_prob, &target.np);
        for r in 0..h {
            for c in 0..w {
                let t_is_fg = target.np.get(r, c) > 0.5;
                let p_true = if t_is_fg {
                    pred.np_prob.get(r, c)
                } else {
                    1.0 - pred.np_prob.get(r, c)
                };
                // d(-log clamp(p_true))/d np_prob; the chain through the
                // stack contributes -1 for the background channel.
                let mut g = 0.0;
                if p_true > PROB_CLAMP && p_true <= 1.0 {
                    let sign = if t_is_fg { 1.0 } else { -1.0 };
                    g += lw.np_ce * (-1.0 / p_true) * sign / pixels;
                }
                g += lw.np_dice * dice.at(pred.np_prob.get(r, c), target.np.get(r, c));
                np_grad.set(r, c, g);
            }
        }
    }

    // Distance branches: MSE plus the Sobel-gradient term via the adjoint.
    let fg_count = target.np.iter().filter(|&&m| m > 0.5).count();
    let grad_group = |pred_g: &[Grid<f64>; 2], target_g: &[Grid<f64>; 2]| -> [Grid<f64>; 2] {
        let n = (pred_g[0].len() + pred_g[1].len()) as f64;
        let mut out = [Grid::filled(h, w, 0.0f64), Grid::filled(h, w, 0.0f64)];
        for ch in 0..2 {
            for r in 0..h {
                for c in 0..w {
                    let d = pred_g[ch].get(r, c) - target_g[ch].get(r, c);
                    out[ch].set(r, c, lw.dist_mse * 2.0 * d / n);
                }
            }
        }
        if fg_count > 0 {
            let scale = lw.dist_grad / fg_count as f64;
            let masked_residual = |p: &Grid<f64>, t: &Grid<f64>| -> Grid<f64> {
                Grid::from_fn(h, w, |r, c| {
                    if target.np.get(r, c) > 0.5 {
                        p.get(r, c) - t.get(r, c)
                    } else {
                        0.0
                    }
                })
            };
            let rx = masked_residual(&sobel_x(&pred_g[0]), &sobel_x(&target_g[0]));
            let ry = masked_residual(&sobel_y(&pred_g[1]), &sobel_y(&target_g[1]));
            let bx = sobel_x_adjoint(&rx);
            let by = sobel_y_adjoint(&ry);
            for r in 0..h {
                for c in 0..w {
                    out[0][(r, c)] += scale * bx.get(r, c);
                    out[1][(r, c)] += scale * by.get(r, c);
                }
            }
        }
        out
    };
    let hv_grad = grad_group(&pred.hv, &target.hv);
    let dg_grad = grad_group(&pred.dg, &target.dg);

    // Type branch: weighted CE on the true channel, Dice on each foreground
    // channel.
    let mut tp_grad: Vec<Grid<f64>> = (0..NUM_CLASSES).map(|_| Grid::filled(h, w, 0.0)).collect();
    for r in 0..h {
        for c in 0..w {
            let t = true_class(&target.tp, r, c);
            let p = pred.tp_prob[t].get(r, c);
            if p > PROB_CLAMP && p <= 1.0 {
                tp_grad[t][(r, c)] += lw.tp_wce * cw.0[t] * (-1.0 / p) / pixels;
            }
        }
    }
    for (ch, grad) in tp_grad.iter_mut().enumerate().skip(1) {
        let dice = DiceGrad::new(&pred.tp_prob[ch], &target.tp[ch]);
        for r in 0..h {
            for c in 0..w {
                grad[(r, c)] += lw.tp_dice / NUM_FG_CLASSES as f64
                    * dice.at(pred.tp_prob[ch].get(r, c), target.tp[ch].get(r, c));
            }
        }
    }

    Ok(PredGradients {
        np_prob: np_grad,
        hv: hv_grad,
        dg: dg_grad,
        tp_prob: tp_grad,
    })
}

/// Shared sums for the derivative of one Dice term:
/// d/dp_i [1 − N/D] = −(2 t_i D − N) / D².
struct DiceGrad {
    numer: f64,
    denom: f64,
}

impl DiceGrad {
    fn new(pred: &Grid<f64>, target: &Grid<f64>) -> Self {
        let mut inter = 0.0;
        let mut p_sum = 0.0;
        let mut t_sum = 0.0;
        for (&p, &t) in pred.iter().zip(target.iter()) {
            inter += p * t;
            p_sum += p;
            t_sum += t;
        }
        Self {
            numer: 2.0 * inter + DICE_EPS,
            denom: p_sum + t_sum + DICE_EPS,
        }
    }

    #[inline]
    fn at(&self, _p: f64, t: f64) -> f64 {
        -(2.0 * t * self.denom - self.numer) / (self.denom * self.denom)
    }
}
