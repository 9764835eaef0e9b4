//! Central finite-difference verification of the box-loss gradients.
//!
//! The checker only calls the loss for its value, so it stays independent of
//! the analytic derivative it audits.

use crate::boxgeom::{eiou_loss, focal_eiou_loss, BBox, LossConfig, LossOutput};
use crate::rng::SplitMix64;

pub const FD_STEP: f64 = 1e-6;
/// Pairs with a predicted coordinate this close to a ground-truth coordinate
/// on the same axis straddle a min/max kink and are skipped.
pub const TIE_MARGIN: f64 = 1e-4;
/// Relative errors are measured against `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Eiou,
    FocalEiou,
}

impl LossKind {
    pub fn eval(self, pred: &BBox, gt: &BBox, cfg: &LossConfig) -> LossOutput {
        match self {
            LossKind::Eiou => eiou_loss(pred, gt, cfg),
            LossKind::FocalEiou => focal_eiou_loss(pred, gt, cfg),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheckReport {
    pub pairs_checked: usize,
    pub pairs_skipped: usize,
    pub max_rel_error: f64,
}

/// True if any predicted coordinate lies within `margin` of a ground-truth
/// coordinate on the same axis.
pub fn near_tie(pred: &BBox, gt: &BBox, margin: f64) -> bool {
    let p = pred.corners();
    let g = gt.corners();
    let xs = [(p[0], g[0]), (p[0], g[2]), (p[2], g[0]), (p[2], g[2])];
    let ys = [(p[1], g[1]), (p[1], g[3]), (p[3], g[1]), (p[3], g[3])];
    xs.iter().chain(ys.iter()).any(|(a, b)| (a - b).abs() < margin)
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central difference of the loss value along each predicted corner.
pub fn numeric_gradient(kind: LossKind, pred: &BBox, gt: &BBox, cfg: &LossConfig) -> [f64; 4] {
    let base = pred.corners();
    let mut grad = [0.0; 4];
    for k in 0..4 {
        let mut hi = base;
        let mut lo = base;
        hi[k] += FD_STEP;
        lo[k] -= FD_STEP;
        let f_hi = kind.eval(&BBox::from_corners(hi).expect("perturbed box"), gt, cfg).value;
        let f_lo = kind.eval(&BBox::from_corners(lo).expect("perturbed box"), gt, cfg).value;
        grad[k] = (f_hi - f_lo) / (2.0 * FD_STEP);
    }
    grad
}

/// Draws a random valid pair. Half of the pairs are jittered copies so that
/// overlapping configurations are well represented.
pub fn random_pair(rng: &mut SplitMix64) -> (BBox, BBox) {
    let gt = random_box(rng);
    let pred = if rng.next_bool() {
        let (cx, cy) = gt.center();
        BBox::from_center(
            cx + rng.uniform(-0.5, 0.5) * gt.width(),
            cy + rng.uniform(-0.5, 0.5) * gt.height(),
            gt.width() * rng.uniform(0.5, 1.5),
            gt.height() * rng.uniform(0.5, 1.5),
        )
        .expect("jittered box")
    } else {
        random_box(rng)
    };
    (pred, gt)
}

fn random_box(rng: &mut SplitMix64) -> BBox {
    BBox::from_center(
        rng.uniform(0.0, 10.0),
        rng.uniform(0.0, 10.0),
        rng.uniform(0.5, 5.0),
        rng.uniform(0.5, 5.0),
    )
    .expect("random box")
}

/// Checks `pairs` seeded random pairs for every loss kind and gamma.
/// Pairs near a tie are drawn again and counted in `pairs_skipped`.
pub fn check_gradients(pairs: usize, seed: u64, gammas: &[f64]) -> GradCheckReport {
    let mut rng = SplitMix64::new(seed);
    let mut report = GradCheckReport::default();
    while report.pairs_checked < pairs {
        let (pred, gt) = random_pair(&mut rng);
        if near_tie(&pred, &gt, TIE_MARGIN) {
            report.pairs_skipped += 1;
            continue;
        }
        report.pairs_checked += 1;
        for &gamma in gammas {
            let cfg = LossConfig::with_gamma(gamma).expect("gamma");
            for kind in [LossKind::Eiou, LossKind::FocalEiou] {
                let analytic = kind.eval(&pred, &gt, &cfg).grad;
                let numeric = numeric_gradient(kind, &pred, &gt, &cfg);
                for k in 0..4 {
                    let err = relative_error(analytic[k], numeric[k]);
                    report.max_rel_error = report.max_rel_error.max(err);
                }
            }
        }
    }
    report
}
