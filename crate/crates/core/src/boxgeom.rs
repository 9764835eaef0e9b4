//! Axis-aligned box geometry and the EIoU / Focal-EIoU regression losses.
//!
//! Boxes are stored in corner form `(x1, y1, x2, y2)` in continuous pixel
//! coordinates. Both losses return the value together with its exact
//! analytic gradient with respect to the predicted box corners, so any
//! trainer can consume them without an autodiff framework.

use crate::error::{domain, Result};

/// Axis-aligned box in corner form with strictly positive area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(domain(format!(
                "non-finite box ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        if x2 <= x1 || y2 <= y1 {
            return Err(domain(format!(
                "box ({x1}, {y1}, {x2}, {y2}) has non-positive extent"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from its center and size.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn from_corners(c: [f64; 4]) -> Result<Self> {
        Self::new(c[0], c[1], c[2], c[3])
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn x2(&self) -> f64 {
        self.x2
    }
    pub fn y2(&self) -> f64 {
        self.y2
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Area of the overlap with `other` (zero when disjoint).
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let iw = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let ih = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        iw * ih
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Result<Self> {
        Self::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }
}

/// Intersection over union. Symmetric, in `[0, 1]`, and exactly 1 for `iou(a, a)`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    inter / (a.area() + b.area() - inter)
}

/// Smallest box containing both inputs.
pub fn enclosing_box(a: &BBox, b: &BBox) -> BBox {
    BBox {
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
        x2: a.x2.max(b.x2),
        y2: a.y2.max(b.y2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Exponent on IoU in the focal weighting.
    pub gamma: f64,
    /// Added to every enclosing-box denominator.
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            gamma: 0.5,
            epsilon: 1e-9,
        }
    }
}

impl LossConfig {
    pub fn new(gamma: f64, epsilon: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(domain(format!("gamma must be >= 0, got {gamma}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(domain(format!("epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { gamma, epsilon })
    }

    pub fn with_gamma(gamma: f64) -> Result<Self> {
        Self::new(gamma, Self::default().epsilon)
    }
}

/// A loss value and its gradient with respect to the predicted `(x1, y1, x2, y2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub grad: [f64; 4],
}

/// The three additive parts of the EIoU loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EiouTerms {
    pub iou: f64,
    /// `1 - IoU`
    pub iou_loss: f64,
    /// Squared center distance over the squared enclosing diagonal.
    pub distance: f64,
    /// Width and height mismatch, each over the squared enclosing side.
    pub aspect: f64,
}

impl EiouTerms {
    pub fn total(&self) -> f64 {
        self.iou_loss + self.distance + self.aspect
    }
}

/// Evaluates the EIoU components without gradients.
pub fn eiou_terms(pred: &BBox, gt: &BBox, cfg: &LossConfig) -> EiouTerms {
    let eps = cfg.epsilon;
    let iou = iou(pred, gt);
    let c = enclosing_box(pred, gt);
    let (wc, hc) = (c.width(), c.height());
    let (pcx, pcy) = pred.center();
    let (gcx, gcy) = gt.center();
    let rho2 = (pcx - gcx).powi(2) + (pcy - gcy).powi(2);
    let distance = rho2 / (wc * wc + hc * hc + eps);
    let aspect = (pred.width() - gt.width()).powi(2) / (wc * wc + eps)
        + (pred.height() - gt.height()).powi(2) / (hc * hc + eps);
    EiouTerms {
        iou,
        iou_loss: 1.0 - iou,
        distance,
        aspect,
    }
}

/// Internal value + gradient pair for IoU and EIoU, shared by both losses.
struct Evaluated {
    iou: f64,
    d_iou: [f64; 4],
    eiou: f64,
    d_eiou: [f64; 4],
}

// Indices into the corner arrays.
const X1: usize = 0;
const Y1: usize = 1;
const X2: usize = 2;
const Y2: usize = 3;

fn evaluate(pred: &BBox, gt: &BBox, cfg: &LossConfig) -> Evaluated {
    let eps = cfg.epsilon;
    let p = pred.corners();
    let g = gt.corners();

    // Intersection. A corner of the overlap follows the prediction when the
    // prediction wins the min/max, ties included.
    let ix1_pred = p[X1] >= g[X1];
    let iy1_pred = p[Y1] >= g[Y1];
    let ix2_pred = p[X2] <= g[X2];
    let iy2_pred = p[Y2] <= g[Y2];
    let iw_raw = p[X2].min(g[X2]) - p[X1].max(g[X1]);
    let ih_raw = p[Y2].min(g[Y2]) - p[Y1].max(g[Y1]);
    let overlapping = iw_raw > 0.0 && ih_raw > 0.0;
    let (iw, ih) = if overlapping { (iw_raw, ih_raw) } else { (0.0, 0.0) };

    let mut d_iw = [0.0; 4];
    let mut d_ih = [0.0; 4];
    if overlapping {
        d_iw[X1] = if ix1_pred { -1.0 } else { 0.0 };
        d_iw[X2] = if ix2_pred { 1.0 } else { 0.0 };
        d_ih[Y1] = if iy1_pred { -1.0 } else { 0.0 };
        d_ih[Y2] = if iy2_pred { 1.0 } else { 0.0 };
    }

    let (w, h) = (pred.width(), pred.height());
    let (wg, hg) = (gt.width(), gt.height());
    let inter = iw * ih;
    let union = w * h + wg * hg - inter;
    let iou = inter / union;

    let d_area = [-h, -w, h, w];
    let mut d_iou = [0.0; 4];
    for k in 0..4 {
        let d_inter = d_iw[k] * ih + iw * d_ih[k];
        let d_union = d_area[k] - d_inter;
        d_iou[k] = (d_inter * union - inter * d_union) / (union * union);
    }

    // Enclosing box. Its corners follow the prediction on ties.
    let cx1_pred = p[X1] <= g[X1];
    let cy1_pred = p[Y1] <= g[Y1];
    let cx2_pred = p[X2] >= g[X2];
    let cy2_pred = p[Y2] >= g[Y2];
    let wc = p[X2].max(g[X2]) - p[X1].min(g[X1]);
    let hc = p[Y2].max(g[Y2]) - p[Y1].min(g[Y1]);
    let mut d_wc = [0.0; 4];
    let mut d_hc = [0.0; 4];
    d_wc[X1] = if cx1_pred { -1.0 } else { 0.0 };
    d_wc[X2] = if cx2_pred { 1.0 } else { 0.0 };
    d_hc[Y1] = if cy1_pred { -1.0 } else { 0.0 };
    d_hc[Y2] = if cy2_pred { 1.0 } else { 0.0 };

    // Center distance.
    let dx = (p[X1] + p[X2] - g[X1] - g[X2]) / 2.0;
    let dy = (p[Y1] + p[Y2] - g[Y1] - g[Y2]) / 2.0;
    let rho2 = dx * dx + dy * dy;
    let d_rho2 = [dx, dy, dx, dy];
    let diag = wc * wc + hc * hc + eps;
    let distance = rho2 / diag;

    // Width and height mismatch.
    let dw = w - wg;
    let dh = h - hg;
    let wden = wc * wc + eps;
    let hden = hc * hc + eps;
    let aspect = dw * dw / wden + dh * dh / hden;
    let d_w = [-1.0, 0.0, 1.0, 0.0];
    let d_h = [0.0, -1.0, 0.0, 1.0];

    let mut d_eiou = [0.0; 4];
    for k in 0..4 {
        let d_wden = 2.0 * wc * d_wc[k];
        let d_hden = 2.0 * hc * d_hc[k];
        let d_diag = d_wden + d_hden;
        let d_distance = d_rho2[k] / diag - rho2 * d_diag / (diag * diag);
        let d_aspect = 2.0 * dw * d_w[k] / wden - dw * dw * d_wden / (wden * wden)
            + 2.0 * dh * d_h[k] / hden
            - dh * dh * d_hden / (hden * hden);
        d_eiou[k] = -d_iou[k] + d_distance + d_aspect;
    }

    let eiou = (1.0 - iou) + distance + aspect;

    // Coincident boxes sit at the loss minimum, where zero is a valid
    // subgradient; the one-sided IoU branch would otherwise report a kink slope.
    if p == g {
        d_iou = [0.0; 4];
        d_eiou = [0.0; 4];
    }

    Evaluated {
        iou,
        d_iou,
        eiou,
        d_eiou,
    }
}

/// EIoU loss: `(1 - IoU) + rho^2 / (wc^2 + hc^2) + (w - wg)^2 / wc^2 + (h - hg)^2 / hc^2`.
///
/// `wc`, `hc` are the enclosing box sides and `rho` the distance between
/// centers. The gradient includes the dependence of the enclosing box on the
/// prediction; at a tie between a predicted and a ground-truth coordinate the
/// branch where the prediction is active is used.
pub fn eiou_loss(pred: &BBox, gt: &BBox, cfg: &LossConfig) -> LossOutput {
    let e = evaluate(pred, gt, cfg);
    LossOutput {
        value: e.eiou,
        grad: e.d_eiou,
    }
}

/// Focal-EIoU loss: `IoU^gamma * EIoU`.
///
/// With `gamma == 0` this is exactly [`eiou_loss`]. For disjoint boxes and
/// `gamma > 0` both the value and the gradient are zero.
pub fn focal_eiou_loss(pred: &BBox, gt: &BBox, cfg: &LossConfig) -> LossOutput {
    let e = evaluate(pred, gt, cfg);
    let gamma = cfg.gamma;
    if gamma == 0.0 {
        return LossOutput {
            value: e.eiou,
            grad: e.d_eiou,
        };
    }
    if e.iou == 0.0 {
        return LossOutput {
            value: 0.0,
            grad: [0.0; 4],
        };
    }
    let weight = e.iou.powf(gamma);
    let d_weight = gamma * e.iou.powf(gamma - 1.0);
    let mut grad = [0.0; 4];
    for k in 0..4 {
        grad[k] = d_weight * e.d_iou[k] * e.eiou + weight * e.d_eiou[k];
    }
    LossOutput {
        value: weight * e.eiou,
        grad,
    }
}
