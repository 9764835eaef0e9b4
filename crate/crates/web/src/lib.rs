//! WebAssembly bindings behind `www/index.html`.
//!
//! Three panels: a Focal-EIoU explorer (loss terms, gradients, a loss curve
//! and a gradient-descent trajectory), an augmentation preview on a synthetic
//! scene, and a GAM gate map. The exported functions take and return flat
//! numeric arrays so the page needs no glue beyond the generated bindings.

use wasm_bindgen::prelude::*;

use linekit::augment::{self, OcclusionSpec, Sample};
use linekit::boxgeom::{eiou_loss, eiou_terms, focal_eiou_loss, BBox, LossConfig};
use linekit::dataset::{Label, Raster};
use linekit::gam::{self, GamParams};
use linekit::rng::SplitMix64;
use linekit::tensor::Tensor4;

fn to_box(c: &[f64]) -> Result<BBox, String> {
    if c.len() != 4 {
        return Err(format!("expected 4 box coordinates, got {}", c.len()));
    }
    BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| e.to_string())
}

fn loss_cfg(gamma: f64) -> Result<LossConfig, String> {
    LossConfig::with_gamma(gamma).map_err(|e| e.to_string())
}

/// `[iou, 1 - iou, distance, aspect, eiou, focal, dfocal/dx1, dy1, dx2, dy2]`.
pub fn loss_breakdown_impl(pred: &[f64], gt: &[f64], gamma: f64) -> Result<Vec<f64>, String> {
    let (p, g, cfg) = (to_box(pred)?, to_box(gt)?, loss_cfg(gamma)?);
    let t = eiou_terms(&p, &g, &cfg);
    let e = eiou_loss(&p, &g, &cfg);
    let f = focal_eiou_loss(&p, &g, &cfg);
    let mut out = vec![t.iou, t.iou_loss, t.distance, t.aspect, e.value, f.value];
    out.extend_from_slice(&f.grad);
    Ok(out)
}

/// Slides a copy of `pred` horizontally by `steps` offsets in `[-span, span]`
/// and returns `[offset, eiou, focal]` triples.
pub fn loss_curve_impl(pred: &[f64], gt: &[f64], gamma: f64, span: f64, steps: usize) -> Result<Vec<f64>, String> {
    let (p, g, cfg) = (to_box(pred)?, to_box(gt)?, loss_cfg(gamma)?);
    let steps = steps.max(2);
    let mut out = Vec::with_capacity(steps * 3);
    for i in 0..steps {
        let dx = -span + 2.0 * span * i as f64 / (steps - 1) as f64;
        let moved = p.translate(dx, 0.0).map_err(|e| e.to_string())?;
        out.extend_from_slice(&[dx, eiou_loss(&moved, &g, &cfg).value, focal_eiou_loss(&moved, &g, &cfg).value]);
    }
    Ok(out)
}

/// Plain gradient descent on the predicted corners. Returns the box after
/// every step (including the start) as flat `x1, y1, x2, y2` quadruples; stops
/// early if a step would invert the box.
pub fn descend_impl(pred: &[f64], gt: &[f64], gamma: f64, focal: bool, lr: f64, steps: usize) -> Result<Vec<f64>, String> {
    let (mut p, g, cfg) = (to_box(pred)?, to_box(gt)?, loss_cfg(gamma)?);
    let mut out = p.corners().to_vec();
    for _ in 0..steps {
        let grad = if focal { focal_eiou_loss(&p, &g, &cfg).grad } else { eiou_loss(&p, &g, &cfg).grad };
        let c = p.corners();
        let next: [f64; 4] = std::array::from_fn(|k| c[k] - lr * grad[k]);
        match BBox::from_corners(next) {
            Ok(b) => p = b,
            Err(_) => break,
        }
        out.extend_from_slice(&p.corners());
    }
    Ok(out)
}

pub const SCENE_W: usize = 192;
pub const SCENE_H: usize = 128;

/// Synthetic inspection-style scene: sky gradient, a power line, two objects.
pub fn demo_scene() -> Sample {
    let mut img = Raster::filled(SCENE_W, SCENE_H, [0, 0, 0]);
    for y in 0..SCENE_H {
        for x in 0..SCENE_W {
            let t = y as f64 / SCENE_H as f64;
            img.set_pixel(x, y, [(120.0 + 60.0 * t) as u8, (170.0 + 40.0 * t) as u8, 235 - (x % 7) as u8]);
        }
    }
    for x in 0..SCENE_W {
        let y = 30 + (((x as f64 - 96.0) / 96.0).powi(2) * 20.0) as usize;
        for dy in 0..2 {
            img.set_pixel(x, y + dy, [40, 40, 45]);
        }
    }
    let mut paint = |x1: usize, y1: usize, x2: usize, y2: usize, rgb: [u8; 3]| {
        for y in y1..y2 {
            for x in x1..x2 {
                img.set_pixel(x, y, rgb);
            }
        }
    };
    // a kite and a nest
    paint(40, 36, 64, 60, [220, 50, 60]);
    paint(120, 40, 150, 56, [110, 80, 40]);
    let labels = vec![
        Label { class_id: 3, bbox: BBox::new(40.0, 36.0, 64.0, 60.0).expect("box") },
        Label { class_id: 2, bbox: BBox::new(120.0, 40.0, 150.0, 56.0).expect("box") },
    ];
    Sample { image: img, labels }
}

/// Applies one transform to the demo scene.
pub fn augment_preview_impl(kind: &str, param: f64, seed: u64) -> Result<Sample, String> {
    let s = demo_scene();
    let e = |e: linekit::Error| e.to_string();
    Ok(match kind {
        "none" => s,
        "rotate" => augment::rotate_sample(&s, param),
        "brightness" => Sample { image: augment::adjust_brightness(&s.image, param).map_err(e)?, labels: s.labels },
        "saltpepper" => Sample { image: augment::salt_pepper(&s.image, param, seed).map_err(e)?, labels: s.labels },
        "occlude" => {
            let spec = OcclusionSpec { max_overlap: param.clamp(0.0, 1.0), ..OcclusionSpec::fixed_count(3) };
            augment::occlude_sample(&s, &spec, seed).map_err(e)?
        }
        other => return Err(format!("unknown transform {other:?}")),
    })
}

/// RGBA bytes for a canvas `ImageData`.
pub fn to_rgba(r: &Raster) -> Vec<u8> {
    r.pixels().chunks_exact(3).flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

pub const GAM_CHANNELS: usize = 8;

/// Runs seeded GAM on a synthetic feature map with a bright blob at
/// `(bx, by)` in a `size x size` grid. Returns the channel-mean spatial gate
/// followed by the channel-mean `|F3|`, each `size * size` values.
pub fn gam_maps_impl(seed: u64, size: usize, bx: f64, by: f64) -> Result<Vec<f64>, String> {
    let size = size.clamp(4, 64);
    let p = GamParams::seeded(GAM_CHANNELS, gam::DEFAULT_REDUCTION, gam::DEFAULT_KERNEL, seed).map_err(|e| e.to_string())?;
    let mut rng = SplitMix64::new(seed ^ 0x5eed);
    let x = Tensor4::from_fn([1, GAM_CHANNELS, size, size], |_, c, h, w| {
        let d2 = (w as f64 - bx).powi(2) + (h as f64 - by).powi(2);
        let blob = (-d2 / (2.0 * (size as f64 / 8.0).powi(2))).exp();
        blob * (1.0 + 0.25 * c as f64) + 0.1 * rng.uniform(-1.0, 1.0)
    });
    let e = |e: linekit::Error| e.to_string();
    let f2 = gam::channel_attention(&x, &p).map_err(e)?;
    let gate = gam::spatial_gate(&f2, &p).map_err(e)?;
    let f3 = gate.mul(&f2).map_err(e)?;
    let mean_over_c = |t: &Tensor4, f: fn(f64) -> f64| -> Vec<f64> {
        (0..size * size)
            .map(|i| (0..GAM_CHANNELS).map(|c| f(t.get(0, c, i / size, i % size))).sum::<f64>() / GAM_CHANNELS as f64)
            .collect()
    };
    let mut out = mean_over_c(&gate, |v| v);
    out.extend(mean_over_c(&f3, f64::abs));
    Ok(out)
}

// ---- bindings ----

#[wasm_bindgen]
pub fn loss_breakdown(pred: &[f64], gt: &[f64], gamma: f64) -> Result<Vec<f64>, JsValue> {
    loss_breakdown_impl(pred, gt, gamma).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn loss_curve(pred: &[f64], gt: &[f64], gamma: f64, span: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    loss_curve_impl(pred, gt, gamma, span, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn descend(pred: &[f64], gt: &[f64], gamma: f64, focal: bool, lr: f64, steps: usize) -> Result<Vec<f64>, JsValue> {
    descend_impl(pred, gt, gamma, focal, lr, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub struct Preview {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
    boxes: Vec<f64>,
}

#[wasm_bindgen]
impl Preview {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }
    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }
    /// RGBA bytes, row-major.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }
    /// `class, x1, y1, x2, y2` per label.
    pub fn boxes(&self) -> Vec<f64> {
        self.boxes.clone()
    }
}

#[wasm_bindgen]
pub fn augment_preview(kind: &str, param: f64, seed: u32) -> Result<Preview, JsValue> {
    let s = augment_preview_impl(kind, param, seed as u64).map_err(|e| JsValue::from_str(&e))?;
    Ok(Preview {
        width: s.image.width(),
        height: s.image.height(),
        rgba: to_rgba(&s.image),
        boxes: s
            .labels
            .iter()
            .flat_map(|l| {
                let c = l.bbox.corners();
                [l.class_id as f64, c[0], c[1], c[2], c[3]]
            })
            .collect(),
    })
}

#[wasm_bindgen]
pub fn gam_maps(seed: u32, size: usize, bx: f64, by: f64) -> Result<Vec<f64>, JsValue> {
    gam_maps_impl(seed as u64, size, bx, by).map_err(|e| JsValue::from_str(&e))
}
