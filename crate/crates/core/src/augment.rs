//! Label-aware augmentation: rotation, brightness, salt-and-pepper noise and
//! gray occluders, plus a seeded pipeline over whole datasets.

use std::path::Path;

use crate::boxgeom::BBox;
use crate::dataset::{self, Label, NamedSample, Raster};
use crate::error::{domain, Result};
use crate::rng::{derive_seed, SplitMix64};

pub use crate::dataset::Sample;

/// Gray level painted by occluders.
pub const OCCLUDER_VALUE: u8 = 128;
/// Placement attempts per occluder before it is skipped.
pub const OCCLUDER_TRIES: usize = 100;
/// Labels smaller than this after clipping are dropped.
pub const MIN_LABEL_AREA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionSpec {
    pub min_count: usize,
    pub max_count: usize,
    /// Patch area as a fraction of the image area.
    pub min_area_frac: f64,
    pub max_area_frac: f64,
    /// Largest fraction of any ground-truth box one patch may cover.
    pub max_overlap: f64,
}

impl Default for OcclusionSpec {
    fn default() -> Self {
        Self {
            min_count: 1,
            max_count: 3,
            min_area_frac: 0.01,
            max_area_frac: 0.05,
            max_overlap: 0.5,
        }
    }
}

impl OcclusionSpec {
    pub fn fixed_count(count: usize) -> Self {
        Self {
            min_count: count,
            max_count: count,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.min_count > self.max_count {
            return Err(domain("occluder min count exceeds max count"));
        }
        if !unit(self.min_area_frac) || !unit(self.max_area_frac) || self.min_area_frac > self.max_area_frac {
            return Err(domain("occluder area fractions must satisfy 0 <= min <= max <= 1"));
        }
        if !unit(self.max_overlap) {
            return Err(domain("occluder max overlap must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    /// Degrees, clockwise.
    pub rotations: Vec<f64>,
    pub brightness_factors: Vec<f64>,
    /// Zero disables the noise transform.
    pub sp_density: f64,
    /// `None` disables occlusion.
    pub occlusion: Option<OcclusionSpec>,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            rotations: vec![90.0, 180.0, 270.0],
            brightness_factors: vec![0.6, 1.4],
            sp_density: 0.02,
            occlusion: Some(OcclusionSpec::default()),
            seed: 0,
        }
    }
}

impl AugmentSpec {
    /// A spec with every transform disabled.
    pub fn none(seed: u64) -> Self {
        Self {
            rotations: Vec::new(),
            brightness_factors: Vec::new(),
            sp_density: 0.0,
            occlusion: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotations.iter().any(|a| !a.is_finite()) {
            return Err(domain("rotation angles must be finite"));
        }
        if self.brightness_factors.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(domain("brightness factors must be positive"));
        }
        if !(0.0..=1.0).contains(&self.sp_density) {
            return Err(domain("salt-and-pepper density must lie in [0, 1]"));
        }
        if let Some(o) = &self.occlusion {
            o.validate()?;
        }
        Ok(())
    }

    /// The transform instances applied to every sample, in emission order.
    pub fn transforms(&self) -> Vec<Transform> {
        let mut out: Vec<Transform> = self.rotations.iter().map(|&a| Transform::Rotate(a)).collect();
        out.extend(self.brightness_factors.iter().map(|&f| Transform::Brightness(f)));
        if self.sp_density > 0.0 {
            out.push(Transform::SaltPepper(self.sp_density));
        }
        if let Some(o) = &self.occlusion {
            out.push(Transform::Occlude(o.clone()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Rotate(f64),
    Brightness(f64),
    SaltPepper(f64),
    Occlude(OcclusionSpec),
}

impl Transform {
    /// Suffix appended to the sample id of the emitted variant.
    pub fn tag(&self) -> String {
        match self {
            Transform::Rotate(a) => format!("rot{a}"),
            Transform::Brightness(f) => format!("bri{f}"),
            Transform::SaltPepper(d) => format!("sp{d}"),
            Transform::Occlude(_) => "occ".to_string(),
        }
    }

    pub fn apply(&self, s: &Sample, seed: u64) -> Result<Sample> {
        Ok(match self {
            Transform::Rotate(a) => rotate_sample(s, *a),
            Transform::Brightness(f) => Sample {
                image: adjust_brightness(&s.image, *f)?,
                labels: s.labels.clone(),
            },
            Transform::SaltPepper(d) => Sample {
                image: salt_pepper(&s.image, *d, seed)?,
                labels: s.labels.clone(),
            },
            Transform::Occlude(o) => occlude_sample(s, o, seed)?,
        })
    }
}

fn rotate_quarter_cw(s: &Sample) -> Sample {
    let (w, h) = (s.image.width(), s.image.height());
    let mut out = Raster::filled(h, w, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(h - 1 - y, x, s.image.pixel(x, y));
        }
    }
    let hf = h as f64;
    let labels = s
        .labels
        .iter()
        .map(|l| {
            let b = &l.bbox;
            Label {
                class_id: l.class_id,
                bbox: BBox::new(hf - b.y2(), b.x1(), hf - b.y1(), b.x2()).expect("rotated box"),
            }
        })
        .collect();
    Sample { image: out, labels }
}

/// Rotates clockwise by `angle_deg` about the image center.
///
/// Multiples of 90 degrees are exact pixel remaps. Other angles expand the
/// canvas to the rotated bounds, resample with nearest neighbour (uncovered
/// pixels are black), and replace each box by the hull of its rotated
/// corners, clipped to the canvas; boxes left under 1 px² are dropped.
pub fn rotate_sample(s: &Sample, angle_deg: f64) -> Sample {
    let a = angle_deg.rem_euclid(360.0);
    if a == 0.0 {
        return s.clone();
    }
    if a % 90.0 == 0.0 {
        let mut out = rotate_quarter_cw(s);
        for _ in 1..(a / 90.0) as usize {
            out = rotate_quarter_cw(&out);
        }
        return out;
    }

    let theta = a.to_radians();
    let (sin, cos) = theta.sin_cos();
    let (w, h) = (s.image.width() as f64, s.image.height() as f64);
    let nw = ((w * cos.abs() + h * sin.abs()).round() as usize).max(1);
    let nh = ((w * sin.abs() + h * cos.abs()).round() as usize).max(1);
    let (ncx, ncy) = (nw as f64 / 2.0, nh as f64 / 2.0);
    let (cx, cy) = (w / 2.0, h / 2.0);

    let mut out = Raster::filled(nw, nh, [0, 0, 0]);
    for v in 0..nh {
        for u in 0..nw {
            let dx = u as f64 + 0.5 - ncx;
            let dy = v as f64 + 0.5 - ncy;
            let sx = (dx * cos + dy * sin + cx).floor();
            let sy = (-dx * sin + dy * cos + cy).floor();
            if sx >= 0.0 && sy >= 0.0 && sx < w && sy < h {
                out.set_pixel(u, v, s.image.pixel(sx as usize, sy as usize));
            }
        }
    }

    let forward = |x: f64, y: f64| {
        let (dx, dy) = (x - cx, y - cy);
        (dx * cos - dy * sin + ncx, dx * sin + dy * cos + ncy)
    };
    let labels = s
        .labels
        .iter()
        .filter_map(|l| {
            let b = &l.bbox;
            let pts = [
                forward(b.x1(), b.y1()),
                forward(b.x2(), b.y1()),
                forward(b.x1(), b.y2()),
                forward(b.x2(), b.y2()),
            ];
            let x1 = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).max(0.0);
            let y1 = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min).max(0.0);
            let x2 = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).min(nw as f64);
            let y2 = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max).min(nh as f64);
            let bbox = BBox::new(x1, y1, x2, y2).ok()?;
            (bbox.area() >= MIN_LABEL_AREA).then_some(Label {
                class_id: l.class_id,
                bbox,
            })
        })
        .collect();
    Sample { image: out, labels }
}

/// Scales every channel value, rounding and saturating to `[0, 255]`.
pub fn adjust_brightness(img: &Raster, factor: f64) -> Result<Raster> {
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(domain(format!("brightness factor {factor} must be >= 0")));
    }
    let mut out = img.clone();
    for p in out.pixels_mut() {
        *p = (*p as f64 * factor).round().clamp(0.0, 255.0) as u8;
    }
    Ok(out)
}

/// Forces each pixel, with probability `density`, to all-black or all-white.
///
/// Pixels are visited in row-major order; each draws one uniform to decide
/// selection and, if selected, one more for the colour.
pub fn salt_pepper(img: &Raster, density: f64, seed: u64) -> Result<Raster> {
    if !(0.0..=1.0).contains(&density) {
        return Err(domain(format!("density {density} outside [0, 1]")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut out = img.clone();
    for px in out.pixels_mut().chunks_exact_mut(3) {
        if rng.next_f64() < density {
            let v = if rng.next_bool() { 255 } else { 0 };
            px.fill(v);
        }
    }
    Ok(out)
}

/// Integer pixel rectangle `[x, x + w) x [y, y + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl PixelRect {
    /// Fraction of `b`'s area lying under this rectangle.
    pub fn coverage_of(&self, b: &BBox) -> f64 {
        let iw = ((self.x + self.w) as f64).min(b.x2()) - (self.x as f64).max(b.x1());
        let ih = ((self.y + self.h) as f64).min(b.y2()) - (self.y as f64).max(b.y1());
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih / b.area()
        }
    }
}

/// Chooses occluder rectangles for an image of the given size.
///
/// Each candidate is resampled when it would cover more than `max_overlap`
/// of any label; after [`OCCLUDER_TRIES`] rejections it is skipped.
pub fn plan_occluders(
    width: usize,
    height: usize,
    labels: &[Label],
    spec: &OcclusionSpec,
    seed: u64,
) -> Result<Vec<PixelRect>> {
    spec.validate()?;
    let mut rng = SplitMix64::new(seed);
    let span = (spec.max_count - spec.min_count) as u64 + 1;
    let count = spec.min_count + rng.below(span) as usize;
    let image_area = (width * height) as f64;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..OCCLUDER_TRIES {
            let area = image_area * rng.uniform(spec.min_area_frac, spec.max_area_frac);
            let aspect = rng.uniform(0.5f64.ln(), 2f64.ln()).exp();
            let w = ((area * aspect).sqrt().round() as usize).clamp(1, width);
            let h = ((area / w as f64).round() as usize).clamp(1, height);
            let x = rng.below((width - w + 1) as u64) as usize;
            let y = rng.below((height - h + 1) as u64) as usize;
            let rect = PixelRect { x, y, w, h };
            if labels.iter().all(|l| rect.coverage_of(&l.bbox) <= spec.max_overlap) {
                out.push(rect);
                break;
            }
        }
    }
    Ok(out)
}

pub fn paint_rects(img: &mut Raster, rects: &[PixelRect], value: u8) {
    for r in rects {
        for y in r.y..r.y + r.h {
            for x in r.x..r.x + r.w {
                img.set_pixel(x, y, [value; 3]);
            }
        }
    }
}

/// Paints seeded gray occluders; labels are unchanged.
pub fn occlude_sample(s: &Sample, spec: &OcclusionSpec, seed: u64) -> Result<Sample> {
    let rects = plan_occluders(s.image.width(), s.image.height(), &s.labels, spec, seed)?;
    let mut out = s.clone();
    paint_rects(&mut out.image, &rects, OCCLUDER_VALUE);
    Ok(out)
}

/// Seed for transform `transform_index` of sample `sample_index`.
pub fn sample_seed(seed: u64, sample_index: usize, transform_index: usize) -> u64 {
    derive_seed(seed, &[sample_index as u64, transform_index as u64])
}

fn augment_one(index: usize, input: &NamedSample, transforms: &[Transform], seed: u64) -> Result<Vec<NamedSample>> {
    let mut out = Vec::with_capacity(transforms.len() + 1);
    out.push(input.clone());
    for (t_idx, t) in transforms.iter().enumerate() {
        out.push(NamedSample {
            id: format!("{}_{}", input.id, t.tag()),
            sample: t.apply(&input.sample, sample_seed(seed, index, t_idx))?,
        });
    }
    Ok(out)
}

/// Emits every input followed by one variant per transform instance.
///
/// Each variant is seeded from `(spec.seed, sample index, transform index)`,
/// so output does not depend on scheduling.
pub fn run_pipeline(samples: &[NamedSample], spec: &AugmentSpec) -> Result<Vec<NamedSample>> {
    spec.validate()?;
    let transforms = spec.transforms();
    #[cfg(feature = "parallel")]
    let groups: Vec<Result<Vec<NamedSample>>> = {
        use rayon::prelude::*;
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| augment_one(i, s, &transforms, spec.seed))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let groups: Vec<Result<Vec<NamedSample>>> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| augment_one(i, s, &transforms, spec.seed))
        .collect();
    let mut out = Vec::with_capacity(samples.len() * (transforms.len() + 1));
    for g in groups {
        out.extend(g?);
    }
    Ok(out)
}

/// Loads `ids` (all samples when `None`) from `in_dir`, runs the pipeline,
/// and writes the result plus `classes.txt` to `out_dir`. Returns the number
/// of samples written.
pub fn augment_dataset(in_dir: &Path, out_dir: &Path, spec: &AugmentSpec, ids: Option<&[String]>) -> Result<usize> {
    let classes = dataset::load_class_names(in_dir)?;
    let ids: Vec<String> = match ids {
        Some(ids) => ids.to_vec(),
        None => dataset::list_sample_ids(in_dir)?,
    };
    let samples = ids
        .iter()
        .map(|id| {
            Ok(NamedSample {
                id: id.clone(),
                sample: dataset::load_sample(in_dir, id, classes.len())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = run_pipeline(&samples, spec)?;
    dataset::save_class_names(out_dir, &classes)?;
    for s in &out {
        dataset::save_sample(out_dir, &s.id, &s.sample)?;
    }
    Ok(out.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient_image(w: usize, h: usize) -> Raster {
        let mut r = Raster::filled(w, h, [0, 0, 0]);
        for y in 0..h {
            for x in 0..w {
                r.set_pixel(x, y, [(x * 7 % 256) as u8, (y * 13 % 256) as u8, ((x + y) % 256) as u8]);
            }
        }
        r
    }

    fn label(class_id: usize, x1: f64, y1: f64, x2: f64, y2: f64) -> Label {
        Label {
            class_id,
            bbox: BBox::new(x1, y1, x2, y2).unwrap(),
        }
    }

    fn sample() -> Sample {
        Sample {
            image: gradient_image(100, 50),
            labels: vec![label(0, 10.0, 5.0, 30.0, 25.0), label(3, 60.5, 0.0, 100.0, 12.25)],
        }
    }

    #[test]
    fn zero_rotation_is_identity() {
        let s = sample();
        assert_eq!(rotate_sample(&s, 0.0), s);
        assert_eq!(rotate_sample(&s, 360.0), s);
    }

    #[test]
    fn quarter_turn_corner_mapping() {
        let r = rotate_sample(&sample(), 90.0);
        assert_eq!((r.image.width(), r.image.height()), (50, 100));
        assert_eq!(r.labels[0].bbox.corners(), [25.0, 10.0, 45.0, 30.0]);
        // pixel (x, y) -> (H - 1 - y, x)
        let s = sample();
        assert_eq!(r.image.pixel(50 - 1 - 7, 3), s.image.pixel(3, 7));
    }

    #[test]
    fn four_quarter_turns_round_trip() {
        let s = sample();
        let mut r = s.clone();
        for _ in 0..4 {
            r = rotate_sample(&r, 90.0);
        }
        assert_eq!(r, s);
        assert_eq!(rotate_sample(&rotate_sample(&s, 270.0), 90.0), s);
        assert_eq!(rotate_sample(&s, -90.0), rotate_sample(&s, 270.0));
    }

    #[test]
    fn arbitrary_rotation_keeps_labels_valid() {
        let s = sample();
        for angle in [15.0, 33.3, 45.0, 120.0, 200.0, 359.0] {
            let r = rotate_sample(&s, angle);
            let (w, h) = (r.image.width() as f64, r.image.height() as f64);
            for l in &r.labels {
                let b = l.bbox;
                assert!(b.x1() >= 0.0 && b.y1() >= 0.0 && b.x2() <= w && b.y2() <= h);
                assert!(b.area() >= MIN_LABEL_AREA);
            }
            assert_eq!(r.labels.len(), 2, "angle {angle}");
        }
        // 45 degrees grows the canvas to the rotated bounds
        let r = rotate_sample(&s, 45.0);
        assert_eq!(r.image.width(), (150.0 / 2f64.sqrt()).round() as usize);
    }

    #[test]
    fn brightness_examples() {
        let img = Raster::new(2, 1, vec![100, 200, 0, 1, 2, 255]).unwrap();
        assert_eq!(adjust_brightness(&img, 1.0).unwrap(), img);
        assert!(adjust_brightness(&img, 0.0).unwrap().pixels().iter().all(|&v| v == 0));
        let b = adjust_brightness(&img, 1.5).unwrap();
        assert_eq!(&b.pixels()[..2], &[150, 255]);
        assert!(adjust_brightness(&img, -1.0).is_err());
    }

    #[test]
    fn salt_pepper_extremes() {
        let img = gradient_image(32, 16);
        assert_eq!(salt_pepper(&img, 0.0, 3).unwrap(), img);
        let all = salt_pepper(&img, 1.0, 3).unwrap();
        for px in all.pixels().chunks(3) {
            assert!(px == [0, 0, 0] || px == [255, 255, 255]);
        }
        assert_eq!(salt_pepper(&img, 0.3, 9).unwrap(), salt_pepper(&img, 0.3, 9).unwrap());
        assert_ne!(salt_pepper(&img, 0.3, 9).unwrap(), salt_pepper(&img, 0.3, 10).unwrap());
    }

    #[test]
    fn zero_occluders_is_identity() {
        let s = sample();
        assert_eq!(occlude_sample(&s, &OcclusionSpec::fixed_count(0), 1).unwrap(), s);
    }

    #[test]
    fn occluders_off_boxes_paint_gray() {
        let s = Sample {
            image: gradient_image(64, 64),
            labels: vec![label(1, 0.0, 0.0, 4.0, 4.0)],
        };
        let spec = OcclusionSpec {
            max_overlap: 0.0,
            ..OcclusionSpec::fixed_count(2)
        };
        let rects = plan_occluders(64, 64, &s.labels, &spec, 5).unwrap();
        let out = occlude_sample(&s, &spec, 5).unwrap();
        assert_eq!(out.labels, s.labels);
        assert!(!rects.is_empty());
        for r in &rects {
            assert_eq!(r.coverage_of(&s.labels[0].bbox), 0.0);
            for y in r.y..r.y + r.h {
                for x in r.x..r.x + r.w {
                    assert_eq!(out.image.pixel(x, y), [OCCLUDER_VALUE; 3]);
                }
            }
        }
    }

    #[test]
    fn pipeline_counts_and_names() {
        let inputs: Vec<NamedSample> = (0..10)
            .map(|i| NamedSample {
                id: format!("img{i}"),
                sample: sample(),
            })
            .collect();
        assert_eq!(run_pipeline(&inputs, &AugmentSpec::none(1)).unwrap(), inputs);

        let spec = AugmentSpec {
            rotations: vec![90.0],
            brightness_factors: vec![1.4],
            sp_density: 0.05,
            occlusion: None,
            seed: 3,
        };
        let out = run_pipeline(&inputs, &spec).unwrap();
        assert_eq!(out.len(), 40);
        assert_eq!(out[0].id, "img0");
        assert_eq!(out[1].id, "img0_rot90");
        assert_eq!(out[2].id, "img0_bri1.4");
        assert_eq!(out[3].id, "img0_sp0.05");
        assert_eq!(out, run_pipeline(&inputs, &spec).unwrap());
    }

    #[test]
    fn default_spec_matches_documented_defaults() {
        let spec = AugmentSpec::default();
        assert_eq!(spec.transforms().len(), 7);
        assert!(spec.validate().is_ok());
        let bad = AugmentSpec {
            sp_density: 1.5,
            ..AugmentSpec::default()
        };
        assert!(bad.validate().is_err());
    }
}
