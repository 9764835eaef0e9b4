//! Dataset I/O: YOLO label text, binary P6 PPM rasters, class lists, the
//! on-disk layout, and seeded train/val/test splits.
//!
//! Layout of a dataset directory:
//!
//! ```text
//! classes.txt        one class name per line, in id order (optional)
//! images/<id>.ppm    binary P6, maxval 255
//! labels/<id>.txt    "cls cx cy w h" per line, normalized
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use crate::boxgeom::BBox;
use crate::error::{domain, Error, Result};
use crate::eval::DEFAULT_CLASSES;
use crate::rng::{shuffle, SplitMix64};

/// Tolerance for normalized boxes poking out of the unit square.
pub const UNIT_TOLERANCE: f64 = 1e-6;

/// 8-bit interleaved RGB image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Raster {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(domain(format!("empty raster {width}x{height}")));
        }
        if pixels.len() != width * height * 3 {
            return Err(domain(format!(
                "{width}x{height} RGB raster needs {} bytes, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        assert!(width > 0 && height > 0, "empty raster");
        Self {
            width,
            height,
            pixels: rgb.iter().copied().cycle().take(width * height * 3).collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let o = (y * self.width + x) * 3;
        [self.pixels[o], self.pixels[o + 1], self.pixels[o + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let o = (y * self.width + x) * 3;
        self.pixels[o..o + 3].copy_from_slice(&rgb);
    }
}

/// A normalized YOLO record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRecord {
    pub class_id: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl LabelRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let Self { cx, cy, w, h, .. } = *self;
        if !(0.0..=1.0).contains(&cx) || !(0.0..=1.0).contains(&cy) {
            return Err(format!("center ({cx}, {cy}) outside [0, 1]"));
        }
        if !(w > 0.0 && w <= 1.0 && h > 0.0 && h <= 1.0) {
            return Err(format!("size ({w}, {h}) outside (0, 1]"));
        }
        let t = UNIT_TOLERANCE;
        if cx - w / 2.0 < -t || cx + w / 2.0 > 1.0 + t || cy - h / 2.0 < -t || cy + h / 2.0 > 1.0 + t {
            return Err("box extends outside the image".into());
        }
        Ok(())
    }

    /// Pixel corner box, clamped to the image for sub-tolerance overhang.
    pub fn to_bbox(&self, image_w: usize, image_h: usize) -> Result<BBox> {
        let (iw, ih) = (image_w as f64, image_h as f64);
        let x1 = ((self.cx - self.w / 2.0) * iw).max(0.0);
        let y1 = ((self.cy - self.h / 2.0) * ih).max(0.0);
        let x2 = ((self.cx + self.w / 2.0) * iw).min(iw);
        let y2 = ((self.cy + self.h / 2.0) * ih).min(ih);
        BBox::new(x1, y1, x2, y2)
    }

    pub fn from_bbox(class_id: usize, b: &BBox, image_w: usize, image_h: usize) -> Self {
        let (iw, ih) = (image_w as f64, image_h as f64);
        let (cx, cy) = b.center();
        Self {
            class_id,
            cx: cx / iw,
            cy: cy / ih,
            w: b.width() / iw,
            h: b.height() / ih,
        }
    }
}

/// A class-labelled pixel box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Label {
    pub class_id: usize,
    pub bbox: BBox,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Splits a non-blank line into a class id and `N` reals.
fn parse_fields<const N: usize>(line_no: usize, line: &str, n_classes: usize) -> Result<(usize, [f64; N])> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != N + 1 {
        return Err(parse_err(
            line_no,
            format!("expected {} fields, found {}", N + 1, tokens.len()),
        ));
    }
    let class_id: usize = tokens[0]
        .parse()
        .map_err(|_| parse_err(line_no, format!("bad class id {:?}", tokens[0])))?;
    if class_id >= n_classes {
        return Err(parse_err(line_no, format!("unknown class {class_id}")));
    }
    let mut vals = [0.0; N];
    for (v, tok) in vals.iter_mut().zip(&tokens[1..]) {
        *v = tok
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| parse_err(line_no, format!("bad number {tok:?}")))?;
    }
    Ok((class_id, vals))
}

/// Parses YOLO label text into pixel boxes. Blank lines are skipped; errors
/// carry the 1-based line number.
pub fn parse_yolo_labels(text: &str, image_w: usize, image_h: usize, n_classes: usize) -> Result<Vec<Label>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let (class_id, [cx, cy, w, h]) = parse_fields::<4>(line_no, line, n_classes)?;
        let rec = LabelRecord { class_id, cx, cy, w, h };
        rec.validate().map_err(|m| parse_err(line_no, m))?;
        let bbox = rec
            .to_bbox(image_w, image_h)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        out.push(Label { class_id, bbox });
    }
    Ok(out)
}

/// A parsed prediction line `cls cx cy w h score`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionRecord {
    pub label: Label,
    pub score: f64,
}

/// Parses YOLO prediction text (label fields plus a trailing score).
pub fn parse_yolo_predictions(
    text: &str,
    image_w: usize,
    image_h: usize,
    n_classes: usize,
) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let (class_id, [cx, cy, w, h, score]) = parse_fields::<5>(line_no, line, n_classes)?;
        if !(0.0..=1.0).contains(&score) {
            return Err(parse_err(line_no, format!("score {score} outside [0, 1]")));
        }
        let rec = LabelRecord { class_id, cx, cy, w, h };
        rec.validate().map_err(|m| parse_err(line_no, m))?;
        let bbox = rec
            .to_bbox(image_w, image_h)
            .map_err(|e| parse_err(line_no, e.to_string()))?;
        out.push(PredictionRecord {
            label: Label { class_id, bbox },
            score,
        });
    }
    Ok(out)
}

/// Inverse of [`parse_yolo_labels`], six decimals per value, one line each.
pub fn serialize_yolo_labels(labels: &[Label], image_w: usize, image_h: usize) -> Result<String> {
    let (iw, ih) = (image_w as f64, image_h as f64);
    let mut out = String::new();
    for l in labels {
        let b = &l.bbox;
        if b.x1() < 0.0 || b.y1() < 0.0 || b.x2() > iw || b.y2() > ih {
            return Err(domain(format!(
                "box {:?} outside {image_w}x{image_h} image",
                b.corners()
            )));
        }
        let r = LabelRecord::from_bbox(l.class_id, b, image_w, image_h);
        out.push_str(&format!(
            "{} {:.6} {:.6} {:.6} {:.6}\n",
            r.class_id, r.cx, r.cy, r.w, r.h
        ));
    }
    Ok(out)
}

/// Decodes a binary P6 PPM with maxval 255. Comments (`#` to end of line)
/// may appear between header tokens.
pub fn load_image_p6(bytes: &[u8]) -> Result<Raster> {
    let fmt = |m: &str| Error::Format(m.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(fmt("missing P6 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while let Some(&b) = bytes.get(pos) {
                        pos += 1;
                        if b == b'\n' || b == b'\r' {
                            break;
                        }
                    }
                }
                Some(_) => break,
                None => return Err(fmt("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(fmt("expected a decimal header field"));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fmt("header field out of range"))?;
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(fmt("missing whitespace after maxval")),
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval} unsupported, need 255")));
    }
    if width == 0 || height == 0 {
        return Err(fmt("zero image dimension"));
    }
    let len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| fmt("image dimensions overflow"))?;
    let payload = bytes
        .get(pos..pos + len)
        .ok_or_else(|| Error::Format(format!("truncated payload: need {len} bytes")))?;
    Raster::new(width, height, payload.to_vec())
}

pub fn save_image_p6(r: &Raster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", r.width, r.height).into_bytes();
    out.extend_from_slice(&r.pixels);
    out
}

/// Class names from `classes.txt` text, one per non-blank line.
pub fn parse_class_names(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

pub fn default_class_names() -> Vec<String> {
    DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect()
}

/// Reads `dir/classes.txt`, falling back to the default vocabulary.
pub fn load_class_names(dir: &Path) -> Result<Vec<String>> {
    let path = dir.join("classes.txt");
    if path.is_file() {
        let names = parse_class_names(&fs::read_to_string(&path)?);
        if names.is_empty() {
            return Err(domain(format!("{} lists no classes", path.display())));
        }
        Ok(names)
    } else {
        Ok(default_class_names())
    }
}

/// Three disjoint id lists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: Vec<T>,
}

/// Seeded shuffle followed by a contiguous cut.
///
/// Train and val get `round(n * r)` items; test takes the remainder.
pub fn split_dataset<T: Clone>(ids: &[T], ratios: [f64; 3], seed: u64) -> Result<Split<T>> {
    if ratios.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(domain(format!("split ratios {ratios:?} must be positive")));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(domain(format!("split ratios sum to {total}, not 1")));
    }
    let n = ids.len();
    let mut shuffled = ids.to_vec();
    shuffle(&mut shuffled, &mut SplitMix64::new(seed));
    let n_train = ((n as f64 * ratios[0]).round() as usize).min(n);
    let n_val = ((n as f64 * ratios[1]).round() as usize).min(n - n_train);
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    Ok(Split {
        train: shuffled,
        val,
        test,
    })
}

/// One image of a dataset with its pixel-space labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Raster,
    pub labels: Vec<Label>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSample {
    pub id: String,
    pub sample: Sample,
}

fn stems_with_ext(dir: &Path, ext: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push(stem.to_string());
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Sorted ids of `dir/images/*.ppm`, or of `dir/labels/*.txt` when there is
/// no image directory.
pub fn list_sample_ids(dir: &Path) -> Result<Vec<String>> {
    let images = dir.join("images");
    if images.is_dir() {
        stems_with_ext(&images, "ppm")
    } else {
        stems_with_ext(&dir.join("labels"), "txt")
    }
}

/// Sorted stems of `*.txt` files directly inside `dir`.
pub fn list_label_files(dir: &Path) -> Result<Vec<String>> {
    stems_with_ext(dir, "txt")
}

pub fn image_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("images").join(format!("{id}.ppm"))
}

pub fn label_path(dir: &Path, id: &str) -> PathBuf {
    dir.join("labels").join(format!("{id}.txt"))
}

/// Loads one sample; a missing label file means no objects.
pub fn load_sample(dir: &Path, id: &str, n_classes: usize) -> Result<Sample> {
    let image = load_image_p6(&fs::read(image_path(dir, id))?)?;
    let lpath = label_path(dir, id);
    let labels = if lpath.is_file() {
        let text = fs::read_to_string(&lpath)?;
        parse_yolo_labels(&text, image.width(), image.height(), n_classes).map_err(|e| match e {
            Error::Parse { line, message } => Error::Parse {
                line,
                message: format!("{}: {message}", lpath.display()),
            },
            other => other,
        })?
    } else {
        Vec::new()
    };
    Ok(Sample { image, labels })
}

pub fn save_sample(dir: &Path, id: &str, sample: &Sample) -> Result<()> {
    fs::create_dir_all(dir.join("images"))?;
    fs::create_dir_all(dir.join("labels"))?;
    fs::write(image_path(dir, id), save_image_p6(&sample.image))?;
    let text = serialize_yolo_labels(&sample.labels, sample.image.width(), sample.image.height())?;
    fs::write(label_path(dir, id), text)?;
    Ok(())
}

pub fn save_class_names(dir: &Path, names: &[String]) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut text = names.join("\n");
    text.push('\n');
    fs::write(dir.join("classes.txt"), text)?;
    Ok(())
}
