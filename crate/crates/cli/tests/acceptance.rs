//! End-to-end acceptance checks, one line of output per criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use linekit::augment::{plan_occluders, rotate_sample, salt_pepper, OcclusionSpec};
use linekit::boxgeom::{eiou_loss, eiou_terms, focal_eiou_loss, iou, BBox, LossConfig};
use linekit::dataset::{
    load_image_p6, parse_yolo_labels, save_image_p6, serialize_yolo_labels, split_dataset, Label, LabelRecord, Raster,
    Sample,
};
use linekit::eval::{average_precision, evaluate, iou_thresholds, nms, Detection, EvalConfig, GroundTruth};
use linekit::gam::{self, GamParams};
use linekit::gradcheck::check_gradients;
use linekit::rng::SplitMix64;
use linekit::sppcspc::{init_params_deterministic, sppcspc_forward};
use linekit::tensor::{conv2d, maxpool2d, checksum, ConvParams, Tensor4};
use linekit::{golden, reference};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
    BBox::new(x1, y1, x2, y2).unwrap()
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let r = check_gradients(1000, 2024, &[0.0, 0.5, 1.0]);
    let secs = start.elapsed().as_secs_f64();
    ensure(r.pairs_checked == 1000, || format!("only {} pairs checked", r.pairs_checked))?;
    ensure(r.max_rel_error <= 1e-5, || format!("max relative error {:.3e}", r.max_rel_error))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "max rel error {:.2e} over {} pairs ({} near-tie redrawn), {secs:.2} s",
        r.max_rel_error, r.pairs_checked, r.pairs_skipped
    ))
}

/// Rasterized stand-ins for the box quantities, on a grid of square cells
/// aligned to the integer lattice and spanning the enclosing box with at
/// most 1000 cells per side. A cell belongs to a box when its centre does.
struct Raster2 {
    x0: f64,
    y0: f64,
    cell_x: f64,
    cell_y: f64,
    nx: usize,
    ny: usize,
}

struct Region {
    count: usize,
    sum_x: f64,
    sum_y: f64,
    cols: (usize, usize),
    rows: (usize, usize),
}

impl Raster2 {
    fn over(a: &BBox, b: &BBox) -> Self {
        let (x0, x1) = (a.x1().min(b.x1()), a.x2().max(b.x2()));
        let (y0, y1) = (a.y1().min(b.y1()), a.y2().max(b.y2()));
        let per_x = 1000 / (x1 - x0) as usize;
        let per_y = 1000 / (y1 - y0) as usize;
        Raster2 {
            x0,
            y0,
            cell_x: 1.0 / per_x as f64,
            cell_y: 1.0 / per_y as f64,
            nx: per_x * (x1 - x0) as usize,
            ny: per_y * (y1 - y0) as usize,
        }
    }

    fn region(&self, inside: impl Fn(f64, f64) -> bool) -> Region {
        let mut r = Region { count: 0, sum_x: 0.0, sum_y: 0.0, cols: (usize::MAX, 0), rows: (usize::MAX, 0) };
        for j in 0..self.ny {
            let y = self.y0 + (j as f64 + 0.5) * self.cell_y;
            for i in 0..self.nx {
                let x = self.x0 + (i as f64 + 0.5) * self.cell_x;
                if inside(x, y) {
                    r.count += 1;
                    r.sum_x += x;
                    r.sum_y += y;
                    r.cols = (r.cols.0.min(i), r.cols.1.max(i + 1));
                    r.rows = (r.rows.0.min(j), r.rows.1.max(j + 1));
                }
            }
        }
        r
    }

    fn area(&self, r: &Region) -> f64 {
        r.count as f64 * self.cell_x * self.cell_y
    }

    fn centroid(&self, r: &Region) -> (f64, f64) {
        (r.sum_x / r.count as f64, r.sum_y / r.count as f64)
    }

    fn extent(&self, r: &Region) -> (f64, f64) {
        ((r.cols.1 - r.cols.0) as f64 * self.cell_x, (r.rows.1 - r.rows.0) as f64 * self.cell_y)
    }
}

fn contains(b: &BBox, x: f64, y: f64) -> bool {
    x >= b.x1() && x < b.x2() && y >= b.y1() && y < b.y2()
}

fn geometry_oracle() -> Outcome {
    let mut rng = SplitMix64::new(64);
    let cfg = LossConfig::default();
    let mut worst: f64 = 0.0;
    let coord = |rng: &mut SplitMix64| {
        let a = rng.below(65) as f64;
        let mut b = rng.below(65) as f64;
        while b == a {
            b = rng.below(65) as f64;
        }
        (a.min(b), a.max(b))
    };
    for _ in 0..200 {
        let ((px1, px2), (py1, py2)) = (coord(&mut rng), coord(&mut rng));
        let ((gx1, gx2), (gy1, gy2)) = (coord(&mut rng), coord(&mut rng));
        let (p, g) = (bx(px1, py1, px2, py2), bx(gx1, gy1, gx2, gy2));
        let grid = Raster2::over(&p, &g);
        let rp = grid.region(|x, y| contains(&p, x, y));
        let rg = grid.region(|x, y| contains(&g, x, y));
        let ri = grid.region(|x, y| contains(&p, x, y) && contains(&g, x, y));
        let ru = grid.region(|x, y| contains(&p, x, y) || contains(&g, x, y));
        let inter = grid.area(&ri);
        let oracle_iou = inter / (grid.area(&rp) + grid.area(&rg) - inter);
        let (wc, hc) = grid.extent(&ru);
        let ((cpx, cpy), (cgx, cgy)) = (grid.centroid(&rp), grid.centroid(&rg));
        let ((wp, hp), (wg, hg)) = (grid.extent(&rp), grid.extent(&rg));
        let oracle_dist = ((cpx - cgx).powi(2) + (cpy - cgy).powi(2)) / (wc * wc + hc * hc);
        let oracle_aspect = (wp - wg).powi(2) / (wc * wc) + (hp - hg).powi(2) / (hc * hc);

        let t = eiou_terms(&p, &g, &cfg);
        let errs = [
            (iou(&p, &g) - oracle_iou).abs(),
            (t.iou - oracle_iou).abs(),
            (t.distance - oracle_dist).abs(),
            (t.aspect - oracle_aspect).abs(),
            (eiou_loss(&p, &g, &cfg).value - (1.0 - oracle_iou + oracle_dist + oracle_aspect)).abs(),
        ];
        let e = errs.iter().cloned().fold(0.0, f64::max);
        ensure(e <= 1e-3, || format!("pred {:?} gt {:?}: error {e:.3e}", p.corners(), g.corners()))?;
        worst = worst.max(e);
    }
    Ok(format!("200 integer pairs, max component error {worst:.2e}"))
}

fn hand_losses() -> Outcome {
    let cfg = LossConfig::default();
    let cases = [
        ("eiou overlap", eiou_loss(&bx(1.0, 0.0, 3.0, 2.0), &bx(0.0, 0.0, 2.0, 2.0), &cfg).value, 29.0 / 39.0),
        ("eiou disjoint", eiou_loss(&bx(0.0, 0.0, 1.0, 1.0), &bx(3.0, 0.0, 4.0, 1.0), &cfg).value, 1.0 + 9.0 / 17.0),
        (
            "focal gamma 0.5",
            focal_eiou_loss(&bx(1.0, 0.0, 3.0, 2.0), &bx(0.0, 0.0, 2.0, 2.0), &cfg).value,
            (1.0f64 / 3.0).sqrt() * 29.0 / 39.0,
        ),
    ];
    for (name, got, want) in cases {
        ensure((got - want).abs() <= 1e-9, || format!("{name}: {got} vs {want}"))?;
    }
    ensure((cases[2].1 - 0.429311).abs() < 1e-6, || format!("focal value {}", cases[2].1))?;
    Ok(format!("29/39 = {:.6}, 1+9/17 = {:.6}, focal = {:.6}", cases[0].1, cases[1].1, cases[2].1))
}

fn bits(t: &Tensor4) -> Vec<u64> {
    t.data().iter().map(|v| v.to_bits()).collect()
}

fn kernel_oracle() -> Outcome {
    let mut rng = SplitMix64::new(4);
    for case in 0..100 {
        let n = 1 + rng.below(2) as usize;
        let c_in = 1 + rng.below(4) as usize;
        let c_out = 1 + rng.below(4) as usize;
        let h = 1 + rng.below(9) as usize;
        let w = 1 + rng.below(9) as usize;
        let k = [1, 3, 5][rng.below(3) as usize];
        let stride = 1 + rng.below(2) as usize;
        let pad = rng.below(k as u64 / 2 + 1) as usize;
        let x = Tensor4::from_fn([n, c_in, h, w], |_, _, _, _| rng.uniform(-1.0, 1.0));
        let weight = Tensor4::from_fn([c_out, c_in, k, k], |_, _, _, _| rng.uniform(-1.0, 1.0));
        let bias = (0..c_out).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let p = ConvParams { weight, bias, stride, padding: pad };
        if h + 2 * pad < k || w + 2 * pad < k {
            ensure(conv2d(&x, &p).is_err(), || format!("case {case}: oversized kernel accepted"))?;
            continue;
        }
        let fast = conv2d(&x, &p).map_err(|e| format!("case {case}: {e}"))?;
        ensure(bits(&fast) == bits(&reference::conv2d(&x, &p)), || format!("conv case {case} differs"))?;
        let pool = maxpool2d(&x, k, stride, pad).map_err(|e| format!("case {case}: {e}"))?;
        ensure(bits(&pool) == bits(&reference::maxpool2d(&x, k, stride, pad)), || format!("pool case {case} differs"))?;
    }
    Ok("100 seeded shapes bit-identical for conv2d and maxpool2d".into())
}

fn gam_invariants() -> Outcome {
    let mut rng = SplitMix64::new(5);
    let x = Tensor4::from_fn([2, 8, 5, 6], |_, _, _, _| rng.uniform(-3.0, 3.0));
    let zero = GamParams::zeros(8, 4, 7).map_err(|e| e.to_string())?;
    let ca = gam::channel_attention(&x, &zero).map_err(|e| e.to_string())?;
    ensure(bits(&ca) == bits(&x.scale(0.5)), || "channel attention is not 0.5 x".into())?;
    let out = gam::gam_forward(&x, &zero).map_err(|e| e.to_string())?;
    ensure(bits(&out) == bits(&x.scale(0.25)), || "gam is not 0.25 x".into())?;
    for i in 0..50u64 {
        let r = [1, 2, 4][rng.below(3) as usize];
        let c = r * (1 + rng.below(4) as usize);
        let k = [1, 3, 5, 7][rng.below(4) as usize];
        let shape = [1 + rng.below(2) as usize, c, 1 + rng.below(9) as usize, 1 + rng.below(9) as usize];
        let p = GamParams::seeded(c, r, k, i).map_err(|e| e.to_string())?;
        let x = Tensor4::from_fn(shape, |_, _, _, _| rng.uniform(-1.0, 1.0));
        let y = gam::gam_forward(&x, &p).map_err(|e| e.to_string())?;
        ensure(y.shape() == shape, || format!("config {i}: shape {:?} from {shape:?}", y.shape()))?;
    }
    Ok("zero params give 0.5x and 0.25x exactly; 50 configs keep shape".into())
}

fn sppcspc_invariants() -> Outcome {
    let mut rng = SplitMix64::new(6);
    for i in 0..50u64 {
        let (in_c, out_c) = (1 + rng.below(6) as usize, 1 + rng.below(8) as usize);
        let (n, h, w) = (1 + rng.below(2) as usize, 1 + rng.below(9) as usize, 1 + rng.below(9) as usize);
        let p = init_params_deterministic(in_c, out_c, i).map_err(|e| e.to_string())?;
        let x = Tensor4::from_fn([n, in_c, h, w], |_, _, _, _| rng.uniform(-1.0, 1.0));
        let y = sppcspc_forward(&x, &p).map_err(|e| e.to_string())?;
        ensure(y.shape() == [n, out_c, h, w], || format!("config {i}: shape {:?}", y.shape()))?;
    }
    let (p, x) = golden::sppcspc_fixture(0).map_err(|e| e.to_string())?;
    let weights = checksum(&p.flat_parameters());
    ensure((weights - golden::SPP_WEIGHTS_SEED0).abs() <= 1e-9, || format!("weight checksum {weights}"))?;
    let y = sppcspc_forward(&x, &p).map_err(|e| e.to_string())?;
    let sum = y.checksum();
    ensure((sum - golden::SPP_OUTPUT_SEED0).abs() <= 1e-9, || format!("output checksum {sum}"))?;
    Ok(format!("50 configs shaped (n, out_c, h, w); golden checksum {sum:.12}"))
}

/// Greedy suppression written directly from its definition.
fn brute_nms(dets: &[Detection], thr: f64) -> Vec<Detection> {
    let mut idx: Vec<usize> = (0..dets.len()).collect();
    idx.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let mut keep: Vec<usize> = Vec::new();
    for &i in &idx {
        let suppressed = keep.iter().any(|&j| {
            dets[j].image_id == dets[i].image_id
                && dets[j].class_id == dets[i].class_id
                && iou(&dets[j].bbox, &dets[i].bbox) > thr
        });
        if !suppressed {
            keep.push(i);
        }
    }
    keep.into_iter().map(|i| dets[i].clone()).collect()
}

fn random_det(rng: &mut SplitMix64, images: u64, classes: u64) -> Detection {
    let (x, y) = (rng.uniform(0.0, 50.0), rng.uniform(0.0, 50.0));
    let b = bx(x, y, x + rng.uniform(1.0, 30.0), y + rng.uniform(1.0, 30.0));
    let score = rng.below(10) as f64 / 10.0;
    Detection::new(format!("im{}", rng.below(images)), rng.below(classes) as usize, score, b).unwrap()
}

/// Per-class AP at every threshold by enumerating detections in rank order and
/// scanning all ground truths for the best unmatched one.
fn exhaustive_map(dets: &[Detection], gts: &[GroundTruth], n_classes: usize) -> (Option<f64>, Option<f64>) {
    let mut rank: Vec<usize> = (0..dets.len()).collect();
    rank.sort_by(|&a, &b| dets[b].score.partial_cmp(&dets[a].score).unwrap().then(a.cmp(&b)));
    let mut per_threshold = vec![Vec::new(); 10];
    for class in 0..n_classes {
        let n_gt = gts.iter().filter(|g| g.class_id == class).count();
        if n_gt == 0 {
            continue;
        }
        for (t, thr) in iou_thresholds().iter().enumerate() {
            let mut used = vec![false; gts.len()];
            let mut flags = Vec::new();
            for &i in rank.iter().filter(|&&i| dets[i].class_id == class) {
                let mut best = (None, -1.0);
                for (j, g) in gts.iter().enumerate() {
                    if !used[j] && g.class_id == class && g.image_id == dets[i].image_id {
                        let v = iou(&dets[i].bbox, &g.bbox);
                        if v > best.1 {
                            best = (Some(j), v);
                        }
                    }
                }
                let hit = matches!(best, (Some(_), v) if v >= *thr);
                if let (Some(j), true) = (best.0, hit) {
                    used[j] = true;
                }
                flags.push(hit);
            }
            let prec: Vec<f64> = (0..flags.len())
                .map(|k| flags[..=k].iter().filter(|&&f| f).count() as f64 / (k + 1) as f64)
                .collect();
            let mut ap = 0.0;
            let mut seen = 0;
            for k in (0..flags.len()).filter(|&k| flags[k]) {
                let step = (seen + 1) as f64 / n_gt as f64 - seen as f64 / n_gt as f64;
                ap += step * prec[k..].iter().cloned().fold(0.0, f64::max);
                seen += 1;
            }
            per_threshold[t].push(ap);
        }
    }
    if per_threshold[0].is_empty() {
        return (None, None);
    }
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let maps: Vec<f64> = per_threshold.iter().map(mean).collect();
    (Some(maps[0]), Some(maps.iter().sum::<f64>() / 10.0))
}

fn evaluator_exactness() -> Outcome {
    let ap = average_precision(&[true, false, true], 2);
    ensure((ap - 0.833333).abs() <= 1e-6 && (ap - 5.0 / 6.0).abs() <= 1e-9, || format!("hand AP {ap}"))?;

    let gts = vec![GroundTruth::new("a", 0, bx(0.0, 0.0, 10.0, 10.0))];
    let dets = vec![Detection::new("a", 0, 0.9, bx(0.0, 0.0, 6.0, 10.0)).unwrap()];
    let rep = evaluate(&dets, &gts, &EvalConfig::default()).map_err(|e| e.to_string())?;
    let m = rep.map5095.ok_or("mAP undefined")?;
    ensure((m - 0.3).abs() <= 1e-9, || format!("IoU 0.60 case gives {m}"))?;

    let t = iou_thresholds();
    ensure(t.len() == 10 && t[0] == 0.5 && (t[9] - 0.95).abs() < 1e-15, || format!("thresholds {t:?}"))?;

    let mut rng = SplitMix64::new(7);
    for set in 0..1000 {
        let n = rng.below(51) as usize;
        let dets: Vec<Detection> = (0..n).map(|_| random_det(&mut rng, 2, 3)).collect();
        let thr = rng.uniform(0.1, 0.9);
        ensure(nms(&dets, thr) == brute_nms(&dets, thr), || format!("nms set {set} differs"))?;
    }

    let cfg = EvalConfig { class_names: vec!["a".into(), "b".into(), "c".into()], conf_threshold: 0.25 };
    for scene in 0..500 {
        let images = 1 + rng.below(5);
        let gts: Vec<GroundTruth> = (0..rng.below(11))
            .map(|_| {
                let d = random_det(&mut rng, images, 3);
                GroundTruth::new(d.image_id, d.class_id, d.bbox)
            })
            .collect();
        let dets: Vec<Detection> = (0..rng.below(11))
            .map(|_| {
                if !gts.is_empty() && rng.next_bool() {
                    let g = &gts[rng.below(gts.len() as u64) as usize];
                    let s = rng.uniform(-3.0, 3.0);
                    let b = bx(g.bbox.x1() + s, g.bbox.y1(), g.bbox.x2() + s, g.bbox.y2());
                    Detection::new(g.image_id.clone(), g.class_id, rng.below(10) as f64 / 10.0, b).unwrap()
                } else {
                    random_det(&mut rng, images, 3)
                }
            })
            .collect();
        let (want50, want5095) = exhaustive_map(&dets, &gts, 3);
        let rep = evaluate(&dets, &gts, &cfg).map_err(|e| e.to_string())?;
        ensure(rep.map50 == want50 && rep.map5095 == want5095, || {
            format!("scene {scene}: {:?}/{:?} vs {want50:?}/{want5095:?}", rep.map50, rep.map5095)
        })?;
    }
    Ok(format!("AP {ap:.6}, IoU-0.60 mAP50:95 {m:.6}, 10 thresholds, 1000 NMS sets and 500 eval scenes match"))
}

fn noise_raster(w: usize, h: usize, seed: u64) -> Raster {
    let mut rng = SplitMix64::new(seed);
    Raster::new(w, h, (0..w * h * 3).map(|_| rng.below(256) as u8).collect()).unwrap()
}

fn augmentation_soundness() -> Outcome {
    let mut rng = SplitMix64::new(8);
    for i in 0..20 {
        let (w, h) = (1 + rng.below(40) as usize, 1 + rng.below(40) as usize);
        let labels = (0..rng.below(5))
            .map(|_| {
                let x1 = rng.below(w as u64 * 4) as f64 / 4.0;
                let y1 = rng.below(h as u64 * 4) as f64 / 4.0;
                let x2 = x1 + (1 + rng.below(((w as f64 - x1) * 4.0) as u64)) as f64 / 4.0;
                let y2 = y1 + (1 + rng.below(((h as f64 - y1) * 4.0) as u64)) as f64 / 4.0;
                Label { class_id: rng.below(6) as usize, bbox: bx(x1, y1, x2.min(w as f64), y2.min(h as f64)) }
            })
            .collect();
        let s = Sample { image: noise_raster(w, h, i), labels };
        let mut r = s.clone();
        for _ in 0..4 {
            r = rotate_sample(&r, 90.0);
        }
        ensure(r == s, || format!("four quarter turns changed sample {i}"))?;
    }

    let s = Sample { image: Raster::filled(100, 50, [9, 9, 9]), labels: vec![Label { class_id: 0, bbox: bx(10.0, 5.0, 30.0, 25.0) }] };
    let r = rotate_sample(&s, 90.0);
    ensure(
        (r.image.width(), r.image.height()) == (50, 100) && r.labels[0].bbox.corners() == [25.0, 10.0, 45.0, 30.0],
        || format!("corner example gave {:?}", r.labels[0].bbox.corners()),
    )?;

    let img = Raster::filled(256, 256, [77, 77, 77]);
    let a = salt_pepper(&img, 0.05, 99).map_err(|e| e.to_string())?;
    let b = salt_pepper(&img, 0.05, 99).map_err(|e| e.to_string())?;
    ensure(save_image_p6(&a) == save_image_p6(&b), || "salt and pepper not deterministic".into())?;
    let n: f64 = 256.0 * 256.0;
    let flipped = a.pixels().chunks(3).filter(|p| p[0] != 77).count() as f64;
    let sigma = (0.05 * 0.95 / n).sqrt();
    let frac = flipped / n;
    ensure((frac - 0.05).abs() <= 6.0 * sigma, || format!("flipped fraction {frac}"))?;

    let spec = OcclusionSpec::default();
    let mut accepted = 0;
    for seed in 0..1000u64 {
        let mut lr = SplitMix64::new(seed ^ 0xabcdef);
        let labels: Vec<Label> = (0..1 + lr.below(4))
            .map(|_| {
                let (x, y) = (lr.below(48) as f64, lr.below(32) as f64);
                Label { class_id: 0, bbox: bx(x, y, x + 1.0 + lr.below(16) as f64, y + 1.0 + lr.below(16) as f64) }
            })
            .collect();
        let rects = plan_occluders(64, 48, &labels, &spec, seed).map_err(|e| e.to_string())?;
        for r in &rects {
            for l in &labels {
                let c = r.coverage_of(&l.bbox);
                ensure(c <= 0.5, || format!("seed {seed}: occluder covers {c}"))?;
            }
        }
        accepted += rects.len();
    }
    Ok(format!("rotations exact, flip fraction {frac:.4} (6 sigma {:.4}), {accepted} occluders all <= 50%", 6.0 * sigma))
}

fn io_round_trips() -> Outcome {
    let mut rng = SplitMix64::new(9);
    let (iw, ih) = (640, 480);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let w = rng.uniform(0.001, 1.0);
        let h = rng.uniform(0.001, 1.0);
        let rec = LabelRecord {
            class_id: rng.below(6) as usize,
            cx: rng.uniform(w / 2.0, 1.0 - w / 2.0),
            cy: rng.uniform(h / 2.0, 1.0 - h / 2.0),
            w,
            h,
        };
        let label = Label { class_id: rec.class_id, bbox: rec.to_bbox(iw, ih).map_err(|e| e.to_string())? };
        let text = serialize_yolo_labels(&[label], iw, ih).map_err(|e| e.to_string())?;
        let back = parse_yolo_labels(&text, iw, ih, 6).map_err(|e| format!("record {i}: {e}"))?;
        ensure(back.len() == 1 && back[0].class_id == rec.class_id, || format!("record {i} lost"))?;
        let r = LabelRecord::from_bbox(back[0].class_id, &back[0].bbox, iw, ih);
        let e = [r.cx - rec.cx, r.cy - rec.cy, r.w - rec.w, r.h - rec.h].iter().fold(0.0f64, |m, d| m.max(d.abs()));
        ensure(e <= 1e-6, || format!("record {i}: error {e}"))?;
        worst = worst.max(e);
    }

    for seed in 0..20 {
        let img = noise_raster(1 + seed as usize * 3, 1 + seed as usize * 2, seed);
        let bytes = save_image_p6(&img);
        let again = save_image_p6(&load_image_p6(&bytes).map_err(|e| e.to_string())?);
        ensure(bytes == again, || format!("P6 seed {seed} not byte-exact"))?;
    }

    let ids: Vec<String> = (0..10).map(|i| format!("id{i}")).collect();
    let s = split_dataset(&ids, [0.6, 0.2, 0.2], 1).map_err(|e| e.to_string())?;
    ensure((s.train.len(), s.val.len(), s.test.len()) == (6, 2, 2), || "10 ids not split 6/2/2".into())?;
    for n in 0..200usize {
        let ids: Vec<usize> = (0..n).collect();
        let s = split_dataset(&ids, [0.6, 0.2, 0.2], n as u64).map_err(|e| e.to_string())?;
        let mut all: Vec<usize> = s.train.into_iter().chain(s.val).chain(s.test).collect();
        all.sort();
        ensure(all == ids, || format!("split of {n} is not a partition"))?;
    }
    Ok(format!("1000 labels within {worst:.1e}, P6 byte-exact, split 6/2/2 and partitions"))
}

fn write_fixture(root: &Path, perfect: bool) {
    let (gt, pred) = (root.join("gt/labels"), root.join("pred/labels"));
    fs::create_dir_all(&gt).unwrap();
    fs::create_dir_all(&pred).unwrap();
    let classes = "trash\ntwig\nnest\nkite\nbird\nballoon\n";
    fs::write(gt.join("classes.txt"), classes).unwrap();
    let scenes = [
        ("img0", "0 0.300000 0.400000 0.200000 0.300000\n4 0.700000 0.700000 0.100000 0.100000\n"),
        ("img1", "2 0.500000 0.500000 0.400000 0.400000\n"),
        ("img2", "1 0.200000 0.200000 0.100000 0.200000\n5 0.800000 0.300000 0.200000 0.200000\n"),
    ];
    for (i, (id, text)) in scenes.iter().enumerate() {
        fs::write(gt.join(format!("{id}.txt")), text).unwrap();
        let mut preds = String::new();
        for (j, line) in text.lines().enumerate() {
            if perfect {
                preds.push_str(&format!("{line} 0.9{j}\n"));
            } else {
                let f: Vec<f64> = line.split(' ').skip(1).map(|v| v.parse().unwrap()).collect();
                let class = line.split(' ').next().unwrap();
                let shift = 0.01 * (i + j) as f64;
                preds.push_str(&format!("{class} {:.6} {:.6} {:.6} {:.6} 0.{}5\n", f[0] + shift, f[1], f[2], f[3], 9 - j));
                preds.push_str(&format!("{class} 0.500000 0.500000 0.100000 0.100000 0.3{j}\n"));
            }
        }
        fs::write(pred.join(format!("{id}.txt")), preds).unwrap();
    }
}

fn run_eval(root: &Path, report: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_linekit"))
        .args(["eval", "--pred"])
        .arg(root.join("pred"))
        .arg("--gt")
        .arg(root.join("gt"))
        .arg("--report")
        .arg(report)
        .output()
        .map_err(|e| e.to_string())?
        .status;
    ensure(status.success(), || format!("eval exited with {status}"))?;
    fs::read(report).map_err(|e| e.to_string())
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let noisy = dir.path().join("noisy");
    write_fixture(&noisy, false);
    let first = run_eval(&noisy, &dir.path().join("a.json"))?;
    let second = run_eval(&noisy, &dir.path().join("b.json"))?;
    ensure(first == second, || "two eval runs differ".into())?;

    let perfect = dir.path().join("perfect");
    write_fixture(&perfect, true);
    let doc: serde_json::Value = serde_json::from_slice(&run_eval(&perfect, &dir.path().join("p.json"))?)
        .map_err(|e| e.to_string())?;
    let map50 = doc["map50"].as_f64();
    ensure(map50 == Some(1.0), || format!("perfect fixture map50 {map50:?}"))?;
    Ok(format!("{} byte reports identical; perfect fixture map50 = 1.0", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient correctness", gradient_correctness),
        ("geometry oracle", geometry_oracle),
        ("hand-arithmetic losses", hand_losses),
        ("kernel oracle", kernel_oracle),
        ("GAM invariants", gam_invariants),
        ("SPPCSPC invariants", sppcspc_invariants),
        ("evaluator exactness", evaluator_exactness),
        ("augmentation soundness", augmentation_soundness),
        ("I/O round trips", io_round_trips),
        ("CLI determinism", cli_determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {}/10 passed in {:.1} s", 10 - failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
