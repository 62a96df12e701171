//! Acceptance suite. Every criterion runs under its own wall-clock budget and
//! reports one PASS/FAIL line on stdout; the test fails if any criterion does.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segkit::amg::{filter_candidates, generate_candidates, run_amg, AmgConfig, MaskRecord};
use segkit::crops::{build_crop_schedule, make_point_grid, CropSpec, GRID_SIDES};
use segkit::eval::{
    edge_metrics, edge_pipeline, eval_instance_seg, eval_point_to_mask, eval_proposals,
    match_edge_pixels, priority_matching, EdgeEvalConfig, EdgeMap, EvalDataset, EvalReport,
    MetricTable, PointEvalConfig, PointSampler, Proposal, ProposalEvalConfig,
};
use segkit::mask::{
    distance_transform, distance_transform_unbounded, fill_small_holes, remove_small_components,
    rle_decode, rle_encode, BBox, BinaryMask, Connectivity,
};
use segkit::nms::{greedy_nms, NmsKey};
use segkit::scene::{generate_scene, Region, SceneConfig, SceneSpec, Shape};
use segkit::segmenter::{NoiseConfig, NoisySegmenter, OracleSegmenter};
use segkit::sim::{run_interactive_sim, SimConfig};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_mask(r: &mut impl Rng, w: u32, h: u32) -> BinaryMask {
    let density = r.random_range(0.05..0.95);
    BinaryMask::from_fn(w, h, |_, _| r.random_bool(density))
}

fn blob_mask(r: &mut impl Rng, w: u32, h: u32) -> BinaryMask {
    let mut m = BinaryMask::empty(w, h);
    for _ in 0..r.random_range(1..8) {
        let (x0, y0) = (r.random_range(0..w), r.random_range(0..h));
        let (bw, bh) = (r.random_range(1..=w / 2), r.random_range(1..=h / 2));
        let hollow = r.random_bool(0.4);
        let blob = BinaryMask::from_fn(w, h, |x, y| {
            let inside = (x0..x0 + bw).contains(&x) && (y0..y0 + bh).contains(&y);
            let border = x == x0 || y == y0 || x + 1 == x0 + bw || y + 1 == y0 + bh;
            inside && (!hollow || border)
        });
        m = m.xor(&blob).unwrap();
    }
    m
}

// 1 ------------------------------------------------------------------------

fn structural_constants() -> Check {
    for (w, h) in [(1024, 1024), (1500, 1000), (256, 256)] {
        let crops = build_crop_schedule(w, h).map_err(|e| e.to_string())?;
        ensure!(crops.len() == 21, "{w}x{h}: {} crops", crops.len());
        let per_level: Vec<(u8, u32, usize)> = (0..3u8)
            .map(|l| {
                let at: Vec<&CropSpec> = crops.iter().filter(|c| c.zoom_level == l).collect();
                (l, at[0].grid_side, at.len())
            })
            .collect();
        ensure!(
            per_level == [(0, 32, 1), (1, 16, 4), (2, 8, 16)],
            "{w}x{h}: levels {per_level:?}"
        );
        ensure!(
            crops
                .iter()
                .all(|c| c.grid_side == GRID_SIDES[c.zoom_level as usize]),
            "grid side table"
        );
        for c in &crops {
            let n = make_point_grid(c).points.len();
            ensure!(
                n == (c.grid_side * c.grid_side) as usize,
                "{n} grid points for side {}",
                c.grid_side
            );
        }
    }

    let cfg = SceneConfig {
        width: 128,
        height: 128,
        objects: (2, 3),
        root_size: (30, 50),
        ..Default::default()
    };
    let scene = generate_scene(11, &cfg).map_err(|e| e.to_string())?;
    let edges =
        edge_pipeline(&OracleSegmenter::new(scene.clone()), 0.7).map_err(|e| e.to_string())?;
    ensure!(
        edges.prompts == 256 && edges.candidates == 768,
        "edge pipeline {} prompts, {} candidates",
        edges.prompts,
        edges.candidates
    );

    let seg = NoisySegmenter::new(OracleSegmenter::new(scene.clone()), NoiseConfig::default());
    let sim = SimConfig::default();
    for (i, gt) in scene.region_masks().iter().enumerate() {
        let trace =
            run_interactive_sim(&seg, gt, &sim, &mut rng(i as u64)).map_err(|e| e.to_string())?;
        ensure!(
            trace.rounds.len() == 11,
            "trace with {} rounds",
            trace.rounds.len()
        );
    }
    Ok(format!("21 crops (1+4+16, sides 32/16/8), 256 prompts -> 768 candidates, 11-round traces for {} targets", scene.regions.len()))
}

// 2 ------------------------------------------------------------------------

fn separated_flat_scene(seed: u64) -> Option<SceneSpec> {
    let mut r = rng(seed);
    let n = r.random_range(5..=30u32);
    let (w, h) = (256u32, 256u32);
    let cap = ((0.35 * (w * h) as f64 / n as f64).sqrt() as u32).clamp(24, 64);
    let cfg = SceneConfig {
        width: w,
        height: h,
        objects: (n, n),
        root_size: (24, cap),
        max_depth: 1,
        min_gap: 3,
        ..Default::default()
    };
    let scene = generate_scene(seed, &cfg).ok()?;
    let masks = scene.region_masks();
    let grid = make_point_grid(&CropSpec::full_image(w, h));
    for m in &masks {
        if m.area() < 400 {
            return None;
        }
        if !grid.points.iter().any(|&(x, y)| m.get(x as u32, y as u32)) {
            return None;
        }
    }
    let boxes: Vec<BBox> = masks.iter().map(|m| m.bbox().unwrap()).collect();
    for i in 0..boxes.len() {
        for j in i + 1..boxes.len() {
            if boxes[i].iou(&boxes[j]) > 0.7 {
                return None;
            }
        }
    }
    Some(scene)
}

fn oracle_round_trip() -> Check {
    let mut scenes = Vec::new();
    let mut seed = 0;
    while scenes.len() < 100 {
        ensure!(
            seed < 1000,
            "only {} qualifying scenes in 1000 seeds",
            scenes.len()
        );
        if let Some(s) = separated_flat_scene(seed) {
            scenes.push(s);
        }
        seed += 1;
    }
    let (mut regions, mut min_n, mut max_n) = (0, usize::MAX, 0);
    for (i, scene) in scenes.iter().enumerate() {
        let records = run_amg(&OracleSegmenter::new(scene.clone()), &AmgConfig::default())
            .map_err(|e| e.to_string())?;
        let gts = scene.region_masks();
        ensure!(
            records.len() == gts.len(),
            "scene {i}: {} masks for {} regions",
            records.len(),
            gts.len()
        );
        for (j, gt) in gts.iter().enumerate() {
            ensure!(
                records.iter().any(|r| &r.mask == gt),
                "scene {i}: region {j} not recovered exactly"
            );
        }
        regions += gts.len();
        min_n = min_n.min(gts.len());
        max_n = max_n.max(gts.len());
    }
    Ok(format!("100 scenes ({} seeds tried), {regions} regions ({min_n}..{max_n} per scene) recovered at IoU 1, 0 spurious", seed))
}

// 3 ------------------------------------------------------------------------

fn brute_stability(r: &MaskRecord, delta: f32) -> f64 {
    let logits = r.soft.as_ref().expect("candidates keep logits").logits();
    let (mut inter, mut union) = (0usize, 0usize);
    for &l in logits {
        let (hi, lo) = (l > delta, l > -delta);
        inter += (hi && lo) as usize;
        union += (hi || lo) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn filter_thresholds() -> Check {
    let cfg = AmgConfig::default();
    let scene_cfg = SceneConfig {
        width: 128,
        height: 128,
        objects: (3, 5),
        root_size: (24, 72),
        ..Default::default()
    };
    let noise = NoiseConfig {
        boundary_std: 1.0,
        iou_std: 0.06,
        ..Default::default()
    };
    let (mut total, mut kept_total) = (0, 0);
    let (mut iou_lo, mut iou_hi, mut stab_lo, mut stab_hi) = (0, 0, 0, 0);
    for seed in 0..6u64 {
        let scene = generate_scene(seed, &scene_cfg).map_err(|e| e.to_string())?;
        let seg = NoisySegmenter::new(OracleSegmenter::new(scene), NoiseConfig { seed, ..noise });
        let image_area = 128 * 128;
        let crops = build_crop_schedule(128, 128).map_err(|e| e.to_string())?;
        for crop in [crops[0], crops[1], crops[7]] {
            let records = generate_candidates(&seg, &crop, &cfg).map_err(|e| e.to_string())?;
            let mut expected = Vec::new();
            for r in &records {
                let stab = brute_stability(r, cfg.stability_delta);
                ensure!(
                    (stab - r.stability).abs() < 1e-12,
                    "stability {} vs brute force {stab}",
                    r.stability
                );
                if r.area > 0 {
                    if r.predicted_iou >= 0.88 {
                        iou_hi += 1
                    } else {
                        iou_lo += 1
                    }
                    if stab >= 0.95 {
                        stab_hi += 1
                    } else {
                        stab_lo += 1
                    }
                }
                if r.predicted_iou >= 0.88
                    && stab >= 0.95
                    && (r.area as f64) < 0.95 * image_area as f64
                {
                    expected.push((r.predicted_iou, r.stability, r.source_point, r.bbox));
                }
            }
            total += records.len();
            let kept = filter_candidates(records, &cfg, image_area);
            let got: Vec<_> = kept
                .iter()
                .map(|r| (r.predicted_iou, r.stability, r.source_point, r.bbox))
                .collect();
            ensure!(
                got == expected,
                "seed {seed}: {} kept, predicate keeps {}",
                got.len(),
                expected.len()
            );
            kept_total += got.len();
        }
    }
    ensure!(
        iou_lo > 0 && iou_hi > 0,
        "predicted IoU does not straddle 0.88 ({iou_lo} below, {iou_hi} above)"
    );
    ensure!(
        stab_lo > 0 && stab_hi > 0,
        "stability does not straddle 0.95 ({stab_lo} below, {stab_hi} above)"
    );
    Ok(format!(
        "{total} records, {kept_total} kept; pred_iou {iou_lo} below / {iou_hi} above, stability {stab_lo} below / {stab_hi} above"
    ))
}

// 4 ------------------------------------------------------------------------

fn pixel_set(b: &BBox) -> HashSet<(u32, u32)> {
    (b.x..b.x + b.w)
        .flat_map(|x| (b.y..b.y + b.h).map(move |y| (x, y)))
        .collect()
}

/// Sorts by an explicit tuple and suppresses with pixel-set IoU.
fn reference_nms(boxes: &[BBox], keys: &[NmsKey], thresh: f64) -> Vec<usize> {
    let sets: Vec<HashSet<(u32, u32)>> = boxes.iter().map(pixel_set).collect();
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (&keys[a], &keys[b]);
        kb.rank
            .partial_cmp(&ka.rank)
            .unwrap()
            .then(kb.area.cmp(&ka.area))
            .then(ka.point.1.partial_cmp(&kb.point.1).unwrap())
            .then(ka.point.0.partial_cmp(&kb.point.0).unwrap())
            .then(a.cmp(&b))
    });
    let mut suppressed = vec![false; boxes.len()];
    let mut kept = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        kept.push(i);
        for &j in &order[pos + 1..] {
            let inter = sets[i].intersection(&sets[j]).count();
            let union = sets[i].len() + sets[j].len() - inter;
            if inter as f64 / union as f64 > thresh {
                suppressed[j] = true;
            }
        }
    }
    kept
}

fn nms_equivalence() -> Check {
    let mut r = rng(4);
    let mut kept_total = 0;
    for case in 0..1000 {
        let n = r.random_range(0..=20);
        let boxes: Vec<BBox> = (0..n)
            .map(|_| {
                BBox::new(
                    r.random_range(0..30),
                    r.random_range(0..30),
                    r.random_range(1..15),
                    r.random_range(1..15),
                )
            })
            .collect();
        let keys: Vec<NmsKey> = boxes
            .iter()
            .map(|b| NmsKey {
                rank: r.random_range(0..4) as f64 * 0.25,
                area: if r.random_bool(0.5) { b.area() } else { 50 },
                point: (r.random_range(0..3) as f64, r.random_range(0..3) as f64),
            })
            .collect();
        let thresh = [0.0, 0.3, 0.5, 0.7, 1.0][r.random_range(0..5)];
        let got = greedy_nms(&boxes, &keys, thresh);
        let want = reference_nms(&boxes, &keys, thresh);
        ensure!(got == want, "case {case}: {got:?} vs reference {want:?}");
        kept_total += got.len();
    }
    Ok(format!(
        "1000 instances identical to the reference ({kept_total} boxes kept)"
    ))
}

// 5 ------------------------------------------------------------------------

fn miou_protocol() -> Check {
    let nested = SceneConfig {
        width: 128,
        height: 128,
        objects: (2, 3),
        root_size: (30, 50),
        ..Default::default()
    };
    let flat = SceneConfig {
        max_depth: 1,
        ..nested.clone()
    };
    let dataset = |name: &str,
                   cfg: &SceneConfig,
                   seeds: std::ops::Range<u64>|
     -> Result<EvalDataset, String> {
        let scenes = seeds
            .map(|s| generate_scene(s, cfg).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        Ok(EvalDataset::from_scenes(name, scenes))
    };
    let datasets = [
        dataset("a", &nested, 0..2)?,
        dataset("b", &nested, 10..13)?,
        dataset("c", &flat, 20..24)?,
    ];

    let mut runs = 0;
    for noise_seed in 0..3 {
        let mut per = BTreeMap::new();
        let mut hand = Vec::new();
        for ds in &datasets {
            let cfg = PointEvalConfig {
                report_at: vec![1, 3],
                seed: noise_seed,
                ..Default::default()
            };
            let res = eval_point_to_mask(
                |s: &SceneSpec| {
                    NoisySegmenter::new(
                        OracleSegmenter::new(s.clone()),
                        NoiseConfig {
                            seed: noise_seed,
                            ..Default::default()
                        },
                    )
                },
                ds,
                &cfg,
            )
            .map_err(|e| e.to_string())?;
            let table = res.table(&cfg.report_at);
            ensure!(
                table["oracle_miou@1"] >= table["miou@1"],
                "{}: oracle {} below default {}",
                ds.name,
                table["oracle_miou@1"],
                table["miou@1"]
            );
            for (row, best) in res.ious.iter().zip(&res.oracle_first) {
                ensure!(
                    *best >= row[0],
                    "{}: per-object oracle IoU below the chosen mask",
                    ds.name
                );
            }
            let first: Vec<f64> = res.ious.iter().map(|r| r[0]).collect();
            let by_hand = first.iter().sum::<f64>() / first.len() as f64;
            ensure!(
                (table["miou@1"] - by_hand).abs() < 1e-12,
                "{}: per-dataset mean",
                ds.name
            );
            ensure!(first.len() == ds.gt_count(), "one IoU per object");
            hand.push(by_hand);
            per.insert(ds.name.clone(), table);
            runs += 1;
        }
        let report = EvalReport::new(per);
        let macro_hand = hand.iter().sum::<f64>() / 3.0;
        ensure!(
            (report.macro_avg["miou@1"] - macro_hand).abs() < 1e-12,
            "macro mean {} vs {macro_hand}",
            report.macro_avg["miou@1"]
        );
    }

    // literal tables with a metric missing from one dataset
    let t = |pairs: &[(&str, f64)]| -> MetricTable {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    };
    let report = EvalReport::new(
        [
            ("a".to_string(), t(&[("miou@1", 0.5), ("miou@3", 0.75)])),
            ("b".to_string(), t(&[("miou@1", 0.25), ("miou@3", 0.5)])),
            ("c".to_string(), t(&[("miou@1", 1.0)])),
        ]
        .into_iter()
        .collect(),
    );
    ensure!(
        (report.macro_avg["miou@1"] - 1.75 / 3.0).abs() < 1e-12,
        "literal macro miou@1"
    );
    ensure!(
        (report.macro_avg["miou@3"] - 0.625).abs() < 1e-12,
        "literal macro miou@3"
    );

    let flat_ds = dataset(
        "flat",
        &SceneConfig {
            objects: (3, 5),
            ..flat
        },
        30..35,
    )?;
    for sampler in [PointSampler::Center, PointSampler::Random] {
        let cfg = PointEvalConfig {
            report_at: vec![1],
            sampler,
            seed: 1,
        };
        let res = eval_point_to_mask(
            |s: &SceneSpec| OracleSegmenter::new(s.clone()),
            &flat_ds,
            &cfg,
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            res.miou_at(1) == 1.0,
            "exact oracle mIoU@1 = {} with {sampler:?}",
            res.miou_at(1)
        );
        ensure!(res.oracle_miou_at1() == 1.0, "exact oracle-mode mIoU@1");
    }
    Ok(format!("{runs} noisy runs with oracle >= default; exact oracle mIoU@1 = 1 on {} flat objects; macro means exact", flat_ds.gt_count()))
}

// 6 ------------------------------------------------------------------------

fn ar_fixture() -> Check {
    let rect = |x, y, w, h| Shape::Rect { x, y, w, h };
    let scene = SceneSpec {
        width: 60,
        height: 60,
        regions: vec![
            Region {
                id: 0,
                parent: None,
                depth: 0,
                shape: rect(0, 0, 10, 10),
            },
            Region {
                id: 1,
                parent: None,
                depth: 0,
                shape: rect(20, 0, 10, 10),
            },
            Region {
                id: 2,
                parent: None,
                depth: 0,
                shape: rect(40, 40, 10, 10),
            },
        ],
    };
    let ds = EvalDataset::from_scenes("fixture", vec![scene]);
    let gts = &ds.items[0].gt_masks;
    let partial = BinaryMask::from_fn(60, 60, |x, y| {
        (40..50).contains(&x) && (40..46).contains(&y)
    });
    let prop = |mask: BinaryMask, s: f64| Proposal {
        mask,
        predicted_iou: s,
        stability: s,
    };
    let props = vec![vec![
        prop(gts[0].clone(), 0.9),
        prop(gts[1].clone(), 0.9),
        prop(partial, 0.9),
    ]];
    let ar = eval_proposals(&props, &ds, &ProposalEvalConfig::default())
        .map_err(|e| e.to_string())?["ar@1000"];
    let want = (3.0 * 1.0 + 7.0 * (2.0 / 3.0)) / 10.0;
    ensure!(
        (ar - want).abs() < 1e-12,
        "worked example AR {ar}, expected {want}"
    );

    let cfg = SceneConfig {
        width: 128,
        height: 128,
        objects: (3, 6),
        root_size: (20, 44),
        ..Default::default()
    };
    let scenes: Vec<SceneSpec> = (0..6).map(|s| generate_scene(s, &cfg).unwrap()).collect();
    let ds = EvalDataset::from_scenes("scenes", scenes);
    let perfect: Vec<Vec<Proposal>> = ds
        .items
        .iter()
        .map(|i| i.gt_masks.iter().map(|m| prop(m.clone(), 1.0)).collect())
        .collect();
    let ar =
        eval_proposals(&perfect, &ds, &ProposalEvalConfig::default()).map_err(|e| e.to_string())?;
    ensure!(
        ar.iter()
            .filter(|(k, _)| k.starts_with("ar@"))
            .all(|(_, &v)| v == 1.0),
        "perfect proposals: {ar:?}"
    );

    // shifted copies of every ground truth padded with random boxes, random scores
    let mut r = rng(6);
    let mut proposals = Vec::new();
    for item in &ds.items {
        let mut p = Vec::new();
        for gt in &item.gt_masks {
            for _ in 0..6 {
                let (dx, dy) = (r.random_range(-4i64..=4), r.random_range(-4i64..=4));
                let shifted = BinaryMask::from_fn(128, 128, |x, y| {
                    let (sx, sy) = (x as i64 - dx, y as i64 - dy);
                    (0..128).contains(&sx) && (0..128).contains(&sy) && gt.get(sx as u32, sy as u32)
                });
                p.push(prop(shifted, r.random_range(0.0..1.0)));
            }
        }
        for _ in 0..300 {
            let (x, y, w, h) = (
                r.random_range(0..100),
                r.random_range(0..100),
                r.random_range(4..28),
                r.random_range(4..28),
            );
            p.push(prop(
                BinaryMask::from_fn(128, 128, |px, py| {
                    (x..x + w).contains(&px) && (y..y + h).contains(&py)
                }),
                r.random_range(0.0..1.0),
            ));
        }
        proposals.push(p);
    }
    let mut prev = -1.0;
    let mut values = Vec::new();
    for k in [10, 100, 1000] {
        let v = eval_proposals(
            &proposals,
            &ds,
            &ProposalEvalConfig {
                k,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?[&format!("ar@{k}")];
        ensure!(v >= prev, "AR not monotone: ar@{k} = {v} after {prev}");
        prev = v;
        values.push(v);
    }
    ensure!(values[2] > values[0], "AR flat in k: {values:?}");
    Ok(format!(
        "worked example {want:.12}, perfect = 1, ar@10/100/1000 = {:.3}/{:.3}/{:.3}",
        values[0], values[1], values[2]
    ))
}

// 7 ------------------------------------------------------------------------

fn exhaustive_matching(adj: &[Vec<usize>], used: &mut Vec<bool>, i: usize) -> usize {
    if i == adj.len() {
        return 0;
    }
    let mut best = exhaustive_matching(adj, used, i + 1);
    for &j in &adj[i] {
        if !used[j] {
            used[j] = true;
            best = best.max(1 + exhaustive_matching(adj, used, i + 1));
            used[j] = false;
        }
    }
    best
}

fn edge_suite() -> Check {
    let cfg = EdgeEvalConfig::default();
    let (w, h) = (200u32, 200u32);
    let outline = BinaryMask::from_fn(w, h, |x, y| {
        ((x == 40 || x == 150) && (30..170).contains(&y))
            || ((y == 30 || y == 169) && (40..=150).contains(&x))
    });
    let m = edge_metrics(
        &[EdgeMap::from_mask(&outline)],
        &[vec![outline.clone()]],
        &cfg,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        m.ods == 1.0 && m.ois == 1.0 && m.ap == 1.0,
        "pred == gt: ods {} ois {} ap {}",
        m.ods,
        m.ois,
        m.ap
    );

    let m = edge_metrics(&[EdgeMap::zeros(w, h)], &[vec![outline.clone()]], &cfg)
        .map_err(|e| e.to_string())?;
    ensure!(
        m.ods == 0.0 && m.ois == 0.0,
        "empty pred: ods {} ois {}",
        m.ods,
        m.ois
    );

    let radius = cfg.tolerance * ((w * w + h * h) as f64).sqrt();
    ensure!(radius >= 2.0, "tolerance radius {radius}");
    let line = |x0: u32| BinaryMask::from_fn(w, h, move |x, y| x == x0 && (20..180).contains(&y));
    let m = edge_metrics(&[EdgeMap::from_mask(&line(102))], &[vec![line(100)]], &cfg)
        .map_err(|e| e.to_string())?;
    ensure!(
        m.ods == 1.0 && m.ois == 1.0,
        "shifted line: ods {} ois {}",
        m.ods,
        m.ois
    );

    let mut r = rng(7);
    for case in 0..2000 {
        let (nl, nr) = (r.random_range(0..=6), r.random_range(0..=6));
        let mut pairs: Vec<(usize, usize)> = (0..nl)
            .flat_map(|i| (0..nr).map(move |j| (i, j)))
            .filter(|_| r.random_bool(0.35))
            .collect();
        // random priority order
        for i in (1..pairs.len()).rev() {
            pairs.swap(i, r.random_range(0..=i));
        }
        let got = priority_matching(nl, nr, &pairs);
        let mut seen = HashSet::new();
        for (i, m) in got.iter().enumerate() {
            if let Some(j) = *m {
                ensure!(
                    pairs.contains(&(i, j)) && seen.insert(j),
                    "case {case}: invalid matching"
                );
            }
        }
        let mut adj = vec![Vec::new(); nl];
        for &(i, j) in &pairs {
            adj[i].push(j);
        }
        let best = exhaustive_matching(&adj, &mut vec![false; nr], 0);
        ensure!(
            got.iter().flatten().count() == best,
            "case {case}: {} matched, exhaustive {best}",
            got.iter().flatten().count()
        );
    }
    for case in 0..1000 {
        let pick = |r: &mut ChaCha8Rng| {
            let n = r.random_range(0..=6);
            let mut px = HashSet::new();
            while px.len() < n {
                px.insert((r.random_range(0..8u32), r.random_range(0..8u32)));
            }
            px
        };
        let (p, g) = (pick(&mut r), pick(&mut r));
        let radius = [1.0, 1.5, 2.0, 3.0][r.random_range(0..4)];
        let pm = BinaryMask::from_fn(8, 8, |x, y| p.contains(&(x, y)));
        let gm = BinaryMask::from_fn(8, 8, |x, y| g.contains(&(x, y)));
        let pv: Vec<(u32, u32)> = pm.pixels().collect();
        let gv: Vec<(u32, u32)> = gm.pixels().collect();
        let adj: Vec<Vec<usize>> = pv
            .iter()
            .map(|&(px, py)| {
                (0..gv.len())
                    .filter(|&j| {
                        let (dx, dy) = (px as f64 - gv[j].0 as f64, py as f64 - gv[j].1 as f64);
                        (dx * dx + dy * dy).sqrt() <= radius
                    })
                    .collect()
            })
            .collect();
        let best = exhaustive_matching(&adj, &mut vec![false; gv.len()], 0);
        let got = match_edge_pixels(&pm, &gm, radius);
        ensure!(
            got == best,
            "pixel case {case}: {got} matched, exhaustive {best}"
        );
    }
    Ok(
        "pred==gt 1/1/1, empty 0/0, shifted line F1 1, 3000 matchings equal exhaustive maxima"
            .into(),
    )
}

// 8 ------------------------------------------------------------------------

fn brute_dt(m: &BinaryMask, border: bool) -> Vec<f64> {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let mut bg = Vec::new();
    let range = if border { -1..w + 1 } else { 0..w };
    for y in if border { -1..h + 1 } else { 0..h } {
        for x in range.clone() {
            let outside = x < 0 || y < 0 || x >= w || y >= h;
            if outside || !m.get(x as u32, y as u32) {
                bg.push((x, y));
            }
        }
    }
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !m.get(x as u32, y as u32) {
                out.push(0.0);
                continue;
            }
            let d2 = bg
                .iter()
                .map(|&(bx, by)| (bx - x).pow(2) + (by - y).pow(2))
                .min();
            out.push(d2.map_or(f64::INFINITY, |d| (d as f64).sqrt()));
        }
    }
    out
}

fn numerical_oracles() -> Check {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let m = if case < 5 {
            [BinaryMask::full(16, 16), BinaryMask::empty(16, 16)][case % 2].clone()
        } else if case % 2 == 0 {
            random_mask(&mut r, 16, 16)
        } else {
            blob_mask(&mut r, 16, 16)
        };
        for (border, got) in [
            (true, distance_transform(&m)),
            (false, distance_transform_unbounded(&m)),
        ] {
            for (a, b) in got.values.iter().zip(brute_dt(&m, border)) {
                let err = if a.is_infinite() && b.is_infinite() {
                    0.0
                } else {
                    (a - b).abs()
                };
                ensure!(err <= 1e-6, "case {case}: distance {a} vs brute force {b}");
                worst = worst.max(err);
            }
        }
    }

    let mut rle_cases = 0;
    for (w, h) in [(1, 1), (1, 3), (3, 1), (2, 3), (3, 2), (3, 3)] {
        let n = (w * h) as usize;
        for bits in 0u32..1 << n {
            // column-major bit order
            let m = BinaryMask::from_fn(w, h, |x, y| bits >> (x * h + y) & 1 == 1);
            let rle = rle_encode(&m);
            ensure!(
                rle_decode(&rle).map_err(|e| e.to_string())? == m,
                "RLE round trip {w}x{h} {bits:#b}"
            );
            let mut want = Vec::new();
            let (mut cur, mut run) = (false, 0u32);
            for i in 0..n {
                let v = bits >> i & 1 == 1;
                if v != cur {
                    want.push(run);
                    cur = v;
                    run = 0;
                }
                run += 1;
            }
            want.push(run);
            ensure!(
                rle.counts == want,
                "{w}x{h} {bits:#b}: counts {:?}, expected {want:?}",
                rle.counts
            );
            ensure!(rle.area() == m.area() as u64, "RLE area");
            rle_cases += 1;
        }
    }

    for case in 0..1000 {
        let m = if case % 2 == 0 {
            random_mask(&mut r, 32, 32)
        } else {
            blob_mask(&mut r, 32, 32)
        };
        let area = r.random_range(0..40);
        let conn = if r.random_bool(0.5) {
            Connectivity::Four
        } else {
            Connectivity::Eight
        };
        let filled = fill_small_holes(&m, area, conn);
        ensure!(
            fill_small_holes(&filled, area, conn) == filled,
            "case {case}: hole fill not idempotent"
        );
        let cleaned = remove_small_components(&m, area, conn);
        ensure!(
            remove_small_components(&cleaned, area, conn) == cleaned,
            "case {case}: component removal not idempotent"
        );
    }
    Ok(format!("DT max error {worst:.1e} over 1000 masks x 2 variants; {rle_cases} RLE masks; 2000 idempotence checks"))
}

// 9 ------------------------------------------------------------------------

fn segkit(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_segkit"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "segkit {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(())
}

fn read_tree(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        out.insert(
            p.file_name().unwrap().to_string_lossy().into_owned(),
            fs::read(&p).map_err(|e| e.to_string())?,
        );
    }
    Ok(out)
}

fn cli_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |p: &str| tmp.path().join(p).to_string_lossy().into_owned();
    segkit(&[
        "--seed",
        "7",
        "scene",
        "gen",
        "--out",
        &d("scenes"),
        "--count",
        "20",
    ])?;
    segkit(&[
        "--seed",
        "8",
        "scene",
        "gen",
        "--out",
        &d("small"),
        "--count",
        "20",
        "--width",
        "96",
        "--height",
        "96",
        "--objects",
        "2:4",
        "--root-size",
        "24:40",
    ])?;
    let mut summary = Vec::new();
    for (label, fixture, extra) in [
        ("oracle", "scenes", vec![]),
        (
            "noisy",
            "small",
            vec![
                "--segmenter",
                "noisy",
                "--pred-iou-thresh",
                "0.8",
                "--stability-thresh",
                "0.8",
                "--crop-schedule-on",
                "false",
            ],
        ),
    ] {
        let mut trees = Vec::new();
        for (run, jobs) in ["1", "4", "8", "1"].iter().enumerate() {
            let out = d(&format!("{label}_{run}"));
            let scenes = d(fixture);
            let mut args = vec![
                "--seed", "7", "--jobs", jobs, "amg", "run", "--scenes", &scenes,
            ];
            args.extend(["--out", &out]);
            args.extend(extra.iter().copied());
            segkit(&args)?;
            trees.push(read_tree(Path::new(&out))?);
        }
        ensure!(
            trees[0].len() == 20,
            "{label}: {} mask files",
            trees[0].len()
        );
        for (i, t) in trees.iter().enumerate().skip(1) {
            ensure!(t == &trees[0], "{label}: run {i} differs from run 0");
        }
        let masks: usize = trees[0]
            .values()
            .map(|b| {
                String::from_utf8_lossy(b)
                    .matches("\"segmentation\"")
                    .count()
            })
            .sum();
        ensure!(masks > 0, "{label}: no masks written");
        summary.push(format!("{label} {masks} masks"));
    }
    Ok(format!(
        "20 scenes, jobs 1/4/8 + repeat byte-identical ({})",
        summary.join(", ")
    ))
}

// 10 -----------------------------------------------------------------------

/// Seed-averaged gains recorded from this run configuration; the bands pin them.
const RECORDED_POINT_GAIN: f64 = 0.3610;
const RECORDED_REFINE_GAIN: f64 = 0.0216;
const PIN_TOLERANCE: f64 = 0.02;

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn monte_carlo_bands() -> Check {
    let scene_cfg = SceneConfig {
        width: 128,
        height: 128,
        objects: (2, 3),
        root_size: (30, 56),
        ..Default::default()
    };
    let (mut point_gain, mut refine_gain) = (Vec::new(), Vec::new());
    for seed in 0..50u64 {
        let scenes = (0..3)
            .map(|i| generate_scene(seed * 1000 + i, &scene_cfg).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        let ds = EvalDataset::from_scenes("mc", scenes);
        let noise = NoiseConfig {
            seed,
            ..Default::default()
        };
        let factory = |s: &SceneSpec| NoisySegmenter::new(OracleSegmenter::new(s.clone()), noise);
        let cfg = PointEvalConfig {
            report_at: vec![1, 3],
            seed,
            ..Default::default()
        };
        let points = eval_point_to_mask(factory, &ds, &cfg).map_err(|e| e.to_string())?;
        let boxes = eval_instance_seg(factory, &ds, None).map_err(|e| e.to_string())?;
        point_gain.push(points.miou_at(3) - points.miou_at(1));
        refine_gain.push(mean_se(&boxes.refined).0 - mean_se(&boxes.unrefined).0);
    }
    let (pg, pse) = mean_se(&point_gain);
    let (rg, rse) = mean_se(&refine_gain);
    let detail = format!("mIoU@3 - mIoU@1 = {pg:.4} (SE {pse:.4}), refined - unrefined = {rg:.4} (SE {rse:.4}), 50 seeds");
    ensure!(pg > 2.0 * pse, "point gain within noise: {detail}");
    ensure!(rg > 2.0 * rse, "refinement gain within noise: {detail}");
    ensure!(
        (pg - RECORDED_POINT_GAIN).abs() <= PIN_TOLERANCE,
        "point gain left its pinned band: {detail}"
    );
    ensure!(
        (rg - RECORDED_REFINE_GAIN).abs() <= PIN_TOLERANCE,
        "refinement gain left its pinned band: {detail}"
    );
    Ok(detail)
}

// --------------------------------------------------------------------------

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, u64, fn() -> Check); 10] = [
        ("structural constants", 1, structural_constants),
        ("oracle round trip", 60, oracle_round_trip),
        ("filter thresholds", 10, filter_thresholds),
        ("NMS oracle equivalence", 10, nms_equivalence),
        ("mIoU protocol invariants", 30, miou_protocol),
        ("AR fixture", 5, ar_fixture),
        ("edge metrics degenerate suite", 10, edge_suite),
        ("numerical oracles", 30, numerical_oracles),
        ("CLI determinism", 60, cli_determinism),
        ("Monte Carlo bands", 120, monte_carlo_bands),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    let mut stdout = std::io::stdout();
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let elapsed = start.elapsed();
        let result = match result {
            Ok(_) if elapsed > Duration::from_secs(budget) => {
                Err(format!("took {:.2}s", elapsed.as_secs_f64()))
            }
            r => r,
        };
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d.as_str()),
            Err(e) => ("FAIL", e.as_str()),
        };
        let line = format!(
            "{tag} [{id:>2}] {name} ({:.2}s / {budget}s): {detail}\n",
            elapsed.as_secs_f64()
        );
        // bypasses the harness capture so the lines show in normal runs
        let _ = stdout.write_all(line.as_bytes());
        if result.is_err() {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
