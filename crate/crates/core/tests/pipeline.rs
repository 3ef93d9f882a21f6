use std::fs;
use std::path::Path;

use acc_core::config::{PipelineConfig, Threads};
use acc_core::imaging::GrayPlane;
use acc_core::pipeline::{evaluate_saved_masks, process_image, run_batch};
use acc_core::synth::{generate, write_dishes, SynthSpec};
use acc_core::texture::{select_pc_channel, ClaheParams};
use acc_core::AccError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic_config() -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/synthetic.toml");
    PipelineConfig::load(path).unwrap()
}

#[test]
fn twenty_five_disks() {
    let d = generate(&SynthSpec {
        colonies: 25,
        eccentricity: (0.0, 0.0),
        seed: 11,
        ..SynthSpec::default()
    })
    .unwrap();
    let r = process_image("disks", &d.image, &synthetic_config(), Some(&d.marks)).unwrap();
    assert!(r.colony_count().abs_diff(25) <= 1, "{} colonies", r.colony_count());
}

#[test]
fn disjoint_colonies_cover_ground_truth() {
    let d = generate(&SynthSpec {
        colonies: 30,
        seed: 12,
        ..SynthSpec::default()
    })
    .unwrap();
    let r = process_image("disjoint", &d.image, &synthetic_config(), Some(&d.marks)).unwrap();
    assert_eq!(r.colony_count(), 30);
    let m = r.metrics.unwrap();
    assert_eq!((m.counts.tp, m.counts.fp, m.counts.fn_), (30, 0, 0));

    let fg = r.segmentation.labels.foreground();
    let both = fg.as_slice().iter().zip(d.mask.as_slice()).filter(|(a, b)| **a && **b).count();
    let dice = 2.0 * both as f64 / (fg.count() + d.mask.count()) as f64;
    assert!(dice >= 0.9, "Dice {dice}");
}

#[test]
fn overlapping_pairs_split_once_the_gate_opens() {
    let spec = SynthSpec {
        colonies: 40,
        overlap: 0.1,
        touching: 0.3,
        seed: 13,
        ..SynthSpec::default()
    };
    let d = generate(&spec).unwrap();
    let mut cfg = synthetic_config();
    let fixed = process_image("pairs", &d.image, &cfg, Some(&d.marks)).unwrap();
    cfg.split.circ_split = 0.9;
    let open = process_image("pairs", &d.image, &cfg, Some(&d.marks)).unwrap();
    let (f, o) = (fixed.metrics.unwrap(), open.metrics.unwrap());
    assert!(o.counts.fn_ < f.counts.fn_);
    assert!(o.pred_count.abs_diff(40) <= 2, "{} colonies", o.pred_count);
    assert_eq!(o.counts.fp, 0);
}

/// Plane A: smooth disks on a flat field. B: A with heavy speckle.
/// C: a shadow gradient with a bright flask rim.
fn texture_planes() -> [GrayPlane; 3] {
    let n = 128;
    let centres = [(30.0, 30.0), (90.0, 40.0), (50.0, 95.0), (100.0, 100.0)];
    let a = GrayPlane::from_fn(n, n, |x, y| {
        centres
            .iter()
            .map(|&(cx, cy)| {
                let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
                (-r2 / (2.0 * 8.0 * 8.0)).exp()
            })
            .fold(0.0, f64::max)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let b = a.map(|&v| v + rng.random_range(-0.5..0.5));
    let c = GrayPlane::from_fn(n, n, |x, y| {
        let r = ((x as f64 - 64.0).powi(2) + (y as f64 - 64.0).powi(2)).sqrt();
        let rim = if (r - 58.0).abs() < 2.0 { 0.8 } else { 0.0 };
        x as f64 / n as f64 * 0.5 + rim + 0.05 * rng.random::<f64>()
    });
    [a, b, c]
}

#[test]
fn smooth_colony_plane_is_selected() {
    let [a, b, c] = texture_planes();
    let s = select_pc_channel(&[a.clone(), b.clone(), c.clone()], &ClaheParams::default(), 64).unwrap();
    assert_eq!(s.index, 0, "contrasts {:?}", s.contrasts);
    // the choice follows the plane, not its position
    let s = select_pc_channel(&[c, b, a], &ClaheParams::default(), 64).unwrap();
    assert_eq!(s.index, 2, "contrasts {:?}", s.contrasts);
}

#[test]
fn saved_masks_reproduce_batch_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let dishes: Vec<(String, _)> = (0..2u64)
        .map(|i| {
            let s = SynthSpec {
                width: 320,
                height: 320,
                colonies: 15,
                seed: 40 + i,
                ..SynthSpec::default()
            };
            (format!("plate_{i}"), generate(&s).unwrap())
        })
        .collect();
    write_dishes(&dishes, dir.path()).unwrap();
    let mut cfg = synthetic_config();
    cfg.input = Some(dir.path().join("images").to_string_lossy().into_owned());
    cfg.output = Some(dir.path().join("out"));
    cfg.evaluation.gt_marks = Some(dir.path().join("marks.csv"));
    cfg.threads = Threads::Count(1);
    let rep = run_batch(&cfg).unwrap();
    assert_eq!(rep.exit_code(), 0);
    assert!(dir.path().join("out/metrics.csv").is_file());

    let marks = dir.path().join("marks.csv");
    let again = evaluate_saved_masks(&dir.path().join("out"), Some(&marks), None).unwrap();
    assert_eq!(again.len(), 2);
    for (a, b) in again.iter().zip(&rep.metrics) {
        assert_eq!(a.image, b.image);
        assert_eq!(a.counts, b.counts);
    }

    let both = evaluate_saved_masks(&dir.path().join("out"), Some(&marks), Some(dir.path()));
    assert!(matches!(both, Err(AccError::Config(_))));
}

#[test]
fn blank_dish_writes_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = generate(&SynthSpec {
        colonies: 0,
        width: 200,
        height: 200,
        ..SynthSpec::default()
    })
    .unwrap();
    write_dishes(&[("empty".to_string(), d)], dir.path()).unwrap();
    let mut cfg = synthetic_config();
    cfg.input = Some(dir.path().join("images/*.png").to_string_lossy().into_owned());
    cfg.output = Some(dir.path().join("out"));
    let rep = run_batch(&cfg).unwrap();
    assert_eq!(rep.exit_code(), 0);
    let table = fs::read_to_string(dir.path().join("out/empty_colonies.csv")).unwrap();
    assert_eq!(table.lines().count(), 1);
}
