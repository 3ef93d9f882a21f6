use acc_core::*;
use rand::{Rng, SeedableRng};
fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20_240_601);
    let mut cfg = config::PipelineConfig::load("configs/synthetic.toml").unwrap();
    cfg.split.circ_split = 0.9;
    let mut specs = vec![];
    for i in 0..12u64 {
        specs.push(synth::SynthSpec { width: 512, height: 512, colonies: rng.random_range(20..=100), overlap: rng.random_range(0.0..=0.15), touching: 0.25, edge_fade: 0.6,
            noise_sigma: rng.random_range(0.0..=0.05), seed: 5000 + i, ..Default::default() });
    }
    let d = synth::generate(&specs[2]).unwrap();
    let gray = imaging::to_gray(&d.image);
    let r = pipeline::process_image("x", &d.image, &cfg, None).unwrap();
    let bm = blobs::blobs_to_mask(&r.blobs, 512, 512);
    let e = pipeline::enhance_gray(&gray, &bm, &cfg).unwrap();
    for (a, b) in [((132.0, 279.0), (122.0, 297.0)), ((291.0,296.0),(301.0,282.0))] {
    for t in 0..=20 {
        let f = -0.3 + 1.6 * t as f64 / 20.0;
        let (x, y) = (a.0 + f * (b.0 - a.0), a.1 + f * (b.1 - a.1));
        println!("{f:.2} raw {:.3} enh {:.3}", gray.get(x.round() as usize, y.round() as usize), e.get(x.round() as usize, y.round() as usize));
    }
    let med = splitting::median_area(&r.blobs);
    let blob = r.blobs.iter().find(|bb| bb.contains(a.0 as usize, a.1 as usize)).unwrap();
    println!("blob area {} circ {} bbox {:?} median {med}", blob.area, blob.circularity, blob.bbox);
    let s = splitting::split_blob(blob, &e, med, &cfg.seg_params(), 0).unwrap();
    println!("h_opt {:?} q {} colonies {:?}", s.h_opt, s.q, s.colonies);
    }
}
