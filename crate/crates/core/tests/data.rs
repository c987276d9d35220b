use irsr::data::{
    bicubic_upsample, degrade, load_image, load_sequence, save_image, save_sequence, synth_sequence, Background,
    BitDepth, FrameSequence, ImageFormat, Motion, SynthSpec, TargetAnnotation, TargetModel, TargetShape,
};
use irsr::metrics::{local_cr, neighborhood_stats, psnr, NeighborhoodSpec};
use irsr::numerics::Tensor;

fn ramp(h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_fn(&[1, 1, h, w], |i| ((i[2] * w + i[3]) % 65536) as f64 / 65535.0)
}

#[test]
fn sixteen_bit_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let img = ramp(40, 37);
    for (ext, path) in [("png", dir.path().join("a.png")), ("pgm", dir.path().join("a.pgm"))] {
        save_image(&img, &path, BitDepth::Sixteen).unwrap();
        let back = load_image(&path).unwrap();
        assert_eq!(back, img, "{ext}");
    }
}

#[test]
fn eight_bit_full_scale_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.png");
    save_image(&Tensor::full(&[1, 1, 3, 4], 1.0), &p, BitDepth::Eight).unwrap();
    assert!(load_image(&p).unwrap().data().iter().all(|&v| v == 1.0));
    // Raw 8-bit file written outside the library.
    let raw = dir.path().join("raw.pgm");
    std::fs::write(&raw, [b"P5\n2 1\n255\n".as_slice(), &[255u8, 51]].concat()).unwrap();
    assert_eq!(load_image(&raw).unwrap().data(), &[1.0, 0.2]);
}

#[test]
fn sequence_round_trip_keeps_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec::preset("moving-square", 4).unwrap();
    let seq = synth_sequence(&spec).unwrap();
    save_sequence(&seq, dir.path(), BitDepth::Sixteen, ImageFormat::Png).unwrap();
    let back = load_sequence(dir.path()).unwrap();
    assert_eq!(back.len(), 7);
    let ann = back.annotations().unwrap();
    assert_eq!(ann.len(), 7);
    assert!(ann.iter().all(|a| a.len() == 1));
    assert_eq!(ann, seq.annotations().unwrap());
    for (a, b) in back.frames().iter().zip(seq.frames()) {
        assert!(a.max_abs_diff(b) <= 0.5 / 65535.0);
    }
}

#[test]
fn mixed_frame_sizes_are_rejected() {
    let frames = vec![Tensor::zeros(&[1, 1, 4, 4]), Tensor::zeros(&[1, 1, 4, 5])];
    assert!(FrameSequence::new(frames).is_err());
}

#[test]
fn degrade_shapes_and_annotations() {
    let hr = FrameSequence::new(vec![Tensor::full(&[1, 1, 256, 256], 0.4)])
        .unwrap()
        .with_annotations(vec![vec![TargetAnnotation::new(100.0, 60.0, 8.0, 8.0)]])
        .unwrap();
    let lr = degrade(&hr, 4).unwrap();
    assert_eq!(lr.size(), (64, 64));
    assert_eq!(lr.annotations().unwrap()[0][0], TargetAnnotation::new(25.0, 15.0, 2.0, 2.0));
}

#[test]
fn smooth_image_survives_degrade_and_upsample() {
    let img = Tensor::from_fn(&[1, 1, 128, 128], |i| {
        let (y, x) = (i[2] as f64, i[3] as f64);
        0.5 + 0.2 * (y / 21.0).sin() * (x / 17.0).cos() + 0.1 * ((x + y) / 40.0).sin()
    });
    let lr = degrade(&FrameSequence::new(vec![img.clone()]).unwrap(), 4).unwrap();
    let up = bicubic_upsample(lr.frame(0), 4).unwrap();
    // Border rows see the replicated edge; measure the interior.
    let crop = |t: &Tensor<f64>| Tensor::from_fn(&[1, 1, 96, 96], |i| t.at(0, 0, i[2] + 16, i[3] + 16));
    let db = psnr(&crop(&up), &crop(&img), 1.0).unwrap();
    assert!(db >= 40.0, "{db} dB");
}

#[test]
fn planted_contrast_matches_generator() {
    let (sigma, peak) = (0.02, 0.3);
    let spec = SynthSpec {
        height: 48,
        width: 48,
        frames: 6,
        background: Background {
            level: 0.3,
            noise_sigma: sigma,
            ..Default::default()
        },
        target: TargetModel {
            shape: TargetShape::Square,
            size: 3,
            peak,
            y: 20.0,
            x: 15.0,
        },
        motion: Motion { dy: 1.0, dx: 2.0 },
        seed: 11,
    };
    let seq = synth_sequence(&spec).unwrap();
    let nb = NeighborhoodSpec::new(3, 3, 6).unwrap();
    let tol = 3.0 * sigma / 3.0;
    for (f, ann) in seq.frames().iter().zip(seq.annotations().unwrap()) {
        let cr = local_cr(&neighborhood_stats(f, &ann[0], &nb).unwrap());
        assert!((cr - peak).abs() <= tol, "cr {cr}");
    }
}

#[test]
fn same_seed_same_sequence() {
    let a = synth_sequence(&SynthSpec::preset("clutter", 9).unwrap()).unwrap();
    let b = synth_sequence(&SynthSpec::preset("clutter", 9).unwrap()).unwrap();
    assert_eq!(a, b);
    let c = synth_sequence(&SynthSpec::preset("clutter", 10).unwrap()).unwrap();
    assert_ne!(a, c);
    assert_eq!(synth_sequence(&SynthSpec::preset("point-shift", 0).unwrap()).unwrap().len(), 2);
}
