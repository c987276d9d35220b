use irsr::detectors::ipi::ipi;
use irsr::detectors::segment::segment;
use irsr::detectors::{detect, Detector, DetectorParams, Resolution};
use irsr::numerics::Tensor;

fn background(h: usize, w: usize) -> Tensor<f64> {
    Tensor::from_fn(&[1, 1, h, w], |i| (0.3 + 0.03 * (i[2] as f64 / 13.0).cos()) * (0.7 + 0.05 * (i[3] as f64 / 19.0).sin()))
}

fn with_target(mut img: Tensor<f64>, y: usize, x: usize, contrast: f64) -> Tensor<f64> {
    for dy in 0..3 {
        for dx in 0..3 {
            let v = img.at(0, 0, y + dy - 1, x + dx - 1) + if (dy, dx) == (1, 1) { contrast } else { 0.6 * contrast };
            img.set(&[0, 0, y + dy - 1, x + dx - 1], v);
        }
    }
    img
}

fn argmax_yx(t: &Tensor<f64>) -> (usize, usize) {
    let k = t.argmax();
    (k / t.hw().1, k % t.hw().1)
}

#[test]
fn every_detector_finds_a_planted_target() {
    let img = with_target(background(64, 64), 30, 22, 80.0 / 255.0);
    let mut params = DetectorParams::preset(Resolution::Hr);
    params.ipi.block = 15;
    params.ipi.stride = 3;
    for d in Detector::ALL {
        let r = detect(&img, d, &params).unwrap();
        let (y, x) = argmax_yx(&r.target_image);
        assert!(y.abs_diff(30) <= 1 && x.abs_diff(22) <= 1, "{d}: ({y}, {x})");
        assert!(r.converged, "{d}");
        let cands = r.candidates(0.5 * r.target_image.data()[r.target_image.argmax()], 1);
        assert!(!cands.is_empty(), "{d}");
        assert!((cands[0].x - 22.0).abs() <= 1.5 && (cands[0].y - 30.0).abs() <= 1.5, "{d}");
    }
}

#[test]
fn rank_one_background_has_empty_sparse_part() {
    let u: Vec<f64> = (0..60).map(|y| 40.0 + 20.0 * (y as f64 / 9.0).sin()).collect();
    let v: Vec<f64> = (0..60).map(|x| 1.0 + 0.5 * (x as f64 / 14.0).cos()).collect();
    let img = Tensor::from_fn(&[1, 1, 60, 60], |i| u[i[2]] * v[i[3]]);
    let mut p = DetectorParams::preset(Resolution::Lr).ipi;
    p.block = 12;
    p.stride = 4;
    let r = ipi(&img, &p).unwrap();
    let rel = r.model.e.norm_fro() / r.model.d.norm_fro();
    assert!(rel <= 1e-5, "{rel}");
    assert!(r.converged && r.residual <= 1e-7);
}

#[test]
fn constant_images_give_empty_responses() {
    let img = Tensor::full(&[1, 1, 40, 40], 0.5);
    let mut params = DetectorParams::preset(Resolution::Lr);
    params.ipi.block = 10;
    for d in [Detector::Tophat, Detector::Ipi] {
        let r = detect(&img, d, &params).unwrap();
        assert!(r.target_image.data().iter().all(|v| v.abs() <= 1e-6), "{d}");
    }
    let r = detect(&img, Detector::Ilcm, &params).unwrap();
    // Saliency of a flat field is the field value itself (on the 0..255 scale).
    assert!((r.target_image.at(0, 0, 20, 20) - 127.5).abs() <= 1e-9);
}

#[test]
fn candidates_are_sorted_by_score() {
    let mut img = Tensor::zeros(&[1, 1, 20, 20]);
    for (y, x, v) in [(3, 3, 0.5), (10, 15, 0.9), (16, 4, 0.7)] {
        img.set(&[0, 0, y, x], v);
        img.set(&[0, 0, y, x + 1], v / 2.0);
    }
    let c = segment(&img, 0.1, 1);
    let scores: Vec<f64> = c.iter().map(|c| c.score).collect();
    assert_eq!(scores, vec![0.9, 0.7, 0.5]);
    // Intensity-weighted centroid sits a third of the way to the half-weight neighbour.
    assert!((c[0].x - (15.0 + 1.0 / 3.0)).abs() <= 1e-12);
    assert!(segment(&img, 1.0, 1).is_empty());
    assert_eq!(segment(&img, 0.1, 3).len(), 0);
}
