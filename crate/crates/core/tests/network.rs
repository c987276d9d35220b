use irsr::data::{synth_sequence, SynthSpec};
use irsr::network::{Checkpoint, Dataset, MoCoPnet, MoCoPnetCfg, TrainCfg, Trainer};
use irsr::numerics::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn clip(seed: u64) -> Dataset {
    let mut spec = SynthSpec::preset("moving-square", seed).unwrap();
    spec.height = 32;
    spec.width = 32;
    spec.frames = 5;
    spec.target.y = 16.0;
    spec.target.x = 16.0;
    Dataset::from_hr(&[synth_sequence(&spec).unwrap()], 3, 4).unwrap()
}

fn schedule(iterations: usize) -> TrainCfg {
    TrainCfg {
        iterations,
        halve_at: Some(vec![2, 4]),
        log_every: 1,
        seed: 5,
        ..TrainCfg::toy_overfit()
    }
}

fn cfg() -> MoCoPnetCfg {
    MoCoPnetCfg::toy().with_frames(3)
}

#[test]
fn output_is_four_times_larger() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (net, params) = MoCoPnet::init::<f64, _>(MoCoPnetCfg::toy(), &mut rng).unwrap();
    let frames = vec![Tensor::full(&[1, 1, 32, 32], 0.2); 7];
    assert_eq!(net.infer(&params, &frames).unwrap().shape(), &[1, 1, 128, 128]);
}

#[test]
fn identical_seeds_give_identical_histories() {
    let data = clip(2);
    let run = || {
        let mut t = Trainer::<f64>::new(cfg(), schedule(4)).unwrap();
        t.run(&data, |_| {}).unwrap();
        t.history.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.len(), 4);
    assert_eq!(a, b);
}

#[test]
fn learning_rate_halves_after_the_first_mark() {
    let t = TrainCfg {
        halve_at: None,
        ..TrainCfg::default()
    };
    let first = t.marks()[0];
    assert_eq!(first, 10_000);
    assert_eq!(t.lr_at(first - 1), t.lr);
    assert_eq!(t.lr_at(first), 0.5 * t.lr);
    let short = TrainCfg {
        iterations: 2000,
        ..TrainCfg::default()
    };
    assert_eq!(short.marks(), vec![200, 400, 1200]);
}

#[test]
fn resume_continues_the_run() {
    let data = clip(3);
    let mut whole = Trainer::<f64>::new(cfg(), schedule(6)).unwrap();
    whole.run(&data, |_| {}).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("half.ckpt");
    let mut first = Trainer::<f64>::new(cfg(), schedule(3)).unwrap();
    first.run(&data, |_| {}).unwrap();
    first.checkpoint().save(&path).unwrap();

    let mut second = Trainer::resume(Checkpoint::<f64>::load(&path).unwrap(), schedule(6)).unwrap();
    assert_eq!(second.iteration, 3);
    second.run(&data, |_| {}).unwrap();
    assert_eq!(second.iteration, 6);
    assert_eq!(second.history.first().unwrap().iteration, 3);
    let tail: Vec<u64> = whole.history[3..].iter().map(|r| r.loss.to_bits()).collect();
    assert_eq!(second.history.iter().map(|r| r.loss.to_bits()).collect::<Vec<_>>(), tail);
    assert_eq!(second.params, whole.params);
}
