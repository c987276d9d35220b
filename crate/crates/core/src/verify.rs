//! Finite-difference gradient suites for the differentiable components.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{MoCoPnet, MoCoPnetCfg};
use crate::numerics::{grad_check, Bound, GradCheckOptions, GradCheckReport, ParamStore, Tape, Tensor, Var};
use crate::prior_ops::{CdConv, Lsta, LstaCfg, ResidualGroup, ResidualGroupCfg};
use crate::rational::Rational;

/// Pass threshold for single operators.
pub const OPERATOR_TOL: f64 = 1e-4;
/// Pass threshold for the whole network.
pub const END_TO_END_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub checked: usize,
    /// Elements whose probes crossed a ReLU kink.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub component: String,
    pub seed: u64,
    pub tol: f64,
    pub max_rel_err: f64,
    pub passed: bool,
    pub tensors: Vec<TensorCheck>,
}

impl SuiteReport {
    fn new(component: &str, seed: u64, tol: f64) -> Self {
        Self {
            component: component.to_string(),
            seed,
            tol,
            max_rel_err: 0.0,
            passed: true,
            tensors: Vec::new(),
        }
    }

    fn absorb(&mut self, case: &str, names: &[String], r: &GradCheckReport) {
        for input in &r.inputs {
            self.tensors.push(TensorCheck {
                name: format!("{case}/{}", names[input.index]),
                checked: input.checked,
                skipped: input.skipped,
                max_rel_err: input.max_rel_err,
                max_abs_err: input.max_abs_err,
            });
        }
        self.max_rel_err = self.max_rel_err.max(r.max_rel_err);
        self.passed &= r.passed;
    }
}

/// Components accepted by [`run`].
pub const TARGETS: [&str; 4] = ["cdconv", "lsta", "residual", "net-toy"];

/// Runs the named suite.
pub fn run(target: &str, seed: u64) -> Result<SuiteReport> {
    match target {
        "cdconv" => cdconv(seed),
        "lsta" => lsta(seed),
        "residual" => residual(seed),
        "net-toy" => net_toy(seed),
        other => Err(Error::invalid(
            "gradcheck",
            format!("unknown target {other:?}; expected one of {}", TARGETS.join(", ")),
        )),
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn opts(tol: f64, per_input: Option<usize>, seed: u64) -> GradCheckOptions {
    GradCheckOptions {
        tol,
        max_elements_per_input: per_input,
        seed,
        ..Default::default()
    }
}

/// Inputs first, then the store's tensors; names align with the grad-check input order.
fn with_params(inputs: Vec<(&str, Tensor<f64>)>, store: &ParamStore<f64>) -> (Vec<Tensor<f64>>, Vec<String>) {
    let mut names: Vec<String> = inputs.iter().map(|(n, _)| n.to_string()).collect();
    let mut tensors: Vec<Tensor<f64>> = inputs.into_iter().map(|(_, t)| t).collect();
    for (n, t) in store.iter() {
        names.push(n.to_string());
        tensors.push(t.clone());
    }
    (tensors, names)
}

fn sum_of_squares(t: &mut Tape<f64>, y: Var) -> Result<Var> {
    let y2 = t.mul(y, y)?;
    Ok(t.sum(y2))
}

pub fn cdconv(seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("cdconv", seed, OPERATOR_TOL);
    for (k, theta) in [(3, 0.7), (3, 0.0), (3, 1.0), (5, 0.5), (1, 0.7)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let layer = CdConv::new(&mut store, &mut rng, "cd", 3, 4, k, theta)?;
        let (inputs, names) = with_params(vec![("input", random(&[2, 3, 6, 7], &mut rng))], &store);
        let r = grad_check(
            |t, v| {
                let y = layer.forward(t, &Bound::from_vars(v[1..].to_vec()), v[0])?;
                sum_of_squares(t, y)
            },
            &inputs,
            &opts(OPERATOR_TOL, None, seed),
        )?;
        report.absorb(&format!("k{k}_theta{theta}"), &names, &r);
    }
    Ok(report)
}

pub fn lsta(seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("lsta", seed, OPERATOR_TOL);
    let dilations = [
        Rational::integer(1),
        Rational::integer(2),
        Rational::integer(3),
        Rational::new(1, 2)?,
        Rational::new(1, 3)?,
        Rational::new(1, 4)?,
    ];
    for dila in dilations {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let m = Lsta::new(&mut store, &mut rng, "lsta", 8, LstaCfg::new(3, dila, 8)?)?;
        let (inputs, names) = with_params(
            vec![("ref", random(&[1, 8, 6, 6], &mut rng)), ("nbr", random(&[1, 8, 6, 6], &mut rng))],
            &store,
        );
        let r = grad_check(
            |t, v| {
                let y = m.forward(t, &Bound::from_vars(v[2..].to_vec()), v[0], v[1])?;
                sum_of_squares(t, y)
            },
            &inputs,
            &opts(OPERATOR_TOL, Some(48), seed),
        )?;
        report.absorb(&format!("dila{dila}"), &names, &r);
    }
    Ok(report)
}

pub fn residual(seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("residual", seed, OPERATOR_TOL);
    for cd in [false, true] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let cfg = ResidualGroupCfg {
            blocks: 2,
            convs: 2,
            growth: 3,
            channels: 4,
            central_difference: cd,
        };
        let g = ResidualGroup::new(&mut store, &mut rng, "rg", cfg)?;
        let (inputs, names) = with_params(vec![("input", random(&[1, 4, 5, 5], &mut rng))], &store);
        let r = grad_check(
            |t, v| {
                let y = g.forward(t, &Bound::from_vars(v[1..].to_vec()), v[0])?;
                sum_of_squares(t, y)
            },
            &inputs,
            &opts(OPERATOR_TOL, Some(24), seed),
        )?;
        report.absorb(if cd { "cd" } else { "plain" }, &names, &r);
    }
    Ok(report)
}

/// Toy network (C = 16, T = 5) on 16×16 frames against an MSE loss.
pub fn net_toy(seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("net-toy", seed, END_TO_END_TOL);
    let cfg = MoCoPnetCfg::toy().with_frames(5);
    let s = cfg.scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (net, store) = MoCoPnet::init::<f64, _>(cfg.clone(), &mut rng)?;
    let frames: Vec<(String, Tensor<f64>)> = (0..cfg.frames)
        .map(|i| (format!("frame{i}"), Tensor::from_fn(&[1, 1, 16, 16], |_| rng.random::<f64>())))
        .collect();
    let hr = Tensor::from_fn(&[1, 1, 16 * s, 16 * s], |_| rng.random::<f64>());
    let n = frames.len();
    let (inputs, names) = with_params(frames.iter().map(|(k, t)| (k.as_str(), t.clone())).collect(), &store);
    let r = grad_check(
        |t, v| {
            let sr = net.forward(t, &Bound::from_vars(v[n..].to_vec()), &v[..n])?;
            let target = t.constant(hr.clone());
            t.mse(sr, target)
        },
        &inputs,
        &opts(END_TO_END_TOL, Some(4), seed),
    )?;
    report.absorb("net", &names, &r);
    Ok(report)
}
