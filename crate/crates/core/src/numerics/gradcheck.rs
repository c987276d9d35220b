//! Central finite-difference verification of tape gradients (64-bit only).

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step `h`.
    pub step: f64,
    /// Pass threshold on the worst relative error.
    pub tol: f64,
    /// Relative errors are computed as `|a − n| / max(|a|, |n|, floor)`, so gradients below
    /// `floor` are compared in absolute terms.
    pub floor: f64,
    /// Check at most this many randomly chosen elements per input (all when `None`).
    pub max_elements_per_input: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tol: 1e-4,
            floor: 1e-7,
            max_elements_per_input: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct InputReport {
    pub index: usize,
    /// Sampled elements, including skipped ones.
    pub checked: usize,
    /// Sampled elements whose probes crossed a ReLU kink.
    pub skipped: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    /// Flat index of the element with the worst relative error.
    pub worst_element: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub inputs: Vec<InputReport>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
}

fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Value and branch signature of `forward(inputs)`.
fn evaluate<F>(forward: &F, inputs: &[Tensor<f64>]) -> Result<(f64, Option<u64>)>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    tape.track_kinks();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.constant(t.clone())).collect();
    let out = forward(&mut tape, &vars)?;
    Ok((scalar_of(&tape, out)?, tape.kink_signature()))
}

fn scalar_of(tape: &Tape<f64>, out: Var) -> Result<f64> {
    let v = tape.value(out);
    if v.len() != 1 {
        return Err(Error::invalid(
            "grad_check",
            format!("forward must return a scalar, got shape {:?}", v.shape()),
        ));
    }
    Ok(v.data()[0])
}

/// Compares tape gradients of the scalar `forward(inputs)` against `(f(x+h) − f(x−h)) / 2h`.
///
/// An element whose `±h` probes land on a different ReLU branch pattern than the base point is
/// not differentiable within the step; it is counted in `skipped` instead of compared.
pub fn grad_check<F>(forward: F, inputs: &[Tensor<f64>], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    tape.track_kinks();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = forward(&mut tape, &vars)?;
    scalar_of(&tape, out)?;
    let base = tape.kink_signature();
    let grads = tape.backward(out)?;
    let analytic: Vec<Tensor<f64>> = vars.iter().map(|&v| grads.get(v)).collect();
    drop(tape);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut work = inputs.to_vec();
    let mut reports = Vec::with_capacity(inputs.len());
    for (i, input) in inputs.iter().enumerate() {
        let n = input.len();
        let mut elements: Vec<usize> = match opts.max_elements_per_input {
            Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
            _ => (0..n).collect(),
        };
        elements.sort_unstable();
        let mut report = InputReport {
            index: i,
            checked: elements.len(),
            skipped: 0,
            max_rel_err: 0.0,
            max_abs_err: 0.0,
            worst_element: elements.first().copied().unwrap_or(0),
        };
        for &e in &elements {
            let orig = input.data()[e];
            work[i].data_mut()[e] = orig + opts.step;
            let (plus, sig_plus) = evaluate(&forward, &work)?;
            work[i].data_mut()[e] = orig - opts.step;
            let (minus, sig_minus) = evaluate(&forward, &work)?;
            work[i].data_mut()[e] = orig;
            if sig_plus != base || sig_minus != base {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * opts.step);
            let a = analytic[i].data()[e];
            let rel = relative_error(a, numeric, opts.floor);
            report.max_abs_err = report.max_abs_err.max((a - numeric).abs());
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_element = e;
            }
        }
        reports.push(report);
    }
    let max_rel_err = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    let compared: usize = reports.iter().map(|r| r.checked - r.skipped).sum();
    Ok(GradCheckReport {
        inputs: reports,
        max_rel_err,
        tol: opts.tol,
        passed: max_rel_err <= opts.tol && compared > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let x = Tensor::new(&[2], vec![1.0, 2.0]).unwrap();
        let report = grad_check(
            |t, v| {
                let sq = t.mul(v[0], v[0])?;
                Ok(t.sum(sq))
            },
            &[x],
            &GradCheckOptions {
                tol: 1e-8,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let x = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let mut tape = Tape::new();
        let v = tape.param(x.clone());
        let c = tape.constant(Tensor::scalar(4.0));
        let zero = tape.scale(v, 0.0);
        let s = tape.sum(zero);
        let out = tape.add(s, c).unwrap();
        let g = tape.backward(out).unwrap().get(v);
        assert!(g.data().iter().all(|&d| d == 0.0));
        let report = grad_check(
            |t, v| {
                let z = t.scale(v[0], 0.0);
                Ok(t.sum(z))
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        // a deliberately broken op: forward doubles, backward claims identity
        let x = Tensor::new(&[2], vec![0.3, -0.4]).unwrap();
        let report = grad_check(
            |t, v| {
                let doubled = t.value(v[0]).scale(2.0);
                let y = t.record(doubled, &[v[0]], |g, _| vec![Some(g.clone())]);
                Ok(t.sum(y))
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed);
    }

    #[test]
    fn kink_crossings_are_skipped() {
        // x = 1e-6 lies inside the ±h band around the ReLU kink; the central difference there is 0.55
        let x = Tensor::new(&[2], vec![1e-6, 0.5]).unwrap();
        let report = grad_check(
            |t, v| {
                let r = t.relu(v[0]);
                Ok(t.sum(r))
            },
            &[x],
            &GradCheckOptions::default(),
        )
        .unwrap();
        assert_eq!(report.inputs[0].skipped, 1);
        assert!(report.passed, "{report:?}");
    }
}
