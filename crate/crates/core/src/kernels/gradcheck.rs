//! Randomized checks of the kernels against finite differences and their
//! algebraic properties. Shared by the test suite and `cardex kernel-check`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    adam_step, adamw_deltas, adamw_step, cce, cce_grad, ciou, ciou_loss, ciou_loss_grad, dfl,
    dfl_grad, OneHot, OptimizerState,
};
use crate::error::Result;
use crate::metrics::iou;
use crate::types::AbsBox;

/// Step for central differences.
pub const FD_STEP: f64 = 1e-6;
/// Relative-error budget for analytic vs numeric gradients.
pub const GRAD_TOLERANCE: f64 = 1e-5;
/// Allowed rounding, in machine epsilons, when the decay term is recovered
/// by differencing two full optimizer steps.
pub const DECAY_EPS_UNITS: f64 = 2.0;

pub type CceGradFn = fn(&OneHot, &[f64]) -> Result<Vec<f64>>;
pub type DflGradFn = fn(f64, &[f64]) -> Result<Vec<f64>>;
pub type CiouGradFn = fn(&AbsBox, &AbsBox) -> [f64; 8];
pub type StepFn = fn(&OptimizerState, &[f64]) -> Result<OptimizerState>;

/// The implementations under test. Swappable so the harness itself can be
/// shown to catch a broken kernel.
#[derive(Clone, Copy)]
pub struct KernelSet {
    pub cce_grad: CceGradFn,
    pub dfl_grad: DflGradFn,
    pub ciou_loss_grad: CiouGradFn,
    pub adamw_step: StepFn,
}

impl Default for KernelSet {
    fn default() -> Self {
        KernelSet {
            cce_grad,
            dfl_grad,
            ciou_loss_grad,
            adamw_step,
        }
    }
}

/// Names accepted by [`KernelSet::with_fault`].
pub const FAULTS: &[&str] = &["cce_grad", "dfl_grad", "ciou_loss_grad", "adamw_step"];

fn faulty_cce_grad(y: &OneHot, p: &[f64]) -> Result<Vec<f64>> {
    Ok(cce_grad(y, p)?.into_iter().map(|g| g * 0.5).collect())
}

fn faulty_dfl_grad(t: f64, q: &[f64]) -> Result<Vec<f64>> {
    // forgets the upper neighbour
    let (i, _) = super::dfl_support(t, q.len())?;
    let mut g = dfl_grad(t, q)?;
    if i + 1 < g.len() {
        g[i + 1] = 0.0;
    }
    Ok(g)
}

fn faulty_ciou_grad(a: &AbsBox, b: &AbsBox) -> [f64; 8] {
    // constant bias on one coordinate
    let mut g = ciou_loss_grad(a, b);
    g[0] += 1e-3;
    g
}

fn faulty_adamw_step(s: &OptimizerState, g: &[f64]) -> Result<OptimizerState> {
    // L2 regularization folded into the gradient: coupled, not decoupled
    let coupled: Vec<f64> = g
        .iter()
        .zip(&s.theta)
        .map(|(g, th)| g + s.weight_decay * th)
        .collect();
    let plain = OptimizerState {
        weight_decay: 0.0,
        ..s.clone()
    };
    let mut next = adam_step(&plain, &coupled)?;
    next.weight_decay = s.weight_decay;
    Ok(next)
}

impl KernelSet {
    pub fn with_fault(name: &str) -> Option<Self> {
        let mut k = KernelSet::default();
        match name {
            "cce_grad" => k.cce_grad = faulty_cce_grad,
            "dfl_grad" => k.dfl_grad = faulty_dfl_grad,
            "ciou_loss_grad" => k.ciou_loss_grad = faulty_ciou_grad,
            "adamw_step" => k.adamw_step = faulty_adamw_step,
            _ => return None,
        }
        Some(k)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub kernel: String,
    pub passed: bool,
    pub samples: usize,
    /// Largest observed error: relative for gradients, machine epsilons for
    /// the decay check, absolute otherwise.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// Central differences of `f` at `x`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|)` in the Euclidean norm; absolute when both are
/// essentially zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale < 1e-8 {
        diff
    } else {
        diff / scale
    }
}

fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// A box pair away from every min/max tie, where the loss is smooth.
fn smooth_box_pair(rng: &mut impl Rng) -> (AbsBox, AbsBox) {
    const MARGIN: f64 = 1e-3;
    loop {
        let mut draw = || {
            let x = rng.random_range(0.0..8.0);
            let y = rng.random_range(0.0..8.0);
            let w = rng.random_range(0.5..5.0);
            let h = rng.random_range(0.5..5.0);
            AbsBox::new(x, y, x + w, y + h).expect("positive extent")
        };
        let (a, b) = (draw(), draw());
        let gaps = [
            a.x1 - b.x1,
            a.x2 - b.x2,
            a.y1 - b.y1,
            a.y2 - b.y2,
            a.x2 - b.x1,
            b.x2 - a.x1,
            a.y2 - b.y1,
            b.y2 - a.y1,
        ];
        if gaps.iter().all(|g| g.abs() > MARGIN) {
            return (a, b);
        }
    }
}

fn boxes_from(x: &[f64]) -> Option<(AbsBox, AbsBox)> {
    Some((
        AbsBox::new(x[0], x[1], x[2], x[3]).ok()?,
        AbsBox::new(x[4], x[5], x[6], x[7]).ok()?,
    ))
}

fn random_state(rng: &mut impl Rng, n: usize, weight_decay: f64) -> OptimizerState {
    let mut s = OptimizerState::new(
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
        rng.random_range(1e-4..1e-1),
        weight_decay,
    )
    .expect("valid optimizer state");
    s.m = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    s.v = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    s.t = rng.random_range(0..50);
    s
}

struct Tally {
    worst: f64,
    failures: usize,
    first_failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            worst: 0.0,
            failures: 0,
            first_failure: None,
        }
    }

    fn record(&mut self, err: f64, ok: bool, what: impl FnOnce() -> String) {
        if err.is_nan() || err > self.worst {
            self.worst = err;
        }
        if !ok || err.is_nan() {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    fn report(self, name: &str, kernel: &str, samples: usize, tolerance: f64) -> CheckReport {
        let detail = match self.first_failure {
            Some(f) => format!("{} of {samples} failed; first: {f}", self.failures),
            None => format!("{samples} samples"),
        };
        CheckReport {
            name: name.to_string(),
            kernel: kernel.to_string(),
            passed: self.failures == 0,
            samples,
            worst: self.worst,
            tolerance,
            detail,
        }
    }
}

fn grad_check(t: &mut Tally, analytic: &[f64], numeric: &[f64], at: impl FnOnce() -> String) {
    let err = relative_error(analytic, numeric);
    t.record(err, err <= GRAD_TOLERANCE, || {
        format!("{} (rel err {err:.3e})", at())
    });
}

fn check_cce(k: &KernelSet, rng: &mut ChaCha8Rng, samples: usize) -> Vec<CheckReport> {
    let mut grad = Tally::new();
    let mut nonneg = Tally::new();
    for _ in 0..samples {
        let len = rng.random_range(2..=10);
        let y = OneHot::new(rng.random_range(0..len), len).expect("index in range");
        let p = random_distribution(rng, len);
        let analytic = match (k.cce_grad)(&y, &p) {
            Ok(g) => g,
            Err(e) => {
                grad.record(f64::NAN, false, || e.to_string());
                continue;
            }
        };
        let numeric = central_difference(|x| cce(&y, x).expect("same length"), &p, FD_STEP);
        grad_check(&mut grad, &analytic, &numeric, || {
            format!("k={} p={p:?}", y.index())
        });
        let loss = cce(&y, &p).expect("same length");
        nonneg.record(-loss.min(0.0), loss >= 0.0, || format!("loss {loss}"));
    }
    vec![
        grad.report(
            "cce_grad matches finite differences",
            "cce_grad",
            samples,
            GRAD_TOLERANCE,
        ),
        nonneg.report("cce is non-negative", "cce", samples, 0.0),
    ]
}

fn check_dfl(k: &KernelSet, rng: &mut ChaCha8Rng, samples: usize) -> Vec<CheckReport> {
    let mut grad = Tally::new();
    for s in 0..samples {
        let n = rng.random_range(2..=16);
        let q = random_distribution(rng, n + 1);
        let target = if s % 4 == 0 {
            rng.random_range(0..=n) as f64
        } else {
            rng.random_range(0.0..n as f64)
        };
        let analytic = match (k.dfl_grad)(target, &q) {
            Ok(g) => g,
            Err(e) => {
                grad.record(f64::NAN, false, || e.to_string());
                continue;
            }
        };
        let numeric = central_difference(|x| dfl(target, x).expect("target in range"), &q, FD_STEP);
        grad_check(&mut grad, &analytic, &numeric, || {
            format!("target={target} n={n}")
        });
    }
    vec![grad.report(
        "dfl gradient matches finite differences",
        "dfl",
        samples,
        GRAD_TOLERANCE,
    )]
}

fn check_ciou(k: &KernelSet, rng: &mut ChaCha8Rng, samples: usize) -> Vec<CheckReport> {
    let mut grad = Tally::new();
    let mut bound = Tally::new();
    for _ in 0..samples {
        let (a, b) = smooth_box_pair(rng);
        let analytic = (k.ciou_loss_grad)(&a, &b);
        let x = [a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2];
        let numeric = central_difference(
            |x| {
                let (a, b) = boxes_from(x).expect("perturbation keeps extent positive");
                ciou_loss(&a, &b)
            },
            &x,
            FD_STEP,
        );
        grad_check(&mut grad, &analytic, &numeric, || format!("{a:?} vs {b:?}"));
        let (c, i) = (ciou(&a, &b), iou(&a, &b));
        let excess = (c - i).max(0.0);
        bound.record(excess, c <= i && c > -1.5, || format!("ciou {c} iou {i}"));
    }
    vec![
        grad.report(
            "ciou_loss gradient matches finite differences",
            "ciou_loss",
            samples,
            GRAD_TOLERANCE,
        ),
        bound.report("ciou <= iou and ciou > -1.5", "ciou", samples, 0.0),
    ]
}

fn check_adamw(k: &KernelSet, rng: &mut ChaCha8Rng, samples: usize) -> Vec<CheckReport> {
    let mut plain = Tally::new();
    let mut decoupled = Tally::new();
    let mut deterministic = Tally::new();
    for _ in 0..samples {
        let n = rng.random_range(1..=8);
        let grad: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();

        let s0 = random_state(rng, n, 0.0);
        let ours = (k.adamw_step)(&s0, &grad);
        let reference = adam_step(&s0, &grad).expect("valid state");
        let same = ours.as_ref().is_ok_and(|o| {
            o.theta
                .iter()
                .zip(&reference.theta)
                .all(|(a, b)| a.to_bits() == b.to_bits())
                && o.m == reference.m
                && o.v == reference.v
                && o.t == reference.t
        });
        plain.record(if same { 0.0 } else { 1.0 }, same, || {
            format!(
                "theta {:?} vs adam {:?}",
                ours.as_ref().map(|o| &o.theta),
                reference.theta
            )
        });

        // Differencing two runs that differ only in weight decay isolates
        // the decay contribution; it must be -alpha * wd * theta_t.
        let wd = rng.random_range(1e-4..0.1);
        let with = OptimizerState {
            weight_decay: wd,
            ..s0.clone()
        };
        let (Ok(a), Ok(b)) = ((k.adamw_step)(&with, &grad), (k.adamw_step)(&s0, &grad)) else {
            decoupled.record(f64::NAN, false, || "step failed".into());
            continue;
        };
        let (_, deltas) = adamw_deltas(&with, &grad).expect("valid state");
        let mut worst: f64 = 0.0;
        let mut ok = true;
        for i in 0..n {
            let expected = -(with.alpha * wd * with.theta[i]);
            // The split itself is exact.
            ok &= deltas.decay[i].to_bits() == expected.to_bits();
            // Reassembled in floating point, the difference of two runs may
            // only be off by the rounding of one addition and one subtraction.
            // Measured in machine epsilons of the largest magnitude involved.
            let observed = a.theta[i] - b.theta[i];
            let scale = a.theta[i].abs().max(b.theta[i].abs()).max(expected.abs());
            let err = (observed - expected).abs();
            let eps_units = if err == 0.0 {
                0.0
            } else {
                err / (f64::EPSILON * scale)
            };
            ok &= eps_units <= DECAY_EPS_UNITS;
            worst = worst.max(eps_units);
        }
        decoupled.record(worst, ok, || format!("wd={wd} theta={:?}", with.theta));

        let again = (k.adamw_step)(&with, &grad).expect("succeeded above");
        let same = again == a;
        deterministic.record(if same { 0.0 } else { 1.0 }, same, || {
            "outputs differ".into()
        });
    }
    vec![
        plain.report(
            "adamw_step with wd=0 is bit-identical to Adam",
            "adamw_step",
            samples,
            0.0,
        ),
        decoupled.report(
            "adamw_step decay contribution is -alpha*wd*theta",
            "adamw_step",
            samples,
            DECAY_EPS_UNITS,
        ),
        deterministic.report("adamw_step is deterministic", "adamw_step", samples, 0.0),
    ]
}

/// Runs every check with `samples` random points each.
pub fn run_all(kernels: &KernelSet, seed: u64, samples: usize) -> Vec<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = check_cce(kernels, &mut rng, samples);
    out.extend(check_dfl(kernels, &mut rng, samples));
    out.extend(check_ciou(kernels, &mut rng, samples));
    out.extend(check_adamw(kernels, &mut rng, samples));
    out
}
