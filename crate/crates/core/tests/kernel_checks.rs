use std::time::Instant;

use cardex_core::kernels::gradcheck::{central_difference, run_all, KernelSet, FAULTS};
use cardex_core::kernels::{
    adam_step, adamw_deltas, adamw_step, cce, cce_grad, ciou, dfl, OneHot, OptimizerState,
};
use cardex_core::metrics::iou;
use cardex_core::AbsBox;
use proptest::prelude::*;

#[test]
fn stock_kernels_pass_every_check() {
    let started = Instant::now();
    let reports = run_all(&KernelSet::default(), 2024, 100);
    for r in &reports {
        assert!(r.passed, "{}: {}", r.name, r.detail);
        assert_eq!(r.samples, 100);
    }
    let kernels: Vec<&str> = reports.iter().map(|r| r.kernel.as_str()).collect();
    for k in ["cce", "cce_grad", "dfl", "ciou_loss", "ciou", "adamw_step"] {
        assert!(kernels.contains(&k), "{k} not covered");
    }
    assert!(started.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn every_injected_fault_is_caught() {
    for fault in FAULTS {
        let reports = run_all(&KernelSet::with_fault(fault).unwrap(), 2024, 100);
        assert!(
            reports.iter().any(|r| !r.passed),
            "fault {fault} went unnoticed"
        );
    }
    assert!(KernelSet::with_fault("nope").is_none());
}

#[test]
fn cce_grad_matches_finite_differences_tightly() {
    let y = OneHot::new(2, 4).unwrap();
    let p = [0.1, 0.2, 0.3, 0.4];
    let g = cce_grad(&y, &p).unwrap();
    let n = central_difference(|x| cce(&y, x).unwrap(), &p, 1e-6);
    for (a, b) in g.iter().zip(&n) {
        assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
    }
    assert_eq!(g[0], 0.0);
    assert_eq!(g[3], 0.0);
}

#[test]
fn decay_contribution_is_exact_and_gradient_independent() {
    let mut s = OptimizerState::new(vec![1.5, -0.25, 3.0], 0.01, 0.05).unwrap();
    s.m = vec![0.1, -0.2, 0.3];
    s.v = vec![0.01, 0.02, 0.03];
    s.t = 4;
    let (_, a) = adamw_deltas(&s, &[0.5, 0.5, 0.5]).unwrap();
    let (_, b) = adamw_deltas(&s, &[-3.0, 0.0, 9.0]).unwrap();
    assert_eq!(a.decay, b.decay);
    for (d, th) in a.decay.iter().zip(&s.theta) {
        assert_eq!(*d, -(s.alpha * s.weight_decay * th));
    }
    // the adaptive part does not see weight decay
    let plain = OptimizerState {
        weight_decay: 0.0,
        ..s.clone()
    };
    assert_eq!(
        adamw_deltas(&plain, &[0.5, 0.5, 0.5]).unwrap().1.adaptive,
        a.adaptive
    );
}

#[test]
fn first_step_moves_by_learning_rate() {
    let s = OptimizerState::new(vec![0.0], 0.001, 0.0).unwrap();
    let n = adamw_step(&s, &[1.0]).unwrap();
    assert!((n.theta[0] + 0.001).abs() < 1e-9);
    assert_eq!(n.t, 1);
    assert_eq!(adam_step(&s, &[1.0]).unwrap(), n);
}

fn valid_box() -> impl Strategy<Value = AbsBox> {
    (0.0..50.0f64, 0.0..50.0f64, 0.1..30.0f64, 0.1..30.0f64)
        .prop_map(|(x, y, w, h)| AbsBox::new(x, y, x + w, y + h).unwrap())
}

proptest! {
    #[test]
    fn ciou_never_exceeds_iou(a in valid_box(), b in valid_box()) {
        let c = ciou(&a, &b);
        prop_assert!(c <= iou(&a, &b) + 1e-12);
        prop_assert!(c > -1.5 && c <= 1.0);
    }

    #[test]
    fn cce_is_nonnegative(raw in prop::collection::vec(0.01..1.0f64, 2..8), k in 0usize..8) {
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let y = OneHot::new(k % p.len(), p.len()).unwrap();
        prop_assert!(cce(&y, &p).unwrap() >= 0.0);
    }

    #[test]
    fn dfl_integer_target_is_log_loss(n in 2usize..10, t in 0usize..10, raw in prop::collection::vec(0.01..1.0f64, 11)) {
        let t = t % (n + 1);
        let s: f64 = raw[..=n].iter().sum();
        let q: Vec<f64> = raw[..=n].iter().map(|v| v / s).collect();
        prop_assert!((dfl(t as f64, &q).unwrap() + q[t].ln()).abs() < 1e-12);
    }

    #[test]
    fn adamw_is_deterministic(theta in prop::collection::vec(-5.0..5.0f64, 1..6), wd in 0.0..0.2f64) {
        let s = OptimizerState::new(theta.clone(), 0.01, wd).unwrap();
        let g: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
        prop_assert_eq!(adamw_step(&s, &g).unwrap(), adamw_step(&s, &g).unwrap());
    }
}
