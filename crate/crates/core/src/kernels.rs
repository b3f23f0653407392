//! Loss and optimizer kernels used to train the field detector, written as
//! plain functions over `f64` slices so they can be checked against
//! finite differences. No autodiff: every gradient is derived by hand.

pub mod gradcheck;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::AbsBox;

/// Lower clamp applied to probabilities before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

#[inline]
fn safe_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// Probabilities over categories (or bins), summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("probability vector is empty"));
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Range("probability outside [0, 1]".into()));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Range(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(ProbabilityVector(p))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("probability vector is empty"));
        }
        Ok(ProbabilityVector(vec![1.0 / k as f64; k]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for ProbabilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OneHot {
    index: usize,
    len: usize,
}

impl OneHot {
    pub fn new(index: usize, len: usize) -> Result<Self> {
        if index >= len {
            return Err(Error::Range(format!(
                "one-hot index {index} >= length {len}"
            )));
        }
        Ok(OneHot { index, len })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Shape { expected, actual });
    }
    Ok(())
}

/// Categorical cross-entropy `-sum y_true * ln(y_pred)`, i.e. `-ln p_k`.
pub fn cce(y_true: &OneHot, y_pred: &[f64]) -> Result<f64> {
    check_len(y_true.len, y_pred.len())?;
    Ok(-safe_ln(y_pred[y_true.index]))
}

/// `dL/dp_i = -[i == k] / p_k` with respect to the probabilities themselves.
pub fn cce_grad(y_true: &OneHot, y_pred: &[f64]) -> Result<Vec<f64>> {
    check_len(y_true.len, y_pred.len())?;
    let mut g = vec![0.0; y_pred.len()];
    let p = y_pred[y_true.index];
    if p > LOG_FLOOR {
        g[y_true.index] = -1.0 / p;
    }
    Ok(g)
}

fn dfl_support(target: f64, bins: usize) -> Result<(usize, f64)> {
    if bins == 0 {
        return Err(Error::invalid("distribution has no bins"));
    }
    let n = (bins - 1) as f64;
    if !(0.0..=n).contains(&target) {
        return Err(Error::Range(format!("target {target} outside [0, {n}]")));
    }
    let lo = target.floor();
    Ok((lo as usize, target - lo))
}

/// Distribution focal loss: cross-entropy against the two bins bracketing a
/// continuous target, weighted by proximity. `q` is the distribution over
/// bins `0..=n`.
pub fn dfl(target: f64, q: &[f64]) -> Result<f64> {
    let (i, frac) = dfl_support(target, q.len())?;
    if frac == 0.0 {
        return Ok(-safe_ln(q[i]));
    }
    Ok(-((1.0 - frac) * safe_ln(q[i]) + frac * safe_ln(q[i + 1])))
}

/// Gradient of [`dfl`] with respect to `q`.
pub fn dfl_grad(target: f64, q: &[f64]) -> Result<Vec<f64>> {
    let (i, frac) = dfl_support(target, q.len())?;
    let mut g = vec![0.0; q.len()];
    let mut put = |j: usize, w: f64| {
        if q[j] > LOG_FLOOR {
            g[j] += -w / q[j];
        }
    };
    put(i, 1.0 - frac);
    if frac > 0.0 {
        put(i + 1, frac);
    }
    Ok(g)
}

const ASPECT_K: f64 = 4.0 / (PI * PI);

/// Complete IoU: IoU minus a normalized center-distance penalty and an
/// aspect-ratio consistency penalty. Lies in `(-1.5, 1]`.
pub fn ciou(a: &AbsBox, b: &AbsBox) -> f64 {
    ciou_parts(a, b).value
}

pub fn ciou_loss(a: &AbsBox, b: &AbsBox) -> f64 {
    1.0 - ciou(a, b)
}

struct CiouParts {
    value: f64,
    iou: f64,
    rho2: f64,
    c2: f64,
    v: f64,
}

fn ciou_parts(a: &AbsBox, b: &AbsBox) -> CiouParts {
    let (wa, ha, wb, hb) = (a.width(), a.height(), b.width(), b.height());
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = wa * ha + wb * hb - inter;
    let iou = inter / union;

    let dx = (a.x1 + a.x2 - b.x1 - b.x2) / 2.0;
    let dy = (a.y1 + a.y2 - b.y1 - b.y2) / 2.0;
    let rho2 = dx * dx + dy * dy;
    let cw = a.x2.max(b.x2) - a.x1.min(b.x1);
    let ch = a.y2.max(b.y2) - a.y1.min(b.y1);
    let c2 = cw * cw + ch * ch;

    let dt = (wb / hb).atan() - (wa / ha).atan();
    let v = ASPECT_K * dt * dt;
    let alpha = if v == 0.0 { 0.0 } else { v / ((1.0 - iou) + v) };
    CiouParts {
        value: iou - rho2 / c2 - alpha * v,
        iou,
        rho2,
        c2,
        v,
    }
}

/// Gradient of [`ciou_loss`] with respect to
/// `[a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2]`, including the
/// dependence of the trade-off weight on IoU and aspect mismatch.
/// Undefined exactly on the kinks of min/max (ties between edges).
pub fn ciou_loss_grad(a: &AbsBox, b: &AbsBox) -> [f64; 8] {
    const AX1: usize = 0;
    const AY1: usize = 1;
    const AX2: usize = 2;
    const AY2: usize = 3;
    const BX1: usize = 4;
    const BY1: usize = 5;
    const BX2: usize = 6;
    const BY2: usize = 7;

    let p = ciou_parts(a, b);
    let (wa, ha, wb, hb) = (a.width(), a.height(), b.width(), b.height());

    // Outer derivatives of ciou = iou - rho2/c2 - v^2 / (1 - iou + v).
    let (d_iou, d_v) = if p.v == 0.0 {
        (1.0, 0.0)
    } else {
        let d = 1.0 - p.iou + p.v;
        (1.0 - p.v * p.v / (d * d), -p.v * (2.0 * d - p.v) / (d * d))
    };
    let d_rho2 = -1.0 / p.c2;
    let d_c2 = p.rho2 / (p.c2 * p.c2);

    let mut g = [0.0; 8];

    // IoU = I / (Aa + Ab - I)
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    let inter = iw.max(0.0) * ih.max(0.0);
    let union = wa * ha + wb * hb - inter;
    let d_inter = d_iou * (union + inter) / (union * union);
    let d_area = d_iou * (-inter / (union * union));
    g[AX1] += -ha * d_area;
    g[AX2] += ha * d_area;
    g[AY1] += -wa * d_area;
    g[AY2] += wa * d_area;
    g[BX1] += -hb * d_area;
    g[BX2] += hb * d_area;
    g[BY1] += -wb * d_area;
    g[BY2] += wb * d_area;
    if iw > 0.0 && ih > 0.0 {
        let (gx, gy) = (d_inter * ih, d_inter * iw);
        g[if a.x2 < b.x2 { AX2 } else { BX2 }] += gx;
        g[if a.x1 > b.x1 { AX1 } else { BX1 }] -= gx;
        g[if a.y2 < b.y2 { AY2 } else { BY2 }] += gy;
        g[if a.y1 > b.y1 { AY1 } else { BY1 }] -= gy;
    }

    // rho2 = dx^2 + dy^2 with dx = (a.x1 + a.x2 - b.x1 - b.x2) / 2
    let dx = (a.x1 + a.x2 - b.x1 - b.x2) / 2.0;
    let dy = (a.y1 + a.y2 - b.y1 - b.y2) / 2.0;
    for (i, s) in [
        (AX1, dx),
        (AX2, dx),
        (BX1, -dx),
        (BX2, -dx),
        (AY1, dy),
        (AY2, dy),
        (BY1, -dy),
        (BY2, -dy),
    ] {
        g[i] += d_rho2 * s;
    }

    // c2 = cw^2 + ch^2 over the enclosing box
    let cw = a.x2.max(b.x2) - a.x1.min(b.x1);
    let ch = a.y2.max(b.y2) - a.y1.min(b.y1);
    g[if a.x2 > b.x2 { AX2 } else { BX2 }] += d_c2 * 2.0 * cw;
    g[if a.x1 < b.x1 { AX1 } else { BX1 }] -= d_c2 * 2.0 * cw;
    g[if a.y2 > b.y2 { AY2 } else { BY2 }] += d_c2 * 2.0 * ch;
    g[if a.y1 < b.y1 { AY1 } else { BY1 }] -= d_c2 * 2.0 * ch;

    // v = k (atan(wb/hb) - atan(wa/ha))^2
    let dt = (wb / hb).atan() - (wa / ha).atan();
    let dv_dtb = d_v * 2.0 * ASPECT_K * dt;
    let (na, nb) = (wa * wa + ha * ha, wb * wb + hb * hb);
    // d atan(w/h) / dw = h / (w^2 + h^2), / dh = -w / (w^2 + h^2)
    let (ta_w, ta_h) = (ha / na, -wa / na);
    let (tb_w, tb_h) = (hb / nb, -wb / nb);
    g[AX2] += -dv_dtb * ta_w;
    g[AX1] -= -dv_dtb * ta_w;
    g[AY2] += -dv_dtb * ta_h;
    g[AY1] -= -dv_dtb * ta_h;
    g[BX2] += dv_dtb * tb_w;
    g[BX1] -= dv_dtb * tb_w;
    g[BY2] += dv_dtb * tb_h;
    g[BY1] -= dv_dtb * tb_h;

    // loss = 1 - ciou
    g.map(|v| -v)
}

/// Parameters plus first/second moment estimates for AdamW.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimizerState {
    /// Zeroed moments with the usual defaults `beta1 = 0.9`,
    /// `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(theta: Vec<f64>, alpha: f64, weight_decay: f64) -> Result<Self> {
        let n = theta.len();
        let s = OptimizerState {
            theta,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            alpha,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.theta.len(), self.m.len())?;
        check_len(self.theta.len(), self.v.len())?;
        let ok = self.alpha > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if !ok {
            return Err(Error::invalid(
                "optimizer needs alpha > 0, beta in [0, 1), eps > 0, weight_decay >= 0",
            ));
        }
        Ok(())
    }
}

/// The two additive pieces of one AdamW update.
#[derive(Clone, Debug, PartialEq)]
pub struct StepDeltas {
    /// `-alpha * m_hat / (sqrt(v_hat) + eps)`: depends on the gradient only.
    pub adaptive: Vec<f64>,
    /// `-alpha * weight_decay * theta`: depends on the parameters only.
    pub decay: Vec<f64>,
}

/// Advances the moments and returns the state (parameters not yet moved)
/// together with the update split into its adaptive and decay parts.
pub fn adamw_deltas(state: &OptimizerState, grad: &[f64]) -> Result<(OptimizerState, StepDeltas)> {
    state.validate()?;
    check_len(state.theta.len(), grad.len())?;
    let mut next = state.clone();
    next.t += 1;
    let t = next.t as i32;
    let bc1 = 1.0 - state.beta1.powi(t);
    let bc2 = 1.0 - state.beta2.powi(t);
    let mut adaptive = Vec::with_capacity(grad.len());
    for (i, &g) in grad.iter().enumerate() {
        next.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        next.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = next.m[i] / bc1;
        let v_hat = next.v[i] / bc2;
        adaptive.push(-(state.alpha * m_hat / (v_hat.sqrt() + state.eps)));
    }
    let decay = state
        .theta
        .iter()
        .map(|&th| -(state.alpha * state.weight_decay * th))
        .collect();
    Ok((next, StepDeltas { adaptive, decay }))
}

/// One AdamW step: `theta - alpha * m_hat / (sqrt(v_hat) + eps) - alpha * wd * theta`,
/// with the decay computed from the pre-update parameters.
pub fn adamw_step(state: &OptimizerState, grad: &[f64]) -> Result<OptimizerState> {
    let (mut next, d) = adamw_deltas(state, grad)?;
    for i in 0..next.theta.len() {
        let moved = state.theta[i] + d.adaptive[i];
        next.theta[i] = if state.weight_decay == 0.0 {
            moved
        } else {
            moved + d.decay[i]
        };
    }
    Ok(next)
}

/// Plain Adam (no weight decay term at all), for comparison.
pub fn adam_step(state: &OptimizerState, grad: &[f64]) -> Result<OptimizerState> {
    state.validate()?;
    check_len(state.theta.len(), grad.len())?;
    let mut next = state.clone();
    next.t += 1;
    let t = next.t as i32;
    for (i, &g) in grad.iter().enumerate() {
        next.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        next.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = next.m[i] / (1.0 - state.beta1.powi(t));
        let v_hat = next.v[i] / (1.0 - state.beta2.powi(t));
        next.theta[i] = state.theta[i] + -(state.alpha * m_hat / (v_hat.sqrt() + state.eps));
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> AbsBox {
        AbsBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn cce_examples() {
        let y = OneHot::new(0, 2).unwrap();
        assert_eq!(cce(&y, &[1.0, 0.0]).unwrap(), 0.0);
        assert!((cce(&y, &[0.8, 0.2]).unwrap() - 0.223_143_551_314_209_7).abs() < 1e-12);
        let u = ProbabilityVector::uniform(4).unwrap();
        for k in 0..4 {
            let l = cce(&OneHot::new(k, 4).unwrap(), &u).unwrap();
            assert!((l - 4f64.ln()).abs() < 1e-12);
        }
        assert!(matches!(
            cce(&y, &[0.5, 0.25, 0.25]),
            Err(Error::Shape { .. })
        ));
        assert!(cce(&y, &[0.0, 1.0]).unwrap().is_finite());
    }

    #[test]
    fn cce_grad_example() {
        let y = OneHot::new(0, 2).unwrap();
        assert_eq!(cce_grad(&y, &[0.8, 0.2]).unwrap(), vec![-1.25, 0.0]);
        assert!(cce_grad(&y, &[1.0]).is_err());
    }

    #[test]
    fn probability_vector_validation() {
        assert!(ProbabilityVector::new(vec![0.5, 0.5]).is_ok());
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
        assert!(ProbabilityVector::new(vec![-0.1, 1.1]).is_err());
        assert!(OneHot::new(3, 3).is_err());
    }

    #[test]
    fn dfl_examples() {
        assert_eq!(dfl(2.0, &[0.0, 0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert!((dfl(1.5, &[0.0, 0.5, 0.5, 0.0]).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(matches!(dfl(3.5, &[0.25; 4]), Err(Error::Range(_))));
        assert!(matches!(dfl(-0.1, &[0.25; 4]), Err(Error::Range(_))));
        // the last bin is reachable as an integer target
        assert_eq!(dfl(3.0, &[0.0, 0.0, 0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn dfl_minimized_at_proximity_weights() {
        // with mass restricted to {1, 2}, the optimum puts 2 - t on bin 1
        let target = 1.3;
        let best = (1..1000)
            .map(|i| i as f64 / 1000.0)
            .min_by(|&a, &b| {
                let la = dfl(target, &[0.0, a, 1.0 - a]).unwrap();
                let lb = dfl(target, &[0.0, b, 1.0 - b]).unwrap();
                la.total_cmp(&lb)
            })
            .unwrap();
        assert!((best - 0.7).abs() < 1e-3, "{best}");
    }

    #[test]
    fn ciou_examples() {
        let a = bx(0.0, 0.0, 2.0, 2.0);
        assert_eq!(ciou(&a, &a), 1.0);
        assert_eq!(ciou_loss(&a, &a), 0.0);
        let b = bx(2.0, 0.0, 4.0, 2.0);
        assert!((ciou(&a, &b) + 0.2).abs() < 1e-12);
        // same aspect ratio: no aspect penalty
        let c = bx(1.0, 1.0, 5.0, 5.0);
        let p = ciou_parts(&a, &c);
        assert_eq!(p.v, 0.0);
        assert!((p.value - (p.iou - p.rho2 / p.c2)).abs() < 1e-15);
    }

    #[test]
    fn adamw_examples() {
        let s = OptimizerState::new(vec![1.0, -2.0], 0.1, 0.0).unwrap();
        let n = adamw_step(&s, &[0.0, 0.0]).unwrap();
        assert_eq!(n.theta, s.theta);
        assert_eq!(n.t, 1);

        let s = OptimizerState::new(vec![1.0], 0.1, 0.01).unwrap();
        assert!((adamw_step(&s, &[0.0]).unwrap().theta[0] - 0.999).abs() < 1e-15);

        let s = OptimizerState::new(vec![0.5], 0.001, 0.0).unwrap();
        let n = adamw_step(&s, &[1.0]).unwrap();
        assert!(((s.theta[0] - n.theta[0]) - 0.001).abs() < 1e-10);

        assert!(matches!(
            adamw_step(&s, &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
        assert!(OptimizerState::new(vec![0.0], 0.0, 0.0).is_err());
    }
}
