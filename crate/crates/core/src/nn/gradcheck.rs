use alloc::vec::Vec;

use rand::seq::index::sample;

use super::{Gradients, Network, Target};
use crate::error::Result;
use crate::rng;

/// Finite-difference step.
const H: f64 = 1e-4;
/// Floor on the relative-error denominator, so vanishing gradients compare
/// absolutely.
const DENOM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameters compared.
    pub checked: usize,
    /// Sampled parameters skipped because a step crossed a ReLU kink or
    /// changed a pooling winner.
    pub skipped: usize,
    /// Layer kinds that contributed at least one comparison.
    pub layers_checked: Vec<&'static str>,
}

/// Compares backpropagated gradients with central differences on a random
/// sample of at least `fraction` of the parameters (at least three per
/// parametric layer).
pub fn grad_check(net: &Network, input: &[f64], target: &Target, fraction: f64, seed: u64) -> Result<GradCheckReport> {
    let mut grads = Gradients::zeros_like(net);
    let (_, base) = net.accumulate_gradients(input, target, &mut grads)?;
    let base_sig = base.branch_signature(net);
    let mut r = rng::seeded(seed);
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        checked: 0,
        skipped: 0,
        layers_checked: Vec::new(),
    };
    for li in 0..net.layers.len() {
        let n = net.layers[li].param_count();
        if n == 0 {
            continue;
        }
        let k = (crate::math::ceil(n as f64 * fraction) as usize).clamp(3.min(n), n);
        let mut any = false;
        for pi in sample(&mut r, n, k).into_iter() {
            let orig = probe.layers[li].params()[pi];
            probe.layers[li].params_mut()[pi] = orig + H;
            let fp = probe.forward(input)?;
            let lp = probe.loss(input, target)?;
            let sp = fp.branch_signature(&probe);
            probe.layers[li].params_mut()[pi] = orig - H;
            let fm = probe.forward(input)?;
            let lm = probe.loss(input, target)?;
            let sm = fm.branch_signature(&probe);
            probe.layers[li].params_mut()[pi] = orig;
            if sp != base_sig || sm != base_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = (lp - lm) / (2.0 * H);
            let analytic = grads.0[li][pi];
            let denom = numeric.abs().max(analytic.abs()).max(DENOM_FLOOR);
            let err = (numeric - analytic).abs() / denom;
            report.max_relative_error = report.max_relative_error.max(err);
            report.checked += 1;
            any = true;
        }
        if any {
            report.layers_checked.push(net.layers[li].kind_name());
        }
    }
    for l in &net.layers {
        if l.param_count() == 0 && !report.layers_checked.contains(&l.kind_name()) {
            report.layers_checked.push(l.kind_name());
        }
    }
    Ok(report)
}
