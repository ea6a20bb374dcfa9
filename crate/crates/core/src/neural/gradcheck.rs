use super::mlp::{Mlp, Trace};

/// Outcome of comparing backprop against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat parameter index where the worst error occurred.
    pub worst_param: usize,
    pub analytic: f64,
    pub numeric: f64,
}

const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
const FLOOR: f64 = 1e-6;

/// Checks every parameter gradient of `net` for the scalar loss `loss` at `x`.
///
/// `loss` maps the network output to `(loss, d loss / d output)`.
pub fn grad_check<F>(net: &Mlp, loss: F, x: &[f64]) -> GradCheckReport
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut trace = Trace::default();
    net.forward_trace(x, &mut trace).expect("input width");
    let (_, d_out) = loss(trace.output());
    let mut analytic = vec![0.0; net.num_params()];
    net.backward(&trace, &d_out, &mut analytic);

    let mut probe = net.clone();
    let mut eval = |i: usize, value: f64| {
        probe.params_mut()[i] = value;
        loss(&probe.forward(x).expect("input width")).0
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
    };
    for (i, &a) in analytic.iter().enumerate() {
        let p = net.params()[i];
        let numeric = (eval(i, p + STEP) - eval(i, p - STEP)) / (2.0 * STEP);
        eval(i, p);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        if err > report.max_rel_error {
            report = GradCheckReport {
                max_rel_error: err,
                worst_param: i,
                analytic: a,
                numeric,
            };
        }
    }
    report
}
