//! Central-difference gradient checking.

use super::ParamSet;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Max over trainable scalars of `|a − n| / max(|a|, |n|, ABS_FLOOR)`.
    pub max_rel_error: f64,
    /// Parameter name and flat index where the max occurred.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub checked: usize,
}

/// Denominator floor. Central differences carry roundoff of roughly
/// `ε·|f| / h` (about 1e-11 at h = 1e-5), so a gradient that is exactly zero
/// (for instance a key bias, which shifts every score of a query equally)
/// would otherwise report a relative error of order one.
pub const ABS_FLOOR: f64 = 1e-6;

/// Compares the analytic gradients already stored in `params` against
/// `(f(θ+h) − f(θ−h)) / 2h` for every trainable scalar. Values are restored
/// exactly after each probe.
pub fn finite_diff_check<F>(params: &mut ParamSet, h: f64, mut loss: F) -> GradCheckReport
where
    F: FnMut(&ParamSet) -> f64,
{
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        checked: 0,
    };
    let names: Vec<(usize, String, bool, usize)> = params
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.name.clone(), p.trainable, p.value.len()))
        .collect();
    for (pi, name, trainable, len) in names {
        if !trainable {
            continue;
        }
        let id = super::ParamId(pi);
        for k in 0..len {
            let original = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = original + h;
            let up = loss(params);
            params.value_mut(id).data_mut()[k] = original - h;
            let down = loss(params);
            params.value_mut(id).data_mut()[k] = original;

            let numeric = (up - down) / (2.0 * h);
            let analytic = params.get(id).grad.data()[k];
            let denom = analytic.abs().max(numeric.abs()).max(ABS_FLOOR);
            let err = (analytic - numeric).abs() / denom;
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), k));
                report.worst_analytic = analytic;
                report.worst_numeric = numeric;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn quadratic_is_exact() {
        let mut ps = ParamSet::new();
        let id = ps.add("x", Matrix::from_rows(&[[0.7, -1.3]]), true);
        let loss = |p: &ParamSet| {
            let x = p.value(id).data();
            3.0 * x[0] * x[0] + 0.5 * x[1] * x[1] + x[0] * x[1]
        };
        let x = ps.value(id).data().to_vec();
        ps.get_mut(id).grad = Matrix::from_rows(&[[6.0 * x[0] + x[1], x[1] + x[0]]]);
        let report = finite_diff_check(&mut ps, 1e-5, loss);
        assert!(report.max_rel_error < 1e-9, "{report:?}");
        assert_eq!(report.checked, 2);
        assert_eq!(ps.value(id).data(), &x[..]);
    }

    #[test]
    fn dead_parameter_reads_zero() {
        let mut ps = ParamSet::new();
        let live = ps.add("live", Matrix::filled(1, 1, 2.0), true);
        let dead = ps.add("dead", Matrix::filled(1, 1, 5.0), true);
        ps.get_mut(live).grad.fill(4.0);
        let report = finite_diff_check(&mut ps, 1e-5, |p| p.value(live)[(0, 0)].powi(2));
        assert!(report.max_rel_error < 1e-9);
        assert_eq!(ps.get(dead).grad[(0, 0)], 0.0);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let mut ps = ParamSet::new();
        let id = ps.add("x", Matrix::filled(1, 1, 1.0), true);
        ps.get_mut(id).grad.fill(1.0);
        let report = finite_diff_check(&mut ps, 1e-5, |p| p.value(id)[(0, 0)].powi(2));
        assert!(report.max_rel_error > 0.4);
        assert_eq!(report.worst, Some(("x".into(), 0)));
    }
}
