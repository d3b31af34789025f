use super::params::{Gradients, ParamStore};
use super::rng::Rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares analytic gradients against central differences. At most
/// `max_per_param` coordinates are sampled from each trainable parameter.
pub fn grad_check<S, F>(
    params: &mut ParamStore<S>,
    analytic: &Gradients<S>,
    mut loss: F,
    eps: f64,
    max_per_param: usize,
    rng: &mut Rng,
) -> GradCheckReport
where
    S: Scalar,
    F: FnMut(&ParamStore<S>) -> f64,
{
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        worst: None,
    };
    let ids: Vec<_> = params
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, p)| (id, p.name.clone(), p.value.len()))
        .collect();
    for (id, name, len) in ids {
        let mut coords: Vec<usize> = (0..len).collect();
        if len > max_per_param {
            rng.shuffle(&mut coords);
            coords.truncate(max_per_param);
        }
        for i in coords {
            let orig = params.value(id).data()[i];
            params.get_mut(id).value.data_mut()[i] = orig + S::from_f64_lossy(eps);
            let up = loss(params);
            params.get_mut(id).value.data_mut()[i] = orig - S::from_f64_lossy(eps);
            let down = loss(params);
            params.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(analytic.at(id, i).to_f64_lossy(), numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((name.clone(), i));
            }
        }
    }
    report
}
