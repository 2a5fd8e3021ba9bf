//! Central finite differences against analytic gradients.

use super::{ParamId, ParamStore};

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateCheck {
    pub param: String,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub checks: Vec<CoordinateCheck>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_err).fold(0.0, f64::max)
    }

    /// Checks at or above `tol`, NaN included.
    pub fn failures(&self, tol: f64) -> Vec<&CoordinateCheck> {
        self.checks
            .iter()
            .filter(|c| c.rel_err.is_nan() || c.rel_err >= tol)
            .collect()
    }
}

/// Perturbs each `(param, offset)` coordinate by `±h`, evaluates `loss`, and
/// compares `(f(x+h) - f(x-h)) / 2h` with `analytic(param)[offset]`.
pub fn check_gradients(
    store: &mut ParamStore,
    coords: &[(ParamId, usize)],
    h: f64,
    floor: f64,
    analytic: impl Fn(ParamId, usize) -> f64,
    mut loss: impl FnMut(&ParamStore) -> f64,
) -> GradCheckReport {
    let mut report = GradCheckReport::default();
    for &(id, offset) in coords {
        let orig = store.value(id).data()[offset];
        store.value_mut(id).data_mut()[offset] = orig + h;
        let plus = loss(store);
        store.value_mut(id).data_mut()[offset] = orig - h;
        let minus = loss(store);
        store.value_mut(id).data_mut()[offset] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic(id, offset);
        report.checks.push(CoordinateCheck {
            param: store.name(id).to_string(),
            offset,
            analytic: a,
            numeric,
            rel_err: relative_error(a, numeric, floor),
        });
    }
    report
}

/// Every coordinate of every parameter.
pub fn all_coordinates(store: &ParamStore) -> Vec<(ParamId, usize)> {
    store
        .ids()
        .flat_map(|id| (0..store.value(id).len()).map(move |j| (id, j)))
        .collect()
}
