use super::graph::{Graph, Var};
use super::params::{ParamId, ParameterStore};
use crate::error::Result;

/// Outcome of [`check_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    /// Largest `|a - n| / max(1, |a|, |n|)` over all parameter entries.
    pub max_error: f64,
    /// Entry where `max_error` occurred.
    pub worst: Option<(ParamId, usize)>,
    /// Number of entries compared.
    pub checked: usize,
}

/// Compares analytic gradients of `loss` against central differences with
/// step `eps` for every entry of every parameter in `store`.
///
/// `loss` must build a scalar from a fresh graph and be deterministic in the
/// parameter values. Entries are perturbed in place and restored afterwards.
pub fn check_gradients<F>(store: &mut ParameterStore, eps: f64, loss: F) -> Result<GradientReport>
where
    F: for<'g> Fn(&mut Graph<'g>) -> Result<Var>,
{
    let analytic = {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        g.backward(l)?
    };
    let eval = |store: &ParameterStore| -> Result<f64> {
        let mut g = Graph::new(store);
        let l = loss(&mut g)?;
        Ok(g.value(l).item())
    };

    let mut report = GradientReport {
        max_error: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: alloc::vec::Vec<ParamId> = store.ids().collect();
    for id in ids {
        for i in 0..store.value(id).len() {
            let orig = store.value(id).data()[i];
            store.value_mut(id)[i] = orig + eps;
            let plus = eval(store);
            store.value_mut(id)[i] = orig - eps;
            let minus = eval(store);
            store.value_mut(id)[i] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let a = analytic.get(id)[i];
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            report.checked += 1;
            if report.worst.is_none() || err > report.max_error {
                report.max_error = err;
                report.worst = Some((id, i));
            }
        }
    }
    Ok(report)
}
