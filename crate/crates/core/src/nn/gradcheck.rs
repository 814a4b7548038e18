use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::Result;

pub const GRAD_CHECK_STEP: f64 = 1e-6;
/// Gradients smaller than this are compared in absolute terms; below it the
/// central difference is dominated by rounding noise.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(param id, index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

pub fn relative_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(GRAD_CHECK_FLOOR)
}

/// Up to `per_tensor` random coordinates from every trainable tensor.
pub fn sample_coords(store: &ParamStore, per_tensor: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for id in store.trainable_ids() {
        let n = store.value(id).len();
        let k = per_tensor.min(n);
        let mut picks: Vec<usize> = sample(rng, n, k).into_iter().collect();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|i| (id, i)));
    }
    out
}

/// Compares tape gradients of the scalar returned by `f` with central
/// differences (step [`GRAD_CHECK_STEP`]) at the given coordinates.
pub fn grad_check<F>(store: &mut ParamStore, coords: &[(usize, usize)], mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut ParamStore) -> Result<(Tape, Var)>,
{
    let (tape, loss) = f(store)?;
    let grads = tape.backward(loss)?;
    let analytic = tape.param_grads(&grads, store);
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None };
    for &(id, i) in coords {
        let orig = store.value(id).data[i];
        store.value_mut(id).data[i] = orig + GRAD_CHECK_STEP;
        let (t, l) = f(store)?;
        let plus = t.value(l).item();
        store.value_mut(id).data[i] = orig - GRAD_CHECK_STEP;
        let (t, l) = f(store)?;
        let minus = t.value(l).item();
        store.value_mut(id).data[i] = orig;
        let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
        let a = analytic[id][i];
        let err = relative_error(a, numeric);
        report.checked += 1;
        if err >= report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some((id, i, a, numeric));
        }
    }
    Ok(report)
}
