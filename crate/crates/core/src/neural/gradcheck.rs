//! Central finite-difference comparison against reverse-mode gradients.

use super::params::{Gradients, ParamSet};

/// Denominator floor for relative errors, so that coordinates whose true
/// gradient is essentially zero are compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub worst: Option<(String, usize, f64, f64)>,
    pub checked: usize,
}

/// Compares `analytic` against `(L(θ+h) − L(θ−h)) / 2h` for every coordinate
/// selected by `pick(tensor_index, element_index)`.
pub fn check(
    params: &ParamSet,
    analytic: &Gradients,
    step: f64,
    mut pick: impl FnMut(usize, usize) -> bool,
    loss: impl Fn(&ParamSet) -> f64,
) -> GradCheck {
    let mut work = params.clone();
    let mut out = GradCheck {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
    };
    for k in 0..params.len() {
        for j in 0..params.tensors()[k].data.len() {
            if !pick(k, j) {
                continue;
            }
            let orig = params.tensors()[k].data[j];
            work.tensors_mut()[k].data[j] = orig + step;
            let up = loss(&work);
            work.tensors_mut()[k].data[j] = orig - step;
            let down = loss(&work);
            work.tensors_mut()[k].data[j] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic.values[k][j];
            let err = relative_error(a, numeric);
            out.checked += 1;
            if err > out.max_rel_error || out.worst.is_none() {
                out.max_rel_error = out.max_rel_error.max(err);
                out.worst = Some((params.tensors()[k].name.clone(), j, a, numeric));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Tape;

    #[test]
    fn cubic_passes() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", vec![3], vec![0.5, -1.0, 2.0]);
        let f = |p: &ParamSet| -> (f64, Gradients) {
            let mut t = Tape::new(p);
            let v = t.param(w);
            let sq = t.mul(v, v);
            let cube = t.mul(sq, v);
            let ones = t.input(vec![1.0; 3]);
            let l = t.dot(cube, ones);
            (t.scalar(l), t.backward(l))
        };
        let (_, g) = f(&ps);
        let r = check(&ps, &g, 1e-4, |_, _| true, |p| f(p).0);
        assert_eq!(r.checked, 3);
        assert!(r.max_rel_error < 1e-7, "{r:?}");
    }
}
