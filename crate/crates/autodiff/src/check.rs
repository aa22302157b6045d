use crate::tape::{Tape, Var};
use crate::{AutodiffError, Result};

/// Central-difference step.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Compares the tape gradient of a scalar function against central finite
/// differences at `x` (a `rows x cols` point).
///
/// `f` receives a fresh tape and the leaf for `x` and must return a `1 x 1`
/// node. Returns the largest per-coordinate
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn grad_check<F>(f: F, x: &[f64], rows: usize, cols: usize) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let eval = |point: &[f64], grad: bool| -> Result<(f64, Option<Vec<f64>>)> {
        let mut tape = Tape::new();
        let leaf = tape.leaf(rows, cols, point.to_vec(), grad)?;
        let out = f(&mut tape, leaf)?;
        if tape.shape(out) != (1, 1) {
            return Err(AutodiffError::ShapeMismatch {
                op: "grad_check",
                detail: format!("function returned {:?}", tape.shape(out)),
            });
        }
        let g = grad.then(|| {
            tape.backward(out)
                .get(leaf)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; point.len()])
        });
        Ok((tape.scalar(out), g))
    };

    let (_, analytic) = eval(x, true)?;
    let analytic = analytic.unwrap_or_default();
    let mut point = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        point[i] = x[i] + GRAD_CHECK_STEP;
        let (up, _) = eval(&point, false)?;
        point[i] = x[i] - GRAD_CHECK_STEP;
        let (down, _) = eval(&point, false)?;
        point[i] = x[i];
        let numeric = (up - down) / (2.0 * GRAD_CHECK_STEP);
        let a = analytic[i];
        let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        let w = [0.5, -1.25, 2.0, 0.75, 3.0, -0.5];
        let err = grad_check(
            |t, x| {
                let wv = t.constant(3, 2, w.to_vec())?;
                let y = t.matmul(x, wv)?;
                Ok(t.sum(y))
            },
            &[0.3, -0.2, 0.9],
            1,
            3,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }
}
