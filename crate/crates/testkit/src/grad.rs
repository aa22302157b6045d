//! Finite-difference cases for every differentiable tape operation.
//!
//! Each case maps a random point to a scalar through one operation followed
//! by a fixed random projection, so the check covers the full Jacobian.

use algoreason_autodiff::{grad_check, Result, Tape, Var};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type CaseFn = Box<dyn Fn(&mut Tape, Var) -> Result<Var>>;

pub struct GradCase {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub build: CaseFn,
    /// Rejects points too close to a kink or tie of the operation.
    pub smooth: fn(&[f64]) -> bool,
}

fn any_point(_: &[f64]) -> bool {
    true
}

fn away_from_zero(x: &[f64]) -> bool {
    x.iter().all(|v| v.abs() > 1e-3)
}

fn distinct(x: &[f64]) -> bool {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[1] - w[0] > 1e-3)
}

/// Hidden pre-activations of the `two_layer_mlp` case stay clear of 0.
fn mlp_smooth(x: &[f64]) -> bool {
    let w1 = uniform(&mut ChaCha20Rng::seed_from_u64(27), 18);
    let b1 = uniform(&mut ChaCha20Rng::seed_from_u64(28), 6);
    (0..4).all(|i| {
        (0..6).all(|j| {
            let pre: f64 = (0..3).map(|k| x[i * 3 + k] * w1[k * 6 + j]).sum::<f64>() + b1[j];
            pre.abs() > 1e-3
        })
    })
}

fn uniform(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

/// `sum(w * y)` for a fixed pseudo-random `w` shaped like `y`.
fn project(t: &mut Tape, y: Var, seed: u64) -> Result<Var> {
    let (r, c) = t.shape(y);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w = t.constant(r, c, uniform(&mut rng, r * c))?;
    let p = t.mul(y, w)?;
    Ok(t.sum(p))
}

fn constant(t: &mut Tape, r: usize, c: usize, seed: u64) -> Result<Var> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    t.constant(r, c, uniform(&mut rng, r * c))
}

fn case(
    name: &'static str,
    rows: usize,
    cols: usize,
    smooth: fn(&[f64]) -> bool,
    build: impl Fn(&mut Tape, Var) -> Result<Var> + 'static,
) -> GradCase {
    GradCase { name, rows, cols, build: Box::new(build), smooth }
}

pub fn op_cases() -> Vec<GradCase> {
    let adj: Vec<bool> = (0..16).map(|k| k % 5 != 1).collect();
    vec![
        case("matmul_left", 3, 4, any_point, |t, x| {
            let b = constant(t, 4, 2, 1)?;
            let y = t.matmul(x, b)?;
            project(t, y, 2)
        }),
        case("matmul_right", 4, 2, any_point, |t, x| {
            let a = constant(t, 3, 4, 3)?;
            let y = t.matmul(a, x)?;
            project(t, y, 4)
        }),
        case("matmul_t", 3, 4, any_point, |t, x| {
            let b = constant(t, 5, 4, 5)?;
            let y = t.matmul_t(x, b)?;
            let z = t.matmul_t(b, x)?;
            let s = project(t, y, 6)?;
            let u = project(t, z, 7)?;
            t.add(s, u)
        }),
        case("linear", 2, 3, any_point, |t, x| {
            let w = constant(t, 3, 4, 8)?;
            let b = constant(t, 1, 4, 9)?;
            let y = t.linear(x, w, b)?;
            project(t, y, 10)
        }),
        case("add_sub_mul", 3, 3, any_point, |t, x| {
            let c = constant(t, 3, 3, 11)?;
            let a = t.add(x, c)?;
            let s = t.sub(a, x)?;
            let s = t.sub(s, x)?;
            let m = t.mul(s, x)?;
            project(t, m, 12)
        }),
        case("add_row", 3, 4, any_point, |t, x| {
            let b = constant(t, 1, 4, 13)?;
            let y = t.add_row(x, b)?;
            let row = t.gather_rows(x, vec![1])?;
            let z = t.add_row(y, row)?;
            project(t, z, 14)
        }),
        case("scale_one_minus", 2, 3, any_point, |t, x| {
            let y = t.scale(x, -2.5);
            let z = t.one_minus(y);
            let z = t.mul(z, x)?;
            project(t, z, 15)
        }),
        case("relu", 3, 4, away_from_zero, |t, x| {
            let y = t.relu(x);
            project(t, y, 16)
        }),
        case("sigmoid", 3, 4, any_point, |t, x| {
            let y = t.sigmoid(x);
            project(t, y, 17)
        }),
        case("concat", 2, 3, any_point, |t, x| {
            let c = constant(t, 2, 2, 18)?;
            let y = t.concat(&[x, c, x])?;
            project(t, y, 19)
        }),
        case("stack_rows", 2, 3, any_point, |t, x| {
            let c = constant(t, 1, 3, 20)?;
            let y = t.stack_rows(&[x, c, x])?;
            project(t, y, 21)
        }),
        case("reshape_transpose", 2, 6, any_point, |t, x| {
            let y = t.reshape(x, 4, 3)?;
            let z = t.transpose(y);
            project(t, z, 22)
        }),
        case("gather_repeat_tile", 3, 2, any_point, |t, x| {
            let g = t.gather_rows(x, vec![2, 0, 2, 1])?;
            let r = t.repeat_rows(x)?;
            let l = t.tile_rows(x)?;
            let s = t.mul(r, l)?;
            let a = project(t, g, 23)?;
            let b = project(t, s, 24)?;
            t.add(a, b)
        }),
        case("max_aggregate", 16, 3, distinct, move |t, x| {
            let y = t.max_aggregate(x, &adj)?;
            project(t, y, 25)
        }),
        case("max_rows", 5, 3, distinct, |t, x| {
            let y = t.max_rows(x)?;
            project(t, y, 26)
        }),
        case("sum_mean", 3, 3, any_point, |t, x| {
            let sq = t.mul(x, x)?;
            let s = t.sum(sq);
            let m = t.mean(x);
            let m = t.scale(m, 3.0);
            t.add(s, m)
        }),
        case("softmax_xent", 4, 5, any_point, |t, x| {
            let mut target = vec![0.0; 20];
            for (i, j) in [(0, 1), (1, 4), (2, 0), (3, 2)] {
                target[i * 5 + j] = 1.0;
            }
            target[3 * 5 + 2] = 0.25;
            target[3 * 5 + 3] = 0.75;
            t.softmax_xent(x, &target)
        }),
        case("bce_logits", 3, 4, any_point, |t, x| {
            let target: Vec<f64> = (0..12).map(|k| (k % 3 == 0) as u8 as f64).collect();
            t.bce_logits(x, &target)
        }),
        case("mse", 3, 4, any_point, |t, x| {
            let target: Vec<f64> = (0..12).map(|k| k as f64 * 0.1 - 0.5).collect();
            t.mse(x, &target)
        }),
        case("two_layer_mlp", 4, 3, mlp_smooth, |t, x| {
            let w1 = constant(t, 3, 6, 27)?;
            let b1 = constant(t, 1, 6, 28)?;
            let w2 = constant(t, 6, 2, 29)?;
            let b2 = constant(t, 1, 2, 30)?;
            let h = t.linear(x, w1, b1)?;
            let h = t.relu(h);
            let y = t.linear(h, w2, b2)?;
            project(t, y, 31)
        }),
    ]
}

/// Random points at which `smooth` holds.
pub fn smooth_points(
    rows: usize,
    cols: usize,
    count: usize,
    seed: u64,
    smooth: impl Fn(&[f64]) -> bool,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x = uniform(&mut rng, rows * cols);
        if smooth(&x) {
            out.push(x);
        }
    }
    out
}

/// Worst relative error of `case` over `count` smooth random points.
pub fn worst_error(case: &GradCase, count: usize, seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    for x in smooth_points(case.rows, case.cols, count, seed, case.smooth) {
        let err = grad_check(&case.build, &x, case.rows, case.cols)?;
        worst = worst.max(err);
    }
    Ok(worst)
}
