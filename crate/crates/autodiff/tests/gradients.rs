use algoreason_autodiff::{Adam, AdamConfig, ParamStore, Tape, Tensor};
use algoreason_testkit::grad::{op_cases, worst_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[test]
fn every_op_matches_finite_differences() {
    for (k, case) in op_cases().iter().enumerate() {
        let err = worst_error(case, 50, 100 + k as u64).unwrap();
        assert!(err < 1e-4, "{}: relative error {err}", case.name);
    }
}

#[test]
fn linear_examples() {
    let mut t = Tape::new();
    let x = t.constant(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let eye = t.constant(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let zb = t.constant(1, 3, vec![0.0; 3]).unwrap();
    let y = t.linear(x, eye, zb).unwrap();
    assert_eq!(t.value(y), t.value(x));

    let zw = t.zeros(3, 2);
    let b = t.constant(1, 2, vec![0.5, -1.0]).unwrap();
    let y = t.linear(x, zw, b).unwrap();
    assert_eq!(t.value(y), &[0.5, -1.0, 0.5, -1.0]);
}

#[test]
fn linear_matches_dense_loop() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut r = |len: usize| (0..len).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    let (xv, wv, bv) = (r(12), r(9), r(3));
    let mut t = Tape::new();
    let x = t.constant(4, 3, xv.clone()).unwrap();
    let w = t.constant(3, 3, wv.clone()).unwrap();
    let b = t.constant(1, 3, bv.clone()).unwrap();
    let y = t.linear(x, w, b).unwrap();
    for i in 0..4 {
        for j in 0..3 {
            let mut acc = bv[j];
            for k in 0..3 {
                acc += xv[i * 3 + k] * wv[k * 3 + j];
            }
            assert!((t.value(y)[i * 3 + j] - acc).abs() < 1e-12);
        }
    }
}

#[test]
fn softmax_xent_matches_log_sum_exp() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (r, c) = (rng.gen_range(1..6), rng.gen_range(2..8));
        let logits: Vec<f64> = (0..r * c).map(|_| rng.gen_range(-30.0..30.0)).collect();
        let mut target = vec![0.0; r * c];
        for i in 0..r {
            target[i * c + rng.gen_range(0..c)] = 1.0;
        }
        let mut expected = 0.0;
        for i in 0..r {
            let row = &logits[i * c..(i + 1) * c];
            let m = row.iter().cloned().fold(f64::MIN, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            let j = (0..c).find(|&j| target[i * c + j] == 1.0).unwrap();
            expected += lse - row[j];
        }
        expected /= r as f64;
        let mut t = Tape::new();
        let l = t.constant(r, c, logits).unwrap();
        let loss = t.softmax_xent(l, &target).unwrap();
        assert!((t.scalar(loss) - expected).abs() < 1e-10);
    }
}

#[test]
fn losses_stay_finite_for_huge_logits() {
    let mut t = Tape::new();
    let l = t.constant(1, 3, vec![1e300, -1e300, 0.0]).unwrap();
    let a = t.softmax_xent(l, &[0.0, 1.0, 0.0]).unwrap();
    let b = t.bce_logits(l, &[0.0, 1.0, 1.0]).unwrap();
    assert!(t.scalar(a).is_finite() && t.scalar(b).is_finite());
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut store = ParamStore::new();
        store.insert("w", Tensor::new(vec![1, 3], vec![0.1, -0.2, 0.3]).unwrap());
        let mut adam = Adam::new(AdamConfig::default());
        for step in 0..5 {
            let g = store.get_mut("w").unwrap();
            g.grad = vec![step as f64 - 2.0, 0.5, 1e-3];
            adam.step(&mut store);
        }
        store.get("w").unwrap().data.clone()
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}
