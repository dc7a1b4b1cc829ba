//! Ensemble energy growth against the exact second-moment recursion.
//!
//! For centred kicks, `S = E[x xᵀ]` with `x = (y, y')` obeys
//! `S ← A S Aᵀ + ⟨q²⟩ B S Bᵀ` per cycle, where the cycle matrix is `A + qB`.

use std::f64::consts::PI;

use hill_delta::oscillator::ensemble_energy_growth;
use hill_delta::ForcingModel;

type M2 = [[f64; 2]; 2];

fn mul(a: &M2, b: &M2) -> M2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: &M2) -> M2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn kernel(af: f64) -> (M2, M2) {
    let w = af.sqrt();
    let half = |t: f64| [[(w * t).cos(), (w * t).sin() / w], [-w * (w * t).sin(), (w * t).cos()]];
    let f = half(PI / 2.0);
    let a = half(PI);
    let kick = [[0.0, 0.0], [-1.0, 0.0]];
    (a, mul(&f, &mul(&kick, &f)))
}

fn step(s: &M2, a: &M2, b: &M2, q2: f64) -> M2 {
    let x = mul(a, &mul(s, &transpose(a)));
    let y = mul(b, &mul(s, &transpose(b)));
    [[x[0][0] + q2 * y[0][0], x[0][1] + q2 * y[0][1]], [x[1][0] + q2 * y[1][0], x[1][1] + q2 * y[1][1]]]
}

#[test]
fn mean_y_sq_follows_the_recursion() {
    let (af, q0) = (2.0, 0.5);
    let model = ForcingModel::symmetric_uniform(q0, af).unwrap();
    let q2 = model.moments().mean_q_sq;
    let (a, b) = kernel(af);
    let e = ensemble_energy_growth(af, &model, 40_000, 200, 11).unwrap();
    // Energy shell E = 1 with uniform phase: <y²> = 1/af, <y'²> = 1.
    let mut s = [[1.0 / af, 0.0], [0.0, 1.0]];
    let mut worst = 0.0f64;
    for (k, &got) in e.mean_y_sq.iter().enumerate() {
        if k > 0 {
            s = step(&s, &a, &b, q2);
        }
        worst = worst.max((got / s[0][0] - 1.0).abs());
    }
    assert!(worst < 0.04, "worst relative deviation {worst}");
}

#[test]
fn fitted_rate_matches_the_perron_root() {
    let (af, q0) = (2.0, 0.1);
    let model = ForcingModel::symmetric_uniform(q0, af).unwrap();
    let q2 = model.moments().mean_q_sq;
    let (a, b) = kernel(af);
    let mut s = [[1.0, 0.0], [0.0, 1.0]];
    let mut log_growth = 0.0;
    let n = 400_000;
    for k in 0..n {
        s = step(&s, &a, &b, q2);
        let tr = s[0][0] + s[1][1];
        if k >= n / 2 {
            log_growth += tr.ln();
        }
        for row in s.iter_mut() {
            for v in row.iter_mut() {
                *v /= tr;
            }
        }
    }
    let exact = log_growth / (n / 2) as f64 / PI;
    let e = ensemble_energy_growth(af, &model, 20_000, 2_000, 5).unwrap();
    assert!((e.rate - exact).abs() < 4.0 * e.stderr, "{} +- {} vs {exact}", e.rate, e.stderr);
    // The exact second-moment rate is D/(2 af) with D = <q²>/π, half of
    // the diffusion prediction.
    assert!((exact / e.predicted - 0.5).abs() < 1e-3, "{}", exact / e.predicted);
}
