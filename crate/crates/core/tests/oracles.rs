mod common;

use std::f64::consts::{LN_2, PI};

use herzkit::embeddings::counterexample_case1;
use herzkit::funclib::{pow2, RadialPowerLog};
use herzkit::norms::{gradient_herz_norm, herz_norm, herz_sobolev_norm, SobolevMode};
use herzkit::operators::{dyadic_project, maximal, riesz, MollifierKernel};
use herzkit::quadrature::annulus_lp_norm;
use herzkit::{DomainSpec, Exponent, FunctionSpec, HerzParams, QuadratureOptions, SobolevParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{omega, rel, tanh_sinh, PowerLog};

fn e(v: f64) -> Exponent {
    Exponent::new(v).unwrap()
}

fn full(n: usize) -> DomainSpec {
    DomainSpec::full(n)
}

#[test]
fn tanh_sinh_reference_integrals() {
    assert!(rel(tanh_sinh(|x| x * x, 0.0, 1.0), 1.0 / 3.0) < 1e-14);
    assert!(rel(tanh_sinh(|x: f64| x.sqrt().recip(), 0.0, 1.0), 2.0) < 1e-12);
    assert!(rel(tanh_sinh(|x: f64| (x - 1.0).abs().powf(0.3), 1.0, 2.0), 1.0 / 1.3) < 1e-13);
    assert!(rel(tanh_sinh(|x: f64| -x.ln(), 0.0, 1.0), 1.0) < 1e-13);
    assert!(rel(omega(4), 2.0 * PI * PI) < 1e-13);
    assert!(rel(omega(5), 8.0 * PI * PI / 3.0) < 1e-13);
}

#[test]
fn annulus_mass_matches_antiderivative() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..40 {
        let n = rng.gen_range(1..=3usize);
        let a = rng.gen_range(-3.0..3.0);
        let p = rng.gen_range(1.0..4.0);
        let k = rng.gen_range(-6..6);
        let f = FunctionSpec::radial_power_log(n, a, 0.0, 0.0, f64::INFINITY);
        let got = annulus_lp_norm(&f, k, e(p), &full(n), &Default::default()).unwrap().value;
        let c = a * p + n as f64;
        let want = if c.abs() < 1e-12 {
            (omega(n) * LN_2).powf(1.0 / p)
        } else {
            (omega(n) * (pow2(k).powf(c) - pow2(k - 1).powf(c)) / c).powf(1.0 / p)
        };
        assert!(rel(got, want) < 1e-9, "n={n} a={a} p={p} k={k}: {got} vs {want}");
    }
}

#[test]
fn log_profile_annuli_match_one_dimensional_oracle() {
    for (a, b) in [(-1.0, 1.0), (0.5, -1.0), (2.0, 2.0), (-2.5, -2.0)] {
        let f = FunctionSpec::radial_power_log(2, a, b, 0.0, f64::INFINITY);
        let oracle = PowerLog {
            n: 2,
            a,
            b,
            lo: 0.0,
            hi: f64::INFINITY,
        };
        for k in [-4, -1, 2, 5] {
            let got = annulus_lp_norm(&f, k, e(2.0), &full(2), &Default::default()).unwrap().value;
            let want = oracle.annulus_mass(k, 2.0);
            assert!(rel(got, want) < 1e-9, "a={a} b={b} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn sup_on_monotone_annulus_is_an_endpoint() {
    for a in [-2.0, -0.5, 1.0, 3.0] {
        let f = FunctionSpec::radial_power_log(2, a, 0.0, 0.0, f64::INFINITY);
        for k in [-3, 0, 4] {
            let got = annulus_lp_norm(&f, k, Exponent::INFINITY, &full(2), &Default::default())
                .unwrap()
                .value;
            let want = pow2(k - 1).powf(a).max(pow2(k).powf(a));
            assert!(rel(got, want) < 1e-9, "a={a} k={k}: {got} vs {want}");
        }
    }
}

#[test]
fn gaussian_sobolev_norm_closed_form() {
    for (n, s) in [(1usize, 1.0), (2, 0.7), (3, 1.3)] {
        let f = FunctionSpec::gaussian(vec![0.0; n], s);
        let sp = SobolevParams {
            herz: HerzParams::new(0.0, e(2.0), e(2.0), n).unwrap(),
            m: 1,
        };
        let got = herz_sobolev_norm(&f, &sp, &full(n), SobolevMode::Full, &Default::default(), &Default::default())
            .unwrap()
            .value;
        // ‖G‖² = (πs²/2)^{n/2}, Σ‖∂_j G‖² = (n/s²)(πs²/2)^{n/2}
        let want = ((PI * s * s / 2.0).powf(n as f64 / 2.0) * (1.0 + n as f64 / (s * s))).sqrt();
        assert!(rel(got, want) < 1e-6, "n={n} s={s}: {got} vs {want}");
    }
    let f = FunctionSpec::gaussian(vec![0.3, -0.2], 1.0);
    let g = gradient_herz_norm(&f, 0.0, e(2.0), e(2.0), &full(2), &Default::default(), &Default::default())
        .unwrap()
        .value;
    let want = (2.0 * PI / 2.0).sqrt();
    assert!(rel(g, want) < 1e-6, "{g} vs {want}");
}

#[test]
fn gradient_of_power_is_scaled_power() {
    for (a, alpha, p, q) in [(2.0, -0.5, 2.0, 2.0), (-0.5, 1.0, 1.0, f64::INFINITY), (1.5, 0.0, 3.0, 1.0)] {
        let f = FunctionSpec::radial_power_log(2, a, 0.0, 0.5, 4.0);
        // the cut-offs carry no gradient mass
        let got = gradient_herz_norm(&f, alpha, e(p), Exponent::quasi(q).unwrap(), &full(2), &Default::default(), &Default::default());
        assert!(got.is_err(), "sharp cut-off must have no weak gradient");
        let hp = HerzParams::new(alpha, e(p), Exponent::quasi(q).unwrap(), 2).unwrap();
        let power = FunctionSpec::radial_power_log(2, a, 0.0, 0.0, f64::INFINITY);
        let dpower = FunctionSpec::radial_power_log(2, a - 1.0, 0.0, 0.0, f64::INFINITY);
        let omega = DomainSpec::AnnulusRange { n: 2, k_min: -1, k_max: 2 };
        let got = gradient_herz_norm(&power, alpha, e(p), Exponent::quasi(q).unwrap(), &omega, &Default::default(), &Default::default())
            .unwrap()
            .value;
        let want = a.abs() * herz_norm(&dpower, &hp, &omega, &Default::default(), &Default::default()).unwrap().value;
        assert!(rel(got, want) < 1e-9, "a={a}: {got} vs {want}");
    }
}

#[test]
fn gradients_match_central_differences() {
    let specs = [
        FunctionSpec::gaussian(vec![0.2, -0.1], 0.8),
        FunctionSpec::bump(vec![0.0, 0.3], 1.5),
        FunctionSpec::RadialPowerLog(RadialPowerLog::new(2, 1.5, 1.0, 0.25, 4.0).with_taper(0.25)),
        FunctionSpec::radial_power_log(3, -0.5, 0.0, 0.0, f64::INFINITY),
    ];
    for f in &specs {
        let n = f.dim();
        let x: Vec<f64> = (0..n).map(|i| 0.4 + 0.13 * i as f64).collect();
        let grad = f.gradient(&x).unwrap();
        let fd = |h: f64| -> f64 {
            (0..n)
                .map(|i| {
                    let (mut xp, mut xm) = (x.clone(), x.clone());
                    xp[i] += h;
                    xm[i] -= h;
                    ((f.value(&xp) - f.value(&xm)) / (2.0 * h) - grad[i]).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e3, e4) = (fd(1e-3), fd(1e-4));
        let order = (e3 / e4).log10();
        assert!(e4 < 1e-6 && (order >= 1.9 || e4 < 1e-10), "{f:?}: errors {e3:e}, {e4:e}");
    }
}

#[test]
fn counterexample_l1_column_exact() {
    let hp = HerzParams::new(1.5, e(2.0), e(2.0), 2).unwrap();
    let rows = counterexample_case1(1.0, &hp, &[pow2(-10)], &Default::default(), &Default::default()).unwrap();
    let want = 2.0 * PI * 10.0 * LN_2;
    assert!(rel(rows[0].l1_mass, want) < 1e-6);
}

#[test]
fn mollifier_kernel_has_unit_mass() {
    for n in 1..=3 {
        for eps in [0.01, 0.5, 3.0] {
            let k = MollifierKernel::new(n, eps).unwrap();
            assert!((k.mass() - 1.0).abs() < 1e-10, "n={n} eps={eps}: {}", k.mass());
            assert_eq!(k.value(&vec![eps; n]), 0.0);
        }
    }
    // independent radial oracle for n = 2
    let k = MollifierKernel::new(2, 1.0).unwrap();
    let mass = 2.0 * PI * tanh_sinh(|r| r * k.value(&[r, 0.0]), 0.0, 1.0);
    assert!((mass - 1.0).abs() < 1e-10);
}

#[test]
fn projection_of_linear_function_is_midpoint() {
    let f = FunctionSpec::radial_power_log(1, 1.0, 0.0, 0.0, f64::INFINITY);
    let g = dyadic_project(&f, 2, &DomainSpec::Cube { corner: vec![0.25], side: 0.5 }).unwrap();
    // |x| = x on the cube
    for (i, v) in g.values.iter().enumerate() {
        let mid = 0.25 + 0.25 * (i as f64 + 0.5);
        assert!(rel(*v, mid) < 1e-12, "{i}: {v} vs {mid}");
    }
}

#[test]
fn projection_error_is_first_order() {
    let f = FunctionSpec::bump(vec![0.1, 0.0], 1.0);
    let region = DomainSpec::Cube { corner: vec![-1.0, -1.0], side: 2.0 };
    let sup_err = |j: i32| {
        let g = dyadic_project(&f, j, &region).unwrap();
        let h = pow2(-j);
        let mut worst = 0.0f64;
        for i in 0..g.shape[0] {
            for l in 0..g.shape[1] {
                let v = g.values[i * g.shape[1] + l];
                for (a, b) in [(0.0, 0.0), (1.0, 1.0), (0.0, 1.0), (1.0, 0.0), (0.5, 0.5)] {
                    let x = [-1.0 + (i as f64 + a) * h, -1.0 + (l as f64 + b) * h];
                    worst = worst.max((f.value(&x) - v).abs());
                }
            }
        }
        worst
    };
    let (e3, e5) = (sup_err(3), sup_err(5));
    let order = (e3 / e5).log2() / 2.0;
    assert!(order >= 0.9, "observed order {order}");
}

#[test]
fn maximal_of_plateau_at_center() {
    let f = FunctionSpec::radial_power_log(2, 0.0, 0.0, 0.0, 1.0);
    let v = maximal(&f, &[0.0, 0.0], &Default::default()).unwrap();
    assert!((v - 1.0).abs() < 0.02, "{v}");
}

#[test]
fn riesz_translation_covariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = FunctionSpec::bump(vec![0.0, 0.0], 1.0);
    let opts = QuadratureOptions::default();
    for _ in 0..10 {
        let h: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let fh = f.translate(&h).unwrap();
        let xh: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a - b).collect();
        let (lhs, rhs) = (riesz(&fh, 0.7, &x, &opts).unwrap(), riesz(&f, 0.7, &xh, &opts).unwrap());
        assert!(rel(lhs, rhs) < 1e-6, "{lhs} vs {rhs}");
        assert!(lhs > 0.0);
    }
}
