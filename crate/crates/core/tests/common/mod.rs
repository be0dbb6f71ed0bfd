#![allow(dead_code)]

use std::f64::consts::PI;

/// Double-exponential (tanh-sinh) quadrature on `[a, b]`, refined by halving
/// the step until successive estimates agree. Endpoint distances are formed
/// without cancellation so integrable endpoint singularities are handled.
pub fn tanh_sinh(g: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let half = 0.5 * (b - a);
    let node = |u: f64| -> (f64, f64, f64) {
        let s = 0.5 * PI * u.sinh();
        let c = s.cosh();
        let w = 0.5 * PI * u.cosh() / (c * c);
        // distance of the node from the nearer endpoint, in units of t
        let comp = 1.0 / (s.abs().exp() * c);
        (s.signum(), comp, w)
    };
    let eval = |u: f64| -> f64 {
        let (sign, comp, w) = node(u);
        if comp == 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = if sign >= 0.0 { b - half * comp } else { a + half * comp };
        if x <= a || x >= b {
            return 0.0;
        }
        let v = g(x);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let u_max = 4.0;
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= u_max {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut est = half * h * sum;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= u_max {
            sum += eval(k as f64 * h) + eval(-(k as f64) * h);
            k += 2;
        }
        let next = half * h * sum;
        if (next - est).abs() <= 1e-15 * next.abs() {
            return next;
        }
        est = next;
    }
    est
}

/// Area of the unit sphere in `R^n`.
pub fn omega(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            let h = n as f64 / 2.0;
            2.0 * PI.powf(h) / gamma(h)
        }
    }
}

fn gamma(x: f64) -> f64 {
    // Lanczos, g = 7
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut s = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * s
}

/// `ℓ^q` norm of a finite sequence; `q = inf` is the maximum.
pub fn lq(values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    values.iter().map(|v| v.abs().powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Profile `A (r/ρ)^a |ln(r/ρ)|^b` on `(lo, hi)`.
#[derive(Debug, Clone, Copy)]
pub struct PowerLog {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub lo: f64,
    pub hi: f64,
}

impl PowerLog {
    pub fn value(&self, r: f64) -> f64 {
        if !(r > self.lo && r < self.hi) {
            return 0.0;
        }
        let l = r.ln().abs();
        if self.b != 0.0 && l == 0.0 {
            return 0.0;
        }
        r.powf(self.a) * l.powf(self.b)
    }

    /// `‖f χ_k‖_p` by a 1-D integral in `r`.
    pub fn annulus_mass(&self, k: i32, p: f64) -> f64 {
        let lo = self.lo.max(2f64.powi(k - 1));
        let hi = self.hi.min(2f64.powi(k));
        if lo >= hi {
            return 0.0;
        }
        let n = self.n as f64;
        let integral = tanh_sinh(|r| r.powf(n - 1.0) * self.value(r).powf(p), lo, hi);
        (omega(self.n) * integral).powf(1.0 / p)
    }

    /// Herz norm by summing annuli from the top of the support downwards until
    /// the terms are negligible.
    pub fn herz(&self, alpha: f64, p: f64, q: f64) -> f64 {
        let k_top = self.hi.log2().ceil() as i32;
        let k_bot = if self.lo > 0.0 {
            self.lo.log2().floor() as i32 + 1
        } else {
            i32::MIN
        };
        let mut terms = Vec::new();
        let mut k = k_top;
        let mut running_max = 0.0f64;
        while k >= k_bot {
            let t = 2f64.powf(k as f64 * alpha) * self.annulus_mass(k, p);
            running_max = running_max.max(t);
            terms.push(t);
            if self.lo == 0.0 && k < k_top - 40 && t < 1e-20 * running_max {
                break;
            }
            if k < k_top - 2000 {
                break;
            }
            k -= 1;
        }
        lq(&terms, q)
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / b.abs().max(a.abs())
}
