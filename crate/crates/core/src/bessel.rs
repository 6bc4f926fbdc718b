//! Modified Bessel function of the second kind, order one.
//!
//! Small arguments use the ascending series
//! `K₁(x) = 1/x + I₁(x) ln(x/2) − (x/4) Σ_k [ψ(k+1) + ψ(k+2)] (x²/4)^k / (k!(k+1)!)`.
//! Larger arguments use Steed's continued fraction for `K₀` and the ratio
//! `K₁/K₀` (Temme's CF2 with order zero), which converges quickly for `x > 2`.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn bessel_i1(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..200 {
        term *= q / (k as f64 * (k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn k1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    // psi(k+1) + psi(k+2) with psi(1) = -gamma, psi(m+1) = psi(m) + 1/m.
    let mut psi1 = -EULER_GAMMA;
    let mut psi2 = 1.0 - EULER_GAMMA;
    let mut coef = 1.0; // (x²/4)^k / (k!(k+1)!)
    let mut sum = (psi1 + psi2) * coef;
    for k in 1..200 {
        let kf = k as f64;
        psi1 += 1.0 / kf;
        psi2 += 1.0 / (kf + 1.0);
        coef *= q / (kf * (kf + 1.0));
        let t = (psi1 + psi2) * coef;
        sum += t;
        if t.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    1.0 / x + bessel_i1(x) * (0.5 * x).ln() - 0.25 * x * sum
}

fn k1_continued_fraction(x: f64) -> f64 {
    // Steed's algorithm for CF2 with mu = 0 (Numerical Recipes, bessik).
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..100_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-16 {
            break;
        }
    }
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    k0 * (x + 0.5 - a1 * h) / x
}

/// `K₁(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "K1 is only defined for positive arguments");
    if x <= 2.0 {
        k1_series(x)
    } else {
        k1_continued_fraction(x)
    }
}

/// `x K₁(x)`, continuous at zero with value one.
pub fn x_k1(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x * bessel_k1(x)
    }
}
