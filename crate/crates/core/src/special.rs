//! Gamma function (Lanczos approximation, g = 7, n = 9).

use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

const G: f64 = 7.0;
const COEF: [f64; 9] = [
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

/// `Gamma(x)` for real `x`, using reflection below `1/2`.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        PI / ((PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = COEF[0];
        let t = x + G + 0.5;
        for (i, c) in COEF.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// `(n - 1)!!` for even `n >= 2`, i.e. `E|Z|^n` for a standard normal `Z`.
pub fn gaussian_even_moment(n: u32) -> f64 {
    debug_assert!(n.is_multiple_of(2));
    let mut m = 1.0;
    let mut k = 1;
    while k < n {
        m *= k as f64;
        k += 2;
    }
    m
}
