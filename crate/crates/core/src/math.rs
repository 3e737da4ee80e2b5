//! Scalar helpers on top of `libm` so the core stays `no_std`.

/// `e^x`.
#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Natural logarithm.
#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

/// Square root.
#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `ceil(x)`.
#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Logistic sigmoid `1 / (1 + e^{-x})`, evaluated without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `-log σ(x)`, i.e. `log(1 + e^{-x})`, stable for large `|x|`.
#[inline]
pub fn neg_log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        libm::log1p(libm::exp(-x))
    } else {
        -x + libm::log1p(libm::exp(x))
    }
}
