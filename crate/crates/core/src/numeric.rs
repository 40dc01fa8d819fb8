//! Small numerical helpers shared by the analytic and simulation modules.

/// Kahan-Babuska (Neumaier) compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = KahanSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Fractional part of `alpha * i`, evaluated with an error-free product so that the
/// result stays accurate when `alpha * i` is large.
pub fn frac_of_product(alpha: f64, i: f64) -> f64 {
    let hi = alpha * i;
    let lo = alpha.mul_add(i, -hi);
    let f = (hi - hi.floor()) + lo;
    // lo can push the result just outside [0, 1)
    if f < 0.0 {
        f + 1.0
    } else if f >= 1.0 {
        f - 1.0
    } else {
        f
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = kahan_sum(values.iter().copied()) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = kahan_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = KahanSum::new();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn frac_product_is_in_unit_interval() {
        let a = std::f64::consts::SQRT_2;
        for i in [0.0, 1.0, 1e6, 1e8 + 7.0, 123456789.0] {
            let f = frac_of_product(a, i);
            assert!((0.0..1.0).contains(&f), "{i} -> {f}");
        }
        assert_eq!(frac_of_product(0.5, 3.0), 0.5);
        assert_eq!(frac_of_product(0.0, 3.0), 0.0);
    }

    #[test]
    fn std_error_of_constant_is_zero() {
        assert_eq!(mean_and_std_error(&[2.0; 10]), (2.0, 0.0));
        let (m, se) = mean_and_std_error(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }
}
