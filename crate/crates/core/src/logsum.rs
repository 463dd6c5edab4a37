//! Log-domain accumulation for sums of large powers.

/// Streaming `log Σ exp(x_k)`.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    acc: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, acc: 0.0 }
    }
}

impl LogSumExp {
    pub fn push(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.acc += (x - self.max).exp();
        } else {
            self.acc = self.acc * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.acc.ln()
        }
    }
}

/// `log Σ exp(x_k)`, two-pass (exact max shift).
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log (weight · Σ |v_k|^p)`.
pub fn log_weighted_power_sum(values: impl Iterator<Item = f64> + Clone, p: f64, weight: f64) -> f64 {
    weight.ln() + log_sum_exp(values.map(|v| if v == 0.0 { f64::NEG_INFINITY } else { p * v.abs().ln() }))
}

/// `log Σ |v_k|^p`, evaluated as `p log m + log Σ (|v_k|/m)^p` with
/// `m = max |v_k|` (a log-sum-exp shifted by its largest term).
pub fn log_power_sum(values: impl Iterator<Item = f64> + Clone, p: f64) -> f64 {
    let m = values.clone().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m == 0.0 {
        return f64::NEG_INFINITY;
    }
    let inv = 1.0 / m;
    p * m.ln() + values.map(|v| (v.abs() * inv).powf(p)).sum::<f64>().ln()
}
