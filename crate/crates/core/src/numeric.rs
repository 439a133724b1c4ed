//! Small numeric helpers: compensated summation, ordinary least squares,
//! tiny linear solves, and the output float format.

/// Kahan compensated accumulator. Keeps per-bin and total sums accurate to a
/// few ulps regardless of the number of terms, which is what lets scale
/// invariance hold at 1e-12 on 196-country matrices.
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
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Format a float with 17 significant digits so that parsing the text
/// reproduces the exact bit pattern.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Result of a least-squares line fit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Centered ordinary least squares of y on x with intercept.
///
/// R² follows the zero-variance convention: a response with no variation is
/// fitted exactly by the constant line, so R² is 1 rather than 0/0. The
/// variance floor guards against rounding dust in the centered sums.
pub(crate) fn ols_line(xs: &[f64], ys: &[f64]) -> LineFit {
    debug_assert_eq!(xs.len(), ys.len());
    debug_assert!(xs.len() >= 2);
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;

    let mut s_xx = 0.0;
    let mut s_xy = 0.0;
    let mut ss_tot = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        s_xx += dx * dx;
        s_xy += dx * dy;
        ss_tot += dy * dy;
    }

    let slope = if s_xx > 0.0 { s_xy / s_xx } else { 0.0 };
    let intercept = y_mean - slope * x_mean;

    let y_scale = ys.iter().fold(1.0_f64, |m, y| m.max(y.abs()));
    if ss_tot <= 1e-28 * n * y_scale * y_scale {
        return LineFit {
            intercept,
            slope,
            r_squared: 1.0,
        };
    }

    let mut ss_res = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        ss_res += r * r;
    }
    LineFit {
        intercept,
        slope,
        r_squared: 1.0 - ss_res / ss_tot,
    }
}

/// Mean and population standard deviation (divide by n).
pub(crate) fn mean_and_population_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Solve a small (n ≤ 3) linear system in place by Gaussian elimination with
/// partial pivoting. Returns None when the system is numerically singular.
pub(crate) fn solve_small(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], n: usize) -> Option<Vec<f64>> {
    debug_assert!(n >= 1 && n <= 3);
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            a.swap(pivot, col);
            b.swap(pivot, col);
        }
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}
