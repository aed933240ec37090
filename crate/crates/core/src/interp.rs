//! Interpolation of vector-valued samples on a uniform grid.
//!
//! Open grids cover `[0, length]` with `n` nodes including both ends. Periodic
//! grids have `n` nodes at `k * length / n`; the value at `length` is the value
//! at `0`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
}

/// Piecewise interpolant of `dim`-vectors sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct Interpolant {
    values: Vec<f64>,
    second: Vec<f64>,
    n: usize,
    dim: usize,
    step: f64,
    length: f64,
    periodic: bool,
    kind: Interpolation,
}

impl Interpolant {
    pub fn new(
        values: &[f64],
        dim: usize,
        length: f64,
        periodic: bool,
        kind: Interpolation,
    ) -> Self {
        let n = values.len() / dim;
        assert!(n >= 3 && values.len() == n * dim, "need at least 3 samples");
        let step = if periodic {
            length / n as f64
        } else {
            length / (n - 1) as f64
        };
        let second = match kind {
            Interpolation::Linear => vec![0.0; n * dim],
            Interpolation::Cubic => {
                let mut m = vec![0.0; n * dim];
                let mut col = vec![0.0; n];
                for c in 0..dim {
                    for (k, y) in col.iter_mut().enumerate() {
                        *y = values[k * dim + c];
                    }
                    let mc = if periodic {
                        periodic_second_derivatives(&col, step)
                    } else {
                        clamped_second_derivatives(&col, step)
                    };
                    for (k, v) in mc.into_iter().enumerate() {
                        m[k * dim + c] = v;
                    }
                }
                m
            }
        };
        Self {
            values: values.to_vec(),
            second,
            n,
            dim,
            step,
            length,
            periodic,
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> Interpolation {
        self.kind
    }

    /// Interval index and local coordinate in `[0, 1]` (may leave the range
    /// slightly for open grids when `x` is outside the domain).
    fn locate(&self, x: f64) -> (usize, usize, f64) {
        if self.periodic {
            let mut u = x.rem_euclid(self.length) / self.step;
            if u >= self.n as f64 {
                u = 0.0;
            }
            let i = (u.floor() as usize).min(self.n - 1);
            let j = (i + 1) % self.n;
            (i, j, u - i as f64)
        } else {
            let u = x / self.step;
            let i = (u.floor().max(0.0) as usize).min(self.n - 2);
            (i, i + 1, u - i as f64)
        }
    }

    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let (i, j, t) = self.locate(x);
        let (a, b) = (1.0 - t, t);
        let h2 = self.step * self.step / 6.0;
        let cubic = self.kind == Interpolation::Cubic;
        for c in 0..self.dim {
            let yi = self.values[i * self.dim + c];
            let yj = self.values[j * self.dim + c];
            let mut s = a * yi + b * yj;
            if cubic {
                let mi = self.second[i * self.dim + c];
                let mj = self.second[j * self.dim + c];
                s += ((a * a * a - a) * mi + (b * b * b - b) * mj) * h2;
            }
            out[c] = s;
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// First derivative with respect to the grid coordinate.
    pub fn derivative_into(&self, x: f64, out: &mut [f64]) {
        let (i, j, t) = self.locate(x);
        let (a, b) = (1.0 - t, t);
        let h6 = self.step / 6.0;
        let cubic = self.kind == Interpolation::Cubic;
        for c in 0..self.dim {
            let yi = self.values[i * self.dim + c];
            let yj = self.values[j * self.dim + c];
            let mut s = (yj - yi) / self.step;
            if cubic {
                let mi = self.second[i * self.dim + c];
                let mj = self.second[j * self.dim + c];
                s += ((1.0 - 3.0 * a * a) * mi + (3.0 * b * b - 1.0) * mj) * h6;
            }
            out[c] = s;
        }
    }

    pub fn derivative(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.derivative_into(x, &mut out);
        out
    }
}

/// One-sided derivative estimate at the left end of `y` (fourth order when
/// five samples are available).
fn end_slope(y: &[f64], h: f64) -> f64 {
    if y.len() >= 5 {
        (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * h)
    } else {
        (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h)
    }
}

fn clamped_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let d0 = end_slope(y, h);
    let rev: Vec<f64> = y.iter().rev().copied().collect();
    let dn = -end_slope(&rev, h);
    let mut sub = vec![1.0; n];
    let mut diag = vec![4.0; n];
    let mut sup = vec![1.0; n];
    let mut rhs = vec![0.0; n];
    let s = 6.0 / (h * h);
    for i in 1..n - 1 {
        rhs[i] = s * (y[i + 1] - 2.0 * y[i] + y[i - 1]);
    }
    diag[0] = 2.0;
    sup[0] = 1.0;
    rhs[0] = 6.0 / h * ((y[1] - y[0]) / h - d0);
    diag[n - 1] = 2.0;
    sub[n - 1] = 1.0;
    rhs[n - 1] = 6.0 / h * (dn - (y[n - 1] - y[n - 2]) / h);
    sub[0] = 0.0;
    sup[n - 1] = 0.0;
    solve_tridiagonal(&sub, &diag, &sup, &rhs)
}

fn periodic_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let s = 6.0 / (h * h);
    let rhs: Vec<f64> = (0..n)
        .map(|i| s * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n]))
        .collect();
    solve_cyclic(1.0, 4.0, 1.0, &rhs)
}

/// Thomas algorithm. `sub[0]` and `sup[n-1]` are ignored.
pub(crate) fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / den } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Constant-coefficient cyclic tridiagonal solve via Sherman–Morrison.
pub(crate) fn solve_cyclic(a: f64, b: f64, c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let sub = vec![a; n];
    let sup = vec![c; n];
    let x = solve_tridiagonal(&sub, &diag, &sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = a;
    let z = solve_tridiagonal(&sub, &diag, &sup, &u);
    let fact = (x[0] + c * x[n - 1] / gamma) / (1.0 + z[0] + c * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect()
}
