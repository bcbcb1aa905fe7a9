//! Double power-law model of per-query time against window size:
//! `T(lambda) = A * lambda^a + B * lambda^-b + C`.
//!
//! Exponents start from log-log slopes on the two flanks and are refined by
//! Nelder-Mead; for fixed exponents `A`, `B`, `C` come from relative-weighted
//! linear least squares with `A, B >= 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WindowModelFit {
    pub a_coef: f64,
    pub a_exp: f64,
    pub b_coef: f64,
    pub b_exp: f64,
    pub c_base: f64,
    /// Minimiser of the model; `None` unless both coefficients are positive.
    pub lambda_star: Option<f64>,
    /// Root-mean-square relative residual of the fit.
    pub rms_rel_residual: f64,
}

impl WindowModelFit {
    pub fn predict(&self, lambda: f64) -> f64 {
        self.a_coef * lambda.powf(self.a_exp) + self.b_coef * lambda.powf(-self.b_exp) + self.c_base
    }
}

const MIN_EXP: f64 = 1e-3;
const MAX_EXP: f64 = 5.0;

struct Linear {
    coef: [f64; 3],
    sse: f64,
}

/// Relative-weighted least squares for `A, B, C` at fixed exponents. Tries
/// every subset of the power terms and keeps the best one with non-negative
/// power coefficients.
fn solve_linear(x: &[f64], y: &[f64], a: f64, b: f64) -> Linear {
    let cols: [Vec<f64>; 3] = [
        x.iter().map(|l| l.powf(a)).collect(),
        x.iter().map(|l| l.powf(-b)).collect(),
        vec![1.0; x.len()],
    ];
    let mut best = Linear {
        coef: [0.0, 0.0, 0.0],
        sse: f64::INFINITY,
    };
    for active in [&[0usize, 1, 2][..], &[1, 2], &[0, 2], &[2]] {
        let mut m = DMatrix::zeros(x.len(), active.len());
        let mut scale = vec![0.0; active.len()];
        for (c, &j) in active.iter().enumerate() {
            for i in 0..x.len() {
                m[(i, c)] = cols[j][i] / y[i];
            }
            // Column equilibration keeps lambda^a and lambda^-b comparable.
            scale[c] = m.column(c).norm().max(f64::MIN_POSITIVE);
            let s = scale[c];
            m.column_mut(c).scale_mut(1.0 / s);
        }
        let rhs = DVector::from_element(x.len(), 1.0);
        let Ok(sol) = m.clone().svd(true, true).solve(&rhs, 1e-14) else {
            continue;
        };
        let resid = &m * &sol - &rhs;
        let mut coef = [0.0; 3];
        for (c, &j) in active.iter().enumerate() {
            coef[j] = sol[c] / scale[c];
        }
        if coef[0] < 0.0 || coef[1] < 0.0 {
            continue;
        }
        let sse = resid.norm_squared();
        if sse < best.sse {
            best = Linear { coef, sse };
        }
    }
    best
}

fn objective(x: &[f64], y: &[f64], p: [f64; 2]) -> f64 {
    let (a, b) = (p[0].exp(), p[1].exp());
    if !(MIN_EXP..=MAX_EXP).contains(&a) || !(MIN_EXP..=MAX_EXP).contains(&b) {
        return f64::INFINITY;
    }
    solve_linear(x, y, a, b).sse
}

/// Nelder-Mead over two parameters.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut vals = simplex.map(&f);
    for _ in 0..4_000 {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = order.map(|i| simplex[i]);
        vals = order.map(|i| vals[i]);
        let spread = (simplex[2][0] - simplex[0][0]).abs().max((simplex[2][1] - simplex[0][1]).abs());
        if spread < 1e-12 || (vals[2] - vals[0]).abs() <= 1e-30 + 1e-15 * vals[0].abs() && spread < 1e-8 {
            break;
        }
        let centroid = [(simplex[0][0] + simplex[1][0]) / 2.0, (simplex[0][1] + simplex[1][1]) / 2.0];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            (simplex[2], vals[2]) = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < vals[1] {
            (simplex[2], vals[2]) = (reflected, fr);
        } else {
            let contracted = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(contracted);
            if fc < vals[2].min(fr) {
                (simplex[2], vals[2]) = (contracted, fc);
            } else {
                for i in 1..3 {
                    simplex[i] = [
                        (simplex[0][0] + simplex[i][0]) / 2.0,
                        (simplex[0][1] + simplex[i][1]) / 2.0,
                    ];
                    vals[i] = f(simplex[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    (simplex[best], vals[best])
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

/// Fits the double power-law to `(lambda, time)` samples.
///
/// Needs at least five samples with positive, finite values spanning two
/// decades of `lambda`.
pub fn fit_window_model(samples: &[(f64, f64)]) -> Result<WindowModelFit> {
    if samples.len() < 5 {
        return Err(Error::Fit(format!("need at least 5 samples, got {}", samples.len())));
    }
    if samples.iter().any(|&(l, t)| !(l.is_finite() && t.is_finite() && l > 0.0 && t > 0.0)) {
        return Err(Error::Fit("samples must be positive and finite".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (lo, hi) = (s[0].0, s[s.len() - 1].0);
    if hi / lo < 100.0 {
        return Err(Error::Fit(format!(
            "window sizes span {lo}..{hi}, need at least two decades"
        )));
    }
    let x: Vec<f64> = s.iter().map(|p| p.0).collect();
    let y: Vec<f64> = s.iter().map(|p| p.1).collect();

    // Flank slopes: the left third is dominated by the decaying term, the
    // right third by the growing one.
    let third = (x.len() / 3).max(2);
    let b0 = (-loglog_slope(&x[..third], &y[..third])).clamp(0.05, 3.0);
    let a0 = loglog_slope(&x[x.len() - third..], &y[y.len() - third..]).clamp(0.05, 3.0);

    let f = |p: [f64; 2]| objective(&x, &y, p);
    let mut best: ([f64; 2], f64) = ([a0.ln(), b0.ln()], f([a0.ln(), b0.ln()]));
    let mut starts = vec![[a0, b0]];
    for a in [0.25, 0.5, 1.0, 2.0] {
        for b in [0.25, 0.5, 1.0, 2.0] {
            starts.push([a, b]);
        }
    }
    for st in starts {
        let (p, v) = nelder_mead(f, [st[0].ln(), st[1].ln()], 0.3);
        // Restart once from the optimum to shake off a collapsed simplex.
        let (p, v) = {
            let (p2, v2) = nelder_mead(f, p, 0.05);
            if v2 < v {
                (p2, v2)
            } else {
                (p, v)
            }
        };
        if v < best.1 {
            best = (p, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Fit("no feasible fit".into()));
    }
    let (a_exp, b_exp) = (best.0[0].exp(), best.0[1].exp());
    let lin = solve_linear(&x, &y, a_exp, b_exp);
    let [a_coef, b_coef, c_base] = lin.coef;
    let lambda_star = (a_coef > 0.0 && b_coef > 0.0)
        .then(|| (b_coef * b_exp / (a_coef * a_exp)).powf(1.0 / (a_exp + b_exp)));
    Ok(WindowModelFit {
        a_coef,
        a_exp,
        b_coef,
        b_exp,
        c_base,
        lambda_star,
        rms_rel_residual: (lin.sse / x.len() as f64).sqrt(),
    })
}
