//! Threshold fits.
//!
//! * The concatenation ansatz `T = U^k / (A B^(2^k - 2)) p^(-2^k)` with
//!   `k = log_Q L`, fitted by linear least squares in `(ln A, ln B)`.
//! * The finite-size-scaling quadratic `T = T_c + A x + B x^2` with
//!   `x = (p - p_c) L^(1/nu)`, fitted by variable projection: the linear
//!   coefficients are solved exactly for each `(p_c, nu)`, which is found by a
//!   grid scan followed by Nelder-Mead.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(L, p, T)` observation; `stderr` of zero means unweighted.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub l: usize,
    pub p: f64,
    pub t: f64,
    pub stderr: f64,
}

impl DataPoint {
    pub fn new(l: usize, p: f64, t: f64) -> Self {
        DataPoint { l, p, t, stderr: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq1Fit {
    pub a: f64,
    pub b: f64,
    pub p_c: f64,
    pub residual_norm: f64,
    pub u: f64,
    pub q: usize,
}

fn levels(l: usize, q: usize) -> Option<u32> {
    let mut n = 1;
    let mut k = 0;
    while n < l {
        n *= q;
        k += 1;
    }
    (n == l).then_some(k)
}

/// Concatenation-ansatz prediction of the memory time.
pub fn eq1_predict(a: f64, b: f64, u: f64, k: u32, p: f64) -> f64 {
    let two_k = 2f64.powi(k as i32);
    u.powi(k as i32) / (a * b.powf(two_k - 2.0)) * p.powf(-two_k)
}

pub fn fit_eq1(data: &[DataPoint], u: f64, q: usize) -> Result<Eq1Fit> {
    if data.is_empty() {
        return Err(Error::RankDeficient("no data".into()));
    }
    let n = data.len();
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for (i, d) in data.iter().enumerate() {
        let k = levels(d.l, q).ok_or_else(|| Error::contract(format!("L = {} is not a power of Q = {q}", d.l)))?;
        if !(d.t > 0.0 && d.p > 0.0) {
            return Err(Error::contract("T and p must be positive"));
        }
        let two_k = 2f64.powi(k as i32);
        x[(i, 0)] = -1.0;
        x[(i, 1)] = -(two_k - 2.0);
        y[i] = d.t.ln() - k as f64 * u.ln() + two_k * d.p.ln();
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-10 {
        return Err(Error::RankDeficient(
            "all points share the same hierarchy depth; ln A and ln B are not separable".into(),
        ));
    }
    let beta = svd.solve(&y, 1e-14).map_err(|e| Error::RankDeficient(e.to_string()))?;
    let residual_norm = (&x * &beta - &y).norm();
    let (a, b) = (beta[0].exp(), beta[1].exp());
    Ok(Eq1Fit {
        a,
        b,
        p_c: 1.0 / b,
        residual_norm,
        u,
        q,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq2Fit {
    pub t_c: f64,
    pub p_c: f64,
    pub nu: f64,
    pub a: f64,
    pub b: f64,
    /// Weighted sum of squared residuals.
    pub objective: f64,
    /// Scaling variable of each input point at the fitted `(p_c, nu)`.
    pub x: Vec<f64>,
    /// Bootstrap standard errors of `(T_c, p_c, nu, A, B)`.
    pub stderr: [f64; 5],
    /// Bootstrap covariance of `(T_c, p_c, nu, A, B)`.
    pub covariance: [[f64; 5]; 5],
    pub bootstrap_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eq2Options {
    pub grid_pc: usize,
    pub grid_nu: usize,
    pub nu_range: (f64, f64),
    pub max_evals: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for Eq2Options {
    fn default() -> Self {
        Eq2Options {
            grid_pc: 41,
            grid_nu: 30,
            nu_range: (0.3, 3.0),
            max_evals: 4000,
            bootstrap: 1000,
            seed: 0,
        }
    }
}

pub fn eq2_predict(t_c: f64, p_c: f64, nu: f64, a: f64, b: f64, l: usize, p: f64) -> f64 {
    let x = (p - p_c) * (l as f64).powf(1.0 / nu);
    t_c + a * x + b * x * x
}

fn weight(d: &DataPoint) -> f64 {
    if d.stderr > 0.0 {
        1.0 / (d.stderr * d.stderr)
    } else {
        1.0
    }
}

/// Best `(T_c, A, B)` and the weighted objective at fixed `(p_c, nu)`.
pub fn eq2_objective(data: &[DataPoint], p_c: f64, nu: f64) -> (f64, [f64; 3]) {
    if !(nu > 0.0) || !p_c.is_finite() {
        return (f64::INFINITY, [0.0; 3]);
    }
    let mut m = Matrix3::zeros();
    let mut r = Vector3::zeros();
    for d in data {
        let x = (d.p - p_c) * (d.l as f64).powf(1.0 / nu);
        let phi = Vector3::new(1.0, x, x * x);
        let w = weight(d);
        m += phi * phi.transpose() * w;
        r += phi * (w * d.t);
    }
    let Some(coef) = m.cholesky().map(|c| c.solve(&r)) else {
        return (f64::INFINITY, [0.0; 3]);
    };
    let obj = data
        .iter()
        .map(|d| {
            let x = (d.p - p_c) * (d.l as f64).powf(1.0 / nu);
            let res = d.t - (coef[0] + coef[1] * x + coef[2] * x * x);
            weight(d) * res * res
        })
        .sum();
    (obj, [coef[0], coef[1], coef[2]])
}

fn check_design(data: &[DataPoint]) -> Result<()> {
    let mut ls: Vec<usize> = data.iter().map(|d| d.l).collect();
    ls.sort_unstable();
    ls.dedup();
    let mut ps: Vec<f64> = data.iter().map(|d| d.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    if ls.len() < 2 {
        return Err(Error::RankDeficient("need at least two distinct L".into()));
    }
    if ps.len() < 3 {
        return Err(Error::RankDeficient("need at least three distinct p".into()));
    }
    Ok(())
}

/// Grid of `(p_c, nu, objective)` seeds.
pub fn eq2_grid(data: &[DataPoint], opts: &Eq2Options) -> Vec<(f64, f64, f64)> {
    let pmin = data.iter().map(|d| d.p).fold(f64::INFINITY, f64::min);
    let pmax = data.iter().map(|d| d.p).fold(f64::NEG_INFINITY, f64::max);
    let (n0, n1) = (opts.nu_range.0.ln(), opts.nu_range.1.ln());
    let mut out = Vec::with_capacity(opts.grid_pc * opts.grid_nu);
    for i in 0..opts.grid_pc {
        let p_c = pmin + (pmax - pmin) * i as f64 / (opts.grid_pc.max(2) - 1) as f64;
        for j in 0..opts.grid_nu {
            let nu = (n0 + (n1 - n0) * j as f64 / (opts.grid_nu.max(2) - 1) as f64).exp();
            out.push((p_c, nu, eq2_objective(data, p_c, nu).0));
        }
    }
    out
}

/// Derivative-free simplex descent; returns the best point, its value and
/// whether the tolerance was reached within `max_evals`.
fn nelder_mead(f: impl Fn(&[f64; 2]) -> f64, start: [f64; 2], step: [f64; 2], max_evals: usize) -> ([f64; 2], f64, bool) {
    let mut simplex = [start, [start[0] + step[0], start[1]], [start[0], start[1] + step[1]]];
    let mut vals = simplex.map(|x| f(&x));
    let mut evals = 3;
    let lerp = |a: &[f64; 2], b: &[f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    loop {
        let mut idx = [0, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        let spread = (vals[2] - vals[0]).abs();
        let size = (0..2)
            .map(|k| ((simplex[1][k] - simplex[0][k]).abs() + (simplex[2][k] - simplex[0][k]).abs()) / step[k].abs())
            .fold(0.0, f64::max);
        if (spread <= 1e-12 * (vals[0].abs() + 1e-300) || spread == 0.0) && size < 1e-9 || size < 1e-12 {
            return (simplex[0], vals[0], true);
        }
        if evals >= max_evals {
            return (simplex[0], vals[0], false);
        }
        let centroid = lerp(&simplex[0], &simplex[1], 0.5);
        let reflect = lerp(&simplex[2], &centroid, 2.0);
        let fr = f(&reflect);
        evals += 1;
        if fr < vals[0] {
            let expand = lerp(&simplex[2], &centroid, 3.0);
            let fe = f(&expand);
            evals += 1;
            if fe < fr {
                simplex[2] = expand;
                vals[2] = fe;
            } else {
                simplex[2] = reflect;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = reflect;
            vals[2] = fr;
        } else {
            let (contract, fc) = if fr < vals[2] {
                let c = lerp(&simplex[2], &centroid, 1.5);
                (c, f(&c))
            } else {
                let c = lerp(&simplex[2], &centroid, 0.5);
                (c, f(&c))
            };
            evals += 1;
            if fc < vals[2].min(fr) {
                simplex[2] = contract;
                vals[2] = fc;
            } else {
                for k in 1..3 {
                    simplex[k] = lerp(&simplex[0], &simplex[k], 0.5);
                    vals[k] = f(&simplex[k]);
                    evals += 1;
                }
            }
        }
    }
}

struct Eq2Point {
    p_c: f64,
    nu: f64,
    obj: f64,
    coef: [f64; 3],
}

fn refine(data: &[DataPoint], p_c: f64, nu: f64, step: [f64; 2], max_evals: usize) -> (Eq2Point, bool) {
    // Optimise over ln(nu) so the simplex never leaves nu > 0.
    let f = |x: &[f64; 2]| eq2_objective(data, x[0], x[1].exp()).0;
    let (best, obj, converged) = nelder_mead(f, [p_c, nu.ln()], step, max_evals);
    let nu = best[1].exp();
    let coef = eq2_objective(data, best[0], nu).1;
    (Eq2Point { p_c: best[0], nu, obj, coef }, converged)
}

pub fn fit_eq2(data: &[DataPoint], opts: &Eq2Options) -> Result<Eq2Fit> {
    check_design(data)?;
    let grid = eq2_grid(data, opts);
    let &(p0, nu0, _) = grid
        .iter()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .ok_or_else(|| Error::RankDeficient("empty grid".into()))?;
    let pmin = data.iter().map(|d| d.p).fold(f64::INFINITY, f64::min);
    let pmax = data.iter().map(|d| d.p).fold(f64::NEG_INFINITY, f64::max);
    let step = [(pmax - pmin) / opts.grid_pc.max(2) as f64, 0.1];
    let (best, converged) = refine(data, p0, nu0, step, opts.max_evals);
    if !converged || !best.obj.is_finite() {
        return Err(Error::NonConvergence(format!(
            "simplex budget exhausted; best so far p_c = {}, nu = {}, objective = {}",
            best.p_c, best.nu, best.obj
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples: Vec<[f64; 5]> = Vec::with_capacity(opts.bootstrap);
    let mut resample = Vec::with_capacity(data.len());
    for _ in 0..opts.bootstrap {
        resample.clear();
        for _ in 0..data.len() {
            resample.push(data[rng.random_range(0..data.len())]);
        }
        if check_design(&resample).is_err() {
            continue;
        }
        let (pt, ok) = refine(&resample, best.p_c, best.nu, step, opts.max_evals);
        if ok && pt.obj.is_finite() {
            samples.push([pt.coef[0], pt.p_c, pt.nu, pt.coef[1], pt.coef[2]]);
        }
    }
    let mut covariance = [[0.0; 5]; 5];
    let mut stderr = [0.0; 5];
    if samples.len() > 1 {
        let n = samples.len() as f64;
        let mean: [f64; 5] = std::array::from_fn(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n);
        for i in 0..5 {
            for j in 0..5 {
                covariance[i][j] = samples.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).sum::<f64>() / (n - 1.0);
            }
            stderr[i] = covariance[i][i].sqrt();
        }
    }
    let x = data
        .iter()
        .map(|d| (d.p - best.p_c) * (d.l as f64).powf(1.0 / best.nu))
        .collect();
    Ok(Eq2Fit {
        t_c: best.coef[0],
        p_c: best.p_c,
        nu: best.nu,
        a: best.coef[1],
        b: best.coef[2],
        objective: best.obj,
        x,
        stderr,
        covariance,
        bootstrap_samples: samples.len(),
    })
}
