//! Small deterministic minimizers for low-dimensional smooth objectives.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lo[i], self.hi[i]);
        }
    }

    pub fn at_bound(&self, x: &[f64], i: usize, margin: f64) -> bool {
        x[i] <= self.lo[i] + margin || x[i] >= self.hi[i] - margin
    }

    pub fn subset(&self, keep: &[usize]) -> Bounds {
        Bounds {
            lo: keep.iter().map(|&i| self.lo[i]).collect(),
            hi: keep.iter().map(|&i| self.hi[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerances {
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evaluations: usize,
}

/// Nelder-Mead with standard coefficients; points are clamped into `bounds`.
/// Stops when both the spread of objective values and the simplex diameter
/// fall below the tolerances.
pub(crate) fn nelder_mead<F>(f: &mut F, x0: &[f64], step: f64, bounds: &Bounds, tol: Tolerances) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = x0.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &mut Vec<f64>, evaluations: &mut usize| {
        bounds.clamp(x);
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut start = x0.to_vec();
    let f0 = eval(&mut start, &mut evaluations);
    simplex.push((start.clone(), f0));
    for i in 0..dim {
        let mut p = start.clone();
        p[i] += step;
        if p[i] > bounds.hi[i] {
            p[i] = start[i] - step;
        }
        let fp = eval(&mut p, &mut evaluations);
        simplex.push((p, fp));
    }

    let mut converged = false;
    while evaluations < tol.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(p, _)| {
                p.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tol.f_tol && diameter <= tol.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|i| simplex[..dim].iter().map(|(p, _)| p[i]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let mut reflected = along(1.0);
        let fr = eval(&mut reflected, &mut evaluations);
        if fr < simplex[0].1 {
            let mut expanded = along(2.0);
            let fe = eval(&mut expanded, &mut evaluations);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[dim].1 {
            let mut c = along(0.5);
            let fc = eval(&mut c, &mut evaluations);
            (c, fc)
        } else {
            let mut c = along(-0.5);
            let fc = eval(&mut c, &mut evaluations);
            (c, fc)
        };
        if fc < simplex[dim].1.min(fr) {
            simplex[dim] = (contracted, fc);
            continue;
        }
        // shrink toward the best point
        let best_point = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut p: Vec<f64> = entry
                .0
                .iter()
                .zip(&best_point)
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            let fp = eval(&mut p, &mut evaluations);
            *entry = (p, fp);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum {
        x,
        f,
        evaluations,
        converged,
    }
}

/// Central-difference gradient; one-sided next to a bound.
pub(crate) fn gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64, bounds: &Bounds) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut hi = x.to_vec();
            let mut lo = x.to_vec();
            hi[i] = (x[i] + h).min(bounds.hi[i]);
            lo[i] = (x[i] - h).max(bounds.lo[i]);
            let width = hi[i] - lo[i];
            if width <= 0.0 {
                0.0
            } else {
                (f(&hi) - f(&lo)) / width
            }
        })
        .collect()
}

/// Central-difference Hessian.
pub(crate) fn hessian<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let f0 = f(x);
    let mut hm = DMatrix::zeros(d, d);
    let shifted = |di: &[(usize, f64)]| {
        let mut p = x.to_vec();
        for &(i, s) in di {
            p[i] += s;
        }
        p
    };
    for i in 0..d {
        let fp = f(&shifted(&[(i, h)]));
        let fm = f(&shifted(&[(i, -h)]));
        hm[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = f(&shifted(&[(i, h), (j, h)]));
            let fpm = f(&shifted(&[(i, h), (j, -h)]));
            let fmp = f(&shifted(&[(i, -h), (j, h)]));
            let fmm = f(&shifted(&[(i, -h), (j, -h)]));
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hm[(i, j)] = v;
            hm[(j, i)] = v;
        }
    }
    hm
}

/// A few guarded Newton steps from a Nelder-Mead solution. Steps that do not
/// lower the objective are rejected, so the result is never worse.
pub(crate) fn newton_polish<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: Minimum,
    bounds: &Bounds,
    iterations: usize,
) -> Minimum {
    let mut best = start;
    for _ in 0..iterations {
        if (0..best.x.len()).any(|i| bounds.at_bound(&best.x, i, 1e-3)) {
            break;
        }
        let g = DVector::from_vec(gradient(f, &best.x, 1e-5, bounds));
        let h = hessian(f, &best.x, 1e-3);
        best.evaluations += 2 * best.x.len() + 1 + 2 * best.x.len() * best.x.len();
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&g);
        let mut improved = false;
        let mut scale = 1.0;
        for _ in 0..6 {
            let mut trial: Vec<f64> = best.x.iter().zip(step.iter()).map(|(x, s)| x - scale * s).collect();
            bounds.clamp(&mut trial);
            let ft = f(&trial);
            best.evaluations += 1;
            if ft < best.f {
                best.x = trial;
                best.f = ft;
                improved = true;
                break;
            }
            scale *= 0.5;
        }
        if !improved || step.norm() < 1e-10 {
            break;
        }
    }
    best
}
