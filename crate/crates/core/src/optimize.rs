//! Black-box minimisers used by the variational loop.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    NelderMead,
    Powell,
    Spsa,
    /// Quasi-Newton over finite-difference gradients with box bounds.
    LbfgsFiniteDifference,
    /// Derivative-free trust region over linear interpolation models.
    CobylaStyle,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 5] = [
        OptimizerKind::NelderMead,
        OptimizerKind::Powell,
        OptimizerKind::Spsa,
        OptimizerKind::LbfgsFiniteDifference,
        OptimizerKind::CobylaStyle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            OptimizerKind::NelderMead => "nelder-mead",
            OptimizerKind::Powell => "powell",
            OptimizerKind::Spsa => "spsa",
            OptimizerKind::LbfgsFiniteDifference => "lbfgs-finite-difference",
            OptimizerKind::CobylaStyle => "cobyla-style",
        }
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nelder-mead" => Ok(OptimizerKind::NelderMead),
            "powell" => Ok(OptimizerKind::Powell),
            "spsa" => Ok(OptimizerKind::Spsa),
            "lbfgs-finite-difference" | "lbfgs" | "l-bfgs-b" => Ok(OptimizerKind::LbfgsFiniteDifference),
            "cobyla-style" | "cobyla" => Ok(OptimizerKind::CobylaStyle),
            other => Err(invalid(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Budget of objective evaluations.
    #[serde(default = "default_max_evaluations")]
    pub max_evaluations: usize,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
    #[serde(default = "default_xtol")]
    pub xtol: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Iterations over which the improvement must stay below `ftol`.
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_max_evaluations() -> usize {
    20_000
}
fn default_ftol() -> f64 {
    1e-10
}
fn default_xtol() -> f64 {
    1e-8
}
fn default_fd_step() -> f64 {
    1e-5
}
fn default_patience() -> usize {
    10
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            max_evaluations: default_max_evaluations(),
            ftol: default_ftol(),
            xtol: default_xtol(),
            seed: 0,
            fd_step: default_fd_step(),
            patience: default_patience(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_budget(mut self, max_evaluations: usize) -> Self {
        self.max_evaluations = max_evaluations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_evaluations < 1 {
            return Err(invalid("evaluation budget must be at least 1"));
        }
        for (name, v) in [("ftol", self.ftol), ("xtol", self.xtol), ("fd_step", self.fd_step)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.patience < 1 {
            return Err(invalid("patience must be at least 1"));
        }
        Ok(())
    }
}

/// Outcome of a minimisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Every objective evaluation in order, 1-based.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Parameter box for the quasi-Newton method.
pub const BOX: f64 = 2.0 * std::f64::consts::PI;

struct Tracker<'a> {
    f: &'a mut dyn FnMut(&[f64]) -> Result<f64>,
    budget: usize,
    history: Vec<(usize, f64)>,
    best_x: Vec<f64>,
    best: f64,
    trail: Vec<f64>,
    ftol: f64,
    patience: usize,
}

#[derive(Debug)]
enum Stop {
    Budget,
    Failed(Error),
}

impl From<Error> for Stop {
    fn from(e: Error) -> Self {
        Stop::Failed(e)
    }
}

type Step<T> = std::result::Result<T, Stop>;

impl<'a> Tracker<'a> {
    fn eval(&mut self, x: &[f64]) -> Step<f64> {
        if self.history.len() >= self.budget {
            return Err(Stop::Budget);
        }
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Stop::Failed(Error::Diverged(format!(
                "objective returned {v} at evaluation {}",
                self.history.len() + 1
            ))));
        }
        self.history.push((self.history.len() + 1, v));
        if v < self.best {
            self.best = v;
            self.best_x = x.to_vec();
        }
        Ok(v)
    }

    /// Record an iteration's representative value; true once the
    /// improvement over the patience window is below `ftol`.
    fn settled(&mut self, value: f64) -> bool {
        self.trail.push(value);
        let n = self.trail.len();
        n > self.patience && self.trail[n - 1 - self.patience] - value < self.ftol
    }
}

/// Minimise `f` from `x0` with the chosen method.
pub fn minimize(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x0: &[f64],
    spec: &OptimizerSpec,
) -> Result<Minimum> {
    spec.validate()?;
    if x0.is_empty() {
        return Err(invalid("cannot optimise zero parameters"));
    }
    let mut t = Tracker {
        f,
        budget: spec.max_evaluations,
        history: Vec::new(),
        best_x: x0.to_vec(),
        best: f64::INFINITY,
        trail: Vec::new(),
        ftol: spec.ftol,
        patience: spec.patience,
    };
    let outcome = match spec.kind {
        OptimizerKind::NelderMead => nelder_mead(&mut t, x0, spec),
        OptimizerKind::Powell => powell(&mut t, x0, spec),
        OptimizerKind::Spsa => spsa(&mut t, x0, spec),
        OptimizerKind::LbfgsFiniteDifference => lbfgs(&mut t, x0, spec),
        OptimizerKind::CobylaStyle => cobyla(&mut t, x0, spec),
    };
    let converged = match outcome {
        Ok(()) => true,
        Err(Stop::Budget) => false,
        Err(Stop::Failed(e)) => return Err(e),
    };
    if t.history.is_empty() {
        return Err(invalid("evaluation budget exhausted before the first call"));
    }
    Ok(Minimum {
        x: t.best_x,
        value: t.best,
        history: t.history,
        converged,
    })
}

fn nelder_mead(t: &mut Tracker, x0: &[f64], spec: &OptimizerSpec) -> Step<()> {
    let n = x0.len();
    let nf = n as f64;
    // adaptive coefficients for high dimension
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut start = x0.to_vec();
    let mut step = 0.5;
    loop {
        let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
        for i in 0..n {
            let mut v = start.clone();
            v[i] += step;
            simplex.push(v);
        }
        let mut values = simplex.iter().map(|v| t.eval(v)).collect::<Step<Vec<f64>>>()?;
        let entry_best = values.iter().copied().fold(f64::INFINITY, f64::min);
        t.trail.clear();
        loop {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            let spread = values[n] - values[0];
            let size = simplex[1..]
                .iter()
                .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            let mean = values.iter().sum::<f64>() / (n + 1) as f64;
            if (spread < spec.ftol && size < spec.xtol) || t.settled(mean) {
                break;
            }
            let centroid: Vec<f64> = (0..n)
                .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / nf)
                .collect();
            let along = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = t.eval(&xr)?;
            if fr < values[0] {
                let xe = along(alpha * gamma);
                let fe = t.eval(&xe)?;
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(alpha * rho);
                    let fc = t.eval(&xc)?;
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = t.eval(&xc)?;
                    (xc, fc)
                };
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let v: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, x)| b + sigma * (x - b))
                            .collect();
                        values[i] = t.eval(&v)?;
                        simplex[i] = v;
                    }
                }
            }
        }
        // restart around the best vertex until a restart stops paying off
        let best = values[0];
        if entry_best - best < spec.ftol {
            return Ok(());
        }
        start = simplex[0].clone();
        step = (step * 0.5).max(1e-3);
    }
}

/// Brent minimisation of `g` along a bracket `a < b < c` with `g(b)` lowest.
fn brent(
    t: &mut Tracker,
    x: &[f64],
    d: &[f64],
    (mut a, mut b, mut c): (f64, f64, f64),
    fb: f64,
    tol: f64,
) -> Step<(f64, f64)> {
    const GOLD: f64 = 0.381_966_011_250_105;
    if a > c {
        std::mem::swap(&mut a, &mut c);
    }
    let point = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + s * di).collect() };
    let (mut xm, mut w, mut v) = (b, b, b);
    let (mut fx, mut fw, mut fv) = (fb, fb, fb);
    let (mut dstep, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (a + c);
        let tol1 = tol * xm.abs() + 1e-11;
        let tol2 = 2.0 * tol1;
        if (xm - mid).abs() <= tol2 - 0.5 * (c - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (xm - w) * (fx - fv);
            let mut q = (xm - v) * (fx - fw);
            let mut p = (xm - v) * q - (xm - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = dstep;
            if p.abs() < (0.5 * q * etemp).abs() && p > q * (a - xm) && p < q * (c - xm) {
                dstep = p / q;
                let u = xm + dstep;
                if u - a < tol2 || c - u < tol2 {
                    dstep = tol1.copysign(mid - xm);
                }
                golden = false;
            }
        }
        if golden {
            e = if xm >= mid { a - xm } else { c - xm };
            dstep = GOLD * e;
        }
        let u = if dstep.abs() >= tol1 { xm + dstep } else { xm + tol1.copysign(dstep) };
        let fu = t.eval(&point(u))?;
        if fu <= fx {
            if u >= xm {
                a = xm;
            } else {
                c = xm;
            }
            (v, fv, w, fw, xm, fx) = (w, fw, xm, fx, u, fu);
        } else {
            if u < xm {
                a = u;
            } else {
                c = u;
            }
            if fu <= fw || w == xm {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == xm || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    b = xm;
    Ok((b, fx))
}

/// Line minimisation along `d` from `x` (where `f(x) = fx`).
fn line_minimize(t: &mut Tracker, x: &[f64], fx: f64, d: &[f64], tol: f64) -> Step<(f64, f64)> {
    const GROW: f64 = 1.618_033_988_749_895;
    let point = |s: f64| -> Vec<f64> { x.iter().zip(d).map(|(xi, di)| xi + s * di).collect() };
    let (mut a, mut fa) = (0.0, fx);
    let (mut b, mut fb) = (0.1, t.eval(&point(0.1))?);
    if fb > fa {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = b + GROW * (b - a);
    let mut fc = t.eval(&point(c))?;
    let mut guard = 0;
    while fc < fb && guard < 50 {
        (a, fa, b, fb) = (b, fb, c, fc);
        c = b + GROW * (b - a);
        fc = t.eval(&point(c))?;
        guard += 1;
    }
    let _ = fa;
    brent(t, x, d, (a, b, c), fb, tol)
}

fn powell(t: &mut Tracker, x0: &[f64], spec: &OptimizerSpec) -> Step<()> {
    let n = x0.len();
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    let mut x = x0.to_vec();
    let mut fx = t.eval(&x)?;
    loop {
        let start = x.clone();
        let f_start = fx;
        let (mut biggest, mut biggest_at) = (0.0, 0);
        for (i, d) in dirs.iter().enumerate() {
            let before = fx;
            let (s, fs) = line_minimize(t, &x, fx, d, 1e-6)?;
            if fs < fx {
                x.iter_mut().zip(d).for_each(|(xi, di)| *xi += s * di);
                fx = fs;
            }
            if before - fx > biggest {
                biggest = before - fx;
                biggest_at = i;
            }
        }
        if 2.0 * (f_start - fx) <= spec.ftol * (f_start.abs() + fx.abs()) + 1e-300 || t.settled(fx) {
            return Ok(());
        }
        let delta: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let extrapolated: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + d).collect();
        let fe = t.eval(&extrapolated)?;
        if fe < f_start {
            let lhs = 2.0 * (f_start - 2.0 * fx + fe) * (f_start - fx - biggest).powi(2);
            let rhs = biggest * (f_start - fe).powi(2);
            if lhs < rhs {
                let (s, fs) = line_minimize(t, &x, fx, &delta, 1e-6)?;
                if fs < fx {
                    x.iter_mut().zip(&delta).for_each(|(xi, di)| *xi += s * di);
                    fx = fs;
                }
                dirs.remove(biggest_at);
                dirs.push(delta);
            }
        }
    }
}

fn spsa(t: &mut Tracker, x0: &[f64], spec: &OptimizerSpec) -> Step<()> {
    let n = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x5150_5341);
    let (alpha, gamma_exp) = (0.602, 0.101);
    let c0 = 0.1;
    let big_a: f64 = 50.0;
    let mut x = x0.to_vec();
    let delta = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect()
    };
    // calibrate the gain so the first step moves each coordinate ~0.2 rad
    let mut mag = 0.0;
    for _ in 0..5 {
        let d = delta(&mut rng);
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + c0 * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - c0 * b).collect();
        mag += (t.eval(&xp)? - t.eval(&xm)?).abs() / (2.0 * c0) / 5.0;
    }
    let a0 = if mag > 0.0 { 0.2 * (big_a + 1.0).powf(alpha) / mag } else { 0.2 };
    let mut k = 0usize;
    loop {
        let ak = a0 / (k as f64 + 1.0 + big_a).powf(alpha);
        let ck = c0 / (k as f64 + 1.0).powf(gamma_exp);
        let d = delta(&mut rng);
        let xp: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + ck * b).collect();
        let xm: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a - ck * b).collect();
        let (fp, fm) = (t.eval(&xp)?, t.eval(&xm)?);
        let g = (fp - fm) / (2.0 * ck);
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi -= ak * g * di);
        k += 1;
        if k % 10 == 0 {
            let fx = t.eval(&x)?;
            if t.settled(fx) && ak * g.abs() < spec.xtol {
                return Ok(());
            }
        }
    }
}

fn fd_gradient(t: &mut Tracker, x: &[f64], h: f64) -> Step<Vec<f64>> {
    let mut g = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for i in 0..x.len() {
        // one-sided at the box faces
        let (hi, lo) = ((x[i] + h).min(BOX), (x[i] - h).max(-BOX));
        y[i] = hi;
        let fp = t.eval(&y)?;
        y[i] = lo;
        let fm = t.eval(&y)?;
        y[i] = x[i];
        g[i] = (fp - fm) / (hi - lo);
    }
    Ok(g)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project(x: &mut [f64]) {
    x.iter_mut().for_each(|v| *v = v.clamp(-BOX, BOX));
}

fn lbfgs(t: &mut Tracker, x0: &[f64], spec: &OptimizerSpec) -> Step<()> {
    const MEMORY: usize = 10;
    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = t.eval(&x)?;
    let mut g = fd_gradient(t, &x, spec.fd_step)?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    loop {
        // projected gradient norm
        let pg = x
            .iter()
            .zip(&g)
            .map(|(xi, gi)| ((xi - gi).clamp(-BOX, BOX) - xi).abs())
            .fold(0.0, f64::max);
        if pg < spec.xtol {
            return Ok(());
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((rho, a));
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let scale = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y), (rho, a)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        if dot(&dir, &g) >= 0.0 {
            s_hist.clear();
            y_hist.clear();
            dir = g.iter().map(|v| -v).collect();
        }
        // projected backtracking
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
            project(&mut xn);
            let moved: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let fnew = t.eval(&xn)?;
            if fnew <= fx + 1e-4 * dot(&g, &moved) {
                accepted = Some((xn, fnew, moved));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fnew, s)) = accepted else {
            if s_hist.is_empty() {
                return Ok(());
            }
            s_hist.clear();
            y_hist.clear();
            continue;
        };
        let gn = fd_gradient(t, &xn, spec.fd_step)?;
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &y) > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > MEMORY {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        x = xn;
        fx = fnew;
        g = gn;
        if t.settled(fx) {
            return Ok(());
        }
    }
}

fn cobyla(t: &mut Tracker, x0: &[f64], spec: &OptimizerSpec) -> Step<()> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = t.eval(&x)?;
    let mut radius: f64 = 0.5;
    loop {
        // linear model from forward interpolation points at the current radius
        let spacing = radius.min(0.05).max(radius * 0.1);
        let mut g = vec![0.0; n];
        let mut y = x.clone();
        for i in 0..n {
            y[i] = x[i] + spacing;
            g[i] = (t.eval(&y)? - fx) / spacing;
            y[i] = x[i];
        }
        let norm = dot(&g, &g).sqrt();
        if norm == 0.0 {
            return Ok(());
        }
        let trial: Vec<f64> = x.iter().zip(&g).map(|(a, gi)| a - radius * gi / norm).collect();
        let ft = t.eval(&trial)?;
        let predicted = radius * norm;
        let ratio = (fx - ft) / predicted;
        if ft < fx {
            x = trial;
            fx = ft;
            if ratio > 0.75 {
                radius = (radius * 2.0).min(1.0);
            } else if ratio < 0.25 {
                radius *= 0.5;
            }
        } else {
            radius *= 0.5;
        }
        if radius < spec.xtol || t.settled(fx) {
            return Ok(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosen(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 20.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn quadratic_bowl_all_kinds() {
        for kind in OptimizerKind::ALL {
            let mut f = |x: &[f64]| -> Result<f64> {
                Ok((x[0] - 0.3).powi(2) + 2.0 * (x[1] + 0.7).powi(2) + 0.5 * x[0] * x[1])
            };
            let spec = OptimizerSpec::new(kind).with_seed(3).with_budget(40_000);
            let m = minimize(&mut f, &[1.0, 1.0], &spec).unwrap();
            // analytic minimum of the bowl
            let det = 4.0 * 2.0 - 0.25;
            let (bx, by) = ((4.0 * 0.6 - 0.5 * -2.8) / det, (2.0 * -2.8 - 0.5 * 0.6) / det);
            let fmin = (bx - 0.3f64).powi(2) + 2.0 * (by + 0.7f64).powi(2) + 0.5 * bx * by;
            assert!(m.value - fmin < 1e-4, "{kind:?}: {} vs {fmin}", m.value);
            assert_eq!(m.history.len(), m.history.last().unwrap().0);
        }
    }

    #[test]
    fn rosenbrock_deterministic_methods() {
        for kind in [OptimizerKind::NelderMead, OptimizerKind::Powell, OptimizerKind::LbfgsFiniteDifference] {
            let mut f = |x: &[f64]| -> Result<f64> { Ok(rosen(x)) };
            let m = minimize(&mut f, &[-1.0, 1.5], &OptimizerSpec::new(kind)).unwrap();
            assert!(m.value < 1e-6, "{kind:?}: {}", m.value);
        }
    }

    #[test]
    fn nan_objective_is_an_error() {
        let mut f = |x: &[f64]| -> Result<f64> { Ok(if x[0] > 1.2 { f64::NAN } else { -x[0] }) };
        let r = minimize(&mut f, &[0.0], &OptimizerSpec::new(OptimizerKind::NelderMead));
        assert!(matches!(r, Err(Error::Diverged(_))));
    }

    #[test]
    fn budget_is_respected() {
        let mut f = |x: &[f64]| -> Result<f64> { Ok(rosen(x)) };
        let m = minimize(&mut f, &[-1.0, 1.5], &OptimizerSpec::new(OptimizerKind::Spsa).with_budget(50)).unwrap();
        assert_eq!(m.history.len(), 50);
        assert!(!m.converged);
    }

    #[test]
    fn same_seed_same_run() {
        let run = || {
            let mut f = |x: &[f64]| -> Result<f64> { Ok(rosen(x)) };
            minimize(&mut f, &[0.0, 0.0], &OptimizerSpec::new(OptimizerKind::Spsa).with_seed(9).with_budget(500))
                .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lbfgs_stays_in_box() {
        let mut f = |x: &[f64]| -> Result<f64> { Ok(-x[0]) };
        let m = minimize(&mut f, &[0.0], &OptimizerSpec::new(OptimizerKind::LbfgsFiniteDifference)).unwrap();
        assert!((m.x[0] - BOX).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let mut s = OptimizerSpec::new(OptimizerKind::Powell);
        s.ftol = 0.0;
        assert!(s.validate().is_err());
        assert_eq!("lbfgs".parse::<OptimizerKind>().unwrap(), OptimizerKind::LbfgsFiniteDifference);
        assert!("bfgs2".parse::<OptimizerKind>().is_err());
    }
}
