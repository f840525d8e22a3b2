//! Primal-dual interior-point method with a filter line search.
//!
//! Works on `min f(x) s.t. c(x) = 0, l <= x <= u`. Search directions come
//! from the regularized KKT system
//!
//! ```text
//! [ W + Σ + δw I    Jᵀ  ] [dx]     [ ∇φ + Jᵀy ]
//! [ J            −δc I  ] [dy] = − [ c        ]
//! ```
//!
//! whose inertia is corrected until it has `n` positive and `m` negative
//! pivots. Steps that no filter entry accepts trigger second-order
//! corrections and then a feasibility restoration phase, itself solved by
//! this method on an ℓ₁-penalty reformulation.

use super::ldl::{sym_matvec, Inertia, LdlError, LdlFactor, LdlSymbolic};
use super::{EvalError, EvalResult, IterationRecord};

pub(crate) trait Model {
    fn n(&self) -> usize;
    fn m(&self) -> usize;
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn objective(&self, x: &[f64]) -> EvalResult<f64>;
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> EvalResult<()>;
    fn constraints(&self, x: &[f64], c: &mut [f64]) -> EvalResult<()>;
    fn jac_structure(&self) -> &[(usize, usize)];
    fn jacobian(&self, x: &[f64], v: &mut [f64]) -> EvalResult<()>;
    /// Lower triangle, duplicates allowed.
    fn hess_structure(&self) -> &[(usize, usize)];
    fn hessian(&self, x: &[f64], sigma: f64, y: &[f64], v: &mut [f64]) -> EvalResult<()>;
}

const KAPPA_D: f64 = 1e-5;
const KAPPA_EPS: f64 = 10.0;
const KAPPA_MU: f64 = 0.2;
const THETA_MU: f64 = 1.5;
const TAU_MIN: f64 = 0.99;
const S_MAX: f64 = 100.0;
const KAPPA_SIGMA: f64 = 1e10;
const GAMMA_THETA: f64 = 1e-5;
const GAMMA_PHI: f64 = 1e-8;
const DELTA: f64 = 1.0;
const S_THETA: f64 = 1.1;
const S_PHI: f64 = 2.3;
const ETA_PHI: f64 = 1e-8;
const GAMMA_ALPHA: f64 = 0.05;
const KAPPA_SOC: f64 = 0.99;
const MAX_SOC: usize = 4;
const DW_INIT: f64 = 1e-4;
const DW_MIN: f64 = 1e-20;
const DW_MAX: f64 = 1e40;
const KAPPA_W_MINUS: f64 = 1.0 / 3.0;
const KAPPA_W_PLUS: f64 = 8.0;
const KAPPA_W_PLUS_FIRST: f64 = 100.0;
const DELTA_C_SINGULAR: f64 = 1e-8;
/// Static regularization, removed again by iterative refinement.
const STATIC_PRIMAL: f64 = 1e-8;
const STATIC_DUAL: f64 = 1e-8;
const RESTO_RHO: f64 = 1000.0;
const RESTO_KAPPA: f64 = 0.9;
const MULTIPLIER_RESET: f64 = 1e3;

#[derive(Debug, Clone)]
pub(crate) struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub mu_init: f64,
    pub restoration: bool,
    pub push_into_bounds: bool,
    /// Relative distance the starting point is moved inside its bounds.
    pub bound_push: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Outcome {
    Converged,
    Stopped,
    MaxIterations,
    Infeasible,
    Failure(String),
}

#[derive(Debug, Clone)]
pub(crate) struct Iterate {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub zl: Vec<f64>,
    pub zu: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct IpmResult {
    pub iterate: Iterate,
    pub outcome: Outcome,
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
}

#[derive(Debug, thiserror::Error)]
pub(crate) enum IpmError {
    #[error("{stage}: {source}")]
    Eval { stage: &'static str, source: EvalError },
    #[error(transparent)]
    Linear(#[from] LdlError),
}

fn ev<T>(stage: &'static str, r: EvalResult<T>) -> Result<T, IpmError> {
    r.map_err(|source| IpmError::Eval { stage, source })
}

pub(crate) trait Monitor {
    /// Extra test applied once the scaled optimality error meets the tolerance.
    fn converged(&mut self, _it: &Iterate) -> EvalResult<bool> {
        Ok(true)
    }
    /// Early termination request, checked at every iterate.
    fn stop(&mut self, _it: &Iterate) -> EvalResult<bool> {
        Ok(false)
    }
}

#[derive(Debug, Clone)]
struct Barrier {
    lo: Vec<f64>,
    up: Vec<f64>,
    has_l: Vec<bool>,
    has_u: Vec<bool>,
}

impl Barrier {
    fn new(lo: &[f64], up: &[f64]) -> Self {
        Self {
            lo: lo.to_vec(),
            up: up.to_vec(),
            has_l: lo.iter().map(|v| v.is_finite()).collect(),
            has_u: up.iter().map(|v| v.is_finite()).collect(),
        }
    }

    fn phi(&self, f: f64, x: &[f64], mu: f64) -> f64 {
        let mut v = f;
        for i in 0..x.len() {
            if self.has_l[i] {
                let s = x[i] - self.lo[i];
                v -= mu * s.ln();
                if !self.has_u[i] {
                    v += KAPPA_D * mu * s;
                }
            }
            if self.has_u[i] {
                let s = self.up[i] - x[i];
                v -= mu * s.ln();
                if !self.has_l[i] {
                    v += KAPPA_D * mu * s;
                }
            }
        }
        v
    }

    fn grad_phi(&self, g: &[f64], x: &[f64], mu: f64, out: &mut [f64]) {
        for i in 0..x.len() {
            let mut v = g[i];
            if self.has_l[i] {
                v -= mu / (x[i] - self.lo[i]);
                if !self.has_u[i] {
                    v += KAPPA_D * mu;
                }
            }
            if self.has_u[i] {
                v += mu / (self.up[i] - x[i]);
                if !self.has_l[i] {
                    v -= KAPPA_D * mu;
                }
            }
            out[i] = v;
        }
    }

    fn max_step(&self, x: &[f64], dx: &[f64], tau: f64) -> f64 {
        let mut a: f64 = 1.0;
        for i in 0..x.len() {
            if self.has_l[i] && dx[i] < 0.0 {
                a = a.min(-tau * (x[i] - self.lo[i]) / dx[i]);
            }
            if self.has_u[i] && dx[i] > 0.0 {
                a = a.min(tau * (self.up[i] - x[i]) / dx[i]);
            }
        }
        a
    }

    /// Bound-multiplier steps for a primal step `dx`.
    fn dual_steps(&self, it: &Iterate, dx: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
        let n = dx.len();
        let mut dzl = vec![0.0; n];
        let mut dzu = vec![0.0; n];
        for i in 0..n {
            if self.has_l[i] {
                let s = it.x[i] - self.lo[i];
                dzl[i] = (mu - it.zl[i] * dx[i]) / s - it.zl[i];
            }
            if self.has_u[i] {
                let s = self.up[i] - it.x[i];
                dzu[i] = (mu + it.zu[i] * dx[i]) / s - it.zu[i];
            }
        }
        (dzl, dzu)
    }
}

fn max_dual_step(z: &[f64], dz: &[f64], tau: f64) -> f64 {
    let mut a: f64 = 1.0;
    for (zi, di) in z.iter().zip(dz) {
        if *di < 0.0 {
            a = a.min(-tau * zi / di);
        }
    }
    a
}

fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

struct Kkt {
    n: usize,
    m: usize,
    entries: Vec<(usize, usize)>,
    nh: usize,
    vals: Vec<f64>,
    target: Vec<f64>,
    reg: Vec<f64>,
    factor: LdlFactor,
}

impl Kkt {
    fn new(n: usize, m: usize, hess: &[(usize, usize)], jac: &[(usize, usize)]) -> Result<Self, LdlError> {
        let mut entries: Vec<(usize, usize)> = hess.iter().map(|&(i, j)| (i.max(j), i.min(j))).collect();
        let nh = entries.len();
        entries.extend(jac.iter().map(|&(r, c)| (n + r, c)));
        let late: Vec<bool> = (0..n + m).map(|i| i >= n).collect();
        let sym = LdlSymbolic::new(n + m, &entries, Some(&late))?;
        Ok(Self {
            n,
            m,
            vals: vec![0.0; entries.len()],
            entries,
            nh,
            target: vec![0.0; n + m],
            reg: vec![0.0; n + m],
            factor: LdlFactor::new(sym),
        })
    }

    fn load(&mut self, hv: Option<&[f64]>, jv: &[f64]) {
        match hv {
            Some(h) => self.vals[..self.nh].copy_from_slice(h),
            None => self.vals[..self.nh].fill(0.0),
        }
        self.vals[self.nh..].copy_from_slice(jv);
    }

    /// `None` signals a zero or non-finite pivot.
    fn factor(&mut self, primal: &[f64], dw: f64, dc: f64) -> Result<Option<Inertia>, LdlError> {
        for i in 0..self.n {
            self.target[i] = primal[i] + dw;
            self.reg[i] = self.target[i] + STATIC_PRIMAL;
        }
        for r in 0..self.m {
            self.target[self.n + r] = -dc;
            self.reg[self.n + r] = -dc - STATIC_DUAL;
        }
        match self.factor.factor(&self.vals, &self.reg, 0.0) {
            Ok(i) => Ok(Some(i)),
            Err(LdlError::ZeroPivot(_)) | Err(LdlError::NonFinite(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn residual(&self, rhs: &[f64], x: &[f64], r: &mut [f64]) -> f64 {
        sym_matvec(self.n + self.m, &self.entries, &self.vals, &self.target, x, r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        norm_inf(r)
    }

    /// Solves against the unregularized target matrix by iterative refinement.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.factor.solve(&mut x);
        let scale = 1.0 + norm_inf(rhs);
        let mut r = vec![0.0; rhs.len()];
        let mut rn = self.residual(rhs, &x, &mut r);
        let mut xn = vec![0.0; rhs.len()];
        let mut rt = vec![0.0; rhs.len()];
        for _ in 0..10 {
            if rn <= 1e-14 * scale || !rn.is_finite() {
                break;
            }
            self.factor.solve(&mut r);
            for i in 0..x.len() {
                xn[i] = x[i] + r[i];
            }
            let rn2 = self.residual(rhs, &xn, &mut rt);
            if rn2 < 0.9 * rn {
                std::mem::swap(&mut x, &mut xn);
                std::mem::swap(&mut r, &mut rt);
                rn = rn2;
            } else {
                break;
            }
        }
        x
    }
}

struct Trial {
    x: Vec<f64>,
    f: f64,
    c: Vec<f64>,
    alpha: f64,
    dx: Vec<f64>,
    dy: Vec<f64>,
    kind: char,
}

pub(crate) struct Ipm<'a, M: Model + 'a> {
    model: &'a M,
    opts: IpmOptions,
    n: usize,
    m: usize,
    b: Barrier,
    kkt: Kkt,
    it: Iterate,
    f: f64,
    g: Vec<f64>,
    c: Vec<f64>,
    jv: Vec<f64>,
    hv: Vec<f64>,
    mu: f64,
    tau: f64,
    filter: Vec<(f64, f64)>,
    theta_max: f64,
    theta_min: f64,
    dw_last: f64,
    iter: usize,
    records: Vec<IterationRecord>,
}

impl<'a, M: Model> Ipm<'a, M> {
    pub(crate) fn new(model: &'a M, x0: &[f64], duals: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>, opts: IpmOptions) -> Result<Self, IpmError> {
        let n = model.n();
        let m = model.m();
        let b = Barrier::new(model.lower(), model.upper());
        let mut x = x0.to_vec();
        if opts.push_into_bounds {
            for i in 0..n {
                let (l, u) = (b.lo[i], b.up[i]);
                if b.has_l[i] && b.has_u[i] {
                    let k = opts.bound_push;
                    let pl = (k * l.abs().max(1.0)).min(k * (u - l));
                    let pu = (k * u.abs().max(1.0)).min(k * (u - l));
                    x[i] = x[i].clamp(l + pl, u - pu);
                } else if b.has_l[i] {
                    x[i] = x[i].max(l + opts.bound_push * l.abs().max(1.0));
                } else if b.has_u[i] {
                    x[i] = x[i].min(u - opts.bound_push * u.abs().max(1.0));
                }
            }
        }
        let kkt = Kkt::new(n, m, model.hess_structure(), model.jac_structure())?;
        let (y, zl, zu, have_y) = match duals {
            Some((y, zl, zu)) => (y, zl, zu, true),
            None => (
                vec![0.0; m],
                b.has_l.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect(),
                b.has_u.iter().map(|&h| if h { 1.0 } else { 0.0 }).collect(),
                false,
            ),
        };
        let mut s = Self {
            model,
            n,
            m,
            b,
            kkt,
            it: Iterate { x, y, zl, zu },
            f: 0.0,
            g: vec![0.0; n],
            c: vec![0.0; m],
            jv: vec![0.0; model.jac_structure().len()],
            hv: vec![0.0; model.hess_structure().len()],
            mu: opts.mu_init,
            tau: TAU_MIN.max(1.0 - opts.mu_init),
            filter: Vec::new(),
            theta_max: 0.0,
            theta_min: 0.0,
            dw_last: 0.0,
            iter: 0,
            records: Vec::new(),
            opts,
        };
        s.eval_point()?;
        if !have_y {
            s.least_squares_multipliers()?;
        }
        let theta0 = norm1(&s.c);
        s.theta_max = 1e4 * theta0.max(1.0);
        s.theta_min = 1e-4 * theta0.max(1.0);
        Ok(s)
    }

    fn eval_point(&mut self) -> Result<(), IpmError> {
        let x = &self.it.x;
        self.f = ev("objective", self.model.objective(x))?;
        ev("gradient", self.model.gradient(x, &mut self.g))?;
        ev("constraints", self.model.constraints(x, &mut self.c))?;
        ev("jacobian", self.model.jacobian(x, &mut self.jv))?;
        let bad = !self.f.is_finite() || self.g.iter().chain(&self.c).chain(&self.jv).any(|v| !v.is_finite());
        if bad {
            return Err(IpmError::Eval { stage: "iterate", source: EvalError::new("non-finite value at accepted point") });
        }
        Ok(())
    }

    /// `min ‖∇f − zl + zu + Jᵀy‖` over y; discarded if too large.
    fn least_squares_multipliers(&mut self) -> Result<(), IpmError> {
        if self.m == 0 {
            return Ok(());
        }
        self.kkt.load(None, &self.jv);
        let ones = vec![1.0; self.n];
        if self.kkt.factor(&ones, 0.0, 0.0)?.is_none() {
            self.it.y.fill(0.0);
            return Ok(());
        }
        let mut rhs = vec![0.0; self.n + self.m];
        for i in 0..self.n {
            rhs[i] = -(self.g[i] - self.it.zl[i] + self.it.zu[i]);
        }
        let sol = self.kkt.solve(&rhs);
        let y = &sol[self.n..];
        if norm_inf(y) > MULTIPLIER_RESET || y.iter().any(|v| !v.is_finite()) {
            self.it.y.fill(0.0);
        } else {
            self.it.y.copy_from_slice(y);
        }
        Ok(())
    }

    fn jt_y(&self, y: &[f64], out: &mut [f64]) {
        for (&(r, c), v) in self.model.jac_structure().iter().zip(&self.jv) {
            out[c] += v * y[r];
        }
    }

    /// Scaled optimality error at barrier parameter `mu`, and the scaled
    /// dual infeasibility.
    fn error(&self, mu: f64) -> (f64, f64) {
        let (n, m) = (self.n, self.m);
        let mut gl = self.g.clone();
        self.jt_y(&self.it.y, &mut gl);
        let mut compl: f64 = 0.0;
        let (mut zsum, mut nz) = (0.0, 0usize);
        for i in 0..n {
            gl[i] += -self.it.zl[i] + self.it.zu[i];
            if self.b.has_l[i] {
                compl = compl.max(((self.it.x[i] - self.b.lo[i]) * self.it.zl[i] - mu).abs());
                zsum += self.it.zl[i].abs();
                nz += 1;
            }
            if self.b.has_u[i] {
                compl = compl.max(((self.b.up[i] - self.it.x[i]) * self.it.zu[i] - mu).abs());
                zsum += self.it.zu[i].abs();
                nz += 1;
            }
        }
        let ysum = norm1(&self.it.y);
        let sd = S_MAX.max((ysum + zsum) / ((m + nz).max(1) as f64)) / S_MAX;
        let sc = S_MAX.max(zsum / (nz.max(1) as f64)) / S_MAX;
        let dual = norm_inf(&gl) / sd;
        let _ = m;
        (dual.max(norm_inf(&self.c)).max(compl / sc), dual)
    }

    fn sigma(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let mut s = 0.0;
                if self.b.has_l[i] {
                    s += self.it.zl[i] / (self.it.x[i] - self.b.lo[i]);
                }
                if self.b.has_u[i] {
                    s += self.it.zu[i] / (self.b.up[i] - self.it.x[i]);
                }
                s
            })
            .collect()
    }

    /// Factors the KKT matrix, raising δw until the inertia is right.
    fn factor_with_correction(&mut self) -> Result<bool, IpmError> {
        self.kkt.load(Some(&self.hv), &self.jv);
        let sigma = self.sigma();
        let good = |i: &Option<Inertia>, n: usize, m: usize| matches!(i, Some(i) if i.positive == n && i.negative == m);
        let first = self.kkt.factor(&sigma, 0.0, 0.0)?;
        if good(&first, self.n, self.m) {
            return Ok(true);
        }
        let dc = match first {
            Some(i) if i.negative >= self.m => 0.0,
            _ => DELTA_C_SINGULAR * self.mu.powf(0.25),
        };
        if dc > 0.0 {
            let i = self.kkt.factor(&sigma, 0.0, dc)?;
            if good(&i, self.n, self.m) {
                return Ok(true);
            }
        }
        let mut dw = if self.dw_last == 0.0 { DW_INIT } else { DW_MIN.max(KAPPA_W_MINUS * self.dw_last) };
        loop {
            let i = self.kkt.factor(&sigma, dw, dc)?;
            if good(&i, self.n, self.m) {
                self.dw_last = dw;
                return Ok(true);
            }
            dw *= if self.dw_last == 0.0 { KAPPA_W_PLUS_FIRST } else { KAPPA_W_PLUS };
            if dw > DW_MAX {
                return Ok(false);
            }
        }
    }

    fn acceptable_to_filter(&self, theta: f64, phi: f64) -> bool {
        self.filter.iter().all(|&(tf, pf)| theta < tf || phi < pf)
    }

    /// Acceptance test for a trial point; returns whether it is an f-type step.
    #[allow(clippy::too_many_arguments)]
    fn accept(&self, tt: f64, pt: f64, theta: f64, phi: f64, gd: f64, alpha: f64) -> Option<bool> {
        if !(tt.is_finite() && pt.is_finite()) || tt > self.theta_max || !self.acceptable_to_filter(tt, pt) {
            return None;
        }
        let switching = gd < 0.0 && alpha * (-gd).powf(S_PHI) > DELTA * theta.powf(S_THETA);
        if theta <= self.theta_min && switching {
            let armijo = pt - (phi + ETA_PHI * alpha * gd) <= 10.0 * f64::EPSILON * phi.abs();
            return if armijo { Some(true) } else { None };
        }
        if tt <= (1.0 - GAMMA_THETA) * theta || pt <= phi - GAMMA_PHI * theta {
            Some(false)
        } else {
            None
        }
    }

    fn trial_eval(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let f = self.model.objective(x).ok()?;
        let mut c = vec![0.0; self.m];
        self.model.constraints(x, &mut c).ok()?;
        if !f.is_finite() || c.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((f, c))
    }

    fn line_search(&self, rhs_primal: &[f64], dx: &[f64], dy: &[f64], alpha_max: f64) -> Option<Trial> {
        let theta = norm1(&self.c);
        let phi = self.b.phi(self.f, &self.it.x, self.mu);
        let mut gphi = vec![0.0; self.n];
        self.b.grad_phi(&self.g, &self.it.x, self.mu, &mut gphi);
        let gd: f64 = gphi.iter().zip(dx).map(|(a, b)| a * b).sum();
        let alpha_min = if gd < 0.0 {
            let mut a = GAMMA_THETA.min(GAMMA_PHI * theta / -gd);
            if theta <= self.theta_min {
                a = a.min(DELTA * theta.powf(S_THETA) / (-gd).powf(S_PHI));
            }
            GAMMA_ALPHA * a
        } else {
            GAMMA_ALPHA * GAMMA_THETA
        };
        let mut alpha = alpha_max;
        let mut first = true;
        let mut xt = vec![0.0; self.n];
        loop {
            if alpha < alpha_min.min(alpha_max) {
                return None;
            }
            for i in 0..self.n {
                xt[i] = self.it.x[i] + alpha * dx[i];
            }
            if let Some((ft, ct)) = self.trial_eval(&xt) {
                let tt = norm1(&ct);
                let pt = self.b.phi(ft, &xt, self.mu);
                if let Some(ftype) = self.accept(tt, pt, theta, phi, gd, alpha) {
                    return Some(Trial {
                        x: xt,
                        f: ft,
                        c: ct,
                        alpha,
                        dx: dx.to_vec(),
                        dy: dy.to_vec(),
                        kind: if ftype { 'f' } else { 'h' },
                    });
                }
                if first && tt >= theta {
                    if let Some(t) = self.second_order_correction(rhs_primal, alpha, ct, tt, theta, phi, gd) {
                        return Some(t);
                    }
                }
            }
            first = false;
            alpha *= 0.5;
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn second_order_correction(
        &self,
        rhs_primal: &[f64],
        alpha: f64,
        c_trial: Vec<f64>,
        theta_trial: f64,
        theta: f64,
        phi: f64,
        gd: f64,
    ) -> Option<Trial> {
        let (n, m) = (self.n, self.m);
        let mut c_soc: Vec<f64> = (0..m).map(|i| alpha * self.c[i] + c_trial[i]).collect();
        let mut theta_old = theta_trial;
        let mut rhs = vec![0.0; n + m];
        for _ in 0..MAX_SOC {
            rhs[..n].copy_from_slice(rhs_primal);
            for i in 0..m {
                rhs[n + i] = -c_soc[i];
            }
            let sol = self.kkt.solve(&rhs);
            let (dxs, dys) = sol.split_at(n);
            let a = self.b.max_step(&self.it.x, dxs, self.tau);
            let xs: Vec<f64> = (0..n).map(|i| self.it.x[i] + a * dxs[i]).collect();
            let (fs, cs) = self.trial_eval(&xs)?;
            let ts = norm1(&cs);
            let ps = self.b.phi(fs, &xs, self.mu);
            if let Some(ftype) = self.accept(ts, ps, theta, phi, gd, alpha) {
                return Some(Trial {
                    x: xs,
                    f: fs,
                    c: cs,
                    alpha: a,
                    dx: dxs.to_vec(),
                    dy: dys.to_vec(),
                    kind: if ftype { 's' } else { 'S' },
                });
            }
            if ts > KAPPA_SOC * theta_old {
                return None;
            }
            theta_old = ts;
            for i in 0..m {
                c_soc[i] = a * c_soc[i] + cs[i];
            }
        }
        None
    }

    fn safeguard_z(&mut self) {
        for i in 0..self.n {
            if self.b.has_l[i] {
                let s = self.it.x[i] - self.b.lo[i];
                self.it.zl[i] = self.it.zl[i].clamp(self.mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * self.mu / s);
            }
            if self.b.has_u[i] {
                let s = self.b.up[i] - self.it.x[i];
                self.it.zu[i] = self.it.zu[i].clamp(self.mu / (KAPPA_SIGMA * s), KAPPA_SIGMA * self.mu / s);
            }
        }
    }

    fn record(&mut self, dual: f64, step_norm: f64, alpha: f64, kind: char) {
        let r = IterationRecord {
            iteration: self.iter,
            objective: self.f,
            infeasibility: norm1(&self.c),
            stationarity: dual,
            barrier: self.mu,
            step_norm,
            step_length: alpha,
            kind,
        };
        log::debug!(
            "ipm {:>4} f={:.10e} inf={:.3e} du={:.3e} mu={:.1e} |d|={:.2e} a={:.2e} {}",
            r.iteration, r.objective, r.infeasibility, r.stationarity, r.barrier, r.step_norm, r.step_length, r.kind
        );
        self.records.push(r);
    }

    pub(crate) fn run(mut self, mon: &mut dyn Monitor) -> Result<IpmResult, IpmError> {
        let mut best: Option<(f64, Iterate)> = None;
        let (mut last_norm, mut last_alpha, mut last_kind) = (0.0, 0.0, ' ');
        let mut tiny_streak = 0usize;
        let mut stuck = 0usize;
        let outcome = loop {
            let (e0, dual) = self.error(0.0);
            self.record(dual, last_norm, last_alpha, last_kind);
            if best.as_ref().is_none_or(|(e, _)| e0 < *e) {
                best = Some((e0, self.it.clone()));
            }
            if e0 <= self.opts.tol {
                if ev("monitor", mon.converged(&self.it))? {
                    break Outcome::Converged;
                }
                stuck += 1;
                if stuck > 20 {
                    break Outcome::Failure("tolerance unattainable in original scaling".into());
                }
            }
            if ev("monitor", mon.stop(&self.it))? {
                break Outcome::Stopped;
            }
            if self.iter >= self.opts.max_iter {
                break Outcome::MaxIterations;
            }

            let mu_floor = self.opts.tol / 10.0;
            let mut changed = false;
            while self.mu > mu_floor && (tiny_streak > 0 || self.error(self.mu).0 <= KAPPA_EPS * self.mu) {
                self.mu = mu_floor.max((KAPPA_MU * self.mu).min(self.mu.powf(THETA_MU)));
                self.tau = TAU_MIN.max(1.0 - self.mu);
                changed = true;
                tiny_streak = 0;
            }
            if changed {
                self.filter.clear();
            }

            ev("hessian", self.model.hessian(&self.it.x, 1.0, &self.it.y, &mut self.hv))?;
            if !self.factor_with_correction()? {
                break Outcome::Failure("inertia correction failed".into());
            }
            let (n, m) = (self.n, self.m);
            let mut rhs = vec![0.0; n + m];
            let mut gphi = vec![0.0; n];
            self.b.grad_phi(&self.g, &self.it.x, self.mu, &mut gphi);
            let mut jty = vec![0.0; n];
            self.jt_y(&self.it.y, &mut jty);
            for i in 0..n {
                rhs[i] = -(gphi[i] + jty[i]);
            }
            for i in 0..m {
                rhs[n + i] = -self.c[i];
            }
            let sol = self.kkt.solve(&rhs);
            if sol.iter().any(|v| !v.is_finite()) {
                break Outcome::Failure("non-finite search direction".into());
            }
            let (dx, dy) = sol.split_at(n);
            let alpha_max = self.b.max_step(&self.it.x, dx, self.tau);

            let tiny = (0..n).all(|i| dx[i].abs() / (1.0 + self.it.x[i].abs()) < 10.0 * f64::EPSILON);
            let trial = if tiny && norm_inf(&self.c) <= self.opts.tol {
                tiny_streak += 1;
                let x: Vec<f64> = (0..n).map(|i| self.it.x[i] + alpha_max * dx[i]).collect();
                self.trial_eval(&x).map(|(f, c)| Trial { x, f, c, alpha: alpha_max, dx: dx.to_vec(), dy: dy.to_vec(), kind: 't' })
            } else {
                self.line_search(&rhs[..n], dx, dy, alpha_max)
            };

            let Some(t) = trial else {
                if !self.opts.restoration {
                    break Outcome::Failure("line search failed".into());
                }
                let theta = norm1(&self.c);
                let phi = self.b.phi(self.f, &self.it.x, self.mu);
                self.filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
                match self.restore()? {
                    None => {
                        last_norm = 0.0;
                        last_alpha = 1.0;
                        last_kind = 'r';
                        continue;
                    }
                    Some(o) => break o,
                }
            };

            if t.kind == 'h' || t.kind == 'S' {
                let theta = norm1(&self.c);
                let phi = self.b.phi(self.f, &self.it.x, self.mu);
                self.filter.push(((1.0 - GAMMA_THETA) * theta, phi - GAMMA_PHI * theta));
            }
            let (dzl, dzu) = self.b.dual_steps(&self.it, &t.dx, self.mu);
            let az = max_dual_step(&self.it.zl, &dzl, self.tau).min(max_dual_step(&self.it.zu, &dzu, self.tau));
            for i in 0..n {
                self.it.zl[i] += az * dzl[i];
                self.it.zu[i] += az * dzu[i];
            }
            for i in 0..m {
                self.it.y[i] += t.alpha * t.dy[i];
            }
            last_norm = norm_inf(&t.dx) * t.alpha;
            last_alpha = t.alpha;
            last_kind = t.kind;
            self.it.x = t.x;
            self.f = t.f;
            self.c = t.c;
            ev("gradient", self.model.gradient(&self.it.x, &mut self.g))?;
            ev("jacobian", self.model.jacobian(&self.it.x, &mut self.jv))?;
            self.safeguard_z();
            self.iter += 1;
        };
        let iterate = match (&outcome, best) {
            (Outcome::Converged | Outcome::Stopped, _) | (_, None) => self.it.clone(),
            (_, Some((_, b))) => b,
        };
        Ok(IpmResult { iterate, outcome, iterations: self.iter, records: self.records })
    }

    /// Feasibility restoration. `None` means the iterate was replaced and the
    /// main loop continues.
    fn restore(&mut self) -> Result<Option<Outcome>, IpmError> {
        let (n, m) = (self.n, self.m);
        let theta_r = norm1(&self.c);
        let mu_r = self.mu.max(norm_inf(&self.c));
        let zeta = mu_r.sqrt();
        let rm = RestorationModel::new(self.model, &self.b, &self.it.x, zeta);
        let mut x0 = self.it.x.clone();
        let mut p = vec![0.0; m];
        let mut nn = vec![0.0; m];
        for i in 0..m {
            let a = (mu_r - RESTO_RHO * self.c[i]) / (2.0 * RESTO_RHO);
            nn[i] = a + (a * a + mu_r * self.c[i] / (2.0 * RESTO_RHO)).sqrt();
            p[i] = self.c[i] + nn[i];
        }
        x0.extend_from_slice(&p);
        x0.extend_from_slice(&nn);
        let mut zl: Vec<f64> = self.it.zl.iter().map(|z| z.min(RESTO_RHO)).collect();
        let mut zu: Vec<f64> = self.it.zu.iter().map(|z| z.min(RESTO_RHO)).collect();
        zl.extend(p.iter().chain(&nn).map(|v| mu_r / v));
        zu.extend(std::iter::repeat_n(0.0, 2 * m));
        let opts = IpmOptions {
            tol: self.opts.tol,
            max_iter: self.opts.max_iter.saturating_sub(self.iter),
            mu_init: mu_r,
            restoration: false,
            push_into_bounds: false,
            bound_push: self.opts.bound_push,
        };
        let mut monitor = RestoMonitor {
            model: self.model,
            b: self.b.clone(),
            filter: self.filter.clone(),
            mu: self.mu,
            theta_r,
            n,
            m,
        };
        let inner = Ipm::new(&rm, &x0, Some((vec![0.0; m], zl, zu)), opts)?;
        let res = inner.run(&mut monitor)?;
        let base = self.iter;
        self.iter += res.iterations;
        for mut r in res.records.into_iter().skip(1) {
            r.iteration += base;
            r.kind = 'r';
            self.records.push(r);
        }
        let accept_point = |s: &mut Self, it: &Iterate| -> Result<(), IpmError> {
            s.it.x.copy_from_slice(&it.x[..n]);
            s.it.zl.copy_from_slice(&it.zl[..n]);
            s.it.zu.copy_from_slice(&it.zu[..n]);
            s.eval_point()?;
            s.least_squares_multipliers()?;
            s.safeguard_z();
            Ok(())
        };
        match res.outcome {
            Outcome::Stopped => {
                accept_point(self, &res.iterate)?;
                Ok(None)
            }
            Outcome::Converged => {
                let mut c = vec![0.0; m];
                ev("constraints", self.model.constraints(&res.iterate.x[..n], &mut c))?;
                if norm_inf(&c) <= self.opts.tol {
                    accept_point(self, &res.iterate)?;
                    self.filter.clear();
                    Ok(None)
                } else {
                    accept_point(self, &res.iterate)?;
                    Ok(Some(Outcome::Infeasible))
                }
            }
            Outcome::MaxIterations => Ok(Some(Outcome::MaxIterations)),
            Outcome::Infeasible => Ok(Some(Outcome::Infeasible)),
            Outcome::Failure(s) => Ok(Some(Outcome::Failure(format!("restoration: {s}")))),
        }
    }
}

struct RestoMonitor<'a> {
    model: &'a dyn Model,
    b: Barrier,
    filter: Vec<(f64, f64)>,
    mu: f64,
    theta_r: f64,
    n: usize,
    m: usize,
}

impl Monitor for RestoMonitor<'_> {
    fn stop(&mut self, it: &Iterate) -> EvalResult<bool> {
        let x = &it.x[..self.n];
        let mut c = vec![0.0; self.m];
        self.model.constraints(x, &mut c)?;
        let theta = norm1(&c);
        if !(theta <= RESTO_KAPPA * self.theta_r) {
            return Ok(false);
        }
        let f = self.model.objective(x)?;
        let phi = self.b.phi(f, x, self.mu);
        Ok(phi.is_finite() && self.filter.iter().all(|&(tf, pf)| theta < tf || phi < pf))
    }
}

/// `min ρ Σ(p + n) + ζ/2 ‖D (x − x_R)‖²  s.t.  c(x) − p + n = 0,  p, n ≥ 0`.
struct RestorationModel<'a> {
    inner: &'a dyn Model,
    n: usize,
    m: usize,
    x_ref: Vec<f64>,
    weight: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

impl<'a> RestorationModel<'a> {
    fn new(inner: &'a dyn Model, b: &Barrier, x_ref: &[f64], zeta: f64) -> Self {
        let (n, m) = (inner.n(), inner.m());
        let weight = x_ref.iter().map(|v| zeta * (1.0 / v.abs().max(1.0)).powi(2)).collect();
        let mut lower = b.lo.clone();
        let mut upper = b.up.clone();
        lower.extend(std::iter::repeat_n(0.0, 2 * m));
        upper.extend(std::iter::repeat_n(f64::INFINITY, 2 * m));
        let mut jac = inner.jac_structure().to_vec();
        jac.extend((0..m).map(|i| (i, n + i)));
        jac.extend((0..m).map(|i| (i, n + m + i)));
        let mut hess = inner.hess_structure().to_vec();
        hess.extend((0..n).map(|j| (j, j)));
        Self { inner, n, m, x_ref: x_ref.to_vec(), weight, lower, upper, jac, hess }
    }
}

impl Model for RestorationModel<'_> {
    fn n(&self) -> usize {
        self.n + 2 * self.m
    }
    fn m(&self) -> usize {
        self.m
    }
    fn lower(&self) -> &[f64] {
        &self.lower
    }
    fn upper(&self) -> &[f64] {
        &self.upper
    }
    fn objective(&self, x: &[f64]) -> EvalResult<f64> {
        let mut v = RESTO_RHO * x[self.n..].iter().sum::<f64>();
        for j in 0..self.n {
            let d = x[j] - self.x_ref[j];
            v += 0.5 * self.weight[j] * d * d;
        }
        Ok(v)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> EvalResult<()> {
        for j in 0..self.n {
            g[j] = self.weight[j] * (x[j] - self.x_ref[j]);
        }
        g[self.n..].fill(RESTO_RHO);
        Ok(())
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) -> EvalResult<()> {
        self.inner.constraints(&x[..self.n], c)?;
        for i in 0..self.m {
            c[i] += -x[self.n + i] + x[self.n + self.m + i];
        }
        Ok(())
    }
    fn jac_structure(&self) -> &[(usize, usize)] {
        &self.jac
    }
    fn jacobian(&self, x: &[f64], v: &mut [f64]) -> EvalResult<()> {
        let k = self.inner.jac_structure().len();
        self.inner.jacobian(&x[..self.n], &mut v[..k])?;
        v[k..k + self.m].fill(-1.0);
        v[k + self.m..].fill(1.0);
        Ok(())
    }
    fn hess_structure(&self) -> &[(usize, usize)] {
        &self.hess
    }
    fn hessian(&self, x: &[f64], sigma: f64, y: &[f64], v: &mut [f64]) -> EvalResult<()> {
        let k = self.inner.hess_structure().len();
        self.inner.hessian(&x[..self.n], 0.0, y, &mut v[..k])?;
        for j in 0..self.n {
            v[k + j] = sigma * self.weight[j];
        }
        Ok(())
    }
}
