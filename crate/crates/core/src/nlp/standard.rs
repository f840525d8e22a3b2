//! Reformulation of an [`NlpProblem`] into the equality form used by the
//! interior-point core: fixed variables removed, inequality rows given
//! bounded slacks, objective and rows scaled by their initial gradients.

use super::derivatives::{color_columns, fd_gradient, fd_jacobian, FdHessian};
use super::ipm::{Ipm, IpmError, IpmOptions, Iterate, Model, Monitor, Outcome};
use super::{
    residuals, DerivativeMode, EvalError, EvalResult, Multipliers, NlpError, NlpProblem, NlpSolution, SolveStatus,
    SolverOptions,
};

const GRADIENT_TARGET: f64 = 100.0;

enum Hessian {
    Exact,
    Fd(FdHessian),
}

pub(crate) struct StandardForm<'a, P: NlpProblem + ?Sized> {
    p: &'a P,
    mode: DerivativeMode,
    n_orig: usize,
    m: usize,
    free: Vec<usize>,
    active: Vec<bool>,
    base: Vec<f64>,
    /// slack index -> row
    slack_rows: Vec<usize>,
    row_offset: Vec<f64>,
    obj_scale: f64,
    row_scale: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    jac_orig: Vec<(usize, usize)>,
    jac_colors: Vec<usize>,
    /// internal Jacobian entry for each original entry
    jac_map: Vec<Option<usize>>,
    jac: Vec<(usize, usize)>,
    hess_orig: Vec<(usize, usize)>,
    hess_map: Vec<Option<usize>>,
    hess: Vec<(usize, usize)>,
    hessian: Hessian,
}

fn cb(stage: &'static str) -> impl Fn(EvalError) -> NlpError {
    move |source| NlpError::Callback { stage: stage.into(), source }
}

impl<'a, P: NlpProblem + ?Sized> StandardForm<'a, P> {
    fn new(p: &'a P, z0: &[f64], mode: DerivativeMode) -> Result<Self, NlpError> {
        let n = p.num_variables();
        let m = p.num_constraints();
        if z0.len() != n {
            return Err(NlpError::Dimension(format!("z0 has length {}, expected {n}", z0.len())));
        }
        let (zl, zu) = p.variable_bounds();
        let (gl, gu) = p.constraint_bounds();
        if zl.len() != n || zu.len() != n {
            return Err(NlpError::Dimension("variable bounds".into()));
        }
        if gl.len() != m || gu.len() != m {
            return Err(NlpError::Dimension("constraint bounds".into()));
        }
        for j in 0..n {
            if zl[j].is_nan() || zu[j].is_nan() || zl[j] > zu[j] || zl[j] == f64::INFINITY || zu[j] == f64::NEG_INFINITY {
                return Err(NlpError::Bounds { what: "variable", index: j, lower: zl[j], upper: zu[j] });
            }
        }
        for i in 0..m {
            if gl[i].is_nan() || gu[i].is_nan() || gl[i] > gu[i] || gl[i] == f64::INFINITY || gu[i] == f64::NEG_INFINITY {
                return Err(NlpError::Bounds { what: "constraint", index: i, lower: gl[i], upper: gu[i] });
            }
        }
        let mut base = z0.to_vec();
        let mut free = Vec::new();
        let mut pos = vec![usize::MAX; n];
        let mut active = vec![false; n];
        for j in 0..n {
            if zl[j] == zu[j] {
                base[j] = zl[j];
            } else {
                pos[j] = free.len();
                free.push(j);
                active[j] = true;
            }
        }
        let nf = free.len();
        let mut slack_rows = Vec::new();
        let mut row_offset = vec![0.0; m];
        for i in 0..m {
            if gl[i] == gu[i] {
                row_offset[i] = gl[i];
            } else {
                slack_rows.push(i);
            }
        }

        let jac_orig = p.jacobian_structure();
        for &(r, c) in &jac_orig {
            if r >= m || c >= n {
                return Err(NlpError::Dimension(format!("jacobian entry ({r}, {c}) out of range")));
            }
        }
        let jac_colors = color_columns(n, &jac_orig);
        let mut jac = Vec::new();
        let mut jac_map = Vec::with_capacity(jac_orig.len());
        for &(r, c) in &jac_orig {
            if active[c] {
                jac_map.push(Some(jac.len()));
                jac.push((r, pos[c]));
            } else {
                jac_map.push(None);
            }
        }
        for (k, &r) in slack_rows.iter().enumerate() {
            jac.push((r, nf + k));
        }

        let (hess_orig, hessian) = match p.hessian_structure() {
            Some(h) if mode == DerivativeMode::AnalyticForward => (h, Hessian::Exact),
            _ => {
                let h = fallback_hessian_pattern(n, &jac_orig, p.objective_structure());
                let fd = FdHessian::new(n, &h);
                (h, Hessian::Fd(fd))
            }
        };
        let mut hess = Vec::new();
        let mut hess_map = Vec::with_capacity(hess_orig.len());
        for &(i, j) in &hess_orig {
            if i >= n || j >= n {
                return Err(NlpError::Dimension(format!("hessian entry ({i}, {j}) out of range")));
            }
            if active[i] && active[j] {
                hess_map.push(Some(hess.len()));
                let (a, b) = (pos[i], pos[j]);
                hess.push((a.max(b), a.min(b)));
            } else {
                hess_map.push(None);
            }
        }

        let mut s = Self {
            p,
            mode,
            n_orig: n,
            m,
            free,
            active,
            base,
            slack_rows,
            row_offset,
            obj_scale: 1.0,
            row_scale: vec![1.0; m],
            lower: Vec::new(),
            upper: Vec::new(),
            jac_orig,
            jac_colors,
            jac_map,
            jac,
            hess_orig,
            hess_map,
            hess,
            hessian,
        };

        // gradient-based scaling at the starting point
        let zs = s.base.clone();
        let g = s.orig_gradient(&zs).map_err(cb("gradient"))?;
        let gmax = s.free.iter().fold(0.0f64, |a, &j| a.max(g[j].abs()));
        if gmax > GRADIENT_TARGET {
            s.obj_scale = GRADIENT_TARGET / gmax;
        }
        let jv = s.orig_jacobian(&zs).map_err(cb("jacobian"))?;
        let mut rmax = vec![0.0f64; m];
        for (k, &(r, c)) in s.jac_orig.iter().enumerate() {
            if s.active[c] {
                rmax[r] = rmax[r].max(jv[k].abs());
            }
        }
        for i in 0..m {
            if rmax[i] > GRADIENT_TARGET {
                s.row_scale[i] = GRADIENT_TARGET / rmax[i];
            }
        }
        let mut lower: Vec<f64> = s.free.iter().map(|&j| zl[j]).collect();
        let mut upper: Vec<f64> = s.free.iter().map(|&j| zu[j]).collect();
        for &r in &s.slack_rows {
            lower.push(s.row_scale[r] * gl[r]);
            upper.push(s.row_scale[r] * gu[r]);
        }
        s.lower = lower;
        s.upper = upper;
        Ok(s)
    }

    fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.base.clone();
        for (k, &j) in self.free.iter().enumerate() {
            z[j] = x[k];
        }
        z
    }

    fn initial_point(&self) -> Result<Vec<f64>, NlpError> {
        let z = &self.base;
        let mut g = vec![0.0; self.m];
        self.p.constraints(z, &mut g).map_err(cb("constraints"))?;
        let mut x: Vec<f64> = self.free.iter().map(|&j| z[j]).collect();
        for &r in &self.slack_rows {
            x.push(self.row_scale[r] * g[r]);
        }
        Ok(x)
    }

    fn orig_gradient(&self, z: &[f64]) -> EvalResult<Vec<f64>> {
        match self.mode {
            DerivativeMode::AnalyticForward => {
                let mut g = vec![0.0; self.n_orig];
                self.p.gradient(z, &mut g)?;
                Ok(g)
            }
            DerivativeMode::FiniteDifference => fd_gradient(self.p, z, Some(&self.active)),
        }
    }

    fn orig_jacobian(&self, z: &[f64]) -> EvalResult<Vec<f64>> {
        match self.mode {
            DerivativeMode::AnalyticForward => {
                let mut v = vec![0.0; self.jac_orig.len()];
                self.p.jacobian_values(z, &mut v)?;
                Ok(v)
            }
            DerivativeMode::FiniteDifference => {
                fd_jacobian(self.p, z, &self.jac_orig, &self.jac_colors, Some(&self.active))
            }
        }
    }

    fn original_multipliers(&self, it: &Iterate) -> Result<Multipliers, NlpError> {
        let nf = self.free.len();
        let lambda: Vec<f64> = (0..self.m).map(|i| it.y[i] * self.row_scale[i] / self.obj_scale).collect();
        let mut bounds = vec![0.0; self.n_orig];
        for (k, &j) in self.free.iter().enumerate() {
            bounds[j] = (it.zl[k] - it.zu[k]) / self.obj_scale;
        }
        if nf < self.n_orig {
            let z = self.expand(&it.x);
            // same callbacks as `residuals`, so the fixed rows cancel exactly
            let mut g = vec![0.0; self.n_orig];
            self.p.gradient(&z, &mut g).map_err(cb("gradient"))?;
            let mut jv = vec![0.0; self.jac_orig.len()];
            self.p.jacobian_values(&z, &mut jv).map_err(cb("jacobian"))?;
            for (&(r, c), v) in self.jac_orig.iter().zip(&jv) {
                g[c] += v * lambda[r];
            }
            for j in 0..self.n_orig {
                if !self.active[j] {
                    bounds[j] = g[j];
                }
            }
        }
        Ok(Multipliers { constraints: lambda, bounds })
    }
}

/// Row cliques of the Jacobian plus the objective's support.
fn fallback_hessian_pattern(n: usize, jac: &[(usize, usize)], obj: Option<Vec<usize>>) -> Vec<(usize, usize)> {
    let mut rows: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for &(r, c) in jac {
        rows.entry(r).or_default().push(c);
    }
    let mut set = std::collections::BTreeSet::new();
    let mut clique = |cols: &[usize]| {
        for &a in cols {
            for &b in cols {
                if a >= b {
                    set.insert((a, b));
                }
            }
        }
    };
    for cols in rows.values_mut() {
        cols.sort_unstable();
        cols.dedup();
        clique(cols);
    }
    let obj = obj.unwrap_or_else(|| (0..n).collect());
    clique(&obj);
    set.into_iter().collect()
}

impl<P: NlpProblem + ?Sized> Model for StandardForm<'_, P> {
    fn n(&self) -> usize {
        self.free.len() + self.slack_rows.len()
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
        Ok(self.obj_scale * self.p.objective(&self.expand(x))?)
    }
    fn gradient(&self, x: &[f64], g: &mut [f64]) -> EvalResult<()> {
        let go = self.orig_gradient(&self.expand(x))?;
        g.fill(0.0);
        for (k, &j) in self.free.iter().enumerate() {
            g[k] = self.obj_scale * go[j];
        }
        Ok(())
    }
    fn constraints(&self, x: &[f64], c: &mut [f64]) -> EvalResult<()> {
        self.p.constraints(&self.expand(x), c)?;
        for i in 0..self.m {
            c[i] = self.row_scale[i] * (c[i] - self.row_offset[i]);
        }
        let nf = self.free.len();
        for (k, &r) in self.slack_rows.iter().enumerate() {
            c[r] -= x[nf + k];
        }
        Ok(())
    }
    fn jac_structure(&self) -> &[(usize, usize)] {
        &self.jac
    }
    fn jacobian(&self, x: &[f64], v: &mut [f64]) -> EvalResult<()> {
        let jo = self.orig_jacobian(&self.expand(x))?;
        for (k, slot) in self.jac_map.iter().enumerate() {
            if let Some(s) = slot {
                v[*s] = self.row_scale[self.jac_orig[k].0] * jo[k];
            }
        }
        let off = self.jac.len() - self.slack_rows.len();
        v[off..].fill(-1.0);
        Ok(())
    }
    fn hess_structure(&self) -> &[(usize, usize)] {
        &self.hess
    }
    fn hessian(&self, x: &[f64], sigma: f64, y: &[f64], v: &mut [f64]) -> EvalResult<()> {
        let z = self.expand(x);
        let s = sigma * self.obj_scale;
        let lambda: Vec<f64> = (0..self.m).map(|i| y[i] * self.row_scale[i]).collect();
        let mut ho = vec![0.0; self.hess_orig.len()];
        match &self.hessian {
            Hessian::Exact => self.p.hessian_values(&z, s, &lambda, &mut ho)?,
            Hessian::Fd(fd) => {
                let lag = |w: &[f64], out: &mut [f64]| -> EvalResult<()> {
                    let g = if s != 0.0 { self.orig_gradient(w)? } else { vec![0.0; w.len()] };
                    let jv = self.orig_jacobian(w)?;
                    for j in 0..out.len() {
                        out[j] = s * g[j];
                    }
                    for (&(r, c), val) in self.jac_orig.iter().zip(&jv) {
                        out[c] += val * lambda[r];
                    }
                    Ok(())
                };
                fd.eval(&z, lag, &mut ho)?;
            }
        }
        for (k, slot) in self.hess_map.iter().enumerate() {
            if let Some(t) = slot {
                v[*t] = ho[k];
            }
        }
        Ok(())
    }
}

struct ReportCheck<'a, 'b, P: NlpProblem + ?Sized> {
    sf: &'b StandardForm<'a, P>,
    tol: f64,
}

impl<P: NlpProblem + ?Sized> Monitor for ReportCheck<'_, '_, P> {
    fn converged(&mut self, it: &Iterate) -> EvalResult<bool> {
        let z = self.sf.expand(&it.x);
        let mult = self.sf.original_multipliers(it).map_err(|e| EvalError::new(e.to_string()))?;
        let (feas, stat) =
            residuals(self.sf.p, &z, &mult, self.sf.obj_scale).map_err(|e| EvalError::new(e.to_string()))?;
        Ok(feas <= self.tol && stat <= self.tol)
    }
}

fn map_ipm(e: IpmError) -> NlpError {
    match e {
        IpmError::Eval { stage, source } => NlpError::Callback { stage: stage.into(), source },
        IpmError::Linear(l) => NlpError::Linear(l),
    }
}

pub(crate) fn solve<P: NlpProblem + ?Sized>(p: &P, z0: &[f64], opts: &SolverOptions) -> Result<NlpSolution, NlpError> {
    opts.validate()?;
    let sf = StandardForm::new(p, z0, opts.derivative_mode)?;
    let x0 = sf.initial_point()?;
    let ipm_opts = IpmOptions {
        tol: opts.tolerance,
        max_iter: opts.max_iterations,
        mu_init: opts.initial_barrier,
        restoration: true,
        push_into_bounds: true,
        bound_push: opts.bound_push,
    };
    let mut check = ReportCheck { sf: &sf, tol: opts.tolerance };
    let res = Ipm::new(&sf, &x0, None, ipm_opts).and_then(|ipm| ipm.run(&mut check)).map_err(map_ipm)?;
    let z = sf.expand(&res.iterate.x);
    let multipliers = sf.original_multipliers(&res.iterate)?;
    let (feasibility, stationarity) = residuals(p, &z, &multipliers, sf.obj_scale)?;
    let objective = p.objective(&z).map_err(cb("objective"))?;
    let status = match res.outcome {
        Outcome::Converged | Outcome::Stopped => {
            if feasibility <= opts.tolerance && stationarity <= opts.tolerance {
                SolveStatus::Optimal
            } else {
                SolveStatus::NumericalFailure
            }
        }
        Outcome::MaxIterations => SolveStatus::MaxIterations,
        Outcome::Infeasible => SolveStatus::Infeasible,
        Outcome::Failure(msg) => {
            log::warn!("nlp solve stopped: {msg}");
            SolveStatus::NumericalFailure
        }
    };
    Ok(NlpSolution {
        z,
        multipliers,
        status,
        objective,
        feasibility,
        stationarity,
        objective_scale: sf.obj_scale,
        iterations: res.iterations,
        log: res.records,
    })
}
