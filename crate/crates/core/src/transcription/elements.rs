//! Small nonlinear blocks of the constraint function. Each element maps a
//! handful of decision variables to a few row contributions and is
//! differentiated with dual numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{Dual, Scalar};
use crate::dynamics::{link_scaling_generic, Cr3bpModel, DynamicsError, Er3bpModel, SystemParams};
use crate::nlp::{EvalError, EvalResult};

/// Constants shared by all elements of one transcription.
#[derive(Debug, Clone)]
pub(crate) struct Context {
    pub er3bp: Er3bpModel,
    pub cr3bp: Cr3bpModel,
    pub sys: SystemParams,
    /// `(R_i + h_i) / a` for each primary.
    pub alt: [f64; 2],
}

/// Position of a collocation point inside its phase: the interval starts at
/// normalized `start`, has normalized `width`, and the point sits at `t` in
/// `[-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Point {
    pub start: f64,
    pub width: f64,
    pub t: f64,
}

impl Point {
    /// `(ν, dν/dt)` at the point for phase span `[nu0, nuf]`.
    fn anomaly<T: Scalar>(&self, nu0: T, nuf: T) -> (T, T) {
        let span = nuf - nu0;
        let nu = nu0 + span * (self.start + 0.5 * (self.t + 1.0) * self.width);
        (nu, span * (0.5 * self.width))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Kind {
    /// `[x(8), u(5), ν₀, ν_f]` → `-h F(x, u, ν)`.
    TransferDefect(Point),
    /// `[x(6), ν₀, ν_f]` → `-h F(x)` for the 7 coast components.
    CoastDefect(Point),
    /// `[u(3)]` → `|u|² - 1`.
    UnitNorm,
    /// `[δ₁, δ₂]` → `δ₁ δ₂`.
    Complementarity,
    /// `[x, y, z, ν₀, ν_f]` → `(R_i + h_i)/a - γ(ν) r_i` for both primaries.
    Altitude(Point),
    /// `[δ₁, ν₀, ν_f]` → `-w h q'(δ₁, ν)`.
    Mode1Flow(Point, f64),
    /// `[c, s]` → `c² + s² - 1`.
    StaticUnit,
    /// `[c, s]` → `-(atan2(s, c) + π) / 2π · period`.
    CoastDuration(f64),
    /// `[c, s]` → `-(atan2(s, c) + π)`.
    InitialAnomaly,
    /// `[r(3), ν]` → `-γ(ν) r`.
    PositionLink,
    /// `[v_c(3), r(3), v(3), ν]` → `k_v v_c - (v + η r + ξ (-y, x, 0))`.
    VelocityLink,
}

impl Kind {
    pub fn inputs(&self) -> usize {
        match self {
            Kind::TransferDefect(_) => 15,
            Kind::CoastDefect(_) => 8,
            Kind::UnitNorm => 3,
            Kind::Complementarity | Kind::StaticUnit | Kind::CoastDuration(_) | Kind::InitialAnomaly => 2,
            Kind::Altitude(_) => 5,
            Kind::Mode1Flow(..) => 3,
            Kind::PositionLink => 4,
            Kind::VelocityLink => 10,
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Kind::TransferDefect(_) => 8,
            Kind::CoastDefect(_) => 7,
            Kind::Altitude(_) => 2,
            Kind::PositionLink | Kind::VelocityLink => 3,
            _ => 1,
        }
    }

    pub fn eval<T: Scalar>(&self, ctx: &Context, x: &[T], out: &mut [T]) -> Result<(), DynamicsError> {
        match self {
            Kind::TransferDefect(pt) => {
                let (nu, h) = pt.anomaly(x[13], x[14]);
                let s: [T; 8] = x[0..8].try_into().unwrap();
                let u: [T; 5] = x[8..13].try_into().unwrap();
                let f = ctx.er3bp.rhs(&s, &u, nu)?;
                for i in 0..8 {
                    out[i] = -(h * f[i]);
                }
            }
            Kind::CoastDefect(pt) => {
                let (_, h) = pt.anomaly(x[6], x[7]);
                let s = [x[0], x[1], x[2], x[3], x[4], x[5], T::cst(0.0)];
                let f = ctx.cr3bp.rhs(&s)?;
                for i in 0..7 {
                    out[i] = -(h * f[i]);
                }
            }
            Kind::UnitNorm => out[0] = x[0] * x[0] + x[1] * x[1] + x[2] * x[2] - 1.0,
            Kind::Complementarity => out[0] = x[0] * x[1],
            Kind::Altitude(pt) => {
                let (nu, _) = pt.anomaly(x[3], x[4]);
                let e = ctx.sys.eccentricity;
                let gamma = (nu.cos() * e + 1.0).recip() * (1.0 - e * e);
                let mu = ctx.sys.mu;
                let yz = x[1] * x[1] + x[2] * x[2];
                let r1 = ((x[0] + mu) * (x[0] + mu) + yz).sqrt();
                let r2 = ((x[0] - (1.0 - mu)) * (x[0] - (1.0 - mu)) + yz).sqrt();
                out[0] = -(gamma * r1) + ctx.alt[0];
                out[1] = -(gamma * r2) + ctx.alt[1];
            }
            Kind::Mode1Flow(pt, w) => {
                let (nu, h) = pt.anomaly(x[1], x[2]);
                out[0] = -(h * ctx.er3bp.mode1_flow(x[0], nu) * *w);
            }
            Kind::StaticUnit => out[0] = x[0] * x[0] + x[1] * x[1] - 1.0,
            Kind::CoastDuration(period) => {
                out[0] = -((x[1].atan2(x[0]) + std::f64::consts::PI) * (period / (2.0 * std::f64::consts::PI)));
            }
            Kind::InitialAnomaly => out[0] = -(x[1].atan2(x[0]) + std::f64::consts::PI),
            Kind::PositionLink => {
                let l = link_scaling_generic(&ctx.sys, x[3]);
                for i in 0..3 {
                    out[i] = -(l.gamma * x[i]);
                }
            }
            Kind::VelocityLink => {
                let l = link_scaling_generic(&ctx.sys, x[9]);
                let (r, v) = (&x[3..6], &x[6..9]);
                out[0] = l.velocity_factor * x[0] - (v[0] + l.eta * r[0] - l.xi * r[1]);
                out[1] = l.velocity_factor * x[1] - (v[1] + l.eta * r[1] + l.xi * r[0]);
                out[2] = l.velocity_factor * x[2] - (v[2] + l.eta * r[2]);
            }
        }
        Ok(())
    }
}

fn eval_dual<const N: usize>(
    kind: &Kind,
    ctx: &Context,
    x: &[f64],
    val: &mut [f64],
    jac: &mut [f64],
) -> Result<(), DynamicsError> {
    let xd: Vec<Dual<N>> = x.iter().enumerate().map(|(k, v)| Dual::var(*v, k)).collect();
    let mut out = vec![Dual::<N>::constant(0.0); kind.outputs()];
    kind.eval(ctx, &xd, &mut out)?;
    let n = x.len();
    for (o, d) in out.iter().enumerate() {
        val[o] = d.v;
        jac[o * n..(o + 1) * n].copy_from_slice(&d.d[..n]);
    }
    Ok(())
}

/// Values and dense row-major Jacobian of one element.
pub(crate) fn eval_with_jacobian(
    kind: &Kind,
    ctx: &Context,
    x: &[f64],
    val: &mut [f64],
    jac: &mut [f64],
) -> Result<(), DynamicsError> {
    match x.len() {
        0..=4 => eval_dual::<4>(kind, ctx, x, val, jac),
        5..=8 => eval_dual::<8>(kind, ctx, x, val, jac),
        _ => eval_dual::<16>(kind, ctx, x, val, jac),
    }
}

/// One placed element: its inputs are decision variables `vars`, its
/// outputs are added to constraint rows `rows`.
#[derive(Debug, Clone)]
pub(crate) struct Element {
    pub kind: Kind,
    pub vars: Vec<usize>,
    pub rows: Vec<usize>,
    /// `(output, input)` pairs with a structurally nonzero derivative.
    pub jac_pattern: Vec<(usize, usize)>,
    /// Lower-triangle `(input, input)` pairs of the output Hessians.
    pub hess_pattern: Vec<(usize, usize)>,
}

impl Element {
    /// Places an element, detecting its derivative pattern from dual
    /// evaluations at random inputs.
    pub fn new(kind: Kind, vars: Vec<usize>, rows: Vec<usize>, ctx: &Context) -> Self {
        let (ni, no) = (kind.inputs(), kind.outputs());
        assert_eq!(vars.len(), ni);
        assert_eq!(rows.len(), no);
        let mut rng = ChaCha8Rng::seed_from_u64(ni as u64 * 131 + no as u64);
        let mut nz = vec![false; ni * no];
        let (mut val, mut jac) = (vec![0.0; no], vec![0.0; ni * no]);
        for _ in 0..3 {
            let x: Vec<f64> = (0..ni).map(|_| rng.gen_range(0.3..0.9)).collect();
            eval_with_jacobian(&kind, ctx, &x, &mut val, &mut jac).expect("element defined on probe box");
            for (f, j) in nz.iter_mut().zip(&jac) {
                *f |= *j != 0.0;
            }
        }
        let mut jac_pattern = Vec::new();
        let mut hess = std::collections::BTreeSet::new();
        for o in 0..no {
            let deps: Vec<usize> = (0..ni).filter(|k| nz[o * ni + k]).collect();
            for &k in &deps {
                jac_pattern.push((o, k));
                for &l in &deps {
                    if l <= k {
                        hess.insert((k, l));
                    }
                }
            }
        }
        Self { kind, vars, rows, jac_pattern, hess_pattern: hess.into_iter().collect() }
    }

    pub fn gather(&self, z: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&j| z[j]).collect()
    }

    fn error(&self, e: DynamicsError) -> EvalError {
        EvalError::new(format!("{:?} element at rows {:?}: {e}", self.kind, self.rows))
    }

    pub fn values(&self, ctx: &Context, z: &[f64], out: &mut [f64]) -> EvalResult<()> {
        self.kind.eval(ctx, &self.gather(z), out).map_err(|e| self.error(e))
    }

    pub fn jacobian(&self, ctx: &Context, z: &[f64], val: &mut [f64], jac: &mut [f64]) -> EvalResult<()> {
        eval_with_jacobian(&self.kind, ctx, &self.gather(z), val, jac).map_err(|e| self.error(e))
    }

    /// Lower-triangle values of `Σ_o w_o ∇² out_o` on `hess_pattern`, by
    /// central differences of the exact gradient.
    pub fn hessian(&self, ctx: &Context, z: &[f64], w: &[f64], out: &mut [f64]) -> EvalResult<()> {
        let (ni, no) = (self.kind.inputs(), self.kind.outputs());
        let x0 = self.gather(z);
        let mut cols = vec![vec![0.0; ni]; ni];
        let mut touched = vec![false; ni];
        for &(k, l) in &self.hess_pattern {
            touched[k] = true;
            touched[l] = true;
        }
        let (mut val, mut jac) = (vec![0.0; no], vec![0.0; ni * no]);
        let mut grad = |x: &[f64], g: &mut [f64]| -> EvalResult<()> {
            eval_with_jacobian(&self.kind, ctx, x, &mut val, &mut jac).map_err(|e| self.error(e))?;
            g.fill(0.0);
            for o in 0..no {
                if w[o] != 0.0 {
                    for i in 0..ni {
                        g[i] += w[o] * jac[o * ni + i];
                    }
                }
            }
            Ok(())
        };
        let (mut gp, mut gm) = (vec![0.0; ni], vec![0.0; ni]);
        let mut x = x0.clone();
        for k in 0..ni {
            if !touched[k] {
                continue;
            }
            let h = f64::EPSILON.cbrt() * x0[k].abs().max(1.0);
            x[k] = x0[k] + h;
            grad(&x, &mut gp)?;
            x[k] = x0[k] - h;
            grad(&x, &mut gm)?;
            x[k] = x0[k];
            for i in 0..ni {
                cols[k][i] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for (v, &(k, l)) in out.iter_mut().zip(&self.hess_pattern) {
            *v = 0.5 * (cols[k][l] + cols[l][k]);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SpacecraftParams;

    fn ctx() -> Context {
        let sys = SystemParams::earth_moon();
        Context {
            er3bp: Er3bpModel::new(&sys, &SpacecraftParams::case1()),
            cr3bp: Cr3bpModel::new(&sys),
            sys,
            alt: [(6378.137 + 500.0) / sys.semi_major_axis, (1737.1 + 200.0) / sys.semi_major_axis],
        }
    }

    fn fd_check(kind: Kind, x: &[f64]) {
        let c = ctx();
        let (ni, no) = (kind.inputs(), kind.outputs());
        let (mut val, mut jac) = (vec![0.0; no], vec![0.0; ni * no]);
        eval_with_jacobian(&kind, &c, x, &mut val, &mut jac).unwrap();
        let (mut p, mut m) = (vec![0.0; no], vec![0.0; no]);
        for k in 0..ni {
            let h = 1e-6;
            let mut w = x.to_vec();
            w[k] += h;
            kind.eval(&c, &w, &mut p).unwrap();
            w[k] -= 2.0 * h;
            kind.eval(&c, &w, &mut m).unwrap();
            for o in 0..no {
                let fd = (p[o] - m[o]) / (2.0 * h);
                assert!((fd - jac[o * ni + k]).abs() < 1e-6 * (1.0 + fd.abs()), "{kind:?} d{o}/d{k}: {fd} vs {}", jac[o * ni + k]);
            }
        }
    }

    #[test]
    fn element_jacobians_match_finite_differences() {
        let pt = Point { start: 0.2, width: 0.1, t: -0.3 };
        let xs = [0.9, -0.05, 0.1, 0.02, 0.3, -0.1, 0.4, 0.8, 0.6, 0.0, 0.8, 0.7, 0.0, 1.3, 2.1];
        fd_check(Kind::TransferDefect(pt), &xs);
        fd_check(Kind::CoastDefect(pt), &[0.9, -0.05, 0.1, 0.02, 0.3, -0.1, 1.0, 1.7]);
        fd_check(Kind::Altitude(pt), &[0.9, -0.05, 0.1, 1.0, 1.7]);
        fd_check(Kind::Mode1Flow(pt, 0.3), &[0.7, 1.0, 1.7]);
        fd_check(Kind::CoastDuration(3.3), &[0.6, -0.8]);
        fd_check(Kind::InitialAnomaly, &[-0.6, 0.8]);
        fd_check(Kind::PositionLink, &[0.9, 0.1, -0.2, 0.4]);
        fd_check(Kind::VelocityLink, &[0.1, 0.2, 0.3, 0.9, 0.1, -0.2, 0.05, -0.1, 0.2, 2.4]);
    }

    #[test]
    fn patterns_reflect_dependencies() {
        let c = ctx();
        let pt = Point { start: 0.0, width: 1.0, t: -1.0 };
        let e = Element::new(Kind::CoastDefect(pt), (0..8).collect(), (0..7).collect(), &c);
        // dx/dν = v_x depends on v_x and the span only
        let row0: Vec<usize> = e.jac_pattern.iter().filter(|p| p.0 == 0).map(|p| p.1).collect();
        assert_eq!(row0, vec![3, 6, 7]);
        let tau: Vec<usize> = e.jac_pattern.iter().filter(|p| p.0 == 6).map(|p| p.1).collect();
        assert_eq!(tau, vec![6, 7]);
        let u = Element::new(Kind::UnitNorm, vec![0, 1, 2], vec![0], &c);
        assert_eq!(u.hess_pattern, vec![(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]);
    }

    #[test]
    fn element_hessian_matches_closed_form() {
        let c = ctx();
        let e = Element::new(Kind::Complementarity, vec![0, 1], vec![0], &c);
        let mut h = vec![0.0; e.hess_pattern.len()];
        e.hessian(&c, &[0.3, 0.4], &[2.0], &mut h).unwrap();
        for (&(k, l), v) in e.hess_pattern.iter().zip(&h) {
            let exact = if k != l { 2.0 } else { 0.0 };
            assert!((v - exact).abs() < 1e-8);
        }
        let e = Element::new(Kind::StaticUnit, vec![0, 1], vec![0], &c);
        let mut h = vec![0.0; e.hess_pattern.len()];
        e.hessian(&c, &[0.3, 0.4], &[-1.5], &mut h).unwrap();
        for (&(k, l), v) in e.hess_pattern.iter().zip(&h) {
            let exact = if k == l { -3.0 } else { 0.0 };
            assert!((v - exact).abs() < 1e-8);
        }
    }
}
