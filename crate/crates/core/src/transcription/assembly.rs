use std::collections::HashMap;

use super::constraints::{BoundRecord, ConstraintSet, RowInfo, Tag};
use super::elements::{Context, Element, Kind, Point};
use super::layout::{DecisionLayout, PhaseKind, PhaseLayout};
use super::lgr::{differentiation_matrix, lgr_points_weights};
use super::mesh::Mesh;
use super::solution::Guess;
use super::TranscriptionError;
use crate::dynamics::{Cr3bpModel, Er3bpModel};
use crate::mission::{Activity, TransferProblem};
use crate::nlp::{EvalResult, NlpProblem};

/// Normalized mass is kept above this.
pub const MASS_FLOOR: f64 = 1e-2;
/// Largest interval degree the transcription accepts.
pub const MAX_DEGREE: usize = 20;

/// Direction stored in domains where both modes are off.
const PARKED_DIRECTION: [f64; 3] = [1.0, 0.0, 0.0];

/// The finite-dimensional problem produced by [`transcribe`].
#[derive(Debug, Clone)]
pub struct TranscribedNlp {
    n: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    pub constraints: ConstraintSet,
    objective: Vec<(usize, f64)>,
    constants: Vec<f64>,
    /// `(row, column, coefficient, slot)`.
    linear: Vec<(usize, usize, f64, usize)>,
    ctx: Context,
    elements: Vec<Element>,
    /// Jacobian slot of each element's `jac_pattern` entry.
    elem_jac_slots: Vec<Vec<usize>>,
    elem_hess_slots: Vec<Vec<usize>>,
    jac: Vec<(usize, usize)>,
    hess: Vec<(usize, usize)>,
}

/// Output of [`transcribe`].
#[derive(Debug, Clone)]
pub struct Transcription {
    pub nlp: TranscribedNlp,
    pub layout: DecisionLayout,
    pub mesh: Mesh,
    /// Starting point built from the guess, inside the variable bounds.
    pub z0: Vec<f64>,
}

struct Builder {
    rows: Vec<RowInfo>,
    bounds: Vec<BoundRecord>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    constants: Vec<f64>,
    linear: Vec<(usize, usize, f64)>,
    elements: Vec<Element>,
    ctx: Context,
}

impl Builder {
    fn row(&mut self, tag: Tag, phase: Option<usize>, interval: Option<usize>, lower: f64, upper: f64) -> usize {
        self.rows.push(RowInfo { tag, phase, interval, lower, upper });
        self.constants.push(0.0);
        self.rows.len() - 1
    }

    fn eq(&mut self, tag: Tag, phase: Option<usize>) -> usize {
        self.row(tag, phase, None, 0.0, 0.0)
    }

    fn lin(&mut self, row: usize, col: usize, coef: f64) {
        self.linear.push((row, col, coef));
    }

    fn elem(&mut self, kind: Kind, vars: Vec<usize>, rows: Vec<usize>) {
        let e = Element::new(kind, vars, rows, &self.ctx);
        self.elements.push(e);
    }

    fn bound(&mut self, tag: Tag, var: usize, lower: f64, upper: f64) {
        self.bounds.push(BoundRecord { tag, variable: var, lower, upper });
        self.lower[var] = self.lower[var].max(lower);
        self.upper[var] = self.upper[var].min(upper);
    }

    fn fix(&mut self, tag: Tag, var: usize, value: f64) {
        self.bound(tag, var, value, value);
    }
}

/// Builds the collocated problem for `problem` on `mesh`, starting from `guess`.
pub fn transcribe(problem: &TransferProblem, mesh: &Mesh, guess: &Guess) -> Result<Transcription, TranscriptionError> {
    problem.validate().map_err(|e| TranscriptionError::Problem(e.to_string()))?;
    mesh.validate(1, MAX_DEGREE)?;
    let nd = problem.domains.len();
    let uses_mode1 = problem.domains.iter().any(|d| d.mode1 != Activity::Off);
    let layout = DecisionLayout::new(mesh, nd, uses_mode1)?;
    if guess.phases.len() != layout.phases.len() {
        return Err(TranscriptionError::Dimension(format!(
            "guess has {} phases, mesh has {}",
            guess.phases.len(),
            layout.phases.len()
        )));
    }
    let sys = problem.sys;
    let a = sys.semi_major_axis;
    let ctx = Context {
        er3bp: Er3bpModel::new(&sys, &problem.sc),
        cr3bp: Cr3bpModel::new(&sys),
        sys,
        alt: [(sys.radius1 + problem.min_altitudes[0]) / a, (sys.radius2 + problem.min_altitudes[1]) / a],
    };
    let tau_rate = ctx.cr3bp.tau_rate;
    let n = layout.len;
    let mut b = Builder {
        rows: Vec::new(),
        bounds: Vec::new(),
        lower: vec![f64::NEG_INFINITY; n],
        upper: vec![f64::INFINITY; n],
        constants: Vec::new(),
        linear: Vec::new(),
        elements: Vec::new(),
        ctx,
    };
    let last = nd + 1;
    let phases = &layout.phases;

    // dynamics and path constraints
    for (p, (pl, pm)) in phases.iter().zip(&mesh.phases).enumerate() {
        let domain = match pl.kind {
            PhaseKind::Transfer(d) => Some(problem.domains[d]),
            _ => None,
        };
        for k in 0..pm.num_intervals() {
            let deg = pm.degrees[k];
            let start = pm.interval_start(k);
            let dmat = differentiation_matrix(deg);
            let (pts, wts) = lgr_points_weights(deg);
            let (fa, fb) = (pm.fractions[k], pm.fractions[k + 1]);
            for j in 0..deg {
                let c = start + j;
                let pt = Point { start: fa, width: fb - fa, t: pts[j] };
                let rows: Vec<usize> =
                    (0..pl.state_dim).map(|_| b.row(Tag::Defect, Some(p), Some(k), 0.0, 0.0)).collect();
                for (i, &r) in rows.iter().enumerate() {
                    for (l, d) in dmat[j].iter().enumerate() {
                        b.lin(r, pl.state(start + l, i), *d);
                    }
                }
                let Some(dom) = domain else {
                    let mut vars: Vec<usize> = (0..6).map(|i| pl.state(c, i)).collect();
                    vars.extend([pl.nu0, pl.nuf]);
                    b.elem(Kind::CoastDefect(pt), vars, rows);
                    continue;
                };
                let mut vars: Vec<usize> = (0..8).map(|i| pl.state(c, i)).collect();
                vars.extend((0..5).map(|i| pl.control(c, i)));
                vars.extend([pl.nu0, pl.nuf]);
                b.elem(Kind::TransferDefect(pt), vars, rows);

                if !dom.is_coast() {
                    let r = b.row(Tag::UnitDirection, Some(p), Some(k), 0.0, 0.0);
                    b.elem(Kind::UnitNorm, (0..3).map(|i| pl.control(c, i)).collect(), vec![r]);
                }
                if dom.needs_complementarity() {
                    let r = b.row(Tag::Complementarity, Some(p), Some(k), 0.0, 0.0);
                    b.elem(Kind::Complementarity, vec![pl.control(c, 3), pl.control(c, 4)], vec![r]);
                }
                let r1 = b.row(Tag::Altitude, Some(p), Some(k), f64::NEG_INFINITY, 0.0);
                let r2 = b.row(Tag::Altitude, Some(p), Some(k), f64::NEG_INFINITY, 0.0);
                let mut vars: Vec<usize> = (0..3).map(|i| pl.state(c, i)).collect();
                vars.extend([pl.nu0, pl.nuf]);
                b.elem(Kind::Altitude(pt), vars, vec![r1, r2]);
                if dom.mode1 != Activity::Off {
                    // contributions to the integral row are added below
                    b.elements.push(Element::new(
                        Kind::Mode1Flow(pt, wts[j]),
                        vec![pl.control(c, 3), pl.nu0, pl.nuf],
                        vec![usize::MAX],
                        &b.ctx,
                    ));
                }
            }
        }
    }

    // propellant integral
    if let Some(qv) = layout.integral {
        let r = b.eq(Tag::PropellantIntegral, None);
        b.lin(r, qv, 1.0);
        for e in b.elements.iter_mut().filter(|e| e.rows[0] == usize::MAX) {
            e.rows[0] = r;
        }
        let hi = problem.propellant_bound.unwrap_or(f64::INFINITY);
        b.bound(Tag::PropellantBound, qv, 0.0, hi);
    }

    // static parameters
    let st = layout.statics;
    for pair in 0..3 {
        let r = b.eq(Tag::StaticUnit, None);
        b.elem(Kind::StaticUnit, vec![st + 2 * pair, st + 2 * pair + 1], vec![r]);
    }
    for i in 0..6 {
        b.bound(Tag::StaticRange, st + i, -1.0, 1.0);
    }

    // initial and terminal coasts
    let p0 = &phases[0];
    let pn = &phases[last];
    let x0 = problem.initial_orbit.defining_state;
    let xf = problem.terminal_orbit.defining_state;
    for i in 0..6 {
        b.fix(Tag::InitialState, p0.state(0, i), x0[i]);
        b.fix(Tag::TerminalState, pn.state(pn.num_nodes - 1, i), xf[i]);
    }
    b.fix(Tag::InitialState, p0.state(0, 6), 0.0);
    let coast_rows = [
        (Tag::InitialCoastDuration, p0, st, problem.initial_orbit.period),
        (Tag::TerminalCoastDuration, pn, st + 2, problem.terminal_orbit.period),
    ];
    for (tag, pl, s, period) in coast_rows {
        let r = b.eq(tag, None);
        b.lin(r, pl.state(pl.num_nodes - 1, 6), 1.0);
        b.lin(r, pl.state(0, 6), -1.0);
        b.elem(Kind::CoastDuration(period * tau_rate), vec![s, s + 1], vec![r]);
    }
    let r = b.eq(Tag::InitialAnomaly, Some(0));
    b.lin(r, p0.nu0, 1.0);
    b.elem(Kind::InitialAnomaly, vec![st + 4, st + 5], vec![r]);

    // spans and interfaces
    for (p, pl) in phases.iter().enumerate() {
        let r = b.row(Tag::Ordering, Some(p), None, 0.0, f64::INFINITY);
        b.lin(r, pl.nuf, 1.0);
        b.lin(r, pl.nu0, -1.0);
        if p < last {
            let r = b.eq(Tag::AnomalyContinuity, Some(p));
            b.lin(r, pl.nuf, 1.0);
            b.lin(r, phases[p + 1].nu0, -1.0);
        }
    }
    let first = &phases[1];
    let lastd = &phases[nd];
    b.fix(Tag::InitialMass, first.state(0, 7), 1.0);
    link(&mut b, p0, p0.num_nodes - 1, first, 0, first.nu0, 0);
    link(&mut b, pn, 0, lastd, lastd.num_nodes - 1, lastd.nuf, last - 1);
    for d in 1..nd {
        let (pa, pb) = (&phases[d], &phases[d + 1]);
        for i in 0..8 {
            let r = b.eq(Tag::DomainContinuity, Some(d));
            b.lin(r, pa.state(pa.num_nodes - 1, i), 1.0);
            b.lin(r, pb.state(0, i), -1.0);
        }
    }

    // throttles, directions, mass
    for pl in &phases[1..=nd] {
        let PhaseKind::Transfer(d) = pl.kind else { unreachable!() };
        let dom = problem.domains[d];
        for c in 0..pl.num_collocation {
            for mode in 0..2 {
                let v = pl.control(c, 3 + mode);
                match dom.activity(mode).fixed_value() {
                    Some(x) => b.fix(Tag::ThrottleStructure, v, x),
                    None => b.bound(Tag::ThrottleBounds, v, 0.0, 1.0),
                }
            }
            if dom.is_coast() {
                for i in 0..3 {
                    b.fix(Tag::ThrottleStructure, pl.control(c, i), PARKED_DIRECTION[i]);
                }
            }
        }
        let skip = if d == 0 { 1 } else { 0 };
        for k in skip..pl.num_nodes {
            b.bound(Tag::MassPositivity, pl.state(k, 7), MASS_FLOOR, f64::INFINITY);
        }
    }

    let objective = vec![(lastd.state(lastd.num_nodes - 1, 6), 1.0), (first.state(0, 6), -1.0)];
    let nlp = TranscribedNlp::assemble(b, n, objective);
    let z0 = initial_point(&nlp, &layout, mesh, guess)?;
    Ok(Transcription { nlp, layout, mesh: mesh.clone(), z0 })
}

/// Position, velocity and time continuity between a coast node and a
/// transfer node, with the frame conversion evaluated at anomaly variable
/// `nu`.
fn link(b: &mut Builder, coast: &PhaseLayout, cn: usize, tr: &PhaseLayout, tn: usize, nu: usize, phase: usize) {
    let pos: Vec<usize> = (0..3).map(|_| b.eq(Tag::PositionLink, Some(phase))).collect();
    for i in 0..3 {
        b.lin(pos[i], coast.state(cn, i), 1.0);
    }
    let mut vars: Vec<usize> = (0..3).map(|i| tr.state(tn, i)).collect();
    vars.push(nu);
    b.elem(Kind::PositionLink, vars, pos);
    let vel: Vec<usize> = (0..3).map(|_| b.eq(Tag::VelocityLink, Some(phase))).collect();
    let mut vars: Vec<usize> = (3..6).map(|i| coast.state(cn, i)).collect();
    vars.extend((0..6).map(|i| tr.state(tn, i)));
    vars.push(nu);
    b.elem(Kind::VelocityLink, vars, vel);
    let r = b.eq(Tag::TimeContinuity, Some(phase));
    b.lin(r, coast.state(cn, 6), 1.0);
    b.lin(r, tr.state(tn, 6), -1.0);
}

fn initial_point(
    nlp: &TranscribedNlp,
    layout: &DecisionLayout,
    mesh: &Mesh,
    guess: &Guess,
) -> Result<Vec<f64>, TranscriptionError> {
    let mut z = vec![0.0; layout.len];
    for (p, ((pl, pm), g)) in layout.phases.iter().zip(&mesh.phases).zip(&guess.phases).enumerate() {
        z[pl.nu0] = g.nu0;
        z[pl.nuf] = g.nuf;
        let nodes = pm.node_fractions();
        for (k, s) in nodes.iter().enumerate() {
            let x = g.state(*s);
            if x.len() < pl.state_dim.min(7) {
                return Err(TranscriptionError::Dimension(format!("phase {p}: guess state has {} components", x.len())));
            }
            for i in 0..pl.state_dim {
                // a coast history seeds a transfer phase with full mass
                z[pl.state(k, i)] = x.get(i).copied().unwrap_or(1.0);
            }
            if k < pl.num_collocation && pl.control_dim > 0 {
                let u = g.control(*s);
                let mut u = if u.len() == 5 { u } else { vec![1.0, 0.0, 0.0, 0.0, 0.0] };
                // interpolated directions are not unit length
                let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                if norm > 1e-12 {
                    u[..3].iter_mut().for_each(|c| *c /= norm);
                }
                for i in 0..5 {
                    z[pl.control(k, i)] = u[i];
                }
            }
        }
    }
    z[layout.statics..layout.statics + 6].copy_from_slice(&guess.statics);
    if let Some(q) = layout.integral {
        // consistent integral value for the guessed throttles
        z[q] = 0.0;
        let mut g = vec![0.0; nlp.num_constraints()];
        nlp.constraints(&z, &mut g).map_err(|e| TranscriptionError::Guess(e.to_string()))?;
        let row = nlp.constraints.rows_tagged(Tag::PropellantIntegral)[0];
        z[q] = -g[row];
    }
    for j in 0..z.len() {
        z[j] = z[j].clamp(nlp.lower[j], nlp.upper[j]);
    }
    Ok(z)
}

impl TranscribedNlp {
    fn assemble(b: Builder, n: usize, objective: Vec<(usize, f64)>) -> Self {
        let mut slots: HashMap<(usize, usize), usize> = HashMap::new();
        let mut jac = Vec::new();
        let mut slot = |r: usize, c: usize, jac: &mut Vec<(usize, usize)>| -> usize {
            *slots.entry((r, c)).or_insert_with(|| {
                jac.push((r, c));
                jac.len() - 1
            })
        };
        let linear: Vec<(usize, usize, f64, usize)> =
            b.linear.iter().map(|&(r, c, v)| (r, c, v, slot(r, c, &mut jac))).collect();
        let elem_jac_slots: Vec<Vec<usize>> = b
            .elements
            .iter()
            .map(|e| e.jac_pattern.iter().map(|&(o, k)| slot(e.rows[o], e.vars[k], &mut jac)).collect())
            .collect();
        let mut hslots: HashMap<(usize, usize), usize> = HashMap::new();
        let mut hess = Vec::new();
        let elem_hess_slots = b
            .elements
            .iter()
            .map(|e| {
                e.hess_pattern
                    .iter()
                    .map(|&(k, l)| {
                        let (i, j) = (e.vars[k].max(e.vars[l]), e.vars[k].min(e.vars[l]));
                        *hslots.entry((i, j)).or_insert_with(|| {
                            hess.push((i, j));
                            hess.len() - 1
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            n,
            lower: b.lower,
            upper: b.upper,
            constraints: ConstraintSet { rows: b.rows, bounds: b.bounds },
            objective,
            constants: b.constants,
            linear,
            ctx: b.ctx,
            elements: b.elements,
            elem_jac_slots,
            elem_hess_slots,
            jac,
            hess,
        }
    }

    /// Largest bound violation over all rows.
    pub fn max_violation(&self, z: &[f64]) -> EvalResult<f64> {
        let mut g = vec![0.0; self.num_constraints()];
        self.constraints(z, &mut g)?;
        Ok(g.iter().enumerate().fold(0.0f64, |a, (i, v)| a.max(self.constraints.violation(i, *v))))
    }

    /// Constraint listing with residuals at `z`.
    pub fn dump(&self, z: &[f64]) -> EvalResult<String> {
        let mut g = vec![0.0; self.num_constraints()];
        self.constraints(z, &mut g)?;
        Ok(self.constraints.dump(&g))
    }
}

impl NlpProblem for TranscribedNlp {
    fn num_variables(&self) -> usize {
        self.n
    }
    fn num_constraints(&self) -> usize {
        self.constraints.rows.len()
    }
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (self.lower.clone(), self.upper.clone())
    }
    fn constraint_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.constraints.rows.iter().map(|r| r.lower).collect(),
            self.constraints.rows.iter().map(|r| r.upper).collect(),
        )
    }
    fn objective(&self, z: &[f64]) -> EvalResult<f64> {
        Ok(self.objective.iter().map(|(j, c)| c * z[*j]).sum())
    }
    fn gradient(&self, _z: &[f64], grad: &mut [f64]) -> EvalResult<()> {
        grad.fill(0.0);
        for (j, c) in &self.objective {
            grad[*j] += c;
        }
        Ok(())
    }
    fn objective_structure(&self) -> Option<Vec<usize>> {
        Some(self.objective.iter().map(|o| o.0).collect())
    }
    fn constraints(&self, z: &[f64], g: &mut [f64]) -> EvalResult<()> {
        g.copy_from_slice(&self.constants);
        for &(r, c, v, _) in &self.linear {
            g[r] += v * z[c];
        }
        let mut out = [0.0; 8];
        for e in &self.elements {
            let no = e.rows.len();
            e.values(&self.ctx, z, &mut out[..no])?;
            for (r, v) in e.rows.iter().zip(&out[..no]) {
                g[*r] += v;
            }
        }
        Ok(())
    }
    fn jacobian_structure(&self) -> Vec<(usize, usize)> {
        self.jac.clone()
    }
    fn jacobian_values(&self, z: &[f64], vals: &mut [f64]) -> EvalResult<()> {
        vals.fill(0.0);
        for &(_, _, v, s) in &self.linear {
            vals[s] += v;
        }
        let mut val = [0.0; 8];
        let mut jac = [0.0; 8 * 16];
        for (e, slots) in self.elements.iter().zip(&self.elem_jac_slots) {
            let (ni, no) = (e.vars.len(), e.rows.len());
            e.jacobian(&self.ctx, z, &mut val[..no], &mut jac[..ni * no])?;
            for (&(o, k), &s) in e.jac_pattern.iter().zip(slots) {
                vals[s] += jac[o * ni + k];
            }
        }
        Ok(())
    }
    fn hessian_structure(&self) -> Option<Vec<(usize, usize)>> {
        Some(self.hess.clone())
    }
    fn hessian_values(&self, z: &[f64], _sigma: f64, lambda: &[f64], vals: &mut [f64]) -> EvalResult<()> {
        // the objective is linear
        vals.fill(0.0);
        let mut buf = Vec::new();
        for (e, slots) in self.elements.iter().zip(&self.elem_hess_slots) {
            let w: Vec<f64> = e.rows.iter().map(|r| lambda[*r]).collect();
            if w.iter().all(|v| *v == 0.0) {
                continue;
            }
            buf.resize(slots.len(), 0.0);
            e.hessian(&self.ctx, z, &w, &mut buf)?;
            for (s, v) in slots.iter().zip(&buf) {
                vals[*s] += v;
            }
        }
        Ok(())
    }
}
