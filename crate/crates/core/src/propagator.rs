//! Adaptive Dormand-Prince 8(5,3) propagation with 7th-order dense output.
//!
//! Step control and the continuous extension follow Hairer's DOP853.
//! Integration may run forward or backward; the returned trajectory always
//! stores its grid in increasing order.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step limit {limit} reached at t = {t}")]
    TooManySteps { t: f64, limit: usize },
    #[error("degenerate span [{0}, {1}]")]
    EmptySpan(f64, f64),
    #[error("rhs failed at t = {t}: {source}")]
    Rhs { t: f64, source: DynamicsError },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("query {t} outside [{lo}, {hi}]")]
    OutOfSpan { t: f64, lo: f64, hi: f64 },
    #[error("span mismatch: trajectory [{0}, {1}] vs reference [{2}, {3}]")]
    SpanMismatch(f64, f64, f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Control the Euclidean norm of the local error instead of each component.
    pub norm_control: bool,
    pub max_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-10, norm_control: true, max_step: None, max_steps: 1_000_000 }
    }
}

impl PropagatorOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { rel_tol: tol, abs_tol: tol, ..Self::default() }
    }
}

/// One accepted step and its continuous extension.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    /// Eight coefficient vectors laid out back to back.
    cont: Vec<f64>,
}

impl Segment {
    fn eval(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = |k: usize, i: usize| self.cont[k * n + i];
        for (i, o) in out.iter_mut().enumerate() {
            let conpar = c(4, i) + (c(5, i) + (c(6, i) + c(7, i) * s) * s1) * s;
            *o = c(0, i) + (c(1, i) + (c(2, i) + (c(3, i) + conpar * s1) * s) * s1) * s;
        }
    }
}

/// Propagated trajectory with its dense interpolant.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    grid: Vec<f64>,
    states: Vec<Vec<f64>>,
    segments: Vec<Segment>,
    /// Function evaluations spent.
    pub evaluations: usize,
    pub rejected_steps: usize,
}

impl DenseTrajectory {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], *self.grid.last().unwrap())
    }

    pub fn first(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// State at `t`; grid nodes return the stored sample exactly.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>, PropagationError> {
        let (lo, hi) = self.span();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(PropagationError::OutOfSpan { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let k = self.grid.partition_point(|g| *g < t);
        if k < self.grid.len() && self.grid[k] == t {
            return Ok(self.states[k].clone());
        }
        let seg = &self.segments[k.saturating_sub(1).min(self.segments.len() - 1)];
        let mut out = vec![0.0; self.dim()];
        seg.eval(t, &mut out);
        Ok(out)
    }
}

/// Integrates `y' = f(t, y)` from `span.0` to `span.1`.
pub fn propagate<F>(
    mut rhs: F,
    y0: &[f64],
    span: (f64, f64),
    opts: &PropagatorOptions,
) -> Result<DenseTrajectory, PropagationError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), DynamicsError>,
{
    let (t0, tf) = span;
    let n = y0.len();
    if t0 == tf || !t0.is_finite() || !tf.is_finite() {
        return Err(PropagationError::EmptySpan(t0, tf));
    }
    let dir = (tf - t0).signum();
    let hmax = opts.max_step.unwrap_or((tf - t0).abs()).abs().min((tf - t0).abs());
    let mut f = |t: f64, y: &[f64], out: &mut [f64]| -> Result<(), PropagationError> {
        rhs(t, y, out).map_err(|source| PropagationError::Rhs { t, source })
    };

    let mut stages: Vec<Vec<f64>> = vec![vec![0.0; n]; 13];
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1)?;
    let mut evals = 1usize;

    let mut h = initial_step(&mut f, t, &y, &k1, dir, hmax, opts, &mut evals)?;

    let mut grid = vec![t0];
    let mut states = vec![y.clone()];
    let mut segments = Vec::new();
    let mut last_rejected = false;
    let mut rejected = 0usize;
    let uround = f64::EPSILON;
    let mut ytmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut k4new = vec![0.0; n];
    let mut steps = 0usize;

    loop {
        if steps >= opts.max_steps {
            return Err(PropagationError::TooManySteps { t, limit: opts.max_steps });
        }
        let mut last = false;
        if (t + 1.01 * h - tf) * dir >= 0.0 {
            h = tf - t;
            last = true;
        }
        if h.abs() <= 10.0 * uround * t.abs().max(1e-300) || h == 0.0 {
            return Err(PropagationError::StepUnderflow { t, h });
        }
        steps += 1;

        // stages k2..k12 stored in stages[2..=12]; k1 in k1
        macro_rules! stage {
            ($dst:expr, $c:expr, [$(($a:expr, $k:expr)),*]) => {{
                for i in 0..n {
                    let mut acc = 0.0;
                    $( acc += $a * stage_ref(&k1, &stages, $k)[i]; )*
                    ytmp[i] = y[i] + h * acc;
                }
                let mut out = std::mem::take(&mut stages[$dst]);
                f(t + $c * h, &ytmp, &mut out)?;
                stages[$dst] = out;
            }};
        }
        stage!(2, C2, [(A21, 1)]);
        stage!(3, C3, [(A31, 1), (A32, 2)]);
        stage!(4, C4, [(A41, 1), (A43, 3)]);
        stage!(5, C5, [(A51, 1), (A53, 3), (A54, 4)]);
        stage!(6, C6, [(A61, 1), (A64, 4), (A65, 5)]);
        stage!(7, C7, [(A71, 1), (A74, 4), (A75, 5), (A76, 6)]);
        stage!(8, C8, [(A81, 1), (A84, 4), (A85, 5), (A86, 6), (A87, 7)]);
        stage!(9, C9, [(A91, 1), (A94, 4), (A95, 5), (A96, 6), (A97, 7), (A98, 8)]);
        stage!(10, C10, [(A101, 1), (A104, 4), (A105, 5), (A106, 6), (A107, 7), (A108, 8), (A109, 9)]);
        stage!(11, C11, [(A111, 1), (A114, 4), (A115, 5), (A116, 6), (A117, 7), (A118, 8), (A119, 9), (A1110, 10)]);
        stage!(12, 1.0, [(A121, 1), (A124, 4), (A125, 5), (A126, 6), (A127, 7), (A128, 8), (A129, 9), (A1210, 10), (A1211, 11)]);
        evals += 11;

        let k = |j: usize| stage_ref(&k1, &stages, j);
        for i in 0..n {
            let incr = B1 * k1[i]
                + B6 * k(6)[i]
                + B7 * k(7)[i]
                + B8 * k(8)[i]
                + B9 * k(9)[i]
                + B10 * k(10)[i]
                + B11 * k(11)[i]
                + B12 * k(12)[i];
            y_new[i] = y[i] + h * incr;
            // keep the increment for the 3rd-order error estimate
            ytmp[i] = incr;
        }

        // error estimate
        let (mut err, mut err2) = (0.0, 0.0);
        let norm_scale = if opts.norm_control {
            let ny = norm2(&y).max(norm2(&y_new));
            Some(opts.abs_tol.max(opts.rel_tol * ny))
        } else {
            None
        };
        for i in 0..n {
            let sk = match norm_scale {
                Some(s) => s,
                None => opts.abs_tol + opts.rel_tol * y[i].abs().max(y_new[i].abs()),
            };
            let e2 = ytmp[i] - BHH1 * k1[i] - BHH2 * k(9)[i] - BHH3 * k(12)[i];
            err2 += (e2 / sk) * (e2 / sk);
            let e = ER1 * k1[i]
                + ER6 * k(6)[i]
                + ER7 * k(7)[i]
                + ER8 * k(8)[i]
                + ER9 * k(9)[i]
                + ER10 * k(10)[i]
                + ER11 * k(11)[i]
                + ER12 * k(12)[i];
            err += (e / sk) * (e / sk);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let dim = if opts.norm_control { 1.0 } else { n as f64 };
        let err = h.abs() * err * (1.0 / (deno * dim)).sqrt();
        if !err.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            // treat like a rejection with a sharp cut
            if h.abs() < 1e-14 {
                return Err(PropagationError::NonFinite(t));
            }
            h *= 0.1;
            last_rejected = true;
            rejected += 1;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / SAFE).clamp(FACC2, FACC1);
        let mut h_new = h / fac;

        if err <= 1.0 {
            f(t + h, &y_new, &mut k4new)?;
            evals += 1;

            // continuous extension
            let mut cont = vec![0.0; 8 * n];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                cont[i] = y[i];
                cont[n + i] = ydiff;
                cont[2 * n + i] = bspl;
                cont[3 * n + i] = ydiff - h * k4new[i] - bspl;
                cont[4 * n + i] = D41 * k1[i] + D46 * k(6)[i] + D47 * k(7)[i] + D48 * k(8)[i]
                    + D49 * k(9)[i] + D410 * k(10)[i] + D411 * k(11)[i] + D412 * k(12)[i];
                cont[5 * n + i] = D51 * k1[i] + D56 * k(6)[i] + D57 * k(7)[i] + D58 * k(8)[i]
                    + D59 * k(9)[i] + D510 * k(10)[i] + D511 * k(11)[i] + D512 * k(12)[i];
                cont[6 * n + i] = D61 * k1[i] + D66 * k(6)[i] + D67 * k(7)[i] + D68 * k(8)[i]
                    + D69 * k(9)[i] + D610 * k(10)[i] + D611 * k(11)[i] + D612 * k(12)[i];
                cont[7 * n + i] = D71 * k1[i] + D76 * k(6)[i] + D77 * k(7)[i] + D78 * k(8)[i]
                    + D79 * k(9)[i] + D710 * k(10)[i] + D711 * k(11)[i] + D712 * k(12)[i];
            }
            // three extra stages for the 7th-order extension
            let mut e14 = vec![0.0; n];
            let mut e15 = vec![0.0; n];
            let mut e16 = vec![0.0; n];
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A141 * k1[i] + A147 * k(7)[i] + A148 * k(8)[i] + A149 * k(9)[i]
                        + A1410 * k(10)[i] + A1411 * k(11)[i] + A1412 * k(12)[i] + A1413 * k4new[i]);
            }
            f(t + C14 * h, &ytmp, &mut e14)?;
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A151 * k1[i] + A156 * k(6)[i] + A157 * k(7)[i] + A158 * k(8)[i]
                        + A1511 * k(11)[i] + A1512 * k(12)[i] + A1513 * k4new[i] + A1514 * e14[i]);
            }
            f(t + C15 * h, &ytmp, &mut e15)?;
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A161 * k1[i] + A166 * k(6)[i] + A167 * k(7)[i] + A168 * k(8)[i]
                        + A169 * k(9)[i] + A1613 * k4new[i] + A1614 * e14[i] + A1615 * e15[i]);
            }
            f(t + C16 * h, &ytmp, &mut e16)?;
            evals += 3;
            for i in 0..n {
                cont[4 * n + i] =
                    h * (cont[4 * n + i] + D413 * k4new[i] + D414 * e14[i] + D415 * e15[i] + D416 * e16[i]);
                cont[5 * n + i] =
                    h * (cont[5 * n + i] + D513 * k4new[i] + D514 * e14[i] + D515 * e15[i] + D516 * e16[i]);
                cont[6 * n + i] =
                    h * (cont[6 * n + i] + D613 * k4new[i] + D614 * e14[i] + D615 * e15[i] + D616 * e16[i]);
                cont[7 * n + i] =
                    h * (cont[7 * n + i] + D713 * k4new[i] + D714 * e14[i] + D715 * e15[i] + D716 * e16[i]);
            }
            segments.push(Segment { t0: t, h, cont });

            k1.copy_from_slice(&k4new);
            y.copy_from_slice(&y_new);
            t = if last { tf } else { t + h };
            grid.push(t);
            states.push(y.clone());
            if last {
                break;
            }
            if h_new.abs() > hmax {
                h_new = dir * hmax;
            }
            if last_rejected {
                h_new = dir * h_new.abs().min(h.abs());
            }
            last_rejected = false;
        } else {
            h_new = h / FACC1.min(fac11 / SAFE);
            last_rejected = true;
            rejected += 1;
        }
        h = h_new;
    }

    if dir < 0.0 {
        grid.reverse();
        states.reverse();
        segments.reverse();
    }
    Ok(DenseTrajectory { grid, states, segments, evaluations: evals, rejected_steps: rejected })
}

#[inline]
fn stage_ref<'a>(k1: &'a [f64], stages: &'a [Vec<f64>], j: usize) -> &'a [f64] {
    if j == 1 {
        k1
    } else {
        &stages[j]
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[allow(clippy::too_many_arguments)]
fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    f0: &[f64],
    dir: f64,
    hmax: f64,
    opts: &PropagatorOptions,
    evals: &mut usize,
) -> Result<f64, PropagationError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), PropagationError>,
{
    let n = y.len();
    let sk: Vec<f64> = y.iter().map(|v| opts.abs_tol + opts.rel_tol * v.abs()).collect();
    let dnf: f64 = f0.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum();
    let dny: f64 = y.iter().zip(&sk).map(|(a, s)| (a / s).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
    h = h.min(hmax) * dir;
    let y1: Vec<f64> = (0..n).map(|i| y[i] + h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    f(t + h, &y1, &mut f1)?;
    *evals += 1;
    let der2: f64 = (0..n).map(|i| ((f1[i] - f0[i]) / sk[i]).powi(2)).sum::<f64>().sqrt() / h.abs();
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 { (h.abs() * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
    Ok(dir * (100.0 * h.abs()).min(h1).min(hmax))
}

/// Anything that can be sampled like a state history over a span.
pub trait StateHistory {
    fn span(&self) -> (f64, f64);
    fn dim(&self) -> usize;
    fn state_at(&self, t: f64) -> Vec<f64>;
    /// Points where samples should be taken in addition to a uniform grid.
    fn sample_hints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl StateHistory for DenseTrajectory {
    fn span(&self) -> (f64, f64) {
        DenseTrajectory::span(self)
    }
    fn dim(&self) -> usize {
        DenseTrajectory::dim(self)
    }
    fn state_at(&self, t: f64) -> Vec<f64> {
        self.eval(t).expect("query inside span")
    }
    fn sample_hints(&self) -> Vec<f64> {
        self.grid.clone()
    }
}

/// Maximum componentwise difference between a propagated trajectory and a
/// collocated history, each component normalized by `1 + max |component|`
/// of the collocated history.
pub fn verify_against_collocation<H: StateHistory + ?Sized>(
    traj: &DenseTrajectory,
    colloc: &H,
) -> Result<f64, PropagationError> {
    let (a0, a1) = traj.span();
    let (b0, b1) = colloc.span();
    let tol = 1e-9 * (1.0 + a0.abs().max(a1.abs()));
    if (a0 - b0).abs() > tol || (a1 - b1).abs() > tol || traj.dim() > colloc.dim() {
        return Err(PropagationError::SpanMismatch(a0, a1, b0, b1));
    }
    let mut ts: Vec<f64> = (0..=200).map(|k| b0 + (b1 - b0) * k as f64 / 200.0).collect();
    ts.extend(colloc.sample_hints().into_iter().filter(|t| *t >= b0 && *t <= b1));
    let samples: Vec<Vec<f64>> = ts.iter().map(|t| colloc.state_at(*t)).collect();
    let n = traj.dim();
    let mut scale = vec![0.0f64; n];
    for s in &samples {
        for i in 0..n {
            scale[i] = scale[i].max(s[i].abs());
        }
    }
    let mut worst = 0.0f64;
    for (t, s) in ts.iter().zip(&samples) {
        let p = traj.eval(t.clamp(a0, a1))?;
        for i in 0..n {
            worst = worst.max((p[i] - s[i]).abs() / (1.0 + scale[i]));
        }
    }
    Ok(worst)
}

const SAFE: f64 = 0.9;
const FACC1: f64 = 3.0;
const FACC2: f64 = 1.0 / 6.0;
const EXPO1: f64 = 1.0 / 8.0;

const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;
const C14: f64 = 0.1E+00;
const C15: f64 = 0.2E+00;
const C16: f64 = 0.777777777777777777777777777778E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;
const A141: f64 = 5.61675022830479523392909219681E-2;
const A147: f64 = 2.53500210216624811088794765333E-1;
const A148: f64 = -2.46239037470802489917441475441E-1;
const A149: f64 = -1.24191423263816360469010140626E-1;
const A1410: f64 = 1.5329179827876569731206322685E-1;
const A1411: f64 = 8.20105229563468988491666602057E-3;
const A1412: f64 = 7.56789766054569976138603589584E-3;
const A1413: f64 = -8.298E-3;
const A151: f64 = 3.18346481635021405060768473261E-2;
const A156: f64 = 2.83009096723667755288322961402E-2;
const A157: f64 = 5.35419883074385676223797384372E-2;
const A158: f64 = -5.49237485713909884646569340306E-2;
const A1511: f64 = -1.08347328697249322858509316994E-4;
const A1512: f64 = 3.82571090835658412954920192323E-4;
const A1513: f64 = -3.40465008687404560802977114492E-4;
const A1514: f64 = 1.41312443674632500278074618366E-1;
const A161: f64 = -4.28896301583791923408573538692E-1;
const A166: f64 = -4.69762141536116384314449447206E0;
const A167: f64 = 7.68342119606259904184240953878E0;
const A168: f64 = 4.06898981839711007970213554331E0;
const A169: f64 = 3.56727187455281109270669543021E-1;
const A1613: f64 = -1.39902416515901462129418009734E-3;
const A1614: f64 = 2.9475147891527723389556272149E0;
const A1615: f64 = -9.15095847217987001081870187138E0;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

const D41: f64 = -0.84289382761090128651353491142E+01;
const D46: f64 = 0.56671495351937776962531783590E+00;
const D47: f64 = -0.30689499459498916912797304727E+01;
const D48: f64 = 0.23846676565120698287728149680E+01;
const D49: f64 = 0.21170345824450282767155149946E+01;
const D410: f64 = -0.87139158377797299206789907490E+00;
const D411: f64 = 0.22404374302607882758541771650E+01;
const D412: f64 = 0.63157877876946881815570249290E+00;
const D413: f64 = -0.88990336451333310820698117400E-01;
const D414: f64 = 0.18148505520854727256656404962E+02;
const D415: f64 = -0.91946323924783554000451984436E+01;
const D416: f64 = -0.44360363875948939664310572000E+01;

const D51: f64 = 0.10427508642579134603413151009E+02;
const D56: f64 = 0.24228349177525818288430175319E+03;
const D57: f64 = 0.16520045171727028198505394887E+03;
const D58: f64 = -0.37454675472269020279518312152E+03;
const D59: f64 = -0.22113666853125306036270938578E+02;
const D510: f64 = 0.77334326684722638389603898808E+01;
const D511: f64 = -0.30674084731089398182061213626E+02;
const D512: f64 = -0.93321305264302278729567221706E+01;
const D513: f64 = 0.15697238121770843886131091075E+02;
const D514: f64 = -0.31139403219565177677282850411E+02;
const D515: f64 = -0.93529243588444783865713862664E+01;
const D516: f64 = 0.35816841486394083752465898540E+02;

const D61: f64 = 0.19985053242002433820987653617E+02;
const D66: f64 = -0.38703730874935176555105901742E+03;
const D67: f64 = -0.18917813819516756882830838328E+03;
const D68: f64 = 0.52780815920542364900561016686E+03;
const D69: f64 = -0.11573902539959630126141871134E+02;
const D610: f64 = 0.68812326946963000169666922661E+01;
const D611: f64 = -0.10006050966910838403183860980E+01;
const D612: f64 = 0.77771377980534432092869265740E+00;
const D613: f64 = -0.27782057523535084065932004339E+01;
const D614: f64 = -0.60196695231264120758267380846E+02;
const D615: f64 = 0.84320405506677161018159903784E+02;
const D616: f64 = 0.11992291136182789328035130030E+02;

const D71: f64 = -0.25693933462703749003312586129E+02;
const D76: f64 = -0.15418974869023643374053993627E+03;
const D77: f64 = -0.23152937917604549567536039109E+03;
const D78: f64 = 0.35763911791061412378285349910E+03;
const D79: f64 = 0.93405324183624310003907691704E+02;
const D710: f64 = -0.37458323136451633156875139351E+02;
const D711: f64 = 0.10409964950896230045147246184E+03;
const D712: f64 = 0.29840293426660503123344363579E+02;
const D713: f64 = -0.43533456590011143754432175058E+02;
const D714: f64 = 0.96324553959188282948394950600E+02;
const D715: f64 = -0.39177261675615439165231486172E+02;
const D716: f64 = -0.14972683625798562581422125276E+03;
