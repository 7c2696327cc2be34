//! Classical dynamics of the spin-deviation field on a periodic chain.
//!
//! With `S_n^+ = S alpha_n` and `S_n^z = S sqrt(1 - |alpha_n|^2)` the
//! equation of motion reads
//!
//! ```text
//! i d(alpha_n)/dt = 2AS alpha_n r_n - JS [(alpha_{n+1} + alpha_{n-1}) r_n
//!                                         - alpha_n (r_{n+1} + r_{n-1})]
//! ```
//!
//! where `r_n = sqrt(1 - |alpha_n|^2)`. Time stepping is a fourth-order
//! Adams-Bashforth predictor with one Adams-Moulton corrector pass (PECE),
//! bootstrapped by classical Runge-Kutta.

use std::collections::VecDeque;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::output::CsvFile;
use crate::solitons::{SolitonKind, SolitonSpec};

/// Lattice couplings. Frequencies are in units with `hbar = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainParams {
    /// Exchange coupling `J`.
    pub j: f64,
    /// Easy-axis anisotropy `A`.
    pub a: f64,
    /// Spin length `S`.
    pub s: f64,
    /// Number of sites.
    pub n: usize,
    /// Lattice spacing; soliton widths and positions are measured in the same unit.
    pub dx: f64,
}

impl ChainParams {
    pub fn new(j: f64, a: f64, s: f64, n: usize) -> Result<Self> {
        let p = ChainParams { j, a, s, n, dx: 1.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn with_spacing(mut self, dx: f64) -> Result<Self> {
        self.dx = dx;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("J", self.j)?;
        positive("A", self.a)?;
        positive("S", self.s)?;
        positive("dx", self.dx)?;
        if self.n < 3 {
            return Err(Error::invalid("N", format!("need at least 3 sites, got {}", self.n)));
        }
        Ok(())
    }

    /// `10^-3 / max(JS, AS)`.
    pub fn default_dt(&self) -> f64 {
        1e-3 / (self.j * self.s).max(self.a * self.s)
    }

    pub fn length(&self) -> f64 {
        self.n as f64 * self.dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub t: f64,
    pub alpha: Vec<Complex64>,
}

impl ChainState {
    pub fn zeros(n: usize, t: f64) -> Self {
        ChainState {
            t,
            alpha: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn uniform(n: usize, c: Complex64, t: f64) -> Self {
        ChainState { t, alpha: vec![c; n] }
    }

    /// Samples `phi(x_n, t) e^{i(kn - wt)}` on every site, with `w` the stationary
    /// frequency of the soliton.
    ///
    /// A bright soliton is placed using the periodic minimum-image distance to its
    /// centre. Its carrier `e^{ikn}` is continuous across the seam only when `kN` is a
    /// multiple of `2 pi`; otherwise keep the soliton away from site 0. A dark soliton is laid out over `[0, N dx)` without wrapping, so the
    /// kink belongs near the middle of the chain; the envelope jumps from `+phi_d0`
    /// back to `-phi_d0` across the seam, which is smooth only when `e^{ikN} = -1`
    /// (see [`dark_seam_mismatch`]).
    pub fn from_soliton(spec: &SolitonSpec, params: &ChainParams, t: f64) -> Self {
        let length = params.length();
        let centre = spec.center_at(t);
        let envelope = |x: f64| match spec.kind() {
            SolitonKind::Bright => spec.shape(wrap_centered(x - centre, length) / spec.width()),
            SolitonKind::Dark => spec.shape((x - centre) / spec.width()),
        };
        Self::modulated(spec, params, t, envelope)
    }

    /// Dark kink at the soliton centre and an antikink half a chain away, which is
    /// periodic whenever `e^{ikN} = 1`.
    pub fn kink_antikink(spec: &SolitonSpec, params: &ChainParams, t: f64) -> Result<Self> {
        if spec.kind() != SolitonKind::Dark {
            return Err(Error::KindMismatch { expected: "dark" });
        }
        let length = params.length();
        let quarter = 0.25 * length;
        let centre = spec.center_at(t);
        let l = spec.width();
        let amp = spec.amplitude();
        Ok(Self::modulated(spec, params, t, |x| {
            let u = (x - centre + quarter).rem_euclid(length);
            -amp * ((u - quarter) / l).tanh() * ((u - 3.0 * quarter) / l).tanh()
        }))
    }

    fn modulated(
        spec: &SolitonSpec,
        params: &ChainParams,
        t: f64,
        envelope: impl Fn(f64) -> f64,
    ) -> Self {
        let k = spec.k();
        let omega = spec.stationary_frequency();
        let alpha = (0..params.n)
            .map(|n| {
                let x = n as f64 * params.dx;
                Complex64::from_polar(envelope(x), k * n as f64 - omega * t)
            })
            .collect();
        ChainState { t, alpha }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn abs2(&self) -> Vec<f64> {
        self.alpha.iter().map(|a| a.norm_sqr()).collect()
    }

    fn check_bounded(&self) -> Result<()> {
        for (index, a) in self.alpha.iter().enumerate() {
            let value = a.norm();
            if value.is_nan() || value > 1.0 {
                return Err(Error::Domain {
                    what: "alpha",
                    index,
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Maps `d` into `[-length/2, length/2)`.
fn wrap_centered(d: f64, length: f64) -> f64 {
    (d + 0.5 * length).rem_euclid(length) - 0.5 * length
}

/// Relative deviation of a dark profile from its asymptotes at both ends of `[0, N dx)`.
pub fn dark_seam_mismatch(spec: &SolitonSpec, params: &ChainParams, t: f64) -> f64 {
    let amp = spec.amplitude();
    let left = spec.envelope(0.0, t) + amp;
    let right = spec.envelope(params.length(), t) - amp;
    left.abs().max(right.abs()) / amp
}

/// `Sum_n |alpha_n|^2`.
pub fn envelope_norm(state: &ChainState) -> f64 {
    state.alpha.iter().map(|a| a.norm_sqr()).sum()
}

/// `Sum_n (1 - sqrt(1 - |alpha_n|^2))`, i.e. the total `S^z` deficit divided by `S`.
///
/// This one is an exact invariant of the lattice equations; the envelope norm is
/// its small-amplitude approximation (times two).
pub fn spin_deficit(state: &ChainState) -> f64 {
    state
        .alpha
        .iter()
        .map(|a| {
            let m2 = a.norm_sqr();
            // 1 - sqrt(1 - m2) without cancellation.
            m2 / (1.0 + (1.0 - m2).sqrt())
        })
        .sum()
}

/// Signed envelope `Re[alpha_site e^{-i(k site - w t)}]`.
///
/// # Panics
///
/// If `site >= state.len()`.
pub fn demodulate(state: &ChainState, site: usize, k: f64, omega: f64) -> f64 {
    let carrier = Complex64::from_polar(1.0, -(k * site as f64 - omega * state.t));
    (state.alpha[site] * carrier).re
}

/// Time derivative of the spin-deviation field.
pub fn eom_rhs(state: &ChainState, params: &ChainParams) -> Result<Vec<Complex64>> {
    state.check_bounded()?;
    let mut rhs = Rhs::new(state.len());
    let mut out = vec![Complex64::new(0.0, 0.0); state.len()];
    rhs.eval(&state.alpha, params, &mut out)?;
    Ok(out)
}

struct Rhs {
    root: Vec<f64>,
}

impl Rhs {
    fn new(n: usize) -> Self {
        Rhs { root: vec![0.0; n] }
    }

    fn eval(&mut self, alpha: &[Complex64], p: &ChainParams, out: &mut [Complex64]) -> Result<()> {
        let n = alpha.len();
        for (i, (a, r)) in alpha.iter().zip(self.root.iter_mut()).enumerate() {
            let m2 = a.norm_sqr();
            if m2.is_nan() || m2 > 1.0 {
                return Err(Error::Domain {
                    what: "alpha",
                    index: i,
                    value: m2.sqrt(),
                });
            }
            *r = (1.0 - m2).sqrt();
        }
        let onsite = 2.0 * p.a * p.s;
        let js = p.j * p.s;
        let root = &self.root;
        for i in 0..n {
            let left = if i == 0 { n - 1 } else { i - 1 };
            let right = if i + 1 == n { 0 } else { i + 1 };
            let a = alpha[i];
            let f = a * (onsite * root[i])
                - ((alpha[right] + alpha[left]) * root[i] - a * (root[right] + root[left])) * js;
            // multiply by -i
            out[i] = Complex64::new(f.im, -f.re);
        }
        Ok(())
    }
}

const AB4: [f64; 4] = [55.0 / 24.0, -59.0 / 24.0, 37.0 / 24.0, -9.0 / 24.0];
const AM4: [f64; 4] = [9.0 / 24.0, 19.0 / 24.0, -5.0 / 24.0, 1.0 / 24.0];

/// Fixed-step fourth-order Adams-Bashforth-Moulton integrator.
///
/// The derivative history belongs to the trajectory being stepped. Feeding a state
/// whose time is not the one this stepper last produced restarts the bootstrap.
pub struct PredictorCorrector {
    params: ChainParams,
    dt: f64,
    rhs: Rhs,
    /// Newest first: `f_n, f_{n-1}, f_{n-2}, f_{n-3}`.
    history: VecDeque<Vec<Complex64>>,
    last_t: Option<f64>,
    scratch: Vec<Complex64>,
}

impl PredictorCorrector {
    pub fn new(params: ChainParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::StepSize { dt });
        }
        Ok(PredictorCorrector {
            params,
            dt,
            rhs: Rhs::new(params.n),
            history: VecDeque::with_capacity(4),
            last_t: None,
            scratch: vec![Complex64::new(0.0, 0.0); params.n],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step in place.
    pub fn step(&mut self, state: &mut ChainState) -> Result<()> {
        if state.len() != self.params.n {
            return Err(Error::invalid(
                "alpha",
                format!("state has {} sites, chain has {}", state.len(), self.params.n),
            ));
        }
        if self.last_t != Some(state.t) {
            self.history.clear();
        }
        let t = state.t;
        let blow_up = |e: Error| match e {
            Error::Domain { index, value, .. } => Error::BlowUp {
                t,
                site: index,
                value,
            },
            other => other,
        };

        if self.history.is_empty() {
            let mut f = vec![Complex64::new(0.0, 0.0); state.len()];
            self.rhs.eval(&state.alpha, &self.params, &mut f).map_err(blow_up)?;
            self.history.push_front(f);
        }

        let h = self.dt;
        if self.history.len() < 4 {
            self.rk4(&mut state.alpha).map_err(blow_up)?;
        } else {
            // predict
            let y = &state.alpha;
            let [f0, f1, f2, f3] = [&self.history[0], &self.history[1], &self.history[2], &self.history[3]];
            for i in 0..y.len() {
                self.scratch[i] =
                    y[i] + (f0[i] * AB4[0] + f1[i] * AB4[1] + f2[i] * AB4[2] + f3[i] * AB4[3]) * h;
            }
            // evaluate
            let mut fp = self.history.pop_back().expect("history has four entries");
            self.rhs.eval(&self.scratch, &self.params, &mut fp).map_err(blow_up)?;
            // correct
            let [f0, f1, f2] = [&self.history[0], &self.history[1], &self.history[2]];
            for i in 0..state.alpha.len() {
                state.alpha[i] +=
                    (fp[i] * AM4[0] + f0[i] * AM4[1] + f1[i] * AM4[2] + f2[i] * AM4[3]) * h;
            }
            // evaluate again; `fp` is reused as the storage of the new f_{n+1}
            self.rhs.eval(&state.alpha, &self.params, &mut fp).map_err(blow_up)?;
            self.history.push_front(fp);
        }

        state.t = t + h;
        if let Some((site, value)) = first_unbounded(&state.alpha) {
            self.last_t = None;
            return Err(Error::BlowUp { t: state.t, site, value });
        }
        self.last_t = Some(state.t);
        Ok(())
    }

    /// Classical RK4; leaves `f(y_{n+1})` at the front of the history.
    fn rk4(&mut self, y: &mut [Complex64]) -> Result<()> {
        let n = y.len();
        let h = self.dt;
        let zero = Complex64::new(0.0, 0.0);
        let k1 = self.history[0].clone();
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let tmp = &mut self.scratch;
        for i in 0..n {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        self.rhs.eval(tmp, &self.params, &mut k2)?;
        for i in 0..n {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        self.rhs.eval(tmp, &self.params, &mut k3)?;
        for i in 0..n {
            tmp[i] = y[i] + k3[i] * h;
        }
        self.rhs.eval(tmp, &self.params, &mut k4)?;
        for i in 0..n {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
        let mut f = k1;
        self.rhs.eval(y, &self.params, &mut f)?;
        self.history.push_front(f);
        Ok(())
    }
}

fn first_unbounded(alpha: &[Complex64]) -> Option<(usize, f64)> {
    alpha
        .iter()
        .enumerate()
        .map(|(i, a)| (i, a.norm()))
        .find(|&(_, m)| m.is_nan() || m >= 1.0)
}

/// One step from a cold start (no derivative history), which is the Runge-Kutta
/// bootstrap step of [`PredictorCorrector`].
pub fn step_pc(state: &ChainState, params: &ChainParams, dt: f64) -> Result<ChainState> {
    state.check_bounded()?;
    let mut stepper = PredictorCorrector::new(*params, dt)?;
    let mut next = state.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Step count and the adjusted step that lands exactly on `t_final`.
fn step_plan(t0: f64, t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::StepSize { dt });
    }
    if t_final.is_nan() || t_final <= t0 {
        return Err(Error::invalid(
            "t_final",
            format!("must exceed the initial time {t0}, got {t_final}"),
        ));
    }
    let steps = ((t_final - t0) / dt - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, (t_final - t0) / steps as f64))
}

/// Integrates to `t_final`, calling `observe` after every step. Returns the final state.
///
/// `dt` is shrunk slightly if needed so that an integer number of steps ends on `t_final`.
pub fn evolve_with(
    state: &ChainState,
    params: &ChainParams,
    t_final: f64,
    dt: f64,
    mut observe: impl FnMut(usize, &ChainState),
) -> Result<ChainState> {
    state.check_bounded()?;
    let (steps, h) = step_plan(state.t, t_final, dt)?;
    let mut stepper = PredictorCorrector::new(*params, h)?;
    let mut current = state.clone();
    let t0 = state.t;
    for i in 1..=steps {
        stepper.step(&mut current)?;
        // keep the clock free of accumulated round-off
        current.t = t0 + h * i as f64;
        stepper.last_t = Some(current.t);
        observe(i, &current);
    }
    Ok(current)
}

/// Sampled history of a chain integration.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub times: Vec<f64>,
    pub abs2: Vec<Vec<f64>>,
    pub arg: Vec<Vec<f64>>,
    pub norms: Vec<f64>,
    pub final_state: ChainState,
}

/// Integrates to `t_final`, recording the initial state, every `sample_every`-th step
/// and the final state.
pub fn evolve(
    state: &ChainState,
    params: &ChainParams,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> Result<ChainTrace> {
    if sample_every == 0 {
        return Err(Error::invalid("sample_every", "must be at least 1"));
    }
    let mut trace = ChainTrace {
        times: Vec::new(),
        abs2: Vec::new(),
        arg: Vec::new(),
        norms: Vec::new(),
        final_state: state.clone(),
    };
    trace.record(state);
    let (steps, _) = step_plan(state.t, t_final, dt)?;
    let last = evolve_with(state, params, t_final, dt, |i, s| {
        if i % sample_every == 0 || i == steps {
            trace.record(s);
        }
    })?;
    trace.final_state = last;
    Ok(trace)
}

impl ChainTrace {
    fn record(&mut self, state: &ChainState) {
        self.times.push(state.t);
        self.abs2.push(state.abs2());
        self.arg.push(state.alpha.iter().map(|a| a.arg()).collect());
        self.norms.push(envelope_norm(state));
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn alpha(&self, sample: usize, site: usize) -> Complex64 {
        Complex64::from_polar(self.abs2[sample][site].sqrt(), self.arg[sample][site])
    }

    /// Rebuilds the full state at a sample.
    pub fn state(&self, sample: usize) -> ChainState {
        let alpha = (0..self.abs2[sample].len()).map(|site| self.alpha(sample, site)).collect();
        ChainState {
            t: self.times[sample],
            alpha,
        }
    }

    /// Largest `|norm(t) / norm(t0) - 1|` over the samples.
    pub fn norm_drift(&self) -> f64 {
        let first = self.norms[0];
        if first == 0.0 {
            return self.norms.iter().fold(0.0, |m, &n| m.max(n.abs()));
        }
        self.norms.iter().fold(0.0, |m, &n| m.max((n / first - 1.0).abs()))
    }

    /// Writes `snapshot_NNNNN.csv` per sample and `norms.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        self.write_csv_strided(dir, 1)
    }

    /// Like [`write_csv`](Self::write_csv) but keeps only every `stride`-th snapshot
    /// (and the last one). Files keep their sample index, which is the row of `norms.csv`.
    pub fn write_csv_strided(&self, dir: &Path, stride: usize) -> Result<()> {
        let stride = stride.max(1);
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let last = self.len().saturating_sub(1);
        for (i, (abs2, arg)) in self.abs2.iter().zip(&self.arg).enumerate() {
            if i % stride != 0 && i != last {
                continue;
            }
            let mut file = CsvFile::create(
                &dir.join(format!("snapshot_{i:05}.csv")),
                "site,abs2_alpha,arg_alpha",
            )?;
            for (site, (m, p)) in abs2.iter().zip(arg).enumerate() {
                file.row(&[site as f64, *m, *p])?;
            }
            file.finish()?;
        }
        let mut norms = CsvFile::create(&dir.join("norms.csv"), "t,envelope_norm")?;
        for (t, n) in self.times.iter().zip(&self.norms) {
            norms.row(&[*t, *n])?;
        }
        norms.finish()
    }
}

/// Pearson correlation of two equally long profiles.
pub fn shape_correlation(observed: &[f64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len(), "profiles differ in length");
    let n = observed.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let (mo, me) = (mean(observed), mean(expected));
    let mut cov = 0.0;
    let mut vo = 0.0;
    let mut ve = 0.0;
    for (o, e) in observed.iter().zip(expected) {
        let (a, b) = (o - mo, e - me);
        cov += a * b;
        vo += a * a;
        ve += b * b;
    }
    cov / (vo * ve).sqrt()
}
