//! Two-level qubit driven by a soliton passing its site.
//!
//! The chain enters only through the envelope `phi` at the qubit position, which sets
//! the coupling `Omega = -d_xy S phi` and the detuning
//! `Delta = (mu - nu) H0 - d_z S sqrt(1 - phi^2) + omega`. The amplitudes obey
//! `i d/dt (C-, C+) = H (C-, C+)` with `H = 1/2 [[-Delta, Omega], [Omega, Delta]]`.
//!
//! The global phase of the rotating frame is dropped. The relative phase reported here
//! therefore differs from the laboratory one by `2 omega t`.

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::chain::{ChainParams, ChainTrace};
use crate::closedform::{self, BrightDriveParams, Branch, DarkDriveParams};
use crate::error::{Error, Result};
use crate::output::CsvFile;
use crate::solitons::{SolitonKind, SolitonSpec};

/// Largest `max(|Omega|, |Delta|) h` allowed for one integrator substep.
pub const MAX_PHASE_PER_STEP: f64 = 1e-2;

/// Norm drift at which an integration is abandoned.
pub const NORM_ABORT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitParams {
    pub dxy: f64,
    pub dz: f64,
    pub mu: f64,
    pub nu: f64,
    pub h0: f64,
    /// Qubit position in sites.
    pub xq: f64,
}

impl QubitParams {
    /// Equal magnetic moments, no field, qubit at site 0.
    pub fn new(dxy: f64, dz: f64) -> Self {
        QubitParams {
            dxy,
            dz,
            mu: 1.0,
            nu: 1.0,
            h0: 0.0,
            xq: 0.0,
        }
    }

    pub fn with_field(mut self, mu: f64, nu: f64, h0: f64) -> Self {
        self.mu = mu;
        self.nu = nu;
        self.h0 = h0;
        self
    }

    pub fn at(mut self, xq: f64) -> Self {
        self.xq = xq;
        self
    }

    pub fn zeeman(&self) -> f64 {
        (self.mu - self.nu) * self.h0
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("dxy", self.dxy),
            ("dz", self.dz),
            ("mu", self.mu),
            ("nu", self.nu),
            ("H0", self.h0),
            ("xq", self.xq),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DetuningMode {
    #[default]
    Exact,
    /// `sqrt(1 - phi^2) ~ 1 - phi^2 / 2`.
    Taylor,
}

impl DetuningMode {
    pub fn name(self) -> &'static str {
        match self {
            DetuningMode::Exact => "exact",
            DetuningMode::Taylor => "taylor",
        }
    }
}

/// `Omega = -d_xy S phi`.
pub fn coupling(phi: f64, q: &QubitParams, s: f64) -> f64 {
    -q.dxy * s * phi
}

/// `Delta = (mu - nu) H0 - d_z S sqrt(1 - phi^2) + omega`.
pub fn detuning(phi: f64, q: &QubitParams, s: f64, omega: f64, mode: DetuningMode) -> Result<f64> {
    if mode == DetuningMode::Exact && phi.abs() > 1.0 {
        return Err(Error::Domain {
            what: "phi",
            index: 0,
            value: phi.abs(),
        });
    }
    Ok(detuning_of(phi, q, s, omega, mode))
}

fn detuning_of(phi: f64, q: &QubitParams, s: f64, omega: f64, mode: DetuningMode) -> f64 {
    let root = match mode {
        DetuningMode::Exact => (1.0 - phi * phi).sqrt(),
        DetuningMode::Taylor => 1.0 - 0.5 * phi * phi,
    };
    q.zeeman() - q.dz * s * root + omega
}

type Sampler = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Where a drive came from; analytic sources keep what the closed forms need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveSource {
    /// `Omega_b0 sech((t - crossing) / T)`.
    AnalyticBright {
        omega_b0: f64,
        transit_time: f64,
        crossing: f64,
    },
    /// `Omega_d0 tanh((t - crossing) / T)`.
    AnalyticDark {
        omega_d0: f64,
        transit_time: f64,
        crossing: f64,
    },
    /// Envelope demodulated from a chain integration.
    ChainSampled,
    /// Any other prescribed `Omega(t)`, `Delta(t)`.
    Model,
}

impl DriveSource {
    pub fn name(&self) -> &'static str {
        match self {
            DriveSource::AnalyticBright { .. } => "analytic-bright",
            DriveSource::AnalyticDark { .. } => "analytic-dark",
            DriveSource::ChainSampled => "chain",
            DriveSource::Model => "model",
        }
    }
}

/// Time-dependent coupling and detuning. Cheap to clone and safe to share.
#[derive(Clone)]
pub struct Drive {
    omega: Sampler,
    delta: Sampler,
    source: DriveSource,
    mode: DetuningMode,
    transit_time: Option<f64>,
    window: Option<(f64, f64)>,
}

impl fmt::Debug for Drive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Drive")
            .field("source", &self.source)
            .field("mode", &self.mode)
            .field("transit_time", &self.transit_time)
            .field("window", &self.window)
            .finish_non_exhaustive()
    }
}

impl Drive {
    pub fn from_fns(
        omega: impl Fn(f64) -> f64 + Send + Sync + 'static,
        delta: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Drive {
            omega: Arc::new(omega),
            delta: Arc::new(delta),
            source: DriveSource::Model,
            mode: DetuningMode::Exact,
            transit_time: None,
            window: None,
        }
    }

    pub fn constant(omega: f64, delta: f64) -> Self {
        Self::from_fns(move |_| omega, move |_| delta)
    }

    /// Rosen-Zener model: sech coupling, constant detuning `delta_b0`, crossing at `t = 0`.
    pub fn rosen_zener(b: &BrightDriveParams) -> Self {
        let (w, d, tt) = (b.omega_b0, b.delta_b0, b.transit_time);
        let mut drive = Self::from_fns(move |t| w / (t / tt).cosh(), move |_| d);
        drive.source = DriveSource::AnalyticBright {
            omega_b0: w,
            transit_time: tt,
            crossing: 0.0,
        };
        drive.transit_time = Some(tt);
        drive
    }

    /// Tanh model: `omega_d0 tanh(t/T)` with constant detuning `delta_d`.
    pub fn tanh_model(d: &DarkDriveParams) -> Self {
        let (w, delta, tt) = (d.omega_d0, d.delta_d, d.transit_time);
        let mut drive = Self::from_fns(move |t| w * (t / tt).tanh(), move |_| delta);
        drive.source = DriveSource::AnalyticDark {
            omega_d0: w,
            transit_time: tt,
            crossing: 0.0,
        };
        drive.transit_time = Some(tt);
        drive
    }

    pub fn with_transit_time(mut self, tt: f64) -> Self {
        self.transit_time = Some(tt);
        self
    }

    pub fn omega(&self, t: f64) -> f64 {
        (self.omega)(t)
    }

    pub fn delta(&self, t: f64) -> f64 {
        (self.delta)(t)
    }

    pub fn source(&self) -> DriveSource {
        self.source
    }

    pub fn mode(&self) -> DetuningMode {
        self.mode
    }

    pub fn transit_time(&self) -> Option<f64> {
        self.transit_time
    }

    /// Time interval on which the samplers are defined; `None` means everywhere.
    pub fn window(&self) -> Option<(f64, f64)> {
        self.window
    }

    fn check_window(&self, t: f64) -> Result<()> {
        if let Some((start, end)) = self.window {
            let slack = 1e-9 * (end - start).abs().max(1.0);
            if t < start - slack || t > end + slack {
                return Err(Error::OutsideWindow { t, start, end });
            }
        }
        Ok(())
    }

    /// Writes `t_over_T,Omega_T,Delta_T` at the given times.
    pub fn write_csv(&self, path: &Path, times: &[f64]) -> Result<()> {
        let scale = self.transit_time.unwrap_or(1.0);
        let mut file = CsvFile::create(path, "t_over_T,Omega_T,Delta_T")?;
        for &t in times {
            file.row(&[t / scale, self.omega(t) * scale, self.delta(t) * scale])?;
        }
        file.finish()
    }
}

/// Envelope source for [`make_drive`].
#[derive(Debug, Clone, Copy)]
pub enum EnvelopeSource<'a> {
    /// Closed-form profile of the soliton.
    Analytic,
    /// Envelope demodulated at the qubit site from a chain run.
    Chain(&'a ChainTrace),
}

/// Drive seen by a qubit at `q.xq` as `spec` passes by.
///
/// The detuning always uses the soliton frequency [`SolitonSpec::frequency`], the one
/// the `d_z` tuning rule is built on. Chain data are demodulated with
/// [`SolitonSpec::stationary_frequency`], the rate at which the lattice carrier turns.
pub fn make_drive(
    spec: &SolitonSpec,
    q: &QubitParams,
    params: &ChainParams,
    source: EnvelopeSource<'_>,
    mode: DetuningMode,
) -> Result<Drive> {
    q.validate()?;
    params.validate()?;
    let s = params.s;
    let omega = spec.frequency();
    let tt = spec.transit_time();
    let q = *q;
    match source {
        EnvelopeSource::Analytic => {
            let x = q.xq * params.dx;
            let crossing = match spec.velocity() {
                v if v != 0.0 => (x - spec.center()) / v,
                _ => 0.0,
            };
            let env = spec.clone();
            let env_d = spec.clone();
            let drive_source = match (spec.kind(), tt) {
                (SolitonKind::Bright, Some(tt)) => DriveSource::AnalyticBright {
                    omega_b0: coupling(spec.amplitude(), &q, s),
                    transit_time: tt,
                    crossing,
                },
                (SolitonKind::Dark, Some(tt)) => DriveSource::AnalyticDark {
                    omega_d0: spec.velocity().signum() * q.dxy * s * spec.amplitude(),
                    transit_time: tt,
                    crossing,
                },
                _ => DriveSource::Model,
            };
            // |phi| <= amplitude < 1 here, so the exact square root is always defined.
            Ok(Drive {
                omega: Arc::new(move |t| coupling(env.envelope(x, t), &q, s)),
                delta: Arc::new(move |t| detuning_of(env_d.envelope(x, t), &q, s, omega, mode)),
                source: drive_source,
                mode,
                transit_time: tt,
                window: None,
            })
        }
        EnvelopeSource::Chain(trace) => {
            if trace.times.len() < 2 {
                return Err(Error::invalid("trace", "needs at least two samples"));
            }
            if trace.abs2[0].len() != params.n {
                return Err(Error::invalid("trace", "site count differs from the chain parameters"));
            }
            let n = params.n as i64;
            let site = (q.xq.round() as i64).rem_euclid(n) as usize;
            let k = spec.k();
            let w_carrier = spec.stationary_frequency();
            let mut phis = Vec::with_capacity(trace.len());
            let mut deltas = Vec::with_capacity(trace.len());
            for (i, &t) in trace.times.iter().enumerate() {
                let carrier = Complex64::from_polar(1.0, -(k * site as f64 - w_carrier * t));
                let phi = (trace.alpha(i, site) * carrier).re;
                deltas.push(detuning(phi, &q, s, omega, mode)?);
                phis.push(phi);
            }
            let omegas: Vec<f64> = phis.iter().map(|&p| coupling(p, &q, s)).collect();
            let times = Arc::new(trace.times.clone());
            let window = (times[0], times[times.len() - 1]);
            let t_omega = Arc::clone(&times);
            Ok(Drive {
                omega: Arc::new(move |t| interpolate(&t_omega, &omegas, t)),
                delta: Arc::new(move |t| interpolate(&times, &deltas, t)),
                source: DriveSource::ChainSampled,
                mode,
                transit_time: tt,
                window: Some(window),
            })
        }
    }
}

/// Piecewise-linear interpolation, clamped to the end values.
fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let i = xs.partition_point(|&v| v <= x);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[ys.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    pub t: f64,
    pub cminus: Complex64,
    pub cplus: Complex64,
}

impl QubitState {
    /// `C+ = 1`: the qubit points along `+z`.
    pub fn up(t: f64) -> Self {
        QubitState {
            t,
            cminus: Complex64::new(0.0, 0.0),
            cplus: Complex64::new(1.0, 0.0),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.cminus.norm_sqr() + self.cplus.norm_sqr()
    }

    pub fn p_minus(&self) -> f64 {
        self.cminus.norm_sqr()
    }

    pub fn p_plus(&self) -> f64 {
        self.cplus.norm_sqr()
    }

    /// `arg(C- conj(C+))`.
    pub fn relative_phase(&self) -> f64 {
        (self.cminus * self.cplus.conj()).arg()
    }
}

/// Populations and drive sampled on the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTrace {
    pub times: Vec<f64>,
    pub p_minus: Vec<f64>,
    pub p_plus: Vec<f64>,
    pub omega: Vec<f64>,
    pub delta: Vec<f64>,
    pub rel_phase: Vec<f64>,
    pub transit_time: Option<f64>,
    pub final_state: QubitState,
    /// Largest `| |C-|^2 + |C+|^2 - 1 |` seen.
    pub max_norm_drift: f64,
}

impl ProbabilityTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_p_minus(&self) -> f64 {
        self.final_state.p_minus()
    }

    pub fn max_p_minus(&self) -> f64 {
        self.p_minus.iter().copied().fold(0.0, f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let scale = self.transit_time.unwrap_or(1.0);
        let mut file = CsvFile::create(path, "t_over_T,P_plus,P_minus,Omega_T,Delta_T,rel_phase")?;
        for i in 0..self.len() {
            file.row(&[
                self.times[i] / scale,
                self.p_plus[i],
                self.p_minus[i],
                self.omega[i] * scale,
                self.delta[i] * scale,
                self.rel_phase[i],
            ])?;
        }
        file.finish()
    }
}

/// Integrates the amplitudes from `t_i` to `t_f`, sampling every `dt`.
///
/// Each output interval is split into RK4 substeps small enough that
/// `max(|Omega|, |Delta|) h <= MAX_PHASE_PER_STEP`.
pub fn integrate_tdse(
    drive: &Drive,
    initial: QubitState,
    t_i: f64,
    t_f: f64,
    dt: f64,
) -> Result<ProbabilityTrace> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::StepSize { dt });
    }
    if !(t_i.is_finite() && t_f.is_finite() && t_f > t_i) {
        return Err(Error::invalid("t_f", format!("need t_f > t_i, got [{t_i}, {t_f}]")));
    }
    if (initial.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("initial", "state must be normalized"));
    }
    drive.check_window(t_i)?;
    drive.check_window(t_f)?;

    let steps = ((t_f - t_i) / dt - 1e-9).ceil().max(1.0) as usize;
    let h_out = (t_f - t_i) / steps as f64;
    let mut trace = ProbabilityTrace {
        times: Vec::with_capacity(steps + 1),
        p_minus: Vec::with_capacity(steps + 1),
        p_plus: Vec::with_capacity(steps + 1),
        omega: Vec::with_capacity(steps + 1),
        delta: Vec::with_capacity(steps + 1),
        rel_phase: Vec::with_capacity(steps + 1),
        transit_time: drive.transit_time(),
        final_state: initial,
        max_norm_drift: 0.0,
    };
    let mut c = [initial.cminus, initial.cplus];
    let record = |trace: &mut ProbabilityTrace, t: f64, c: &[Complex64; 2]| {
        let state = QubitState {
            t,
            cminus: c[0],
            cplus: c[1],
        };
        trace.times.push(t);
        trace.p_minus.push(state.p_minus());
        trace.p_plus.push(state.p_plus());
        trace.omega.push(drive.omega(t));
        trace.delta.push(drive.delta(t));
        trace.rel_phase.push(state.relative_phase());
        trace.final_state = state;
    };
    record(&mut trace, t_i, &c);

    for i in 0..steps {
        let t0 = t_i + i as f64 * h_out;
        let t1 = if i + 1 == steps { t_f } else { t_i + (i + 1) as f64 * h_out };
        let span = t1 - t0;
        let fmax = [t0, 0.5 * (t0 + t1), t1]
            .iter()
            .map(|&t| drive.omega(t).abs().max(drive.delta(t).abs()))
            .fold(0.0, f64::max);
        let subs = ((fmax * span / MAX_PHASE_PER_STEP).ceil() as usize).max(1);
        let h = span / subs as f64;
        for j in 0..subs {
            rk4_step(drive, t0 + j as f64 * h, h, &mut c);
        }
        let drift = (c[0].norm_sqr() + c[1].norm_sqr() - 1.0).abs();
        if !drift.is_finite() || drift > NORM_ABORT {
            return Err(Error::NormalizationDrift { t: t1, drift });
        }
        trace.max_norm_drift = trace.max_norm_drift.max(drift);
        record(&mut trace, t1, &c);
    }
    Ok(trace)
}

fn tdse_rhs(omega: f64, delta: f64, c: &[Complex64; 2]) -> [Complex64; 2] {
    // -i H c with H = 1/2 [[-Delta, Omega], [Omega, Delta]]
    let mi = Complex64::new(0.0, -0.5);
    [
        mi * (c[1] * omega - c[0] * delta),
        mi * (c[0] * omega + c[1] * delta),
    ]
}

fn rk4_step(drive: &Drive, t: f64, h: f64, c: &mut [Complex64; 2]) {
    let tm = t + 0.5 * h;
    let (w0, d0) = (drive.omega(t), drive.delta(t));
    let (wm, dm) = (drive.omega(tm), drive.delta(tm));
    let (w1, d1) = (drive.omega(t + h), drive.delta(t + h));
    let shift = |c: &[Complex64; 2], k: &[Complex64; 2], a: f64| [c[0] + k[0] * a, c[1] + k[1] * a];
    let k1 = tdse_rhs(w0, d0, c);
    let k2 = tdse_rhs(wm, dm, &shift(c, &k1, 0.5 * h));
    let k3 = tdse_rhs(wm, dm, &shift(c, &k2, 0.5 * h));
    let k4 = tdse_rhs(w1, d1, &shift(c, &k3, h));
    for n in 0..2 {
        c[n] += (k1[n] + (k2[n] + k3[n]) * 2.0 + k4[n]) * (h / 6.0);
    }
}

/// `s(t) = 1/2 Int_0^t Omega(u) du`, sign-extended for dark drives.
///
/// Analytic drives measure time from the moment the soliton centre crosses the
/// qubit. The dark form is `sgn(t) (Omega_d0 T / 2) ln cosh(t / T)`, odd in `t`,
/// whereas the plain integral would be even. Other drives are integrated with
/// Simpson's rule from `t = 0`.
pub fn reduced_time(drive: &Drive, t: f64) -> f64 {
    match drive.source {
        DriveSource::AnalyticBright {
            omega_b0,
            transit_time: tt,
            crossing,
        } => omega_b0 * tt * (((t - crossing) / tt).exp().atan() - FRAC_PI_4),
        DriveSource::AnalyticDark {
            omega_d0,
            transit_time: tt,
            crossing,
        } => {
            let tau = t - crossing;
            tau.signum() * 0.5 * omega_d0 * tt * closedform::ln_cosh(tau / tt)
        }
        DriveSource::ChainSampled | DriveSource::Model => 0.5 * simpson(|u| drive.omega(u), 0.0, t),
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    const INTERVALS: usize = 4000;
    let h = (b - a) / INTERVALS as f64;
    let inner: f64 = (1..INTERVALS)
        .map(|i| {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            w * f(a + i as f64 * h)
        })
        .sum();
    (f(a) + inner + f(b)) * h / 3.0
}

/// Stueckelberg variable `Theta(s) = Delta[t(s)] / Omega[t(s)]`.
///
/// Needs an analytic drive so that `t(s)` can be inverted in closed form. The dark
/// inversion uses `|Omega_d0|`, so `s` and `t - crossing` share a sign when
/// `Omega_d0 > 0` and are opposite otherwise.
pub fn stueckelberg(drive: &Drive, s: f64) -> Result<f64> {
    let t = match drive.source {
        DriveSource::AnalyticBright {
            omega_b0,
            transit_time: tt,
            crossing,
        } => {
            if omega_b0 == 0.0 {
                return Err(Error::Singular { s });
            }
            let x = s / (omega_b0 * tt) + FRAC_PI_4;
            if !(x > 0.0 && x < 2.0 * FRAC_PI_4) {
                return Err(Error::invalid(
                    "s",
                    format!("{s} lies outside the range of the reduced time"),
                ));
            }
            crossing + tt * x.tan().ln()
        }
        DriveSource::AnalyticDark {
            omega_d0,
            transit_time: tt,
            crossing,
        } => {
            if s == 0.0 || omega_d0 == 0.0 {
                return Err(Error::Singular { s });
            }
            let f = 2.0 * s.abs() / (omega_d0.abs() * tt);
            // acosh(e^f) = f + ln(1 + sqrt(1 - e^{-2f}))
            let u = f + (1.0 + (-(-2.0 * f).exp_m1()).sqrt()).ln();
            crossing + s.signum() * omega_d0.signum() * tt * u
        }
        DriveSource::ChainSampled | DriveSource::Model => {
            return Err(Error::invalid(
                "drive",
                "the Stueckelberg variable needs an analytic soliton drive",
            ))
        }
    };
    let omega = drive.omega(t);
    if omega == 0.0 {
        return Err(Error::Singular { s });
    }
    Ok(drive.delta(t) / omega)
}

/// Axial coupling split `d_z = d_z0 + d_z1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuneResult {
    pub dz0: f64,
    pub dz1: f64,
    pub eta: f64,
}

impl TuneResult {
    pub fn dz(&self) -> f64 {
        self.dz0 + self.dz1
    }
}

/// `d_z0 = [omega_b + (mu - nu) H0] / S` cancels the asymptotic detuning;
/// `d_z1 = (d_z0 / 2) (phi_b0 / eta)^2` offsets the dip of the detuning under the soliton.
pub fn tune_dz(spec: &SolitonSpec, params: &ChainParams, q: &QubitParams, eta: f64) -> Result<TuneResult> {
    if spec.kind() != SolitonKind::Bright {
        return Err(Error::KindMismatch { expected: "bright" });
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::invalid("eta", format!("must be positive, got {eta}")));
    }
    q.validate()?;
    let dz0 = (spec.frequency() + q.zeeman()) / params.s;
    let dz1 = 0.5 * dz0 * (spec.amplitude() / eta).powi(2);
    Ok(TuneResult { dz0, dz1, eta })
}

/// In-plane coupling for which the on-resonance flip probability equals `xi`.
pub fn solve_dxy_for_target(xi: f64, p: i32, branch: Branch, spec: &SolitonSpec, s: f64) -> Result<f64> {
    if spec.kind() != SolitonKind::Bright {
        return Err(Error::KindMismatch { expected: "bright" });
    }
    let tt = spec.transit_time().ok_or(Error::StaticSoliton)?;
    let zero_mode = closedform::target_to_zeromode(xi, p, branch)?;
    let omega_b0 = zero_mode / (std::f64::consts::PI * tt);
    Ok(-omega_b0 / (s * spec.amplitude()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closedform::{dark_resonance_pminus, rosen_zener_pminus};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    struct Switching {
        params: ChainParams,
        spec: SolitonSpec,
        tt: f64,
        q: QubitParams,
    }

    fn switching(eta: f64) -> Switching {
        let params = ChainParams::new(1.0, 10.0, 10.0, 400).unwrap();
        let spec = SolitonSpec::bright(PI / 30.0, 10.0, &params).unwrap();
        let tt = spec.transit_time().unwrap();
        let dxy = solve_dxy_for_target(1.0, 0, Branch::Minus, &spec, params.s).unwrap();
        let tune = tune_dz(&spec, &params, &QubitParams::new(dxy, 0.0), eta).unwrap();
        Switching {
            params,
            spec,
            tt,
            q: QubitParams::new(dxy, tune.dz()),
        }
    }

    #[test]
    fn coupling_and_detuning_values() {
        let q = QubitParams::new(0.0, 2.0).with_field(2.0, 1.0, 0.5);
        assert_eq!(coupling(0.3, &q, 5.0), 0.0);
        assert_eq!(coupling(0.3, &QubitParams::new(2.0, 0.0), 5.0), -3.0);
        assert_relative_eq!(detuning(0.0, &q, 5.0, 7.0, DetuningMode::Exact).unwrap(), 0.5 - 10.0 + 7.0);
        assert!(detuning(1.01, &q, 5.0, 7.0, DetuningMode::Exact).is_err());
        assert!(detuning(1.01, &q, 5.0, 7.0, DetuningMode::Taylor).is_ok());
    }

    #[test]
    fn taylor_remainder_bound() {
        let q = QubitParams::new(1.0, 3.0);
        for i in 0..=500 {
            let phi = 0.5 * f64::from(i) / 500.0;
            let e = detuning(phi, &q, 2.0, 1.0, DetuningMode::Exact).unwrap();
            let t = detuning(phi, &q, 2.0, 1.0, DetuningMode::Taylor).unwrap();
            let x = phi * phi;
            // Lagrange remainder of sqrt(1 - x) around x = 0
            let bound = q.dz * 2.0 * x * x / (8.0 * (1.0 - x).powf(1.5));
            assert!((e - t).abs() <= bound + 1e-15);
            if phi > 0.0 && phi <= 0.1 {
                let leading = q.dz * 2.0 * x * x / 8.0;
                assert!(((e - t).abs() / leading - 1.0).abs() < 0.01);
            }
        }
    }

    #[test]
    fn switching_parameters() {
        let sw = switching(1.372);
        let omega_b0_t = coupling(sw.spec.amplitude(), &sw.q, sw.params.s) * sw.tt;
        assert!((omega_b0_t + 1.0).abs() <= 1e-3, "{omega_b0_t}");
        assert!((sw.q.dxy * sw.tt - 2.243).abs() <= 2e-3, "{}", sw.q.dxy * sw.tt);
        let tune = tune_dz(&sw.spec, &sw.params, &sw.q, 1.372).unwrap();
        assert!((tune.dz1 * sw.tt - 0.051).abs() <= 1e-3);
        // omega_b / S evaluated from the NLSE coefficients directly
        let k: f64 = PI / 30.0;
        let omega_b = -2.0 * 10.0 * ((k.cos() - 1.0) - 10.0) - 2.0 * 10.0 * k.cos() / 100.0;
        assert_relative_eq!(tune.dz0, omega_b / 10.0, max_relative = 1e-13);
        assert!((tune.dz0 * sw.tt - 95.62).abs() < 0.01);
        assert_relative_eq!(tune.dz(), tune.dz0 + tune.dz1);
    }

    #[test]
    fn tuned_peak_detuning() {
        let sw = switching(1.372);
        let tune = tune_dz(&sw.spec, &sw.params, &sw.q, 1.372).unwrap();
        let phi = sw.spec.amplitude();
        let s = sw.params.s;
        let got = detuning(phi, &sw.q, s, sw.spec.frequency(), DetuningMode::Taylor).unwrap();
        let expected = -tune.dz1 * s + 0.5 * (tune.dz0 + tune.dz1) * s * phi * phi;
        assert_relative_eq!(got, expected, max_relative = 1e-9);
        let asymptotic = detuning(0.0, &sw.q, s, sw.spec.frequency(), DetuningMode::Exact).unwrap();
        assert_relative_eq!(asymptotic, -tune.dz1 * s, max_relative = 1e-9);
    }

    #[test]
    fn tuning_limits() {
        let sw = switching(1.0);
        let far = tune_dz(&sw.spec, &sw.params, &sw.q, 1e6).unwrap();
        assert!(far.dz1.abs() < 1e-13);
        assert!(tune_dz(&sw.spec, &sw.params, &sw.q, 0.0).is_err());
        let dark_params = ChainParams::new(1.0, 1.0, 1.0, 1000).unwrap();
        let dark = SolitonSpec::dark(PI - 0.015708, 10.0, &dark_params).unwrap();
        assert!(matches!(
            tune_dz(&dark, &dark_params, &sw.q, 1.0),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn target_inversion() {
        let sw = switching(1.372);
        let s = sw.params.s;
        let omega_t = |dxy: f64| -dxy * s * sw.spec.amplitude() * sw.tt;
        let plus = solve_dxy_for_target(1.0, 0, Branch::Plus, &sw.spec, s).unwrap();
        assert_relative_eq!(omega_t(plus), 1.0, epsilon = 1e-12);
        assert!((plus.abs() * sw.tt - 2.243).abs() < 2e-3);
        let back = solve_dxy_for_target(0.0, -1, Branch::Plus, &sw.spec, s).unwrap();
        assert_relative_eq!(omega_t(back), 2.0, epsilon = 1e-12);
        let half = solve_dxy_for_target(0.5, 0, Branch::Plus, &sw.spec, s).unwrap();
        assert_relative_eq!(omega_t(half), 0.5, epsilon = 1e-12);
        assert!(solve_dxy_for_target(1.5, 0, Branch::Plus, &sw.spec, s).is_err());
    }

    #[test]
    fn analytic_drives_match_the_model_shapes() {
        let sw = switching(1.372);
        let drive = make_drive(&sw.spec, &sw.q, &sw.params, EnvelopeSource::Analytic, DetuningMode::Exact).unwrap();
        let omega_b0 = -sw.q.dxy * sw.params.s * sw.spec.amplitude();
        for i in -20..=20 {
            let t = f64::from(i) * 0.4 * sw.tt;
            assert_relative_eq!(drive.omega(t), omega_b0 / (t / sw.tt).cosh(), max_relative = 1e-12);
        }

        let p = ChainParams::new(1.0, 1.0, 1.0, 1000).unwrap();
        let dark = SolitonSpec::dark(PI - 0.015708, 10.0, &p).unwrap();
        let q = QubitParams::new(0.7, 0.0);
        let tt = dark.transit_time().unwrap();
        let drive = make_drive(&dark, &q, &p, EnvelopeSource::Analytic, DetuningMode::Exact).unwrap();
        let DriveSource::AnalyticDark { omega_d0, .. } = drive.source() else {
            panic!("expected an analytic dark drive");
        };
        assert_relative_eq!(omega_d0, 0.7 * dark.amplitude());
        for i in -20..=20 {
            let t = f64::from(i) * 0.4 * tt;
            assert!((drive.omega(t) - omega_d0 * (t / tt).tanh()).abs() <= 1e-14);
            // Omega = -d_xy S phi_d pointwise
            let phi = dark.envelope(0.0, t);
            assert_relative_eq!(drive.omega(t), -0.7 * phi, epsilon = 1e-16);
        }
    }

    #[test]
    fn constant_drive_gives_rabi_oscillations() {
        let drive = Drive::constant(0.8, 0.0);
        let trace = integrate_tdse(&drive, QubitState::up(-2.0), -2.0, 10.0, 0.05).unwrap();
        for (t, p) in trace.times.iter().zip(&trace.p_minus) {
            let expected = (0.4 * (t + 2.0)).sin().powi(2);
            assert!((p - expected).abs() < 1e-9, "t = {t}");
        }
        assert!(trace.max_norm_drift < 1e-12);
        assert_eq!(trace.len(), 241);
    }

    #[test]
    fn grid_and_window_handling() {
        let drive = Drive::constant(1.0, 0.5);
        assert!(matches!(
            integrate_tdse(&drive, QubitState::up(0.0), 0.0, 1.0, 0.0),
            Err(Error::StepSize { .. })
        ));
        assert!(integrate_tdse(&drive, QubitState::up(0.0), 1.0, 0.0, 0.1).is_err());
        let mut bad = QubitState::up(0.0);
        bad.cminus = Complex64::new(0.5, 0.0);
        assert!(integrate_tdse(&drive, bad, 0.0, 1.0, 0.1).is_err());
        let trace = integrate_tdse(&drive, QubitState::up(0.0), 0.0, 1.0, 0.3).unwrap();
        assert_eq!(trace.len(), 5);
        assert_eq!(*trace.times.last().unwrap(), 1.0);
        assert!(trace.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rosen_zener_final_probability() {
        for (w, d) in [(-1.0, 0.0), (0.75, 0.5), (2.5, 1.25)] {
            let b = BrightDriveParams::scaled(w, d, 2.0).unwrap();
            let trace = integrate_tdse(&Drive::rosen_zener(&b), QubitState::up(-40.0), -40.0, 40.0, 0.1).unwrap();
            let expected = rosen_zener_pminus(&b);
            assert!((trace.final_p_minus() - expected).abs() <= 1e-3, "{w} {d}");
        }
    }

    #[test]
    fn dark_resonance_probability() {
        let d = DarkDriveParams::new(1.5, 0.0, 1.0).unwrap();
        let trace = integrate_tdse(&Drive::tanh_model(&d), QubitState::up(-8.0), -8.0, 8.0, 0.05).unwrap();
        for (t, p) in trace.times.iter().zip(&trace.p_minus) {
            let expected = dark_resonance_pminus(&d, *t, -8.0).value;
            assert!((p - expected).abs() <= 1e-6, "t = {t}");
        }
        assert!(trace.final_p_minus() <= 1e-6);
    }

    #[test]
    fn switching_scenario_flips_the_qubit() {
        let sw = switching(1.372);
        let drive = make_drive(&sw.spec, &sw.q, &sw.params, EnvelopeSource::Analytic, DetuningMode::Exact).unwrap();
        let trace = integrate_tdse(&drive, QubitState::up(-8.0 * sw.tt), -8.0 * sw.tt, 8.0 * sw.tt, sw.tt / 100.0).unwrap();
        assert!(trace.final_p_minus() >= 0.95, "{}", trace.final_p_minus());
        assert!(trace.max_norm_drift <= 1e-9);
    }

    #[test]
    fn reduced_time_closed_forms() {
        let b = BrightDriveParams::scaled(-1.3, 0.0, 2.0).unwrap();
        let drive = Drive::rosen_zener(&b);
        assert_eq!(reduced_time(&drive, 0.0), 0.0);
        let s_inf = b.omega_b0 * 2.0 * FRAC_PI_4;
        assert_relative_eq!(reduced_time(&drive, 200.0), s_inf, max_relative = 1e-12);
        // same integral, evaluated numerically
        let model = Drive::from_fns(move |t| b.omega_b0 / (t / 2.0).cosh(), |_| 0.0);
        for t in [-3.0, 0.7, 5.0] {
            assert_relative_eq!(reduced_time(&drive, t), reduced_time(&model, t), max_relative = 1e-10);
        }

        let d = DarkDriveParams::new(0.9, 0.0, 1.5).unwrap();
        let dark = Drive::tanh_model(&d);
        assert_eq!(reduced_time(&dark, 0.0), 0.0);
        for t in [0.3, 2.0, 9.0] {
            assert_eq!(reduced_time(&dark, -t), -reduced_time(&dark, t));
            let plain = Drive::from_fns(move |u| 0.9 * (u / 1.5).tanh(), |_| 0.0);
            assert_relative_eq!(reduced_time(&dark, t), reduced_time(&plain, t), max_relative = 1e-10);
        }
    }

    #[test]
    fn stueckelberg_bright() {
        let sw = switching(1.372);
        let drive = make_drive(&sw.spec, &sw.q, &sw.params, EnvelopeSource::Analytic, DetuningMode::Taylor).unwrap();
        let s = sw.params.s;
        let phi = sw.spec.amplitude();
        let omega_b0 = -sw.q.dxy * s * phi;
        let delta_b0 = detuning(0.0, &sw.q, s, sw.spec.frequency(), DetuningMode::Taylor).unwrap();
        let theta = stueckelberg(&drive, 0.0).unwrap();
        let expected = delta_b0 / omega_b0 - sw.q.dz * phi / (2.0 * sw.q.dxy);
        assert_relative_eq!(theta, expected, max_relative = 1e-9);

        // constant detuning: Theta = (Delta_b0 / Omega_b0) sec(pi s / (2 s_inf))
        let b = BrightDriveParams::scaled(1.2, 0.4, 1.0).unwrap();
        let rz = Drive::rosen_zener(&b);
        let s_inf = b.omega_b0 * FRAC_PI_4;
        for s in [-0.8, -0.2, 0.1, 0.6] {
            let sec = 1.0 / (PI * s / (2.0 * s_inf)).cos();
            assert_relative_eq!(stueckelberg(&rz, s).unwrap(), b.delta_b0 / b.omega_b0 * sec, max_relative = 1e-9);
        }
        assert!(stueckelberg(&rz, 2.0 * s_inf).is_err());

        let flat = Drive::rosen_zener(&BrightDriveParams::scaled(1.0, 0.0, 1.0).unwrap());
        for s in [-0.5, 0.0, 0.5] {
            assert_eq!(stueckelberg(&flat, s).unwrap(), 0.0);
        }
    }

    #[test]
    fn stueckelberg_dark() {
        let p = ChainParams::new(1.0, 1.0, 1.0, 1000).unwrap();
        let dark = SolitonSpec::dark(PI - 0.015708, 10.0, &p).unwrap();
        let q = QubitParams::new(0.7, 0.3);
        let drive = make_drive(&dark, &q, &p, EnvelopeSource::Analytic, DetuningMode::Taylor).unwrap();
        assert!(matches!(stueckelberg(&drive, 0.0), Err(Error::Singular { .. })));
        let phi = dark.amplitude();
        let delta_d0 = detuning(0.0, &q, 1.0, dark.frequency(), DetuningMode::Taylor).unwrap();
        let limit = delta_d0 / (q.dxy * phi) + q.dz * phi / (2.0 * q.dxy);
        let theta = stueckelberg(&drive, 500.0).unwrap();
        assert_relative_eq!(theta, limit, max_relative = 1e-9);
        // reduced time and its inverse agree
        for s in [-3.0, -0.4, 0.2, 2.5] {
            let theta = stueckelberg(&drive, s).unwrap();
            let tt = dark.transit_time().unwrap();
            let u = tt * (2.0 * s.abs() / (0.7 * phi * tt)).exp().acosh() * s.signum();
            assert_relative_eq!(reduced_time(&drive, u), s, max_relative = 1e-9);
            assert_relative_eq!(theta, drive.delta(u) / drive.omega(u), max_relative = 1e-9);
        }
    }

    #[test]
    fn chain_sampled_drive_interpolates() {
        use crate::chain::{evolve, ChainState};
        let p = ChainParams::new(1.0, 3.0, 1.0, 200).unwrap();
        // k N = 20 pi keeps the carrier continuous across the periodic seam
        let spec = SolitonSpec::bright(PI / 10.0, 10.0, &p).unwrap().with_center(-20.0);
        let q = QubitParams::new(0.5, 0.0);
        let trace = evolve(&ChainState::from_soliton(&spec, &p, 0.0), &p, 20.0, 1e-3, 50).unwrap();
        let chain = make_drive(&spec, &q, &p, EnvelopeSource::Chain(&trace), DetuningMode::Exact).unwrap();
        let analytic = make_drive(&spec, &q, &p, EnvelopeSource::Analytic, DetuningMode::Exact).unwrap();
        assert_eq!(chain.window(), Some((0.0, trace.times[trace.len() - 1])));
        let peak = analytic.omega(20.0 / spec.velocity()).abs();
        for i in 0..=100 {
            let t = 0.2 * f64::from(i);
            assert!((chain.omega(t) - analytic.omega(t)).abs() <= 0.02 * peak, "t = {t}");
        }
        assert!(matches!(
            integrate_tdse(&chain, QubitState::up(-1.0), -1.0, 5.0, 0.1),
            Err(Error::OutsideWindow { .. })
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let b = BrightDriveParams::scaled(1.0, 0.0, 2.0).unwrap();
        let drive = Drive::rosen_zener(&b);
        let trace = integrate_tdse(&drive, QubitState::up(-4.0), -4.0, 4.0, 1.0).unwrap();
        let path = dir.path().join("trace.csv");
        trace.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t_over_T,P_plus,P_minus,Omega_T,Delta_T,rel_phase"));
        let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(first[0], -2.0);
        assert_eq!(first[1], 1.0);
        assert_eq!(text.lines().count(), 10);
        let drive_path = dir.path().join("drive.csv");
        drive.write_csv(&drive_path, &trace.times).unwrap();
        let text = std::fs::read_to_string(&drive_path).unwrap();
        assert!(text.starts_with("t_over_T,Omega_T,Delta_T\n"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn norm_is_preserved(w in -3.0..3.0f64, d in -2.0..2.0f64, tt in 0.5..3.0f64) {
            let b = BrightDriveParams::scaled(w, d, tt).unwrap();
            let trace = integrate_tdse(&Drive::rosen_zener(&b), QubitState::up(-8.0 * tt), -8.0 * tt, 8.0 * tt, tt / 20.0).unwrap();
            prop_assert!(trace.max_norm_drift <= 1e-9);
            for (a, b) in trace.p_minus.iter().zip(&trace.p_plus) {
                prop_assert!((a + b - 1.0).abs() <= 1e-9);
            }
        }

        #[test]
        fn zero_coupling_means_zero_transfer(dz in -5.0..5.0f64, h0 in -2.0..2.0f64) {
            let p = ChainParams::new(1.0, 3.0, 2.0, 400).unwrap();
            let spec = SolitonSpec::bright(0.3, 10.0, &p).unwrap();
            let q = QubitParams::new(0.0, dz).with_field(2.0, 1.0, h0);
            let drive = make_drive(&spec, &q, &p, EnvelopeSource::Analytic, DetuningMode::Exact).unwrap();
            let tt = spec.transit_time().unwrap();
            let trace = integrate_tdse(&drive, QubitState::up(-4.0 * tt), -4.0 * tt, 4.0 * tt, tt / 10.0).unwrap();
            prop_assert!(trace.p_minus.iter().all(|&p| p == 0.0));
        }

        #[test]
        fn detuning_sign_does_not_matter(w in -3.0..3.0f64, d in 0.0..2.0f64) {
            let run = |d: f64| {
                let b = BrightDriveParams::scaled(w, d, 1.0).unwrap();
                integrate_tdse(&Drive::rosen_zener(&b), QubitState::up(-16.0), -16.0, 16.0, 0.1).unwrap().final_p_minus()
            };
            prop_assert!((run(d) - run(-d)).abs() <= 1e-6);
        }

        #[test]
        fn bright_reduced_time_is_monotone(w in -3.0..3.0f64) {
            prop_assume!(w.abs() > 1e-3);
            let drive = Drive::rosen_zener(&BrightDriveParams::scaled(w, 0.0, 1.0).unwrap());
            let s: Vec<f64> = (-200..=200).map(|i| reduced_time(&drive, f64::from(i) * 0.05)).collect();
            prop_assert!(s.windows(2).all(|p| (p[1] - p[0]) * w.signum() > 0.0));
        }

        #[test]
        fn resonant_relative_phase_is_constant(w in 0.1..0.9f64) {
            // |Int Omega| / 2 = w pi / 2 < pi / 2 keeps sin 2 theta from changing sign
            let drive = Drive::rosen_zener(&BrightDriveParams::scaled(w, 0.0, 1.0).unwrap());
            let trace = integrate_tdse(&drive, QubitState::up(-8.0), -8.0, 8.0, 0.1).unwrap();
            let phases = &trace.rel_phase[1..];
            prop_assert!(phases.iter().all(|&p| (p - phases[0]).abs() <= 1e-12));
        }
    }
}
