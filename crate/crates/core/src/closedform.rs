//! Closed-form transition probabilities of the soliton-driven qubit.
//!
//! The bright drive maps onto the Rosen-Zener model (sech coupling, constant
//! detuning); the dark drive onto the tanh model. These formulas serve as
//! oracles for the numerical solver and as the design equations for tuning.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Sech drive `omega_b0 sech(t/T)` with asymptotic detuning `delta_b0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrightDriveParams {
    pub omega_b0: f64,
    pub delta_b0: f64,
    pub transit_time: f64,
}

impl BrightDriveParams {
    pub fn new(omega_b0: f64, delta_b0: f64, transit_time: f64) -> Result<Self> {
        positive_time(transit_time)?;
        Ok(BrightDriveParams {
            omega_b0,
            delta_b0,
            transit_time,
        })
    }

    /// Build from the dimensionless products `omega_b0 T` and `delta_b0 T`.
    pub fn scaled(omega_t: f64, delta_t: f64, transit_time: f64) -> Result<Self> {
        Self::new(omega_t / transit_time, delta_t / transit_time, transit_time)
    }
}

/// Tanh drive `omega_d0 tanh(t/T)`.
///
/// `delta_d` is the constant detuning of the tanh model and is what every formula
/// here uses; `delta_d0` is the asymptotic detuning of the soliton drive, kept for
/// reference since the two coincide only when the profile correction is neglected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DarkDriveParams {
    pub omega_d0: f64,
    pub delta_d: f64,
    pub delta_d0: f64,
    pub transit_time: f64,
}

impl DarkDriveParams {
    pub fn new(omega_d0: f64, delta_d: f64, transit_time: f64) -> Result<Self> {
        positive_time(transit_time)?;
        Ok(DarkDriveParams {
            omega_d0,
            delta_d,
            delta_d0: delta_d,
            transit_time,
        })
    }

    pub fn with_asymptotic_detuning(mut self, delta_d0: f64) -> Self {
        self.delta_d0 = delta_d0;
        self
    }
}

fn positive_time(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("T", format!("transit time must be positive, got {t}")))
    }
}

/// Final-time flip probability of the Rosen-Zener model,
/// `sin^2(pi omega_b0 T / 2) / cosh^2(pi delta_b0 T / 2)`.
pub fn rosen_zener_pminus(b: &BrightDriveParams) -> f64 {
    let t = b.transit_time;
    let num = (0.5 * PI * b.omega_b0 * t).sin().powi(2);
    let den = (0.5 * PI * b.delta_b0 * t).cosh().powi(2);
    num / den
}

/// On-resonance flip probability `sin^2(pi omega_b0 T / 2)`.
pub fn onresonance_pminus(omega_b0_t: f64) -> f64 {
    (0.5 * PI * omega_b0_t).sin().powi(2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn from_sign(sign: i32) -> Result<Self> {
        match sign {
            1 => Ok(Branch::Plus),
            -1 => Ok(Branch::Minus),
            other => Err(Error::invalid("sign", format!("must be +1 or -1, got {other}"))),
        }
    }
}

/// Zero-mode interaction `pi omega_b0 T = +/- 2 arcsin(sqrt(xi)) - 2 p pi` giving a final
/// on-resonance flip probability `xi`.
pub fn target_to_zeromode(xi: f64, p: i32, branch: Branch) -> Result<f64> {
    if !(0.0..=1.0).contains(&xi) {
        return Err(Error::invalid("xi", format!("target probability must lie in [0, 1], got {xi}")));
    }
    Ok(branch.sign() * 2.0 * xi.sqrt().asin() - 2.0 * f64::from(p) * PI)
}

/// Leading fast-soliton behaviour of the tanh model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastSolitonTerms {
    /// `(2 omega_d0 delta_d / (omega_d0^2 + delta_d^2))^2`.
    pub p0: f64,
    omega_d0: f64,
}

impl FastSolitonTerms {
    pub fn new(d: &DarkDriveParams) -> Self {
        let (w, delta) = (d.omega_d0, d.delta_d);
        let denom = w * w + delta * delta;
        let p0 = if denom == 0.0 {
            0.0
        } else {
            (2.0 * w * delta / denom).powi(2)
        };
        FastSolitonTerms { p0, omega_d0: w }
    }

    /// `chi(t) = -omega_d0 t`.
    pub fn chi(&self, t: f64) -> f64 {
        -self.omega_d0 * t
    }
}

/// Thresholds that turn the asymptotic `>>` / `<<` conditions into tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// `a >> b` means `a / b >= much_greater`.
    pub much_greater: f64,
    /// `a << b` means `a / b <= much_less`.
    pub much_less: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            much_greater: 10.0,
            much_less: 0.1,
        }
    }
}

impl Thresholds {
    fn less(&self, a: f64, b: f64) -> bool {
        a <= self.much_less * b
    }

    fn greater(&self, a: f64, b: f64) -> bool {
        a >= self.much_greater * b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastSolitonEstimate {
    pub value: f64,
    pub p0: f64,
    pub chi: f64,
    /// `|delta_d T| << 1`.
    pub small_detuning: bool,
    /// `|omega_d0 T| << 1`.
    pub small_coupling: bool,
}

impl FastSolitonEstimate {
    pub fn is_valid(&self) -> bool {
        self.small_detuning && self.small_coupling
    }
}

/// `P0 [sin^2(chi/2) + sin^2(chi)/4]`, reported unclamped alongside its validity flags.
pub fn dark_fast_pminus(d: &DarkDriveParams, t: f64) -> FastSolitonEstimate {
    dark_fast_pminus_with(d, t, &Thresholds::default())
}

pub fn dark_fast_pminus_with(d: &DarkDriveParams, t: f64, th: &Thresholds) -> FastSolitonEstimate {
    let terms = FastSolitonTerms::new(d);
    let chi = terms.chi(t);
    let value = terms.p0 * ((0.5 * chi).sin().powi(2) + 0.25 * chi.sin().powi(2));
    FastSolitonEstimate {
        value,
        p0: terms.p0,
        chi,
        small_detuning: th.less((d.delta_d * d.transit_time).abs(), 1.0),
        small_coupling: th.less((d.omega_d0 * d.transit_time).abs(), 1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceEstimate {
    /// `sin^2[(omega_d0 T / 2) ln(cosh(t/T) / cosh(t_i/T))]`.
    pub value: f64,
    /// Rabi limit `sin^2(omega_d0 (t - t_i) / 2)`.
    pub rabi: f64,
    /// Both times at least one transit time, where the Rabi limit applies.
    pub rabi_valid: bool,
}

/// Effective on-resonance flip probability of the tanh drive started at `t_i`.
pub fn dark_resonance_pminus(d: &DarkDriveParams, t: f64, t_i: f64) -> ResonanceEstimate {
    let tt = d.transit_time;
    let log_ratio = ln_cosh(t / tt) - ln_cosh(t_i / tt);
    let value = (0.5 * d.omega_d0 * tt * log_ratio).sin().powi(2);
    let rabi = (0.5 * d.omega_d0 * (t - t_i)).sin().powi(2);
    ResonanceEstimate {
        value,
        rabi,
        rabi_valid: t >= tt && t_i >= tt,
    }
}

/// `ln cosh x` without overflow.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DarkRegimeLabel {
    /// `t >> T`: the coupling is effectively `sgn(t)`.
    Fast,
    /// `t << T`: the coupling is effectively linear in `t`.
    Slow,
    /// `omega_d0 t^2 << T`.
    WeakCoupling,
    /// `|delta_d T| >> 2 sqrt(omega_d0 T)`.
    LargeDetuning,
    /// `|delta_d T| << 2 omega_d0 t`.
    SmallDetuning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DarkRegime {
    pub fast: bool,
    pub slow: bool,
    pub weak_coupling: bool,
    /// `omega_d0 t^2 >> T`, the regime where the slow-soliton probabilities are appreciable.
    pub strong_coupling: bool,
    pub large_detuning: bool,
    pub small_detuning: bool,
}

impl DarkRegime {
    pub fn labels(&self) -> Vec<DarkRegimeLabel> {
        let mut out = Vec::new();
        if self.fast {
            out.push(DarkRegimeLabel::Fast);
        }
        if self.slow {
            out.push(DarkRegimeLabel::Slow);
        }
        if self.weak_coupling {
            out.push(DarkRegimeLabel::WeakCoupling);
        }
        if self.large_detuning {
            out.push(DarkRegimeLabel::LargeDetuning);
        }
        if self.small_detuning {
            out.push(DarkRegimeLabel::SmallDetuning);
        }
        out
    }

    pub fn has(&self, label: DarkRegimeLabel) -> bool {
        self.labels().contains(&label)
    }
}

pub fn classify_dark_regime(d: &DarkDriveParams, t: f64) -> DarkRegime {
    classify_dark_regime_with(d, t, &Thresholds::default())
}

pub fn classify_dark_regime_with(d: &DarkDriveParams, t: f64, th: &Thresholds) -> DarkRegime {
    let tt = d.transit_time;
    let t = t.abs();
    let w = d.omega_d0.abs();
    let detuning = (d.delta_d * tt).abs();
    let coupling = w * t * t;
    DarkRegime {
        fast: th.greater(t, tt),
        slow: th.less(t, tt),
        weak_coupling: th.less(coupling, tt),
        strong_coupling: th.greater(coupling, tt),
        large_detuning: th.greater(detuning, 2.0 * (w * tt).sqrt()),
        small_detuning: th.less(detuning, 2.0 * w * t),
    }
}
