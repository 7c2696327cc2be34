//! Envelope solitons of the semidiscrete nonlinear Schrödinger equation.
//!
//! In the small-deviation limit the spin-deviation field of the chain is
//! written as `alpha_n = phi(n, t) e^{i(kn - wt)}` and the real envelope
//! obeys
//!
//! ```text
//! i (phi_t + v_g phi_x) = (w0 - w) phi - b_k S phi_xx + g_k S |phi|^2 phi
//! ```
//!
//! with `w0 = -2 g_k S`, `v_g = 2SJ sin k`, `b_k = J cos k` and
//! `g_k = J(cos k - 1) - A`. The sign of `b_k g_k` selects bright (`< 0`)
//! or dark (`> 0`) solitons.

use std::fmt;
use std::path::Path;

use crate::chain::ChainParams;
use crate::error::{Error, Result};
use crate::output::CsvFile;

/// Above this value of the squared amplitude the small-deviation expansion is rejected.
pub const AMPLITUDE_SQ_LIMIT: f64 = 0.1;
/// Between this value and [`AMPLITUDE_SQ_LIMIT`] a warning is logged.
pub const AMPLITUDE_SQ_WARN: f64 = 0.01;

/// Coefficients of the envelope equation at carrier wave number `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlseCoefficients {
    /// Characteristic magnon frequency `-2 g_k S`.
    pub omega0: f64,
    /// Group velocity of the carrier, in sites per unit time.
    pub vg: f64,
    /// Dispersion coefficient `J cos k`.
    pub bk: f64,
    /// Nonlinear coefficient `J(cos k - 1) - A`.
    pub gk: f64,
}

pub fn nlse_coefficients(params: &ChainParams, k: f64) -> NlseCoefficients {
    let (j, a, s) = (params.j, params.a, params.s);
    let bk = j * k.cos();
    let gk = j * (k.cos() - 1.0) - a;
    NlseCoefficients {
        omega0: -2.0 * gk * s,
        vg: 2.0 * s * j * k.sin(),
        bk,
        gk,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Bright,
    Dark,
    Degenerate,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Bright => "bright",
            Regime::Dark => "dark",
            Regime::Degenerate => "degenerate",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `cos(pi/2)` is not exactly zero in floating point; products this small count as zero.
const DEGENERATE_TOL: f64 = 1e-12;

pub fn classify_regime(params: &ChainParams, k: f64) -> Regime {
    let c = nlse_coefficients(params, k);
    let product = c.bk * c.gk;
    let scale = params.j * (params.j + params.a);
    if product.abs() <= DEGENERATE_TOL * scale {
        Regime::Degenerate
    } else if product < 0.0 {
        Regime::Bright
    } else {
        Regime::Dark
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolitonKind {
    Bright,
    Dark,
}

impl SolitonKind {
    pub fn name(self) -> &'static str {
        match self {
            SolitonKind::Bright => "bright",
            SolitonKind::Dark => "dark",
        }
    }
}

/// A bright or dark soliton together with its derived amplitude, frequency and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonSpec {
    kind: SolitonKind,
    k: f64,
    width: f64,
    x0: f64,
    spin: f64,
    dx: f64,
    coefficients: NlseCoefficients,
    amplitude: f64,
    frequency: f64,
    stationary_frequency: f64,
}

impl SolitonSpec {
    /// Builds a soliton of the given `kind` with carrier `k`, width `width` (sites)
    /// and centre `x0` at `t = 0`.
    ///
    /// Fails if `k` puts the chain in the other regime or on the degenerate line
    /// `b_k g_k = 0`, or if the amplitude leaves the small-deviation regime.
    pub fn new(
        kind: SolitonKind,
        k: f64,
        width: f64,
        x0: f64,
        params: &ChainParams,
    ) -> Result<Self> {
        params.validate()?;
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::invalid("L", format!("width must be positive, got {width}")));
        }
        if !k.is_finite() || !x0.is_finite() {
            return Err(Error::invalid("k", "wave number and centre must be finite"));
        }
        let regime = classify_regime(params, k);
        let expected = match kind {
            SolitonKind::Bright => Regime::Bright,
            SolitonKind::Dark => Regime::Dark,
        };
        if regime == Regime::Degenerate {
            return Err(Error::DegenerateRegime { k });
        }
        if regime != expected {
            return Err(Error::RegimeMismatch {
                requested: kind.name(),
                actual: regime.name(),
            });
        }

        let c = nlse_coefficients(params, k);
        let (j, a, s) = (params.j, params.a, params.s);
        let denom = j * (1.0 - k.cos()) + a;
        // width in lattice units
        let sites = width / params.dx;
        let shift = 2.0 * s * j * k.cos() / (sites * sites);
        let (amplitude, frequency, stationary_frequency) = match kind {
            SolitonKind::Bright => {
                let amp = (2.0 * j * k.cos() / denom).sqrt() / sites;
                // The sech ansatz balances the linear terms only at w0 - b_k S / L^2.
                (amp, c.omega0 - shift, c.omega0 - c.bk * s / (sites * sites))
            }
            SolitonKind::Dark => {
                let amp = (-2.0 * j * k.cos() / denom).sqrt() / sites;
                (amp, c.omega0 + shift, c.omega0 + shift)
            }
        };

        let amplitude_sq = amplitude * amplitude;
        if amplitude_sq >= AMPLITUDE_SQ_LIMIT {
            return Err(Error::LargeAmplitude { amplitude_sq });
        }
        if amplitude_sq >= AMPLITUDE_SQ_WARN {
            log::warn!(
                "soliton amplitude^2 = {amplitude_sq:.4} is at the edge of the small-deviation regime"
            );
        }

        Ok(SolitonSpec {
            kind,
            k,
            width,
            x0,
            spin: s,
            dx: params.dx,
            coefficients: c,
            amplitude,
            frequency,
            stationary_frequency,
        })
    }

    pub fn bright(k: f64, width: f64, params: &ChainParams) -> Result<Self> {
        Self::new(SolitonKind::Bright, k, width, 0.0, params)
    }

    pub fn dark(k: f64, width: f64, params: &ChainParams) -> Result<Self> {
        Self::new(SolitonKind::Dark, k, width, 0.0, params)
    }

    /// Same soliton, centred at `x0` at `t = 0`.
    pub fn with_center(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    pub fn kind(&self) -> SolitonKind {
        self.kind
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn center(&self) -> f64 {
        self.x0
    }

    pub fn spin(&self) -> f64 {
        self.spin
    }

    pub fn coefficients(&self) -> NlseCoefficients {
        self.coefficients
    }

    /// `phi_b0` or `phi_d0`.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Published soliton frequency: `w0 -/+ 2SJ cos k / L^2` for bright/dark.
    ///
    /// This is the frequency that enters the qubit detuning and the `d_z0` tuning rule.
    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Frequency at which the profile is a stationary solution of the envelope equation.
    ///
    /// Equal to [`frequency`](Self::frequency) for dark solitons. For bright solitons the
    /// sech profile solves the envelope equation at `w0 - b_k S / L^2`, which is also the
    /// rate at which the lattice carrier actually rotates; demodulation of chain data and
    /// the equation residual use this value.
    pub fn stationary_frequency(&self) -> f64 {
        self.stationary_frequency
    }

    /// Velocity in length units per unit time (`v_g dx`).
    pub fn velocity(&self) -> f64 {
        self.coefficients.vg * self.dx
    }

    /// Transit time `T = L / |v_g|`; `None` for a soliton at rest.
    pub fn transit_time(&self) -> Option<f64> {
        let v = self.velocity();
        if v.abs() < 1e-14 {
            None
        } else {
            Some(self.width / v.abs())
        }
    }

    /// Centre position at time `t`.
    pub fn center_at(&self, t: f64) -> f64 {
        self.x0 + self.velocity() * t
    }

    /// Envelope `phi(x, t)` for whichever kind this is.
    pub fn envelope(&self, x: f64, t: f64) -> f64 {
        self.shape((x - self.center_at(t)) / self.width)
    }

    /// Envelope as a function of the scaled comoving coordinate `(x - vt - x0) / L`.
    pub fn shape(&self, u: f64) -> f64 {
        match self.kind {
            SolitonKind::Bright => self.amplitude / u.cosh(),
            SolitonKind::Dark => self.amplitude * u.tanh(),
        }
    }

    /// Writes `x,phi` rows of the envelope at time `t`.
    pub fn write_profile_csv(&self, path: &Path, xs: &[f64], t: f64) -> Result<()> {
        let mut file = CsvFile::create(path, "x,phi")?;
        for &x in xs {
            file.row(&[x, self.envelope(x, t)])?;
        }
        file.finish()
    }
}

/// `phi_b0 sech((x - vt - x0) / L)`.
pub fn bright_profile(spec: &SolitonSpec, x: f64, t: f64) -> Result<f64> {
    if spec.kind != SolitonKind::Bright {
        return Err(Error::KindMismatch { expected: "bright" });
    }
    Ok(spec.envelope(x, t))
}

/// `phi_d0 tanh((x - vt - x0) / L)`.
pub fn dark_profile(spec: &SolitonSpec, x: f64, t: f64) -> Result<f64> {
    if spec.kind != SolitonKind::Dark {
        return Err(Error::KindMismatch { expected: "dark" });
    }
    Ok(spec.envelope(x, t))
}

/// Maximum modulus of the envelope-equation residual of the analytic profile over `grid`,
/// with derivatives taken by centred differences of step `grid[1] - grid[0]` in both
/// space and time.
pub fn nlse_residual(spec: &SolitonSpec, params: &ChainParams, grid: &[f64], t: f64) -> f64 {
    let c = spec.coefficients;
    // dispersion in length units
    let c = NlseCoefficients { bk: c.bk * params.dx * params.dx, ..c };
    residual_of(grid, t, params.s, c, spec.velocity(), spec.stationary_frequency(), |x, t| {
        spec.envelope(x, t)
    })
}

pub(crate) fn residual_of(
    grid: &[f64],
    t: f64,
    s: f64,
    c: NlseCoefficients,
    v: f64,
    omega: f64,
    phi: impl Fn(f64, f64) -> f64,
) -> f64 {
    if grid.len() < 2 {
        return 0.0;
    }
    let h = (grid[1] - grid[0]).abs();
    grid.iter()
        .map(|&x| {
            let p = phi(x, t);
            let px = (phi(x + h, t) - phi(x - h, t)) / (2.0 * h);
            let pt = (phi(x, t + h) - phi(x, t - h)) / (2.0 * h);
            let pxx = (phi(x + h, t) - 2.0 * p + phi(x - h, t)) / (h * h);
            // phi is real, so the transport part is purely imaginary.
            let imag = pt + v * px;
            let real = (c.omega0 - omega) * p - c.bk * s * pxx + c.gk * s * p * p * p;
            imag.hypot(real)
        })
        .fold(0.0, f64::max)
}

/// Uniformly spaced positions `start, start + h, ...` (`count` of them).
pub fn uniform_grid(start: f64, spacing: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| start + spacing * i as f64).collect()
}
