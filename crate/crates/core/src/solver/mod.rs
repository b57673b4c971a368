//! Time integration of the full micropolar system
//!
//! `d_t u = -P(u . grad u) + Laplace u + curl w`,
//! `d_t w = -u . grad w + Laplace w + grad div w - 2 w + curl u`,
//!
//! and of the perturbation `(v, c) = (u - U, w - W)` around the exact
//! auxiliary fields of [`crate::linear_system`]:
//!
//! `d_t v = Laplace v + curl c + P(-v . grad v + G - U . grad v - v . grad U)`,
//! `d_t c = Laplace c + grad div c - 2c + curl v - v . grad c + H - F - U . grad c - v . grad W`.
//!
//! The linear part is integrated exactly per mode ([`LinearPropagator`]); the
//! rest explicitly, with products formed in physical space.

pub mod propagator;

pub use propagator::{mode_coefficients, LinearPropagator};

use crate::error::{Error, Result};
use crate::grid::{VectorSpectralField, WaveGrid};
use crate::littlewood_paley::{BesovSpec, DyadicPartition};
use crate::linear_system::{forcing_g_h, AuxState, ForcingForm};
use crate::transport::{
    accumulate_advection, accumulate_product, to_physical_sparse, to_spectral_vector, PhysicalVector, Samples,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Half exact linear step, explicit midpoint on the nonlinear part, half linear step.
    StrangExactLinear,
    /// Fourth-order Runge-Kutta in the variables `exp(-L t) x`.
    IntegratingFactorRk4,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strang-exact-linear" | "strang" => Ok(Scheme::StrangExactLinear),
            "integrating-factor-rk4" | "if-rk4" => Ok(Scheme::IntegratingFactorRk4),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::StrangExactLinear => "strang-exact-linear",
            Scheme::IntegratingFactorRk4 => "integrating-factor-rk4",
        })
    }
}

/// Threshold of the bootstrap monitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Eta {
    Absolute(f64),
    /// Multiple of the monitor norm at `t = 0`.
    InitialMultiple(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub dealias: bool,
    /// Diagnostics every `stride` steps.
    pub stride: usize,
    /// Monitored norm, `B^{-1+3/p}_{p,1}` by default.
    pub monitor: BesovSpec,
    /// Time-integrated norm, `B^{1+3/p}_{p,1}` by default.
    pub dissipation: BesovSpec,
    pub eta: Eta,
    pub forcing_form: ForcingForm,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64, p: f64) -> Result<Self> {
        let config = Self {
            dt,
            t_end,
            scheme: Scheme::StrangExactLinear,
            dealias: true,
            stride: 10,
            monitor: BesovSpec::new(-1.0 + 3.0 / p, p, 1.0)?,
            dissipation: BesovSpec::new(1.0 + 3.0 / p, p, 1.0)?,
            eta: Eta::InitialMultiple(10.0),
            forcing_form: ForcingForm::Direct,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= self.dt) {
            return Err(Error::InvalidParameter(format!(
                "t_end = {} must be at least dt = {}",
                self.t_end, self.dt
            )));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps; the final time is `steps * dt`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Clone)]
pub struct MicropolarState {
    pub t: f64,
    pub u: VectorSpectralField,
    pub w: VectorSpectralField,
}

#[derive(Debug, Clone)]
pub struct PerturbationState {
    pub t: f64,
    pub v: VectorSpectralField,
    pub c: VectorSpectralField,
}

type Tendency = (VectorSpectralField, VectorSpectralField);

/// `(Laplace u + curl w, Laplace w + grad div w - 2 w + curl u)`.
pub fn linear_part(u: &VectorSpectralField, w: &VectorSpectralField) -> Tendency {
    let du = &u.laplacian() + &w.curl();
    let dw = &(&(&w.laplacian() + &w.grad_div()) - &w.scale(2.0)) + &u.curl();
    (du, dw)
}

/// `(-P(u . grad u), -u . grad w)`.
///
/// The velocity term is evaluated as `-P(curl u x u)`: the two differ by the
/// gradient of `|u|^2 / 2`, which the projection removes, and the curl needs
/// three transforms where the gradient needs nine.
pub fn nonlinear_full(u: &VectorSpectralField, w: &VectorSpectralField, dealias: bool) -> Tendency {
    let vorticity = u.curl();
    let fields: Vec<_> = u.components().iter().chain(vorticity.components()).collect();
    let mut values = to_physical_sparse(&fields).into_iter();
    let vel: [Samples; 3] = [0, 1, 2].map(|_| values.next().unwrap());
    let vort: [Samples; 3] = [0, 1, 2].map(|_| values.next().unwrap());
    let pw = PhysicalVector::new(w, false);
    let mut nu = [None, None, None];
    let mut nw = [None, None, None];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        accumulate_product(&mut nu[i], -1.0, &vort[j], &vel[k]);
        accumulate_product(&mut nu[i], 1.0, &vort[k], &vel[j]);
    }
    accumulate_advection(&mut nw, -1.0, &vel, &pw.grad);
    let grid = u.grid();
    (
        to_spectral_vector(grid, &nu, dealias).leray_project(),
        to_spectral_vector(grid, &nw, dealias),
    )
}

pub fn rhs_full(state: &MicropolarState, dealias: bool) -> Tendency {
    let (lu, lw) = linear_part(&state.u, &state.w);
    let (nu, nw) = nonlinear_full(&state.u, &state.w, dealias);
    (&lu + &nu, &lw + &nw)
}

/// Auxiliary fields `U, W, F, G, H` at one time.
#[derive(Debug, Clone)]
pub struct AuxFields {
    pub t: f64,
    pub u: VectorSpectralField,
    pub w: VectorSpectralField,
    pub f: VectorSpectralField,
    pub g: VectorSpectralField,
    pub h: VectorSpectralField,
    /// Physical samples of `U` with its gradient, and of the gradient of `W`.
    pub u_phys: PhysicalVector,
    pub w_phys: PhysicalVector,
}

impl AuxFields {
    pub fn from_state(state: &AuxState, form: ForcingForm, dealias: bool) -> Self {
        let (u, w) = state.assemble_u_w();
        let u_phys = PhysicalVector::new(&u, true);
        let w_phys = PhysicalVector::new(&w, false);
        let (g, h) = match form {
            // The samples are needed anyway, so the direct form costs two transforms.
            ForcingForm::Direct => {
                let mut g = [None, None, None];
                let mut h = [None, None, None];
                accumulate_advection(&mut g, -1.0, &u_phys.values, &u_phys.grad);
                accumulate_advection(&mut h, -1.0, &u_phys.values, &w_phys.grad);
                let grid = u.grid();
                (to_spectral_vector(grid, &g, dealias), to_spectral_vector(grid, &h, dealias))
            }
            ForcingForm::Cancellation => forcing_g_h(&state.a, &state.m, form, dealias),
        };
        Self {
            t: state.t,
            f: state.forcing_f(),
            u,
            w,
            g,
            h,
            u_phys,
            w_phys,
        }
    }
}

/// Nonlinear and forcing part of the perturbation system.
pub fn nonlinear_perturbation(
    v: &VectorSpectralField,
    c: &VectorSpectralField,
    aux: &AuxFields,
    dealias: bool,
) -> Tendency {
    let pv = PhysicalVector::new(v, true);
    let pc = PhysicalVector::new(c, false);
    let (pu, pw) = (&aux.u_phys, &aux.w_phys);
    let mut nv = [None, None, None];
    let mut nc = [None, None, None];
    accumulate_advection(&mut nv, -1.0, &pv.values, &pv.grad);
    accumulate_advection(&mut nv, -1.0, &pu.values, &pv.grad);
    accumulate_advection(&mut nv, -1.0, &pv.values, &pu.grad);
    accumulate_advection(&mut nc, -1.0, &pv.values, &pc.grad);
    accumulate_advection(&mut nc, -1.0, &pu.values, &pc.grad);
    accumulate_advection(&mut nc, -1.0, &pv.values, &pw.grad);
    let grid = v.grid();
    let tv = (&to_spectral_vector(grid, &nv, dealias) + &aux.g).leray_project();
    let tc = &(&to_spectral_vector(grid, &nc, dealias) + &aux.h) - &aux.f;
    (tv, tc)
}

/// Full tendency of the perturbation system. Fails when the auxiliary fields
/// were evaluated more than `max_lag` away from the state time.
pub fn rhs_perturbation(
    state: &PerturbationState,
    aux: &AuxFields,
    max_lag: f64,
    dealias: bool,
) -> Result<Tendency> {
    if (state.t - aux.t).abs() > max_lag {
        return Err(Error::TimeMismatch {
            state: state.t,
            aux: aux.t,
        });
    }
    let (lv, lc) = linear_part(&state.v, &state.c);
    let (nv, nc) = nonlinear_perturbation(&state.v, &state.c, aux, dealias);
    Ok((&lv + &nv, &lc + &nc))
}

/// Lazily evaluated auxiliary fields, remembering the last few times.
pub struct AuxCache {
    initial: AuxState,
    form: ForcingForm,
    dealias: bool,
    entries: Vec<Rc<AuxFields>>,
}

impl AuxCache {
    pub fn new(a0: &crate::grid::SpectralField, form: ForcingForm, dealias: bool) -> Self {
        Self {
            initial: AuxState::initial(a0),
            form,
            dealias,
            entries: Vec::new(),
        }
    }

    pub fn state_at(&self, t: f64) -> Result<AuxState> {
        self.initial.evolve(t)
    }

    pub fn at(&mut self, t: f64) -> Result<Rc<AuxFields>> {
        if let Some(e) = self.entries.iter().find(|e| e.t == t) {
            return Ok(e.clone());
        }
        let fields = Rc::new(AuxFields::from_state(&self.initial.evolve(t)?, self.form, self.dealias));
        if self.entries.len() == 3 {
            self.entries.remove(0);
        }
        self.entries.push(fields.clone());
        Ok(fields)
    }
}

/// Exact linear propagators for one step length, with the step logic.
pub struct Stepper {
    config: SolverConfig,
    half: LinearPropagator,
    full: Option<LinearPropagator>,
}

impl Stepper {
    pub fn new(grid: &Arc<WaveGrid>, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: *config,
            half: LinearPropagator::new(grid, 0.5 * config.dt)?,
            full: match config.scheme {
                Scheme::IntegratingFactorRk4 => Some(LinearPropagator::new(grid, config.dt)?),
                Scheme::StrangExactLinear => None,
            },
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    fn advance<N>(&self, x: Tendency, t: f64, mut nl: N) -> Result<Tendency>
    where
        N: FnMut(&VectorSpectralField, &VectorSpectralField, f64) -> Result<Tendency>,
    {
        let dt = self.config.dt;
        let half = &self.half;
        let (a, b) = match self.config.scheme {
            Scheme::StrangExactLinear => {
                let (a, b) = half.apply(&x.0, &x.1);
                let (ka, kb) = nl(&a, &b, t)?;
                let (ma, mb) = (a.axpy(0.5 * dt, &ka), b.axpy(0.5 * dt, &kb));
                let (ka, kb) = nl(&ma, &mb, t + 0.5 * dt)?;
                half.apply(&a.axpy(dt, &ka), &b.axpy(dt, &kb))
            }
            Scheme::IntegratingFactorRk4 => {
                let full = self.full.as_ref().expect("built for this scheme");
                let (ha, hb) = half.apply(&x.0, &x.1);
                let (k1a, k1b) = nl(&x.0, &x.1, t)?;
                let (e1a, e1b) = half.apply(&k1a, &k1b);
                let (k2a, k2b) = nl(&ha.axpy(0.5 * dt, &e1a), &hb.axpy(0.5 * dt, &e1b), t + 0.5 * dt)?;
                let (k3a, k3b) = nl(&ha.axpy(0.5 * dt, &k2a), &hb.axpy(0.5 * dt, &k2b), t + 0.5 * dt)?;
                let (e3a, e3b) = half.apply(&k3a, &k3b);
                let (fa, fb) = full.apply(&x.0, &x.1);
                let (k4a, k4b) = nl(&fa.axpy(dt, &e3a), &fb.axpy(dt, &e3b), t + dt)?;
                let (f1a, f1b) = full.apply(&k1a, &k1b);
                let (m23a, m23b) = half.apply(&(&k2a + &k3a), &(&k2b + &k3b));
                let sa = &(&f1a + &m23a.scale(2.0)) + &k4a;
                let sb = &(&f1b + &m23b.scale(2.0)) + &k4b;
                (fa.axpy(dt / 6.0, &sa), fb.axpy(dt / 6.0, &sb))
            }
        };
        let a = a.leray_project();
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Blowup {
                t: t + dt,
                step: ((t + dt) / dt).round() as usize,
            });
        }
        Ok((a, b))
    }

    pub fn step_full(&self, s: &MicropolarState) -> Result<MicropolarState> {
        let dealias = self.config.dealias;
        let (u, w) = self.advance((s.u.clone(), s.w.clone()), s.t, |u, w, _| Ok(nonlinear_full(u, w, dealias)))?;
        Ok(MicropolarState {
            t: s.t + self.config.dt,
            u,
            w,
        })
    }

    pub fn step_perturbation(&self, s: &PerturbationState, aux: &mut AuxCache) -> Result<PerturbationState> {
        let dealias = self.config.dealias;
        let (v, c) = self.advance((s.v.clone(), s.c.clone()), s.t, |v, c, t| {
            let fields = aux.at(t)?;
            Ok(nonlinear_perturbation(v, c, &fields, dealias))
        })?;
        Ok(PerturbationState {
            t: s.t + self.config.dt,
            v,
            c,
        })
    }
}

/// One step of the full system with propagators built for this call.
pub fn step(state: &MicropolarState, config: &SolverConfig) -> Result<MicropolarState> {
    Stepper::new(state.u.grid(), config)?.step_full(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Full,
    Perturbation,
    /// Both systems side by side.
    Oracle,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Mode::Full),
            "perturbation" => Ok(Mode::Perturbation),
            "oracle" => Ok(Mode::Oracle),
            other => Err(Error::InvalidParameter(format!("unknown mode {other:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Full => "full",
            Mode::Perturbation => "perturbation",
            Mode::Oracle => "oracle",
        })
    }
}

/// Initial data: `u0 = U0 + v0`, `w0 = W0 + c0` with `U0, W0` built from `a0`.
#[derive(Debug, Clone)]
pub struct ExperimentInit {
    pub a0: crate::grid::SpectralField,
    pub v0: VectorSpectralField,
    pub c0: VectorSpectralField,
}

impl ExperimentInit {
    pub fn new(a0: crate::grid::SpectralField, v0: VectorSpectralField, c0: VectorSpectralField) -> Result<Self> {
        if !(v0.grid().same_as(a0.grid()) && c0.grid().same_as(a0.grid())) {
            return Err(Error::GridMismatch);
        }
        Ok(Self { a0, v0, c0 })
    }

    pub fn unperturbed(a0: crate::grid::SpectralField) -> Self {
        let z = VectorSpectralField::zeros(a0.grid());
        Self {
            a0,
            v0: z.clone(),
            c0: z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    /// `|v|_B + |c|_B` in the monitor space.
    pub monitor: f64,
    /// Trapezoidal `int_0^t (|v| + |c|)` in the dissipation space.
    pub dissipation_integral: f64,
    pub u_linf: f64,
    /// `|u|_2^2 + |w|_2^2`.
    pub energy: f64,
    /// Largest Fourier coefficient of `div u`.
    pub div_u: f64,
    /// Largest Fourier coefficient of `div v`.
    pub div_v: f64,
    /// `|u_full - (U + v)|_2 + |w_full - (W + c)|_2`; NaN outside oracle mode.
    pub oracle_diff: f64,
    pub gamma_crossed: bool,
    pub blowup: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub records: Vec<DiagnosticsRecord>,
    pub eta: f64,
    /// First diagnostic time with `monitor > eta`.
    pub gamma_time: Option<f64>,
    pub max_monitor: f64,
    pub final_full: MicropolarState,
    pub final_perturbation: PerturbationState,
}

impl ExperimentOutcome {
    pub fn max_oracle_diff(&self) -> f64 {
        self.records.iter().map(|r| r.oracle_diff).fold(0.0, f64::max)
    }
}

struct Monitor {
    partition: Option<DyadicPartition>,
    monitor: BesovSpec,
    dissipation: BesovSpec,
}

impl Monitor {
    fn norms(&self, v: &VectorSpectralField, c: &VectorSpectralField) -> Result<(f64, f64)> {
        let Some(part) = &self.partition else {
            return Ok((0.0, 0.0));
        };
        let (j_min, _) = part.range();
        let mut out = (0.0, 0.0);
        for f in [v, c] {
            if f.max_abs() == 0.0 {
                continue;
            }
            let blocks = part.vector_block_norms(f, self.monitor.p)?;
            out.0 += self.monitor.combine(j_min, &blocks);
            if self.dissipation.p == self.monitor.p {
                out.1 += self.dissipation.combine(j_min, &blocks);
            } else {
                out.1 += part.vector_besov_norm(f, self.dissipation)?;
            }
        }
        Ok(out)
    }
}

/// Integrates to `config.t_end`, calling `observer` on every diagnostics record.
///
/// On blowup the observer sees a final record with the flag set and the
/// blowup error is returned.
pub fn run_experiment(
    config: &SolverConfig,
    init: &ExperimentInit,
    mode: Mode,
    observer: &mut dyn FnMut(&DiagnosticsRecord) -> Result<()>,
) -> Result<ExperimentOutcome> {
    config.validate()?;
    let grid = init.a0.grid().clone();
    let stepper = Stepper::new(&grid, config)?;
    let mut aux = AuxCache::new(&init.a0, config.forcing_form, config.dealias);
    let monitor = Monitor {
        partition: match DyadicPartition::new(&grid) {
            Ok(p) => Some(p),
            Err(Error::Partition(_)) => None,
            Err(e) => return Err(e),
        },
        monitor: config.monitor,
        dissipation: config.dissipation,
    };

    let aux0 = AuxState::initial(&init.a0);
    let (u0, w0) = aux0.assemble_u_w();
    let aux_at = |t: f64| aux0.evolve(t);
    let mut full = MicropolarState {
        t: 0.0,
        u: &u0 + &init.v0,
        w: &w0 + &init.c0,
    };
    let mut pert = PerturbationState {
        t: 0.0,
        v: init.v0.clone(),
        c: init.c0.clone(),
    };

    let steps = config.steps();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut eta = f64::NAN;
    let mut gamma_time = None;
    let mut max_monitor: f64 = 0.0;
    let mut prev_dissipation: Option<(f64, f64)> = None;
    let mut integral = 0.0;

    let mut record = |step: usize,
                      t: f64,
                      full: &MicropolarState,
                      pert: &PerturbationState,
                      blowup: bool,
                      records: &mut Vec<DiagnosticsRecord>|
     -> Result<()> {
        let (ut, wt) = aux_at(t)?.assemble_u_w();
        let (u, w, v, c, oracle_diff) = match mode {
            Mode::Full => (full.u.clone(), full.w.clone(), &full.u - &ut, &full.w - &wt, f64::NAN),
            Mode::Perturbation => (&ut + &pert.v, &wt + &pert.c, pert.v.clone(), pert.c.clone(), f64::NAN),
            Mode::Oracle => {
                let du = &full.u - &(&ut + &pert.v);
                let dw = &full.w - &(&wt + &pert.c);
                let d = du.energy().sqrt() + dw.energy().sqrt();
                (full.u.clone(), full.w.clone(), pert.v.clone(), pert.c.clone(), d)
            }
        };
        let (mon, diss) = if blowup { (f64::NAN, f64::NAN) } else { monitor.norms(&v, &c)? };
        if let Some((t0, d0)) = prev_dissipation {
            integral += 0.5 * (d0 + diss) * (t - t0);
        }
        prev_dissipation = Some((t, diss));
        if step == 0 {
            eta = match config.eta {
                Eta::Absolute(e) => e,
                Eta::InitialMultiple(m) => m * mon,
            };
        }
        max_monitor = max_monitor.max(mon);
        if gamma_time.is_none() && mon > eta {
            gamma_time = Some(t);
        }
        let rec = DiagnosticsRecord {
            step,
            t,
            monitor: mon,
            dissipation_integral: integral,
            u_linf: if blowup { f64::NAN } else { u.lp_norm(f64::INFINITY)? },
            energy: u.energy() + w.energy(),
            div_u: u.div().max_abs(),
            div_v: v.div().max_abs(),
            oracle_diff,
            gamma_crossed: gamma_time.is_some(),
            blowup,
        };
        observer(&rec)?;
        records.push(rec);
        Ok(())
    };

    record(0, 0.0, &full, &pert, false, &mut records)?;
    for n in 0..steps {
        let t_next = (n + 1) as f64 * config.dt;
        let stepped = (|| -> Result<()> {
            if mode != Mode::Perturbation {
                full = stepper.step_full(&full)?;
                full.t = t_next;
            }
            if mode != Mode::Full {
                pert = stepper.step_perturbation(&pert, &mut aux)?;
                pert.t = t_next;
            }
            Ok(())
        })();
        if let Err(e) = stepped {
            if matches!(e, Error::Blowup { .. }) {
                record(n + 1, t_next, &full, &pert, true, &mut records)?;
                return Err(Error::Blowup { t: t_next, step: n + 1 });
            }
            return Err(e);
        }
        if (n + 1) % config.stride == 0 || n + 1 == steps {
            record(n + 1, t_next, &full, &pert, false, &mut records)?;
        }
    }

    let (ut, wt) = aux_at(full.t.max(pert.t))?.assemble_u_w();
    let (final_full, final_perturbation) = match mode {
        Mode::Perturbation => (
            MicropolarState {
                t: pert.t,
                u: &ut + &pert.v,
                w: &wt + &pert.c,
            },
            pert,
        ),
        Mode::Full => {
            let p = PerturbationState {
                t: full.t,
                v: &full.u - &ut,
                c: &full.w - &wt,
            };
            (full, p)
        }
        Mode::Oracle => (full, pert),
    };
    Ok(ExperimentOutcome {
        records,
        eta,
        gamma_time,
        max_monitor,
        final_full,
        final_perturbation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    /// `(dt, max difference)` of the calibration runs.
    pub calibration: Vec<(f64, f64)>,
    /// Order fitted from the two finest calibration runs.
    pub observed_order: f64,
    /// `max_i diff_i / dt_i^2`.
    pub c_conv: f64,
    pub margin: f64,
    pub dt: f64,
    pub max_diff: f64,
    /// `margin * c_conv * dt^2`.
    pub envelope: f64,
    /// First diagnostic time and difference above the envelope.
    pub divergence: Option<(f64, f64)>,
    pub gamma_time: Option<f64>,
    pub eta: f64,
    pub max_monitor: f64,
    pub passed: bool,
}

/// Runs the full and perturbation systems side by side at the calibration
/// steps and at `config.dt`, and checks the latter against the
/// `margin * C dt^2` envelope fitted from the former.
pub fn full_vs_perturbation_oracle(
    config: &SolverConfig,
    init: &ExperimentInit,
    calibration_dts: &[f64],
    margin: f64,
    observer: &mut dyn FnMut(&DiagnosticsRecord) -> Result<()>,
) -> Result<OracleReport> {
    if calibration_dts.is_empty() {
        return Err(Error::InvalidParameter("need at least one calibration step".into()));
    }
    let mut calibration = Vec::new();
    for &dt in calibration_dts {
        let cfg = SolverConfig {
            dt,
            stride: ((config.stride as f64 * config.dt / dt).round() as usize).max(1),
            ..*config
        };
        let out = run_experiment(&cfg, init, Mode::Oracle, &mut |_| Ok(()))?;
        calibration.push((dt, out.max_oracle_diff()));
    }
    let c_conv = calibration.iter().map(|(dt, d)| d / (dt * dt)).fold(0.0, f64::max);
    let observed_order = match calibration.len() {
        0 | 1 => f64::NAN,
        n => {
            let (d1, e1) = calibration[n - 2];
            let (d2, e2) = calibration[n - 1];
            (e1 / e2).ln() / (d1 / d2).ln()
        }
    };
    let envelope = margin * c_conv * config.dt * config.dt;
    let out = run_experiment(config, init, Mode::Oracle, observer)?;
    let divergence = out
        .records
        .iter()
        .find(|r| r.oracle_diff > envelope)
        .map(|r| (r.t, r.oracle_diff));
    let max_diff = out.max_oracle_diff();
    Ok(OracleReport {
        calibration,
        observed_order,
        c_conv,
        margin,
        dt: config.dt,
        max_diff,
        envelope,
        divergence,
        gamma_time: out.gamma_time,
        eta: out.eta,
        max_monitor: out.max_monitor,
        passed: divergence.is_none() && max_diff.is_finite(),
    })
}

#[cfg(test)]
mod tests;
