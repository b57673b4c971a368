//! The verification suite behind `mps verify`.
//!
//! Every check runs on a small grid and yields a named value, its limit and a
//! verdict. Nothing in the report depends on timing or thread scheduling, so
//! two runs with the same seed serialize to identical bytes.

use super::config::{seeded_perturbation, ExperimentConfig};
use super::diagnostics::DiagnosticsWriter;
use crate::error::{Error, Result};
use crate::grid::{SpectralField, VectorSpectralField, WaveGrid};
use crate::initial_data::{
    assemble_u0_w0, build_a0, datum_box, datum_dims, largeness_metrics, ConditionTerms, ProfileParams,
    OMEGA_IDENTITY_TOL,
};
use crate::linear_system::{
    decay_certificate, forcing_g_h, green_exp, green_exp_numeric, AuxState, ForcingForm, Mat2,
};
use crate::littlewood_paley::{DyadicPartition, PHI_INNER, PHI_OUTER};
use crate::rng::FieldRng;
use crate::solver::{
    rhs_full, rhs_perturbation, run_experiment, AuxFields, ExperimentInit, LinearPropagator, MicropolarState,
    Mode, PerturbationState, SolverConfig, Stepper,
};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub const VERIFY_SCHEMA: &str = "mps.verify.v1";

/// Deliberate defects for testing that the suite catches them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Flips the sign of the forcing `F` wherever the checks use it.
    FlipForcingSign,
}

impl FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flip-forcing-sign" => Ok(Fault::FlipForcingSign),
            other => Err(Error::InvalidParameter(format!("unknown fault {other:?}"))),
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("flip-forcing-sign")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    /// Measured value; `null` when the check itself errored.
    pub value: Option<f64>,
    pub limit: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema: &'static str,
    pub seed: u64,
    pub eps: f64,
    pub p: f64,
    pub fault: Option<Fault>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn failed(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

enum Limit {
    Below(f64),
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Limit {
    fn holds(&self, v: f64) -> bool {
        match *self {
            Limit::Below(x) => v < x,
            Limit::AtMost(x) => v <= x,
            Limit::AtLeast(x) => v >= x,
            Limit::Within(a, b) => (a..=b).contains(&v),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Below(x) => write!(f, "< {x:e}"),
            Limit::AtMost(x) => write!(f, "<= {x:e}"),
            Limit::AtLeast(x) => write!(f, ">= {x:e}"),
            Limit::Within(a, b) => write!(f, "in [{a}, {b}]"),
        }
    }
}

struct Suite {
    seed: u64,
    fault: Option<Fault>,
    checks: Vec<CheckResult>,
}

impl Suite {
    fn check(&mut self, name: &str, limit: Limit, value: impl FnOnce(&Self) -> Result<f64>) {
        let result = match value(self) {
            Ok(v) => CheckResult {
                name: name.into(),
                value: Some(v),
                limit: limit.to_string(),
                passed: limit.holds(v),
                error: None,
            },
            Err(e) => CheckResult {
                name: name.into(),
                value: None,
                limit: limit.to_string(),
                passed: false,
                error: Some(e.to_string()),
            },
        };
        self.checks.push(result);
    }

    fn rng(&self, stream: u64) -> FieldRng {
        FieldRng::new(self.seed, stream)
    }

    /// `F` as the checks see it.
    fn forcing(&self, state: &AuxState) -> VectorSpectralField {
        let f = state.forcing_f();
        match self.fault {
            Some(Fault::FlipForcingSign) => f.scale(-1.0),
            None => f,
        }
    }

    fn aux(&self, state: &AuxState, form: ForcingForm) -> AuxFields {
        let mut aux = AuxFields::from_state(state, form, true);
        aux.f = self.forcing(state);
        aux
    }
}

fn rel(diff: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn physical_dot(a: &VectorSpectralField, b: &VectorSpectralField) -> f64 {
    let (pa, pb) = (a.to_physical(), b.to_physical());
    let dv = a.grid().cell_volume();
    (0..3)
        .map(|i| pa[i].iter().zip(&pb[i]).map(|(x, y)| x * y).sum::<f64>())
        .sum::<f64>()
        * dv
}

fn mat_err(a: Mat2, b: Mat2) -> f64 {
    let mut m = 0.0f64;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

fn mat_mul(a: Mat2, b: Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn grid_checks(s: &mut Suite) -> Result<()> {
    let g = WaveGrid::new([16, 12, 18], [6.0, 5.0, 7.0])?;
    let f = s.rng(10).scalar(&g, 4, false);
    let u = s.rng(11).vector(&g, 4, false);
    let w = s.rng(12).vector(&g, 4, false);
    s.check("grid.round_trip", Limit::Below(1e-12), |_| {
        let back = SpectralField::from_physical(&g, &f.to_physical())?;
        Ok(rel(back.max_diff(&f), f.max_abs()))
    });
    s.check("grid.parseval", Limit::Below(1e-12), |_| {
        let phys: f64 = f.to_physical().iter().map(|x| x * x).sum::<f64>() * g.cell_volume();
        let spec: f64 = f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() * g.volume();
        Ok(rel((phys - spec).abs(), spec))
    });
    let pu = u.leray_project();
    s.check("grid.leray_idempotence", Limit::Below(1e-12), |_| {
        Ok(rel(pu.leray_project().max_diff(&pu), pu.max_abs()))
    });
    s.check("grid.leray_divergence", Limit::Below(1e-12), |_| {
        Ok(rel(pu.div().max_abs(), u.max_abs()))
    });
    s.check("grid.leray_symmetry", Limit::Below(1e-12), |_| {
        let lhs = physical_dot(&pu, &w);
        let rhs = physical_dot(&u, &w.leray_project());
        Ok(rel((lhs - rhs).abs(), (u.energy() * w.energy()).sqrt()))
    });
    s.check("grid.reality", Limit::Below(1e-12), |_| {
        let d = [u.curl(), u.grad_div(), u.laplacian(), w.leray_project()]
            .iter()
            .map(|x| rel(x.hermitian_defect(), x.max_abs()))
            .fold(0.0, f64::max);
        Ok(d)
    });
    Ok(())
}

fn littlewood_paley_checks(s: &mut Suite) -> Result<()> {
    let g = WaveGrid::cubic(32, 2.0 * PI)?;
    let part = DyadicPartition::new(&g)?;
    s.check("littlewood_paley.telescoping", Limit::Below(1e-12), |_| {
        let nyq = g.nyquist_mask();
        Ok(part
            .partition_sum()
            .iter()
            .enumerate()
            .filter(|(idx, _)| *idx != 0 && !nyq[*idx])
            .map(|(_, s)| (s - 1.0).abs())
            .fold(0.0, f64::max))
    });
    s.check("littlewood_paley.orthogonality", Limit::Below(1e-15), |_| {
        let mut worst = 0.0f64;
        for j in part.blocks() {
            let a = part.multiplier(j)?;
            for k in part.blocks().filter(|k| k - j >= 2) {
                let b = part.multiplier(k)?;
                worst = a.iter().zip(&b).fold(worst, |m, (x, y)| m.max((x * y).abs()));
            }
        }
        Ok(worst)
    });
    s.check("littlewood_paley.bony_reconstruction", Limit::Below(1e-10), |s| {
        let u = s.rng(20).scalar(&g, 7, true);
        let v = s.rng(21).scalar(&g, 7, true);
        let exact = u.product(&v, false);
        let parts = part.bony_decompose(&u, &v)?;
        Ok(rel(parts.sum().max_diff(&exact), exact.max_abs()))
    });
    let ratios = bernstein_ratios(s, &g, &part)?;
    let (lo, hi) = (PHI_INNER.min(0.75), PHI_OUTER);
    s.check("littlewood_paley.bernstein_lower", Limit::AtLeast(lo), |_| {
        Ok(ratios.iter().copied().fold(f64::INFINITY, f64::min))
    });
    s.check("littlewood_paley.bernstein_upper", Limit::AtMost(hi), |_| {
        Ok(ratios.iter().copied().fold(0.0, f64::max))
    });
    Ok(())
}

/// `|grad f|_p / (2^j |f|_p)` for single-block random fields, p in {2, 5}.
fn bernstein_ratios(s: &Suite, g: &Arc<WaveGrid>, part: &DyadicPartition) -> Result<Vec<f64>> {
    let base = s.rng(22).scalar(g, 15, true);
    let (j_min, j_max) = part.range();
    let mut out = Vec::new();
    for j in (j_min + 1)..j_max {
        let f = part.block(&base, j)?;
        if f.is_zero() {
            continue;
        }
        let grad = VectorSpectralField::new([f.derivative(0), f.derivative(1), f.derivative(2)])?;
        for p in [2.0, 5.0] {
            out.push(grad.lp_norm(p)? / ((j as f64).exp2() * f.lp_norm(p)?));
        }
    }
    Ok(out)
}

fn initial_data_checks(s: &mut Suite, params: &ProfileParams) -> Result<()> {
    let eps = params.eps;
    let g = WaveGrid::new(datum_dims(eps, false), datum_box(eps))?;
    let a0 = build_a0(params, &g)?;
    s.check("initial_data.support", Limit::AtMost(0.0), |_| {
        let (nonzero, outside) = super::commands::support_violations(&a0, eps);
        if nonzero == 0 {
            return Err(Error::Unresolvable("datum has no modes on the grid".into()));
        }
        Ok(outside as f64)
    });
    s.check("initial_data.nonnegative", Limit::AtMost(0.0), |_| {
        Ok(a0
            .coeffs()
            .iter()
            .map(|c| (-c.re).max(0.0) + c.im.abs())
            .fold(0.0, f64::max))
    });
    let (u0, w0) = assemble_u0_w0(&a0);
    s.check("initial_data.div_u0", Limit::Below(1e-12), |_| {
        Ok(rel(u0.div().max_abs(), u0.max_abs()))
    });
    s.check("initial_data.reality", Limit::Below(1e-12), |_| {
        Ok(rel(u0.hermitian_defect().max(w0.hermitian_defect()), u0.max_abs()))
    });
    s.check("initial_data.condition_homogeneity", Limit::Below(1e-12), |_| {
        let q = params.dual_exponent();
        let (dual, l1) = (a0.fourier_lq_norm(q)?, a0.fourier_lq_norm(1.0)?);
        let lambda = 3.0;
        let scaled = a0.scale(lambda);
        let base = ConditionTerms::from_norms(eps, params.gronwall_c, 0.0, dual, l1);
        let t = ConditionTerms::from_norms(
            eps,
            params.gronwall_c,
            0.0,
            scaled.fourier_lq_norm(q)?,
            scaled.fourier_lq_norm(1.0)?,
        );
        let exponent = |x: &ConditionTerms| x.exponential.ln();
        let want_exponent = params.gronwall_c * (lambda * lambda * l1 * l1 + lambda * l1);
        Ok([
            rel((t.a_hat_dual - lambda * dual).abs(), lambda * dual),
            rel((t.eps_quadratic - lambda * lambda * base.eps_quadratic).abs(), t.eps_quadratic),
            rel((t.eps_linear - lambda * base.eps_linear).abs(), t.eps_linear),
            rel((exponent(&t) - want_exponent).abs(), want_exponent),
        ]
        .into_iter()
        .fold(0.0, f64::max))
    });
    s.check("initial_data.vorticity_identity", Limit::AtMost(OMEGA_IDENTITY_TOL), |_| {
        Ok(largeness_metrics(&a0)?.identity_gap)
    });
    Ok(())
}

fn linear_system_checks(s: &mut Suite) -> Result<()> {
    s.check("linear_system.green_closed_form", Limit::Below(1e-10), |s| {
        let mut rng = s.rng(30);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let k2 = 100.0 * rng.unit();
            let t = 5.0 * rng.unit();
            worst = worst.max(mat_err(green_exp(k2, t)?, green_exp_numeric(k2, t)?));
        }
        Ok(worst)
    });
    let k2: Vec<f64> = (0..10_000).map(|i| (i as f64 * 1e-3).powi(2)).collect();
    let cert = decay_certificate(&k2, &[0.1, 0.5, 1.0, 2.0, 5.0])?;
    s.check("linear_system.decay_envelope", Limit::AtMost(1.0), |_| Ok(cert.max_ratio));
    s.check("linear_system.eigenvalue_bound", Limit::AtLeast(0.0), |_| Ok(cert.min_eigen_slack));
    s.check("linear_system.semigroup", Limit::Below(1e-12), |s| {
        let mut rng = s.rng(31);
        let mut worst = mat_err(green_exp(3.7, 0.0)?, [[1.0, 0.0], [0.0, 1.0]]);
        for _ in 0..200 {
            let (k2, t1, t2) = (50.0 * rng.unit(), 2.0 * rng.unit(), 2.0 * rng.unit());
            let lhs = green_exp(k2, t1 + t2)?;
            let rhs = mat_mul(green_exp(k2, t1)?, green_exp(k2, t2)?);
            worst = worst.max(mat_err(lhs, rhs));
        }
        Ok(worst)
    });

    let g = WaveGrid::new([16, 16, 16], [8.0, 9.0, 10.0])?;
    let mut rng = s.rng(32);
    let inputs: Vec<(SpectralField, SpectralField)> =
        (0..5).map(|_| (rng.scalar(&g, 4, false), rng.scalar(&g, 4, false))).collect();
    let forms: Vec<_> = inputs
        .iter()
        .map(|(a, m)| {
            (
                forcing_g_h(a, m, ForcingForm::Direct, true),
                forcing_g_h(a, m, ForcingForm::Cancellation, true),
            )
        })
        .collect();
    s.check("linear_system.g_h_cancellation_form", Limit::Below(1e-10), |_| {
        Ok(forms
            .iter()
            .map(|((gd, hd), (gc, hc))| rel(gd.max_diff(gc), gd.max_abs()).max(rel(hd.max_diff(hc), hd.max_abs())))
            .fold(0.0, f64::max))
    });
    s.check("linear_system.g_h_vanishing_components", Limit::Below(1e-14), |_| {
        Ok(forms
            .iter()
            .flat_map(|(d, c)| [d, c])
            .map(|(g, h)| {
                g.component(2)
                    .max_abs()
                    .max(h.component(0).max_abs())
                    .max(h.component(1).max_abs())
            })
            .fold(0.0, f64::max))
    });
    let state = AuxState::initial(&inputs[0].0).evolve(0.3)?;
    s.check("linear_system.forcing_cancellation", Limit::Below(1e-12), |s| {
        // F is exactly what the auxiliary pair misses of the unforced linear system.
        let (u, w) = state.assemble_u_w();
        let (da, dm) = state.time_derivative();
        let (du, dw) = AuxState { t: state.t, a: da, m: dm }.assemble_u_w();
        let rhs_u = &u.laplacian() + &w.curl();
        let rhs_w = &(&(&w.laplacian() + &w.grad_div()) - &w.scale(2.0)) + &(&u.curl() + &s.forcing(&state));
        Ok(rel(du.max_diff(&rhs_u), du.max_abs()).max(rel(dw.max_diff(&rhs_w), dw.max_abs())))
    });
    s.check("linear_system.forcing_reality", Limit::Below(1e-12), |s| {
        let aux = s.aux(&state, ForcingForm::Cancellation);
        Ok([&aux.f, &aux.g, &aux.h]
            .iter()
            .map(|x| rel(x.hermitian_defect(), x.max_abs()))
            .fold(0.0, f64::max))
    });
    Ok(())
}

fn random_state(s: &Suite, g: &Arc<WaveGrid>, stream: u64, amp: f64) -> MicropolarState {
    MicropolarState {
        t: 0.0,
        u: s.rng(stream).solenoidal(g, 4).scale(amp),
        w: s.rng(stream + 1).vector(g, 4, false).scale(amp),
    }
}

fn solver_checks(s: &mut Suite) -> Result<()> {
    let g = WaveGrid::cubic(16, 2.0 * PI)?;
    let s0 = random_state(s, &g, 40, 2.0);
    let cfg = SolverConfig::new(0.01, 0.05, 5.0)?;
    let stepper = Stepper::new(&g, &cfg)?;
    let mut traj = vec![s0.clone()];
    for _ in 0..5 {
        let next = stepper.step_full(traj.last().unwrap())?;
        traj.push(next);
    }
    s.check("solver.divergence", Limit::Below(1e-10), |_| {
        Ok(traj.iter().skip(1).map(|x| x.u.div().max_abs()).fold(0.0, f64::max))
    });
    s.check("solver.reality", Limit::Below(1e-12), |_| {
        Ok(traj
            .iter()
            .skip(1)
            .map(|x| x.u.hermitian_defect().max(x.w.hermitian_defect()))
            .fold(0.0, f64::max))
    });
    s.check("solver.dissipativity", Limit::AtMost(0.0), |_| {
        let prop = LinearPropagator::new(&g, 0.05)?;
        let (mut u, mut w) = (s0.u.clone(), s0.w.clone());
        let mut e = u.energy() + w.energy();
        let mut worst_growth = 0.0f64;
        for _ in 0..20 {
            (u, w) = prop.apply(&u, &w);
            let e2 = u.energy() + w.energy();
            worst_growth = worst_growth.max((e2 - e * (1.0 + 1e-14)) / e);
            e = e2;
        }
        Ok(worst_growth.max(0.0))
    });
    s.check("solver.self_convergence", Limit::Within(3.5, 4.5), |s| {
        let start = random_state(s, &g, 42, 1.0);
        let runs = [0.02, 0.01, 0.005]
            .iter()
            .map(|&dt| {
                let cfg = SolverConfig::new(dt, 0.2, 5.0)?;
                let stepper = Stepper::new(&g, &cfg)?;
                let mut x = start.clone();
                for _ in 0..cfg.steps() {
                    x = stepper.step_full(&x)?;
                }
                Ok(x)
            })
            .collect::<Result<Vec<_>>>()?;
        let dist = |a: &MicropolarState, b: &MicropolarState| ((&a.u - &b.u).energy() + (&a.w - &b.w).energy()).sqrt();
        Ok(dist(&runs[0], &runs[1]) / dist(&runs[1], &runs[2]))
    });
    s.check("solver.exact_transcription", Limit::Below(1e-8), |s| {
        // rhs_full(U + v, W + c) - rhs_perturbation(v, c) = d_t (U, W).
        let g = WaveGrid::cubic(12, 2.0 * PI)?;
        let a0 = s.rng(43).scalar(&g, 3, true).scale(0.5);
        let state = AuxState::initial(&a0).evolve(0.3)?;
        let v = s.rng(44).solenoidal(&g, 3).scale(1e-2);
        let c = s.rng(45).vector(&g, 3, false).scale(1e-2);
        let aux = s.aux(&state, ForcingForm::Direct);
        let full = MicropolarState { t: 0.3, u: &aux.u + &v, w: &aux.w + &c };
        let (fu, fw) = rhs_full(&full, true);
        let p = PerturbationState { t: 0.3, v, c };
        let (pv, pc) = rhs_perturbation(&p, &aux, 1e-12, true)?;
        let (da, dm) = state.time_derivative();
        let (du, dw) = AuxState { t: state.t, a: da, m: dm }.assemble_u_w();
        let ru = &(&fu - &pv) - &du;
        let rw = &(&fw - &pc) - &dw;
        Ok(rel(ru.max_abs().max(rw.max_abs()), fu.max_abs().max(fw.max_abs())))
    });
    Ok(())
}

fn harness_checks(s: &mut Suite) -> Result<()> {
    s.check("harness.csv_determinism", Limit::AtMost(0.0), |s| {
        let run = || -> Result<Vec<u8>> {
            let g = WaveGrid::cubic(12, 2.0 * PI)?;
            let a0 = s.rng(50).scalar(&g, 3, true);
            let (v0, c0) = seeded_perturbation(&g, s.seed, 3, 1e-2);
            let init = ExperimentInit::new(a0, v0, c0)?;
            let cfg = SolverConfig { stride: 2, ..SolverConfig::new(0.01, 0.06, 5.0)? };
            let mut w = DiagnosticsWriter::new(Vec::new())?;
            run_experiment(&cfg, &init, Mode::Oracle, &mut |r| w.write(r))?;
            w.finish()
        };
        let (a, b) = (run()?, run()?);
        let header_ok = a.starts_with(b"# schema: ");
        Ok(if a == b && header_ok { 0.0 } else { 1.0 })
    });
    Ok(())
}

/// Runs every check. Errors inside a check count as failures; only a broken
/// configuration is returned as `Err`.
pub fn run_verify(config: &ExperimentConfig, fault: Option<Fault>) -> Result<VerifyReport> {
    let params = config.profile_params()?;
    let mut suite = Suite {
        seed: config.run.seed,
        fault,
        checks: Vec::new(),
    };
    type Group<'a> = (&'a str, Box<dyn Fn(&mut Suite) -> Result<()> + 'a>);
    let groups: Vec<Group> = vec![
        ("grid", Box::new(grid_checks)),
        ("littlewood_paley", Box::new(littlewood_paley_checks)),
        ("initial_data", Box::new(|s: &mut Suite| initial_data_checks(s, &params))),
        ("linear_system", Box::new(linear_system_checks)),
        ("solver", Box::new(solver_checks)),
        ("harness", Box::new(harness_checks)),
    ];
    for (name, group) in groups {
        if let Err(e) = group(&mut suite) {
            suite.checks.push(CheckResult {
                name: format!("{name}.setup"),
                value: None,
                limit: "no error".into(),
                passed: false,
                error: Some(e.to_string()),
            });
        }
    }
    let passed = suite.checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        schema: VERIFY_SCHEMA,
        seed: config.run.seed,
        eps: params.eps,
        p: params.p,
        fault,
        checks: suite.checks,
        passed,
    })
}
