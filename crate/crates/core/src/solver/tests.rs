use super::*;
use crate::grid::SpectralField;
use crate::linear_system::{linear_generator_6x6, linear_propagator_6x6};
use crate::rng::FieldRng;
use num_complex::Complex64;
use std::f64::consts::PI;

fn cube(n: usize) -> Arc<WaveGrid> {
    WaveGrid::cubic(n, 2.0 * PI).unwrap()
}

fn random_state(grid: &Arc<WaveGrid>, seed: u64, amp: f64, max_mode: usize) -> MicropolarState {
    let mut rng = FieldRng::new(seed, 0);
    MicropolarState {
        t: 0.0,
        u: rng.solenoidal(grid, max_mode).scale(amp),
        w: rng.vector(grid, max_mode, false).scale(amp),
    }
}

/// Copies `f` onto a grid twice as fine in every direction.
fn refine(f: &SpectralField, fine: &Arc<WaveGrid>) -> SpectralField {
    let g = f.grid();
    let mut coeffs = vec![Complex64::default(); fine.len()];
    for (idx, c) in f.coeffs().iter().enumerate() {
        if *c != Complex64::default() {
            coeffs[fine.index_of_mode(g.mode(idx)).unwrap()] = *c;
        }
    }
    SpectralField::from_coeffs(fine, coeffs).unwrap()
}

fn coarsen(f: &SpectralField, coarse: &Arc<WaveGrid>) -> SpectralField {
    let fine = f.grid();
    let cut = coarse.dealias_cutoff();
    let mut coeffs = vec![Complex64::default(); coarse.len()];
    for (idx, slot) in coeffs.iter_mut().enumerate() {
        let n = coarse.mode(idx);
        if (0..3).all(|a| n[a].unsigned_abs() as usize <= cut[a]) {
            *slot = f.coeffs()[fine.index_of_mode(n).unwrap()];
        }
    }
    SpectralField::from_coeffs(coarse, coeffs).unwrap()
}

#[test]
fn zero_state_has_zero_tendency_and_stays_zero() {
    let g = cube(8);
    let z = VectorSpectralField::zeros(&g);
    let s = MicropolarState { t: 0.0, u: z.clone(), w: z.clone() };
    let (du, dw) = rhs_full(&s, true);
    assert_eq!(du.max_abs(), 0.0);
    assert_eq!(dw.max_abs(), 0.0);
    let cfg = SolverConfig::new(0.01, 0.01, 5.0).unwrap();
    let next = step(&s, &cfg).unwrap();
    assert_eq!(next.u.max_abs() + next.w.max_abs(), 0.0);
}

#[test]
fn single_shear_mode_decays_like_heat() {
    // u = (0, 0, sin x1): self-advection vanishes, w-tendency is curl u.
    let g = cube(8);
    let zero = SpectralField::zeros(&g);
    let s1 = SpectralField::from_physical(
        &g,
        &(0..g.len())
            .map(|i| (g.positions(0)[g.storage_index(i)[0]]).sin())
            .collect::<Vec<_>>(),
    )
    .unwrap();
    let u = VectorSpectralField::new([zero.clone(), zero.clone(), s1]).unwrap();
    let w = VectorSpectralField::zeros(&g);
    let s = MicropolarState { t: 0.0, u: u.clone(), w };
    let (du, dw) = rhs_full(&s, true);
    assert!(du.max_diff(&u.scale(-1.0)) < 1e-14);
    assert!(dw.max_diff(&u.curl()) < 1e-14);
}

#[test]
fn nonlinearity_matches_padded_products() {
    let g = cube(12);
    let fine = cube(24);
    let s = random_state(&g, 21, 1.0, 3);
    let (nu, nw) = nonlinear_full(&s.u, &s.w, true);
    let uf = s.u.map(|c| refine(c, &fine));
    let wf = s.w.map(|c| refine(c, &fine));
    // On the fine grid the products of band-3 fields are exact.
    let adv = |f: &VectorSpectralField| {
        VectorSpectralField::new([0, 1, 2].map(|i| {
            let mut acc = SpectralField::zeros(&fine);
            for j in 0..3 {
                acc = &acc + &uf.component(j).product(&f.component(i).derivative(j), false);
            }
            coarsen(&acc, &g)
        }))
        .unwrap()
    };
    let want_u = adv(&uf).leray_project().scale(-1.0);
    let want_w = adv(&wf).scale(-1.0);
    assert!(nu.max_diff(&want_u) < 1e-13 * want_u.max_abs());
    assert!(nw.max_diff(&want_w) < 1e-13 * want_w.max_abs());
}

#[test]
fn small_amplitude_tendency_is_the_linear_generator() {
    let g = cube(8);
    let s = random_state(&g, 22, 1e-8, 3);
    let (du, dw) = rhs_full(&s, true);
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for idx in 0..g.len() {
        let m = linear_generator_6x6(g.xi(idx));
        let x: Vec<Complex64> = (0..6)
            .map(|r| if r < 3 { s.u.component(r).coeffs()[idx] } else { s.w.component(r - 3).coeffs()[idx] })
            .collect();
        for r in 0..6 {
            let lin: Complex64 = (0..6).map(|c| m[(r, c)] * x[c]).sum();
            let got = if r < 3 { du.component(r).coeffs()[idx] } else { dw.component(r - 3).coeffs()[idx] };
            worst = worst.max((got - lin).norm());
            scale = scale.max(lin.norm());
        }
    }
    assert!(worst < 1e-6 * scale, "{worst} vs {scale}");
}

fn run_full(s: &MicropolarState, cfg: &SolverConfig) -> MicropolarState {
    let stepper = Stepper::new(s.u.grid(), cfg).unwrap();
    let mut x = s.clone();
    for _ in 0..cfg.steps() {
        x = stepper.step_full(&x).unwrap();
    }
    x
}

fn distance(a: &MicropolarState, b: &MicropolarState) -> f64 {
    ((&a.u - &b.u).energy() + (&a.w - &b.w).energy()).sqrt()
}

#[test]
fn strang_self_convergence_is_second_order() {
    let g = cube(16);
    let s = random_state(&g, 23, 1.0, 4);
    let runs: Vec<MicropolarState> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| run_full(&s, &SolverConfig::new(dt, 0.2, 5.0).unwrap()))
        .collect();
    let ratio = distance(&runs[0], &runs[1]) / distance(&runs[1], &runs[2]);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn integrating_factor_rk4_is_fourth_order() {
    let g = cube(16);
    let s = random_state(&g, 24, 1.0, 4);
    let runs: Vec<MicropolarState> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let cfg = SolverConfig {
                scheme: Scheme::IntegratingFactorRk4,
                ..SolverConfig::new(dt, 0.2, 5.0).unwrap()
            };
            run_full(&s, &cfg)
        })
        .collect();
    let ratio = distance(&runs[0], &runs[1]) / distance(&runs[1], &runs[2]);
    assert!(ratio > 12.0, "ratio {ratio}");
}

#[test]
fn steps_keep_divergence_and_reality() {
    let g = cube(16);
    let s = random_state(&g, 25, 2.0, 4);
    for scheme in [Scheme::StrangExactLinear, Scheme::IntegratingFactorRk4] {
        let cfg = SolverConfig {
            scheme,
            ..SolverConfig::new(0.01, 0.05, 5.0).unwrap()
        };
        let stepper = Stepper::new(&g, &cfg).unwrap();
        let mut x = s.clone();
        for _ in 0..5 {
            x = stepper.step_full(&x).unwrap();
            assert!(x.u.div().max_abs() < 1e-10);
            assert!(x.u.hermitian_defect() < 1e-12 && x.w.hermitian_defect() < 1e-12);
        }
    }
}

#[test]
fn linear_amplitude_step_matches_numeric_propagator() {
    let g = cube(8);
    let s = random_state(&g, 26, 1e-12, 3);
    let dt = 0.05;
    let next = step(&s, &SolverConfig::new(dt, dt, 5.0).unwrap()).unwrap();
    for idx in 0..g.len() {
        let m = linear_propagator_6x6(g.xi(idx), dt).unwrap();
        let x: Vec<Complex64> = (0..6)
            .map(|r| if r < 3 { s.u.component(r).coeffs()[idx] } else { s.w.component(r - 3).coeffs()[idx] })
            .collect();
        for r in 0..6 {
            let want: Complex64 = (0..6).map(|c| m[(r, c)] * x[c]).sum();
            let got = if r < 3 { next.u.component(r).coeffs()[idx] } else { next.w.component(r - 3).coeffs()[idx] };
            assert!((got - want).norm() < 1e-10 * 1e-12);
        }
    }
}

fn datum_like(grid: &Arc<WaveGrid>, seed: u64, amp: f64) -> SpectralField {
    FieldRng::new(seed, 7).scalar(grid, 3, true).scale(amp)
}

#[test]
fn perturbation_tendency_at_rest_is_the_forcing() {
    let g = cube(12);
    let a0 = datum_like(&g, 31, 1.0);
    let aux = AuxFields::from_state(&AuxState::initial(&a0).evolve(0.2).unwrap(), ForcingForm::Direct, true);
    let z = VectorSpectralField::zeros(&g);
    let s = PerturbationState { t: 0.2, v: z.clone(), c: z.clone() };
    let (tv, tc) = rhs_perturbation(&s, &aux, 1e-12, true).unwrap();
    assert!(tv.max_diff(&aux.g.leray_project()) < 1e-15);
    assert!(tc.max_diff(&(&aux.h - &aux.f)) < 1e-15);

    let zero_aux = AuxFields::from_state(&AuxState::initial(&SpectralField::zeros(&g)), ForcingForm::Direct, true);
    let s0 = PerturbationState { t: 0.0, v: z.clone(), c: z };
    let (a, b) = rhs_perturbation(&s0, &zero_aux, 1e-12, true).unwrap();
    assert_eq!(a.max_abs() + b.max_abs(), 0.0);
    assert!(matches!(
        rhs_perturbation(&s, &zero_aux, 0.05, true),
        Err(Error::TimeMismatch { .. })
    ));
}

#[test]
fn full_tendency_splits_into_perturbation_and_auxiliary_parts() {
    // rhs_full(U + v, W + c) - rhs_perturbation(v, c) = d_t (U, W).
    let g = cube(12);
    let a0 = datum_like(&g, 32, 0.5);
    let state = AuxState::initial(&a0).evolve(0.3).unwrap();
    let mut rng = FieldRng::new(33, 0);
    let v = rng.solenoidal(&g, 3).scale(1e-2);
    let c = rng.vector(&g, 3, false).scale(1e-2);
    for form in [ForcingForm::Direct, ForcingForm::Cancellation] {
        let aux = AuxFields::from_state(&state, form, true);
        let full = MicropolarState { t: 0.3, u: &aux.u + &v, w: &aux.w + &c };
        let (fu, fw) = rhs_full(&full, true);
        let p = PerturbationState { t: 0.3, v: v.clone(), c: c.clone() };
        let (pv, pc) = rhs_perturbation(&p, &aux, 1e-12, true).unwrap();
        let (da, dm) = state.time_derivative();
        let (du, dw) = AuxState { t: state.t, a: da, m: dm }.assemble_u_w();
        let ru = &(&fu - &pv) - &du;
        let rw = &(&fw - &pc) - &dw;
        let scale = fu.max_abs().max(fw.max_abs());
        assert!(ru.max_abs() < 1e-8 * scale && rw.max_abs() < 1e-8 * scale, "{} {}", ru.max_abs(), rw.max_abs());
    }
}

#[test]
fn zero_data_gives_zero_diagnostics() {
    let g = cube(8);
    let init = ExperimentInit::unperturbed(SpectralField::zeros(&g));
    let cfg = SolverConfig { stride: 2, ..SolverConfig::new(0.01, 0.04, 5.0).unwrap() };
    for mode in [Mode::Full, Mode::Perturbation, Mode::Oracle] {
        let out = run_experiment(&cfg, &init, mode, &mut |_| Ok(())).unwrap();
        assert_eq!(out.records.len(), 3);
        for r in &out.records {
            assert_eq!(r.monitor + r.dissipation_integral + r.u_linf + r.energy + r.div_u + r.div_v, 0.0);
            assert!(!r.blowup);
        }
        assert!(out.final_full.u.max_abs() == 0.0 && out.final_perturbation.c.max_abs() == 0.0);
    }
}

#[test]
fn oracle_agrees_at_linear_amplitude() {
    let g = cube(12);
    let mut rng = FieldRng::new(34, 0);
    let a0 = datum_like(&g, 35, 1e-6);
    let init = ExperimentInit::new(
        a0,
        rng.solenoidal(&g, 3).scale(1e-6),
        rng.vector(&g, 3, false).scale(1e-6),
    )
    .unwrap();
    // The forcing F is integrated explicitly in the perturbation system, so
    // agreement is limited by its O(dt^2) error.
    let cfg = SolverConfig { stride: 100, ..SolverConfig::new(1e-3, 1.0, 5.0).unwrap() };
    let out = run_experiment(&cfg, &init, Mode::Oracle, &mut |_| Ok(())).unwrap();
    assert!(out.max_oracle_diff() < 1e-10, "{}", out.max_oracle_diff());
    assert!(out.records.iter().all(|r| r.div_v < 1e-10));
}

#[test]
fn blowup_is_reported_with_a_flagged_record() {
    let g = cube(8);
    let mut s = random_state(&g, 36, 1.0, 3);
    s.w = s.w.scale(f64::NAN);
    let cfg = SolverConfig::new(0.01, 0.01, 5.0).unwrap();
    assert!(matches!(step(&s, &cfg), Err(Error::Blowup { .. })));

    let init = ExperimentInit::new(SpectralField::zeros(&g), s.u.scale(1e3), s.u.scale(1e3)).unwrap();
    let cfg = SolverConfig { stride: 1, ..SolverConfig::new(0.5, 50.0, 5.0).unwrap() };
    let mut seen = Vec::new();
    let res = run_experiment(&cfg, &init, Mode::Full, &mut |r| {
        seen.push(*r);
        Ok(())
    });
    assert!(matches!(res, Err(Error::Blowup { .. })));
    assert!(seen.last().unwrap().blowup);
}

#[test]
fn config_validation() {
    assert!(SolverConfig::new(0.0, 1.0, 5.0).is_err());
    assert!(SolverConfig::new(0.1, 0.05, 5.0).is_err());
    assert_eq!("if-rk4".parse::<Scheme>().unwrap(), Scheme::IntegratingFactorRk4);
    assert_eq!(Scheme::StrangExactLinear.to_string(), "strang-exact-linear");
    assert!("euler".parse::<Scheme>().is_err());
    assert_eq!("oracle".parse::<Mode>().unwrap(), Mode::Oracle);
}
