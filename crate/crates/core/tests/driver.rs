use riscf_core::channel::{generate_channels, generate_layout, ChannelSet, Dims, FadingParams, Layout};
use riscf_core::driver::{collocated_params, initialize, run, run_baseline, run_scheme, AlgoConfig, Scheme, Trace};
use riscf_core::model::{constraint_residuals, SystemParams};
use riscf_core::Error;

fn desk_dims() -> Dims {
    Dims::new(2, 2, 3, 2, 4)
}

fn desk_instance(seed: u64) -> (Layout<f64>, FadingParams<f64>, SystemParams<f64>) {
    let d = desk_dims();
    let lay = generate_layout(d.aps, d.surfaces, d.users, 1000.0, seed).unwrap();
    let fad = FadingParams::new(8.0, 10.0, 50.0, seed).unwrap();
    (lay, fad, SystemParams::table_one(d))
}

fn desk(seed: u64) -> (ChannelSet<f64>, SystemParams<f64>) {
    let (lay, fad, p) = desk_instance(seed);
    let d = p.dims;
    (generate_channels(&lay, &fad, d.antennas, d.elements).unwrap(), p)
}

fn cfg(seed: u64, scheme: Scheme) -> AlgoConfig<f64> {
    AlgoConfig { seed, scheme, ..AlgoConfig::default() }
}

fn assert_monotone(tr: &Trace<f64>) {
    for pair in tr.records.windows(2) {
        let (a, b) = (pair[0].ee, pair[1].ee);
        assert!(b >= a - 1e-6 * a.abs(), "EE fell from {a} to {b} at iteration {}", pair[1].iteration);
    }
}

#[test]
fn desk_run_converges_and_improves() {
    for seed in [0, 1, 2] {
        let (cs, p) = desk(seed);
        let (st, tr) = run(&cs, &p, &cfg(seed, Scheme::RisCf)).unwrap();
        assert!(tr.converged, "seed {seed} did not converge");
        assert!(tr.records.len() - 1 <= 20, "seed {seed}: {} iterations", tr.records.len() - 1);
        assert!(tr.final_ee >= tr.records[0].ee);
        assert_monotone(&tr);
        assert!(tr.pre_projection_modulus_deviation <= 1e-3);
        assert!(!tr.projection_flagged);
        assert!(st.psi.max_modulus_deviation() <= 1e-12);
        let res = constraint_residuals(&cs, &p, &st).unwrap();
        assert!(res.max_violation() <= 1e-5, "seed {seed}: {res:?}");
        for r in &tr.records[1..] {
            assert!(r.beamforming_tightness.unwrap() <= 1e-9);
            assert!(r.phase_tightness.unwrap() <= 1e-9);
        }
    }
}

#[test]
fn slack_instance_skips_restoration() {
    let (cs, mut p) = desk(0);
    p.rmin_nats = vec![0.0; p.dims.users];
    p.backhaul_cap_nats = vec![1e9; p.dims.aps];
    let (st, used) = initialize(&cs, &p, &cfg(0, Scheme::RisCf)).unwrap();
    assert_eq!(used, 0);
    assert!(constraint_residuals(&cs, &p, &st).unwrap().min_margin() >= 0.0);
}

#[test]
fn desk_start_is_feasible() {
    for seed in [0, 1, 2, 3] {
        let (cs, p) = desk(seed);
        let (st, _) = initialize(&cs, &p, &cfg(seed, Scheme::RisCf)).unwrap();
        let res = constraint_residuals(&cs, &p, &st).unwrap();
        assert!(res.min_margin() >= 0.0, "seed {seed}: {res:?}");
    }
}

#[test]
fn vanishing_channels_are_infeasible() {
    let (cs, p) = desk(0);
    let err = initialize(&cs.scaled(1e-9), &p, &cfg(0, Scheme::RisCf)).unwrap_err();
    assert!(matches!(err, Error::InfeasibleInstance(_)), "{err}");
}

#[test]
fn no_surface_run_is_monotone_and_keeps_zero_phases() {
    let (cs, p) = desk(1);
    let (st, tr) = run(&cs, &p, &cfg(1, Scheme::CfNoRis)).unwrap();
    assert_monotone(&tr);
    assert!(st.psi.values.iter().all(|c| c.norm() == 0.0));
    assert!(tr.records[1..].iter().all(|r| r.phase_status.is_none()));
}

#[test]
fn identical_inputs_give_identical_traces() {
    let (cs, p) = desk(2);
    let (_, a) = run(&cs, &p, &cfg(2, Scheme::RisCf)).unwrap();
    let (_, b) = run(&cs, &p, &cfg(2, Scheme::RisCf)).unwrap();
    assert!(a.same_path(&b));
}

#[test]
fn surfaces_never_hurt_on_paired_seeds() {
    // run both to a tight stop so the stopping rule does not decide the order
    let tight = |seed, scheme| AlgoConfig { ee_rel_tol: 1e-9, max_outer_iters: 200, ..cfg(seed, scheme) };
    for seed in [0, 1, 2] {
        let (cs, p) = desk(seed);
        let (_, ris) = run(&cs, &p, &tight(seed, Scheme::RisCf)).unwrap();
        let (_, plain) = run(&cs, &p, &tight(seed, Scheme::CfNoRis)).unwrap();
        assert!(ris.final_ee >= plain.final_ee * (1.0 - 1e-6), "seed {seed}: {} < {}", ris.final_ee, plain.final_ee);
    }
}

#[test]
fn collocated_without_surfaces_matches_zeroed_reflections() {
    let d = Dims::new(2, 1, 1, 2, 2);
    let lay = generate_layout(d.aps, d.surfaces, d.users, 300.0, 4).unwrap();
    let fad = FadingParams::new(8.0, 10.0, 50.0, 4).unwrap();
    let p = SystemParams::table_one(d);
    let (_, base) = run_baseline(&lay, &fad, &p, &cfg(4, Scheme::CollocatedNoRis)).unwrap();

    let cp = collocated_params(&p);
    let cs = generate_channels(&lay.collocated(), &fad, d.aps * d.antennas, d.elements)
        .unwrap()
        .without_reflections();
    let (_, zeroed) = run(&cs, &cp, &cfg(4, Scheme::RisCf)).unwrap();
    assert!((base.final_ee - zeroed.final_ee).abs() <= 1e-6 * base.final_ee, "{} vs {}", base.final_ee, zeroed.final_ee);
}

#[test]
fn baseline_entry_rejects_proposed_scheme() {
    let (lay, fad, p) = desk_instance(0);
    assert!(run_baseline(&lay, &fad, &p, &cfg(0, Scheme::RisCf)).is_err());
    let err = run_scheme(&lay, &fad, &p, &cfg(0, Scheme::CollocatedRis)).unwrap_err();
    assert!(matches!(err, Error::InfeasibleInstance(_)), "{err}");
    let (lay, fad, p) = desk_instance(1);
    let (st, tr) = run_scheme(&lay, &fad, &p, &cfg(1, Scheme::CollocatedRis)).unwrap();
    assert_monotone(&tr);
    assert_eq!(st.w.stacked_len(), p.dims.aps * p.dims.antennas);
}

#[test]
fn invalid_config_rejected() {
    let (cs, p) = desk(0);
    let bad = AlgoConfig { max_outer_iters: 0, ..cfg(0, Scheme::RisCf) };
    assert!(run(&cs, &p, &bad).is_err());
    let bad = AlgoConfig { ee_rel_tol: -1.0, ..cfg(0, Scheme::RisCf) };
    assert!(run(&cs, &p, &bad).is_err());
}

#[test]
fn scheme_names_round_trip() {
    for s in Scheme::ALL {
        assert_eq!(Scheme::from_name(s.name()), Some(s));
    }
    assert_eq!(Scheme::from_name("bogus"), None);
}
