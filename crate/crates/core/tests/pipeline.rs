//! Cross-module checks through the public API: the front feeds the PDE, the
//! position extractor and the reduced ODE, and they have to agree.

use kinks::front::compute_front;
use kinks::pde::{make_initial_data, neumann_grid, Frame, InitialDataSpec, InitialStyle, Simulation};
use kinks::positions::{assemble_tracks, extract_positions};
use kinks::reduced_ode::{integrate_eta, DistanceSeries, ReducedSystem};
use kinks::Nonlinearity;

#[test]
fn single_kink_in_the_pde_moves_with_the_shooting_speed() {
    let nl = Nonlinearity::new(0.2).unwrap();
    let front = compute_front(&nl).unwrap();
    let grid = neumann_grid(-20.0, 30.0, 0.04, Frame::Lab).unwrap();
    let spec = InitialDataSpec { style: InitialStyle::FrontSuperposition, ..InitialDataSpec::kinks(&[0.0]) };
    let u0 = make_initial_data(&spec, &grid, Some(&front)).unwrap();
    let sim = Simulation::new(&nl, &u0, 0.05).unwrap().with_observe_every(20);
    let mut snaps = vec![extract_positions(&u0)];
    sim.run(u0, 60.0, |f| snaps.push(extract_positions(f))).unwrap();
    let tracks = assemble_tracks(&snaps, 1.0);
    let k = tracks.persistent_kinks();
    assert_eq!(k.len(), 1);
    let v = tracks.speeds(k[0]);
    let late = v[v.len() / 2..].iter().sum::<f64>() / (v.len() - v.len() / 2) as f64;
    // Second-order spatial error at h = 0.04 dominates.
    assert!((late / front.c - 1.0).abs() < 5e-3, "{late} vs {}", front.c);
}

#[test]
fn comoving_pair_drifts_apart_like_the_reduced_ode() {
    let nl = Nonlinearity::new(0.2).unwrap();
    let front = compute_front(&nl).unwrap();
    let frame = Frame::Comoving { c: front.c };
    let grid = neumann_grid(-25.0, 25.0, 0.04, frame).unwrap();
    let spec = InitialDataSpec { style: InitialStyle::FrontSuperposition, ..InitialDataSpec::kinks(&[5.0, -5.0]) };
    let u0 = make_initial_data(&spec, &grid, Some(&front)).unwrap();
    let sim = Simulation::new(&nl, &u0, 0.1).unwrap().with_observe_every(50);
    let mut times = Vec::new();
    let mut dists = Vec::new();
    sim.run(u0, 500.0, |f| {
        let k = extract_positions(f).kinks();
        times.push(f.t);
        dists.push(k[0] - k[1]);
    })
    .unwrap();
    let sys = ReducedSystem::from_front(2, &front).unwrap();
    let ode = DistanceSeries::from_positions(&integrate_eta(&sys, &[0.5 * dists[0], -0.5 * dists[0]], 500.0).unwrap());
    let pde_gain = dists.last().unwrap() - dists[0];
    let ode_gain = ode.at(0, *times.last().unwrap()) - ode.at(0, 0.0);
    assert!(pde_gain > 0.0);
    assert!((pde_gain / ode_gain - 1.0).abs() < 0.1, "pde {pde_gain} ode {ode_gain}");
}
