use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use uam_ecosim::config::bay3;
use uam_ecosim::demand::{default_mixture, DemandModel};
use uam_ecosim::design::{
    estimate_dmax, grid_search, measure_unimpeded_operation_time, replication_seed, run_replications, sensitivity,
    DesignError, GridSpec,
};
use uam_ecosim::engine::Scenario;
use uam_ecosim::policies::{PolicyConfig, PolicyKind};

fn bay(fleet: u32) -> Scenario {
    Scenario::new(bay3(24), fleet, DemandModel::uniform(30.0), PolicyConfig::new(PolicyKind::OnDemandRebalance))
}

#[test]
fn dmax_examples() {
    assert_eq!(estimate_dmax(36, 32.0).unwrap(), 67.5);
    assert_eq!(estimate_dmax(60, 60.0).unwrap(), 60.0);
    assert_eq!(estimate_dmax(0, 30.0).unwrap(), 0.0);
    assert!(matches!(estimate_dmax(36, 0.0), Err(DesignError::NonPositiveOperationTime(_))));
    assert!(estimate_dmax(36, -2.0).is_err());
}

proptest! {
    #[test]
    fn dmax_is_linear_in_fleet(f in 1u32..200, k in 1u32..5, t in 1.0..120.0f64) {
        let one = estimate_dmax(f, t).unwrap();
        let many = estimate_dmax(f * k, t).unwrap();
        prop_assert!((many - k as f64 * one).abs() < 1e-9 * many);
    }
}

#[test]
fn operation_time_on_the_bay_network() {
    let t = measure_unimpeded_operation_time(&bay(36)).unwrap();
    // takeoff 3 + mean cruise 16.106486 + landing 3 + turnaround 10
    assert_abs_diff_eq!(t, 32.106486, epsilon = 1e-5);
    let dmax = estimate_dmax(36, t).unwrap();
    assert_abs_diff_eq!(dmax, 67.2761, epsilon = 1e-3);
}

#[test]
fn operation_time_components() {
    let mut sc = bay(36);
    sc.engine.takeoff_duration = 0.0;
    sc.engine.landing_duration = 0.0;
    sc.engine.turnaround_mean = 10.0;
    sc.network = sc.network.with_cruise_speed(1e12).unwrap();
    assert_abs_diff_eq!(measure_unimpeded_operation_time(&sc).unwrap(), 10.0, epsilon = 1e-6);

    let base = bay(36);
    let cruise = measure_unimpeded_operation_time(&base).unwrap() - 16.0;
    let mut fast = base.clone();
    fast.network = fast.network.with_cruise_speed(280.0).unwrap();
    let fast_cruise = measure_unimpeded_operation_time(&fast).unwrap() - 16.0;
    assert_abs_diff_eq!(fast_cruise, cruise / 2.0, epsilon = 1e-9);
}

#[test]
fn replication_seeds_are_stable_and_distinct() {
    let seeds: Vec<u64> = (0..50).map(|r| replication_seed(42, r)).collect();
    let again: Vec<u64> = (0..50).map(|r| replication_seed(42, r)).collect();
    assert_eq!(seeds, again);
    let mut sorted = seeds.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 50);
    assert_ne!(replication_seed(43, 0), seeds[0]);
}

fn small_grid(base_seed: u64) -> GridSpec {
    let mut template = bay(9);
    template.engine.horizon = 240.0;
    template.demand = DemandModel::gaussian_mixture(30.0, default_mixture());
    let mut spec = GridSpec::new(template, base_seed);
    spec.fleet_values = vec![6, 9, 12];
    spec.cn_values = vec![1.0, 2.0];
    spec.replications = 3;
    spec
}

#[test]
fn single_cell_grid_matches_replications() {
    let mut spec = small_grid(8);
    spec.fleet_values = vec![9];
    spec.cn_values = vec![2.0];
    let surface = grid_search(&spec).unwrap();
    assert_eq!(surface.cells.len(), 1);
    assert_eq!(surface.argmin, (0, 0));
    let reps = run_replications(&spec.cell_scenario(9, 2.0), 3, 8, false).unwrap();
    let costs: Vec<f64> = reps.iter().map(|r| r.metrics.cost).collect();
    assert_eq!(surface.cells[0].costs, costs);
    assert_eq!(surface.cells[0].seeds, reps.iter().map(|r| r.seed).collect::<Vec<_>>());
}

#[test]
fn grid_is_independent_of_thread_count() {
    let spec = small_grid(3);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| grid_search(&spec).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| grid_search(&spec).unwrap());
    assert_eq!(one, four);
}

#[test]
fn adding_cells_leaves_existing_cells_alone() {
    let spec = small_grid(5);
    let mut wider = spec.clone();
    wider.fleet_values = vec![3, 6, 9, 12];
    let a = grid_search(&spec).unwrap();
    let b = grid_search(&wider).unwrap();
    for (fi, _) in spec.fleet_values.iter().enumerate() {
        for ci in 0..spec.cn_values.len() {
            assert_eq!(a.cell(fi, ci), b.cell(fi + 1, ci));
        }
    }
}

#[test]
fn zero_demand_surface_prefers_the_smallest_design() {
    let mut spec = small_grid(1);
    spec.template.demand = DemandModel::uniform(0.0);
    let surface = grid_search(&spec).unwrap();
    // Cost equals the fleet size everywhere; ties go to the lowest c_n.
    for c in &surface.cells {
        assert_eq!(c.cost.mean, c.fleet as f64);
    }
    assert_eq!(surface.argmin, (0, 0));
}

#[test]
fn sensitivity_is_zero_at_the_optimum_and_nonnegative() {
    let surface = grid_search(&small_grid(2)).unwrap();
    let s = sensitivity(&surface);
    let opt = surface.optimum();
    assert_eq!(s.by_fleet.len(), 3);
    assert_eq!(s.by_cn.len(), 2);
    for p in s.by_fleet.iter().chain(&s.by_cn) {
        assert!(p.delta_cost >= 0.0);
    }
    let at_f = s.by_fleet.iter().find(|p| p.value == opt.fleet as f64).unwrap();
    assert_eq!((at_f.delta_cost, at_f.other_deviation), (0.0, 0.0));
    let at_c = s.by_cn.iter().find(|p| p.value == opt.c_n).unwrap();
    assert_eq!(at_c.delta_cost, 0.0);
}

#[test]
fn bad_grids_are_rejected() {
    let mut spec = small_grid(1);
    spec.cn_values = vec![2.0, 1.0];
    assert!(matches!(grid_search(&spec), Err(DesignError::UnsortedAxis("c_n"))));
    let mut spec = small_grid(1);
    spec.fleet_values.clear();
    assert!(matches!(grid_search(&spec), Err(DesignError::EmptyAxis("fleet"))));
    let mut spec = small_grid(1);
    spec.replications = 0;
    assert!(matches!(grid_search(&spec), Err(DesignError::ZeroReplications)));
}
