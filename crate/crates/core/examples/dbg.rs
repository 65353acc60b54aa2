use hetex::config::MissionConfig;
use hetex::scenario::Scenario;
use hetex::sim_harness::Simulation;
use hetex::occupancy_map::UavId;
use std::path::PathBuf;

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let scenario = Scenario::from_path(&root.join("warehouse_s.json")).unwrap();
    let mut cfg = MissionConfig::from_file(&root.join("warehouse.cfg")).unwrap();
    cfg.allocator = hetex::allocator::Strategy::Mcf;
    cfg.seed = 1;
    let mut sim = Simulation::new(scenario, cfg.clone()).unwrap();
    for k in 0..600u64 {
        sim.step().unwrap();
        if k % 100 == 0 {
            let g = sim.graph();
            let radii: Vec<f64> = g.nodes.iter().map(|n| n.radius).collect();
            let rmax = radii.iter().cloned().fold(0.0, f64::max);
            println!(
                "t={:.1} fraction={:.3} nodes={} max_r={:.2} pois={} s_pos={:?}",
                sim.time(), sim.map().explored_fraction(), g.nodes.len(), rmax,
                sim.pois().len(), sim.uav(UavId::Secondary).position,
            );
            let s = sim.uav(UavId::Secondary);
            println!("  snap s({}): {:?}", s.radius, g.snap_node(s.position, s.radius, cfg.goal_snap));
            for poi in sim.pois().iter().take(4) {
                let snap = g.snap_node(poi.position, s.radius, cfg.goal_snap);
                let nearest = g.nodes.iter().map(|n| n.center.dist(poi.position)).fold(f64::INFINITY, f64::min);
                println!("  poi {:?} snap={:?} nearest_node={:.2}", poi.position, snap, nearest);
            }
        }
    }
}
