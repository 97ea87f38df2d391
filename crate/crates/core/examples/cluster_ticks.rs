//! Drives the cluster simulator by hand: route a burst of requests, scale
//! up, and watch pods start and jobs drain.

use nimbus::metrics::{scrape, utilization};
use nimbus::simcore::{ClusterState, ResourceSpec, WorkloadModel};

fn main() {
    let mut cluster =
        ClusterState::new(ResourceSpec::default(), WorkloadModel::default(), 1, 10, 1);
    for id in 0..12 {
        let job = cluster.make_job(id, 0.0);
        cluster.route_request(job);
    }
    cluster.set_desired_replicas(4);
    println!("  t pods in_flight done   cpu%   mem%");
    for _ in 0..60 {
        cluster.tick(1);
        assert!(cluster.conservation_holds());
        if cluster.clock.is_multiple_of(5) {
            let s = scrape(&cluster);
            let (cpu, mem) = utilization(&s);
            println!(
                "{:>3} {:>4} {:>9} {:>4} {:>6.1} {:>6.1}",
                cluster.clock,
                s.pod_count,
                cluster.jobs_in_flight(),
                cluster.completed,
                cpu,
                mem
            );
        }
    }
}
