//! Expands the default four-phase plan into arrivals and counts them per phase.

use nimbus::loadgen::{default_plan, generate_arrivals};

fn main() {
    let plan = default_plan(42);
    let arrivals = generate_arrivals(&plan).expect("default plan is valid");
    println!(
        "{} requests over {} s",
        plan.total_requests(),
        plan.total_duration()
    );
    for (i, (phase, (start, end))) in plan.phases.iter().zip(plan.windows()).enumerate() {
        let mine: Vec<_> = arrivals.iter().filter(|a| a.phase == i).collect();
        let first = mine.first().map_or(f64::NAN, |a| a.time);
        let last = mine.last().map_or(f64::NAN, |a| a.time);
        println!(
            "{:<10} [{start:>3}, {end:>3})  users={:<2} requests={:<3} first={first:7.2} last={last:7.2}",
            phase.name, phase.concurrent_users, mine.len()
        );
    }
}
