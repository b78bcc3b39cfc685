//! Grid-world search and rescue: two agents walk toward a trapped person,
//! lift together, and carry to the drop-off while a fire spreads nearby.

use piphen::physics::{observe_sar, step_sar, Cell, Dir, SarAction, SarAgent, SarGrid};

fn main() {
    let mut grid = SarGrid::new(8, 6, 42);
    grid.set_cell(5, 2, Cell::Person);
    grid.set_cell(0, 0, Cell::DropOff);
    grid.set_cell(7, 5, Cell::FireA(2));
    grid.set_cell(6, 5, Cell::Flammable);
    grid.agents.push(SarAgent { id: 1, position: (3, 2), carried_resource: None, carrying_person_with: None });
    grid.agents.push(SarAgent { id: 2, position: (5, 4), carried_resource: None, carrying_person_with: None });

    let obs = observe_sar(&grid, 1).unwrap();
    println!("agent 1 sees {} objects: {:?}", obs.global.len(), obs.names);

    // a lift needs both agents standing on the person's cell in the same step
    let mut plans: Vec<Vec<(u32, SarAction)>> = vec![
        vec![(1, SarAction::Move(Dir::Right)), (2, SarAction::Move(Dir::Up))],
        vec![(1, SarAction::Move(Dir::Right)), (2, SarAction::Move(Dir::Up))],
        vec![(1, SarAction::LiftPerson), (2, SarAction::LiftPerson)],
    ];
    for _ in 0..5 {
        plans.push(vec![(1, SarAction::CarryMove(Dir::Left)), (2, SarAction::CarryMove(Dir::Left))]);
    }
    for _ in 0..2 {
        plans.push(vec![(1, SarAction::CarryMove(Dir::Up)), (2, SarAction::CarryMove(Dir::Up))]);
    }
    // dropping releases both partners, so only one agent issues it
    plans.push(vec![(1, SarAction::Drop)]);
    for (i, actions) in plans.iter().enumerate() {
        let result = step_sar(&grid, actions).unwrap();
        for f in &result.failures {
            println!("step {i}: agent {} failed: {}", f.agent, f.reason);
        }
        grid = result.grid;
    }
    println!("rescued = {}, fires still burning = {}", grid.rescued, count_fires(&grid));
}

fn count_fires(grid: &SarGrid) -> usize {
    grid.cells.iter().filter(|c| matches!(c, Cell::FireA(_) | Cell::FireB(_))).count()
}
