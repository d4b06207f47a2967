//! Lookup-table Q-learning on a two-state problem with a known solution.

use bufsched::agent::TabularQ;

fn main() {
    // from A: stay pays 0, go pays 1 and moves to B
    // from B: stay pays 2, go pays 0 and moves to A
    let step = |s: usize, a: usize| match (s, a) {
        (0, 0) => (0.0, 0),
        (0, _) => (1.0, 1),
        (_, 0) => (2.0, 1),
        _ => (0.0, 0),
    };
    let mut q = TabularQ::new(0.5, 0.5);
    for i in 0..200 {
        let (s, a) = ((i / 2) % 2, i % 2);
        let (r, next) = step(s, a);
        q.update(s, a, r, Some((next, &[0, 1])));
    }
    for (s, name) in ["A", "B"].iter().enumerate() {
        println!(
            "Q({name}, stay) = {:.6}  Q({name}, go) = {:.6}",
            q.value(s, 0),
            q.value(s, 1)
        );
    }
    println!("exact: Q(A,stay)=1.5 Q(A,go)=3 Q(B,stay)=4 Q(B,go)=1.5");
}
