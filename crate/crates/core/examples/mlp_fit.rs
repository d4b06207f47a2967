//! Fits the Q-network architecture to a small regression problem with Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bufsched::neuralnet::{train_batch, Adam, Mlp};

fn main() -> bufsched::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // target: fraction of the first half of the input that is set
    let mut sample = |n: usize| -> Vec<(Vec<f64>, f64)> {
        (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..16).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
                let y = x[..8].iter().sum::<f64>() / 8.0;
                (x, y)
            })
            .collect()
    };
    let data = sample(512);
    let held_out = sample(128);
    let mut net = Mlp::q_network(16, 0)?;
    let mut adam = Adam::new(&net, 3e-4);
    for epoch in 0..=40 {
        let mut loss = 0.0;
        for batch in data.chunks(32) {
            loss += train_batch(&mut net, &mut adam, batch)? / 16.0;
        }
        if epoch % 10 == 0 {
            println!("epoch {epoch:>2}: mse {loss:.6}");
        }
    }
    println!("held-out mse {:.6}", net.loss(&held_out)?);
    Ok(())
}
