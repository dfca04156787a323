//! GeM pooling of a single feature map: how the power `p` moves the pooled
//! value from the channel mean toward the channel max, and what the
//! thresholded ReLU does to negative activations first.

use superglobal::{gem_pool, relu_threshold, FeatureMap};

fn main() -> superglobal::Result<()> {
    // One channel with a single strong response among weak ones.
    let values = [0.05, 0.1, 0.2, 0.1, 0.9, 0.15, 0.05, 0.1, -0.3];
    let raw = FeatureMap::new(3, 3, 1, values.to_vec())?;

    // Fractional powers are undefined on the negative entry.
    if let Err(e) = gem_pool(&raw, 2.5) {
        println!("raw map: {e}");
    }

    let map = relu_threshold(&raw, 0.014)?;
    println!("after ReLU(alpha = 0.014): {:?}", map.data());

    println!("{:>8}  {:>8}", "p", "GeM");
    for p in [1.0, 2.0, 3.0, 4.6, 10.0, 100.0, 1000.0] {
        println!("{p:>8}  {:>8.4}", gem_pool(&map, p)?[0]);
    }
    let max = map.data().iter().copied().fold(f32::MIN, f32::max);
    println!("mean {:.4}, max {max:.4}", map.data().iter().sum::<f32>() / 9.0);
    Ok(())
}
