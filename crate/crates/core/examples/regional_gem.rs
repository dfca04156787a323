//! Regional-GeM: a windowed Lp map blended with the original map before GeM,
//! followed by a whitening projection.

use superglobal::{gem_pool, regional_gem, regional_lp_map, whiten, FeatureMap, PoolingConfig, WhiteningParams};

fn print_grid(label: &str, m: &FeatureMap) {
    println!("{label}:");
    for h in 0..m.height() {
        let row: Vec<String> = (0..m.width()).map(|w| format!("{:.3}", m.get(h, w, 0))).collect();
        println!("  {}", row.join("  "));
    }
}

fn main() -> superglobal::Result<()> {
    // A bright 2x2 object in the corner of a dim 5x5 map, two channels.
    let mut data = Vec::new();
    for h in 0..5 {
        for w in 0..5 {
            let v = if h < 2 && w < 2 { 1.0 } else { 0.1 };
            data.extend([v, 0.5 * v]);
        }
    }
    let m = FeatureMap::new(5, 5, 2, data)?;
    let cfg = PoolingConfig::default();

    print_grid("channel 0", &m);
    print_grid(
        &format!("regional Lp map, p_r = {}, window {}", cfg.p_r, cfg.region_window),
        &regional_lp_map(&m, cfg.p_r, cfg.region_window)?,
    );

    // Project the two channels onto their sum and difference.
    let w = WhiteningParams::new(2, 2, vec![1.0, 1.0, 1.0, -1.0], vec![0.0, 0.01])?;
    let plain = whiten(&gem_pool(&m, cfg.p)?, &w)?;
    let regional = regional_gem(&m, &cfg, &w)?;
    println!("GeM+ (p = {}):    {:?}", cfg.p, plain.as_slice());
    println!("Regional-GeM:      {:?}", regional.as_slice());

    let single = PoolingConfig { region_window: 1, ..cfg };
    assert_eq!(regional_gem(&m, &single, &w)?, plain);
    println!("window 1 reproduces GeM+ exactly");
    Ok(())
}
