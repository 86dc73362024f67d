//! Reference networks: the five-country hand fixture and synthetic scale-free
//! trade networks with optional planted continental blocks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use crate::network::{build_network, CapacityMode, Country, EndpointPolicy, MacroNet, TradeLink};
use crate::scalar::Scalar;

/// Five countries, six links:
/// A(100, X1) B(10, X1) D(20, X1) E(1000, X2) F(5, X1);
/// A->B 2.0, A->D 1.6, B->D 1.5, A->E 50, E->A 60, D->F 1.0.
pub fn m2() -> MacroNet<f64> {
    m2_as()
}

pub fn m2_as<S: Scalar>() -> MacroNet<S> {
    let num = |s: &str| S::parse_decimal(s).expect("fixture literal");
    let countries = [
        ("A", "100", "X1"),
        ("B", "10", "X1"),
        ("D", "20", "X1"),
        ("E", "1000", "X2"),
        ("F", "5", "X1"),
    ]
    .into_iter()
    .map(|(code, gdp, cont)| Country::new(code, cont, num(gdp)))
    .collect();
    let trades = [
        ("A", "B", "2.0"),
        ("A", "D", "1.6"),
        ("B", "D", "1.5"),
        ("A", "E", "50"),
        ("E", "A", "60"),
        ("D", "F", "1.0"),
    ]
    .into_iter()
    .map(|(s, t, v)| TradeLink::new(s, t, num(v)))
    .collect();
    build_network(countries, trades, CapacityMode::Gdp, EndpointPolicy::Strict)
        .expect("fixture is valid")
        .0
}

/// Parameters of the synthetic scale-free trade network.
#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub nodes: usize,
    /// Exponent of the expected-degree power law.
    pub degree_exponent: f64,
    pub mean_degree: f64,
    /// Link volume grows as `(w_i * w_j)^volume_exponent` for expected degrees `w`.
    pub volume_exponent: f64,
    pub volume_sigma: f64,
    /// Capacity is `capacity_scale * strength * noise`.
    pub capacity_scale: f64,
    /// Log-normal sigma of the capacity noise; `ln 1.5` gives roughly ±50%.
    pub capacity_sigma: f64,
    pub blocks: usize,
    /// Target share of links (and hence volume) inside a block. `None` mixes freely.
    pub intra_block_share: Option<f64>,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            nodes: 200,
            degree_exponent: 2.3,
            mean_degree: 6.0,
            volume_exponent: 0.5,
            volume_sigma: 1.0,
            capacity_scale: 3.0,
            capacity_sigma: 1.5f64.ln(),
            blocks: 4,
            intra_block_share: None,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    /// The planted-partition variant: four blocks holding 80% of links and volume.
    pub fn planted() -> Self {
        SyntheticConfig {
            intra_block_share: Some(0.8),
            ..Self::default()
        }
    }
}

/// Chung-Lu style directed network with power-law expected degrees.
///
/// Node `i` belongs to block `i % blocks`, which becomes its continent tag
/// (`B0`, `B1`, ...). Capacities stand in for GDP.
pub fn synthetic(config: &SyntheticConfig) -> MacroNet<f64> {
    let n = config.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let exponent = 1.0 / (config.degree_exponent - 1.0);
    let raw: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).powf(-exponent)).collect();
    let raw_mean = raw.iter().sum::<f64>() / n as f64;
    // Each ordered pair is drawn independently, so expected out-degree ~ w_i * mean / 2.
    let weights: Vec<f64> = raw.iter().map(|w| w / raw_mean * config.mean_degree / 2.0).collect();
    let total: f64 = weights.iter().sum();

    let blocks = config.blocks.max(1);
    let volume_scale = |i: usize, j: usize| (weights[i] * weights[j]).powf(config.volume_exponent);
    let base_p = |i: usize, j: usize| (weights[i] * weights[j] / total).min(1.0);
    let (intra_boost, inter_boost) = match config.intra_block_share {
        Some(share) if blocks > 1 => {
            let intra_boost = share * blocks as f64;
            // Hub pairs saturate at probability one, so the inter-block damping is
            // solved for numerically to hit the target share of expected volume.
            let share_for = |damp: f64| {
                let (mut intra, mut all) = (0.0, 0.0);
                for i in 0..n {
                    for j in (0..n).filter(|&j| j != i) {
                        let v = volume_scale(i, j);
                        if i % blocks == j % blocks {
                            let e = (base_p(i, j) * intra_boost).min(1.0) * v;
                            intra += e;
                            all += e;
                        } else {
                            all += base_p(i, j) * damp * v;
                        }
                    }
                }
                intra / all
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if share_for(mid) > share {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (intra_boost, 0.5 * (lo + hi))
        }
        _ => (1.0, 1.0),
    };

    let noise = LogNormal::new(0.0, config.volume_sigma).expect("valid sigma");
    let mut links = Vec::new();
    let mut strength = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = if i % blocks == j % blocks {
                (base_p(i, j) * intra_boost).min(1.0)
            } else {
                base_p(i, j) * inter_boost
            };
            if rng.random::<f64>() < p {
                let volume = volume_scale(i, j) * noise.sample(&mut rng) * 100.0;
                strength[i] += volume;
                strength[j] += volume;
                links.push(TradeLink::new(code(i), code(j), volume));
            }
        }
    }

    let cap_noise = LogNormal::new(0.0, config.capacity_sigma).expect("valid sigma");
    let countries = (0..n)
        .map(|i| {
            // Isolated nodes still need a positive GDP.
            let base = if strength[i] > 0.0 { strength[i] } else { 100.0 };
            let gdp = config.capacity_scale * base * cap_noise.sample(&mut rng);
            Country::new(code(i), format!("B{}", i % blocks), gdp)
        })
        .collect();
    build_network(countries, links, CapacityMode::Gdp, EndpointPolicy::Strict)
        .expect("synthetic network is valid")
        .0
}

fn code(i: usize) -> String {
    format!("N{i:03}")
}
