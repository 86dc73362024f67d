//! Random small networks with dyadic volumes, exact in every scalar type.

use crisis_cascade::{build_network, CapacityMode, Country, EndpointPolicy, MacroNet, Scalar, TradeLink};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn dyadic<S: Scalar>(num: u64, den: u64) -> S {
    S::from_count(num) / S::from_count(den)
}

/// Up to `max_nodes` countries on up to three continents; each ordered
/// pair is linked with probability `density`.
pub fn network<S: Scalar, R: Rng>(rng: &mut R, max_nodes: usize, density: f64) -> MacroNet<S> {
    let n = rng.random_range(2..=max_nodes);
    let countries: Vec<Country<S>> = (0..n)
        .map(|i| {
            let continent = format!("C{}", rng.random_range(0..3));
            Country::new(format!("K{i:02}"), continent, dyadic(rng.random_range(1..=400), 4))
        })
        .collect();
    let mut trades = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(density) {
                trades.push(TradeLink::new(
                    countries[a].code.clone(),
                    countries[b].code.clone(),
                    dyadic::<S>(rng.random_range(1..=80), 8),
                ));
            }
        }
    }
    build_network(countries, trades, CapacityMode::Gdp, EndpointPolicy::Strict)
        .expect("generated network is valid")
        .0
}

/// The same topology and values in another scalar type.
pub fn convert<S: Scalar, T: Scalar>(net: &MacroNet<S>) -> MacroNet<T> {
    let conv = |v: S| T::parse_decimal(&format!("{}", v.to_f64_lossy())).expect("dyadic value");
    let countries = net
        .countries()
        .iter()
        .map(|c| Country::new(c.code.clone(), c.continent.clone(), conv(c.gdp)))
        .collect();
    let trades = net
        .links()
        .iter()
        .map(|l| TradeLink::new(net.code(l.source), net.code(l.target), conv(l.volume)))
        .collect();
    build_network(countries, trades, CapacityMode::Gdp, EndpointPolicy::Strict)
        .expect("converted network is valid")
        .0
}

/// Exact realization of an integer f/t ratio in any scalar type.
pub fn params<S: Scalar>(ratio: u64) -> crisis_cascade::CascadeParams<S> {
    let (f, t) = if ratio <= 10 {
        (dyadic(ratio, 10), dyadic(1, 10))
    } else {
        (S::one(), dyadic(1, ratio))
    };
    crisis_cascade::CascadeParams::new(f, t).expect("valid params")
}
