//! Seeded fixtures shared by the benchmarks.

use roadclass_core::network::RoadNetwork;
use roadclass_core::painter::{build_synthetic_dataset, random_network, synthetic_base, RandomNetworkParams, SymbologySpec, SyntheticTriplet};
use roadclass_core::probability::flip_labels;
use roadclass_core::raster::{GeoTransform, ProbabilityField};

/// A painted sheet with its network and a noisy one-hot field.
pub struct Sheet {
    pub network: RoadNetwork,
    pub triplet: SyntheticTriplet,
    pub field: ProbabilityField,
}

/// A `size` x `size` sheet at 1.25 m/px with `roads` random roads.
pub fn sheet(size: usize, roads: usize, seed: u64) -> Sheet {
    let t = GeoTransform::new(600_000.0, 205_000.0, 1.25).expect("valid transform");
    let params = RandomNetworkParams { roads, ..RandomNetworkParams::default() };
    let network = random_network(&t.extent(size, size), &params, seed).expect("network fits");
    let base = synthetic_base(size, size, t, seed + 1, None).expect("base");
    let triplet = build_synthetic_dataset(&base, &network, &SymbologySpec::default(), seed + 2, 13.0).expect("painted");
    let noisy = flip_labels(&triplet.labels, 0.05, seed + 3).expect("valid rate");
    let field = ProbabilityField::one_hot(&noisy).expect("labels in range");
    Sheet { network, triplet, field }
}
