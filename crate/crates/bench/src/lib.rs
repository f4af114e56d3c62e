//! Fixtures shared by the criterion benches.

use vkp_core::protocol::Network;
use vkp_core::Imsi;

/// A network of `n` provisioned subscribers, each authenticated once.
pub fn warm_network(n: usize, k: usize, seed: u64) -> Network {
    let mut net = Network::new(seed);
    for i in 0..n {
        let key = [(i as u8).wrapping_mul(37).wrapping_add(1); 16];
        net.add_subscriber(key, Imsi::new(460, 1, 10_000 + i as u64).unwrap());
    }
    for i in 0..n {
        net.authenticate(i, k).unwrap();
    }
    net
}
