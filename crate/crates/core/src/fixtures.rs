//! Reference instances.

use crate::model::{AuctionInstance, Mechanism};
use crate::scalar::Scalar;

fn num<T: Scalar>(s: &str) -> T {
    T::parse(s).expect("literal parses")
}

/// Three slots with CTRs (1.0, 0.7, 0.5); bidder `A` has items worth 10 and
/// 8, bidder `B` items worth 15 and 6. Cap 1, GSP.
pub fn example_one<T: Scalar>() -> AuctionInstance<T> {
    AuctionInstance::new(
        vec![
            ("A".to_string(), vec![num("10"), num("8")]),
            ("B".to_string(), vec![num("15"), num("6")]),
        ],
        vec![num("1.0"), num("0.7"), num("0.5")],
        num("1"),
        Mechanism::Gsp,
    )
    .expect("reference instance is well formed")
}
