//! Typed identifiers for the entities of a simulated warehouse.

use serde::{Deserialize, Serialize};
use std::fmt;

macro_rules! define_id {
    ($(#[$doc:meta])* $name:ident, $prefix:literal) => {
        $(#[$doc])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }

            #[inline]
            pub fn from_index(index: usize) -> Self {
                Self(index as u32)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

define_id!(
    /// Vertex of the waypoint graph.
    NodeId, "n"
);
define_id!(
    /// Stock-keeping unit. Ids are contiguous from zero.
    SkuId, "sku"
);
define_id!(PodId, "pod");
define_id!(
    /// Storage location (a parking spot for exactly one pod).
    LocationId, "sl"
);
define_id!(StationId, "st");
define_id!(RobotId, "bot");
define_id!(OrderId, "order");
