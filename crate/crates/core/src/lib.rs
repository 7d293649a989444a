//! Geolocalization on a road map from a motion trajectory alone.
//!
//! A trajectory is turned into a sequence of quantized turning angles, a
//! recurrent network scores every map edge at every step, and a hypothesis
//! tracker keeps only edge sequences that are connected on the map.
//!
//! ```
//! use trajloc::map::parse_simple_graph;
//!
//! let g = parse_simple_graph("node 1 0 0\nnode 2 0 0.001\nedge 1 2\n").unwrap();
//! assert_eq!(g.edge_count(), 1);
//! ```

pub mod dataset;
pub mod encoding;
pub mod error;
pub mod eval;
pub mod localization;
pub mod map;
pub mod odometry;
pub mod pipeline;
pub mod rnn;
pub mod synthetic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/map.md")]
    mod map {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/localization.md")]
    mod localization {}
    #[doc = include_str!("../../../book/src/odometry.md")]
    mod odometry {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
