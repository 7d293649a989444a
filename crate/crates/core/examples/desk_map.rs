//! Prints the synthetic desk-scale map.
//!
//! ```text
//! cargo run --example desk_map -- osm > desk.osm
//! cargo run --example desk_map -- text > desk.txt
//! ```

use trajloc::synthetic::desk_map;

fn main() {
    let g = desk_map();
    match std::env::args().nth(1).as_deref() {
        Some("text") => print!("{}", g.to_simple_text()),
        Some("geojson") => println!("{}", serde_json::to_string_pretty(&g.to_geojson()).unwrap()),
        _ => print!("{}", g.to_osm_xml()),
    }
}
