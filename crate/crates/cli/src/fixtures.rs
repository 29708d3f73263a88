//! Inputs bundled into the binary so the stock examples run from any
//! directory.

use std::path::Path;

const BUNDLED: [(&str, &str); 3] = [
    ("appendix_d.json", include_str!("../fixtures/appendix_d.json")),
    ("figure1_rides.json", include_str!("../fixtures/figure1_rides.json")),
    ("kg_binary.json", include_str!("../fixtures/kg_binary.json")),
];

/// Reads `path`, falling back to a bundled fixture with the same file name.
pub fn read_input(path: &Path) -> std::io::Result<String> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(err) => {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let name = if name.ends_with(".json") { name.to_string() } else { format!("{name}.json") };
            BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| text.to_string()).ok_or(err)
        }
    }
}
