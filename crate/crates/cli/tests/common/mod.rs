#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Path as a TOML basic string.
pub fn toml_path(p: &Path) -> String {
    format!("{:?}", p.display().to_string())
}

/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Pipeline exercising every stage of the workflow on the synthetic
/// homicide table, with the area variable first.
pub fn full_pipeline(output_dir: &str) -> String {
    format!(
        r#"output_dir = {out}

[[commands]]
run = "tree.build"
csv = {csv}
columns = [6, 3, 2, 4, 5]
area_col = "Borough"

[[commands]]
run = "tree.summary"

[[commands]]
run = "stage.ahc"

[[commands]]
run = "stage.summary"

[[commands]]
run = "priors.set"
mode = "phantom"

[[commands]]
run = "ceg.build"

[[commands]]
run = "ceg.summary"

[[commands]]
run = "ceg.reduce"
filter = ["Hillingdon"]

[[commands]]
run = "map.build"
geo = {geo}
crs = "EPSG:4326"
colour_by = "Solved"
conditionals = ["Knife or Sharp Implement", "Female"]
"#,
        out = toml_path(Path::new(output_dir)),
        csv = toml_path(&fixture("homicides_like.csv")),
        geo = toml_path(&fixture("london_boroughs.geojson")),
    )
}
