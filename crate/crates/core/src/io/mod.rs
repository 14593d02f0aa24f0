//! Problem files (TOML), solution files (JSON), SVG rendering and the
//! bundled benchmark corpus.

mod benchmarks;
mod problem_file;
mod solution_file;
mod svg;

pub use benchmarks::{bundled, bundled_names, load_bundled};
pub use problem_file::{load_problem, load_problem_file, problem_hash, save_problem, IoError};
pub use solution_file::{SolutionFile, TopologyRecord, SOLUTION_SCHEMA};
pub use svg::{rects_from_domains, rects_from_layout, render_svg, SketchRect, SvgStyle};
