//! Configuration-driven orchestration of the full analysis and a seeded
//! synthetic city for end-to-end runs.

mod config;
mod run;
mod synth;

pub use config::{
    parse_toml, validate_config, ComparisonParams, ExplainParams, GwBoostParams, GwrParams, Inputs, LandcoverParams, ModelParams,
    PipelineConfig, Site, SpatialParams, UtciParams,
};
pub use run::{run_pipeline, FileRecord, Manifest, RunSummary};
pub use synth::{
    default_candidates, make_synthetic_city, SyntheticCity, CELL_SIZE, CLASS_BUILDING, CLASS_GRASS, CLASS_PAVED, CLASS_TREE,
    CLASS_WATER, ZONE_CELLS,
};
