//! Config-driven experiment pipeline with persistent, reproducible
//! artifacts.
//!
//! All commands read one JSON configuration and operate on a working
//! directory of named files; every random draw derives from the configured
//! master seed through named substreams, so the whole pipeline is
//! bit-reproducible (timing metadata aside).

mod config;
mod files;
mod pipeline;

pub use config::{
    split_budget, DemoConfig, EnvironmentSpec, ExperimentConfig, GroupSelection, ImitateConfig,
    Method, PriorSettings, SgldSettings, SigmaKeyword, SigmaSetting, ZStudyConfig,
};
pub use files::{
    profiles_to_records, read_demos, read_json, records_to_profiles, write_chain, write_demos,
    write_json, ChainAgentRecord, ChainDiagnostics, ChainRecord, DemoRecord, EstimateFile,
    GameFile, ProfileRecord,
};
pub use pipeline::{
    build_environment, cmd_evaluate, cmd_gen_demos, cmd_gen_env, cmd_imitate, cmd_infer,
    cmd_rank_check, cmd_z_study, resolve_out_dir, run_inference, run_pipeline, truth_equilibria,
    BuiltEnv, CHAIN_FILE, DEMOS_FILE, ERROR_REPORT_FILE, ESTIMATE_FILE, GAME_FILE,
    IMITATE_FILE, INFER_META_FILE, MANIFEST_FILE, PROFILES_FILE, RANK_REPORT_FILE, Z_STUDY_FILE,
};
