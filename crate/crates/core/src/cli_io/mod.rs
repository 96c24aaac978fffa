//! Configuration, output files and experiment commands.

mod commands;
mod config;
mod output;

pub use commands::{
    cmd_converge, cmd_distance, cmd_order, cmd_rotate, cmd_run, compare_resolutions, compare_rotated,
    comparison_field, parse_angle, parse_n_list, snapshot_file_name, study_csv, with_out_dir, StudyRow,
    CONFIG_ECHO_FILE, ENERGY_FILE, FINAL_SNAPSHOT_FILE, MANIFEST_FILE,
};
pub use config::{
    parse_config, parse_config_str, parse_key_values, DomainKind, RunConfig, CONFIG_KEYS, DEFAULT_THETA,
    SCHEMA_VERSION,
};
pub use output::{
    atomic_write, energy_csv, read_energy, read_snapshot, snapshot_csv, write_snapshot, RunManifest, ENERGY_HEADER,
};
