"""GUI toggle state-control benchmark toolkit.

Thin re-export of the compiled core. The file formats match the command-line
tool exactly, so artifacts can move freely between the two.
"""

from ._core import (
    AgentProtocolError,
    AnnotatorError,
    CheckpointError,
    ConfigError,
    Error,
    ExportError,
    IoError,
    UnknownDialectError,
    UnsupportedActionError,
    annotate_records,
    click_distance,
    dialect_names,
    eval_agentic_files,
    eval_state_control_files,
    expand_quadruplets_file,
    match_actions,
    normalize_app_name,
    openapp_match,
    parse_action,
    porter_stem,
    refine_episodes_file,
    run_dynamic_suite,
    split_samples_file,
    synth_from_samples,
    translate_action,
    type_text_match,
)

__all__ = [
    "AgentProtocolError",
    "AnnotatorError",
    "CheckpointError",
    "ConfigError",
    "Error",
    "ExportError",
    "IoError",
    "UnknownDialectError",
    "UnsupportedActionError",
    "annotate_records",
    "click_distance",
    "dialect_names",
    "eval_agentic_files",
    "eval_state_control_files",
    "expand_quadruplets_file",
    "match_actions",
    "normalize_app_name",
    "openapp_match",
    "parse_action",
    "porter_stem",
    "refine_episodes_file",
    "run_dynamic_suite",
    "split_samples_file",
    "synth_from_samples",
    "translate_action",
    "type_text_match",
]
