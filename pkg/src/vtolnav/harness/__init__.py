from .config import ConfigError, ScenarioConfig, load_config, save_config, validate_config
from .metrics import fit_decay, fit_decay_rate
from .runner import (
    LOG_COLUMNS,
    ScenarioResult,
    SimulationDiverged,
    run_scenario,
    write_csv,
    write_plot_data,
    write_summary,
)
