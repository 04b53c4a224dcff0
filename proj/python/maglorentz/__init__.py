from ._maglorentz import (
    Config,
    ConfigError,
    Field,
    Kernel,
    Potential,
    Regime,
    RunReport,
    ScatteringTable,
    SurvivalEstimate,
    angle_no_field,
    angle_with_field,
    boltzmann_kernel,
    collision_time,
    cross_section,
    gbe_kernel,
    hard_disk_angle,
    hard_disk_kernel,
    landau_kernel,
    run_experiment,
    solve,
    survival_probability,
)

__all__ = [name for name in dir() if not name.startswith("_")]
