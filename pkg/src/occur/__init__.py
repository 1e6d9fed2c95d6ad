"""Reduced open-system dynamics with operator-current conservation audits."""

from .audit import AuditReport, AuditThresholds, audit_conservation, born_residual_sweep, lhs_dissipative_current
from .generators import (
    DissipatorOutput,
    Generator,
    GeneratorKind,
    dissipative_current_rhs,
    dissipator_driven,
    dissipator_redfield,
    dissipator_secular_weak,
    dissipator_singular,
)
from .model import (
    BathSpectrum,
    DriveSchedule,
    EigenoperatorSet,
    EnvSpec,
    ObservableSpec,
    SystemSpec,
    big_gamma,
    build_eigenoperators,
    gamma,
    lamb_shift_s,
)
from .propagate import IntegratorConfig, Trajectory, observable_series, propagate_exact, propagate_reduced
from .scenario import Scenario, load_scenario, parse_scenario

__version__ = "0.1.0"
