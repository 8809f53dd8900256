"""Exception hierarchy. Every error carries a short machine-readable code
that the CLI prints and turns into a nonzero exit status."""

from __future__ import annotations


class CellfrontError(Exception):
    code = "error"
    exit_status = 1


class ConfigError(CellfrontError):
    code = "config_error"
    exit_status = 2


class NonPositiveEquilibriumDistance(CellfrontError):
    code = "non_positive_equilibrium_distance"
    exit_status = 10


class NoBracket(CellfrontError):
    code = "no_bracket"
    exit_status = 11


class NonConvergence(CellfrontError):
    code = "non_convergence"
    exit_status = 12


class StepTooLarge(CellfrontError):
    code = "step_too_large"
    exit_status = 20


class OrderViolation(CellfrontError):
    code = "order_violation"
    exit_status = 21


class InterfaceFailure(CellfrontError):
    code = "interface_failure"
    exit_status = 30


class DomainCollapse(CellfrontError):
    code = "domain_collapse"
    exit_status = 31


class ToleranceNotMet(CellfrontError):
    code = "tolerance_not_met"
    exit_status = 32


class InsufficientData(CellfrontError):
    code = "insufficient_data"
    exit_status = 33


class BisectionFailure(CellfrontError):
    code = "bisection_failure"
    exit_status = 40


class ProfileBlowup(CellfrontError):
    code = "profile_blowup"
    exit_status = 41


class NoSignChange(CellfrontError):
    code = "no_sign_change"
    exit_status = 42


class InsufficientOverlap(CellfrontError):
    code = "insufficient_overlap"
    exit_status = 43


class MaxStepsExceeded(CellfrontError):
    code = "max_steps_exceeded"
    exit_status = 50


class StepUnderflow(CellfrontError):
    code = "step_underflow"
    exit_status = 51


class NonFiniteDerivative(CellfrontError):
    code = "non_finite_derivative"
    exit_status = 52


class OutputError(CellfrontError):
    code = "output_error"
    exit_status = 3
