"""Exception types shared across the simulator."""


class DomainError(ValueError):
    """An argument is outside the domain an operation is defined on."""


class ConfigError(ValueError):
    """A config file or config value could not be parsed or validated."""


class WorkloadError(ValueError):
    """A workload document is malformed or its layer shapes do not chain."""


class InfeasibleConfigError(RuntimeError):
    """An architecture config violates a hard resource constraint."""
