"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A file, scenario, or argument failed schema or invariant validation."""


class AllocationRefused(Exception):
    """A resource allocation could not be made; ``reason`` says why.

    Raised by the network-state allocators when a request cannot get a
    wavelength, a module, or key material.  The state is left untouched.
    """

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class PlanInfeasible(ValueError):
    """A provisioning plan violates a network-state invariant on replay."""


class InstanceTooLarge(ValueError):
    """The exact solver's size guard rejected the instance."""
