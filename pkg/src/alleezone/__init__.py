"""Reaction-diffusion with a protection zone: critical lengths, ground states,
a monotone solver and outcome classification."""
from .reactions import cubic_pair, pair_from_config, polynomial_pair, tabulated_pair, validate
from .zones import Connected, Separate, zone_from_config

__version__ = "0.1.0"

__all__ = [
    "Connected",
    "Separate",
    "cubic_pair",
    "pair_from_config",
    "polynomial_pair",
    "tabulated_pair",
    "validate",
    "zone_from_config",
]
