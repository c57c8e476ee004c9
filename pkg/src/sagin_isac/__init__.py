"""AAV-assisted sensing, data collection and LEO offloading: models and optimizer."""

from .scenario import Scenario, load_scenario, trajectory

__version__ = "0.1.0"
__all__ = ["Scenario", "load_scenario", "trajectory", "__version__"]
