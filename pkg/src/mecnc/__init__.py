"""Drift-plus-penalty control of a multi-hop MEC network (MECNC) and its simulator."""

from .model import ConfigError, Instance, build_instance, commodity_space, load_config, load_instance

__version__ = "0.1.0"

__all__ = ["ConfigError", "Instance", "build_instance", "commodity_space", "load_config",
           "load_instance", "__version__"]
