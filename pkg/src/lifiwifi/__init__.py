"""User association for hybrid LiFi/WiFi indoor networks: channel models, baselines and S-PPO."""
from .config import ConfigError, SimConfig, TrainerConfig, config_from_dict, load_config

__version__ = "0.1.0"

__all__ = ["ConfigError", "SimConfig", "TrainerConfig", "config_from_dict", "load_config", "__version__"]
