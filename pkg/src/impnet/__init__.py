"""Time-axis convolutional networks with intermap (grouped maxout) pooling, in numpy."""
from .errors import ConfigError, DataError, ImpNetError, NonFiniteError, ShapeError
from .model import NetworkConfig, Network, build, load_network, preset, save_network
from .tensor import GaussianSource, Shape

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "ImpNetError", "NonFiniteError", "ShapeError",
           "NetworkConfig", "Network", "build", "load_network", "preset", "save_network",
           "GaussianSource", "Shape"]
