"""Group-effect conditioned adversarial imitation learning of travel behaviour response."""

__version__ = '0.2'
