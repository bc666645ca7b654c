"""Sample-guided reinforcement learning for double-sphere manipulation."""

__version__ = "0.1.0"
