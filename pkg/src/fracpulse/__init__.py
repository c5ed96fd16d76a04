"""Exchange pulse design for SWAP^k gates under 1/f^alpha charge noise."""

__version__ = "0.1.0"
