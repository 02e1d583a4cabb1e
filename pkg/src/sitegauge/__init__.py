"""sitegauge: crowd-sourced website privacy and security benchmarking."""

__version__ = "0.1.0"
