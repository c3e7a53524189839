"""glidebench: pressure-based pilot factory simulation with benchmark
campaigns, checksummed stderr result transport, score aggregation, and
cost-aware provisioning plans."""

__version__ = "0.1.0"
