"""v2vsim: deterministic simulator of an 802.11p-style V2V network
sharing LiDAR point clouds over a broadcast radio."""

__version__ = "0.1.0"
