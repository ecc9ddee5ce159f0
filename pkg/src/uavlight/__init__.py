"""Emergency lighting with small UAVs: placement, planning, flight text and a mock swarm."""

__version__ = "0.1.0"
