"""Agent-based simulation of a ride-parcel-pooling fleet."""
__version__ = "0.1.0"
