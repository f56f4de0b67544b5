"""wheelpref: design preference learning on procedurally generated wheels."""

__version__ = "0.1.0"
