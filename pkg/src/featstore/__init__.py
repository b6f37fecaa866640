"""featstore: a desk-scale feature store with verified online/offline parity."""

__version__ = "0.1.0"
