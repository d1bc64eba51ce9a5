"""Command line interface and model files."""
