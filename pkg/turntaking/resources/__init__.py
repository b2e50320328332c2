"""Packaged feature-group declarations."""
