"""Shared helpers: image files and seeded random streams."""
