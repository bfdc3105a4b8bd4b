"""Configuration, errors and record schemas."""
