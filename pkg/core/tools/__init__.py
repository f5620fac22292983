"""Stateless numerical helpers and file outputs."""
