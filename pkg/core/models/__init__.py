"""Pydantic and dataclass types shared by the labs and tools."""
