"""Demo scripts, each runnable on its own."""
