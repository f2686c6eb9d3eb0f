"""Set of scripts for building docs."""
