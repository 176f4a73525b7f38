"""
Exception base shared by every pipeline layer
"""


class PipelineError(Exception):
    """Base class for errors the CLI reports as a failed command."""
