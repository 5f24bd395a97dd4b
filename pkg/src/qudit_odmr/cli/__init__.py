from qudit_odmr.cli.app import cli

__all__ = ["cli"]
